use std::path::Path;
use std::str::FromStr;

use num_complex::Complex64;

use super::{check_csv_version, split_metadata, FormatError, FormatResult, CSV_SCHEMA_VERSION};
use crate::error::{Error, Result};
use crate::vsh::{far_field, PhysicalConstants, SphericalAngle, VshCoefficients};

pub const PATTERN_HEADER: [&str; 7] =
    ["theta_deg", "phi_deg", "e_theta_re", "e_theta_im", "e_phi_re", "e_phi_im", "magnitude"];

/// Angular sampling: θ from 0 to 180° and φ from 0 to 360°, both inclusive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub theta_step_deg: f64,
    pub phi_step_deg: f64,
}

impl GridSpec {
    pub fn new(theta_step_deg: f64, phi_step_deg: f64) -> Result<Self> {
        let steps = |name: &str, step: f64, span: f64| -> Result<usize> {
            let n = span / step;
            if step.is_nan() || step <= 0.0 || !n.is_finite() || (n - n.round()).abs() > 1e-9 {
                return Err(Error::InvalidConfig(format!("{name} step {step} must divide {span}°")));
            }
            Ok(n.round() as usize)
        };
        steps("theta", theta_step_deg, 180.0)?;
        steps("phi", phi_step_deg, 360.0)?;
        Ok(Self { theta_step_deg, phi_step_deg })
    }

    pub fn n_theta(&self) -> usize {
        (180.0 / self.theta_step_deg).round() as usize + 1
    }

    pub fn n_phi(&self) -> usize {
        (360.0 / self.phi_step_deg).round() as usize + 1
    }

    pub fn len(&self) -> usize {
        self.n_theta() * self.n_phi()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { theta_step_deg: 1.0, phi_step_deg: 1.0 }
    }
}

/// `"2"` or `"2x5"` (θ step × φ step, degrees).
impl FromStr for GridSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("grid {s:?}: expected <step> or <theta_step>x<phi_step>"));
        let parse = |t: &str| t.trim().parse::<f64>().map_err(|_| bad());
        match s.split_once(['x', 'X']) {
            Some((t, p)) => GridSpec::new(parse(t)?, parse(p)?),
            None => {
                let v = parse(s)?;
                GridSpec::new(v, v)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatternPoint {
    pub theta_deg: f64,
    pub phi_deg: f64,
    pub e_theta: Complex64,
    pub e_phi: Complex64,
    pub magnitude: f64,
}

/// Far field of `a` on `grid`, θ-major.
pub fn pattern_grid(a: &VshCoefficients, constants: &PhysicalConstants, grid: GridSpec) -> Result<Vec<PatternPoint>> {
    let mut out = Vec::with_capacity(grid.len());
    for i in 0..grid.n_theta() {
        let theta_deg = (i as f64 * grid.theta_step_deg).min(180.0);
        for j in 0..grid.n_phi() {
            let phi_deg = (j as f64 * grid.phi_step_deg).min(360.0);
            let s = far_field(a, SphericalAngle::from_degrees(theta_deg, phi_deg)?, constants)?;
            out.push(PatternPoint { theta_deg, phi_deg, e_theta: s.e_theta, e_phi: s.e_phi, magnitude: s.magnitude() });
        }
    }
    Ok(out)
}

/// RMS of the magnitude difference between two patterns on the same grid.
pub fn pattern_rms_deviation(a: &[PatternPoint], b: &[PatternPoint]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::DimensionMismatch { context: "pattern grids", expected: a.len(), found: b.len() });
    }
    let sum: f64 = a.iter().zip(b).map(|(p, q)| (p.magnitude - q.magnitude).powi(2)).sum();
    Ok((sum / a.len() as f64).sqrt())
}

pub fn pattern_to_csv(points: &[PatternPoint], metadata: &[(&str, String)]) -> String {
    let mut out = format!("# schema_version={CSV_SCHEMA_VERSION}\n");
    for (k, v) in metadata {
        out.push_str(&format!("# {k}={v}\n"));
    }
    out.push_str(&PATTERN_HEADER.join(","));
    out.push('\n');
    for p in points {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            p.theta_deg, p.phi_deg, p.e_theta.re, p.e_theta.im, p.e_phi.re, p.e_phi.im, p.magnitude
        ));
    }
    out
}

/// Parses a pattern CSV; returns its points and `# key=value` metadata.
/// `# key=value` lines from a file header, in order.
pub type Metadata = Vec<(String, String)>;

pub fn pattern_from_csv(text: &str, path: &Path) -> FormatResult<(Vec<PatternPoint>, Metadata)> {
    let (meta, body, skipped) = split_metadata(text);
    check_csv_version(&meta, path)?;
    let mut lines = body.lines().enumerate().map(|(i, l)| (i + skipped + 1, l));
    let (hl, header) = lines.next().ok_or_else(|| FormatError::schema(path, "missing header"))?;
    if header.trim() != PATTERN_HEADER.join(",") {
        return Err(FormatError::csv_at(path, hl as u64, format!("header must be `{}`", PATTERN_HEADER.join(","))));
    }
    let mut points = Vec::new();
    for (line, text) in lines {
        if text.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = text.split(',').collect();
        if fields.len() != PATTERN_HEADER.len() {
            return Err(FormatError::csv_at(
                path,
                line as u64,
                format!("expected {} fields, found {}", PATTERN_HEADER.len(), fields.len()),
            ));
        }
        let mut v = [0.0; 7];
        for (i, f) in fields.iter().enumerate() {
            v[i] = f.trim().parse().map_err(|_| {
                FormatError::csv_at(path, line as u64, format!("{}: not a number: {f:?}", PATTERN_HEADER[i]))
            })?;
        }
        points.push(PatternPoint {
            theta_deg: v[0],
            phi_deg: v[1],
            e_theta: Complex64::new(v[2], v[3]),
            e_phi: Complex64::new(v[4], v[5]),
            magnitude: v[6],
        });
    }
    Ok((points, meta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vsh::{axis_dipole_coefficients, AxisDipole};

    #[test]
    fn one_degree_grid_size() {
        let g: GridSpec = "1x1".parse().unwrap();
        assert_eq!((g.n_theta(), g.n_phi(), g.len()), (181, 361, 65341));
        assert_eq!("5".parse::<GridSpec>().unwrap(), GridSpec::new(5.0, 5.0).unwrap());
        assert!("7x1".parse::<GridSpec>().is_err());
        assert!("0".parse::<GridSpec>().is_err());
    }

    #[test]
    fn grid_is_theta_major_and_round_trips() {
        let k = PhysicalConstants::at_frequency(3e9).unwrap();
        let a = axis_dipole_coefficients(AxisDipole::X, &k);
        let pts = pattern_grid(&a, &k, "30x90".parse().unwrap()).unwrap();
        assert_eq!(pts.len(), 7 * 5);
        assert_eq!((pts[1].theta_deg, pts[1].phi_deg), (0.0, 90.0));
        assert_eq!((pts[5].theta_deg, pts[5].phi_deg), (30.0, 0.0));
        let text = pattern_to_csv(&pts, &[("label", "x".into())]);
        let (back, meta) = pattern_from_csv(&text, Path::new("p.csv")).unwrap();
        assert_eq!(back, pts);
        assert_eq!(super::super::meta_value(&meta, "label"), Some("x"));
        assert_eq!(pattern_rms_deviation(&pts, &back).unwrap(), 0.0);
    }
}
