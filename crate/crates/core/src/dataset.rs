//! In-memory model of a measurement file: reference sweeps, AUT sweeps and an
//! optional crosstalk characterization, all on the same ordered sensor list.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::ConfigDocument;
use crate::error::{Error, Result};
use crate::estimators::{CMatrix, CVector, CalibrationMatrix, CrosstalkMatrix, MeasurementVector};
use crate::vsh::{AxisDipole, SphericalAngle};

pub const MEASUREMENT_SCHEMA_VERSION: u32 = 1;

/// Voltages at every sensor for one reference antenna (`z`, `x` or `y`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceBlock {
    pub label: String,
    pub voltages: Vec<Complex64>,
}

/// Voltages at every sensor for one antenna under test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AutBlock {
    pub label: String,
    /// True orientation in degrees, when known.
    #[serde(default)]
    pub theta_deg: Option<f64>,
    #[serde(default)]
    pub phi_deg: Option<f64>,
    pub voltages: Vec<Complex64>,
}

impl AutBlock {
    pub fn orientation(&self) -> Result<Option<SphericalAngle>> {
        match (self.theta_deg, self.phi_deg) {
            (Some(t), Some(p)) => SphericalAngle::from_degrees(t, p).map(Some),
            (None, None) => Ok(None),
            _ => Err(Error::InvalidConfig(format!(
                "AUT {:?} gives only one of theta_deg / phi_deg",
                self.label
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementSet {
    pub schema_version: u32,
    pub frequency_hz: f64,
    pub sense_ids: Vec<String>,
    pub references: Vec<ReferenceBlock>,
    pub auts: Vec<AutBlock>,
    /// Row-major `M_×` (rows and columns follow `sense_ids`).
    #[serde(default)]
    pub crosstalk: Option<Vec<Vec<Complex64>>>,
    /// Configuration that generated this file, for simulated data.
    #[serde(default)]
    pub source_config: Option<ConfigDocument>,
    /// Seconds since the Unix epoch; ignored when comparing runs.
    #[serde(default)]
    pub generated_at_unix_s: Option<u64>,
}

impl MeasurementSet {
    /// Checks lengths, labels and angles. The message names the offending field.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != MEASUREMENT_SCHEMA_VERSION {
            return Err(Error::InvalidConfig(format!(
                "schema_version: unsupported version {}",
                self.schema_version
            )));
        }
        if !(self.frequency_hz > 0.0 && self.frequency_hz.is_finite()) {
            return Err(Error::InvalidConfig(format!("frequency_hz: {} is not positive", self.frequency_hz)));
        }
        let n = self.sense_ids.len();
        if n == 0 {
            return Err(Error::InvalidConfig("sense_ids: empty".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for id in &self.sense_ids {
            if !seen.insert(id) {
                return Err(Error::InvalidConfig(format!("sense_ids: duplicate label {id:?}")));
            }
        }
        for (i, r) in self.references.iter().enumerate() {
            if AxisDipole::from_label(&r.label).is_none() {
                return Err(Error::InvalidConfig(format!(
                    "references[{i}].label: {:?} is not one of z, x, y",
                    r.label
                )));
            }
            check_len(&format!("references[{i}].voltages"), r.voltages.len(), n)?;
        }
        for axis in AxisDipole::ALL {
            let count = self.references.iter().filter(|r| r.label == axis.label()).count();
            if count != 1 {
                return Err(Error::InvalidConfig(format!(
                    "references: expected exactly one {:?} block, found {count}",
                    axis.label()
                )));
            }
        }
        for (i, a) in self.auts.iter().enumerate() {
            check_len(&format!("auts[{i}].voltages"), a.voltages.len(), n)?;
            a.orientation().map_err(|e| Error::InvalidConfig(format!("auts[{i}]: {e}")))?;
        }
        if let Some(m) = &self.crosstalk {
            check_len("crosstalk (rows)", m.len(), n)?;
            for (i, row) in m.iter().enumerate() {
                check_len(&format!("crosstalk[{i}]"), row.len(), n)?;
            }
        }
        let finite = |z: &Complex64| z.re.is_finite() && z.im.is_finite();
        let all_finite = self.references.iter().flat_map(|r| &r.voltages).all(finite)
            && self.auts.iter().flat_map(|a| &a.voltages).all(finite)
            && self.crosstalk.iter().flatten().flatten().all(finite);
        if !all_finite {
            return Err(Error::InvalidConfig("voltages: non-finite value".into()));
        }
        Ok(())
    }

    /// `V_R` with columns ordered z, x, y.
    pub fn calibration_matrix(&self) -> Result<CalibrationMatrix> {
        let n = self.sense_ids.len();
        let mut v_r = CMatrix::zeros(n, 3);
        for (col, axis) in AxisDipole::ALL.iter().enumerate() {
            let block = self
                .references
                .iter()
                .find(|r| r.label == axis.label())
                .ok_or_else(|| Error::InvalidConfig(format!("references: missing {:?}", axis.label())))?;
            check_len("reference voltages", block.voltages.len(), n)?;
            v_r.set_column(col, &CVector::from_column_slice(&block.voltages));
        }
        CalibrationMatrix::new(v_r, self.sense_ids.clone())
    }

    pub fn aut_vector(&self, index: usize) -> Result<MeasurementVector> {
        let block = &self.auts[index];
        MeasurementVector::new(CVector::from_column_slice(&block.voltages), self.sense_ids.clone())
    }

    pub fn crosstalk_matrix(&self) -> Result<Option<CrosstalkMatrix>> {
        let Some(rows) = &self.crosstalk else { return Ok(None) };
        let n = rows.len();
        let m = CMatrix::from_fn(n, n, |i, j| rows[i].get(j).copied().unwrap_or_default());
        CrosstalkMatrix::new(m).map(Some)
    }

    /// Whether every AUT block carries its true orientation.
    pub fn has_truth(&self) -> bool {
        self.auts.iter().all(|a| a.theta_deg.is_some() && a.phi_deg.is_some())
    }
}

fn check_len(field: &str, found: usize, expected: usize) -> Result<()> {
    if found != expected {
        return Err(Error::InvalidConfig(format!(
            "{field}: expected {expected} entries (one per sensor), found {found}"
        )));
    }
    Ok(())
}

pub(crate) fn matrix_rows(m: &CMatrix) -> Vec<Vec<Complex64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}
