//! Vector-spherical-harmonic representation of l = 1 (dipole) antennas.
//!
//! The far-field pattern is written as
//!
//! ```text
//! r·E(θ, φ) = (1/k) Σ a_lm B_lm(θ, φ)
//! ```
//!
//! where the `B_lm` are orthonormal over the unit sphere, so the radiated power
//! is `|a|² / (2 η₀ k²)`. For l = 1 the TM functions are
//! `B_1m = -sqrt(3/8π) · (ê_m)_⊥`, the transverse part of the spherical unit
//! vectors `ê_{+1} = -(x̂ + iŷ)/√2`, `ê_0 = ẑ`, `ê_{-1} = (x̂ - iŷ)/√2`. A z-oriented
//! dipole therefore radiates `+sqrt(3/8π)·sinθ θ̂` per unit coefficient. The
//! convention is fixed only up to a global phase.
//!
//! Coefficient vectors are stored in the canonical order: for each degree
//! `l = 1..=l_max`, TM orders `m = -l..=l`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Vector3};
use num_complex::Complex64;
use serde::de::{self, Deserializer};
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Impedance of free space, Ω (CODATA 2018).
pub const FREE_SPACE_IMPEDANCE: f64 = 376.730_313_668;

/// Weight RMS errors at or below this value are reported as exact recovery.
pub const EXACT_RECOVERY_FLOOR: f64 = 1e-10;

const SQRT_3_OVER_8PI: f64 = 0.345_494_149_471_335_5;

/// A direction or a dipole orientation: polar angle in `[0, π]`, azimuth in `(-π, π]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphericalAngle {
    theta: f64,
    phi: f64,
}

impl SphericalAngle {
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        if !theta.is_finite() || !(0.0..=PI).contains(&theta) {
            return Err(Error::InvalidConfig(format!("polar angle {theta} rad outside [0, π]")));
        }
        if !phi.is_finite() {
            return Err(Error::InvalidConfig(format!("azimuth {phi} is not finite")));
        }
        Ok(Self { theta, phi: normalize_azimuth(phi) })
    }

    pub fn from_degrees(theta_deg: f64, phi_deg: f64) -> Result<Self> {
        Self::new(theta_deg.to_radians(), phi_deg.to_radians())
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// Unit vector (x, y, z) pointing along this direction.
    pub fn unit_vector(&self) -> Vector3<f64> {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        Vector3::new(st * cp, st * sp, ct)
    }
}

fn normalize_azimuth(phi: f64) -> f64 {
    let mut p = phi.rem_euclid(2.0 * PI);
    if p > PI {
        p -= 2.0 * PI;
    }
    // rem_euclid maps -π to π already; keep the half-open interval (-π, π]
    p
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VshFamily {
    /// Magnetic-type (transverse electric) harmonics.
    Te,
    /// Electric-type (transverse magnetic) harmonics.
    Tm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VshIndex {
    pub l: u32,
    pub m: i32,
    pub family: VshFamily,
}

impl VshIndex {
    pub fn new(l: u32, m: i32, family: VshFamily) -> Result<Self> {
        if l == 0 || m.unsigned_abs() > l {
            return Err(Error::InvalidConfig(format!("invalid VSH index l={l}, m={m}")));
        }
        Ok(Self { l, m, family })
    }

    /// Canonical TM-only ordering up to `l_max`.
    pub fn tm_layout(l_max: u32) -> Vec<VshIndex> {
        (1..=l_max)
            .flat_map(|l| {
                let l_i = l as i32;
                (-l_i..=l_i).map(move |m| VshIndex { l, m, family: VshFamily::Tm })
            })
            .collect()
    }
}

/// Complex VSH coefficients in canonical TM order.
#[derive(Debug, Clone, PartialEq)]
pub struct VshCoefficients {
    l_max: u32,
    values: Vec<Complex64>,
}

impl VshCoefficients {
    pub fn from_values(l_max: u32, values: Vec<Complex64>) -> Result<Self> {
        if l_max == 0 {
            return Err(Error::UnsupportedDegree(0));
        }
        let expected = (l_max * (l_max + 2)) as usize;
        if values.len() != expected {
            return Err(Error::DimensionMismatch {
                context: "VSH coefficient vector",
                expected,
                found: values.len(),
            });
        }
        Ok(Self { l_max, values })
    }

    /// l = 1 TM coefficients ordered m = -1, 0, +1.
    pub fn dipole(values: [Complex64; 3]) -> Self {
        Self { l_max: 1, values: values.to_vec() }
    }

    pub fn zeros(l_max: u32) -> Self {
        let n = (l_max * (l_max + 2)) as usize;
        Self { l_max, values: vec![Complex64::new(0.0, 0.0); n] }
    }

    pub fn l_max(&self) -> u32 {
        self.l_max
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn indices(&self) -> Vec<VshIndex> {
        VshIndex::tm_layout(self.l_max)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.values.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Equivalent complex Cartesian moment `Σ a_m ê_m` of the l = 1 part, as (x, y, z).
    pub fn cartesian_moment(&self) -> Result<Vector3<Complex64>> {
        if self.l_max != 1 {
            return Err(Error::UnsupportedDegree(self.l_max));
        }
        let basis = spherical_unit_vectors();
        Ok(basis
            .iter()
            .zip(&self.values)
            .fold(Vector3::zeros(), |acc, (e, a)| acc + e * *a))
    }
}

/// `ê_{-1}, ê_0, ê_{+1}` as complex Cartesian (x, y, z) vectors.
fn spherical_unit_vectors() -> [Vector3<Complex64>; 3] {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let c = |re: f64, im: f64| Complex64::new(re, im);
    [
        Vector3::new(c(s, 0.0), c(0.0, -s), c(0.0, 0.0)),
        Vector3::new(c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)),
        Vector3::new(c(-s, 0.0), c(-0.0, -s), c(0.0, 0.0)),
    ]
}

/// Expansion coefficients `conj(ê_m)·p` of a real Cartesian vector, ordered m = -1, 0, +1.
fn spherical_components(p: &Vector3<f64>) -> [Complex64; 3] {
    spherical_unit_vectors().map(|e| {
        e.iter()
            .zip(p.iter())
            .map(|(ei, pi)| ei.conj() * *pi)
            .sum()
    })
}

/// Real weights `(w_z, w_x, w_y)` of the z, x, y reference dipoles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OrientationWeights(pub [f64; 3]);

impl OrientationWeights {
    pub fn new(w_z: f64, w_x: f64, w_y: f64) -> Self {
        Self([w_z, w_x, w_y])
    }

    pub fn from_vector(v: &DVector<f64>) -> Result<Self> {
        if v.len() != 3 {
            return Err(Error::DimensionMismatch {
                context: "orientation weights",
                expected: 3,
                found: v.len(),
            });
        }
        Ok(Self([v[0], v[1], v[2]]))
    }

    pub fn as_array(&self) -> [f64; 3] {
        self.0
    }

    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.0)
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// The weights reinterpreted as a Cartesian (x, y, z) dipole direction.
    pub fn cartesian(&self) -> Vector3<f64> {
        Vector3::new(self.0[1], self.0[2], self.0[0])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    pub eta0: f64,
    pub k: f64,
    pub frequency_hz: f64,
    pub terminal_current_a: f64,
}

impl PhysicalConstants {
    /// Free-space constants at `frequency_hz` with a 1 A terminal current.
    pub fn at_frequency(frequency_hz: f64) -> Result<Self> {
        Self::new(frequency_hz, 1.0)
    }

    pub fn new(frequency_hz: f64, terminal_current_a: f64) -> Result<Self> {
        if !(frequency_hz.is_finite() && frequency_hz > 0.0) {
            return Err(Error::InvalidConstant { name: "frequency_hz", value: frequency_hz });
        }
        if !(terminal_current_a.is_finite() && terminal_current_a > 0.0) {
            return Err(Error::InvalidConstant {
                name: "terminal_current_a",
                value: terminal_current_a,
            });
        }
        Ok(Self {
            eta0: FREE_SPACE_IMPEDANCE,
            k: 2.0 * PI * frequency_hz / SPEED_OF_LIGHT,
            frequency_hz,
            terminal_current_a,
        })
    }

    pub fn wavelength(&self) -> f64 {
        2.0 * PI / self.k
    }
}

/// Radiation resistance assigned to every reference dipole at unit current, ohms.
pub const REFERENCE_RADIATION_RESISTANCE: f64 = 72.9016;

/// Radiation resistance of a thin half-wave dipole kept to its l = 1 terms,
/// `6 η₀ / π³` (≈ 72.9008 Ω with the CODATA η₀).
///
/// Projecting the half-wave pattern `cos(π/2·cosθ)/sinθ` onto the normalized
/// `sinθ` harmonic gives an l = 1 coefficient proportional to
/// `∫ cos(πu/2) du = 4/π` over `u ∈ [-1, 1]`.
pub fn half_wave_l1_resistance(eta0: f64) -> f64 {
    6.0 * eta0 / PI.powi(3)
}

/// Norm `a₀ = k·sqrt(η₀·R)·|I|` of a reference dipole's coefficient vector.
pub fn dipole_amplitude(constants: &PhysicalConstants) -> f64 {
    constants.k
        * (constants.eta0 * REFERENCE_RADIATION_RESISTANCE).sqrt()
        * constants.terminal_current_a
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AxisDipole {
    Z,
    X,
    Y,
}

impl AxisDipole {
    /// Reference order, matching the weight ordering `(w_z, w_x, w_y)`.
    pub const ALL: [AxisDipole; 3] = [AxisDipole::Z, AxisDipole::X, AxisDipole::Y];

    pub fn label(self) -> &'static str {
        match self {
            AxisDipole::Z => "z",
            AxisDipole::X => "x",
            AxisDipole::Y => "y",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        match label {
            "z" => Some(AxisDipole::Z),
            "x" => Some(AxisDipole::X),
            "y" => Some(AxisDipole::Y),
            _ => None,
        }
    }

    pub fn orientation(self) -> SphericalAngle {
        let (theta, phi) = match self {
            AxisDipole::Z => (0.0, 0.0),
            AxisDipole::X => (PI / 2.0, 0.0),
            AxisDipole::Y => (PI / 2.0, PI / 2.0),
        };
        SphericalAngle { theta, phi }
    }

    fn direction(self) -> Vector3<f64> {
        match self {
            AxisDipole::Z => Vector3::z(),
            AxisDipole::X => Vector3::x(),
            AxisDipole::Y => Vector3::y(),
        }
    }
}

/// Exact weights of a dipole rotated to `orientation`: `(cosθ, sinθ cosφ, sinθ sinφ)`.
pub fn dipole_weights(orientation: SphericalAngle) -> OrientationWeights {
    let (st, ct) = orientation.theta.sin_cos();
    let (sp, cp) = orientation.phi.sin_cos();
    OrientationWeights::new(ct, st * cp, st * sp)
}

/// l = 1 TM coefficients of a unit-current thin half-wave dipole along `axis`.
pub fn axis_dipole_coefficients(axis: AxisDipole, constants: &PhysicalConstants) -> VshCoefficients {
    let a0 = dipole_amplitude(constants);
    VshCoefficients::dipole(spherical_components(&axis.direction()).map(|c| c * a0))
}

/// Coefficients of a dipole rotated to `orientation`.
pub fn oriented_dipole_coefficients(
    orientation: SphericalAngle,
    constants: &PhysicalConstants,
) -> VshCoefficients {
    let a0 = dipole_amplitude(constants);
    VshCoefficients::dipole(spherical_components(&orientation.unit_vector()).map(|c| c * a0))
}

/// `A_R`: columns are the z, x, y axis-dipole coefficient vectors.
pub fn reference_coefficient_matrix(constants: &PhysicalConstants) -> DMatrix<Complex64> {
    let columns: Vec<DVector<Complex64>> = AxisDipole::ALL
        .iter()
        .map(|&axis| DVector::from_column_slice(axis_dipole_coefficients(axis, constants).values()))
        .collect();
    DMatrix::from_columns(&columns)
}

/// `a = A_R · w`.
pub fn coefficients_from_weights(
    a_r: &DMatrix<Complex64>,
    w: &OrientationWeights,
) -> Result<VshCoefficients> {
    if a_r.ncols() != 3 {
        return Err(Error::DimensionMismatch {
            context: "A_R columns vs weight length",
            expected: 3,
            found: a_r.ncols(),
        });
    }
    let wc = w.to_vector().map(|x| Complex64::new(x, 0.0));
    let a = a_r * wc;
    let l_max = match a.len() {
        3 => 1,
        8 => 2,
        n => {
            return Err(Error::DimensionMismatch {
                context: "A_R rows (VSH coefficient count)",
                expected: 3,
                found: n,
            })
        }
    };
    VshCoefficients::from_values(l_max, a.iter().copied().collect())
}

/// One far-field sample `r·E` in volts, split into θ̂ and φ̂ components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FarFieldSample {
    pub direction: SphericalAngle,
    pub e_theta: Complex64,
    pub e_phi: Complex64,
}

impl FarFieldSample {
    pub fn magnitude(&self) -> f64 {
        (self.e_theta.norm_sqr() + self.e_phi.norm_sqr()).sqrt()
    }
}

/// Evaluates the l = 1 TM expansion along `direction`.
pub fn far_field(
    a: &VshCoefficients,
    direction: SphericalAngle,
    constants: &PhysicalConstants,
) -> Result<FarFieldSample> {
    let moment = a.cartesian_moment()?;
    let (st, ct) = direction.theta.sin_cos();
    let (sp, cp) = direction.phi.sin_cos();
    let theta_hat = Vector3::new(ct * cp, ct * sp, -st);
    let phi_hat = Vector3::new(-sp, cp, 0.0);
    let scale = -SQRT_3_OVER_8PI / constants.k;
    let project = |u: &Vector3<f64>| -> Complex64 {
        moment.iter().zip(u.iter()).map(|(m, ui)| m * *ui).sum::<Complex64>() * scale
    };
    Ok(FarFieldSample {
        direction,
        e_theta: project(&theta_hat),
        e_phi: project(&phi_hat),
    })
}

/// `P = |a|² / (2 η₀ k²)`, watts.
pub fn radiated_power(a: &VshCoefficients, constants: &PhysicalConstants) -> f64 {
    a.norm_sqr() / (2.0 * constants.eta0 * constants.k * constants.k)
}

/// `R_r = 2P / |I|²`, ohms.
pub fn radiation_resistance(power_w: f64, constants: &PhysicalConstants) -> Result<f64> {
    let i = constants.terminal_current_a;
    if i.is_nan() || i <= 0.0 {
        return Err(Error::NonPositiveCurrent(i));
    }
    Ok(2.0 * power_w / (i * i))
}

/// Radiated power by trapezoidal quadrature of `|r·E|² / (2η₀)` over a regular
/// grid: `n_theta` polar samples spanning `[0, π]` and `n_phi` azimuth samples
/// spanning `[0, 2π)`.
pub fn integrated_power(
    a: &VshCoefficients,
    constants: &PhysicalConstants,
    n_theta: usize,
    n_phi: usize,
) -> Result<f64> {
    if n_theta < 2 || n_phi < 1 {
        return Err(Error::InvalidConfig("quadrature grid too small".into()));
    }
    let d_theta = PI / (n_theta - 1) as f64;
    let d_phi = 2.0 * PI / n_phi as f64;
    let mut total = 0.0;
    for i in 0..n_theta {
        let theta = i as f64 * d_theta;
        let edge = if i == 0 || i == n_theta - 1 { 0.5 } else { 1.0 };
        let mut ring = 0.0;
        for j in 0..n_phi {
            let dir = SphericalAngle::new(theta.min(PI), j as f64 * d_phi)?;
            let s = far_field(a, dir, constants)?;
            ring += s.e_theta.norm_sqr() + s.e_phi.norm_sqr();
        }
        total += edge * ring * theta.sin();
    }
    Ok(total * d_theta * d_phi / (2.0 * constants.eta0))
}

/// Weight error in decibels, `20·log₁₀(Δw_RMS)`, with a sentinel for exact recovery.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RmseDb {
    /// Δw_RMS at or below [`EXACT_RECOVERY_FLOOR`]; serialized as `"-inf"`.
    NegInfinity,
    Db(f64),
}

impl RmseDb {
    pub fn value(self) -> f64 {
        match self {
            RmseDb::NegInfinity => f64::NEG_INFINITY,
            RmseDb::Db(v) => v,
        }
    }

    pub fn is_exact(self) -> bool {
        matches!(self, RmseDb::NegInfinity)
    }

    /// Arithmetic mean in dB; any exact entry makes the mean exact.
    pub fn mean(values: &[RmseDb]) -> Option<RmseDb> {
        if values.is_empty() {
            return None;
        }
        if values.iter().any(|v| v.is_exact()) {
            return Some(RmseDb::NegInfinity);
        }
        Some(RmseDb::Db(values.iter().map(|v| v.value()).sum::<f64>() / values.len() as f64))
    }
}

impl std::fmt::Display for RmseDb {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RmseDb::NegInfinity => f.write_str("-inf"),
            RmseDb::Db(v) => write!(f, "{v}"),
        }
    }
}

impl Serialize for RmseDb {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            RmseDb::NegInfinity => s.serialize_str("-inf"),
            RmseDb::Db(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for RmseDb {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) if v.is_finite() => Ok(RmseDb::Db(v)),
            Raw::Num(v) => Err(de::Error::custom(format!("non-finite RMSE {v}"))),
            Raw::Str(s) if s == "-inf" => Ok(RmseDb::NegInfinity),
            Raw::Str(s) => Err(de::Error::custom(format!("expected \"-inf\" or a number, got {s:?}"))),
        }
    }
}

/// Root-mean-square weight error `sqrt(Σ(w_e - w)² / N)` (linear).
pub fn weight_rms_error(w_est: &OrientationWeights, w_true: &OrientationWeights) -> f64 {
    let n = w_est.0.len() as f64;
    (w_est.0.iter().zip(&w_true.0).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n).sqrt()
}

pub fn rmse_weights(w_est: &OrientationWeights, w_true: &OrientationWeights) -> RmseDb {
    let rms = weight_rms_error(w_est, w_true);
    if rms <= EXACT_RECOVERY_FLOOR {
        RmseDb::NegInfinity
    } else {
        RmseDb::Db(20.0 * rms.log10())
    }
}
