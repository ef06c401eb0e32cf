//! Synthetic multipath environment.
//!
//! The room is modeled as an i.i.d. circular complex Gaussian channel from the
//! three l = 1 coefficients to each sense antenna, additive complex Gaussian
//! noise at the sensors, and a multiplexer crosstalk matrix applied last.
//!
//! Every random draw comes from its own ChaCha8 stream keyed by
//! `(seed, purpose, index, attempt)`, so serial and parallel evaluation see the
//! same numbers and changing one part of the model never reshuffles another.
//! A degenerate draw (rank-deficient channel, singular crosstalk) is redrawn
//! with `attempt + 1`.

mod campaign;
mod study;

pub use campaign::{
    analyze, corrected_inputs, run_campaign, run_campaign_with_channel, run_seeds, AnalysisOptions, CampaignResult,
    MethodEstimate, MethodSummary, OrientationResult, SelectionReport,
};
pub use study::{aggregate_study, entropy_study, EntropyStudy, StudyAggregate, StudyRow};

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::CampaignConfig;
use crate::dataset::{matrix_rows, AutBlock, MeasurementSet, ReferenceBlock, MEASUREMENT_SCHEMA_VERSION};
use crate::error::{Error, Result};
use crate::estimators::{
    condition_number, CMatrix, CVector, CalibrationMatrix, ChannelMatrix, CrosstalkMatrix, MeasurementVector,
    DEFAULT_CONDITION_CEILING,
};
use crate::vsh::{dipole_weights, reference_coefficient_matrix, AxisDipole, SphericalAngle};

const MAX_ATTEMPTS: u64 = 64;

/// Purpose tags separating the random streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Channel = 1,
    Crosstalk = 2,
    CalibrationNoise = 3,
    AutNoise = 4,
}

pub fn stream_rng(seed: u64, stream: Stream, index: u64, attempt: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(stream as u64).to_le_bytes());
    key[16..24].copy_from_slice(&index.to_le_bytes());
    key[24..].copy_from_slice(&attempt.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Circular complex Gaussian with `E|z|² = sigma²`.
fn complex_gaussian<R: Rng>(rng: &mut R, sigma: f64) -> Complex64 {
    let s = sigma * std::f64::consts::FRAC_1_SQRT_2;
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re * s, im * s)
}

/// Random rich-multipath channel `T` (n_sense × n_vsh) with i.i.d. entries of
/// standard deviation `scale`.
pub fn synth_channel(n_sense: usize, n_vsh: usize, seed: u64, scale: f64) -> Result<ChannelMatrix> {
    if n_vsh == 0 || n_sense < n_vsh {
        return Err(Error::InvalidConfig(format!(
            "channel needs n_sense >= n_vsh >= 1, got {n_sense} x {n_vsh}"
        )));
    }
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = stream_rng(seed, Stream::Channel, 0, attempt);
        let t = CMatrix::from_fn(n_sense, n_vsh, |_, _| complex_gaussian(&mut rng, scale));
        if condition_number(&t).is_ok_and(|c| c <= DEFAULT_CONDITION_CEILING) {
            return Ok(ChannelMatrix::new(t));
        }
    }
    Err(Error::Singular { matrix: "synthetic channel", condition: f64::INFINITY, h1_bits: f64::NEG_INFINITY })
}

/// Identity plus off-diagonal couplings with uniformly random magnitude in
/// `[0, level]` and uniformly random phase.
pub fn synth_crosstalk(n: usize, level: f64, seed: u64) -> Result<CrosstalkMatrix> {
    if !(0.0..1.0).contains(&level) {
        return Err(Error::InvalidConfig(format!("crosstalk level {level} outside [0, 1)")));
    }
    if level == 0.0 {
        return Ok(CrosstalkMatrix::identity(n));
    }
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = stream_rng(seed, Stream::Crosstalk, 0, attempt);
        let mut m = CMatrix::identity(n, n);
        for j in 0..n {
            for i in 0..n {
                if i != j {
                    let mag = level * rng.random::<f64>();
                    let phase = std::f64::consts::TAU * rng.random::<f64>();
                    m[(i, j)] = Complex64::from_polar(mag, phase);
                }
            }
        }
        if condition_number(&m).is_ok_and(|c| c <= DEFAULT_CONDITION_CEILING) {
            return CrosstalkMatrix::new(m);
        }
    }
    Err(Error::Singular { matrix: "synthetic crosstalk", condition: f64::INFINITY, h1_bits: f64::NEG_INFINITY })
}

fn noise_vector(n: usize, sigma: f64, seed: u64, stream: Stream, index: u64) -> CVector {
    if sigma == 0.0 {
        return CVector::zeros(n);
    }
    let mut rng = stream_rng(seed, stream, index, 0);
    DVector::from_fn(n, |_, _| complex_gaussian(&mut rng, sigma))
}

/// Forward model: calibration column `i` is `M_×·(T·A_R·eᵢ + n)` and each AUT
/// vector is `M_×·(T·A_R·w(θ,φ) + n)`, with fresh noise for every sweep.
pub fn simulate_measurements(
    t: &ChannelMatrix,
    a_r: &CMatrix,
    orientations: &[SphericalAngle],
    noise_sigma: f64,
    crosstalk: &CrosstalkMatrix,
    seed: u64,
) -> Result<(CalibrationMatrix, Vec<MeasurementVector>)> {
    let n = t.n_sense();
    if a_r.nrows() != t.n_vsh() {
        return Err(Error::DimensionMismatch {
            context: "A_R rows vs channel columns",
            expected: t.n_vsh(),
            found: a_r.nrows(),
        });
    }
    if crosstalk.dim() != n {
        return Err(Error::DimensionMismatch { context: "crosstalk vs sensors", expected: n, found: crosstalk.dim() });
    }
    let m = crosstalk.matrix();
    let ta = t.matrix() * a_r;
    let mut v_r = CMatrix::zeros(n, a_r.ncols());
    for i in 0..a_r.ncols() {
        let clean = ta.column(i).into_owned();
        let noisy = clean + noise_vector(n, noise_sigma, seed, Stream::CalibrationNoise, i as u64);
        v_r.set_column(i, &(m * noisy));
    }
    let auts = orientations
        .iter()
        .enumerate()
        .map(|(j, o)| {
            let w = dipole_weights(*o).to_vector().map(|x| Complex64::new(x, 0.0));
            let clean = &ta * w;
            let noisy = clean + noise_vector(n, noise_sigma, seed, Stream::AutNoise, j as u64);
            MeasurementVector::with_default_ids(m * noisy)
        })
        .collect();
    Ok((CalibrationMatrix::with_default_ids(v_r)?, auts))
}

/// Simulates a full measurement set for `config` on a freshly drawn channel.
pub fn simulate_dataset(config: &CampaignConfig) -> Result<MeasurementSet> {
    let env = &config.environment;
    let t = synth_channel(env.n_sense, 3, env.seed, env.channel_scale)?;
    simulate_dataset_with_channel(config, &t)
}

/// Simulates a measurement set on a caller-supplied channel `T`.
pub fn simulate_dataset_with_channel(config: &CampaignConfig, t: &ChannelMatrix) -> Result<MeasurementSet> {
    config.validate()?;
    let env = &config.environment;
    if t.n_sense() != env.n_sense || t.n_vsh() != 3 {
        return Err(Error::DimensionMismatch {
            context: "supplied channel rows vs n_sense",
            expected: env.n_sense,
            found: t.n_sense(),
        });
    }
    let constants = env.constants()?;
    let a_r = reference_coefficient_matrix(&constants);
    let crosstalk = synth_crosstalk(env.n_sense, env.crosstalk_level, env.seed)?;
    let angles = config
        .campaign
        .aut_orientations
        .iter()
        .map(|o| o.angle())
        .collect::<Result<Vec<_>>>()?;
    let (v_r, auts) = simulate_measurements(t, &a_r, &angles, env.noise_sigma, &crosstalk, env.seed)?;
    let sense_ids = v_r.sense_ids().to_vec();
    let references = AxisDipole::ALL
        .iter()
        .enumerate()
        .map(|(col, axis)| ReferenceBlock {
            label: axis.label().to_string(),
            voltages: v_r.matrix().column(col).iter().copied().collect(),
        })
        .collect();
    let auts = config
        .campaign
        .aut_orientations
        .iter()
        .zip(auts)
        .map(|(o, v)| AutBlock {
            label: o.label.clone(),
            theta_deg: Some(o.theta_deg),
            phi_deg: Some(o.phi_deg),
            voltages: v.vector().iter().copied().collect(),
        })
        .collect();
    Ok(MeasurementSet {
        schema_version: MEASUREMENT_SCHEMA_VERSION,
        frequency_hz: env.frequency_hz,
        sense_ids,
        references,
        auts,
        crosstalk: (env.crosstalk_level > 0.0).then(|| matrix_rows(crosstalk.matrix())),
        source_config: None,
        generated_at_unix_s: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vsh::PhysicalConstants;

    #[test]
    fn channel_is_deterministic_and_full_rank() {
        let a = synth_channel(10, 3, 7, 1.0).unwrap();
        let b = synth_channel(10, 3, 7, 1.0).unwrap();
        assert_eq!(a, b);
        assert_eq!((a.n_sense(), a.n_vsh()), (10, 3));
        assert_ne!(a, synth_channel(10, 3, 8, 1.0).unwrap());
        assert!(condition_number(a.matrix()).unwrap().is_finite());
        assert!(synth_channel(2, 3, 1, 1.0).is_err());
    }

    #[test]
    fn crosstalk_contract() {
        assert_eq!(synth_crosstalk(5, 0.0, 3).unwrap(), CrosstalkMatrix::identity(5));
        let m = synth_crosstalk(10, 0.2, 3).unwrap();
        assert_eq!(m, synth_crosstalk(10, 0.2, 3).unwrap());
        for i in 0..10 {
            for j in 0..10 {
                let z = m.matrix()[(i, j)];
                if i == j {
                    assert_eq!(z, Complex64::new(1.0, 0.0));
                } else {
                    assert!(z.norm() <= 0.2 + 1e-15);
                }
            }
        }
        assert!(synth_crosstalk(3, 1.0, 0).is_err());
    }

    #[test]
    fn noiseless_forward_model() {
        let k = PhysicalConstants::at_frequency(3e9).unwrap();
        let a_r = reference_coefficient_matrix(&k);
        let t = synth_channel(6, 3, 11, 1e-4).unwrap();
        let o = SphericalAngle::from_degrees(42.0, 60.0).unwrap();
        let (v_r, auts) = simulate_measurements(&t, &a_r, &[o], 0.0, &CrosstalkMatrix::identity(6), 11).unwrap();
        let w = dipole_weights(o).to_vector().map(|x| Complex64::new(x, 0.0));
        assert_eq!(auts[0].vector(), &(t.matrix() * &a_r * &w));
        assert_eq!(v_r.matrix(), &(t.matrix() * &a_r));
    }

    #[test]
    fn streams_are_independent() {
        let mut a = stream_rng(1, Stream::CalibrationNoise, 0, 0);
        let mut b = stream_rng(1, Stream::AutNoise, 0, 0);
        assert_ne!(a.random::<u64>(), b.random::<u64>());
    }
}
