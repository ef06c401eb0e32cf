//! Configuration documents: `[environment]`, `[campaign]` and `[study]` sections.
//!
//! Unknown keys are rejected everywhere. Angles are in degrees.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{SubsetStrategy, DEFAULT_SUBSET_BUDGET};
use crate::vsh::{dipole_amplitude, PhysicalConstants, SphericalAngle};

/// Noise level of the documentation default, as a fraction of the per-sensor
/// signal RMS. Chosen so the matrix-inversion mean weight error lands near
/// -15 dB on the default environment.
pub const DEFAULT_RELATIVE_NOISE: f64 = 0.35;

/// Default volts per VSH coefficient unit.
pub const DEFAULT_CHANNEL_SCALE: f64 = 1e-4;

pub const DEFAULT_FREQUENCY_HZ: f64 = 3e9;

/// Synthetic measurement environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvironmentConfig {
    pub n_sense: usize,
    pub seed: u64,
    /// Standard deviation of the circular complex noise per sample, volts
    /// (`E|n|² = noise_sigma²`).
    pub noise_sigma: f64,
    /// Largest off-diagonal crosstalk magnitude, in `[0, 1)`.
    pub crosstalk_level: f64,
    /// Standard deviation of each channel entry, volts per coefficient unit.
    pub channel_scale: f64,
    pub frequency_hz: f64,
    pub terminal_current_a: f64,
}

impl Default for EnvironmentConfig {
    fn default() -> Self {
        let mut env = Self {
            n_sense: 10,
            seed: 1,
            noise_sigma: 0.0,
            crosstalk_level: 0.0,
            channel_scale: DEFAULT_CHANNEL_SCALE,
            frequency_hz: DEFAULT_FREQUENCY_HZ,
            terminal_current_a: 1.0,
        };
        env.noise_sigma = DEFAULT_RELATIVE_NOISE * env.signal_rms().expect("valid defaults");
        env
    }
}

impl EnvironmentConfig {
    pub fn constants(&self) -> Result<PhysicalConstants> {
        PhysicalConstants::new(self.frequency_hz, self.terminal_current_a)
    }

    /// RMS sense voltage produced by a unit-current reference dipole,
    /// `channel_scale · a₀`.
    pub fn signal_rms(&self) -> Result<f64> {
        Ok(self.channel_scale * dipole_amplitude(&self.constants()?))
    }

    /// Same environment with the noise set to `fraction` of [`Self::signal_rms`].
    pub fn with_relative_noise(mut self, fraction: f64) -> Result<Self> {
        self.noise_sigma = fraction * self.signal_rms()?;
        Ok(self)
    }

    pub fn validate(&self, n_ref: usize) -> Result<()> {
        if self.n_sense < n_ref {
            return Err(Error::InvalidConfig(format!(
                "n_sense = {} is smaller than the {n_ref} reference antennas",
                self.n_sense
            )));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::InvalidConfig(format!("noise_sigma = {} must be >= 0", self.noise_sigma)));
        }
        if !(0.0..1.0).contains(&self.crosstalk_level) {
            return Err(Error::InvalidConfig(format!(
                "crosstalk_level = {} must lie in [0, 1)",
                self.crosstalk_level
            )));
        }
        if !(self.channel_scale > 0.0 && self.channel_scale.is_finite()) {
            return Err(Error::InvalidConfig(format!("channel_scale = {} must be > 0", self.channel_scale)));
        }
        self.constants().map(|_| ())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Mi,
    Lse,
    Clse,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Mi, Method::Lse, Method::Clse];

    pub fn name(self) -> &'static str {
        match self {
            Method::Mi => "mi",
            Method::Lse => "lse",
            Method::Clse => "clse",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "mi" => Some(Method::Mi),
            "lse" => Some(Method::Lse),
            "clse" => Some(Method::Clse),
            _ => None,
        }
    }
}

/// An antenna-under-test orientation in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AutOrientation {
    pub label: String,
    pub theta_deg: f64,
    pub phi_deg: f64,
}

impl AutOrientation {
    pub fn new(label: impl Into<String>, theta_deg: f64, phi_deg: f64) -> Self {
        Self { label: label.into(), theta_deg, phi_deg }
    }

    pub fn angle(&self) -> Result<SphericalAngle> {
        SphericalAngle::from_degrees(self.theta_deg, self.phi_deg)
    }
}

/// The ten test orientations of the garage experiment.
pub fn table1_orientations() -> Vec<AutOrientation> {
    [
        (18.0, 0.0),
        (18.0, 120.0),
        (18.0, -120.0),
        (42.0, 60.0),
        (42.0, 180.0),
        (42.0, -60.0),
        (90.0, 30.0),
        (90.0, 120.0),
        (90.0, 210.0),
        (90.0, -60.0),
    ]
    .iter()
    .enumerate()
    .map(|(i, &(t, p))| AutOrientation::new((i + 1).to_string(), t, p))
    .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CampaignOptions {
    pub methods: Vec<Method>,
    /// Sensors used by matrix inversion.
    pub subset_k: usize,
    pub greedy: bool,
    pub subset_budget: u64,
    #[serde(rename = "aut")]
    pub aut_orientations: Vec<AutOrientation>,
}

impl Default for CampaignOptions {
    fn default() -> Self {
        Self {
            methods: Method::ALL.to_vec(),
            subset_k: 3,
            greedy: false,
            subset_budget: DEFAULT_SUBSET_BUDGET,
            aut_orientations: table1_orientations(),
        }
    }
}

impl CampaignOptions {
    pub fn strategy(&self) -> SubsetStrategy {
        if self.greedy {
            SubsetStrategy::Greedy
        } else {
            SubsetStrategy::Exhaustive { budget: self.subset_budget }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::InvalidConfig("campaign.methods is empty".into()));
        }
        if self.aut_orientations.is_empty() {
            return Err(Error::InvalidConfig("campaign.aut is empty".into()));
        }
        if self.subset_k == 0 {
            return Err(Error::InvalidConfig("campaign.subset_k must be positive".into()));
        }
        for aut in &self.aut_orientations {
            aut.angle().map_err(|e| {
                Error::InvalidConfig(format!("orientation {:?}: {e}", aut.label))
            })?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StudyOptions {
    /// Number of consecutive seeds (starting at `environment.seed`) to aggregate.
    pub aggregate_seeds: usize,
}

impl Default for StudyOptions {
    fn default() -> Self {
        Self { aggregate_seeds: 1 }
    }
}

/// A full campaign: environment plus analysis options.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    #[serde(default)]
    pub environment: EnvironmentConfig,
    #[serde(default)]
    pub campaign: CampaignOptions,
}


impl CampaignConfig {
    pub fn validate(&self) -> Result<()> {
        self.environment.validate(3)?;
        self.campaign.validate()?;
        if self.campaign.subset_k > self.environment.n_sense {
            return Err(Error::InvalidConfig(format!(
                "campaign.subset_k = {} exceeds n_sense = {}",
                self.campaign.subset_k, self.environment.n_sense
            )));
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.environment.seed = seed;
        self
    }
}

/// The on-disk configuration document.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDocument {
    #[serde(default)]
    pub environment: EnvironmentConfig,
    #[serde(default)]
    pub campaign: CampaignOptions,
    #[serde(default)]
    pub study: StudyOptions,
}

impl ConfigDocument {
    pub fn campaign_config(&self) -> CampaignConfig {
        CampaignConfig { environment: self.environment.clone(), campaign: self.campaign.clone() }
    }
}
