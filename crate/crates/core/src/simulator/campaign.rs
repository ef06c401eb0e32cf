//! Calibration sweep → AUT sweep → estimation → per-method summary table.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::{CampaignConfig, Method};
use crate::dataset::MeasurementSet;
use crate::error::{Error, Result};
use crate::estimators::{
    clse_estimate, correct_crosstalk, correct_crosstalk_calibration, lse_estimate, mi_estimate, select_subset,
    CMatrix, CalibrationMatrix, ChannelMatrix, MeasurementVector, SubsetSelection, SubsetStrategy,
    DEFAULT_CONDITION_CEILING,
};
use crate::exec::Execution;
use crate::simulator::{simulate_dataset, simulate_dataset_with_channel};
use crate::vsh::{
    coefficients_from_weights, dipole_weights, radiated_power, radiation_resistance, reference_coefficient_matrix,
    rmse_weights, OrientationWeights, PhysicalConstants, RmseDb,
};

/// How a measurement set is analyzed.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisOptions {
    pub methods: Vec<Method>,
    pub subset_k: usize,
    pub strategy: SubsetStrategy,
    pub terminal_current_a: f64,
    pub condition_ceiling: f64,
    /// Fail on the first estimator error instead of recording it in the row.
    pub strict: bool,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            methods: Method::ALL.to_vec(),
            subset_k: 3,
            strategy: SubsetStrategy::default(),
            terminal_current_a: 1.0,
            condition_ceiling: DEFAULT_CONDITION_CEILING,
            strict: false,
        }
    }
}

impl AnalysisOptions {
    pub fn from_config(config: &CampaignConfig) -> Self {
        Self {
            methods: config.campaign.methods.clone(),
            subset_k: config.campaign.subset_k,
            strategy: config.campaign.strategy(),
            terminal_current_a: config.environment.terminal_current_a,
            condition_ceiling: DEFAULT_CONDITION_CEILING,
            strict: true,
        }
    }
}

/// The sensor subset used by matrix inversion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectionReport {
    pub strategy: String,
    pub indices: Vec<usize>,
    pub sense_ids: Vec<String>,
    pub h1_bits: f64,
    /// `None` when the subset is numerically rank deficient.
    pub condition: Option<f64>,
}

impl SelectionReport {
    fn new(sel: &SubsetSelection, cal: &CalibrationMatrix, strategy: SubsetStrategy) -> Self {
        Self {
            strategy: match strategy {
                SubsetStrategy::Exhaustive { .. } => "exhaustive".into(),
                SubsetStrategy::Greedy => "greedy".into(),
            },
            indices: sel.indices.clone(),
            sense_ids: sel.indices.iter().map(|&i| cal.sense_ids()[i].clone()).collect(),
            h1_bits: sel.h1_bits,
            condition: sel.condition.is_finite().then_some(sel.condition),
        }
    }
}

/// One estimator's output for one AUT.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodEstimate {
    pub method: Method,
    pub weights: Option<OrientationWeights>,
    /// l = 1 TM coefficients `A_R·w`, ordered m = -1, 0, +1.
    pub coefficients: Option<Vec<Complex64>>,
    /// `None` when the true orientation is unknown.
    pub rmse_db: Option<RmseDb>,
    pub r_r_ohms: Option<f64>,
    /// Matrix inversion: norm of the discarded imaginary part.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub imag_norm: Option<f64>,
    /// Constrained LSE: Lagrange multiplier.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub multiplier: Option<f64>,
    /// Constrained LSE: the minimizer was not unique.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub ambiguous: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl MethodEstimate {
    fn failed(method: Method, err: &Error) -> Self {
        Self {
            method,
            weights: None,
            coefficients: None,
            rmse_db: None,
            r_r_ohms: None,
            imag_norm: None,
            multiplier: None,
            ambiguous: false,
            error: Some(err.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrientationResult {
    pub label: String,
    pub theta_deg: Option<f64>,
    pub phi_deg: Option<f64>,
    pub estimates: Vec<MethodEstimate>,
}

impl OrientationResult {
    pub fn estimate(&self, method: Method) -> Option<&MethodEstimate> {
        self.estimates.iter().find(|e| e.method == method)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodSummary {
    pub method: Method,
    pub mean_rmse_db: Option<RmseDb>,
    pub mean_r_r_ohms: Option<f64>,
    /// Rows that produced an estimate.
    pub rows_ok: usize,
}

/// Per-orientation, per-method weight errors and radiation resistances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignResult {
    pub seed: Option<u64>,
    pub frequency_hz: f64,
    pub terminal_current_a: f64,
    pub sense_ids: Vec<String>,
    pub methods: Vec<Method>,
    pub selection: Option<SelectionReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection_error: Option<String>,
    pub rows: Vec<OrientationResult>,
    pub summary: Vec<MethodSummary>,
}

impl CampaignResult {
    pub fn summary_for(&self, method: Method) -> Option<&MethodSummary> {
        self.summary.iter().find(|s| s.method == method)
    }

    pub fn row(&self, label: &str) -> Option<&OrientationResult> {
        self.rows.iter().find(|r| r.label == label)
    }

    pub fn constants(&self) -> Result<PhysicalConstants> {
        PhysicalConstants::new(self.frequency_hz, self.terminal_current_a)
    }
}

struct Prepared {
    full: CalibrationMatrix,
    auts: Vec<MeasurementVector>,
    truth: Vec<Option<OrientationWeights>>,
}

fn prepare(set: &MeasurementSet, options: &AnalysisOptions) -> Result<Prepared> {
    set.validate()?;
    let mut full = set.calibration_matrix()?;
    let mut auts = (0..set.auts.len()).map(|j| set.aut_vector(j)).collect::<Result<Vec<_>>>()?;
    if let Some(m) = set.crosstalk_matrix()? {
        full = correct_crosstalk_calibration(&m, &full, options.condition_ceiling)?;
        auts = auts
            .iter()
            .map(|v| correct_crosstalk(&m, v, options.condition_ceiling))
            .collect::<Result<_>>()?;
    }
    let truth = set
        .auts
        .iter()
        .map(|a| a.orientation().map(|o| o.map(dipole_weights)))
        .collect::<Result<_>>()?;
    Ok(Prepared { full, auts, truth })
}

/// Crosstalk-corrected calibration matrix, AUT vectors and true weights of a
/// measurement set.
pub fn corrected_inputs(
    set: &MeasurementSet,
    ceiling: f64,
) -> Result<(CalibrationMatrix, Vec<MeasurementVector>, Vec<Option<OrientationWeights>>)> {
    let options = AnalysisOptions { condition_ceiling: ceiling, ..AnalysisOptions::default() };
    let p = prepare(set, &options)?;
    Ok((p.full, p.auts, p.truth))
}

fn finish(
    method: Method,
    weights: OrientationWeights,
    truth: Option<OrientationWeights>,
    a_r: &CMatrix,
    constants: &PhysicalConstants,
) -> Result<MethodEstimate> {
    let a = coefficients_from_weights(a_r, &weights)?;
    let r_r = radiation_resistance(radiated_power(&a, constants), constants)?;
    Ok(MethodEstimate {
        method,
        weights: Some(weights),
        coefficients: Some(a.values().to_vec()),
        rmse_db: truth.map(|t| rmse_weights(&weights, &t)),
        r_r_ohms: Some(r_r),
        imag_norm: None,
        multiplier: None,
        ambiguous: false,
        error: None,
    })
}

/// Runs the requested estimators on every AUT of a measurement set.
///
/// Crosstalk correction, when the set carries a crosstalk matrix, is applied to
/// the calibration and AUT voltages before anything else, including subset
/// selection.
pub fn analyze(
    set: &MeasurementSet,
    options: &AnalysisOptions,
    seed: Option<u64>,
    exec: Execution,
) -> Result<CampaignResult> {
    let constants = PhysicalConstants::new(set.frequency_hz, options.terminal_current_a)?;
    let prepared = prepare(set, options)?;
    let a_r = reference_coefficient_matrix(&constants);

    let wants_mi = options.methods.contains(&Method::Mi);
    let (selection, selection_error) = if wants_mi {
        if options.subset_k != prepared.full.n_ref() {
            return Err(Error::InvalidConfig(format!(
                "matrix inversion needs subset_k = {} (one sensor per reference), got {}",
                prepared.full.n_ref(),
                options.subset_k
            )));
        }
        match select_subset(&prepared.full, options.subset_k, options.strategy, exec) {
            Ok(sel) => (Some(sel), None),
            Err(e) if options.strict => return Err(e),
            Err(e) => (None, Some(e)),
        }
    } else {
        (None, None)
    };
    let subset = selection
        .as_ref()
        .map(|sel| prepared.full.select_rows(&sel.indices))
        .transpose()?;

    let estimate_one = |j: usize, method: Method| -> Result<MethodEstimate> {
        let v = &prepared.auts[j];
        let truth = prepared.truth[j];
        match method {
            Method::Mi => {
                let (sel, sub) = match (&selection, &subset) {
                    (Some(sel), Some(sub)) => (sel, sub),
                    _ => return Err(selection_error.clone().expect("selection failed")),
                };
                let est = mi_estimate(sub, &v.select(&sel.indices)?, options.condition_ceiling)?;
                let mut out = finish(method, est.weights, truth, &a_r, &constants)?;
                out.imag_norm = Some(est.imag_norm);
                Ok(out)
            }
            Method::Lse => finish(method, lse_estimate(&prepared.full, v)?, truth, &a_r, &constants),
            Method::Clse => {
                let est = clse_estimate(&prepared.full, v)?;
                let mut out = finish(method, est.weights, truth, &a_r, &constants)?;
                out.multiplier = Some(est.multiplier);
                out.ambiguous = est.ambiguous;
                Ok(out)
            }
        }
    };

    let rows: Vec<Result<OrientationResult>> = exec.map_range(set.auts.len(), |j| {
        let block = &set.auts[j];
        let mut estimates = Vec::with_capacity(options.methods.len());
        for &method in &options.methods {
            match estimate_one(j, method) {
                Ok(e) => estimates.push(e),
                Err(e) if options.strict => {
                    return Err(Error::Estimation {
                        label: block.label.clone(),
                        method: method.name(),
                        source: Box::new(e),
                    })
                }
                Err(e) => estimates.push(MethodEstimate::failed(method, &e)),
            }
        }
        Ok(OrientationResult {
            label: block.label.clone(),
            theta_deg: block.theta_deg,
            phi_deg: block.phi_deg,
            estimates,
        })
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let summary = summarize(&options.methods, &rows);

    Ok(CampaignResult {
        seed,
        frequency_hz: set.frequency_hz,
        terminal_current_a: options.terminal_current_a,
        sense_ids: set.sense_ids.clone(),
        methods: options.methods.clone(),
        selection: selection.as_ref().map(|s| SelectionReport::new(s, &prepared.full, options.strategy)),
        selection_error: selection_error.map(|e| e.to_string()),
        rows,
        summary,
    })
}

fn summarize(methods: &[Method], rows: &[OrientationResult]) -> Vec<MethodSummary> {
    methods
        .iter()
        .map(|&method| {
            let ok: Vec<&MethodEstimate> = rows
                .iter()
                .filter_map(|r| r.estimate(method))
                .filter(|e| e.error.is_none())
                .collect();
            let rmse: Vec<RmseDb> = ok.iter().filter_map(|e| e.rmse_db).collect();
            let r_r: Vec<f64> = ok.iter().filter_map(|e| e.r_r_ohms).collect();
            MethodSummary {
                method,
                mean_rmse_db: if rmse.len() == ok.len() { RmseDb::mean(&rmse) } else { None },
                mean_r_r_ohms: crate::stats::mean(&r_r),
                rows_ok: ok.len(),
            }
        })
        .collect()
}

/// Simulates and analyzes one campaign. Any estimator failure aborts the run.
pub fn run_campaign(config: &CampaignConfig, exec: Execution) -> Result<CampaignResult> {
    config.validate()?;
    let set = simulate_dataset(config)?;
    analyze(&set, &AnalysisOptions::from_config(config), Some(config.environment.seed), exec)
}

/// [`run_campaign`] on a caller-supplied channel matrix.
pub fn run_campaign_with_channel(
    config: &CampaignConfig,
    channel: &ChannelMatrix,
    exec: Execution,
) -> Result<CampaignResult> {
    let set = simulate_dataset_with_channel(config, channel)?;
    analyze(&set, &AnalysisOptions::from_config(config), Some(config.environment.seed), exec)
}

/// Runs the same campaign under each seed. Seeds are distributed over `exec`;
/// each campaign runs serially inside its worker.
pub fn run_seeds(config: &CampaignConfig, seeds: &[u64], exec: Execution) -> Result<Vec<CampaignResult>> {
    exec.map(seeds, |&seed| run_campaign(&config.clone().with_seed(seed), Execution::Serial))
        .into_iter()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::CampaignConfig;

    fn noiseless() -> CampaignConfig {
        let mut cfg = CampaignConfig::default();
        cfg.environment.noise_sigma = 0.0;
        cfg
    }

    #[test]
    fn noiseless_exact_recovery() {
        let res = run_campaign(&noiseless(), Execution::default()).unwrap();
        assert_eq!(res.rows.len(), 10);
        for row in &res.rows {
            for e in &row.estimates {
                assert_eq!(e.rmse_db, Some(RmseDb::NegInfinity), "{} {:?}", row.label, e.method);
                assert!((e.r_r_ohms.unwrap() - 72.9016).abs() < 1e-3);
            }
        }
        let sel = res.selection.unwrap();
        assert_eq!(sel.indices.len(), 3);
        assert!(sel.h1_bits.is_finite());
    }

    #[test]
    fn summary_means_match_rows() {
        let res = run_campaign(&CampaignConfig::default(), Execution::Serial).unwrap();
        for s in &res.summary {
            let vals: Vec<f64> = res.rows.iter().map(|r| r.estimate(s.method).unwrap().rmse_db.unwrap().value()).collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            assert!((s.mean_rmse_db.unwrap().value() - mean).abs() <= 1e-12);
            assert_eq!(s.rows_ok, 10);
        }
    }

    #[test]
    fn serial_and_parallel_identical() {
        let cfg = CampaignConfig::default().with_seed(42);
        let a = run_campaign(&cfg, Execution::Serial).unwrap();
        let b = run_campaign(&cfg, Execution::Parallel).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn lenient_analysis_records_errors() {
        let mut set = simulate_dataset(&noiseless()).unwrap();
        // make every reference column identical: V_R becomes rank one
        let z = set.references[0].voltages.clone();
        for r in &mut set.references {
            r.voltages = z.clone();
        }
        let res = analyze(&set, &AnalysisOptions::default(), None, Execution::Serial).unwrap();
        assert!(res.selection.is_none());
        assert!(res.selection_error.is_some());
        for row in &res.rows {
            assert!(row.estimates.iter().all(|e| e.error.is_some()));
        }
        let strict = AnalysisOptions { strict: true, methods: vec![Method::Lse], ..AnalysisOptions::default() };
        match analyze(&set, &strict, None, Execution::Serial) {
            Err(Error::Estimation { label, method, .. }) => {
                assert_eq!(label, "1");
                assert_eq!(method, "lse");
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
