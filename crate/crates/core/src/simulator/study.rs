//! Matrix-inversion error, 1-entropy and condition number over every sensor subset.

use crate::config::CampaignConfig;
use crate::error::{Error, Result};
use crate::estimators::{mi_estimate, rank_subsets, DEFAULT_CONDITION_CEILING};
use crate::exec::Execution;
use crate::simulator::corrected_inputs;
use crate::simulator::simulate_dataset;
use crate::stats::{mean, spearman};
use crate::vsh::{rmse_weights, RmseDb};

#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub indices: Vec<usize>,
    pub h1_bits: f64,
    pub condition: f64,
    /// One entry per AUT; `None` where the subset is too ill-conditioned to invert.
    pub rmse_db: Vec<Option<RmseDb>>,
    /// Mean over AUTs, `None` if any AUT failed.
    pub mean_rmse_db: Option<RmseDb>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntropyStudy {
    pub seed: u64,
    pub aut_labels: Vec<String>,
    /// Ranked by H₁, best first.
    pub rows: Vec<StudyRow>,
    /// Spearman(H₁, mean RMSE dB) over subsets with finite H₁; `None` when undefined.
    pub spearman_h1_rmse: Option<f64>,
    /// Spearman(log₁₀ cond, H₁) over subsets with finite H₁ and condition.
    pub spearman_cond_h1: Option<f64>,
}

/// Evaluates matrix inversion for every AUT on every `subset_k`-sensor subset.
pub fn entropy_study(config: &CampaignConfig, exec: Execution) -> Result<EntropyStudy> {
    config.validate()?;
    let set = simulate_dataset(config)?;
    let (full, auts, truth) = corrected_inputs(&set, DEFAULT_CONDITION_CEILING)?;
    let truth: Vec<_> = truth
        .into_iter()
        .map(|t| t.ok_or_else(|| Error::InvalidConfig("entropy study needs true orientations".into())))
        .collect::<Result<_>>()?;
    let k = config.campaign.subset_k;
    if k != full.n_ref() {
        return Err(Error::InvalidConfig(format!(
            "entropy study inverts square subsets; subset_k must be {}, got {k}",
            full.n_ref()
        )));
    }
    let ranked = rank_subsets(&full, k, config.campaign.subset_budget, exec)?;

    let rows: Vec<StudyRow> = exec.map(&ranked, |sel| {
        let rmse: Vec<Option<RmseDb>> = match full.select_rows(&sel.indices) {
            Ok(sub) => auts
                .iter()
                .zip(&truth)
                .map(|(v, t)| {
                    let v_sub = v.select(&sel.indices).ok()?;
                    let est = mi_estimate(&sub, &v_sub, DEFAULT_CONDITION_CEILING).ok()?;
                    Some(rmse_weights(&est.weights, t))
                })
                .collect(),
            Err(_) => vec![None; auts.len()],
        };
        let mean_rmse_db = rmse
            .iter()
            .copied()
            .collect::<Option<Vec<_>>>()
            .and_then(|v| RmseDb::mean(&v));
        StudyRow {
            indices: sel.indices.clone(),
            h1_bits: sel.h1_bits,
            condition: sel.condition,
            rmse_db: rmse,
            mean_rmse_db,
        }
    });

    let (h1, err): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter(|r| r.h1_bits.is_finite())
        .filter_map(|r| r.mean_rmse_db.map(|m| (r.h1_bits, m.value())))
        .unzip();
    let (log_cond, h1_c): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter(|r| r.h1_bits.is_finite() && r.condition.is_finite())
        .map(|r| (r.condition.log10(), r.h1_bits))
        .unzip();

    Ok(EntropyStudy {
        seed: config.environment.seed,
        aut_labels: set.auts.iter().map(|a| a.label.clone()).collect(),
        spearman_h1_rmse: spearman(&h1, &err),
        spearman_cond_h1: spearman(&log_cond, &h1_c),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyAggregate {
    pub studies: Vec<EntropyStudy>,
    /// Mean over the seeds where the correlation is defined.
    pub mean_spearman_h1_rmse: Option<f64>,
    pub mean_spearman_cond_h1: Option<f64>,
}

/// Runs [`entropy_study`] for `n_seeds` consecutive seeds starting at the
/// configured one.
pub fn aggregate_study(config: &CampaignConfig, n_seeds: usize, exec: Execution) -> Result<StudyAggregate> {
    if n_seeds == 0 {
        return Err(Error::InvalidConfig("aggregate_seeds must be positive".into()));
    }
    let base = config.environment.seed;
    let seeds: Vec<u64> = (0..n_seeds as u64).map(|i| base.wrapping_add(i)).collect();
    let studies = exec
        .map(&seeds, |&s| entropy_study(&config.clone().with_seed(s), Execution::Serial))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let h1: Vec<f64> = studies.iter().filter_map(|s| s.spearman_h1_rmse).collect();
    let cond: Vec<f64> = studies.iter().filter_map(|s| s.spearman_cond_h1).collect();
    Ok(StudyAggregate { mean_spearman_h1_rmse: mean(&h1), mean_spearman_cond_h1: mean(&cond), studies })
}
