mod common;

use common::*;
use mpat_core::config::{CampaignConfig, Method};
use mpat_core::estimators::{rank_subsets, ChannelMatrix, DEFAULT_SUBSET_BUDGET};
use mpat_core::simulator::*;
use mpat_core::vsh::{RmseDb, REFERENCE_RADIATION_RESISTANCE};
use mpat_core::{Error, Execution};

fn config(seed: u64, noise_scale: f64, crosstalk: f64) -> CampaignConfig {
    let mut cfg = CampaignConfig::default().with_seed(seed);
    cfg.environment.noise_sigma *= noise_scale;
    cfg.environment.crosstalk_level = crosstalk;
    cfg
}

fn mean_db(result: &CampaignResult, method: Method) -> f64 {
    result.summary_for(method).unwrap().mean_rmse_db.unwrap().value()
}

/// Largest relative difference between matching metrics of two runs.
fn max_metric_deviation(a: &CampaignResult, b: &CampaignResult) -> f64 {
    let rel = |x: f64, y: f64| if x == y { 0.0 } else { (x - y).abs() / x.abs().max(y.abs()) };
    let mut worst = 0.0f64;
    assert_eq!(a.rows.len(), b.rows.len());
    for (ra, rb) in a.rows.iter().zip(&b.rows) {
        for (ea, eb) in ra.estimates.iter().zip(&rb.estimates) {
            assert_eq!(ea.method, eb.method);
            let (wa, wb) = (ea.weights.unwrap().0, eb.weights.unwrap().0);
            let scale = wa.iter().chain(&wb).fold(0.0f64, |m, x| m.max(x.abs()));
            for (x, y) in wa.iter().zip(&wb) {
                worst = worst.max((x - y).abs() / scale);
            }
            worst = worst.max(rel(ea.r_r_ohms.unwrap(), eb.r_r_ohms.unwrap()));
            match (ea.rmse_db.unwrap(), eb.rmse_db.unwrap()) {
                (RmseDb::Db(x), RmseDb::Db(y)) => worst = worst.max(rel(x, y)),
                (x, y) => assert_eq!(x, y),
            }
        }
    }
    let (sa, sb) = (a.selection.as_ref().unwrap(), b.selection.as_ref().unwrap());
    assert_eq!(sa.indices, sb.indices);
    worst.max(rel(sa.h1_bits, sb.h1_bits))
}

#[test]
fn channel_draws_have_full_column_rank() {
    for seed in 0..1000 {
        let t = synth_channel(10, 3, seed, 1e-4).unwrap();
        let scaled = t.matrix() * c(1e4, 0.0);
        let gram = scaled.adjoint() * &scaled;
        assert!(det_cofactor(&gram).re > 1e-6, "seed {seed}");
        assert_eq!(synth_channel(10, 3, seed, 1e-4).unwrap(), t);
    }
}

#[test]
fn channel_entry_statistics() {
    let mut second = 0.0;
    let mut mean = c(0.0, 0.0);
    let n = 200;
    for seed in 0..n {
        let t = synth_channel(10, 3, seed, 2.0).unwrap();
        second += t.matrix().iter().map(|z| z.norm_sqr()).sum::<f64>();
        mean += t.matrix().iter().sum::<num_complex::Complex64>();
    }
    let count = (n * 30) as f64;
    // E|t|² = 4 with 6000 samples: standard error ≈ 4/√6000
    assert!((second / count - 4.0).abs() < 0.2, "{}", second / count);
    assert!(mean.norm() / count < 0.1);
}

#[test]
fn crosstalk_condition_distribution() {
    let mut conds: Vec<f64> = (0..1000)
        .map(|seed| {
            let m = synth_crosstalk(10, 0.2, seed).unwrap();
            assert!(m.matrix().iter().enumerate().all(|(i, z)| i % 11 == 0 || z.norm() <= 0.2));
            mpat_core::estimators::condition_number(m.matrix()).unwrap()
        })
        .collect();
    conds.sort_by(f64::total_cmp);
    let q = |p: f64| conds[((conds.len() - 1) as f64 * p) as usize];
    println!("cond(M) at level 0.2 over 1000 seeds: min {:.3} median {:.3} p90 {:.3} max {:.3}", q(0.0), q(0.5), q(0.9), q(1.0));
    assert!(conds.iter().all(|x| x.is_finite()));
    assert!(q(0.5) < 10.0);
    assert!(synth_crosstalk(10, 0.0, 3).unwrap().matrix() == &CMat::identity(10, 10));
    assert_eq!(synth_crosstalk(10, 0.2, 3).unwrap(), synth_crosstalk(10, 0.2, 3).unwrap());
}

#[test]
fn noiseless_forward_model_is_exact() {
    let t = synth_channel(10, 3, 4, 1e-4).unwrap();
    let k = mpat_core::vsh::PhysicalConstants::at_frequency(3e9).unwrap();
    let a_r = mpat_core::vsh::reference_coefficient_matrix(&k);
    let o = mpat_core::vsh::SphericalAngle::from_degrees(40.0, 75.0).unwrap();
    let id = mpat_core::estimators::CrosstalkMatrix::identity(10);
    let (v_r, auts) = simulate_measurements(&t, &a_r, &[o], 0.0, &id, 4).unwrap();
    assert_eq!(v_r.matrix(), &(t.matrix() * &a_r));
    let w = mpat_core::vsh::dipole_weights(o).to_vector().map(|x| c(x, 0.0));
    assert_eq!(auts[0].vector(), &(t.matrix() * &a_r * w));
}

#[test]
fn noise_halving_lowers_error_by_six_db() {
    let seeds: Vec<u64> = (100..160).collect();
    let base = 0.1;
    let run = |scale: f64| run_seeds(&config(0, scale, 0.0), &seeds, Execution::default()).unwrap();
    let (full, half) = (run(base), run(base / 2.0));
    for method in [Method::Mi, Method::Lse] {
        let mean = |rs: &[CampaignResult]| rs.iter().map(|r| mean_db(r, method)).sum::<f64>() / rs.len() as f64;
        let drop = mean(&full) - mean(&half);
        println!("{}: halving noise lowers mean RMSE by {drop:.3} dB", method.name());
        assert!((drop - 6.0).abs() <= 1.0, "{} drop {drop}", method.name());
    }
}

#[test]
fn campaigns_are_deterministic_and_execution_independent() {
    let cfg = config(9, 1.0, 0.1);
    let a = run_campaign(&cfg, Execution::Serial).unwrap();
    assert_eq!(a, run_campaign(&cfg, Execution::Serial).unwrap());
    assert_eq!(a, run_campaign(&cfg, Execution::Parallel).unwrap());

    let seeds = [1, 2, 3, 4, 5];
    assert_eq!(run_seeds(&cfg, &seeds, Execution::Serial).unwrap(), run_seeds(&cfg, &seeds, Execution::Parallel).unwrap());

    let s = entropy_study(&cfg, Execution::Serial).unwrap();
    assert_eq!(s, entropy_study(&cfg, Execution::Parallel).unwrap());

    let set = simulate_dataset(&cfg.clone().with_seed(11)).unwrap();
    let (full, _, _) = corrected_inputs(&set, 1e12).unwrap();
    assert_eq!(
        rank_subsets(&full, 3, DEFAULT_SUBSET_BUDGET, Execution::Serial).unwrap(),
        rank_subsets(&full, 3, DEFAULT_SUBSET_BUDGET, Execution::Parallel).unwrap()
    );
}

#[test]
fn crosstalk_is_neutral_after_correction() {
    let mut worst = 0.0f64;
    for seed in 0..20 {
        let clean = run_campaign(&config(seed, 1.0, 0.0), Execution::default()).unwrap();
        let coupled = run_campaign(&config(seed, 1.0, 0.2), Execution::default()).unwrap();
        worst = worst.max(max_metric_deviation(&clean, &coupled));
    }
    println!("largest relative deviation with crosstalk 0.2: {worst:.3e}");
    assert!(worst <= 1e-9);
}

#[test]
fn clse_resistance_is_pinned_under_noise() {
    for seed in 0..10 {
        for scale in [0.0, 0.5, 1.0, 3.0] {
            let r = run_campaign(&config(seed, scale, 0.0), Execution::default()).unwrap();
            for row in &r.rows {
                let rr = row.estimate(Method::Clse).unwrap().r_r_ohms.unwrap();
                assert!((rr - REFERENCE_RADIATION_RESISTANCE).abs() <= 1e-3, "{rr}");
            }
        }
    }
}

#[test]
fn user_supplied_channel() {
    // a real, hand-built channel that is not a draw from the synthetic model
    let t = CMat::from_fn(10, 3, |i, j| c(((i * 3 + j) as f64 * 0.7).sin() * 1e-4, ((i + 2 * j) as f64).cos() * 5e-5));
    let channel = ChannelMatrix::new(t);
    let cfg = config(1, 0.0, 0.0);
    let r = run_campaign_with_channel(&cfg, &channel, Execution::default()).unwrap();
    for row in &r.rows {
        for e in &row.estimates {
            assert_eq!(e.rmse_db, Some(RmseDb::NegInfinity), "{} {}", row.label, e.method.name());
        }
    }
    let narrow = ChannelMatrix::new(CMat::zeros(9, 3));
    assert!(matches!(run_campaign_with_channel(&cfg, &narrow, Execution::default()), Err(Error::DimensionMismatch { .. })));
}

#[test]
fn means_are_row_averages() {
    let r = run_campaign(&config(5, 1.0, 0.0), Execution::default()).unwrap();
    assert_eq!(r.rows.len(), 10);
    for s in &r.summary {
        let rows: Vec<f64> = r.rows.iter().map(|row| row.estimate(s.method).unwrap().rmse_db.unwrap().value()).collect();
        let mean = rows.iter().sum::<f64>() / rows.len() as f64;
        assert!((s.mean_rmse_db.unwrap().value() - mean).abs() <= 1e-12 * mean.abs());
        let rr: Vec<f64> = r.rows.iter().map(|row| row.estimate(s.method).unwrap().r_r_ohms.unwrap()).collect();
        let mean_rr = rr.iter().sum::<f64>() / rr.len() as f64;
        assert!((s.mean_r_r_ohms.unwrap() - mean_rr).abs() <= 1e-12 * mean_rr);
    }
}
