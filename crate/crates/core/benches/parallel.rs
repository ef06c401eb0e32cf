use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mpat_core::config::CampaignConfig;
use mpat_core::estimators::{rank_subsets, CalibrationMatrix, DEFAULT_SUBSET_BUDGET};
use mpat_core::simulator::{corrected_inputs, entropy_study, run_seeds, simulate_dataset};
use mpat_core::Execution;

const MODES: [(&str, Execution); 2] = [("serial", Execution::Serial), ("parallel", Execution::Parallel)];

fn calibration(n_sense: usize) -> CalibrationMatrix {
    let mut cfg = CampaignConfig::default();
    cfg.environment.n_sense = n_sense;
    let set = simulate_dataset(&cfg).unwrap();
    corrected_inputs(&set, 1e12).unwrap().0
}

fn subsets(c: &mut Criterion) {
    let mut group = c.benchmark_group("rank_subsets");
    for n in [10, 24] {
        let full = calibration(n);
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(name, n), &full, |b, full| {
                b.iter(|| rank_subsets(full, 3, DEFAULT_SUBSET_BUDGET, exec).unwrap())
            });
        }
    }
    group.finish();
}

fn study(c: &mut Criterion) {
    let cfg = CampaignConfig::default();
    let mut group = c.benchmark_group("entropy_study");
    for (name, exec) in MODES {
        group.bench_function(name, |b| b.iter(|| entropy_study(&cfg, exec).unwrap()));
    }
    group.finish();
}

fn seeds(c: &mut Criterion) {
    let cfg = CampaignConfig::default();
    let seeds: Vec<u64> = (0..32).collect();
    let mut group = c.benchmark_group("run_seeds_32");
    group.sample_size(20);
    for (name, exec) in MODES {
        group.bench_function(name, |b| b.iter(|| run_seeds(&cfg, &seeds, exec).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, subsets, study, seeds);
criterion_main!(benches);
