//! Sequential vs parallel execution of the replicate loops and of a single
//! large DR estimate. Without the `parallel` feature both arms run
//! sequentially.

use std::hint::black_box;
use std::path::Path;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::Rng;

use offpolicy::harness::{load_csv_dataset, run_eval_protocol, run_shift_protocol, EvalProtocolConfig, LoadOptions};
use offpolicy::learners::DlmConfig;
use offpolicy::rng::stream;
use offpolicy::shift::ShiftConfig;
use offpolicy::{
    estimate, ConstantPolicy, Context, EstimatorKind, Execution, LoggedDataset, LoggedRecord, PayoffModel,
};

fn strategies() -> Vec<Execution> {
    let mut v = vec![Execution::Sequential];
    if Execution::default() != Execution::Sequential {
        v.push(Execution::default());
    }
    v
}

fn eval_protocol(c: &mut Criterion) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/yeast.csv");
    let data = load_csv_dataset(path, LoadOptions { bias: true, standardize: true }).unwrap();
    let mut group = c.benchmark_group("eval_protocol_yeast");
    group.sample_size(10);
    for exec in strategies() {
        let config = EvalProtocolConfig {
            replicates: 200,
            dlm: DlmConfig { restarts: 4, max_iterations: 200, execution: exec, ..Default::default() },
            execution: exec,
            ..Default::default()
        };
        group.bench_function(BenchmarkId::from_parameter(format!("{exec:?}")), |b| {
            b.iter(|| run_eval_protocol(black_box(&data), &config).unwrap())
        });
    }
    group.finish();
}

fn shift_protocol(c: &mut Criterion) {
    let config = ShiftConfig { population_size: 20_000, replicates: 50, ..Default::default() };
    let mut group = c.benchmark_group("shift_protocol");
    group.sample_size(10);
    for exec in strategies() {
        group.bench_function(BenchmarkId::from_parameter(format!("{exec:?}")), |b| {
            b.iter(|| run_shift_protocol(black_box(&config), None, exec).unwrap())
        });
    }
    group.finish();
}

fn dr_estimate(c: &mut Criterion) {
    let (n, d, k) = (200_000, 16, 4);
    let mut rng = stream(0, "bench", 0);
    let records = (0..n)
        .map(|_| {
            let x = Context::new((0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
            LoggedRecord::new(x, rng.random_range(0..k), rng.random(), 1.0 / k as f64).unwrap()
        })
        .collect();
    let data = LoggedDataset::new(records, k).unwrap();
    let model =
        PayoffModel::from_weights((0..k).map(|_| (0..d).map(|_| rng.random_range(-0.1..0.1)).collect()).collect())
            .unwrap();
    let policy = ConstantPolicy { k, action: 1 };
    let mut group = c.benchmark_group("dr_estimate_200k");
    for exec in strategies() {
        let opts = offpolicy::estimators::EstimatorOptions { propensity_floor: None, execution: exec };
        group.bench_function(BenchmarkId::from_parameter(format!("{exec:?}")), |b| {
            b.iter(|| estimate(EstimatorKind::Dr, black_box(&data), Some(&model), &policy, opts).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, eval_protocol, shift_protocol, dr_estimate);
criterion_main!(benches);
