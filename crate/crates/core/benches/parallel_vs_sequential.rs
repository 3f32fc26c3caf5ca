use agemort::data_io::{synth_generate, SynthSpec, DEFAULT_MU0};
use agemort::eki::{run_reconstruction, EkiConfig, ReconstructionData};
use agemort::interp::{MortalityCurve, DEFAULT_ANCHOR_AGES};
use agemort::nndmd::{build_snapshots, fit_nonnegative_dmd, planted_operator, trajectory, FitMode};
use agemort::par::Execution;
use agemort::pde::{simulate_year, AgeGrid, PopulationState, StepperConfig};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn reconstruction(c: &mut Criterion) {
    let mut spec = SynthSpec::default();
    spec.mortality.truncate(2);
    spec.diagnoses.truncate(2);
    let (bundle, _) = synth_generate(&spec, &AgeGrid::default(), &StepperConfig::default()).unwrap();
    let data = ReconstructionData { prevalence: &bundle.prevalence, deaths: &bundle.deaths, diagnoses: &bundle.diagnoses };
    let mut group = c.benchmark_group("eki_two_years");
    group.sample_size(10);
    for (name, exec) in MODES {
        let cfg = EkiConfig { execution: exec, ..EkiConfig::default() };
        group.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| run_reconstruction(data, &bundle.mu0, &cfg).unwrap()));
    }
    group.finish();
}

fn dmd_fit(c: &mut Criterion) {
    let m = 64;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let a0 = planted_operator(m, 0.1, &mut rng);
    let x0: Vec<f64> = (0..m).map(|_| rng.random_range(0.5..1.5)).collect();
    let s = build_snapshots(&trajectory(&a0, &x0, 2 * m)).unwrap();
    let mut group = c.benchmark_group("nndmd_per_row_m64");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| fit_nonnegative_dmd(&s, FitMode::PerRow, exec).unwrap()));
    }
    group.finish();
}

fn positivity_batch(c: &mut Criterion) {
    let g = AgeGrid::default();
    let cfg = StepperConfig::default();
    let mu = MortalityCurve::from_values(&DEFAULT_ANCHOR_AGES, &DEFAULT_MU0).unwrap().sample(g.ages());
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let cases: Vec<(Vec<f64>, Vec<f64>)> =
        (0..64).map(|_| ((0..g.len()).map(|_| 100.0 * rng.random::<f64>()).collect(), (0..g.len()).map(|_| rng.random::<f64>()).collect())).collect();
    let mut group = c.benchmark_group("pde_year_batch64");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                exec.map_slice(&cases, |_, (u, lam)| {
                    let hist = [PopulationState::new(g, u.clone(), 0.0).unwrap()];
                    simulate_year(&hist, &mu, lam, &cfg).unwrap().min_unclipped
                })
            })
        });
    }
    group.finish();
}

criterion_group!(benches, reconstruction, dmd_fit, positivity_batch);
criterion_main!(benches);
