use agemort::nndmd::*;
use agemort::par::Execution;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn planted_operators_are_recovered_in_both_modes() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for t in 0..40 {
        let m = 2 + t % 7;
        let a0 = planted_operator(m, 0.1, &mut rng);
        let x0: Vec<f64> = (0..m).map(|_| rng.random_range(0.5..1.5)).collect();
        let s = build_snapshots(&trajectory(&a0, &x0, 2 * m)).unwrap();
        let row = fit_nonnegative_dmd(&s, FitMode::PerRow, Execution::default()).unwrap();
        let vec = fit_nonnegative_dmd(&s, FitMode::Vectorized, Execution::Sequential).unwrap();
        assert!((&row.a - &a0).norm() <= 1e-6, "m {m}: {}", (&row.a - &a0).norm());
        assert!((&vec.a - &a0).norm() <= 1e-6);
        assert!((row.residual - vec.residual).abs() <= 1e-8 * s.x2.norm());
    }
}

#[test]
fn spectral_limit_decays_at_the_gap() {
    // column-stochastic block with eigenvalues 1 and 0.87, plus a decaying mode 0.5
    let a = DMatrix::from_row_slice(3, 3, &[0.95, 0.08, 0.0, 0.05, 0.92, 0.0, 0.0, 0.0, 0.5]);
    let op = DmdOperator { a, kind: DmdKind::Nonnegative, residual: 0.0, kkt_violation: None };
    let x0 = [1.0, 0.2, 0.7];
    let s = spectral_analysis(&op, &x0).unwrap();
    assert!((s.xi1 - 1.0).abs() < 1e-12 && (s.gap - 0.87).abs() < 1e-12);
    assert!(s.power_iteration_distance < 1e-8);
    let f = forecast(&op, &x0, 50).unwrap();
    let norm_limit = s.limit.iter().map(|v| v * v).sum::<f64>().sqrt();
    let ratios: Vec<f64> = f
        .iter()
        .enumerate()
        .map(|(k, x)| {
            let e = x.iter().zip(&s.limit).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() / norm_limit;
            e / 0.87f64.powi(k as i32 + 1)
        })
        .collect();
    let c = ratios.iter().cloned().fold(0.0, f64::max);
    assert!(ratios[10..].iter().all(|r| *r >= c / 2.0 && *r <= c), "{ratios:?}");
}

fn regular_series() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1usize..6, 3usize..10).prop_flat_map(|(m, n)| {
        (prop::collection::vec(0.5..2.0f64, m), prop::collection::vec(prop::collection::vec(0.7..1.4f64, m), n - 1)).prop_map(
            |(x0, factors)| {
                let mut out = vec![x0];
                for f in factors {
                    let last = out.last().unwrap();
                    out.push(last.iter().zip(&f).map(|(x, g)| x * g).collect());
                }
                out
            },
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn residual_ordering_on_regular_data(series in regular_series()) {
        let s = build_snapshots(&series).unwrap();
        prop_assert!(check_assumptions(&s).holds());
        let nn = fit_nonnegative_dmd(&s, FitMode::PerRow, Execution::Sequential).unwrap();
        let st = fit_standard_dmd(&s);
        let x2 = s.x2.norm();
        prop_assert!(nn.residual < x2);
        prop_assert!(st.residual <= nn.residual + 1e-10 * x2);
    }

    #[test]
    fn nonnegative_forecasts_stay_nonnegative(seed in any::<u64>(), m in 1usize..8, horizon in 1usize..200) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(m, m, |_, _| if rng.random::<bool>() { rng.random_range(0.0..1.5) } else { 0.0 });
        let op = DmdOperator { a, kind: DmdKind::Nonnegative, residual: 0.0, kkt_violation: None };
        let x: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..3.0)).collect();
        for step in forecast(&op, &x, horizon).unwrap() {
            prop_assert!(step.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn series_is_recoverable_from_snapshots(series in regular_series()) {
        let s = build_snapshots(&series).unwrap();
        let mut back = vec![s.x1.column(0).iter().copied().collect::<Vec<f64>>()];
        for j in 0..s.pairs() {
            back.push(s.x2.column(j).iter().copied().collect());
        }
        prop_assert_eq!(back, series);
    }
}
