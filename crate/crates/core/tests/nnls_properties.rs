use agemort::nnls::{nnls_oracle, nnls_solve, NnlsProblem};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn problem() -> impl Strategy<Value = NnlsProblem> {
    (1usize..=8, 1usize..=8).prop_flat_map(|(m, n)| {
        (prop::collection::vec(-1.0..1.0f64, m * n), prop::collection::vec(-1.0..1.0f64, m))
            .prop_map(move |(a, b)| NnlsProblem::from_rows(m, n, &a, &b).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn matches_oracle_and_certifies(p in problem()) {
        let s = nnls_solve(&p).unwrap();
        prop_assert!(s.x.iter().all(|&v| v >= 0.0));
        prop_assert!(s.certified, "kkt violation {}", s.kkt_violation);
        prop_assert!(s.residual <= p.b().norm() * (1.0 + 1e-14));
        let oracle = nnls_oracle(&p).unwrap();
        prop_assert!((s.residual - p.residual(&oracle)).abs() <= 1e-8, "{} vs {}", s.residual, p.residual(&oracle));
    }

    #[test]
    fn feasible_unconstrained_optimum_is_returned(m in 3usize..8, seed_a in prop::collection::vec(0.1..1.0f64, 64), x0 in prop::collection::vec(0.1..2.0f64, 3)) {
        // tall well-conditioned A and b in its range with positive coefficients
        let n = 3;
        let mut a = DMatrix::from_row_slice(m, n, &seed_a[..m * n]);
        for i in 0..n {
            a[(i, i)] += 3.0;
        }
        let x0 = DVector::from_column_slice(&x0);
        let b = &a * &x0;
        let p = NnlsProblem::new(a, b).unwrap();
        let s = nnls_solve(&p).unwrap();
        for (x, want) in s.x.iter().zip(x0.iter()) {
            prop_assert!((x - want).abs() <= 1e-10);
        }
    }
}
