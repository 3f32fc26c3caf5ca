//! Dynamic mode decomposition with a nonnegative operator, plus the standard and log-space
//! baselines, iterated forecasts and the dominant-eigenvector long-term limit.

use nalgebra::{DMatrix, DVector};
use rand::{seq::SliceRandom, Rng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nnls::{nnls_solve, NnlsError, NnlsProblem};
use crate::par::Execution;

/// Largest operator handed to the dense eigensolver.
pub const MAX_DENSE_EIGEN: usize = 512;
/// Relative singular-value cutoff of the pseudoinverse in standard DMD.
pub const PINV_CUTOFF: f64 = 1e-12;
/// The dominant eigenvalue counts as simple when `|xi_1| - |xi_2| > SIMPLE_GAP * |xi_1|`.
pub const SIMPLE_GAP: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DmdError {
    #[error("need at least 2 snapshots, got {0}")]
    TooFewSnapshots(usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("log-DMD needs strictly positive data; entry ({row}, {col}) is {value}")]
    NonpositiveData { row: usize, col: usize, value: f64 },
    #[error("nonnegative operator applied to a state with a negative entry at {index}")]
    NegativeState { index: usize },
    #[error("dominant eigenvalue is not simple; leading moduli {moduli:?}")]
    NonSimpleDominant { moduli: Vec<f64> },
    #[error("operator is {0}x{0}, dense eigensolver limit is {MAX_DENSE_EIGEN}")]
    TooLarge(usize),
    #[error(transparent)]
    Nnls(#[from] NnlsError),
}

/// `X1 = [x_1 .. x_{n-1}]`, `X2 = [x_2 .. x_n]`, one column per snapshot pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotMatrices {
    pub x1: DMatrix<f64>,
    pub x2: DMatrix<f64>,
}

impl SnapshotMatrices {
    /// One column pair per `(x_k, x_{k+1})`; pairs need not come from one trajectory.
    pub fn from_pairs(pairs: &[(Vec<f64>, Vec<f64>)]) -> Result<Self, DmdError> {
        let Some((first, _)) = pairs.first() else {
            return Err(DmdError::TooFewSnapshots(0));
        };
        let m = first.len();
        if m == 0 {
            return Err(DmdError::DimensionMismatch("empty snapshot".into()));
        }
        for (k, (a, b)) in pairs.iter().enumerate() {
            if a.len() != m || b.len() != m {
                return Err(DmdError::DimensionMismatch(format!("pair {k} has lengths {} and {}, expected {m}", a.len(), b.len())));
            }
        }
        let x1 = DMatrix::from_fn(m, pairs.len(), |i, j| pairs[j].0[i]);
        let x2 = DMatrix::from_fn(m, pairs.len(), |i, j| pairs[j].1[i]);
        Ok(Self { x1, x2 })
    }

    pub fn dim(&self) -> usize {
        self.x1.nrows()
    }

    pub fn pairs(&self) -> usize {
        self.x1.ncols()
    }
}

/// Arranges an ordered series of states into shifted snapshot matrices.
pub fn build_snapshots(series: &[Vec<f64>]) -> Result<SnapshotMatrices, DmdError> {
    if series.len() < 2 {
        return Err(DmdError::TooFewSnapshots(series.len()));
    }
    let pairs: Vec<_> = series.windows(2).map(|w| (w[0].clone(), w[1].clone())).collect();
    SnapshotMatrices::from_pairs(&pairs)
}

/// Entries violating strict positivity or temporal regularity (`X1 < 2 X2` and `X2 < 2 X1`).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub positivity_violations: Vec<(usize, usize)>,
    pub regularity_violations: Vec<(usize, usize)>,
}

impl AssumptionReport {
    pub fn holds(&self) -> bool {
        self.positivity_violations.is_empty() && self.regularity_violations.is_empty()
    }
}

pub fn check_assumptions(s: &SnapshotMatrices) -> AssumptionReport {
    let mut r = AssumptionReport::default();
    for j in 0..s.pairs() {
        for i in 0..s.dim() {
            let (a, b) = (s.x1[(i, j)], s.x2[(i, j)]);
            if !(a > 0.0 && b > 0.0) {
                r.positivity_violations.push((i, j));
            }
            if !(a < 2.0 * b && b < 2.0 * a) {
                r.regularity_violations.push((i, j));
            }
        }
    }
    r
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DmdKind {
    Nonnegative,
    Standard,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FitMode {
    /// One stacked NNLS problem in `vec(A^T)`.
    Vectorized,
    /// One NNLS problem per row of `A`.
    #[default]
    PerRow,
}

/// A fitted one-step operator. For `Log` the matrix acts on elementwise logarithms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "OperatorFile", try_from = "OperatorFile")]
pub struct DmdOperator {
    pub a: DMatrix<f64>,
    pub kind: DmdKind,
    /// `||A X1 - X2||_F` in the space the fit was done in.
    pub residual: f64,
    /// Worst relative KKT violation over the NNLS subproblems (nonnegative fits only).
    pub kkt_violation: Option<f64>,
}

/// JSON container: row-major data with shape.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct OperatorFile {
    kind: DmdKind,
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    residual: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    kkt_violation: Option<f64>,
}

impl From<DmdOperator> for OperatorFile {
    fn from(op: DmdOperator) -> Self {
        let (rows, cols) = op.a.shape();
        let data = (0..rows).flat_map(|i| (0..cols).map(move |j| (i, j))).map(|(i, j)| op.a[(i, j)]).collect();
        Self { kind: op.kind, rows, cols, data, residual: op.residual, kkt_violation: op.kkt_violation }
    }
}

impl TryFrom<OperatorFile> for DmdOperator {
    type Error = String;

    fn try_from(f: OperatorFile) -> Result<Self, String> {
        if f.data.len() != f.rows * f.cols || f.rows != f.cols {
            return Err(format!("operator data has {} entries for shape {}x{}", f.data.len(), f.rows, f.cols));
        }
        if f.kind == DmdKind::Nonnegative && f.data.iter().any(|&v| v < 0.0) {
            return Err("nonnegative operator with a negative entry".into());
        }
        Ok(Self { a: DMatrix::from_row_slice(f.rows, f.cols, &f.data), kind: f.kind, residual: f.residual, kkt_violation: f.kkt_violation })
    }
}

impl DmdOperator {
    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    /// Row-major copy of the matrix.
    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.a.row_iter().map(|r| r.iter().copied().collect()).collect()
    }
}

fn frobenius_residual(a: &DMatrix<f64>, s: &SnapshotMatrices) -> f64 {
    (a * &s.x1 - &s.x2).norm()
}

/// Best nonnegative `A` for `A X1 ~ X2`.
pub fn fit_nonnegative_dmd(s: &SnapshotMatrices, mode: FitMode, exec: Execution) -> Result<DmdOperator, DmdError> {
    let m = s.dim();
    let x1t = s.x1.transpose();
    let (a, worst) = match mode {
        FitMode::PerRow => {
            let rows = exec.map_range(m, |k| {
                let b = DVector::from_iterator(s.pairs(), s.x2.row(k).iter().copied());
                NnlsProblem::new(x1t.clone(), b).and_then(|p| nnls_solve(&p))
            });
            let mut a = DMatrix::zeros(m, m);
            let mut worst = 0.0f64;
            for (k, r) in rows.into_iter().enumerate() {
                let sol = r?;
                worst = worst.max(sol.kkt_violation);
                for (j, v) in sol.x.into_iter().enumerate() {
                    a[(k, j)] = v;
                }
            }
            (a, worst)
        }
        FitMode::Vectorized => {
            // (I kron X1^T) vec(A^T) = vec(X2^T): block diagonal with m copies of X1^T
            let p = s.pairs();
            let mut big = DMatrix::zeros(m * p, m * m);
            let mut rhs = DVector::zeros(m * p);
            for k in 0..m {
                big.view_mut((k * p, k * m), (p, m)).copy_from(&x1t);
                for j in 0..p {
                    rhs[k * p + j] = s.x2[(k, j)];
                }
            }
            let sol = nnls_solve(&NnlsProblem::new(big, rhs)?)?;
            (DMatrix::from_row_slice(m, m, &sol.x), sol.kkt_violation)
        }
    };
    Ok(DmdOperator { residual: frobenius_residual(&a, s), a, kind: DmdKind::Nonnegative, kkt_violation: Some(worst) })
}

fn pseudo_inverse(x: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = x.clone().svd(true, true);
    let cutoff = PINV_CUTOFF * svd.singular_values.max();
    svd.pseudo_inverse(cutoff).expect("both factors computed")
}

/// `A = X2 X1^+` (unconstrained least squares, minimum norm).
pub fn fit_standard_dmd(s: &SnapshotMatrices) -> DmdOperator {
    let a = &s.x2 * pseudo_inverse(&s.x1);
    DmdOperator { residual: frobenius_residual(&a, s), a, kind: DmdKind::Standard, kkt_violation: None }
}

/// Standard DMD on elementwise logarithms; forecasts apply `exp(A log x)`.
pub fn fit_log_dmd(s: &SnapshotMatrices) -> Result<DmdOperator, DmdError> {
    for (mat, off) in [(&s.x1, 0), (&s.x2, 1)] {
        for j in 0..mat.ncols() {
            for i in 0..mat.nrows() {
                let v = mat[(i, j)];
                if !(v > 0.0) {
                    return Err(DmdError::NonpositiveData { row: i, col: j + off, value: v });
                }
            }
        }
    }
    let logs = SnapshotMatrices { x1: s.x1.map(f64::ln), x2: s.x2.map(f64::ln) };
    let mut op = fit_standard_dmd(&logs);
    op.kind = DmdKind::Log;
    Ok(op)
}

/// `horizon` iterates after `x_last` (which is not included).
pub fn forecast(op: &DmdOperator, x_last: &[f64], horizon: usize) -> Result<Vec<Vec<f64>>, DmdError> {
    if x_last.len() != op.dim() {
        return Err(DmdError::DimensionMismatch(format!("state has {} entries, operator is {}x{}", x_last.len(), op.dim(), op.dim())));
    }
    let mut x = DVector::from_column_slice(x_last);
    match op.kind {
        DmdKind::Nonnegative => {
            if let Some(index) = x_last.iter().position(|&v| !(v >= 0.0)) {
                return Err(DmdError::NegativeState { index });
            }
        }
        DmdKind::Log => {
            if let Some(index) = x_last.iter().position(|&v| !(v > 0.0)) {
                return Err(DmdError::NonpositiveData { row: index, col: 0, value: x_last[index] });
            }
            x = x.map(f64::ln);
        }
        DmdKind::Standard => {}
    }
    let mut out = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        x = &op.a * &x;
        out.push(match op.kind {
            DmdKind::Log => x.iter().map(|v| v.exp()).collect(),
            _ => x.iter().copied().collect(),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Eigenvalue {
    pub re: f64,
    pub im: f64,
    pub modulus: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralDecomposition {
    /// Sorted by decreasing modulus.
    pub eigenvalues: Vec<Eigenvalue>,
    /// Dominant eigenvalue (real because it is simple).
    pub xi1: f64,
    /// Right dominant eigenvector, unit 2-norm, nonnegative entry sum.
    pub v1: Vec<f64>,
    /// `|xi_2| / |xi_1|`, the asymptotic convergence rate of `A^k x0` to the limit.
    pub gap: f64,
    /// Coefficient of `v1` in the eigen-expansion of `x0`.
    pub a1: f64,
    /// `a1 v1`; for `xi1 = 1` this is `lim A^k x0`.
    pub limit: Vec<f64>,
    /// `min(||v - v1||, ||v + v1||)` for the power-iteration estimate `v`.
    pub power_iteration_distance: f64,
    pub v1_positive: bool,
}

fn normalize_sign(v: &mut DVector<f64>) {
    let n = v.norm();
    if n > 0.0 {
        *v /= n;
    }
    if v.sum() < 0.0 {
        v.neg_mut();
    }
}

/// Inverse iteration for the eigenvector of `a` closest to the real shift `xi`.
fn inverse_iteration(a: &DMatrix<f64>, xi: f64) -> Option<DVector<f64>> {
    let m = a.nrows();
    let shift = xi + 1e-10 * xi.abs().max(1.0);
    let lu = (a - DMatrix::identity(m, m) * shift).lu();
    let mut v = DVector::from_element(m, 1.0 / (m as f64).sqrt());
    for _ in 0..8 {
        let mut w = lu.solve(&v)?;
        if !w.iter().all(|x| x.is_finite()) {
            return None;
        }
        normalize_sign(&mut w);
        v = w;
    }
    Some(v)
}

/// Eigenvalues, dominant eigenpair and the long-term limit `a1 v1` of `A^k x0`.
pub fn spectral_analysis(op: &DmdOperator, x0: &[f64]) -> Result<SpectralDecomposition, DmdError> {
    let m = op.dim();
    if m > MAX_DENSE_EIGEN {
        return Err(DmdError::TooLarge(m));
    }
    if x0.len() != m {
        return Err(DmdError::DimensionMismatch(format!("x0 has {} entries, operator is {m}x{m}", x0.len())));
    }
    let mut eigenvalues: Vec<Eigenvalue> = op
        .a
        .complex_eigenvalues()
        .iter()
        .map(|z| Eigenvalue { re: z.re, im: z.im, modulus: z.norm() })
        .collect();
    eigenvalues.sort_by(|p, q| q.modulus.total_cmp(&p.modulus).then(q.re.total_cmp(&p.re)));
    let moduli: Vec<f64> = eigenvalues.iter().map(|e| e.modulus).collect();
    let top = moduli[0];
    let second = moduli.get(1).copied().unwrap_or(0.0);
    if top == 0.0 || top - second <= SIMPLE_GAP * top {
        return Err(DmdError::NonSimpleDominant { moduli: moduli.into_iter().take(4).collect() });
    }
    let xi1 = eigenvalues[0].re;
    let nonsimple = || DmdError::NonSimpleDominant { moduli: moduli.iter().copied().take(4).collect() };
    let v1 = inverse_iteration(&op.a, xi1).ok_or_else(nonsimple)?;
    let w1 = inverse_iteration(&op.a.transpose(), xi1).ok_or_else(nonsimple)?;
    let x = DVector::from_column_slice(x0);
    let a1 = w1.dot(&x) / w1.dot(&v1);
    let limit: Vec<f64> = (&v1 * a1).iter().copied().collect();

    // power iteration from a positive start, enough steps for the gap to reach 1e-12
    let gap = second / top;
    let steps = if gap > 0.0 { ((1e-12f64).ln() / gap.ln()).ceil().clamp(10.0, 100_000.0) as usize } else { 10 };
    let mut p = DVector::from_element(m, 1.0);
    for _ in 0..steps {
        p = &op.a * &p;
        let n = p.norm();
        if n == 0.0 {
            break;
        }
        p /= n;
    }
    normalize_sign(&mut p);
    let power_iteration_distance = (&p - &v1).norm().min((&p + &v1).norm());
    let v1_positive = v1.iter().all(|&v| v > 0.0);

    Ok(SpectralDecomposition {
        eigenvalues,
        xi1,
        v1: v1.iter().copied().collect(),
        gap,
        a1,
        limit,
        power_iteration_distance,
        v1_positive,
    })
}

/// A random nonnegative operator that is identifiable from one trajectory: a single
/// `m`-cycle through a shuffled index order with weights in `[0.7, 1)`, plus entries in
/// `[0, perturbation)` at about half of the positions.
pub fn planted_operator<R: Rng + ?Sized>(m: usize, perturbation: f64, rng: &mut R) -> DMatrix<f64> {
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(rng);
    let mut a = DMatrix::from_fn(m, m, |_, _| if rng.random::<f64>() < 0.5 { perturbation * rng.random::<f64>() } else { 0.0 });
    for i in 0..m {
        a[(order[(i + 1) % m], order[i])] += rng.random_range(0.7..1.0);
    }
    a
}

/// `x0, A x0, ..., A^steps x0`.
pub fn trajectory(a: &DMatrix<f64>, x0: &[f64], steps: usize) -> Vec<Vec<f64>> {
    let mut x = DVector::from_column_slice(x0);
    let mut out = vec![x0.to_vec()];
    for _ in 0..steps {
        x = a * &x;
        out.push(x.iter().copied().collect());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn op(rows: usize, data: &[f64], kind: DmdKind) -> DmdOperator {
        DmdOperator { a: DMatrix::from_row_slice(rows, rows, data), kind, residual: 0.0, kkt_violation: None }
    }

    #[test]
    fn snapshot_shift_structure() {
        let s = build_snapshots(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(s.x1.column(0).as_slice(), &[1.0, 2.0]);
        assert_eq!(s.x2.column(0).as_slice(), &[3.0, 4.0]);
        let series: Vec<Vec<f64>> = (0..4).map(|k| vec![k as f64, 10.0 + k as f64]).collect();
        let s = build_snapshots(&series).unwrap();
        assert_eq!(s.pairs(), 3);
        assert_eq!(s.x1.column(1), s.x2.column(0));
        assert_eq!(build_snapshots(&series[..1]), Err(DmdError::TooFewSnapshots(1)));
        assert!(build_snapshots(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn assumption_checks() {
        let ones = SnapshotMatrices { x1: DMatrix::from_element(2, 2, 1.0), x2: DMatrix::from_element(2, 2, 1.0) };
        assert!(check_assumptions(&ones).holds());
        let mut s = ones.clone();
        s.x2[(0, 0)] = 2.0;
        let r = check_assumptions(&s);
        assert_eq!(r.regularity_violations, vec![(0, 0)]);
        assert!(r.positivity_violations.is_empty());
        let mut s = ones;
        s.x1[(0, 0)] = 0.0;
        assert_eq!(check_assumptions(&s).positivity_violations, vec![(0, 0)]);
    }

    #[test]
    fn scalar_ratio_and_identity_fits() {
        let s = build_snapshots(&[vec![3.0], vec![6.0]]).unwrap();
        for mode in [FitMode::PerRow, FitMode::Vectorized] {
            let f = fit_nonnegative_dmd(&s, mode, Execution::Sequential).unwrap();
            assert!((f.a[(0, 0)] - 2.0).abs() < 1e-14);
        }
        assert!((fit_standard_dmd(&s).a[(0, 0)] - 2.0).abs() < 1e-14);
        let x = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 0.5, 0.3, 1.0, 2.0]);
        let same = SnapshotMatrices { x1: x.clone(), x2: x };
        let f = fit_nonnegative_dmd(&same, FitMode::PerRow, Execution::Sequential).unwrap();
        assert!(f.residual < 1e-12);
    }

    #[test]
    fn standard_matches_inverse_on_square_data() {
        let x1 = DMatrix::from_row_slice(3, 3, &[2.0, 0.1, 0.3, 0.4, 1.5, 0.2, 0.1, 0.7, 1.1]);
        let x2 = DMatrix::from_row_slice(3, 3, &[1.0, 0.5, 0.2, 0.3, 0.2, 0.9, 0.8, 0.1, 0.4]);
        let want = &x2 * x1.clone().try_inverse().unwrap();
        let s = SnapshotMatrices { x1, x2 };
        let got = fit_standard_dmd(&s).a;
        assert!((got - want).norm() < 1e-10);
        let nn = fit_nonnegative_dmd(&s, FitMode::PerRow, Execution::Sequential).unwrap();
        assert!(fit_standard_dmd(&s).residual <= nn.residual + 1e-12);
    }

    #[test]
    fn log_dmd_fixed_point_and_recursion() {
        let e = 1f64.exp();
        let s = build_snapshots(&[vec![e], vec![e * e]]).unwrap();
        let f = fit_log_dmd(&s).unwrap();
        assert!((f.a[(0, 0)] - 2.0).abs() < 1e-12);
        let next = forecast(&f, &[e * e], 1).unwrap();
        assert!((next[0][0] - e.powi(4)).abs() < 1e-10);
        let flat = build_snapshots(&[vec![e, e], vec![e, e], vec![e, e]]).unwrap();
        let f = fit_log_dmd(&flat).unwrap();
        let next = forecast(&f, &[e, e], 3).unwrap();
        assert!(next.iter().flatten().all(|v| (v - e).abs() < 1e-12));
        let bad = build_snapshots(&[vec![1.0], vec![0.0]]).unwrap();
        assert!(matches!(fit_log_dmd(&bad), Err(DmdError::NonpositiveData { .. })));
    }

    #[test]
    fn forecast_examples() {
        let id = op(2, &[1.0, 0.0, 0.0, 1.0], DmdKind::Nonnegative);
        let f = forecast(&id, &[0.3, 0.7], 4).unwrap();
        assert!(f.iter().all(|x| x == &vec![0.3, 0.7]));
        let a = op(2, &[0.9, 0.2, 0.1, 0.6], DmdKind::Nonnegative);
        let f = forecast(&a, &[1.0, 2.0], 5).unwrap();
        let p = a.a.pow(5) * DVector::from_column_slice(&[1.0, 2.0]);
        assert!((f[4][0] - p[0]).abs() < 1e-10 && (f[4][1] - p[1]).abs() < 1e-10);
        assert_eq!(forecast(&a, &[1.0], 1).unwrap_err(), DmdError::DimensionMismatch("state has 1 entries, operator is 2x2".into()));
        assert_eq!(forecast(&a, &[1.0, -1.0], 1).unwrap_err(), DmdError::NegativeState { index: 1 });
    }

    #[test]
    fn spectral_examples() {
        let a = op(2, &[0.5, 0.5, 0.5, 0.5], DmdKind::Nonnegative);
        let s = spectral_analysis(&a, &[1.0, 0.0]).unwrap();
        assert!((s.xi1 - 1.0).abs() < 1e-12);
        assert!(s.eigenvalues[1].modulus < 1e-12);
        let r = 1.0 / 2f64.sqrt();
        assert!((s.v1[0] - r).abs() < 1e-10 && (s.v1[1] - r).abs() < 1e-10);
        assert!(s.power_iteration_distance < 1e-8);
        // x0 = v1 is its own limit
        let s = spectral_analysis(&a, &[r, r]).unwrap();
        assert!((s.limit[0] - r).abs() < 1e-10 && (s.limit[1] - r).abs() < 1e-10);

        let d = op(2, &[1.0, 0.0, 0.0, 0.87], DmdKind::Nonnegative);
        let s = spectral_analysis(&d, &[1.0, 1.0]).unwrap();
        assert!((s.gap - 0.87).abs() < 1e-12);
        assert!((s.limit[0] - 1.0).abs() < 1e-10 && s.limit[1].abs() < 1e-10);
        let f = forecast(&d, &[1.0, 1.0], 20).unwrap();
        for (k, x) in f.iter().enumerate() {
            let err = ((x[0] - s.limit[0]).powi(2) + (x[1] - s.limit[1]).powi(2)).sqrt();
            assert!((err - 0.87f64.powi(k as i32 + 1)).abs() < 1e-9);
        }

        let tie = op(2, &[1.0, 0.0, 0.0, 1.0], DmdKind::Nonnegative);
        assert!(matches!(spectral_analysis(&tie, &[1.0, 1.0]), Err(DmdError::NonSimpleDominant { .. })));
    }

    #[test]
    fn operator_json_round_trip() {
        let a = op(2, &[0.9, 0.2, 0.1, 0.6], DmdKind::Nonnegative);
        let text = serde_json::to_string(&a).unwrap();
        assert!(text.contains("\"data\":[0.9,0.2,0.1,0.6]"));
        let back: DmdOperator = serde_json::from_str(&text).unwrap();
        assert_eq!(back, a);
        assert!(serde_json::from_str::<DmdOperator>(r#"{"kind":"nonnegative","rows":1,"cols":1,"data":[-1.0],"residual":0}"#).is_err());
    }
}
