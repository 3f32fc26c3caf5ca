//! Nonnegative least squares: `min ||A x - b||_2` subject to `x >= 0`.
//!
//! [`nnls_solve`] is the Lawson–Hanson active-set method on the normal equations. Each
//! passive-set solve is a Cholesky factorisation followed by one step of iterative
//! refinement. [`nnls_oracle`] enumerates supports and is meant for verification only.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default dual-feasibility tolerance, relative to the KKT scale.
pub const DEFAULT_TOL: f64 = 1e-10;
/// Oracle refuses problems with more columns than this.
pub const ORACLE_MAX_COLS: usize = 12;
/// Passive variables at or below this value leave the passive set.
const DEGENERACY_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnlsError {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("no convergence after {} iterations; best iterate has residual {}", .best.iterations, .best.residual)]
    IterationLimit { best: Box<NnlsSolution> },
    #[error("oracle enumerates 2^n supports and accepts n <= {ORACLE_MAX_COLS}, got {n}")]
    TooLarge { n: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct NnlsProblem {
    a: DMatrix<f64>,
    b: DVector<f64>,
    pub tol: f64,
    pub max_iter: usize,
}

impl NnlsProblem {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self, NnlsError> {
        let (m, n) = a.shape();
        if m == 0 || n == 0 {
            return Err(NnlsError::InvalidProblem(format!("matrix is {m}x{n}")));
        }
        if b.len() != m {
            return Err(NnlsError::InvalidProblem(format!("A has {m} rows but b has {}", b.len())));
        }
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(NnlsError::InvalidProblem("non-finite entry".into()));
        }
        Ok(Self { a, b, tol: DEFAULT_TOL, max_iter: 3 * n })
    }

    /// Builds from a row-major slice.
    pub fn from_rows(rows: usize, cols: usize, a: &[f64], b: &[f64]) -> Result<Self, NnlsError> {
        if a.len() != rows * cols {
            return Err(NnlsError::InvalidProblem(format!("{} entries for a {rows}x{cols} matrix", a.len())));
        }
        Self::new(DMatrix::from_row_slice(rows, cols, a), DVector::from_column_slice(b))
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn residual(&self, x: &[f64]) -> f64 {
        (&self.a * DVector::from_column_slice(x) - &self.b).norm()
    }

    /// Gradient `A^T (A x - b)` of half the squared residual.
    pub fn gradient(&self, x: &[f64]) -> DVector<f64> {
        self.a.tr_mul(&(&self.a * DVector::from_column_slice(x) - &self.b))
    }

    /// Scale for the KKT tolerance: the larger of `||A^T A||_inf ||x||_inf` and
    /// `||A^T b||_inf`, the two terms that make up the gradient.
    pub fn kkt_scale(&self, x: &[f64]) -> f64 {
        let ata = self.a.tr_mul(&self.a);
        scale_of(&ata, &self.a.tr_mul(&self.b), x)
    }

    /// Largest KKT violation of `x`, divided by [`kkt_scale`](Self::kkt_scale).
    pub fn kkt_violation(&self, x: &[f64]) -> f64 {
        let g = self.gradient(x);
        let worst = x
            .iter()
            .zip(g.iter())
            .map(|(&xj, &gj)| if xj > 0.0 { gj.abs() } else { (-gj).max(0.0) })
            .fold(0.0, f64::max);
        worst / self.kkt_scale(x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NnlsSolution {
    pub x: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
    /// Relative KKT violation at `x`.
    pub kkt_violation: f64,
    pub certified: bool,
}

fn scale_of(ata: &DMatrix<f64>, atb: &DVector<f64>, x: &[f64]) -> f64 {
    let ata_inf = ata.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let x_inf = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    (ata_inf * x_inf).max(atb.amax()).max(f64::MIN_POSITIVE)
}

/// Solves the normal equations restricted to `passive` (sorted column indices).
fn passive_solve(ata: &DMatrix<f64>, atb: &DVector<f64>, passive: &[usize]) -> Option<Vec<f64>> {
    let k = passive.len();
    let sub = DMatrix::from_fn(k, k, |i, j| ata[(passive[i], passive[j])]);
    let rhs = DVector::from_fn(k, |i, _| atb[passive[i]]);
    let z = match sub.clone().cholesky() {
        Some(ch) => {
            let mut z = ch.solve(&rhs);
            let r = &rhs - &sub * &z;
            z += ch.solve(&r);
            z
        }
        None => sub.svd(true, true).solve(&rhs, 1e-14).ok()?,
    };
    z.iter().all(|v| v.is_finite()).then(|| z.iter().copied().collect())
}

/// Lawson–Hanson active-set NNLS.
///
/// The entering variable is the one with the most negative gradient component (lowest
/// index on ties). Returns [`NnlsError::IterationLimit`] carrying the best iterate if the
/// outer loop does not terminate within `max_iter` iterations.
pub fn nnls_solve(p: &NnlsProblem) -> Result<NnlsSolution, NnlsError> {
    let n = p.a.ncols();
    let ata = p.a.tr_mul(&p.a);
    let atb = p.a.tr_mul(&p.b);
    let mut x = vec![0.0; n];
    let mut in_p = vec![false; n];
    let finish = |x: Vec<f64>, iterations: usize| {
        let kkt_violation = p.kkt_violation(&x);
        NnlsSolution { residual: p.residual(&x), certified: kkt_violation <= p.tol, kkt_violation, iterations, x }
    };

    let mut iterations = 0;
    loop {
        let xv = DVector::from_column_slice(&x);
        let w = &atb - &ata * &xv;
        let scale = scale_of(&ata, &atb, &x);
        let mut enter = None;
        for j in 0..n {
            if !in_p[j] && w[j] > p.tol * scale && enter.is_none_or(|e: usize| w[j] > w[e]) {
                enter = Some(j);
            }
        }
        let Some(j) = enter else { break };
        if iterations >= p.max_iter {
            return Err(NnlsError::IterationLimit { best: Box::new(finish(x, iterations)) });
        }
        iterations += 1;
        in_p[j] = true;

        loop {
            let passive: Vec<usize> = (0..n).filter(|&i| in_p[i]).collect();
            let Some(z) = passive_solve(&ata, &atb, &passive) else {
                in_p[j] = false;
                break;
            };
            if z.iter().all(|&v| v > DEGENERACY_TOL) {
                for (&i, &v) in passive.iter().zip(&z) {
                    x[i] = v;
                }
                break;
            }
            let mut alpha = f64::INFINITY;
            for (&i, &v) in passive.iter().zip(&z) {
                if v <= DEGENERACY_TOL {
                    let denom = x[i] - v;
                    let a = if denom > 0.0 { x[i] / denom } else { 0.0 };
                    alpha = alpha.min(a);
                }
            }
            for (&i, &v) in passive.iter().zip(&z) {
                x[i] += alpha * (v - x[i]);
                if x[i] <= DEGENERACY_TOL {
                    x[i] = 0.0;
                    in_p[i] = false;
                }
            }
            if !in_p.iter().any(|&b| b) {
                break;
            }
        }
    }
    Ok(finish(x, iterations))
}

/// Exhaustive NNLS over all `2^n` supports. Each support's least-squares problem is solved
/// by SVD; candidates with a negative entry are discarded. Residual ties (to 1e-12 relative)
/// go to the smaller `||x||_2`.
pub fn nnls_oracle(p: &NnlsProblem) -> Result<Vec<f64>, NnlsError> {
    let n = p.a.ncols();
    if n > ORACLE_MAX_COLS {
        return Err(NnlsError::TooLarge { n });
    }
    let mut best = vec![0.0; n];
    let mut best_res = p.b.norm();
    for mask in 1u32..(1 << n) {
        let cols: Vec<usize> = (0..n).filter(|j| mask & (1 << j) != 0).collect();
        let sub = p.a.select_columns(&cols);
        let Ok(z) = sub.svd(true, true).solve(&p.b, 1e-13) else { continue };
        if z.iter().any(|&v| v < 0.0) {
            continue;
        }
        let mut x = vec![0.0; n];
        for (&j, &v) in cols.iter().zip(z.iter()) {
            x[j] = v;
        }
        let res = p.residual(&x);
        let tie = (res - best_res).abs() <= 1e-12 * best_res.max(1e-300);
        let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>();
        if (res < best_res && !tie) || (tie && norm(&x) < norm(&best)) {
            best = x;
            best_res = res;
        }
    }
    Ok(best)
}
