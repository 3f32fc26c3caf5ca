//! Ensemble Kalman inversion of yearly mortality curves from bracketed annual deaths.
//!
//! For every calendar year each ensemble member simulates the transport equation from its
//! saved start-of-year history, using its own mortality anchors and disaggregated
//! diagnoses, and accumulates deaths per surveillance bracket. The anchors are then moved
//! with the perturbed-observation Kalman update, and the year is re-simulated from the
//! same saved history. After the last filter pass the members keep their final two states
//! as the history for the next year, and the anchors carry over unchanged.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use crate::pde::{Bracket, BracketScheme};
use crate::{
    interp::{AnchorSet, InterpError, MortalityCurve},
    par::Execution,
    pde::{self, AgeGrid, PdeError, PopulationState, SourceCurve, StepperConfig},
    rng::{purpose, stream},
};

/// Lower bound applied to every anchor after sampling or updating (1/year).
pub const MORTALITY_FLOOR: f64 = 1e-8;

/// Innovation matrices with a condition number above this are rejected.
pub const MAX_INNOVATION_CONDITION: f64 = 1e12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EkiError {
    #[error(transparent)]
    Pde(#[from] PdeError),
    #[error(transparent)]
    Interp(#[from] InterpError),
    #[error("data years inconsistent: {0}")]
    DataYearMismatch(String),
    #[error("bracket {bracket} contains no grid node")]
    EmptyBracket { bracket: usize },
    #[error("innovation covariance is numerically singular (condition {condition:e})")]
    SingularInnovation { condition: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeriesKind {
    Deaths,
    Diagnoses,
    Prevalence,
}

/// Yearly per-bracket counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BracketedSeries {
    pub kind: SeriesKind,
    pub scheme: BracketScheme,
    pub years: Vec<i32>,
    /// One row per year, one entry per bracket.
    pub counts: Vec<Vec<f64>>,
}

impl BracketedSeries {
    pub fn new(kind: SeriesKind, scheme: BracketScheme, years: Vec<i32>, counts: Vec<Vec<f64>>) -> Result<Self, EkiError> {
        if years.len() != counts.len() {
            return Err(EkiError::DimensionMismatch(format!("{} years but {} rows", years.len(), counts.len())));
        }
        for (y, row) in years.iter().zip(&counts) {
            if row.len() != scheme.len() {
                return Err(EkiError::DimensionMismatch(format!("year {y}: {} counts for {} brackets", row.len(), scheme.len())));
            }
            if row.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
                return Err(EkiError::DimensionMismatch(format!("year {y}: negative or non-finite count")));
            }
        }
        Ok(Self { kind, scheme, years, counts })
    }

    pub fn row(&self, year: i32) -> Option<&[f64]> {
        self.years.iter().position(|&y| y == year).map(|i| self.counts[i].as_slice())
    }

    /// True when years are strictly consecutive.
    pub fn is_contiguous(&self) -> bool {
        self.years.windows(2).all(|w| w[1] == w[0] + 1)
    }
}

/// Spreads bracket counts over grid nodes. Within a bracket the node weights are
/// independent uniform(0, 1) draws normalised to sum to one, so bracket sums are preserved.
pub fn disaggregate_brackets<R: Rng + ?Sized>(
    counts: &[f64],
    grid: &AgeGrid,
    scheme: &BracketScheme,
    rng: &mut R,
) -> Result<Vec<f64>, EkiError> {
    if counts.len() != scheme.len() {
        return Err(EkiError::DimensionMismatch(format!("{} counts for {} brackets", counts.len(), scheme.len())));
    }
    let mut out = vec![0.0; grid.len()];
    for (b, range) in scheme.node_ranges(grid)?.into_iter().enumerate() {
        if range.is_empty() {
            return Err(EkiError::EmptyBracket { bracket: b });
        }
        let weights: Vec<f64> = range.clone().map(|_| rng.random::<f64>()).collect();
        let total: f64 = weights.iter().sum();
        let n = weights.len() as f64;
        for (w, i) in weights.iter().zip(range) {
            let share = if total > 0.0 { w / total } else { 1.0 / n };
            out[i] = counts[b] * share;
        }
    }
    Ok(out)
}

/// `J` anchor vectors drawn componentwise from `N(mu0_i, mu0_i^2)` and floored.
pub fn init_mortality_ensemble(mu0: &MortalityCurve, members: usize, seed: u64) -> Vec<Vec<f64>> {
    let base = mu0.anchors().values();
    (0..members)
        .map(|j| {
            let mut rng = stream(seed, &[purpose::MORTALITY_INIT, j as u64]);
            base.iter()
                .map(|&m| {
                    let draw = if m > 0.0 { Normal::new(m, m).expect("finite sd").sample(&mut rng) } else { 0.0 };
                    draw.max(MORTALITY_FLOOR)
                })
                .collect()
        })
        .collect()
}

/// Static inputs of the observation operator.
#[derive(Debug, Clone)]
pub struct ObservationModel {
    pub grid: AgeGrid,
    pub stepper: StepperConfig,
    pub scheme: BracketScheme,
    pub anchor_ages: Vec<f64>,
}

impl ObservationModel {
    /// Grid rates of the PCHIP curve through `anchors`.
    pub fn mortality_on_grid(&self, anchors: &[f64]) -> Result<Vec<f64>, EkiError> {
        let curve = MortalityCurve::new(AnchorSet::new(self.anchor_ages.clone(), anchors.to_vec())?);
        Ok(curve.sample(self.grid.ages()))
    }
}

/// Simulates one year from `history` with the given anchors and returns the year output and
/// the predicted deaths per bracket. Deterministic: same inputs give the same `G`.
pub fn observe(
    history: &[PopulationState],
    anchors: &[f64],
    source: &SourceCurve,
    model: &ObservationModel,
) -> Result<(pde::YearOutput, Vec<f64>), EkiError> {
    let mu = model.mortality_on_grid(anchors)?;
    let out = pde::simulate_year(history, &mu, &source.lam, &model.stepper)?;
    let g = pde::bracket_aggregate(&out.deaths_by_age, &model.grid, &model.scheme)?;
    Ok((out, g))
}

/// Which matrix is inverted in the gain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Denominator {
    /// `C (D + Gamma)^-1`, the standard ensemble Kalman inversion gain.
    #[default]
    Gamma,
    /// `C (D + Gamma^-1)^-1`, as literally printed in the source algorithm.
    GammaInverse,
}

/// Inputs of one Kalman update that are not per-member.
#[derive(Debug, Clone)]
pub struct UpdateInputs<'a> {
    pub y: &'a [f64],
    /// Diagonal of the observation covariance.
    pub gamma: &'a [f64],
    /// Diagonal of the perturbation covariance for `eta`.
    pub q: &'a [f64],
    pub denominator: Denominator,
    pub floor: f64,
}

fn mean_of(rows: &[Vec<f64>]) -> Vec<f64> {
    let n = rows.len() as f64;
    let mut m = vec![0.0; rows[0].len()];
    for r in rows {
        for (a, b) in m.iter_mut().zip(r) {
            *a += b;
        }
    }
    m.iter_mut().for_each(|a| *a /= n);
    m
}

/// Perturbed-observation update of every member:
/// `mu_j + C (D + Gamma)^-1 (y + eta_j - G_j)`, `eta_j ~ N(0, diag(q))`, then floored.
///
/// `C` and `D` are the `1/J` ensemble cross- and auto-covariances. `eta_j` is drawn from
/// `rngs[j]` so that results do not depend on member scheduling.
pub fn eki_update<R: Rng>(
    anchors: &[Vec<f64>],
    gs: &[Vec<f64>],
    inputs: &UpdateInputs<'_>,
    rngs: &mut [R],
) -> Result<Vec<Vec<f64>>, EkiError> {
    let j = anchors.len();
    if j < 2 || gs.len() != j || rngs.len() != j {
        return Err(EkiError::DimensionMismatch(format!("{} anchors, {} predictions, {} rngs (need J >= 2)", j, gs.len(), rngs.len())));
    }
    let p = anchors[0].len();
    let d = inputs.y.len();
    if gs.iter().any(|g| g.len() != d) || anchors.iter().any(|a| a.len() != p) || inputs.gamma.len() != d || inputs.q.len() != d {
        return Err(EkiError::DimensionMismatch("ragged ensemble or covariance".into()));
    }
    let mu_bar = mean_of(anchors);
    let g_bar = mean_of(gs);
    let mut c = DMatrix::<f64>::zeros(p, d);
    let mut dd = DMatrix::<f64>::zeros(d, d);
    for (a, g) in anchors.iter().zip(gs) {
        let da = DVector::from_iterator(p, a.iter().zip(&mu_bar).map(|(x, m)| x - m));
        let dg = DVector::from_iterator(d, g.iter().zip(&g_bar).map(|(x, m)| x - m));
        c += &da * dg.transpose();
        dd += &dg * dg.transpose();
    }
    c /= j as f64;
    dd /= j as f64;

    let mut s = dd;
    for k in 0..d {
        let add = match inputs.denominator {
            Denominator::Gamma => inputs.gamma[k],
            Denominator::GammaInverse => 1.0 / inputs.gamma[k],
        };
        s[(k, k)] += add;
    }
    let sv = s.singular_values();
    let (smax, smin) = (sv.max(), sv.min());
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition <= MAX_INNOVATION_CONDITION) {
        return Err(EkiError::SingularInnovation { condition });
    }
    // K = C S^-1 via S^T K^T = C^T
    let kt = s.transpose().lu().solve(&c.transpose()).ok_or(EkiError::SingularInnovation { condition })?;
    let gain = kt.transpose();

    let sd: Vec<f64> = inputs.q.iter().map(|v| v.max(0.0).sqrt()).collect();
    let mut out = Vec::with_capacity(j);
    for ((a, g), rng) in anchors.iter().zip(gs).zip(rngs.iter_mut()) {
        let innov = DVector::from_iterator(
            d,
            (0..d).map(|k| {
                let eta = if sd[k] > 0.0 { Normal::new(0.0, sd[k]).expect("finite sd").sample(rng) } else { 0.0 };
                inputs.y[k] + eta - g[k]
            }),
        );
        let step = &gain * innov;
        out.push(a.iter().zip(step.iter()).map(|(x, dx)| (x + dx).max(inputs.floor)).collect());
    }
    Ok(out)
}

/// Observation or perturbation covariance (diagonal, persons^2).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceSpec {
    /// Bracket-wise variance of `G(u_t0, mu0)` across the initial state ensemble.
    #[default]
    InitialSpread,
    Diagonal(Vec<f64>),
    /// One diagonal per calendar year.
    PerYear(BTreeMap<i32, Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EkiConfig {
    pub ensemble_size: usize,
    pub filter_steps: usize,
    pub grid: AgeGrid,
    pub stepper: StepperConfig,
    pub anchor_ages: Vec<f64>,
    pub gamma: CovarianceSpec,
    pub q: CovarianceSpec,
    pub denominator: Denominator,
    /// At the start of each year after the first, members are redrawn around the carried
    /// ensemble mean with relative spread at least this (1 matches the initial prior).
    /// 0 carries members over unchanged.
    pub restart_spread: f64,
    pub seed: u64,
    #[serde(skip, default)]
    pub execution: Execution,
}

impl Default for EkiConfig {
    fn default() -> Self {
        Self {
            ensemble_size: 100,
            filter_steps: 10,
            grid: AgeGrid::default(),
            stepper: StepperConfig::default(),
            anchor_ages: crate::interp::DEFAULT_ANCHOR_AGES.to_vec(),
            gamma: CovarianceSpec::InitialSpread,
            q: CovarianceSpec::InitialSpread,
            denominator: Denominator::Gamma,
            restart_spread: 1.0,
            seed: 0,
            execution: Execution::default(),
        }
    }
}

/// Observed data for a reconstruction.
#[derive(Debug, Clone, Copy)]
pub struct ReconstructionData<'a> {
    /// Year-end counts for the year before the first reconstructed year.
    pub prevalence: &'a BracketedSeries,
    pub deaths: &'a BracketedSeries,
    pub diagnoses: &'a BracketedSeries,
}

/// Per-year output of [`run_reconstruction`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YearReconstruction {
    pub year: i32,
    /// Ensemble-mean anchors after the final filter pass.
    pub mean_anchors: Vec<f64>,
    pub std_anchors: Vec<f64>,
    /// Ensemble-mean predicted bracket deaths at the final pass.
    pub fitted_deaths: Vec<f64>,
    pub observed_deaths: Vec<f64>,
    /// `||y - mean(G)||` at each filter pass.
    pub residuals: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionResult {
    pub anchor_ages: Vec<f64>,
    pub scheme: BracketScheme,
    pub gamma: Vec<f64>,
    pub q: Vec<f64>,
    pub years: Vec<YearReconstruction>,
}

impl ReconstructionResult {
    pub fn curve(&self, index: usize) -> Result<MortalityCurve, EkiError> {
        Ok(MortalityCurve::from_values(&self.anchor_ages, &self.years[index].mean_anchors)?)
    }

    pub fn year_index(&self, year: i32) -> Option<usize> {
        self.years.iter().position(|y| y.year == year)
    }
}

struct Member {
    history: Vec<PopulationState>,
}

fn check_years(data: &ReconstructionData<'_>) -> Result<(), EkiError> {
    let (d, l, p) = (data.deaths, data.diagnoses, data.prevalence);
    if d.years.is_empty() {
        return Err(EkiError::DataYearMismatch("no death years".into()));
    }
    if d.years != l.years {
        return Err(EkiError::DataYearMismatch("deaths and diagnoses cover different years".into()));
    }
    if !d.is_contiguous() {
        return Err(EkiError::DataYearMismatch("years are not contiguous".into()));
    }
    if p.years.len() != 1 || p.years[0] != d.years[0] - 1 {
        return Err(EkiError::DataYearMismatch(format!(
            "prevalence must be a single baseline year {} (got {:?})",
            d.years[0] - 1,
            p.years
        )));
    }
    if d.scheme != l.scheme || d.scheme != p.scheme {
        return Err(EkiError::DataYearMismatch("series use different bracket schemes".into()));
    }
    Ok(())
}

fn resolve(spec: &CovarianceSpec, year: i32, spread: &[f64]) -> Result<Vec<f64>, EkiError> {
    let v = match spec {
        CovarianceSpec::InitialSpread => spread.to_vec(),
        CovarianceSpec::Diagonal(v) => v.clone(),
        CovarianceSpec::PerYear(m) => m
            .get(&year)
            .cloned()
            .ok_or_else(|| EkiError::InvalidConfig(format!("no covariance given for year {year}")))?,
    };
    if v.len() != spread.len() || v.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(EkiError::InvalidConfig(format!("covariance for {year} must have {} nonnegative entries", spread.len())));
    }
    Ok(v)
}

fn norm(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Disaggregated diagnoses of member `j` for `year`.
pub fn member_source(
    counts: &[f64],
    year: i32,
    member: usize,
    grid: &AgeGrid,
    scheme: &BracketScheme,
    seed: u64,
) -> Result<SourceCurve, EkiError> {
    let mut rng = stream(seed, &[purpose::DIAGNOSES, year as u64, member as u64]);
    let nodes = disaggregate_brackets(counts, grid, scheme, &mut rng)?;
    Ok(SourceCurve::from_node_counts(grid, &nodes)?)
}

/// Initial population of member `j`.
pub fn member_initial_state(
    counts: &[f64],
    start_time: f64,
    member: usize,
    grid: &AgeGrid,
    scheme: &BracketScheme,
    seed: u64,
) -> Result<PopulationState, EkiError> {
    let mut rng = stream(seed, &[purpose::PREVALENCE, member as u64]);
    let nodes = disaggregate_brackets(counts, grid, scheme, &mut rng)?;
    Ok(PopulationState::from_node_counts(*grid, &nodes, start_time)?)
}

/// Runs the yearly filter loop over all data years.
pub fn run_reconstruction(
    data: ReconstructionData<'_>,
    mu0: &MortalityCurve,
    cfg: &EkiConfig,
) -> Result<ReconstructionResult, EkiError> {
    check_years(&data)?;
    if cfg.ensemble_size < 2 || cfg.filter_steps < 1 {
        return Err(EkiError::InvalidConfig("need ensemble_size >= 2 and filter_steps >= 1".into()));
    }
    if !(cfg.restart_spread.is_finite() && cfg.restart_spread >= 0.0) {
        return Err(EkiError::InvalidConfig("restart_spread must be finite and nonnegative".into()));
    }
    if mu0.anchors().ages() != cfg.anchor_ages.as_slice() {
        return Err(EkiError::InvalidConfig("mu0 anchor ages differ from the configured anchor ages".into()));
    }
    let scheme = data.deaths.scheme.clone();
    let model = ObservationModel { grid: cfg.grid, stepper: cfg.stepper, scheme: scheme.clone(), anchor_ages: cfg.anchor_ages.clone() };
    let j_count = cfg.ensemble_size;
    let exec = cfg.execution;
    let first_year = data.deaths.years[0];
    let baseline = &data.prevalence.counts[0];

    let mut members: Vec<Member> = exec
        .map_range(j_count, |j| {
            member_initial_state(baseline, first_year as f64, j, &cfg.grid, &scheme, cfg.seed).map(|s| Member { history: vec![s] })
        })
        .into_iter()
        .collect::<Result<_, _>>()?;

    // spread of G(u_t0, mu0) over the initial state ensemble
    let mu0_values = mu0.anchors().values().to_vec();
    let first_diag = &data.diagnoses.counts[0];
    let initial_g: Vec<Vec<f64>> = exec
        .map_slice(&members, |j, m| {
            let src = member_source(first_diag, first_year, j, &cfg.grid, &scheme, cfg.seed)?;
            observe(&m.history, &mu0_values, &src, &model).map(|(_, g)| g)
        })
        .into_iter()
        .collect::<Result<_, _>>()?;
    let spread = bracket_variance(&initial_g);

    let mut anchors = init_mortality_ensemble(mu0, j_count, cfg.seed);
    let mut years = Vec::with_capacity(data.deaths.years.len());
    let mut first_gamma = None;
    let mut first_q = None;

    for (row, &year) in data.deaths.years.iter().enumerate() {
        let y = &data.deaths.counts[row];
        let diag = &data.diagnoses.counts[row];
        let gamma = resolve(&cfg.gamma, year, &spread)?;
        let q = resolve(&cfg.q, year, &spread)?;
        first_gamma.get_or_insert_with(|| gamma.clone());
        first_q.get_or_insert_with(|| q.clone());
        if row > 0 && cfg.restart_spread > 0.0 {
            redraw(&mut anchors, cfg.restart_spread, cfg.seed, year);
        }
        let sources: Vec<SourceCurve> = exec
            .map_range(j_count, |j| member_source(diag, year, j, &cfg.grid, &scheme, cfg.seed))
            .into_iter()
            .collect::<Result<_, _>>()?;

        let mut residuals = Vec::with_capacity(cfg.filter_steps);
        for pass in 1..=cfg.filter_steps {
            let outputs: Vec<(pde::YearOutput, Vec<f64>)> = exec
                .map_slice(&members, |j, m| observe(&m.history, &anchors[j], &sources[j], &model))
                .into_iter()
                .collect::<Result<_, _>>()?;
            let gs: Vec<Vec<f64>> = outputs.iter().map(|(_, g)| g.clone()).collect();
            let g_bar = mean_of(&gs);
            residuals.push(norm(y, &g_bar));

            if pass < cfg.filter_steps {
                let inputs = UpdateInputs { y, gamma: &gamma, q: &q, denominator: cfg.denominator, floor: MORTALITY_FLOOR };
                let mut rngs: Vec<_> = (0..j_count)
                    .map(|j| stream(cfg.seed, &[purpose::OBS_PERTURBATION, year as u64, pass as u64, j as u64]))
                    .collect();
                anchors = eki_update(&anchors, &gs, &inputs, &mut rngs)?;
            } else {
                let (mean_anchors, std_anchors) = mean_std(&anchors);
                years.push(YearReconstruction {
                    year,
                    mean_anchors,
                    std_anchors,
                    fitted_deaths: g_bar,
                    observed_deaths: y.clone(),
                    residuals: residuals.clone(),
                });
                for (m, (out, _)) in members.iter_mut().zip(outputs) {
                    m.history = out.history;
                }
            }
        }
    }

    Ok(ReconstructionResult {
        anchor_ages: cfg.anchor_ages.clone(),
        scheme,
        gamma: first_gamma.unwrap_or_default(),
        q: first_q.unwrap_or_default(),
        years,
    })
}

/// Redraws the ensemble around its mean with per-anchor spread `max(std, rel * mean)`.
/// Fresh draws decouple each member's mortality from the population history it carries.
pub fn redraw(anchors: &mut [Vec<f64>], rel: f64, seed: u64, year: i32) {
    let (mean, std) = mean_std(anchors);
    let sd: Vec<f64> = mean.iter().zip(&std).map(|(m, s)| s.max(rel * m)).collect();
    for (j, a) in anchors.iter_mut().enumerate() {
        let mut rng = stream(seed, &[purpose::RESTART, year as u64, j as u64]);
        for k in 0..a.len() {
            let z: f64 = StandardNormal.sample(&mut rng);
            a[k] = (mean[k] + sd[k] * z).max(MORTALITY_FLOOR);
        }
    }
}

/// Sample variance per bracket, floored so an all-equal bracket stays invertible.
fn bracket_variance(gs: &[Vec<f64>]) -> Vec<f64> {
    let (mean, std) = mean_std(gs);
    let n = gs.len() as f64;
    mean.iter()
        .zip(std)
        .map(|(m, s)| {
            let var = s * s * n / (n - 1.0);
            var.max(1e-8 * (1.0 + m * m))
        })
        .collect()
}

/// Componentwise mean and population standard deviation.
fn mean_std(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let mean = mean_of(rows);
    let n = rows.len() as f64;
    let mut var = vec![0.0; mean.len()];
    for r in rows {
        for ((v, x), m) in var.iter_mut().zip(r).zip(&mean) {
            *v += (x - m).powi(2);
        }
    }
    (mean, var.into_iter().map(|v| (v / n).sqrt()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interp::DEFAULT_ANCHOR_AGES;

    fn model() -> ObservationModel {
        ObservationModel {
            grid: AgeGrid::default(),
            stepper: StepperConfig::default(),
            scheme: BracketScheme::default(),
            anchor_ages: DEFAULT_ANCHOR_AGES.to_vec(),
        }
    }

    #[test]
    fn disaggregation_preserves_brackets_and_is_seeded() {
        let g = AgeGrid::default();
        let s = BracketScheme::default();
        let counts: Vec<f64> = (0..11).map(|k| if k == 3 { 0.0 } else { 1000.0 * (k + 1) as f64 }).collect();
        let a = disaggregate_brackets(&counts, &g, &s, &mut stream(5, &[1])).unwrap();
        let b = disaggregate_brackets(&counts, &g, &s, &mut stream(5, &[1])).unwrap();
        assert_eq!(a, b);
        let back = pde::bracket_aggregate(&a, &g, &s).unwrap();
        for (x, y) in back.iter().zip(&counts) {
            assert!((x - y).abs() <= 1e-12 * y.max(1.0));
        }
        let r = &s.node_ranges(&g).unwrap()[3];
        assert!(a[r.clone()].iter().all(|&v| v == 0.0));
        assert!(a.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn empty_bracket_is_rejected() {
        let g = AgeGrid::default();
        let s = BracketScheme::from_edges(&[13.0, 13.05, 13.1, 25.0]).unwrap();
        let err = disaggregate_brackets(&[1.0, 1.0, 1.0, 1.0], &g, &s, &mut stream(0, &[])).unwrap_err();
        assert_eq!(err, EkiError::EmptyBracket { bracket: 1 });
    }

    #[test]
    fn ensemble_init() {
        let mut vals = vec![0.02; 14];
        vals[0] = 0.0;
        let mu0 = MortalityCurve::from_values(&DEFAULT_ANCHOR_AGES, &vals).unwrap();
        let a = init_mortality_ensemble(&mu0, 50, 1);
        let b = init_mortality_ensemble(&mu0, 50, 2);
        assert_ne!(a, b);
        assert_eq!(a, init_mortality_ensemble(&mu0, 50, 1));
        assert!(a.iter().all(|m| m[0] == MORTALITY_FLOOR));
        assert!(a.iter().flatten().all(|&v| v >= MORTALITY_FLOOR));
    }

    #[test]
    fn ensemble_init_mean_before_projection() {
        // raw draws N(0.02, 0.02^2); mean of 1e4 draws within 3 sd/sqrt(n)
        let n = 10_000;
        let mut total = 0.0;
        for j in 0..n {
            let mut rng = stream(11, &[purpose::MORTALITY_INIT, j as u64]);
            total += Normal::new(0.02, 0.02).unwrap().sample(&mut rng);
        }
        assert!((total / n as f64 - 0.02).abs() < 3.0 * 0.02 / 100.0);
    }

    fn baseline_state(m: &ObservationModel) -> PopulationState {
        let counts = [40e3, 90e3, 150e3, 200e3, 90e3, 60e3, 35e3, 18e3, 8e3, 3e3, 1.5e3];
        member_initial_state(&counts, 2009.0, 0, &m.grid, &m.scheme, 3).unwrap()
    }

    #[test]
    fn observe_zero_mortality_and_restart_contract() {
        let m = model();
        let s0 = baseline_state(&m);
        let src = SourceCurve::zeros(&m.grid);
        let (_, g) = observe(std::slice::from_ref(&s0), &[0.0; 14], &src, &m).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
        let anchors = vec![0.01; 14];
        let (_, g1) = observe(std::slice::from_ref(&s0), &anchors, &src, &m).unwrap();
        let (_, g2) = observe(&[s0], &anchors, &src, &m).unwrap();
        assert_eq!(g1, g2);
    }

    #[test]
    fn doubling_small_rates_nearly_doubles_deaths() {
        // deaths = int mu u0 exp(-mu s) ds, so doubling mu gives a ratio 2 (1 - 1.5 mu + ...)
        let m = model();
        let s0 = baseline_state(&m);
        let src = SourceCurve::zeros(&m.grid);
        let anchors: Vec<f64> = DEFAULT_ANCHOR_AGES.iter().map(|a| 0.002 * (0.04 * a).exp()).collect();
        let doubled: Vec<f64> = anchors.iter().map(|v| 2.0 * v).collect();
        let (_, g1) = observe(std::slice::from_ref(&s0), &anchors, &src, &m).unwrap();
        let (_, g2) = observe(&[s0], &doubled, &src, &m).unwrap();
        for (a, b) in g1.iter().zip(&g2) {
            let ratio = b / a;
            assert!(ratio > 1.9 && ratio < 2.0, "ratio {ratio}");
        }
    }

    fn rngs(n: usize) -> Vec<rand_chacha::ChaCha8Rng> {
        (0..n).map(|j| stream(9, &[j as u64])).collect()
    }

    #[test]
    fn zero_parameter_spread_leaves_ensemble_unchanged() {
        let anchors = vec![vec![0.01, 0.02]; 5];
        let gs: Vec<Vec<f64>> = (0..5).map(|j| vec![j as f64, 2.0 * j as f64]).collect();
        let inputs = UpdateInputs { y: &[10.0, 10.0], gamma: &[1.0, 1.0], q: &[1.0, 1.0], denominator: Denominator::Gamma, floor: 0.0 };
        let out = eki_update(&anchors, &gs, &inputs, &mut rngs(5)).unwrap();
        assert_eq!(out, anchors);
    }

    #[test]
    fn scalar_linear_problem_matches_kalman_gain() {
        let h = 3.0;
        let gamma = 0.5;
        let anchors: Vec<Vec<f64>> = (0..400).map(|j| vec![1.0 + 0.01 * ((j * 37) % 101) as f64]).collect();
        let gs: Vec<Vec<f64>> = anchors.iter().map(|a| vec![h * a[0]]).collect();
        let y = 4.0;
        let inputs = UpdateInputs { y: &[y], gamma: &[gamma], q: &[0.0], denominator: Denominator::Gamma, floor: 0.0 };
        let out = eki_update(&anchors, &gs, &inputs, &mut rngs(400)).unwrap();
        // closed form: K = c h / (d h^2 + gamma) with the 1/J sample variance
        let n = anchors.len() as f64;
        let m = anchors.iter().map(|a| a[0]).sum::<f64>() / n;
        let v = anchors.iter().map(|a| (a[0] - m).powi(2)).sum::<f64>() / n;
        let k = v * h / (v * h * h + gamma);
        for (a, o) in anchors.iter().zip(&out) {
            let want = a[0] + k * (y - h * a[0]);
            assert!((o[0] - want).abs() < 1e-12);
        }
        let spread_after = {
            let m2 = out.iter().map(|a| a[0]).sum::<f64>() / n;
            out.iter().map(|a| (a[0] - m2).powi(2)).sum::<f64>() / n
        };
        assert!(spread_after < v);
    }

    #[test]
    fn zero_mean_innovation_keeps_mean() {
        let anchors: Vec<Vec<f64>> = (0..20).map(|j| vec![0.01 + 0.001 * j as f64, 0.03 - 0.0005 * j as f64]).collect();
        let gs: Vec<Vec<f64>> = anchors.iter().map(|a| vec![100.0 * a[0] + 10.0 * a[1], 50.0 * a[1]]).collect();
        let y = mean_of(&gs);
        let inputs = UpdateInputs { y: &y, gamma: &[0.1, 0.1], q: &[0.0, 0.0], denominator: Denominator::Gamma, floor: 0.0 };
        let out = eki_update(&anchors, &gs, &inputs, &mut rngs(20)).unwrap();
        let (a, b) = (mean_of(&anchors), mean_of(&out));
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn singular_innovation_detected() {
        let anchors: Vec<Vec<f64>> = (0..4).map(|j| vec![j as f64]).collect();
        let gs = vec![vec![1.0, 1.0]; 4];
        let inputs = UpdateInputs { y: &[1.0, 1.0], gamma: &[0.0, 0.0], q: &[0.0, 0.0], denominator: Denominator::Gamma, floor: 0.0 };
        assert!(matches!(eki_update(&anchors, &gs, &inputs, &mut rngs(4)), Err(EkiError::SingularInnovation { .. })));
    }

    #[test]
    fn gamma_inverse_switch_changes_gain() {
        let anchors: Vec<Vec<f64>> = (0..10).map(|j| vec![j as f64]).collect();
        let gs: Vec<Vec<f64>> = anchors.iter().map(|a| vec![a[0]]).collect();
        let mk = |denominator| UpdateInputs { y: &[20.0], gamma: &[4.0], q: &[0.0], denominator, floor: 0.0 };
        let a = eki_update(&anchors, &gs, &mk(Denominator::Gamma), &mut rngs(10)).unwrap();
        let b = eki_update(&anchors, &gs, &mk(Denominator::GammaInverse), &mut rngs(10)).unwrap();
        // var = 8.25: gains 8.25/12.25 and 8.25/8.5
        assert!((a[0][0] - 20.0 * 8.25 / 12.25).abs() < 1e-12);
        assert!((b[0][0] - 20.0 * 8.25 / 8.5).abs() < 1e-12);
    }
}
