use std::path::Path;

use agemort::data_io::{
    self, bundle_files, json_bytes, load_bundle, read_json, synth_generate, table_csv, uniform_disaggregate, DatasetBundle, Document, GroundTruth,
    Manifest, Meta, SynthSpec,
};
use agemort::eki::{run_reconstruction, BracketScheme, CovarianceSpec, EkiConfig, ReconstructionData, ReconstructionResult};
use agemort::interp::MortalityCurve;
use agemort::nndmd::{self, DmdError, DmdOperator, SnapshotMatrices, SpectralDecomposition};
use agemort::par::Execution;
use agemort::pde::{self, AgeGrid, PopulationState, SourceCurve};
use serde::{Deserialize, Serialize};

use crate::config::{GammaSource, RunConfig};
use crate::CliError;

pub const TRUTH_FILE: &str = "truth.json";
pub const SPEC_FILE: &str = "spec.json";
pub const RECONSTRUCT_DIR: &str = "reconstruct";
pub const FORECAST_DIR: &str = "forecast";
pub const PROJECT_DIR: &str = "project";
pub const RECONSTRUCTION_FILE: &str = "reconstruction.json";
pub const FORECAST_FILE: &str = "forecast.json";
pub const PROJECTION_FILE: &str = "projection.json";

/// Ages scored in the twin error report.
pub const SCORED_AGES: (f64, f64) = (22.0, 82.0);

type Files = Vec<(String, Vec<u8>)>;

fn fmt(v: f64) -> String {
    v.to_string()
}

fn hi_text(hi: Option<f64>) -> String {
    hi.map(fmt).unwrap_or_default()
}

/// Integer ages from 0 to `a_max` at which curves are written.
fn curve_ages(grid: &AgeGrid) -> Vec<f64> {
    (0..=grid.a_max().floor() as usize).map(|a| a as f64).collect()
}

fn curve_rows(curve: &MortalityCurve, ages: &[f64]) -> Vec<f64> {
    ages.iter().map(|&a| curve.rate(a)).collect()
}

pub fn cmd_synth(cfg: &RunConfig) -> Result<Manifest, CliError> {
    let mut spec = match &cfg.synth.spec {
        Some(p) => read_json::<SynthSpec>(p)?,
        None => SynthSpec::default(),
    };
    if let Some(n) = cfg.synth.noise {
        spec.noise = n;
    }
    if let Some(s) = cfg.synth.seed {
        spec.seed = s;
    }
    let (bundle, truth) = synth_generate(&spec, &cfg.grid()?, &cfg.stepper())?;
    let mut files = bundle_files(&bundle);
    files.push((TRUTH_FILE.into(), json_bytes(&truth)));
    files.push((SPEC_FILE.into(), json_bytes(&spec)));
    let m = data_io::write_outputs(&files, &cfg.out)?;
    println!("synth: {} years, {} brackets -> {}", truth.years.len(), bundle.scheme().len(), cfg.out.display());
    Ok(m)
}

fn load_input_bundle(dir: &Path) -> Result<DatasetBundle, CliError> {
    Ok(load_bundle(dir)?)
}

pub fn eki_config(cfg: &RunConfig, bundle: &DatasetBundle) -> Result<EkiConfig, CliError> {
    let nb = bundle.scheme().len();
    let gamma = match (cfg.eki.gamma_value, cfg.eki.gamma, &bundle.gamma) {
        (Some(v), _, _) => CovarianceSpec::Diagonal(vec![v; nb]),
        (None, GammaSource::Spread, _) | (None, GammaSource::Auto, None) => CovarianceSpec::InitialSpread,
        (None, _, Some(g)) => CovarianceSpec::PerYear(g.clone()),
        (None, GammaSource::Bundle, None) => return Err(CliError::Input("eki.gamma = bundle but the bundle has no gamma.csv".into())),
    };
    let q = cfg.eki.q_value.map(|v| CovarianceSpec::Diagonal(vec![v; nb])).unwrap_or_default();
    Ok(EkiConfig {
        ensemble_size: cfg.eki.ensemble_size,
        filter_steps: cfg.eki.n_kf,
        grid: cfg.grid()?,
        stepper: cfg.stepper(),
        anchor_ages: bundle.mu0.anchors().ages().to_vec(),
        gamma,
        q,
        denominator: cfg.eki.denominator,
        restart_spread: cfg.eki.restart_spread,
        seed: cfg.eki.seed,
        execution: Execution::default(),
    })
}

/// Anchor and bracket-fit errors of one reconstructed year against the twin truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwinYearError {
    pub year: i32,
    /// Relative anchor errors, in anchor order.
    pub anchor_errors: Vec<f64>,
    /// Largest relative anchor error over the scored ages.
    pub max_scored_error: f64,
    /// `||fitted - observed|| / ||observed||` over brackets.
    pub fit_relative_l2: f64,
    pub fit_max_bracket: f64,
}

pub fn twin_errors(result: &ReconstructionResult, truth: &GroundTruth) -> Result<Vec<TwinYearError>, CliError> {
    if truth.anchor_ages != result.anchor_ages {
        return Err(CliError::Input("truth anchors differ from reconstruction anchors".into()));
    }
    let mut out = Vec::new();
    for y in &result.years {
        let Some(k) = truth.years.iter().position(|t| *t == y.year) else {
            return Err(CliError::Input(format!("truth lacks year {}", y.year)));
        };
        let anchor_errors: Vec<f64> = y
            .mean_anchors
            .iter()
            .zip(&truth.mortality[k])
            .map(|(m, t)| if *t > 0.0 { (m - t).abs() / t } else { m.abs() })
            .collect();
        let max_scored_error = result
            .anchor_ages
            .iter()
            .zip(&anchor_errors)
            .filter(|(a, _)| **a >= SCORED_AGES.0 && **a <= SCORED_AGES.1)
            .map(|(_, e)| *e)
            .fold(0.0, f64::max);
        let obs2: f64 = y.observed_deaths.iter().map(|v| v * v).sum();
        let diff2: f64 = y.fitted_deaths.iter().zip(&y.observed_deaths).map(|(f, o)| (f - o).powi(2)).sum();
        let fit_relative_l2 = if obs2 > 0.0 { (diff2 / obs2).sqrt() } else { diff2.sqrt() };
        let fit_max_bracket = y
            .fitted_deaths
            .iter()
            .zip(&y.observed_deaths)
            .map(|(f, o)| if *o > 0.0 { (f - o).abs() / o } else { f.abs() })
            .fold(0.0, f64::max);
        out.push(TwinYearError { year: y.year, anchor_errors, max_scored_error, fit_relative_l2, fit_max_bracket });
    }
    Ok(out)
}

fn read_truth(dir: &Path) -> Result<Option<GroundTruth>, CliError> {
    let p = dir.join(TRUTH_FILE);
    if p.exists() {
        Ok(Some(read_json(&p)?))
    } else {
        Ok(None)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReconstructionReport {
    pub reconstruction: ReconstructionResult,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub twin_errors: Option<Vec<TwinYearError>>,
}

pub fn cmd_reconstruct(cfg: &RunConfig) -> Result<Manifest, CliError> {
    let data = cfg.data_dir();
    let bundle = load_input_bundle(&data)?;
    let eki = eki_config(cfg, &bundle)?;
    let grid = eki.grid;
    let result = run_reconstruction(
        ReconstructionData { prevalence: &bundle.prevalence, deaths: &bundle.deaths, diagnoses: &bundle.diagnoses },
        &bundle.mu0,
        &eki,
    )?;
    let twin = match read_truth(&data)? {
        Some(t) => Some(twin_errors(&result, &t)?),
        None => None,
    };

    let ages = curve_ages(&grid);
    let mut files: Files = Vec::new();
    let mut surface = Vec::new();
    for (k, y) in result.years.iter().enumerate() {
        let mean = result.curve(k)?;
        let lo_anchors: Vec<f64> = y.mean_anchors.iter().zip(&y.std_anchors).map(|(m, s)| (m - s).max(0.0)).collect();
        let hi_anchors: Vec<f64> = y.mean_anchors.iter().zip(&y.std_anchors).map(|(m, s)| m + s).collect();
        let lo = MortalityCurve::from_values(&result.anchor_ages, &lo_anchors)?;
        let hi = MortalityCurve::from_values(&result.anchor_ages, &hi_anchors)?;
        let rows = ages.iter().map(|&a| [fmt(a), fmt(mean.rate(a)), fmt(lo.rate(a)), fmt(hi.rate(a))]);
        files.push((format!("curves/mortality_{}.csv", y.year), table_csv(&["age", "rate", "rate_lo", "rate_hi"], rows)));
        surface.extend(ages.iter().map(|&a| [y.year.to_string(), fmt(a), fmt(mean.rate(a))]));
    }
    files.push(("mortality_surface.csv".into(), table_csv(&["year", "age", "rate"], surface)));

    let mut fit_rows = Vec::new();
    for y in &result.years {
        for ((b, f), o) in result.scheme.brackets().iter().zip(&y.fitted_deaths).zip(&y.observed_deaths) {
            let rel = if *o > 0.0 { (f - o) / o } else { 0.0 };
            fit_rows.push([y.year.to_string(), fmt(b.lo), hi_text(b.hi), fmt(*o), fmt(*f), fmt(rel)]);
        }
    }
    files.push(("bracket_fit.csv".into(), table_csv(&["year", "bracket_lo", "bracket_hi", "observed", "fitted", "relative_error"], fit_rows)));

    let anchor_rows = result.years.iter().flat_map(|y| {
        result.anchor_ages.iter().zip(y.mean_anchors.iter().zip(&y.std_anchors)).map(move |(a, (m, s))| [y.year.to_string(), fmt(*a), fmt(*m), fmt(*s)])
    });
    files.push(("anchors.csv".into(), table_csv(&["year", "age", "mean", "std"], anchor_rows)));

    if let Some(errs) = &twin {
        let rows = errs.iter().map(|e| [e.year.to_string(), fmt(e.max_scored_error), fmt(e.fit_relative_l2), fmt(e.fit_max_bracket)]);
        files.push(("twin_errors.csv".into(), table_csv(&["year", "max_anchor_error", "fit_relative_l2", "fit_max_bracket"], rows)));
        let worst = errs.iter().map(|e| e.max_scored_error).fold(0.0, f64::max);
        println!("reconstruct: twin max anchor error (ages {}-{}) {:.2}%", SCORED_AGES.0, SCORED_AGES.1, 100.0 * worst);
    }
    let report = ReconstructionReport { reconstruction: result, twin_errors: twin };
    files.push((RECONSTRUCTION_FILE.into(), json_bytes(&Document { meta: Meta::new("reconstruction"), config: cfg, results: &report })));
    let dir = cfg.out.join(RECONSTRUCT_DIR);
    let m = data_io::write_outputs(&files, &dir)?;
    println!("reconstruct: {} years -> {}", report.reconstruction.years.len(), dir.display());
    Ok(m)
}

fn read_document<R: for<'de> Deserialize<'de>>(path: &Path, stage: &str) -> Result<R, CliError> {
    if !path.exists() {
        return Err(CliError::Input(format!("{} not found; run `{stage}` first", path.display())));
    }
    let doc: Document<serde_json::Value, R> = read_json(path)?;
    Ok(doc.results)
}

/// Spectral report of one forecast operator. `decomposition` is absent with a warning when
/// the dominant eigenvalue is not simple.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralReport {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decomposition: Option<SpectralDecomposition>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeriesForecast {
    pub years: Vec<i32>,
    pub values: Vec<Vec<f64>>,
    pub operator: DmdOperator,
    pub spectral: SpectralReport,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForecastResult {
    pub training_years: Vec<i32>,
    pub last_observed_year: i32,
    pub anchor_ages: Vec<f64>,
    pub scheme: BracketScheme,
    pub mortality: SeriesForecast,
    pub diagnoses: SeriesForecast,
}

/// Snapshot pairs `(x_y, x_{y+1})` with both years in `train`.
fn training_pairs(years: &[i32], values: &[Vec<f64>], train: &[i32]) -> Result<SnapshotMatrices, CliError> {
    let at = |y: i32| years.iter().position(|v| *v == y).map(|i| values[i].clone());
    let mut pairs = Vec::new();
    for &y in train {
        if !train.contains(&(y + 1)) {
            continue;
        }
        match (at(y), at(y + 1)) {
            (Some(a), Some(b)) => pairs.push((a, b)),
            _ => return Err(CliError::Input(format!("training years {y}-{} not available", y + 1))),
        }
    }
    Ok(SnapshotMatrices::from_pairs(&pairs)?)
}

fn spectral_report(op: &DmdOperator, x0: &[f64]) -> Result<SpectralReport, CliError> {
    match nndmd::spectral_analysis(op, x0) {
        Ok(d) => Ok(SpectralReport { decomposition: Some(d), warning: None }),
        Err(e @ DmdError::NonSimpleDominant { .. }) => {
            eprintln!("warning: {e}; long-term limit omitted");
            Ok(SpectralReport { decomposition: None, warning: Some(e.to_string()) })
        }
        Err(e) => Err(e.into()),
    }
}

/// Fits nonnegative DMD on `train` and forecasts from the last observed snapshot.
pub fn forecast_series(
    years: &[i32],
    values: &[Vec<f64>],
    train: &[i32],
    end_year: i32,
    cfg: &RunConfig,
) -> Result<SeriesForecast, CliError> {
    let snaps = training_pairs(years, values, train)?;
    let op = nndmd::fit_nonnegative_dmd(&snaps, cfg.dmd.fit_mode, Execution::default())?;
    let last = *years.last().expect("nonempty series");
    let x_last = values.last().expect("nonempty series");
    let horizon = (end_year - last).max(0) as usize;
    let values = nndmd::forecast(&op, x_last, horizon)?;
    let spectral = spectral_report(&op, x_last)?;
    Ok(SeriesForecast { years: (1..=horizon as i32).map(|k| last + k).collect(), values, operator: op, spectral })
}

pub fn cmd_forecast(cfg: &RunConfig) -> Result<Manifest, CliError> {
    let report: ReconstructionReport = read_document(&cfg.out.join(RECONSTRUCT_DIR).join(RECONSTRUCTION_FILE), "reconstruct")?;
    let rec = report.reconstruction;
    let bundle = load_input_bundle(&cfg.data_dir())?;
    let train = cfg.training_years();
    let rec_years: Vec<i32> = rec.years.iter().map(|y| y.year).collect();
    let last = *rec_years.last().ok_or_else(|| CliError::Input("reconstruction has no years".into()))?;
    if bundle.years().last() != Some(&last) {
        return Err(CliError::Input("reconstruction and bundle end in different years".into()));
    }
    if cfg.dmd.forecast_end <= last {
        return Err(CliError::Config(format!("dmd.forecast_end must be after the last observed year {last}")));
    }
    let anchors: Vec<Vec<f64>> = rec.years.iter().map(|y| y.mean_anchors.clone()).collect();
    let mortality = forecast_series(&rec_years, &anchors, &train, cfg.dmd.forecast_end, cfg)?;
    let diagnoses = forecast_series(bundle.years(), &bundle.diagnoses.counts, &train, cfg.dmd.forecast_end, cfg)?;
    let result = ForecastResult { training_years: train, last_observed_year: last, anchor_ages: rec.anchor_ages.clone(), scheme: rec.scheme.clone(), mortality, diagnoses };

    let grid = cfg.grid()?;
    let ages = curve_ages(&grid);
    let mut files: Files = Vec::new();
    let mut long = Vec::new();
    for (y, a) in result.mortality.years.iter().zip(&result.mortality.values) {
        let curve = MortalityCurve::from_values(&result.anchor_ages, a)?;
        let rates = curve_rows(&curve, &ages);
        files.push((format!("curves/mortality_{y}.csv"), table_csv(&["age", "rate"], ages.iter().zip(&rates).map(|(a, r)| [fmt(*a), fmt(*r)]))));
        long.extend(ages.iter().zip(&rates).map(|(a, r)| [y.to_string(), fmt(*a), fmt(*r)]));
    }
    files.push(("mortality_forecast.csv".into(), table_csv(&["year", "age", "rate"], long)));
    let diag_rows = result.diagnoses.years.iter().zip(&result.diagnoses.values).flat_map(|(y, row)| {
        result.scheme.brackets().iter().zip(row).map(move |(b, v)| [y.to_string(), fmt(b.lo), hi_text(b.hi), fmt(*v)])
    });
    files.push(("diagnoses_forecast.csv".into(), table_csv(&["year", "bracket_lo", "bracket_hi", "count"], diag_rows)));
    if let Some(d) = &result.mortality.spectral.decomposition {
        let curve = MortalityCurve::from_values(&result.anchor_ages, &d.limit.iter().map(|v| v.max(0.0)).collect::<Vec<_>>())?;
        let rows = ages.iter().map(|&a| [fmt(a), fmt(curve.rate(a))]);
        files.push(("mortality_limit.csv".into(), table_csv(&["age", "rate"], rows)));
    }
    files.push(("operator_mortality.json".into(), json_bytes(&result.mortality.operator)));
    files.push(("operator_diagnoses.json".into(), json_bytes(&result.diagnoses.operator)));
    #[derive(Serialize)]
    struct Spectra<'a> {
        mortality: &'a SpectralReport,
        diagnoses: &'a SpectralReport,
    }
    files.push(("spectral.json".into(), json_bytes(&Spectra { mortality: &result.mortality.spectral, diagnoses: &result.diagnoses.spectral })));
    files.push((FORECAST_FILE.into(), json_bytes(&Document { meta: Meta::new("forecast"), config: cfg, results: &result })));
    let dir = cfg.out.join(FORECAST_DIR);
    let m = data_io::write_outputs(&files, &dir)?;
    if let Some(d) = &result.mortality.spectral.decomposition {
        println!("forecast: mortality xi1 = {:.6}, |xi2|/|xi1| = {:.4}", d.xi1, d.gap);
    }
    println!("forecast: {}-{} -> {}", last + 1, cfg.dmd.forecast_end, dir.display());
    Ok(m)
}

/// State and flows at the end of one projected year.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectedYear {
    pub year: i32,
    /// Whether mortality and diagnoses came from the forecast.
    pub forecast: bool,
    pub total: f64,
    pub deaths: f64,
    pub diagnoses: f64,
    pub outflow: f64,
    pub bracket_counts: Vec<f64>,
    pub bracket_shares: Vec<f64>,
    /// Persons per one-year age band `[k, k+1)`.
    pub age_structure: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionResult {
    pub scheme: BracketScheme,
    pub years: Vec<ProjectedYear>,
    /// `|total - true total| / true total` for years covered by a twin truth record.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth_relative_error: Option<Vec<(i32, f64)>>,
}

/// One year of inputs to [`project`].
#[derive(Debug, Clone)]
pub struct ProjectionYearInput {
    pub year: i32,
    pub anchors: Vec<f64>,
    pub diagnoses: Vec<f64>,
    pub forecast: bool,
}

/// Simulates the population from bracketed baseline counts, spreading counts uniformly
/// within brackets.
pub fn project(
    baseline: &[f64],
    inputs: &[ProjectionYearInput],
    anchor_ages: &[f64],
    scheme: &BracketScheme,
    grid: &AgeGrid,
    stepper: &pde::StepperConfig,
) -> Result<Vec<ProjectedYear>, CliError> {
    let Some(first) = inputs.first() else {
        return Ok(Vec::new());
    };
    let u0 = uniform_disaggregate(baseline, grid, scheme)?;
    let mut hist = vec![PopulationState::from_node_counts(*grid, &u0, first.year as f64)?];
    let bands = grid.a_max().ceil() as usize;
    let mut out = Vec::with_capacity(inputs.len());
    for inp in inputs {
        let mu = MortalityCurve::from_values(anchor_ages, &inp.anchors)?.sample(grid.ages());
        let lam = SourceCurve::from_node_counts(grid, &uniform_disaggregate(&inp.diagnoses, grid, scheme)?)?;
        let y = pde::simulate_year(&hist, &mu, &lam.lam, stepper)?;
        let last = y.history.last().expect("nonempty history");
        let counts = last.node_counts();
        let bracket_counts = pde::bracket_aggregate(&counts, grid, scheme)?;
        let in_brackets: f64 = bracket_counts.iter().sum();
        let bracket_shares = bracket_counts.iter().map(|c| if in_brackets > 0.0 { c / in_brackets } else { 0.0 }).collect();
        let mut age_structure = vec![0.0; bands];
        for (i, c) in counts.iter().enumerate() {
            age_structure[(grid.age(i).floor() as usize).min(bands - 1)] += c;
        }
        out.push(ProjectedYear {
            year: inp.year,
            forecast: inp.forecast,
            total: last.total(),
            deaths: y.deaths_by_age.iter().sum(),
            diagnoses: y.inflow,
            outflow: y.outflow,
            bracket_counts,
            bracket_shares,
            age_structure,
        });
        hist = y.history;
    }
    Ok(out)
}

pub fn cmd_project(cfg: &RunConfig) -> Result<Manifest, CliError> {
    let report: ReconstructionReport = read_document(&cfg.out.join(RECONSTRUCT_DIR).join(RECONSTRUCTION_FILE), "reconstruct")?;
    let fc: ForecastResult = read_document(&cfg.out.join(FORECAST_DIR).join(FORECAST_FILE), "forecast")?;
    let data = cfg.data_dir();
    let bundle = load_input_bundle(&data)?;
    let rec = report.reconstruction;
    if rec.scheme != *bundle.scheme() || fc.scheme != rec.scheme {
        return Err(CliError::Input("reconstruction, forecast and bundle use different brackets".into()));
    }
    let mut inputs = Vec::new();
    for y in &rec.years {
        let diag = bundle.diagnoses.row(y.year).ok_or_else(|| CliError::Input(format!("bundle lacks diagnoses for {}", y.year)))?;
        inputs.push(ProjectionYearInput { year: y.year, anchors: y.mean_anchors.clone(), diagnoses: diag.to_vec(), forecast: false });
    }
    for ((y, a), d) in fc.mortality.years.iter().zip(&fc.mortality.values).zip(&fc.diagnoses.values) {
        inputs.push(ProjectionYearInput { year: *y, anchors: a.clone(), diagnoses: d.clone(), forecast: true });
    }
    let grid = cfg.grid()?;
    let years = project(&bundle.prevalence.counts[0], &inputs, &rec.anchor_ages, &rec.scheme, &grid, &cfg.stepper())?;
    let truth_relative_error = read_truth(&data)?.map(|t| {
        years
            .iter()
            .filter_map(|p| t.years.iter().position(|y| *y == p.year).map(|k| (p.year, (p.total - t.totals[k]).abs() / t.totals[k])))
            .collect()
    });
    let result = ProjectionResult { scheme: rec.scheme.clone(), years, truth_relative_error };

    let mut files: Files = Vec::new();
    let totals = result.years.iter().map(|p| [p.year.to_string(), fmt(p.total), fmt(p.deaths), fmt(p.diagnoses), fmt(p.outflow), p.forecast.to_string()]);
    files.push(("totals.csv".into(), table_csv(&["year", "total", "deaths", "diagnoses", "outflow", "forecast"], totals)));
    let shares = result.years.iter().flat_map(|p| {
        result.scheme.brackets().iter().zip(p.bracket_counts.iter().zip(&p.bracket_shares)).map(move |(b, (c, s))| [p.year.to_string(), fmt(b.lo), hi_text(b.hi), fmt(*c), fmt(*s)])
    });
    files.push(("bracket_shares.csv".into(), table_csv(&["year", "bracket_lo", "bracket_hi", "count", "share"], shares)));
    let ages = result.years.iter().flat_map(|p| p.age_structure.iter().enumerate().map(move |(a, c)| [p.year.to_string(), a.to_string(), fmt(*c)]));
    files.push(("age_structure.csv".into(), table_csv(&["year", "age", "count"], ages)));
    files.push((PROJECTION_FILE.into(), json_bytes(&Document { meta: Meta::new("projection"), config: cfg, results: &result })));
    let dir = cfg.out.join(PROJECT_DIR);
    let m = data_io::write_outputs(&files, &dir)?;
    if let Some(p) = result.years.last() {
        println!("project: {} total {:.0} -> {}", p.year, p.total, dir.display());
    }
    Ok(m)
}
