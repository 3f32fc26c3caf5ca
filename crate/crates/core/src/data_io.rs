//! Bracketed CSV input, synthetic twin bundles, and hashed output manifests.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::eki::{BracketScheme, BracketedSeries, SeriesKind};
use crate::interp::{InterpError, MortalityCurve, DEFAULT_ANCHOR_AGES};
use crate::pde::{self, AgeGrid, Bracket, PdeError, PopulationState, SourceCurve, StepperConfig, DEFAULT_BRACKET_EDGES};
use crate::rng::{purpose, stream};

pub const PREVALENCE_FILE: &str = "prevalence.csv";
pub const DEATHS_FILE: &str = "deaths.csv";
pub const DIAGNOSES_FILE: &str = "diagnoses.csv";
pub const MU0_FILE: &str = "mu0.csv";
pub const GAMMA_FILE: &str = "gamma.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

const SERIES_HEADER: [&str; 4] = ["year", "bracket_lo", "bracket_hi", "count"];
const GAMMA_HEADER: [&str; 4] = ["year", "bracket_lo", "bracket_hi", "variance"];

#[derive(Debug, Error)]
pub enum DataError {
    #[error("schema error in {file} at row {row}: {message}")]
    Schema { file: String, row: usize, message: String },
    #[error("negative count {value} in {file} at row {row}")]
    NegativeCount { file: String, row: usize, value: f64 },
    #[error("{file}: year {missing} missing between {before} and {after}")]
    YearGap { file: String, missing: i32, before: i32, after: i32 },
    #[error("bundle is inconsistent: {0}")]
    Inconsistent(String),
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: String, source: serde_json::Error },
    #[error(transparent)]
    Interp(#[from] InterpError),
    #[error(transparent)]
    Pde(#[from] PdeError),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DataError + '_ {
    move |source| DataError::Io { path: path.display().to_string(), source }
}

fn file_name(path: &Path) -> String {
    path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_else(|| path.display().to_string())
}

/// Everything a reconstruction needs.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetBundle {
    pub prevalence: BracketedSeries,
    pub deaths: BracketedSeries,
    pub diagnoses: BracketedSeries,
    pub mu0: MortalityCurve,
    /// Per-year observation variances, when the bundle ships its own.
    pub gamma: Option<BTreeMap<i32, Vec<f64>>>,
}

impl DatasetBundle {
    pub fn scheme(&self) -> &BracketScheme {
        &self.deaths.scheme
    }

    pub fn years(&self) -> &[i32] {
        &self.deaths.years
    }

    /// Checks year coverage and bracket schemes across the series.
    pub fn validate(&self) -> Result<(), DataError> {
        let (d, l, p) = (&self.deaths, &self.diagnoses, &self.prevalence);
        if d.years.is_empty() {
            return Err(DataError::Inconsistent("deaths cover no years".into()));
        }
        if d.years != l.years {
            return Err(DataError::Inconsistent(format!(
                "deaths cover {:?}..{:?} but diagnoses cover {:?}..{:?}",
                d.years.first(),
                d.years.last(),
                l.years.first(),
                l.years.last()
            )));
        }
        if p.years != [d.years[0] - 1] {
            return Err(DataError::Inconsistent(format!("prevalence must hold exactly the baseline year {}", d.years[0] - 1)));
        }
        if d.scheme != l.scheme || d.scheme != p.scheme {
            return Err(DataError::Inconsistent("files use different brackets".into()));
        }
        if let Some(g) = &self.gamma {
            for y in &d.years {
                match g.get(y) {
                    Some(v) if v.len() == d.scheme.len() => {}
                    _ => return Err(DataError::Inconsistent(format!("{GAMMA_FILE} lacks year {y}"))),
                }
            }
        }
        Ok(())
    }
}

fn parse_f64(file: &str, row: usize, column: &str, text: &str) -> Result<f64, DataError> {
    let v: f64 = text
        .trim()
        .parse()
        .map_err(|_| DataError::Schema { file: file.into(), row, message: format!("column {column}: cannot parse {text:?} as a number") })?;
    if !v.is_finite() {
        return Err(DataError::Schema { file: file.into(), row, message: format!("column {column}: value {text:?} is not finite") });
    }
    Ok(v)
}

fn read_records(path: &Path, header: &[&str]) -> Result<Vec<(usize, csv::StringRecord)>, DataError> {
    let file = file_name(path);
    let text = fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            DataError::Schema { file: file.clone(), row: 0, message: "file not found".into() }
        } else {
            DataError::Io { path: path.display().to_string(), source: e }
        }
    })?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let got = rdr.headers().map_err(|e| DataError::Schema { file: file.clone(), row: 1, message: e.to_string() })?.clone();
    if got.iter().collect::<Vec<_>>() != header {
        return Err(DataError::Schema { file, row: 1, message: format!("expected header {}, found {}", header.join(","), got.iter().collect::<Vec<_>>().join(",")) });
    }
    let mut out = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let row = k + 2;
        let rec = rec.map_err(|e| DataError::Schema { file: file.clone(), row, message: e.to_string() })?;
        out.push((row, rec));
    }
    Ok(out)
}

/// Rows of `year,bracket_lo,bracket_hi,<value>` grouped by year.
/// Scheme, years and one row of values per year.
type BracketedTable = (BracketScheme, Vec<i32>, Vec<Vec<f64>>);

fn read_bracketed(path: &Path, header: &[&str], allow_negative: bool) -> Result<BracketedTable, DataError> {
    let file = file_name(path);
    let records = read_records(path, header)?;
    let mut by_year: BTreeMap<i32, Vec<(usize, Bracket, f64)>> = BTreeMap::new();
    for (row, rec) in records {
        let year: i32 = rec[0]
            .parse()
            .map_err(|_| DataError::Schema { file: file.clone(), row, message: format!("column year: cannot parse {:?}", &rec[0]) })?;
        let lo = parse_f64(&file, row, "bracket_lo", &rec[1])?;
        let hi = if rec[2].is_empty() { None } else { Some(parse_f64(&file, row, "bracket_hi", &rec[2])?) };
        let value = parse_f64(&file, row, header[3], &rec[3])?;
        if value < 0.0 && !allow_negative {
            return Err(DataError::NegativeCount { file: file.clone(), row, value });
        }
        by_year.entry(year).or_default().push((row, Bracket { lo, hi }, value));
    }
    let Some(first) = by_year.values().next() else {
        return Err(DataError::Schema { file, row: 2, message: "no data rows".into() });
    };
    let mut brackets: Vec<Bracket> = first.iter().map(|(_, b, _)| *b).collect();
    brackets.sort_by(|a, b| a.lo.total_cmp(&b.lo));
    let scheme = BracketScheme::new(brackets.clone())
        .map_err(|e| DataError::Schema { file: file.clone(), row: first[0].0, message: format!("bad brackets: {e}") })?;

    let years: Vec<i32> = by_year.keys().copied().collect();
    for w in years.windows(2) {
        if w[1] != w[0] + 1 {
            return Err(DataError::YearGap { file, missing: w[0] + 1, before: w[0], after: w[1] });
        }
    }
    let mut counts = Vec::with_capacity(years.len());
    for (year, rows) in by_year {
        let mut row_counts = vec![f64::NAN; brackets.len()];
        for (row, b, v) in &rows {
            let Some(k) = brackets.iter().position(|x| x == b) else {
                return Err(DataError::Schema { file, row: *row, message: format!("year {year}: bracket {} not used in other years", b.label()) });
            };
            if !row_counts[k].is_nan() {
                return Err(DataError::Schema { file, row: *row, message: format!("year {year}: duplicate bracket {}", b.label()) });
            }
            row_counts[k] = *v;
        }
        if let Some(k) = row_counts.iter().position(|v| v.is_nan()) {
            return Err(DataError::Schema { file, row: rows[0].0, message: format!("year {year}: bracket {} missing", brackets[k].label()) });
        }
        counts.push(row_counts);
    }
    Ok((scheme, years, counts))
}

pub fn read_series(path: &Path, kind: SeriesKind) -> Result<BracketedSeries, DataError> {
    let (scheme, years, counts) = read_bracketed(path, &SERIES_HEADER, false)?;
    BracketedSeries::new(kind, scheme, years, counts).map_err(|e| DataError::Inconsistent(e.to_string()))
}

/// Reads `age,rate` rows into a mortality curve.
pub fn read_mu0(path: &Path) -> Result<MortalityCurve, DataError> {
    let file = file_name(path);
    let mut ages = Vec::new();
    let mut rates = Vec::new();
    for (row, rec) in read_records(path, &["age", "rate"])? {
        ages.push(parse_f64(&file, row, "age", &rec[0])?);
        let r = parse_f64(&file, row, "rate", &rec[1])?;
        if r < 0.0 {
            return Err(DataError::NegativeCount { file: file.clone(), row, value: r });
        }
        rates.push(r);
    }
    MortalityCurve::from_values(&ages, &rates).map_err(|e| DataError::Schema { file, row: 0, message: e.to_string() })
}

fn read_gamma(path: &Path) -> Result<BTreeMap<i32, Vec<f64>>, DataError> {
    let (_, years, rows) = read_bracketed(path, &GAMMA_HEADER, false)?;
    Ok(years.into_iter().zip(rows).collect())
}

/// Loads and validates the CSV files of a dataset directory. `gamma.csv` is optional.
pub fn load_bundle(dir: &Path) -> Result<DatasetBundle, DataError> {
    let prevalence = read_series(&dir.join(PREVALENCE_FILE), SeriesKind::Prevalence)?;
    let deaths = read_series(&dir.join(DEATHS_FILE), SeriesKind::Deaths)?;
    let diagnoses = read_series(&dir.join(DIAGNOSES_FILE), SeriesKind::Diagnoses)?;
    let mu0 = read_mu0(&dir.join(MU0_FILE))?;
    let gamma_path = dir.join(GAMMA_FILE);
    let gamma = if gamma_path.exists() { Some(read_gamma(&gamma_path)?) } else { None };
    let bundle = DatasetBundle { prevalence, deaths, diagnoses, mu0, gamma };
    bundle.validate()?;
    Ok(bundle)
}

fn bracketed_csv(header: &[&str], scheme: &BracketScheme, years: &[i32], rows: &[Vec<f64>]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for (y, row) in years.iter().zip(rows) {
        for (b, v) in scheme.brackets().iter().zip(row) {
            let hi = b.hi.map(|h| h.to_string()).unwrap_or_default();
            w.write_record([y.to_string(), b.lo.to_string(), hi, v.to_string()]).expect("in-memory write");
        }
    }
    w.into_inner().expect("in-memory flush")
}

pub fn series_csv(s: &BracketedSeries) -> Vec<u8> {
    bracketed_csv(&SERIES_HEADER, &s.scheme, &s.years, &s.counts)
}

pub fn mu0_csv(mu0: &MortalityCurve) -> Vec<u8> {
    let a = mu0.anchors();
    let rows = a.ages().iter().zip(a.values()).map(|(x, r)| vec![x.to_string(), r.to_string()]);
    table_csv(&["age", "rate"], rows)
}

/// Generic headered CSV.
pub fn table_csv<I, R, S>(header: &[&str], rows: I) -> Vec<u8>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = S>,
    S: AsRef<[u8]>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

/// CSV files of a bundle, keyed by file name.
pub fn bundle_files(b: &DatasetBundle) -> Vec<(String, Vec<u8>)> {
    let mut files = vec![
        (PREVALENCE_FILE.to_string(), series_csv(&b.prevalence)),
        (DEATHS_FILE.to_string(), series_csv(&b.deaths)),
        (DIAGNOSES_FILE.to_string(), series_csv(&b.diagnoses)),
        (MU0_FILE.to_string(), mu0_csv(&b.mu0)),
    ];
    if let Some(g) = &b.gamma {
        let years: Vec<i32> = g.keys().copied().collect();
        let rows: Vec<Vec<f64>> = g.values().cloned().collect();
        files.push((GAMMA_FILE.to_string(), bracketed_csv(&GAMMA_HEADER, b.scheme(), &years, &rows)));
    }
    files
}

/// Ground truth and inputs of a synthetic twin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub first_year: i32,
    pub bracket_edges: Vec<f64>,
    pub anchor_ages: Vec<f64>,
    /// Year-end counts for `first_year - 1`, one per bracket.
    pub prevalence: Vec<f64>,
    /// One row of bracket counts per year.
    pub diagnoses: Vec<Vec<f64>>,
    /// One row of anchor rates per year.
    pub mortality: Vec<Vec<f64>>,
    /// Prior mortality written to `mu0.csv`.
    pub mu0: Vec<f64>,
    /// Relative standard deviation of the multiplicative death noise.
    pub noise: f64,
    /// Relative standard deviation used for the shipped observation covariance when `noise`
    /// is smaller.
    pub gamma_floor: f64,
    pub seed: u64,
}

/// Representative all-cause rates at the default anchor ages (1/year), used as the prior.
pub const DEFAULT_MU0: [f64; 14] = [4e-4, 1e-4, 9e-4, 1.4e-3, 2.2e-3, 4.8e-3, 7.5e-3, 0.011, 0.016, 0.025, 0.04, 0.065, 0.25, 0.4];

impl SynthSpec {
    pub fn years(&self) -> Vec<i32> {
        (0..self.mortality.len() as i32).map(|k| self.first_year + k).collect()
    }

    /// Baseline rates times a `decline` per year, with an extra `bump` at old ages in
    /// `bump_years`.
    pub fn trend_mortality(anchor_ages: &[f64], years: usize, decline: f64, bump: f64, bump_years: &[usize]) -> Vec<Vec<f64>> {
        (0..years)
            .map(|k| {
                let factor = (1.0 - decline).powi(k as i32);
                let in_bump = if bump_years.contains(&k) { 1.0 } else { 0.0 };
                anchor_ages.iter().map(|&a| base_rate(a) * factor * (1.0 + in_bump * bump * bump_shape(a))).collect()
            })
            .collect()
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let nb = self.bracket_edges.len();
        let na = self.anchor_ages.len();
        let bad = |m: String| Err(DataError::InvalidSpec(m));
        if self.mortality.is_empty() {
            return bad("no years".into());
        }
        if self.diagnoses.len() != self.mortality.len() {
            return bad(format!("{} diagnosis rows for {} mortality rows", self.diagnoses.len(), self.mortality.len()));
        }
        if self.prevalence.len() != nb || self.diagnoses.iter().any(|r| r.len() != nb) {
            return bad(format!("count rows must have {nb} entries"));
        }
        if self.mu0.len() != na || self.mortality.iter().any(|r| r.len() != na) {
            return bad(format!("mortality rows must have {na} entries"));
        }
        let all = self.prevalence.iter().chain(self.diagnoses.iter().flatten()).chain(self.mortality.iter().flatten()).chain(&self.mu0);
        if all.clone().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return bad("trajectories must be finite and nonnegative".into());
        }
        if !(self.noise >= 0.0 && self.gamma_floor >= 0.0) || (self.noise == 0.0 && self.gamma_floor == 0.0) {
            return bad("noise and gamma_floor must be nonnegative, not both zero".into());
        }
        Ok(())
    }
}

/// PWDH-like rates: roughly 2-3 times the prior at adult ages.
fn base_rate(a: f64) -> f64 {
    if a < 13.0 {
        DEFAULT_MU0[0]
    } else {
        0.006 * (0.042 * (a - 22.0)).exp()
    }
}

fn bump_shape(a: f64) -> f64 {
    (-((a - 72.0) / 8.0).powi(2)).exp()
}

impl Default for SynthSpec {
    /// 14 years from 2009, the 11 default brackets, mortality declining 3% a year with a 40%
    /// excess around age 72 in 2020-2021, 1% noise.
    fn default() -> Self {
        let years = 14;
        let diag0 = [9000.0, 11000.0, 8000.0, 6500.0, 2000.0, 1200.0, 600.0, 300.0, 120.0, 50.0, 20.0];
        let diagnoses = (0..years).map(|k| diag0.iter().map(|d| d * (1.0 - 0.01 * k as f64)).collect()).collect();
        Self {
            first_year: 2009,
            bracket_edges: DEFAULT_BRACKET_EDGES.to_vec(),
            anchor_ages: DEFAULT_ANCHOR_AGES.to_vec(),
            prevalence: vec![40e3, 110e3, 230e3, 280e3, 90e3, 55e3, 30e3, 15e3, 7e3, 3e3, 1.5e3],
            diagnoses,
            mortality: Self::trend_mortality(&DEFAULT_ANCHOR_AGES, years, 0.03, 0.4, &[11, 12]),
            mu0: DEFAULT_MU0.to_vec(),
            noise: 0.01,
            gamma_floor: 0.005,
            seed: 20090101,
        }
    }
}

/// Exact quantities behind a synthetic bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub years: Vec<i32>,
    pub anchor_ages: Vec<f64>,
    pub mortality: Vec<Vec<f64>>,
    /// Bracket deaths before noise.
    pub clean_deaths: Vec<Vec<f64>>,
    /// Year-end total population.
    pub totals: Vec<f64>,
}

/// Spreads bracket counts evenly over the bracket's nodes.
pub fn uniform_disaggregate(counts: &[f64], grid: &AgeGrid, scheme: &BracketScheme) -> Result<Vec<f64>, DataError> {
    let mut out = vec![0.0; grid.len()];
    for (range, c) in scheme.node_ranges(grid)?.into_iter().zip(counts) {
        let n = range.len() as f64;
        for i in range {
            out[i] = c / n;
        }
    }
    Ok(out)
}

/// Simulates the twin with uniform within-bracket initial state and diagnoses, then applies
/// multiplicative noise `1 + eps`, `eps ~ N(0, noise^2)` clipped at -0.9. The shipped `Gamma`
/// is `(max(noise, gamma_floor) * y)^2` per bracket, floored at 1 person^2.
pub fn synth_generate(spec: &SynthSpec, grid: &AgeGrid, stepper: &StepperConfig) -> Result<(DatasetBundle, GroundTruth), DataError> {
    spec.validate()?;
    let scheme = BracketScheme::from_edges(&spec.bracket_edges)?;
    let years = spec.years();
    let u0 = uniform_disaggregate(&spec.prevalence, grid, &scheme)?;
    let mut hist = vec![PopulationState::from_node_counts(*grid, &u0, spec.first_year as f64)?];
    let mut clean = Vec::with_capacity(years.len());
    let mut noisy = Vec::with_capacity(years.len());
    let mut gamma = BTreeMap::new();
    let mut totals = Vec::with_capacity(years.len());
    let rel = spec.noise.max(spec.gamma_floor);
    let eps = Normal::new(0.0, spec.noise).map_err(|e| DataError::InvalidSpec(e.to_string()))?;
    for (k, &year) in years.iter().enumerate() {
        let mu = MortalityCurve::from_values(&spec.anchor_ages, &spec.mortality[k])?.sample(grid.ages());
        let lam = SourceCurve::from_node_counts(grid, &uniform_disaggregate(&spec.diagnoses[k], grid, &scheme)?)?;
        let out = pde::simulate_year(&hist, &mu, &lam.lam, stepper)?;
        let g = pde::bracket_aggregate(&out.deaths_by_age, grid, &scheme)?;
        let y: Vec<f64> = g
            .iter()
            .enumerate()
            .map(|(b, v)| {
                let mut rng = stream(spec.seed, &[purpose::SYNTH_NOISE, year as u64, b as u64]);
                v * (1.0 + eps.sample(&mut rng).max(-0.9))
            })
            .collect();
        gamma.insert(year, y.iter().map(|v| (rel * v).powi(2).max(1.0)).collect());
        totals.push(out.history.last().expect("nonempty history").total());
        clean.push(g);
        noisy.push(y);
        hist = out.history;
    }
    let base_year = vec![spec.first_year - 1];
    let mk = |kind, years: Vec<i32>, counts| BracketedSeries::new(kind, scheme.clone(), years, counts).map_err(|e| DataError::Numerical(e.to_string()));
    let bundle = DatasetBundle {
        prevalence: mk(SeriesKind::Prevalence, base_year, vec![spec.prevalence.clone()])?,
        deaths: mk(SeriesKind::Deaths, years.clone(), noisy)?,
        diagnoses: mk(SeriesKind::Diagnoses, years.clone(), spec.diagnoses.clone())?,
        mu0: MortalityCurve::from_values(&spec.anchor_ages, &spec.mu0)?,
        gamma: Some(gamma),
    };
    let truth = GroundTruth { years, anchor_ages: spec.anchor_ages.clone(), mortality: spec.mortality.clone(), clean_deaths: clean, totals };
    Ok((bundle, truth))
}

/// JSON document layout shared by all outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Document<C, R> {
    pub meta: Meta,
    pub config: C,
    pub results: R,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub tool: String,
    pub version: String,
    pub kind: String,
}

impl Meta {
    pub fn new(kind: &str) -> Self {
        Self { tool: "agemort".into(), version: env!("CARGO_PKG_VERSION").into(), kind: kind.into() }
    }
}

pub fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(value).expect("serializable value");
    v.push(b'\n');
    v
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, DataError> {
    let text = fs::read(path).map_err(io_err(path))?;
    serde_json::from_slice(&text).map_err(|source| DataError::Json { path: path.display().to_string(), source })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

/// Files written by one run, sorted by path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct Manifest {
    pub files: Vec<ManifestEntry>,
}

/// Writes every `(relative path, contents)` pair under `dir`, then `manifest.json` listing
/// their hashes. No timestamps are recorded, so identical inputs give identical manifests.
pub fn write_outputs(files: &[(String, Vec<u8>)], dir: &Path) -> Result<Manifest, DataError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut entries = Vec::with_capacity(files.len());
    for (rel, bytes) in files {
        let path: PathBuf = dir.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(io_err(parent))?;
        }
        fs::write(&path, bytes).map_err(io_err(&path))?;
        entries.push(ManifestEntry { path: rel.clone(), sha256: hex::encode(Sha256::digest(bytes)), bytes: bytes.len() });
    }
    entries.sort_by(|a, b| a.path.cmp(&b.path));
    let manifest = Manifest { files: entries };
    let mpath = dir.join(MANIFEST_FILE);
    fs::write(&mpath, json_bytes(&manifest)).map_err(io_err(&mpath))?;
    Ok(manifest)
}
