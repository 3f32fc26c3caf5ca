//! Flat `key = value` run configuration.

use std::collections::BTreeMap;
use std::path::PathBuf;

use agemort::eki::Denominator;
use agemort::nndmd::FitMode;
use agemort::pde::{AgeGrid, Limiter, StepperConfig};
use serde::Serialize;

use crate::CliError;

/// Where the reconstruction takes its observation covariance from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaSource {
    /// `gamma.csv` when the bundle has one, otherwise the initial spread.
    Auto,
    Bundle,
    Spread,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSettings {
    pub a_max: f64,
    pub da: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepperSettings {
    pub m: usize,
    pub limiter: Limiter,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EkiSettings {
    #[serde(rename = "J")]
    pub ensemble_size: usize,
    pub n_kf: usize,
    pub seed: u64,
    pub denominator: Denominator,
    pub gamma: GammaSource,
    /// Overrides `gamma` with the same variance for every bracket and year.
    pub gamma_value: Option<f64>,
    pub q_value: Option<f64>,
    pub restart_spread: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DmdSettings {
    pub train_start: i32,
    pub train_end: i32,
    pub exclude_years: Vec<i32>,
    pub forecast_end: i32,
    pub fit_mode: FitMode,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthSettings {
    /// JSON spec file; the built-in default twin when absent.
    pub spec: Option<PathBuf>,
    pub noise: Option<f64>,
    pub seed: Option<u64>,
}

/// Everything a subcommand needs. Paths are not serialized so that documents written
/// from different directories hash identically.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    #[serde(skip)]
    pub data: Option<PathBuf>,
    #[serde(skip)]
    pub out: PathBuf,
    pub grid: GridSettings,
    pub stepper: StepperSettings,
    pub eki: EkiSettings,
    pub dmd: DmdSettings,
    #[serde(skip)]
    pub synth: SynthSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data: None,
            out: PathBuf::from("out"),
            grid: GridSettings { a_max: 101.0, da: 0.25 },
            stepper: StepperSettings { m: 12, limiter: Limiter::LocalFirstOrder },
            eki: EkiSettings {
                ensemble_size: 100,
                n_kf: 10,
                seed: 0,
                denominator: Denominator::Gamma,
                gamma: GammaSource::Auto,
                gamma_value: None,
                q_value: None,
                restart_spread: 1.0,
            },
            dmd: DmdSettings { train_start: 2009, train_end: 2019, exclude_years: vec![2020, 2021, 2022], forecast_end: 2030, fit_mode: FitMode::PerRow },
            synth: SynthSettings { spec: None, noise: None, seed: None },
        }
    }
}

/// Parses `key = value` lines; `#` starts a comment, blank lines are skipped.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Config(format!("line {}: expected `key = value`, found {raw:?}", k + 1)));
        };
        let key = key.trim().to_string();
        if out.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(CliError::Config(format!("line {}: duplicate key {key}", k + 1)));
        }
    }
    Ok(out)
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, CliError> {
    v.parse().map_err(|_| CliError::Config(format!("{key}: cannot parse {v:?}")))
}

fn years(key: &str, v: &str) -> Result<Vec<i32>, CliError> {
    let mut out = Vec::new();
    for part in v.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b): (i32, i32) = (num(key, a.trim())?, num(key, b.trim())?);
                out.extend(a..=b);
            }
            None => out.push(num(key, part)?),
        }
    }
    Ok(out)
}

impl RunConfig {
    pub fn apply(&mut self, pairs: &BTreeMap<String, String>) -> Result<(), CliError> {
        for (key, v) in pairs {
            let v = v.as_str();
            match key.as_str() {
                "data" => self.data = Some(PathBuf::from(v)),
                "out" => self.out = PathBuf::from(v),
                "grid.a_max" => self.grid.a_max = num(key, v)?,
                "grid.da" => self.grid.da = num(key, v)?,
                "stepper.m" => self.stepper.m = num(key, v)?,
                "stepper.limiter" => {
                    self.stepper.limiter = match v {
                        "local_first_order" => Limiter::LocalFirstOrder,
                        "off" => Limiter::Off,
                        _ => return Err(CliError::Config(format!("{key}: expected local_first_order or off, found {v:?}"))),
                    }
                }
                "eki.J" => self.eki.ensemble_size = num(key, v)?,
                "eki.n_kf" => self.eki.n_kf = num(key, v)?,
                "eki.seed" => self.eki.seed = num(key, v)?,
                "eki.denominator" => {
                    self.eki.denominator = match v {
                        "gamma" => Denominator::Gamma,
                        "gamma_inverse" => Denominator::GammaInverse,
                        _ => return Err(CliError::Config(format!("{key}: expected gamma or gamma_inverse, found {v:?}"))),
                    }
                }
                "eki.gamma" => match v {
                    "auto" => self.eki.gamma = GammaSource::Auto,
                    "bundle" => self.eki.gamma = GammaSource::Bundle,
                    "spread" => self.eki.gamma = GammaSource::Spread,
                    _ => self.eki.gamma_value = Some(num(key, v)?),
                },
                "eki.q" => match v {
                    "spread" => self.eki.q_value = None,
                    _ => self.eki.q_value = Some(num(key, v)?),
                },
                "eki.restart_spread" => self.eki.restart_spread = num(key, v)?,
                "dmd.train_start" => self.dmd.train_start = num(key, v)?,
                "dmd.train_end" => self.dmd.train_end = num(key, v)?,
                "dmd.exclude_years" => self.dmd.exclude_years = years(key, v)?,
                "dmd.forecast_end" => self.dmd.forecast_end = num(key, v)?,
                "dmd.fit_mode" => {
                    self.dmd.fit_mode = match v {
                        "per_row" => FitMode::PerRow,
                        "vectorized" => FitMode::Vectorized,
                        _ => return Err(CliError::Config(format!("{key}: expected per_row or vectorized, found {v:?}"))),
                    }
                }
                "synth.spec" => self.synth.spec = Some(PathBuf::from(v)),
                "synth.noise" => self.synth.noise = Some(num(key, v)?),
                "synth.seed" => self.synth.seed = Some(num(key, v)?),
                _ => return Err(CliError::Config(format!("unknown key {key}"))),
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.stepper.m == 0 {
            return bad("stepper.m must be >= 1".into());
        }
        if self.eki.ensemble_size < 2 || self.eki.n_kf == 0 {
            return bad("eki.J must be >= 2 and eki.n_kf >= 1".into());
        }
        if self.dmd.train_end <= self.dmd.train_start {
            return bad("dmd.train_end must be after dmd.train_start".into());
        }
        if self.dmd.forecast_end <= self.dmd.train_end {
            return bad("dmd.forecast_end must be after the last training year".into());
        }
        if [self.eki.gamma_value, self.eki.q_value].iter().flatten().any(|v| !(v.is_finite() && *v > 0.0)) {
            return bad("eki.gamma and eki.q values must be positive".into());
        }
        self.grid()?;
        Ok(())
    }

    pub fn grid(&self) -> Result<AgeGrid, CliError> {
        AgeGrid::new(self.grid.a_max, self.grid.da).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn stepper(&self) -> StepperConfig {
        StepperConfig::new(self.stepper.m).with_limiter(self.stepper.limiter)
    }

    /// Input bundle directory: `data` if set, else the output directory.
    pub fn data_dir(&self) -> PathBuf {
        self.data.clone().unwrap_or_else(|| self.out.clone())
    }

    /// Years used as DMD training snapshots.
    pub fn training_years(&self) -> Vec<i32> {
        (self.dmd.train_start..=self.dmd.train_end).filter(|y| !self.dmd.exclude_years.contains(y)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_dotted_keys_and_comments() {
        let text = "# run\neki.J = 20 # small\n\ndmd.exclude_years = 2015, 2020-2022\nstepper.limiter = off\n";
        let mut cfg = RunConfig::default();
        cfg.apply(&parse_pairs(text).unwrap()).unwrap();
        assert_eq!(cfg.eki.ensemble_size, 20);
        assert_eq!(cfg.dmd.exclude_years, vec![2015, 2020, 2021, 2022]);
        assert_eq!(cfg.stepper.limiter, Limiter::Off);
        assert_eq!(cfg.training_years().len(), 10);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(parse_pairs("eki.J 20").is_err());
        assert!(parse_pairs("a = 1\na = 2").is_err());
        let mut cfg = RunConfig::default();
        assert!(cfg.apply(&parse_pairs("eki.jj = 3").unwrap()).is_err());
        assert!(cfg.apply(&parse_pairs("eki.J = many").unwrap()).is_err());
        cfg.apply(&parse_pairs("dmd.forecast_end = 2019").unwrap()).unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn gamma_keywords_and_values() {
        let mut cfg = RunConfig::default();
        cfg.apply(&parse_pairs("eki.gamma = spread").unwrap()).unwrap();
        assert_eq!(cfg.eki.gamma, GammaSource::Spread);
        cfg.apply(&parse_pairs("eki.gamma = 4.5\neki.q = 2").unwrap()).unwrap();
        assert_eq!(cfg.eki.gamma_value, Some(4.5));
        assert_eq!(cfg.eki.q_value, Some(2.0));
    }
}
