//! Shape-preserving piecewise cubic Hermite interpolation (PCHIP).
//!
//! Slopes follow the Fritsch–Carlson construction: interior slopes are the weighted
//! harmonic mean of the adjacent secants (zero at local extrema), and endpoint slopes use
//! the one-sided three-point formula clamped so that each interval stays monotone. A
//! monotone cubic on every interval never leaves the range of its endpoint values, so
//! nonnegative anchors give a nonnegative curve.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default mortality anchor ages (years).
pub const DEFAULT_ANCHOR_AGES: [f64; 14] = [1.0, 10.0, 22.0, 32.0, 42.0, 52.0, 57.0, 62.0, 67.0, 72.0, 77.0, 82.0, 95.0, 101.0];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InterpError {
    #[error("anchor ages must be strictly increasing (index {index}: {prev} >= {next})")]
    NonIncreasingAges { index: usize, prev: f64, next: f64 },
    #[error("anchor value {value} at index {index} is negative or not finite")]
    NegativeValue { index: usize, value: f64 },
    #[error("need at least two anchors with matching ages/values, got {ages} ages and {values} values")]
    BadLength { ages: usize, values: usize },
    #[error("age {age} outside anchor span [{lo}, {hi}]")]
    OutOfRange { age: f64, lo: f64, hi: f64 },
}

/// Validated anchor ages and nonnegative values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorSet {
    ages: Vec<f64>,
    values: Vec<f64>,
}

impl AnchorSet {
    pub fn new(ages: Vec<f64>, values: Vec<f64>) -> Result<Self, InterpError> {
        if ages.len() < 2 || ages.len() != values.len() {
            return Err(InterpError::BadLength { ages: ages.len(), values: values.len() });
        }
        for i in 1..ages.len() {
            // NaN fails this comparison too
            if !(ages[i] > ages[i - 1]) || !ages[i].is_finite() {
                return Err(InterpError::NonIncreasingAges { index: i, prev: ages[i - 1], next: ages[i] });
            }
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !(**v >= 0.0) || !v.is_finite()) {
            return Err(InterpError::NegativeValue { index, value });
        }
        Ok(Self { ages, values })
    }

    /// The default 14 anchor ages with the given values.
    pub fn with_default_ages(values: Vec<f64>) -> Result<Self, InterpError> {
        Self::new(DEFAULT_ANCHOR_AGES.to_vec(), values)
    }

    pub fn ages(&self) -> &[f64] {
        &self.ages
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.ages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ages.is_empty()
    }
}

/// Anchors plus Fritsch–Carlson slopes. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Interpolant {
    anchors: AnchorSet,
    slopes: Vec<f64>,
}

/// Builds the monotone interpolant through `anchors`.
pub fn pchip_build(anchors: AnchorSet) -> Interpolant {
    let x = &anchors.ages;
    let y = &anchors.values;
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
    let mut d = vec![0.0; n];

    if n == 2 {
        d[0] = delta[0];
        d[1] = delta[0];
        return Interpolant { anchors, slopes: d };
    }

    for k in 1..n - 1 {
        let (a, b) = (delta[k - 1], delta[k]);
        if a * b > 0.0 {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            d[k] = (w1 + w2) / (w1 / a + w2 / b);
        }
    }
    d[0] = end_slope(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    Interpolant { anchors, slopes: d }
}

fn end_slope(h0: f64, h1: f64, del0: f64, del1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * del0 - h0 * del1) / (h0 + h1);
    if d.signum() != del0.signum() || del0 == 0.0 {
        0.0
    } else if del0.signum() != del1.signum() && d.abs() > 3.0 * del0.abs() {
        3.0 * del0
    } else {
        d
    }
}

impl Interpolant {
    pub fn anchors(&self) -> &AnchorSet {
        &self.anchors
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    pub fn span(&self) -> (f64, f64) {
        let a = &self.anchors.ages;
        (a[0], a[a.len() - 1])
    }

    /// Value at `age`; no extrapolation outside the anchor span.
    pub fn eval(&self, age: f64) -> Result<f64, InterpError> {
        let (lo, hi) = self.span();
        if !(age >= lo && age <= hi) {
            return Err(InterpError::OutOfRange { age, lo, hi });
        }
        Ok(self.eval_unchecked(age))
    }

    /// Value at `age` clamped into the anchor span, so ages below the first anchor take the
    /// first anchor value (and likewise above the last).
    pub fn eval_clamped(&self, age: f64) -> f64 {
        let (lo, hi) = self.span();
        self.eval_unchecked(age.clamp(lo, hi))
    }

    fn eval_unchecked(&self, age: f64) -> f64 {
        let x = &self.anchors.ages;
        let y = &self.anchors.values;
        let k = match x.partition_point(|&xi| xi <= age) {
            0 => 0,
            p if p >= x.len() => x.len() - 2,
            p => p - 1,
        };
        if age == x[k] {
            return y[k];
        }
        let h = x[k + 1] - x[k];
        let t = (age - x[k]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        let v = h00 * y[k] + h10 * h * self.slopes[k] + h01 * y[k + 1] + h11 * h * self.slopes[k + 1];
        // each piece is monotone, so this only removes roundoff
        v.clamp(y[k].min(y[k + 1]), y[k].max(y[k + 1]))
    }
}

/// Evaluates the interpolant at `age`.
pub fn pchip_eval(f: &Interpolant, age: f64) -> Result<f64, InterpError> {
    f.eval(age)
}

/// A mortality curve: anchor rates (1/year) and their monotone interpolant.
#[derive(Debug, Clone, PartialEq)]
pub struct MortalityCurve {
    interp: Interpolant,
}

impl MortalityCurve {
    pub fn new(anchors: AnchorSet) -> Self {
        Self { interp: pchip_build(anchors) }
    }

    pub fn from_values(ages: &[f64], values: &[f64]) -> Result<Self, InterpError> {
        Ok(Self::new(AnchorSet::new(ages.to_vec(), values.to_vec())?))
    }

    /// Constant rate over the default anchor ages.
    pub fn constant(rate: f64) -> Result<Self, InterpError> {
        Ok(Self::new(AnchorSet::with_default_ages(vec![rate; DEFAULT_ANCHOR_AGES.len()])?))
    }

    pub fn anchors(&self) -> &AnchorSet {
        self.interp.anchors()
    }

    pub fn interpolant(&self) -> &Interpolant {
        &self.interp
    }

    /// Rate at `age`, clamped to the anchor span.
    pub fn rate(&self, age: f64) -> f64 {
        self.interp.eval_clamped(age)
    }

    /// Rates at a list of ages.
    pub fn sample(&self, ages: impl IntoIterator<Item = f64>) -> Vec<f64> {
        ages.into_iter().map(|a| self.rate(a)).collect()
    }
}
