//! True-score simulation: an observation is the true value plus a constant
//! systematic offset plus Gaussian random error.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal as StdNormal};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrueScoreError {
    #[error("number of observations must be at least 1")]
    NoObservations,
    #[error("random error sd must be finite and non-negative, got {0}")]
    InvalidSd(f64),
    #[error("effect and per-observation sd are both zero")]
    Undefined,
    #[error("effect must be non-zero to reach any power")]
    ZeroEffect,
    #[error("significance level must lie in (0, 1), got {0}")]
    InvalidAlpha(f64),
    #[error("power must lie in (0.5, 1), got {0}")]
    InvalidPower(f64),
    #[error("non-finite parameter")]
    NonFinite,
    #[error("histogram needs at least one bin")]
    NoBins,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ErrorModel {
    pub true_score: f64,
    pub random_sd: f64,
    #[serde(default)]
    pub systematic_offset: f64,
    #[serde(default)]
    pub seed: u64,
}

impl ErrorModel {
    pub fn new(true_score: f64, random_sd: f64, systematic_offset: f64, seed: u64) -> Self {
        Self { true_score, random_sd, systematic_offset, seed }
    }

    fn validate(&self) -> Result<(), TrueScoreError> {
        if !self.true_score.is_finite() || !self.systematic_offset.is_finite() {
            return Err(TrueScoreError::NonFinite);
        }
        if !(self.random_sd.is_finite() && self.random_sd >= 0.0) {
            return Err(TrueScoreError::InvalidSd(self.random_sd));
        }
        Ok(())
    }
}

/// Draws `n` observations X = T + e_s + N(0, sd). Identical models produce
/// identical samples.
pub fn simulate_observations(model: &ErrorModel, n: usize) -> Result<Vec<f64>, TrueScoreError> {
    model.validate()?;
    if n == 0 {
        return Err(TrueScoreError::NoObservations);
    }
    let center = model.true_score + model.systematic_offset;
    if model.random_sd == 0.0 {
        return Ok(vec![center; n]);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
    let noise = Normal::new(0.0, model.random_sd).map_err(|_| TrueScoreError::InvalidSd(model.random_sd))?;
    Ok((0..n).map(|_| center + noise.sample(&mut rng)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct DetectabilityReport {
    pub effect: f64,
    pub per_obs_sd: f64,
    /// P(a single draw of the better condition is worse than one of the other).
    pub misorder_probability: f64,
    /// Overlapping coefficient of the two normal densities.
    pub distribution_overlap: f64,
}

fn std_normal() -> StdNormal {
    StdNormal::new(0.0, 1.0).expect("standard normal")
}

/// How likely measurement noise is to hide a true difference of `effect`.
pub fn detectability(effect: f64, per_obs_sd: f64) -> Result<DetectabilityReport, TrueScoreError> {
    if !effect.is_finite() {
        return Err(TrueScoreError::NonFinite);
    }
    if !(per_obs_sd.is_finite() && per_obs_sd >= 0.0) {
        return Err(TrueScoreError::InvalidSd(per_obs_sd));
    }
    if effect == 0.0 && per_obs_sd == 0.0 {
        return Err(TrueScoreError::Undefined);
    }
    let phi = std_normal();
    let (misorder, overlap) = if effect == 0.0 {
        (0.5, 1.0)
    } else if per_obs_sd == 0.0 {
        (0.0, 0.0)
    } else {
        let d = effect.abs();
        (
            phi.cdf(-d / (per_obs_sd * std::f64::consts::SQRT_2)),
            2.0 * phi.cdf(-d / (2.0 * per_obs_sd)),
        )
    };
    Ok(DetectabilityReport {
        effect,
        per_obs_sd,
        misorder_probability: misorder,
        distribution_overlap: overlap,
    })
}

/// Fraction of paired draws where the lower-true-score condition is observed
/// higher than the other one.
pub fn empirical_misorder(low: &ErrorModel, high: &ErrorModel, n: usize) -> Result<f64, TrueScoreError> {
    let a = simulate_observations(low, n)?;
    let b = simulate_observations(high, n)?;
    let flips = a.iter().zip(&b).filter(|(x, y)| x > y).count();
    Ok(flips as f64 / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct SampleSizePlan {
    pub per_group: u64,
    /// Unrounded requirement 2(z₁₋α/₂ + z_power)²(sd/effect)².
    pub exact: f64,
}

/// Per-group sample size for a two-sided, two-sample z comparison.
pub fn required_sample_size(
    effect: f64,
    per_obs_sd: f64,
    alpha: f64,
    power: f64,
) -> Result<SampleSizePlan, TrueScoreError> {
    if !effect.is_finite() {
        return Err(TrueScoreError::NonFinite);
    }
    if effect == 0.0 {
        return Err(TrueScoreError::ZeroEffect);
    }
    if !(per_obs_sd.is_finite() && per_obs_sd >= 0.0) {
        return Err(TrueScoreError::InvalidSd(per_obs_sd));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(TrueScoreError::InvalidAlpha(alpha));
    }
    if !(power > 0.5 && power < 1.0) {
        return Err(TrueScoreError::InvalidPower(power));
    }
    let phi = std_normal();
    let z = phi.inverse_cdf(1.0 - alpha / 2.0) + phi.inverse_cdf(power);
    let exact = 2.0 * z * z * (per_obs_sd / effect).powi(2);
    Ok(SampleSizePlan {
        per_group: (exact.ceil() as u64).max(1),
        exact,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct HistogramBin {
    pub value: f64,
    pub count: u64,
}

/// Equal-width histogram over the sample range, bins labeled by centre.
pub fn histogram(samples: &[f64], bins: usize) -> Result<Vec<HistogramBin>, TrueScoreError> {
    if bins == 0 {
        return Err(TrueScoreError::NoBins);
    }
    if samples.is_empty() {
        return Err(TrueScoreError::NoObservations);
    }
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        return Ok(vec![HistogramBin { value: lo, count: samples.len() as u64 }]);
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0u64; bins];
    for &x in samples {
        let b = (((x - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| HistogramBin { value: lo + width * (i as f64 + 0.5), count })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct SampleSummary {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub max: f64,
}

pub fn summarize(samples: &[f64]) -> Result<SampleSummary, TrueScoreError> {
    if samples.is_empty() {
        return Err(TrueScoreError::NoObservations);
    }
    let n = samples.len();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let sd = if n > 1 {
        (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    Ok(SampleSummary {
        n,
        mean,
        sd,
        min: samples.iter().copied().fold(f64::INFINITY, f64::min),
        max: samples.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}
