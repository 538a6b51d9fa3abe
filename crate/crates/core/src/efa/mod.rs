//! Exploratory factor analysis: adequacy tests, factor-count advice,
//! principal-axis extraction, oblimin rotation, problem diagnosis and the
//! scale-correlation audit.

mod adequacy;
mod advice;
mod audit;
mod diagnose;
mod extract;
mod rotate;
mod table;

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dataset::{correlation_matrix, DatasetError, MetricDataset, MetricName, MissingPolicy};
use crate::matrix_serde;

pub use adequacy::{adequacy, AdequacyReport, CorrelatedPair, VariableAdequacy};
pub use advice::{
    advise_factor_count, kaiser_count, parallel_thresholds, scree_elbows, FactorCountAdvice,
    ParallelConfig, ParallelCriterion,
};
pub use audit::{audit_scales, ScaleAudit};
pub use diagnose::{diagnose, label_factors, Evidence, Problem, ProblemKind};
pub use extract::{extract, extract_with, ExtractOptions};
pub use rotate::{quartimin_criterion, rotate, RotateOptions};
pub use table::render_loadings;

/// Metric (raw header) → expected construct.
pub type ExpectedMap = BTreeMap<String, String>;

/// Builds the expected map from the `Construct.` prefix of each header.
pub fn expected_from_names<'a>(names: impl IntoIterator<Item = &'a MetricName>) -> ExpectedMap {
    names
        .into_iter()
        .map(|m| (m.raw.clone(), m.construct.clone()))
        .collect()
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EfaError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("correlation matrix is not positive definite (multicollinearity); near-duplicate pairs: {}", format_pairs(.pairs))]
    NotPositiveDefinite { pairs: Vec<CorrelatedPair> },
    #[error("need more observations ({n}) than metrics ({p})")]
    TooFewObservations { n: usize, p: usize },
    #[error("need at least 2 metrics, got {0}")]
    TooFewMetrics(usize),
    #[error("factor count {k} must satisfy 1 <= k < {p}")]
    InvalidFactorCount { k: usize, p: usize },
    #[error("principal-axis factoring did not converge in {iterations} iterations (last change {last_delta:.3e})")]
    NonConvergence { iterations: usize, last_delta: f64 },
    #[error("oblimin rotation did not converge from any of {starts} starts")]
    RotationFailed { starts: usize },
    #[error("solution is already rotated")]
    AlreadyRotated,
    #[error("sampling adequacy failed (KMO {kmo:.3}, Bartlett p {p_value:.3e}); pass an override to proceed")]
    AdequacyFailed { kmo: f64, p_value: f64 },
    #[error("parallel analysis needs at least 50 replications, got {0}")]
    TooFewReplications(usize),
    #[error("invalid parallel-analysis quantile {0}")]
    InvalidQuantile(f64),
    #[error("expected construct missing for metric `{0}`")]
    MissingExpected(String),
    #[error("construct `{0}` has a single metric")]
    SingletonConstruct(String),
    #[error("need at least 2 constructs, got {0}")]
    TooFewConstructs(usize),
    #[error("invalid threshold `{name}` = {value}")]
    InvalidThreshold { name: String, value: f64 },
}

fn format_pairs(pairs: &[CorrelatedPair]) -> String {
    if pairs.is_empty() {
        return "none above 0.9".into();
    }
    pairs
        .iter()
        .map(|p| format!("{}~{} (r={:.3})", p.a, p.b, p.r))
        .collect::<Vec<_>>()
        .join(", ")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Rotation {
    None,
    Oblimin { gamma: f64 },
}

impl Default for Rotation {
    fn default() -> Self {
        Rotation::Oblimin { gamma: 0.0 }
    }
}

/// Cut-offs used for display and diagnosis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default)]
pub struct Thresholds {
    /// Loadings below this are blanked in tables.
    pub suppress: f64,
    /// Communalities below this are flagged.
    pub communality: f64,
    /// Loadings above this on an unexpected factor are flagged.
    pub wrong_factor: f64,
    /// Two or more loadings above this make a cross-loading.
    pub cross_loading: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { suppress: 0.3, communality: 0.5, wrong_factor: 0.5, cross_loading: 0.3 }
    }
}

impl Thresholds {
    pub const NAMES: [&'static str; 4] = ["suppress", "communality", "wrong_factor", "cross_loading"];

    pub fn set(&mut self, name: &str, value: f64) -> Result<(), EfaError> {
        let invalid = || EfaError::InvalidThreshold { name: name.to_string(), value };
        if !(value.is_finite() && (0.0..=1.0).contains(&value)) {
            return Err(invalid());
        }
        match name {
            "suppress" => self.suppress = value,
            "communality" => self.communality = value,
            "wrong_factor" => self.wrong_factor = value,
            "cross_loading" => self.cross_loading = value,
            _ => return Err(invalid()),
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default)]
pub struct EfaConfig {
    pub missing_policy: MissingPolicy,
    pub rotation: Rotation,
    /// Random orthonormal rotation starts tried besides the identity.
    pub restarts: usize,
    pub seed: u64,
    pub thresholds: Thresholds,
    /// Proceed even when KMO < 0.5 or Bartlett's test is not significant.
    pub override_adequacy: bool,
    pub extract: ExtractOptions,
}

impl Default for EfaConfig {
    fn default() -> Self {
        Self {
            missing_policy: MissingPolicy::Listwise,
            rotation: Rotation::default(),
            restarts: 10,
            seed: 0,
            thresholds: Thresholds::default(),
            override_adequacy: false,
            extract: ExtractOptions::default(),
        }
    }
}

/// A factor solution. Loadings are pattern loadings (p × k).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct FactorSolution {
    pub labels: Vec<MetricName>,
    #[serde(with = "matrix_serde")]
    #[schemars(with = "Vec<Vec<f64>>")]
    pub loadings: DMatrix<f64>,
    #[serde(with = "matrix_serde")]
    #[schemars(with = "Vec<Vec<f64>>")]
    pub factor_correlations: DMatrix<f64>,
    pub communalities: Vec<f64>,
    /// Eigenvalues of the correlation matrix, descending.
    pub eigenvalues: Vec<f64>,
    /// Common variance per factor; sums to `variance_explained · p`.
    pub factor_variance: Vec<f64>,
    pub variance_explained: f64,
    /// Index of the factor with the largest |loading| per metric.
    pub assignment: Vec<usize>,
    pub suppressed_threshold: f64,
    pub rotation: Rotation,
    pub heywood: Vec<bool>,
    pub iterations: usize,
    pub n_used: usize,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl FactorSolution {
    pub fn n_metrics(&self) -> usize {
        self.loadings.nrows()
    }

    pub fn n_factors(&self) -> usize {
        self.loadings.ncols()
    }

    pub fn loading(&self, metric: usize, factor: usize) -> f64 {
        self.loadings[(metric, factor)]
    }

    pub fn is_suppressed(&self, metric: usize, factor: usize) -> bool {
        self.loadings[(metric, factor)].abs() < self.suppressed_threshold
    }

    pub fn metrics_on(&self, factor: usize) -> Vec<&MetricName> {
        self.assignment
            .iter()
            .enumerate()
            .filter(|(_, &f)| f == factor)
            .map(|(j, _)| &self.labels[j])
            .collect()
    }

    /// Model-implied common covariance ΛΦΛ′.
    pub fn common_covariance(&self) -> DMatrix<f64> {
        &self.loadings * &self.factor_correlations * self.loadings.transpose()
    }

    /// Hash of the labels and loadings rounded to 1e-10.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.n_metrics() as u64).to_le_bytes());
        h.update((self.n_factors() as u64).to_le_bytes());
        for l in &self.labels {
            h.update(l.raw.as_bytes());
            h.update([0u8]);
        }
        for i in 0..self.n_metrics() {
            for f in 0..self.n_factors() {
                let q = (self.loadings[(i, f)] * 1e10).round() as i64;
                h.update(q.to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }

    /// Reorders factors by descending explained variance, makes the
    /// largest-|loading| entry of each factor positive and recomputes
    /// communalities and assignment.
    pub(crate) fn normalize(&mut self) {
        let (p, k) = self.loadings.shape();
        // Sign fix.
        for f in 0..k {
            let col = self.loadings.column(f);
            let (mut best, mut best_abs) = (0usize, -1.0);
            for j in 0..p {
                if col[j].abs() > best_abs {
                    best_abs = col[j].abs();
                    best = j;
                }
            }
            if col[best] < 0.0 {
                self.loadings.column_mut(f).neg_mut();
                for g in 0..k {
                    if g != f {
                        self.factor_correlations[(f, g)] = -self.factor_correlations[(f, g)];
                        self.factor_correlations[(g, f)] = -self.factor_correlations[(g, f)];
                    }
                }
            }
        }
        let structure = &self.loadings * &self.factor_correlations;
        let contrib: Vec<f64> = (0..k)
            .map(|f| (0..p).map(|j| self.loadings[(j, f)] * structure[(j, f)]).sum())
            .collect();
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| contrib[b].total_cmp(&contrib[a]).then(a.cmp(&b)));
        self.loadings = DMatrix::from_fn(p, k, |j, f| self.loadings[(j, order[f])]);
        let phi = self.factor_correlations.clone();
        self.factor_correlations = DMatrix::from_fn(k, k, |a, b| phi[(order[a], order[b])]);
        for f in 0..k {
            self.factor_correlations[(f, f)] = 1.0;
        }
        self.factor_variance = order.iter().map(|&f| contrib[f]).collect();
        let common = self.common_covariance();
        self.communalities = (0..p).map(|j| common[(j, j)]).collect();
        self.variance_explained = self.communalities.iter().sum::<f64>() / p as f64;
        self.assignment = (0..p)
            .map(|j| {
                // Ties go to the lower factor index.
                let mut best = 0;
                for f in 1..k {
                    if self.loadings[(j, f)].abs() > self.loadings[(j, best)].abs() {
                        best = f;
                    }
                }
                best
            })
            .collect();
    }
}

/// Correlation → adequacy check → extraction → rotation for one factor count.
pub fn run_efa(ds: &MetricDataset, k: usize, config: &EfaConfig) -> Result<FactorSolution, EfaError> {
    let r = correlation_matrix(ds, config.missing_policy)?;
    let report = adequacy(&r, r.n_used)?;
    if !report.passes() && !config.override_adequacy {
        return Err(EfaError::AdequacyFailed { kmo: report.kmo_overall, p_value: report.bartlett_p });
    }
    let mut solution = extract_with(&r, k, &config.extract)?;
    solution.suppressed_threshold = config.thresholds.suppress;
    if k >= 2 {
        if let Rotation::Oblimin { gamma } = config.rotation {
            let opts = RotateOptions { gamma, restarts: config.restarts, seed: config.seed, ..RotateOptions::default() };
            solution = rotate(&solution, &opts)?;
        }
    }
    solution.warnings.extend(report.warnings.iter().cloned());
    solution.warnings.extend(r.warnings.iter().cloned());
    Ok(solution)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thresholds_set_by_name() {
        let mut t = Thresholds::default();
        t.set("communality", 0.4).unwrap();
        assert_eq!(t.communality, 0.4);
        assert!(t.set("bogus", 0.4).is_err());
        assert!(t.set("suppress", 1.5).is_err());
    }

    #[test]
    fn expected_map_uses_construct_prefix() {
        let names = vec![MetricName::parse("Size.LOC.JHawk").unwrap(), MetricName::parse("Cohesion.LCOM").unwrap()];
        let m = expected_from_names(&names);
        assert_eq!(m["Size.LOC.JHawk"], "Size");
        assert_eq!(m["Cohesion.LCOM"], "Cohesion");
    }
}
