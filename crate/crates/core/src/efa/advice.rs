//! How many factors to retain: parallel analysis, Kaiser criterion and
//! scree elbows.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use super::EfaError;
use crate::dataset::{correlation_matrix, MetricDataset, MissingPolicy};
use crate::linalg::sorted_eigenvalues;

pub const MIN_REPLICATIONS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum ParallelCriterion {
    Quantile(f64),
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default)]
pub struct ParallelConfig {
    pub reps: usize,
    pub criterion: ParallelCriterion,
    pub seed: u64,
}

impl Default for ParallelConfig {
    fn default() -> Self {
        Self { reps: 100, criterion: ParallelCriterion::Quantile(0.95), seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct FactorCountAdvice {
    pub eigenvalues: Vec<f64>,
    pub parallel_suggested: usize,
    pub parallel_thresholds: Vec<f64>,
    pub kaiser_suggested: usize,
    pub scree_series: Vec<f64>,
    /// Advisory only; strongest bend first.
    pub scree_elbow_candidates: Vec<usize>,
    pub theory_suggested: Option<usize>,
}

/// Number of eigenvalues strictly greater than one.
pub fn kaiser_count(eigenvalues: &[f64]) -> usize {
    eigenvalues.iter().filter(|&&l| l > 1.0).count()
}

/// Candidate factor counts at local maxima of the discrete second
/// difference λ[i−1] − 2λ[i] + λ[i+1]; the count is the number of
/// eigenvalues before the bend.
pub fn scree_elbows(eigenvalues: &[f64]) -> Vec<usize> {
    let n = eigenvalues.len();
    if n < 3 {
        return Vec::new();
    }
    let accel: Vec<f64> = (1..n - 1)
        .map(|i| eigenvalues[i - 1] - 2.0 * eigenvalues[i] + eigenvalues[i + 1])
        .collect();
    let mut candidates: Vec<(usize, f64)> = (0..accel.len())
        .filter(|&a| {
            accel[a] > 0.0
                && (a == 0 || accel[a] >= accel[a - 1])
                && (a + 1 == accel.len() || accel[a] >= accel[a + 1])
        })
        .map(|a| (a + 1, accel[a]))
        .collect();
    candidates.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
    candidates.into_iter().map(|(count, _)| count).collect()
}

fn random_eigenvalues(n: usize, p: usize, seed: u64, rep: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep);
    let data = DMatrix::<f64>::from_fn(n, p, |_, _| StandardNormal.sample(&mut rng));
    let means = data.row_mean();
    let centered = DMatrix::from_fn(n, p, |i, j| data[(i, j)] - means[j]);
    let cov = centered.transpose() * &centered;
    let sd: Vec<f64> = (0..p).map(|j| cov[(j, j)].sqrt()).collect();
    let corr = DMatrix::from_fn(p, p, |i, j| if i == j { 1.0 } else { cov[(i, j)] / (sd[i] * sd[j]) });
    sorted_eigenvalues(&corr)
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Per-rank thresholds from eigenvalues of `reps` uncorrelated normal
/// datasets of size n × p. Replication `i` uses stream `i` of the seed, so
/// results do not depend on scheduling.
pub fn parallel_thresholds(n: usize, p: usize, config: &ParallelConfig) -> Result<Vec<f64>, EfaError> {
    if config.reps < MIN_REPLICATIONS {
        return Err(EfaError::TooFewReplications(config.reps));
    }
    if p < 2 {
        return Err(EfaError::TooFewMetrics(p));
    }
    if n <= p {
        return Err(EfaError::TooFewObservations { n, p });
    }
    if let ParallelCriterion::Quantile(q) = config.criterion {
        if !(q > 0.0 && q < 1.0) {
            return Err(EfaError::InvalidQuantile(q));
        }
    }
    let draws: Vec<Vec<f64>> = (0..config.reps as u64)
        .into_par_iter()
        .map(|rep| random_eigenvalues(n, p, config.seed, rep))
        .collect();
    Ok((0..p)
        .map(|rank| {
            let mut at_rank: Vec<f64> = draws.iter().map(|d| d[rank]).collect();
            match config.criterion {
                ParallelCriterion::Mean => at_rank.iter().sum::<f64>() / at_rank.len() as f64,
                ParallelCriterion::Quantile(q) => {
                    at_rank.sort_by(f64::total_cmp);
                    quantile(&at_rank, q)
                }
            }
        })
        .collect())
}

/// Factor-count advice from the listwise correlation matrix of `ds`.
pub fn advise_factor_count(
    ds: &MetricDataset,
    config: &ParallelConfig,
    theory: Option<usize>,
) -> Result<FactorCountAdvice, EfaError> {
    let r = correlation_matrix(ds, MissingPolicy::Listwise)?;
    let eigenvalues = sorted_eigenvalues(&r.r);
    let thresholds = parallel_thresholds(r.n_used, r.dim(), config)?;
    // Leading run of eigenvalues that beat their random counterpart.
    let parallel_suggested = eigenvalues
        .iter()
        .zip(&thresholds)
        .take_while(|(actual, random)| actual > random)
        .count();
    Ok(FactorCountAdvice {
        kaiser_suggested: kaiser_count(&eigenvalues),
        scree_elbow_candidates: scree_elbows(&eigenvalues),
        scree_series: eigenvalues.clone(),
        eigenvalues,
        parallel_suggested,
        parallel_thresholds: thresholds,
        theory_suggested: theory,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kaiser_counts_strictly_above_one() {
        assert_eq!(kaiser_count(&[2.5, 1.2, 0.8, 0.5]), 2);
        assert_eq!(kaiser_count(&[1.0, 1.0]), 0);
    }

    #[test]
    fn elbow_after_sharp_drop() {
        let eig = [4.0, 3.8, 0.5, 0.4, 0.3];
        assert_eq!(scree_elbows(&eig).first(), Some(&2));
        assert!(scree_elbows(&[1.0, 0.5]).is_empty());
    }

    #[test]
    fn thresholds_are_deterministic_and_validated() {
        let cfg = ParallelConfig { reps: 50, seed: 9, ..Default::default() };
        let a = parallel_thresholds(100, 5, &cfg).unwrap();
        let b = parallel_thresholds(100, 5, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.windows(2).all(|w| w[0] >= w[1]));
        assert!(a[0] > 1.0);
        let few = ParallelConfig { reps: 49, ..cfg };
        assert_eq!(parallel_thresholds(100, 5, &few), Err(EfaError::TooFewReplications(49)));
        let bad_q = ParallelConfig { criterion: ParallelCriterion::Quantile(1.5), ..cfg };
        assert!(parallel_thresholds(100, 5, &bad_q).is_err());
    }

    #[test]
    fn quantile_interpolates() {
        assert_eq!(quantile(&[0.0, 1.0, 2.0, 3.0, 4.0], 0.5), 2.0);
        assert!((quantile(&[0.0, 10.0], 0.95) - 9.5).abs() < 1e-12);
    }
}
