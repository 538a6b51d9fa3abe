//! Data generators with a known factor structure, for demos and tests.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dataset::{DatasetError, MetricDataset, MetricName};

/// Constructs used by [`software_metrics_structure`].
pub const CONSTRUCTS: [&str; 6] = ["Cohesion", "InCoupling", "OutCoupling", "Size", "SubInheritance", "SupInheritance"];

/// Generating model x = Λf + e with f ~ N(0, Φ) and e ~ N(0, diag(Θ)).
#[derive(Debug, Clone, PartialEq)]
pub struct FactorModel {
    pub names: Vec<String>,
    pub loadings: DMatrix<f64>,
    pub factor_correlations: DMatrix<f64>,
    pub uniquenesses: Vec<f64>,
}

impl FactorModel {
    /// Standardized model: uniquenesses make every indicator unit-variance.
    pub fn standardized(names: Vec<String>, loadings: DMatrix<f64>, factor_correlations: DMatrix<f64>) -> Self {
        let common = &loadings * &factor_correlations * loadings.transpose();
        let uniquenesses = (0..loadings.nrows()).map(|j| (1.0 - common[(j, j)]).max(0.0)).collect();
        Self { names, loadings, factor_correlations, uniquenesses }
    }

    /// Model-implied covariance ΛΦΛ′ + diag(Θ).
    pub fn covariance(&self) -> DMatrix<f64> {
        let mut s = &self.loadings * &self.factor_correlations * self.loadings.transpose();
        for (j, t) in self.uniquenesses.iter().enumerate() {
            s[(j, j)] += t;
        }
        s
    }

    /// Draws `n` entities; also returns the true factor values (n × k).
    pub fn sample(&self, n: usize, seed: u64) -> Result<(MetricDataset, DMatrix<f64>), DatasetError> {
        let (p, k) = self.loadings.shape();
        let chol = self
            .factor_correlations
            .clone()
            .cholesky()
            .ok_or_else(|| DatasetError::Malformed("factor correlations are not positive definite".into()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = DMatrix::<f64>::from_fn(n, k, |_, _| StandardNormal.sample(&mut rng));
        let factors = z * chol.l().transpose();
        let mut x = &factors * self.loadings.transpose();
        for j in 0..p {
            let sd = self.uniquenesses[j].sqrt();
            for i in 0..n {
                let e: f64 = StandardNormal.sample(&mut rng);
                x[(i, j)] += sd * e;
            }
        }
        let columns = self
            .names
            .iter()
            .enumerate()
            .map(|(j, name)| Ok((MetricName::parse(name)?, x.column(j).iter().copied().collect())))
            .collect::<Result<Vec<_>, DatasetError>>()?;
        Ok((MetricDataset::from_columns(columns)?, factors))
    }
}

/// Six correlated constructs with three metrics each, loadings drawn from
/// [0.6, 0.95] and factor correlations from [0.1, 0.3].
pub fn software_metrics_structure(seed: u64) -> FactorModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = CONSTRUCTS.len();
    let per = 3;
    let p = k * per;
    let mut loadings = DMatrix::zeros(p, k);
    let mut names = Vec::with_capacity(p);
    for (f, construct) in CONSTRUCTS.iter().enumerate() {
        for m in 0..per {
            loadings[(f * per + m, f)] = rng.gen_range(0.6..0.95);
            names.push(format!("{construct}.M{}", m + 1));
        }
    }
    let mut phi = DMatrix::identity(k, k);
    for a in 0..k {
        for b in 0..a {
            let v = rng.gen_range(0.1..0.3);
            phi[(a, b)] = v;
            phi[(b, a)] = v;
        }
    }
    FactorModel::standardized(names, loadings, phi)
}

/// Simple structure: `k` orthogonal factors, `per_factor` metrics each, all
/// with the same loading.
pub fn simple_structure(k: usize, per_factor: usize, loading: f64) -> FactorModel {
    let p = k * per_factor;
    let loadings = DMatrix::from_fn(p, k, |j, f| if j / per_factor == f { loading } else { 0.0 });
    let names = (0..p).map(|j| format!("F{}.M{}", j / per_factor + 1, j % per_factor + 1)).collect();
    FactorModel::standardized(names, loadings, DMatrix::identity(k, k))
}
