//! Iterated principal-axis factoring.

use nalgebra::DMatrix;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use super::adequacy::near_duplicates;
use super::{EfaError, FactorSolution, Rotation, Thresholds};
use crate::dataset::CorrelationMatrix;
use crate::linalg::{sorted_eigen, sorted_eigenvalues, spd_inverse};

/// Communalities are capped here during iteration (Heywood guard).
pub const COMMUNALITY_CAP: f64 = 1.0 - 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default)]
pub struct ExtractOptions {
    pub max_iterations: usize,
    /// Stop once the largest communality change falls below this.
    pub tolerance: f64,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        Self { max_iterations: 200, tolerance: 1e-6 }
    }
}

pub fn extract(r: &CorrelationMatrix, k: usize) -> Result<FactorSolution, EfaError> {
    extract_with(r, k, &ExtractOptions::default())
}

/// Unrotated k-factor solution. Starts from squared multiple correlations
/// and alternates eigendecomposition of the reduced matrix with communality
/// updates until they settle.
pub fn extract_with(
    r: &CorrelationMatrix,
    k: usize,
    options: &ExtractOptions,
) -> Result<FactorSolution, EfaError> {
    let p = r.dim();
    if k == 0 || k >= p {
        return Err(EfaError::InvalidFactorCount { k, p });
    }
    let inv = spd_inverse(&r.r).ok_or_else(|| EfaError::NotPositiveDefinite { pairs: near_duplicates(r) })?;
    let mut h2: Vec<f64> = (0..p)
        .map(|i| (1.0 - 1.0 / inv[(i, i)]).clamp(0.0, COMMUNALITY_CAP))
        .collect();

    let mut loadings = DMatrix::zeros(p, k);
    let mut last_delta = f64::INFINITY;
    let mut iterations = 0;
    let mut heywood = vec![false; p];
    while iterations < options.max_iterations {
        iterations += 1;
        let mut reduced = r.r.clone();
        for i in 0..p {
            reduced[(i, i)] = h2[i];
        }
        let (values, vectors) = sorted_eigen(&reduced);
        for f in 0..k {
            let scale = values[f].max(0.0).sqrt();
            for i in 0..p {
                loadings[(i, f)] = vectors[(i, f)] * scale;
            }
        }
        last_delta = 0.0;
        for i in 0..p {
            let raw: f64 = loadings.row(i).iter().map(|l| l * l).sum();
            heywood[i] = raw >= COMMUNALITY_CAP;
            let next = raw.min(COMMUNALITY_CAP);
            last_delta = last_delta.max((next - h2[i]).abs());
            h2[i] = next;
        }
        if last_delta < options.tolerance {
            break;
        }
    }
    if last_delta >= options.tolerance {
        return Err(EfaError::NonConvergence { iterations, last_delta });
    }

    let mut solution = FactorSolution {
        labels: r.labels.clone(),
        loadings,
        factor_correlations: DMatrix::identity(k, k),
        communalities: Vec::new(),
        eigenvalues: sorted_eigenvalues(&r.r),
        factor_variance: Vec::new(),
        variance_explained: 0.0,
        assignment: Vec::new(),
        suppressed_threshold: Thresholds::default().suppress,
        rotation: Rotation::None,
        heywood: heywood.clone(),
        iterations,
        n_used: r.n_used,
        warnings: Vec::new(),
    };
    solution.normalize();
    for (i, _) in heywood.iter().enumerate().filter(|(_, &h)| h) {
        solution
            .warnings
            .push(format!("Heywood case: `{}` has communality at or above 1", r.labels[i].raw));
    }
    Ok(solution)
}
