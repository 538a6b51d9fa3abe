//! Oblique direct-oblimin rotation by gradient projection.
//!
//! With γ = 0 the criterion is quartimin:
//! Q(Λ) = ¼ Σᵢ Σ_{f≠g} λ²ᵢf λ²ᵢg.
//! The rotation matrix T has unit-length columns; pattern loadings are
//! Λ = A (T′)⁻¹ and factor correlations Φ = T′T, so ΛΦΛ′ = AA′ always.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use super::{EfaError, FactorSolution, Rotation};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default)]
pub struct RotateOptions {
    pub gamma: f64,
    /// Random orthonormal starts tried in addition to the identity.
    pub restarts: usize,
    pub seed: u64,
    pub max_iterations: usize,
    /// Convergence threshold on the projected-gradient norm.
    pub tolerance: f64,
}

impl Default for RotateOptions {
    fn default() -> Self {
        Self { gamma: 0.0, restarts: 10, seed: 0, max_iterations: 1000, tolerance: 1e-6 }
    }
}

/// Oblimin criterion value and its gradient with respect to the loadings.
fn criterion(l: &DMatrix<f64>, gamma: f64) -> (f64, DMatrix<f64>) {
    let (p, k) = l.shape();
    let l2 = l.map(|x| x * x);
    let off = DMatrix::from_fn(k, k, |a, b| if a == b { 0.0 } else { 1.0 });
    let mut x = &l2 * off;
    if gamma != 0.0 {
        let centering = DMatrix::from_fn(p, p, |a, b| (if a == b { 1.0 } else { 0.0 }) - gamma / p as f64);
        x = centering * x;
    }
    let f = l2.component_mul(&x).sum() / 4.0;
    (f, l.component_mul(&x))
}

pub fn quartimin_criterion(loadings: &DMatrix<f64>) -> f64 {
    criterion(loadings, 0.0).0
}

struct Rotated {
    t: DMatrix<f64>,
    loadings: DMatrix<f64>,
    value: f64,
    converged: bool,
}

fn pattern(a: &DMatrix<f64>, t: &DMatrix<f64>) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
    let t_inv = t.clone().try_inverse()?;
    Some((a * t_inv.transpose(), t_inv))
}

fn gpa_oblique(a: &DMatrix<f64>, start: DMatrix<f64>, opts: &RotateOptions) -> Option<Rotated> {
    let mut t = start;
    let (mut l, mut t_inv) = pattern(a, &t)?;
    let (mut f, gq) = criterion(&l, opts.gamma);
    let mut g = -(l.transpose() * gq * &t_inv).transpose();
    let mut step = 1.0;
    let mut converged = false;
    for _ in 0..opts.max_iterations {
        // Project the gradient onto the tangent space of unit-column matrices.
        let k = t.ncols();
        let mut gp = g.clone();
        for c in 0..k {
            let d = t.column(c).dot(&g.column(c));
            gp.column_mut(c).axpy(-d, &t.column(c), 1.0);
        }
        let s = gp.norm();
        if s < opts.tolerance {
            converged = true;
            break;
        }
        step *= 2.0;
        let mut accepted = None;
        for _ in 0..=10 {
            let mut candidate = &t - &gp * step;
            for c in 0..k {
                let norm = candidate.column(c).norm();
                candidate.column_mut(c).unscale_mut(norm);
            }
            if let Some((lt, ti)) = pattern(a, &candidate) {
                let (ft, gqt) = criterion(&lt, opts.gamma);
                let done = f - ft > 0.5 * s * s * step;
                accepted = Some((candidate, lt, ti, ft, gqt));
                if done {
                    break;
                }
            }
            step /= 2.0;
        }
        let (tt, lt, ti, ft, gqt) = accepted?;
        t = tt;
        l = lt;
        t_inv = ti;
        f = ft;
        g = -(l.transpose() * gqt * &t_inv).transpose();
    }
    Some(Rotated { t, loadings: l, value: f, converged })
}

fn random_orthonormal(k: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let m = DMatrix::<f64>::from_fn(k, k, |_, _| StandardNormal.sample(rng));
    m.qr().q()
}

/// Rotates an unrotated solution. A one-factor solution is returned as is.
/// The best criterion value over the identity start plus `restarts`
/// random orthonormal starts wins.
pub fn rotate(solution: &FactorSolution, opts: &RotateOptions) -> Result<FactorSolution, EfaError> {
    if solution.rotation != Rotation::None {
        return Err(EfaError::AlreadyRotated);
    }
    let k = solution.n_factors();
    if k < 2 {
        return Ok(solution.clone());
    }
    let a = &solution.loadings;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut best: Option<Rotated> = None;
    for start in 0..=opts.restarts {
        let init = if start == 0 { DMatrix::identity(k, k) } else { random_orthonormal(k, &mut rng) };
        let Some(candidate) = gpa_oblique(a, init, opts) else { continue };
        if !candidate.converged {
            continue;
        }
        // Strict improvement keeps the earliest start on ties.
        if best.as_ref().is_none_or(|b| candidate.value < b.value - 1e-12) {
            best = Some(candidate);
        }
    }
    let best = best.ok_or(EfaError::RotationFailed { starts: opts.restarts + 1 })?;
    let mut rotated = solution.clone();
    rotated.loadings = best.loadings;
    rotated.factor_correlations = best.t.transpose() * &best.t;
    rotated.rotation = Rotation::Oblimin { gamma: opts.gamma };
    rotated.normalize();
    Ok(rotated)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::MetricName;

    fn solution(a: DMatrix<f64>) -> FactorSolution {
        let p = a.nrows();
        let k = a.ncols();
        let mut s = FactorSolution {
            labels: (0..p).map(|i| MetricName::parse(&format!("C.m{i}")).unwrap()).collect(),
            loadings: a,
            factor_correlations: DMatrix::identity(k, k),
            communalities: vec![],
            eigenvalues: vec![],
            factor_variance: vec![],
            variance_explained: 0.0,
            assignment: vec![],
            suppressed_threshold: 0.3,
            rotation: Rotation::None,
            heywood: vec![false; p],
            iterations: 0,
            n_used: 100,
            warnings: vec![],
        };
        s.normalize();
        s
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let l = DMatrix::from_row_slice(4, 2, &[0.8, 0.2, 0.7, -0.1, 0.3, 0.6, 0.1, 0.9]);
        for gamma in [0.0, 0.5] {
            let (_, g) = criterion(&l, gamma);
            let h = 1e-6;
            for i in 0..4 {
                for j in 0..2 {
                    let mut up = l.clone();
                    up[(i, j)] += h;
                    let mut dn = l.clone();
                    dn[(i, j)] -= h;
                    let fd = (criterion(&up, gamma).0 - criterion(&dn, gamma).0) / (2.0 * h);
                    assert!((fd - g[(i, j)]).abs() < 1e-8, "gamma {gamma}: {fd} vs {}", g[(i, j)]);
                }
            }
        }
    }

    #[test]
    fn perfect_cluster_is_a_fixed_point() {
        let a = DMatrix::from_row_slice(6, 2, &[0.9, 0.0, 0.8, 0.0, 0.7, 0.0, 0.0, 0.85, 0.0, 0.75, 0.0, 0.6]);
        let s = solution(a.clone());
        let r = rotate(&s, &RotateOptions::default()).unwrap();
        for i in 0..6 {
            for f in 0..2 {
                assert!((r.loading(i, f).abs() - a[(i, f)]).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn rotation_preserves_common_variance() {
        // A rotated-away two-cluster structure.
        let c = (0.5f64).cos();
        let sn = (0.5f64).sin();
        let simple = DMatrix::from_row_slice(6, 2, &[0.9, 0.1, 0.8, 0.0, 0.7, 0.2, 0.1, 0.85, 0.0, 0.75, 0.2, 0.6]);
        let rot = DMatrix::from_row_slice(2, 2, &[c, -sn, sn, c]);
        let s = solution(&simple * rot);
        let r = rotate(&s, &RotateOptions::default()).unwrap();
        let before = s.common_covariance();
        let after = r.common_covariance();
        assert!((before - after).amax() < 1e-8);
        for (x, y) in s.communalities.iter().zip(&r.communalities) {
            assert!((x - y).abs() < 1e-8);
        }
        assert!(quartimin_criterion(&r.loadings) <= quartimin_criterion(&s.loadings));
        for f in 0..2 {
            assert!((r.factor_correlations[(f, f)] - 1.0).abs() < 1e-12);
        }
        assert_eq!(rotate(&r, &RotateOptions::default()).unwrap_err(), EfaError::AlreadyRotated);
    }

    #[test]
    fn single_factor_is_untouched() {
        let s = solution(DMatrix::from_row_slice(3, 1, &[0.8, 0.7, 0.6]));
        assert_eq!(rotate(&s, &RotateOptions::default()).unwrap(), s);
    }
}
