//! Kaiser–Meyer–Olkin sampling adequacy and Bartlett's test of sphericity.

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::EfaError;
use crate::dataset::CorrelationMatrix;
use crate::linalg::{spd_inverse, spd_log_det};

/// |r| at or above which a pair counts as near-duplicate.
pub const MULTICOLLINEARITY_R: f64 = 0.9;
/// Recommended minimum observations per metric.
pub const MIN_OBS_PER_VARIABLE: f64 = 10.0;
pub const MIN_KMO: f64 = 0.5;
pub const BARTLETT_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct CorrelatedPair {
    pub a: String,
    pub b: String,
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct VariableAdequacy {
    pub metric: String,
    pub msa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct AdequacyReport {
    pub kmo_overall: f64,
    pub kmo_per_variable: Vec<VariableAdequacy>,
    pub bartlett_chi2: f64,
    pub bartlett_df: usize,
    pub bartlett_p: f64,
    pub multicollinear_pairs: Vec<CorrelatedPair>,
    pub n: usize,
    pub obs_per_variable: f64,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl AdequacyReport {
    pub fn passes(&self) -> bool {
        self.kmo_overall >= MIN_KMO && self.bartlett_p < BARTLETT_ALPHA
    }

    /// Kaiser's verbal labels for KMO.
    pub fn kmo_label(&self) -> &'static str {
        match self.kmo_overall {
            k if k >= 0.9 => "marvelous",
            k if k >= 0.8 => "meritorious",
            k if k >= 0.7 => "middling",
            k if k >= 0.6 => "mediocre",
            k if k >= 0.5 => "miserable",
            _ => "unacceptable",
        }
    }
}

pub(crate) fn near_duplicates(r: &CorrelationMatrix) -> Vec<CorrelatedPair> {
    let p = r.dim();
    let mut pairs = Vec::new();
    for i in 0..p {
        for j in i + 1..p {
            if r.r[(i, j)].abs() >= MULTICOLLINEARITY_R {
                pairs.push(CorrelatedPair {
                    a: r.labels[i].raw.clone(),
                    b: r.labels[j].raw.clone(),
                    r: r.r[(i, j)],
                });
            }
        }
    }
    pairs.sort_by(|x, y| y.r.abs().total_cmp(&x.r.abs()));
    pairs
}

/// KMO from anti-image partial correlations of R⁻¹, Bartlett's χ² from
/// ln|R|, with `n` observations behind R.
pub fn adequacy(r: &CorrelationMatrix, n: usize) -> Result<AdequacyReport, EfaError> {
    let p = r.dim();
    if p < 2 {
        return Err(EfaError::TooFewMetrics(p));
    }
    if n <= p {
        return Err(EfaError::TooFewObservations { n, p });
    }
    let pairs = near_duplicates(r);
    let not_pd = || EfaError::NotPositiveDefinite { pairs: pairs.clone() };
    let inv = spd_inverse(&r.r).ok_or_else(not_pd)?;
    let log_det = spd_log_det(&r.r).ok_or_else(not_pd)?;

    let mut r2_total = 0.0;
    let mut q2_total = 0.0;
    let mut per_variable = Vec::with_capacity(p);
    for i in 0..p {
        let (mut r2, mut q2) = (0.0, 0.0);
        for j in 0..p {
            if i == j {
                continue;
            }
            let q = -inv[(i, j)] / (inv[(i, i)] * inv[(j, j)]).sqrt();
            r2 += r.r[(i, j)].powi(2);
            q2 += q * q;
        }
        r2_total += r2;
        q2_total += q2;
        per_variable.push(VariableAdequacy {
            metric: r.labels[i].raw.clone(),
            msa: if r2 + q2 > 0.0 { r2 / (r2 + q2) } else { 0.0 },
        });
    }
    let kmo = if r2_total + q2_total > 0.0 { r2_total / (r2_total + q2_total) } else { 0.0 };

    let pf = p as f64;
    let chi2 = (-((n as f64) - 1.0 - (2.0 * pf + 5.0) / 6.0) * log_det).max(0.0);
    let df = p * (p - 1) / 2;
    let p_value = ChiSquared::new(df as f64).map(|d| d.sf(chi2)).unwrap_or(f64::NAN);

    let obs_per_variable = n as f64 / pf;
    let mut warnings = Vec::new();
    if obs_per_variable < MIN_OBS_PER_VARIABLE {
        warnings.push(format!(
            "only {obs_per_variable:.1} observations per metric; at least {MIN_OBS_PER_VARIABLE} are recommended"
        ));
    }
    for v in per_variable.iter().filter(|v| v.msa < MIN_KMO) {
        warnings.push(format!("metric `{}` has MSA {:.2} below {MIN_KMO}", v.metric, v.msa));
    }
    Ok(AdequacyReport {
        kmo_overall: kmo,
        kmo_per_variable: per_variable,
        bartlett_chi2: chi2,
        bartlett_df: df,
        bartlett_p: p_value,
        multicollinear_pairs: pairs,
        n,
        obs_per_variable,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::MetricName;
    use nalgebra::DMatrix;

    fn labels(p: usize) -> Vec<MetricName> {
        (0..p).map(|i| MetricName::parse(&format!("C.m{i}")).unwrap()).collect()
    }

    #[test]
    fn identity_is_spherical() {
        let r = CorrelationMatrix::from_matrix(labels(4), DMatrix::identity(4, 4), 100).unwrap();
        let a = adequacy(&r, 100).unwrap();
        assert_eq!(a.bartlett_chi2, 0.0);
        assert_eq!(a.bartlett_p, 1.0);
        assert_eq!(a.bartlett_df, 6);
        assert!(!a.passes());
    }

    #[test]
    fn two_variables_give_half() {
        for r12 in [0.1, 0.35, -0.6, 0.8, 0.95] {
            let m = DMatrix::from_row_slice(2, 2, &[1.0, r12, r12, 1.0]);
            let r = CorrelationMatrix::from_matrix(labels(2), m, 50).unwrap();
            let a = adequacy(&r, 50).unwrap();
            assert_eq!(a.kmo_overall, 0.5, "r = {r12}");
        }
    }

    #[test]
    fn singular_matrix_lists_duplicates() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 0.2, 1.0, 1.0, 0.2, 0.2, 0.2, 1.0]);
        let r = CorrelationMatrix::from_matrix(labels(3), m, 50).unwrap();
        match adequacy(&r, 50) {
            Err(EfaError::NotPositiveDefinite { pairs }) => {
                assert_eq!(pairs.len(), 1);
                assert_eq!((pairs[0].a.as_str(), pairs[0].b.as_str()), ("C.m0", "C.m1"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn few_observations() {
        let r = CorrelationMatrix::from_matrix(labels(3), DMatrix::identity(3, 3), 3).unwrap();
        assert_eq!(adequacy(&r, 3).unwrap_err(), EfaError::TooFewObservations { n: 3, p: 3 });
        let a = adequacy(&r, 20).unwrap();
        assert!(a.warnings.iter().any(|w| w.contains("observations per metric")));
    }
}
