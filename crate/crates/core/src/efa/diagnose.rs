//! Ranks the problems of a factor solution, worst first: low communality,
//! loading on the wrong factor, and cross-loading.
//!
//! Ranking tiers, most severe first:
//! 1. low communality and wrong factor (ascending h2)
//! 2. low communality only (ascending h2)
//! 3. wrong factor (descending wrong loading)
//! 4. cross-loading only (ascending margin between the two largest loadings)
//!
//! Problems marked `retain` sort after every other problem.

use std::collections::{BTreeMap, BTreeSet};

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use super::{EfaError, ExpectedMap, FactorSolution, Thresholds};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    LowCommunality,
    WrongFactor,
    CrossLoading,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct SalientLoading {
    pub factor: usize,
    pub label: Option<String>,
    pub loading: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Evidence {
    pub communality: f64,
    pub expected_construct: String,
    pub expected_factor: Option<usize>,
    /// Loadings above the cross-loading threshold, largest first.
    pub salient: Vec<SalientLoading>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Problem {
    pub kind: ProblemKind,
    /// Every kind that applies to the metric; `kind` is the leading one.
    pub flags: Vec<ProblemKind>,
    pub metric: String,
    /// Higher is worse.
    pub severity: f64,
    /// Flagged but kept for now under the dominance exceptions.
    pub retain: bool,
    pub note: String,
    pub evidence: Evidence,
}

/// Names each factor after the expected construct that loads on it most
/// (sum of squared loadings), matching greedily one construct per factor.
pub fn label_factors(solution: &FactorSolution, expected: &ExpectedMap) -> Vec<Option<String>> {
    let k = solution.n_factors();
    let mut scores: BTreeMap<(String, usize), f64> = BTreeMap::new();
    for (j, label) in solution.labels.iter().enumerate() {
        if let Some(c) = expected.get(&label.raw) {
            for f in 0..k {
                *scores.entry((c.clone(), f)).or_default() += solution.loading(j, f).powi(2);
            }
        }
    }
    let mut ranked: Vec<((String, usize), f64)> = scores.into_iter().filter(|(_, s)| *s > 0.0).collect();
    // Descending score; ties by factor index, then construct name.
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0 .1.cmp(&b.0 .1)).then(a.0 .0.cmp(&b.0 .0)));
    let mut labels = vec![None; k];
    let mut used = BTreeSet::new();
    for ((construct, f), _) in ranked {
        if labels[f].is_none() && !used.contains(&construct) {
            used.insert(construct.clone());
            labels[f] = Some(construct);
        }
    }
    labels
}

pub fn diagnose(
    solution: &FactorSolution,
    expected: &ExpectedMap,
    thresholds: &Thresholds,
) -> Result<Vec<Problem>, EfaError> {
    let k = solution.n_factors();
    for label in &solution.labels {
        if !expected.contains_key(&label.raw) {
            return Err(EfaError::MissingExpected(label.raw.clone()));
        }
    }
    let factor_labels = label_factors(solution, expected);
    let factor_of = |construct: &str| factor_labels.iter().position(|l| l.as_deref() == Some(construct));

    // Smallest primary loading among metrics sitting on their expected factor.
    let smallest_correct = solution
        .labels
        .iter()
        .enumerate()
        .filter(|(j, l)| factor_of(&expected[&l.raw]) == Some(solution.assignment[*j]))
        .map(|(j, _)| solution.loading(j, solution.assignment[j]).abs())
        .fold(f64::INFINITY, f64::min);

    let mut problems = Vec::new();
    for (j, label) in solution.labels.iter().enumerate() {
        let construct = &expected[&label.raw];
        let expected_factor = factor_of(construct);
        let h2 = solution.communalities[j];
        let abs = |f: usize| solution.loading(j, f).abs();
        let primary = solution.assignment[j];

        let mut salient: Vec<usize> = (0..k).filter(|&f| abs(f) > thresholds.cross_loading).collect();
        salient.sort_by(|&a, &b| abs(b).total_cmp(&abs(a)).then(a.cmp(&b)));

        let low = h2 < thresholds.communality;
        let wrong_loadings: Vec<usize> = (0..k)
            .filter(|&f| Some(f) != expected_factor && abs(f) > thresholds.wrong_factor)
            .collect();
        let primary_misplaced = Some(primary) != expected_factor && abs(primary) >= thresholds.suppress;
        let wrong = !wrong_loadings.is_empty() || primary_misplaced;
        let cross = salient.len() >= 2;
        if !(low || wrong || cross) {
            continue;
        }

        let correct = expected_factor.map(abs).unwrap_or(0.0);
        let max_incorrect = (0..k)
            .filter(|&f| Some(f) != expected_factor)
            .map(abs)
            .fold(0.0, f64::max);
        let mut flags = Vec::new();
        if low {
            flags.push(ProblemKind::LowCommunality);
        }
        if wrong {
            flags.push(ProblemKind::WrongFactor);
        }
        if cross {
            flags.push(ProblemKind::CrossLoading);
        }

        let (kind, severity, retain, note) = if low && wrong {
            (ProblemKind::LowCommunality, 3.0 + (1.0 - h2), false, format!(
                "low communality (h2={h2:.2}) and loads on the wrong factor"
            ))
        } else if low {
            let solely_correct = salient.len() == 1
                && Some(salient[0]) == expected_factor
                && correct > thresholds.wrong_factor;
            let note = if solely_correct {
                format!("low communality (h2={h2:.2}) but loads well and only on its own factor; retain for now")
            } else {
                format!("low communality (h2={h2:.2})")
            };
            (ProblemKind::LowCommunality, 2.0 + (1.0 - h2), solely_correct, note)
        } else if wrong {
            let worst = max_incorrect.min(0.999);
            (ProblemKind::WrongFactor, 1.0 + worst, false, format!(
                "loads {max_incorrect:.2} on the wrong factor (correct factor {correct:.2})"
            ))
        } else {
            let margin = abs(salient[0]) - abs(salient[1]);
            let dominated = Some(primary) == expected_factor && correct > max_incorrect && max_incorrect < smallest_correct;
            let note = if dominated {
                format!(
                    "cross-loads {max_incorrect:.2} but loads much higher on the correct factor ({correct:.2}) and below the smallest correct loading ({smallest_correct:.2}); retain for now"
                )
            } else {
                format!("cross-loads with margin {margin:.2}")
            };
            (ProblemKind::CrossLoading, (1.0 - margin).clamp(0.0, 0.999), dominated, note)
        };

        problems.push(Problem {
            kind,
            flags,
            metric: label.raw.clone(),
            severity,
            retain,
            note,
            evidence: Evidence {
                communality: h2,
                expected_construct: construct.clone(),
                expected_factor,
                salient: salient
                    .iter()
                    .map(|&f| SalientLoading {
                        factor: f,
                        label: factor_labels[f].clone(),
                        loading: solution.loading(j, f),
                    })
                    .collect(),
            },
        });
    }
    problems.sort_by(|a, b| a.retain.cmp(&b.retain).then(b.severity.total_cmp(&a.severity)));
    Ok(problems)
}
