//! Convergent/discriminant audit of a construct assignment: every
//! within-construct |r| should exceed every between-construct |r|.

use std::collections::BTreeMap;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use super::{CorrelatedPair, EfaError, ExpectedMap};
use crate::dataset::CorrelationMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ScaleAudit {
    pub min_intra: f64,
    pub max_inter: f64,
    pub pass: bool,
    /// Between-construct pairs with |r| at or above `min_intra`, largest first.
    pub offending_pairs: Vec<CorrelatedPair>,
}

pub fn audit_scales(r: &CorrelationMatrix, assignment: &ExpectedMap) -> Result<ScaleAudit, EfaError> {
    let constructs: Vec<&String> = r
        .labels
        .iter()
        .map(|l| assignment.get(&l.raw).ok_or_else(|| EfaError::MissingExpected(l.raw.clone())))
        .collect::<Result<_, _>>()?;
    let mut sizes: BTreeMap<&String, usize> = BTreeMap::new();
    for c in &constructs {
        *sizes.entry(c).or_default() += 1;
    }
    if sizes.len() < 2 {
        return Err(EfaError::TooFewConstructs(sizes.len()));
    }
    if let Some((c, _)) = sizes.iter().find(|(_, &n)| n < 2) {
        return Err(EfaError::SingletonConstruct((*c).clone()));
    }

    let p = r.dim();
    let mut min_intra = f64::INFINITY;
    let mut max_inter = f64::NEG_INFINITY;
    let mut inter = Vec::new();
    for i in 0..p {
        for j in i + 1..p {
            let v = r.r[(i, j)].abs();
            if constructs[i] == constructs[j] {
                min_intra = min_intra.min(v);
            } else {
                max_inter = max_inter.max(v);
                inter.push((i, j, r.r[(i, j)]));
            }
        }
    }
    let mut offending: Vec<CorrelatedPair> = inter
        .into_iter()
        .filter(|(_, _, v)| v.abs() >= min_intra)
        .map(|(i, j, v)| CorrelatedPair { a: r.labels[i].raw.clone(), b: r.labels[j].raw.clone(), r: v })
        .collect();
    offending.sort_by(|x, y| y.r.abs().total_cmp(&x.r.abs()));
    Ok(ScaleAudit { min_intra, max_inter, pass: min_intra > max_inter, offending_pairs: offending })
}
