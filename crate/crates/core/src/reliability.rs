//! Reliability and agreement coefficients.
//!
//! Cronbach's alpha treats items as columns and entities as rows. Agreement
//! statistics work on a units × raters [`RatingTable`] with missing ratings.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{DatasetError, MetricDataset};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReliabilityError {
    #[error("need at least 2 items, got {0}")]
    TooFewItems(usize),
    #[error("need at least 2 complete observations, got {0}")]
    TooFewObservations(usize),
    #[error("item `{0}` is constant")]
    ConstantItem(String),
    #[error("total score has zero variance")]
    ZeroTotalVariance,
    #[error("need at least 2 raters, got {0}")]
    TooFewRaters(usize),
    #[error("no unit was rated by two or more raters")]
    NoPairableUnits,
    #[error("all observed ratings are identical; expected disagreement is zero and alpha is undefined")]
    DegenerateData,
    #[error("{0} level is not supported for percent agreement")]
    UnsupportedLevel(&'static str),
    #[error("loadings ({0}) and uniquenesses ({1}) differ in length")]
    LengthMismatch(usize, usize),
    #[error("uniqueness {0} is negative")]
    NegativeUniqueness(f64),
    #[error("non-finite input value")]
    NonFinite,
    #[error("ragged item table: row {row} has {found} values, expected {expected}")]
    RaggedItems { row: usize, found: usize, expected: usize },
    #[error("ragged rating table: unit {unit} has {found} ratings, expected {expected}")]
    RaggedTable { unit: usize, found: usize, expected: usize },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum Coefficient {
    CronbachAlpha,
    PercentAgreement,
    KrippendorffAlpha,
    CompositeReliability,
    OmegaTotal,
}

/// Advisory interpretation labels: above 0.9 excellent, above 0.7 acceptable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum Band {
    Excellent,
    Acceptable,
    Unacceptable,
}

impl Band {
    pub fn of(value: f64) -> Self {
        if value > 0.9 {
            Band::Excellent
        } else if value > 0.7 {
            Band::Acceptable
        } else {
            Band::Unacceptable
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Band::Excellent => "excellent",
            Band::Acceptable => "acceptable",
            Band::Unacceptable => "unacceptable",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct DropOne {
    pub item: String,
    pub alpha: f64,
    pub standardized_alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ReliabilityReport {
    pub coefficient: Coefficient,
    pub value: f64,
    pub items: Vec<String>,
    pub n: usize,
    pub band: Band,
    /// Alpha from the mean inter-item correlation (alpha only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub standardized: Option<f64>,
    /// Alpha with each item removed (alpha with ≥3 items only).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub details: Vec<DropOne>,
}

impl ReliabilityReport {
    fn new(coefficient: Coefficient, value: f64, items: Vec<String>, n: usize) -> Self {
        Self {
            coefficient,
            value,
            items,
            n,
            band: Band::of(value),
            standardized: None,
            details: Vec::new(),
        }
    }
}

fn variance(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = xs.clone().count() as f64;
    let mean = xs.clone().sum::<f64>() / n;
    xs.map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

fn covariance_matrix(data: &DMatrix<f64>) -> DMatrix<f64> {
    let n = data.nrows() as f64;
    let means = data.row_mean();
    let centered = DMatrix::from_fn(data.nrows(), data.ncols(), |i, j| data[(i, j)] - means[j]);
    centered.transpose() * &centered / (n - 1.0)
}

fn raw_alpha(cov: &DMatrix<f64>, keep: &[usize]) -> f64 {
    let k = keep.len() as f64;
    let item_var: f64 = keep.iter().map(|&i| cov[(i, i)]).sum();
    let total: f64 = keep.iter().flat_map(|&i| keep.iter().map(move |&j| (i, j))).map(|ij| cov[ij]).sum();
    k / (k - 1.0) * (1.0 - item_var / total)
}

fn standardized_alpha(cov: &DMatrix<f64>, keep: &[usize]) -> f64 {
    let k = keep.len();
    let mut sum = 0.0;
    for (a, &i) in keep.iter().enumerate() {
        for &j in &keep[..a] {
            sum += cov[(i, j)] / (cov[(i, i)] * cov[(j, j)]).sqrt();
        }
    }
    let mean_r = sum / (k * (k - 1) / 2) as f64;
    let k = k as f64;
    k * mean_r / (1.0 + (k - 1.0) * mean_r)
}

/// Cronbach's alpha with unbiased (n−1) variances. `items` is
/// entities × k with one item per column.
pub fn cronbach_alpha(
    items: &DMatrix<f64>,
    labels: &[String],
) -> Result<ReliabilityReport, ReliabilityError> {
    let (n, k) = items.shape();
    if k < 2 {
        return Err(ReliabilityError::TooFewItems(k));
    }
    if n < 2 {
        return Err(ReliabilityError::TooFewObservations(n));
    }
    if items.iter().any(|v| !v.is_finite()) {
        return Err(ReliabilityError::NonFinite);
    }
    let label = |j: usize| labels.get(j).cloned().unwrap_or_else(|| format!("item{}", j + 1));
    for j in 0..k {
        let col = items.column(j);
        if col.iter().all(|&v| v == col[0]) {
            return Err(ReliabilityError::ConstantItem(label(j)));
        }
    }
    let total_var = variance(items.row_iter().map(|r| r.sum()).collect::<Vec<_>>().into_iter());
    if total_var <= 0.0 {
        return Err(ReliabilityError::ZeroTotalVariance);
    }
    let cov = covariance_matrix(items);
    let all: Vec<usize> = (0..k).collect();
    let mut report = ReliabilityReport::new(
        Coefficient::CronbachAlpha,
        raw_alpha(&cov, &all),
        (0..k).map(label).collect(),
        n,
    );
    report.standardized = Some(standardized_alpha(&cov, &all));
    if k >= 3 {
        report.details = (0..k)
            .map(|drop| {
                let keep: Vec<usize> = all.iter().copied().filter(|&j| j != drop).collect();
                DropOne {
                    item: label(drop),
                    alpha: raw_alpha(&cov, &keep),
                    standardized_alpha: standardized_alpha(&cov, &keep),
                }
            })
            .collect();
    }
    Ok(report)
}

/// [`cronbach_alpha`] over row vectors (one row per entity).
pub fn cronbach_alpha_rows(rows: &[Vec<f64>], labels: &[String]) -> Result<ReliabilityReport, ReliabilityError> {
    let k = rows.first().map(Vec::len).unwrap_or(0);
    if let Some((row, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != k) {
        return Err(ReliabilityError::RaggedItems { row, found: r.len(), expected: k });
    }
    cronbach_alpha(&DMatrix::from_fn(rows.len(), k, |i, j| rows[i][j]), labels)
}

/// Alpha over the named metrics of a dataset, using complete cases only.
pub fn cronbach_alpha_for<S: AsRef<str>>(
    ds: &MetricDataset,
    metrics: &[S],
) -> Result<ReliabilityReport, ReliabilityError> {
    let sub = ds.select(metrics)?;
    let (_, data) = sub.complete_cases();
    let labels: Vec<String> = sub.columns.iter().map(|c| c.raw.clone()).collect();
    cronbach_alpha(&data, &labels)
}

/// Measurement level of ratings; selects Krippendorff's difference function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    #[default]
    Nominal,
    Ordinal,
    Interval,
    Ratio,
}

impl Level {
    fn name(self) -> &'static str {
        match self {
            Level::Nominal => "nominal",
            Level::Ordinal => "ordinal",
            Level::Interval => "interval",
            Level::Ratio => "ratio",
        }
    }
}

/// Units × raters ratings; `None` marks a missing rating.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct RatingTable {
    pub ratings: Vec<Vec<Option<f64>>>,
    #[serde(default)]
    pub level: Level,
}

impl RatingTable {
    pub fn new(ratings: Vec<Vec<Option<f64>>>, level: Level) -> Result<Self, ReliabilityError> {
        let table = Self { ratings, level };
        table.validate()?;
        Ok(table)
    }

    pub fn n_raters(&self) -> usize {
        self.ratings.first().map(Vec::len).unwrap_or(0)
    }

    pub fn validate(&self) -> Result<(), ReliabilityError> {
        let m = self.n_raters();
        for (u, row) in self.ratings.iter().enumerate() {
            if row.len() != m {
                return Err(ReliabilityError::RaggedTable { unit: u, found: row.len(), expected: m });
            }
            if row.iter().flatten().any(|v| !v.is_finite()) {
                return Err(ReliabilityError::NonFinite);
            }
        }
        if m < 2 {
            return Err(ReliabilityError::TooFewRaters(m));
        }
        if !self.pairable_units().any(|_| true) {
            return Err(ReliabilityError::NoPairableUnits);
        }
        Ok(())
    }

    /// Present ratings of every unit rated at least twice.
    fn pairable_units(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        self.ratings
            .iter()
            .map(|row| row.iter().flatten().copied().collect::<Vec<f64>>())
            .filter(|v| v.len() >= 2)
    }
}

/// Share of exactly matching rating pairs among all co-rated pairs.
pub fn percent_agreement(table: &RatingTable) -> Result<ReliabilityReport, ReliabilityError> {
    table.validate()?;
    if matches!(table.level, Level::Interval | Level::Ratio) {
        return Err(ReliabilityError::UnsupportedLevel(table.level.name()));
    }
    let (mut matches, mut pairs, mut units) = (0u64, 0u64, 0usize);
    for values in table.pairable_units() {
        units += 1;
        for (a, x) in values.iter().enumerate() {
            for y in &values[a + 1..] {
                pairs += 1;
                if x == y {
                    matches += 1;
                }
            }
        }
    }
    let labels = (1..=table.n_raters()).map(|r| format!("rater{r}")).collect();
    Ok(ReliabilityReport::new(
        Coefficient::PercentAgreement,
        matches as f64 / pairs as f64,
        labels,
        units,
    ))
}

/// Squared difference δ²(c, k) for the given level. `ranks` maps each
/// distinct value to its frequency, needed for the ordinal metric.
fn delta_squared(level: Level, c: f64, k: f64, freqs: &BTreeMap<OrderedValue, f64>) -> f64 {
    match level {
        Level::Nominal => {
            if c == k {
                0.0
            } else {
                1.0
            }
        }
        Level::Interval => (c - k).powi(2),
        Level::Ratio => {
            let s = c + k;
            if s == 0.0 {
                0.0
            } else {
                ((c - k) / s).powi(2)
            }
        }
        Level::Ordinal => {
            if c == k {
                return 0.0;
            }
            let (lo, hi) = if c < k { (c, k) } else { (k, c) };
            let between: f64 = freqs
                .range(OrderedValue::new(lo)..=OrderedValue::new(hi))
                .map(|(_, n)| *n)
                .sum();
            let ends = freqs[&OrderedValue::new(lo)] + freqs[&OrderedValue::new(hi)];
            (between - ends / 2.0).powi(2)
        }
    }
}

/// A rating usable as a map key. `-0.0` is folded into `0.0` so the two
/// never form separate categories.
#[derive(Debug, Clone, Copy)]
struct OrderedValue(f64);

impl OrderedValue {
    fn new(v: f64) -> Self {
        Self(if v == 0.0 { 0.0 } else { v })
    }
}

impl PartialEq for OrderedValue {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other).is_eq()
    }
}

impl Eq for OrderedValue {}

impl PartialOrd for OrderedValue {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrderedValue {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Krippendorff's alpha via the coincidence matrix, with missing ratings.
pub fn krippendorff_alpha(table: &RatingTable) -> Result<ReliabilityReport, ReliabilityError> {
    table.validate()?;
    // Coincidence matrix o_ck over distinct values.
    let mut coincidence: BTreeMap<(OrderedValue, OrderedValue), f64> = BTreeMap::new();
    let mut units = 0usize;
    for values in table.pairable_units() {
        units += 1;
        let weight = 1.0 / (values.len() as f64 - 1.0);
        for (a, &x) in values.iter().enumerate() {
            for (b, &y) in values.iter().enumerate() {
                if a != b {
                    *coincidence.entry((OrderedValue::new(x), OrderedValue::new(y))).or_default() += weight;
                }
            }
        }
    }
    let mut marginals: BTreeMap<OrderedValue, f64> = BTreeMap::new();
    for (&(c, _), &o) in &coincidence {
        *marginals.entry(c).or_default() += o;
    }
    if marginals.len() < 2 {
        return Err(ReliabilityError::DegenerateData);
    }
    let n: f64 = marginals.values().sum();
    let observed: f64 = coincidence
        .iter()
        .map(|(&(c, k), &o)| o * delta_squared(table.level, c.0, k.0, &marginals))
        .sum::<f64>()
        / n;
    let mut expected = 0.0;
    for (&c, &nc) in &marginals {
        for (&k, &nk) in &marginals {
            expected += nc * nk * delta_squared(table.level, c.0, k.0, &marginals);
        }
    }
    expected /= n * (n - 1.0);
    if expected == 0.0 {
        return Err(ReliabilityError::DegenerateData);
    }
    let labels = (1..=table.n_raters()).map(|r| format!("rater{r}")).collect();
    Ok(ReliabilityReport::new(
        Coefficient::KrippendorffAlpha,
        1.0 - observed / expected,
        labels,
        units,
    ))
}

fn composite(
    coefficient: Coefficient,
    loadings: &[f64],
    uniquenesses: &[f64],
) -> Result<ReliabilityReport, ReliabilityError> {
    if loadings.len() != uniquenesses.len() {
        return Err(ReliabilityError::LengthMismatch(loadings.len(), uniquenesses.len()));
    }
    if loadings.len() < 2 {
        return Err(ReliabilityError::TooFewItems(loadings.len()));
    }
    if loadings.iter().chain(uniquenesses).any(|v| !v.is_finite()) {
        return Err(ReliabilityError::NonFinite);
    }
    if let Some(&bad) = uniquenesses.iter().find(|&&t| t < 0.0) {
        return Err(ReliabilityError::NegativeUniqueness(bad));
    }
    let common = loadings.iter().sum::<f64>().powi(2);
    let error: f64 = uniquenesses.iter().sum();
    if common + error == 0.0 {
        return Err(ReliabilityError::DegenerateData);
    }
    let labels = (1..=loadings.len()).map(|i| format!("item{i}")).collect();
    Ok(ReliabilityReport::new(coefficient, common / (common + error), labels, loadings.len()))
}

/// CR = (Σλ)² / ((Σλ)² + Σθ) from standardized loadings and uniquenesses.
pub fn composite_reliability(
    loadings: &[f64],
    uniquenesses: &[f64],
) -> Result<ReliabilityReport, ReliabilityError> {
    composite(Coefficient::CompositeReliability, loadings, uniquenesses)
}

/// McDonald's omega total from a one-factor solution; same formula as CR.
pub fn omega_total(
    loadings: &[f64],
    uniquenesses: &[f64],
) -> Result<ReliabilityReport, ReliabilityError> {
    composite(Coefficient::OmegaTotal, loadings, uniquenesses)
}
