//! Per-entity metric tables: loading, validation, reversal and correlation.
//!
//! Column headers follow the `Construct.Metric[.Tool]` convention, e.g.
//! `Size.LOC.Designite`. The first column of every file holds entity ids.

use std::collections::HashSet;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use nalgebra::DMatrix;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix_serde;

/// Minimum number of complete observations needed for a correlation.
pub const MIN_COMPLETE_CASES: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DatasetError {
    #[error("header row is missing")]
    MissingHeader,
    #[error("dataset has no data rows")]
    NoRows,
    #[error("dataset has no metric columns")]
    NoMetrics,
    #[error("duplicate column name `{0}`")]
    DuplicateColumn(String),
    #[error("invalid metric name `{name}`: {reason}")]
    InvalidMetricName { name: String, reason: String },
    #[error("unparseable numeric cell `{value}` at row {row}, column `{column}`")]
    UnparseableCell { row: usize, column: String, value: String },
    #[error("column `{0}` is categorical; recode it to numbers before analysis")]
    CategoricalColumn(String),
    #[error("row {row} has {found} cells, expected {expected}")]
    RaggedRow { row: usize, found: usize, expected: usize },
    #[error("unknown metric `{0}`")]
    UnknownMetric(String),
    #[error("value {value} of `{metric}` lies outside the declared range [{min}, {max}]")]
    OutOfRange { metric: String, value: f64, min: f64, max: f64 },
    #[error("reflection bounds must be finite with min < max")]
    InvalidBounds,
    #[error("column `{0}` has zero variance")]
    ConstantColumn(String),
    #[error("only {found} complete cases available, need at least {needed}")]
    InsufficientCases { found: usize, needed: usize },
    #[error("malformed input: {0}")]
    Malformed(String),
}

/// A parsed `Construct.Metric[.Tool]` column header.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, JsonSchema)]
pub struct MetricName {
    pub construct: String,
    pub metric: String,
    pub tool: Option<String>,
    pub raw: String,
}

impl MetricName {
    /// Parses a header. Two segments mean no tool; more than three fold the
    /// middle segments into the metric name.
    pub fn parse(raw: &str) -> Result<Self, DatasetError> {
        let invalid = |reason: &str| DatasetError::InvalidMetricName {
            name: raw.to_string(),
            reason: reason.to_string(),
        };
        let trimmed = raw.trim();
        if trimmed != raw {
            return Err(invalid("surrounding whitespace"));
        }
        let segments: Vec<&str> = raw.split('.').collect();
        if segments.len() < 2 {
            return Err(invalid("expected Construct.Metric[.Tool]"));
        }
        if segments.iter().any(|s| s.is_empty()) {
            return Err(invalid("empty segment"));
        }
        let (metric, tool) = match segments.len() {
            2 => (segments[1].to_string(), None),
            n => (segments[1..n - 1].join("."), Some(segments[n - 1].to_string())),
        };
        Ok(Self {
            construct: segments[0].to_string(),
            metric,
            tool,
            raw: raw.to_string(),
        })
    }
}

impl FromStr for MetricName {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

impl fmt::Display for MetricName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.raw)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct ParseOptions {
    pub delimiter: u8,
    /// Reject non-numeric cells instead of recording them as missing.
    pub strict: bool,
}

impl Default for ParseOptions {
    fn default() -> Self {
        Self { delimiter: b',', strict: false }
    }
}

impl ParseOptions {
    pub fn tab() -> Self {
        Self { delimiter: b'\t', ..Self::default() }
    }
}

/// How a reversed indicator is flipped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Inversion {
    Negate,
    Reflect { min: f64, max: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Transformation {
    pub metric: String,
    pub inversion: Inversion,
}

/// Entities × metrics table with an explicit missing mask (`None` cells).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct MetricDataset {
    pub id_header: String,
    pub entity_ids: Vec<String>,
    pub columns: Vec<MetricName>,
    /// Row-major cells, `entity_ids.len() * columns.len()` long.
    cells: Vec<Option<f64>>,
    #[serde(default)]
    pub provenance: Vec<Transformation>,
}

const MISSING_TOKENS: &[&str] = &["", "NA", "N/A", "NaN", "nan", "null", "NULL", "?"];

fn parse_cell(text: &str) -> Option<f64> {
    let t = text.trim();
    if MISSING_TOKENS.contains(&t) {
        return None;
    }
    // Rust's float parser accepts "inf"/"nan"; only finite decimals count.
    if !t.bytes().all(|b| b.is_ascii_digit() || matches!(b, b'.' | b'-' | b'+' | b'e' | b'E')) {
        return None;
    }
    t.parse::<f64>().ok().filter(|v| v.is_finite())
}

impl MetricDataset {
    /// Builds a dataset from parts, checking shape and name uniqueness.
    pub fn new(
        id_header: impl Into<String>,
        entity_ids: Vec<String>,
        columns: Vec<MetricName>,
        cells: Vec<Option<f64>>,
    ) -> Result<Self, DatasetError> {
        if entity_ids.is_empty() {
            return Err(DatasetError::NoRows);
        }
        if columns.is_empty() {
            return Err(DatasetError::NoMetrics);
        }
        if cells.len() != entity_ids.len() * columns.len() {
            return Err(DatasetError::Malformed(format!(
                "{} cells for a {}x{} table",
                cells.len(),
                entity_ids.len(),
                columns.len()
            )));
        }
        let mut seen = HashSet::new();
        for c in &columns {
            if !seen.insert(c.raw.as_str()) {
                return Err(DatasetError::DuplicateColumn(c.raw.clone()));
            }
        }
        if let Some(bad) = cells.iter().flatten().find(|v| !v.is_finite()) {
            return Err(DatasetError::Malformed(format!("non-finite value {bad}")));
        }
        Ok(Self {
            id_header: id_header.into(),
            entity_ids,
            columns,
            cells,
            provenance: Vec::new(),
        })
    }

    /// Convenience constructor from complete columns of data.
    pub fn from_columns(columns: Vec<(MetricName, Vec<f64>)>) -> Result<Self, DatasetError> {
        let n = columns.first().map(|c| c.1.len()).unwrap_or(0);
        if let Some((name, col)) = columns.iter().find(|c| c.1.len() != n) {
            return Err(DatasetError::Malformed(format!(
                "column `{name}` has {} values, expected {n}",
                col.len()
            )));
        }
        let p = columns.len();
        let mut cells = vec![None; n * p];
        for (j, (_, col)) in columns.iter().enumerate() {
            for (i, v) in col.iter().enumerate() {
                cells[i * p + j] = Some(*v);
            }
        }
        let ids = (1..=n).map(|i| i.to_string()).collect();
        Self::new("id", ids, columns.into_iter().map(|c| c.0).collect(), cells)
    }

    /// Reads a delimiter-separated table with one header row.
    pub fn load<R: Read>(source: R, options: ParseOptions) -> Result<Self, DatasetError> {
        let mut reader = csv::ReaderBuilder::new()
            .delimiter(options.delimiter)
            .has_headers(false)
            .flexible(true)
            .from_reader(source);
        let mut records = reader.records();
        let header = match records.next() {
            Some(Ok(h)) => h,
            Some(Err(e)) => return Err(DatasetError::Malformed(e.to_string())),
            None => return Err(DatasetError::MissingHeader),
        };
        if header.len() < 2 {
            return Err(DatasetError::NoMetrics);
        }
        let id_header = header[0].to_string();
        let columns = header
            .iter()
            .skip(1)
            .map(MetricName::parse)
            .collect::<Result<Vec<_>, _>>()?;
        let p = columns.len();

        let mut entity_ids = Vec::new();
        let mut cells = Vec::new();
        // Per column: (numeric cells, non-numeric non-missing cells)
        let mut kinds = vec![(0usize, 0usize); p];
        for (row, record) in records.enumerate() {
            let record = record.map_err(|e| DatasetError::Malformed(e.to_string()))?;
            if record.len() == 1 && record[0].trim().is_empty() {
                continue;
            }
            if record.len() != p + 1 {
                return Err(DatasetError::RaggedRow {
                    row: row + 1,
                    found: record.len(),
                    expected: p + 1,
                });
            }
            entity_ids.push(record[0].to_string());
            for (j, text) in record.iter().skip(1).enumerate() {
                let value = parse_cell(text);
                let blank = MISSING_TOKENS.contains(&text.trim());
                match value {
                    Some(_) => kinds[j].0 += 1,
                    None if blank => {}
                    None => {
                        if options.strict {
                            return Err(DatasetError::UnparseableCell {
                                row: row + 1,
                                column: columns[j].raw.clone(),
                                value: text.to_string(),
                            });
                        }
                        kinds[j].1 += 1;
                    }
                }
                cells.push(value);
            }
        }
        if let Some(j) = kinds.iter().position(|&(num, other)| num == 0 && other > 0) {
            return Err(DatasetError::CategoricalColumn(columns[j].raw.clone()));
        }
        Self::new(id_header, entity_ids, columns, cells)
    }

    pub fn load_str(text: &str, options: ParseOptions) -> Result<Self, DatasetError> {
        Self::load(text.as_bytes(), options)
    }

    /// Writes the canonical form: header row, then one row per entity with
    /// missing cells left empty. Reloading yields identical values.
    pub fn write<W: Write>(&self, sink: W, delimiter: u8) -> Result<(), DatasetError> {
        let mut writer = csv::WriterBuilder::new().delimiter(delimiter).from_writer(sink);
        let io = |e: csv::Error| DatasetError::Malformed(e.to_string());
        let mut header = vec![self.id_header.clone()];
        header.extend(self.columns.iter().map(|c| c.raw.clone()));
        writer.write_record(&header).map_err(io)?;
        for (i, id) in self.entity_ids.iter().enumerate() {
            let mut row = vec![id.clone()];
            row.extend(self.row(i).iter().map(|v| v.map(|x| format!("{x:?}")).unwrap_or_default()));
            writer.write_record(&row).map_err(io)?;
        }
        writer.flush().map_err(|e| DatasetError::Malformed(e.to_string()))
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write(&mut buf, b',').expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv output is utf-8")
    }

    pub fn n_entities(&self) -> usize {
        self.entity_ids.len()
    }

    pub fn n_metrics(&self) -> usize {
        self.columns.len()
    }

    pub fn missing_count(&self) -> usize {
        self.cells.iter().filter(|c| c.is_none()).count()
    }

    pub fn get(&self, entity: usize, metric: usize) -> Option<f64> {
        self.cells[entity * self.n_metrics() + metric]
    }

    pub fn row(&self, entity: usize) -> &[Option<f64>] {
        let p = self.n_metrics();
        &self.cells[entity * p..(entity + 1) * p]
    }

    pub fn column(&self, metric: usize) -> impl Iterator<Item = Option<f64>> + '_ {
        let p = self.n_metrics();
        self.cells.iter().skip(metric).step_by(p).copied()
    }

    pub fn index_of(&self, raw: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.raw == raw)
    }

    fn require_index(&self, raw: &str) -> Result<usize, DatasetError> {
        self.index_of(raw).ok_or_else(|| DatasetError::UnknownMetric(raw.to_string()))
    }

    /// Keeps only the named metrics, in the given order.
    pub fn select<S: AsRef<str>>(&self, metrics: &[S]) -> Result<Self, DatasetError> {
        let idx = metrics
            .iter()
            .map(|m| self.require_index(m.as_ref()))
            .collect::<Result<Vec<_>, _>>()?;
        let mut cells = Vec::with_capacity(idx.len() * self.n_entities());
        for i in 0..self.n_entities() {
            let row = self.row(i);
            cells.extend(idx.iter().map(|&j| row[j]));
        }
        let mut out = Self::new(
            self.id_header.clone(),
            self.entity_ids.clone(),
            idx.iter().map(|&j| self.columns[j].clone()).collect(),
            cells,
        )?;
        out.provenance = self.provenance.clone();
        Ok(out)
    }

    /// Drops the named metrics, keeping the rest in their original order.
    pub fn without<S: AsRef<str>>(&self, metrics: &[S]) -> Result<Self, DatasetError> {
        for m in metrics {
            self.require_index(m.as_ref())?;
        }
        let keep: Vec<&str> = self
            .columns
            .iter()
            .map(|c| c.raw.as_str())
            .filter(|raw| !metrics.iter().any(|m| m.as_ref() == *raw))
            .collect();
        self.select(&keep)
    }

    /// Rows with every metric present, as an n × p matrix.
    pub fn complete_cases(&self) -> (Vec<usize>, DMatrix<f64>) {
        let p = self.n_metrics();
        let rows: Vec<usize> = (0..self.n_entities())
            .filter(|&i| self.row(i).iter().all(Option::is_some))
            .collect();
        let m = DMatrix::from_fn(rows.len(), p, |r, j| self.get(rows[r], j).unwrap());
        (rows, m)
    }

    /// Flips reversed indicators so that larger always means "more" of the
    /// construct.
    pub fn invert_reversed<S: AsRef<str>>(
        &self,
        metrics: &[S],
        inversion: Inversion,
    ) -> Result<Self, DatasetError> {
        let idx = metrics
            .iter()
            .map(|m| self.require_index(m.as_ref()))
            .collect::<Result<Vec<_>, _>>()?;
        if let Inversion::Reflect { min, max } = inversion {
            if !(min.is_finite() && max.is_finite() && min < max) {
                return Err(DatasetError::InvalidBounds);
            }
        }
        let mut out = self.clone();
        let p = self.n_metrics();
        for &j in &idx {
            for i in 0..self.n_entities() {
                let cell = &mut out.cells[i * p + j];
                if let Some(v) = cell {
                    *v = match inversion {
                        Inversion::Negate => -*v,
                        Inversion::Reflect { min, max } => {
                            if *v < min || *v > max {
                                return Err(DatasetError::OutOfRange {
                                    metric: self.columns[j].raw.clone(),
                                    value: *v,
                                    min,
                                    max,
                                });
                            }
                            min + max - *v
                        }
                    };
                }
            }
            out.provenance.push(Transformation {
                metric: self.columns[j].raw.clone(),
                inversion,
            });
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum MissingPolicy {
    #[default]
    Listwise,
    Pairwise,
}

/// Pearson correlations among the metrics of a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct CorrelationMatrix {
    pub labels: Vec<MetricName>,
    #[serde(with = "matrix_serde")]
    #[schemars(with = "Vec<Vec<f64>>")]
    pub r: DMatrix<f64>,
    /// Complete-case count (listwise) or smallest per-pair count (pairwise).
    pub n_used: usize,
    pub missing_policy: MissingPolicy,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl CorrelationMatrix {
    /// Wraps a precomputed matrix, enforcing the unit diagonal and symmetry.
    pub fn from_matrix(
        labels: Vec<MetricName>,
        r: DMatrix<f64>,
        n_used: usize,
    ) -> Result<Self, DatasetError> {
        let p = labels.len();
        if r.nrows() != p || r.ncols() != p {
            return Err(DatasetError::Malformed(format!(
                "{}x{} matrix for {p} labels",
                r.nrows(),
                r.ncols()
            )));
        }
        for i in 0..p {
            for j in 0..p {
                let v = r[(i, j)];
                if !v.is_finite() || v.abs() > 1.0 + 1e-12 || (v - r[(j, i)]).abs() > 1e-12 {
                    return Err(DatasetError::Malformed(format!(
                        "entry ({i},{j}) = {v} is not a valid correlation"
                    )));
                }
            }
            if (r[(i, i)] - 1.0).abs() > 1e-12 {
                return Err(DatasetError::Malformed(format!("diagonal entry {i} is not 1")));
            }
        }
        let mut r = r;
        for i in 0..p {
            r[(i, i)] = 1.0;
            for j in 0..i {
                let v = r[(i, j)].clamp(-1.0, 1.0);
                r[(i, j)] = v;
                r[(j, i)] = v;
            }
        }
        Ok(Self {
            labels,
            r,
            n_used,
            missing_policy: MissingPolicy::Listwise,
            warnings: Vec::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    /// Square table with a label column and a label header.
    pub fn to_csv_string(&self) -> String {
        let mut writer = csv::Writer::from_writer(Vec::new());
        let mut header = vec![String::new()];
        header.extend(self.labels.iter().map(|l| l.raw.clone()));
        writer.write_record(&header).expect("in-memory write");
        for (i, label) in self.labels.iter().enumerate() {
            let mut row = vec![label.raw.clone()];
            row.extend((0..self.dim()).map(|j| format!("{:?}", self.r[(i, j)])));
            writer.write_record(&row).expect("in-memory write");
        }
        String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("utf-8")
    }
}

fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

fn is_constant(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[0] == w[1])
}

/// Pearson product-moment correlations under the chosen missing policy.
pub fn correlation_matrix(
    ds: &MetricDataset,
    policy: MissingPolicy,
) -> Result<CorrelationMatrix, DatasetError> {
    let p = ds.n_metrics();
    let mut r = DMatrix::<f64>::identity(p, p);
    let mut warnings = Vec::new();
    let n_used = match policy {
        MissingPolicy::Listwise => {
            let (_, data) = ds.complete_cases();
            let n = data.nrows();
            if n < MIN_COMPLETE_CASES {
                return Err(DatasetError::InsufficientCases { found: n, needed: MIN_COMPLETE_CASES });
            }
            let cols: Vec<Vec<f64>> = (0..p).map(|j| data.column(j).iter().copied().collect()).collect();
            if let Some(j) = cols.iter().position(|c| is_constant(c)) {
                return Err(DatasetError::ConstantColumn(ds.columns[j].raw.clone()));
            }
            for i in 0..p {
                for j in 0..i {
                    let v = pearson(&cols[i], &cols[j]).expect("non-constant columns");
                    r[(i, j)] = v;
                    r[(j, i)] = v;
                }
            }
            n
        }
        MissingPolicy::Pairwise => {
            let cols: Vec<Vec<Option<f64>>> = (0..p).map(|j| ds.column(j).collect()).collect();
            for (j, col) in cols.iter().enumerate() {
                let present: Vec<f64> = col.iter().flatten().copied().collect();
                if present.len() >= 2 && is_constant(&present) {
                    return Err(DatasetError::ConstantColumn(ds.columns[j].raw.clone()));
                }
            }
            let mut min_n = usize::MAX;
            for i in 0..p {
                for j in 0..i {
                    let (xs, ys): (Vec<f64>, Vec<f64>) = cols[i]
                        .iter()
                        .zip(&cols[j])
                        .filter_map(|(a, b)| Some(((*a)?, (*b)?)))
                        .unzip();
                    if xs.len() < MIN_COMPLETE_CASES {
                        return Err(DatasetError::InsufficientCases {
                            found: xs.len(),
                            needed: MIN_COMPLETE_CASES,
                        });
                    }
                    let v = match pearson(&xs, &ys) {
                        Some(v) => v,
                        None => {
                            let which = if is_constant(&xs) { i } else { j };
                            return Err(DatasetError::ConstantColumn(ds.columns[which].raw.clone()));
                        }
                    };
                    r[(i, j)] = v;
                    r[(j, i)] = v;
                    min_n = min_n.min(xs.len());
                }
            }
            if p == 1 {
                min_n = cols[0].iter().flatten().count();
            }
            if r.clone().cholesky().is_none() {
                warnings.push(
                    "pairwise correlation matrix is not positive definite; use listwise deletion for factor analysis"
                        .to_string(),
                );
            }
            min_n
        }
    };
    Ok(CorrelationMatrix {
        labels: ds.columns.clone(),
        r,
        n_used,
        missing_policy: policy,
        warnings,
    })
}
