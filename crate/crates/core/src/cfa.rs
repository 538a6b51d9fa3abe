//! Maximum-likelihood confirmatory factor analysis and regression factor
//! scores.
//!
//! The model is Σ = ΛΦΛ′ + diag(Θ) with unit factor variances. Fitting
//! minimizes F = ln|Σ| + tr(SΣ⁻¹) − ln|S| − p with BFGS over an
//! unconstrained parameter vector:
//!
//! * free loadings as they are;
//! * θⱼ = floorⱼ + exp(tⱼ), so uniquenesses stay above their floor;
//! * Φ = LL′ where row i of L is uᵢ/‖uᵢ‖ with uᵢᵢ = 1 fixed and the
//!   entries left of the diagonal free, which keeps Φ a correlation matrix.
//!
//! F is scale free, so the fit runs on the correlation scale and raw
//! loadings and uniquenesses are rescaled by the sample standard deviations.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{DatasetError, MetricDataset};
use crate::efa::EfaConfig;
use crate::linalg::{spd_inverse, spd_log_det, symmetrize};
use crate::matrix_serde;

pub const SPEC_SCHEMA_VERSION: u32 = 1;
pub const MODEL_SCHEMA_VERSION: u32 = 1;
/// Uniquenesses never go below this share of the metric's variance.
pub const UNIQUENESS_FLOOR: f64 = 1e-4;
/// A uniqueness within this many floors of the floor counts as a Heywood case.
const HEYWOOD_MARGIN: f64 = 10.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CfaError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("the structure has no factors")]
    EmptyStructure,
    #[error("factor `{0}` has no metrics")]
    EmptyFactor(String),
    #[error("metric `{0}` appears in more than one factor")]
    DuplicateMetric(String),
    #[error("duplicate factor name `{0}`")]
    DuplicateFactor(String),
    #[error("metric `{0}` is not in the dataset")]
    UnknownMetric(String),
    #[error("need more complete entities than metrics (n = {n}, p = {p})")]
    TooFewObservations { n: usize, p: usize },
    #[error("sample covariance matrix is singular or not positive definite")]
    SingularCovariance,
    #[error("metric `{0}` has zero variance")]
    ConstantMetric(String),
    #[error("no convergence after {iterations} iterations (gradient norm {gradient_norm:.3e})")]
    NonConvergence { iterations: usize, gradient_norm: f64 },
    #[error("invalid measurement-model document: {0}")]
    InvalidDocument(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum Identification {
    #[default]
    UnitFactorVariance,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct FactorSpec {
    pub name: String,
    pub metrics: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct ChecklistItem {
    pub factor: String,
    pub prompt: String,
    #[serde(default)]
    pub confirmed: bool,
}

/// Where an exported structure came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct EfaProvenance {
    pub k: usize,
    pub dropped: Vec<String>,
    pub digest: String,
    pub config: EfaConfig,
}

fn spec_version() -> u32 {
    SPEC_SCHEMA_VERSION
}

/// Which metrics measure which factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ConfirmatorySpec {
    #[serde(default = "spec_version")]
    pub schema_version: u32,
    pub structure: Vec<FactorSpec>,
    #[serde(default)]
    pub identification: Identification,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<EfaProvenance>,
    #[serde(default)]
    pub content_validity: Vec<ChecklistItem>,
}

impl Default for ConfirmatorySpec {
    fn default() -> Self {
        Self {
            schema_version: SPEC_SCHEMA_VERSION,
            structure: Vec::new(),
            identification: Identification::default(),
            source: None,
            content_validity: Vec::new(),
        }
    }
}

impl ConfirmatorySpec {
    pub fn new(structure: Vec<FactorSpec>) -> Self {
        Self { structure, ..Self::default() }
    }

    /// Metrics in structure order.
    pub fn metrics(&self) -> Vec<&str> {
        self.structure.iter().flat_map(|f| f.metrics.iter().map(String::as_str)).collect()
    }

    /// Checks that factors are non-empty and disjoint. Returns warnings for
    /// factors with fewer than three metrics.
    pub fn validate(&self) -> Result<Vec<String>, CfaError> {
        if self.structure.is_empty() {
            return Err(CfaError::EmptyStructure);
        }
        let mut names = BTreeSet::new();
        let mut seen = BTreeSet::new();
        let mut warnings = Vec::new();
        for f in &self.structure {
            if !names.insert(f.name.as_str()) {
                return Err(CfaError::DuplicateFactor(f.name.clone()));
            }
            if f.metrics.is_empty() {
                return Err(CfaError::EmptyFactor(f.name.clone()));
            }
            for m in &f.metrics {
                if !seen.insert(m.as_str()) {
                    return Err(CfaError::DuplicateMetric(m.clone()));
                }
            }
            if f.metrics.len() < 3 {
                warnings.push(format!(
                    "factor `{}` has {} metric(s); fewer than 3 leaves it under-identified",
                    f.name,
                    f.metrics.len()
                ));
            }
        }
        Ok(warnings)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Largest absolute gradient component accepted as converged.
    pub tolerance: f64,
    /// Return a non-converged fit (flagged) instead of an error.
    pub allow_nonconverged: bool,
    /// Seeded random starts tried after the deterministic one.
    pub extra_starts: usize,
    pub seed: u64,
    /// Keep the discrepancy after every accepted step.
    pub record_trace: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iterations: 5000,
            tolerance: 1e-7,
            allow_nonconverged: false,
            extra_starts: 0,
            seed: 0,
            record_trace: false,
        }
    }
}

fn model_version() -> u32 {
    MODEL_SCHEMA_VERSION
}

/// A fitted measurement model. Serialized as-is, it is the exported
/// formula document: with `means`, `sds` and `score_coefficients` anyone
/// can compute factor scores for new entities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct MeasurementModel {
    #[serde(default = "model_version")]
    pub schema_version: u32,
    pub structure: Vec<FactorSpec>,
    /// Row order of every per-metric field.
    pub metrics: Vec<String>,
    pub factors: Vec<String>,
    /// Raw-scale loadings, p × k, zero off the structure.
    #[serde(with = "matrix_serde")]
    #[schemars(with = "Vec<Vec<f64>>")]
    pub loadings: DMatrix<f64>,
    #[serde(with = "matrix_serde")]
    #[schemars(with = "Vec<Vec<f64>>")]
    pub standardized_loadings: DMatrix<f64>,
    #[serde(with = "matrix_serde")]
    #[schemars(with = "Vec<Vec<f64>>")]
    pub factor_correlations: DMatrix<f64>,
    /// Raw-scale uniquenesses.
    pub uniquenesses: Vec<f64>,
    pub discrepancy: f64,
    pub converged: bool,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub heywood_flags: Vec<bool>,
    pub n_used: usize,
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
    /// k × p; scores = B · z with z the standardized observation.
    #[serde(with = "matrix_serde")]
    #[schemars(with = "Vec<Vec<f64>>")]
    pub score_coefficients: DMatrix<f64>,
    pub score_method: String,
    #[serde(default)]
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<f64>,
}

impl MeasurementModel {
    pub fn n_metrics(&self) -> usize {
        self.metrics.len()
    }

    pub fn n_factors(&self) -> usize {
        self.factors.len()
    }

    /// Model-implied raw covariance ΛΦΛ′ + diag(Θ).
    pub fn implied_covariance(&self) -> DMatrix<f64> {
        implied(&self.loadings, &self.factor_correlations, &self.uniquenesses)
    }
}

fn implied(lambda: &DMatrix<f64>, phi: &DMatrix<f64>, theta: &[f64]) -> DMatrix<f64> {
    let mut sigma = lambda * phi * lambda.transpose();
    for (j, t) in theta.iter().enumerate() {
        sigma[(j, j)] += t;
    }
    symmetrize(&sigma)
}

/// F_ML for given parameters, or `None` when Σ is not positive definite.
pub fn discrepancy(s: &DMatrix<f64>, lambda: &DMatrix<f64>, phi: &DMatrix<f64>, theta: &[f64]) -> Option<f64> {
    let log_det_s = spd_log_det(s)?;
    discrepancy_with(s, log_det_s, &implied(lambda, phi, theta)).map(|(f, _)| f)
}

fn discrepancy_with(s: &DMatrix<f64>, log_det_s: f64, sigma: &DMatrix<f64>) -> Option<(f64, DMatrix<f64>)> {
    let chol = sigma.clone().cholesky()?;
    let log_det: f64 = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let inv = chol.inverse();
    let f = log_det + (s * &inv).trace() - log_det_s - s.nrows() as f64;
    f.is_finite().then_some((f, inv))
}

/// Gradient of F_ML with respect to the natural parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscrepancyGradient {
    /// ∂F/∂λ for every loading entry (mask it to the free ones).
    pub loadings: DMatrix<f64>,
    /// ∂F/∂φ for a symmetric change of an off-diagonal pair (a, b) and (b, a).
    pub factor_correlations: DMatrix<f64>,
    pub uniquenesses: Vec<f64>,
}

/// With G = Σ⁻¹ − Σ⁻¹SΣ⁻¹: ∂F/∂Λ = 2GΛΦ, ∂F/∂θⱼ = Gⱼⱼ and
/// ∂F/∂φ_ab = 2(Λ′GΛ)_ab for the symmetric pair.
pub fn discrepancy_gradient(
    s: &DMatrix<f64>,
    lambda: &DMatrix<f64>,
    phi: &DMatrix<f64>,
    theta: &[f64],
) -> Option<DiscrepancyGradient> {
    let sigma = implied(lambda, phi, theta);
    let inv = spd_inverse(&sigma)?;
    let g = &inv - &inv * s * &inv;
    let m = lambda.transpose() * &g * lambda;
    let k = phi.nrows();
    Some(DiscrepancyGradient {
        loadings: 2.0 * &g * lambda * phi,
        factor_correlations: DMatrix::from_fn(k, k, |a, b| if a == b { 0.0 } else { m[(a, b)] + m[(b, a)] }),
        uniquenesses: (0..theta.len()).map(|j| g[(j, j)]).collect(),
    })
}

/// Regression score coefficients B = ΦΛ′Σ⁻¹ (k × p).
pub fn score_coefficients(lambda: &DMatrix<f64>, phi: &DMatrix<f64>, theta: &[f64]) -> Option<DMatrix<f64>> {
    let inv = spd_inverse(&implied(lambda, phi, theta))?;
    Some(phi * lambda.transpose() * inv)
}

/// Where each free parameter lives.
struct Layout {
    p: usize,
    k: usize,
    /// Factor of each metric (one free loading per metric).
    factor_of: Vec<usize>,
    floor: Vec<f64>,
}

struct Params {
    lambda: DMatrix<f64>,
    phi: DMatrix<f64>,
    theta: Vec<f64>,
    /// Unnormalized rows of the Φ factor and their norms.
    u: DMatrix<f64>,
    norms: Vec<f64>,
}

impl Layout {
    fn n_params(&self) -> usize {
        2 * self.p + self.k * (self.k - 1) / 2
    }

    fn unpack(&self, x: &DVector<f64>) -> Params {
        let (p, k) = (self.p, self.k);
        let mut lambda = DMatrix::zeros(p, k);
        for j in 0..p {
            lambda[(j, self.factor_of[j])] = x[j];
        }
        let theta = (0..p).map(|j| self.floor[j] + x[p + j].exp()).collect();
        let mut u = DMatrix::identity(k, k);
        let mut idx = 2 * p;
        for i in 1..k {
            for c in 0..i {
                u[(i, c)] = x[idx];
                idx += 1;
            }
        }
        let norms: Vec<f64> = (0..k).map(|i| u.row(i).norm()).collect();
        let mut l = u.clone();
        for (i, norm) in norms.iter().enumerate() {
            l.row_mut(i).unscale_mut(*norm);
        }
        let mut phi = &l * l.transpose();
        for i in 0..k {
            phi[(i, i)] = 1.0;
        }
        Params { lambda, phi: symmetrize(&phi), theta, u, norms }
    }

    fn value(&self, s: &DMatrix<f64>, log_det_s: f64, x: &DVector<f64>) -> Option<f64> {
        let prm = self.unpack(x);
        discrepancy_with(s, log_det_s, &implied(&prm.lambda, &prm.phi, &prm.theta)).map(|(f, _)| f)
    }

    fn value_and_gradient(&self, s: &DMatrix<f64>, log_det_s: f64, x: &DVector<f64>) -> Option<(f64, DVector<f64>)> {
        let (p, k) = (self.p, self.k);
        let prm = self.unpack(x);
        let (f, inv) = discrepancy_with(s, log_det_s, &implied(&prm.lambda, &prm.phi, &prm.theta))?;
        let g = &inv - &inv * s * &inv;
        let d_lambda = 2.0 * &g * &prm.lambda * &prm.phi;
        let mut grad = DVector::zeros(self.n_params());
        for j in 0..p {
            grad[j] = d_lambda[(j, self.factor_of[j])];
            grad[p + j] = g[(j, j)] * (prm.theta[j] - self.floor[j]);
        }
        // Φ = LL′ ⇒ ∂F/∂L = 2ML with M = Λ′GΛ; then through the row
        // normalization L_i = u_i/‖u_i‖.
        let m = prm.lambda.transpose() * &g * &prm.lambda;
        let mut l = prm.u.clone();
        for i in 0..k {
            l.row_mut(i).unscale_mut(prm.norms[i]);
        }
        let d_l = 2.0 * m * &l;
        let mut idx = 2 * p;
        for i in 1..k {
            let li = l.row(i);
            let dli = d_l.row(i);
            let proj = li.dot(&dli);
            for c in 0..i {
                grad[idx] = (dli[c] - li[c] * proj) / prm.norms[i];
                idx += 1;
            }
        }
        Some((f, grad))
    }
}

struct Optimum {
    x: DVector<f64>,
    f: f64,
    gradient_norm: f64,
    iterations: usize,
    converged: bool,
    trace: Vec<f64>,
}

/// BFGS with Armijo backtracking. Only steps that lower F are accepted.
fn minimize(
    layout: &Layout,
    s: &DMatrix<f64>,
    log_det_s: f64,
    x0: DVector<f64>,
    options: &FitOptions,
) -> Option<Optimum> {
    let n = x0.len();
    let mut x = x0;
    let (mut f, mut g) = layout.value_and_gradient(s, log_det_s, &x)?;
    let mut h = DMatrix::<f64>::identity(n, n);
    let mut fresh = true;
    let mut trace = if options.record_trace { vec![f] } else { Vec::new() };
    let mut iterations = 0;
    let mut converged = false;
    while iterations < options.max_iterations {
        if g.amax() < options.tolerance {
            converged = true;
            break;
        }
        iterations += 1;
        let mut d = -(&h * &g);
        let mut slope = d.dot(&g);
        if slope >= 0.0 {
            h = DMatrix::identity(n, n);
            fresh = true;
            d = -g.clone();
            slope = d.dot(&g);
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let candidate = &x + &d * step;
            if let Some(fc) = layout.value(s, log_det_s, &candidate) {
                if fc <= f + 1e-4 * step * slope {
                    accepted = Some(candidate);
                    break;
                }
            }
            step *= 0.5;
        }
        let Some(xn) = accepted else {
            if fresh {
                break;
            }
            h = DMatrix::identity(n, n);
            fresh = true;
            continue;
        };
        let Some((fnew, gnew)) = layout.value_and_gradient(s, log_det_s, &xn) else { break };
        let sv = &xn - &x;
        let yv = &gnew - &g;
        let sy = sv.dot(&yv);
        if sy > 1e-14 {
            if fresh {
                h = DMatrix::identity(n, n) * (sy / yv.dot(&yv));
            }
            let rho = 1.0 / sy;
            let hy = &h * &yv;
            let yhy = yv.dot(&hy);
            // H ← (I − ρsy′)H(I − ρys′) + ρss′, expanded.
            h += (&sv * sv.transpose()) * (rho * rho * yhy + rho) - (&hy * sv.transpose() + &sv * hy.transpose()) * rho;
            fresh = false;
        }
        x = xn;
        f = fnew;
        g = gnew;
        if options.record_trace {
            trace.push(f);
        }
    }
    if g.amax() < options.tolerance {
        converged = true;
    }
    Some(Optimum { x, f, gradient_norm: g.amax(), iterations, converged, trace })
}

/// Fits `spec` to the complete cases of `ds`.
pub fn fit(ds: &MetricDataset, spec: &ConfirmatorySpec, options: &FitOptions) -> Result<MeasurementModel, CfaError> {
    spec.validate()?;
    let metrics = spec.metrics();
    if let Some(missing) = metrics.iter().find(|m| ds.index_of(m).is_none()) {
        return Err(CfaError::UnknownMetric(missing.to_string()));
    }
    let (_, x) = ds.select(&metrics)?.complete_cases();
    let (n, p) = x.shape();
    if n <= p {
        return Err(CfaError::TooFewObservations { n, p });
    }
    let means: Vec<f64> = (0..p).map(|j| x.column(j).mean()).collect();
    let centered = DMatrix::from_fn(n, p, |i, j| x[(i, j)] - means[j]);
    let s = symmetrize(&((centered.transpose() * &centered) / (n - 1) as f64));
    fit_covariance(spec, &s, means, n, options)
}

/// Fits `spec` to a covariance matrix whose rows follow `spec.metrics()`.
pub fn fit_covariance(
    spec: &ConfirmatorySpec,
    s: &DMatrix<f64>,
    means: Vec<f64>,
    n: usize,
    options: &FitOptions,
) -> Result<MeasurementModel, CfaError> {
    let mut warnings = spec.validate()?;
    let metrics: Vec<String> = spec.metrics().into_iter().map(String::from).collect();
    let p = metrics.len();
    let k = spec.structure.len();
    if s.shape() != (p, p) || means.len() != p {
        return Err(CfaError::InvalidDocument(format!("covariance must be {p} × {p} with {p} means")));
    }
    if let Some(j) = (0..p).find(|&j| s[(j, j)].is_nan() || s[(j, j)] <= 0.0) {
        return Err(CfaError::ConstantMetric(metrics[j].clone()));
    }
    let sds: Vec<f64> = (0..p).map(|j| s[(j, j)].sqrt()).collect();
    let r = symmetrize(&DMatrix::from_fn(p, p, |a, b| s[(a, b)] / (sds[a] * sds[b])));
    let log_det_r = spd_log_det(&r).ok_or(CfaError::SingularCovariance)?;

    let factor_of: Vec<usize> = spec
        .structure
        .iter()
        .enumerate()
        .flat_map(|(f, fs)| std::iter::repeat_n(f, fs.metrics.len()))
        .collect();
    let layout = Layout { p, k, factor_of, floor: vec![UNIQUENESS_FLOOR; p] };

    // Deterministic start: loadings 0.7, uniquenesses 0.3, orthogonal factors.
    let mut start = DVector::zeros(layout.n_params());
    for j in 0..p {
        start[j] = 0.7;
        start[p + j] = (0.3 - UNIQUENESS_FLOOR).ln();
    }
    let mut starts = vec![start];
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    for _ in 0..options.extra_starts {
        let mut x = DVector::zeros(layout.n_params());
        for j in 0..p {
            x[j] = rng.gen_range(0.3..0.95);
            x[p + j] = rng.gen_range(0.05f64..0.7).ln();
        }
        for i in 2 * p..layout.n_params() {
            x[i] = rng.gen_range(-0.3..0.3);
        }
        starts.push(x);
    }

    let mut best: Option<Optimum> = None;
    for x0 in starts {
        let Some(opt) = minimize(&layout, &r, log_det_r, x0, options) else { continue };
        let better = match &best {
            None => true,
            Some(b) => (opt.converged && !b.converged) || (opt.converged == b.converged && opt.f < b.f - 1e-12),
        };
        if better {
            best = Some(opt);
        }
    }
    let best = best.ok_or(CfaError::NonConvergence { iterations: 0, gradient_norm: f64::INFINITY })?;
    if !best.converged && !options.allow_nonconverged {
        return Err(CfaError::NonConvergence { iterations: best.iterations, gradient_norm: best.gradient_norm });
    }

    let Params { mut lambda, mut phi, theta, .. } = layout.unpack(&best.x);
    // Orient each factor so its loadings sum to a positive number.
    for f in 0..k {
        if lambda.column(f).sum() < 0.0 {
            lambda.column_mut(f).neg_mut();
            phi.column_mut(f).neg_mut();
            phi.row_mut(f).neg_mut();
        }
    }
    let sigma_r = implied(&lambda, &phi, &theta);
    let standardized_loadings = DMatrix::from_fn(p, k, |j, f| lambda[(j, f)] / sigma_r[(j, j)].sqrt());
    let score_coefficients = score_coefficients(&lambda, &phi, &theta).ok_or(CfaError::SingularCovariance)?;
    let heywood_flags: Vec<bool> = theta.iter().map(|&t| t <= UNIQUENESS_FLOOR * HEYWOOD_MARGIN).collect();
    for (j, _) in heywood_flags.iter().enumerate().filter(|(_, &h)| h) {
        warnings.push(format!("Heywood case: uniqueness of `{}` is at its lower bound", metrics[j]));
    }
    if !best.converged {
        warnings.push(format!("fit did not converge (gradient norm {:.3e})", best.gradient_norm));
    }
    Ok(MeasurementModel {
        schema_version: MODEL_SCHEMA_VERSION,
        structure: spec.structure.clone(),
        factors: spec.structure.iter().map(|f| f.name.clone()).collect(),
        loadings: DMatrix::from_fn(p, k, |j, f| lambda[(j, f)] * sds[j]),
        standardized_loadings,
        factor_correlations: phi,
        uniquenesses: theta.iter().zip(&sds).map(|(t, sd)| t * sd * sd).collect(),
        discrepancy: best.f.max(0.0),
        converged: best.converged,
        iterations: best.iterations,
        gradient_norm: best.gradient_norm,
        heywood_flags,
        n_used: n,
        means,
        sds,
        score_coefficients,
        score_method: "regression".into(),
        metrics,
        warnings,
        trace: best.trace,
    })
}

/// Regression factor scores per entity; `None` where a model metric is
/// missing for that entity.
pub fn factor_scores(model: &MeasurementModel, ds: &MetricDataset) -> Result<Vec<Option<Vec<f64>>>, CfaError> {
    let cols: Vec<usize> = model
        .metrics
        .iter()
        .map(|m| ds.index_of(m).ok_or_else(|| CfaError::UnknownMetric(m.clone())))
        .collect::<Result<_, _>>()?;
    let b = &model.score_coefficients;
    Ok((0..ds.n_entities())
        .map(|i| {
            let z: Option<Vec<f64>> = cols
                .iter()
                .enumerate()
                .map(|(j, &c)| ds.get(i, c).map(|v| (v - model.means[j]) / model.sds[j]))
                .collect();
            z.map(|z| (0..b.nrows()).map(|f| (0..z.len()).map(|j| b[(f, j)] * z[j]).sum()).collect())
        })
        .collect())
}

/// The model as a versioned JSON document.
pub fn export_formulas(model: &MeasurementModel) -> String {
    serde_json::to_string_pretty(model).expect("measurement model serializes")
}

/// Parses and checks a document written by [`export_formulas`].
pub fn import_formulas(text: &str) -> Result<MeasurementModel, CfaError> {
    let model: MeasurementModel = serde_json::from_str(text).map_err(|e| CfaError::InvalidDocument(e.to_string()))?;
    if model.schema_version != MODEL_SCHEMA_VERSION {
        return Err(CfaError::InvalidDocument(format!("unsupported schema version {}", model.schema_version)));
    }
    let (p, k) = (model.metrics.len(), model.factors.len());
    let shapes_ok = model.loadings.shape() == (p, k)
        && model.standardized_loadings.shape() == (p, k)
        && model.factor_correlations.shape() == (k, k)
        && model.score_coefficients.shape() == (k, p)
        && [model.uniquenesses.len(), model.means.len(), model.sds.len(), model.heywood_flags.len()]
            .iter()
            .all(|&l| l == p);
    if !shapes_ok {
        return Err(CfaError::InvalidDocument("field dimensions disagree with metrics and factors".into()));
    }
    if model.sds.iter().any(|&s| s.is_nan() || s <= 0.0) {
        return Err(CfaError::InvalidDocument("standard deviations must be positive".into()));
    }
    Ok(model)
}
