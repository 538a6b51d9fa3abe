//! One check per acceptance criterion. Each returns an [`Outcome`] with a
//! short human-readable summary of what was measured.

use std::sync::Arc;
use std::time::Instant;

use metrology::cfa::{self, ConfirmatorySpec, FactorSpec, FitOptions};
use metrology::congruence;
use metrology::dataset::{correlation_matrix, CorrelationMatrix, MetricName, MissingPolicy};
use metrology::efa::{self, diagnose, expected_from_names, run_efa, EfaConfig, ProblemKind};
use metrology::reliability::{self, Band, Level, RatingTable};
use metrology::session::{Action, RefinementSession};
use metrology::synthetic::{software_metrics_structure, FactorModel, CONSTRUCTS};
use metrology::truescore::{self, ErrorModel};
use nalgebra::DMatrix;
use rand::Rng;

use super::*;

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

impl Outcome {
    pub fn is_fail(&self) -> bool {
        matches!(self, Outcome::Fail(_))
    }

    /// Panics with the summary on failure; used by the plain test targets.
    pub fn assert_ok(&self) {
        if let Outcome::Fail(msg) = self {
            panic!("{msg}");
        }
    }
}

fn check(ok: bool, summary: String) -> Outcome {
    if ok {
        Outcome::Pass(summary)
    } else {
        Outcome::Fail(summary)
    }
}

fn to_level(level: OracleLevel) -> Level {
    match level {
        OracleLevel::Nominal => Level::Nominal,
        OracleLevel::Ordinal => Level::Ordinal,
        OracleLevel::Interval => Level::Interval,
        OracleLevel::Ratio => Level::Ratio,
    }
}

pub fn reliability_oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    for seed in 0..50u64 {
        let mut r = rng(1000 + seed);
        let n = r.gen_range(20..200);
        let k = r.gen_range(2..8);
        let rows = random_rows(seed, n, k);
        let data = DMatrix::from_fn(n, k, |i, j| rows[i][j]);
        let got = reliability::cronbach_alpha(&data, &[]).map(|rep| rep.value);
        match got {
            Ok(v) => worst = worst.max((v - alpha_oracle(&rows)).abs()),
            Err(e) => failures.push(format!("alpha seed {seed}: {e}")),
        }

        let units = r.gen_range(10..40);
        let raters = r.gen_range(2..6);
        let ratings = random_ratings(seed, units, raters, 5, 0.2);
        for level in [OracleLevel::Nominal, OracleLevel::Ordinal, OracleLevel::Interval, OracleLevel::Ratio] {
            let table = RatingTable { ratings: ratings.clone(), level: to_level(level) };
            match reliability::krippendorff_alpha(&table) {
                Ok(rep) => worst = worst.max((rep.value - krippendorff_oracle(&ratings, level)).abs()),
                Err(e) => failures.push(format!("krippendorff {level:?} seed {seed}: {e}")),
            }
        }
        let table = RatingTable { ratings: ratings.clone(), level: Level::Nominal };
        match reliability::percent_agreement(&table) {
            Ok(rep) => worst = worst.max((rep.value - percent_agreement_oracle(&ratings)).abs()),
            Err(e) => failures.push(format!("agreement seed {seed}: {e}")),
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let summary = format!("50 datasets, max |diff| {worst:.2e}, {secs:.2}s");
    if !failures.is_empty() {
        return Outcome::Fail(format!("{summary}; errors: {}", failures.join("; ")));
    }
    check(worst <= 1e-10 && secs < 5.0, summary)
}

pub fn maven_alpha_golden() -> Outcome {
    let Some(ds) = maven_dataset() else {
        return Outcome::Skip("Maven metrics table not found; set METROLOGY_MAVEN_DATA to its CSV path".into());
    };
    let cols = ["Size.LOC.Designite", "Size.LOC.JHawk", "Size.LOC.Understand"];
    match reliability::cronbach_alpha_for(&ds, &cols) {
        Ok(rep) => check(
            (rep.value - 0.97).abs() <= 0.01 && rep.band == Band::Excellent,
            format!("alpha = {:.4} ({})", rep.value, rep.band.label()),
        ),
        Err(e) => Outcome::Fail(format!("alpha failed: {e}")),
    }
}

fn corr_from_rows(rows: &Matrix, p: usize) -> CorrelationMatrix {
    let ds = dataset_from_rows(rows, &names("X", p));
    correlation_matrix(&ds, MissingPolicy::Listwise).unwrap()
}

pub fn adequacy_oracles() -> Outcome {
    let mut worst = 0.0f64;
    for seed in 0..50u64 {
        let p = 2 + (seed as usize % 9);
        let n = 60 + 7 * seed as usize;
        let rows = random_rows(500 + seed, n, p);
        let r = corr_from_rows(&rows, p);
        let rep = match efa::adequacy(&r, n) {
            Ok(rep) => rep,
            Err(e) => return Outcome::Fail(format!("seed {seed}: {e}")),
        };
        let rm = to_rows(&r.r);
        let (kmo, msa) = kmo_oracle(&rm);
        let (chi2, df, pv) = bartlett_oracle(&rm, n);
        worst = worst.max((rep.kmo_overall - kmo).abs());
        for (a, b) in rep.kmo_per_variable.iter().zip(&msa) {
            worst = worst.max((a.msa - b).abs());
        }
        worst = worst.max((rep.bartlett_chi2 - chi2).abs());
        worst = worst.max((rep.bartlett_p - pv).abs());
        if rep.bartlett_df != df {
            return Outcome::Fail(format!("seed {seed}: df {} vs {df}", rep.bartlett_df));
        }
    }

    let two = corr_from_rows(&random_rows(7, 80, 2), 2);
    let kmo_two = efa::adequacy(&two, 80).map(|r| r.kmo_overall);
    let labels: Vec<MetricName> = names("I", 4).iter().map(|n| MetricName::parse(n).unwrap()).collect();
    let identity = CorrelationMatrix::from_matrix(labels, DMatrix::identity(4, 4), 100).unwrap();
    let id = efa::adequacy(&identity, 100);
    let (id_chi2, id_p) = id.as_ref().map(|r| (r.bartlett_chi2, r.bartlett_p)).unwrap_or((f64::NAN, f64::NAN));
    check(
        worst <= 1e-8 && kmo_two == Ok(0.5) && id_chi2 == 0.0 && id_p == 1.0,
        format!(
            "50 matrices, max |diff| {worst:.2e}; p=2 KMO {:?}; identity chi2 {id_chi2}, p {id_p}",
            kmo_two.map_err(|e| e.to_string())
        ),
    )
}

pub fn factor_recovery() -> Outcome {
    let start = Instant::now();
    let mut matched = 0;
    let mut min_congruence = f64::INFINITY;
    let mut details = Vec::new();
    for seed in 0..20u64 {
        let model = software_metrics_structure(seed);
        let (ds, _) = model.sample(1000, 10_000 + seed).unwrap();
        let expected = expected_from_names(&ds.columns);
        let sol = match run_efa(&ds, CONSTRUCTS.len(), &EfaConfig { seed, ..EfaConfig::default() }) {
            Ok(s) => s,
            Err(e) => {
                details.push(format!("seed {seed}: {e}"));
                continue;
            }
        };
        let labels = efa::label_factors(&sol, &expected);
        let assignment_ok = sol.labels.iter().enumerate().all(|(j, name)| {
            labels[sol.assignment[j]].as_deref() == Some(name.construct.as_str())
        });
        if assignment_ok {
            matched += 1;
        } else {
            details.push(format!("seed {seed}: assignment mismatch"));
        }
        for (c, construct) in CONSTRUCTS.iter().enumerate() {
            let truth: Vec<f64> = (0..model.loadings.nrows()).map(|j| model.loadings[(j, c)]).collect();
            let est = match labels.iter().position(|l| l.as_deref() == Some(*construct)) {
                Some(f) => (0..sol.n_metrics()).map(|j| sol.loading(j, f)).collect::<Vec<_>>(),
                None => vec![0.0; truth.len()],
            };
            let phi = congruence(&est, &truth);
            let reference = congruence_oracle(&est, &truth);
            if (phi - reference).abs() > 1e-12 {
                details.push(format!("seed {seed}: congruence disagrees with oracle"));
            }
            min_congruence = min_congruence.min(phi);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        matched >= 19 && min_congruence > 0.95 && secs < 30.0,
        format!(
            "{matched}/20 seeds matched, min congruence {min_congruence:.4}, {secs:.1}s{}",
            if details.is_empty() { String::new() } else { format!(" ({})", details.join("; ")) }
        ),
    )
}

/// Final refined solution reported for the Maven data: construct per metric
/// and primary loading, with the Heywood-adjacent cells.
const FINAL_EFA: [(&str, f64, bool); 18] = [
    ("Cohesion.LCOM", 0.95, false),
    ("Cohesion.LCOMModified", 0.96, false),
    ("Cohesion.YALCOM", 0.64, false),
    ("In-Coupling.CBOin", 0.87, true),
    ("In-Coupling.FANINa", 0.95, false),
    ("In-Coupling.FANINb", 1.0, true),
    ("Out-Coupling.CBOout", 0.8, false),
    ("Out-Coupling.FANOUTa", 0.92, false),
    ("Out-Coupling.FANOUTb", 0.98, false),
    ("Size.LOC", 0.74, false),
    ("Size.NOM.Designite", 0.97, false),
    ("Size.NOPM.Understand", 0.67, false),
    ("Sub-Inheritance.CountSub", 1.0, true),
    ("Sub-Inheritance.NC", 0.73, false),
    ("Sub-Inheritance.SpecializationRatio", 0.94, false),
    ("Sup-Inheritance.CountSup", 0.98, false),
    ("Sup-Inheritance.DIT", 0.91, false),
    ("Sup-Inheritance.ReuseRatio", 0.96, false),
];

pub fn maven_efa_golden() -> Outcome {
    let Some(full) = maven_dataset() else {
        return Outcome::Skip("Maven metrics table not found; set METROLOGY_MAVEN_DATA to its CSV path".into());
    };
    let mut keep: Vec<&str> = FINAL_EFA.iter().map(|(m, _, _)| *m).collect();
    keep.extend(["Cohesion.LCOM5", "Size.CountDeclMethodDefault", "Size.CountInstanceVariable"]);
    let ds = match full.select(&keep) {
        Ok(ds) => ds,
        Err(e) => return Outcome::Fail(format!("dataset lacks the analysed metrics: {e}")),
    };
    let config = EfaConfig::default();
    let mut notes = Vec::new();
    let mut ok = true;
    let r = correlation_matrix(&ds, MissingPolicy::Listwise).unwrap();
    match efa::adequacy(&r, r.n_used) {
        Ok(rep) => {
            ok &= (rep.kmo_overall - 0.71).abs() <= 0.02;
            notes.push(format!("KMO {:.3}", rep.kmo_overall));
        }
        Err(e) => return Outcome::Fail(format!("adequacy: {e}")),
    }
    for (k, target) in [(7, 0.84), (6, 0.78)] {
        match run_efa(&ds, k, &config) {
            Ok(sol) => {
                ok &= (sol.variance_explained - target).abs() <= 0.02;
                notes.push(format!("k={k} variance {:.3}", sol.variance_explained));
            }
            Err(e) => return Outcome::Fail(format!("k={k}: {e}")),
        }
    }
    let expected = expected_from_names(&ds.columns);
    let mut session = match RefinementSession::new(Arc::new(ds), expected, 6, config) {
        Ok(s) => s,
        Err(e) => return Outcome::Fail(format!("session: {e}")),
    };
    for metric in ["Cohesion.LCOM5", "Size.CountDeclMethodDefault", "Size.CountInstanceVariable"] {
        if let Err(e) = session.apply(Action::Drop { metric: metric.into() }, "golden replay") {
            return Outcome::Fail(format!("drop {metric}: {e}"));
        }
    }
    let cur = session.current();
    let sol = &cur.solution;
    ok &= sol.n_metrics() == 18 && (sol.variance_explained - 0.87).abs() <= 0.02;
    notes.push(format!("final {} metrics, variance {:.3}", sol.n_metrics(), sol.variance_explained));
    let mut worst = 0.0f64;
    for (metric, loading, _heywood) in FINAL_EFA {
        let Some(j) = sol.labels.iter().position(|l| l.raw == metric) else {
            return Outcome::Fail(format!("{metric} missing from final solution"));
        };
        let construct = metric.split('.').next().unwrap();
        let f = sol.assignment[j];
        ok &= cur.factor_labels[f].as_deref() == Some(construct);
        worst = worst.max((sol.loading(j, f) - loading).abs());
    }
    // Heywood cells share the same ±0.05 band as every other cell.
    ok &= worst <= 0.05;
    notes.push(format!("max loading deviation {worst:.3}"));
    check(ok, notes.join(", "))
}

/// Six constructs × 3 metrics plus two planted defects modeled on the
/// refinement walkthrough: `Cohesion.Stray` belongs to Cohesion but only
/// loads 0.42 on InCoupling; `InCoupling.Bridge` loads 0.80 on its own
/// factor and 0.45 on OutCoupling, below every correct primary loading.
pub fn planted_defect_model() -> FactorModel {
    let k = CONSTRUCTS.len();
    let mut names = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let base = [0.9, 0.8, 0.7];
    for (f, c) in CONSTRUCTS.iter().enumerate() {
        for (m, l) in base.iter().enumerate() {
            let mut row = vec![0.0; k];
            row[f] = l + 0.02 * f as f64;
            rows.push(row);
            names.push(format!("{c}.M{}", m + 1));
        }
    }
    let mut stray = vec![0.0; k];
    stray[1] = 0.42;
    rows.push(stray);
    names.push("Cohesion.Stray".into());
    let mut bridge = vec![0.0; k];
    bridge[1] = 0.80;
    bridge[2] = 0.45;
    rows.push(bridge);
    names.push("InCoupling.Bridge".into());
    let p = rows.len();
    let loadings = DMatrix::from_fn(p, k, |j, f| rows[j][f]);
    let phi = DMatrix::from_fn(k, k, |a, b| if a == b { 1.0 } else { 0.15 });
    FactorModel::standardized(names, loadings, phi)
}

pub fn refinement_advisor_replay() -> Outcome {
    let model = planted_defect_model();
    let mut notes = Vec::new();
    let mut ok = true;
    for seed in 0..5u64 {
        let (ds, _) = model.sample(1000, 40 + seed).unwrap();
        let expected = expected_from_names(&ds.columns);
        let config = EfaConfig::default();
        let sol = match run_efa(&ds, CONSTRUCTS.len(), &config) {
            Ok(s) => s,
            Err(e) => return Outcome::Fail(format!("seed {seed}: {e}")),
        };
        let problems = match diagnose(&sol, &expected, &config.thresholds) {
            Ok(p) => p,
            Err(e) => return Outcome::Fail(format!("seed {seed}: {e}")),
        };
        let first = problems.first();
        let first_ok = first.is_some_and(|p| {
            p.metric == "Cohesion.Stray"
                && p.kind == ProblemKind::LowCommunality
                && p.flags.contains(&ProblemKind::WrongFactor)
                && !p.retain
        });
        let bridge = problems.iter().find(|p| p.metric == "InCoupling.Bridge");
        let bridge_ok = bridge.is_some_and(|p| p.kind == ProblemKind::CrossLoading && p.retain);
        ok &= first_ok && bridge_ok;
        if !(first_ok && bridge_ok) {
            notes.push(format!(
                "seed {seed}: first {:?}, bridge {:?}",
                first.map(|p| (&p.metric, p.kind, p.retain)),
                bridge.map(|p| (p.kind, p.retain))
            ));
        }
    }
    check(
        ok,
        if notes.is_empty() {
            "5 seeds: stray metric ranked first, dominated cross-loader retained".into()
        } else {
            notes.join("; ")
        },
    )
}

/// Random admissible parameters for a 3-factor, 7-metric structure.
fn random_point(r: &mut rand_chacha::ChaCha8Rng, factor_of: &[usize]) -> (DMatrix<f64>, DMatrix<f64>, Vec<f64>) {
    let p = factor_of.len();
    let k = 3;
    let lambda = DMatrix::from_fn(p, k, |j, f| if factor_of[j] == f { r.gen_range(0.3..1.5) } else { 0.0 });
    let mut phi = DMatrix::identity(k, k);
    loop {
        for a in 0..k {
            for b in 0..a {
                let v = r.gen_range(-0.6..0.6);
                phi[(a, b)] = v;
                phi[(b, a)] = v;
            }
        }
        if phi.clone().cholesky().is_some() {
            break;
        }
    }
    let theta = (0..p).map(|_| r.gen_range(0.1..1.0)).collect();
    (lambda, phi, theta)
}

fn gradient_check() -> Result<f64, String> {
    let factor_of = [0usize, 0, 0, 1, 1, 2, 2];
    let p = factor_of.len();
    let mut r = rng(77);
    let mut worst = 0.0f64;
    for point in 0..20 {
        // S from a different random model so the discrepancy is not zero.
        let (l0, p0, t0) = random_point(&mut r, &factor_of);
        let mut s = &l0 * &p0 * l0.transpose();
        for j in 0..p {
            s[(j, j)] += t0[j] + 0.2;
        }
        let (lambda, phi, theta) = random_point(&mut r, &factor_of);
        let g = cfa::discrepancy_gradient(&s, &lambda, &phi, &theta).ok_or("gradient undefined")?;
        let f = |l: &DMatrix<f64>, ph: &DMatrix<f64>, t: &[f64]| cfa::discrepancy(&s, l, ph, t).unwrap();
        let h = 1e-6;
        let mut compare = |analytic: f64, numeric: f64| {
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-3);
            worst = worst.max(rel);
        };
        for j in 0..p {
            let c = factor_of[j];
            let (mut up, mut dn) = (lambda.clone(), lambda.clone());
            up[(j, c)] += h;
            dn[(j, c)] -= h;
            compare(g.loadings[(j, c)], (f(&up, &phi, &theta) - f(&dn, &phi, &theta)) / (2.0 * h));
            let (mut tu, mut td) = (theta.clone(), theta.clone());
            tu[j] += h;
            td[j] -= h;
            compare(g.uniquenesses[j], (f(&lambda, &phi, &tu) - f(&lambda, &phi, &td)) / (2.0 * h));
        }
        for a in 0..3 {
            for b in 0..a {
                let (mut up, mut dn) = (phi.clone(), phi.clone());
                up[(a, b)] += h;
                up[(b, a)] += h;
                dn[(a, b)] -= h;
                dn[(b, a)] -= h;
                compare(g.factor_correlations[(a, b)], (f(&lambda, &up, &theta) - f(&lambda, &dn, &theta)) / (2.0 * h));
            }
        }
        let _ = point;
    }
    Ok(worst)
}

pub fn two_factor_generator() -> (FactorModel, ConfirmatorySpec) {
    let loadings = DMatrix::from_row_slice(
        8,
        2,
        &[0.9, 0.0, 0.8, 0.0, 0.7, 0.0, 0.6, 0.0, 0.0, 0.85, 0.0, 0.75, 0.0, 0.65, 0.0, 0.6],
    );
    let phi = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 1.0]);
    let names: Vec<String> = (0..8).map(|j| format!("{}.m{}", if j < 4 { "A" } else { "B" }, j % 4 + 1)).collect();
    let spec = ConfirmatorySpec::new(vec![
        FactorSpec { name: "A".into(), metrics: names[..4].to_vec() },
        FactorSpec { name: "B".into(), metrics: names[4..].to_vec() },
    ]);
    (FactorModel::standardized(names, loadings, phi), spec)
}

pub fn cfa_gradient_and_recovery() -> Outcome {
    let worst_rel = match gradient_check() {
        Ok(w) => w,
        Err(e) => return Outcome::Fail(e),
    };

    // Exactly model-implied covariance on a raw scale.
    let lambda = DMatrix::from_row_slice(6, 2, &[2.0, 0.0, 1.5, 0.0, 1.1, 0.0, 0.0, 0.9, 0.0, 0.7, 0.0, 1.3]);
    let phi = DMatrix::from_row_slice(2, 2, &[1.0, -0.25, -0.25, 1.0]);
    let theta = [0.8, 0.5, 0.6, 0.3, 0.2, 0.9];
    let mut s = &lambda * &phi * lambda.transpose();
    for j in 0..6 {
        s[(j, j)] += theta[j];
    }
    let spec = ConfirmatorySpec::new(vec![
        FactorSpec { name: "F1".into(), metrics: vec!["a".into(), "b".into(), "c".into()] },
        FactorSpec { name: "F2".into(), metrics: vec!["d".into(), "e".into(), "f".into()] },
    ]);
    let exact = match cfa::fit_covariance(&spec, &s, vec![0.0; 6], 300, &FitOptions::default()) {
        Ok(m) => m,
        Err(e) => return Outcome::Fail(format!("exact fit: {e}")),
    };
    let param_err = (exact.loadings.clone() - &lambda)
        .amax()
        .max((exact.factor_correlations[(0, 1)] - phi[(0, 1)]).abs())
        .max(exact.uniquenesses.iter().zip(theta).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));

    let (model, spec) = two_factor_generator();
    let (ds, _) = model.sample(2000, 2024).unwrap();
    let fitted = match cfa::fit(&ds, &spec, &FitOptions::default()) {
        Ok(m) => m,
        Err(e) => return Outcome::Fail(format!("synthetic fit: {e}")),
    };
    let recovery = (fitted.standardized_loadings.clone() - &model.loadings).amax();
    check(
        worst_rel <= 1e-5 && exact.discrepancy < 1e-8 && param_err < 1e-4 && recovery <= 0.05,
        format!(
            "gradient max rel err {worst_rel:.2e}; exact fit F={:.1e}, param err {param_err:.1e}; n=2000 loading err {recovery:.3}",
            exact.discrepancy
        ),
    )
}

pub fn truescore_simulation() -> Outcome {
    let n = 100_000;
    let shifted = truescore::simulate_observations(&ErrorModel::new(120.0, 5.0, -10.0, 6), n).unwrap();
    let shift = shifted.iter().sum::<f64>() / n as f64 - 120.0;
    let mut ok = (shift + 10.0).abs() <= 0.1;
    let mut notes = vec![format!("mean shift {shift:.4}")];
    for (effect, sd, published) in [(0.4, 0.05, 7.7e-9), (0.1, 0.2, 0.362)] {
        let rep = truescore::detectability(effect, sd).unwrap();
        let oracle = normal_cdf(-effect / (sd * std::f64::consts::SQRT_2));
        let rounding_ok = (rep.misorder_probability - published).abs() <= 0.05 * published;
        let low = ErrorModel::new(10.0, sd, 0.0, 11);
        let high = ErrorModel::new(10.0 + effect, sd, 0.0, 12);
        let empirical = truescore::empirical_misorder(&low, &high, n).unwrap();
        let se = (oracle * (1.0 - oracle) / n as f64).sqrt();
        let mc_ok = (empirical - oracle).abs() <= 3.0 * se.max(1.0 / n as f64);
        let analytic_ok = (rep.misorder_probability - oracle).abs() <= 1e-12_f64.max(oracle * 1e-9);
        ok &= rounding_ok && mc_ok && analytic_ok;
        notes.push(format!(
            "effect {effect}/sd {sd}: analytic {:.4e}, oracle {oracle:.4e}, Monte-Carlo {empirical:.4e}",
            rep.misorder_probability
        ));
    }
    check(ok, notes.join("; "))
}

/// A scripted log mixing every action type, replayed from the saved
/// document.
pub fn session_replay_determinism() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    for seed in 0..3u64 {
        let (ds, _) = planted_defect_model().sample(800, 90 + seed).unwrap();
        let expected = expected_from_names(&ds.columns);
        let mut s = match RefinementSession::new(Arc::new(ds), expected, 6, EfaConfig { seed, ..EfaConfig::default() }) {
            Ok(s) => s,
            Err(e) => return Outcome::Fail(format!("seed {seed}: {e}")),
        };
        // Rejected actions leave no trace in the log, so they are tolerated
        // here; only what was recorded has to replay.
        let _ = s.apply(Action::SetK { k: 7 }, "scree bend");
        let _ = s.apply(Action::SetK { k: 6 }, "theory says six");
        let _ = s.apply(Action::SetThreshold { name: "suppress".into(), value: 0.35 }, "");
        let _ = s.apply(Action::Drop { metric: "Cohesion.Stray".into() }, "try");
        let _ = s.undo();
        let _ = s.apply(Action::Drop { metric: "Cohesion.Stray".into() }, "try again");
        if let Err(e) = s.auto_refine(3) {
            return Outcome::Fail(format!("seed {seed}: auto refine: {e}"));
        }
        if s.history().len() < 3 {
            return Outcome::Fail(format!("seed {seed}: only {} steps recorded", s.history().len()));
        }
        let json = serde_json::to_string(&s.to_document()).unwrap();
        let doc = serde_json::from_str(&json).unwrap();
        match RefinementSession::from_document(&doc) {
            Ok(replayed) => {
                let same = replayed.digests() == s.digests();
                ok &= same;
                notes.push(format!("seed {seed}: {} steps {}", s.history().len(), if same { "match" } else { "DIFFER" }));
            }
            Err(e) => {
                ok = false;
                notes.push(format!("seed {seed}: replay failed: {e}"));
            }
        }
    }
    check(ok, notes.join("; "))
}

/// Every criterion with its display name, in order.
pub fn all() -> Vec<(&'static str, fn() -> Outcome)> {
    vec![
        ("reliability oracle equivalence", reliability_oracle_equivalence as fn() -> Outcome),
        ("Maven LOC alpha golden", maven_alpha_golden),
        ("adequacy oracles", adequacy_oracles),
        ("synthetic factor recovery", factor_recovery),
        ("Maven EFA golden", maven_efa_golden),
        ("refinement advisor replay", refinement_advisor_replay),
        ("CFA gradient and recovery", cfa_gradient_and_recovery),
        ("true-score simulation", truescore_simulation),
        ("session replay determinism", session_replay_determinism),
    ]
}
