//! Plain-text tables for terminal output. Every function here is a pure
//! function of its argument so the output can be golden-tested.

use std::fmt::Write;

use metrology::cfa::MeasurementModel;
use metrology::efa::{render_loadings, AdequacyReport, ExpectedMap, FactorCountAdvice, ScaleAudit};
use metrology::reliability::ReliabilityReport;
use metrology::session::{Action, SessionState};
use metrology::truescore::HistogramBin;
use metrology_service::api::{ScoresResult, SessionView, SimulateResult};
use serde::Serialize;

/// The serde name of a unit enum variant, e.g. `cronbach_alpha`.
fn tag<T: Serialize>(value: &T) -> String {
    match serde_json::to_value(value) {
        Ok(serde_json::Value::String(s)) => s,
        Ok(other) => other.to_string(),
        Err(_) => String::from("?"),
    }
}

fn warnings(out: &mut String, list: &[String]) {
    for w in list {
        let _ = writeln!(out, "warning: {w}");
    }
}

pub fn reliability(r: &ReliabilityReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<14}{}", "coefficient", tag(&r.coefficient));
    let _ = writeln!(out, "{:<14}{:.4}", "value", r.value);
    let _ = writeln!(out, "{:<14}{}", "band", r.band.label());
    let _ = writeln!(out, "{:<14}{}", "n", r.n);
    let _ = writeln!(out, "{:<14}{}", "items", r.items.len());
    if let Some(s) = r.standardized {
        let _ = writeln!(out, "{:<14}{s:.4}", "standardized");
    }
    if !r.details.is_empty() {
        let width = r.details.iter().map(|d| d.item.len()).max().unwrap_or(4).max(4);
        let _ = writeln!(out, "\n{:width$}  {:>14}  {:>14}", "item", "alpha if drop", "std if drop");
        for d in &r.details {
            let _ = writeln!(out, "{:width$}  {:>14.4}  {:>14.4}", d.item, d.alpha, d.standardized_alpha);
        }
    }
    out
}

pub fn adequacy(a: &AdequacyReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "KMO overall        {:.3} ({})", a.kmo_overall, a.kmo_label());
    let _ = writeln!(out, "Bartlett chi2      {:.2} on {} df, p = {:.3e}", a.bartlett_chi2, a.bartlett_df, a.bartlett_p);
    let _ = writeln!(out, "observations       {} ({:.1} per metric)", a.n, a.obs_per_variable);
    let _ = writeln!(out, "adequate           {}", if a.passes() { "yes" } else { "no" });
    let width = a.kmo_per_variable.iter().map(|v| v.metric.len()).max().unwrap_or(6).max(6);
    let _ = writeln!(out, "\n{:width$}  {:>5}", "metric", "MSA");
    for v in &a.kmo_per_variable {
        let _ = writeln!(out, "{:width$}  {:>5.2}", v.metric, v.msa);
    }
    if !a.multicollinear_pairs.is_empty() {
        let _ = writeln!(out, "\nnear-duplicate pairs:");
        for p in &a.multicollinear_pairs {
            let _ = writeln!(out, "  {} ~ {}  r = {:.3}", p.a, p.b, p.r);
        }
    }
    warnings(&mut out, &a.warnings);
    out
}

pub fn advice(a: &FactorCountAdvice) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:>3}  {:>10}  {:>10}", "#", "eigenvalue", "parallel");
    for (i, e) in a.eigenvalues.iter().enumerate() {
        let threshold = a.parallel_thresholds.get(i).map_or(String::new(), |t| format!("{t:.3}"));
        let _ = writeln!(out, "{:>3}  {:>10.3}  {:>10}", i + 1, e, threshold);
    }
    let _ = writeln!(out, "\nparallel analysis  {}", a.parallel_suggested);
    let _ = writeln!(out, "eigenvalue > 1     {}", a.kaiser_suggested);
    let elbows: Vec<String> = a.scree_elbow_candidates.iter().map(usize::to_string).collect();
    let _ = writeln!(out, "scree elbows       {}", if elbows.is_empty() { "-".into() } else { elbows.join(", ") });
    if let Some(t) = a.theory_suggested {
        let _ = writeln!(out, "theory             {t}");
    }
    out
}

pub fn session_state(s: &SessionState) -> String {
    let mut out = render_loadings(&s.solution, Some(&s.factor_labels));
    if !s.dropped.is_empty() {
        let _ = writeln!(out, "dropped: {}", s.dropped.join(", "));
    }
    if s.problems.is_empty() {
        let _ = writeln!(out, "no problems flagged");
    } else {
        let _ = writeln!(out, "\nproblems (most severe first):");
        for p in &s.problems {
            let kinds: Vec<String> = p.flags.iter().map(tag).collect();
            let retain = if p.retain { " [retain]" } else { "" };
            let _ = writeln!(out, "  {:<24} {:<32} {:.2}{retain}  {}", p.metric, kinds.join("+"), p.severity, p.note);
        }
    }
    let verdict = if s.stop.clean { "clean" } else { "not clean" };
    let _ = writeln!(out, "solution is {verdict} ({} open problems)", s.stop.open_problems);
    warnings(&mut out, &s.solution.warnings);
    warnings(&mut out, &s.stop.warnings);
    out
}

fn describe(action: &Action) -> String {
    match action {
        Action::Drop { metric } => format!("drop {metric}"),
        Action::SetK { k } => format!("set k = {k}"),
        Action::SetThreshold { name, value } => format!("set {name} = {value}"),
    }
}

pub fn refinement(view: &SessionView) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "session {}", view.id);
    if view.history.is_empty() {
        let _ = writeln!(out, "no steps taken");
    }
    for (i, step) in view.history.iter().enumerate() {
        let who = if step.automatic { "auto" } else { "manual" };
        let _ = writeln!(
            out,
            "step {:>2} [{who}] {}: {} open problems, variance {:.2}",
            i + 1,
            describe(&step.action),
            step.problems_after.len(),
            step.stop.variance_explained
        );
        if !step.rationale.is_empty() {
            let _ = writeln!(out, "         {}", step.rationale);
        }
    }
    if let Some(auto) = &view.auto_refine {
        let _ = writeln!(out, "auto-refine stopped after {} steps: {}", auto.steps, auto.stopped_because);
    }
    let _ = writeln!(out);
    out.push_str(&session_state(&view.current));
    out
}

pub fn model(m: &MeasurementModel) -> String {
    let mut out = String::new();
    let width = m.metrics.iter().map(String::len).max().unwrap_or(6).max(6);
    let _ = write!(out, "{:width$}", "metric");
    for f in &m.factors {
        let w = f.len().max(6);
        let _ = write!(out, "  {f:>w$}");
    }
    let _ = writeln!(out, "  {:>6}", "theta");
    for (j, metric) in m.metrics.iter().enumerate() {
        let _ = write!(out, "{metric:width$}");
        for (f, name) in m.factors.iter().enumerate() {
            let w = name.len().max(6);
            let v = m.standardized_loadings[(j, f)];
            if v == 0.0 {
                let _ = write!(out, "  {:>w$}", "");
            } else {
                let _ = write!(out, "  {v:>w$.2}");
            }
        }
        let heywood = if m.heywood_flags.get(j).copied().unwrap_or(false) { "  Heywood" } else { "" };
        let _ = writeln!(out, "  {:>6.2}{heywood}", m.uniquenesses[j]);
    }
    if m.factors.len() > 1 {
        let _ = writeln!(out, "\nfactor correlations:");
        for (a, fa) in m.factors.iter().enumerate() {
            for (b, fb) in m.factors.iter().enumerate().skip(a + 1) {
                let _ = writeln!(out, "  {fa} ~ {fb}  {:.3}", m.factor_correlations[(a, b)]);
            }
        }
    }
    let _ = writeln!(
        out,
        "\nF_ML {:.6}  n {}  iterations {}  {}",
        m.discrepancy,
        m.n_used,
        m.iterations,
        if m.converged { "converged" } else { "NOT converged" }
    );
    warnings(&mut out, &m.warnings);
    out
}

pub fn scores_csv(id_header: &str, s: &ScoresResult) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{id_header},{}", s.factors.join(","));
    for (id, row) in s.entity_ids.iter().zip(&s.scores) {
        let cells: Vec<String> = match row {
            Some(values) => values.iter().map(f64::to_string).collect(),
            None => vec![String::new(); s.factors.len()],
        };
        let _ = writeln!(out, "{id},{}", cells.join(","));
    }
    out
}

pub fn histogram_csv(bins: &[HistogramBin]) -> String {
    let mut out = String::from("value,count\n");
    for b in bins {
        let _ = writeln!(out, "{},{}", b.value, b.count);
    }
    out
}

pub fn simulation(r: &SimulateResult) -> String {
    let s = &r.summary;
    let mut out = String::new();
    let _ = writeln!(out, "n {}  mean {:.4}  sd {:.4}  min {:.4}  max {:.4}", s.n, s.mean, s.sd, s.min, s.max);
    let peak = r.histogram.iter().map(|b| b.count).max().unwrap_or(1).max(1);
    let _ = writeln!(out, "\n{:>12}  {:>8}", "value", "count");
    for b in &r.histogram {
        let bar = "#".repeat(((b.count as f64 / peak as f64) * 40.0).round() as usize);
        let _ = writeln!(out, "{:>12.4}  {:>8}  {bar}", b.value, b.count);
    }
    out
}

pub fn audit(a: &ScaleAudit, assignment: &ExpectedMap) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "scales             {}", assignment.values().collect::<std::collections::BTreeSet<_>>().len());
    let _ = writeln!(out, "min within-scale r {:.3}", a.min_intra);
    let _ = writeln!(out, "max cross-scale r  {:.3}", a.max_inter);
    let _ = writeln!(out, "verdict            {}", if a.pass { "pass" } else { "fail" });
    for p in &a.offending_pairs {
        let _ = writeln!(out, "  {} ~ {}  r = {:.3}", p.a, p.b, p.r);
    }
    out
}
