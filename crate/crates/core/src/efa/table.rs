//! Plain-text loadings table: two decimals, suppressed cells blank, h2 last.

use std::fmt::Write;

use super::FactorSolution;

pub fn render_loadings(solution: &FactorSolution, factor_names: Option<&[Option<String>]>) -> String {
    let k = solution.n_factors();
    let headers: Vec<String> = (0..k)
        .map(|f| {
            factor_names
                .and_then(|names| names.get(f).cloned().flatten())
                .unwrap_or_else(|| format!("F{}", f + 1))
        })
        .collect();
    let name_width = solution.labels.iter().map(|l| l.raw.len()).max().unwrap_or(0).max(6);
    let widths: Vec<usize> = headers.iter().map(|h| h.len().max(5)).collect();

    let mut out = String::new();
    let _ = write!(out, "{:name_width$}", "");
    for (h, w) in headers.iter().zip(&widths) {
        let _ = write!(out, "  {h:>w$}");
    }
    let _ = writeln!(out, "  {:>5}", "h2");
    for (j, label) in solution.labels.iter().enumerate() {
        let _ = write!(out, "{:name_width$}", label.raw);
        for (f, w) in widths.iter().enumerate() {
            if solution.is_suppressed(j, f) {
                let _ = write!(out, "  {:>w$}", "");
            } else {
                let _ = write!(out, "  {:>w$.2}", solution.loading(j, f));
            }
        }
        let _ = writeln!(out, "  {:>5.2}", solution.communalities[j]);
    }
    let _ = writeln!(out, "variance explained: {:.2}", solution.variance_explained);
    out
}
