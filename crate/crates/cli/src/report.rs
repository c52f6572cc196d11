//! Plain-text report of a summary.

use std::fmt::Write;

use spde_lab::martingale_checks::{CheckReport, Verdict};
use spde_lab::EnsembleSummary;

fn verdict(r: &CheckReport) -> &'static str {
    match (r.verdict, r.informational) {
        (Verdict::Pass, false) => "PASS",
        (Verdict::Fail, false) => "FAIL",
        (Verdict::Inconclusive, false) => "INCONCLUSIVE",
        (Verdict::Pass, true) => "pass (informational)",
        (Verdict::Fail, true) => "fail (informational)",
        (Verdict::Inconclusive, true) => "inconclusive (informational)",
    }
}

fn bound(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |b| format!("{b:.6}"))
}

pub fn render(s: &EnsembleSummary) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "experiment {} seed {} paths {}", s.kind, s.seed, s.paths);
    let _ = writeln!(out, "config {}", s.config_hash);
    if s.explosions > 0 || s.absorbed > 0 {
        let _ = writeln!(out, "exploded {} absorbed {}", s.explosions, s.absorbed);
    }
    for c in &s.checks {
        let _ = writeln!(out, "[{}] {} (n = {})", verdict(c), c.name, c.sample_size);
        for r in &c.rows {
            let _ = write!(
                out,
                "    {:<36} {:>14.6} ± {:<12.4e} bounds [{}, {}]",
                r.label,
                r.empirical,
                r.stderr,
                bound(r.lower),
                bound(r.upper)
            );
            if let Some(t) = r.statistic {
                let _ = write!(out, " stat {t:.4}");
            }
            let _ = writeln!(out, " {:?}", r.verdict);
        }
        if let Some(note) = &c.note {
            let _ = writeln!(out, "    note: {note}");
        }
    }
    for t in s.tables.iter().filter(|t| t.rows.len() <= 20) {
        let _ = writeln!(out, "table {}", t.name);
        let _ = writeln!(out, "    {}", t.columns.join("\t"));
        for row in &t.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{:.6}", v.0)).collect();
            let _ = writeln!(out, "    {}", cells.join("\t"));
        }
    }
    let _ = writeln!(out, "{}", if s.passed { "result: pass" } else { "result: fail" });
    out
}
