//! Statistical checks of the martingale inequalities on simulated ensembles.
//!
//! Every check reduces sample vectors in slice order, so a report is a pure
//! function of its inputs. Inequalities are tested one-sided with a 3σ margin;
//! only the drift test is two-sided.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::functionals::k_alpha;
use crate::stats::{mean, stderr, wilson_interval, Z_99};

/// Margin, in standard errors, of every inequality check.
pub const SIGMA_MARGIN: f64 = 3.0;

/// Below this many successes (or failures) a proportion's standard error
/// comes from the Wilson interval instead of the normal approximation.
pub const WILSON_MIN_COUNT: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
}

/// One compared quantity of a check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckRow {
    pub label: String,
    #[serde(with = "crate::stats::float")]
    pub empirical: f64,
    #[serde(with = "crate::stats::float")]
    pub stderr: f64,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "crate::stats::float::option")]
    pub lower: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "crate::stats::float::option")]
    pub upper: Option<f64>,
    /// Test statistic when the row has one (z-score, KS distance).
    #[serde(default, skip_serializing_if = "Option::is_none", with = "crate::stats::float::option")]
    pub statistic: Option<f64>,
    pub verdict: Verdict,
}

impl CheckRow {
    pub fn new(label: impl Into<String>, empirical: f64, stderr: f64, verdict: Verdict) -> Self {
        Self {
            label: label.into(),
            empirical,
            stderr,
            lower: None,
            upper: None,
            statistic: None,
            verdict,
        }
    }

    pub fn bounds(mut self, lower: Option<f64>, upper: Option<f64>) -> Self {
        self.lower = lower;
        self.upper = upper;
        self
    }

    pub fn statistic(mut self, s: f64) -> Self {
        self.statistic = s.is_finite().then_some(s);
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub sample_size: usize,
    pub rows: Vec<CheckRow>,
    pub verdict: Verdict,
    /// Reported for information only; never affects the exit status.
    pub informational: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl CheckReport {
    /// Combines row verdicts: any failure fails, all-inconclusive is
    /// inconclusive, otherwise pass.
    pub fn new(name: impl Into<String>, sample_size: usize, rows: Vec<CheckRow>) -> Self {
        let verdict = if rows.iter().any(|r| r.verdict == Verdict::Fail) {
            Verdict::Fail
        } else if rows.iter().all(|r| r.verdict == Verdict::Inconclusive) {
            Verdict::Inconclusive
        } else {
            Verdict::Pass
        };
        Self {
            name: name.into(),
            sample_size,
            rows,
            verdict,
            informational: false,
            note: None,
        }
    }

    pub fn informational(mut self, yes: bool) -> Self {
        self.informational = yes;
        self
    }

    pub fn note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    /// True when this report should make a run fail.
    pub fn is_failure(&self) -> bool {
        !self.informational && self.verdict == Verdict::Fail
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports are plain data")
    }
}

fn nonempty(xs: &[f64], what: &str) -> Result<()> {
    if xs.is_empty() {
        Err(domain(format!("{what}: empty sample set")))
    } else {
        Ok(())
    }
}

/// Proportion of `samples` at or above `level` with a standard error, using
/// the Wilson interval when either count is small.
pub fn exceedance(samples: &[f64], level: f64) -> (f64, f64, usize) {
    let n = samples.len();
    let k = samples.iter().filter(|&&s| s >= level).count();
    let p = k as f64 / n as f64;
    let se = if k < WILSON_MIN_COUNT || n - k < WILSON_MIN_COUNT {
        let (lo, _) = wilson_interval(k, n, SIGMA_MARGIN);
        (p - lo) / SIGMA_MARGIN
    } else {
        (p * (1.0 - p) / n as f64).sqrt()
    };
    (p, se, k)
}

/// `P(sup u ≥ n) ≤ 1 ∧ x/n` at each level.
pub fn check_hitting_bound(sup_samples: &[f64], x: f64, levels: &[f64]) -> Result<CheckReport> {
    nonempty(sup_samples, "hitting bound")?;
    if !(x > 0.0) || levels.iter().any(|&n| !(n > 0.0)) {
        return Err(domain("hitting bound needs a positive start and positive levels"));
    }
    let rows = levels
        .iter()
        .map(|&n| {
            let bound = (x / n).min(1.0);
            let (p, se, _) = exceedance(sup_samples, n);
            CheckRow::new(
                format!("P(sup >= {n})"),
                p,
                se,
                Verdict::from_bool(p <= bound + SIGMA_MARGIN * se),
            )
            .bounds(None, Some(bound))
        })
        .collect();
    Ok(CheckReport::new("hitting-bound", sup_samples.len(), rows))
}

fn sup_moment_row(values: &[f64], lower: f64, upper: f64, label: String) -> CheckRow {
    let m = mean(values);
    let se = stderr(values);
    let (ci_lo, ci_hi) = (m - Z_99 * se, m + Z_99 * se);
    let intersects = ci_hi >= lower && ci_lo <= upper;
    let upper_ok = ci_hi <= upper + SIGMA_MARGIN * se;
    let lower_ok = ci_lo >= lower - SIGMA_MARGIN * se;
    CheckRow::new(label, m, se, Verdict::from_bool(intersects && upper_ok && lower_ok))
        .bounds(Some(lower), Some(upper))
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

/// `x^α ≤ E[sup u^α] ≤ x^α/(1−α)`: the 99% interval of the ensemble mean
/// must meet the bracket, and neither edge may overshoot it by more than 3σ.
pub fn check_sup_moment(sup_samples: &[f64], x: f64, alpha: f64) -> Result<CheckReport> {
    nonempty(sup_samples, "sup moment")?;
    check_alpha(alpha)?;
    let values: Vec<f64> = sup_samples.iter().map(|s| s.powf(alpha)).collect();
    let lower = x.powf(alpha);
    let upper = lower / (1.0 - alpha);
    let row = sup_moment_row(&values, lower, upper, format!("E[sup^{alpha}]"));
    Ok(CheckReport::new("sup-moment", sup_samples.len(), vec![row]))
}

/// The same sandwich with a random start: `E[x^α] ≤ E[sup^α] ≤ E[x^α]/(1−α)`.
pub fn check_sup_moment_random_start(sup_samples: &[f64], initial: &[f64], alpha: f64) -> Result<CheckReport> {
    nonempty(sup_samples, "sup moment")?;
    check_alpha(alpha)?;
    if initial.len() != sup_samples.len() {
        return Err(domain("sup and initial samples must be paired"));
    }
    let values: Vec<f64> = sup_samples.iter().map(|s| s.powf(alpha)).collect();
    let starts: Vec<f64> = initial.iter().map(|x| x.powf(alpha)).collect();
    let lower = mean(&starts);
    let upper = lower / (1.0 - alpha);
    let row = sup_moment_row(&values, lower, upper, format!("E[sup^{alpha}]"));
    Ok(CheckReport::new("sup-moment-random-start", sup_samples.len(), vec![row]))
}

/// `E[⟨M⟩^{α/2}] / E[M(0)^α]` against `K(α)`.
///
/// With a guessed `c(α)` the report is informational; the `c`-free factor
/// `(2−α)/(1−α)` is reported as the row's lower field for reference.
pub fn check_qv_moment(
    qv_samples: &[f64],
    initial_samples: &[f64],
    alpha: f64,
    c_alpha: f64,
    c_is_guess: bool,
) -> Result<CheckReport> {
    nonempty(qv_samples, "qv moment")?;
    nonempty(initial_samples, "qv moment")?;
    let k = k_alpha(alpha, c_alpha)?;
    let values: Vec<f64> = qv_samples.iter().map(|q| q.powf(alpha / 2.0)).collect();
    let denom = mean(&initial_samples.iter().map(|x| x.powf(alpha)).collect::<Vec<_>>());
    if !(denom > 0.0) {
        return Err(domain("qv moment needs a positive initial moment"));
    }
    let ratio = mean(&values) / denom;
    let se = stderr(&values) / denom;
    let row = CheckRow::new(
        format!("E[QV^{}]/E[x^{alpha}]", alpha / 2.0),
        ratio,
        se,
        Verdict::from_bool(ratio <= k + SIGMA_MARGIN * se),
    )
    .bounds(Some((2.0 - alpha) / (1.0 - alpha)), Some(k));
    let mut report = CheckReport::new("qv-moment", qv_samples.len(), vec![row]).informational(c_is_guess);
    if c_is_guess {
        report = report.note(format!("c(alpha) = {c_alpha} is a configured guess"));
    }
    Ok(report)
}

/// Two-sided z-test that `E[terminal − initial] = 0`.
pub fn drift_test(terminal: &[f64], initial: &[f64]) -> Result<CheckReport> {
    if terminal.len() != initial.len() {
        return Err(domain(format!(
            "drift test needs matched samples, got {} and {}",
            terminal.len(),
            initial.len()
        )));
    }
    nonempty(terminal, "drift test")?;
    let diffs: Vec<f64> = terminal.iter().zip(initial).map(|(t, i)| t - i).collect();
    let m = mean(&diffs);
    let se = stderr(&diffs);
    let z = if se > 0.0 {
        m / se
    } else if m == 0.0 {
        0.0
    } else {
        m.signum() * f64::INFINITY
    };
    let row = CheckRow::new("mean(terminal - initial)", m, se, Verdict::from_bool(z.abs() <= SIGMA_MARGIN))
        .statistic(z);
    Ok(CheckReport::new("drift", terminal.len(), vec![row]))
}

/// Relative change `|variant − base| / |base|` of an ensemble estimate under a
/// change of numerical parameters, against `tolerance`.
pub fn stability_check(
    name: impl Into<String>,
    sample_size: usize,
    base: (f64, f64),
    variants: &[(&str, f64, f64)],
    tolerance: f64,
) -> CheckReport {
    let (b, b_se) = base;
    let mut rows = vec![CheckRow::new("base", b, b_se, Verdict::Inconclusive)];
    for &(label, v, v_se) in variants {
        let rel = (v - b).abs() / b.abs();
        let ok = b.is_finite() && v.is_finite() && b != 0.0 && rel <= tolerance;
        rows.push(
            CheckRow::new(label, v, v_se, Verdict::from_bool(ok))
                .bounds(Some(b * (1.0 - tolerance)), Some(b * (1.0 + tolerance)))
                .statistic(rel),
        );
    }
    CheckReport::new(name, sample_size, rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hitting_bound_cases() {
        let sups = vec![1.0; 100];
        let r = check_hitting_bound(&sups, 1.0, &[1.0, 2.0]).unwrap();
        assert_eq!(r.rows[0].upper, Some(1.0));
        assert_eq!(r.rows[1].upper, Some(0.5));
        assert_eq!(r.rows[1].empirical, 0.0);
        assert_eq!(r.verdict, Verdict::Pass);
        assert!(check_hitting_bound(&[], 1.0, &[2.0]).is_err());
        let all_high = vec![5.0; 100];
        assert_eq!(check_hitting_bound(&all_high, 1.0, &[2.0]).unwrap().verdict, Verdict::Fail);
    }

    #[test]
    fn sup_moment_brackets() {
        let r = check_sup_moment(&[1.0; 50], 1.0, 0.5).unwrap();
        assert_eq!((r.rows[0].lower, r.rows[0].upper), (Some(1.0), Some(2.0)));
        assert_eq!(r.verdict, Verdict::Pass);
        let r = check_sup_moment(&[4.0; 50], 4.0, 0.5).unwrap();
        assert_eq!((r.rows[0].lower, r.rows[0].upper), (Some(2.0), Some(4.0)));
        assert!(check_sup_moment(&[1.0], 1.0, 1.0).is_err());
        assert_eq!(check_sup_moment(&[0.25; 20], 1.0, 0.5).unwrap().verdict, Verdict::Fail);
    }

    #[test]
    fn qv_moment_zero_noise() {
        let r = check_qv_moment(&[0.0; 10], &[1.0; 10], 0.5, 1.0, true).unwrap();
        assert_eq!(r.rows[0].empirical, 0.0);
        assert_eq!(r.rows[0].upper, Some(3.0));
        assert_eq!(r.verdict, Verdict::Pass);
        assert!(r.informational);
        assert!(!r.is_failure());
    }

    #[test]
    fn drift_cases() {
        let x = [1.0, 2.0, 3.0];
        let r = drift_test(&x, &x).unwrap();
        assert_eq!(r.rows[0].statistic, Some(0.0));
        assert_eq!(r.verdict, Verdict::Pass);
        let shifted: Vec<f64> = x.iter().enumerate().map(|(i, v)| v + 1.0 + 1e-6 * i as f64).collect();
        assert_eq!(drift_test(&shifted, &x).unwrap().verdict, Verdict::Fail);
        assert!(drift_test(&x, &x[..2]).is_err());
    }

    #[test]
    fn report_json_round_trip() {
        let r = drift_test(&[1.0, 1.5], &[1.0, 1.0]).unwrap();
        let back: CheckReport = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
    }
}
