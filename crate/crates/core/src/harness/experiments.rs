//! One runner per experiment kind. Each maps paths on the pool, then reduces
//! the per-path results in index order into statistics, checks and tables.

use std::collections::BTreeMap;

use num_complex::Complex;

use super::{ExperimentConfig, ExperimentKind, Pool, SeriesRow, Table, KS_LEVEL, QV_AGREEMENT_TOLERANCE};
use crate::error::{domain, Result};
use crate::fourier::{drift_residual, qv_relation_report, CoefficientRecorder, CovariationAccumulator, EigenConvention};
use crate::functionals::dpalpha_from_integrals;
use crate::martingale_checks::{
    check_hitting_bound, check_qv_moment, check_sup_moment, drift_test, exceedance, stability_check, CheckReport,
    CheckRow, Verdict, SIGMA_MARGIN,
};
use crate::noise::derive_stream;
use crate::sode::{
    asymptotic_cdf, asymptotic_pdf, bessel_dimension, expected_value, rescaled_statistic, simulate_euler_batch,
    simulate_exact_bessel, DensityVariant, SodePath,
};
use crate::spde::{simulate_coupled_pair_with, simulate_truncated, simulate_with, SpdeConfig, Trajectory};
use crate::stats::{density_histogram, ks_critical_one_sample, ks_one_sample, mean, quantile_sorted, sorted_copy, stderr, FunctionalStats};
use crate::PathStatus;

/// Paths advanced together by the batched Euler sampler.
const EULER_LANES: usize = 4;

#[derive(Default)]
pub(crate) struct SeriesBuilder {
    pub names: Vec<String>,
    pub rows: Vec<SeriesRow>,
}

impl SeriesBuilder {
    fn id(&mut self, name: &str) -> usize {
        match self.names.iter().position(|n| n == name) {
            Some(i) => i,
            None => {
                self.names.push(name.to_string());
                self.names.len() - 1
            }
        }
    }

    fn push(&mut self, path_index: usize, name: &str, times: &[f64], values: &[f64]) {
        let functional = self.id(name);
        self.rows.extend(times.iter().zip(values).map(|(&time, &value)| SeriesRow {
            path_index,
            functional,
            time,
            value,
        }));
    }
}

#[derive(Default)]
pub(crate) struct Outcome {
    pub statistics: BTreeMap<String, FunctionalStats>,
    pub checks: Vec<CheckReport>,
    pub tables: Vec<Table>,
    pub explosions: usize,
    pub absorbed: usize,
    pub series: SeriesBuilder,
}

impl Outcome {
    /// Statistics of the finite samples; skipped when there are none.
    fn stat(&mut self, name: impl Into<String>, samples: &[f64]) {
        let finite: Vec<f64> = samples.iter().copied().filter(|v| v.is_finite()).collect();
        if !finite.is_empty() {
            self.statistics.insert(name.into(), FunctionalStats::from_samples(&finite));
        }
    }

    fn count_status<'a>(&mut self, statuses: impl IntoIterator<Item = &'a PathStatus>) {
        for s in statuses {
            match s {
                PathStatus::Exploded { .. } => self.explosions += 1,
                PathStatus::Absorbed { .. } => self.absorbed += 1,
                PathStatus::Completed => {}
            }
        }
    }
}

pub(crate) fn run(c: &ExperimentConfig, pool: &Pool) -> Result<Outcome> {
    match c.kind {
        ExperimentKind::SodeBounds => sode_bounds(c, pool),
        ExperimentKind::SodeAsymptotic => sode_asymptotic(c, pool),
        ExperimentKind::SpdeMartingale => spde_martingale(c, pool),
        ExperimentKind::SpdeConverge => spde_converge(c, pool),
        ExperimentKind::BlowupScan => blowup_scan(c, pool),
        ExperimentKind::FourierCheck => fourier_check(c, pool),
        ExperimentKind::LpNorms => lp_norms(c, pool),
    }
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    (mean(xs), stderr(xs))
}

fn powers(xs: &[f64], e: f64) -> Vec<f64> {
    xs.iter().map(|x| x.powf(e)).collect()
}

fn sode_bounds(c: &ExperimentConfig, pool: &Pool) -> Result<Outcome> {
    let cfg = c.sode_config()?;
    let chunks = c.paths.div_ceil(EULER_LANES);
    let batches = pool.map(chunks, |b| {
        let lo = b * EULER_LANES;
        let hi = (lo + EULER_LANES).min(c.paths);
        let streams: Vec<_> = (lo..hi).map(|i| derive_stream(c.seed, i as u64)).collect();
        simulate_euler_batch(&cfg, &streams)
    })?;
    let paths: Vec<SodePath<f64>> = batches.into_iter().flatten().collect();

    let mut out = Outcome::default();
    out.count_status(paths.iter().map(|p| &p.status));
    let sups: Vec<f64> = paths
        .iter()
        .map(|p| if p.status.exploded() { f64::INFINITY } else { p.running_max })
        .collect();
    let qvs: Vec<f64> = paths.iter().map(|p| p.quadratic_variation).collect();
    let terminal: Vec<f64> = paths.iter().map(|p| p.terminal).collect();
    out.stat("sup", &sups);
    out.stat("qv", &qvs);
    out.stat("terminal", &terminal);
    for (i, p) in paths.iter().enumerate() {
        out.series.push(i, "u", &p.times, &p.values);
    }

    out.checks.push(check_hitting_bound(&sups, c.u0, &c.levels)?);
    for &alpha in &c.alphas {
        let mut r = check_sup_moment(&sups, c.u0, alpha)?;
        r.name = format!("sup-moment(alpha={alpha})");
        out.checks.push(r);
    }
    let initial = vec![c.u0; paths.len()];
    for &alpha in &c.alphas {
        let mut r = check_qv_moment(&qvs, &initial, alpha, c.c_alpha, c.c_alpha_is_guess)?;
        r.name = format!("qv-moment(alpha={alpha})");
        out.checks.push(r);
    }

    // u is a strict local martingale: its mean decays from u0 to the exact
    // value of the Bessel representation.
    let reference = expected_value(c.gamma, c.u0, cfg.horizon)?;
    let (m, se) = mean_se(&terminal);
    let z = (m - reference) / se;
    let row = CheckRow::new("E[u(T)]", m, se, Verdict::from_bool(z.abs() <= SIGMA_MARGIN))
        .bounds(Some(reference), Some(reference))
        .statistic(z);
    out.checks.push(
        CheckReport::new("terminal-mean", paths.len(), vec![row])
            .informational(true)
            .note("reference is the exact E[u(T)] of the Bessel representation; Euler bias is not controlled"),
    );
    out.checks.push(
        drift_test(&terminal, &initial)?
            .informational(true)
            .note("u is a strict local martingale, so E[u(T)] < u0 is expected"),
    );
    Ok(out)
}

fn sode_asymptotic(c: &ExperimentConfig, pool: &Pool) -> Result<Outcome> {
    let cfg = c.sode_config()?;
    let horizon = cfg.horizon;
    let u_t = pool.map(c.paths, |i| match cfg.scheme {
        crate::sode::SodeScheme::ExactBessel => simulate_exact_bessel(&cfg, &derive_stream(c.seed, i as u64), horizon),
        crate::sode::SodeScheme::Euler => {
            crate::sode::simulate_euler(&cfg, &derive_stream(c.seed, i as u64)).map(|p| p.terminal)
        }
    })?;
    let mut out = Outcome::default();
    let y: Vec<f64> = u_t
        .iter()
        .filter_map(|&u| rescaled_statistic(u, c.gamma, horizon).ok())
        .collect();
    out.absorbed = u_t.len() - y.len();
    if y.is_empty() {
        return Err(domain("every path was absorbed; the rescaled statistic is undefined"));
    }
    out.stat("u_T", &u_t);
    out.stat("rescaled", &y);

    let n = y.len();
    let critical = ks_critical_one_sample(n, KS_LEVEL);
    let chi = ks_one_sample(&y, |v| asymptotic_cdf(c.gamma, v, DensityVariant::ChiSquare).ok().flatten().unwrap_or(0.0));
    let row = CheckRow::new("KS distance", chi, 0.0, Verdict::from_bool(chi < critical))
        .bounds(None, Some(critical))
        .statistic(chi);
    out.checks.push(CheckReport::new("ks(chi-square)", n, vec![row]));

    let literal = if asymptotic_cdf(c.gamma, 1.0, DensityVariant::PaperLiteral)?.is_some() {
        let d = ks_one_sample(&y, |v| {
            asymptotic_cdf(c.gamma, v, DensityVariant::PaperLiteral).ok().flatten().unwrap_or(0.0)
        });
        CheckReport::new(
            "ks(paper-literal)",
            n,
            vec![CheckRow::new("KS distance", d, 0.0, Verdict::from_bool(d < critical))
                .bounds(None, Some(critical))
                .statistic(d)],
        )
    } else {
        CheckReport::new(
            "ks(paper-literal)",
            n,
            vec![CheckRow::new("KS distance", 0.0, 0.0, Verdict::Inconclusive)],
        )
        .note("density is not integrable at 0 for this gamma")
    };
    out.checks.push(literal.informational(true));

    let dim = bessel_dimension(c.gamma)?;
    let hi = quantile_sorted(&sorted_copy(&y), 0.995).max(dim + 6.0 * (2.0 * dim).sqrt());
    let mut table = Table::new("histogram", &["y", "empirical", "chi-square", "paper-literal"]);
    for (mid, dens) in density_histogram(&y, 0.0, hi, c.histogram_bins) {
        table.push(&[
            mid,
            dens,
            asymptotic_pdf(c.gamma, mid, DensityVariant::ChiSquare)?,
            asymptotic_pdf(c.gamma, mid, DensityVariant::PaperLiteral)?,
        ]);
    }
    out.tables.push(table);
    Ok(out)
}

/// Per-path scalars of a truncated SPDE run.
struct MassPath {
    initial: f64,
    terminal: f64,
    realized_qv: f64,
    accumulated_qv: f64,
    running_sup: f64,
    clipped: f64,
    norm_integrals: Vec<f64>,
    status: PathStatus,
}

impl MassPath {
    fn from_traj(t: &Trajectory<f64>) -> Self {
        Self {
            initial: t.initial_mass,
            terminal: t.terminal_mass,
            realized_qv: t.realized_qv,
            accumulated_qv: t.accumulated_qv,
            running_sup: t.running_sup,
            clipped: t.clipped_mass,
            norm_integrals: t.norm_integrals.iter().map(|n| n.value).collect(),
            status: t.status,
        }
    }
}

/// Runs every path of `cfg`, keeping scalars and, if asked, trajectories.
fn run_spde(
    c: &ExperimentConfig,
    cfg: &SpdeConfig<f64>,
    pool: &Pool,
    keep: bool,
) -> Result<(Vec<MassPath>, Vec<Trajectory<f64>>)> {
    let runs = pool.map(c.paths, |i| {
        let t = simulate_truncated(cfg, &derive_stream(c.seed, i as u64))?;
        Ok((MassPath::from_traj(&t), keep.then_some(t)))
    })?;
    let mut scalars = Vec::with_capacity(runs.len());
    let mut trajs = Vec::new();
    for (s, t) in runs {
        scalars.push(s);
        trajs.extend(t);
    }
    Ok((scalars, trajs))
}

fn push_trajectory_series(out: &mut Outcome, i: usize, t: &Trajectory<f64>, prefix: &str) {
    for s in t.series() {
        out.series.push(i, &format!("{prefix}{}", s.name), &s.times, &s.values);
    }
    if !t.fields.is_empty() {
        for x in 0..t.spec.cells() {
            let values: Vec<f64> = t.fields.iter().map(|f| f[x]).collect();
            out.series.push(i, &format!("{prefix}u[{x}]"), &t.times, &values);
        }
    }
}

fn qv_moment_estimate(paths: &[MassPath], alpha: f64) -> (f64, f64) {
    mean_se(&powers(&paths.iter().map(|p| p.accumulated_qv).collect::<Vec<_>>(), alpha / 2.0))
}

fn spde_martingale(c: &ExperimentConfig, pool: &Pool) -> Result<Outcome> {
    let cfg = c.spde_config()?;
    let (paths, trajs) = run_spde(c, &cfg, pool, true)?;
    let mut out = Outcome::default();
    out.count_status(paths.iter().map(|p| &p.status));
    for (i, t) in trajs.iter().enumerate() {
        push_trajectory_series(&mut out, i, t, "");
    }
    drop(trajs);

    let initial: Vec<f64> = paths.iter().map(|p| p.initial).collect();
    let terminal: Vec<f64> = paths.iter().map(|p| p.terminal).collect();
    let realized: Vec<f64> = paths.iter().map(|p| p.realized_qv).collect();
    let accumulated: Vec<f64> = paths.iter().map(|p| p.accumulated_qv).collect();
    out.stat("terminal_mass", &terminal);
    out.stat("realized_qv", &realized);
    out.stat("accumulated_qv", &accumulated);
    out.stat("running_sup", &paths.iter().map(|p| p.running_sup).collect::<Vec<_>>());
    out.stat("clipped_mass", &paths.iter().map(|p| p.clipped).collect::<Vec<_>>());

    out.checks.push(drift_test(&terminal, &initial)?);

    let (mr, ser) = mean_se(&realized);
    let (ma, sea) = mean_se(&accumulated);
    let rel = (mr - ma).abs() / ma;
    out.checks.push(CheckReport::new(
        "qv-agreement",
        paths.len(),
        vec![
            CheckRow::new("mean accumulated QV", ma, sea, Verdict::Inconclusive),
            CheckRow::new(
                "mean realized QV",
                mr,
                ser,
                Verdict::from_bool(ma > 0.0 && rel <= QV_AGREEMENT_TOLERANCE),
            )
            .bounds(
                Some(ma * (1.0 - QV_AGREEMENT_TOLERANCE)),
                Some(ma * (1.0 + QV_AGREEMENT_TOLERANCE)),
            )
            .statistic(rel),
        ],
    ));

    for &alpha in &c.alphas {
        let mut r = check_qv_moment(&accumulated, &initial, alpha, c.c_alpha, c.c_alpha_is_guess)?;
        r.name = format!("qv-moment(alpha={alpha})");
        out.checks.push(r);
    }

    if c.stability {
        let mut longer = cfg.clone();
        longer.horizon = 2.0 * cfg.horizon;
        let mut deeper = cfg.clone();
        deeper.trunc = 2.0 * cfg.trunc;
        let (long_paths, _) = run_spde(c, &longer, pool, false)?;
        let (deep_paths, _) = run_spde(c, &deeper, pool, false)?;
        for &alpha in &c.alphas {
            let base = qv_moment_estimate(&paths, alpha);
            let l = qv_moment_estimate(&long_paths, alpha);
            let d = qv_moment_estimate(&deep_paths, alpha);
            out.checks.push(stability_check(
                format!("qv-moment-stability(alpha={alpha})"),
                paths.len(),
                base,
                &[
                    (format!("horizon {}", longer.horizon).as_str(), l.0, l.1),
                    (format!("trunc {}", deeper.trunc).as_str(), d.0, d.1),
                ],
                c.stability_tolerance,
            ));
        }
    }
    Ok(out)
}

fn spde_converge(c: &ExperimentConfig, pool: &Pool) -> Result<Outcome> {
    let alpha = c.alphas[0];
    let p = c.p.first().copied().unwrap_or(2.0 * c.gamma);
    let mut out = Outcome::default();
    let mut table = Table::new("distance-ladder", &["n1", "n2", "d", "stderr", "d_untruncated", "decoupled_fraction"]);
    let mut coupling_rows = Vec::new();
    let mut estimates = Vec::new();
    for &[n1, n2] in &c.pairs {
        let cfg = c.spde_config_at(c.gamma, n2)?;
        let pairs = pool.map(c.paths, |i| {
            let mut s = derive_stream(c.seed, i as u64);
            let pair = simulate_coupled_pair_with(&cfg, n1, n2, &mut s, p)?;
            Ok((
                pair.distance_integral,
                pair.decoupled_at.is_some(),
                pair.coupling_held,
                pair.raw_distance_integral,
            ))
        })?;
        let integrals: Vec<f64> = pairs.iter().map(|x| x.0).collect();
        let raw: Vec<f64> = pairs.iter().map(|x| x.3).collect();
        let raw_d = dpalpha_from_integrals(&raw, p, alpha)?;
        let decoupled = pairs.iter().filter(|x| x.1).count() as f64 / pairs.len() as f64;
        let held = pairs.iter().filter(|x| x.2).count();
        let d = dpalpha_from_integrals(&integrals, p, alpha)?;
        // Delta method on d = m^{1/p}, m = mean(I^{α/2}).
        let terms = powers(&integrals, alpha / 2.0);
        let (m, se_m) = mean_se(&terms);
        let se = if m > 0.0 { d / (p * m) * se_m } else { 0.0 };
        out.stat(format!("distance_integral({n1},{n2})"), &integrals);
        table.push(&[n1, n2, d, se, raw_d, decoupled]);
        coupling_rows.push(CheckRow::new(
            format!("coupled before n1 ({n1},{n2})"),
            held as f64 / pairs.len() as f64,
            0.0,
            Verdict::from_bool(held == pairs.len()),
        ));
        estimates.push((n1, n2, d, se));
    }
    let mut rows = Vec::new();
    for (k, &(n1, n2, d, se)) in estimates.iter().enumerate() {
        let verdict = if k == 0 {
            Verdict::Inconclusive
        } else {
            Verdict::from_bool(d < estimates[k - 1].2)
        };
        rows.push(CheckRow::new(format!("d({n1},{n2})"), d, se, verdict));
    }
    let mut trend = CheckReport::new("truncation-trend", c.paths, rows);
    if estimates.len() < 2 {
        trend = trend.note("a trend needs at least two pairs");
    }
    out.checks.push(trend);
    out.checks.push(CheckReport::new("coupling", c.paths, coupling_rows));
    out.tables.push(table);
    Ok(out)
}

fn blowup_scan(c: &ExperimentConfig, pool: &Pool) -> Result<Outcome> {
    let mut out = Outcome::default();
    let mut table = Table::new("blowup-trend", &["gamma", "exceed_fraction", "stderr", "exploded_fraction"]);
    let mut rows = Vec::new();
    let mut fractions: Vec<f64> = Vec::new();
    for &gamma in &c.gammas {
        let cfg = c.spde_config_at(gamma, c.trunc)?;
        let runs = pool.map(c.paths, |i| {
            let t = simulate_truncated(&cfg, &derive_stream(c.seed, i as u64))?;
            Ok((t.running_sup, t.status, t.times, t.sup))
        })?;
        out.count_status(runs.iter().map(|r| &r.1));
        let sups: Vec<f64> = runs.iter().map(|r| r.0).collect();
        let name = format!("sup(gamma={gamma})");
        for (i, r) in runs.iter().enumerate() {
            out.series.push(i, &name, &r.2, &r.3);
        }
        out.stat(format!("running_sup(gamma={gamma})"), &sups);
        let (frac, se, _) = exceedance(&sups, c.exceed_level);
        let exploded = runs.iter().filter(|r| r.1.exploded()).count() as f64 / runs.len() as f64;
        table.push(&[gamma, frac, se, exploded]);
        let verdict = match fractions.last() {
            None => Verdict::Inconclusive,
            Some(&prev) => Verdict::from_bool(frac >= prev),
        };
        rows.push(CheckRow::new(format!("P(sup >= {}) at gamma={gamma}", c.exceed_level), frac, se, verdict));
        fractions.push(frac);
    }
    let last = *fractions.last().expect("validated nonempty gamma grid");
    let top = c.gammas[c.gammas.len() - 1];
    rows.push(CheckRow::new(
        format!("positive at gamma={top}"),
        last,
        0.0,
        Verdict::from_bool(last > 0.0),
    ));
    out.checks.push(CheckReport::new("blowup-trend", c.paths, rows));
    out.tables.push(table);
    Ok(out)
}

/// Drift residuals at `T` of one path: `(mode, two-pi, paper-literal)`.
type Residuals = Vec<(i64, Complex<f64>, Complex<f64>)>;

fn z_rows(label: &str, values: &[Complex<f64>]) -> Vec<CheckRow> {
    let mut rows = Vec::new();
    let parts: [(&str, Vec<f64>); 2] = [
        ("re", values.iter().map(|v| v.re).collect()),
        ("im", values.iter().map(|v| v.im).collect()),
    ];
    for (part, xs) in parts {
        if part == "im" && xs.iter().all(|&v| v == 0.0) {
            continue;
        }
        let (m, se) = mean_se(&xs);
        let z = if se > 0.0 { m / se } else { 0.0 };
        rows.push(
            CheckRow::new(format!("{part} {label}"), m, se, Verdict::from_bool(z.abs() <= SIGMA_MARGIN)).statistic(z),
        );
    }
    rows
}

fn fourier_check(c: &ExperimentConfig, pool: &Pool) -> Result<Outcome> {
    let mut out = Outcome::default();
    let modes = (c.qv_modes[0], c.qv_modes[1]);
    let mut ladder = Table::new(
        "qv-ladder",
        &["dt", "mean_discrepancy", "stderr", "mean_abs_predicted", "mean_relative_error"],
    );
    let mut rel_errors = Vec::new();
    let finest = c.dt_ladder.len() - 1;
    for (level, &dt) in c.dt_ladder.iter().enumerate() {
        let mut lc = c.clone();
        lc.dt = dt;
        let cfg = lc.spde_config()?;
        let with_drift = level == finest;
        let runs = pool.map(c.paths, |i| {
            let mut source = derive_stream(c.seed, i as u64);
            let mut cov = CovariationAccumulator::new(cfg.spec, cfg.dt, modes);
            let mut rec = CoefficientRecorder::new(cfg.spec, cfg.dt, if with_drift { &c.modes[..] } else { &[] });
            let traj = simulate_with(&cfg, &mut source, &mut (&mut cov, &mut rec))?;
            let residuals: Residuals = rec
                .series
                .iter()
                .map(|s| {
                    let two_pi = drift_residual(s, EigenConvention::TwoPi);
                    let literal = drift_residual(s, EigenConvention::PaperLiteral);
                    (s.mode, *two_pi.values.last().unwrap(), *literal.values.last().unwrap())
                })
                .collect();
            Ok((cov.sample, residuals, traj.status))
        })?;
        out.count_status(runs.iter().map(|r| &r.2));
        let samples: Vec<_> = runs.iter().map(|r| r.0).collect();
        let disc: Vec<f64> = samples.iter().map(|s| (s.realized - s.predicted).re).collect();
        let pred: Vec<f64> = samples.iter().map(|s| s.predicted.norm()).collect();
        let rel: Vec<f64> = samples
            .iter()
            .filter(|s| s.predicted.norm() > 0.0)
            .map(|s| (s.realized - s.predicted).norm() / s.predicted.norm())
            .collect();
        let (md, sd) = mean_se(&disc);
        let mrel = if rel.is_empty() { 0.0 } else { mean(&rel) };
        ladder.push(&[dt, md, sd, mean(&pred), mrel]);
        rel_errors.push((dt, mrel, if rel.is_empty() { 0.0 } else { stderr(&rel) }));

        if with_drift {
            let mut qv = qv_relation_report(&samples, modes)?;
            qv.name = format!("qv-relation({},{}) dt={dt}", modes.0, modes.1);
            out.checks.push(qv);
            for (j, &mode) in c.modes.iter().enumerate() {
                let two_pi: Vec<Complex<f64>> = runs.iter().map(|r| r.1[j].1).collect();
                let literal: Vec<Complex<f64>> = runs.iter().map(|r| r.1[j].2).collect();
                out.stat(format!("drift_residual_re(n={mode},two-pi)"), &two_pi.iter().map(|v| v.re).collect::<Vec<_>>());
                out.stat(
                    format!("drift_residual_re(n={mode},paper-literal)"),
                    &literal.iter().map(|v| v.re).collect::<Vec<_>>(),
                );
                out.checks.push(CheckReport::new(
                    format!("drift-residual(n={mode},two-pi)"),
                    c.paths,
                    z_rows("R(T)", &two_pi),
                ));
                out.checks.push(
                    CheckReport::new(
                        format!("drift-residual(n={mode},paper-literal)"),
                        c.paths,
                        z_rows("R(T)", &literal),
                    )
                    .informational(true)
                    .note("eigenvalue n^2/2 as printed; reported alongside the two-pi convention"),
                );
            }
        }
    }
    let mut rows = Vec::new();
    for (k, &(dt, r, se)) in rel_errors.iter().enumerate() {
        let verdict = if k == 0 {
            Verdict::Inconclusive
        } else {
            Verdict::from_bool(r < rel_errors[k - 1].1)
        };
        rows.push(CheckRow::new(format!("mean relative error dt={dt}"), r, se, verdict));
    }
    out.checks.push(CheckReport::new("qv-relation-trend", c.paths, rows));
    out.tables.push(ladder);
    Ok(out)
}

fn lp_norms(c: &ExperimentConfig, pool: &Pool) -> Result<Outcome> {
    let specs = c.norm_integrals();
    let mut cfg = c.spde_config()?;
    cfg.norm_integrals = specs.clone();
    cfg.lp_norms = c.p.iter().map(|&p| 2.0 * p).collect();
    let (paths, trajs) = run_spde(c, &cfg, pool, true)?;
    let mut out = Outcome::default();
    out.count_status(paths.iter().map(|p| &p.status));
    for (i, t) in trajs.iter().enumerate() {
        push_trajectory_series(&mut out, i, t, "");
    }
    drop(trajs);

    let column = |ps: &[MassPath], j: usize| -> Vec<f64> { ps.iter().map(|p| p.norm_integrals[j]).collect() };
    let label = |j: usize| format!("int ||u||_{}^{}", specs[j].p, specs[j].alpha);
    let mut rows = Vec::new();
    for j in 0..specs.len() {
        let xs = column(&paths, j);
        out.stat(label(j), &xs);
        let (m, se) = mean_se(&xs);
        let finite = xs.iter().all(|v| v.is_finite()) && m.is_finite();
        rows.push(CheckRow::new(label(j), m, se, Verdict::from_bool(finite)));
    }
    out.checks.push(CheckReport::new("lp-integral-finite", paths.len(), rows));

    if c.stability {
        let mut finer = cfg.clone();
        finer.dt = cfg.dt / 2.0;
        finer.sample_every = cfg.sample_every * 2;
        let mut deeper = cfg.clone();
        deeper.trunc = 2.0 * cfg.trunc;
        let (fine_paths, _) = run_spde(c, &finer, pool, false)?;
        let (deep_paths, _) = run_spde(c, &deeper, pool, false)?;
        for j in 0..specs.len() {
            let base = mean_se(&column(&paths, j));
            let f = mean_se(&column(&fine_paths, j));
            let d = mean_se(&column(&deep_paths, j));
            out.checks.push(stability_check(
                format!("lp-stability({})", label(j)),
                paths.len(),
                base,
                &[
                    (format!("dt {}", finer.dt).as_str(), f.0, f.1),
                    (format!("trunc {}", deeper.trunc).as_str(), d.0, d.1),
                ],
                c.stability_tolerance,
            ));
        }
    }
    Ok(out)
}
