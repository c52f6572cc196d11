//! Ensemble oracles for the one-dimensional equation `du = u^γ dW`.

use spde_lab::sode::{expected_value, rescaled_statistic, simulate_euler_batch, simulate_exact_bessel, SodeConfig};
use spde_lab::stats::{ks_critical_two_sample, ks_two_sample, mean, stderr};
use spde_lab::{derive_stream, PathStatus};

const SEED: u64 = 424_242;

/// `(u at the first recorded time after 0, u(T), exploded)` per path.
fn euler_ensemble(paths: usize, dt: f64, horizon: f64, record_every: usize) -> Vec<(f64, f64, bool)> {
    let mut cfg = SodeConfig::new(2.0, 1.0, dt, horizon);
    cfg.record_every = record_every;
    let mut out = Vec::with_capacity(paths);
    for lo in (0..paths).step_by(4) {
        let streams: Vec<_> = (lo..(lo + 4).min(paths)).map(|i| derive_stream(SEED, i as u64)).collect();
        for p in simulate_euler_batch(&cfg, &streams).unwrap() {
            let exploded = matches!(p.status, PathStatus::Exploded { .. });
            out.push((p.values.get(1).copied().unwrap_or(f64::INFINITY), p.terminal, exploded));
        }
    }
    out
}

fn exact_ensemble(paths: usize, t: f64) -> Vec<f64> {
    let cfg = SodeConfig::new(2.0, 1.0, 1e-3, 1.0);
    (0..paths)
        .map(|i| simulate_exact_bessel(&cfg, &derive_stream(SEED + 1, i as u64), t).unwrap())
        .collect()
}

/// u is a strict local martingale: at γ = 2 its mean is `erf(1/√(2t))`, not u0.
#[test]
fn euler_and_exact_laws_agree() {
    let euler = euler_ensemble(10_000, 1e-4, 1.0, 5_000);
    let halfway: Vec<f64> = euler.iter().map(|e| e.0).collect();
    let terminal: Vec<f64> = euler.iter().map(|e| e.1).collect();

    assert!(euler.iter().all(|e| !e.2));
    let reference = expected_value(2.0, 1.0, 1.0).unwrap();
    assert!((reference - 0.682_689_492_137_086).abs() < 1e-10);
    let z = (mean(&terminal) - reference) / stderr(&terminal);
    assert!(z.abs() <= 3.0, "Euler mean {} vs {reference}: z = {z}", mean(&terminal));
    assert!(mean(&terminal) + 3.0 * stderr(&terminal) < 1.0, "the mean must have decayed below u0");

    let exact = exact_ensemble(100_000, 0.5);
    let z = (mean(&exact) - expected_value(2.0, 1.0, 0.5).unwrap()) / stderr(&exact);
    assert!(z.abs() <= 3.0, "exact mean z = {z}");

    let fine = ks_two_sample(&halfway, &exact);
    let critical = ks_critical_two_sample(halfway.len(), exact.len(), 0.01);
    assert!(fine < critical, "KS {fine} vs critical {critical}");

    let coarse_paths = euler_ensemble(10_000, 1e-2, 0.5, 25);
    // The coarse scheme overshoots and may explode; those paths count as +inf.
    let coarse: Vec<f64> = coarse_paths.iter().map(|e| if e.2 { f64::INFINITY } else { e.1 }).collect();
    let coarse_d = ks_two_sample(&coarse, &exact);
    assert!(fine < coarse_d, "KS must shrink with dt: {fine} vs {coarse_d}");
}

#[test]
fn exact_rescaled_statistic_has_chi_square_mean() {
    // y = u_T^{-2}/T is Z_T²/T for a 3-dimensional Bessel Z from 1: mean 3 + 1/T.
    let t = 4.0;
    let ys: Vec<f64> = exact_ensemble(50_000, t)
        .into_iter()
        .map(|u| rescaled_statistic(u, 2.0, t).unwrap())
        .collect();
    let z = (mean(&ys) - (3.0 + 1.0 / t)) / stderr(&ys);
    assert!(z.abs() <= 3.0, "z = {z}");
}
