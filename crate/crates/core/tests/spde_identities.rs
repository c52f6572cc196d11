//! Identities and ensemble properties of the truncated lattice equation.

use proptest::prelude::*;
use spde_lab::lattice::Generator;
use spde_lab::spde::{mild_residual_with, simulate_truncated, SpdeConfig, SpdeScheme};
use spde_lab::stats::{mean, stderr};
use spde_lab::{derive_stream, Field, GridSpec, NoiseStream};

#[test]
fn total_mass_is_a_martingale_at_fine_dt() {
    let spec = GridSpec::new(64).unwrap();
    let mut cfg = SpdeConfig::new(2.0, 10.0, spec, 1e-5, 0.25, Field::constant(spec, 1.0));
    cfg.sample_every = 25_000;
    let terminal: Vec<f64> = (0..400)
        .map(|i| simulate_truncated(&cfg, &derive_stream(31, i)).unwrap().terminal_mass)
        .collect();
    let z = (mean(&terminal) - 1.0) / stderr(&terminal);
    assert!(z.abs() <= 3.0, "mean U(T) = {} (z = {z})", mean(&terminal));
}

#[test]
fn clipped_mass_vanishes_as_dt_shrinks() {
    let spec = GridSpec::new(64).unwrap();
    let clipped = |dt: f64| {
        let mut cfg = SpdeConfig::new(2.0, 10.0, spec, dt, 0.25, Field::constant(spec, 1.0));
        cfg.sample_every = usize::MAX;
        let xs: Vec<f64> = (0..200)
            .map(|i| simulate_truncated(&cfg, &derive_stream(20240601, i)).unwrap().clipped_mass)
            .collect();
        mean(&xs)
    };
    let ladder: Vec<f64> = [1e-4, 5e-5, 2.5e-5].into_iter().map(clipped).collect();
    assert!(ladder[0] > ladder[1] && ladder[1] > ladder[2], "{ladder:?}");
    assert!(ladder[2] < 0.1 * ladder[0], "{ladder:?}");
}

#[test]
fn zero_noise_mild_residual_shrinks_with_dt() {
    let spec = GridSpec::new(32).unwrap();
    let residual = |dt: f64| {
        let mut cfg = SpdeConfig::new(2.0, 10.0, spec, dt, 0.02, Field::spike(spec, 5, 1.0));
        cfg.retain_fields = true;
        cfg.retain_slabs = true;
        let traj = simulate_truncated(&cfg, &NoiseStream::silent()).unwrap();
        mild_residual_with(&traj, &cfg, 0.02, Generator::Discrete).unwrap()
    };
    let ladder: Vec<f64> = [4e-3, 2e-3, 1e-3].into_iter().map(residual).collect();
    assert!(ladder[0] > ladder[1] && ladder[1] > ladder[2], "{ladder:?}");
}

#[test]
fn single_slab_mild_residual_shrinks_with_dt() {
    let spec = GridSpec::new(32).unwrap();
    let residual = |dt: f64| {
        let mut cfg = SpdeConfig::new(2.0, 10.0, spec, dt, 0.02, Field::constant(spec, 1.0));
        cfg.retain_fields = true;
        cfg.retain_slabs = true;
        let mut slabs = vec![Field::zeros(spec)];
        slabs[0][7] = 0.5;
        let mut source = spde_lab::noise::RecordedSlabs { slabs };
        let traj = spde_lab::spde::simulate_with(&cfg, &mut source, &mut ()).unwrap();
        mild_residual_with(&traj, &cfg, 0.02, Generator::Discrete).unwrap()
    };
    let ladder: Vec<f64> = [4e-3, 2e-3, 1e-3].into_iter().map(residual).collect();
    assert!(ladder[0] > ladder[1] && ladder[1] > ladder[2], "{ladder:?}");
}

fn field_strategy() -> impl Strategy<Value = Vec<f64>> {
    (3usize..6).prop_flat_map(|k| proptest::collection::vec(0.0f64..4.0, 1 << k))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn zero_noise_conserves_mass(values in field_strategy(), trunc in 0.5f64..20.0, explicit: bool) {
        let spec = GridSpec::new(values.len()).unwrap();
        let mut cfg = SpdeConfig::new(2.0, trunc, spec, 1e-4, 0.02, Field::from_vec(values));
        if explicit {
            cfg.scheme = SpdeScheme::Explicit;
        }
        let traj = simulate_truncated(&cfg, &NoiseStream::silent()).unwrap();
        prop_assert!((traj.terminal_mass - traj.initial_mass).abs() <= 1e-12 * (1.0 + traj.initial_mass));
        prop_assert!(traj.realized_qv <= 1e-24 * (1.0 + traj.initial_mass * traj.initial_mass));
        prop_assert!(traj.accumulated_qv > 0.0 || traj.initial_mass == 0.0);
    }

    #[test]
    fn noisy_paths_stay_nonnegative_and_finite(values in field_strategy(), seed: u64, gamma in 1.1f64..2.5) {
        let spec = GridSpec::new(values.len()).unwrap();
        let mut cfg = SpdeConfig::new(gamma, 10.0, spec, 1e-4, 0.01, Field::from_vec(values));
        cfg.sample_every = 10;
        cfg.retain_fields = true;
        let traj = simulate_truncated(&cfg, &derive_stream(seed, 0)).unwrap();
        prop_assert!(!traj.status.exploded());
        for f in &traj.fields {
            prop_assert!(f.is_nonnegative());
            prop_assert!(f.iter().all(|v| v.is_finite()));
        }
        prop_assert!(traj.accumulated_qv >= 0.0);
    }

    #[test]
    fn single_precision_tracks_double(seed: u64) {
        let spec = GridSpec::new(16).unwrap();
        let cfg = SpdeConfig::new(2.0, 10.0, spec, 1e-4, 0.005, Field::constant(spec, 1.0));
        let cfg32 = SpdeConfig::new(2.0f32, 10.0, spec, 1e-4, 0.005, Field::constant(spec, 1.0f32));
        let a = simulate_truncated(&cfg, &derive_stream(seed, 0)).unwrap();
        let b = simulate_truncated(&cfg32, &derive_stream(seed, 0)).unwrap();
        prop_assert!((a.terminal_mass - f64::from(b.terminal_mass)).abs() < 1e-3);
    }
}
