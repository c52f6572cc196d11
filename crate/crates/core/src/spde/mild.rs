//! Residual of the mild (heat-kernel) form along a simulated path.

use crate::error::{domain, Error, Result};
use crate::lattice::{Generator, HeatSemigroup};
use crate::scalar::{Power, Real};

use super::{SpdeConfig, Trajectory};

/// `‖u(t) − P_t(u₀ ∧ n) − Σ_{t_k < t} P_{t−t_k}[(u_k ∧ n)^γ ξ_k]‖₂` with the
/// continuum heat semigroup and the grid `L²` norm.
pub fn mild_residual<T: Real>(traj: &Trajectory<T>, cfg: &SpdeConfig<T>, t: T) -> Result<T> {
    mild_residual_with(traj, cfg, t, Generator::Continuum)
}

/// [`mild_residual`] with a choice of semigroup generator.
///
/// The trajectory must hold every step's field and slab. The stochastic
/// convolution is built recursively, `V_{k+1} = P_dt(V_k + g_k ξ_k)`, which
/// is the left-point sum above.
pub fn mild_residual_with<T: Real>(
    traj: &Trajectory<T>,
    cfg: &SpdeConfig<T>,
    t: T,
    generator: Generator,
) -> Result<T> {
    let slabs = traj
        .slabs
        .as_ref()
        .ok_or_else(|| Error::Unavailable("mild residual needs retained slabs".into()))?;
    if traj.sample_every != 1 || traj.fields.len() != traj.steps + 1 {
        return Err(Error::Unavailable(
            "mild residual needs the field of every step (stride 1, retained fields)".into(),
        ));
    }
    if !(t >= T::zero()) {
        return Err(domain(format!("time must be >= 0, got {t}")));
    }
    let k_end = (t / cfg.dt).round().to_usize().unwrap_or(usize::MAX);
    if k_end > traj.steps {
        return Err(domain(format!("time {t} is past the end of the trajectory")));
    }

    let spec = cfg.spec;
    let h = spec.h::<T>();
    let pow = Power::new(cfg.gamma);
    let mut semigroup = HeatSemigroup::new(spec);
    let mut v = cfg.initial_field().into_vec();
    let mut next = vec![T::zero(); spec.cells()];
    for k in 0..k_end {
        let u = &traj.fields[k];
        for ((acc, &uk), &xi) in v.iter_mut().zip(u.iter()).zip(slabs[k].iter()) {
            *acc += pow.apply(uk.max(T::zero()).min(cfg.trunc)) * xi;
        }
        semigroup.apply_into(&v, cfg.dt, generator, &mut next)?;
        std::mem::swap(&mut v, &mut next);
    }
    let sq: T = traj.fields[k_end]
        .iter()
        .zip(&v)
        .map(|(&a, &b)| (a - b) * (a - b))
        .sum();
    Ok((h * sq).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{Field, GridSpec};
    use crate::noise::NoiseStream;
    use crate::spde::simulate_truncated;

    #[test]
    fn zero_data_zero_noise_has_zero_residual() {
        let g = GridSpec::new(16).unwrap();
        let mut cfg = SpdeConfig::new(2.0f64, 10.0, g, 1e-3, 0.05, Field::zeros(g));
        cfg.retain_fields = true;
        cfg.retain_slabs = true;
        let traj = simulate_truncated(&cfg, &NoiseStream::silent()).unwrap();
        assert_eq!(mild_residual(&traj, &cfg, 0.05).unwrap(), 0.0);
    }

    #[test]
    fn unavailable_without_slabs() {
        let g = GridSpec::new(16).unwrap();
        let mut cfg = SpdeConfig::new(2.0f64, 10.0, g, 1e-3, 0.05, Field::constant(g, 1.0));
        cfg.retain_fields = true;
        let traj = simulate_truncated(&cfg, &NoiseStream::silent()).unwrap();
        assert!(matches!(mild_residual(&traj, &cfg, 0.05), Err(Error::Unavailable(_))));
    }
}
