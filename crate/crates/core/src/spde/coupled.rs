//! Two truncation levels driven by one noise realization.

use crate::error::{config, Result};
use crate::noise::{NoiseStream, SlabSource};
use crate::scalar::{Power, Real};

use super::{Recorder, SpdeConfig, Stepper, Trajectory};

#[derive(Clone, Debug, PartialEq)]
pub struct CoupledPair<T> {
    pub n1: T,
    pub n2: T,
    pub first: Trajectory<T>,
    pub second: Trajectory<T>,
    /// First step whose state has `max u ≥ n1` in either path (0 when the
    /// initial data already reaches it).
    pub decoupled_at: Option<usize>,
    /// The two states were bitwise equal at every step before `decoupled_at`.
    pub coupling_held: bool,
    /// Exponent used for the distance integrals.
    pub distance_p: T,
    /// `Σ_k dt h Σ_x |(u₁ ∧ n₁) − (u₂ ∧ n₂)|^p` with left-endpoint sums: the
    /// distance between the truncated fields `v = u ∧ n`.
    pub distance_integral: T,
    /// The same sum for the untruncated states, `|u₁ − u₂|^p`.
    pub raw_distance_integral: T,
}

/// Couples levels `n1 ≤ n2` on the noise of `stream`; the distance exponent
/// is `2γ`.
pub fn simulate_coupled_pair<T: Real>(
    cfg: &SpdeConfig<T>,
    n1: T,
    n2: T,
    stream: &NoiseStream,
) -> Result<CoupledPair<T>> {
    let mut source = *stream;
    simulate_coupled_pair_with(cfg, n1, n2, &mut source, T::lit(2.0) * cfg.gamma)
}

pub fn simulate_coupled_pair_with<T, S>(
    cfg: &SpdeConfig<T>,
    n1: T,
    n2: T,
    source: &mut S,
    distance_p: T,
) -> Result<CoupledPair<T>>
where
    T: Real,
    S: SlabSource<T> + ?Sized,
{
    if !(n1 <= n2) {
        return Err(config(format!("coupled levels need n1 <= n2, got {n1} and {n2}")));
    }
    if !(distance_p >= T::one()) {
        return Err(config(format!("distance exponent must be >= 1, got {distance_p}")));
    }
    let mut c1 = cfg.clone();
    c1.trunc = n1;
    let mut c2 = cfg.clone();
    c2.trunc = n2;
    c1.validate()?;
    c2.validate()?;

    let mut s1 = Stepper::new(&c1, n1)?;
    let mut s2 = Stepper::new(&c2, n2)?;
    let mut u1 = c1.initial_field().into_vec();
    let mut u2 = c2.initial_field().into_vec();
    let mut r1 = Recorder::new(&c1, &u1);
    let mut r2 = Recorder::new(&c2, &u2);
    let mut slab = vec![T::zero(); cfg.spec.cells()];
    let pow = Power::new(distance_p);
    let weight = cfg.dt * cfg.spec.h::<T>();

    let reaches = |u: &[T]| u.iter().any(|&v| v >= n1);
    let mut decoupled_at = (reaches(&u1) || reaches(&u2)).then_some(0);
    let mut coupling_held = true;
    let mut distance = T::zero();
    let mut raw_distance = T::zero();
    let (mut alive1, mut alive2) = (true, true);

    for k in 0..cfg.steps() {
        source.fill(k as u64, cfg.spec, cfg.dt, &mut slab)?;
        if decoupled_at.is_none() && u1 != u2 {
            coupling_held = false;
        }
        let mut d = T::zero();
        let mut raw = T::zero();
        for (&a, &b) in u1.iter().zip(&u2) {
            d += pow.apply((a.min(n1) - b.min(n2)).abs());
            raw += pow.apply((a - b).abs());
        }
        distance += weight * d;
        raw_distance += weight * raw;
        if alive1 {
            s1.prepare(&u1);
            r1.before_step(&u1, &slab);
            let out = s1.advance(&mut u1, &slab);
            alive1 = r1.after_step(k + 1, &u1, &out);
        }
        if alive2 {
            s2.prepare(&u2);
            r2.before_step(&u2, &slab);
            let out = s2.advance(&mut u2, &slab);
            alive2 = r2.after_step(k + 1, &u2, &out);
        }
        if decoupled_at.is_none() && (reaches(&u1) || reaches(&u2)) {
            decoupled_at = Some(k + 1);
        }
        if !(alive1 && alive2) {
            break;
        }
    }

    Ok(CoupledPair {
        n1,
        n2,
        first: r1.finish(),
        second: r2.finish(),
        decoupled_at,
        coupling_held,
        distance_p,
        distance_integral: distance,
        raw_distance_integral: raw_distance,
    })
}
