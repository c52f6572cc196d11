//! Scalar functionals of fields and paths: total mass, `L^p` norms, hitting
//! times, the constant `K(α)` and the Monte Carlo `d_{p,α}` distance.

use crate::error::{config, domain, Result};
use crate::lattice::{Field, GridSpec};
use crate::scalar::{Power, Real};
use crate::spde::Trajectory;

/// A named scalar series on strictly increasing times.
#[derive(Clone, Debug, PartialEq)]
pub struct FunctionalSeries<T> {
    pub name: String,
    pub times: Vec<T>,
    pub values: Vec<T>,
}

impl<T: Real> FunctionalSeries<T> {
    pub fn new(name: impl Into<String>, times: Vec<T>, values: Vec<T>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(config(format!(
                "series has {} times but {} values",
                times.len(),
                values.len()
            )));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(config("series times must be strictly increasing"));
        }
        Ok(Self {
            name: name.into(),
            times,
            values,
        })
    }
}

/// `U = h Σ_x u(x)`.
pub fn total_mass<T: Real>(u: &[T], spec: GridSpec) -> T {
    spec.h::<T>() * u.iter().copied().sum::<T>()
}

/// `(h Σ_x |u(x)|^p)^{1/p}`.
pub fn lp_norm<T: Real>(u: &[T], p: T, spec: GridSpec) -> Result<T> {
    if !(p >= T::one()) {
        return Err(domain(format!("L^p norm needs p >= 1, got {p}")));
    }
    spec.check(u)?;
    let pow = Power::new(p);
    let s: T = u.iter().map(|&v| pow.apply(v.abs())).sum();
    Ok((spec.h::<T>() * s).powf(p.recip()))
}

/// First sampled time at which the series is `≥ level`.
pub fn hitting_time<T: Real>(series: &FunctionalSeries<T>, level: T) -> Option<T> {
    series
        .values
        .iter()
        .position(|&v| v >= level)
        .map(|i| series.times[i])
}

/// `K(α) = (2 − α) / (c(α)(1 − α))`.
pub fn k_alpha<T: Real>(alpha: T, c_alpha: T) -> Result<T> {
    if !(alpha > T::zero() && alpha < T::one()) {
        return Err(domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if !(c_alpha > T::zero()) {
        return Err(domain(format!("c(alpha) must be positive, got {c_alpha}")));
    }
    Ok((T::lit(2.0) - alpha) / (c_alpha * (T::one() - alpha)))
}

/// Sampled fields of one path on a shared grid and time schedule.
#[derive(Clone, Copy, Debug)]
pub struct PathSamples<'a, T> {
    pub spec: GridSpec,
    pub times: &'a [T],
    pub fields: &'a [Field<T>],
}

impl<'a, T: Real> From<&'a Trajectory<T>> for PathSamples<'a, T> {
    fn from(t: &'a Trajectory<T>) -> Self {
        Self {
            spec: t.spec,
            times: &t.times,
            fields: &t.fields,
        }
    }
}

/// `Σ_k (t_{k+1} − t_k) h Σ_x |a_k − b_k|^p`, left endpoints.
pub fn space_time_distance<T: Real>(a: PathSamples<T>, b: PathSamples<T>, p: T) -> Result<T> {
    if a.spec != b.spec || a.times != b.times {
        return Err(config("paired paths must share grid and time schedule"));
    }
    if a.fields.len() != a.times.len() || b.fields.len() != b.times.len() {
        return Err(config("paired paths must retain a field at every sampled time"));
    }
    let pow = Power::new(p);
    let h = a.spec.h::<T>();
    let mut total = T::zero();
    for k in 0..a.times.len().saturating_sub(1) {
        let dt = a.times[k + 1] - a.times[k];
        let s: T = a.fields[k]
            .iter()
            .zip(b.fields[k].iter())
            .map(|(&x, &y)| pow.apply((x - y).abs()))
            .sum();
        total += dt * h * s;
    }
    Ok(total)
}

/// `(mean_i I_i^{α/2})^{1/p}` from per-pair space-time integrals `I_i`.
pub fn dpalpha_from_integrals<T: Real>(integrals: &[T], p: T, alpha: T) -> Result<T> {
    if !(p >= T::one()) {
        return Err(domain(format!("p must be >= 1, got {p}")));
    }
    if !(alpha > T::zero() && alpha < T::lit(2.0)) {
        return Err(domain(format!("alpha must lie in (0, 2), got {alpha}")));
    }
    if integrals.is_empty() {
        return Err(domain("no pairs to average"));
    }
    let half = alpha / T::lit(2.0);
    let sum: T = integrals.iter().map(|&i| i.powf(half)).sum();
    Ok((sum / T::from_usize_lossy(integrals.len())).powf(p.recip()))
}

/// Monte Carlo estimate of `d_{p,α}` over coupled pairs.
pub fn dpalpha_estimate<T: Real>(pairs: &[(PathSamples<T>, PathSamples<T>)], p: T, alpha: T) -> Result<T> {
    if let Some((first, _)) = pairs.first() {
        if pairs
            .iter()
            .any(|(a, _)| a.spec != first.spec || a.times != first.times)
        {
            return Err(config("all pairs must share grid and time schedule"));
        }
    }
    let integrals = pairs
        .iter()
        .map(|&(a, b)| space_time_distance(a, b, p))
        .collect::<Result<Vec<_>>>()?;
    dpalpha_from_integrals(&integrals, p, alpha)
}
