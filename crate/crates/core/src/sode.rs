//! The scalar Itô equation `du = u^γ dW`, `γ > 1`.
//!
//! Two samplers are provided: an explicit Euler–Maruyama scheme with an
//! absorbing clamp at zero, and an exact terminal sampler based on the power
//! transform `Z = u^{1−γ}`. `Z((γ−1)²t)` is a Bessel process of dimension
//! `δ = (2γ−1)/(γ−1) > 2`, so `Z²` is a squared Bessel process whose transition
//! from `x₀` over time `s` is `s · χ'²(δ, x₀/s)`. The noncentral chi-square is
//! drawn as a Poisson mixture of central chi-squares, exact for any real `δ`.

use rand_distr::{ChiSquared, Distribution, Poisson};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_lr, ln_gamma};

use crate::error::{config, domain, Result};
use crate::noise::NoiseStream;
use crate::scalar::{Power, Real};
use crate::PathStatus;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SodeScheme {
    Euler,
    ExactBessel,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SodeConfig<T> {
    pub gamma: T,
    pub u0: T,
    pub dt: T,
    pub horizon: T,
    pub scheme: SodeScheme,
    /// Keep every `record_every`-th Euler state in the path (plus the last).
    pub record_every: usize,
}

impl<T: Real> SodeConfig<T> {
    pub fn new(gamma: T, u0: T, dt: T, horizon: T) -> Self {
        Self {
            gamma,
            u0,
            dt,
            horizon,
            scheme: SodeScheme::Euler,
            record_every: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > T::one()) {
            return Err(config(format!("gamma must exceed 1, got {}", self.gamma)));
        }
        if !(self.u0 > T::zero()) || !self.u0.is_finite() {
            return Err(config(format!("u0 must be positive, got {}", self.u0)));
        }
        if !(self.dt > T::zero()) || !(self.dt <= self.horizon) || !self.horizon.is_finite() {
            return Err(config(format!(
                "need 0 < dt <= horizon, got dt={} horizon={}",
                self.dt, self.horizon
            )));
        }
        if self.record_every == 0 {
            return Err(config("record_every must be at least 1"));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round().to_usize().unwrap_or(0).max(1)
    }
}

/// One SODE trajectory (sampled every `record_every` steps).
#[derive(Clone, Debug, PartialEq)]
pub struct SodePath<T> {
    pub times: Vec<T>,
    pub values: Vec<T>,
    /// Maximum over every step, not only the recorded ones.
    pub running_max: T,
    pub terminal: T,
    /// `Σ_k u_k^{2γ} dt`, the increasing process of the discrete martingale.
    pub quadratic_variation: T,
    pub status: PathStatus,
}

/// Dimension `(2γ−1)/(γ−1)` of the Bessel process `u^{1−γ}(t/(γ−1)²)`.
pub fn bessel_dimension<T: Real>(gamma: T) -> Result<T> {
    if !(gamma > T::one()) {
        return Err(domain(format!("gamma must exceed 1, got {gamma}")));
    }
    Ok((T::lit(2.0) * gamma - T::one()) / (gamma - T::one()))
}

/// Explicit scheme `u_{k+1} = max(u_k + u_k^γ ΔW_k, 0)`, `ΔW_k ~ N(0, dt)`.
///
/// Increment `k` is the scalar-lane draw `k` of `stream`. Zero is absorbing.
/// A non-finite state flags the path as exploded at that step.
pub fn simulate_euler<T: Real>(cfg: &SodeConfig<T>, stream: &NoiseStream) -> Result<SodePath<T>> {
    Ok(simulate_euler_batch(cfg, std::slice::from_ref(stream))?
        .pop()
        .expect("one path per stream"))
}

/// [`simulate_euler`] for several paths advanced in lockstep. Each path is
/// bitwise identical to its single-path run; interleaving only hides the
/// latency of the serial update chain.
pub fn simulate_euler_batch<T: Real>(cfg: &SodeConfig<T>, streams: &[NoiseStream]) -> Result<Vec<SodePath<T>>> {
    cfg.validate()?;
    let steps = cfg.steps();
    let pow = Power::new(cfg.gamma);
    let dt = cfg.dt;
    let sqrt_dt = dt.sqrt();
    let lanes = streams.len();
    let n_records = steps / cfg.record_every + 2;

    let mut normals: Vec<_> = streams.iter().map(|s| s.scalar_normals()).collect();
    let mut paths: Vec<SodePath<T>> = (0..lanes)
        .map(|_| {
            let mut times = Vec::with_capacity(n_records);
            let mut values = Vec::with_capacity(n_records);
            times.push(T::zero());
            values.push(cfg.u0);
            SodePath {
                times,
                values,
                running_max: cfg.u0,
                terminal: cfg.u0,
                quadratic_variation: T::zero(),
                status: PathStatus::Completed,
            }
        })
        .collect();
    let mut u = vec![cfg.u0; lanes];
    let mut qv = vec![T::zero(); lanes];
    let mut running_max = vec![cfg.u0; lanes];
    let mut active = vec![true; lanes];
    let mut n_active = lanes;
    let mut countdown = cfg.record_every;

    for k in 0..steps {
        if n_active == 0 {
            break;
        }
        countdown -= 1;
        let last = k + 1 == steps;
        let record = countdown == 0 || last;
        if record {
            countdown = cfg.record_every;
        }
        let t_next = T::from_usize_lossy(k + 1) * dt;
        for l in 0..lanes {
            if !active[l] {
                continue;
            }
            let g = pow.apply(u[l]);
            let next = u[l] + g * sqrt_dt * T::lit(normals[l].next_normal());
            qv[l] += g * g * dt;
            if !next.is_finite() || !qv[l].is_finite() {
                paths[l].status = PathStatus::Exploded { step: k + 1 };
                u[l] = next;
                active[l] = false;
                n_active -= 1;
                continue;
            }
            let v = next.max(T::zero());
            u[l] = v;
            if v > running_max[l] {
                running_max[l] = v;
            }
            let path = &mut paths[l];
            if record {
                path.times.push(t_next);
                path.values.push(v);
            }
            if v == T::zero() && !last {
                path.status = PathStatus::Absorbed { step: k + 1 };
                // The remaining recorded states are all zero.
                let mut j = k + 1 + countdown;
                while j < steps {
                    path.times.push(T::from_usize_lossy(j) * dt);
                    path.values.push(T::zero());
                    j += cfg.record_every;
                }
                path.times.push(T::from_usize_lossy(steps) * dt);
                path.values.push(T::zero());
                active[l] = false;
                n_active -= 1;
            }
        }
    }

    for (l, path) in paths.iter_mut().enumerate() {
        path.running_max = running_max[l];
        path.terminal = u[l];
        path.quadratic_variation = qv[l];
    }
    Ok(paths)
}

/// Inverse of the power transform: `u = (Z²)^{−1/(2(γ−1))}`, decreasing in `Z²`.
pub fn u_from_squared_bessel<T: Real>(z_squared: T, gamma: T) -> T {
    z_squared.powf(-T::one() / (T::lit(2.0) * (gamma - T::one())))
}

/// Draws a squared Bessel process of dimension `dim` at time `s` from `x0`.
pub fn sample_squared_bessel(dim: f64, x0: f64, s: f64, stream: &NoiseStream) -> f64 {
    if s <= 0.0 {
        return x0;
    }
    if stream.is_silent() {
        // Deterministic part of the dynamics: d(Z²) = δ ds.
        return x0 + dim * s;
    }
    let mut rng = stream.rng(0);
    let half_lambda = x0 / s / 2.0;
    let poisson_draw = if half_lambda <= 0.0 {
        0.0
    } else {
        match Poisson::new(half_lambda) {
            Ok(p) => p.sample(&mut rng),
            // Beyond the sampler's range the mixture is sharply concentrated.
            Err(_) => half_lambda,
        }
    };
    let chi = ChiSquared::new(dim + 2.0 * poisson_draw)
        .expect("positive degrees of freedom")
        .sample(&mut rng);
    (s * chi).max(f64::MIN_POSITIVE)
}

/// Exact sample of `u(t)` through the Bessel reduction.
pub fn simulate_exact_bessel<T: Real>(cfg: &SodeConfig<T>, stream: &NoiseStream, t: T) -> Result<T> {
    cfg.validate()?;
    if !(t >= T::zero()) {
        return Err(domain(format!("time must be >= 0, got {t}")));
    }
    if t == T::zero() {
        return Ok(cfg.u0);
    }
    let gamma = cfg.gamma.to_f64_lossy();
    let dim = bessel_dimension(gamma)?;
    let s = (gamma - 1.0).powi(2) * t.to_f64_lossy();
    let x0 = cfg.u0.to_f64_lossy().powf(2.0 * (1.0 - gamma));
    let z2 = sample_squared_bessel(dim, x0, s, stream);
    Ok(T::lit(u_from_squared_bessel(z2, gamma)))
}

/// `E[u(t)]` from the squared Bessel law, as a Poisson mixture of central
/// chi-square moments. Below `u₀` for `t > 0`: `u` is a strict local martingale.
pub fn expected_value(gamma: f64, u0: f64, t: f64) -> Result<f64> {
    let dim = bessel_dimension(gamma)?;
    if !(u0 > 0.0) || !(t >= 0.0) {
        return Err(domain(format!("need u0 > 0 and t >= 0, got u0={u0} t={t}")));
    }
    if t == 0.0 {
        return Ok(u0);
    }
    // u = (Z²)^{-r}; E[(χ²_k)^{-r}] = 2^{-r} Γ(k/2 − r)/Γ(k/2), and k/2 − r ≥ 1.
    let r = 1.0 / (2.0 * (gamma - 1.0));
    let s = (gamma - 1.0).powi(2) * t;
    let x0 = u0.powf(2.0 * (1.0 - gamma));
    let lambda = x0 / s / 2.0;
    let last = (lambda + 40.0 * lambda.sqrt() + 50.0).ceil() as u64;
    let mut total = 0.0;
    for n in 0..=last {
        let k = dim + 2.0 * n as f64;
        let log_weight = if lambda > 0.0 {
            n as f64 * lambda.ln() - lambda - ln_gamma(n as f64 + 1.0)
        } else if n == 0 {
            0.0
        } else {
            break;
        };
        total += (log_weight + ln_gamma(k / 2.0 - r) - ln_gamma(k / 2.0)).exp();
    }
    Ok(total * (2.0 * s).powf(-r))
}

/// Which form of the limiting density of the rescaled statistic to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DensityVariant {
    /// `y^{−1/(2γ−2)} e^{−y/2}` with normalization `2^{−δ/2}/Γ(δ/2)`.
    PaperLiteral,
    /// The `χ²_δ` density, exponent `+1/(2γ−2)`.
    ChiSquare,
}

fn density_parts(gamma: f64) -> Result<(f64, f64)> {
    if !(gamma > 1.0) {
        return Err(domain(format!("gamma must exceed 1, got {gamma}")));
    }
    let a = 1.0 / (2.0 * gamma - 2.0);
    // log of 1/(2^{1+a} Γ(1+a)); 1 + a = δ/2.
    let log_norm = -(1.0 + a) * std::f64::consts::LN_2 - ln_gamma(1.0 + a);
    Ok((a, log_norm))
}

/// Limiting density of `u^{2(1−γ)}(T)/((γ−1)²T)` as `T → ∞`.
pub fn asymptotic_pdf<T: Real>(gamma: T, y: T, variant: DensityVariant) -> Result<T> {
    let (a, log_norm) = density_parts(gamma.to_f64_lossy())?;
    let y = y.to_f64_lossy();
    if y < 0.0 {
        return Ok(T::zero());
    }
    let exponent = match variant {
        DensityVariant::PaperLiteral => -a,
        DensityVariant::ChiSquare => a,
    };
    let v = if y == 0.0 {
        if exponent < 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    } else {
        (log_norm + exponent * y.ln() - y / 2.0).exp()
    };
    Ok(T::lit(v))
}

/// Total mass of [`asymptotic_pdf`]; `None` when it diverges.
pub fn asymptotic_pdf_mass(gamma: f64, variant: DensityVariant) -> Result<Option<f64>> {
    let (a, _) = density_parts(gamma)?;
    Ok(match variant {
        DensityVariant::ChiSquare => Some(1.0),
        DensityVariant::PaperLiteral if a < 1.0 => {
            Some((-2.0 * a * std::f64::consts::LN_2 + ln_gamma(1.0 - a) - ln_gamma(1.0 + a)).exp())
        }
        DensityVariant::PaperLiteral => None,
    })
}

/// `∫₀^y` of [`asymptotic_pdf`]; `None` when the integral diverges at 0
/// (paper-literal variant with `γ ≤ 3/2`).
pub fn asymptotic_cdf(gamma: f64, y: f64, variant: DensityVariant) -> Result<Option<f64>> {
    let (a, _) = density_parts(gamma)?;
    if y <= 0.0 {
        return Ok(Some(0.0));
    }
    Ok(match variant {
        DensityVariant::ChiSquare => Some(gamma_lr(1.0 + a, y / 2.0)),
        DensityVariant::PaperLiteral => {
            asymptotic_pdf_mass(gamma, variant)?.map(|mass| mass * gamma_lr(1.0 - a, y / 2.0))
        }
    })
}

/// `u_T^{2(1−γ)} / ((γ−1)² T)`.
pub fn rescaled_statistic<T: Real>(u_t: T, gamma: T, horizon: T) -> Result<T> {
    if !(u_t > T::zero()) {
        return Err(domain(format!(
            "rescaled statistic needs u_T > 0 (got {u_t}); the path was absorbed"
        )));
    }
    if !(horizon > T::zero()) {
        return Err(domain(format!("horizon must be positive, got {horizon}")));
    }
    if !(gamma > T::one()) {
        return Err(domain(format!("gamma must exceed 1, got {gamma}")));
    }
    let g1 = gamma - T::one();
    Ok(u_t.powf(-T::lit(2.0) * g1) / (g1 * g1 * horizon))
}
