//! The circle grid `S¹ = [0, 1)` with `0 ≡ 1`, its discrete Laplacian and the
//! heat semigroups built on top of it.
//!
//! Cell `x` of an `m`-cell grid sits at position `x·h`, `h = 1/m`. The discrete
//! Laplacian has off-diagonal weight `1/(2h²)` and diagonal `−1/h²`, so it
//! converges to `½ d²/dx²` and every row sums to zero. Its Fourier modes
//! `e^{i2πnxh}` are exact eigenvectors with eigenvalue `(cos(2πnh) − 1)/h²`,
//! which [`HeatSemigroup`] exploits for the discrete semigroup `exp(tA)`.
//! The continuum kernel `p_t` is kept alongside for mild-form diagnostics.

use std::ops::{Deref, DerefMut};
use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{config, domain, Result};
use crate::scalar::Real;

/// Absolute cutoff for the Fourier and image sums of [`heat_kernel`].
pub const HEAT_KERNEL_TOLERANCE: f64 = 1e-14;

/// Below this time the image sum converges faster than the Fourier sum.
pub const HEAT_KERNEL_CROSSOVER: f64 = 1.0 / (4.0 * std::f64::consts::PI);

/// A uniform grid of `m` cells on the unit circle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridSpec {
    m: usize,
}

impl GridSpec {
    pub const MIN_CELLS: usize = 4;

    pub fn new(m: usize) -> Result<Self> {
        if m < Self::MIN_CELLS {
            return Err(config(format!(
                "grid needs at least {} cells, got {m}",
                Self::MIN_CELLS
            )));
        }
        Ok(Self { m })
    }

    pub fn cells(&self) -> usize {
        self.m
    }

    /// Cell spacing `1/m`.
    pub fn h<T: Real>(&self) -> T {
        T::one() / T::from_usize_lossy(self.m)
    }

    /// Position of cell `x` on `[0, 1)`.
    pub fn position<T: Real>(&self, x: usize) -> T {
        T::from_usize_lossy(x) / T::from_usize_lossy(self.m)
    }

    pub fn check<T>(&self, f: &[T]) -> Result<()> {
        if f.len() != self.m {
            return Err(config(format!(
                "field has {} cells but the grid has {}",
                f.len(),
                self.m
            )));
        }
        Ok(())
    }
}

/// One time slice of the solution: `m` values indexed cyclically.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Field<T> {
    values: Vec<T>,
}

impl<T: Real> Field<T> {
    pub fn from_vec(values: Vec<T>) -> Self {
        Self { values }
    }

    pub fn zeros(spec: GridSpec) -> Self {
        Self::constant(spec, T::zero())
    }

    pub fn constant(spec: GridSpec, c: T) -> Self {
        Self {
            values: vec![c; spec.cells()],
        }
    }

    /// Mass `mass` concentrated on one cell, i.e. height `mass/h` there.
    pub fn spike(spec: GridSpec, cell: usize, mass: T) -> Self {
        let mut f = Self::zeros(spec);
        f.values[cell % spec.cells()] = mass / spec.h::<T>();
        f
    }

    /// `x ↦ g(x·h)` sampled on the grid.
    pub fn sample(spec: GridSpec, g: impl Fn(T) -> T) -> Self {
        Self {
            values: (0..spec.cells()).map(|x| g(spec.position(x))).collect(),
        }
    }

    pub fn into_vec(self) -> Vec<T> {
        self.values
    }

    pub fn is_nonnegative(&self) -> bool {
        self.values.iter().all(|&v| v >= T::zero())
    }

    /// Entrywise `min(u, cap)`.
    pub fn capped(&self, cap: T) -> Self {
        Self {
            values: self.values.iter().map(|&v| v.min(cap)).collect(),
        }
    }

    pub fn max_value(&self) -> T {
        self.values
            .iter()
            .copied()
            .fold(T::neg_infinity(), |a, b| a.max(b))
    }
}

impl<T> Deref for Field<T> {
    type Target = [T];
    fn deref(&self) -> &[T] {
        &self.values
    }
}

impl<T> DerefMut for Field<T> {
    fn deref_mut(&mut self) -> &mut [T] {
        &mut self.values
    }
}

/// `out(x) = (f(x+1) − 2f(x) + f(x−1)) / (2h²)` with cyclic indexing.
///
/// Callers guarantee `f.len() == out.len() >= 2`.
#[inline]
pub(crate) fn laplacian_into<T: Real>(f: &[T], out: &mut [T], inv_two_h2: T) {
    let m = f.len();
    let two = T::lit(2.0);
    out[0] = (f[1] - two * f[0] + f[m - 1]) * inv_two_h2;
    for x in 1..m - 1 {
        out[x] = (f[x + 1] - two * f[x] + f[x - 1]) * inv_two_h2;
    }
    out[m - 1] = (f[0] - two * f[m - 1] + f[m - 2]) * inv_two_h2;
}

pub fn apply_discrete_laplacian<T: Real>(f: &Field<T>, spec: GridSpec) -> Result<Field<T>> {
    spec.check(f)?;
    let h = spec.h::<T>();
    let mut out = Field::zeros(spec);
    laplacian_into(f, &mut out, T::one() / (T::lit(2.0) * h * h));
    Ok(out)
}

/// Eigenvalue of the discrete Laplacian for the signed mode `n`:
/// `(cos(2πnh) − 1)/h² = −2 sin²(πnh)/h²`.
pub fn discrete_eigenvalue<T: Real>(n: i64, spec: GridSpec) -> T {
    let h = spec.h::<T>();
    let s = (T::PI() * T::lit(n as f64) * h).sin();
    -T::lit(2.0) * s * s / (h * h)
}

/// Eigenvalue of the continuum generator `½ d²/dx²` for the mode `e^{i2πnx}`.
pub fn continuum_eigenvalue<T: Real>(n: i64) -> T {
    let k = T::lit(2.0) * T::PI() * T::lit(n as f64);
    -k * k / T::lit(2.0)
}

fn signed_mode(k: usize, m: usize) -> i64 {
    if 2 * k <= m {
        k as i64
    } else {
        k as i64 - m as i64
    }
}

/// Which generator's spectrum the semigroup multiplies by.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Generator {
    /// `exp(tA)` for the lattice Laplacian `A`; consistent with the steppers.
    Discrete,
    /// `exp(t·½∂²)` applied to the grid's trigonometric interpolant.
    Continuum,
}

/// Spectral application of the heat semigroup on a fixed grid, with the FFT
/// plans cached so it can be applied many times.
pub struct HeatSemigroup<T: Real> {
    spec: GridSpec,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
    buffer: Vec<Complex<T>>,
    scratch: Vec<Complex<T>>,
}

impl<T: Real> HeatSemigroup<T> {
    pub fn new(spec: GridSpec) -> Self {
        let mut planner = FftPlanner::new();
        let m = spec.cells();
        let forward = planner.plan_fft_forward(m);
        let inverse = planner.plan_fft_inverse(m);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Self {
            spec,
            forward,
            inverse,
            buffer: vec![Complex::default(); m],
            scratch: vec![Complex::default(); scratch_len],
        }
    }

    pub fn spec(&self) -> GridSpec {
        self.spec
    }

    /// Writes `P_t f` into `out`. Nonnegative inputs give nonnegative outputs
    /// (roundoff below zero is clipped only in that case).
    pub fn apply_into(&mut self, f: &[T], t: T, generator: Generator, out: &mut [T]) -> Result<()> {
        self.spec.check(f)?;
        self.spec.check(out)?;
        if !(t >= T::zero()) {
            return Err(domain(format!("semigroup time must be >= 0, got {t}")));
        }
        if t == T::zero() {
            out.copy_from_slice(f);
            return Ok(());
        }
        let m = self.spec.cells();
        for (b, &v) in self.buffer.iter_mut().zip(f) {
            *b = Complex::new(v, T::zero());
        }
        self.forward
            .process_with_scratch(&mut self.buffer, &mut self.scratch);
        for (k, b) in self.buffer.iter_mut().enumerate() {
            let n = signed_mode(k, m);
            let rate = match generator {
                Generator::Discrete => discrete_eigenvalue::<T>(n, self.spec),
                Generator::Continuum => continuum_eigenvalue::<T>(n),
            };
            *b = *b * (rate * t).exp();
        }
        self.inverse
            .process_with_scratch(&mut self.buffer, &mut self.scratch);
        let norm = T::one() / T::from_usize_lossy(m);
        let nonneg = f.iter().all(|&v| v >= T::zero());
        for (o, b) in out.iter_mut().zip(&self.buffer) {
            let v = b.re * norm;
            *o = if nonneg { v.max(T::zero()) } else { v };
        }
        Ok(())
    }

    pub fn apply(&mut self, f: &Field<T>, t: T, generator: Generator) -> Result<Field<T>> {
        let mut out = Field::zeros(self.spec);
        self.apply_into(f, t, generator, &mut out)?;
        Ok(out)
    }
}

/// `exp(tA) f` through the discrete Laplacian's exact spectrum.
pub fn apply_heat_semigroup<T: Real>(f: &Field<T>, t: T, spec: GridSpec) -> Result<Field<T>> {
    HeatSemigroup::new(spec).apply(f, t, Generator::Discrete)
}

/// `exp(tA) f` computed directly with the stencil: `t` is split into substeps
/// with `‖τA‖∞ ≤ 1` and each substep's exponential is summed as a Taylor
/// series. Independent of the FFT route; used to cross-check it.
pub fn apply_heat_semigroup_stencil<T: Real>(f: &Field<T>, t: T, spec: GridSpec) -> Result<Field<T>> {
    spec.check(f)?;
    if !(t >= T::zero()) {
        return Err(domain(format!("semigroup time must be >= 0, got {t}")));
    }
    let h = spec.h::<T>();
    let norm_a = T::lit(2.0) / (h * h);
    let substeps = (t * norm_a).ceil().to_usize().unwrap_or(1).max(1);
    let tau = t / T::from_usize_lossy(substeps);
    let inv_two_h2 = T::one() / (T::lit(2.0) * h * h);

    let mut acc = f.to_vec();
    let mut term = vec![T::zero(); acc.len()];
    let mut next = vec![T::zero(); acc.len()];
    let tiny = T::lit(1e-18);
    for _ in 0..substeps {
        term.copy_from_slice(&acc);
        let scale = acc.iter().fold(T::zero(), |a, &b| a.max(b.abs()));
        for k in 1..80 {
            laplacian_into(&term, &mut next, inv_two_h2);
            let c = tau / T::from_usize_lossy(k);
            let mut biggest = T::zero();
            for (t_i, n_i) in term.iter_mut().zip(&next) {
                *t_i = *n_i * c;
                biggest = biggest.max(t_i.abs());
            }
            for (a, t_i) in acc.iter_mut().zip(&term) {
                *a += *t_i;
            }
            if biggest <= tiny * scale {
                break;
            }
        }
    }
    Ok(Field::from_vec(acc))
}

/// Continuum heat kernel `p_t(x)` on the unit circle.
///
/// Uses the image sum `Σ_k (2πt)^{-1/2} e^{-(x+k)²/(2t)}` for small `t` and the
/// Fourier series `1 + 2 Σ_{n≥1} e^{-2π²n²t} cos(2πnx)` otherwise.
pub fn heat_kernel<T: Real>(t: T, x: T) -> Result<T> {
    if !(t > T::zero()) {
        return Err(domain(format!("heat kernel needs t > 0, got {t}")));
    }
    let tol = T::lit(HEAT_KERNEL_TOLERANCE);
    let y = x - x.floor();
    let two = T::lit(2.0);
    if t < T::lit(HEAT_KERNEL_CROSSOVER) {
        let amp = (two * T::PI() * t).sqrt().recip();
        let image = |k: i64| {
            let d = y + T::lit(k as f64);
            amp * (-(d * d) / (two * t)).exp()
        };
        let mut total = image(0) + image(-1);
        let mut k = 1;
        loop {
            let up = image(k);
            let down = image(-k - 1);
            total += up + down;
            if up < tol && down < tol {
                break;
            }
            k += 1;
        }
        Ok(total)
    } else {
        let mut total = T::one();
        let mut n = 1i64;
        loop {
            let nf = T::lit(n as f64);
            let decay = (-two * T::PI() * T::PI() * nf * nf * t).exp();
            if decay < tol {
                break;
            }
            total += two * decay * (two * T::PI() * nf * y).cos();
            n += 1;
        }
        Ok(total.max(T::zero()))
    }
}

/// Prefactored solver for the symmetric circulant tridiagonal system with
/// diagonal `diag` and all four off-diagonal / corner entries equal to `off`.
///
/// Uses the Sherman–Morrison reduction to a plain tridiagonal Thomas solve.
#[derive(Clone, Debug)]
pub struct CyclicTridiagonal<T> {
    off: T,
    sm_gamma: T,
    first_diag: T,
    inv_denom: Vec<T>,
    c_prime: Vec<T>,
    z: Vec<T>,
    correction_denom: T,
}

impl<T: Real> CyclicTridiagonal<T> {
    pub fn new(m: usize, diag: T, off: T) -> Result<Self> {
        if m < 3 {
            return Err(config("cyclic tridiagonal solve needs at least 3 unknowns"));
        }
        if diag.abs() <= T::lit(2.0) * off.abs() {
            return Err(config("cyclic tridiagonal system is not strictly diagonally dominant"));
        }
        let sm_gamma = -diag;
        let mut bb = vec![diag; m];
        bb[0] = diag - sm_gamma;
        bb[m - 1] = diag - off * off / sm_gamma;

        let mut inv_denom = vec![T::zero(); m];
        let mut c_prime = vec![T::zero(); m];
        inv_denom[0] = bb[0].recip();
        c_prime[0] = off * inv_denom[0];
        for i in 1..m {
            let denom = bb[i] - off * c_prime[i - 1];
            inv_denom[i] = denom.recip();
            c_prime[i] = off * inv_denom[i];
        }
        let mut solver = Self {
            off,
            sm_gamma,
            first_diag: bb[0],
            inv_denom,
            c_prime,
            z: vec![T::zero(); m],
            correction_denom: T::one(),
        };
        let mut z = vec![T::zero(); m];
        z[0] = sm_gamma;
        z[m - 1] = off;
        solver.thomas(&mut z);
        solver.correction_denom = T::one() + z[0] + off * z[m - 1] / sm_gamma;
        solver.z = z;
        debug_assert!(solver.first_diag != T::zero());
        Ok(solver)
    }

    fn thomas(&self, x: &mut [T]) {
        let m = x.len();
        x[0] = x[0] * self.inv_denom[0];
        for i in 1..m {
            x[i] = (x[i] - self.off * x[i - 1]) * self.inv_denom[i];
        }
        for i in (0..m - 1).rev() {
            x[i] = x[i] - self.c_prime[i] * x[i + 1];
        }
    }

    /// Overwrites `x` (the right-hand side) with the solution.
    pub fn solve_in_place(&self, x: &mut [T]) {
        let m = x.len();
        debug_assert_eq!(m, self.z.len());
        self.thomas(x);
        let fact = (x[0] + self.off * x[m - 1] / self.sm_gamma) / self.correction_denom;
        for (xi, &zi) in x.iter_mut().zip(&self.z) {
            *xi = *xi - fact * zi;
        }
    }
}
