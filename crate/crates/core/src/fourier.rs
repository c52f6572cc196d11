//! Fourier-coefficient diagnostics: coefficient drift residuals, the
//! covariation of the coefficient martingales, and the functional `F_m`.
//!
//! Coefficients use the basis of the circle of length one,
//! `λ_n = ∫ e^{−i2πnx} u(x) dx ≈ h Σ_x u(x) e^{−i2πn x h}`.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{config, domain, Error, Result};
use crate::lattice::GridSpec;
use crate::martingale_checks::{CheckReport, CheckRow, Verdict, SIGMA_MARGIN};
use crate::noise::RecordedSlabs;
use crate::scalar::{Power, Real};
use crate::spde::{simulate_with, SpdeConfig, StepObserver, Trajectory};
use crate::stats::{mean, stderr};

/// Relative tolerance below which negative reconstruction values are clamped.
pub const RECONSTRUCTION_TOLERANCE: f64 = 1e-9;

/// `e^{−i2πk/m}` for `k = 0..m`, so mode `n` at cell `x` uses index `n·x mod m`.
#[derive(Clone, Debug)]
pub struct CharacterTable<T> {
    roots: Vec<Complex<T>>,
}

impl<T: Real> CharacterTable<T> {
    pub fn new(spec: GridSpec) -> Self {
        let m = spec.cells();
        let two_pi = T::lit(2.0) * T::PI();
        let roots = (0..m)
            .map(|k| {
                let a = -two_pi * T::from_usize_lossy(k) / T::from_usize_lossy(m);
                Complex::new(a.cos(), a.sin())
            })
            .collect();
        Self { roots }
    }

    /// `e^{−i2π n x h}`.
    #[inline]
    pub fn get(&self, n: i64, x: usize) -> Complex<T> {
        let m = self.roots.len() as i64;
        self.roots[((n * x as i64).rem_euclid(m)) as usize]
    }

    /// `h Σ_x w(x) e^{−i2π n x h}`.
    pub fn transform(&self, n: i64, w: &[T]) -> Complex<T> {
        let mut acc = Complex::new(T::zero(), T::zero());
        for (x, &v) in w.iter().enumerate() {
            acc = acc + self.get(n, x) * v;
        }
        let h = T::one() / T::from_usize_lossy(self.roots.len());
        acc * h
    }
}

/// Coefficients `λ_{−n_max}, …, λ_{n_max}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Coefficients<T> {
    pub n_max: usize,
    values: Vec<Complex<T>>,
}

impl<T: Real> Coefficients<T> {
    /// Builds from nonnegative modes `0..=n_max`, filling the rest by conjugation.
    pub fn from_nonnegative(nonneg: &[Complex<T>]) -> Result<Self> {
        let n_max = nonneg
            .len()
            .checked_sub(1)
            .ok_or_else(|| config("need at least the zero mode"))?;
        let mut values = Vec::with_capacity(2 * n_max + 1);
        values.extend(nonneg[1..].iter().rev().map(|c| c.conj()));
        values.extend_from_slice(nonneg);
        Ok(Self { n_max, values })
    }

    pub fn get(&self, n: i64) -> Option<Complex<T>> {
        let i = n + self.n_max as i64;
        (0..self.values.len() as i64)
            .contains(&i)
            .then(|| self.values[i as usize])
    }

    /// `(n, λ_n)` in ascending `n`.
    pub fn iter(&self) -> impl Iterator<Item = (i64, Complex<T>)> + '_ {
        let off = self.n_max as i64;
        self.values.iter().enumerate().map(move |(i, &c)| (i as i64 - off, c))
    }
}

pub fn coefficients<T: Real>(u: &[T], n_max: usize, spec: GridSpec) -> Result<Coefficients<T>> {
    spec.check(u)?;
    if 2 * n_max >= spec.cells() {
        return Err(config(format!(
            "n_max = {n_max} aliases on a grid of {} cells",
            spec.cells()
        )));
    }
    let table = CharacterTable::new(spec);
    let nonneg: Vec<_> = (0..=n_max as i64).map(|n| table.transform(n, u)).collect();
    Coefficients::from_nonnegative(&nonneg)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EigenConvention {
    /// `κ_n = n²/2`.
    PaperLiteral,
    /// `κ_n = (2πn)²/2`, the decay rate of `e^{i2πnx}` under `½∂_xx`.
    TwoPi,
}

impl EigenConvention {
    pub fn kappa<T: Real>(self, n: i64) -> T {
        let n = T::lit(n as f64);
        match self {
            EigenConvention::PaperLiteral => n * n / T::lit(2.0),
            EigenConvention::TwoPi => {
                let k = T::lit(2.0) * T::PI() * n;
                k * k / T::lit(2.0)
            }
        }
    }
}

/// A single mode's coefficient over time.
#[derive(Clone, Debug, PartialEq)]
pub struct CoeffSeries<T> {
    pub mode: i64,
    pub times: Vec<T>,
    pub values: Vec<Complex<T>>,
}

/// `R(t_j) = λ(t_j) − λ(0) + κ ∫₀^{t_j} λ ds` with the trapezoid rule.
pub fn drift_residual<T: Real>(series: &CoeffSeries<T>, convention: EigenConvention) -> CoeffSeries<T> {
    let kappa: T = convention.kappa(series.mode);
    let mut out = Vec::with_capacity(series.values.len());
    let mut integral = Complex::new(T::zero(), T::zero());
    for j in 0..series.values.len() {
        if j > 0 {
            let dt = series.times[j] - series.times[j - 1];
            integral = integral + (series.values[j] + series.values[j - 1]) * (dt / T::lit(2.0));
        }
        out.push(series.values[j] - series.values[0] + integral * kappa);
    }
    CoeffSeries {
        mode: series.mode,
        times: series.times.clone(),
        values: out,
    }
}

/// [`drift_residual`] of mode `n` computed from a trajectory's retained fields.
pub fn coefficient_drift_residual<T: Real>(
    traj: &Trajectory<T>,
    n: i64,
    convention: EigenConvention,
) -> Result<CoeffSeries<T>> {
    if traj.fields.len() != traj.times.len() || traj.fields.is_empty() {
        return Err(Error::Unavailable("drift residual needs retained fields".into()));
    }
    if 2 * n.unsigned_abs() as usize >= traj.spec.cells() {
        return Err(config(format!("mode {n} exceeds the grid's resolved modes")));
    }
    let table = CharacterTable::new(traj.spec);
    let series = CoeffSeries {
        mode: n,
        times: traj.times.clone(),
        values: traj.fields.iter().map(|f| table.transform(n, f)).collect(),
    };
    Ok(drift_residual(&series, convention))
}

/// Records `λ_n` of chosen modes at every step of a run.
pub struct CoefficientRecorder<T: Real> {
    table: CharacterTable<T>,
    dt: T,
    pub series: Vec<CoeffSeries<T>>,
}

impl<T: Real> CoefficientRecorder<T> {
    pub fn new(spec: GridSpec, dt: T, modes: &[i64]) -> Self {
        Self {
            table: CharacterTable::new(spec),
            dt,
            series: modes
                .iter()
                .map(|&mode| CoeffSeries {
                    mode,
                    times: Vec::new(),
                    values: Vec::new(),
                })
                .collect(),
        }
    }

    fn record(&mut self, step: usize, u: &[T]) {
        let t = T::from_usize_lossy(step) * self.dt;
        for s in &mut self.series {
            s.times.push(t);
            s.values.push(self.table.transform(s.mode, u));
        }
    }
}

impl<T: Real> StepObserver<T> for CoefficientRecorder<T> {
    fn before_step(&mut self, step: usize, u: &[T], _g: &[T], _slab: &[T]) {
        self.record(step, u);
    }

    fn finish(&mut self, steps: usize, u: &[T]) {
        self.record(steps, u);
    }
}

/// Reconstructs `f(λ, x_j) = Σ_n λ_n e^{i2πn x_j}` on the grid, clamping
/// negative values within the relative tolerance.
pub fn reconstruct<T: Real>(lambda: &Coefficients<T>, spec: GridSpec) -> Result<Vec<T>> {
    let table = CharacterTable::<T>::new(spec);
    let mut f: Vec<T> = (0..spec.cells())
        .map(|x| {
            lambda
                .iter()
                .map(|(n, c)| (c * table.get(n, x).conj()).re)
                .fold(T::zero(), |a, b| a + b)
        })
        .collect();
    let scale = f.iter().fold(T::zero(), |a, &b| a.max(b.abs()));
    let tol = T::lit(RECONSTRUCTION_TOLERANCE) * scale;
    for v in &mut f {
        if *v < T::zero() {
            if *v < -tol {
                return Err(domain(format!(
                    "coefficients reconstruct a negative value {v} (tolerance {tol})"
                )));
            }
            *v = T::zero();
        }
    }
    Ok(f)
}

/// `F_m(f, g) = h Σ_x e^{−i2πm x h} f(x)^γ g(x)^γ` for grid fields.
pub fn f_functional_fields<T: Real>(f: &[T], g: &[T], mode: i64, gamma: T, spec: GridSpec) -> Result<Complex<T>> {
    spec.check(f)?;
    spec.check(g)?;
    let pow = Power::new(gamma);
    let w: Vec<T> = f.iter().zip(g).map(|(&a, &b)| pow.apply(a) * pow.apply(b)).collect();
    Ok(CharacterTable::new(spec).transform(mode, &w))
}

/// `F_m(λ, μ) = ∫ e^{−i2πmx} f(λ,x)^γ f(μ,x)^γ dx` on the grid.
pub fn f_functional<T: Real>(
    lambda: &Coefficients<T>,
    mu: &Coefficients<T>,
    mode: i64,
    gamma: T,
    spec: GridSpec,
) -> Result<Complex<T>> {
    let f = reconstruct(lambda, spec)?;
    let g = reconstruct(mu, spec)?;
    f_functional_fields(&f, &g, mode, gamma, spec)
}

/// Per-path covariation of the coefficient martingales of modes `(a, b)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CovariationSample<T> {
    /// `Σ_k ΔM_a ΔM_b` with `ΔM_n = h Σ_x e^{−i2πn x h} g_k ξ_k`.
    pub realized: Complex<T>,
    /// `Σ_k dt F_{a+b}(u_k, u_k)` with the truncated field `u_k ∧ n`.
    pub predicted: Complex<T>,
    /// False when every increment was zero.
    pub driven: bool,
}

/// Accumulates a [`CovariationSample`] during a run.
pub struct CovariationAccumulator<T: Real> {
    table: CharacterTable<T>,
    modes: (i64, i64),
    dt: T,
    g2: Vec<T>,
    gx: Vec<T>,
    pub sample: CovariationSample<T>,
}

impl<T: Real> CovariationAccumulator<T> {
    pub fn new(spec: GridSpec, dt: T, modes: (i64, i64)) -> Self {
        let zero = Complex::new(T::zero(), T::zero());
        Self {
            table: CharacterTable::new(spec),
            modes,
            dt,
            g2: vec![T::zero(); spec.cells()],
            gx: vec![T::zero(); spec.cells()],
            sample: CovariationSample {
                realized: zero,
                predicted: zero,
                driven: false,
            },
        }
    }
}

impl<T: Real> StepObserver<T> for CovariationAccumulator<T> {
    fn before_step(&mut self, _step: usize, _u: &[T], g: &[T], slab: &[T]) {
        for ((g2, gx), (&gv, &xi)) in self.g2.iter_mut().zip(&mut self.gx).zip(g.iter().zip(slab)) {
            *g2 = gv * gv;
            *gx = gv * xi;
        }
        let (a, b) = self.modes;
        let da = self.table.transform(a, &self.gx);
        let db = self.table.transform(b, &self.gx);
        if da.norm_sqr() > T::zero() || db.norm_sqr() > T::zero() {
            self.sample.driven = true;
        }
        self.sample.realized = self.sample.realized + da * db;
        self.sample.predicted = self.sample.predicted + self.table.transform(a + b, &self.g2) * self.dt;
    }
}

/// Replays a retained trajectory through a [`CovariationAccumulator`].
pub fn covariation_from_trajectory<T: Real>(
    traj: &Trajectory<T>,
    cfg: &SpdeConfig<T>,
    modes: (i64, i64),
) -> Result<CovariationSample<T>> {
    let slabs = traj
        .slabs
        .as_ref()
        .ok_or_else(|| Error::Unavailable("covariation needs retained slabs".into()))?;
    let mut source = RecordedSlabs { slabs: slabs.clone() };
    let mut acc = CovariationAccumulator::new(cfg.spec, cfg.dt, modes);
    let mut replay = cfg.clone();
    replay.retain_fields = false;
    replay.retain_slabs = false;
    replay.horizon = T::from_usize_lossy(traj.steps) * cfg.dt;
    simulate_with(&replay, &mut source, &mut acc)?;
    Ok(acc.sample)
}

/// Ensemble check that `E[realized − predicted] = 0` (real and imaginary
/// parts, two-sided 3σ). All-undriven ensembles are inconclusive.
pub fn qv_relation_report(samples: &[CovariationSample<f64>], modes: (i64, i64)) -> Result<CheckReport> {
    if samples.is_empty() {
        return Err(domain("covariation check: empty sample set"));
    }
    let name = format!("qv-relation({},{})", modes.0, modes.1);
    if !samples.iter().any(|s| s.driven) {
        let row = CheckRow::new("realized - predicted", 0.0, 0.0, Verdict::Inconclusive);
        return Ok(CheckReport::new(name, samples.len(), vec![row]).note("no noise: martingale parts vanish"));
    }
    let re: Vec<f64> = samples.iter().map(|s| (s.realized - s.predicted).re).collect();
    let im: Vec<f64> = samples.iter().map(|s| (s.realized - s.predicted).im).collect();
    let pred: Vec<f64> = samples.iter().map(|s| s.predicted.norm()).collect();
    let row = |label: &str, d: &[f64]| {
        let (m, se) = (mean(d), stderr(d));
        let z = if se > 0.0 { m / se } else { 0.0 };
        CheckRow::new(label, m, se, Verdict::from_bool(z.abs() <= SIGMA_MARGIN)).statistic(z)
    };
    let mut rows = vec![row("re(realized - predicted)", &re)];
    // Rounding-level imaginary parts (e.g. modes (n, −n)) carry no signal.
    if im.iter().zip(&pred).any(|(&v, &p)| v.abs() > 1e-12 * (1.0 + p)) {
        rows.push(row("im(realized - predicted)", &im));
    }
    rows.push(CheckRow::new("|predicted|", mean(&pred), stderr(&pred), Verdict::Inconclusive));
    Ok(CheckReport::new(name, samples.len(), rows))
}

/// [`qv_relation_report`] over retained trajectories.
pub fn qv_relation_check(trajs: &[Trajectory<f64>], cfg: &SpdeConfig<f64>, modes: (i64, i64)) -> Result<CheckReport> {
    let samples = trajs
        .iter()
        .map(|t| covariation_from_trajectory(t, cfg, modes))
        .collect::<Result<Vec<_>>>()?;
    qv_relation_report(&samples, modes)
}
