//! Experiment configuration: per-kind defaults, TOML ingestion with partial
//! overrides, command-line overrides and validation.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::error::{config, Error, Result};
use crate::lattice::{Field, GridSpec};
use crate::sode::{SodeConfig, SodeScheme};
use crate::spde::{NormIntegralSpec, SpdeConfig, SpdeScheme};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    SodeAsymptotic,
    SodeBounds,
    SpdeMartingale,
    SpdeConverge,
    BlowupScan,
    FourierCheck,
    LpNorms,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::SodeAsymptotic,
        ExperimentKind::SodeBounds,
        ExperimentKind::SpdeMartingale,
        ExperimentKind::SpdeConverge,
        ExperimentKind::BlowupScan,
        ExperimentKind::FourierCheck,
        ExperimentKind::LpNorms,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::SodeAsymptotic => "sode-asymptotic",
            ExperimentKind::SodeBounds => "sode-bounds",
            ExperimentKind::SpdeMartingale => "spde-martingale",
            ExperimentKind::SpdeConverge => "spde-converge",
            ExperimentKind::BlowupScan => "blowup-scan",
            ExperimentKind::FourierCheck => "fourier-check",
            ExperimentKind::LpNorms => "lp-norms",
        }
    }

    pub fn is_sode(self) -> bool {
        matches!(self, ExperimentKind::SodeAsymptotic | ExperimentKind::SodeBounds)
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| config(format!("unknown experiment kind `{s}`")))
    }
}

/// Time stepper for either equation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Euler,
    ExactBessel,
    Explicit,
    SemiImplicit,
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euler" => Ok(Scheme::Euler),
            "exact-bessel" => Ok(Scheme::ExactBessel),
            "explicit" => Ok(Scheme::Explicit),
            "semi-implicit" => Ok(Scheme::SemiImplicit),
            _ => Err(config(format!(
                "unknown scheme `{s}` (euler, exact-bessel, explicit, semi-implicit)"
            ))),
        }
    }
}

/// Initial data of the SPDE on the grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialCondition {
    Constant {
        value: f64,
    },
    /// `mean + amplitude · cos(2π mode x)`.
    Cosine {
        mean: f64,
        amplitude: f64,
        #[serde(default = "one_mode")]
        mode: i64,
    },
    /// All mass in one cell.
    Spike {
        cell: usize,
        mass: f64,
    },
    Values {
        values: Vec<f64>,
    },
}

fn one_mode() -> i64 {
    1
}

impl InitialCondition {
    pub fn field(&self, spec: GridSpec) -> Result<Field<f64>> {
        let f = match self {
            InitialCondition::Constant { value } => Field::constant(spec, *value),
            InitialCondition::Cosine { mean, amplitude, mode } => Field::sample(spec, |x: f64| {
                mean + amplitude * (2.0 * std::f64::consts::PI * *mode as f64 * x).cos()
            }),
            InitialCondition::Spike { cell, mass } => {
                if *cell >= spec.cells() {
                    return Err(config(format!("spike cell {cell} is off the {}-cell grid", spec.cells())));
                }
                Field::spike(spec, *cell, *mass)
            }
            InitialCondition::Values { values } => {
                let f = Field::from_vec(values.clone());
                spec.check(&f)?;
                f
            }
        };
        if !f.iter().all(|&v| v.is_finite() && v >= 0.0) {
            return Err(config("initial data must be finite and nonnegative"));
        }
        Ok(f)
    }

    /// The constant value, when the data is constant.
    pub fn constant_value(&self) -> Option<f64> {
        match self {
            InitialCondition::Constant { value } => Some(*value),
            _ => None,
        }
    }
}

/// A full experiment description. Each kind reads the fields it needs; the
/// rest keep their defaults and are echoed unchanged.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub paths: usize,
    pub gamma: f64,
    /// γ grid of `blowup-scan`.
    pub gammas: Vec<f64>,
    /// Truncation level `n`; `inf` runs untruncated.
    #[serde(serialize_with = "ser_level", deserialize_with = "de_level")]
    pub trunc: f64,
    /// Number of lattice cells.
    pub grid: usize,
    pub dt: f64,
    /// Refinement ladder of `fourier-check`, coarse to fine.
    pub dt_ladder: Vec<f64>,
    pub horizon: f64,
    pub scheme: Scheme,
    /// SODE start value.
    pub u0: f64,
    /// SPDE initial data.
    pub initial: InitialCondition,
    pub alphas: Vec<f64>,
    /// Exponents `p`; `lp-norms` integrates `‖u‖_{2p}^α`, `spde-converge`
    /// uses `p[0]` as the distance exponent (`2γ` when empty).
    pub p: Vec<f64>,
    /// Levels of the hitting bound.
    pub levels: Vec<f64>,
    /// BDG constant `c(α)` used by the quadratic-variation moment check.
    pub c_alpha: f64,
    /// Marks `c_alpha` as a guess, making that check informational.
    pub c_alpha_is_guess: bool,
    /// Steps between recorded samples of the per-path series.
    pub sample_every: usize,
    /// Coupled truncation levels `(n₁, n₂)` of `spde-converge`.
    pub pairs: Vec<[f64; 2]>,
    /// Fourier modes of the drift residual check.
    pub modes: Vec<i64>,
    /// Mode pair `(m, n)` of the covariation check.
    pub qv_modes: [i64; 2],
    /// Threshold of `sup_x u` in `blowup-scan`.
    pub exceed_level: f64,
    /// Re-run at doubled horizon, halved step or doubled truncation and
    /// compare the key estimate.
    pub stability: bool,
    pub stability_tolerance: f64,
    pub histogram_bins: usize,
    pub retain_fields: bool,
}

fn ser_level<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_infinite() && *v > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*v)
    }
}

fn de_level<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Level {
        Number(f64),
        Text(String),
    }
    match Level::deserialize(d)? {
        Level::Number(v) => Ok(v),
        Level::Text(t) if matches!(t.as_str(), "inf" | "infinity" | "none") => Ok(f64::INFINITY),
        Level::Text(t) => Err(serde::de::Error::custom(format!("invalid truncation level `{t}`"))),
    }
}

impl ExperimentConfig {
    /// Defaults of each kind.
    pub fn defaults(kind: ExperimentKind) -> Self {
        let mut c = Self {
            kind,
            seed: 20_240_601,
            paths: 10_000,
            gamma: 2.0,
            gammas: vec![1.2, 1.6, 2.0],
            trunc: 10.0,
            grid: 64,
            dt: 1e-4,
            dt_ladder: vec![4e-4, 2e-4, 1e-4],
            horizon: 0.25,
            scheme: Scheme::SemiImplicit,
            u0: 1.0,
            initial: InitialCondition::Constant { value: 1.0 },
            alphas: vec![0.5],
            p: vec![2.0],
            levels: vec![2.0, 5.0, 10.0],
            c_alpha: 1.0,
            c_alpha_is_guess: true,
            sample_every: 250,
            pairs: vec![[4.0, 8.0], [8.0, 16.0]],
            modes: vec![1],
            qv_modes: [1, -1],
            exceed_level: 100.0,
            stability: true,
            stability_tolerance: 0.10,
            histogram_bins: 40,
            retain_fields: false,
        };
        match kind {
            ExperimentKind::SodeBounds => {
                c.scheme = Scheme::Euler;
                c.horizon = 50.0;
                c.alphas = vec![0.5, 0.9];
                c.sample_every = 10_000;
            }
            ExperimentKind::SodeAsymptotic => {
                c.scheme = Scheme::ExactBessel;
                c.horizon = 1e4;
                c.paths = 100_000;
            }
            ExperimentKind::SpdeMartingale => {}
            ExperimentKind::SpdeConverge => {
                c.paths = 1_000;
                c.grid = 32;
                c.p = Vec::new();
            }
            ExperimentKind::BlowupScan => {
                c.paths = 500;
                c.trunc = f64::INFINITY;
                c.horizon = 0.5;
                c.sample_every = 500;
            }
            ExperimentKind::FourierCheck => {
                c.paths = 1_000;
                c.grid = 32;
                c.horizon = 0.1;
                c.initial = InitialCondition::Cosine {
                    mean: 1.0,
                    amplitude: 1.0,
                    mode: 1,
                };
            }
            ExperimentKind::LpNorms => {
                c.paths = 2_000;
                c.alphas = vec![0.25];
            }
        }
        c
    }

    /// Reads a TOML file whose keys override the defaults of its kind.
    /// `kind` may come from the file, from the caller, or both if they agree.
    pub fn from_toml_str(text: &str, kind: Option<ExperimentKind>) -> Result<Self> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| config(format!("malformed configuration: {e}")))?;
        let file_kind = match table.get("kind") {
            None => None,
            Some(toml::Value::String(s)) => Some(s.parse::<ExperimentKind>()?),
            Some(other) => return Err(config(format!("`kind` must be a string, got {other}"))),
        };
        let kind = match (file_kind, kind) {
            (Some(a), Some(b)) if a != b => {
                return Err(config(format!("configuration is for `{a}` but `{b}` was requested")))
            }
            (Some(k), _) | (None, Some(k)) => k,
            (None, None) => return Err(config("configuration names no experiment `kind`")),
        };
        let mut merged = toml::Table::try_from(Self::defaults(kind))
            .map_err(|e| config(format!("cannot encode defaults: {e}")))?;
        for (key, value) in table {
            if !merged.contains_key(&key) {
                return Err(config(format!("unknown configuration key `{key}`")));
            }
            merged.insert(key, value);
        }
        let cfg: Self = toml::Value::Table(merged)
            .try_into()
            .map_err(|e: toml::de::Error| config(format!("invalid configuration: {e}")))?;
        Ok(cfg)
    }

    pub fn from_toml_file(path: &Path, kind: Option<ExperimentKind>) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text, kind)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configurations are plain data")
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("configurations are plain data");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = o.paths {
            self.paths = v;
        }
        if let Some(v) = o.gamma {
            self.gamma = v;
        }
        if let Some(v) = o.trunc {
            self.trunc = v;
        }
        if let Some(v) = o.grid {
            self.grid = v;
        }
        if let Some(v) = o.dt {
            self.dt = v;
        }
        if let Some(v) = o.horizon {
            self.horizon = v;
        }
        if let Some(v) = &o.alpha {
            self.alphas = v.clone();
        }
        if let Some(v) = &o.p {
            self.p = v.clone();
        }
        if let Some(v) = o.scheme {
            self.scheme = v;
        }
        if o.retain_fields {
            self.retain_fields = true;
        }
    }

    pub fn grid_spec(&self) -> Result<GridSpec> {
        GridSpec::new(self.grid)
    }

    /// The SODE configuration of the SODE kinds.
    pub fn sode_config(&self) -> Result<SodeConfig<f64>> {
        let scheme = match self.scheme {
            Scheme::Euler => SodeScheme::Euler,
            Scheme::ExactBessel => SodeScheme::ExactBessel,
            other => return Err(config(format!("{other:?} is not a SODE scheme"))),
        };
        let mut c = SodeConfig::new(self.gamma, self.u0, self.dt, self.horizon);
        c.scheme = scheme;
        c.record_every = self.sample_every;
        c.validate()?;
        Ok(c)
    }

    /// The SPDE configuration of the SPDE kinds at `gamma` and `trunc`.
    pub fn spde_config_at(&self, gamma: f64, trunc: f64) -> Result<SpdeConfig<f64>> {
        let scheme = match self.scheme {
            Scheme::Explicit => SpdeScheme::Explicit,
            Scheme::SemiImplicit => SpdeScheme::SemiImplicit,
            other => return Err(config(format!("{other:?} is not an SPDE scheme"))),
        };
        let spec = self.grid_spec()?;
        let mut c = SpdeConfig::new(gamma, trunc, spec, self.dt, self.horizon, self.initial.field(spec)?);
        c.scheme = scheme;
        c.sample_every = self.sample_every;
        c.retain_fields = self.retain_fields;
        c.validate()?;
        Ok(c)
    }

    pub fn spde_config(&self) -> Result<SpdeConfig<f64>> {
        self.spde_config_at(self.gamma, self.trunc)
    }

    /// `L^{2p}` norm-integral specs of `lp-norms`.
    pub fn norm_integrals(&self) -> Vec<NormIntegralSpec<f64>> {
        self.p
            .iter()
            .flat_map(|&p| self.alphas.iter().map(move |&alpha| NormIntegralSpec { p: 2.0 * p, alpha }))
            .collect()
    }

    /// Rejects configurations the targeted modules cannot run.
    pub fn validate(&self) -> Result<()> {
        if self.paths == 0 {
            return Err(config("paths must be at least 1"));
        }
        if u32::try_from(self.paths).is_err() {
            return Err(config("paths must fit in 32 bits"));
        }
        if self.sample_every == 0 {
            return Err(config("sample_every must be at least 1"));
        }
        let in_unit = |a: f64| a > 0.0 && a < 1.0;
        if let Some(a) = self.alphas.iter().find(|&&a| !in_unit(a)) {
            return Err(config(format!("alpha must lie in (0, 1), got {a}")));
        }
        if !(self.stability_tolerance > 0.0) {
            return Err(config("stability_tolerance must be positive"));
        }
        match self.kind {
            ExperimentKind::SodeBounds => {
                self.sode_config()?;
                if self.scheme != Scheme::Euler {
                    return Err(config("sode-bounds needs the euler scheme (running maxima)"));
                }
                if self.levels.is_empty() || self.levels.iter().any(|&n| !(n > 0.0)) {
                    return Err(config("levels must be positive and nonempty"));
                }
                if !(self.c_alpha > 0.0) {
                    return Err(config("c_alpha must be positive"));
                }
            }
            ExperimentKind::SodeAsymptotic => {
                self.sode_config()?;
                if self.histogram_bins == 0 {
                    return Err(config("histogram_bins must be at least 1"));
                }
            }
            ExperimentKind::SpdeMartingale => {
                self.spde_config()?;
                if !self.trunc.is_finite() {
                    return Err(config("spde-martingale needs a finite truncation level"));
                }
                if !(self.c_alpha > 0.0) {
                    return Err(config("c_alpha must be positive"));
                }
            }
            ExperimentKind::SpdeConverge => {
                if self.pairs.is_empty() {
                    return Err(config("spde-converge needs at least one pair"));
                }
                for &[n1, n2] in &self.pairs {
                    if !(n1 > 0.0 && n1 <= n2 && n2.is_finite()) {
                        return Err(config(format!("pair ({n1}, {n2}) needs 0 < n1 <= n2 < inf")));
                    }
                    self.spde_config_at(self.gamma, n2)?;
                }
                if self.alphas.is_empty() {
                    return Err(config("spde-converge needs an alpha"));
                }
                if let Some(&p) = self.p.first() {
                    if !(p >= 1.0) {
                        return Err(config(format!("distance exponent must be >= 1, got {p}")));
                    }
                }
            }
            ExperimentKind::BlowupScan => {
                if self.gammas.is_empty() {
                    return Err(config("blowup-scan needs a gamma grid"));
                }
                if self.gammas.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(config("gammas must be strictly increasing"));
                }
                for &g in &self.gammas {
                    self.spde_config_at(g, self.trunc)?;
                }
                if !(self.exceed_level > 0.0) {
                    return Err(config("exceed_level must be positive"));
                }
            }
            ExperimentKind::FourierCheck => {
                if self.dt_ladder.is_empty() || self.dt_ladder.windows(2).any(|w| !(w[1] < w[0])) {
                    return Err(config("dt_ladder must be nonempty and strictly decreasing"));
                }
                for &dt in &self.dt_ladder {
                    let mut c = self.clone();
                    c.dt = dt;
                    c.spde_config()?;
                }
                let half = (self.grid / 2) as u64;
                let too_high = |n: i64| n.unsigned_abs() >= half;
                if self.modes.iter().any(|&n| too_high(n))
                    || too_high(self.qv_modes[0])
                    || too_high(self.qv_modes[1])
                    || too_high(self.qv_modes[0] + self.qv_modes[1])
                {
                    return Err(config("fourier modes must be below half the grid size"));
                }
            }
            ExperimentKind::LpNorms => {
                self.spde_config()?;
                if self.p.is_empty() || self.p.iter().any(|&p| !(p >= 0.5)) {
                    return Err(config("lp-norms needs exponents p >= 1/2 (norm order 2p >= 1)"));
                }
                if self.alphas.is_empty() {
                    return Err(config("lp-norms needs an alpha"));
                }
            }
        }
        Ok(())
    }
}

/// Values given on the command line; `None` keeps the configured value.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub paths: Option<usize>,
    pub gamma: Option<f64>,
    pub trunc: Option<f64>,
    pub grid: Option<usize>,
    pub dt: Option<f64>,
    pub horizon: Option<f64>,
    pub alpha: Option<Vec<f64>>,
    pub p: Option<Vec<f64>>,
    pub scheme: Option<Scheme>,
    pub retain_fields: bool,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        for kind in ExperimentKind::ALL {
            ExperimentConfig::defaults(kind).validate().unwrap();
            assert_eq!(kind.name().parse::<ExperimentKind>().unwrap(), kind);
        }
    }

    #[test]
    fn partial_toml_overrides_defaults() {
        let c = ExperimentConfig::from_toml_str("kind = \"lp-norms\"\npaths = 7\nhorizon = 1\n", None).unwrap();
        assert_eq!(c.paths, 7);
        assert_eq!(c.horizon, 1.0);
        assert_eq!(c.alphas, vec![0.25]);
        let c = ExperimentConfig::from_toml_str("trunc = \"inf\"", Some(ExperimentKind::BlowupScan)).unwrap();
        assert!(c.trunc.is_infinite());
        assert!(ExperimentConfig::from_toml_str("kind = \"lp-norms\"\nbogus = 1", None).is_err());
        assert!(ExperimentConfig::from_toml_str("paths = 7", None).is_err());
        assert!(ExperimentConfig::from_toml_str("kind = \"lp-norms\"", Some(ExperimentKind::SodeBounds)).is_err());
        assert!(ExperimentConfig::from_toml_str("kind = \"lp-norms\"\npaths = ", None).is_err());
    }

    #[test]
    fn toml_and_json_round_trip() {
        for kind in ExperimentKind::ALL {
            let c = ExperimentConfig::defaults(kind);
            let back = ExperimentConfig::from_toml_str(&c.to_toml_string(), None).unwrap();
            assert_eq!(back, c);
            let json = serde_json::to_string(&c).unwrap();
            assert_eq!(serde_json::from_str::<ExperimentConfig>(&json).unwrap(), c);
        }
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut c = ExperimentConfig::defaults(ExperimentKind::SpdeMartingale);
        c.paths = 0;
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::defaults(ExperimentKind::SodeBounds);
        c.gamma = 1.0;
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::defaults(ExperimentKind::SpdeMartingale);
        c.scheme = Scheme::Explicit;
        assert!(c.validate().is_ok());
        c.dt = 1e-3;
        assert!(c.validate().is_err(), "dt above the explicit limit");
        let mut c = ExperimentConfig::defaults(ExperimentKind::SpdeConverge);
        c.pairs = vec![[8.0, 4.0]];
        assert!(c.validate().is_err());
    }

    #[test]
    fn overrides_apply() {
        let mut c = ExperimentConfig::defaults(ExperimentKind::SpdeMartingale);
        let h = c.hash();
        c.apply(&Overrides {
            seed: Some(7),
            alpha: Some(vec![0.3]),
            ..Default::default()
        });
        assert_eq!((c.seed, c.alphas.clone()), (7, vec![0.3]));
        assert_ne!(c.hash(), h);
    }
}
