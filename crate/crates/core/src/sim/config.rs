//! Experiment configuration, read from TOML.
//!
//! Real-valued fields accept either a number or a rational string such as
//! `"9/7"`, so exponents can be written exactly as designed.

use std::fmt;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fts_core::HolderGainParams;
use crate::plant_models::{DisturbanceKind, NoiseConfig, PendulumParams};

/// A real number that may be written as `1.5`, `3`, or `"9/7"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Real(pub f64);

impl From<f64> for Real {
    fn from(v: f64) -> Self {
        Real(v)
    }
}

fn parse_rational(s: &str) -> Option<f64> {
    let s = s.trim();
    match s.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().ok()?;
            let b: f64 = b.trim().parse().ok()?;
            (b != 0.0).then(|| a / b)
        }
        None => s.parse().ok(),
    }
}

impl<'de> Deserialize<'de> for Real {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct RealVisitor;
        impl Visitor<'_> for RealVisitor {
            type Value = Real;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number or a rational string like \"9/7\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Real, E> {
                Ok(Real(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Real, E> {
                Ok(Real(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Real, E> {
                Ok(Real(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Real, E> {
                parse_rational(v)
                    .map(Real)
                    .ok_or_else(|| E::custom(format!("cannot parse {v:?} as a real number")))
            }
        }
        d.deserialize_any(RealVisitor)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PlantConfig {
    Pendulum {
        #[serde(default)]
        params: PendulumParams,
        /// `[x, θ, ẋ, θ̇]` of the true plant at t = 0.
        initial_state: [f64; 4],
    },
    Synthetic {
        relative_degree: usize,
        /// True influence matrix, row-major.
        g: Vec<Vec<f64>>,
        /// `y_0 … y_{ν-1}`; zeros when omitted.
        #[serde(default)]
        initial_outputs: Option<Vec<Vec<f64>>>,
        disturbance: DisturbanceKind,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControlLaw {
    Basic,
    Fts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerConfig {
    pub law: ControlLaw,
    /// `s`.
    pub exponent: Real,
    /// `μ`.
    pub scale: Real,
    /// Designed influence matrix (before `g_multiplier`), row-major.
    pub g: Vec<Vec<f64>>,
    #[serde(default = "one")]
    pub g_multiplier: Real,
    /// ν used by the controller; defaults to the plant's.
    #[serde(default)]
    pub relative_degree: Option<usize>,
}

fn one() -> Real {
    Real(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObserverOrder {
    First,
    Second,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObserverConfig {
    pub order: ObserverOrder,
    /// `r`.
    pub exponent: Real,
    /// `λ`.
    pub scale: Real,
    /// Gains of the difference loop of the second-order observer; default to the above.
    #[serde(default)]
    pub delta_exponent: Option<Real>,
    #[serde(default)]
    pub delta_scale: Option<Real>,
    /// `F̂_0`; zeros when omitted.
    #[serde(default)]
    pub initial_estimate: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterConfig {
    #[serde(default = "yes")]
    pub enabled: bool,
    /// `p`.
    pub exponent: Real,
    /// `β`.
    pub scale: Real,
    /// Scalar weight `L` (times identity).
    #[serde(default)]
    pub weight: Option<Real>,
    /// Full weight matrix, row-major; overrides `weight`.
    #[serde(default)]
    pub weight_matrix: Option<Vec<Vec<f64>>>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    #[serde(default = "yes")]
    pub enabled: bool,
    #[serde(flatten)]
    pub waveform: Option<NoiseConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateConfig {
    /// Initial estimated state; its first `n` entries seed the output filter.
    pub initial_state: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DesiredConfig {
    /// Pendulum under the model-based open-loop law from `[x, θ, ẋ, θ̇]`.
    Generated {
        initial_state: [f64; 4],
        #[serde(default)]
        params: Option<PendulumParams>,
    },
    /// Constant set-point.
    Constant { value: Vec<f64> },
    /// CSV file with a header row and one column per output (extra leading `t` column allowed).
    File { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub dt: Real,
    pub t_final: Real,
    #[serde(default = "default_settle")]
    pub settle_time: Real,
    /// Steady-state band per output channel.
    #[serde(default)]
    pub band: Option<Vec<f64>>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    pub plant: PlantConfig,
    pub controller: ControllerConfig,
    pub observer: ObserverConfig,
    #[serde(default)]
    pub filter: Option<FilterConfig>,
    #[serde(default)]
    pub noise: Option<NoiseSection>,
    #[serde(default)]
    pub estimate: Option<EstimateConfig>,
    pub desired: DesiredConfig,
}

fn default_settle() -> Real {
    Real(20.0)
}

/// Default steady-state band `[0.5 m, 0.05 rad]`.
pub const DEFAULT_BAND: [f64; 2] = [0.5, 0.05];

pub(crate) fn matrix_from_rows(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if n == 0 || m == 0 || rows.iter().any(|r| r.len() != m) {
        return Err(Error::Config(format!("{what} must be a non-empty rectangular matrix")));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Config(format!("{what} must be finite")));
    }
    Ok(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

impl SimConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: SimConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml_value(v: toml::Value) -> Result<Self> {
        let cfg: SimConfig = v.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    /// Makes relative file references relative to the config's directory.
    pub fn resolve_paths(&mut self, base: &Path) {
        if let DesiredConfig::File { path } = &mut self.desired {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
    }

    /// Reference configuration reproducing the pendulum experiment.
    pub fn reference() -> Self {
        Self::from_toml_str(REFERENCE_CONFIG).expect("reference config is valid")
    }

    pub fn dt(&self) -> f64 {
        self.dt.0
    }

    pub fn t_final(&self) -> f64 {
        self.t_final.0
    }

    pub fn output_dim(&self) -> usize {
        match &self.plant {
            PlantConfig::Pendulum { .. } => 2,
            PlantConfig::Synthetic { g, .. } => g.len(),
        }
    }

    pub fn plant_relative_degree(&self) -> usize {
        match &self.plant {
            PlantConfig::Pendulum { .. } => 2,
            PlantConfig::Synthetic { relative_degree, .. } => *relative_degree,
        }
    }

    pub fn controller_g(&self) -> Result<DMatrix<f64>> {
        Ok(matrix_from_rows(&self.controller.g, "controller.g")? * self.controller.g_multiplier.0)
    }

    pub fn controller_params(&self) -> Result<HolderGainParams> {
        HolderGainParams::new(self.controller.exponent.0, self.controller.scale.0)
            .map_err(|e| Error::Config(format!("controller: {e}")))
    }

    pub fn observer_params(&self) -> Result<(HolderGainParams, HolderGainParams)> {
        let o = &self.observer;
        let main = HolderGainParams::new(o.exponent.0, o.scale.0)
            .map_err(|e| Error::Config(format!("observer: {e}")))?;
        let delta = HolderGainParams::new(
            o.delta_exponent.unwrap_or(o.exponent).0,
            o.delta_scale.unwrap_or(o.scale).0,
        )
        .map_err(|e| Error::Config(format!("observer delta gains: {e}")))?;
        Ok((main, delta))
    }

    /// Filter gains, or `None` when filtering is disabled.
    pub fn filter_params(&self) -> Result<Option<HolderGainParams>> {
        let Some(f) = self.filter.as_ref().filter(|f| f.enabled) else {
            return Ok(None);
        };
        let n = self.output_dim();
        let p = HolderGainParams::new(f.exponent.0, f.scale.0)
            .map_err(|e| Error::Config(format!("filter: {e}")))?;
        let p = match (&f.weight_matrix, f.weight) {
            (Some(rows), _) => p.with_weight(matrix_from_rows(rows, "filter.weight_matrix")?),
            (None, Some(w)) => p.with_scalar_weight(w.0, n),
            (None, None) => Ok(p),
        }
        .map_err(|e| Error::Config(format!("filter: {e}")))?;
        Ok(Some(p))
    }

    pub fn noise_config(&self) -> NoiseConfig {
        match &self.noise {
            Some(NoiseSection {
                enabled: true,
                waveform: Some(w),
            }) => w.clone(),
            Some(NoiseSection {
                enabled: true,
                waveform: None,
            }) => NoiseConfig::default(),
            _ => NoiseConfig::off(self.output_dim()),
        }
    }

    pub fn initial_output_estimate(&self) -> Option<DVector<f64>> {
        let n = self.output_dim();
        self.estimate
            .as_ref()
            .map(|e| DVector::from_iterator(n, e.initial_state.iter().copied().take(n)))
    }

    pub fn band(&self) -> Vec<f64> {
        self.band.clone().unwrap_or_else(|| {
            let n = self.output_dim();
            (0..n).map(|i| DEFAULT_BAND.get(i).copied().unwrap_or(DEFAULT_BAND[1])).collect()
        })
    }

    pub fn validate(&self) -> Result<()> {
        let cfg_err = |m: String| Err(Error::Config(m));
        if !(self.dt() > 0.0 && self.dt().is_finite()) {
            return cfg_err(format!("dt must be positive, got {}", self.dt()));
        }
        if !(self.t_final() >= 0.0 && self.t_final().is_finite()) {
            return cfg_err(format!("t_final must be >= 0, got {}", self.t_final()));
        }
        let n = self.output_dim();
        match &self.plant {
            PlantConfig::Pendulum { params, .. } => params.validate()?,
            PlantConfig::Synthetic {
                relative_degree,
                g,
                initial_outputs,
                disturbance,
            } => {
                if *relative_degree == 0 {
                    return cfg_err("plant.relative_degree must be >= 1".into());
                }
                matrix_from_rows(g, "plant.g")?;
                if disturbance.dim() != n {
                    return cfg_err("plant.disturbance dimension must match plant.g rows".into());
                }
                if let Some(outs) = initial_outputs {
                    if outs.len() != *relative_degree || outs.iter().any(|o| o.len() != n) {
                        return cfg_err("plant.initial_outputs must hold ν vectors of length n".into());
                    }
                }
            }
        }
        let g = self.controller_g()?;
        if g.nrows() != n {
            return cfg_err(format!("controller.g must have {n} rows"));
        }
        if let PlantConfig::Synthetic { g: pg, .. } = &self.plant {
            if pg.first().map_or(0, Vec::len) != g.ncols() {
                return cfg_err("controller.g and plant.g must have the same number of inputs".into());
            }
        } else if g.ncols() != 2 {
            return cfg_err("controller.g must be 2×2 for the pendulum".into());
        }
        if self.controller.relative_degree == Some(0) {
            return cfg_err("controller.relative_degree must be >= 1".into());
        }
        self.controller_params()?;
        self.observer_params()?;
        self.filter_params()?;
        let noise = self.noise_config();
        noise.validate()?;
        if noise.dim() != n {
            return cfg_err(format!("noise vectors must have length {n}"));
        }
        if let Some(init) = &self.observer.initial_estimate {
            if init.len() != n {
                return cfg_err(format!("observer.initial_estimate must have length {n}"));
            }
        }
        if let Some(e) = &self.estimate {
            if e.initial_state.len() < n {
                return cfg_err(format!("estimate.initial_state needs at least {n} entries"));
            }
        }
        if let DesiredConfig::Constant { value } = &self.desired {
            if value.len() != n {
                return cfg_err(format!("desired.value must have length {n}"));
            }
        }
        if self.band().len() != n {
            return cfg_err(format!("band must have length {n}"));
        }
        if !(self.settle_time.0 >= 0.0) {
            return cfg_err("settle_time must be >= 0".into());
        }
        crate::tracking_control::ControlGains::new(self.controller_params()?, g, 1)
            .map_err(|e| Error::Config(format!("controller.g: {e}")))?;
        Ok(())
    }
}

/// Pendulum tracking experiment with the reference gains and initial conditions.
pub const REFERENCE_CONFIG: &str = include_str!("../../configs/pendulum_reference.toml");

/// Sets `dotted.key` in a TOML document, creating intermediate tables.
pub fn set_dotted(doc: &mut toml::Value, key: &str, value: toml::Value) -> Result<()> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts
        .pop()
        .filter(|s| !s.is_empty())
        .ok_or_else(|| Error::Config(format!("empty parameter key {key:?}")))?;
    let mut node = doc;
    for p in parts {
        let table = node
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("{key}: {p} is not inside a table")))?;
        node = table
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(Default::default()));
    }
    node.as_table_mut()
        .ok_or_else(|| Error::Config(format!("{key}: parent is not a table")))?
        .insert(last.to_string(), value);
    Ok(())
}

/// Parses a sweep value: TOML literal when possible, bare string otherwise.
pub fn parse_value(s: &str) -> toml::Value {
    let wrapped = format!("v = {s}");
    match toml::from_str::<toml::Table>(&wrapped) {
        Ok(mut t) => t.remove("v").unwrap_or(toml::Value::String(s.to_string())),
        Err(_) => toml::Value::String(s.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_config_parses() {
        let cfg = SimConfig::reference();
        assert_eq!(cfg.dt(), 0.01);
        assert_eq!(cfg.t_final(), 70.0);
        assert_eq!(cfg.controller.exponent.0, 11.0 / 9.0);
        assert_eq!(cfg.observer.exponent.0, 9.0 / 7.0);
        let g = cfg.controller_g().unwrap();
        assert!((g[(0, 0)] - 0.00559).abs() < 1e-15);
        let f = cfg.filter_params().unwrap().unwrap();
        assert_eq!(f.exponent(), 7.0 / 5.0);
        assert_eq!(f.weight().unwrap()[(0, 0)], 2.1);
    }

    #[test]
    fn rationals() {
        assert_eq!(parse_rational("9/7"), Some(9.0 / 7.0));
        assert_eq!(parse_rational(" 1.5 "), Some(1.5));
        assert_eq!(parse_rational("1/0"), None);
        assert_eq!(parse_rational("abc"), None);
    }

    #[test]
    fn rejects_bad_exponent() {
        let text = REFERENCE_CONFIG.replace("exponent = \"9/7\"", "exponent = 2.5");
        assert!(matches!(SimConfig::from_toml_str(&text), Err(Error::Config(_))));
    }

    #[test]
    fn rejects_unknown_keys() {
        let text = format!("{REFERENCE_CONFIG}\n[bogus]\nx = 1\n");
        assert!(SimConfig::from_toml_str(&text).is_err());
    }

    #[test]
    fn rejects_rank_deficient_g() {
        let mut cfg = SimConfig::reference();
        cfg.controller.g = vec![vec![1.0, 2.0], vec![2.0, 4.0]];
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn dotted_keys() {
        let mut doc: toml::Value = toml::from_str(REFERENCE_CONFIG).unwrap();
        set_dotted(&mut doc, "observer.scale", parse_value("2.5")).unwrap();
        set_dotted(&mut doc, "controller.exponent", parse_value("\"6/5\"")).unwrap();
        let cfg = SimConfig::from_toml_value(doc).unwrap();
        assert_eq!(cfg.observer.scale.0, 2.5);
        assert_eq!(cfg.controller.exponent.0, 1.2);
        assert_eq!(parse_value("[1, 2]"), toml::Value::Array(vec![1.into(), 2.into()]));
        assert_eq!(parse_value("first"), toml::Value::String("first".into()));
    }
}
