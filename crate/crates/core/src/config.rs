//! Run configuration: a flat `key = value` file with dotted keys.
//!
//! Lines starting with `#` are comments. Every key has a default, and
//! unknown keys are rejected. Lists are comma separated; charges are
//! `x,y,z,q` groups separated by `;`, slabs are `t0:t1` pairs.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::Serialize;

use crate::connection::{DEFAULT_QUADRATURE_NODES, DEFAULT_T_RANGE};
use crate::curvature::CurvatureMode;
use crate::diffgeo::{DiffMode, Sampler};
use crate::error::{Error, Result};
use crate::hk_bases::{GibbonsHawkingSpec, PointCharge};
use crate::obstructions::LatticeData;
use crate::qk::DEFAULT_RHO_RATE;
use crate::volume::VolumeGrid;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaseType {
    Flat,
    GibbonsHawking,
    Product,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConnectionMode {
    Explicit,
    Poincare,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Tolerances {
    pub triple: f64,
    pub connection: f64,
    pub hermitian: f64,
    pub ideal: f64,
    pub einstein: f64,
    pub fiber: f64,
    pub density: f64,
    pub volume: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub m: usize,
    pub rho_rate: f64,
    pub t_range: [f64; 2],
    pub base_type: BaseType,
    /// Factor types for `product` bases, one per quaternionic dimension of
    /// the base.
    pub factors: Vec<BaseType>,
    pub sigma2_flipped: bool,
    pub gibbons_hawking: GibbonsHawkingSpec,
    pub connection_mode: ConnectionMode,
    pub quadrature_nodes: usize,
    pub samples: Sampler,
    pub engine_mode: DiffMode,
    pub curvature_samples: usize,
    pub curvature_mode: CurvatureMode,
    pub tolerances: Tolerances,
    pub volume_grid: VolumeGrid,
    pub volume_t_range: [f64; 2],
    pub volume_slabs: Vec<[f64; 2]>,
    pub t_sequence: Vec<f64>,
    pub lattice: LatticeData,
    pub report_path: Option<PathBuf>,
    pub slab_csv_path: Option<PathBuf>,
}

/// Every accepted key, in documentation order.
pub const KEYS: &[&str] = &[
    "model.m",
    "model.rho_rate",
    "model.t_range",
    "base.type",
    "base.factors",
    "base.sigma2_flipped",
    "base.constant",
    "base.charges",
    "base.box",
    "base.fiber_period",
    "connection.mode",
    "connection.quadrature_nodes",
    "samples.count",
    "samples.seed",
    "engine.mode",
    "curvature.samples",
    "curvature.mode",
    "tolerances.triple",
    "tolerances.connection",
    "tolerances.hermitian",
    "tolerances.ideal",
    "tolerances.einstein",
    "tolerances.fiber",
    "tolerances.density",
    "tolerances.volume",
    "volume.grid",
    "volume.panel_width",
    "volume.fiber_grid",
    "volume.base_grid",
    "volume.t_range",
    "volume.slabs",
    "volume.T_sequence",
    "obstructions.gram",
    "obstructions.degree",
    "output.report",
    "output.slab_csv",
];

/// Raw key/value pairs; later insertions win.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConfigMap(BTreeMap<String, String>);

impl ConfigMap {
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = ConfigMap::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            map.set(k.trim(), v.trim())?;
        }
        Ok(map)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !KEYS.contains(&key) {
            return Err(Error::Config(format!("unknown key `{key}`")));
        }
        self.0.insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }
}

fn bad(key: &str, value: &str) -> Error {
    Error::Config(format!("invalid value `{value}` for `{key}`"))
}

fn scalar<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| bad(key, value))
}

fn floats(key: &str, value: &str) -> Result<Vec<f64>> {
    value
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| scalar(key, s))
        .collect()
}

fn pair(key: &str, value: &str) -> Result<[f64; 2]> {
    let v = floats(key, value)?;
    match v[..] {
        [a, b] if a < b => Ok([a, b]),
        _ => Err(bad(key, value)),
    }
}

fn parse_base(key: &str, value: &str) -> Result<BaseType> {
    match value.trim() {
        "flat" => Ok(BaseType::Flat),
        "gibbons-hawking" => Ok(BaseType::GibbonsHawking),
        "product" => Ok(BaseType::Product),
        _ => Err(bad(key, value)),
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::from_map(&ConfigMap::default()).expect("defaults are valid")
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        Self::from_map(&ConfigMap::parse(text)?)
    }

    pub fn from_map(map: &ConfigMap) -> Result<Self> {
        let get = |k: &str| map.get(k);
        let num = |k: &str, d: f64| get(k).map_or(Ok(d), |v| scalar::<f64>(k, v));
        let int = |k: &str, d: usize| get(k).map_or(Ok(d), |v| scalar::<usize>(k, v));

        let m = int("model.m", 2)?;
        let base_type =
            get("base.type").map_or(Ok(BaseType::Flat), |v| parse_base("base.type", v))?;
        let factors = match get("base.factors") {
            Some(v) => v
                .split(',')
                .map(|s| parse_base("base.factors", s))
                .collect::<Result<Vec<_>>>()?,
            None => vec![BaseType::Flat; m.saturating_sub(1)],
        };
        let engine_mode = match get("engine.mode").unwrap_or("exact") {
            "exact" => DiffMode::Exact,
            "fd" => DiffMode::FiniteDifference,
            v => return Err(bad("engine.mode", v)),
        };
        let curvature_mode = match get("curvature.mode").unwrap_or("both") {
            "exact" => CurvatureMode::Exact,
            "fd" => CurvatureMode::Fd,
            "both" => CurvatureMode::Both,
            v => return Err(bad("curvature.mode", v)),
        };
        let connection_mode = match get("connection.mode") {
            Some("explicit") => ConnectionMode::Explicit,
            Some("poincare") => ConnectionMode::Poincare,
            Some(v) => return Err(bad("connection.mode", v)),
            None if base_type == BaseType::GibbonsHawking
                || (base_type == BaseType::Product
                    && factors.iter().any(|f| *f != BaseType::Flat)) =>
            {
                ConnectionMode::Poincare
            }
            None => ConnectionMode::Explicit,
        };

        let mut gh = GibbonsHawkingSpec::default();
        gh.constant = num("base.constant", gh.constant)?;
        gh.fiber_period = num("base.fiber_period", gh.fiber_period)?;
        if let Some(v) = get("base.charges") {
            gh.charges = v
                .split(';')
                .filter(|s| !s.trim().is_empty())
                .map(|c| match floats("base.charges", c)?[..] {
                    [x, y, z, q] => Ok(PointCharge {
                        position: [x, y, z],
                        strength: q,
                    }),
                    _ => Err(bad("base.charges", c)),
                })
                .collect::<Result<_>>()?;
        }
        if let Some(v) = get("base.box") {
            match floats("base.box", v)?[..] {
                [a, b, c, d, e, f] if a < b && c < d && e < f => {
                    gh.spatial_box = [[a, b], [c, d], [e, f]]
                }
                _ => return Err(bad("base.box", v)),
            }
        }

        let explicit = connection_mode == ConnectionMode::Explicit;
        let fd = engine_mode == DiffMode::FiniteDifference;
        let tolerances = Tolerances {
            triple: num("tolerances.triple", 1e-8)?,
            connection: num("tolerances.connection", if explicit { 1e-8 } else { 1e-6 })?,
            hermitian: num("tolerances.hermitian", 1e-9)?,
            ideal: num("tolerances.ideal", if fd { 1e-4 } else { 1e-8 })?,
            einstein: num(
                "tolerances.einstein",
                if curvature_mode == CurvatureMode::Fd {
                    1e-2
                } else {
                    1e-5
                },
            )?,
            fiber: num("tolerances.fiber", 1e-6)?,
            density: num("tolerances.density", 1e-10)?,
            volume: num("tolerances.volume", 1e-6)?,
        };

        let volume_grid = VolumeGrid {
            t_nodes: int("volume.grid", 16)?,
            panel_width: num("volume.panel_width", 0.5)?,
            fiber_nodes: int("volume.fiber_grid", 2)?,
            base_nodes: int("volume.base_grid", 2)?,
        };
        let volume_slabs = match get("volume.slabs") {
            Some(v) => v
                .split(',')
                .filter(|s| !s.trim().is_empty())
                .map(|s| {
                    let (a, b) = s.split_once(':').ok_or_else(|| bad("volume.slabs", s))?;
                    pair("volume.slabs", &format!("{a},{b}"))
                })
                .collect::<Result<_>>()?,
            None => vec![[-1.0, 0.0], [0.0, 1.0], [-1.0, 1.0]],
        };
        let gram = match get("obstructions.gram") {
            Some(v) => match v
                .split(',')
                .map(|s| scalar::<i64>("obstructions.gram", s))
                .collect::<Result<Vec<_>>>()?[..]
            {
                [a, b, c, d] => [[a, b], [c, d]],
                _ => return Err(bad("obstructions.gram", v)),
            },
            None => [[10, 0], [0, 10]],
        };

        let cfg = RunConfig {
            m,
            rho_rate: num("model.rho_rate", DEFAULT_RHO_RATE)?,
            t_range: get("model.t_range")
                .map_or(Ok(DEFAULT_T_RANGE), |v| pair("model.t_range", v))?,
            base_type,
            factors,
            sigma2_flipped: get("base.sigma2_flipped")
                .map_or(Ok(false), |v| scalar("base.sigma2_flipped", v))?,
            gibbons_hawking: gh,
            connection_mode,
            quadrature_nodes: int("connection.quadrature_nodes", DEFAULT_QUADRATURE_NODES)?,
            samples: Sampler::new(
                get("samples.seed").map_or(Ok(7), |v| scalar("samples.seed", v))?,
                int("samples.count", 100)?,
            ),
            engine_mode,
            curvature_samples: int("curvature.samples", 20)?,
            curvature_mode,
            tolerances,
            volume_grid,
            volume_t_range: get("volume.t_range")
                .map_or(Ok([0.0, 0.5]), |v| pair("volume.t_range", v))?,
            volume_slabs,
            t_sequence: get("volume.T_sequence").map_or(Ok(vec![1.0, 2.0, 4.0, 8.0]), |v| {
                floats("volume.T_sequence", v)
            })?,
            lattice: LatticeData {
                gram,
                degree: int("obstructions.degree", 10)? as i64,
            },
            report_path: get("output.report").map(PathBuf::from),
            slab_csv_path: get("output.slab_csv").map(PathBuf::from),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.m < 2 {
            return fail(format!("model.m must be at least 2, got {}", self.m));
        }
        if self.base_type == BaseType::Product && self.factors.len() != self.m - 1 {
            return fail(format!(
                "base.factors lists {} factors but model.m = {} needs {}",
                self.factors.len(),
                self.m,
                self.m - 1
            ));
        }
        if self.base_type == BaseType::Product && self.factors.contains(&BaseType::Product) {
            return fail("base.factors cannot contain `product`".into());
        }
        if self.samples.count == 0 || self.curvature_samples == 0 {
            return fail("sample counts must be at least 1".into());
        }
        if self.quadrature_nodes == 0 {
            return fail("connection.quadrature_nodes must be at least 1".into());
        }
        let t = &self.tolerances;
        for (k, v) in [
            ("triple", t.triple),
            ("connection", t.connection),
            ("hermitian", t.hermitian),
            ("ideal", t.ideal),
            ("einstein", t.einstein),
            ("fiber", t.fiber),
            ("density", t.density),
            ("volume", t.volume),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return fail(format!("tolerances.{k} must be positive, got {v}"));
            }
        }
        if !(self.rho_rate.is_finite()) {
            return fail("model.rho_rate must be finite".into());
        }
        if self.connection_mode == ConnectionMode::Explicit && !self.flat_base() {
            return fail("connection.mode = explicit needs a flat base".into());
        }
        let g = &self.volume_grid;
        if g.t_nodes == 0 || g.fiber_nodes == 0 || g.base_nodes == 0 || !(g.panel_width > 0.0) {
            return fail("volume grids must be non-empty with positive panel width".into());
        }
        if self.t_sequence.is_empty()
            || self.t_sequence.iter().any(|&x| !(x > 0.0))
            || self.t_sequence.windows(2).any(|w| w[1] <= w[0])
        {
            return fail("volume.T_sequence must be positive and increasing".into());
        }
        Ok(())
    }

    /// Factor list the base is built from.
    pub fn base_factors(&self) -> Vec<BaseType> {
        match self.base_type {
            BaseType::Product => self.factors.clone(),
            t => vec![t; self.m - 1],
        }
    }

    fn flat_base(&self) -> bool {
        self.base_factors().iter().all(|f| *f == BaseType::Flat)
    }
}
