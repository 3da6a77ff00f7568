//! Experiment configuration: a JSON document with every key optional,
//! patched by dotted `key=value` overrides before it is deserialized.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::asymptotics::MuOptions;
use crate::error::{Error, Result};
use crate::geometry::{DomainSpec, Shape};
use crate::modular::NormVariant;
use crate::rayleigh::{Init, MinimizeOptions};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "VAREXP_OUT_DIR";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeKind {
    Rectangle,
    Disk,
    Ellipse,
    Lshape,
    Annulus,
}

/// Flat domain description, e.g. `{"shape": "disk", "r": 1, "n": 64}`.
/// Rectangles default to the unit square and disks to the unit disk; the
/// other shapes need all of their lengths.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    #[serde(default = "default_shape")]
    pub shape: ShapeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_in: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_out: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notch_w: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notch_h: Option<f64>,
    #[serde(default = "default_resolution")]
    pub n: u32,
}

fn default_shape() -> ShapeKind {
    ShapeKind::Rectangle
}

fn default_resolution() -> u32 {
    64
}

impl Default for DomainConfig {
    fn default() -> Self {
        Self {
            shape: ShapeKind::Rectangle,
            w: None,
            h: None,
            r: None,
            a: None,
            b: None,
            r_in: None,
            r_out: None,
            notch_w: None,
            notch_h: None,
            n: default_resolution(),
        }
    }
}

impl DomainConfig {
    pub fn to_spec(&self) -> Result<DomainSpec> {
        let given = [
            ("w", self.w),
            ("h", self.h),
            ("r", self.r),
            ("a", self.a),
            ("b", self.b),
            ("r_in", self.r_in),
            ("r_out", self.r_out),
            ("notch_w", self.notch_w),
            ("notch_h", self.notch_h),
        ];
        let allowed: &[&str] = match self.shape {
            ShapeKind::Rectangle => &["w", "h"],
            ShapeKind::Disk => &["r"],
            ShapeKind::Ellipse => &["a", "b"],
            ShapeKind::Lshape => &["w", "h", "notch_w", "notch_h"],
            ShapeKind::Annulus => &["r_in", "r_out"],
        };
        let name = serde_json::to_value(self.shape)?;
        for (key, v) in given {
            if v.is_some() && !allowed.contains(&key) {
                return Err(Error::Config(format!("domain.{key} does not apply to shape {name}")));
            }
        }
        let need = |key: &str, v: Option<f64>| {
            v.ok_or_else(|| Error::Config(format!("shape {name} requires domain.{key}")))
        };
        let shape = match self.shape {
            ShapeKind::Rectangle => Shape::Rectangle { w: self.w.unwrap_or(1.0), h: self.h.unwrap_or(1.0) },
            ShapeKind::Disk => Shape::Disk { r: self.r.unwrap_or(1.0) },
            ShapeKind::Ellipse => Shape::Ellipse { a: need("a", self.a)?, b: need("b", self.b)? },
            ShapeKind::Lshape => Shape::Lshape {
                w: need("w", self.w)?,
                h: need("h", self.h)?,
                notch_w: need("notch_w", self.notch_w)?,
                notch_h: need("notch_h", self.notch_h)?,
            },
            ShapeKind::Annulus => Shape::Annulus { r_in: need("r_in", self.r_in)?, r_out: need("r_out", self.r_out)? },
        };
        DomainSpec::new(shape, self.n)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitKind {
    Distance,
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub max_iter: usize,
    pub tol: f64,
    pub el_tol: f64,
    pub dirac_tol: f64,
    pub restarts: usize,
    pub seed: u64,
    pub init: InitKind,
    pub newton_steps: usize,
    pub newton_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let m = MinimizeOptions::default();
        let mu = MuOptions::default();
        Self {
            max_iter: m.max_iter,
            tol: m.tol,
            el_tol: m.el_tol,
            dirac_tol: mu.dirac_tol,
            restarts: m.restarts,
            seed: m.seed,
            init: InitKind::Distance,
            newton_steps: m.newton.max_steps,
            newton_tol: m.newton.rel_tol,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("solver.{name} must be positive and finite, got {v}")))
            }
        };
        pos("tol", self.tol)?;
        pos("el_tol", self.el_tol)?;
        pos("dirac_tol", self.dirac_tol)?;
        pos("newton_tol", self.newton_tol)?;
        if self.max_iter == 0 || self.newton_steps == 0 {
            return Err(Error::Config("solver.max_iter and solver.newton_steps must be at least 1".into()));
        }
        Ok(())
    }

    pub fn minimize_options(&self) -> MinimizeOptions {
        let mut o = MinimizeOptions {
            max_iter: self.max_iter,
            tol: self.tol,
            el_tol: self.el_tol,
            init: match self.init {
                InitKind::Distance => Init::Distance,
                InitKind::Random => Init::Random,
            },
            restarts: self.restarts,
            seed: self.seed,
            ..MinimizeOptions::default()
        };
        o.newton.max_steps = self.newton_steps;
        o.newton.rel_tol = self.newton_tol;
        o
    }

    pub fn mu_options(&self) -> MuOptions {
        let mut o = MuOptions { max_iter: self.max_iter, tol: self.tol, dirac_tol: self.dirac_tol, ..MuOptions::default() };
        o.newton.max_steps = self.newton_steps;
        o.newton.rel_tol = self.newton_tol;
        o
    }
}

/// Settings of `check-limit`. Lengths default to `3h` and `2h`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LimitConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exclusion_radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub smoothing_width: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub domain: DomainConfig,
    pub p_expr: String,
    pub q_expr: String,
    /// Field for `norm`; the boundary distance when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u_expr: Option<String>,
    /// Nodal field CSV for `norm` and `check-limit`, in place of `u_expr`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field_csv: Option<PathBuf>,
    pub norm_variant: NormVariant,
    /// Exponent multiplier `l` for `sweep-j` and `check-limit`.
    pub l: u32,
    pub solver: SolverConfig,
    pub j_list: Vec<u32>,
    pub l_list: Vec<u32>,
    pub limit: LimitConfig,
    /// Where outputs go; left out of reports so they do not depend on it.
    #[serde(skip_serializing)]
    pub out_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            domain: DomainConfig::default(),
            p_expr: "2".into(),
            q_expr: "2".into(),
            u_expr: None,
            field_csv: None,
            norm_variant: NormVariant::Weighted,
            l: 4,
            solver: SolverConfig::default(),
            j_list: vec![1, 2, 4, 8, 16, 32, 64],
            l_list: vec![4, 8, 16, 32],
            limit: LimitConfig::default(),
            out_dir: None,
        }
    }
}

impl ExperimentConfig {
    /// Reads `path` (or starts from `{}`), applies the overrides in order
    /// and deserializes the result.
    pub fn load(path: Option<&Path>, overrides: &[(String, Value)]) -> Result<Self> {
        let mut doc = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?;
                serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
            }
            None => Value::Object(Map::new()),
        };
        for (key, value) in overrides {
            apply_override(&mut doc, key, value.clone())?;
        }
        let cfg: Self = serde_json::from_value(doc).map_err(|e| Error::Config(e.to_string()))?;
        cfg.solver.validate()?;
        Ok(cfg)
    }

    /// Output directory: the config value, then the environment, then `varexp-out`.
    pub fn resolve_out_dir(&self) -> PathBuf {
        self.out_dir
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("varexp-out"))
    }
}

/// Sets `key` (dotted path) in `doc`, creating intermediate objects.
pub fn apply_override(doc: &mut Value, key: &str, parsed: Value) -> Result<()> {
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(Error::Config(format!("malformed override key `{key}`")));
    }
    let mut cur = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (k, part) in parts.iter().enumerate() {
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| Error::Config(format!("cannot set `{key}`: `{}` is not an object", parts[..k].join("."))))?;
        if k + 1 == parts.len() {
            obj.insert(part.to_string(), parsed);
            return Ok(());
        }
        cur = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Map::new()));
    }
    unreachable!("key has at least one part")
}

/// Splits `key=value`; the value is read as JSON when it parses and as a
/// plain string otherwise.
pub fn parse_assignment(s: &str) -> Result<(String, Value)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{s}` is not of the form key=value")))?;
    let value = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
    Ok((k.trim().to_string(), value))
}
