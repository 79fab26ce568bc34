//! Simulation configuration.
//!
//! Flat TOML key/value files:
//!
//! ```toml
//! mesh = "torus.obj"        # relative paths resolve against the config file
//! k = 1
//! mu = 0.1
//! alpha = 16.0              # default 4(k+1)²
//! dt = 1e-3
//! t_end = 1.0
//! output_every = 10
//! seed = 1
//! tol = 1e-8                # harmonic basis drop tolerance
//! boundary = "no-slip"      # or "free-slip"
//! initial = "stokes"        # or "zero"
//! allow_inviscid = false
//! forcing = "band"          # none | band | rotation | expr
//! forcing_scale = 4e-5
//! band_direction = [0.0, 1.0, 0.0]
//! band_axis = "x"
//! band_threshold = 40.0
//! rotation_center = [0.0, 0.0, 0.0]
//! rotation_axis = [0.0, 0.0, 1.0]
//! forcing_x = "0"           # expr forcing, components over x, y, z, t
//! forcing_y = "sin(t) * x"
//! forcing_z = "0"
//! forcing_off_after = 0.5   # forcing is zero for t > forcing_off_after
//! basis = "torus.basis.json"
//! ```
//!
//! Every key has a default (`dt = 0.01`, `t_end = 1`); time-stepping keys are
//! ignored by the stationary commands. Unknown keys are errors.

pub mod expr;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use expr::Expr;

use crate::assembly::{default_penalty, BoundaryCondition, SipParameters};
use crate::error::{Error, Result};
use crate::hodge::DEFAULT_TOL;
use crate::mesh::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum InitialCondition {
    #[default]
    Stokes,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ForcingKind {
    #[default]
    None,
    Band,
    Rotation,
    Expr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    #[default]
    X,
    Y,
    Z,
}

impl Axis {
    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryKind {
    #[default]
    NoSlip,
    FreeSlip,
}

impl From<BoundaryKind> for BoundaryCondition {
    fn from(b: BoundaryKind) -> Self {
        match b {
            BoundaryKind::NoSlip => BoundaryCondition::NoSlip,
            BoundaryKind::FreeSlip => BoundaryCondition::FreeSlip,
        }
    }
}

fn default_k() -> usize {
    1
}
fn default_mu() -> f64 {
    0.1
}
fn default_output_every() -> usize {
    10
}
fn default_dt() -> f64 {
    0.01
}
fn default_t_end() -> f64 {
    1.0
}
fn default_seed() -> u64 {
    1
}
fn default_tol() -> f64 {
    DEFAULT_TOL
}
fn default_scale() -> f64 {
    1.0
}
fn default_direction() -> [f64; 3] {
    [0.0, 1.0, 0.0]
}
fn default_rotation_axis() -> [f64; 3] {
    [0.0, 0.0, 1.0]
}
fn zero_expr() -> String {
    "0".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mesh: Option<PathBuf>,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_mu")]
    pub mu: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    #[serde(default = "default_output_every")]
    pub output_every: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub boundary: BoundaryKind,
    #[serde(default)]
    pub initial: InitialCondition,
    #[serde(default)]
    pub allow_inviscid: bool,
    #[serde(default)]
    pub forcing: ForcingKind,
    #[serde(default = "default_scale")]
    pub forcing_scale: f64,
    #[serde(default = "default_direction")]
    pub band_direction: [f64; 3],
    #[serde(default)]
    pub band_axis: Axis,
    #[serde(default)]
    pub band_threshold: f64,
    #[serde(default)]
    pub rotation_center: [f64; 3],
    #[serde(default = "default_rotation_axis")]
    pub rotation_axis: [f64; 3],
    #[serde(default = "zero_expr")]
    pub forcing_x: String,
    #[serde(default = "zero_expr")]
    pub forcing_y: String,
    #[serde(default = "zero_expr")]
    pub forcing_z: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forcing_off_after: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis: Option<PathBuf>,
}

impl SimulationConfig {
    /// Defaults with the given time step and end time.
    pub fn new(dt: f64, t_end: f64) -> Self {
        SimulationConfig {
            mesh: None,
            k: default_k(),
            mu: default_mu(),
            alpha: None,
            dt,
            t_end,
            output_every: default_output_every(),
            seed: default_seed(),
            tol: default_tol(),
            boundary: BoundaryKind::default(),
            initial: InitialCondition::default(),
            allow_inviscid: false,
            forcing: ForcingKind::None,
            forcing_scale: default_scale(),
            band_direction: default_direction(),
            band_axis: Axis::X,
            band_threshold: 0.0,
            rotation_center: [0.0; 3],
            rotation_axis: default_rotation_axis(),
            forcing_x: zero_expr(),
            forcing_y: zero_expr(),
            forcing_z: zero_expr(),
            forcing_off_after: None,
            basis: None,
        }
    }

    /// Parses and validates a TOML document.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: SimulationConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; relative `mesh` and `basis` paths are resolved
    /// against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::from_toml(&std::fs::read_to_string(path)?)?;
        let dir = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.mesh, &mut cfg.basis].into_iter().flatten() {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt must be positive");
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return bad("t_end must be non-negative");
        }
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return bad("mu must be non-negative");
        }
        if self.mu == 0.0 && !self.allow_inviscid {
            return bad("mu = 0 requires allow_inviscid = true");
        }
        if let Some(a) = self.alpha {
            if !(a > 0.0 && a.is_finite()) {
                return bad("alpha must be positive");
            }
        }
        if self.k > 4 {
            return bad("k must be at most 4");
        }
        if self.output_every == 0 {
            return bad("output_every must be at least 1");
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return bad("tol must lie in (0, 1)");
        }
        if (self.t_end / self.dt) > 1e8 {
            return bad("t_end / dt exceeds 1e8 steps");
        }
        if let Some(t) = self.forcing_off_after {
            if t.is_nan() {
                return bad("forcing_off_after must be a number");
            }
        }
        let finite = |v: &[f64; 3]| v.iter().all(|x| x.is_finite());
        if !self.forcing_scale.is_finite() || !self.band_threshold.is_finite() {
            return bad("forcing parameters must be finite");
        }
        if !finite(&self.band_direction) || !finite(&self.rotation_center) || !finite(&self.rotation_axis) {
            return bad("forcing vectors must be finite");
        }
        self.forcing()?;
        Ok(())
    }

    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or_else(|| default_penalty(self.k))
    }

    pub fn sip_parameters(&self) -> SipParameters {
        SipParameters { mu: self.mu, alpha: self.alpha(), boundary: self.boundary.into() }
    }

    /// Number of steps to reach `t_end`.
    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt - 1e-9).ceil().max(0.0) as usize
    }

    pub fn forcing(&self) -> Result<Forcing> {
        let s = self.forcing_scale;
        let v = |a: [f64; 3]| Vec3::new(a[0], a[1], a[2]);
        let kind = match self.forcing {
            ForcingKind::None => ForcingTerm::None,
            ForcingKind::Band => {
                ForcingTerm::Band { amplitude: s * v(self.band_direction), axis: self.band_axis.index(), threshold: self.band_threshold }
            }
            ForcingKind::Rotation => {
                ForcingTerm::Rotation { scale: s, center: v(self.rotation_center), axis: v(self.rotation_axis) }
            }
            ForcingKind::Expr => ForcingTerm::Expr(Box::new([
                Expr::parse(&self.forcing_x)?,
                Expr::parse(&self.forcing_y)?,
                Expr::parse(&self.forcing_z)?,
            ])),
        };
        Ok(Forcing { term: kind, off_after: self.forcing_off_after })
    }
}

#[derive(Debug, Clone)]
enum ForcingTerm {
    None,
    /// `amplitude` where `x[axis] < threshold`, zero elsewhere.
    Band { amplitude: Vec3, axis: usize, threshold: f64 },
    /// `scale · (x − c)/|x − c| × axis`.
    Rotation { scale: f64, center: Vec3, axis: Vec3 },
    Expr(Box<[Expr; 3]>),
}

/// Ambient forcing `f(x, t)`; the tangential part is taken at assembly.
#[derive(Debug, Clone)]
pub struct Forcing {
    term: ForcingTerm,
    off_after: Option<f64>,
}

impl Forcing {
    pub fn none() -> Self {
        Forcing { term: ForcingTerm::None, off_after: None }
    }

    pub fn band(amplitude: Vec3, axis: Axis, threshold: f64) -> Self {
        Forcing { term: ForcingTerm::Band { amplitude, axis: axis.index(), threshold }, off_after: None }
    }

    pub fn rotation(scale: f64, center: Vec3, axis: Vec3) -> Self {
        Forcing { term: ForcingTerm::Rotation { scale, center, axis }, off_after: None }
    }

    pub fn expr(components: [Expr; 3]) -> Self {
        Forcing { term: ForcingTerm::Expr(Box::new(components)), off_after: None }
    }

    pub fn off_after(mut self, t: Option<f64>) -> Self {
        self.off_after = t;
        self
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.term, ForcingTerm::None)
    }

    /// `true` if the value at a fixed point can change with `t`.
    pub fn is_time_dependent(&self) -> bool {
        match &self.term {
            ForcingTerm::None => false,
            ForcingTerm::Expr(e) => self.off_after.is_some() || e.iter().any(Expr::uses_time),
            _ => self.off_after.is_some(),
        }
    }

    /// `true` if the value while switched on depends on `t`.
    pub fn uses_time(&self) -> bool {
        matches!(&self.term, ForcingTerm::Expr(e) if e.iter().any(Expr::uses_time))
    }

    /// `true` if the forcing vanishes identically at time `t`.
    pub fn is_off(&self, t: f64) -> bool {
        self.is_zero() || self.off_after.is_some_and(|s| t > s)
    }

    pub fn eval(&self, x: Vec3, t: f64) -> Vec3 {
        if self.is_off(t) {
            return Vec3::zeros();
        }
        match &self.term {
            ForcingTerm::None => Vec3::zeros(),
            ForcingTerm::Band { amplitude, axis, threshold } => {
                if x[*axis] < *threshold {
                    *amplitude
                } else {
                    Vec3::zeros()
                }
            }
            ForcingTerm::Rotation { scale, center, axis } => {
                let r = x - center;
                let n = r.norm();
                if n == 0.0 {
                    Vec3::zeros()
                } else {
                    (*scale / n) * r.cross(axis)
                }
            }
            ForcingTerm::Expr(e) => Vec3::new(e[0].eval(x.x, x.y, x.z, t), e[1].eval(x.x, x.y, x.z, t), e[2].eval(x.x, x.y, x.z, t)),
        }
    }
}
