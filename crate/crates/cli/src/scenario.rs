//! Scenario documents: a versioned JSON schema, parsed strictly and then
//! checked field by field so every rejection names its location.

use std::fmt;

use serde::{Deserialize, Serialize};

use rotator_core::profile::ProfileTag;
use rotator_core::{ShapeFunction, ShapeKind};

pub const SCHEMA_VERSION: u32 = 1;

/// A rejected scenario: where, and why.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationError {
    pub location: String,
    pub message: String,
}

impl ValidationError {
    pub fn new(location: impl Into<String>, message: impl Into<String>) -> Self {
        ValidationError {
            location: location.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

impl std::error::Error for ValidationError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Simulate,
    Hessian,
    Kernel,
    VerifyFree,
    VerifyMagnetic,
    Toy,
    ScanF,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Simulate => "simulate",
            Task::Hessian => "hessian",
            Task::Kernel => "kernel",
            Task::VerifyFree => "verify-free",
            Task::VerifyMagnetic => "verify-magnetic",
            Task::Toy => "toy",
            Task::ScanF => "scan-f",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelType {
    Rotator,
    Toy,
}

/// Kept flat (not a tagged enum) so that schema errors keep their full path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Model {
    #[serde(rename = "type")]
    pub kind: ModelType,
    /// Rotator shape tag; `scan-f` takes its shapes from its own block and may omit it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<String>,
    pub m: f64,
    pub l: f64,
    /// Toy models only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<ToyVariantBlock>,
    /// Toy models only; filled with the singular value 1/8 when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spin_coefficient: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ToyVariantBlock {
    Free,
    Electric { k: f64 },
    Magnetic { k_tilde: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialState {
    #[serde(default)]
    pub t: f64,
    pub x: [f64; 3],
    pub theta: f64,
    pub phi: f64,
    pub dx: [f64; 3],
    pub dtheta: f64,
    pub dphi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldBlock {
    #[serde(rename = "E", default)]
    pub e_field: [f64; 3],
    #[serde(rename = "H", default)]
    pub h_field: [f64; 3],
    /// Charge.
    pub e: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    #[serde(default)]
    pub t0: f64,
    pub t1: f64,
    pub n: usize,
}

impl Default for Grid {
    fn default() -> Self {
        Grid { t0: 0.0, t1: 10.0, n: 101 }
    }
}

impl Grid {
    pub fn times(&self) -> Vec<f64> {
        if self.n == 1 {
            return vec![self.t0];
        }
        let h = (self.t1 - self.t0) / (self.n - 1) as f64;
        (0..self.n).map(|i| self.t0 + h * i as f64).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<usize>,
    #[serde(default)]
    pub grid: Grid,
}

fn default_rel_tol() -> f64 {
    1e-10
}

impl Default for RunBlock {
    fn default() -> Self {
        RunBlock {
            t_end: None,
            rel_tol: default_rel_tol(),
            h_max: None,
            max_steps: None,
            grid: Grid::default(),
        }
    }
}

/// Random states for `hessian` and `kernel`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sampling {
    pub count: usize,
    #[serde(default = "default_q_min")]
    pub q_min: f64,
    #[serde(default = "default_q_max")]
    pub q_max: f64,
}

fn default_q_min() -> f64 {
    1e-3
}

fn default_q_max() -> f64 {
    0.9
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FreeBlock {
    /// Profile tag: `linear:omega=..`, `modulated:omega=..,amp=..,nu=..` or `spline:<file>`.
    pub profile: String,
    #[serde(default)]
    pub boost: [f64; 3],
    #[serde(default = "default_axis")]
    pub axis: [f64; 3],
    #[serde(default)]
    pub n_angle: f64,
    #[serde(default)]
    pub witness: bool,
}

fn default_axis() -> [f64; 3] {
    [0.0, 0.0, 1.0]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchTag {
    Plus,
    Minus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchScan {
    pub radii: Vec<f64>,
    pub fields: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MagneticBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub branch: Option<BranchTag>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<BranchScan>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToyCaseTag {
    A,
    B,
    C,
    Indeterminate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToyBlock {
    pub case: ToyCaseTag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    /// Profile tag for `nu(t)` of the indeterminate family.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    #[default]
    Log,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QGrid {
    pub min: f64,
    pub max: f64,
    pub n: usize,
    #[serde(default)]
    pub spacing: Spacing,
}

impl QGrid {
    pub fn values(&self) -> Vec<f64> {
        if self.n == 1 {
            return vec![self.min];
        }
        let k = (self.n - 1) as f64;
        (0..self.n)
            .map(|i| {
                let u = i as f64 / k;
                match self.spacing {
                    Spacing::Linear => self.min + u * (self.max - self.min),
                    Spacing::Log => (self.min.ln() + u * (self.max.ln() - self.min.ln())).exp(),
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanFBlock {
    pub shapes: Vec<String>,
    pub q: QGrid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub task: Task,
    pub model: Model,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialState>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<FieldBlock>,
    #[serde(default)]
    pub run: RunBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampling: Option<Sampling>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub free: Option<FreeBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub magnetic: Option<MagneticBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub toy: Option<ToyBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan_f: Option<ScanFBlock>,
}

/// Parses and validates a scenario document.
pub fn parse(text: &str) -> Result<Scenario, ValidationError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let mut scn: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let location = if matches!(path.as_str(), "" | "." | "?") { "<document>".to_string() } else { path };
        ValidationError::new(location, e.into_inner().to_string())
    })?;
    if scn.model.kind == ModelType::Toy && scn.model.spin_coefficient.is_none() {
        scn.model.spin_coefficient = Some(rotator_core::toy::SINGULAR_SPIN_COEFFICIENT);
    }
    scn.validate()?;
    Ok(scn)
}

fn positive(loc: &str, v: f64) -> Result<(), ValidationError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ValidationError::new(loc, format!("must be a positive finite number, got {v}")))
    }
}

fn finite(loc: &str, vs: &[f64]) -> Result<(), ValidationError> {
    match vs.iter().find(|v| !v.is_finite()) {
        Some(v) => Err(ValidationError::new(loc, format!("must be finite, got {v}"))),
        None => Ok(()),
    }
}

fn require<'a, T>(v: &'a Option<T>, loc: &str, task: Task) -> Result<&'a T, ValidationError> {
    v.as_ref()
        .ok_or_else(|| ValidationError::new(loc, format!("required by task `{}`", task.name())))
}

impl Scenario {
    /// `(m, l)` of either model type.
    pub fn scales(&self) -> (f64, f64) {
        (self.model.m, self.model.l)
    }

    /// The rotator shape; `None` for toy models or a shapeless `scan-f` model.
    pub fn shape(&self) -> Option<ShapeFunction> {
        match (&self.model.kind, &self.model.shape) {
            (ModelType::Rotator, Some(tag)) => ShapeFunction::from_tag(tag, self.model.m, self.model.l).ok(),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        if self.version != SCHEMA_VERSION {
            return Err(ValidationError::new(
                "version",
                format!("unsupported schema version {}, expected {SCHEMA_VERSION}", self.version),
            ));
        }
        let task = self.task;
        let (m, l) = self.scales();
        positive("model.m", m)?;
        positive("model.l", l)?;
        let md = &self.model;
        match md.kind {
            ModelType::Rotator => {
                if task == Task::Toy {
                    return Err(ValidationError::new("model.type", "task `toy` needs a `toy` model"));
                }
                if md.variant.is_some() {
                    return Err(ValidationError::new("model.variant", "only toy models take a variant"));
                }
                if md.spin_coefficient.is_some() {
                    return Err(ValidationError::new("model.spin_coefficient", "only toy models take a spin coefficient"));
                }
                match &md.shape {
                    Some(tag) => {
                        ShapeFunction::from_tag(tag, m, l).map_err(|e| ValidationError::new("model.shape", e.to_string()))?;
                    }
                    None if task != Task::ScanF => {
                        return Err(ValidationError::new("model.shape", format!("required by task `{}`", task.name())));
                    }
                    None => {}
                }
            }
            ModelType::Toy => {
                if task != Task::Toy {
                    return Err(ValidationError::new(
                        "model.type",
                        format!("task `{}` needs a `rotator` model", task.name()),
                    ));
                }
                if md.shape.is_some() {
                    return Err(ValidationError::new("model.shape", "toy models have no shape"));
                }
                if let Some(c) = md.spin_coefficient {
                    positive("model.spin_coefficient", c)?;
                }
                match md.variant {
                    None => return Err(ValidationError::new("model.variant", "required for toy models")),
                    Some(ToyVariantBlock::Electric { k }) => finite("model.variant.k", &[k])?,
                    Some(ToyVariantBlock::Magnetic { k_tilde }) => finite("model.variant.k_tilde", &[k_tilde])?,
                    Some(ToyVariantBlock::Free) => {}
                }
            }
        }
        if let Some(s) = &self.initial {
            finite("initial", &[s.t, s.theta, s.phi, s.dtheta, s.dphi])?;
            finite("initial.x", &s.x)?;
            finite("initial.dx", &s.dx)?;
        }
        if let Some(f) = &self.field {
            finite("field.E", &f.e_field)?;
            finite("field.H", &f.h_field)?;
            finite("field.e", &[f.e])?;
        }
        self.validate_run()?;
        match task {
            Task::Simulate => {
                require(&self.initial, "initial", task)?;
                let t_end = self
                    .run
                    .t_end
                    .ok_or_else(|| ValidationError::new("run.t_end", "required by task `simulate`"))?;
                positive("run.t_end", t_end)?;
            }
            Task::Hessian | Task::Kernel => match (&self.initial, &self.sampling) {
                (Some(_), Some(_)) => {
                    return Err(ValidationError::new("sampling", "give either `initial` or `sampling`, not both"));
                }
                (None, None) => {
                    return Err(ValidationError::new("initial", "give an `initial` state or a `sampling` block"));
                }
                (None, Some(s)) => {
                    if s.count == 0 {
                        return Err(ValidationError::new("sampling.count", "must be at least 1"));
                    }
                    positive("sampling.q_min", s.q_min)?;
                    positive("sampling.q_max", s.q_max)?;
                    if s.q_min > s.q_max {
                        return Err(ValidationError::new("sampling.q_max", "must not be below q_min"));
                    }
                }
                (Some(_), None) => {}
            },
            Task::VerifyFree => {
                let f = require(&self.free, "free", task)?;
                f.profile
                    .parse::<ProfileTag>()
                    .map_err(|e| ValidationError::new("free.profile", e.to_string()))?;
                finite("free.boost", &f.boost)?;
                finite("free.axis", &f.axis)?;
                finite("free.n_angle", &[f.n_angle])?;
                self.require_fundamental()?;
            }
            Task::VerifyMagnetic => {
                let mb = require(&self.magnetic, "magnetic", task)?;
                if !matches!(&self.model.shape, Some(s) if s.trim() == "fundamental+") {
                    return Err(ValidationError::new(
                        "model.shape",
                        "magnetic circles are solutions of the `fundamental+` rotator",
                    ));
                }
                let f = require(&self.field, "field", task)?;
                if f.e_field != [0.0; 3] {
                    return Err(ValidationError::new("field.E", "magnetic circles need E = 0"));
                }
                if f.h_field[0] != 0.0 || f.h_field[1] != 0.0 || f.h_field[2] == 0.0 {
                    return Err(ValidationError::new("field.H", "must point along z: [0, 0, H] with H != 0"));
                }
                if f.e == 0.0 {
                    return Err(ValidationError::new("field.e", "charge must be nonzero"));
                }
                match (mb.radius, mb.branch, &mb.scan) {
                    (Some(r), Some(_), _) => positive("magnetic.radius", r)?,
                    (None, None, Some(_)) => {}
                    (Some(_), None, _) => return Err(ValidationError::new("magnetic.branch", "required with `radius`")),
                    (None, Some(_), _) => return Err(ValidationError::new("magnetic.radius", "required with `branch`")),
                    (None, None, None) => {
                        return Err(ValidationError::new("magnetic", "give `radius` and `branch`, a `scan`, or both"));
                    }
                }
                if let Some(sc) = &mb.scan {
                    if sc.radii.is_empty() || sc.fields.is_empty() {
                        return Err(ValidationError::new("magnetic.scan", "radii and fields must be nonempty"));
                    }
                    for (i, r) in sc.radii.iter().enumerate() {
                        positive(&format!("magnetic.scan.radii[{i}]"), *r)?;
                    }
                    for (i, h) in sc.fields.iter().enumerate() {
                        finite(&format!("magnetic.scan.fields[{i}]"), &[*h])?;
                        if *h == 0.0 {
                            return Err(ValidationError::new(format!("magnetic.scan.fields[{i}]"), "must be nonzero"));
                        }
                    }
                }
            }
            Task::Toy => {
                let tb = require(&self.toy, "toy", task)?;
                let variant = self.model.variant.expect("checked with the model");
                match tb.case {
                    ToyCaseTag::Indeterminate => {
                        let nu = tb
                            .nu
                            .as_ref()
                            .ok_or_else(|| ValidationError::new("toy.nu", "required by the indeterminate case"))?;
                        nu.parse::<ProfileTag>()
                            .map_err(|e| ValidationError::new("toy.nu", e.to_string()))?;
                        if matches!(variant, ToyVariantBlock::Magnetic { .. }) {
                            return Err(ValidationError::new(
                                "model.variant",
                                "the indeterminate family needs the free or electric variant",
                            ));
                        }
                    }
                    _ => {
                        let r = tb
                            .radius
                            .ok_or_else(|| ValidationError::new("toy.radius", "required by cases a, b and c"))?;
                        positive("toy.radius", r)?;
                        if !matches!(variant, ToyVariantBlock::Magnetic { .. }) {
                            return Err(ValidationError::new(
                                "model.variant",
                                "cases a, b and c need the magnetic variant",
                            ));
                        }
                    }
                }
            }
            Task::ScanF => {
                let sb = require(&self.scan_f, "scan_f", task)?;
                if sb.shapes.is_empty() {
                    return Err(ValidationError::new("scan_f.shapes", "must list at least one shape"));
                }
                for (i, tag) in sb.shapes.iter().enumerate() {
                    tag.parse::<ShapeKind>()
                        .map_err(|e| ValidationError::new(format!("scan_f.shapes[{i}]"), e.to_string()))?;
                }
                positive("scan_f.q.min", sb.q.min)?;
                positive("scan_f.q.max", sb.q.max)?;
                if sb.q.min > sb.q.max {
                    return Err(ValidationError::new("scan_f.q.max", "must not be below min"));
                }
                if sb.q.n == 0 || sb.q.n > 1_000_000 {
                    return Err(ValidationError::new("scan_f.q.n", "must be between 1 and 1000000"));
                }
            }
        }
        Ok(())
    }

    fn validate_run(&self) -> Result<(), ValidationError> {
        let r = &self.run;
        if !(r.rel_tol > 0.0 && r.rel_tol <= 1e-2) {
            return Err(ValidationError::new("run.rel_tol", format!("must lie in (0, 1e-2], got {}", r.rel_tol)));
        }
        if let Some(h) = r.h_max {
            positive("run.h_max", h)?;
        }
        if r.max_steps == Some(0) {
            return Err(ValidationError::new("run.max_steps", "must be at least 1"));
        }
        let g = &r.grid;
        finite("run.grid", &[g.t0, g.t1])?;
        if g.n == 0 || g.n > 10_000_000 {
            return Err(ValidationError::new("run.grid.n", "must be between 1 and 10000000"));
        }
        if g.n > 1 && !(g.t1 > g.t0) {
            return Err(ValidationError::new("run.grid.t1", "must exceed t0"));
        }
        Ok(())
    }

    fn require_fundamental(&self) -> Result<(), ValidationError> {
        match self.shape() {
            Some(s) if s.is_fundamental() => Ok(()),
            _ => Err(ValidationError::new(
                "model.shape",
                "exact free solutions exist for `fundamental+` and `fundamental-` only",
            )),
        }
    }
}
