use thiserror::Error;

use crate::hessian::Degeneracy;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Singular configurations that stop an integration instead of being regularized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum SingularityKind {
    /// `1 - n.v` reached zero: the null direction is collinear with the velocity.
    NullCollinear,
    /// `|v|` reached the speed of light.
    LightSpeed,
    /// `Q` left the domain of the shape function.
    ShapeDomain,
    /// The null direction stopped rotating (`Q = 0`).
    Rotationless,
}

impl std::fmt::Display for SingularityKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SingularityKind::NullCollinear => "null direction collinear with velocity",
            SingularityKind::LightSpeed => "velocity reached the speed of light",
            SingularityKind::ShapeDomain => "Q left the shape-function domain",
            SingularityKind::Rotationless => "rotation of the null direction stopped",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("{what}: value {value} outside the domain ({reason})")]
    Domain {
        what: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("shape function is not smooth at Q = 0 (inertial branch)")]
    NonSmoothPoint,
    #[error("null direction collinear with velocity: 1 - n.v = {0:e}")]
    NullCollinear(f64),
    #[error("superluminal velocity: |v|^2 = {0}")]
    Superluminal(f64),
    #[error("rotationless state: {0}")]
    Rotationless(&'static str),
    #[error("degenerate Hessian (rank {}), constraint residual w.Z = {:e}", .0.rank, .0.constraint_residual)]
    DegenerateHessian(Box<Degeneracy>),
    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },
    #[error("singularity at t = {t}: {kind}")]
    Singularity { t: f64, kind: SingularityKind },
    #[error("finite-difference stencil failed after {attempts} attempts: {source}")]
    Stencil {
        attempts: u32,
        #[source]
        source: Box<Error>,
    },
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("not applicable: {0}")]
    NotApplicable(&'static str),
    #[error("indeterminate: {0}")]
    Indeterminate(&'static str),
    #[error("inadmissible: {0}")]
    Inadmissible(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for refusals that follow from the physics of the model rather than bad input.
    pub fn is_physics(&self) -> bool {
        !matches!(self, Error::InvalidParameter { .. } | Error::Parse(_))
    }
}
