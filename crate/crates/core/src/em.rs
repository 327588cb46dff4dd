//! Minimal coupling to a uniform electromagnetic field and the circular
//! orbits of the fundamental rotator in a magnetic field.

use nalgebra::{Rotation3, Vector3, Vector5};
use serde::Serialize;

use crate::dual::Scalar;
use crate::dynamics::{residual, ELSystem};
use crate::error::{Error, Result};
use crate::hessian::{analytic_kernel, universal_factor};
use crate::minkowski::{AntisymmetricTensor2, FourVector};
use crate::model::{lift_state, momenta, q_invariant, rotate_accelerations, ChartState, CovariantKinematics};
use crate::shape::{Branch, ShapeFunction};

/// Uniform electric and magnetic fields.
///
/// Potentials: `Phi = -E.x`, `A = H x x / 2 + c grad(x1 x2)` with `c = gauge_shift`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct UniformField {
    pub e_field: Vector3<f64>,
    pub h_field: Vector3<f64>,
    pub gauge_shift: f64,
}

impl UniformField {
    pub fn new(e: [f64; 3], h: [f64; 3]) -> Self {
        UniformField {
            e_field: Vector3::from(e),
            h_field: Vector3::from(h),
            gauge_shift: 0.0,
        }
    }

    pub fn with_gauge_shift(mut self, c: f64) -> Self {
        self.gauge_shift = c;
        self
    }

    /// `e (v.A - Phi)` on any scalar type.
    pub fn interaction<S: Scalar>(&self, e: f64, x: &[S; 3], v: &[S; 3]) -> S {
        let (ef, h, c) = (self.e_field, self.h_field, self.gauge_shift);
        let phi = -(x[0] * ef.x + x[1] * ef.y + x[2] * ef.z);
        let a = [
            (x[2] * h.y - x[1] * h.z) * 0.5 + x[1] * c,
            (x[0] * h.z - x[2] * h.x) * 0.5 + x[0] * c,
            (x[1] * h.x - x[0] * h.y) * 0.5,
        ];
        (v[0] * a[0] + v[1] * a[1] + v[2] * a[2] - phi) * e
    }

    /// `F_{mu nu}` with `F_{0i} = E_i` and `F_{ij} = -eps_{ijk} H_k`.
    pub fn tensor(&self) -> AntisymmetricTensor2 {
        let (e, h) = (self.e_field, self.h_field);
        AntisymmetricTensor2::zero()
            .with(0, 1, e.x)
            .with(0, 2, e.y)
            .with(0, 3, e.z)
            .with(1, 2, -h.z)
            .with(1, 3, h.y)
            .with(2, 3, -h.x)
    }

    pub fn is_zero(&self) -> bool {
        self.e_field == Vector3::zeros() && self.h_field == Vector3::zeros()
    }
}

/// `L_I = e v.A - e Phi` at a chart state.
pub fn interaction_lagrangian(e: f64, fld: &UniformField, s: &ChartState) -> f64 {
    fld.interaction(e, &[s.x.x, s.x.y, s.x.z], &[s.dx.x, s.dx.y, s.dx.z])
}

/// `F_{mu nu} k^mu x'^nu`. In the chart this equals `-(n - v).(E + v x H)`.
pub fn constraint_f(c: &CovariantKinematics, fld: &UniformField) -> f64 {
    fld.tensor().contract(&c.k, &c.dx)
}

/// `(n - v).(E + v x H)`.
pub fn constraint_chart(s: &ChartState, fld: &UniformField) -> f64 {
    (s.n() - s.dx).dot(&(fld.e_field + s.dx.cross(&fld.h_field)))
}

/// `dQ/ds` (proper length `s`) from the universal-factor law for a regular shape.
pub fn q_evolution_rhs(shape: &ShapeFunction, s: &ChartState, fld: &UniformField, e: f64) -> Result<f64> {
    if shape.is_fundamental() {
        return Err(Error::Indeterminate("universal factor vanishes identically"));
    }
    let q = q_invariant(s, shape.l)?;
    let factor = universal_factor(shape, q)?;
    if factor.abs() < 1e-12 {
        return Err(Error::Indeterminate("universal factor vanishes at this Q"));
    }
    let c = lift_state(s);
    let f = shape.eval(q)?.f;
    Ok(2.0 * q / f * (e / shape.m) * constraint_f(&c, fld) / c.k.dot(&c.dx) / factor)
}

/// `d(P.P)/dt = 2 e F_{mu nu} P^mu x'^nu` in lab time.
pub fn pp_evolution_rhs(shape: &ShapeFunction, s: &ChartState, fld: &UniformField, e: f64) -> Result<f64> {
    let c = lift_state(s);
    let p = momenta(shape, &c)?.p;
    Ok(2.0 * e * fld.tensor().contract(&p, &c.dx))
}

/// Branch of the magnetic circular orbits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CircleBranch {
    Plus,
    Minus,
}

impl CircleBranch {
    pub fn sign(self) -> f64 {
        match self {
            CircleBranch::Plus => 1.0,
            CircleBranch::Minus => -1.0,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            CircleBranch::Plus => "plus",
            CircleBranch::Minus => "minus",
        }
    }
}

/// Co-rotating circle of radius `r` in a magnetic field `h` along `z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CircularSolutionSpec {
    pub r: f64,
    pub branch: CircleBranch,
    /// Orientation of `n` relative to the velocity, `v = eps R phi' n`.
    pub eps: f64,
    pub m: f64,
    pub l: f64,
    pub e: f64,
    pub h: f64,
}

impl CircularSolutionSpec {
    /// `mu = sqrt(1 + (m / (e H R))^2) |1 -/+ 2R/l| - 1`.
    pub fn mu(&self) -> f64 {
        let ehr = (self.e * self.h * self.r).abs();
        (1.0 + (self.m / ehr).powi(2)).sqrt() * (1.0 - self.branch.sign() * 2.0 * self.r / self.l).abs() - 1.0
    }

    fn check(&self) -> Result<()> {
        for (name, v) in [("r", self.r), ("m", self.m), ("l", self.l)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(name, format!("{v} must be positive")));
            }
        }
        if !(self.e * self.h != 0.0) || !(self.e * self.h).is_finite() {
            return Err(Error::invalid("e*h", "charge and field must be nonzero"));
        }
        if self.eps != 1.0 {
            return Err(Error::NotApplicable("circular orbits are tabulated for eps = 1"));
        }
        Ok(())
    }

    /// Both frequency branches belong to the `fundamental+` rotator.
    pub fn shape(&self) -> Result<ShapeFunction> {
        ShapeFunction::fundamental(Branch::Plus, self.m, self.l)
    }

    pub fn field(&self) -> UniformField {
        UniformField::new([0.0; 3], [0.0, 0.0, self.h])
    }

    /// The fundamental system coupled to this spec's field.
    pub fn system(&self) -> Result<ELSystem> {
        Ok(ELSystem::coupled(self.shape()?, self.e, self.field()))
    }
}

/// `phi' = +/- (2/l) / mu` after admissibility checks (`mu > 0`, `R |phi'| < 1`, `R < l/2` on the plus branch).
pub fn magnetic_circular_frequency(spec: &CircularSolutionSpec) -> Result<f64> {
    spec.check()?;
    // the plus root of the circle equation exists only inside R = l/2; beyond it
    // the absolute value in mu yields a spurious frequency
    if spec.branch == CircleBranch::Plus && !(2.0 * spec.r < spec.l) {
        return Err(Error::Inadmissible(format!(
            "plus branch needs R < l/2, got R = {}, l = {}",
            spec.r, spec.l
        )));
    }
    let mu = spec.mu();
    if !(mu > 0.0) {
        return Err(Error::Inadmissible(format!(
            "{} branch has mu = {mu} <= 0 at R = {}, l = {}",
            spec.branch.tag(),
            spec.r,
            spec.l
        )));
    }
    let w = spec.branch.sign() * 2.0 / (spec.l * mu);
    let speed = spec.r * w.abs();
    if !(speed < 1.0) {
        return Err(Error::Inadmissible(format!(
            "{} branch is superluminal: R |phi'| = {speed}",
            spec.branch.tag()
        )));
    }
    Ok(w)
}

/// The limiting relativistic cyclotron frequency `|e H| / sqrt(m^2 + (e H R)^2)`.
pub fn cyclotron_frequency(m: f64, e: f64, h: f64, r: f64) -> f64 {
    (e * h).abs() / (m * m + (e * h * r).powi(2)).sqrt()
}

/// Chart state and accelerations on the circle at time `t` for frequency `w`.
///
/// For `e H > 0`: `x = R (sin phi, -cos phi, 0)`, `theta = pi/2`, `phi = w t`.
/// For `e H < 0` the same orbit is turned by a half-turn about the x axis.
pub fn circle_state(spec: &CircularSolutionSpec, w: f64, t: f64) -> (ChartState, Vector5<f64>) {
    let phi = w * t;
    let (sp, cp) = phi.sin_cos();
    let r = spec.r * spec.eps;
    let s = ChartState {
        t,
        x: Vector3::new(r * sp, -r * cp, 0.0),
        theta: std::f64::consts::FRAC_PI_2,
        phi: phi.rem_euclid(std::f64::consts::TAU),
        dx: Vector3::new(r * w * cp, r * w * sp, 0.0),
        dtheta: 0.0,
        dphi: w,
    };
    let a = Vector5::new(-r * w * w * sp, r * w * w * cp, 0.0, 0.0, 0.0);
    if spec.e * spec.h > 0.0 {
        (s, a)
    } else {
        let flip = Rotation3::from_axis_angle(&Vector3::x_axis(), std::f64::consts::PI);
        (s.rotated(&flip), rotate_accelerations(&s, &a, &flip))
    }
}

/// Samples of the circle on a time grid, paired with their accelerations.
pub fn circle_trajectory(spec: &CircularSolutionSpec, times: &[f64]) -> Result<Vec<(ChartState, Vector5<f64>)>> {
    let w = magnetic_circular_frequency(spec)?;
    Ok(times.iter().map(|&t| circle_state(spec, w, t)).collect())
}

/// Largest Euler-Lagrange residual norm along the circle.
pub fn circle_residual(spec: &CircularSolutionSpec, times: &[f64]) -> Result<f64> {
    let sys = spec.system()?;
    let cand = circle_trajectory(spec, times)?;
    Ok(residual(&sys, &cand)?.iter().fold(0.0, |m, r| m.max(r.norm())))
}

/// Outcome of the co-rotation uniqueness probe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum UniquenessProbe {
    /// Regular shape: no kernel, the motion is unique.
    KernelEmpty,
    Probed {
        /// Angle between the kernel vector and the frequency-change direction that keeps co-rotation.
        angle: f64,
        /// `|H| |w_phi| / |w|`, the first-order violation of the constraint along `w`.
        constraint_variation: f64,
    },
}

fn probe_at(shape: &ShapeFunction, s: &ChartState, eps: f64, r: f64, h: f64) -> Result<UniquenessProbe> {
    if !shape.is_fundamental() {
        return Ok(UniquenessProbe::KernelEmpty);
    }
    let w = analytic_kernel(shape, s)?.unit;
    let n = s.n();
    let a = Vector5::new(eps * r * n.x, eps * r * n.y, eps * r * n.z, 0.0, 1.0);
    let cos = (a.dot(&w) / a.norm()).abs().min(1.0);
    Ok(UniquenessProbe::Probed {
        angle: cos.acos(),
        constraint_variation: h.abs() * w[4].abs(),
    })
}

/// Checks whether a variation along the kernel vector can keep the circle co-rotating.
pub fn corotation_uniqueness_probe(spec: &CircularSolutionSpec) -> Result<UniquenessProbe> {
    let w = magnetic_circular_frequency(spec)?;
    let (s, _) = circle_state(&CircularSolutionSpec { e: spec.e.abs(), h: spec.h.abs(), ..*spec }, w, 0.0);
    probe_at(&spec.shape()?, &s, spec.eps, spec.r, spec.h)
}

/// The same probe on the free circle of radius `l/2` with frequency `w`.
pub fn free_circle_probe(shape: &ShapeFunction, w: f64) -> Result<UniquenessProbe> {
    let r = shape.l / 2.0;
    let eps = w.signum();
    let spec = CircularSolutionSpec {
        r,
        branch: CircleBranch::Plus,
        eps,
        m: shape.m,
        l: shape.l,
        e: 1.0,
        h: 1.0,
    };
    let (s, _) = circle_state(&spec, w, 0.0);
    probe_at(shape, &s, eps, r, 0.0)
}

/// One row of a branch scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanRow {
    pub r: f64,
    pub h: f64,
    pub branch: CircleBranch,
    pub mu: f64,
    pub phidot: f64,
    pub speed: f64,
    pub admissible: bool,
    pub residual_norm: f64,
}

pub const SCAN_HEADER: &str = "R,H,branch,mu,phidot,speed,admissible,residual_norm";

impl ScanRow {
    pub fn csv(&self) -> String {
        format!(
            "{:.16e},{:.16e},{},{:.16e},{:.16e},{:.16e},{},{:.16e}",
            self.r,
            self.h,
            self.branch.tag(),
            self.mu,
            self.phidot,
            self.speed,
            self.admissible,
            self.residual_norm
        )
    }
}

/// Evaluates both branches over an `(R, H)` grid. Inadmissible points keep the raw formula values.
pub fn branch_scan(m: f64, l: f64, e: f64, radii: &[f64], fields: &[f64]) -> Vec<ScanRow> {
    let times: Vec<f64> = (0..8).map(|i| 0.37 * i as f64).collect();
    let mut rows = Vec::new();
    for &r in radii {
        for &h in fields {
            for branch in [CircleBranch::Plus, CircleBranch::Minus] {
                let spec = CircularSolutionSpec { r, branch, eps: 1.0, m, l, e, h };
                let mu = spec.mu();
                let raw = branch.sign() * 2.0 / (l * mu);
                let (admissible, phidot, residual_norm) = match magnetic_circular_frequency(&spec) {
                    Ok(w) => (true, w, circle_residual(&spec, &times).unwrap_or(f64::NAN)),
                    Err(_) => (false, raw, f64::NAN),
                };
                rows.push(ScanRow {
                    r,
                    h,
                    branch,
                    mu,
                    phidot,
                    speed: r * phidot.abs(),
                    admissible,
                    residual_norm,
                });
            }
        }
    }
    rows
}

/// Contracts two four-vectors with the field tensor; exposed for monitors.
pub fn field_contract(fld: &UniformField, a: &FourVector, b: &FourVector) -> f64 {
    fld.tensor().contract(a, b)
}
