//! The rotator family in the physical chart `(x1, x2, x3, theta, phi)` with
//! lab time as the evolution parameter.

use nalgebra::{Rotation3, Vector3, Vector5};
use rand::Rng;
use serde::Serialize;

use crate::dual::Scalar;
use crate::error::{Error, Result};
use crate::minkowski::{pauli_lubanski, rapidity, AntisymmetricTensor2, FourVector};
use crate::shape::{ShapeFunction, ShapeValues};

/// `1 - n.v` below this is treated as the collinear singularity.
pub const COLLINEAR_TOL: f64 = 1e-12;
/// Below this `sin(theta)` the chart is re-expressed in a rotated frame.
pub const POLE_SIN_THRESHOLD: f64 = 0.1;

/// Positions, angles and their lab-time velocities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChartState {
    pub t: f64,
    pub x: Vector3<f64>,
    pub theta: f64,
    pub phi: f64,
    pub dx: Vector3<f64>,
    pub dtheta: f64,
    pub dphi: f64,
}

/// Unit vector with polar angle `theta` and azimuth `phi`.
pub fn direction(theta: f64, phi: f64) -> Vector3<f64> {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    Vector3::new(st * cp, st * sp, ct)
}

/// Spherical angles, their rates and accelerations of a moving unit vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereChart {
    pub theta: f64,
    pub phi: f64,
    pub dtheta: f64,
    pub dphi: f64,
    pub ddtheta: f64,
    pub ddphi: f64,
}

/// Converts `(n, dn, ddn)` to the `(theta, phi)` chart. `phi` is reduced to `[0, 2 pi)`.
pub fn sphere_chart(n: &Vector3<f64>, dn: &Vector3<f64>, ddn: &Vector3<f64>) -> SphereChart {
    let theta = n.z.clamp(-1.0, 1.0).acos();
    let phi = n.y.atan2(n.x).rem_euclid(std::f64::consts::TAU);
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    let e_theta = Vector3::new(ct * cp, ct * sp, -st);
    let e_phi = Vector3::new(-sp, cp, 0.0);
    let dtheta = dn.dot(&e_theta);
    let dphi = dn.dot(&e_phi) / st;
    SphereChart {
        theta,
        phi,
        dtheta,
        dphi,
        ddtheta: ddn.dot(&e_theta) + st * ct * dphi * dphi,
        ddphi: (ddn.dot(&e_phi) - 2.0 * ct * dtheta * dphi) / st,
    }
}

impl ChartState {
    /// `n = (sin theta cos phi, sin theta sin phi, cos theta)`.
    pub fn n(&self) -> Vector3<f64> {
        direction(self.theta, self.phi)
    }

    /// `dn/dt`.
    pub fn ndot(&self) -> Vector3<f64> {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        Vector3::new(
            ct * cp * self.dtheta - st * sp * self.dphi,
            ct * sp * self.dtheta + st * cp * self.dphi,
            -st * self.dtheta,
        )
    }

    /// `|dn/dt| = sqrt(theta'^2 + sin^2 theta phi'^2)`.
    pub fn ndot_norm(&self) -> f64 {
        let st = self.theta.sin();
        (self.dtheta * self.dtheta + st * st * self.dphi * self.dphi).sqrt()
    }

    /// `1 - n.v`.
    pub fn collinearity(&self) -> f64 {
        1.0 - self.n().dot(&self.dx)
    }

    pub fn coords(&self) -> [f64; 5] {
        [self.x.x, self.x.y, self.x.z, self.theta, self.phi]
    }

    pub fn velocities(&self) -> [f64; 5] {
        [self.dx.x, self.dx.y, self.dx.z, self.dtheta, self.dphi]
    }

    pub fn from_arrays(t: f64, q: &[f64; 5], v: &[f64; 5]) -> Self {
        ChartState {
            t,
            x: Vector3::new(q[0], q[1], q[2]),
            theta: q[3],
            phi: q[4],
            dx: Vector3::new(v[0], v[1], v[2]),
            dtheta: v[3],
            dphi: v[4],
        }
    }

    /// Checks `|v| < 1`, `1 - n.v > 0` and finiteness.
    pub fn validate(&self) -> Result<()> {
        let all = self.coords().into_iter().chain(self.velocities()).chain([self.t]);
        if all.into_iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("state", "non-finite component"));
        }
        let vv = self.dx.norm_squared();
        if vv >= 1.0 {
            return Err(Error::Superluminal(vv));
        }
        let c = self.collinearity();
        if c <= COLLINEAR_TOL {
            return Err(Error::NullCollinear(c));
        }
        Ok(())
    }

    /// The same physical state in a spatially rotated frame (`x -> R x`, `n -> R n`).
    pub fn rotated(&self, r: &Rotation3<f64>) -> Self {
        let n = r * self.n();
        let dn = r * self.ndot();
        let c = sphere_chart(&n, &dn, &Vector3::zeros());
        ChartState {
            t: self.t,
            x: r * self.x,
            theta: c.theta,
            phi: c.phi,
            dx: r * self.dx,
            dtheta: c.dtheta,
            dphi: c.dphi,
        }
    }

    /// The state in a frame where `sin(theta) >= 0.1`, plus the rotation used (if any).
    pub fn pole_safe(&self) -> (ChartState, Option<Rotation3<f64>>) {
        if self.theta.sin() >= POLE_SIN_THRESHOLD {
            return (*self, None);
        }
        let r = pole_rotation();
        (self.rotated(&r), Some(r))
    }
}

/// Fixed frame rotation used near the poles: a quarter turn about the x axis.
pub fn pole_rotation() -> Rotation3<f64> {
    Rotation3::from_axis_angle(&Vector3::x_axis(), std::f64::consts::FRAC_PI_2)
}

/// Converts chart accelerations between two frames related by `r` (new = r * old).
pub fn rotate_accelerations(s: &ChartState, qddot: &Vector5<f64>, r: &Rotation3<f64>) -> Vector5<f64> {
    let (st, ct) = s.theta.sin_cos();
    let (sp, cp) = s.phi.sin_cos();
    let e_theta = Vector3::new(ct * cp, ct * sp, -st);
    let e_phi = Vector3::new(-sp, cp, 0.0);
    let n = s.n();
    let (dth, dph) = (s.dtheta, s.dphi);
    // ddn = ddtheta e_theta + sin ddphi e_phi + velocity terms
    let ddn = qddot[3] * e_theta + st * qddot[4] * e_phi - (dth * dth + st * st * dph * dph) * n
        + 2.0 * ct * dth * dph * e_phi
        - st * ct * dph * dph * e_theta;
    let c = sphere_chart(&(r * n), &(r * s.ndot()), &(r * ddn));
    let a = r * Vector3::new(qddot[0], qddot[1], qddot[2]);
    Vector5::new(a.x, a.y, a.z, c.ddtheta, c.ddphi)
}

/// `Q = l^2 |dn|^2 / (1 - n.v)^2`.
pub fn q_invariant(s: &ChartState, l: f64) -> Result<f64> {
    let c = s.collinearity();
    if c <= COLLINEAR_TOL {
        return Err(Error::NullCollinear(c));
    }
    let nd = s.ndot_norm();
    Ok(l * l * nd * nd / (c * c))
}

/// The free Lagrangian `-m sqrt(1 - v.v) f(Q)` on any scalar type.
pub fn free_lagrangian<S: Scalar>(shape: &ShapeFunction, q: &[S; 5], v: &[S; 5]) -> Result<S> {
    let (st, ct) = (q[3].sin(), q[3].cos());
    let (sp, cp) = (q[4].sin(), q[4].cos());
    let n = [st * cp, st * sp, ct];
    let vv = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
    if vv.value() >= 1.0 {
        return Err(Error::Superluminal(vv.value()));
    }
    let d = -(n[0] * v[0] + n[1] * v[1] + n[2] * v[2]) + 1.0;
    if d.value() <= COLLINEAR_TOL {
        return Err(Error::NullCollinear(d.value()));
    }
    let nd2 = v[3] * v[3] + v[4] * v[4] * st * st;
    let qq = nd2 * (shape.l * shape.l) / (d * d);
    let f = shape.apply(qq)?;
    Ok(-((-vv + 1.0).sqrt() * f) * shape.m)
}

/// Value of the free Lagrangian at a chart state.
///
/// At `Q = 0` the fundamental shapes are not differentiable but still have the value `f(0) = 1`.
pub fn lagrangian(shape: &ShapeFunction, s: &ChartState) -> Result<f64> {
    match free_lagrangian(shape, &s.coords(), &s.velocities()) {
        Err(Error::NonSmoothPoint) => {
            let f0 = shape.radicand()[0].sqrt();
            Ok(-shape.m * (1.0 - s.dx.norm_squared()).sqrt() * f0)
        }
        other => other,
    }
}

/// Position, velocity, null direction and its rate as four-vectors (gauge `x^0 = t`, `k^0 = 1`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CovariantKinematics {
    pub x: FourVector,
    pub dx: FourVector,
    pub k: FourVector,
    pub dk: FourVector,
}

impl CovariantKinematics {
    /// `Q = -l^2 (dk.dk) / (k.dx)^2`, valid in any parametrization and frame.
    pub fn q_invariant(&self, l: f64) -> f64 {
        let kx = self.k.dot(&self.dx);
        -l * l * self.dk.square() / (kx * kx)
    }
}

pub fn lift_state(s: &ChartState) -> CovariantKinematics {
    CovariantKinematics {
        x: FourVector::from_parts(s.t, s.x),
        dx: FourVector::from_parts(1.0, s.dx),
        k: FourVector::from_parts(1.0, s.n()),
        dk: FourVector::from_parts(0.0, s.ndot()),
    }
}

/// Noether charges and Casimir scalars.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChargeSet {
    pub p: FourVector,
    pub pi: FourVector,
    pub m: AntisymmetricTensor2,
    pub w: FourVector,
    pub pp: f64,
    pub ww: f64,
}

/// Momenta conjugate to `x` and `k`, the angular momentum and the Pauli-Lubanski vector.
pub fn momenta(shape: &ShapeFunction, c: &CovariantKinematics) -> Result<ChargeSet> {
    let (m, l) = (shape.m, shape.l);
    let xx = c.dx.square();
    if !(xx > 0.0) {
        return Err(Error::Superluminal(1.0 - xx));
    }
    let kx = c.k.dot(&c.dx);
    if kx.abs() <= COLLINEAR_TOL {
        return Err(Error::NullCollinear(kx));
    }
    let sx = xx.sqrt();
    let q = c.q_invariant(l);
    let (p, pi) = if q == 0.0 {
        if !shape.smooth_at_zero() {
            return Err(Error::Rotationless("momentum conjugate to k has no limit at Q = 0"));
        }
        let f = shape.eval(0.0)?.f;
        (c.dx * (m * f / sx), FourVector::default())
    } else {
        let ShapeValues { f, df, .. } = shape.eval(q)?;
        let p = c.dx * (m * f / sx) - c.k * (2.0 * m * q * df * sx / kx);
        // 2 m Q f' sqrt(x.x) / (dk.dk) with Q = -l^2 dk.dk / (k.x)^2
        let pi = c.dk * (-2.0 * m * l * l * df * sx / (kx * kx));
        (p, pi)
    };
    let mt = AntisymmetricTensor2::wedge(&c.x, &p) + AntisymmetricTensor2::wedge(&c.k, &pi);
    let w = pauli_lubanski(&mt, p);
    Ok(ChargeSet {
        p,
        pi,
        m: mt,
        w,
        pp: p.square(),
        ww: w.square(),
    })
}

/// `(PP, WW) = (m^2 (f^2 - 4 Q f f'), -4 m^4 l^2 Q f^2 f'^2)`.
pub fn casimirs_closed_form(shape: &ShapeFunction, q: f64) -> Result<(f64, f64)> {
    let ShapeValues { f, df, .. } = shape.eval(q)?;
    let (m, l) = (shape.m, shape.l);
    Ok((
        m * m * (f * f - 4.0 * q * f * df),
        -4.0 * m.powi(4) * l * l * q * f * f * df * df,
    ))
}

/// `tanh Psi = 2 Q f' / (f - 2 Q f')`, the rotation speed in the momentum rest frame.
pub fn rotation_speed(shape: &ShapeFunction, q: f64) -> Result<f64> {
    if q == 0.0 && shape.smooth_at_zero() {
        return Ok(0.0);
    }
    let ShapeValues { f, df, .. } = shape.eval(q)?;
    let den = f - 2.0 * q * df;
    let r = 2.0 * q * df / den;
    if !(r.abs() < 1.0) {
        return Err(Error::Domain {
            what: "rotation_speed",
            value: r,
            reason: "shape and Q give a superluminal rotation",
        });
    }
    Ok(r)
}

/// `tanh` of the rapidity between the velocity and the momentum.
pub fn tanh_psi(c: &CovariantKinematics, p: FourVector) -> Result<f64> {
    Ok(rapidity(c.dx, p)?.tanh())
}

/// Draws admissible chart states with prescribed ranges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateSampler {
    pub l: f64,
    /// Upper bound on `|v|`.
    pub max_speed: f64,
    /// `Q` is drawn log-uniformly from this range.
    pub q_range: (f64, f64),
    /// Lower bound on `sin(theta)`.
    pub min_sin_theta: f64,
    /// Positions are drawn from the cube `[-extent, extent]^3`.
    pub extent: f64,
}

impl StateSampler {
    pub fn new(l: f64, q_range: (f64, f64)) -> Self {
        StateSampler {
            l,
            max_speed: 0.8,
            q_range,
            min_sin_theta: 0.2,
            extent: 2.0,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ChartState {
        let t = rng.gen_range(-1.0..1.0);
        let x = Vector3::from_fn(|_, _| rng.gen_range(-self.extent..self.extent));
        let theta_min = self.min_sin_theta.asin();
        let theta = rng.gen_range(theta_min..std::f64::consts::PI - theta_min);
        let phi = rng.gen_range(0.0..std::f64::consts::TAU);
        let dir = loop {
            let d: Vector3<f64> = Vector3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
            let n2 = d.norm_squared();
            if n2 > 1e-4 && n2 <= 1.0 {
                break d / n2.sqrt();
            }
        };
        let dx = dir * (self.max_speed * rng.gen::<f64>().cbrt());
        let c = 1.0 - direction(theta, phi).dot(&dx);
        let (lo, hi) = self.q_range;
        let q = if lo == hi { lo } else { (rng.gen_range(lo.ln()..hi.ln())).exp() };
        let nd = q.sqrt() * c / self.l;
        let a = rng.gen_range(0.0..std::f64::consts::TAU);
        ChartState {
            t,
            x,
            theta,
            phi,
            dx,
            dtheta: nd * a.cos(),
            dphi: nd * a.sin() / theta.sin(),
        }
    }
}
