//! Exact free motion of the fundamental rotator.
//!
//! `x(t) = P t/m + s (l/2) r(t) + x0`, `k(t) = P/m + sgn(phi') n(phi(t))` with
//! `r = N sin(phi) + s E cos(phi)`, `n = dr/dphi`, `E = eps(N, W, P) / (m^3 l / 2)`
//! and `s = +1` (`-1`) for the `fundamental+` (`fundamental-`) rotator.
//! `t` is the proper time of the centre-of-momentum frame; chart states are
//! given in the lab frame, whose time is `x^0(t)`. The Pauli-Lubanski vector
//! of the motion is `sgn(phi') W`.

use nalgebra::{Vector3, Vector5};
use serde::Serialize;

use crate::dynamics::{residual, ELSystem};
use crate::error::{Error, Result};
use crate::minkowski::{epsilon_contract3, Boost, FourVector};
use crate::model::{lagrangian, rotate_accelerations, sphere_chart, ChartState};
use crate::profile::PhaseProfile;
use crate::shape::{Branch, ShapeFunction};

/// Constant vectors of one free solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FreeSolutionFrame {
    pub p: FourVector,
    pub w: FourVector,
    pub n: FourVector,
    pub x0: FourVector,
    pub m: f64,
    pub l: f64,
}

/// Deviations from `PP = m^2, WW = -m^4 l^2/4, WP = 0, NN = -1, NW = 0, NP = 0`, scaled to order one.
pub fn frame_defects(f: &FreeSolutionFrame) -> [f64; 6] {
    let (m, l) = (f.m, f.l);
    let ws = 0.5 * m * m * l;
    [
        f.p.square() / (m * m) - 1.0,
        f.w.square() / (ws * ws) + 1.0,
        f.w.dot(&f.p) / (ws * m),
        f.n.square() + 1.0,
        f.n.dot(&f.w) / ws,
        f.n.dot(&f.p) / m,
    ]
}

impl FreeSolutionFrame {
    /// `eps^{mu nu a b} N_nu W_a P_b / (m^3 l / 2)`, the second unit vector of the circle plane.
    pub fn e_vector(&self) -> FourVector {
        epsilon_contract3(self.n, self.w, self.p) * (2.0 / (self.m.powi(3) * self.l))
    }

    pub fn validate(&self, tol: f64) -> Result<()> {
        let d = frame_defects(self);
        let worst = d.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        if !(worst <= tol) {
            return Err(Error::invalid("frame", format!("normalization defect {worst:e}")));
        }
        Ok(())
    }

    /// The same solution seen after a further boost.
    pub fn boosted(&self, b: &Boost) -> Self {
        FreeSolutionFrame {
            p: b.apply(self.p),
            w: b.apply(self.w),
            n: b.apply(self.n),
            x0: b.apply(self.x0),
            ..*self
        }
    }
}

/// Builds an admissible frame: the centre of momentum moves with `boost`, the
/// circle of `n` lies in the plane orthogonal to `axis` (rest frame), starting
/// `n_angle` away from a reference direction in that plane.
///
/// For increasing `phi` the null direction turns positively about `axis`, so
/// the rest-frame spin vector is `W = -(m^2 l/2) axis`.
pub fn frame_from_parameters(m: f64, l: f64, boost: Vector3<f64>, axis: Vector3<f64>, n_angle: f64) -> Result<FreeSolutionFrame> {
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::invalid("m", "must be positive"));
    }
    if !(l > 0.0 && l.is_finite()) {
        return Err(Error::invalid("l", "must be positive"));
    }
    let an = axis.norm();
    if !(an > 0.0 && an.is_finite()) {
        return Err(Error::invalid("axis", "must be a nonzero finite vector"));
    }
    let a = axis / an;
    // reference direction: any axis not too close to `a`
    let reference = if a.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let b1 = (reference - a * a.dot(&reference)).normalize();
    let b2 = a.cross(&b1);
    let nr = b1 * n_angle.cos() + b2 * n_angle.sin();
    let b = Boost::new(boost)?;
    let frame = FreeSolutionFrame {
        p: b.apply(FourVector::new(m, 0.0, 0.0, 0.0)),
        w: b.apply(FourVector::from_parts(0.0, a * (-0.5 * m * m * l))),
        n: b.apply(FourVector::from_parts(0.0, nr)),
        x0: FourVector::ZERO,
        m,
        l,
    };
    frame.validate(1e-12)?;
    Ok(frame)
}

/// `n(phi) = N cos(phi) - E sin(phi)`, a great circle orthogonal to `P`.
pub fn great_circle_n(frame: &FreeSolutionFrame, phi: f64) -> FourVector {
    let (s, c) = phi.sin_cos();
    frame.n * c - frame.e_vector() * s
}

/// One sample: covariant data in CM time and the lab chart projection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FreeSample {
    /// CM proper time.
    pub t: f64,
    pub phase: f64,
    pub dphase: f64,
    pub x: FourVector,
    pub dx: FourVector,
    pub ddx: FourVector,
    pub k: FourVector,
    pub dk: FourVector,
    pub ddk: FourVector,
    /// Lab chart state at lab time `x^0`.
    pub state: ChartState,
    /// Lab chart accelerations.
    pub qddot: Vector5<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FreeTrajectory {
    pub frame: FreeSolutionFrame,
    pub branch: Branch,
    pub samples: Vec<FreeSample>,
}

fn chart_projection(x: [FourVector; 3], k: [FourVector; 3]) -> Result<(ChartState, Vector5<f64>)> {
    let [x, dx, ddx] = x;
    let [k, dk, ddk] = k;
    let (t0, t1) = (dx.time(), ddx.time());
    if !(t0 > 0.0) {
        return Err(Error::Domain {
            what: "free_trajectory",
            value: t0,
            reason: "lab time must advance",
        });
    }
    let v = dx.space() / t0;
    let a = (ddx.space() * t0 - dx.space() * t1) / (t0 * t0 * t0);
    let (k0, dk0, ddk0) = (k.time(), dk.time(), ddk.time());
    let u = k.space() / k0;
    let du = (dk.space() - u * dk0) / k0;
    let ddu = (ddk.space() - u * ddk0 - du * (2.0 * dk0)) / k0;
    let du_lab = du / t0;
    let ddu_lab = (ddu * t0 - du * t1) / (t0 * t0 * t0);
    let ch = sphere_chart(&u, &du_lab, &ddu_lab);
    let s = ChartState {
        t: x.time(),
        x: x.space(),
        theta: ch.theta,
        phi: ch.phi,
        dx: v,
        dtheta: ch.dtheta,
        dphi: ch.dphi,
    };
    Ok((s, Vector5::new(a.x, a.y, a.z, ch.ddtheta, ch.ddphi)))
}

/// Samples the free solution on a CM-time grid.
pub fn free_trajectory(frame: &FreeSolutionFrame, branch: Branch, profile: &PhaseProfile, times: &[f64]) -> Result<FreeTrajectory> {
    frame.validate(1e-10)?;
    profile.check_admissible(frame.l, times)?;
    let sg = branch.sign();
    let half = 0.5 * frame.l * sg;
    let big_n = frame.n;
    let big_e = frame.e_vector() * sg;
    let u = frame.p * (1.0 / frame.m);
    // sign of phi' is constant on the grid; phi' = 0 keeps k = P/m + n
    let dir = times
        .iter()
        .map(|&t| profile.eval(t).map(|(_, d, _)| d))
        .find(|d| !matches!(d, Ok(v) if *v == 0.0))
        .transpose()?
        .map_or(1.0, |d| d.signum());
    let mut samples = Vec::with_capacity(times.len());
    for &t in times {
        let (ph, dph, ddph) = profile.eval(t)?;
        let (s, c) = ph.sin_cos();
        let r = big_n * s + big_e * c;
        let n = big_n * c - big_e * s;
        let x = u * t + r * half + frame.x0;
        let dx = u + n * (half * dph);
        let ddx = (n * ddph - r * (dph * dph)) * half;
        let k = u + n * dir;
        let dk = r * (-dir * dph);
        let ddk = (r * ddph + n * (dph * dph)) * (-dir);
        let (state, qddot) = chart_projection([x, dx, ddx], [k, dk, ddk])?;
        samples.push(FreeSample {
            t,
            phase: ph,
            dphase: dph,
            x,
            dx,
            ddx,
            k,
            dk,
            ddk,
            state,
            qddot,
        });
    }
    Ok(FreeTrajectory {
        frame: *frame,
        branch,
        samples,
    })
}

impl FreeTrajectory {
    pub fn shape(&self) -> Result<ShapeFunction> {
        ShapeFunction::fundamental(self.branch, self.frame.m, self.frame.l)
    }

    /// `(state, accelerations)` pairs, each turned away from the chart poles if needed.
    pub fn candidate(&self) -> Vec<(ChartState, Vector5<f64>)> {
        self.samples
            .iter()
            .map(|smp| match smp.state.pole_safe() {
                (s, Some(rot)) => (s, rotate_accelerations(&smp.state, &smp.qddot, &rot)),
                (s, None) => (s, smp.qddot),
            })
            .collect()
    }

    /// Euler-Lagrange residual norm per sample (the free Lagrangian is rotation invariant).
    pub fn residual_norms(&self) -> Result<Vec<f64>> {
        let sys = ELSystem::free(self.shape()?);
        Ok(residual(&sys, &self.candidate())?.iter().map(|r| r.norm()).collect())
    }
}

/// `tanh` of the rapidity between two timelike vectors, from the part of `u` orthogonal to `p`.
fn tanh_rapidity(u: FourVector, p: FourVector) -> f64 {
    let up = u.dot(&p);
    let perp = u - p * (up / p.square());
    (-perp.square()).max(0.0).sqrt() * p.square().sqrt() / up
}

/// `(|phi'|, (2/l) tanh Psi)` with `Psi` the rapidity between `x'` and `P`.
pub fn frequency_relation_check(frame: &FreeSolutionFrame, sample: &FreeSample) -> (f64, f64) {
    (sample.dphase.abs(), 2.0 / frame.l * tanh_rapidity(sample.dx, frame.p))
}

/// Action along a free trajectory split into its inertial and phase parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ActionDecomposition {
    /// `-m (t_end - t_start)`.
    pub inertial: f64,
    /// `-s m (l/2) int |phi'| dt` by the trapezoid rule.
    pub phase: f64,
    /// `int L_N dt_lab` by the trapezoid rule on the same grid.
    pub direct: f64,
}

impl ActionDecomposition {
    pub fn relative_mismatch(&self) -> f64 {
        let total = self.inertial + self.phase;
        (self.direct - total).abs() / total.abs().max(f64::MIN_POSITIVE)
    }
}

pub fn action_decomposition(traj: &FreeTrajectory) -> Result<ActionDecomposition> {
    let shape = traj.shape()?;
    let (m, l) = (traj.frame.m, traj.frame.l);
    let smp = &traj.samples;
    if smp.len() < 2 {
        return Err(Error::invalid("times", "need at least two samples"));
    }
    let mut direct = 0.0;
    let mut phase = 0.0;
    let mut prev: Option<(f64, f64, f64)> = None;
    for s in smp {
        let ld = lagrangian(&shape, &s.state)? * s.dx.time();
        let ph = s.dphase.abs();
        if let Some((t0, l0, p0)) = prev {
            let h = s.t - t0;
            direct += 0.5 * h * (l0 + ld);
            phase += 0.5 * h * (p0 + ph);
        }
        prev = Some((s.t, ld, ph));
    }
    Ok(ActionDecomposition {
        inertial: -m * (smp[smp.len() - 1].t - smp[0].t),
        phase: -traj.branch.sign() * m * 0.5 * l * phase,
        direct,
    })
}

/// Two profiles with the same initial data whose free solutions separate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IndeterminacyWitness {
    /// Largest difference of `(q, q')` at the matching time.
    pub initial_mismatch: f64,
    /// Difference of the chart accelerations at the matching time.
    pub acceleration_gap: f64,
    /// Largest position difference over the grid.
    pub divergence: f64,
    pub max_residual_a: f64,
    pub max_residual_b: f64,
}

/// Compares `profile` with its osculating linear profile at `times[0]`.
pub fn indeterminacy_witness(frame: &FreeSolutionFrame, branch: Branch, profile: &PhaseProfile, times: &[f64]) -> Result<IndeterminacyWitness> {
    let t0 = *times.first().ok_or_else(|| Error::invalid("times", "empty grid"))?;
    let lin = profile.osculating_linear(t0)?;
    let a = free_trajectory(frame, branch, &lin, times)?;
    let b = free_trajectory(frame, branch, profile, times)?;
    let (sa, sb) = (&a.samples[0], &b.samples[0]);
    let qa: Vec<f64> = sa.state.coords().into_iter().chain(sa.state.velocities()).collect();
    let qb: Vec<f64> = sb.state.coords().into_iter().chain(sb.state.velocities()).collect();
    let initial_mismatch = qa.iter().zip(&qb).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    let divergence = a
        .samples
        .iter()
        .zip(&b.samples)
        .fold(0.0f64, |m, (x, y)| m.max((x.x - y.x).max_abs()));
    let max = |v: Vec<f64>| v.into_iter().fold(0.0f64, f64::max);
    Ok(IndeterminacyWitness {
        initial_mismatch,
        acceleration_gap: (sa.qddot - sb.qddot).norm(),
        divergence,
        max_residual_a: max(a.residual_norms()?),
        max_residual_b: max(b.residual_norms()?),
    })
}
