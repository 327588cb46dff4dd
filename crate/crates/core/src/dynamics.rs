//! Euler-Lagrange dynamics of the rotator on the five physical coordinates.

use std::io::{self, Write};

use nalgebra::{Rotation3, Vector3, Vector5};
use serde::Serialize;

use crate::dual::Scalar;
use crate::em::UniformField;
use crate::error::{Error, Result, SingularityKind};
use crate::euler_lagrange::{el_terms, ElTerms, Engine, Lagrangian};
use crate::hessian::{numeric_kernel, singular_values_desc, Degeneracy, RANK_TOL};
use crate::minkowski::{AntisymmetricTensor2, FourVector};
use crate::model::{
    free_lagrangian, lift_state, momenta, q_invariant, rotate_accelerations, tanh_psi, ChartState,
    POLE_SIN_THRESHOLD,
};
use crate::ode::{self, Stats, Tolerances};
use crate::shape::ShapeFunction;

/// Condition numbers above this attach an ill-conditioning warning to solved accelerations.
pub const ILL_CONDITIONED: f64 = 1e12;

/// Charge and uniform external field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Coupling {
    pub e: f64,
    pub field: UniformField,
}

/// Free rotator Lagrangian plus an optional minimal coupling.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RotatorLagrangian {
    pub shape: ShapeFunction,
    pub coupling: Option<Coupling>,
}

impl Lagrangian<5> for RotatorLagrangian {
    fn eval<S: Scalar>(&self, q: &[S; 5], v: &[S; 5], _t: S) -> Result<S> {
        let free = free_lagrangian(&self.shape, q, v)?;
        Ok(match &self.coupling {
            Some(c) => {
                let x = [q[0], q[1], q[2]];
                let dx = [v[0], v[1], v[2]];
                free + c.field.interaction(c.e, &x, &dx)
            }
            None => free,
        })
    }
}

impl RotatorLagrangian {
    /// The Lagrangian seen from a frame rotated by `r`. The field is rotated; the gauge
    /// shift is dropped since it is not rotation covariant and does not affect the motion.
    pub fn rotated(&self, r: &Rotation3<f64>) -> Self {
        RotatorLagrangian {
            shape: self.shape.clone(),
            coupling: self.coupling.map(|c| Coupling {
                e: c.e,
                field: UniformField {
                    e_field: r * c.field.e_field,
                    h_field: r * c.field.h_field,
                    gauge_shift: 0.0,
                },
            }),
        }
    }
}

/// A Lagrangian together with the derivative engine and rank policy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ELSystem {
    pub lagrangian: RotatorLagrangian,
    #[serde(skip)]
    pub engine: Engine,
    pub rank_tol: f64,
}

impl ELSystem {
    pub fn free(shape: ShapeFunction) -> Self {
        ELSystem {
            lagrangian: RotatorLagrangian { shape, coupling: None },
            engine: Engine::Dual,
            rank_tol: RANK_TOL,
        }
    }

    pub fn coupled(shape: ShapeFunction, e: f64, field: UniformField) -> Self {
        ELSystem {
            lagrangian: RotatorLagrangian {
                shape,
                coupling: Some(Coupling { e, field }),
            },
            engine: Engine::Dual,
            rank_tol: RANK_TOL,
        }
    }

    pub fn with_engine(mut self, engine: Engine) -> Self {
        self.engine = engine;
        self
    }

    pub fn shape(&self) -> &ShapeFunction {
        &self.lagrangian.shape
    }

    /// Velocity Hessian and `Z` at a state.
    pub fn terms(&self, s: &ChartState) -> Result<ElTerms<5>> {
        el_terms::<5, 11, _>(&self.lagrangian, &s.coords(), &s.velocities(), s.t, self.engine)
    }

    fn rotated(&self, r: &Rotation3<f64>) -> Self {
        ELSystem {
            lagrangian: self.lagrangian.rotated(r),
            engine: self.engine,
            rank_tol: self.rank_tol,
        }
    }
}

/// `Z_i = dL/dq_i - d2L/(dv_i dq_j) v_j - d2L/(dv_i dt)` at a state.
pub fn el_rhs(sys: &ELSystem, s: &ChartState) -> Result<Vector5<f64>> {
    Ok(sys.terms(s)?.z)
}

/// Solved accelerations with a conditioning estimate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Accelerations {
    pub qddot: Vector5<f64>,
    /// `sigma_max / sigma_min` of the velocity Hessian.
    pub condition: f64,
    pub ill_conditioned: bool,
    /// `|H a - Z|` after the solve.
    pub residual_norm: f64,
}

fn solve_terms(sys: &ELSystem, terms: &ElTerms<5>) -> Result<Accelerations> {
    let sv = singular_values_desc(&terms.hessian);
    let (smax, smin) = (sv[0], sv[4]);
    if !(smin > sys.rank_tol * smax) {
        let kernel = numeric_kernel(&terms.hessian, sys.rank_tol);
        let rank = 5 - kernel.len();
        let constraint_residual = kernel.first().map_or(0.0, |w| -w.dot(&terms.z));
        return Err(Error::DegenerateHessian(Box::new(Degeneracy {
            rank,
            singular_values: sv.to_vec(),
            kernel: kernel.iter().map(|w| (*w).into()).collect(),
            constraint_residual,
        })));
    }
    let qddot = terms
        .hessian
        .lu()
        .solve(&terms.z)
        .ok_or(Error::NotApplicable("LU solve failed on a full-rank Hessian"))?;
    let condition = smax / smin;
    Ok(Accelerations {
        qddot,
        condition,
        ill_conditioned: condition > ILL_CONDITIONED,
        residual_norm: terms.residual(&qddot).norm(),
    })
}

/// Solves `H a = Z`; a rank-deficient Hessian is reported as [`Error::DegenerateHessian`].
pub fn accelerations(sys: &ELSystem, s: &ChartState) -> Result<Accelerations> {
    solve_terms(sys, &sys.terms(s)?)
}

/// `H a - Z` for each candidate state with its supplied accelerations.
pub fn residual(sys: &ELSystem, candidate: &[(ChartState, Vector5<f64>)]) -> Result<Vec<Vector5<f64>>> {
    candidate
        .iter()
        .map(|(s, a)| Ok(sys.terms(s)?.residual(a)))
        .collect()
}

/// Conserved-quantity monitors at one sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonitorRecord {
    pub p: FourVector,
    pub m: AntisymmetricTensor2,
    pub w: FourVector,
    pub pp: f64,
    pub ww: f64,
    pub q: f64,
    pub tanh_psi: f64,
    pub residual_norm: f64,
}

impl MonitorRecord {
    pub fn compute(shape: &ShapeFunction, s: &ChartState, residual_norm: f64) -> Result<Self> {
        let c = lift_state(s);
        let ch = momenta(shape, &c)?;
        Ok(MonitorRecord {
            p: ch.p,
            m: ch.m,
            w: ch.w,
            pp: ch.pp,
            ww: ch.ww,
            q: q_invariant(s, shape.l)?,
            tanh_psi: tanh_psi(&c, ch.p)?,
            residual_norm,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectorySample {
    /// Lab-frame state.
    pub state: ChartState,
    /// Lab-chart accelerations.
    pub qddot: Vector5<f64>,
    pub monitor: MonitorRecord,
    /// Index into [`Trajectory::frames`] of the frame the step was computed in.
    pub frame: usize,
}

/// How an integration ended.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Termination {
    Completed,
    Singularity { t: f64, kind: SingularityKind },
    MaxSteps,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntegrateOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl IntegrateOptions {
    pub fn new(rel_tol: f64) -> Self {
        IntegrateOptions {
            rel_tol,
            abs_tol: rel_tol * 1e-2,
            h_max: f64::INFINITY,
            max_steps: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
    /// Rotations from the lab frame to each integration frame; `frames[0]` is the initial one.
    #[serde(skip)]
    pub frames: Vec<Rotation3<f64>>,
    /// Times at which the integration frame was switched away from a chart pole.
    pub frame_switches: Vec<f64>,
    pub stats: Stats,
    pub options: IntegrateOptions,
    pub termination: Termination,
}

/// Column names of the trajectory CSV export.
pub const CSV_HEADER: &str = "t,x1,x2,x3,theta,phi,dx1,dx2,dx3,dtheta,dphi,P0,P1,P2,P3,PP,WW,Q,tanhPsi,residual_norm";

/// One row in [`CSV_HEADER`] order, 17 significant digits per cell.
pub fn csv_row(st: &ChartState, mo: &MonitorRecord) -> String {
    let row = [
        st.t, st.x.x, st.x.y, st.x.z, st.theta, st.phi, st.dx.x, st.dx.y, st.dx.z, st.dtheta, st.dphi, mo.p.0[0],
        mo.p.0[1], mo.p.0[2], mo.p.0[3], mo.pp, mo.ww, mo.q, mo.tanh_psi, mo.residual_norm,
    ];
    let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
    cells.join(",")
}

impl Trajectory {
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{CSV_HEADER}")?;
        for s in &self.samples {
            writeln!(out, "{}", csv_row(&s.state, &s.monitor))?;
        }
        Ok(())
    }

    pub fn final_state(&self) -> Option<&ChartState> {
        self.samples.last().map(|s| &s.state)
    }
}

fn pack(s: &ChartState) -> Vec<f64> {
    s.coords().into_iter().chain(s.velocities()).collect()
}

fn unpack(t: f64, y: &[f64]) -> ChartState {
    let q: [f64; 5] = std::array::from_fn(|i| y[i]);
    let v: [f64; 5] = std::array::from_fn(|i| y[5 + i]);
    ChartState::from_arrays(t, &q, &v)
}

fn singularity(shape: &ShapeFunction, s: &ChartState) -> Option<SingularityKind> {
    if s.collinearity() <= 1e-9 {
        return Some(SingularityKind::NullCollinear);
    }
    if s.dx.norm_squared() >= 1.0 - 1e-9 {
        return Some(SingularityKind::LightSpeed);
    }
    match q_invariant(s, shape.l) {
        Err(_) => Some(SingularityKind::NullCollinear),
        Ok(q) if q <= 1e-14 && !shape.smooth_at_zero() => Some(SingularityKind::Rotationless),
        Ok(q) if shape.eval(q).is_err() => Some(SingularityKind::ShapeDomain),
        Ok(_) => None,
    }
}

/// Picks a quarter-turn on top of `base` that keeps both states away from the chart poles.
fn escape_rotation(base: &Rotation3<f64>, a: &ChartState, b: &ChartState) -> Rotation3<f64> {
    let h = std::f64::consts::FRAC_PI_2;
    let candidates = [
        Rotation3::from_axis_angle(&Vector3::x_axis(), h),
        Rotation3::from_axis_angle(&Vector3::y_axis(), h),
        Rotation3::from_axis_angle(&Vector3::x_axis(), -h),
    ];
    let score = |r: &Rotation3<f64>| {
        let (na, nb) = (r * a.n(), r * b.n());
        (1.0 - na.z * na.z).min(1.0 - nb.z * nb.z)
    };
    let best = candidates
        .iter()
        .max_by(|x, y| score(x).total_cmp(&score(y)))
        .unwrap();
    best * base
}

/// Adaptive integration from `s0` to `t_end` at relative tolerance `rel_tol`.
pub fn integrate(sys: &ELSystem, s0: &ChartState, t_end: f64, rel_tol: f64) -> Result<Trajectory> {
    integrate_with(sys, s0, t_end, IntegrateOptions::new(rel_tol))
}

pub fn integrate_with(sys: &ELSystem, s0: &ChartState, t_end: f64, opts: IntegrateOptions) -> Result<Trajectory> {
    s0.validate()?;
    let shape = sys.shape().clone();
    let tol = Tolerances {
        rel: opts.rel_tol,
        abs: opts.abs_tol,
        h_min: 1e-13 * t_end.abs().max(1.0),
        h_max: opts.h_max,
    };
    let mut traj = Trajectory {
        samples: Vec::new(),
        frames: Vec::new(),
        frame_switches: Vec::new(),
        stats: Stats::default(),
        options: opts,
        termination: Termination::Completed,
    };
    if let Some(kind) = singularity(&shape, s0) {
        traj.termination = Termination::Singularity { t: s0.t, kind };
        return Ok(traj);
    }

    let (start, rot) = s0.pole_safe();
    let mut frame = rot.unwrap_or_else(Rotation3::identity);
    traj.frames.push(frame);
    let mut fsys = sys.rotated(&frame);

    let mut t = s0.t;
    let mut y = pack(&start);
    let record = |traj: &mut Trajectory, fsys: &ELSystem, frame: &Rotation3<f64>, t: f64, y: &[f64]| -> Result<Vec<f64>> {
        let s = unpack(t, y);
        let acc = accelerations(fsys, &s)?;
        let lab = s.rotated(&frame.inverse());
        let qddot = rotate_accelerations(&s, &acc.qddot, &frame.inverse());
        let monitor = MonitorRecord::compute(&shape, &lab, acc.residual_norm)?;
        traj.samples.push(TrajectorySample {
            state: lab,
            qddot,
            monitor,
            frame: traj.frames.len() - 1,
        });
        Ok(y[5..].iter().copied().chain(acc.qddot.iter().copied()).collect())
    };
    let mut dy = record(&mut traj, &fsys, &frame, t, &y)?;
    traj.stats.evaluations += 1;

    let mut h = ode::initial_step(&y, &dy, &tol, t_end - t);
    let span = t_end - t;
    let dir = span.signum();
    while dir * (t_end - t) > 0.0 {
        if traj.stats.accepted >= opts.max_steps {
            traj.termination = Termination::MaxSteps;
            break;
        }
        let last = h >= dir * (t_end - t);
        let step = if last { t_end - t } else { dir * h };
        let mut rhs = |tt: f64, yy: &[f64]| -> Result<Vec<f64>> {
            let a = accelerations(&fsys, &unpack(tt, yy))?;
            Ok(yy[5..].iter().copied().chain(a.qddot.iter().copied()).collect())
        };
        let res = ode::attempt(&mut rhs, t, &y, &dy, step, &tol);
        traj.stats.evaluations += 6;
        match res {
            Err(e @ Error::DegenerateHessian(_)) => return Err(e),
            Ok(a) if a.err <= 1.0 => {
                let t_new = if last { t_end } else { t + step };
                let s_new = unpack(t_new, &a.y);
                if s_new.theta.sin() < POLE_SIN_THRESHOLD {
                    // redo the step in a frame where the chart is regular
                    let s_old = unpack(t, &y);
                    let new_frame = escape_rotation(&frame, &s_old.rotated(&frame.inverse()), &s_new.rotated(&frame.inverse()));
                    let lab_old = s_old.rotated(&frame.inverse());
                    frame = new_frame;
                    fsys = sys.rotated(&frame);
                    y = pack(&lab_old.rotated(&frame));
                    let acc = accelerations(&fsys, &unpack(t, &y))?;
                    dy = y[5..].iter().copied().chain(acc.qddot.iter().copied()).collect();
                    traj.frames.push(frame);
                    traj.frame_switches.push(t);
                    traj.stats.rejected += 1;
                    continue;
                }
                t = t_new;
                y = a.y;
                traj.stats.accepted += 1;
                h = (step.abs() * ode::step_factor(a.err)).min(tol.h_max);
                let lab = s_new.rotated(&frame.inverse());
                if let Some(kind) = singularity(&shape, &lab) {
                    traj.termination = Termination::Singularity { t, kind };
                    break;
                }
                dy = record(&mut traj, &fsys, &frame, t, &y)?;
            }
            Ok(a) => {
                traj.stats.rejected += 1;
                h = step.abs() * ode::step_factor(a.err).min(1.0);
            }
            Err(_) => {
                traj.stats.rejected += 1;
                h = step.abs() * 0.25;
            }
        }
        if h < tol.h_min {
            return Err(Error::StepUnderflow { t, h });
        }
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::euler_lagrange::FdOptions;
    use crate::model::StateSampler;
    use crate::shape::{Branch, ShapeKind};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn smooth(m: f64, l: f64) -> ShapeFunction {
        ShapeFunction::new(ShapeKind::Smooth, m, l).unwrap()
    }

    fn state(x: [f64; 3], theta: f64, phi: f64, dx: [f64; 3], dtheta: f64, dphi: f64) -> ChartState {
        ChartState {
            t: 0.0,
            x: Vector3::from(x),
            theta,
            phi,
            dx: Vector3::from(dx),
            dtheta,
            dphi,
        }
    }

    #[test]
    fn inertial_state_has_zero_rhs() {
        let sys = ELSystem::free(smooth(1.0, 1.0));
        let s = state([1.0, 2.0, 3.0], 1.0, 0.5, [0.3, -0.1, 0.2], 0.0, 0.0);
        let z = el_rhs(&sys, &s).unwrap();
        assert!(z.norm() < 1e-15);
        let a = accelerations(&sys, &s).unwrap();
        assert!(a.qddot.norm() < 1e-14);
    }

    #[test]
    fn static_charge_feels_electric_force() {
        // at rest with no rotation: Z spatial = e E, the angular part vanishes
        let field = UniformField::new([0.3, -0.2, 0.5], [0.0; 3]);
        let sys = ELSystem::coupled(smooth(1.0, 1.0), 2.0, field);
        let s = state([0.5, 0.1, -0.4], 1.2, 0.3, [0.0; 3], 0.0, 0.0);
        let z = el_rhs(&sys, &s).unwrap();
        for i in 0..3 {
            assert!((z[i] - 2.0 * field.e_field[i]).abs() < 1e-14);
        }
        assert!(z[3].abs() < 1e-15 && z[4].abs() < 1e-15);
    }

    #[test]
    fn fundamental_is_degenerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let smp = StateSampler::new(1.0, (1e-2, 0.5));
        for branch in [Branch::Plus, Branch::Minus] {
            let sys = ELSystem::free(ShapeFunction::fundamental(branch, 1.0, 1.0).unwrap());
            for _ in 0..20 {
                match accelerations(&sys, &smp.sample(&mut rng)) {
                    Err(Error::DegenerateHessian(d)) => {
                        assert_eq!(d.rank, 4);
                        assert_eq!(d.kernel.len(), 1);
                        assert!(d.constraint_residual.abs() < 1e-10);
                    }
                    other => panic!("expected degeneracy, got {other:?}"),
                }
            }
        }
    }

    #[test]
    fn regular_solve_is_backward_stable() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let smp = StateSampler::new(1.0, (1e-2, 0.9));
        let sys = ELSystem::free(smooth(1.0, 1.0));
        for _ in 0..50 {
            let s = smp.sample(&mut rng);
            let terms = sys.terms(&s).unwrap();
            let a = accelerations(&sys, &s).unwrap();
            assert!(a.residual_norm <= 1e-12 * terms.z.norm().max(1e-300) * a.condition.max(1.0).log10().max(1.0));
            assert!(!a.ill_conditioned);
        }
    }

    #[test]
    fn ill_conditioning_is_flagged() {
        // f = 1 + sqrt(Q) has a universal factor ~ sqrt(Q): tiny Q gives a nearly singular Hessian
        let mut sys = ELSystem::free(ShapeFunction::new(ShapeKind::RationalSqrt, 1.0, 1.0).unwrap());
        sys.rank_tol = 1e-18;
        let s = state([0.0; 3], 1.0, 0.2, [0.1, 0.0, 0.0], 0.0, 1e-14);
        let a = accelerations(&sys, &s).unwrap();
        assert!(a.ill_conditioned, "condition {}", a.condition);
    }

    #[test]
    fn dual_and_fd_engines_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let smp = StateSampler::new(0.8, (1e-2, 0.5));
        let field = UniformField::new([0.1, 0.2, -0.3], [0.4, -0.1, 0.2]);
        let dual = ELSystem::coupled(smooth(1.0, 0.8), 1.5, field);
        let fd = dual.clone().with_engine(Engine::FiniteDifference(FdOptions::default()));
        for _ in 0..20 {
            let s = smp.sample(&mut rng);
            let (a, b) = (dual.terms(&s).unwrap(), fd.terms(&s).unwrap());
            let scale = a.hessian.abs().max();
            assert!((a.hessian - b.hessian).abs().max() <= 1e-6 * scale);
            assert!((a.z - b.z).abs().max() <= 1e-6 * a.z.abs().max().max(scale));
        }
    }

    #[test]
    fn perturbed_candidate_is_detected() {
        // rotation-free inertial motion is a solution; a wrong acceleration is not
        let sys = ELSystem::free(smooth(1.0, 1.0));
        let s = state([0.0; 3], 1.0, 0.5, [0.2, 0.1, 0.0], 0.0, 0.0);
        let good = residual(&sys, &[(s, Vector5::zeros())]).unwrap();
        assert!(good[0].norm() < 1e-15);
        let bad = residual(&sys, &[(s, Vector5::new(0.01, 0.0, 0.0, 0.0, 0.0))]).unwrap();
        assert!(bad[0].norm() > 1e-3);
    }

    #[test]
    fn rotation_equivariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let smp = StateSampler::new(1.0, (1e-2, 0.5));
        let sys = ELSystem::free(smooth(1.0, 1.0));
        for i in 0..20 {
            let s = smp.sample(&mut rng);
            let r = Rotation3::from_euler_angles(0.3 + 0.1 * i as f64, -0.7, 1.1);
            let sr = s.rotated(&r);
            if sr.theta.sin() < 0.2 {
                continue;
            }
            let a = accelerations(&sys, &s).unwrap().qddot;
            let ar = accelerations(&sys, &sr).unwrap().qddot;
            let mapped = rotate_accelerations(&s, &a, &r);
            assert!((mapped - ar).norm() <= 1e-9 * ar.norm().max(1.0));
        }
    }

    #[test]
    fn integration_conserves_charges() {
        let l = 1.0;
        let sys = ELSystem::free(smooth(1.0, l));
        let s0 = state([0.0; 3], 1.1, 0.4, [0.2, -0.1, 0.05], 0.2, 0.3);
        let traj = integrate(&sys, &s0, 20.0 * l, 1e-10).unwrap();
        assert_eq!(traj.termination, Termination::Completed);
        let first = traj.samples[0].monitor;
        for smp in &traj.samples {
            let mo = smp.monitor;
            for i in 0..4 {
                assert!((mo.p.0[i] - first.p.0[i]).abs() <= 1e-8 * first.p.euclidean_norm());
            }
            assert!((mo.q - first.q).abs() <= 1e-8 * first.q);
        }
        assert!(traj.samples.windows(2).all(|w| w[1].state.t > w[0].state.t));
        let mut csv = Vec::new();
        traj.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert_eq!(text.lines().count(), traj.samples.len() + 1);
        assert_eq!(text.lines().nth(1).unwrap().split(',').count(), 20);
    }

    #[test]
    fn integration_through_pole_switches_frame() {
        // n sweeps over the north pole
        let sys = ELSystem::free(smooth(1.0, 1.0));
        let s0 = state([0.0; 3], 0.4, 0.0, [0.0; 3], -0.4, 0.0);
        let traj = integrate(&sys, &s0, 3.0, 1e-10).unwrap();
        assert_eq!(traj.termination, Termination::Completed);
        assert!(!traj.frame_switches.is_empty());
        let q0 = traj.samples[0].monitor.q;
        for smp in &traj.samples {
            assert!((smp.monitor.q - q0).abs() <= 1e-8 * q0);
        }
    }

    #[test]
    fn fundamental_integration_refuses() {
        let sys = ELSystem::free(ShapeFunction::fundamental(Branch::Plus, 1.0, 1.0).unwrap());
        let s0 = state([0.0; 3], 1.1, 0.4, [0.2, -0.1, 0.05], 0.2, 0.3);
        assert!(matches!(integrate(&sys, &s0, 1.0, 1e-8), Err(Error::DegenerateHessian(_))));
    }

    #[test]
    fn tolerance_refinement_is_consistent() {
        let sys = ELSystem::free(smooth(1.0, 1.0));
        let s0 = state([0.0; 3], 1.1, 0.4, [0.2, -0.1, 0.05], 0.2, 0.3);
        let a = integrate(&sys, &s0, 10.0, 1e-8).unwrap();
        let b = integrate(&sys, &s0, 10.0, 1e-11).unwrap();
        let (sa, sb) = (a.final_state().unwrap(), b.final_state().unwrap());
        let diff = (Vector5::from(sa.coords()) - Vector5::from(sb.coords())).norm();
        assert!(diff < 1e-5, "diff {diff}");
    }
}
