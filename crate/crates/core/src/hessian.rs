//! The velocity Hessian of the rotator Lagrangian: closed-form blocks,
//! determinant, universal factor, null space and the constraint it implies.
//!
//! Block form works with `W = l (theta', sin(theta) phi')`, `V = v` and the
//! dimensionless Lagrangian `sqrt(1 - V.V) f(Q)`. The lab-chart Hessian in
//! velocity order `(v1, v2, v3, theta', phi')` is `-m J^T H J` with the
//! Jacobian `J` of `(W, V)` with respect to the lab velocities.

use nalgebra::{DMatrix, Matrix2, Matrix2x3, Matrix3, Matrix5, SMatrix, SVector, Vector2, Vector3, Vector5};
use serde::Serialize;

use crate::dynamics::{ELSystem, RotatorLagrangian};
use crate::error::{Error, Result};
use crate::euler_lagrange::{fd_hessian, FdOptions, Lagrangian};
use crate::model::{q_invariant, ChartState};
use crate::ode::{self, Tolerances};
use crate::shape::{Branch, ShapeFunction, ShapeValues};

/// Singular values at or below `RANK_TOL * sigma_max` count as null directions.
pub const RANK_TOL: f64 = 1e-8;

/// Structured payload of a singular velocity Hessian.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Degeneracy {
    pub rank: usize,
    pub singular_values: Vec<f64>,
    pub kernel: Vec<[f64; 5]>,
    /// `w . dL/dq` at zero acceleration along the first kernel vector, i.e. `-w . Z`.
    pub constraint_residual: f64,
}

/// The blocks `A` (2x2), `B` (2x3), `C` (3x3) of the dimensionless Hessian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HessianBlocks {
    pub a: Matrix2<f64>,
    pub b: Matrix2x3<f64>,
    pub c: Matrix3<f64>,
    pub w: Vector2<f64>,
    pub v: Vector3<f64>,
    pub n: Vector3<f64>,
    pub q: f64,
    pub shape: ShapeValues,
    pub theta: f64,
}

pub fn hessian_blocks(shape: &ShapeFunction, s: &ChartState) -> Result<HessianBlocks> {
    s.validate()?;
    let l = shape.l;
    let w = Vector2::new(l * s.dtheta, l * s.theta.sin() * s.dphi);
    let ww = w.norm_squared();
    if ww == 0.0 {
        return Err(Error::Rotationless("Hessian blocks need a rotating null direction"));
    }
    let q = q_invariant(s, l)?;
    let sv = shape.eval(q)?;
    let ShapeValues { f, df, d2f } = sv;
    if df == 0.0 {
        return Err(Error::Domain {
            what: "hessian_blocks",
            value: q,
            reason: "f'(Q) vanishes",
        });
    }
    let (v, n) = (s.dx, s.n());
    let vv = v.norm_squared();
    let nv = n.dot(&v);
    let root = (1.0 - vv).sqrt();
    let pre = 2.0 * q * df * root / ww;
    let r = q * d2f / df;
    let a = pre * (Matrix2::identity() + 2.0 * r * w * w.transpose() / ww);
    let b = pre * (2.0 * (1.0 + r) * w * n.transpose() / (1.0 - nv) - w * v.transpose() / (1.0 - vv));
    let inner = (n * v.transpose() + v * n.transpose()) / (1.0 - nv)
        - (3.0 + 2.0 * r) * (1.0 - vv) / (1.0 - nv).powi(2) * n * n.transpose();
    let c = -f / root * (Matrix3::identity() + v * v.transpose() / (1.0 - vv) + 2.0 * q * df / f * inner);
    Ok(HessianBlocks {
        a,
        b,
        c,
        w,
        v,
        n,
        q,
        shape: sv,
        theta: s.theta,
    })
}

impl HessianBlocks {
    /// `[[A, B], [B^T, C]]` in `(W1, W2, V1, V2, V3)` order.
    pub fn assembled(&self) -> Matrix5<f64> {
        let mut h = Matrix5::zeros();
        h.fixed_view_mut::<2, 2>(0, 0).copy_from(&self.a);
        h.fixed_view_mut::<2, 3>(0, 2).copy_from(&self.b);
        h.fixed_view_mut::<3, 2>(2, 0).copy_from(&self.b.transpose());
        h.fixed_view_mut::<3, 3>(2, 2).copy_from(&self.c);
        h
    }

    /// Jacobian of `(W, V)` with respect to `(V, theta', phi') * scale` for angular scale `scale`.
    fn jacobian(&self, scale: f64) -> Matrix5<f64> {
        let mut j = Matrix5::zeros();
        j[(0, 3)] = scale;
        j[(1, 4)] = scale * self.theta.sin();
        for i in 0..3 {
            j[(2 + i, i)] = 1.0;
        }
        j
    }

    /// Hessian of the dimensionless Lagrangian in velocities `(X', vartheta', varphi')` with `u = t / l`.
    pub fn dimensionless_chart(&self) -> Matrix5<f64> {
        let j = self.jacobian(1.0);
        j.transpose() * self.assembled() * j
    }

    /// Hessian of `L_N` in lab velocities `(v1, v2, v3, theta', phi')`.
    pub fn lab_chart(&self, shape: &ShapeFunction) -> Matrix5<f64> {
        let s = Matrix5::from_diagonal(&Vector5::new(1.0, 1.0, 1.0, shape.l, shape.l));
        -shape.m * (s * self.dimensionless_chart() * s)
    }

    /// `-4 f^3 f'^2 / ((1 - N.V)^4 (1 - V.V)^{3/2})` times the universal factor.
    pub fn det_closed_form(&self) -> f64 {
        let ShapeValues { f, df, d2f } = self.shape;
        let q = self.q;
        let factor = 1.0 + 2.0 * q * (df / f + d2f / df);
        let nv = self.n.dot(&self.v);
        let vv = self.v.norm_squared();
        -4.0 * f.powi(3) * df * df / ((1.0 - nv).powi(4) * (1.0 - vv).powf(1.5)) * factor
    }
}

/// `1 + 2 Q (f'/f + f''/f')`.
pub fn universal_factor(shape: &ShapeFunction, q: f64) -> Result<f64> {
    let ShapeValues { f, df, d2f } = shape.eval(q)?;
    if df == 0.0 {
        return Err(Error::Domain {
            what: "universal_factor",
            value: q,
            reason: "f'(Q) vanishes",
        });
    }
    Ok(1.0 + 2.0 * q * (df / f + d2f / df))
}

/// Finite-difference velocity Hessian of any five-coordinate Lagrangian.
pub fn hessian_fd<L: Lagrangian<5>>(lag: &L, s: &ChartState, opts: FdOptions) -> Result<Matrix5<f64>> {
    let q = s.coords();
    fd_hessian(|v: &[f64; 5]| lag.eval(&q, v, s.t), &s.velocities(), opts)
}

/// Singular values in descending order.
pub fn singular_values_desc<const D: usize>(h: &SMatrix<f64, D, D>) -> [f64; D] {
    let sv = DMatrix::from_column_slice(D, D, h.as_slice()).singular_values();
    let mut out: [f64; D] = std::array::from_fn(|i| sv[i]);
    out.sort_by(|a, b| b.total_cmp(a));
    out
}

/// Orthonormal basis of the near-null space; the largest-magnitude component of each vector is positive.
pub fn numeric_kernel<const D: usize>(h: &SMatrix<f64, D, D>, tol: f64) -> Vec<SVector<f64, D>> {
    let svd = DMatrix::from_column_slice(D, D, h.as_slice()).svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    let smax = svd.singular_values.max();
    let mut out: Vec<(f64, SVector<f64, D>)> = Vec::new();
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s <= tol * smax {
            let mut v = SVector::<f64, D>::from_fn(|j, _| vt[(i, j)]);
            let big = v.iter().copied().fold(0.0_f64, |m, x| if x.abs() > m.abs() { x } else { m });
            if big < 0.0 {
                v = -v;
            }
            out.push((s, v));
        }
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out.into_iter().map(|(_, v)| v).collect()
}

/// `kernel(H, tol)` for the 5x5 rotator Hessian.
pub fn kernel(h: &Matrix5<f64>, tol: f64) -> Vec<Vector5<f64>> {
    numeric_kernel(h, tol)
}

/// Closed-form kernel vector of a fundamental rotator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelVector {
    /// `sigma (l/2)|n'| (n - v)` spatial part and `rho (theta', phi')` angular part, lab chart.
    pub scaled: Vector5<f64>,
    /// `scaled` normalized to unit length.
    pub unit: Vector5<f64>,
    /// Same direction in `(W, V)` block coordinates, scaled so the `V` part is `sigma (N - V)`.
    pub blocks: Vector5<f64>,
}

/// `rho = ((1 - n.v)^2 + sigma (n - v)^2 (l/2)|n'|) / (1 - v.v)` with `sigma = +1` on the plus branch.
pub fn kernel_rho(branch: Branch, s: &ChartState, l: f64) -> f64 {
    let c = s.collinearity();
    let d = (s.n() - s.dx).norm_squared();
    (c * c + branch.sign() * d * 0.5 * l * s.ndot_norm()) / (1.0 - s.dx.norm_squared())
}

pub fn analytic_kernel(shape: &ShapeFunction, s: &ChartState) -> Result<KernelVector> {
    let branch = shape
        .fundamental_branch()
        .ok_or(Error::NotApplicable("closed-form kernel exists only for fundamental shapes"))?;
    s.validate()?;
    let nd = s.ndot_norm();
    if nd == 0.0 {
        return Err(Error::Rotationless("kernel vector needs |n'| > 0"));
    }
    let l = shape.l;
    let sigma = branch.sign();
    let rho = kernel_rho(branch, s, l);
    let sp = sigma * 0.5 * l * nd * (s.n() - s.dx);
    let scaled = Vector5::new(sp.x, sp.y, sp.z, rho * s.dtheta, rho * s.dphi);
    // in (W, V) coordinates the angular part is rho W, then divide by |W|/2
    let w = Vector2::new(l * s.dtheta, l * s.theta.sin() * s.dphi);
    let wn = w.norm();
    let wv = 2.0 * rho / wn * w;
    let nv = sigma * (s.n() - s.dx);
    let blocks = Vector5::new(wv.x, wv.y, nv.x, nv.y, nv.z);
    Ok(KernelVector {
        scaled,
        unit: scaled.normalize(),
        blocks,
    })
}

/// `w . dL/dq` at zero acceleration for the scaled kernel `w` (`KernelVector::scaled`), i.e. `-w . Z`.
///
/// Vanishes identically for the free fundamental rotator; with a uniform field it
/// equals `-sigma e (l/2)|n'| (n - v).(E + v x H)` with `sigma` the branch sign.
pub fn constraint_functional(sys: &ELSystem, s: &ChartState) -> Result<f64> {
    let shape = sys.shape();
    if !shape.is_fundamental() {
        return Err(Error::NotApplicable("regular shape: the Hessian kernel is empty"));
    }
    let w = analytic_kernel(shape, s)?.scaled;
    Ok(-w.dot(&sys.terms(s)?.z))
}

/// The full probe of one state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HessianReport {
    pub q: f64,
    /// Lab-chart Hessian, rows in `(v1, v2, v3, theta', phi')` order.
    pub h: [[f64; 5]; 5],
    /// Determinant of the block matrix.
    pub det: f64,
    pub det_closed_form: f64,
    pub universal_factor: f64,
    /// Of the lab-chart Hessian, descending.
    pub singular_values: [f64; 5],
    pub rank: usize,
    pub kernel: Vec<[f64; 5]>,
    /// Present when the rank is deficient and a closed-form kernel exists.
    pub constraint_residual: Option<f64>,
}

pub fn probe(sys: &ELSystem, s: &ChartState) -> Result<HessianReport> {
    let shape = sys.shape();
    let blocks = hessian_blocks(shape, s)?;
    let h = blocks.lab_chart(shape);
    let sv = singular_values_desc(&h);
    let ker = kernel(&h, RANK_TOL);
    let constraint_residual = if !ker.is_empty() && shape.is_fundamental() {
        Some(constraint_functional(sys, s)?)
    } else {
        None
    };
    Ok(HessianReport {
        q: blocks.q,
        h: std::array::from_fn(|i| std::array::from_fn(|j| h[(i, j)])),
        det: blocks.assembled().determinant(),
        det_closed_form: blocks.det_closed_form(),
        universal_factor: universal_factor(shape, blocks.q)?,
        singular_values: sv,
        rank: 5 - ker.len(),
        kernel: ker.iter().map(|w| (*w).into()).collect(),
        constraint_residual,
    })
}

/// The lab-chart Hessian of a rotator Lagrangian by finite differences.
///
/// Near `Q = 1` on the minus branch the shape varies on a scale far below the
/// default step, so the step is refined by 4 up to six times and the estimate
/// that changes least under the next refinement is kept.
pub fn rotator_hessian_fd(lag: &RotatorLagrangian, s: &ChartState) -> Result<Matrix5<f64>> {
    let mut opts = FdOptions::default();
    let mut prev = hessian_fd(lag, s, opts)?;
    let mut best = (f64::INFINITY, prev);
    for _ in 0..6 {
        opts.base_step *= 0.25;
        let next = hessian_fd(lag, s, opts)?;
        let change = (next - prev).abs().max() / next.abs().max();
        // agreement to rounding means both runs shrank onto the same stencil
        if change > 1e-13 {
            if change < best.0 {
                best = (change, prev);
            }
            if change <= 1e-9 {
                break;
            }
        }
        prev = next;
    }
    Ok(best.1)
}

/// Integrates `f'' = -f' (1/(2Q) + f'/f)` (the vanishing of the universal factor)
/// from `(f, f')` of the fundamental branch at `q0`, returning `(Q, f)` samples on `[q0/2, 2 q0]`.
pub fn ode_characterization(branch: Branch, q0: f64, rel_tol: f64) -> Result<Vec<(f64, f64)>> {
    let shape = ShapeFunction::fundamental(branch, 1.0, 1.0)?;
    let v = shape.eval(q0)?;
    let rhs = |q: f64, y: &[f64]| -> Result<Vec<f64>> { Ok(vec![y[1], -y[1] * (0.5 / q + y[1] / y[0])]) };
    let tol = Tolerances {
        abs: rel_tol * 1e-3,
        ..Tolerances::new(rel_tol)
    };
    let (fwd, _) = ode::solve(rhs, q0, &[v.f, v.df], 2.0 * q0, &tol)?;
    let (bwd, _) = ode::solve(rhs, q0, &[v.f, v.df], 0.5 * q0, &tol)?;
    let mut out: Vec<(f64, f64)> = bwd.iter().rev().chain(fwd.iter().skip(1)).map(|(q, y)| (*q, y[0])).collect();
    out.dedup_by(|a, b| a.0 == b.0);
    Ok(out)
}
