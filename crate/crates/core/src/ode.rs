//! Dormand-Prince 5(4) explicit Runge-Kutta with an embedded error estimate.

use crate::error::{Error, Result};

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Tolerances and step limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub rel: f64,
    pub abs: f64,
    pub h_min: f64,
    pub h_max: f64,
}

impl Tolerances {
    pub fn new(rel: f64) -> Self {
        Tolerances {
            rel,
            abs: rel * 1e-2,
            h_min: 1e-14,
            h_max: f64::INFINITY,
        }
    }
}

/// One attempted step: the fifth-order solution and the scaled error norm.
#[derive(Debug, Clone)]
pub struct Attempt {
    pub y: Vec<f64>,
    pub err: f64,
    /// Derivative at the end point (first stage of the next step).
    pub dy_end: Vec<f64>,
}

/// Takes one Dormand-Prince step of size `h` from `(t, y)` given `dy = f(t, y)`.
pub fn attempt<F>(f: &mut F, t: f64, y: &[f64], dy: &[f64], h: f64, tol: &Tolerances) -> Result<Attempt>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>> + ?Sized,
{
    let n = y.len();
    let mut k: Vec<Vec<f64>> = Vec::with_capacity(7);
    k.push(dy.to_vec());
    let mut tmp = vec![0.0; n];
    for s in 1..7 {
        for i in 0..n {
            let mut acc = 0.0;
            for (j, kj) in k.iter().enumerate() {
                acc += A[s][j] * kj[i];
            }
            tmp[i] = y[i] + h * acc;
        }
        k.push(f(t + C[s] * h, &tmp)?);
    }
    // stage 7 is evaluated at the fifth-order solution (FSAL)
    let y5 = tmp;
    let mut sum = 0.0;
    for i in 0..n {
        let mut e = 0.0;
        for s in 0..7 {
            e += (B5[s] - B4[s]) * k[s][i];
        }
        let sc = tol.abs + tol.rel * y[i].abs().max(y5[i].abs());
        sum += (h * e / sc).powi(2);
    }
    Ok(Attempt {
        y: y5,
        err: (sum / n as f64).sqrt(),
        dy_end: k.pop().unwrap(),
    })
}

/// Step-size factor for the next step after an error norm `err`.
pub fn step_factor(err: f64) -> f64 {
    if err == 0.0 {
        5.0
    } else {
        (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
    }
}

/// Initial step guess from the derivative scale.
pub fn initial_step(y: &[f64], dy: &[f64], tol: &Tolerances, span: f64) -> f64 {
    let mut d0: f64 = 0.0;
    let mut d1: f64 = 0.0;
    for (yi, di) in y.iter().zip(dy) {
        let sc = tol.abs + tol.rel * yi.abs();
        d0 = d0.max(yi.abs() / sc);
        d1 = d1.max(di.abs() / sc);
    }
    let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h.min(span.abs()).min(tol.h_max).max(tol.h_min)
}

/// Statistics of an integration run.
#[derive(Debug, Clone, Copy, Default, PartialEq, serde::Serialize)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

/// Integrates `dy/dt = f(t, y)` from `t0` to `t1` (either direction), returning every accepted point.
pub fn solve<F>(mut f: F, t0: f64, y0: &[f64], t1: f64, tol: &Tolerances) -> Result<(Vec<(f64, Vec<f64>)>, Stats)>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
{
    let dir = if t1 >= t0 { 1.0 } else { -1.0 };
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut dy = f(t, &y)?;
    let mut stats = Stats {
        evaluations: 1,
        ..Stats::default()
    };
    let mut h = initial_step(&y, &dy, tol, t1 - t0);
    let mut out = vec![(t, y.clone())];
    while dir * (t1 - t) > 0.0 {
        let last = h >= dir * (t1 - t);
        let step = if last { t1 - t } else { dir * h };
        let res = attempt(&mut f, t, &y, &dy, step, tol);
        stats.evaluations += 6;
        match res {
            Ok(a) if a.err <= 1.0 => {
                t = if last { t1 } else { t + step };
                y = a.y;
                dy = a.dy_end;
                stats.accepted += 1;
                out.push((t, y.clone()));
                h = (step.abs() * step_factor(a.err)).min(tol.h_max);
            }
            Ok(a) => {
                stats.rejected += 1;
                h = step.abs() * step_factor(a.err).min(1.0);
            }
            Err(_) => {
                stats.rejected += 1;
                h = step.abs() * 0.25;
            }
        }
        if h < tol.h_min {
            return Err(Error::StepUnderflow { t, h });
        }
    }
    Ok((out, stats))
}
