//! Euler-Lagrange assembly for Lagrangians on `D` coordinates.
//!
//! The equations are written as `H(q, v, t) a = Z(q, v, t)` with the velocity
//! Hessian `H_ij = d2L/dv_i dv_j` and
//! `Z_i = dL/dq_i - sum_j d2L/(dv_i dq_j) v_j - d2L/(dv_i dt)`.
//! Both objects come from one jet evaluation (exact to rounding) or from a
//! finite-difference oracle that only needs plain `f64` evaluations.

use nalgebra::{SMatrix, SVector};

use crate::dual::{Jet, Scalar};
use crate::error::{Error, Result};

/// A Lagrangian that can be evaluated on any [`Scalar`].
pub trait Lagrangian<const D: usize> {
    fn eval<S: Scalar>(&self, q: &[S; D], v: &[S; D], t: S) -> Result<S>;
}

/// Step policy for the finite-difference oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdOptions {
    /// Relative step; coordinate `i` uses `base_step * max(1, |x_i|)`.
    pub base_step: f64,
    /// Combine steps `h` and `h/2` to cancel the `O(h^2)` error term.
    pub richardson: bool,
    /// How often the stencil is shrunk by 4 after an evaluation failure.
    pub max_shrinks: u32,
}

impl Default for FdOptions {
    fn default() -> Self {
        FdOptions {
            base_step: 1e-3,
            richardson: true,
            max_shrinks: 3,
        }
    }
}

/// Which derivative engine assembles `H` and `Z`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Engine {
    #[default]
    Dual,
    FiniteDifference(FdOptions),
}

/// Velocity Hessian, acceleration-free right-hand side and the Lagrangian value.
#[derive(Debug, Clone, PartialEq)]
pub struct ElTerms<const D: usize> {
    pub hessian: SMatrix<f64, D, D>,
    pub z: SVector<f64, D>,
    pub value: f64,
}

impl<const D: usize> ElTerms<D> {
    /// `H a - Z`, the Euler-Lagrange expressions `d/dt dL/dv - dL/dq` at accelerations `a`.
    pub fn residual(&self, accel: &SVector<f64, D>) -> SVector<f64, D> {
        self.hessian * accel - self.z
    }
}

/// Assembles `H` and `Z`. `N` must equal `2 D + 1` (coordinates, velocities, time).
pub fn el_terms<const D: usize, const N: usize, L: Lagrangian<D>>(
    lag: &L,
    q: &[f64; D],
    v: &[f64; D],
    t: f64,
    engine: Engine,
) -> Result<ElTerms<D>> {
    assert_eq!(N, 2 * D + 1, "jet width must be 2D+1");
    match engine {
        Engine::Dual => dual_terms::<D, N, L>(lag, q, v, t),
        Engine::FiniteDifference(opts) => fd_terms(lag, q, v, t, opts),
    }
}

fn dual_terms<const D: usize, const N: usize, L: Lagrangian<D>>(
    lag: &L,
    q: &[f64; D],
    v: &[f64; D],
    t: f64,
) -> Result<ElTerms<D>> {
    let qj: [Jet<N>; D] = std::array::from_fn(|i| Jet::variable(q[i], i));
    let vj: [Jet<N>; D] = std::array::from_fn(|i| Jet::variable(v[i], D + i));
    let tj = Jet::variable(t, 2 * D);
    let l = lag.eval(&qj, &vj, tj)?;
    let hessian = SMatrix::<f64, D, D>::from_fn(|i, j| l.h[D + i][D + j]);
    let z = SVector::<f64, D>::from_fn(|i, _| {
        let mixed: f64 = (0..D).map(|j| l.h[D + i][j] * v[j]).sum();
        l.g[i] - mixed - l.h[D + i][2 * D]
    });
    Ok(ElTerms {
        hessian,
        z,
        value: l.v,
    })
}

/// Finite-difference derivatives of a scalar function of `x` with a shared step policy.
struct Stencil<'a, F> {
    f: &'a F,
    x: Vec<f64>,
    steps: Vec<f64>,
    richardson: bool,
}

impl<F: Fn(&[f64]) -> Result<f64>> Stencil<'_, F> {
    fn at(&self, shifts: &[(usize, f64)]) -> Result<f64> {
        let mut y = self.x.clone();
        for &(i, d) in shifts {
            y[i] += d;
        }
        (self.f)(&y)
    }

    fn first_h(&self, i: usize, h: f64) -> Result<f64> {
        Ok((self.at(&[(i, h)])? - self.at(&[(i, -h)])?) / (2.0 * h))
    }

    fn second_h(&self, i: usize, j: usize, hi: f64, hj: f64) -> Result<f64> {
        if i == j {
            let f0 = self.at(&[])?;
            Ok((self.at(&[(i, hi)])? - 2.0 * f0 + self.at(&[(i, -hi)])?) / (hi * hi))
        } else {
            let pp = self.at(&[(i, hi), (j, hj)])?;
            let pm = self.at(&[(i, hi), (j, -hj)])?;
            let mp = self.at(&[(i, -hi), (j, hj)])?;
            let mm = self.at(&[(i, -hi), (j, -hj)])?;
            Ok((pp - pm - mp + mm) / (4.0 * hi * hj))
        }
    }

    fn first(&self, i: usize) -> Result<f64> {
        let h = self.steps[i];
        let d = self.first_h(i, h)?;
        if !self.richardson {
            return Ok(d);
        }
        let d2 = self.first_h(i, 0.5 * h)?;
        Ok((4.0 * d2 - d) / 3.0)
    }

    fn second(&self, i: usize, j: usize) -> Result<f64> {
        let (hi, hj) = (self.steps[i], self.steps[j]);
        let d = self.second_h(i, j, hi, hj)?;
        if !self.richardson {
            return Ok(d);
        }
        let d2 = self.second_h(i, j, 0.5 * hi, 0.5 * hj)?;
        Ok((4.0 * d2 - d) / 3.0)
    }
}

/// Runs `body` on a stencil, shrinking the steps after evaluation failures.
fn with_stencil<F, T>(
    f: &F,
    x: &[f64],
    opts: FdOptions,
    body: impl Fn(&Stencil<'_, F>) -> Result<T>,
) -> Result<T>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    // the centre point must evaluate, otherwise shrinking cannot help
    f(x)?;
    let mut scale = 1.0;
    let mut last = None;
    let mut attempts = 0;
    for _ in 0..=opts.max_shrinks {
        attempts += 1;
        let stencil = Stencil {
            f,
            x: x.to_vec(),
            steps: x.iter().map(|xi| scale * opts.base_step * xi.abs().max(1.0)).collect(),
            richardson: opts.richardson,
        };
        match body(&stencil) {
            Ok(v) => return Ok(v),
            Err(e) => last = Some(e),
        }
        scale *= 0.25;
    }
    let source = last.expect("at least one attempt");
    Err(Error::Stencil {
        attempts,
        source: Box::new(source),
    })
}

fn fd_terms<const D: usize, L: Lagrangian<D>>(
    lag: &L,
    q: &[f64; D],
    v: &[f64; D],
    t: f64,
    opts: FdOptions,
) -> Result<ElTerms<D>> {
    let eval = |x: &[f64]| -> Result<f64> {
        let qq: [f64; D] = std::array::from_fn(|i| x[i]);
        let vv: [f64; D] = std::array::from_fn(|i| x[D + i]);
        lag.eval(&qq, &vv, x[2 * D])
    };
    let mut x = Vec::with_capacity(2 * D + 1);
    x.extend_from_slice(q);
    x.extend_from_slice(v);
    x.push(t);
    let value = eval(&x)?;
    with_stencil(&eval, &x, opts, |s| {
        let mut hessian = SMatrix::<f64, D, D>::zeros();
        for i in 0..D {
            for j in i..D {
                let h = s.second(D + i, D + j)?;
                hessian[(i, j)] = h;
                hessian[(j, i)] = h;
            }
        }
        let mut z = SVector::<f64, D>::zeros();
        for i in 0..D {
            let mut zi = s.first(i)?;
            for (j, vj) in v.iter().enumerate() {
                if *vj != 0.0 {
                    zi -= s.second(D + i, j)? * vj;
                }
            }
            zi -= s.second(D + i, 2 * D)?;
            z[i] = zi;
        }
        Ok(ElTerms { hessian, z, value })
    })
}

/// Symmetrised finite-difference Hessian of `f` at `x`.
pub fn fd_hessian<const D: usize, F>(f: F, x: &[f64; D], opts: FdOptions) -> Result<SMatrix<f64, D, D>>
where
    F: Fn(&[f64; D]) -> Result<f64>,
{
    let g = |y: &[f64]| -> Result<f64> { f(&std::array::from_fn(|i| y[i])) };
    with_stencil(&g, x, opts, |s| {
        let mut h = SMatrix::<f64, D, D>::zeros();
        for i in 0..D {
            for j in i..D {
                let v = s.second(i, j)?;
                h[(i, j)] = v;
                h[(j, i)] = v;
            }
        }
        Ok(h)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Matrix3;

    /// Anisotropic oscillator with a velocity-dependent coupling and explicit time dependence.
    struct Toy;

    impl Lagrangian<2> for Toy {
        fn eval<S: Scalar>(&self, q: &[S; 2], v: &[S; 2], t: S) -> Result<S> {
            let kin = v[0] * v[0] * 0.5 + v[1] * v[1] * 1.5 + v[0] * q[1] * 0.3;
            Ok(kin - q[0] * q[0] * 2.0 - q[1].sin() * t)
        }
    }

    #[test]
    fn hand_derived_terms() {
        // H = diag(1, 3); Z_0 = -4 q0 - 0.3 v1; Z_1 = 0.3 v0 - t cos q1
        let (q, v, t) = ([0.4, -0.2], [0.7, 1.1], 0.9);
        let e = el_terms::<2, 5, _>(&Toy, &q, &v, t, Engine::Dual).unwrap();
        assert_eq!(e.hessian[(0, 0)], 1.0);
        assert_eq!(e.hessian[(1, 1)], 3.0);
        assert_eq!(e.hessian[(0, 1)], 0.0);
        assert!((e.z[0] - (-4.0 * q[0] - 0.3 * v[1])).abs() < 1e-15);
        assert!((e.z[1] - (0.3 * v[0] - t * f64::cos(q[1]))).abs() < 1e-15);

        let fd = el_terms::<2, 5, _>(&Toy, &q, &v, t, Engine::FiniteDifference(FdOptions::default())).unwrap();
        assert!((fd.hessian - e.hessian).abs().max() < 1e-8);
        assert!((fd.z - e.z).abs().max() < 1e-8);
    }

    #[test]
    fn quadratic_hessian_exact() {
        let k = Matrix3::new(2.0, 0.5, -0.3, 0.5, 1.0, 0.2, -0.3, 0.2, 4.0);
        let f = |v: &[f64; 3]| -> Result<f64> {
            let x = nalgebra::Vector3::from(*v);
            Ok(0.5 * x.dot(&(k * x)))
        };
        let h = fd_hessian(f, &[0.3, -1.2, 2.5], FdOptions::default()).unwrap();
        // exact up to cancellation in the second difference
        assert!((h - k).abs().max() < 1e-6);
    }

    #[test]
    fn stencil_shrinks_near_domain_edge() {
        // sqrt(1 - v) is undefined past v = 1; the centre 0.9995 is within a default step of it
        let f = |v: &[f64; 1]| -> Result<f64> {
            if v[0] >= 1.0 {
                Err(Error::Superluminal(v[0]))
            } else {
                Ok((1.0 - v[0]).sqrt())
            }
        };
        let h = fd_hessian(f, &[0.9995], FdOptions::default()).unwrap();
        let exact = -0.25 * (1.0f64 - 0.9995).powf(-1.5);
        // the shrunk step is half the distance to the edge, so only a few digits survive
        assert!(((h[(0, 0)] - exact) / exact).abs() < 1e-2);
        assert!(matches!(fd_hessian(f, &[1.5], FdOptions::default()), Err(Error::Superluminal(_))));
    }
}
