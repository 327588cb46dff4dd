//! Four-vector algebra in Minkowski space.
//!
//! Signature is `(+,-,-,-)` and the Levi-Civita pseudotensor is normalised by
//! `eps^{0123} = +1`. Vectors are stored with upper (contravariant) indices;
//! [`AntisymmetricTensor2`] stores lower (covariant) components.

use std::ops::{Add, AddAssign, Index, Mul, Neg, Sub};

use nalgebra::{Matrix4, Vector3};
use serde::Serialize;

use crate::error::{Error, Result};

const METRIC: [f64; 4] = [1.0, -1.0, -1.0, -1.0];

/// Contravariant four-vector; index 0 is the time component.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct FourVector(pub [f64; 4]);

impl FourVector {
    pub const ZERO: FourVector = FourVector([0.0; 4]);

    pub fn new(t: f64, x: f64, y: f64, z: f64) -> Self {
        FourVector([t, x, y, z])
    }

    pub fn from_parts(time: f64, space: Vector3<f64>) -> Self {
        FourVector([time, space.x, space.y, space.z])
    }

    pub fn time(&self) -> f64 {
        self.0[0]
    }

    pub fn space(&self) -> Vector3<f64> {
        Vector3::new(self.0[1], self.0[2], self.0[3])
    }

    /// Components with the index lowered by the metric.
    pub fn lowered(&self) -> [f64; 4] {
        let mut out = self.0;
        for (c, g) in out.iter_mut().zip(METRIC) {
            *c *= g;
        }
        out
    }

    pub fn dot(&self, other: &FourVector) -> f64 {
        dot(*self, *other)
    }

    pub fn square(&self) -> f64 {
        dot(*self, *self)
    }

    /// Largest absolute component.
    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |acc, c| acc.max(c.abs()))
    }

    /// Euclidean norm of the components, used only for scale estimates.
    pub fn euclidean_norm(&self) -> f64 {
        self.0.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn is_null(&self, tol: f64) -> bool {
        self.square().abs() <= tol
    }

    pub fn is_timelike(&self) -> bool {
        self.square() > 0.0
    }

    pub fn is_spacelike(&self) -> bool {
        self.square() < 0.0
    }
}

impl Index<usize> for FourVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl Add for FourVector {
    type Output = FourVector;
    fn add(self, rhs: FourVector) -> FourVector {
        FourVector(std::array::from_fn(|i| self.0[i] + rhs.0[i]))
    }
}

impl AddAssign for FourVector {
    fn add_assign(&mut self, rhs: FourVector) {
        *self = *self + rhs;
    }
}

impl Sub for FourVector {
    type Output = FourVector;
    fn sub(self, rhs: FourVector) -> FourVector {
        FourVector(std::array::from_fn(|i| self.0[i] - rhs.0[i]))
    }
}

impl Neg for FourVector {
    type Output = FourVector;
    fn neg(self) -> FourVector {
        FourVector(self.0.map(|c| -c))
    }
}

impl Mul<f64> for FourVector {
    type Output = FourVector;
    fn mul(self, s: f64) -> FourVector {
        FourVector(self.0.map(|c| c * s))
    }
}

impl Mul<FourVector> for f64 {
    type Output = FourVector;
    fn mul(self, v: FourVector) -> FourVector {
        v * self
    }
}

/// Rank-2 antisymmetric tensor with lower indices, six stored components.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct AntisymmetricTensor2 {
    /// Components ordered `(01, 02, 03, 12, 13, 23)`.
    pub components: [f64; 6],
}

const PAIRS: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

impl AntisymmetricTensor2 {
    pub fn zero() -> Self {
        Self::default()
    }

    /// `T_{mu nu} = a_mu b_nu - a_nu b_mu` from two contravariant vectors.
    pub fn wedge(a: &FourVector, b: &FourVector) -> Self {
        let (al, bl) = (a.lowered(), b.lowered());
        AntisymmetricTensor2 {
            components: PAIRS.map(|(m, n)| al[m] * bl[n] - al[n] * bl[m]),
        }
    }

    /// Sets `T_{mu nu} = value` (and `T_{nu mu} = -value`).
    pub fn with(mut self, mu: usize, nu: usize, value: f64) -> Self {
        assert!(mu != nu && mu < 4 && nu < 4, "invalid index pair ({mu}, {nu})");
        let (lo, hi, sign) = if mu < nu { (mu, nu, 1.0) } else { (nu, mu, -1.0) };
        let slot = PAIRS.iter().position(|&p| p == (lo, hi)).unwrap();
        self.components[slot] = sign * value;
        self
    }

    pub fn get(&self, mu: usize, nu: usize) -> f64 {
        if mu == nu {
            return 0.0;
        }
        let (lo, hi, sign) = if mu < nu { (mu, nu, 1.0) } else { (nu, mu, -1.0) };
        let slot = PAIRS.iter().position(|&p| p == (lo, hi)).unwrap();
        sign * self.components[slot]
    }

    /// `T_{mu nu} a^mu b^nu`.
    pub fn contract(&self, a: &FourVector, b: &FourVector) -> f64 {
        PAIRS
            .iter()
            .zip(self.components)
            .map(|(&(m, n), c)| c * (a[m] * b[n] - a[n] * b[m]))
            .sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.components.iter().fold(0.0_f64, |acc, c| acc.max(c.abs()))
    }
}

impl Add for AntisymmetricTensor2 {
    type Output = AntisymmetricTensor2;
    fn add(self, rhs: Self) -> Self {
        AntisymmetricTensor2 {
            components: std::array::from_fn(|i| self.components[i] + rhs.components[i]),
        }
    }
}

impl Sub for AntisymmetricTensor2 {
    type Output = AntisymmetricTensor2;
    fn sub(self, rhs: Self) -> Self {
        AntisymmetricTensor2 {
            components: std::array::from_fn(|i| self.components[i] - rhs.components[i]),
        }
    }
}

/// Sign of the permutation `(a, b, c, d)` of `(0, 1, 2, 3)`, zero if an index repeats.
pub fn levi_civita(idx: [usize; 4]) -> f64 {
    let mut sign = 1.0;
    for i in 0..4 {
        for j in i + 1..4 {
            match idx[i].cmp(&idx[j]) {
                std::cmp::Ordering::Equal => return 0.0,
                std::cmp::Ordering::Greater => sign = -sign,
                std::cmp::Ordering::Less => {}
            }
        }
    }
    sign
}

/// The 24 permutations of `(0,1,2,3)` with their signs.
fn permutations() -> &'static [([usize; 4], f64); 24] {
    use std::sync::OnceLock;
    static PERMS: OnceLock<[([usize; 4], f64); 24]> = OnceLock::new();
    PERMS.get_or_init(|| {
        let mut out = [([0; 4], 0.0); 24];
        let mut k = 0;
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    for d in 0..4 {
                        let idx = [a, b, c, d];
                        let s = levi_civita(idx);
                        if s != 0.0 {
                            out[k] = (idx, s);
                            k += 1;
                        }
                    }
                }
            }
        }
        out
    })
}

/// Minkowski scalar product `a0 b0 - a.b`.
pub fn dot(a: FourVector, b: FourVector) -> f64 {
    a.0[0] * b.0[0] - a.0[1] * b.0[1] - a.0[2] * b.0[2] - a.0[3] * b.0[3]
}

/// `v^mu = eps^{mu nu alpha beta} a_nu b_alpha c_beta`.
pub fn epsilon_contract3(a: FourVector, b: FourVector, c: FourVector) -> FourVector {
    let (al, bl, cl) = (a.lowered(), b.lowered(), c.lowered());
    let mut out = [0.0; 4];
    for &([mu, nu, alpha, beta], s) in permutations() {
        out[mu] += s * al[nu] * bl[alpha] * cl[beta];
    }
    FourVector(out)
}

/// Pauli-Lubanski vector `W^mu = -1/2 eps^{mu alpha beta gamma} M_{alpha beta} P_gamma`.
pub fn pauli_lubanski(m: &AntisymmetricTensor2, p: FourVector) -> FourVector {
    let pl = p.lowered();
    let mut out = [0.0; 4];
    for &([mu, alpha, beta, gamma], s) in permutations() {
        out[mu] -= 0.5 * s * m.get(alpha, beta) * pl[gamma];
    }
    FourVector(out)
}

/// Hyperbolic angle between two future-pointing timelike vectors.
///
/// The cosh argument is clamped to `[1, inf)` to absorb rounding.
pub fn rapidity(u: FourVector, p: FourVector) -> Result<f64> {
    let (uu, pp) = (u.square(), p.square());
    if !(uu > 0.0) {
        return Err(Error::Domain {
            what: "rapidity",
            value: uu,
            reason: "first argument is not timelike",
        });
    }
    if !(pp > 0.0) {
        return Err(Error::Domain {
            what: "rapidity",
            value: pp,
            reason: "second argument is not timelike",
        });
    }
    let c = dot(u, p) / (uu * pp).sqrt();
    Ok(c.max(1.0).acosh())
}

/// Pure boost with velocity `beta` (|beta| < 1) as a 4x4 matrix acting on contravariant vectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Boost {
    matrix: Matrix4<f64>,
}

impl Boost {
    pub fn new(beta: Vector3<f64>) -> Result<Self> {
        let b2 = beta.norm_squared();
        if !(b2 < 1.0) {
            return Err(Error::invalid("boost", format!("|beta|^2 = {b2} must be < 1")));
        }
        let gamma = 1.0 / (1.0 - b2).sqrt();
        let mut m = Matrix4::identity();
        m[(0, 0)] = gamma;
        for i in 0..3 {
            m[(0, i + 1)] = gamma * beta[i];
            m[(i + 1, 0)] = gamma * beta[i];
            for j in 0..3 {
                let k = if b2 > 0.0 { (gamma - 1.0) * beta[i] * beta[j] / b2 } else { 0.0 };
                m[(i + 1, j + 1)] += k;
            }
        }
        Ok(Boost { matrix: m })
    }

    pub fn apply(&self, v: FourVector) -> FourVector {
        let r = self.matrix * nalgebra::Vector4::from(v.0);
        FourVector([r[0], r[1], r[2], r[3]])
    }

    /// Transforms a lower-index antisymmetric tensor consistently with [`Boost::apply`].
    pub fn apply_tensor(&self, t: &AntisymmetricTensor2) -> AntisymmetricTensor2 {
        // lower-index components transform with the inverse transpose: L_low = G L G
        let g = Matrix4::from_diagonal(&nalgebra::Vector4::from(METRIC));
        let low = g * self.matrix * g;
        let mut full = Matrix4::zeros();
        for mu in 0..4 {
            for nu in 0..4 {
                full[(mu, nu)] = t.get(mu, nu);
            }
        }
        let out = low * full * low.transpose();
        let mut res = AntisymmetricTensor2::zero();
        for (slot, &(m, n)) in PAIRS.iter().enumerate() {
            res.components[slot] = out[(m, n)];
        }
        res
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(i: usize) -> FourVector {
        let mut c = [0.0; 4];
        c[i] = 1.0;
        FourVector(c)
    }

    #[test]
    fn dot_examples() {
        assert_eq!(dot(e(0), e(0)), 1.0);
        let v = FourVector::new(1.0, 1.0, 0.0, 0.0);
        assert_eq!(dot(v, v), 0.0);
        assert_eq!(dot(FourVector::new(2.0, 1.0, 1.0, 1.0), FourVector::new(1.0, 2.0, 3.0, 0.0)), -3.0);
    }

    /// Independent oracle: the full 4^4 index sum with an explicit sign function.
    fn epsilon_bruteforce(a: FourVector, b: FourVector, c: FourVector) -> FourVector {
        let (al, bl, cl) = (a.lowered(), b.lowered(), c.lowered());
        let mut out = [0.0; 4];
        for mu in 0..4 {
            for nu in 0..4 {
                for al_ in 0..4 {
                    for be in 0..4 {
                        out[mu] += levi_civita([mu, nu, al_, be]) * al[nu] * bl[al_] * cl[be];
                    }
                }
            }
        }
        FourVector(out)
    }

    #[test]
    fn epsilon_of_spatial_basis() {
        let v = epsilon_contract3(e(1), e(2), e(3));
        assert_eq!(v, FourVector::new(-1.0, 0.0, 0.0, 0.0));
        assert_eq!(v, epsilon_bruteforce(e(1), e(2), e(3)));
        assert_eq!(epsilon_contract3(e(1), e(1), e(3)), FourVector::ZERO);
    }

    #[test]
    fn levi_civita_normalisation() {
        assert_eq!(levi_civita([0, 1, 2, 3]), 1.0);
        assert_eq!(levi_civita([1, 0, 2, 3]), -1.0);
        assert_eq!(levi_civita([3, 1, 2, 0]), -1.0);
        assert_eq!(levi_civita([0, 0, 2, 3]), 0.0);
    }

    #[test]
    fn pauli_lubanski_rest_frame_spin() {
        // M_{12} = s at rest: W^3 = -1/2 (eps^{3120} s + eps^{3210} (-s)) m = m s
        let (m, s) = (1.7, 0.4);
        let mt = AntisymmetricTensor2::zero().with(1, 2, s);
        let w = pauli_lubanski(&mt, FourVector::new(m, 0.0, 0.0, 0.0));
        assert!((w.0[0]).abs() < 1e-15 && w.0[1].abs() < 1e-15 && w.0[2].abs() < 1e-15);
        assert!((w.0[3] - m * s).abs() < 1e-15);
        assert_eq!(pauli_lubanski(&AntisymmetricTensor2::zero(), e(0)), FourVector::ZERO);
    }

    #[test]
    fn rapidity_cases() {
        let p = FourVector::new(1.0, 0.0, 0.0, 0.0);
        assert_eq!(rapidity(p, p).unwrap(), 0.0);
        let a: f64 = 0.83;
        let u = FourVector::new(a.cosh(), a.sinh(), 0.0, 0.0);
        assert!((rapidity(u, p).unwrap() - a).abs() < 1e-12);
        // rounding below one is clamped
        let q = FourVector::new(1.0 + 1e-17, 1e-9, 0.0, 0.0);
        assert_eq!(rapidity(q * 3.0, q).unwrap(), 0.0);
        assert!(rapidity(e(1), p).is_err());
    }

    #[test]
    fn boost_preserves_dot_and_tensor_contraction() {
        let b = Boost::new(Vector3::new(0.3, -0.2, 0.5)).unwrap();
        let x = FourVector::new(1.2, 0.3, -0.7, 0.1);
        let y = FourVector::new(-0.4, 2.0, 0.5, 1.1);
        assert!((dot(b.apply(x), b.apply(y)) - dot(x, y)).abs() < 1e-13);
        let t = AntisymmetricTensor2::wedge(&x, &y);
        let tb = b.apply_tensor(&t);
        assert!((tb.contract(&b.apply(x), &b.apply(y)) - t.contract(&x, &y)).abs() < 1e-12);
        assert!(Boost::new(Vector3::new(1.0, 0.0, 0.0)).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn fv() -> impl Strategy<Value = FourVector> {
            proptest::array::uniform4(-3.0..3.0f64).prop_map(FourVector)
        }

        proptest! {
            #[test]
            fn dot_symmetric_bilinear(a in fv(), b in fv(), c in fv(), s in -2.0..2.0f64) {
                prop_assert_eq!(dot(a, b), dot(b, a));
                let lhs = dot(a * s + b, c);
                let rhs = s * dot(a, c) + dot(b, c);
                prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
            }

            #[test]
            fn epsilon_antisymmetric_and_matches_bruteforce(a in fv(), b in fv(), c in fv()) {
                let v = epsilon_contract3(a, b, c);
                let o = epsilon_bruteforce(a, b, c);
                for i in 0..4 {
                    prop_assert!((v[i] - o[i]).abs() < 1e-12);
                    prop_assert!((v[i] + epsilon_contract3(b, a, c)[i]).abs() < 1e-12);
                    prop_assert!((v[i] + epsilon_contract3(a, c, b)[i]).abs() < 1e-12);
                    prop_assert!((v[i] + epsilon_contract3(c, b, a)[i]).abs() < 1e-12);
                    prop_assert!((epsilon_contract3(a * 2.0, b, c)[i] - 2.0 * v[i]).abs() < 1e-12);
                }
            }

            #[test]
            fn pauli_lubanski_orthogonal_to_p(x in fv(), y in fv(), k in fv(), q in fv(), p in fv()) {
                let m = AntisymmetricTensor2::wedge(&x, &y) + AntisymmetricTensor2::wedge(&k, &q);
                let w = pauli_lubanski(&m, p);
                prop_assert!(dot(w, p).abs() <= 1e-12 * w.euclidean_norm().max(1e-300) * p.euclidean_norm() + 1e-14);
            }
        }
    }
}
