//! Non-relativistic particle with an internal angle and a singular 4x4 Hessian.
//!
//! Coordinates `(r, phi, z, psi)`,
//! `L = m/2 (r'^2 + r^2 phi'^2 + z'^2) + c m l^2 psi'^2
//!      - m l/2 |psi'| (r' cos(psi - phi) + r phi' sin(psi - phi)) - V`
//! with `c = 1/8` and `V = K z` (electric) or `V = K~ r^2 phi'/2` (magnetic).

use nalgebra::{Matrix4, Vector4};
use serde::Serialize;

use crate::dual::Scalar;
use crate::error::{Error, Result};
use crate::euler_lagrange::{el_terms, fd_hessian, ElTerms, Engine, FdOptions, Lagrangian};
use crate::hessian::singular_values_desc;
use crate::profile::PhaseProfile;

/// The coefficient of `m l^2 psi'^2` that makes the Hessian singular.
pub const SINGULAR_SPIN_COEFFICIENT: f64 = 0.125;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ToyVariant {
    Free,
    Electric { k: f64 },
    Magnetic { k_tilde: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ToyParams {
    pub m: f64,
    pub l: f64,
    pub variant: ToyVariant,
    pub spin_coefficient: f64,
}

impl ToyParams {
    pub fn new(m: f64, l: f64, variant: ToyVariant) -> Result<Self> {
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::invalid("m", "must be positive"));
        }
        if !(l > 0.0 && l.is_finite()) {
            return Err(Error::invalid("l", "must be positive"));
        }
        let field = match variant {
            ToyVariant::Free => 0.0,
            ToyVariant::Electric { k } => k,
            ToyVariant::Magnetic { k_tilde } => k_tilde,
        };
        if !field.is_finite() {
            return Err(Error::invalid("field", "must be finite"));
        }
        Ok(ToyParams {
            m,
            l,
            variant,
            spin_coefficient: SINGULAR_SPIN_COEFFICIENT,
        })
    }

    pub fn with_spin_coefficient(mut self, c: f64) -> Self {
        self.spin_coefficient = c;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ToyState {
    pub t: f64,
    pub r: f64,
    pub phi: f64,
    pub z: f64,
    pub psi: f64,
    pub dr: f64,
    pub dphi: f64,
    pub dz: f64,
    pub dpsi: f64,
}

impl ToyState {
    pub fn coords(&self) -> [f64; 4] {
        [self.r, self.phi, self.z, self.psi]
    }

    pub fn velocities(&self) -> [f64; 4] {
        [self.dr, self.dphi, self.dz, self.dpsi]
    }

    /// `sgn(psi')`.
    pub fn eps(&self) -> Result<f64> {
        if self.dpsi == 0.0 || !self.dpsi.is_finite() {
            return Err(psi_rest());
        }
        Ok(self.dpsi.signum())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r > 0.0) {
            return Err(Error::Domain {
                what: "toy_state",
                value: self.r,
                reason: "r must be positive",
            });
        }
        self.eps().map(|_| ())
    }
}

fn psi_rest() -> Error {
    Error::Domain {
        what: "toy",
        value: 0.0,
        reason: "|psi'| is not differentiable at psi' = 0",
    }
}

impl Lagrangian<4> for ToyParams {
    fn eval<S: Scalar>(&self, q: &[S; 4], v: &[S; 4], _t: S) -> Result<S> {
        let [r, phi, z, psi] = *q;
        let [dr, dphi, dz, dpsi] = *v;
        if dpsi.value() == 0.0 {
            return Err(psi_rest());
        }
        let (m, l) = (self.m, self.l);
        let a = psi - phi;
        let kin = (dr * dr + r * r * dphi * dphi + dz * dz) * (0.5 * m) + dpsi * dpsi * (self.spin_coefficient * m * l * l);
        let coupling = dpsi.abs() * (dr * a.cos() + r * dphi * a.sin()) * (0.5 * m * l);
        let pot = match self.variant {
            ToyVariant::Free => S::cst(0.0),
            ToyVariant::Electric { k } => z * k,
            ToyVariant::Magnetic { k_tilde } => r * r * dphi * (0.5 * k_tilde),
        };
        Ok(kin - coupling - pot)
    }
}

pub fn toy_lagrangian(p: &ToyParams, s: &ToyState) -> Result<f64> {
    p.eval(&s.coords(), &s.velocities(), s.t)
}

/// Velocity Hessian and `Z` of the toy Lagrangian.
pub fn toy_terms(p: &ToyParams, s: &ToyState, engine: Engine) -> Result<ElTerms<4>> {
    s.validate()?;
    el_terms::<4, 9, _>(p, &s.coords(), &s.velocities(), s.t, engine)
}

/// Finite-difference velocity Hessian.
pub fn toy_hessian_fd(p: &ToyParams, s: &ToyState) -> Result<Matrix4<f64>> {
    s.validate()?;
    let q = s.coords();
    // quadratic in the velocities on each side of psi' = 0, so a wide stencil is
    // exact up to rounding; it must stay on the side the state is on
    let opts = FdOptions {
        base_step: 0.1_f64.min(0.25 * s.dpsi.abs()),
        ..FdOptions::default()
    };
    fd_hessian(|v: &[f64; 4]| p.eval(&q, v, s.t), &s.velocities(), opts)
}

/// `w = r cos(psi - phi) d_r + sin(psi - phi) d_phi + (2 r eps / l) d_psi`.
pub fn toy_kernel(s: &ToyState, l: f64) -> Result<Vector4<f64>> {
    let eps = s.eps()?;
    let a = s.psi - s.phi;
    Ok(Vector4::new(s.r * a.cos(), a.sin(), 0.0, 2.0 * s.r * eps / l))
}

/// `w . dL/dq` at zero acceleration, i.e. `-w . Z`.
pub fn toy_constraint(p: &ToyParams, s: &ToyState) -> Result<f64> {
    let t = toy_terms(p, s, Engine::Dual)?;
    Ok(-toy_kernel(s, p.l)?.dot(&t.z))
}

/// Closed form of [`toy_constraint`]: zero without a magnetic term,
/// `K~ r (r phi' cos(psi - phi) - r' sin(psi - phi))` with it.
pub fn toy_constraint_closed_form(p: &ToyParams, s: &ToyState) -> f64 {
    match p.variant {
        ToyVariant::Magnetic { k_tilde } => {
            let a = s.psi - s.phi;
            k_tilde * s.r * (s.r * s.dphi * a.cos() - s.dr * a.sin())
        }
        _ => 0.0,
    }
}

/// `sigma_min / sigma_max` of the velocity Hessian.
pub fn toy_singular_ratio(h: &Matrix4<f64>) -> f64 {
    let sv = singular_values_desc(h);
    sv[3] / sv[0]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "case", rename_all = "snake_case")]
pub enum ToyCase {
    /// `r = l/2`, `phi = nu(t)`, `psi = nu(t) + eps pi/2` in the free or electric variant.
    Indeterminate { nu: PhaseProfile },
    /// `phi = w t`, `psi = w t - pi/2`, `w = K~ R / (m (R + l/2))`.
    A { radius: f64 },
    /// `phi = -w t`, `psi = -w t - pi/2`, `w = K~ R / (m (l/2 - R))`, `R < l/2`.
    B { radius: f64 },
    /// `phi = w t`, `psi = w t + pi/2`, `w = K~ R / (m (R - l/2))`, `R > l/2`.
    C { radius: f64 },
}

impl ToyCase {
    pub fn label(&self) -> &'static str {
        match self {
            ToyCase::Indeterminate { .. } => "indeterminate",
            ToyCase::A { .. } => "a",
            ToyCase::B { .. } => "b",
            ToyCase::C { .. } => "c",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ToySolution {
    /// The fixed frequency of cases a-c.
    pub omega: Option<f64>,
    pub samples: Vec<(ToyState, Vector4<f64>)>,
}

impl ToySolution {
    /// `|H a - Z|` per sample.
    pub fn residual_norms(&self, p: &ToyParams) -> Result<Vec<f64>> {
        self.samples
            .iter()
            .map(|(s, a)| Ok(toy_terms(p, s, Engine::Dual)?.residual(a).norm()))
            .collect()
    }
}

fn circle_frequency(p: &ToyParams, case: &ToyCase) -> Result<(f64, f64, f64, f64)> {
    let ToyVariant::Magnetic { k_tilde } = p.variant else {
        return Err(Error::NotApplicable("fixed-frequency circles need the magnetic variant"));
    };
    if !(k_tilde > 0.0) {
        return Err(Error::Inadmissible(format!("K~ = {k_tilde} must be positive")));
    }
    let half = 0.5 * p.l;
    // (radius, omega, sign of phi', psi offset)
    let (r, w, dir, offset) = match *case {
        ToyCase::A { radius } => (radius, k_tilde * radius / (p.m * (radius + half)), 1.0, -0.5),
        ToyCase::B { radius } => {
            if !(radius < half) {
                return Err(Error::Inadmissible(format!("case b needs R < l/2, got R = {radius}")));
            }
            (radius, k_tilde * radius / (p.m * (half - radius)), -1.0, -0.5)
        }
        ToyCase::C { radius } => {
            if !(radius > half) {
                return Err(Error::Inadmissible(format!("case c needs R > l/2, got R = {radius}")));
            }
            (radius, k_tilde * radius / (p.m * (radius - half)), 1.0, 0.5)
        }
        ToyCase::Indeterminate { .. } => unreachable!(),
    };
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::Inadmissible(format!("R = {r} must be positive")));
    }
    Ok((r, w, dir, offset * std::f64::consts::PI))
}

/// Samples one of the closed-form solutions with its accelerations.
pub fn toy_solution(p: &ToyParams, case: &ToyCase, times: &[f64]) -> Result<ToySolution> {
    match case {
        ToyCase::Indeterminate { nu } => {
            let k = match p.variant {
                ToyVariant::Free => 0.0,
                ToyVariant::Electric { k } => k,
                ToyVariant::Magnetic { .. } => {
                    return Err(Error::NotApplicable("the indeterminate family needs the free or electric variant"));
                }
            };
            let mut eps = None;
            let mut samples = Vec::with_capacity(times.len());
            for &t in times {
                let (v, dv, ddv) = nu.eval(t)?;
                if dv == 0.0 {
                    return Err(Error::Inadmissible(format!("nu' = 0 at t = {t}")));
                }
                let e = *eps.get_or_insert(dv.signum());
                if dv.signum() != e {
                    return Err(Error::Inadmissible(format!("nu' changes sign at t = {t}")));
                }
                let az = -k / p.m;
                let s = ToyState {
                    t,
                    r: 0.5 * p.l,
                    phi: v,
                    z: 0.5 * az * t * t,
                    psi: v + e * std::f64::consts::FRAC_PI_2,
                    dr: 0.0,
                    dphi: dv,
                    dz: az * t,
                    dpsi: dv,
                };
                samples.push((s, Vector4::new(0.0, ddv, az, ddv)));
            }
            Ok(ToySolution { omega: None, samples })
        }
        _ => {
            let (r, w, dir, offset) = circle_frequency(p, case)?;
            let samples = times
                .iter()
                .map(|&t| {
                    let phi = dir * w * t;
                    let s = ToyState {
                        t,
                        r,
                        phi,
                        z: 0.0,
                        psi: phi + offset,
                        dr: 0.0,
                        dphi: dir * w,
                        dz: 0.0,
                        dpsi: dir * w,
                    };
                    (s, Vector4::zeros())
                })
                .collect();
            Ok(ToySolution { omega: Some(w), samples })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_state(rng: &mut ChaCha8Rng) -> ToyState {
        let sgn = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        ToyState {
            t: rng.gen_range(-1.0..1.0),
            r: rng.gen_range(0.2..3.0),
            phi: rng.gen_range(0.0..6.3),
            z: rng.gen_range(-1.0..1.0),
            psi: rng.gen_range(0.0..6.3),
            dr: rng.gen_range(-1.0..1.0),
            dphi: rng.gen_range(-1.0..1.0),
            dz: rng.gen_range(-1.0..1.0),
            dpsi: sgn * rng.gen_range(0.1..2.0),
        }
    }

    fn params(variant: ToyVariant) -> ToyParams {
        ToyParams::new(1.3, 0.8, variant).unwrap()
    }

    #[test]
    fn lagrangian_examples() {
        let p = params(ToyVariant::Free);
        let s = ToyState {
            t: 0.0,
            r: 1.0,
            phi: 0.2,
            z: 0.0,
            psi: 1.0,
            dr: 0.0,
            dphi: 0.0,
            dz: 0.0,
            dpsi: 0.7,
        };
        assert!((toy_lagrangian(&p, &s).unwrap() - 0.125 * 1.3 * 0.64 * 0.49).abs() < 1e-15);
        let mag = params(ToyVariant::Magnetic { k_tilde: 0.9 });
        let s2 = ToyState { dphi: 0.4, ..s };
        let diff = toy_lagrangian(&mag, &s2).unwrap() - toy_lagrangian(&p, &s2).unwrap();
        assert!((diff + 0.5 * 0.9 * 0.4).abs() < 1e-15);
        assert!(toy_lagrangian(&p, &ToyState { dpsi: 0.0, ..s }).is_err());
    }

    #[test]
    fn indeterminate_family_lagrangian_value() {
        // r = l/2 and psi - phi = eps pi/2 on a common rotation rate: L = (1/8 + 1/8 - 1/4) m l^2 nu'^2 = 0
        let p = params(ToyVariant::Free);
        for (nu_dot, eps) in [(0.9, 1.0), (-0.6, -1.0)] {
            let s = ToyState {
                t: 0.0,
                r: 0.4,
                phi: 0.3,
                z: 0.0,
                psi: 0.3 + eps * std::f64::consts::FRAC_PI_2,
                dr: 0.0,
                dphi: nu_dot,
                dz: 0.0,
                dpsi: nu_dot,
            };
            assert!(toy_lagrangian(&p, &s).unwrap().abs() < 1e-15);
        }
    }

    #[test]
    fn kernel_is_the_null_direction() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for variant in [ToyVariant::Free, ToyVariant::Electric { k: 0.7 }, ToyVariant::Magnetic { k_tilde: 1.1 }] {
            let p = params(variant);
            for _ in 0..30 {
                let s = random_state(&mut rng);
                let h = toy_hessian_fd(&p, &s).unwrap();
                let w = toy_kernel(&s, p.l).unwrap();
                assert!((h * w).norm() <= 1e-8 * h.norm() * w.norm(), "{}", (h * w).norm());
                let hd = toy_terms(&p, &s, Engine::Dual).unwrap().hessian;
                assert!((hd * w).norm() <= 1e-12 * hd.norm() * w.norm());
                assert!(toy_singular_ratio(&hd) <= 1e-12);
                // the null space is one-dimensional
                let sv = singular_values_desc(&hd);
                assert!(sv[2] / sv[0] > 1e-6);
            }
        }
        let s = ToyState {
            t: 0.0,
            r: 1.5,
            phi: 0.1,
            z: 0.0,
            psi: 0.1 + std::f64::consts::FRAC_PI_2,
            dr: 0.0,
            dphi: 0.0,
            dz: 0.0,
            dpsi: -1.0,
        };
        let w = toy_kernel(&s, 0.8).unwrap();
        assert!((w - Vector4::new(0.0, 1.0, 0.0, -2.0 * 1.5 / 0.8)).norm() < 1e-15);
    }

    #[test]
    fn constraint_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for variant in [ToyVariant::Free, ToyVariant::Electric { k: 0.7 }, ToyVariant::Magnetic { k_tilde: 1.1 }] {
            let p = params(variant);
            for _ in 0..50 {
                let s = random_state(&mut rng);
                let c = toy_constraint(&p, &s).unwrap();
                let scale = p.m * (1.0 + s.r * s.r) * (1.0 + s.dpsi.abs()).powi(2);
                assert!((c - toy_constraint_closed_form(&p, &s)).abs() <= 1e-12 * scale, "{variant:?}: {c}");
            }
        }
        let mag = params(ToyVariant::Magnetic { k_tilde: 1.1 });
        let circ = ToyState {
            t: 0.0,
            r: 0.7,
            phi: 0.3,
            z: 0.0,
            psi: 0.3 - std::f64::consts::FRAC_PI_2,
            dr: 0.0,
            dphi: 0.5,
            dz: 0.0,
            dpsi: 0.5,
        };
        assert!(toy_constraint_closed_form(&mag, &circ).abs() < 1e-15);
    }

    #[test]
    fn perturbed_coefficient_is_regular() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let p = params(ToyVariant::Free).with_spin_coefficient(0.13);
        for _ in 0..30 {
            let s = random_state(&mut rng);
            let h = toy_hessian_fd(&p, &s).unwrap();
            assert!(toy_singular_ratio(&h) > 1e-4, "{}", toy_singular_ratio(&h));
        }
    }

    #[test]
    fn circle_cases() {
        let times: Vec<f64> = (0..20).map(|i| 0.37 * i as f64).collect();
        let p = ToyParams::new(1.0, 2.0, ToyVariant::Magnetic { k_tilde: 1.0 }).unwrap();
        let a = toy_solution(&p, &ToyCase::A { radius: 1.0 }, &times).unwrap();
        assert_eq!(a.omega, Some(0.5));
        let c = toy_solution(&p, &ToyCase::C { radius: 2.0 }, &times).unwrap();
        assert_eq!(c.omega, Some(2.0));
        let b = toy_solution(&p, &ToyCase::B { radius: 0.4 }, &times).unwrap();
        assert!((b.omega.unwrap() - 0.4 / 0.6).abs() < 1e-15);
        for sol in [&a, &b, &c] {
            assert!(sol.residual_norms(&p).unwrap().iter().all(|r| *r <= 1e-10));
            for (s, _) in &sol.samples {
                assert!(toy_constraint(&p, s).unwrap().abs() < 1e-12);
            }
        }
        assert!(matches!(toy_solution(&p, &ToyCase::B { radius: 1.0 }, &times), Err(Error::Inadmissible(_))));
        assert!(matches!(toy_solution(&p, &ToyCase::C { radius: 0.5 }, &times), Err(Error::Inadmissible(_))));
        let free = ToyParams::new(1.0, 2.0, ToyVariant::Free).unwrap();
        assert!(matches!(toy_solution(&free, &ToyCase::A { radius: 1.0 }, &times), Err(Error::NotApplicable(_))));
        // a frequency off the formula fails
        let mut off = a.clone();
        for (s, _) in off.samples.iter_mut() {
            s.dphi *= 1.01;
            s.dpsi *= 1.01;
        }
        assert!(off.residual_norms(&p).unwrap()[0] > 1e-4);
    }

    #[test]
    fn indeterminate_family_is_a_solution() {
        let times: Vec<f64> = (0..30).map(|i| 0.2 * i as f64).collect();
        for variant in [ToyVariant::Free, ToyVariant::Electric { k: 0.6 }] {
            let p = ToyParams::new(1.0, 2.0, variant).unwrap();
            let lin = ToyCase::Indeterminate {
                nu: PhaseProfile::Linear { omega: 1.0, phi0: 0.0 },
            };
            // t + 0.1 sin t osculates 1.1 t at t = 0
            let wobble = ToyCase::Indeterminate {
                nu: PhaseProfile::Modulated { omega: 1.0, amp: 0.1, nu: 1.0 },
            };
            let osc = ToyCase::Indeterminate {
                nu: PhaseProfile::Linear { omega: 1.1, phi0: 0.0 },
            };
            for case in [&lin, &wobble, &osc] {
                let sol = toy_solution(&p, case, &times).unwrap();
                let res = sol.residual_norms(&p).unwrap();
                assert!(res.iter().all(|r| *r <= 1e-10), "{variant:?} {res:?}");
                if let ToyVariant::Electric { k } = variant {
                    assert!(sol.samples.iter().all(|(_, a)| a[2] == -k / p.m));
                }
            }
            let s1 = toy_solution(&p, &wobble, &times).unwrap();
            let s2 = toy_solution(&p, &osc, &times).unwrap();
            assert_eq!(s1.samples[0].0, s2.samples[0].0);
            assert!((s1.samples[29].0.phi - s2.samples[29].0.phi).abs() > 0.1);
        }
    }
}
