//! Shape functions `f(Q)` selecting a member of the rotator family.
//!
//! Every built-in shape is the square root of a polynomial in `s = sqrt(Q)`:
//! `f(Q) = sqrt(c0 + c1 s + c2 s^2 + ...)`. Shapes with only even powers are
//! smooth at `Q = 0`; the others are evaluated only for `Q > 0`.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::dual::Scalar;
use crate::error::{Error, Result};

/// Sign selecting one of the two fundamental rotators, `f = sqrt(1 +/- sqrt(Q))`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ShapeKind {
    FundamentalPlus,
    FundamentalMinus,
    /// `sqrt(1 + a^2 sqrt(Q))`.
    SqrtPoly { a: f64 },
    /// `1 + sqrt(Q)`.
    RationalSqrt,
    /// `sqrt(1 + Q)`.
    Smooth,
    /// `sqrt(sum_k c_k Q^{k/2})` on `0 <= Q <= q_max`.
    Custom { coeffs: Vec<f64>, q_max: Option<f64> },
}

/// Values of `f`, `f'` and `f''` at one `Q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShapeValues {
    pub f: f64,
    pub df: f64,
    pub d2f: f64,
}

/// A shape function together with the model scales `m` (mass) and `l` (length).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShapeFunction {
    pub kind: ShapeKind,
    pub m: f64,
    pub l: f64,
}

impl ShapeFunction {
    pub fn new(kind: ShapeKind, m: f64, l: f64) -> Result<Self> {
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::invalid("m", format!("mass must be positive, got {m}")));
        }
        if !(l > 0.0 && l.is_finite()) {
            return Err(Error::invalid("l", format!("length must be positive, got {l}")));
        }
        match &kind {
            ShapeKind::SqrtPoly { a } if !(*a > 0.0 && a.is_finite()) => {
                return Err(Error::invalid("a", format!("sqrt_poly needs a > 0, got {a}")));
            }
            ShapeKind::Custom { coeffs, q_max } => {
                if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
                    return Err(Error::invalid("coeffs", "custom shape needs finite coefficients"));
                }
                if coeffs.iter().skip(1).all(|&c| c == 0.0) {
                    return Err(Error::invalid("coeffs", "custom shape is constant, f' = 0"));
                }
                if let Some(q) = q_max {
                    if !(*q > 0.0) {
                        return Err(Error::invalid("qmax", format!("must be positive, got {q}")));
                    }
                }
            }
            _ => {}
        }
        Ok(ShapeFunction { kind, m, l })
    }

    pub fn fundamental(branch: Branch, m: f64, l: f64) -> Result<Self> {
        let kind = match branch {
            Branch::Plus => ShapeKind::FundamentalPlus,
            Branch::Minus => ShapeKind::FundamentalMinus,
        };
        Self::new(kind, m, l)
    }

    /// Parses a shape tag (`fundamental+`, `sqrt_poly:a=2`, ...) with the given scales.
    pub fn from_tag(tag: &str, m: f64, l: f64) -> Result<Self> {
        Self::new(tag.parse()?, m, l)
    }

    /// Coefficients of the radicand as a polynomial in `sqrt(Q)`.
    pub fn radicand(&self) -> Vec<f64> {
        match &self.kind {
            ShapeKind::FundamentalPlus => vec![1.0, 1.0],
            ShapeKind::FundamentalMinus => vec![1.0, -1.0],
            ShapeKind::SqrtPoly { a } => vec![1.0, a * a],
            ShapeKind::RationalSqrt => vec![1.0, 2.0, 1.0],
            ShapeKind::Smooth => vec![1.0, 0.0, 1.0],
            ShapeKind::Custom { coeffs, .. } => coeffs.clone(),
        }
    }

    /// Which fundamental rotator this shape is, if any.
    pub fn fundamental_branch(&self) -> Option<Branch> {
        match self.radicand().as_slice() {
            [c0, c1] if *c0 == 1.0 && *c1 == 1.0 => Some(Branch::Plus),
            [c0, c1] if *c0 == 1.0 && *c1 == -1.0 => Some(Branch::Minus),
            _ => None,
        }
    }

    pub fn is_fundamental(&self) -> bool {
        self.fundamental_branch().is_some()
    }

    /// True when `f` is smooth at `Q = 0` (no odd powers of `sqrt(Q)`).
    pub fn smooth_at_zero(&self) -> bool {
        self.radicand().iter().skip(1).step_by(2).all(|&c| c == 0.0)
    }

    /// Upper end of the declared `Q` domain.
    pub fn q_max(&self) -> Option<f64> {
        match &self.kind {
            ShapeKind::FundamentalMinus => Some(1.0),
            ShapeKind::Custom { q_max, .. } => *q_max,
            _ => None,
        }
    }

    /// `f`, `f'`, `f''` at `q`.
    pub fn eval(&self, q: f64) -> Result<ShapeValues> {
        shape_eval(self, q)
    }

    /// `f(Q)` lifted to any scalar type through its first two derivatives.
    pub fn apply<S: Scalar>(&self, q: S) -> Result<S> {
        let v = self.eval(q.value())?;
        Ok(q.chain(v.f, v.df, v.d2f))
    }
}

fn poly(coeffs: &[f64], x: f64) -> (f64, f64, f64) {
    let (mut p, mut dp, mut d2p) = (0.0, 0.0, 0.0);
    for &c in coeffs.iter().rev() {
        d2p = d2p * x + 2.0 * dp;
        dp = dp * x + p;
        p = p * x + c;
    }
    (p, dp, d2p)
}

/// Values of `f(Q)` and its first two derivatives with respect to `Q`.
pub fn shape_eval(shape: &ShapeFunction, q: f64) -> Result<ShapeValues> {
    if !(q >= 0.0) || !q.is_finite() {
        return Err(Error::Domain {
            what: "shape_eval",
            value: q,
            reason: "Q must be finite and non-negative",
        });
    }
    if let Some(qmax) = shape.q_max() {
        if q >= qmax {
            return Err(Error::Domain {
                what: "shape_eval",
                value: q,
                reason: "Q beyond the shape domain",
            });
        }
    }
    let coeffs = shape.radicand();
    let (g, dg, d2g) = if shape.smooth_at_zero() {
        let even: Vec<f64> = coeffs.iter().step_by(2).copied().collect();
        poly(&even, q)
    } else {
        if q == 0.0 {
            return Err(Error::NonSmoothPoint);
        }
        let s = q.sqrt();
        let (p, dp, d2p) = poly(&coeffs, s);
        (p, dp / (2.0 * s), (d2p * s - dp) / (4.0 * s * s * s))
    };
    if !(g > 0.0) {
        return Err(Error::Domain {
            what: "shape_eval",
            value: q,
            reason: "f(Q) must be positive",
        });
    }
    let f = g.sqrt();
    Ok(ShapeValues {
        f,
        df: dg / (2.0 * f),
        d2f: d2g / (2.0 * f) - dg * dg / (4.0 * f * f * f),
    })
}

impl FromStr for ShapeKind {
    type Err = Error;

    fn from_str(tag: &str) -> Result<Self> {
        let tag = tag.trim();
        let bad = |msg: &str| Error::Parse(format!("shape tag `{tag}`: {msg}"));
        match tag {
            "fundamental+" => return Ok(ShapeKind::FundamentalPlus),
            "fundamental-" => return Ok(ShapeKind::FundamentalMinus),
            "rational_sqrt" => return Ok(ShapeKind::RationalSqrt),
            "smooth" => return Ok(ShapeKind::Smooth),
            _ => {}
        }
        if let Some(rest) = tag.strip_prefix("sqrt_poly:") {
            let a = rest
                .strip_prefix("a=")
                .ok_or_else(|| bad("expected `a=<real>`"))?
                .parse::<f64>()
                .map_err(|e| bad(&e.to_string()))?;
            if !(a > 0.0 && a.is_finite()) {
                return Err(bad("a must be a positive real"));
            }
            return Ok(ShapeKind::SqrtPoly { a });
        }
        if let Some(rest) = tag.strip_prefix("custom:") {
            let (list, qmax) = match rest.split_once(";qmax=") {
                Some((l, q)) => (l, Some(q.parse::<f64>().map_err(|e| bad(&e.to_string()))?)),
                None => (rest, None),
            };
            let coeffs = list
                .split(',')
                .map(|c| c.trim().parse::<f64>().map_err(|e| bad(&e.to_string())))
                .collect::<Result<Vec<_>>>()?;
            if coeffs.is_empty() || coeffs.len() > 16 || coeffs.iter().any(|c| !c.is_finite()) {
                return Err(bad("expected 1 to 16 finite coefficients"));
            }
            if let Some(q) = qmax {
                if !(q > 0.0 && q.is_finite()) {
                    return Err(bad("qmax must be a positive real"));
                }
            }
            return Ok(ShapeKind::Custom { coeffs, q_max: qmax });
        }
        Err(bad("unknown shape"))
    }
}

impl fmt::Display for ShapeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ShapeKind::FundamentalPlus => f.write_str("fundamental+"),
            ShapeKind::FundamentalMinus => f.write_str("fundamental-"),
            ShapeKind::SqrtPoly { a } => write!(f, "sqrt_poly:a={a}"),
            ShapeKind::RationalSqrt => f.write_str("rational_sqrt"),
            ShapeKind::Smooth => f.write_str("smooth"),
            ShapeKind::Custom { coeffs, q_max } => {
                let list: Vec<String> = coeffs.iter().map(|c| c.to_string()).collect();
                write!(f, "custom:{}", list.join(","))?;
                if let Some(q) = q_max {
                    write!(f, ";qmax={q}")?;
                }
                Ok(())
            }
        }
    }
}
