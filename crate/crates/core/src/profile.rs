//! Phase profiles `phi(t)` for the free fundamental rotator.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};

/// Natural cubic spline through `(t_i, y_i)` with strictly increasing knots.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CubicSpline {
    t: Vec<f64>,
    y: Vec<f64>,
    /// Second derivatives at the knots.
    m: Vec<f64>,
}

impl CubicSpline {
    pub fn new(t: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if t.len() != y.len() {
            return Err(Error::invalid("spline", "knot and value counts differ"));
        }
        if t.len() < 2 {
            return Err(Error::invalid("spline", "at least two knots are needed"));
        }
        if t.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::invalid("spline", "non-finite knot or value"));
        }
        if t.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("spline", "knots must be strictly increasing"));
        }
        let n = t.len();
        let mut m = vec![0.0; n];
        if n > 2 {
            // Thomas algorithm on the interior equations, natural ends m_0 = m_{n-1} = 0
            let k = n - 2;
            let mut diag = vec![0.0; k];
            let mut upper = vec![0.0; k];
            let mut rhs = vec![0.0; k];
            for i in 1..n - 1 {
                let (h0, h1) = (t[i] - t[i - 1], t[i + 1] - t[i]);
                diag[i - 1] = 2.0 * (h0 + h1);
                upper[i - 1] = h1;
                rhs[i - 1] = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
            }
            for i in 1..k {
                let lower = t[i + 1] - t[i];
                let w = lower / diag[i - 1];
                diag[i] -= w * upper[i - 1];
                rhs[i] -= w * rhs[i - 1];
            }
            m[k] = rhs[k - 1] / diag[k - 1];
            for i in (0..k - 1).rev() {
                m[i + 1] = (rhs[i] - upper[i] * m[i + 2]) / diag[i];
            }
        }
        Ok(CubicSpline { t, y, m })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.t[0], self.t[self.t.len() - 1])
    }

    pub fn knots(&self) -> &[f64] {
        &self.t
    }

    /// Value, first and second derivative at `x` inside the knot range.
    pub fn eval(&self, x: f64) -> Result<(f64, f64, f64)> {
        let (a, b) = self.domain();
        if !(x >= a && x <= b) {
            return Err(Error::Domain {
                what: "spline",
                value: x,
                reason: "outside the knot range",
            });
        }
        let i = match self.t.partition_point(|&ti| ti <= x) {
            0 => 0,
            p => (p - 1).min(self.t.len() - 2),
        };
        let h = self.t[i + 1] - self.t[i];
        let (m0, m1) = (self.m[i], self.m[i + 1]);
        let (y0, y1) = (self.y[i], self.y[i + 1]);
        let u = (self.t[i + 1] - x) / h;
        let s = (x - self.t[i]) / h;
        let v = m0 * u.powi(3) * h * h / 6.0 + m1 * s.powi(3) * h * h / 6.0 + (y0 - m0 * h * h / 6.0) * u + (y1 - m1 * h * h / 6.0) * s;
        let d = -m0 * u * u * h / 2.0 + m1 * s * s * h / 2.0 + (y1 - y0) / h - (m1 - m0) * h / 6.0;
        let dd = m0 * u + m1 * s;
        Ok((v, d, dd))
    }
}

/// Parses a `t, phi` table: one pair per line, comma or whitespace separated, `#` comments.
pub fn parse_spline_table(text: &str) -> Result<CubicSpline> {
    let mut t = Vec::new();
    let mut y = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()).collect();
        if fields.len() != 2 {
            return Err(Error::Parse(format!("line {}: expected `t, phi`", lineno + 1)));
        }
        let num = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse(format!("line {}: bad number `{s}`", lineno + 1)))
        };
        t.push(num(fields[0])?);
        y.push(num(fields[1])?);
    }
    CubicSpline::new(t, y).map_err(|e| Error::Parse(e.to_string()))
}

/// The phase `phi` as a function of the centre-of-momentum time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum PhaseProfile {
    /// `phi0 + omega t`.
    Linear { omega: f64, phi0: f64 },
    /// `omega t + amp sin(nu t)`.
    Modulated { omega: f64, amp: f64, nu: f64 },
    Spline(CubicSpline),
}

/// A parsed profile tag; spline tags still point at their table file.
#[derive(Debug, Clone, PartialEq)]
pub enum ProfileTag {
    Linear { omega: f64 },
    Modulated { omega: f64, amp: f64, nu: f64 },
    Spline(PathBuf),
}

fn keyed(body: &str, keys: &[&str]) -> Result<Vec<f64>> {
    let mut out = vec![None; keys.len()];
    for part in body.split(',') {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("expected key=value, got `{part}`")))?;
        let idx = keys
            .iter()
            .position(|&key| key == k.trim())
            .ok_or_else(|| Error::Parse(format!("unknown key `{}`", k.trim())))?;
        if out[idx].is_some() {
            return Err(Error::Parse(format!("duplicate key `{}`", keys[idx])));
        }
        let x: f64 = v
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad number `{}` for `{}`", v.trim(), keys[idx])))?;
        if !x.is_finite() {
            return Err(Error::Parse(format!("`{}` must be finite", keys[idx])));
        }
        out[idx] = Some(x);
    }
    out.iter()
        .zip(keys)
        .map(|(v, k)| v.ok_or_else(|| Error::Parse(format!("missing key `{k}`"))))
        .collect()
}

impl std::str::FromStr for ProfileTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, body) = s
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("profile tag `{s}` has no `:`")))?;
        match kind.trim() {
            "linear" => {
                let v = keyed(body, &["omega"])?;
                Ok(ProfileTag::Linear { omega: v[0] })
            }
            "modulated" => {
                let v = keyed(body, &["omega", "amp", "nu"])?;
                Ok(ProfileTag::Modulated {
                    omega: v[0],
                    amp: v[1],
                    nu: v[2],
                })
            }
            "spline" => {
                let path = body.trim();
                if path.is_empty() {
                    return Err(Error::Parse("spline tag needs a file".into()));
                }
                Ok(ProfileTag::Spline(PathBuf::from(path)))
            }
            other => Err(Error::Parse(format!("unknown profile kind `{other}`"))),
        }
    }
}

impl PhaseProfile {
    /// Builds a profile from a tag; relative spline paths resolve against `base`.
    pub fn from_tag(tag: &str, base: Option<&Path>) -> Result<Self> {
        match tag.parse::<ProfileTag>()? {
            ProfileTag::Linear { omega } => Ok(PhaseProfile::Linear { omega, phi0: 0.0 }),
            ProfileTag::Modulated { omega, amp, nu } => Ok(PhaseProfile::Modulated { omega, amp, nu }),
            ProfileTag::Spline(p) => {
                let path = match base {
                    Some(b) if p.is_relative() => b.join(p),
                    _ => p,
                };
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| Error::Parse(format!("cannot read spline table {}: {e}", path.display())))?;
                Ok(PhaseProfile::Spline(parse_spline_table(&text)?))
            }
        }
    }

    /// `(phi, phi', phi'')` at `t`.
    pub fn eval(&self, t: f64) -> Result<(f64, f64, f64)> {
        match self {
            PhaseProfile::Linear { omega, phi0 } => Ok((phi0 + omega * t, *omega, 0.0)),
            PhaseProfile::Modulated { omega, amp, nu } => {
                let (s, c) = (nu * t).sin_cos();
                Ok((omega * t + amp * s, omega + amp * nu * c, -amp * nu * nu * s))
            }
            PhaseProfile::Spline(sp) => sp.eval(t),
        }
    }

    /// The linear profile touching this one to first order at `t0`.
    pub fn osculating_linear(&self, t0: f64) -> Result<PhaseProfile> {
        let (p, dp, _) = self.eval(t0)?;
        Ok(PhaseProfile::Linear {
            omega: dp,
            phi0: p - dp * t0,
        })
    }

    /// Checks `|l phi'/2| < 1` and a constant sign of `phi'` on the grid.
    ///
    /// `phi' = 0` everywhere is the inertial branch and allowed; a zero next to
    /// nonzero values counts as a sign change.
    pub fn check_admissible(&self, l: f64, times: &[f64]) -> Result<()> {
        let mut sign = None;
        for &t in times {
            let (_, dp, _) = self.eval(t)?;
            if !dp.is_finite() {
                return Err(Error::Inadmissible(format!("phi' is not finite at t = {t}")));
            }
            if !((0.5 * l * dp).abs() < 1.0) {
                return Err(Error::Inadmissible(format!(
                    "|l phi'/2| = {} >= 1 at t = {t}",
                    (0.5 * l * dp).abs()
                )));
            }
            let s = if dp > 0.0 {
                1
            } else if dp < 0.0 {
                -1
            } else {
                0
            };
            match sign {
                None => sign = Some(s),
                Some(prev) if prev != s => {
                    return Err(Error::Inadmissible(format!("phi' changes sign at t = {t}")));
                }
                _ => {}
            }
        }
        Ok(())
    }
}

impl fmt::Display for PhaseProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PhaseProfile::Linear { omega, phi0 } if *phi0 == 0.0 => write!(f, "linear:omega={omega}"),
            PhaseProfile::Linear { omega, phi0 } => write!(f, "linear:omega={omega} (phi0={phi0})"),
            PhaseProfile::Modulated { omega, amp, nu } => write!(f, "modulated:omega={omega},amp={amp},nu={nu}"),
            PhaseProfile::Spline(sp) => write!(f, "spline ({} knots)", sp.knots().len()),
        }
    }
}
