//! Offspring displacement kernels.
//!
//! All transforms use the convention `ĥ(ω) = ∫ e^{-iωt} h(t) dt`.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::matching::{MatchSpec, MatchedKernel};
use crate::quad::{self, OscillatoryOptions};

/// Tail behaviour relevant to the small-frequency limits.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum KernelTailClass {
    /// `H̄(x) ~ c·x^{-α}` with `0 < α ≤ 2` and constant slowly varying part.
    RegularlyVarying { alpha: f64, c: f64 },
    FiniteThirdMoment,
    /// Finite second moment but infinite third moment.
    FiniteSecondMoment,
    Unknown,
}

/// Symmetric density given by its values on `x_i = i·d`, `i ≥ 0`, and
/// linear interpolation in between (extended evenly to `x < 0`).
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedDensity {
    spacing: f64,
    values: Vec<f64>,
    source: Option<String>,
}

impl TabulatedDensity {
    /// Values on the nonnegative half-grid; renormalised so the interpolant
    /// integrates to one.
    pub fn new(spacing: f64, mut values: Vec<f64>) -> Result<Self> {
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "tabulated spacing must be positive, got {spacing}"
            )));
        }
        if values.is_empty() {
            return Err(Error::InvalidParameter("empty density table".into()));
        }
        for (i, &v) in values.iter().enumerate() {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::NegativeDensity {
                    x: i as f64 * spacing,
                    value: v,
                });
            }
        }
        let mass = spacing * (values[0] + 2.0 * values[1..].iter().sum::<f64>());
        if mass <= 0.0 {
            return Err(Error::InvalidParameter("density table has zero mass".into()));
        }
        for v in &mut values {
            *v /= mass;
        }
        Ok(Self {
            spacing,
            values,
            source: None,
        })
    }

    /// Reads a two-column `x,density` CSV. The grid must be uniform; either
    /// it starts at `x = 0`, or it is symmetric about zero, in which case
    /// only the nonnegative half is used.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim().replace(' ', "") == "x,density" => {}
            _ => {
                return Err(Error::Parse {
                    line: 1,
                    message: "expected header `x,density`".into(),
                })
            }
        }
        let mut xs = Vec::new();
        let mut fs = Vec::new();
        for (i, line) in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split(',');
            let parse = |s: Option<&str>| -> Result<f64> {
                s.ok_or_else(|| Error::Parse {
                    line: i + 1,
                    message: "expected two columns".into(),
                })?
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse {
                    line: i + 1,
                    message: e.to_string(),
                })
            };
            let x = parse(parts.next())?;
            let f = parse(parts.next())?;
            if let Some(&prev) = xs.last() {
                if x <= prev {
                    return Err(Error::Parse {
                        line: i + 1,
                        message: "x must be strictly increasing".into(),
                    });
                }
            }
            xs.push(x);
            fs.push(f);
        }
        if xs.len() < 2 {
            return Err(Error::Parse {
                line: 1,
                message: "need at least two rows".into(),
            });
        }
        let d = xs[1] - xs[0];
        for w in xs.windows(2) {
            if ((w[1] - w[0]) - d).abs() > 1e-9 * d.max(1.0) {
                return Err(Error::InvalidParameter(
                    "tabulated grid must be uniformly spaced".into(),
                ));
            }
        }
        let start = xs
            .iter()
            .position(|&x| x.abs() <= 1e-9 * d)
            .ok_or_else(|| Error::InvalidParameter("tabulated grid must contain x = 0".into()))?;
        if start > 0 {
            for k in 1..=start.min(xs.len() - 1 - start) {
                if (fs[start - k] - fs[start + k]).abs() > 1e-12 * fs[start].abs().max(1e-300) {
                    return Err(Error::InvalidParameter(
                        "tabulated density must be even".into(),
                    ));
                }
            }
        }
        let mut t = Self::new(d, fs[start..].to_vec())?;
        t.source = Some(path.display().to_string());
        Ok(t)
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn support_end(&self) -> f64 {
        self.values.len() as f64 * self.spacing
    }

    pub fn density(&self, x: f64) -> f64 {
        let s = x.abs() / self.spacing;
        let i = s.floor() as usize;
        let frac = s - i as f64;
        let f = |j: usize| self.values.get(j).copied().unwrap_or(0.0);
        f(i) * (1.0 - frac) + f(i + 1) * frac
    }

    pub fn transform(&self, omega: f64) -> f64 {
        let d = self.spacing;
        let mut acc = self.values[0];
        for (i, &v) in self.values.iter().enumerate().skip(1) {
            acc += 2.0 * v * (omega * i as f64 * d).cos();
        }
        let half = 0.5 * omega * d;
        let sinc = if half == 0.0 { 1.0 } else { half.sin() / half };
        d * sinc * sinc * acc
    }

    /// `P(X > x)` for the interpolant: a node mixture convolved with a
    /// triangular law on `[-d, d]`.
    pub fn survival(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 1.0 - self.survival(-x);
        }
        let d = self.spacing;
        let tri_sf = |y: f64| {
            let u = y / d;
            if u <= -1.0 {
                1.0
            } else if u <= 0.0 {
                1.0 - 0.5 * (1.0 + u) * (1.0 + u)
            } else if u < 1.0 {
                0.5 * (1.0 - u) * (1.0 - u)
            } else {
                0.0
            }
        };
        let mut s = 0.0;
        let n = self.values.len() as i64;
        for i in -(n - 1)..n {
            let w = d * self.values[i.unsigned_abs() as usize];
            s += w * tri_sf(x - i as f64 * d);
        }
        s.clamp(0.0, 1.0)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let d = self.spacing;
        let mut u: f64 = rng.random::<f64>();
        // Node 0 has weight d·f0, every other node appears twice.
        let mut node = self.values.len() - 1;
        for (i, &v) in self.values.iter().enumerate() {
            let w = if i == 0 { d * v } else { 2.0 * d * v };
            if u < w {
                node = i;
                break;
            }
            u -= w;
        }
        let sign = if node > 0 && rng.random::<bool>() { -1.0 } else { 1.0 };
        let tri = d * (rng.random::<f64>() + rng.random::<f64>() - 1.0);
        sign * node as f64 * d + tri
    }
}

/// An offspring displacement law.
#[derive(Debug, Clone, PartialEq)]
pub enum Kernel {
    Exponential { beta: f64 },
    Lomax { alpha: f64 },
    UniformHalf { a: f64 },
    SymmetricLaplace { beta: f64 },
    SymmetricMatch(Arc<MatchedKernel>),
    TabulatedSymmetric(Arc<TabulatedDensity>),
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

impl Kernel {
    pub fn exponential(beta: f64) -> Result<Self> {
        Ok(Kernel::Exponential {
            beta: positive("beta", beta)?,
        })
    }

    pub fn lomax(alpha: f64) -> Result<Self> {
        Ok(Kernel::Lomax {
            alpha: positive("alpha", alpha)?,
        })
    }

    pub fn uniform_half(a: f64) -> Result<Self> {
        Ok(Kernel::UniformHalf {
            a: positive("a", a)?,
        })
    }

    pub fn symmetric_laplace(beta: f64) -> Result<Self> {
        Ok(Kernel::SymmetricLaplace {
            beta: positive("beta", beta)?,
        })
    }

    pub fn matched(base: Kernel, m: f64) -> Result<Self> {
        let spec = MatchSpec::new(base, m)?;
        Ok(Kernel::SymmetricMatch(Arc::new(MatchedKernel::build(spec)?)))
    }

    pub fn tabulated(t: TabulatedDensity) -> Self {
        Kernel::TabulatedSymmetric(Arc::new(t))
    }

    pub fn is_one_sided(&self) -> bool {
        matches!(
            self,
            Kernel::Exponential { .. } | Kernel::Lomax { .. } | Kernel::UniformHalf { .. }
        )
    }

    pub fn is_symmetric(&self) -> bool {
        !self.is_one_sided()
    }

    pub fn density(&self, x: f64) -> f64 {
        match self {
            Kernel::Exponential { beta } => {
                if x < 0.0 {
                    0.0
                } else {
                    beta * (-beta * x).exp()
                }
            }
            Kernel::Lomax { alpha } => {
                if x < 0.0 {
                    0.0
                } else {
                    alpha * (1.0 + x).powf(-1.0 - alpha)
                }
            }
            Kernel::UniformHalf { a } => {
                if (0.0..a.abs()).contains(&x) {
                    1.0 / a
                } else {
                    0.0
                }
            }
            Kernel::SymmetricLaplace { beta } => 0.5 * beta * (-beta * x.abs()).exp(),
            Kernel::SymmetricMatch(mk) => mk.density(x.abs()),
            Kernel::TabulatedSymmetric(t) => t.density(x),
        }
    }

    /// `P(X > x)`.
    pub fn survival(&self, x: f64) -> f64 {
        match self {
            Kernel::Exponential { beta } => {
                if x <= 0.0 {
                    1.0
                } else {
                    (-beta * x).exp()
                }
            }
            Kernel::Lomax { alpha } => {
                if x <= 0.0 {
                    1.0
                } else {
                    (1.0 + x).powf(-alpha)
                }
            }
            Kernel::UniformHalf { a } => {
                if x <= 0.0 {
                    1.0
                } else if x >= *a {
                    0.0
                } else {
                    1.0 - x / a
                }
            }
            Kernel::SymmetricLaplace { beta } => {
                if x >= 0.0 {
                    0.5 * (-beta * x).exp()
                } else {
                    1.0 - 0.5 * (beta * x).exp()
                }
            }
            Kernel::SymmetricMatch(mk) => {
                if x >= 0.0 {
                    mk.survival(x)
                } else {
                    1.0 - mk.survival(-x)
                }
            }
            Kernel::TabulatedSymmetric(t) => t.survival(x),
        }
    }

    /// `ĥ(ω)`. Closed forms where available, otherwise oscillatory quadrature
    /// with a 1e-9 absolute target.
    pub fn transform(&self, omega: f64) -> Result<Complex64> {
        if omega == 0.0 {
            return Ok(Complex64::new(1.0, 0.0));
        }
        match self {
            Kernel::Exponential { beta } => Ok(*beta / Complex64::new(*beta, omega)),
            Kernel::Lomax { alpha } => {
                let al = *alpha;
                let (z, _) = quad::fourier_half_line(
                    |t| al * (1.0 + t).powf(-1.0 - al),
                    omega,
                    OscillatoryOptions::default(),
                    "lomax transform",
                )?;
                Ok(z)
            }
            Kernel::UniformHalf { a } => {
                let half = 0.5 * a * omega;
                let sinc = half.sin() / half;
                Ok(Complex64::from_polar(sinc, -half))
            }
            Kernel::SymmetricLaplace { beta } => {
                Ok(Complex64::new(beta * beta / (beta * beta + omega * omega), 0.0))
            }
            Kernel::SymmetricMatch(mk) => Ok(Complex64::new(mk.phi_transform(omega)?, 0.0)),
            Kernel::TabulatedSymmetric(t) => Ok(Complex64::new(t.transform(omega), 0.0)),
        }
    }

    /// Transforms at `k·dw` for `k = -n..=n`, indexed by `k + n`.
    pub fn transform_lattice(&self, dw: f64, n: usize) -> Result<Vec<Complex64>> {
        use rayon::prelude::*;
        let half: Vec<Complex64> = (0..=n)
            .into_par_iter()
            .map(|k| self.transform(k as f64 * dw))
            .collect::<Result<_>>()?;
        let mut out = Vec::with_capacity(2 * n + 1);
        out.extend(half[1..].iter().rev().map(|z| z.conj()));
        out.extend_from_slice(&half);
        Ok(out)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        Ok(match self {
            Kernel::Exponential { beta } => -open01(rng).ln() / beta,
            Kernel::Lomax { alpha } => open01(rng).powf(-1.0 / alpha) - 1.0,
            Kernel::UniformHalf { a } => a * rng.random::<f64>(),
            Kernel::SymmetricLaplace { beta } => {
                let x = -open01(rng).ln() / beta;
                if rng.random::<bool>() {
                    x
                } else {
                    -x
                }
            }
            Kernel::SymmetricMatch(mk) => mk.sample(rng)?,
            Kernel::TabulatedSymmetric(t) => t.sample(rng),
        })
    }

    pub fn tail_class(&self) -> KernelTailClass {
        match self {
            Kernel::Lomax { alpha } if *alpha <= 2.0 => KernelTailClass::RegularlyVarying {
                alpha: *alpha,
                c: 1.0,
            },
            Kernel::Lomax { alpha } if *alpha <= 3.0 => KernelTailClass::FiniteSecondMoment,
            Kernel::Lomax { .. }
            | Kernel::Exponential { .. }
            | Kernel::UniformHalf { .. }
            | Kernel::SymmetricLaplace { .. }
            | Kernel::TabulatedSymmetric(_) => KernelTailClass::FiniteThirdMoment,
            Kernel::SymmetricMatch(_) => KernelTailClass::Unknown,
        }
    }

    /// Smallest `x ≥ 0` with `P(|X| > x) ≤ tol`.
    pub fn abs_quantile(&self, tol: f64) -> f64 {
        let tol = tol.clamp(1e-300, 1.0);
        match self {
            Kernel::Exponential { beta } | Kernel::SymmetricLaplace { beta } => {
                (1.0 / tol).ln().max(0.0) / beta
            }
            Kernel::Lomax { alpha } => tol.powf(-1.0 / alpha) - 1.0,
            Kernel::UniformHalf { a } => *a,
            Kernel::TabulatedSymmetric(t) => t.support_end(),
            Kernel::SymmetricMatch(mk) => mk.abs_quantile(tol),
        }
    }

    /// `E|X|^p` for the one-sided families, by quadrature; `+∞` when the
    /// integral diverges.
    pub fn abs_moment(&self, p: u32) -> Result<f64> {
        if let Kernel::Lomax { alpha } = self {
            if *alpha <= p as f64 {
                return Ok(f64::INFINITY);
            }
        }
        let f = |x: f64| x.powi(p as i32) * (self.density(x) + self.density(-x));
        let est = match self {
            Kernel::UniformHalf { a } => quad::integrate(f, 0.0, *a, 1e-13, 1e-12, 200),
            Kernel::TabulatedSymmetric(t) => {
                quad::integrate(f, 0.0, t.support_end(), 1e-13, 1e-12, 5000)
            }
            _ => quad::integrate_to_infinity(f, 0.0, 1e-13, 1e-11, 2000),
        };
        if est.abs_err > 1e-8 * est.value.abs().max(1.0) {
            return Err(Error::QuadratureNotConverged {
                context: format!("moment {p} of {self}"),
                estimate: est.abs_err,
                target: 1e-8,
            });
        }
        Ok(est.value)
    }
}

fn open01<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kernel::Exponential { beta } => write!(f, "exp:{beta}"),
            Kernel::Lomax { alpha } => write!(f, "lomax:{alpha}"),
            Kernel::UniformHalf { a } => write!(f, "uhalf:{a}"),
            Kernel::SymmetricLaplace { beta } => write!(f, "slap:{beta}"),
            Kernel::SymmetricMatch(mk) => match mk.source() {
                Some(p) => write!(f, "tab:{p}"),
                None => write!(f, "match:{}:{}", mk.spec().base(), mk.spec().m()),
            },
            Kernel::TabulatedSymmetric(t) => match &t.source {
                Some(p) => write!(f, "tab:{p}"),
                None => write!(f, "tab:<in-memory>"),
            },
        }
    }
}

impl FromStr for Kernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (family, rest) = s
            .split_once(':')
            .ok_or_else(|| Error::UnknownKernelFamily(s.to_string()))?;
        let num = |v: &str| -> Result<f64> {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidParameter(format!("bad number `{v}` in kernel `{s}`")))
        };
        match family.to_ascii_lowercase().as_str() {
            "exp" | "exponential" => Kernel::exponential(num(rest)?),
            "lomax" => Kernel::lomax(num(rest)?),
            "uhalf" | "uniform" => Kernel::uniform_half(num(rest)?),
            "slap" | "laplace" => Kernel::symmetric_laplace(num(rest)?),
            "match" => {
                let (base, m) = rest.rsplit_once(':').ok_or_else(|| {
                    Error::InvalidParameter(format!("expected match:<base>:<m>, got `{s}`"))
                })?;
                Kernel::matched(base.parse()?, num(m)?)
            }
            "tab" => {
                let path = Path::new(rest);
                if path.extension().is_some_and(|e| e == "json") {
                    Ok(Kernel::SymmetricMatch(Arc::new(
                        crate::matching::load_matched_kernel(path)?,
                    )))
                } else {
                    Ok(Kernel::tabulated(TabulatedDensity::from_csv(path)?))
                }
            }
            other => Err(Error::UnknownKernelFamily(other.to_string())),
        }
    }
}

impl serde::Serialize for Kernel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> serde::Deserialize<'de> for Kernel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// `sin(x)/x` with the removable singularity filled in.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}
