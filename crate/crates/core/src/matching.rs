//! Reversible spectral match for monotone one-sided kernels.
//!
//! For a nonincreasing one-sided `h` and branching ratio `m`, the symmetric
//! building block is `ρ_h = (h(|x|) − m(h∗ȟ)(x))/(2−m)`, and the matched
//! offspring law is the random sum `Y = Y_1 + … + Y_K` with `Y_k ~ ρ_h` and
//! `P(K = n) = p_n`. Its transform `φ̂` satisfies
//! `|1 − mφ̂(ω)|² = |1 − mĥ(ω)|²`.

use std::path::Path;
use std::sync::{Arc, OnceLock};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::quad::{self, OscillatoryOptions};

const RADICAND_GUARD: f64 = 1e-9;
const STALL_LIMIT: usize = 10_000;

/// Base kernel plus branching ratio, validated against the monotone hypothesis.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchSpec {
    base: Kernel,
    m: f64,
    pn_truncation_eps: f64,
}

impl MatchSpec {
    pub fn new(base: Kernel, m: f64) -> Result<Self> {
        Self::with_eps(base, m, 1e-12)
    }

    pub fn with_eps(base: Kernel, m: f64, eps: f64) -> Result<Self> {
        if !(m > 0.0 && m < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "branching ratio must lie in (0, 1), got {m}"
            )));
        }
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "p_n truncation eps must lie in (0, 1), got {eps}"
            )));
        }
        if !base.is_one_sided() {
            return Err(Error::NonMonotoneKernel(base.to_string()));
        }
        // Nonincreasing on a 10^3-point grid spanning the bulk of the law.
        let hi = base.abs_quantile(1e-6);
        let mut prev = f64::INFINITY;
        for i in 0..1000 {
            let x = hi * (i as f64 + 0.5) / 1000.0;
            let v = base.density(x);
            if v > prev + 1e-12 {
                return Err(Error::NonMonotoneKernel(base.to_string()));
            }
            prev = v;
        }
        Ok(Self {
            base,
            m,
            pn_truncation_eps: eps,
        })
    }

    pub fn base(&self) -> &Kernel {
        &self.base
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn pn_truncation_eps(&self) -> f64 {
        self.pn_truncation_eps
    }
}

/// `(h∗ȟ)(x)/h(x)` for `x ≥ 0`; always in `[0, 1]` for monotone `h`.
fn conv_ratio_exact(base: &Kernel, x: f64) -> Result<f64> {
    let x = x.abs();
    match base {
        Kernel::Exponential { .. } => Ok(0.5),
        Kernel::UniformHalf { a } => Ok(((a - x) / a).max(0.0)),
        _ => {
            let h = base.density(x);
            if h <= 0.0 {
                return Ok(0.0);
            }
            Ok(autoconv(base, x)? / h)
        }
    }
}

/// `(h∗ȟ)(x) = ∫_0^∞ h(|x|+u) h(u) du`, integrated in `s = ln(1+u)` up to
/// the point where the base survival drops below 1e-12.
fn autoconv(base: &Kernel, x: f64) -> Result<f64> {
    let x = x.abs();
    match base {
        Kernel::Exponential { beta } => Ok(0.5 * beta * (-beta * x).exp()),
        Kernel::UniformHalf { a } => Ok(((a - x) / (a * a)).max(0.0)),
        _ => {
            let upper = base.abs_quantile(1e-12);
            let g = |s: f64| {
                let u = s.exp_m1();
                base.density(x + u) * base.density(u) * (u + 1.0)
            };
            let est = quad::integrate(g, 0.0, upper.ln_1p(), 1e-14, 1e-11, 4000);
            if est.abs_err > 1e-10 * est.value.abs().max(1e-3) {
                return Err(Error::QuadratureNotConverged {
                    context: format!("autoconvolution of {base} at x = {x}"),
                    estimate: est.abs_err,
                    target: 1e-10,
                });
            }
            Ok(est.value)
        }
    }
}

/// `ρ_h(x)`.
pub fn rho_density(spec: &MatchSpec, x: f64) -> Result<f64> {
    let h = spec.base.density(x.abs());
    let v = (h - spec.m * autoconv(&spec.base, x)?) / (2.0 - spec.m);
    if v < -1e-12 * h.max(1e-300) {
        return Err(Error::NegativeDensity { x, value: v });
    }
    Ok(v.max(0.0))
}

/// `p_1, p_2, …` truncated once the cumulative mass reaches `1 − eps`; the
/// last entry absorbs the remainder.
pub fn pn_weights(m: f64, eps: f64) -> Vec<f64> {
    let c = m * (2.0 - m);
    let mut p = (2.0 - m) / 2.0;
    let mut out = Vec::new();
    let mut cum = 0.0;
    let mut n = 1.0;
    loop {
        out.push(p);
        cum += p;
        if cum >= 1.0 - eps || p == 0.0 {
            break;
        }
        p *= (2.0 * n - 1.0) * c / (2.0 * (n + 1.0));
        n += 1.0;
    }
    let last = out.len() - 1;
    let head: f64 = out[..last].iter().sum();
    out[last] = 1.0 - head;
    out
}

/// Symmetric building-block transform `ρ̂(ω) = (2Re ĥ − m|ĥ|²)/(2−m)`.
pub fn rho_transform(spec: &MatchSpec, omega: f64) -> Result<f64> {
    let h = spec.base.transform(omega)?;
    Ok((2.0 * h.re - spec.m * h.norm_sqr()) / (2.0 - spec.m))
}

/// `φ̂(ω) = (1 − √(1 − m(2−m)ρ̂))/m`, evaluated in the cancellation-free form
/// `(2−m)ρ̂/(1 + √·)`.
pub fn phi_transform(spec: &MatchSpec, omega: f64) -> Result<f64> {
    let m = spec.m;
    let rho = rho_transform(spec, omega)?;
    let radicand = 1.0 - m * (2.0 - m) * rho;
    let guard = (1.0 - m) * (1.0 - m) * (1.0 - RADICAND_GUARD);
    if radicand < guard {
        return Err(Error::BranchViolation {
            omega,
            radicand,
            guard,
        });
    }
    Ok((2.0 - m) * rho / (1.0 + radicand.sqrt()))
}

/// Ratio table in `s = ln(1+x)` for bases without a closed-form ratio.
#[derive(Debug)]
struct RatioTable {
    ds: f64,
    values: Vec<f64>,
}

impl RatioTable {
    const S_MAX: f64 = 40.0;
    const N: usize = 16_000;

    fn build(base: &Kernel) -> Result<Self> {
        use rayon::prelude::*;
        let ds = Self::S_MAX / Self::N as f64;
        let values = (0..=Self::N)
            .into_par_iter()
            .map(|i| conv_ratio_exact(base, (i as f64 * ds).exp_m1()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { ds, values })
    }

    fn eval(&self, x: f64) -> f64 {
        let s = x.abs().ln_1p() / self.ds;
        let i = s.floor() as usize;
        if i + 1 >= self.values.len() {
            return *self.values.last().expect("non-empty table");
        }
        let f = s - i as f64;
        self.values[i] * (1.0 - f) + self.values[i + 1] * f
    }
}

/// The symmetric matched kernel `φ_h` with its sampling tables.
#[derive(Debug)]
pub struct MatchedKernel {
    spec: MatchSpec,
    pn: Vec<f64>,
    k_cdf: Vec<f64>,
    ratio: OnceLock<Result<RatioTable>>,
    source: Option<String>,
}

impl PartialEq for MatchedKernel {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec
    }
}

impl MatchedKernel {
    pub fn build(spec: MatchSpec) -> Result<Self> {
        let pn = pn_weights(spec.m, spec.pn_truncation_eps);
        let mut k_cdf = Vec::with_capacity(pn.len());
        let mut acc = 0.0;
        for &p in &pn {
            acc += p;
            k_cdf.push(acc);
        }
        *k_cdf.last_mut().expect("non-empty") = 1.0;
        Ok(Self {
            spec,
            pn,
            k_cdf,
            ratio: OnceLock::new(),
            source: None,
        })
    }

    pub fn spec(&self) -> &MatchSpec {
        &self.spec
    }

    pub fn pn(&self) -> &[f64] {
        &self.pn
    }

    pub fn source(&self) -> Option<&str> {
        self.source.as_deref()
    }

    pub fn phi_transform(&self, omega: f64) -> Result<f64> {
        phi_transform(&self.spec, omega)
    }

    fn conv_ratio(&self, x: f64) -> Result<f64> {
        match self.spec.base {
            Kernel::Exponential { .. } | Kernel::UniformHalf { .. } => {
                conv_ratio_exact(&self.spec.base, x)
            }
            _ => match self.ratio.get_or_init(|| RatioTable::build(&self.spec.base)) {
                Ok(t) => Ok(t.eval(x)),
                Err(e) => Err(Error::InvalidParameter(format!(
                    "could not tabulate convolution ratio: {e}"
                ))),
            },
        }
    }

    /// One draw from `ρ_h` by rejection from the two-sided base law.
    pub fn sample_rho<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        for _ in 0..STALL_LIMIT {
            let x = self.spec.base.sample(rng)?;
            let accept = 1.0 - self.spec.m * self.conv_ratio(x)?;
            let u: f64 = rng.random();
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            if u < accept {
                return Ok(sign * x);
            }
        }
        Err(Error::RejectionStall(STALL_LIMIT))
    }

    pub fn sample_k<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        self.k_cdf.partition_point(|&c| c <= u).min(self.k_cdf.len() - 1) + 1
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        let k = self.sample_k(rng);
        let mut y = 0.0;
        for _ in 0..k {
            y += self.sample_rho(rng)?;
        }
        Ok(y)
    }

    /// `φ_h(x)` by cosine inversion of `φ̂`.
    pub fn density(&self, x: f64) -> f64 {
        let opts = OscillatoryOptions {
            abs_tol: 1e-10,
            max_segments: 10_000,
        };
        let f = |w: f64| self.phi_transform(w).unwrap_or(0.0);
        match quad::fourier_half_line(f, x.abs(), opts, "matched density") {
            Ok((z, _)) => (z.re / std::f64::consts::PI).max(0.0),
            Err(e) => {
                log::warn!("{e}");
                f64::NAN
            }
        }
    }

    /// `P(Y > x)` for `x ≥ 0` by sine inversion of `φ̂`.
    pub fn survival(&self, x: f64) -> f64 {
        if x == 0.0 {
            return 0.5;
        }
        let opts = OscillatoryOptions {
            abs_tol: 1e-10,
            max_segments: 10_000,
        };
        let f = |w: f64| {
            if w == 0.0 {
                0.0
            } else {
                self.phi_transform(w).unwrap_or(0.0) / w
            }
        };
        match quad::fourier_half_line(f, x.abs(), opts, "matched survival") {
            // Im of ∫ e^{-iωx} f = −∫ sin(ωx) f.
            Ok((z, _)) => (0.5 + z.im / std::f64::consts::PI).clamp(0.0, 1.0),
            Err(e) => {
                log::warn!("{e}");
                f64::NAN
            }
        }
    }

    /// Union-bound quantile: smallest `x` (to bisection accuracy) with
    /// `Σ p_n min(1, n·P(|ρ| > x/n)) ≤ tol`, using `P(|ρ| > y) ≤ 2H̄(y)/(2−m)`.
    pub fn abs_quantile(&self, tol: f64) -> f64 {
        let scale = 2.0 / (2.0 - self.spec.m);
        let bound = |x: f64| -> f64 {
            self.pn
                .iter()
                .enumerate()
                .map(|(i, &p)| {
                    let n = (i + 1) as f64;
                    p * (n * scale * self.spec.base.survival(x / n)).min(1.0)
                })
                .sum()
        };
        let mut hi = self.spec.base.abs_quantile(tol).max(1.0);
        while bound(hi) > tol && hi < 1e300 {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if bound(mid) > tol {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-9 * hi {
                break;
            }
        }
        hi
    }
}

/// On-disk form of a matched kernel.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatchedKernelFile {
    pub base: String,
    pub m: f64,
    pub pn_truncation_eps: f64,
    pub pn: Vec<f64>,
    pub rho_spacing: f64,
    pub rho_x: Vec<f64>,
    pub rho: Vec<f64>,
    pub mean_k: f64,
}

/// Builds a matched kernel and wraps it as a [`Kernel`].
pub fn build_matched_kernel(spec: MatchSpec) -> Result<Kernel> {
    Ok(Kernel::SymmetricMatch(Arc::new(MatchedKernel::build(spec)?)))
}

/// Serialisable snapshot with a ρ table on `[0, x_max]`.
pub fn matched_kernel_file(mk: &MatchedKernel, rho_spacing: f64, x_max: f64) -> Result<MatchedKernelFile> {
    let n = (x_max / rho_spacing).ceil() as usize;
    let rho_x: Vec<f64> = (0..=n).map(|i| i as f64 * rho_spacing).collect();
    let rho = rho_x
        .iter()
        .map(|&x| rho_density(&mk.spec, x))
        .collect::<Result<Vec<_>>>()?;
    let mean_k = mk
        .pn
        .iter()
        .enumerate()
        .map(|(i, p)| (i + 1) as f64 * p)
        .sum();
    Ok(MatchedKernelFile {
        base: mk.spec.base.to_string(),
        m: mk.spec.m,
        pn_truncation_eps: mk.spec.pn_truncation_eps,
        pn: mk.pn.clone(),
        rho_spacing,
        rho_x,
        rho,
        mean_k,
    })
}

/// Reloads a matched-kernel JSON file. The kernel is rebuilt from its base
/// and `m`; the stored `p_n` table is checked against the rebuilt one.
pub fn load_matched_kernel(path: &Path) -> Result<MatchedKernel> {
    let text = std::fs::read_to_string(path)?;
    let file: MatchedKernelFile = serde_json::from_str(&text)?;
    let base: Kernel = file.base.parse()?;
    let spec = MatchSpec::with_eps(base, file.m, file.pn_truncation_eps)?;
    let mut mk = MatchedKernel::build(spec)?;
    let consistent = mk.pn.len() == file.pn.len()
        && mk
            .pn
            .iter()
            .zip(&file.pn)
            .all(|(a, b)| (a - b).abs() <= 1e-12 * a.abs().max(1e-300));
    if !consistent {
        return Err(Error::InvalidParameter(format!(
            "{}: stored p_n table does not match base {} at m = {}",
            path.display(),
            file.base,
            file.m
        )));
    }
    mk.source = Some(path.display().to_string());
    Ok(mk)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(base: &str, m: f64) -> MatchSpec {
        MatchSpec::new(base.parse().unwrap(), m).unwrap()
    }

    #[test]
    fn exponential_building_block_is_laplace() {
        let s = spec("exp:1", 0.5);
        assert!((rho_density(&s, 0.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((rho_density(&s, -2.0).unwrap() - 0.5 * (-2.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn lomax_building_block_bounds() {
        let s = spec("lomax:2", 0.5);
        let h1 = s.base().density(1.0);
        let r = rho_density(&s, 1.0).unwrap();
        assert!(r >= h1 / 3.0 && r <= 2.0 * h1 / 3.0, "{r} vs {h1}");
        assert_eq!(rho_density(&s, 1.0).unwrap(), rho_density(&s, -1.0).unwrap());
    }

    #[test]
    fn pn_first_weight_and_normalisation() {
        let p = pn_weights(0.5, 1e-12);
        assert_eq!(p[0], 0.75);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_symmetric_base() {
        assert!(matches!(
            MatchSpec::new("slap:1".parse().unwrap(), 0.5),
            Err(Error::NonMonotoneKernel(_))
        ));
        assert!(MatchSpec::new("exp:1".parse().unwrap(), 1.0).is_err());
    }

    #[test]
    fn phi_at_zero_is_one() {
        let s = spec("exp:2", 0.3);
        assert!((phi_transform(&s, 0.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn k_sampler_covers_support() {
        let mk = MatchedKernel::build(spec("exp:1", 0.5)).unwrap();
        let mut rng = crate::rng::Streams::new(3).rng(0);
        let n = 200_000;
        let mean: f64 = (0..n).map(|_| mk.sample_k(&mut rng) as f64).sum::<f64>() / n as f64;
        // E K = (2−m)/(2(1−m)) = 1.5 at m = 0.5.
        assert!((mean - 1.5).abs() < 0.02, "{mean}");
    }
}
