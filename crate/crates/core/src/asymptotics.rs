//! Small-frequency constants for the diagonal orientation signal and numeric
//! checks of the limits of `|Im B(t,t)|` as `t ↓ 0`.

use std::f64::consts::{FRAC_PI_2, LN_2, PI};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{Kernel, KernelTailClass};
use crate::montecarlo::McEstimate;
use crate::rng::Streams;
use crate::simulate::ModelParams;
use crate::spectra;

/// Below this `|Im B(t,t)|` is treated as numerically zero.
pub const UNDERFLOW: f64 = 1e-14;

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 2.0 {
        Ok(())
    } else {
        Err(Error::AlphaOutOfRange(alpha))
    }
}

/// `C(α) = (π/2)/(Γ(α) cos(πα/2))`, the sine-transform constant.
pub fn c_alpha(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(FRAC_PI_2 / (libm::tgamma(alpha) * (FRAC_PI_2 * alpha).cos()))
}

/// `S(α) = (π/2)/(Γ(α) sin(πα/2))`, the cosine-transform constant.
pub fn s_alpha(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(FRAC_PI_2 / (libm::tgamma(alpha) * (FRAC_PI_2 * alpha).sin()))
}

/// `χ_α`: `2(2 − 2^α)C(α)`, with the removable cases `4 log 2` at `α = 1`
/// and `2π` at `α = 2`.
pub fn chi_alpha(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if alpha == 1.0 {
        Ok(4.0 * LN_2)
    } else if alpha == 2.0 {
        Ok(2.0 * PI)
    } else {
        Ok(2.0 * (2.0 - alpha.exp2()) * c_alpha(alpha)?)
    }
}

/// Mixing law `Z` of a monotone density written as a scale mixture of
/// uniforms, `X = YZ` with `Y ~ U(0,1)` independent of `Z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MixtureZ {
    Deterministic { a: f64 },
    /// `Z ~ Gamma(2, β)`, which mixes to `Exponential(β)`.
    Gamma2 { beta: f64 },
    /// `E Z`, `E Z²`, `E Z³`; the last two may be `+∞`.
    MomentList { ez: f64, ez2: f64, ez3: f64 },
}

impl MixtureZ {
    pub fn moment_list(ez: f64, ez2: f64, ez3: f64) -> Result<Self> {
        let z = MixtureZ::MomentList { ez, ez2, ez3 };
        z.validate()?;
        Ok(z)
    }

    pub fn validate(&self) -> Result<()> {
        let [a, b, c] = self.moments();
        if !(a > 0.0 && a.is_finite() && b > 0.0 && c > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "mixture moments must be positive with finite E Z, got {a}, {b}, {c}"
            )));
        }
        if b < a * a * (1.0 - 1e-12) {
            return Err(Error::InvalidParameter(format!(
                "E Z² = {b} is below (E Z)² = {}",
                a * a
            )));
        }
        Ok(())
    }

    /// `[E Z, E Z², E Z³]`.
    pub fn moments(&self) -> [f64; 3] {
        match *self {
            MixtureZ::Deterministic { a } => [a, a * a, a * a * a],
            MixtureZ::Gamma2 { beta } => [2.0 / beta, 6.0 / (beta * beta), 24.0 / beta.powi(3)],
            MixtureZ::MomentList { ez, ez2, ez3 } => [ez, ez2, ez3],
        }
    }

    pub fn moment(&self, p: u32) -> f64 {
        match p {
            0 => 1.0,
            1..=3 => self.moments()[p as usize - 1],
            _ => panic!("only moments 1..=3 are tracked"),
        }
    }

    pub fn variance(&self) -> f64 {
        let [a, b, _] = self.moments();
        b - a * a
    }
}

/// `Δ_m(Z) = (1−m)(E Z³ − E Z E Z²) + m E Z Var Z`; `+∞` when `E Z³ = ∞`.
pub fn delta_m(z: &MixtureZ, m: f64) -> f64 {
    let [a, b, c] = z.moments();
    if c.is_infinite() {
        return f64::INFINITY;
    }
    if let MixtureZ::Deterministic { .. } = z {
        return 0.0;
    }
    (1.0 - m) * (c - a * b) + m * a * (b - a * a)
}

/// The mixing law of a monotone one-sided kernel, using `E Zᵖ = (p+1) E Xᵖ`
/// where no closed form is available.
pub fn z_from_kernel(k: &Kernel) -> Result<MixtureZ> {
    match k {
        Kernel::UniformHalf { a } => Ok(MixtureZ::Deterministic { a: *a }),
        Kernel::Exponential { beta } => Ok(MixtureZ::Gamma2 { beta: *beta }),
        Kernel::Lomax { alpha } if *alpha > 1.0 => {
            let ez = 2.0 * k.abs_moment(1)?;
            let ez2 = 3.0 * k.abs_moment(2)?;
            let ez3 = 4.0 * k.abs_moment(3)?;
            MixtureZ::moment_list(ez, ez2, ez3)
        }
        Kernel::Lomax { .. } => Err(Error::InvalidParameter(format!(
            "{k} has infinite mean, so E Z is infinite"
        ))),
        _ => Err(Error::NonMonotoneKernel(k.to_string())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "route", rename_all = "snake_case")]
pub enum LimitRoute {
    /// `|Im B(t,t)|/(t^α c) → λ m² χ_α / (1−m)⁵`.
    RegularlyVarying { alpha: f64, c: f64, chi: f64 },
    /// `|Im B(t,t)|/t³ → λ m² Δ_m / (2(1−m)⁶)`.
    ThirdMoment { delta: f64 },
    /// Infinite third moment: `|Im B(t,t)|/t³` should grow without bound.
    Divergent,
    /// The diagonal signal vanishes identically (symmetric or uniform kernel).
    Vanishing,
    /// No limit available for this kernel.
    Unclassified,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Converged,
    NotConverged,
    Diverging,
    NotDiverging,
    Underflow,
    NoLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagRow {
    pub t: f64,
    pub im_b: f64,
    /// `|Im B(t,t)|` divided by the route's normalizer.
    pub scaled: f64,
    pub ratio: Option<f64>,
    pub underflow: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagLimitReport {
    pub params: ModelParams,
    pub route: LimitRoute,
    pub exponent: f64,
    pub limit: Option<f64>,
    pub rows: Vec<DiagRow>,
    /// `|ratio − 1|` nonincreasing as `t` decreases.
    pub monotone_approach: bool,
    pub tolerance: f64,
    pub verdict: Verdict,
}

impl DiagLimitReport {
    /// Ratio at the smallest `t`.
    pub fn final_ratio(&self) -> Option<f64> {
        self.rows.last().and_then(|r| r.ratio)
    }
}

fn route_for(p: &ModelParams, tail: KernelTailClass) -> Result<LimitRoute> {
    let k = &p.kernel;
    if k.is_symmetric() || matches!(k, Kernel::UniformHalf { .. }) {
        return Ok(LimitRoute::Vanishing);
    }
    Ok(match tail {
        KernelTailClass::RegularlyVarying { alpha, c } => LimitRoute::RegularlyVarying {
            alpha,
            c,
            chi: chi_alpha(alpha)?,
        },
        KernelTailClass::FiniteSecondMoment => LimitRoute::Divergent,
        KernelTailClass::FiniteThirdMoment => match z_from_kernel(k) {
            Ok(z) => LimitRoute::ThirdMoment {
                delta: delta_m(&z, p.m),
            },
            Err(Error::NonMonotoneKernel(_)) => LimitRoute::Unclassified,
            Err(e) => return Err(e),
        },
        KernelTailClass::Unknown => LimitRoute::Unclassified,
    })
}

/// Evaluates `|Im B_fac(t,t)|` along a decreasing `t_list` and compares the
/// normalized values against the predicted small-frequency limit.
/// `tolerance` is the relative band applied at the smallest `t`.
pub fn diag_limit_check(
    p: &ModelParams,
    tail: KernelTailClass,
    t_list: &[f64],
    tolerance: f64,
) -> Result<DiagLimitReport> {
    p.validate()?;
    if t_list.is_empty() || t_list.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
        return Err(Error::InvalidParameter(
            "t_list must be a nonempty list of positive values".into(),
        ));
    }
    if t_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParameter("t_list must be strictly decreasing".into()));
    }
    let route = route_for(p, tail)?;
    let lam = p.lambda();
    let m = p.m;
    let q = 1.0 - m;
    let (exponent, norm_c, limit) = match route {
        LimitRoute::RegularlyVarying { alpha, c, chi } => {
            (alpha, c, Some(p.theta.abs() * lam * m * m * chi / q.powi(5)))
        }
        LimitRoute::ThirdMoment { delta } => (
            3.0,
            1.0,
            Some(p.theta.abs() * lam * m * m * delta / (2.0 * q.powi(6))),
        ),
        _ => (3.0, 1.0, None),
    };
    let ims = t_list
        .par_iter()
        .map(|&t| spectra::im_b_diagonal(p, t))
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<DiagRow> = t_list
        .iter()
        .zip(ims)
        .map(|(&t, im_b)| {
            let underflow = im_b.abs() < UNDERFLOW;
            let scaled = im_b.abs() / (norm_c * t.powf(exponent));
            let ratio = match limit {
                Some(l) if !underflow && l > 0.0 && l.is_finite() => Some(scaled / l),
                _ => None,
            };
            DiagRow {
                t,
                im_b,
                scaled,
                ratio,
                underflow,
            }
        })
        .collect();
    let gaps: Vec<f64> = rows
        .iter()
        .filter_map(|r| r.ratio.map(|x| (x - 1.0).abs()))
        .collect();
    let monotone_approach = gaps.len() == rows.len() && gaps.windows(2).all(|w| w[1] <= w[0]);
    let verdict = if rows.iter().all(|r| r.underflow) {
        Verdict::Underflow
    } else {
        match route {
            LimitRoute::Divergent => {
                if rows.windows(2).all(|w| w[1].scaled > w[0].scaled) {
                    Verdict::Diverging
                } else {
                    Verdict::NotDiverging
                }
            }
            _ => match rows.last().and_then(|r| r.ratio) {
                Some(r) if (r - 1.0).abs() <= tolerance => Verdict::Converged,
                Some(_) => Verdict::NotConverged,
                None => Verdict::NoLimit,
            },
        }
    };
    Ok(DiagLimitReport {
        params: p.clone(),
        route,
        exponent,
        limit,
        rows,
        monotone_approach,
        tolerance,
        verdict,
    })
}

/// `t_list` of `per_decade` log-spaced points from `10⁻¹` down to `t_min`.
pub fn default_t_list(t_min: f64, per_decade: usize) -> Vec<f64> {
    let decades = (0.1 / t_min).log10().max(0.0);
    let n = (decades * per_decade as f64).round() as usize;
    (0..=n)
        .map(|i| 0.1 * 10f64.powf(-(i as f64) / per_decade as f64))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureMomentCheck {
    pub kernel: Kernel,
    pub p: u32,
    pub mc: McEstimate,
    /// `E Zᵖ/(p+1)`.
    pub expected: f64,
    pub z: f64,
    pub pass: bool,
}

/// Monte-Carlo `E Xᵖ` against `E Zᵖ/(p+1)` with a 4-stderr band.
pub fn mixture_moment_check(
    k: &Kernel,
    p: u32,
    n_samples: usize,
    streams: &Streams,
) -> Result<MixtureMomentCheck> {
    if !(1..=3).contains(&p) {
        return Err(Error::InvalidParameter(format!("moment order {p} not in 1..=3")));
    }
    if n_samples < 2 {
        return Err(Error::InvalidParameter("need at least 2 samples".into()));
    }
    let z = z_from_kernel(k)?;
    let expected = z.moment(p) / (p as f64 + 1.0);
    if !expected.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "moment {p} of {k} is infinite"
        )));
    }
    const CHUNK: usize = 1 << 14;
    let parts = (0..n_samples.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut r = streams.rng(c as u64);
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in c * CHUNK..((c + 1) * CHUNK).min(n_samples) {
                let x = k.sample(&mut r)?.powi(p as i32);
                s += x;
                s2 += x * x;
            }
            Ok((s, s2))
        })
        .collect::<Result<Vec<_>>>()?;
    let (s, s2) = parts
        .iter()
        .fold((0.0, 0.0), |acc, &(a, b)| (acc.0 + a, acc.1 + b));
    let n = n_samples as f64;
    let mean = s / n;
    let var = ((s2 - n * mean * mean) / (n - 1.0)).max(0.0);
    let se = (var / n).sqrt();
    let zs = (mean - expected) / se;
    Ok(MixtureMomentCheck {
        kernel: k.clone(),
        p,
        mc: McEstimate {
            re: mean,
            im: 0.0,
            stderr_re: se,
            stderr_im: 0.0,
            n_samples,
            seed: streams.seed(),
        },
        expected,
        z: zs,
        pass: zs.abs() <= 4.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chi_special_values() {
        assert!((chi_alpha(1.0).unwrap() - 2.772588722239781).abs() < 1e-12);
        assert!((chi_alpha(2.0).unwrap() - 2.0 * PI).abs() < 1e-12);
        let c = (PI / 2.0).sqrt();
        assert!((c_alpha(0.5).unwrap() - c).abs() < 1e-12);
        assert!((s_alpha(0.5).unwrap() - c).abs() < 1e-12);
        let want = 2.0 * (2.0 - 2f64.sqrt()) * c;
        assert!((chi_alpha(0.5).unwrap() - want).abs() < 1e-12);
        assert!(chi_alpha(0.0).is_err());
        assert!(chi_alpha(2.5).is_err());
    }

    #[test]
    fn delta_examples() {
        assert_eq!(delta_m(&MixtureZ::Deterministic { a: 3.0 }, 0.4), 0.0);
        assert!((delta_m(&MixtureZ::Gamma2 { beta: 1.0 }, 0.5) - 8.0).abs() < 1e-12);
        let z = MixtureZ::moment_list(1.0, 2.0, f64::INFINITY).unwrap();
        assert_eq!(delta_m(&z, 0.5), f64::INFINITY);
    }

    #[test]
    fn jensen_violation_rejected() {
        assert!(MixtureZ::moment_list(2.0, 3.0, 10.0).is_err());
    }

    #[test]
    fn z_for_families() {
        assert_eq!(
            z_from_kernel(&Kernel::uniform_half(2.0).unwrap()).unwrap(),
            MixtureZ::Deterministic { a: 2.0 }
        );
        let z = z_from_kernel(&Kernel::lomax(4.0).unwrap()).unwrap();
        let [a, b, c] = z.moments();
        // Lomax(4): E X = 1/3, E X² = 1/3, E X³ = 1.
        assert!((a - 2.0 / 3.0).abs() < 1e-9);
        assert!((b - 1.0).abs() < 1e-9);
        assert!((c - 4.0).abs() < 1e-8);
        assert!(matches!(
            z_from_kernel(&Kernel::symmetric_laplace(1.0).unwrap()),
            Err(Error::NonMonotoneKernel(_))
        ));
    }

    #[test]
    fn t_list_spacing() {
        let t = default_t_list(1e-4, 2);
        assert_eq!(t.len(), 7);
        assert!((t[6] - 1e-4).abs() < 1e-18);
    }
}
