//! Odd orientation-contrast statistics on event data.
//!
//! `O_{T,g} = T⁻¹ Σ_{i≠j≠k} g(x_j − x_i, x_k − x_i)` for a bounded, compactly
//! supported, jointly odd `g`. Under `N_θ` its mean is `θ·μ_{T,g}`.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cumulant3::{self, CumulantGrid};
use crate::error::{Error, Result};
use crate::quad;
use crate::rng::Streams;
use crate::simulate::{simulate_window, EventSeries, ModelParams, SimOptions};

/// `H_g = −i ĝ` for a jointly odd `g`.
pub trait TransformFactor: Send + Sync + fmt::Debug {
    fn eval(&self, w1: f64, w2: f64) -> f64;

    /// Values at `(k₁Δω, k₂Δω)`, `|k| ≤ kmax`, row-major; `None` if the
    /// factor has no faster path than pointwise evaluation.
    fn on_lattice(&self, _dw: f64, _kmax: i64) -> Option<Vec<f64>> {
        None
    }

    /// Upper bound on `∬ |H_g|` outside `[−Ω, Ω]²`.
    fn tail_l1_bound(&self, _omega_max: f64) -> f64 {
        f64::NAN
    }
}

/// Standard bump `ψ(x) = exp(1 − 1/(1 − x²))` on `(−1, 1)`, with `ψ(0) = 1`.
pub fn bump(x: f64) -> f64 {
    let s = 1.0 - x * x;
    if s <= 0.0 {
        0.0
    } else {
        (1.0 - 1.0 / s).exp()
    }
}

/// `ψ̂(k) = 2∫₀¹ cos(kx) ψ(x) dx`.
pub fn bump_transform(k: f64) -> f64 {
    let k = k.abs();
    let intervals = 200 + (k as usize);
    2.0 * quad::integrate(|x| (k * x).cos() * bump(x), 0.0, 1.0, 1e-16, 1e-13, intervals).value
}

/// Transform factor of the antisymmetrised product bump centred at `(c, c)`
/// with radius `r`: `H_g = −2 sin(c(ω₁+ω₂)) r² ψ̂(rω₁) ψ̂(rω₂)`.
#[derive(Debug)]
pub struct BumpFactor {
    center: f64,
    radius: f64,
}

impl BumpFactor {
    pub fn new(center: f64, radius: f64) -> Self {
        Self { center, radius }
    }
}

impl TransformFactor for BumpFactor {
    fn eval(&self, w1: f64, w2: f64) -> f64 {
        let r = self.radius;
        -2.0 * (self.center * (w1 + w2)).sin() * r * r * bump_transform(r * w1) * bump_transform(r * w2)
    }

    fn on_lattice(&self, dw: f64, kmax: i64) -> Option<Vec<f64>> {
        let r = self.radius;
        let axis: Vec<f64> = (0..=kmax)
            .into_par_iter()
            .map(|k| bump_transform(r * k as f64 * dw))
            .collect();
        let a = |k: i64| axis[k.unsigned_abs() as usize];
        let len = (2 * kmax + 1) as usize;
        let mut out = vec![0.0; len * len];
        for k1 in -kmax..=kmax {
            for k2 in -kmax..=kmax {
                let s = (self.center * (k1 + k2) as f64 * dw).sin();
                out[(k1 + kmax) as usize * len + (k2 + kmax) as usize] =
                    -2.0 * s * r * r * a(k1) * a(k2);
            }
        }
        Some(out)
    }

    fn tail_l1_bound(&self, omega_max: f64) -> f64 {
        let r = self.radius;
        let kcut = r * omega_max;
        // ∫|ψ̂| by midpoint sums; the step widens where ψ̂ is already tiny.
        let sum = |a: f64, b: f64, step: f64| {
            if b <= a {
                return 0.0;
            }
            let n = ((b - a) / step).ceil() as usize;
            let h = (b - a) / n as f64;
            (0..n)
                .into_par_iter()
                .map(|i| bump_transform(a + (i as f64 + 0.5) * h).abs())
                .sum::<f64>()
                * h
        };
        let knee = kcut.min(100.0);
        let inner = 2.0 * (sum(0.0, knee, 0.25) + sum(knee, kcut, 1.0));
        let tail = 2.0 * sum(kcut, kcut + 200.0, 0.5);
        // |H_g| ≤ 2r²|ψ̂(rω₁)||ψ̂(rω₂)|; integrate over the complement of the box.
        let full = inner + tail;
        2.0 * (full * full - inner * inner)
    }
}

#[derive(Debug)]
struct ScaledFactor {
    inner: Arc<dyn TransformFactor>,
    c: f64,
}

impl TransformFactor for ScaledFactor {
    fn eval(&self, w1: f64, w2: f64) -> f64 {
        self.c * self.inner.eval(w1, w2)
    }

    fn on_lattice(&self, dw: f64, kmax: i64) -> Option<Vec<f64>> {
        self.inner
            .on_lattice(dw, kmax)
            .map(|v| v.into_iter().map(|x| self.c * x).collect())
    }

    fn tail_l1_bound(&self, omega_max: f64) -> f64 {
        self.c.abs() * self.inner.tail_l1_bound(omega_max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Construction {
    Antisymmetrized,
    Explicit,
}

/// Signs of an odd cumulant grid, restricted to `[−H, H]²`.
#[derive(Debug)]
struct LatticeSign {
    n: usize,
    half_width: f64,
    spacing: f64,
    signs: Vec<f64>,
}

type Eval = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Bounded, compactly supported, jointly odd test function.
#[derive(Clone)]
pub struct OddTestFunction {
    support_radius: f64,
    bound: f64,
    eval: Eval,
    factor: Option<Arc<dyn TransformFactor>>,
    lattice: Option<Arc<LatticeSign>>,
    construction: Construction,
    label: String,
}

impl fmt::Debug for OddTestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OddTestFunction")
            .field("label", &self.label)
            .field("support_radius", &self.support_radius)
            .field("bound", &self.bound)
            .field("construction", &self.construction)
            .finish()
    }
}

fn check_radius(h: f64) -> Result<()> {
    if h > 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "support radius must be positive, got {h}"
        )))
    }
}

impl OddTestFunction {
    /// `g(τ) = u(τ) − u(−τ)` on `[−H, H]²`; `u_bound` bounds `|u|` there.
    pub fn antisymmetrize(
        u: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        h: f64,
        u_bound: f64,
    ) -> Result<Self> {
        check_radius(h)?;
        Ok(Self {
            support_radius: h,
            bound: 2.0 * u_bound,
            eval: Arc::new(move |a, b| u(a, b) - u(-a, -b)),
            factor: None,
            lattice: None,
            construction: Construction::Antisymmetrized,
            label: "antisymmetrized".into(),
        })
    }

    /// A function the caller asserts is already jointly odd.
    pub fn explicit(
        g: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        h: f64,
        bound: f64,
        factor: Option<Arc<dyn TransformFactor>>,
    ) -> Result<Self> {
        check_radius(h)?;
        Ok(Self {
            support_radius: h,
            bound,
            eval: Arc::new(g),
            factor,
            lattice: None,
            construction: Construction::Explicit,
            label: "explicit".into(),
        })
    }

    /// Default smooth test function: the product bump of radius `H/2`
    /// centred at `(H/2, H/2)`, antisymmetrised. `‖g‖∞ = 1`.
    pub fn default_bump(h: f64) -> Result<Self> {
        check_radius(h)?;
        let r = 0.5 * h;
        let u = move |a: f64, b: f64| bump((a - r) / r) * bump((b - r) / r);
        Ok(Self {
            support_radius: h,
            bound: 1.0,
            eval: Arc::new(move |a, b| u(a, b) - u(-a, -b)),
            factor: Some(Arc::new(BumpFactor::new(r, r))),
            lattice: None,
            construction: Construction::Antisymmetrized,
            label: format!("bump:{h}"),
        })
    }

    /// `+1` on the open positive quadrant box, `−1` on its reflection.
    pub fn quadrant(h: f64) -> Result<Self> {
        let mut f = Self::antisymmetrize(
            |a, b| if a > 0.0 && b > 0.0 { 1.0 } else { 0.0 },
            h,
            1.0,
        )?;
        f.bound = 1.0;
        f.label = format!("quadrant:{h}");
        Ok(f)
    }

    /// `sgn(c₃ᵒ)` on `[−H, H]²`, read off the lattice by nearest node.
    pub fn sign_of_grid(grid: &CumulantGrid, h: f64) -> Result<Self> {
        check_radius(h)?;
        if h > grid.half_width {
            return Err(Error::HOutOfRange {
                h,
                half_width: grid.half_width,
            });
        }
        let odd = cumulant3::odd_part(grid);
        let n = grid.n;
        let signs: Vec<f64> = (0..n * n)
            .map(|i| {
                let (j1, j2) = (i / n, i % n);
                if grid.tau(j1).abs() > h || grid.tau(j2).abs() > h {
                    0.0
                } else {
                    sign(odd.values[i])
                }
            })
            .collect();
        let lat = Arc::new(LatticeSign {
            n,
            half_width: grid.half_width,
            spacing: grid.spacing,
            signs,
        });
        let l2 = lat.clone();
        Ok(Self {
            support_radius: h,
            bound: 1.0,
            eval: Arc::new(move |a, b| {
                let idx = |t: f64| ((t + l2.half_width) / l2.spacing).round();
                let (i, j) = (idx(a), idx(b));
                if i < 0.0 || j < 0.0 || i >= l2.n as f64 || j >= l2.n as f64 {
                    return 0.0;
                }
                l2.signs[i as usize * l2.n + j as usize]
            }),
            factor: None,
            lattice: Some(lat),
            construction: Construction::Explicit,
            label: format!("sign:{h}"),
        })
    }

    /// `c·g`.
    pub fn scaled(&self, c: f64) -> Self {
        let inner = self.eval.clone();
        Self {
            support_radius: self.support_radius,
            bound: c.abs() * self.bound,
            eval: Arc::new(move |a, b| c * inner(a, b)),
            factor: self.factor.clone().map(|f| {
                Arc::new(ScaledFactor { inner: f, c }) as Arc<dyn TransformFactor>
            }),
            lattice: self.lattice.as_ref().map(|l| {
                Arc::new(LatticeSign {
                    n: l.n,
                    half_width: l.half_width,
                    spacing: l.spacing,
                    signs: l.signs.iter().map(|s| c * s).collect(),
                })
            }),
            construction: self.construction,
            label: format!("{}*{c}", self.label),
        }
    }

    pub fn with_transform_factor(mut self, f: Arc<dyn TransformFactor>) -> Self {
        self.factor = Some(f);
        self
    }

    pub fn support_radius(&self) -> f64 {
        self.support_radius
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn construction(&self) -> Construction {
        self.construction
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn transform_factor(&self) -> Option<&Arc<dyn TransformFactor>> {
        self.factor.as_ref()
    }

    /// `g(τ₁, τ₂)`, zero outside `[−H, H]²`.
    #[inline]
    pub fn eval(&self, t1: f64, t2: f64) -> f64 {
        let h = self.support_radius;
        if t1.abs() > h || t2.abs() > h {
            0.0
        } else {
            (self.eval)(t1, t2)
        }
    }

    /// `g` at lattice node `(j₁, j₂)`; exact for grid-derived functions.
    pub fn eval_lattice(&self, j1: usize, j2: usize, t1: f64, t2: f64) -> f64 {
        match &self.lattice {
            Some(l) if j1 < l.n && j2 < l.n => {
                let expect = -l.half_width + j1 as f64 * l.spacing;
                if (expect - t1).abs() <= 1e-9 * l.spacing {
                    return l.signs[j1 * l.n + j2];
                }
                self.eval(t1, t2)
            }
            _ => self.eval(t1, t2),
        }
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Parses `bump:<H>`, `quadrant:<H>`, or `bump` / `quadrant` with the
/// radius supplied separately.
pub fn parse_test_function(spec: &str, h: Option<f64>) -> Result<OddTestFunction> {
    let (name, arg) = match spec.split_once(':') {
        Some((n, a)) => (n, Some(a)),
        None => (spec, None),
    };
    let radius = match (arg, h) {
        (Some(a), _) => a
            .parse::<f64>()
            .map_err(|_| Error::InvalidParameter(format!("bad radius in `{spec}`")))?,
        (None, Some(h)) => h,
        (None, None) => {
            return Err(Error::InvalidParameter(format!(
                "test function `{spec}` needs a support radius"
            )))
        }
    };
    match name {
        "bump" => OddTestFunction::default_bump(radius),
        "quadrant" => OddTestFunction::quadrant(radius),
        other => Err(Error::InvalidParameter(format!(
            "unknown test function `{other}`; expected bump or quadrant"
        ))),
    }
}

/// `O_{T,g}`: anchor-major over sorted indices, then `j`, then `k`, with one
/// running sum. Only events within `H` of the anchor are visited.
#[allow(clippy::needless_range_loop)]
pub fn contrast_statistic(e: &EventSeries, f: &OddTestFunction) -> f64 {
    let x = &e.times;
    let n = x.len();
    if n < 3 {
        return 0.0;
    }
    if e.window_end <= 0.0 {
        log::warn!("empty observation window; contrast statistic set to 0");
        return 0.0;
    }
    let h = f.support_radius();
    let mut sum = 0.0;
    let mut lo = 0;
    let mut hi = 0;
    for i in 0..n {
        let x0 = x[i];
        while x0 - x[lo] > h {
            lo += 1;
        }
        if hi < i {
            hi = i;
        }
        while hi + 1 < n && x[hi + 1] - x0 <= h {
            hi += 1;
        }
        for j in lo..=hi {
            if j == i {
                continue;
            }
            let t1 = x[j] - x0;
            for k in lo..=hi {
                if k == i || k == j {
                    continue;
                }
                sum += f.eval(t1, x[k] - x0);
            }
        }
    }
    sum / e.window_end
}

/// `a_T(τ)`: fraction of anchors in `[0, T]` whose lags stay in the window.
pub fn window_weight(t_end: f64, t1: f64, t2: f64) -> f64 {
    let span = t1.max(t2).max(0.0) - t1.min(t2).min(0.0);
    (1.0 - span / t_end).max(0.0)
}

/// Exact mean of the contrast statistic and its large-window limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExactMean {
    /// `θ·μ_{T,g}`.
    pub mean: f64,
    pub mu_t: f64,
    /// `μ_g`.
    pub mu_inf: f64,
    /// `2H‖g‖∞‖c₃ᵒ‖₁/T`.
    pub gap_bound: f64,
}

/// `θ·μ_{T,g}` from a cumulant grid of the forward or any sign-biased model;
/// the grid's own `θ` is divided out.
pub fn exact_mean(
    p: &ModelParams,
    f: &OddTestFunction,
    t_end: f64,
    grid: &CumulantGrid,
) -> Result<ExactMean> {
    if !(t_end > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "window length must be positive, got {t_end}"
        )));
    }
    if grid.theta == 0.0 {
        return Err(Error::InvalidParameter(
            "cumulant grid was inverted at θ = 0 and carries no odd part".into(),
        ));
    }
    let unit = 1.0 / grid.theta;
    let mu_t = unit * cumulant3::mu_g_time_weighted(grid, f, |a, b| window_weight(t_end, a, b))?;
    let mu_inf = unit * cumulant3::mu_g_time(grid, f)?;
    let odd_l1 = cumulant3::odd_part(grid).abs_total() * unit.abs();
    Ok(ExactMean {
        mean: if p.theta == 0.0 { 0.0 } else { p.theta * mu_t },
        mu_t,
        mu_inf,
        gap_bound: 2.0 * f.support_radius() * f.bound() * odd_l1 / t_end,
    })
}

/// Replicate mean and standard error of the statistic at one `θ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaMean {
    pub theta: f64,
    pub mean: f64,
    pub stderr: f64,
    pub replicates: usize,
}

/// Weighted least-squares line through the per-`θ` means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub per_theta: Vec<ThetaMean>,
    pub slope: f64,
    pub slope_stderr: f64,
    pub intercept: f64,
    pub intercept_stderr: f64,
}

/// Mean and standard error of a sample.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Weighted least squares `y = a + bx` with weights `1/se²`; returns
/// `(b, se_b, a, se_a)`.
pub fn weighted_line(x: &[f64], y: &[f64], se: &[f64]) -> (f64, f64, f64, f64) {
    let w: Vec<f64> = se.iter().map(|s| 1.0 / (s * s)).collect();
    let sw: f64 = w.iter().sum();
    let sx: f64 = w.iter().zip(x).map(|(w, x)| w * x).sum();
    let sy: f64 = w.iter().zip(y).map(|(w, y)| w * y).sum();
    let sxx: f64 = w.iter().zip(x).map(|(w, x)| w * x * x).sum();
    let sxy: f64 = w.iter().zip(x).zip(y).map(|((w, x), y)| w * x * y).sum();
    let det = sw * sxx - sx * sx;
    let b = (sw * sxy - sx * sy) / det;
    let a = (sxx * sy - sx * sxy) / det;
    (b, (sw / det).sqrt(), a, (sxx / det).sqrt())
}

/// Simulates `replicates` windows at each `θ` and fits the mean statistic
/// against `θ`. Replicate `r` at `θ`-index `i` uses `streams.child(i).child(r)`.
pub fn linearity_scan(
    p: &ModelParams,
    f: &OddTestFunction,
    t_end: f64,
    thetas: &[f64],
    replicates: usize,
    streams: &Streams,
    sim: &SimOptions,
) -> Result<ScanResult> {
    if thetas.len() < 3 {
        return Err(Error::InvalidParameter(
            "linearity scan needs at least three θ values".into(),
        ));
    }
    if replicates < 2 {
        return Err(Error::InvalidParameter(
            "linearity scan needs at least two replicates".into(),
        ));
    }
    let mut per_theta = Vec::with_capacity(thetas.len());
    for (i, &theta) in thetas.iter().enumerate() {
        let q = p.with_theta(theta);
        q.validate()?;
        let fam = streams.child(i as u64);
        let stats = (0..replicates)
            .into_par_iter()
            .map(|r| {
                let e = simulate_window(&q, t_end, fam.child(r as u64).seed(), sim)?;
                Ok(contrast_statistic(&e, f))
            })
            .collect::<Result<Vec<f64>>>()?;
        let (mean, stderr) = mean_stderr(&stats);
        per_theta.push(ThetaMean {
            theta,
            mean,
            stderr,
            replicates,
        });
    }
    let xs: Vec<f64> = per_theta.iter().map(|t| t.theta).collect();
    let ys: Vec<f64> = per_theta.iter().map(|t| t.mean).collect();
    let ses: Vec<f64> = per_theta.iter().map(|t| t.stderr.max(1e-300)).collect();
    let (slope, slope_stderr, intercept, intercept_stderr) = weighted_line(&xs, &ys, &ses);
    Ok(ScanResult {
        per_theta,
        slope,
        slope_stderr,
        intercept,
        intercept_stderr,
    })
}
