//! Monte-Carlo oracles for the closed forms.
//!
//! Cluster `i` of an estimate always draws from substream `i`, and sums are
//! reduced over fixed chunks in index order, so a seed reproduces an
//! estimate bit for bit regardless of the thread count.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::rng::Streams;
use crate::simulate::{
    flip_cluster, sample_cluster, sample_sign, simulate_window, Cluster, ClusterCaps, EventSeries,
    ModelParams, SimOptions,
};
use crate::spectra::{self, Form};

const CHUNK: usize = 4096;

/// A Monte-Carlo mean with component-wise standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub re: f64,
    pub im: f64,
    pub stderr_re: f64,
    pub stderr_im: f64,
    pub n_samples: usize,
    pub seed: u64,
}

impl McEstimate {
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }

    /// Component-wise z-scores against `target` (0 where both the error and
    /// the stderr vanish).
    pub fn z_scores(&self, target: Complex64) -> (f64, f64) {
        let z = |d: f64, s: f64| if d == 0.0 { 0.0 } else { d / s };
        (
            z(self.re - target.re, self.stderr_re),
            z(self.im - target.im, self.stderr_im),
        )
    }

    pub fn within(&self, target: Complex64, k: f64) -> bool {
        let (a, b) = self.z_scores(target);
        a.abs() <= k && b.abs() <= k
    }
}

/// Running mean and sum of squared deviations (Chan et al. merge).
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1.0;
        let d = x - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (x - self.mean);
    }

    fn merge(self, o: Moments) -> Moments {
        if self.n == 0.0 {
            return o;
        }
        if o.n == 0.0 {
            return self;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        Moments {
            n,
            mean: self.mean + d * o.n / n,
            m2: self.m2 + o.m2 + d * d * self.n * o.n / n,
        }
    }

    fn stderr(&self) -> f64 {
        if self.n < 2.0 {
            f64::NAN
        } else {
            (self.m2 / (self.n - 1.0) / self.n).sqrt()
        }
    }
}

/// Deterministic chunked reduction of `f(i)` over `0..n` into `k` complex
/// statistics.
fn reduce_complex(
    n: usize,
    k: usize,
    f: impl Fn(usize) -> Result<Vec<Complex64>> + Sync,
) -> Result<Vec<(Moments, Moments)>> {
    let chunks: Vec<Vec<(Moments, Moments)>> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![(Moments::default(), Moments::default()); k];
            for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
                for (slot, z) in acc.iter_mut().zip(f(i)?) {
                    slot.0.push(z.re);
                    slot.1.push(z.im);
                }
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut total = vec![(Moments::default(), Moments::default()); k];
    for chunk in chunks {
        for (t, c) in total.iter_mut().zip(chunk) {
            *t = (t.0.merge(c.0), t.1.merge(c.1));
        }
    }
    Ok(total)
}

fn to_estimates(ms: Vec<(Moments, Moments)>, scale: f64, seed: u64) -> Vec<McEstimate> {
    ms.into_iter()
        .map(|(r, i)| McEstimate {
            re: scale * r.mean,
            im: scale * i.mean,
            stderr_re: scale.abs() * r.stderr(),
            stderr_im: scale.abs() * i.stderr(),
            n_samples: r.n as usize,
            seed,
        })
        .collect()
}

/// `W(ω) = Σ_{x ∈ C} e^{−iωx}`.
pub fn cluster_transform(c: &Cluster, omega: f64) -> Complex64 {
    c.times
        .iter()
        .map(|&x| Complex64::from_polar(1.0, -omega * x))
        .sum()
}

fn signed_cluster(p: &ModelParams, streams: &Streams, i: usize) -> Result<Cluster> {
    let mut r = streams.rng(i as u64);
    let s = sample_sign(p.theta, &mut r);
    let c = sample_cluster(p.m, &p.kernel, &mut r, ClusterCaps::default())?;
    Ok(if s < 0.0 { flip_cluster(&c, s) } else { c })
}

fn require_clusters(n: usize, min: usize) -> Result<()> {
    if n < min {
        Err(Error::InvalidParameter(format!(
            "need at least {min} clusters, got {n}"
        )))
    } else {
        Ok(())
    }
}

/// `ν·E{W(ω₁)W(ω₂)W(−ω₁−ω₂)}` at each pair, sharing one set of clusters.
pub fn mc_b_complete_many(
    p: &ModelParams,
    pairs: &[(f64, f64)],
    n_clusters: usize,
    streams: &Streams,
) -> Result<Vec<McEstimate>> {
    require_clusters(n_clusters, 2)?;
    let ms = reduce_complex(n_clusters, pairs.len(), |i| {
        let c = signed_cluster(p, streams, i)?;
        Ok(pairs
            .iter()
            .map(|&(a, b)| {
                cluster_transform(&c, a) * cluster_transform(&c, b) * cluster_transform(&c, -a - b)
            })
            .collect())
    })?;
    Ok(to_estimates(ms, p.nu, streams.seed()))
}

pub fn mc_b_complete(
    p: &ModelParams,
    w1: f64,
    w2: f64,
    n_clusters: usize,
    streams: &Streams,
) -> Result<McEstimate> {
    require_clusters(n_clusters, 1000)?;
    Ok(mc_b_complete_many(p, &[(w1, w2)], n_clusters, streams)?[0])
}

/// `E{W(a)W(b)}`, whose closed form is `R(a)R(b)R(a+b)` for forward clusters.
pub fn mc_cluster_m2(
    p: &ModelParams,
    a: f64,
    b: f64,
    n_clusters: usize,
    streams: &Streams,
) -> Result<McEstimate> {
    require_clusters(n_clusters, 1000)?;
    let ms = reduce_complex(n_clusters, 1, |i| {
        let c = signed_cluster(p, streams, i)?;
        Ok(vec![cluster_transform(&c, a) * cluster_transform(&c, b)])
    })?;
    Ok(to_estimates(ms, 1.0, streams.seed())[0])
}

/// `R(a)R(b)R(a+b)` with `R = 1/(1 − mĥ)`.
pub fn cluster_m2_closed_form(p: &ModelParams, a: f64, b: f64) -> Result<Complex64> {
    let r = |w: f64| -> Result<Complex64> {
        Ok(Complex64::new(1.0, 0.0) / (1.0 - p.m * p.kernel.transform(w)?))
    };
    Ok(r(a)? * r(b)? * r(a + b)?)
}

/// Estimates of `E M`, `E M²`, `E M³`, `E[M(M−1)(M−2)]` for the total
/// progeny.
pub fn cluster_size_moments(
    m: f64,
    kernel: &Kernel,
    n_clusters: usize,
    streams: &Streams,
) -> Result<[McEstimate; 4]> {
    require_clusters(n_clusters, 2)?;
    let ms = reduce_complex(n_clusters, 4, |i| {
        let mut r = streams.rng(i as u64);
        let c = sample_cluster(m, kernel, &mut r, ClusterCaps::default())?;
        let s = c.size() as f64;
        Ok(vec![
            Complex64::new(s, 0.0),
            Complex64::new(s * s, 0.0),
            Complex64::new(s * s * s, 0.0),
            Complex64::new(s * (s - 1.0) * (s - 2.0), 0.0),
        ])
    })?;
    let v = to_estimates(ms, 1.0, streams.seed());
    Ok([v[0], v[1], v[2], v[3]])
}

/// `|Σ e^{−iωx}|²/T`.
pub fn periodogram(e: &EventSeries, omega: f64) -> f64 {
    let s: Complex64 = e
        .times
        .iter()
        .map(|&x| Complex64::from_polar(1.0, -omega * x))
        .sum();
    s.norm_sqr() / e.window_end
}

/// Replicate-mean periodogram at each frequency. Replicate `r` simulates
/// with seed `streams.child(r)`.
pub fn mean_periodogram(
    p: &ModelParams,
    t_end: f64,
    omegas: &[f64],
    replicates: usize,
    streams: &Streams,
    sim: &SimOptions,
) -> Result<Vec<McEstimate>> {
    require_clusters(replicates, 2)?;
    let rows = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let e = simulate_window(p, t_end, streams.child(r as u64).seed(), sim)?;
            Ok(omegas.iter().map(|&w| periodogram(&e, w)).collect::<Vec<_>>())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let mut out = Vec::with_capacity(omegas.len());
    for j in 0..omegas.len() {
        let mut m = Moments::default();
        for row in &rows {
            m.push(row[j]);
        }
        out.push(McEstimate {
            re: m.mean,
            im: 0.0,
            stderr_re: m.stderr(),
            stderr_im: 0.0,
            n_samples: replicates,
            seed: streams.seed(),
        });
    }
    Ok(out)
}

/// Direct estimate of the `c₃` mass in each sign quadrant `(++, −+, −−, +−)`
/// of the lag plane: `ν·E Σ_{≠} 1{(x₁−x₀, x₂−x₀) ∈ Q}` over clusters.
pub fn triple_lag_quadrants(
    p: &ModelParams,
    n_clusters: usize,
    streams: &Streams,
) -> Result<[McEstimate; 4]> {
    require_clusters(n_clusters, 2)?;
    let ms = reduce_complex(n_clusters, 4, |i| {
        let c = signed_cluster(p, streams, i)?;
        let t = &c.times;
        let mut q = [0.0f64; 4];
        for (a, &x0) in t.iter().enumerate() {
            for (b, &x1) in t.iter().enumerate() {
                if b == a {
                    continue;
                }
                for (d, &x2) in t.iter().enumerate() {
                    if d == a || d == b {
                        continue;
                    }
                    let (u, v) = (x1 - x0, x2 - x0);
                    let idx = match (u >= 0.0, v >= 0.0) {
                        (true, true) => 0,
                        (false, true) => 1,
                        (false, false) => 2,
                        (true, false) => 3,
                    };
                    q[idx] += 1.0;
                }
            }
        }
        Ok(q.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    })?;
    let v = to_estimates(ms, p.nu, streams.seed());
    Ok([v[0], v[1], v[2], v[3]])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Bispectrum,
    Bartlett,
    Moments,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Quick,
    Full,
}

/// One estimate-versus-closed-form comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub name: String,
    pub estimate: McEstimate,
    pub expected_re: f64,
    pub expected_im: f64,
    pub z_re: f64,
    pub z_im: f64,
    pub band: f64,
    pub pass: bool,
}

impl Comparison {
    pub fn new(name: impl Into<String>, estimate: McEstimate, expected: Complex64, band: f64) -> Self {
        let (z_re, z_im) = estimate.z_scores(expected);
        Self {
            name: name.into(),
            estimate,
            expected_re: expected.re,
            expected_im: expected.im,
            z_re,
            z_im,
            band,
            pass: z_re.abs() <= band && z_im.abs() <= band,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub suite: Suite,
    pub level: Level,
    pub seed: u64,
    pub params: ModelParams,
    pub comparisons: Vec<Comparison>,
    pub pass: bool,
}

/// Runs one validation suite against the closed forms for `p`.
pub fn validate_suite(
    suite: Suite,
    level: Level,
    p: &ModelParams,
    seed: u64,
) -> Result<ValidationReport> {
    let streams = Streams::new(seed);
    let full = level == Level::Full;
    let comparisons = match suite {
        Suite::Bispectrum => {
            let pairs = [(0.0, 0.0), (0.5, 0.3), (1.0, -0.4), (2.0, 1.0), (-1.5, 0.7)];
            let n = if full { 10_000_000 } else { 1_000_000 };
            let est = mc_b_complete_many(p, &pairs, n, &streams)?;
            pairs
                .iter()
                .zip(est)
                .map(|(&(a, b), e)| {
                    let expected = spectra::b_complete(p, a, b, Form::R)?;
                    Ok(Comparison::new(format!("b_complete({a}, {b})"), e, expected, 3.0))
                })
                .collect::<Result<Vec<_>>>()?
        }
        Suite::Bartlett => {
            let omegas = [0.5, 1.0, 2.0, 4.0];
            let (t, reps) = if full { (1e4, 200) } else { (2e3, 50) };
            let est = mean_periodogram(p, t, &omegas, reps, &streams, &SimOptions::default())?;
            omegas
                .iter()
                .zip(est)
                .map(|(&w, e)| {
                    let g = spectra::bartlett(p, w)?;
                    Ok(Comparison::new(format!("bartlett({w})"), e, Complex64::new(g, 0.0), 4.0))
                })
                .collect::<Result<Vec<_>>>()?
        }
        Suite::Moments => {
            let n = if full { 1_000_000 } else { 100_000 };
            let [e1, e2, _, f3] = cluster_size_moments(p.m, &p.kernel, n, &streams)?;
            let [r1, r2, _] = spectra::borel_raw_moments(p.m);
            let m2 = mc_cluster_m2(p, 0.7, -0.3, n, &streams.child(1))?;
            let m2_exact = cluster_m2_closed_form(&p.with_theta(1.0), 0.7, -0.3)?;
            let m2_target = if p.theta == 1.0 {
                m2_exact
            } else {
                // Sign-mixed clusters: E W(a)W(b) = p₊ M₂(a,b) + p₋ conj M₂(a,b).
                let pp = 0.5 * (1.0 + p.theta);
                pp * m2_exact + (1.0 - pp) * m2_exact.conj()
            };
            vec![
                Comparison::new("E[M]", e1, Complex64::new(r1, 0.0), 4.0),
                Comparison::new("E[M^2]", e2, Complex64::new(r2, 0.0), 4.0),
                Comparison::new(
                    "E[(M)_3]",
                    f3,
                    Complex64::new(spectra::borel_factorial3(p.m), 0.0),
                    4.0,
                ),
                Comparison::new("M2(0.7, -0.3)", m2, m2_target, 4.0),
            ]
        }
    };
    let pass = comparisons.iter().all(|c| c.pass);
    Ok(ValidationReport {
        suite,
        level,
        seed,
        params: p.clone(),
        comparisons,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments_merge_matches_direct() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 * 0.1).collect();
        let mut a = Moments::default();
        let mut b = Moments::default();
        let mut all = Moments::default();
        for (i, &x) in xs.iter().enumerate() {
            if i < 333 {
                a.push(x)
            } else {
                b.push(x)
            }
            all.push(x);
        }
        let m = a.merge(b);
        assert!((m.mean - all.mean).abs() < 1e-12);
        assert!((m.m2 - all.m2).abs() < 1e-9 * all.m2);
    }

    #[test]
    fn cluster_transform_at_zero_is_size() {
        let c = Cluster {
            times: vec![0.0, 0.4, 1.3],
            parent: vec![None, Some(0), Some(0)],
            sign: 1.0,
        };
        assert_eq!(cluster_transform(&c, 0.0), Complex64::new(3.0, 0.0));
    }

    #[test]
    fn seeded_estimates_are_bitwise_reproducible() {
        let p = ModelParams::new(1.0, 0.5, 1.0, Kernel::exponential(1.0).unwrap()).unwrap();
        let a = mc_b_complete(&p, 0.3, 0.8, 5000, &Streams::new(9)).unwrap();
        let b = mc_b_complete(&p, 0.3, 0.8, 5000, &Streams::new(9)).unwrap();
        assert_eq!(a, b);
    }
}
