//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use cluster_orient::contrasts::OddTestFunction;
use cluster_orient::{EventSeries, Kernel, ModelParams};
use num_complex::Complex64;

pub fn exp_model(m: f64) -> ModelParams {
    ModelParams::new(1.0, m, 1.0, Kernel::exponential(1.0).unwrap()).unwrap()
}

pub fn model(kernel: &str, m: f64) -> ModelParams {
    ModelParams::new(1.0, m, 1.0, kernel.parse().unwrap()).unwrap()
}

/// Composite Simpson rule with `n` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    assert!(n.is_multiple_of(2));
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

pub fn simpson_c(f: impl Fn(f64) -> Complex64, a: f64, b: f64, n: usize) -> Complex64 {
    assert!(n.is_multiple_of(2));
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * (h / 3.0)
}

/// Lomax transform by rotating the contour onto the negative imaginary
/// axis: `ĥ(ω) = −i ∫₀^∞ e^{−ωs} α (1 − is)^{−1−α} ds` for `ω > 0`.
pub fn lomax_transform_contour(alpha: f64, omega: f64) -> Complex64 {
    assert!(omega > 0.0);
    let upper = 60.0 / omega;
    let f = |s: f64| {
        let base = Complex64::new(1.0, -s);
        Complex64::new((-omega * s).exp() * alpha, 0.0) * base.powf(-1.0 - alpha)
    };
    -Complex64::i() * simpson_c(f, 0.0, upper, 400_000)
}

/// Borel total-progeny moments by direct summation of the pmf
/// `P(M = n) = e^{−mn} (mn)^{n−1} / n!`.
pub fn borel_moments_by_pmf(m: f64) -> (f64, f64, f64, f64) {
    let (mut e1, mut e2, mut e3, mut f3) = (0.0, 0.0, 0.0, 0.0);
    for n in 1..20_000usize {
        let nf = n as f64;
        let lp = -m * nf + (nf - 1.0) * (m * nf).ln() - libm::lgamma(nf + 1.0);
        let p = lp.exp();
        e1 += p * nf;
        e2 += p * nf * nf;
        e3 += p * nf * nf * nf;
        f3 += p * nf * (nf - 1.0) * (nf - 2.0);
        if n > 50 && p * nf.powi(3) < 1e-18 {
            break;
        }
    }
    (e1, e2, e3, f3)
}

/// The contrast statistic as a plain triple loop over all distinct index
/// triples, anchor-major, accumulated in one running sum.
pub fn brute_force_statistic(e: &EventSeries, f: &OddTestFunction) -> f64 {
    let x = &e.times;
    let n = x.len();
    if n < 3 {
        return 0.0;
    }
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            if j == i {
                continue;
            }
            for k in 0..n {
                if k == i || k == j {
                    continue;
                }
                sum += f.eval(x[j] - x[i], x[k] - x[i]);
            }
        }
    }
    sum / e.window_end
}

/// Largest `|F_n(x) − F(x)|` over the sample points.
pub fn ks_distance(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let c = cdf(x);
        d = d.max((c - i as f64 / n).abs()).max(((i + 1) as f64 / n - c).abs());
    }
    d
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

pub fn crel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}
