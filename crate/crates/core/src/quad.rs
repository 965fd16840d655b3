//! Adaptive Gauss–Kronrod quadrature, semi-infinite integrals, and half-line
//! Fourier integrals summed segment by segment with Wynn-epsilon acceleration.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

// 21-point Kronrod abscissae and weights with the embedded 10-point Gauss rule.
const XGK: [f64; 11] = [
    0.995_657_163_025_808_1,
    0.973_906_528_517_171_7,
    0.930_157_491_355_708_2,
    0.865_063_366_688_984_5,
    0.780_817_726_586_416_9,
    0.679_409_568_299_024_4,
    0.562_757_134_668_604_7,
    0.433_395_394_129_247_2,
    0.294_392_862_701_460_2,
    0.148_874_338_981_631_22,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874,
    0.032_558_162_307_964_725,
    0.054_755_896_574_351_995,
    0.075_039_674_810_919_96,
    0.093_125_454_583_697_6,
    0.109_387_158_802_297_64,
    0.123_491_976_262_065_84,
    0.134_709_217_311_473_34,
    0.142_775_938_577_060_09,
    0.147_739_104_901_338_49,
    0.149_445_554_002_916_9,
];

const WG: [f64; 5] = [
    0.066_671_344_308_688_14,
    0.149_451_349_150_580_6,
    0.219_086_362_515_982_04,
    0.269_266_719_309_996_35,
    0.295_524_224_714_752_87,
];

/// Value and absolute error estimate of a quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub abs_err: f64,
}

fn gk21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut res_k = fc * WGK[10];
    let mut res_g = 0.0;
    let mut res_abs = res_k.abs();
    let mut fv = [(0.0, 0.0); 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv[j] = (f1, f2);
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv[j].0 - mean).abs() + (fv[j].1 - mean).abs());
    }
    let res_k = res_k * half;
    let res_abs = res_abs * half.abs();
    let res_asc = res_asc * half.abs();
    let mut err = ((res_k - res_g * half) * half.signum()).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (1.0f64).min((200.0 * err / res_asc).powf(1.5));
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    (res_k, err)
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Globally adaptive 21-point Gauss–Kronrod integration of `f` over `[a, b]`.
///
/// Stops once the summed error estimate is below `max(abs_tol, rel_tol·|I|)`.
/// When the interval budget runs out the best estimate is returned together
/// with its (unmet) error; callers decide whether that is fatal.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_intervals: usize,
) -> Estimate {
    if a == b {
        return Estimate {
            value: 0.0,
            abs_err: 0.0,
        };
    }
    let (v, e) = gk21(&f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, value: v, err: e });
    let mut total = v;
    let mut total_err = e;
    let mut count = 1;
    while total_err > abs_tol.max(rel_tol * total.abs()) && count < max_intervals {
        let Some(seg) = heap.pop() else { break };
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a.min(seg.b) || mid >= seg.a.max(seg.b) {
            heap.push(seg);
            break;
        }
        let (v1, e1) = gk21(&f, seg.a, mid);
        let (v2, e2) = gk21(&f, mid, seg.b);
        total += v1 + v2 - seg.value;
        total_err += e1 + e2 - seg.err;
        heap.push(Segment { a: seg.a, b: mid, value: v1, err: e1 });
        heap.push(Segment { a: mid, b: seg.b, value: v2, err: e2 });
        count += 1;
    }
    // Re-sum from the leaves to shed accumulated cancellation error.
    let (value, abs_err) = heap
        .iter()
        .fold((0.0, 0.0), |(v, e), s| (v + s.value, e + s.err));
    Estimate { value, abs_err }
}

/// Integral of `f` over `[a, ∞)` via the substitution `x = a + (1 - t)/t`.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_intervals: usize,
) -> Estimate {
    let g = |t: f64| {
        let x = a + (1.0 - t) / t;
        let y = f(x) / (t * t);
        if y.is_finite() {
            y
        } else {
            0.0
        }
    };
    integrate(g, 0.0, 1.0, abs_tol, rel_tol, max_intervals)
}

/// Wynn epsilon extrapolation of a sequence of partial sums; returns the
/// deepest even-column entry.
pub fn wynn_epsilon(sums: &[f64]) -> f64 {
    let Some(&last) = sums.last() else {
        return 0.0;
    };
    let mut prev = vec![0.0; sums.len() + 1];
    let mut cur = sums.to_vec();
    let mut best = last;
    let mut k = 0usize;
    while cur.len() > 1 {
        let mut next = Vec::with_capacity(cur.len() - 1);
        for n in 0..cur.len() - 1 {
            let d = cur[n + 1] - cur[n];
            if d.abs() <= f64::MIN_POSITIVE * 1e10 || !d.is_finite() {
                return if k.is_multiple_of(2) { cur[n + 1] } else { best };
            }
            next.push(prev[n + 1] + 1.0 / d);
        }
        prev = cur;
        cur = next;
        k += 1;
        if k.is_multiple_of(2) {
            let v = *cur.last().expect("non-empty column");
            if !v.is_finite() {
                return best;
            }
            best = v;
        }
    }
    best
}

/// Settings for [`fourier_half_line`].
#[derive(Debug, Clone, Copy)]
pub struct OscillatoryOptions {
    /// Absolute target for each of the cosine and sine parts.
    pub abs_tol: f64,
    /// Cap on the number of half-period segments per part.
    pub max_segments: usize,
}

impl Default for OscillatoryOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-9,
            max_segments: 10_000,
        }
    }
}

/// `∫_0^∞ f(t) trig(ω t) dt` with segments that end on zeros of the trig
/// factor, so the segment integrals alternate for monotone `f`.
fn oscillatory_part<F: Fn(f64) -> f64>(
    f: &F,
    omega: f64,
    cosine: bool,
    opts: OscillatoryOptions,
    context: &str,
) -> Result<Estimate> {
    let period = PI / omega;
    let offset = if cosine { 0.5 } else { 0.0 };
    let trig = |t: f64| {
        if cosine {
            (omega * t).cos()
        } else {
            (omega * t).sin()
        }
    };
    let g = |t: f64| f(t) * trig(t);
    let seg_tol = opts.abs_tol * 0.05;
    let mut sums: Vec<f64> = Vec::new();
    let mut partial = 0.0;
    let mut quad_err = 0.0;
    let mut accel_hist: Vec<f64> = Vec::new();
    let mut a = 0.0;
    const WINDOW: usize = 24;
    for k in 0..opts.max_segments {
        let b = (k as f64 + 1.0 + offset) * period;
        let est = integrate(g, a, b, seg_tol, 1e-13, 400);
        partial += est.value;
        quad_err += est.abs_err;
        sums.push(partial);
        a = b;
        let start = sums.len().saturating_sub(WINDOW);
        let acc = wynn_epsilon(&sums[start..]);
        accel_hist.push(acc);
        if k >= 5 {
            let n = accel_hist.len();
            let d1 = (accel_hist[n - 1] - accel_hist[n - 2]).abs();
            let d2 = (accel_hist[n - 1] - accel_hist[n - 3]).abs();
            let tail_small = est.value.abs() < opts.abs_tol * 1e-3;
            if tail_small {
                return Ok(Estimate {
                    value: partial,
                    abs_err: quad_err + est.value.abs(),
                });
            }
            if d1.max(d2) < opts.abs_tol * 0.5 {
                return Ok(Estimate {
                    value: acc,
                    abs_err: quad_err + d1.max(d2),
                });
            }
        }
    }
    let n = accel_hist.len();
    let estimate = if n >= 2 {
        (accel_hist[n - 1] - accel_hist[n - 2]).abs() + quad_err
    } else {
        f64::INFINITY
    };
    Err(Error::QuadratureNotConverged {
        context: context.to_string(),
        estimate,
        target: opts.abs_tol,
    })
}

/// `∫_0^∞ e^{-iωt} f(t) dt` for a decaying, eventually monotone `f`.
///
/// At `ω = 0` this is a plain semi-infinite integral. For `ω < 0` the
/// conjugate of the `|ω|` value is returned.
pub fn fourier_half_line<F: Fn(f64) -> f64>(
    f: F,
    omega: f64,
    opts: OscillatoryOptions,
    context: &str,
) -> Result<(Complex64, f64)> {
    if omega == 0.0 {
        let est = integrate_to_infinity(&f, 0.0, opts.abs_tol * 0.1, 1e-14, 2000);
        if est.abs_err > opts.abs_tol {
            return Err(Error::QuadratureNotConverged {
                context: context.to_string(),
                estimate: est.abs_err,
                target: opts.abs_tol,
            });
        }
        return Ok((Complex64::new(est.value, 0.0), est.abs_err));
    }
    let w = omega.abs();
    let c = oscillatory_part(&f, w, true, opts, context)?;
    let s = oscillatory_part(&f, w, false, opts, context)?;
    let z = Complex64::new(c.value, -s.value);
    let z = if omega < 0.0 { z.conj() } else { z };
    Ok((z, c.abs_err + s.abs_err))
}
