//! Reconstruction of the reduced third factorial-cumulant density `c₃` by
//! two-dimensional inversion of `B_fac`, its even/odd split, the optimal
//! contrast mass `D_H`, and the time- and frequency-domain routes to `μ_g`.
//!
//! Lattice: `τ_j = −Λ + j·d` with `d = 2Λ/n`, and `ω_k = k·Δω` for
//! `k ∈ [−n/2, n/2)` with `Δω = 2π/(n·d) = π/Λ`. Then
//! `c(τ_j) = (n·d)⁻² Σ_k (−1)^{k₁+k₂} B(ω_k) e^{2πi k·j/n}`.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::contrasts::OddTestFunction;
use crate::error::{Error, Result};
use crate::simulate::ModelParams;
use crate::spectra::{self, BispectrumKind};

/// Fraction of `Σ|c|` allowed in the outer tenth of the lattice before the
/// alias warning is raised.
const ALIAS_FRACTION: f64 = 0.01;

/// `c₃` (or a derived part of it) sampled on `[−Λ, Λ)²`, row-major in `τ₁`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CumulantGrid {
    pub half_width: f64,
    pub n: usize,
    pub spacing: f64,
    pub values: Vec<f64>,
    /// `max|Im| / max|Re|` of the raw inverse transform.
    pub imag_residue: f64,
    pub alias_warning: bool,
    /// Sign parameter of the model the grid was inverted from.
    pub theta: f64,
}

impl CumulantGrid {
    pub fn tau(&self, j: usize) -> f64 {
        -self.half_width + j as f64 * self.spacing
    }

    pub fn at(&self, j1: usize, j2: usize) -> f64 {
        self.values[j1 * self.n + j2]
    }

    /// Lattice index of `−τ_j`, with `−Λ` identified with `Λ`.
    pub fn reflect_index(&self, j: usize) -> usize {
        (self.n - j) % self.n
    }

    /// Riemann sum `Σ c d²`.
    pub fn total(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.spacing * self.spacing
    }

    pub fn abs_total(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum::<f64>() * self.spacing * self.spacing
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    fn map_pairs(&self, f: impl Fn(f64, f64) -> f64) -> CumulantGrid {
        let n = self.n;
        let mut values = vec![0.0; n * n];
        for j1 in 0..n {
            let r1 = self.reflect_index(j1);
            for j2 in 0..n {
                let r2 = self.reflect_index(j2);
                values[j1 * n + j2] = f(self.at(j1, j2), self.at(r1, r2));
            }
        }
        CumulantGrid {
            values,
            ..self.clone()
        }
    }

    /// Sum of `|c|d²` over the lattice points in the outer tenth of the box
    /// divided by the total.
    pub fn boundary_fraction(&self) -> f64 {
        let band = 0.9 * self.half_width;
        let mut edge = 0.0;
        let mut all = 0.0;
        for j1 in 0..self.n {
            for j2 in 0..self.n {
                let v = self.at(j1, j2).abs();
                all += v;
                if self.tau(j1).abs() > band || self.tau(j2).abs() > band {
                    edge += v;
                }
            }
        }
        if all == 0.0 {
            0.0
        } else {
            edge / all
        }
    }

    /// Mass of `c` in each sign quadrant `(++, −+, −−, +−)` as fractions of
    /// the total; points on an axis are split evenly between neighbours.
    pub fn quadrant_fractions(&self) -> [f64; 4] {
        let mut q = [0.0; 4];
        for j1 in 0..self.n {
            for j2 in 0..self.n {
                let v = self.at(j1, j2);
                let (a, b) = (self.tau(j1), self.tau(j2));
                let wa = if a > 0.0 { [1.0, 0.0] } else if a < 0.0 { [0.0, 1.0] } else { [0.5, 0.5] };
                let wb = if b > 0.0 { [1.0, 0.0] } else if b < 0.0 { [0.0, 1.0] } else { [0.5, 0.5] };
                q[0] += v * wa[0] * wb[0];
                q[1] += v * wa[1] * wb[0];
                q[2] += v * wa[1] * wb[1];
                q[3] += v * wa[0] * wb[1];
            }
        }
        let s: f64 = q.iter().sum();
        q.map(|x| x / s)
    }

    /// Tab-free CSV `tau1,tau2,c3,c3_odd`.
    pub fn to_csv(&self) -> String {
        let odd = odd_part(self);
        let mut s = String::from("tau1,tau2,c3,c3_odd\n");
        for j1 in 0..self.n {
            for j2 in 0..self.n {
                writeln!(
                    s,
                    "{},{},{},{}",
                    self.tau(j1),
                    self.tau(j2),
                    self.at(j1, j2),
                    odd.at(j1, j2)
                )
                .expect("string write");
            }
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// Metadata written next to a grid dump.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridMetadata {
    pub half_width: f64,
    pub n: usize,
    pub spacing: f64,
    pub params: ModelParams,
    pub imag_residue: f64,
    pub alias_warning: bool,
    pub total: f64,
    pub odd_l1: f64,
}

impl GridMetadata {
    pub fn new(g: &CumulantGrid, params: &ModelParams) -> Self {
        Self {
            half_width: g.half_width,
            n: g.n,
            spacing: g.spacing,
            params: params.clone(),
            imag_residue: g.imag_residue,
            alias_warning: g.alias_warning,
            total: g.total(),
            odd_l1: odd_part(g).abs_total(),
        }
    }
}

/// `Λ` such that the kernel survival at `Λ/3` is below 1e-6.
pub fn default_half_width(p: &ModelParams) -> f64 {
    3.0 * p.kernel.abs_quantile(1e-6)
}

/// Inverts `B_fac` of `p` (including its `θ`) onto an `n × n` lattice.
pub fn invert_bispectrum(p: &ModelParams, half_width: f64, n: usize) -> Result<CumulantGrid> {
    if !(half_width > 0.0 && half_width.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "half-width must be positive, got {half_width}"
        )));
    }
    if n < 64 || !n.is_power_of_two() {
        return Err(Error::InvalidParameter(format!(
            "lattice size must be a power of two ≥ 64, got {n}"
        )));
    }
    let d = 2.0 * half_width / n as f64;
    let dw = std::f64::consts::PI / half_width;
    let (_, raw) = spectra::bispectrum_lattice(p, dw, n, BispectrumKind::Factorial)?;
    let half = n / 2;
    // Lattice position of frequency index k ∈ [−n/2, n/2) in FFT order.
    let slot = |k: usize| (k + n - half) % n; // k here is the row index 0..n ↔ k−n/2
    let mut buf = vec![Complex64::new(0.0, 0.0); n * n];
    for r1 in 0..n {
        for r2 in 0..n {
            let sign = if (r1 + r2) % 2 == 0 { 1.0 } else { -1.0 };
            // (−1)^{k₁+k₂} with k = r − n/2 and n/2 even.
            buf[slot(r1) * n + slot(r2)] = sign * raw[r1 * n + r2];
        }
    }
    // Hermitian symmetrisation; only the Nyquist row/column changes.
    let sym: Vec<Complex64> = (0..n * n)
        .map(|i| {
            let (a, b) = (i / n, i % n);
            let j = ((n - a) % n) * n + (n - b) % n;
            0.5 * (buf[i] + buf[j].conj())
        })
        .collect();
    let mut data = sym;
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_inverse(n);
    data.par_chunks_mut(n).for_each(|row| fft.process(row));
    let mut col = vec![Complex64::new(0.0, 0.0); n];
    for c in 0..n {
        for r in 0..n {
            col[r] = data[r * n + c];
        }
        fft.process(&mut col);
        for r in 0..n {
            data[r * n + c] = col[r];
        }
    }
    let scale = 1.0 / ((n as f64 * d) * (n as f64 * d));
    let values: Vec<f64> = data.iter().map(|z| z.re * scale).collect();
    let max_re = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let max_im = data.iter().fold(0.0f64, |a, z| a.max((z.im * scale).abs()));
    let mut grid = CumulantGrid {
        half_width,
        n,
        spacing: d,
        values,
        imag_residue: if max_re > 0.0 { max_im / max_re } else { 0.0 },
        alias_warning: false,
        theta: p.theta,
    };
    let frac = grid.boundary_fraction();
    if frac > ALIAS_FRACTION {
        log::warn!(
            "boundary band holds {:.2}% of |c3| mass; increase the half-width",
            100.0 * frac
        );
        grid.alias_warning = true;
    }
    Ok(grid)
}

/// `½(c(τ) − c(−τ))` on the lattice.
pub fn odd_part(g: &CumulantGrid) -> CumulantGrid {
    g.map_pairs(|a, b| 0.5 * (a - b))
}

/// `½(c(τ) + c(−τ))` on the lattice.
pub fn even_part(g: &CumulantGrid) -> CumulantGrid {
    g.map_pairs(|a, b| 0.5 * (a + b))
}

/// `D_H = Σ_{|τ₁|,|τ₂| ≤ H} |c₃ᵒ| d²`.
pub fn contrast_mass_dh(g: &CumulantGrid, h: f64) -> Result<f64> {
    if !(h >= 0.0) || h > g.half_width {
        return Err(Error::HOutOfRange {
            h,
            half_width: g.half_width,
        });
    }
    let odd = odd_part(g);
    let mut s = 0.0;
    for j1 in 0..g.n {
        if g.tau(j1).abs() > h {
            continue;
        }
        for j2 in 0..g.n {
            if g.tau(j2).abs() > h {
                continue;
            }
            s += odd.at(j1, j2).abs();
        }
    }
    Ok(s * g.spacing * g.spacing)
}

/// `μ_g = Σ g(τ) c₃ᵒ(τ) d²` over the lattice.
pub fn mu_g_time(g: &CumulantGrid, f: &OddTestFunction) -> Result<f64> {
    mu_g_time_weighted(g, f, |_, _| 1.0)
}

/// As [`mu_g_time`] with an extra lag weight `w(τ₁, τ₂)`.
pub fn mu_g_time_weighted(
    g: &CumulantGrid,
    f: &OddTestFunction,
    w: impl Fn(f64, f64) -> f64,
) -> Result<f64> {
    if f.support_radius() > g.half_width {
        return Err(Error::SupportExceedsGrid {
            radius: f.support_radius(),
            half_width: g.half_width,
        });
    }
    let odd = odd_part(g);
    let h = f.support_radius();
    let mut s = 0.0;
    for j1 in 0..g.n {
        let t1 = g.tau(j1);
        if t1.abs() > h {
            continue;
        }
        for j2 in 0..g.n {
            let t2 = g.tau(j2);
            if t2.abs() > h {
                continue;
            }
            let v = f.eval_lattice(j1, j2, t1, t2);
            if v != 0.0 {
                s += v * w(t1, t2) * odd.at(j1, j2);
            }
        }
    }
    Ok(s * g.spacing * g.spacing)
}

/// Settings for [`mu_g_freq`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreqOptions {
    pub dw: f64,
    /// Half-width of the frequency box; `None` picks `min(400/r, 200)` with
    /// `r = H/2`.
    pub omega_max: Option<f64>,
}

impl Default for FreqOptions {
    fn default() -> Self {
        Self {
            dw: 0.1,
            omega_max: None,
        }
    }
}

/// Result of [`mu_g_freq`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreqResult {
    pub value: f64,
    /// Bound on the contribution from outside the frequency box.
    pub truncation_bound: f64,
    pub omega_max: f64,
    pub transform_not_integrable: bool,
}

/// `μ_g = (2π)⁻² ∬ H_g Im B_1` by a lattice sum over `[−Ω, Ω]²`.
pub fn mu_g_freq(p: &ModelParams, f: &OddTestFunction, opts: FreqOptions) -> Result<FreqResult> {
    let factor = f.transform_factor().ok_or(Error::MissingTransformFactor)?;
    let r = 0.5 * f.support_radius();
    let omega_max = opts.omega_max.unwrap_or_else(|| (400.0 / r).min(200.0));
    let kmax = (omega_max / opts.dw).ceil() as i64;
    let dw = opts.dw;
    let len = (2 * kmax + 1) as usize;
    let hs = p.kernel.transform_lattice(dw, 2 * kmax as usize)?;
    let h = |k: i64| hs[(k + 2 * kmax) as usize];
    let forward = p.with_theta(1.0);
    let lambda = forward.lambda();
    let table = factor.on_lattice(dw, kmax);
    let rows: Vec<f64> = (-kmax..=kmax)
        .into_par_iter()
        .map(|k1| {
            let mut s = 0.0;
            for k2 in -kmax..=kmax {
                let hg = match &table {
                    Some(t) => t[(k1 + kmax) as usize * len + (k2 + kmax) as usize],
                    None => factor.eval(k1 as f64 * dw, k2 as f64 * dw),
                };
                if hg == 0.0 {
                    continue;
                }
                let b = spectra::b_factorial_from_h(lambda, forward.m, h(k1), h(k2), h(k1 + k2));
                s += hg * b.im;
            }
            s
        })
        .collect();
    let total: f64 = rows.iter().sum();
    let value = p.theta * total * dw * dw / (4.0 * std::f64::consts::PI.powi(2));

    // Tail control: compare |H_g| on the boundary of the box with its peak.
    let mut peak = 0.0f64;
    let mut edge = 0.0f64;
    for k in -kmax..=kmax {
        for &(a, b) in &[(k, kmax), (kmax, k), (k, 0), (0, k), (k, k)] {
            let v = match &table {
                Some(t) => t[(a + kmax) as usize * len + (b + kmax) as usize],
                None => factor.eval(a as f64 * dw, b as f64 * dw),
            }
            .abs();
            if a.abs() == kmax || b.abs() == kmax {
                edge = edge.max(v);
            }
            peak = peak.max(v);
        }
    }
    let envelope = spectra::envelope(p);
    let truncation_bound = factor.tail_l1_bound(omega_max) * envelope / (4.0 * std::f64::consts::PI.powi(2));
    let not_integrable = peak > 0.0 && edge > 1e-6 * peak;
    if not_integrable {
        log::warn!(
            "transform factor is still {:.1e} of its peak at |ω| = {omega_max}; result may be truncated",
            edge / peak
        );
    }
    Ok(FreqResult {
        value,
        truncation_bound,
        omega_max,
        transform_not_integrable: not_integrable,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::Kernel;

    fn small_grid() -> CumulantGrid {
        let p = ModelParams::new(1.0, 0.5, 1.0, Kernel::exponential(1.0).unwrap()).unwrap();
        invert_bispectrum(&p, 30.0, 128).unwrap()
    }

    #[test]
    fn riemann_total_equals_origin_value() {
        let g = small_grid();
        assert!((g.total() - 44.0).abs() < 1e-9, "{}", g.total());
        assert!(g.imag_residue < 1e-6);
    }

    #[test]
    fn odd_projection_properties() {
        let g = small_grid();
        let o = odd_part(&g);
        assert_eq!(odd_part(&o), o);
        let e = even_part(&g);
        assert!(odd_part(&e).max_abs() == 0.0);
        assert!(o.total().abs() < 1e-12);
        for i in 0..g.values.len() {
            assert!((e.values[i] + o.values[i] - g.values[i]).abs() <= 1e-15 * g.max_abs());
        }
    }

    #[test]
    fn dh_bounds() {
        let g = small_grid();
        assert!(matches!(
            contrast_mass_dh(&g, 31.0),
            Err(Error::HOutOfRange { .. })
        ));
        let full = odd_part(&g).abs_total();
        assert_eq!(contrast_mass_dh(&g, 30.0).unwrap(), full);
    }

    #[test]
    fn rejects_bad_lattice() {
        let p = ModelParams::new(1.0, 0.5, 1.0, Kernel::exponential(1.0).unwrap()).unwrap();
        assert!(invert_bispectrum(&p, 10.0, 100).is_err());
        assert!(invert_bispectrum(&p, 10.0, 32).is_err());
    }
}
