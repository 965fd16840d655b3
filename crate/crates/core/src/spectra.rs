//! Closed-form spectra of the branching model: the Bartlett spectrum `Γ`,
//! the complete and factorial bispectra, the diagonal imaginary part, and
//! cluster-size factorial moments.
//!
//! Every function evaluates the sign-biased family: `B_θ = Re B_1 + iθ Im B_1`
//! where `B_1` is the forward bispectrum. `Γ` does not depend on `θ`.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::simulate::ModelParams;

/// Which algebraic form of the complete bispectrum to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Form {
    R,
    Q,
}

/// Complete or factorial third-order spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BispectrumKind {
    Complete,
    Factorial,
}

/// `Γ = λ/|1 − mĥ|²` from a precomputed transform value.
pub fn bartlett_from_h(lambda: f64, m: f64, h: Complex64) -> f64 {
    lambda / (1.0 - m * h).norm_sqr()
}

pub fn bartlett(p: &ModelParams, omega: f64) -> Result<f64> {
    Ok(bartlett_from_h(p.lambda(), p.m, p.kernel.transform(omega)?))
}

/// Forward (`θ = 1`) complete bispectrum from `ĥ(ω₁)`, `ĥ(ω₂)`, `ĥ(ω₁+ω₂)`.
pub fn b_complete_from_h(
    lambda: f64,
    m: f64,
    h1: Complex64,
    h2: Complex64,
    h12: Complex64,
    form: Form,
) -> Complex64 {
    let one = Complex64::new(1.0, 0.0);
    match form {
        Form::R => {
            let r = |h: Complex64| one / (one - m * h);
            // ĥ(ω₃) = ĥ(−ω₁−ω₂) = conj ĥ(ω₁+ω₂), and ĥ(−ω) = conj ĥ(ω).
            let prod = r(h1) * r(h2) * r(h12.conj());
            let bracket = r(h1.conj()) + r(h2.conj()) + r(h12) - 2.0;
            lambda * prod * bracket
        }
        Form::Q => {
            let (a, b) = (h1.conj(), h2.conj());
            let q = a * b + h12 * (a + b - 2.0 * m * a * b);
            let den = (one - m * h1).norm_sqr() * (one - m * h2).norm_sqr() * (one - m * h12).norm_sqr();
            lambda * (one - m * m * q) / den
        }
    }
}

/// Forward factorial bispectrum from precomputed transforms.
pub fn b_factorial_from_h(lambda: f64, m: f64, h1: Complex64, h2: Complex64, h12: Complex64) -> Complex64 {
    let bc = b_complete_from_h(lambda, m, h1, h2, h12, Form::R);
    bc - bartlett_from_h(lambda, m, h1) - bartlett_from_h(lambda, m, h2) - bartlett_from_h(lambda, m, h12)
        + 2.0 * lambda
}

/// `Re z + iθ Im z`.
pub fn apply_theta(z: Complex64, theta: f64) -> Complex64 {
    Complex64::new(z.re, theta * z.im)
}

fn transforms(k: &Kernel, w1: f64, w2: f64) -> Result<(Complex64, Complex64, Complex64)> {
    Ok((k.transform(w1)?, k.transform(w2)?, k.transform(w1 + w2)?))
}

pub fn b_complete(p: &ModelParams, w1: f64, w2: f64, form: Form) -> Result<Complex64> {
    let (h1, h2, h12) = transforms(&p.kernel, w1, w2)?;
    Ok(apply_theta(
        b_complete_from_h(p.lambda(), p.m, h1, h2, h12, form),
        p.theta,
    ))
}

pub fn b_factorial(p: &ModelParams, w1: f64, w2: f64) -> Result<Complex64> {
    let (h1, h2, h12) = transforms(&p.kernel, w1, w2)?;
    Ok(apply_theta(
        b_factorial_from_h(p.lambda(), p.m, h1, h2, h12),
        p.theta,
    ))
}

/// `A(t) = Im Q(t,t)` in terms of `U = Re ĥ` and `V = −Im ĥ`.
pub fn diagonal_a(m: f64, u1: f64, v1: f64, u2: f64, v2: f64) -> f64 {
    2.0 * (1.0 - m) * (2.0 * v1 - v2)
        + 2.0 * (1.0 - 2.0 * m) * ((1.0 - u1) * (v2 - v1) - (1.0 - u2) * v1)
        + 2.0 * m * (((1.0 - u1).powi(2) - v1 * v1) * v2 - 2.0 * (1.0 - u2) * (1.0 - u1) * v1)
}

/// `Im B(t,t)` through the diagonal numerator `A(t)`.
pub fn im_b_diagonal(p: &ModelParams, t: f64) -> Result<f64> {
    let h1 = p.kernel.transform(t)?;
    let h2 = p.kernel.transform(2.0 * t)?;
    Ok(p.theta * im_b_diagonal_from_h(p.lambda(), p.m, h1, h2))
}

pub fn im_b_diagonal_from_h(lambda: f64, m: f64, h1: Complex64, h2: Complex64) -> f64 {
    let a = diagonal_a(m, h1.re, -h1.im, h2.re, -h2.im);
    let d1 = (1.0 - m * h1).norm_sqr();
    let d2 = (1.0 - m * h2).norm_sqr();
    -lambda * m * m * a / (d1 * d1 * d2)
}

/// `E[M(M−1)(M−2)]` for the Borel total progeny with Poisson(`m`) offspring.
pub fn borel_factorial3(m: f64) -> f64 {
    m * m * (2.0 * m * m - 8.0 * m + 9.0) / (1.0 - m).powi(5)
}

/// Raw moments `E M`, `E M²`, `E M³` of the Borel total progeny.
pub fn borel_raw_moments(m: f64) -> [f64; 3] {
    let q = 1.0 - m;
    let e1 = 1.0 / q;
    let e2 = 1.0 / q.powi(3);
    let e3 = (1.0 + 2.0 * m) / q.powi(5);
    [e1, e2, e3]
}

/// Upper bound `ν E[(M)₃]` on `|Im B_fac|`.
pub fn envelope(p: &ModelParams) -> f64 {
    p.nu * borel_factorial3(p.m)
}

/// Outcome of [`scale_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScaleCheck {
    pub scaled: Complex64,
    pub reference: Complex64,
    pub rel_err: f64,
    pub pass: bool,
}

/// Kernel with time scale divided by `beta` (rate multiplied by `beta`).
pub fn scaled_kernel(k: &Kernel, beta: f64) -> Result<Kernel> {
    match k {
        Kernel::Exponential { beta: b } => Kernel::exponential(b * beta),
        Kernel::UniformHalf { a } => Kernel::uniform_half(a / beta),
        Kernel::SymmetricLaplace { beta: b } => Kernel::symmetric_laplace(b * beta),
        other => Err(Error::UnsupportedKernelScaling(other.to_string())),
    }
}

/// Compares `B` under the rescaled kernel at `(ω₁, ω₂)` with `B` under the
/// original kernel at `(ω₁/β, ω₂/β)`.
pub fn scale_check(p: &ModelParams, beta: f64, w1: f64, w2: f64) -> Result<ScaleCheck> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidParameter(format!("scale must be positive, got {beta}")));
    }
    let scaled = p.with_kernel(scaled_kernel(&p.kernel, beta)?);
    let a = b_factorial(&scaled, w1, w2)?;
    let b = b_factorial(p, w1 / beta, w2 / beta)?;
    let rel_err = (a - b).norm() / b.norm().max(f64::MIN_POSITIVE);
    Ok(ScaleCheck {
        scaled: a,
        reference: b,
        rel_err,
        pass: rel_err <= 1e-10,
    })
}

/// Frequencies with complex values and optional Monte-Carlo standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralGrid {
    pub dims: u8,
    pub w1: Vec<f64>,
    /// Second coordinate; empty for one-dimensional grids.
    pub w2: Vec<f64>,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub stderr_re: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub stderr_im: Option<Vec<f64>>,
}

impl SpectralGrid {
    pub fn one_d(w: Vec<f64>, values: &[Complex64]) -> Self {
        Self {
            dims: 1,
            w1: w,
            w2: Vec::new(),
            re: values.iter().map(|z| z.re).collect(),
            im: values.iter().map(|z| z.im).collect(),
            stderr_re: None,
            stderr_im: None,
        }
    }

    pub fn two_d(pairs: &[(f64, f64)], values: &[Complex64]) -> Self {
        Self {
            dims: 2,
            w1: pairs.iter().map(|p| p.0).collect(),
            w2: pairs.iter().map(|p| p.1).collect(),
            re: values.iter().map(|z| z.re).collect(),
            im: values.iter().map(|z| z.im).collect(),
            stderr_re: None,
            stderr_im: None,
        }
    }

    /// Attaches Monte-Carlo standard errors.
    pub fn with_stderr(mut self, re: Vec<f64>, im: Vec<f64>) -> Self {
        assert!(re.len() == self.len() && im.len() == self.len());
        self.stderr_re = Some(re);
        self.stderr_im = Some(im);
        self
    }

    pub fn len(&self) -> usize {
        self.w1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w1.is_empty()
    }

    pub fn max_abs_im(&self) -> f64 {
        self.im.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("w1,w2,re,im");
        let with_se = self.stderr_re.is_some();
        if with_se {
            s.push_str(",stderr_re,stderr_im");
        }
        s.push('\n');
        for i in 0..self.len() {
            let w2 = if self.dims == 2 {
                self.w2[i].to_string()
            } else {
                String::new()
            };
            write!(s, "{},{},{},{}", self.w1[i], w2, self.re[i], self.im[i]).expect("string write");
            if let (Some(a), Some(b)) = (&self.stderr_re, &self.stderr_im) {
                write!(s, ",{},{}", a[i], b[i]).expect("string write");
            }
            s.push('\n');
        }
        s
    }

    pub fn write(&self, path: &Path, json: bool) -> Result<()> {
        if json {
            std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        } else {
            std::fs::write(path, self.to_csv())?;
        }
        Ok(())
    }
}

/// Bartlett spectrum at each frequency.
pub fn bartlett_grid(p: &ModelParams, omegas: &[f64]) -> Result<SpectralGrid> {
    let vals = omegas
        .par_iter()
        .map(|&w| bartlett(p, w).map(|g| Complex64::new(g, 0.0)))
        .collect::<Result<Vec<_>>>()?;
    Ok(SpectralGrid::one_d(omegas.to_vec(), &vals))
}

/// Bispectrum at arbitrary frequency pairs.
pub fn bispectrum_at(
    p: &ModelParams,
    pairs: &[(f64, f64)],
    kind: BispectrumKind,
    form: Form,
) -> Result<Vec<Complex64>> {
    pairs
        .par_iter()
        .map(|&(a, b)| match kind {
            BispectrumKind::Complete => b_complete(p, a, b, form),
            BispectrumKind::Factorial => b_factorial(p, a, b),
        })
        .collect()
}

/// Bispectrum on the square lattice `(k₁Δω, k₂Δω)`, `k ∈ [−n/2, n/2)`, in
/// row-major order over `k₁`. The kernel transform is evaluated once per
/// lattice frequency.
pub fn bispectrum_lattice(
    p: &ModelParams,
    dw: f64,
    n: usize,
    kind: BispectrumKind,
) -> Result<(Vec<f64>, Vec<Complex64>)> {
    let hs = p.kernel.transform_lattice(dw, n)?;
    Ok(bispectrum_lattice_from_h(p, dw, n, kind, &hs))
}

/// As [`bispectrum_lattice`] with `hs[k + n] = ĥ(kΔω)` for `k ∈ [−n, n]`.
pub fn bispectrum_lattice_from_h(
    p: &ModelParams,
    dw: f64,
    n: usize,
    kind: BispectrumKind,
    hs: &[Complex64],
) -> (Vec<f64>, Vec<Complex64>) {
    let half = (n / 2) as i64;
    let lambda = p.lambda();
    let h = |k: i64| hs[(k + n as i64) as usize];
    let axis: Vec<f64> = (-half..half).map(|k| k as f64 * dw).collect();
    let values = (-half..half)
        .into_par_iter()
        .flat_map_iter(|k1| {
            (-half..half).map(move |k2| {
                let z = match kind {
                    BispectrumKind::Complete => {
                        b_complete_from_h(lambda, p.m, h(k1), h(k2), h(k1 + k2), Form::R)
                    }
                    BispectrumKind::Factorial => {
                        b_factorial_from_h(lambda, p.m, h(k1), h(k2), h(k1 + k2))
                    }
                };
                apply_theta(z, p.theta)
            })
        })
        .collect();
    (axis, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp_params() -> ModelParams {
        ModelParams::new(1.0, 0.5, 1.0, Kernel::exponential(1.0).unwrap()).unwrap()
    }

    #[test]
    fn bartlett_examples() {
        let p = exp_params();
        assert!((bartlett(&p, 0.0).unwrap() - 8.0).abs() < 1e-12);
        assert!((bartlett(&p, 1e9).unwrap() - 2.0).abs() < 1e-8);
        let h = Complex64::new(0.5, -0.5);
        let expected = 2.0 / (1.0 - 0.5 * h).norm_sqr();
        assert!((bartlett(&p, 1.0).unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn origin_values() {
        let p = exp_params();
        // λ(1+2m)/(1−m)⁴ with λ = 2.
        let bc = b_complete(&p, 0.0, 0.0, Form::R).unwrap();
        assert!((bc.re - 64.0).abs() < 1e-12 && bc.im == 0.0);
        let bq = b_complete(&p, 0.0, 0.0, Form::Q).unwrap();
        assert!((bq.re - 64.0).abs() < 1e-12);
        let bf = b_factorial(&p, 0.0, 0.0).unwrap();
        assert!((bf.re - 44.0).abs() < 1e-12);
        assert_eq!(borel_factorial3(0.5), 44.0);
        assert_eq!(envelope(&p), 44.0);
    }

    #[test]
    fn borel_small_m() {
        let m = 1e-3;
        assert!((borel_factorial3(m) / (m * m) / 9.0 - 1.0).abs() < 5e-3);
    }

    #[test]
    fn raw_moments_match_factorial_moment() {
        for &m in &[0.1, 0.5, 0.8] {
            let [e1, e2, e3] = borel_raw_moments(m);
            let f3 = e3 - 3.0 * e2 + 2.0 * e1;
            assert!((f3 / borel_factorial3(m) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn diagonal_matches_factorial() {
        let p = exp_params();
        for &t in &[0.1, 1.0, 5.0] {
            let a = im_b_diagonal(&p, t).unwrap();
            let b = b_factorial(&p, t, t).unwrap().im;
            assert!((a - b).abs() <= 1e-9 * b.abs(), "{t}: {a} vs {b}");
        }
    }

    #[test]
    fn scale_examples() {
        let p = exp_params();
        assert!(scale_check(&p, 2.0, 1.0, 1.0).unwrap().pass);
        assert!(scale_check(&p, 1.0, 0.3, -2.0).unwrap().pass);
        let u = p.with_kernel(Kernel::uniform_half(1.5).unwrap());
        assert!(scale_check(&u, 3.0, 0.7, 1.1).unwrap().pass);
        let l = p.with_kernel(Kernel::lomax(2.0).unwrap());
        assert!(matches!(
            scale_check(&l, 2.0, 1.0, 1.0),
            Err(Error::UnsupportedKernelScaling(_))
        ));
    }

    #[test]
    fn theta_scales_imaginary_part_only() {
        let p = exp_params();
        let fwd = b_factorial(&p, 0.4, 0.9).unwrap();
        let half = b_factorial(&p.with_theta(0.5), 0.4, 0.9).unwrap();
        assert_eq!(half.re, fwd.re);
        assert!((half.im - 0.5 * fwd.im).abs() < 1e-15);
    }

    #[test]
    fn grid_csv_layout() {
        let g = SpectralGrid::two_d(&[(0.0, 1.0)], &[Complex64::new(2.0, -1.0)]);
        assert_eq!(g.to_csv(), "w1,w2,re,im\n0,1,2,-1\n");
    }
}
