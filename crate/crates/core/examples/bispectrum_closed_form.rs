// Closed-form Bartlett spectrum and bispectra.

use cluster_orient::spectra::{b_complete, b_factorial, bartlett, envelope, Form};
use cluster_orient::{Kernel, ModelParams, Result};

pub fn run() -> Result<f64> {
    let p = ModelParams::new(1.0, 0.5, 1.0, Kernel::exponential(1.0)?)?;
    println!("Γ(0) = {}, Γ(1) = {:.6}", bartlett(&p, 0.0)?, bartlett(&p, 1.0)?);
    println!("B_comp(0,0) = {}", b_complete(&p, 0.0, 0.0, Form::R)?);
    println!("B_fac(0,0)  = {} (envelope {})", b_factorial(&p, 0.0, 0.0)?.re, envelope(&p));

    let mut worst: f64 = 0.0;
    for &(a, b) in &[(0.3, 0.7), (-1.2, 0.4), (2.0, -3.5)] {
        let r = b_complete(&p, a, b, Form::R)?;
        let q = b_complete(&p, a, b, Form::Q)?;
        worst = worst.max((r - q).norm() / r.norm());
        let f = b_factorial(&p, a, b)?;
        println!("({a:5}, {b:5})  B_comp = {:.6}{:+.6}i  B_fac = {:.6}{:+.6}i", r.re, r.im, f.re, f.im);
    }

    let u = p.with_kernel(Kernel::uniform_half(1.0)?);
    println!("uniform kernel: Im B_comp(0.8, 1.3) = {:e}", b_complete(&u, 0.8, 1.3, Form::R)?.im);
    println!("largest R/Q relative gap: {worst:e}");
    Ok(worst)
}

fn main() -> Result<()> {
    run().map(|_| ())
}
