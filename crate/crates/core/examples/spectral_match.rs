// A symmetric kernel with the same second-order structure as a one-sided
// monotone kernel.

use cluster_orient::simulate::{simulate_window, SimOptions};
use cluster_orient::{Kernel, ModelParams, Result};

pub fn run() -> Result<f64> {
    let m = 0.5;
    let base = Kernel::exponential(1.0)?;
    let matched = Kernel::matched(base.clone(), m)?;
    let mut worst: f64 = 0.0;
    for i in 0..=8 {
        let w = 0.5 * i as f64;
        let lhs = (1.0 - m * matched.transform(w)?).norm_sqr();
        let rhs = (1.0 - m * base.transform(w)?).norm_sqr();
        worst = worst.max((lhs - rhs).abs());
        println!("ω={w:4.1}  |1−mφ̂|²={lhs:.10}  |1−mĥ|²={rhs:.10}");
    }
    let p = ModelParams::new(1.0, m, 1.0, matched)?;
    let e = simulate_window(&p, 500.0, 3, &SimOptions::default())?;
    println!("matched process: {} events on [0, 500]", e.len());
    Ok(worst)
}

fn main() -> Result<()> {
    run().map(|_| ())
}
