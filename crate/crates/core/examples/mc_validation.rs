// Monte-Carlo checks of the closed forms from simulated clusters.

use cluster_orient::montecarlo::{mc_b_complete, validate_suite, Level, Suite};
use cluster_orient::rng::Streams;
use cluster_orient::spectra::{b_complete, Form};
use cluster_orient::{Kernel, ModelParams, Result};

pub fn run() -> Result<bool> {
    let p = ModelParams::new(1.0, 0.5, 1.0, Kernel::exponential(1.0)?)?;
    let est = mc_b_complete(&p, 0.5, 0.3, 200_000, &Streams::new(5))?;
    let exact = b_complete(&p, 0.5, 0.3, Form::R)?;
    println!(
        "B_comp(0.5, 0.3): MC {:.4}{:+.4}i ± ({:.4}, {:.4}), closed form {:.4}{:+.4}i",
        est.re, est.im, est.stderr_re, est.stderr_im, exact.re, exact.im
    );
    let report = validate_suite(Suite::Moments, Level::Quick, &p, 11)?;
    for c in &report.comparisons {
        println!("{:<16} z = {:+.2}  {}", c.name, c.z_re, if c.pass { "ok" } else { "FAIL" });
    }
    Ok(report.pass)
}

fn main() -> Result<()> {
    run().map(|_| ())
}
