// Offspring kernels: densities, tails, transforms and the kernel-spec grammar.

use cluster_orient::{Kernel, Result};

pub fn run() -> Result<Vec<(String, f64)>> {
    let specs = ["exp:1", "lomax:1.5", "uhalf:2", "slap:1", "match:exp:1:0.5"];
    let mut out = Vec::new();
    for s in specs {
        let k: Kernel = s.parse()?;
        let h = k.transform(1.0)?;
        println!(
            "{:<18} h(0.5)={:.5}  P(X>1)={:.5}  ĥ(1)={:.5}{:+.5}i  tail={:?}",
            k.to_string(),
            k.density(0.5),
            k.survival(1.0),
            h.re,
            h.im,
            k.tail_class()
        );
        out.push((k.to_string(), h.norm()));
    }
    Ok(out)
}

fn main() -> Result<()> {
    run().map(|_| ())
}
