// How the diagonal imaginary bispectrum vanishes as t ↓ 0.

use cluster_orient::asymptotics::{
    chi_alpha, default_t_list, delta_m, diag_limit_check, z_from_kernel,
};
use cluster_orient::{Kernel, ModelParams, Result};

pub fn run() -> Result<Vec<Option<f64>>> {
    for a in [0.5, 1.0, 1.5, 2.0] {
        println!("χ_{a} = {:.6}", chi_alpha(a)?);
    }
    for k in [Kernel::uniform_half(1.0)?, Kernel::exponential(1.0)?, Kernel::lomax(4.0)?] {
        println!("Δ_0.5 for {k}: {:.6}", delta_m(&z_from_kernel(&k)?, 0.5));
    }
    let ts = default_t_list(1e-4, 1);
    let mut finals = Vec::new();
    for k in ["exp:1", "lomax:1", "uhalf:1", "lomax:2.5"] {
        let p = ModelParams::new(1.0, 0.5, 1.0, k.parse()?)?;
        let r = diag_limit_check(&p, p.kernel.tail_class(), &ts, 0.05)?;
        println!("{k:<10} {:?} final ratio {:?}", r.verdict, r.final_ratio());
        finals.push(r.final_ratio());
    }
    Ok(finals)
}

fn main() -> Result<()> {
    run().map(|_| ())
}
