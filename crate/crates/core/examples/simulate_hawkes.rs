// Simulate a Hawkes process by its cluster representation, write the
// events as CSV and read them back.

use cluster_orient::simulate::{ingest_events, simulate_window, SimOptions};
use cluster_orient::{Kernel, ModelParams, Result};

pub fn run() -> Result<(usize, f64)> {
    let p = ModelParams::new(1.0, 0.5, 1.0, Kernel::exponential(1.0)?)?;
    let t = 2000.0;
    let e = simulate_window(&p, t, 7, &SimOptions::default())?;
    let dir = std::env::temp_dir().join("cluster-orient-simulate-example");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("events.csv");
    e.write_csv(&path)?;
    let back = ingest_events(&path, Some(t))?;
    assert_eq!(back.times, e.times);
    let rate = e.len() as f64 / t;
    println!("{} events, rate {rate:.3} (λ = {})", e.len(), p.lambda());
    Ok((e.len(), rate))
}

fn main() -> Result<()> {
    run().map(|_| ())
}
