//! Finite-difference gradient checks for every layer and for the three
//! networks at a small size.
//!
//! cargo run --release --example gradcheck -- [seed] [--full]
//!
//! `--full` differences every coordinate of the networks instead of a
//! seeded sample per tensor.

use rotlayout::model::{layer_checks, network_checks, ModelConfig, GRADCHECK_TOL, NETWORK_COORDS_PER_TENSOR};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let full = args.iter().any(|a| a == "--full");
    let seed: u64 = args.iter().find(|a| *a != "--full").map(|s| s.parse()).transpose()?.unwrap_or(0);
    let coords = if full { None } else { Some(NETWORK_COORDS_PER_TENSOR) };
    let cfg = ModelConfig { resolution: 16, base_channels: 4, ..ModelConfig::default() };
    let t0 = std::time::Instant::now();
    let mut all = layer_checks(seed)?;
    let t1 = std::time::Instant::now();
    all.extend(network_checks(&cfg, seed, coords)?);
    println!("layers {:.1}s, networks {:.1}s", (t1 - t0).as_secs_f64(), t1.elapsed().as_secs_f64());
    for c in &all {
        println!(
            "{:<22} rel err {:.3e}  coord err {:.1e}  kink margin {:.2e}  coords {:>6}  redraws {}  {}",
            c.name,
            c.report.max_rel_error,
            c.report.max_coord_error,
            c.report.kink_margin,
            c.report.coordinates,
            c.redraws,
            if c.passed() { "ok" } else { "FAIL" }
        );
    }
    let worst = all.iter().map(|c| c.report.max_rel_error).fold(0.0, f64::max);
    println!("worst {worst:.3e} (tolerance {GRADCHECK_TOL:e}) in {:.1}s", t0.elapsed().as_secs_f64());
    Ok(())
}
