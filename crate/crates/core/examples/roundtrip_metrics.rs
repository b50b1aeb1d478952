//! Scores rendered-then-extracted ground truth, then degrades the
//! predictions step by step to show how each metric responds. Every score
//! is cross-checked against the exhaustive matcher.
//!
//! cargo run --release --example roundtrip_metrics -- [n_per_type] [seed]

use rotlayout::eval::{brute_force_oracles, compute_metrics, metrics_close, roundtrip_pairs, EvalPair};
use rotlayout::layout::{Rotation, SceneLayout};
use rotlayout::raster::RasterConfig;
use rotlayout::synthgen::build_dataset;

fn show(label: &str, pairs: &[EvalPair]) -> Result<(), Box<dyn std::error::Error>> {
    let fast = compute_metrics(pairs)?;
    let exhaustive = brute_force_oracles(pairs)?;
    assert!(metrics_close(&fast, &exhaustive, 1e-12), "fast and exhaustive metrics disagree");
    println!("{label:<28} Mode {:.4}  mAP {:.4}  RoT {:+.4}", fast.mode, fast.map50, fast.rot);
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let n: usize = args.first().map(|s| s.parse()).transpose()?.unwrap_or(5);
    let seed: u64 = args.get(1).map(|s| s.parse()).transpose()?.unwrap_or(0);
    let d = build_dataset(n, seed)?;
    let scenes: Vec<&SceneLayout> = d.scenes.iter().collect();
    let pairs = roundtrip_pairs(&scenes, &RasterConfig::new(64)?)?;
    show("round trip", &pairs)?;

    // A half turn leaves every box in place, so only RoT notices.
    let turned: Vec<EvalPair> = pairs
        .iter()
        .map(|p| {
            let mut q = p.clone();
            for det in &mut q.predictions {
                det.item.direction = det.item.direction.then(Rotation::R180);
            }
            q
        })
        .collect();
    show("every direction off by 180°", &turned)?;

    let halved: Vec<EvalPair> = pairs
        .iter()
        .map(|p| {
            let mut q = p.clone();
            let keep = q.predictions.len() / 2;
            q.predictions.truncate(keep);
            q
        })
        .collect();
    show("half the items dropped", &halved)?;

    let empty: Vec<EvalPair> = pairs.iter().map(|p| EvalPair { predictions: Vec::new(), ..p.clone() }).collect();
    show("nothing predicted", &empty)?;
    Ok(())
}
