//! Generates a small dataset, prints its composition and writes it out.
//!
//! cargo run --release --example dataset -- [n_per_type] [seed] [out_dir]

use std::path::PathBuf;

use rotlayout::synthgen::{build_dataset, write_dataset, Split};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let n: usize = args.first().map(|s| s.parse()).transpose()?.unwrap_or(10);
    let seed: u64 = args.get(1).map(|s| s.parse()).transpose()?.unwrap_or(0);
    let d = build_dataset(n, seed)?;
    let m = &d.manifest;
    println!("{} scenes, config {}", m.total, &m.config_hash[..16]);
    for (t, by_angle) in &m.counts {
        let per: Vec<String> = by_angle.iter().map(|(deg, c)| format!("{deg}°:{c}")).collect();
        println!("  {t:<9} {}", per.join("  "));
    }
    println!("train {} / test {}", d.scenes_in(Split::Train).count(), d.scenes_in(Split::Test).count());
    let mut cats: Vec<_> = m.category_counts.iter().collect();
    cats.sort_by(|a, b| b.1.cmp(a.1).then(a.0.cmp(b.0)));
    for (name, c) in cats {
        println!("  {name:<16} {c}");
    }
    if let Some(dir) = args.get(2) {
        write_dataset(&d, &PathBuf::from(dir))?;
        println!("written to {dir}");
    }
    Ok(())
}
