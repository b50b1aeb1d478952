//! Trains the full model and each ablation on the same bedroom-only data
//! and compares them on the rotated test split.
//!
//! cargo run --release --example ablation -- [steps] [n_base]

use rotlayout::eval::evaluate_model;
use rotlayout::layout::{RoomType, SceneLayout};
use rotlayout::model::ModelConfig;
use rotlayout::synthgen::{build_dataset_for, Split};
use rotlayout::training::{prepare_samples, Ablation, TrainConfig, Trainer};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let steps: u64 = args.first().map(|s| s.parse()).transpose()?.unwrap_or(500);
    let n: usize = args.get(1).map(|s| s.parse()).transpose()?.unwrap_or(25);
    let d = build_dataset_for(&[RoomType::Bedroom], n, 0)?;
    let train: Vec<&SceneLayout> = d.scenes_in(Split::Train).collect();
    let test: Vec<&SceneLayout> = d.scenes_in(Split::Test).collect();
    let model = ModelConfig::default();
    println!("{} train / {} test scenes, {steps} steps", train.len(), test.len());

    for ablation in [Ablation::None, Ablation::Rotation, Ablation::Mode, Ablation::Both] {
        let cfg = TrainConfig { iterations: steps, ablation, ..TrainConfig::default() };
        let mut t = Trainer::new(&model, &cfg)?;
        let samples = prepare_samples(&train, &t.model)?;
        let mut last = None;
        t.run(&samples, |_, m| {
            last = Some(*m);
            Ok(())
        })?;
        let (rep, _) = evaluate_model(&t.params, &t.model, &test)?;
        let m = last.expect("at least one step");
        println!(
            "{:<9} L_gc {:.4}  Mode {:.4}  mAP {:.4}  RoT {:+.4}",
            format!("{ablation:?}").to_lowercase(),
            m.l_gc,
            rep.overall.mode,
            rep.overall.map50,
            rep.overall.rot
        );
    }
    Ok(())
}
