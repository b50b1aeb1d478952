//! Overfits the model to a single bedroom and checks it can reproduce it.
//!
//! cargo run --release --example memorize -- [steps]

use std::time::Instant;

use rotlayout::eval::evaluate_model;
use rotlayout::layout::{RoomType, SceneLayout};
use rotlayout::model::ModelConfig;
use rotlayout::synthgen::{generate_scene, GenSpec};
use rotlayout::training::{prepare_samples, TrainConfig, Trainer};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let steps: u64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(500);
    let scene = generate_scene(&GenSpec { room_type: RoomType::Bedroom, seed: 0 }, "bedroom-0000")?;
    let model = ModelConfig::default();
    let cfg = TrainConfig { iterations: steps, seed: 0, ..TrainConfig::default() };
    let samples = prepare_samples(&[&scene], &model)?;

    let mut trainer = Trainer::new(&model, &cfg)?;
    let t0 = Instant::now();
    trainer.run(&samples, |_, m| {
        if m.step == 1 || m.step % 50 == 0 {
            println!("step {:4}  L_gc {:.4}  L_1D {:.3}  L_2D {:.3}  {:.0} ms/step", m.step, m.l_gc, m.l_1d, m.l_2d, m.wall_ms);
        }
        Ok(())
    })?;
    let scenes: Vec<&SceneLayout> = vec![&scene];
    let (report, pairs) = evaluate_model(&trainer.params, &trainer.model, &scenes)?;
    println!(
        "{} items in, {} out; Mode {:.3} mAP {:.3} RoT {:.3} in {:.1}s",
        scene.items.len(),
        pairs[0].predictions.len(),
        report.overall.mode,
        report.overall.map50,
        report.overall.rot,
        t0.elapsed().as_secs_f64()
    );
    Ok(())
}
