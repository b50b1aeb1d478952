//! Helpers shared by the integration tests.
#![allow(dead_code)]

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rotlayout::eval::{EvalPair, ORACLE_MAX_ITEMS};
use rotlayout::layout::{rotate_layout, CategoryId, Extent, FurnitureItem, Point, RoomType, Rotation, SceneLayout};
use rotlayout::raster::Detection;
use rotlayout::synthgen::{generate_scene, GenSpec};

pub fn scene(t: RoomType, seed: u64) -> SceneLayout {
    generate_scene(&GenSpec { room_type: t, seed }, &format!("{}-{seed}", t.name())).expect("generation succeeds")
}

/// A generated scene in a random orientation.
pub fn random_scene(rng: &mut ChaCha8Rng) -> SceneLayout {
    let t = *RoomType::ALL.choose(rng).expect("non-empty");
    let s = scene(t, rng.random());
    rotate_layout(&s, Rotation::ALL[rng.random_range(0..4)])
}

fn snap5(v: f64) -> f64 {
    (v / 5.0).round() * 5.0
}

/// Predictions derived from `gt`: some items dropped, moved by whole 5 cm
/// steps, turned or relabelled, plus spurious ones. Confidences come from a
/// four-value set so that rank ties are common. Everything stays on the
/// 5 cm lattice, so quarter turns of the result are exact.
pub fn perturb(rng: &mut ChaCha8Rng, gt: &[FurnitureItem], extent: Extent) -> Vec<Detection> {
    let conf = [0.25, 0.5, 0.75, 1.0];
    let clamp = |v: f64, hi: f64| v.clamp(0.0, hi);
    let mut out = Vec::new();
    for g in gt {
        if rng.random_bool(0.2) {
            continue;
        }
        let mut it = *g;
        let (dx, dy) = (rng.random_range(-3i32..=3) as f64 * 5.0, rng.random_range(-3i32..=3) as f64 * 5.0);
        it.position = Point::new(clamp(it.position.x + dx, extent.w), clamp(it.position.y + dy, extent.h));
        if rng.random_bool(0.3) {
            it.direction = Rotation::ALL[rng.random_range(0..4)];
        }
        if rng.random_bool(0.1) {
            it.category = CategoryId::new(rng.random_range(1..=13)).expect("valid id");
        }
        out.push(Detection { item: it, confidence: *conf.choose(rng).expect("non-empty") });
    }
    let extra = rng.random_range(0..=2);
    for _ in 0..extra {
        if out.len() >= ORACLE_MAX_ITEMS {
            break;
        }
        let template = gt.choose(rng).copied();
        let category = match template {
            Some(t) if rng.random_bool(0.7) => t.category,
            _ => CategoryId::new(rng.random_range(1..=13)).expect("valid id"),
        };
        let size = Extent::new(snap5(rng.random_range(30.0..150.0)), snap5(rng.random_range(30.0..150.0)));
        let position = match template {
            // A near-duplicate of a real item competes for the same match.
            Some(t) if rng.random_bool(0.5) => t.position,
            _ => Point::new(snap5(rng.random_range(0.0..extent.w)), snap5(rng.random_range(0.0..extent.h))),
        };
        let item = FurnitureItem::new(category, position, size, Rotation::ALL[rng.random_range(0..4)]);
        out.push(Detection { item, confidence: *conf.choose(rng).expect("non-empty") });
    }
    out
}

/// One to five scenes with perturbed predictions, seeded.
pub fn random_pairs(seed: u64) -> (Vec<SceneLayout>, Vec<EvalPair>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=5);
    let scenes: Vec<SceneLayout> = (0..n)
        .map(|i| {
            let mut s = random_scene(&mut rng);
            s.scene_id = format!("s{i:02}");
            s
        })
        .collect();
    let pairs = scenes
        .iter()
        .map(|s| EvalPair {
            scene_id: s.scene_id.clone(),
            predictions: perturb(&mut rng, &s.items, s.room.extent),
            ground_truth: s.items.clone(),
        })
        .collect();
    (scenes, pairs)
}

/// Turns predictions and ground truth of every pair by `k`, each in the
/// frame of its own scene.
pub fn rotate_pairs(scenes: &[SceneLayout], pairs: &[EvalPair], k: Rotation) -> Vec<EvalPair> {
    scenes
        .iter()
        .zip(pairs)
        .map(|(s, p)| {
            let gt = rotate_layout(s, k).items;
            let pred_scene = SceneLayout { items: p.predictions.iter().map(|d| d.item).collect(), ..s.clone() };
            let turned = rotate_layout(&pred_scene, k).items;
            EvalPair {
                scene_id: p.scene_id.clone(),
                predictions: turned.into_iter().zip(&p.predictions).map(|(item, d)| Detection { item, confidence: d.confidence }).collect(),
                ground_truth: gt,
            }
        })
        .collect()
}

/// Smallest gap in cm between the boxes of any two items of `s`.
pub fn min_item_gap(s: &SceneLayout) -> f64 {
    use rotlayout::layout::item_bbox;
    let mut gap = f64::INFINITY;
    for (i, a) in s.items.iter().enumerate() {
        for b in &s.items[i + 1..] {
            let (x, y) = (item_bbox(a), item_bbox(b));
            let dx = (x.min.x.max(y.min.x) - x.max.x.min(y.max.x)).max(0.0);
            let dy = (x.min.y.max(y.min.y) - x.max.y.min(y.max.y)).max(0.0);
            gap = gap.min(dx.max(dy));
        }
    }
    gap
}
