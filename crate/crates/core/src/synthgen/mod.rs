//! Synthetic layout corpus: per-room-type generation, four-way rotation
//! augmentation, a leak-free train/test split and on-disk serialization.

mod generate;
mod io;

pub use generate::{generate_scene, GenSpec, CLEARANCE_CM, DOOR_SWING_CM, EXTENT_RANGE_CM, MAX_ATTEMPTS};
pub use io::{read_dataset, write_dataset, MANIFEST_FILE, SCENES_FILE, SCHEMA_VERSION};

use std::collections::BTreeMap;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::layout::{rotate_layout, CategoryId, RoomType, Rotation, SceneLayout};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("{room_type} generation gave up after {attempts} attempts (seed {seed})")]
    Exhausted { room_type: RoomType, seed: u64, attempts: usize },
    #[error("scene {0} is not in canonical orientation")]
    NotCanonical(String),
    #[error("n_per_type must be at least {MIN_PER_TYPE}, got {0}")]
    TooFewScenes(usize),
    #[error("room types must be a non-empty list in catalog order without repeats, got [{0}]")]
    RoomTypes(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {detail}")]
    Format { path: PathBuf, detail: String },
    #[error("scene {scene_id}: {detail}")]
    Invalid { scene_id: String, detail: String },
}

pub const MIN_PER_TYPE: usize = 5;
/// Train base scenes per test base scene.
pub const TRAIN_PER_TEST: usize = 5;

/// Order in which augmented copies are emitted; the last one is the identity.
pub const AUGMENT_ORDER: [Rotation; 4] = [Rotation::R90, Rotation::R180, Rotation::R270, Rotation::R0];

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub seed: u64,
    pub n_per_type: usize,
    pub room_types: Vec<RoomType>,
    pub total: usize,
    /// Scenes per room type and orientation in degrees.
    pub counts: BTreeMap<RoomType, BTreeMap<u16, usize>>,
    pub category_counts: BTreeMap<String, usize>,
    pub train: Vec<String>,
    pub test: Vec<String>,
    pub config_hash: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub scenes: Vec<SceneLayout>,
    pub split: BTreeMap<String, Split>,
    pub manifest: Manifest,
}

impl Dataset {
    pub fn scenes_in(&self, split: Split) -> impl Iterator<Item = &SceneLayout> {
        self.scenes.iter().filter(move |s| self.split.get(&s.scene_id) == Some(&split))
    }
}

/// `bedroom-0003` style id of a base scene.
pub fn base_id(t: RoomType, index: usize) -> String {
    format!("{}-{index:04}", t.name())
}

/// Id of the copy of `base` rotated by `k`.
pub fn augmented_id(base: &str, k: Rotation) -> String {
    format!("{base}-r{}", k.quarter_turns())
}

/// Base id of an augmented id; ids without a rotation suffix are returned as is.
pub fn base_of(scene_id: &str) -> &str {
    match scene_id.rsplit_once("-r") {
        Some((base, k)) if k.len() == 1 && k.as_bytes()[0].is_ascii_digit() => base,
        _ => scene_id,
    }
}

/// The four rotated copies of a canonical scene, in [`AUGMENT_ORDER`].
pub fn augment_rotations(s: &SceneLayout) -> Result<Vec<SceneLayout>, SynthError> {
    if s.theta != Rotation::R0 {
        return Err(SynthError::NotCanonical(s.scene_id.clone()));
    }
    Ok(AUGMENT_ORDER
        .iter()
        .map(|k| {
            let mut r = rotate_layout(s, *k);
            r.scene_id = augmented_id(&s.scene_id, *k);
            r
        })
        .collect())
}

/// Seed of base scene `index` of room type `t` in a dataset built from `seed`.
pub fn scene_seed(seed: u64, t: RoomType, index: usize) -> u64 {
    let type_idx = RoomType::ALL.iter().position(|x| *x == t).expect("known type") as u64;
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (type_idx << 48) ^ index as u64
}

/// Test base scenes: `round(n_base / 6)` overall, dealt to room types in turn
/// and drawn from a seeded shuffle within each type.
fn choose_test(types: &[RoomType], n_per_type: usize, seed: u64) -> Vec<String> {
    let n_base = n_per_type * types.len();
    let n_test = (n_base as f64 / (TRAIN_PER_TEST + 1) as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5E_ED0F_5911);
    let mut pools: Vec<Vec<usize>> = types
        .iter()
        .map(|_| {
            let mut v: Vec<usize> = (0..n_per_type).collect();
            v.shuffle(&mut rng);
            v
        })
        .collect();
    (0..n_test)
        .map(|i| {
            let t = i % types.len();
            base_id(types[t], pools[t].pop().expect("fewer test scenes than bases"))
        })
        .collect()
}

pub fn config_hash(types: &[RoomType], n_per_type: usize, seed: u64) -> String {
    let names: Vec<&str> = types.iter().map(|t| t.name()).collect();
    let mut h = Sha256::new();
    h.update(format!("synthgen/v{SCHEMA_VERSION}/types={}/n={n_per_type}/seed={seed}/clear={CLEARANCE_CM}", names.join(",")));
    hex::encode(h.finalize())
}

fn manifest_for(scenes: &[SceneLayout], split: &BTreeMap<String, Split>, types: &[RoomType], n_per_type: usize, seed: u64) -> Manifest {
    let mut counts: BTreeMap<RoomType, BTreeMap<u16, usize>> = BTreeMap::new();
    let mut category_counts: BTreeMap<String, usize> = CategoryId::all().map(|c| (c.name().to_string(), 0)).collect();
    for s in scenes {
        *counts.entry(s.room_type).or_default().entry(s.theta.degrees()).or_default() += 1;
        for it in &s.items {
            *category_counts.entry(it.category.name().to_string()).or_default() += 1;
        }
    }
    let pick = |want: Split| -> Vec<String> {
        scenes.iter().filter(|s| split.get(&s.scene_id) == Some(&want)).map(|s| s.scene_id.clone()).collect()
    };
    Manifest {
        schema_version: SCHEMA_VERSION,
        seed,
        n_per_type,
        room_types: types.to_vec(),
        total: scenes.len(),
        counts,
        category_counts,
        train: pick(Split::Train),
        test: pick(Split::Test),
        config_hash: config_hash(types, n_per_type, seed),
    }
}

/// `n_per_type` base scenes for every room type, each expanded to four
/// orientations; all copies of a base scene share one split.
pub fn build_dataset(n_per_type: usize, seed: u64) -> Result<Dataset, SynthError> {
    build_dataset_for(&RoomType::ALL, n_per_type, seed)
}

/// Like [`build_dataset`] restricted to `types`, listed in catalog order
/// without repeats. A base scene is the same whichever types accompany it.
pub fn build_dataset_for(types: &[RoomType], n_per_type: usize, seed: u64) -> Result<Dataset, SynthError> {
    if n_per_type < MIN_PER_TYPE {
        return Err(SynthError::TooFewScenes(n_per_type));
    }
    if types.is_empty() || types.windows(2).any(|w| w[0] >= w[1]) {
        return Err(SynthError::RoomTypes(types.iter().map(|t| t.name()).collect::<Vec<_>>().join(",")));
    }
    let test = choose_test(types, n_per_type, seed);
    let mut scenes = Vec::with_capacity(n_per_type * types.len() * 4);
    let mut split = BTreeMap::new();
    for &t in types {
        for i in 0..n_per_type {
            let id = base_id(t, i);
            let base = generate_scene(&GenSpec { room_type: t, seed: scene_seed(seed, t, i) }, &id)?;
            let which = if test.contains(&id) { Split::Test } else { Split::Train };
            for s in augment_rotations(&base)? {
                split.insert(s.scene_id.clone(), which);
                scenes.push(s);
            }
        }
    }
    let manifest = manifest_for(&scenes, &split, types, n_per_type, seed);
    Ok(Dataset { scenes, split, manifest })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn augmentation_order_and_ids() {
        let s = generate_scene(&GenSpec { room_type: RoomType::Study, seed: 3 }, "study-0000").unwrap();
        let aug = augment_rotations(&s).unwrap();
        assert_eq!(aug.len(), 4);
        let thetas: Vec<u16> = aug.iter().map(|a| a.theta.degrees()).collect();
        assert_eq!(thetas, [90, 180, 270, 0]);
        let mut last = aug[3].clone();
        assert_eq!(last.scene_id, "study-0000-r0");
        last.scene_id = s.scene_id.clone();
        assert_eq!(last, s);
        assert!(augment_rotations(&aug[0]).is_err());
        assert_eq!(base_of("study-0000-r3"), "study-0000");
        assert_eq!(base_of("study-0000"), "study-0000");
    }

    #[test]
    fn split_counts() {
        let test = choose_test(&RoomType::ALL, 25, 0);
        assert_eq!(test.len(), 17);
        let mut dedup = test.clone();
        dedup.sort();
        dedup.dedup();
        assert_eq!(dedup.len(), 17);
        for t in RoomType::ALL {
            assert!(test.iter().filter(|id| id.starts_with(t.name())).count() >= 4);
        }
    }

    #[test]
    fn small_dataset_is_consistent() {
        let d = build_dataset(6, 11).unwrap();
        assert_eq!(d.scenes.len(), 96);
        assert_eq!(d.manifest.train.len() + d.manifest.test.len(), 96);
        assert_eq!(d.manifest.test.len(), 16);
        for s in &d.scenes {
            let all: Vec<Split> = AUGMENT_ORDER.iter().map(|k| d.split[&augmented_id(base_of(&s.scene_id), *k)]).collect();
            assert!(all.iter().all(|x| *x == all[0]));
        }
        assert!(build_dataset(4, 0).is_err());
        assert_eq!(build_dataset(6, 11).unwrap().manifest, d.manifest);
    }

    #[test]
    fn single_type_dataset_reuses_base_scenes() {
        let full = build_dataset(25, 0).unwrap();
        let bed = build_dataset_for(&[RoomType::Bedroom], 25, 0).unwrap();
        assert_eq!(bed.scenes.len(), 100);
        assert_eq!(bed.manifest.test.len(), 16);
        for s in &bed.scenes {
            assert_eq!(s.room_type, RoomType::Bedroom);
            assert!(full.scenes.contains(s));
        }
        assert!(build_dataset_for(&[], 25, 0).is_err());
        assert!(build_dataset_for(&[RoomType::Study, RoomType::Bedroom], 25, 0).is_err());
    }
}
