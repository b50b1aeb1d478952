//! Mode accuracy, mAP at IoU 0.5 and rotation accuracy, with exhaustive
//! oracles, whole-model evaluation and table-shaped reports.

mod metrics;
mod oracle;

pub use metrics::{
    compute_metrics, map_at_iou, match_predictions, metrics_close, mode_accuracy, rot_accuracy, EvalPair, Matching, MetricSet,
    IOU_THRESHOLD, UNMATCHED_PENALTY_DEG,
};
pub use oracle::{brute_force_oracles, ORACLE_MAX_ITEMS};

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::layout::{RoomType, SceneLayout};
use crate::model::{generate, ModelConfig, ModelError, ModelParams};
use crate::parallel::par_map;
use crate::raster::{extract_items, render_empty_room, render_layout, RasterConfig, RasterError};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no scenes to evaluate")]
    NoScenes,
    #[error("no ground-truth furniture in the evaluated scenes")]
    NoGroundTruth,
    #[error("scene {scene_id} has {items} items; the oracle handles at most {ORACLE_MAX_ITEMS}")]
    OracleTooLarge { scene_id: String, items: usize },
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// Row order of the report tables.
pub const REPORT_ORDER: [RoomType; 4] = [RoomType::Tatami, RoomType::Bathroom, RoomType::Bedroom, RoomType::Study];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_type: BTreeMap<RoomType, MetricSet>,
    pub overall: MetricSet,
    /// Hash of the run configuration that produced the report, when known.
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub config_hash: String,
}

impl EvalReport {
    /// Groups pairs by the room type of their scene and scores each group.
    pub fn from_pairs(scenes: &[&SceneLayout], pairs: &[EvalPair]) -> Result<Self, EvalError> {
        let mut per_type = BTreeMap::new();
        for t in RoomType::ALL {
            let group: Vec<EvalPair> = scenes.iter().zip(pairs).filter(|(s, _)| s.room_type == t).map(|(_, p)| p.clone()).collect();
            if !group.is_empty() {
                per_type.insert(t, compute_metrics(&group)?);
            }
        }
        Ok(EvalReport { per_type, overall: compute_metrics(pairs)?, config_hash: String::new() })
    }

    /// Rows `(label, metrics)` in report order, overall last.
    pub fn rows(&self) -> Vec<(&'static str, &MetricSet)> {
        let mut v: Vec<_> = REPORT_ORDER.iter().filter_map(|t| self.per_type.get(t).map(|m| (t.name(), m))).collect();
        v.push(("overall", &self.overall));
        v
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("room_type,mode,map50,rot,n_scenes,n_gt,n_pred\n");
        for (name, m) in self.rows() {
            s += &format!("{name},{},{},{},{},{},{}\n", m.mode, m.map50, m.rot, m.n_scenes, m.n_gt, m.n_pred);
        }
        s
    }

    /// Writes `report.csv` and `report.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), EvalError> {
        let io = |p: &Path| {
            let path = p.display().to_string();
            move |source| EvalError::Io { path, source }
        };
        fs::create_dir_all(dir).map_err(io(dir))?;
        let csv = dir.join("report.csv");
        fs::write(&csv, self.to_csv()).map_err(io(&csv))?;
        let json = dir.join("report.json");
        fs::write(&json, serde_json::to_string_pretty(self).expect("report serializes") + "\n").map_err(io(&json))?;
        Ok(())
    }
}

/// Per-scene diagnostics, one JSON object per line.
pub fn write_scene_diagnostics(path: &Path, pairs: &[EvalPair]) -> Result<(), EvalError> {
    let io = |source| EvalError::Io { path: path.display().to_string(), source };
    let mut f = std::io::BufWriter::new(fs::File::create(path).map_err(io)?);
    for p in pairs {
        let line = match compute_metrics(std::slice::from_ref(p)) {
            Ok(m) => serde_json::json!({"scene_id": p.scene_id, "mode": m.mode, "map50": m.map50, "rot": m.rot,
                "n_gt": m.n_gt, "n_pred": m.n_pred}),
            Err(_) => serde_json::json!({"scene_id": p.scene_id, "n_gt": 0, "n_pred": p.predictions.len()}),
        };
        writeln!(f, "{line}").map_err(io)?;
    }
    f.flush().map_err(io)
}

/// Runs the generator on one scene's empty room and extracts its furniture.
pub fn scene_pair(params: &ModelParams, cfg: &ModelConfig, scene: &SceneLayout) -> Result<EvalPair, EvalError> {
    let rc = RasterConfig::new(cfg.resolution)?;
    let room = render_empty_room(&scene.room, &rc)?;
    let out = generate(params, cfg, &room, scene.theta)?;
    let predictions = extract_items(&out, &rc.frame(scene.room.extent)?)?;
    Ok(EvalPair { scene_id: scene.scene_id.clone(), predictions, ground_truth: scene.items.clone() })
}

/// Pairs built by rendering the ground truth and extracting it again; the
/// generator is bypassed.
pub fn roundtrip_pairs(scenes: &[&SceneLayout], rc: &RasterConfig) -> Result<Vec<EvalPair>, EvalError> {
    par_map(scenes, |s| -> Result<EvalPair, EvalError> {
        let img = render_layout(s, rc)?;
        let predictions = extract_items(&img, &rc.frame(s.room.extent)?)?;
        Ok(EvalPair { scene_id: s.scene_id.clone(), predictions, ground_truth: s.items.clone() })
    })
    .into_iter()
    .collect()
}

/// Evaluates the generator over `scenes` (normally the test split).
pub fn evaluate_model(params: &ModelParams, cfg: &ModelConfig, scenes: &[&SceneLayout]) -> Result<(EvalReport, Vec<EvalPair>), EvalError> {
    if scenes.is_empty() {
        return Err(EvalError::NoScenes);
    }
    let pairs: Vec<EvalPair> = par_map(scenes, |s| scene_pair(params, cfg, s)).into_iter().collect::<Result<_, _>>()?;
    if pairs.iter().all(|p| p.predictions.is_empty()) {
        log::warn!("the generator produced no furniture in any of {} scenes", pairs.len());
    }
    Ok((EvalReport::from_pairs(scenes, &pairs)?, pairs))
}
