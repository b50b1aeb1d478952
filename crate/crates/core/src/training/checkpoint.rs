//! Resumable checkpoints: an `RLTW` file with parameters and Adam moments,
//! next to a JSON run state.

use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::model::{ModelConfig, ModelParams};
use crate::tensor::{read_checkpoint, write_checkpoint, Tensor};

use super::{OptState, TrainConfig, TrainError, Trainer};

pub const RUN_STATE_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunState {
    pub version: u32,
    /// Completed steps.
    pub step: u64,
    pub seed: u64,
    pub config_hash: String,
    pub model: ModelConfig,
    pub train: TrainConfig,
    /// Adam step counters of `g`, `d1`, `d2`.
    pub adam_steps: [u64; 3],
}

/// Hash of everything that shapes a run except its length.
pub fn config_hash(model: &ModelConfig, train: &TrainConfig) -> String {
    let t = TrainConfig { iterations: 0, checkpoint_every: 0, ..*train };
    let text = serde_json::to_string(&(model, t)).expect("configs serialize");
    hex::encode(Sha256::digest(text.as_bytes()))
}

fn state_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> TrainError {
    TrainError::Io { path: path.display().to_string(), detail: e.to_string() }
}

const NETS: [&str; 3] = ["g", "d1", "d2"];

/// Writes `path` (weights and moments) and the run state beside it.
pub fn save_checkpoint(t: &Trainer, path: &Path) -> Result<(), TrainError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    let mut moments: Vec<(String, Tensor)> = Vec::new();
    for opt in [&t.opt.g, &t.opt.d1, &t.opt.d2] {
        for (kind, map) in [("m", &opt.m), ("v", &opt.v)] {
            for (name, v) in map {
                moments.push((format!("opt.{kind}.{name}"), Tensor::from_vec(&[v.len()], v.clone())?));
            }
        }
    }
    let entries = t.params.iter().chain(moments.iter().map(|(n, v)| (n.as_str(), v)));
    let f = fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(f);
    write_checkpoint(&mut w, entries).map_err(|e| io_err(path, e))?;
    w.flush().map_err(|e| io_err(path, e))?;

    let state = RunState {
        version: RUN_STATE_VERSION,
        step: t.step,
        seed: t.cfg.seed,
        config_hash: config_hash(&t.model, &t.cfg),
        model: t.model,
        train: t.cfg,
        adam_steps: [t.opt.g.step, t.opt.d1.step, t.opt.d2.step],
    };
    let sp = state_path(path);
    fs::write(&sp, serde_json::to_string_pretty(&state).expect("state serializes") + "\n").map_err(|e| io_err(&sp, e))?;
    Ok(())
}

/// Restores a trainer exactly as it was when `path` was written.
pub fn load_checkpoint(path: &Path) -> Result<Trainer, TrainError> {
    let sp = state_path(path);
    let text = fs::read_to_string(&sp).map_err(|e| io_err(&sp, e))?;
    let state: RunState = serde_json::from_str(&text).map_err(|e| io_err(&sp, e))?;
    if state.version != RUN_STATE_VERSION {
        return Err(io_err(&sp, format!("run state version {}, expected {RUN_STATE_VERSION}", state.version)));
    }
    if state.config_hash != config_hash(&state.model, &state.train) {
        return Err(io_err(&sp, "config hash does not match the stored configs"));
    }
    let f = fs::File::open(path).map_err(|e| io_err(path, e))?;
    let entries = read_checkpoint(BufReader::new(f)).map_err(|e| io_err(path, e))?;
    let (opt_entries, param_entries): (Vec<_>, Vec<_>) = entries.into_iter().partition(|(n, _)| n.starts_with("opt."));
    let params = ModelParams::from_entries(param_entries, &state.model).map_err(|e| io_err(path, e))?;
    let mut opt = OptState::new(state.train.lr);
    for (name, t) in opt_entries {
        let rest = &name["opt.".len()..];
        let Some((kind, pname)) = rest.split_once('.') else {
            return Err(io_err(path, format!("malformed moment name {name}")));
        };
        let net = pname.split('.').next().unwrap_or("");
        let state_for = match NETS.iter().position(|n| *n == net) {
            Some(0) => &mut opt.g,
            Some(1) => &mut opt.d1,
            Some(2) => &mut opt.d2,
            _ => return Err(io_err(path, format!("moment {name} names no network"))),
        };
        let map = match kind {
            "m" => &mut state_for.m,
            "v" => &mut state_for.v,
            _ => return Err(io_err(path, format!("malformed moment name {name}"))),
        };
        map.insert(pname.to_string(), t.into_data());
    }
    let steps = state.adam_steps;
    for (s, n) in [&mut opt.g, &mut opt.d1, &mut opt.d2].into_iter().zip(steps) {
        s.step = n;
    }
    Ok(Trainer { model: state.model, cfg: state.train, params, opt, step: state.step })
}
