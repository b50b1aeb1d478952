//! Losses and the alternating `d1` / `d2` / `g` training loop.

mod checkpoint;

pub use checkpoint::{load_checkpoint, save_checkpoint, RunState, RUN_STATE_VERSION};

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::layout::{Rotation, SceneLayout};
use crate::model::{
    critic_layout, discriminator_forward, generator_forward, Critic, GeneratorOutput, ModelConfig, ModelError, ModelParams, ParamNodes,
    DIR_CHANNELS, ROOM_CHANNELS,
};
use crate::parallel::par_map;
use crate::raster::{mode_mask, render_empty_room, render_layout, LayoutImage, ModeMask, RasterConfig, RasterError, RoomImage};
use crate::tensor::{adam_step, AdamState, Graph, NodeId, TensorError, PROB_FLOOR};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("step {step}: {component} is not finite")]
    NonFinite { step: u64, component: &'static str },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error("{path}: {detail}")]
    Io { path: String, detail: String },
}

/// Which parts of the model are switched off.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ablation {
    #[default]
    None,
    /// Rotation filters become identities; the condition planes stay.
    Rotation,
    /// No `d2` and no second adversarial term.
    Mode,
    Both,
}

impl Ablation {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "none" => Some(Ablation::None),
            "rotation" => Some(Ablation::Rotation),
            "mode" => Some(Ablation::Mode),
            "both" => Some(Ablation::Both),
            _ => None,
        }
    }

    pub fn rotation_filters(self) -> bool {
        matches!(self, Ablation::None | Ablation::Mode)
    }

    pub fn uses_d2(self) -> bool {
        matches!(self, Ablation::None | Ablation::Rotation)
    }

    /// The model config this ablation actually trains.
    pub fn apply(self, cfg: &ModelConfig) -> ModelConfig {
        ModelConfig { rotation_filters: cfg.rotation_filters && self.rotation_filters(), ..*cfg }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lambda_adv1: f64,
    pub lambda_adv2: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub iterations: u64,
    pub seed: u64,
    /// Steps between checkpoints; 0 writes only the final one.
    pub checkpoint_every: u64,
    pub ablation: Ablation,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda_adv1: 0.1,
            lambda_adv2: 0.1,
            lr: 2e-4,
            batch_size: 4,
            iterations: 2000,
            seed: 0,
            checkpoint_every: 0,
            ablation: Ablation::None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if !(self.lambda_adv1 >= 0.0 && self.lambda_adv2 >= 0.0) {
            return Err(TrainError::Config("adversarial weights must be non-negative".into()));
        }
        if self.batch_size == 0 {
            return Err(TrainError::Config("batch size must be at least 1".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(TrainError::Config(format!("learning rate must be positive, got {}", self.lr)));
        }
        Ok(())
    }

    /// Weight of the second adversarial term after the ablation.
    pub fn effective_lambda_adv2(&self) -> f64 {
        if self.ablation.uses_d2() {
            self.lambda_adv2
        } else {
            0.0
        }
    }
}

fn clamp_prob(p: f64) -> f64 {
    let q = p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
    if q != p {
        log::debug!("probability {p} clamped to {q}");
    }
    q
}

/// Discriminator loss `-ln(1 - p_fake) - ln(p_real)` with clamped inputs.
pub fn d_loss(p_fake: f64, p_real: f64) -> f64 {
    -(1.0 - clamp_prob(p_fake)).ln() - clamp_prob(p_real).ln()
}

/// Components of the generator objective.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GLoss {
    /// Mean categorical cross-entropy over all pixels.
    pub cat: f64,
    /// Direction cross-entropy averaged over ground-truth furniture pixels.
    pub dir: f64,
    pub adv1: f64,
    pub adv2: f64,
}

impl GLoss {
    pub fn gc(&self) -> f64 {
        self.cat + self.dir
    }

    pub fn total(&self, lambda_adv1: f64, lambda_adv2: f64) -> f64 {
        let mut t = self.gc();
        if lambda_adv1 != 0.0 {
            t += lambda_adv1 * self.adv1;
        }
        if lambda_adv2 != 0.0 {
            t += lambda_adv2 * self.adv2;
        }
        t
    }
}

/// Per-pixel furniture indicator `1 - gt_cat[0]` of a batch of layouts.
fn furniture_weight(gts: &[&LayoutImage]) -> Vec<f64> {
    gts.iter().flat_map(|l| l.cat_plane(0).iter().map(|v| 1.0 - v)).collect()
}

/// Adds the two content cross-entropies of a generator output to the graph.
fn content_loss(g: &mut Graph, out: GeneratorOutput, gts: &[&LayoutImage]) -> Result<(NodeId, NodeId), TensorError> {
    let n = gts.len();
    let px = gts[0].resolution * gts[0].resolution;
    let cat_t: Vec<f64> = gts.iter().flat_map(|l| l.cat.iter().copied()).collect();
    let dir_t: Vec<f64> = gts.iter().flat_map(|l| l.dir.iter().copied()).collect();
    let cat = g.cross_entropy(out.cat, cat_t, vec![1.0; n * px], (n * px) as f64)?;
    let w = furniture_weight(gts);
    let norm = w.iter().sum::<f64>().max(1.0);
    let dir = g.cross_entropy(out.dir, dir_t, w, norm)?;
    Ok((cat, dir))
}

/// Generator loss of fixed outputs against ground truth, given critic scores.
pub fn g_loss(out: &LayoutImage, gt: &LayoutImage, p_d1: f64, p_d2: f64) -> Result<GLoss, TrainError> {
    if out.resolution != gt.resolution || out.cat.len() != gt.cat.len() || out.dir.len() != gt.dir.len() {
        return Err(TrainError::Config("generator output and ground truth differ in shape".into()));
    }
    let r = out.resolution;
    let mut g = Graph::new();
    let cat = g.constant(&[1, out.cat_channels(), r, r], out.cat.clone())?;
    let dir = g.constant(&[1, DIR_CHANNELS, r, r], out.dir.clone())?;
    let (c, d) = content_loss(&mut g, GeneratorOutput { cat, dir }, &[gt])?;
    Ok(GLoss { cat: g.scalar(c), dir: g.scalar(d), adv1: -clamp_prob(p_d1).ln(), adv2: -clamp_prob(p_d2).ln() })
}

/// A training example rasterized once up front.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub scene_id: String,
    pub k: Rotation,
    pub room: RoomImage,
    pub gt: LayoutImage,
    pub mask: ModeMask,
}

/// Rasterizes scenes at the model resolution; `k` is each scene's orientation
/// and the mode mask covers its own furniture boxes.
pub fn prepare_samples(scenes: &[&SceneLayout], cfg: &ModelConfig) -> Result<Vec<Sample>, TrainError> {
    let rc = RasterConfig::new(cfg.resolution)?;
    par_map(scenes, |s| -> Result<Sample, TrainError> {
        Ok(Sample {
            scene_id: s.scene_id.clone(),
            k: s.theta,
            room: render_empty_room(&s.room, &rc)?,
            gt: render_layout(s, &rc)?,
            mask: mode_mask(s, Rotation::R0, &rc)?,
        })
    })
    .into_iter()
    .collect()
}

/// Sample indices of step `step` (0-based): consecutive slices of a fresh
/// seeded permutation per epoch. A pure function, so resuming needs no state.
pub fn batch_indices(seed: u64, step: u64, n: usize, batch: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(batch);
    let mut pos = step as usize * batch;
    let mut cached: Option<(usize, Vec<usize>)> = None;
    while out.len() < batch {
        let epoch = pos / n;
        if cached.as_ref().is_none_or(|(e, _)| *e != epoch) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xBA7C_4000_0000_0000 ^ epoch as u64);
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            cached = Some((epoch, perm));
        }
        out.push(cached.as_ref().expect("filled above").1[pos % n]);
        pos += 1;
    }
    out
}

/// Loss values of one step, as logged.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepMetrics {
    pub step: u64,
    pub l_1d: f64,
    pub l_2d: f64,
    pub l_gc: f64,
    pub l_adv1: f64,
    pub l_adv2: f64,
    pub l_g: f64,
    pub wall_ms: f64,
}

impl StepMetrics {
    /// Loss columns only, so that a log is reproducible byte for byte; the
    /// wall-clock time goes to a separate timing file.
    pub const CSV_HEADER: &'static str = "step,L_1D,L_2D,L_gc,L_adv1,L_adv2,L_g";

    pub fn csv_row(&self) -> String {
        format!("{},{},{},{},{},{},{}", self.step, self.l_1d, self.l_2d, self.l_gc, self.l_adv1, self.l_adv2, self.l_g)
    }

    /// Every field except the wall-clock time, bit for bit.
    pub fn same_losses(&self, o: &StepMetrics) -> bool {
        let a = [self.l_1d, self.l_2d, self.l_gc, self.l_adv1, self.l_adv2, self.l_g];
        let b = [o.l_1d, o.l_2d, o.l_gc, o.l_adv1, o.l_adv2, o.l_g];
        self.step == o.step && a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits())
    }
}

/// One Adam state per network.
#[derive(Clone, Debug, PartialEq)]
pub struct OptState {
    pub g: AdamState,
    pub d1: AdamState,
    pub d2: AdamState,
}

impl OptState {
    pub fn new(lr: f64) -> Self {
        OptState { g: AdamState::new(lr), d1: AdamState::new(lr), d2: AdamState::new(lr) }
    }
}

struct Batch {
    n: usize,
    turns: Vec<Rotation>,
    rooms: Vec<f64>,
    real: Vec<f64>,
    masks: Vec<f64>,
}

fn finite(step: u64, component: &'static str, v: f64) -> Result<f64, TrainError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(TrainError::NonFinite { step, component })
    }
}

/// Full model state during training.
#[derive(Clone, Debug, PartialEq)]
pub struct Trainer {
    pub model: ModelConfig,
    pub cfg: TrainConfig,
    pub params: ModelParams,
    pub opt: OptState,
    /// Number of completed steps.
    pub step: u64,
}

impl Trainer {
    /// Fresh parameters from `cfg.seed`. `model` is the unablated config.
    pub fn new(model: &ModelConfig, cfg: &TrainConfig) -> Result<Self, TrainError> {
        cfg.validate()?;
        let model = cfg.ablation.apply(model);
        Ok(Trainer { params: ModelParams::init(&model, cfg.seed)?, model, cfg: *cfg, opt: OptState::new(cfg.lr), step: 0 })
    }

    fn batch(&self, samples: &[Sample], idx: &[usize]) -> Batch {
        let picked: Vec<&Sample> = idx.iter().map(|i| &samples[*i]).collect();
        Batch {
            n: picked.len(),
            turns: picked.iter().map(|s| s.k).collect(),
            rooms: picked.iter().flat_map(|s| s.room.data.iter().copied()).collect(),
            real: picked.iter().flat_map(|s| s.gt.to_channels()).collect(),
            masks: picked.iter().flat_map(|s| s.mask.data.iter().copied()).collect(),
        }
    }

    /// Runs one critic update on detached fake and real inputs; returns its loss.
    fn critic_update(&mut self, which: Critic, b: &Batch, fake: &[f64], real: &[f64]) -> Result<f64, TrainError> {
        let r = self.model.resolution;
        let lc = self.model.layout_channels();
        let mut g = Graph::new();
        let pn = ParamNodes::load(&mut g, self.params.critic(which), true);
        let room = match which {
            Critic::D1 => Some(g.constant(&[b.n, ROOM_CHANNELS, r, r], b.rooms.clone())?),
            Critic::D2 => None,
        };
        let fake = g.constant(&[b.n, lc, r, r], fake.to_vec())?;
        let real = g.constant(&[b.n, lc, r, r], real.to_vec())?;
        let pf = discriminator_forward(&mut g, &pn, &self.model, which, fake, room, &b.turns)?;
        let pr = discriminator_forward(&mut g, &pn, &self.model, which, real, room, &b.turns)?;
        let lf = g.bce(pf, 0.0)?;
        let lr = g.bce(pr, 1.0)?;
        let loss = g.combine(&[(lf, 1.0), (lr, 1.0)])?;
        let value = finite(self.step, if which == Critic::D1 { "L_1D" } else { "L_2D" }, g.scalar(loss))?;
        g.backward(loss)?;
        let set = self.params.critic_mut(which);
        pn.store_grads(&g, set)?;
        let opt = match which {
            Critic::D1 => &mut self.opt.d1,
            Critic::D2 => &mut self.opt.d2,
        };
        adam_step(opt, set)?;
        set.zero_grads();
        Ok(value)
    }

    /// One `d1` update, one `d2` update, then one `g` update.
    pub fn train_step(&mut self, samples: &[Sample]) -> Result<StepMetrics, TrainError> {
        if samples.is_empty() {
            return Err(TrainError::Config("no training samples".into()));
        }
        let t0 = Instant::now();
        let idx = batch_indices(self.cfg.seed, self.step, samples.len(), self.cfg.batch_size);
        let b = self.batch(samples, &idx);
        let gts: Vec<&LayoutImage> = idx.iter().map(|i| &samples[*i].gt).collect();
        let r = self.model.resolution;
        let use_d2 = self.cfg.ablation.uses_d2();
        let (l1, l2) = (self.cfg.lambda_adv1, self.cfg.effective_lambda_adv2());

        // The generator graph is built first; its detached outputs feed the
        // critic updates and the same nodes later feed the updated critics.
        let mut g = Graph::new();
        let gp = ParamNodes::load(&mut g, &self.params.g, true);
        let room = g.constant(&[b.n, ROOM_CHANNELS, r, r], b.rooms.clone())?;
        let out = generator_forward(&mut g, &gp, &self.model, room, &b.turns)?;
        let fake = critic_layout(&mut g, out)?;
        let mask = g.constant(&[b.n, 1, r, r], b.masks.clone())?;
        let fake_masked = g.mul_mask(fake, mask)?;

        let l_1d = self.critic_update(Critic::D1, &b, g.value(fake), &b.real)?;
        let l_2d = if use_d2 {
            let lc = self.model.layout_channels();
            let px = r * r;
            let real_masked: Vec<f64> = b.real.iter().enumerate().map(|(i, v)| v * b.masks[(i / (lc * px)) * px + i % px]).collect();
            self.critic_update(Critic::D2, &b, g.value(fake_masked), &real_masked)?
        } else {
            0.0
        };

        let (cat, dir) = content_loss(&mut g, out, &gts)?;
        let d1 = ParamNodes::load(&mut g, &self.params.d1, false);
        let p1 = discriminator_forward(&mut g, &d1, &self.model, Critic::D1, fake, Some(room), &b.turns)?;
        let adv1 = g.bce(p1, 1.0)?;
        let mut terms = vec![(cat, 1.0), (dir, 1.0), (adv1, l1)];
        let adv2 = if use_d2 {
            let d2 = ParamNodes::load(&mut g, &self.params.d2, false);
            let p2 = discriminator_forward(&mut g, &d2, &self.model, Critic::D2, fake_masked, None, &b.turns)?;
            let a = g.bce(p2, 1.0)?;
            terms.push((a, l2));
            Some(a)
        } else {
            None
        };
        let total = g.combine(&terms)?;
        let step = self.step;
        let l_gc = finite(step, "L_gc", g.scalar(cat) + g.scalar(dir))?;
        let l_adv1 = finite(step, "L_adv1", g.scalar(adv1))?;
        let l_adv2 = finite(step, "L_adv2", adv2.map(|a| g.scalar(a)).unwrap_or(0.0))?;
        let l_g = finite(step, "L_g", g.scalar(total))?;
        g.backward(total)?;
        gp.store_grads(&g, &mut self.params.g)?;
        adam_step(&mut self.opt.g, &mut self.params.g)?;
        self.params.g.zero_grads();

        self.step += 1;
        Ok(StepMetrics { step: self.step, l_1d, l_2d, l_gc, l_adv1, l_adv2, l_g, wall_ms: t0.elapsed().as_secs_f64() * 1e3 })
    }

    /// Steps until `cfg.iterations`, calling `on_step` after every step.
    pub fn run<F>(&mut self, samples: &[Sample], mut on_step: F) -> Result<(), TrainError>
    where
        F: FnMut(&Trainer, &StepMetrics) -> Result<(), TrainError>,
    {
        while self.step < self.cfg.iterations {
            let m = self.train_step(samples)?;
            on_step(self, &m)?;
        }
        Ok(())
    }
}
