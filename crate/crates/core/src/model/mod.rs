//! Conditional layout generator with per-layer rotation filters, the
//! realism discriminator `d1` and the rotation/mode discriminator `d2`.
//!
//! All networks are built on a [`Graph`] so the trainer can backpropagate
//! through any combination of them.

mod check;

pub use check::{layer_checks, network_checks, LayerCheck, GRADCHECK_TOL, KINK_MARGIN_MIN, MAX_REDRAWS, NETWORK_COORDS_PER_TENSOR};

use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::layout::{Rotation, N_CATEGORIES};
use crate::raster::{LayoutImage, RoomImage};
use crate::tensor::{quarter_turn_planes, read_checkpoint, write_checkpoint, Graph, LayerKind, NodeId, ParamSet, Tensor, TensorError};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    Config(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("parameter {name}: {detail}")]
    Param { name: String, detail: String },
}

/// Channels of the room image fed to the generator and to `d1`.
pub const ROOM_CHANNELS: usize = RoomImage::CHANNELS;
/// Constant planes carrying the scene rotation.
pub const CONDITION_CHANNELS: usize = 4;
pub const DIR_CHANNELS: usize = LayoutImage::DIR_CHANNELS;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub resolution: usize,
    pub n_cat: usize,
    pub base_channels: usize,
    /// Number of generator hidden layers, each followed by a rotation filter.
    pub hidden_layers: usize,
    /// When false every rotation filter is the identity (ablation).
    pub rotation_filters: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig { resolution: 32, n_cat: N_CATEGORIES, base_channels: 16, hidden_layers: 6, rotation_filters: true }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Stage {
    Down,
    Same,
    Up,
}

#[derive(Clone, Debug)]
struct HiddenLayer {
    name: String,
    stage: Stage,
    cin: usize,
    cout: usize,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.resolution < 4 || !self.resolution.is_multiple_of(4) {
            return Err(ModelError::Config(format!("resolution {} must be a positive multiple of 4", self.resolution)));
        }
        if self.hidden_layers < 2 {
            return Err(ModelError::Config(format!("need at least 2 hidden layers, got {}", self.hidden_layers)));
        }
        if self.base_channels == 0 || self.n_cat == 0 {
            return Err(ModelError::Config("channel counts must be positive".into()));
        }
        Ok(())
    }

    pub fn cat_channels(&self) -> usize {
        self.n_cat + 1
    }

    pub fn layout_channels(&self) -> usize {
        self.cat_channels() + DIR_CHANNELS
    }

    /// Up to two stride-2 encoders and matching decoders; the rest keep size.
    fn hidden(&self) -> Vec<HiddenLayer> {
        let n_down = (self.hidden_layers / 2).min(2);
        let n_same = self.hidden_layers - 2 * n_down;
        let mut out = Vec::new();
        let mut c = ROOM_CHANNELS + CONDITION_CHANNELS;
        for i in 0..n_down {
            let cout = self.base_channels << i;
            out.push(HiddenLayer { name: format!("g.enc{}", i + 1), stage: Stage::Down, cin: c, cout });
            c = cout;
        }
        for i in 0..n_same {
            let cout = c.max(self.base_channels);
            out.push(HiddenLayer { name: format!("g.mid{}", i + 1), stage: Stage::Same, cin: c, cout });
            c = cout;
        }
        for i in 0..n_down {
            let cout = (c / 2).max(self.base_channels);
            out.push(HiddenLayer { name: format!("g.dec{}", i + 1), stage: Stage::Up, cin: c, cout });
            c = cout;
        }
        out
    }

    fn head_in(&self) -> usize {
        self.hidden().last().map(|l| l.cout).unwrap_or(self.base_channels) + ROOM_CHANNELS
    }

    fn critic_in(&self, which: Critic) -> usize {
        match which {
            Critic::D1 => ROOM_CHANNELS + self.layout_channels() + CONDITION_CHANNELS,
            Critic::D2 => self.layout_channels() + CONDITION_CHANNELS,
        }
    }

    /// `(name, shape)` of every parameter, generator first.
    pub fn param_shapes(&self) -> Vec<(String, Vec<usize>)> {
        let mut v = Vec::new();
        for l in self.hidden() {
            let w = match l.stage {
                Stage::Up => vec![l.cin, l.cout, 4, 4],
                _ => vec![l.cout, l.cin, 3, 3],
            };
            v.push((format!("{}.w", l.name), w));
            v.push((format!("{}.b", l.name), vec![l.cout]));
        }
        let hin = self.head_in();
        v.push(("g.cat.w".into(), vec![self.cat_channels(), hin, 3, 3]));
        v.push(("g.cat.b".into(), vec![self.cat_channels()]));
        v.push(("g.dir.w".into(), vec![DIR_CHANNELS, hin, 3, 3]));
        v.push(("g.dir.b".into(), vec![DIR_CHANNELS]));
        for which in [Critic::D1, Critic::D2] {
            let p = which.prefix();
            let c0 = self.base_channels;
            v.push((format!("{p}.c1.w"), vec![c0, self.critic_in(which), 3, 3]));
            v.push((format!("{p}.c1.b"), vec![c0]));
            v.push((format!("{p}.c2.w"), vec![2 * c0, c0, 3, 3]));
            v.push((format!("{p}.c2.b"), vec![2 * c0]));
            v.push((format!("{p}.c3.w"), vec![1, 2 * c0, 3, 3]));
            v.push((format!("{p}.c3.b"), vec![1]));
        }
        v
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Critic {
    /// Judges `(room, layout)` pairs for realism.
    D1,
    /// Judges mode-masked layouts for rotation and furniture consistency.
    D2,
}

impl Critic {
    pub fn prefix(self) -> &'static str {
        match self {
            Critic::D1 => "d1",
            Critic::D2 => "d2",
        }
    }
}

/// Parameters of `g`, `d1` and `d2`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub g: ParamSet,
    pub d1: ParamSet,
    pub d2: ParamSet,
}

const HEADS: [&str; 2] = ["g.cat.w", "g.dir.w"];

impl ModelParams {
    /// He-normal weights from a seeded stream, zero biases. The generator's
    /// output heads start at zero so training begins from uniform softmaxes.
    pub fn init(cfg: &ModelConfig, seed: u64) -> Result<Self, ModelError> {
        Self::draw(cfg, seed, false)
    }

    /// Every tensor drawn, heads and biases included. With the zero heads of
    /// [`ModelParams::init`] nothing upstream of them would see a gradient,
    /// so checks and tests start from here instead.
    pub fn random(cfg: &ModelConfig, seed: u64) -> Result<Self, ModelError> {
        Self::draw(cfg, seed, true)
    }

    fn draw(cfg: &ModelConfig, seed: u64, dense: bool) -> Result<Self, ModelError> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = ModelParams { g: ParamSet::new(), d1: ParamSet::new(), d2: ParamSet::new() };
        for (name, shape) in cfg.param_shapes() {
            let n: usize = shape.iter().product();
            let bias = name.ends_with(".b");
            let data = if !dense && (bias || HEADS.contains(&name.as_str())) {
                vec![0.0; n]
            } else {
                let fan_in = if name.starts_with("g.dec") { shape[0] * 4 } else { shape[1..].iter().product::<usize>() };
                let std = if bias { 0.1 } else { (2.0 / fan_in as f64).sqrt() };
                let normal = Normal::new(0.0, std).expect("finite std");
                (0..n).map(|_| normal.sample(&mut rng)).collect()
            };
            out.set_mut(&name)?.insert(name.clone(), Tensor::from_vec(&shape, data)?);
        }
        Ok(out)
    }

    fn set_mut(&mut self, name: &str) -> Result<&mut ParamSet, ModelError> {
        match name.split('.').next() {
            Some("g") => Ok(&mut self.g),
            Some("d1") => Ok(&mut self.d1),
            Some("d2") => Ok(&mut self.d2),
            _ => Err(ModelError::Param { name: name.into(), detail: "unknown network prefix".into() }),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.g.iter().chain(self.d1.iter()).chain(self.d2.iter())
    }

    pub fn critic(&self, which: Critic) -> &ParamSet {
        match which {
            Critic::D1 => &self.d1,
            Critic::D2 => &self.d2,
        }
    }

    pub fn critic_mut(&mut self, which: Critic) -> &mut ParamSet {
        match which {
            Critic::D1 => &mut self.d1,
            Critic::D2 => &mut self.d2,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(|(_, t)| t.is_finite())
    }

    pub fn save<W: Write>(&self, w: W) -> Result<(), ModelError> {
        write_checkpoint(w, self.iter())?;
        Ok(())
    }

    /// Loads a checkpoint and checks it against the config's parameter shapes.
    pub fn load<R: Read>(r: R, cfg: &ModelConfig) -> Result<Self, ModelError> {
        Self::from_entries(read_checkpoint(r)?, cfg)
    }

    pub fn from_entries(entries: Vec<(String, Tensor)>, cfg: &ModelConfig) -> Result<Self, ModelError> {
        let mut out = ModelParams { g: ParamSet::new(), d1: ParamSet::new(), d2: ParamSet::new() };
        for (name, t) in entries {
            out.set_mut(&name)?.insert(name, t);
        }
        for (name, shape) in cfg.param_shapes() {
            let Some(t) = out.iter().find(|(n, _)| *n == name).map(|(_, t)| t) else {
                return Err(ModelError::Param { name, detail: "missing from checkpoint".into() });
            };
            if t.shape() != shape.as_slice() {
                return Err(ModelError::Param { name, detail: format!("shape {:?}, config expects {shape:?}", t.shape()) });
            }
        }
        let expected = cfg.param_shapes().len();
        if out.g.len() + out.d1.len() + out.d2.len() != expected {
            return Err(ModelError::Param { name: "*".into(), detail: "unexpected extra parameters".into() });
        }
        Ok(out)
    }
}

/// Graph handles of one network's parameters.
pub struct ParamNodes {
    ids: Vec<(String, NodeId)>,
}

impl ParamNodes {
    /// Puts every tensor of `set` on the graph; `trainable` asks for gradients.
    pub fn load(g: &mut Graph, set: &ParamSet, trainable: bool) -> Self {
        ParamNodes { ids: set.iter().map(|(n, t)| (n.to_string(), g.input(t, trainable))).collect() }
    }

    /// Wraps nodes already on the graph, such as gradient-check leaves.
    pub fn from_ids(mut ids: Vec<(String, NodeId)>) -> Self {
        ids.sort_by(|a, b| a.0.cmp(&b.0));
        ParamNodes { ids }
    }

    pub fn get(&self, name: &str) -> Result<NodeId, ModelError> {
        self.ids
            .binary_search_by(|(n, _)| n.as_str().cmp(name))
            .map(|i| self.ids[i].1)
            .map_err(|_| ModelError::Param { name: name.into(), detail: "not loaded".into() })
    }

    /// Copies gradients from the graph into the parameter set.
    pub fn store_grads(&self, g: &Graph, set: &mut ParamSet) -> Result<(), ModelError> {
        for (name, id) in &self.ids {
            let t = set.get_mut(name).ok_or_else(|| ModelError::Param { name: name.clone(), detail: "missing".into() })?;
            let grad = g.grad(*id).map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; t.len()]);
            t.set_grad(grad)?;
        }
        Ok(())
    }
}

/// One-hot rotation planes `[4, R, R]`: plane `k` is all ones.
pub fn condition_encode(k: Rotation, resolution: usize) -> Tensor {
    let n = resolution * resolution;
    let mut data = vec![0.0; CONDITION_CHANNELS * n];
    data[k.quarter_turns() * n..(k.quarter_turns() + 1) * n].fill(1.0);
    Tensor::from_vec(&[CONDITION_CHANNELS, resolution, resolution], data).expect("sizes agree")
}

fn condition_node(g: &mut Graph, turns: &[Rotation], resolution: usize) -> Result<NodeId, TensorError> {
    let mut data = Vec::with_capacity(turns.len() * CONDITION_CHANNELS * resolution * resolution);
    for k in turns {
        data.extend_from_slice(condition_encode(*k, resolution).data());
    }
    g.constant(&[turns.len(), CONDITION_CHANNELS, resolution, resolution], data)
}

/// Per-channel spatial quarter turn of a `[C, H, W]` feature map.
pub fn rotation_filter(h: &Tensor, k: Rotation) -> Result<Tensor, ModelError> {
    match h.shape() {
        &[_, a, b] if a == b => Ok(Tensor::from_vec(h.shape(), quarter_turn_planes(h.data(), a, k))?),
        s => Err(ModelError::Tensor(TensorError::Shape {
            layer: "rotation_filter",
            detail: format!("expected a square [C, H, W] map, got {s:?}"),
        })),
    }
}

/// Generator output on the graph: softmax category and direction maps.
#[derive(Clone, Copy, Debug)]
pub struct GeneratorOutput {
    pub cat: NodeId,
    pub dir: NodeId,
}

/// Runs `g` on a batch of room images `[n, 3, R, R]` with per-sample rotations.
///
/// Every hidden layer is followed by a quarter turn of its activation by the
/// sample's rotation. The accumulated turn is undone before the output heads
/// so the layout is expressed in the room image's frame; the heads also see
/// the room image directly.
pub fn generator_forward(
    g: &mut Graph,
    p: &ParamNodes,
    cfg: &ModelConfig,
    room: NodeId,
    turns: &[Rotation],
) -> Result<GeneratorOutput, ModelError> {
    let r = cfg.resolution;
    let expect = [turns.len(), ROOM_CHANNELS, r, r];
    if g.shape(room) != expect {
        return Err(ModelError::Tensor(TensorError::Shape {
            layer: "generator",
            detail: format!("room input {:?}, expected {expect:?}", g.shape(room)),
        }));
    }
    let filters: Vec<Rotation> = if cfg.rotation_filters { turns.to_vec() } else { vec![Rotation::R0; turns.len()] };
    let cond = condition_node(g, turns, r)?;
    let mut h = g.concat_channels(&[room, cond])?;
    let hidden = cfg.hidden();
    for l in &hidden {
        let (w, b) = (p.get(&format!("{}.w", l.name))?, p.get(&format!("{}.b", l.name))?);
        h = match l.stage {
            Stage::Down => {
                let z = g.layer(LayerKind::Conv2d { stride: 2 }, &[h], &[w, b])?;
                g.layer(LayerKind::LeakyRelu, &[z], &[])?
            }
            Stage::Same => {
                let z = g.layer(LayerKind::Conv2d { stride: 1 }, &[h], &[w, b])?;
                g.layer(LayerKind::LeakyRelu, &[z], &[])?
            }
            Stage::Up => {
                let z = g.layer(LayerKind::TransposedConv2d, &[h], &[w, b])?;
                g.layer(LayerKind::Relu, &[z], &[])?
            }
        };
        h = g.quarter_turn(h, &filters)?;
    }
    let realign: Vec<Rotation> =
        filters.iter().map(|k| Rotation::new(((4 - (hidden.len() * k.quarter_turns()) % 4) % 4) as i64).expect("in range")).collect();
    if realign.iter().any(|k| *k != Rotation::R0) {
        h = g.quarter_turn(h, &realign)?;
    }
    let feat = g.concat_channels(&[h, room])?;
    let cat = g.layer(LayerKind::Conv2d { stride: 1 }, &[feat], &[p.get("g.cat.w")?, p.get("g.cat.b")?])?;
    let cat = g.layer(LayerKind::SoftmaxChannelwise, &[cat], &[])?;
    let dir = g.layer(LayerKind::Conv2d { stride: 1 }, &[feat], &[p.get("g.dir.w")?, p.get("g.dir.b")?])?;
    let dir = g.layer(LayerKind::SoftmaxChannelwise, &[dir], &[])?;
    Ok(GeneratorOutput { cat, dir })
}

/// Layout as the critics see it: categories, then directions gated by the
/// furniture probability `1 - p(empty)` so empty pixels carry no direction.
pub fn critic_layout(g: &mut Graph, out: GeneratorOutput) -> Result<NodeId, ModelError> {
    let furniture = g.complement(out.cat, 0)?;
    let dir = g.mul_mask(out.dir, furniture)?;
    Ok(g.concat_channels(&[out.cat, dir])?)
}

/// Probability `[n, 1]` that each sample is real.
///
/// `d1` expects `room` and the full layout; `d2` expects `room = None` and a
/// mode-masked layout.
pub fn discriminator_forward(
    g: &mut Graph,
    p: &ParamNodes,
    cfg: &ModelConfig,
    which: Critic,
    layout: NodeId,
    room: Option<NodeId>,
    turns: &[Rotation],
) -> Result<NodeId, ModelError> {
    let cond = condition_node(g, turns, cfg.resolution)?;
    let inputs = match (which, room) {
        (Critic::D1, Some(room)) => vec![room, layout, cond],
        (Critic::D2, None) => vec![layout, cond],
        _ => return Err(ModelError::Config(format!("{} got the wrong inputs", which.prefix()))),
    };
    let x = g.layer(LayerKind::ConcatChannels, &inputs, &[])?;
    if g.shape(x)[1] != cfg.critic_in(which) {
        return Err(ModelError::Tensor(TensorError::Shape {
            layer: which.prefix(),
            detail: format!("{} input channels, expected {}", g.shape(x)[1], cfg.critic_in(which)),
        }));
    }
    let pre = which.prefix();
    let mut h = x;
    for (i, stride) in [(1, 2), (2, 2)] {
        let (w, b) = (p.get(&format!("{pre}.c{i}.w"))?, p.get(&format!("{pre}.c{i}.b"))?);
        let z = g.layer(LayerKind::Conv2d { stride }, &[h], &[w, b])?;
        h = g.layer(LayerKind::LeakyRelu, &[z], &[])?;
    }
    let z = g.layer(LayerKind::Conv2d { stride: 1 }, &[h], &[p.get(&format!("{pre}.c3.w"))?, p.get(&format!("{pre}.c3.b"))?])?;
    let m = g.layer(LayerKind::GlobalMean, &[z], &[])?;
    Ok(g.layer(LayerKind::Sigmoid, &[m], &[])?)
}

/// Stacks room images into a `[n, 3, R, R]` graph constant.
pub fn room_batch(g: &mut Graph, rooms: &[&RoomImage]) -> Result<NodeId, ModelError> {
    let r = rooms.first().map(|x| x.resolution).unwrap_or(0);
    let mut data = Vec::with_capacity(rooms.len() * ROOM_CHANNELS * r * r);
    for x in rooms {
        if x.resolution != r {
            return Err(ModelError::Config("room images differ in resolution".into()));
        }
        data.extend_from_slice(&x.data);
    }
    Ok(g.constant(&[rooms.len(), ROOM_CHANNELS, r, r], data)?)
}

/// Runs the generator on one room outside of training.
pub fn generate(params: &ModelParams, cfg: &ModelConfig, room: &RoomImage, k: Rotation) -> Result<LayoutImage, ModelError> {
    let mut g = Graph::new();
    let p = ParamNodes::load(&mut g, &params.g, false);
    let x = room_batch(&mut g, &[room])?;
    let out = generator_forward(&mut g, &p, cfg, x, &[k])?;
    Ok(LayoutImage { resolution: cfg.resolution, cat: g.value(out.cat).to_vec(), dir: g.value(out.dir).to_vec() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ModelConfig {
        ModelConfig { resolution: 16, base_channels: 4, ..ModelConfig::default() }
    }

    fn room_image(r: usize, seed: u64) -> RoomImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = rand_distr::Uniform::new(0.0, 1.0).unwrap();
        RoomImage { resolution: r, data: (0..3 * r * r).map(|_| d.sample(&mut rng)).collect() }
    }

    #[test]
    fn condition_planes_are_one_hot() {
        let c = condition_encode(Rotation::R90, 4);
        assert!(c.data()[..16].iter().all(|v| *v == 0.0));
        assert!(c.data()[16..32].iter().all(|v| *v == 1.0));
        assert!(c.data()[32..].iter().all(|v| *v == 0.0));
        for k in Rotation::ALL {
            let c = condition_encode(k, 3);
            for px in 0..9 {
                assert_eq!((0..4).map(|ch| c.data()[ch * 9 + px]).sum::<f64>(), 1.0);
            }
        }
        assert_eq!(condition_encode(Rotation::R0, 2).data()[..4], [1.0; 4]);
    }

    #[test]
    fn rotation_filter_is_a_permutation() {
        let data: Vec<f64> = (0..2 * 5 * 5).map(|v| (v as f64 * 0.61).sin()).collect();
        let h = Tensor::from_vec(&[2, 5, 5], data).unwrap();
        assert_eq!(rotation_filter(&h, Rotation::R0).unwrap(), h);
        let once = rotation_filter(&h, Rotation::R90).unwrap();
        assert_eq!(rotation_filter(&once, Rotation::R90).unwrap(), rotation_filter(&h, Rotation::R180).unwrap());
        for k in Rotation::ALL {
            let r = rotation_filter(&h, k).unwrap();
            assert_eq!(rotation_filter(&r, k.inverse()).unwrap(), h);
            let mut a: Vec<f64> = r.data().to_vec();
            let mut b: Vec<f64> = h.data().to_vec();
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            assert_eq!(a, b);
        }
        assert!(rotation_filter(&Tensor::zeros(&[1, 4, 3]), Rotation::R90).is_err());
    }

    #[test]
    fn hidden_layer_plan() {
        let names: Vec<String> = small().hidden().into_iter().map(|l| l.name).collect();
        assert_eq!(names, ["g.enc1", "g.enc2", "g.mid1", "g.mid2", "g.dec1", "g.dec2"]);
        let two = ModelConfig { hidden_layers: 2, ..small() };
        assert_eq!(two.hidden().len(), 2);
        assert!(ModelConfig { hidden_layers: 1, ..small() }.validate().is_err());
        assert!(ModelConfig { resolution: 18, ..small() }.validate().is_err());
    }

    #[test]
    fn generator_outputs_are_distributions() {
        let cfg = small();
        let params = ModelParams::random(&cfg, 3).unwrap();
        let out = generate(&params, &cfg, &room_image(16, 1), Rotation::R270).unwrap();
        let n = 256;
        for px in 0..n {
            let s: f64 = (0..cfg.cat_channels()).map(|c| out.cat[c * n + px]).sum();
            assert!((s - 1.0).abs() < 1e-12);
            let s: f64 = (0..4).map(|c| out.dir[c * n + px]).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rotation_filters_are_live() {
        let cfg = small();
        let params = ModelParams::random(&cfg, 5).unwrap();
        let x = room_image(16, 2);
        let a = generate(&params, &cfg, &x, Rotation::R0).unwrap();
        let b = generate(&params, &cfg, &x, Rotation::R90).unwrap();
        let diff = a.cat.iter().zip(&b.cat).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        assert!(diff > 0.0);
        assert_eq!(generate(&params, &cfg, &x, Rotation::R90).unwrap(), b);
    }

    #[test]
    fn identity_filters_reduce_to_plain_network() {
        // With filters off the rotation only enters through the condition
        // planes; with filters on and k = 0 every filter is the identity.
        let on = small();
        let off = ModelConfig { rotation_filters: false, ..on };
        let params = ModelParams::random(&on, 7).unwrap();
        let x = room_image(16, 4);
        assert_eq!(generate(&params, &on, &x, Rotation::R0).unwrap(), generate(&params, &off, &x, Rotation::R0).unwrap());
    }

    #[test]
    fn zero_final_layer_gives_one_half() {
        let cfg = small();
        let mut params = ModelParams::init(&cfg, 1).unwrap();
        for t in ["d1.c3.w", "d1.c3.b"] {
            params.d1.get_mut(t).unwrap().data_mut().fill(0.0);
        }
        let mut g = Graph::new();
        let p = ParamNodes::load(&mut g, &params.d1, false);
        let room = room_batch(&mut g, &[&room_image(16, 9)]).unwrap();
        let lay = g.constant(&[1, cfg.layout_channels(), 16, 16], vec![0.3; cfg.layout_channels() * 256]).unwrap();
        let prob = discriminator_forward(&mut g, &p, &cfg, Critic::D1, lay, Some(room), &[Rotation::R90]).unwrap();
        assert_eq!(g.value(prob), &[0.5]);
    }

    #[test]
    fn checkpoint_round_trip_and_shape_check() {
        let cfg = small();
        let params = ModelParams::init(&cfg, 11).unwrap();
        let mut buf = Vec::new();
        params.save(&mut buf).unwrap();
        assert_eq!(ModelParams::load(buf.as_slice(), &cfg).unwrap(), params);
        let other = ModelConfig { base_channels: 8, ..cfg };
        assert!(ModelParams::load(buf.as_slice(), &other).is_err());
        assert!(params.g.get("g.enc1.w").is_some());
        assert!(params.d1.get("d1.c3.b").is_some());
    }

    #[test]
    fn init_is_seeded() {
        let cfg = small();
        assert_eq!(ModelParams::init(&cfg, 4).unwrap(), ModelParams::init(&cfg, 4).unwrap());
        assert_ne!(ModelParams::init(&cfg, 4).unwrap(), ModelParams::random(&cfg, 5).unwrap());
    }
}
