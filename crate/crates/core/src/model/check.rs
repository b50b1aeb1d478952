//! Finite-difference checks of every layer and of the three networks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::layout::Rotation;
use crate::tensor::{gradient_check_clear_of_kinks, GradCheckReport, Graph, LayerKind, NodeId, Tensor, TensorError, GRADCHECK_STEP};

use super::{
    critic_layout, discriminator_forward, generator_forward, Critic, ModelConfig, ModelError, ModelParams, ParamNodes, DIR_CHANNELS,
    ROOM_CHANNELS,
};

/// Largest acceptable relative error.
pub const GRADCHECK_TOL: f64 = 1e-6;

/// Smallest relu input magnitude a check may run at. Closer than this and
/// a perturbation of one step can cross the kink, which makes the central
/// difference meaningless rather than inaccurate.
pub const KINK_MARGIN_MIN: f64 = 10.0 * GRADCHECK_STEP;

/// Redraws allowed while looking for a point clear of every kink.
pub const MAX_REDRAWS: u64 = 200;

#[derive(Clone, Debug, PartialEq)]
pub struct LayerCheck {
    pub name: String,
    pub report: GradCheckReport,
    /// Redraws spent reaching the kink margin; 0 when the first point did.
    pub redraws: u64,
}

impl LayerCheck {
    pub fn passed(&self) -> bool {
        self.report.max_rel_error < GRADCHECK_TOL && self.report.kink_margin >= KINK_MARGIN_MIN
    }
}

fn uniform(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.random_range(lo..hi)).collect()).expect("sizes agree")
}

fn weights(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn one_hot(rng: &mut ChaCha8Rng, n: usize, c: usize, plane: usize) -> Vec<f64> {
    let mut t = vec![0.0; n * c * plane];
    for s in 0..n {
        for p in 0..plane {
            t[(s * c + rng.random_range(0..c)) * plane + p] = 1.0;
        }
    }
    t
}

fn turns(rng: &mut ChaCha8Rng, n: usize) -> Vec<Rotation> {
    (0..n).map(|_| Rotation::ALL[rng.random_range(0..4)]).collect()
}

/// Retries `build` on fresh draws until the point clears [`KINK_MARGIN_MIN`].
fn with_margin<F>(name: &str, seed: u64, build: F) -> Result<LayerCheck, ModelError>
where
    F: Fn(&mut ChaCha8Rng) -> Result<Option<GradCheckReport>, ModelError>,
{
    for redraws in 0..MAX_REDRAWS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(redraws);
        if let Some(report) = build(&mut rng)? {
            return Ok(LayerCheck { name: name.to_string(), report, redraws });
        }
    }
    Err(ModelError::Config(format!("{name}: no draw cleared the kink margin in {MAX_REDRAWS} tries")))
}

/// Checks one graph layer on random inputs, parameters included, through a
/// random linear read-out of its output.
fn check_layer(name: &str, seed: u64, kind: LayerKind, shapes: &[&[usize]], n_inputs: usize) -> Result<LayerCheck, ModelError> {
    with_margin(name, seed, |rng| {
        let ts: Vec<Tensor> = shapes.iter().map(|s| uniform(rng, s, -1.0, 1.0)).collect();
        let probe = rng.random::<u64>();
        gradient_check_clear_of_kinks(&ts, GRADCHECK_STEP, KINK_MARGIN_MIN, &[], |g, ids| -> Result<NodeId, ModelError> {
            let y = g.layer(kind, &ids[..n_inputs], &ids[n_inputs..])?;
            let n = g.value(y).len();
            Ok(g.dot(y, weights(&mut ChaCha8Rng::seed_from_u64(probe), n))?)
        })
    })
}

/// Checks a graph op built by `op` from leaf inputs of the given shapes.
fn check_op<F>(name: &str, seed: u64, shapes: &[&[usize]], range: (f64, f64), op: F) -> Result<LayerCheck, ModelError>
where
    F: Fn(&mut Graph, &[NodeId], &mut ChaCha8Rng) -> Result<NodeId, TensorError>,
{
    with_margin(name, seed, |rng| {
        let ts: Vec<Tensor> = shapes.iter().map(|s| uniform(rng, s, range.0, range.1)).collect();
        let aux = rng.random::<u64>();
        gradient_check_clear_of_kinks(&ts, GRADCHECK_STEP, KINK_MARGIN_MIN, &[], |g, ids| -> Result<NodeId, ModelError> {
            Ok(op(g, ids, &mut ChaCha8Rng::seed_from_u64(aux))?)
        })
    })
}

/// Every primitive layer and loss on small random tensors.
pub fn layer_checks(seed: u64) -> Result<Vec<LayerCheck>, ModelError> {
    let x: &[usize] = &[2, 3, 5, 5];
    let sq: &[usize] = &[2, 3, 4, 4];
    let dot = |g: &mut Graph, y: NodeId, rng: &mut ChaCha8Rng| {
        let n = g.value(y).len();
        g.dot(y, weights(rng, n))
    };
    let mut out = vec![
        check_layer("conv2d_s1", seed, LayerKind::Conv2d { stride: 1 }, &[x, &[4, 3, 3, 3], &[4]], 1)?,
        check_layer("conv2d_s2", seed, LayerKind::Conv2d { stride: 2 }, &[x, &[4, 3, 3, 3], &[4]], 1)?,
        check_layer("transposed_conv2d", seed, LayerKind::TransposedConv2d, &[&[2, 3, 3, 4], &[3, 2, 4, 4], &[2]], 1)?,
        check_layer("leaky_relu", seed, LayerKind::LeakyRelu, &[x], 1)?,
        check_layer("relu", seed, LayerKind::Relu, &[x], 1)?,
        check_layer("sigmoid", seed, LayerKind::Sigmoid, &[x], 1)?,
        check_layer("softmax_channelwise", seed, LayerKind::SoftmaxChannelwise, &[x], 1)?,
        check_layer("concat_channels", seed, LayerKind::ConcatChannels, &[x, &[2, 2, 5, 5]], 2)?,
        check_layer("global_mean", seed, LayerKind::GlobalMean, &[x], 1)?,
    ];
    out.push(check_op("rotation_filter", seed, &[sq], (-1.0, 1.0), |g, ids, rng| {
        let y = g.quarter_turn(ids[0], &turns(rng, 2))?;
        dot(g, y, rng)
    })?);
    out.push(check_op("mul_mask", seed, &[sq, &[2, 1, 4, 4]], (-1.0, 1.0), |g, ids, rng| {
        let y = g.mul_mask(ids[0], ids[1])?;
        dot(g, y, rng)
    })?);
    out.push(check_op("complement", seed, &[sq], (0.0, 1.0), |g, ids, rng| {
        let y = g.complement(ids[0], 1)?;
        dot(g, y, rng)
    })?);
    out.push(check_op("cross_entropy", seed, &[sq], (0.05, 1.0), |g, ids, rng| {
        let target = one_hot(rng, 2, 3, 16);
        let weight: Vec<f64> = (0..32).map(|_| rng.random_range(0.0..1.0)).collect();
        g.cross_entropy(ids[0], target, weight, 7.0)
    })?);
    for label in [0.0, 1.0] {
        let name = format!("bce_label{label}");
        out.push(check_op(&name, seed, &[&[3, 1]], (0.05, 0.95), move |g, ids, _| g.bce(ids[0], label))?);
    }
    Ok(out)
}

/// Batch size of the network checks.
const CHECK_BATCH: usize = 2;

/// Coordinates differenced per tensor by default in [`network_checks`].
pub const NETWORK_COORDS_PER_TENSOR: usize = 256;

/// Seeded choice of at most `limit` coordinates of every tensor.
fn pick_coords(rng: &mut ChaCha8Rng, ts: &[Tensor], limit: Option<usize>) -> Vec<Option<Vec<usize>>> {
    ts.iter()
        .map(|t| match limit {
            Some(k) if k < t.len() => {
                let mut v = rand::seq::index::sample(rng, t.len(), k).into_vec();
                v.sort_unstable();
                Some(v)
            }
            _ => None,
        })
        .collect()
}

/// The generator, `d1` and `d2` end to end at `cfg`, parameters and
/// inputs initialised from `seed`.
///
/// Every parameter and input tensor is differenced at up to
/// `coords_per_tensor` seeded coordinates, or at all of them with `None`.
pub fn network_checks(cfg: &ModelConfig, seed: u64, coords_per_tensor: Option<usize>) -> Result<Vec<LayerCheck>, ModelError> {
    cfg.validate()?;
    let params = ModelParams::random(cfg, seed)?;
    let r = cfg.resolution;
    let n = CHECK_BATCH;
    let plane = r * r;
    let mut out = Vec::new();

    let names: Vec<String> = params.g.names().map(str::to_string).collect();
    let g_tensors: Vec<Tensor> = params.g.iter().map(|(_, t)| t.clone()).collect();
    out.push(with_margin("generator", seed, |rng| {
        let room = uniform(rng, &[n, ROOM_CHANNELS, r, r], 0.0, 1.0);
        let ks = turns(rng, n);
        let cat_t = one_hot(rng, n, cfg.cat_channels(), plane);
        let dir_t = one_hot(rng, n, DIR_CHANNELS, plane);
        let wgt: Vec<f64> = (0..n * plane).map(|_| rng.random_range(0.0..1.0)).collect();
        let probe = weights(rng, n * cfg.layout_channels() * plane);
        let mut ts = g_tensors.clone();
        ts.push(room);
        let subset = pick_coords(rng, &ts, coords_per_tensor);
        gradient_check_clear_of_kinks(&ts, GRADCHECK_STEP, KINK_MARGIN_MIN, &subset, |g, ids| -> Result<NodeId, ModelError> {
            let p = ParamNodes::from_ids(names.iter().cloned().zip(ids.iter().copied()).collect());
            let out = generator_forward(g, &p, cfg, ids[names.len()], &ks)?;
            let ce_cat = g.cross_entropy(out.cat, cat_t.clone(), vec![1.0; n * plane], (n * plane) as f64)?;
            let ce_dir = g.cross_entropy(out.dir, dir_t.clone(), wgt.clone(), (n * plane) as f64)?;
            let lay = critic_layout(g, out)?;
            let adv = g.dot(lay, probe.clone())?;
            Ok(g.combine(&[(ce_cat, 1.0), (ce_dir, 1.0), (adv, 0.1)])?)
        })
    })?);

    for which in [Critic::D1, Critic::D2] {
        let set = params.critic(which);
        let names: Vec<String> = set.names().map(str::to_string).collect();
        let tensors: Vec<Tensor> = set.iter().map(|(_, t)| t.clone()).collect();
        out.push(with_margin(which.prefix(), seed, |rng| {
            let layout = uniform(rng, &[n, cfg.layout_channels(), r, r], 0.0, 1.0);
            let room = uniform(rng, &[n, ROOM_CHANNELS, r, r], 0.0, 1.0);
            let ks = turns(rng, n);
            let label = if rng.random::<bool>() { 1.0 } else { 0.0 };
            let mut ts = tensors.clone();
            ts.push(layout);
            if which == Critic::D1 {
                ts.push(room);
            }
            let subset = pick_coords(rng, &ts, coords_per_tensor);
            gradient_check_clear_of_kinks(&ts, GRADCHECK_STEP, KINK_MARGIN_MIN, &subset, |g, ids| -> Result<NodeId, ModelError> {
                let p = ParamNodes::from_ids(names.iter().cloned().zip(ids.iter().copied()).collect());
                let room = (which == Critic::D1).then(|| ids[names.len() + 1]);
                let prob = discriminator_forward(g, &p, cfg, which, ids[names.len()], room, &ks)?;
                Ok(g.bce(prob, label)?)
            })
        })?);
    }
    Ok(out)
}
