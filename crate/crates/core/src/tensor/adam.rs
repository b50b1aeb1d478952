use std::collections::BTreeMap;

use super::{ParamSet, TensorError};

/// Adam with bias correction; moments are keyed by parameter name.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    pub m: BTreeMap<String, Vec<f64>>,
    pub v: BTreeMap<String, Vec<f64>>,
}

impl AdamState {
    pub fn new(lr: f64) -> Self {
        AdamState { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, step: 0, m: BTreeMap::new(), v: BTreeMap::new() }
    }
}

/// Applies one update to every parameter that carries a gradient.
pub fn adam_step(state: &mut AdamState, params: &mut ParamSet) -> Result<(), TensorError> {
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - state.beta1.powi(t);
    let c2 = 1.0 - state.beta2.powi(t);
    for (name, p) in params.iter_mut() {
        let Some(g) = p.grad() else { continue };
        if g.len() != p.len() {
            return Err(TensorError::Shape { layer: "adam", detail: format!("{name}: gradient length mismatch") });
        }
        let g = g.to_vec();
        let m = state.m.entry(name.to_string()).or_insert_with(|| vec![0.0; g.len()]);
        let v = state.v.entry(name.to_string()).or_insert_with(|| vec![0.0; g.len()]);
        if m.len() != g.len() || v.len() != g.len() {
            return Err(TensorError::Shape { layer: "adam", detail: format!("{name}: moment shape mismatch") });
        }
        for (i, w) in p.data_mut().iter_mut().enumerate() {
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
            let mh = m[i] / c1;
            let vh = v[i] / c2;
            *w -= state.lr * mh / (vh.sqrt() + state.eps);
        }
    }
    Ok(())
}
