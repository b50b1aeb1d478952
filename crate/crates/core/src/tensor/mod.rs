//! A deliberately small dense tensor engine: 64-bit reals, NCHW layout, a
//! fixed set of layers with hand-written gradients, Adam, a central
//! difference gradient checker and a binary checkpoint format.

mod adam;
mod checkpoint;
mod gradcheck;
mod graph;
mod kernels;

pub use adam::{adam_step, AdamState};
pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use gradcheck::{gradient_check, gradient_check_clear_of_kinks, GradCheckReport, GRADCHECK_STEP};
pub use graph::{Graph, LayerKind, NodeId, LEAKY_SLOPE, PROB_FLOOR};
pub use kernels::quarter_turn_planes;

use std::collections::BTreeMap;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("{layer}: shape mismatch: {detail}")]
    Shape { layer: &'static str, detail: String },
    #[error("backward needs a scalar loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("checkpoint i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// Dense row-major array with an optional gradient buffer.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
    grad: Option<Vec<f64>>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        Tensor { shape: shape.to_vec(), data: vec![0.0; shape.iter().product()], grad: None }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self, TensorError> {
        let expect: usize = shape.iter().product();
        if expect != data.len() {
            return Err(TensorError::Shape {
                layer: "tensor",
                detail: format!("shape {shape:?} needs {expect} values, got {}", data.len()),
            });
        }
        Ok(Tensor { shape: shape.to_vec(), data, grad: None })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn grad(&self) -> Option<&[f64]> {
        self.grad.as_deref()
    }

    pub fn set_grad(&mut self, grad: Vec<f64>) -> Result<(), TensorError> {
        if grad.len() != self.data.len() {
            return Err(TensorError::Shape {
                layer: "tensor",
                detail: format!("gradient of length {} for shape {:?}", grad.len(), self.shape),
            });
        }
        self.grad = Some(grad);
        Ok(())
    }

    pub fn zero_grad(&mut self) {
        self.grad = None;
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Named parameters, iterated in name order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamSet {
    tensors: BTreeMap<String, Tensor>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, t: Tensor) {
        self.tensors.insert(name.into(), t);
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.tensors.get_mut(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.tensors.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor)> {
        self.tensors.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn zero_grads(&mut self) {
        for t in self.tensors.values_mut() {
            t.zero_grad();
        }
    }

    pub fn num_values(&self) -> usize {
        self.tensors.values().map(Tensor::len).sum()
    }
}

/// Runs one layer outside of any training graph.
pub fn forward(layer: LayerKind, inputs: &[&Tensor], params: &[&Tensor]) -> Result<Tensor, TensorError> {
    let mut g = Graph::new();
    let xs: Vec<NodeId> = inputs.iter().map(|t| g.input(t, false)).collect();
    let ps: Vec<NodeId> = params.iter().map(|t| g.input(t, false)).collect();
    let y = g.layer(layer, &xs, &ps)?;
    Ok(g.to_tensor(y))
}
