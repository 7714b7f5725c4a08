//! Networks: parameter storage, MLP blocks, Beta routing and the
//! preference-conditioned actor/critic.

mod gaussian;
pub mod gradcheck;
mod init;
mod mlp;
mod normalize;
mod policy;
mod routing;

pub use gaussian::{gaussian_entropy, gaussian_log_prob, log_prob_graph, ActionDistribution};
pub use init::orthogonal;
pub use mlp::Mlp;
pub use normalize::RunningStats;
pub use policy::{ActorNodes, CriticHead, NetworkConfig, PolicyParams, RoutingMode};
pub use routing::{beta_routing_weights, BetaRouting, EXPERT_COUNT};

use std::collections::HashMap;

use ndarray::Array2;

use crate::autodiff::{cast, Gradients, Scalar, Tensor};
use crate::error::{Error, Result};

/// Flat, named collection of trainable tensors.
#[derive(Debug, Clone, Default)]
pub struct ParamStore<F> {
    names: Vec<String>,
    tensors: Vec<Tensor<F>>,
    index: HashMap<String, usize>,
}

impl<F: Scalar> ParamStore<F> {
    pub fn new() -> Self {
        Self {
            names: Vec::new(),
            tensors: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor<F>) -> usize {
        let name = name.into();
        assert!(!self.index.contains_key(&name), "duplicate parameter {name}");
        self.index.insert(name.clone(), self.tensors.len());
        self.names.push(name);
        self.tensors.push(tensor);
        self.tensors.len() - 1
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn get(&self, i: usize) -> &Tensor<F> {
        &self.tensors[i]
    }

    pub fn get_mut(&mut self, i: usize) -> &mut Tensor<F> {
        &mut self.tensors[i]
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn lookup(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<F>)> {
        self.names.iter().map(String::as_str).zip(self.tensors.iter())
    }

    pub fn tensors(&self) -> &[Tensor<F>] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor<F>] {
        &mut self.tensors
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(|t| t.len()).sum()
    }

    /// Zeroed tensors with the same shapes.
    pub fn zeros_like(&self) -> Vec<Tensor<F>> {
        self.tensors.iter().map(|t| Array2::zeros(t.dim())).collect()
    }

    /// Replaces the tensor `name`, checking its shape.
    pub fn set(&mut self, name: &str, tensor: Tensor<F>) -> Result<()> {
        let i = self
            .lookup(name)
            .ok_or_else(|| Error::Checkpoint(format!("unknown tensor `{name}`")))?;
        if self.tensors[i].dim() != tensor.dim() {
            return Err(Error::ShapeMismatch {
                op: "ParamStore::set",
                expected: format!("{:?}", self.tensors[i].dim()),
                actual: format!("{:?}", tensor.dim()),
            });
        }
        self.tensors[i] = tensor;
        Ok(())
    }

    /// Sums the per-binding gradients in `grads` into one tensor per slot.
    pub fn collect_grads(&self, grads: &Gradients<F>) -> Vec<Tensor<F>> {
        let mut out = self.zeros_like();
        for (i, g) in grads.params() {
            if let Some(g) = g {
                out[i].zip_mut_with(g, |x, &y| *x = *x + y);
            }
        }
        out
    }

    pub fn cast<G: Scalar>(&self) -> ParamStore<G> {
        ParamStore {
            names: self.names.clone(),
            tensors: self.tensors.iter().map(cast).collect(),
            index: self.index.clone(),
        }
    }
}
