use ndarray::Array2;

use super::{orthogonal, ParamStore};
use crate::autodiff::{Graph, Scalar, Var};
use crate::rng::RngStream;

/// Fully connected tanh network whose weights live in a [`ParamStore`].
///
/// Weights are stored `in × out` so a layer computes `x·W + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<(usize, usize)>,
    activate_output: bool,
}

impl Mlp {
    /// Registers `prefix.{k}.weight` / `prefix.{k}.bias` for each layer.
    /// The last layer's weights are scaled by `output_gain`.
    pub fn build<F: Scalar>(
        store: &mut ParamStore<F>,
        prefix: &str,
        sizes: &[usize],
        activate_output: bool,
        output_gain: f64,
        rng: &mut RngStream,
    ) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs input and output sizes");
        let n = sizes.len() - 1;
        let layers = (0..n)
            .map(|k| {
                let gain = if k + 1 == n { output_gain } else { 1.0 };
                let w = store.insert(
                    format!("{prefix}.{k}.weight"),
                    orthogonal(sizes[k], sizes[k + 1], gain, rng),
                );
                let b = store.insert(format!("{prefix}.{k}.bias"), Array2::zeros((1, sizes[k + 1])));
                (w, b)
            })
            .collect();
        Self {
            layers,
            activate_output,
        }
    }

    /// Re-binds an MLP to parameters already present in `store`.
    pub fn attach<F: Scalar>(store: &ParamStore<F>, prefix: &str, activate_output: bool) -> Option<Self> {
        let mut layers = Vec::new();
        for k in 0.. {
            let (Some(w), Some(b)) = (
                store.lookup(&format!("{prefix}.{k}.weight")),
                store.lookup(&format!("{prefix}.{k}.bias")),
            ) else {
                break;
            };
            layers.push((w, b));
        }
        (!layers.is_empty()).then_some(Self {
            layers,
            activate_output,
        })
    }

    pub fn input_dim<F: Scalar>(&self, store: &ParamStore<F>) -> usize {
        store.get(self.layers[0].0).nrows()
    }

    pub fn output_dim<F: Scalar>(&self, store: &ParamStore<F>) -> usize {
        store.get(self.layers.last().expect("non-empty").0).ncols()
    }

    /// `(weight, bias)` slots, input layer first.
    pub fn layers(&self) -> &[(usize, usize)] {
        &self.layers
    }

    /// Parameter slots used by this network.
    pub fn param_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.layers.iter().flat_map(|&(w, b)| [w, b])
    }

    pub fn forward<F: Scalar>(&self, g: &mut Graph<F>, store: &ParamStore<F>, input: Var) -> Var {
        let mut x = input;
        let n = self.layers.len();
        for (k, &(w, b)) in self.layers.iter().enumerate() {
            let wv = g.param(store.get(w).clone(), w);
            let bv = g.param(store.get(b).clone(), b);
            let h = g.matmul(x, wv);
            x = g.add_row(h, bv);
            if k + 1 < n || self.activate_output {
                x = g.tanh(x);
            }
        }
        x
    }
}
