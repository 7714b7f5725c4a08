use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, Scalar, Tensor, Var};
use crate::error::Result;
use crate::nn::{Mlp, ParamStore};
use crate::rng::RngStream;
use crate::train::Adam;

/// `c·max(0, 1 − ¼(d − 1)²)`
pub fn style_reward(d: f64, c: f64) -> f64 {
    c * (1.0 - 0.25 * (d - 1.0) * (d - 1.0)).max(0.0)
}

/// Window classifier: scores near +1 for reference motion, −1 for policy
/// motion.
#[derive(Debug, Clone)]
pub struct Discriminator<F> {
    pub store: ParamStore<F>,
    net: Mlp,
}

#[derive(Debug, Clone, Copy)]
pub struct DiscLossNodes {
    pub total: Var,
    /// `mean((D_ref − 1)²) + mean((D_pol + 1)²)`
    pub prediction: Var,
    /// `mean(‖∇ₓ D(x_ref)‖₂)`
    pub penalty: Var,
    pub d_ref: Var,
    pub d_pol: Var,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DiscStats {
    pub loss: f64,
    pub prediction: f64,
    pub penalty: f64,
    pub mean_ref: f64,
    pub mean_policy: f64,
}

impl<F: Scalar> Discriminator<F> {
    pub fn new(input_dim: usize, hidden: &[usize], rng: &mut RngStream) -> Self {
        let mut store = ParamStore::new();
        let mut sizes = vec![input_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let net = Mlp::build(&mut store, "disc", &sizes, false, 1.0, rng);
        Self { store, net }
    }

    pub fn input_dim(&self) -> usize {
        self.net.input_dim(&self.store)
    }

    pub fn cast<G: Scalar>(&self) -> Discriminator<G> {
        Discriminator {
            store: self.store.cast(),
            net: self.net.clone(),
        }
    }

    /// Forward pass that also returns its weight nodes and hidden
    /// activations, which the input gradient needs.
    fn forward_traced(&self, g: &mut Graph<F>, x: Var) -> (Var, Vec<Var>, Vec<Var>) {
        let layers = self.net.layers();
        let mut weights = Vec::with_capacity(layers.len());
        let mut hidden = Vec::with_capacity(layers.len() - 1);
        let mut h = x;
        for (k, &(w, b)) in layers.iter().enumerate() {
            let wv = g.param(self.store.get(w).clone(), w);
            let bv = g.param(self.store.get(b).clone(), b);
            weights.push(wv);
            let z = g.matmul(h, wv);
            h = g.add_row(z, bv);
            if k + 1 < layers.len() {
                h = g.tanh(h);
                hidden.push(h);
            }
        }
        (h, weights, hidden)
    }

    pub fn forward_graph(&self, g: &mut Graph<F>, x: Var) -> Var {
        self.forward_traced(g, x).0
    }

    /// Scores, one per row.
    pub fn score(&self, windows: &Tensor<F>) -> Result<Vec<f64>> {
        let mut g = Graph::new();
        let x = g.constant(windows.clone());
        let d = self.forward_graph(&mut g, x);
        g.check()?;
        Ok(g.value(d).iter().map(|&v| Scalar::to_f64(v)).collect())
    }

    pub fn style_rewards(&self, windows: &Tensor<F>, c: f64) -> Result<Vec<f64>> {
        Ok(self.score(windows)?.into_iter().map(|d| style_reward(d, c)).collect())
    }
}

/// Least-squares discriminator loss with an input-gradient penalty on the
/// reference windows. The penalty is the unsquared norm, floored at 1e-12
/// inside the square root so it stays differentiable at zero.
pub fn build_disc_loss<F: Scalar>(
    g: &mut Graph<F>,
    disc: &Discriminator<F>,
    reference: &Tensor<F>,
    policy: &Tensor<F>,
    penalty_weight: f64,
) -> DiscLossNodes {
    let xr = g.constant(reference.clone());
    let (d_ref, weights, hidden) = disc.forward_traced(g, xr);
    let xp = g.constant(policy.clone());
    let d_pol = disc.forward_graph(g, xp);

    let one = F::one();
    let ref_err = g.affine(d_ref, one, -one);
    let ref_sq = g.square(ref_err);
    let ref_term = g.mean(ref_sq);
    let pol_err = g.affine(d_pol, one, one);
    let pol_sq = g.square(pol_err);
    let pol_term = g.mean(pol_sq);
    let prediction = g.add(ref_term, pol_term);

    // ∂D/∂x, propagated by hand through the tanh layers so it stays a
    // differentiable function of the weights
    let ones = g.constant(Array2::ones((reference.nrows(), 1)));
    let last = weights.len() - 1;
    let mut grad = g.matmul_t(ones, weights[last]);
    for k in (0..last).rev() {
        let sq = g.square(hidden[k]);
        let deriv = g.affine(sq, -one, one);
        let gated = g.mul(grad, deriv);
        grad = g.matmul_t(gated, weights[k]);
    }
    let grad_sq = g.square(grad);
    let norm_sq = g.sum_cols(grad_sq);
    let floored = g.affine(norm_sq, one, <F as Scalar>::from_f64(1e-12));
    let norm = g.sqrt(floored);
    let penalty = g.mean(norm);

    let weighted = g.scale(penalty, <F as Scalar>::from_f64(0.5 * penalty_weight));
    let total = g.add(prediction, weighted);
    DiscLossNodes {
        total,
        prediction,
        penalty,
        d_ref,
        d_pol,
    }
}

impl Discriminator<f32> {
    /// One optimizer step on equal-sized reference and policy batches.
    pub fn update(
        &mut self,
        optimizer: &mut Adam,
        reference: &Tensor<f32>,
        policy: &Tensor<f32>,
        penalty_weight: f64,
    ) -> Result<DiscStats> {
        let mut g = Graph::new();
        let nodes = build_disc_loss(&mut g, self, reference, policy, penalty_weight);
        let grads = g.backward(nodes.total)?;
        let grads = self.store.collect_grads(&grads);
        optimizer.apply(self.store.tensors_mut(), &grads);
        let mean = |v: Var| g.value(v).iter().map(|&x| x as f64).sum::<f64>() / g.value(v).len() as f64;
        Ok(DiscStats {
            loss: g.scalar(nodes.total) as f64,
            prediction: g.scalar(nodes.prediction) as f64,
            penalty: g.scalar(nodes.penalty) as f64,
            mean_ref: mean(nodes.d_ref),
            mean_policy: mean(nodes.d_pol),
        })
    }
}
