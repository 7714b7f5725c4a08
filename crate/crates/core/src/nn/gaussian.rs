use std::f64::consts::{E, PI};

use crate::autodiff::{Graph, Scalar, Tensor, Var};

/// Diagonal Gaussian over actions, one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionDistribution<F> {
    pub mean: Tensor<F>,
    /// `exp(log_std)`, shared by every row.
    pub std: Vec<F>,
}

impl<F: Scalar> ActionDistribution<F> {
    pub fn log_prob_row(&self, row: usize, action: &[f64]) -> f64 {
        let mean: Vec<f64> = self.mean.row(row).iter().map(|&v| Scalar::to_f64(v)).collect();
        let std: Vec<f64> = self.std.iter().map(|&v| Scalar::to_f64(v)).collect();
        gaussian_log_prob(&mean, &std, action)
    }

    pub fn entropy(&self) -> f64 {
        let std: Vec<f64> = self.std.iter().map(|&v| Scalar::to_f64(v)).collect();
        gaussian_entropy(&std)
    }
}

/// Log density of a diagonal Gaussian.
pub fn gaussian_log_prob(mean: &[f64], std: &[f64], action: &[f64]) -> f64 {
    assert_eq!(mean.len(), action.len());
    assert_eq!(std.len(), action.len());
    mean.iter()
        .zip(std)
        .zip(action)
        .map(|((m, s), a)| {
            let z = (a - m) / s;
            -0.5 * z * z - s.ln() - 0.5 * (2.0 * PI).ln()
        })
        .sum()
}

pub fn gaussian_entropy(std: &[f64]) -> f64 {
    std.iter().map(|s| 0.5 * (2.0 * PI * E).ln() + s.ln()).sum()
}

/// Per-row log density as a graph node (`n × 1`) from `mean` (`n × d`),
/// `log_std` (`1 × d`) and constant `actions` (`n × d`).
pub fn log_prob_graph<F: Scalar>(g: &mut Graph<F>, mean: Var, log_std: Var, actions: Var) -> Var {
    let d = g.value(log_std).ncols();
    let diff = g.sub(actions, mean);
    let neg_log_std = g.neg(log_std);
    let inv_std = g.exp(neg_log_std);
    let z = g.mul_row(diff, inv_std);
    let z2 = g.square(z);
    let quad = g.sum_cols(z2);
    let c = -0.5 * d as f64 * (2.0 * PI).ln();
    let scaled = g.affine(quad, <F as Scalar>::from_f64(-0.5), <F as Scalar>::from_f64(c));
    let log_std_total = g.sum_cols(log_std);
    let neg_total = g.neg(log_std_total);
    g.add_row(scaled, neg_total)
}
