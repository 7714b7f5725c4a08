//! Reverse-mode automatic differentiation over 2-D tensors.
//!
//! A [`Graph`] records every operation eagerly. [`Graph::backward`] walks the
//! record in reverse and returns gradients for every node that depends on a
//! parameter leaf. Ops are shape-checked by ndarray; the first operation that
//! produces a NaN or infinity poisons the graph and is reported by name.

mod graph;

pub use graph::{Gradients, Graph, Var};

use std::fmt::Debug;

use ndarray::{Array2, LinalgScalar};
use num_traits::{Float, FromPrimitive};

/// Floating-point element type usable in graphs (`f32` for training, `f64`
/// for gradient checks).
pub trait Scalar:
    LinalgScalar + Float + FromPrimitive + Debug + Send + Sync + Default + 'static
{
    fn from_f64(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("finite conversion")
    }

    fn to_f64(self) -> f64;

    /// Activation used by [`Graph::tanh`].
    fn tanh_act(self) -> Self {
        self.tanh()
    }
}

impl Scalar for f32 {
    fn to_f64(self) -> f64 {
        self as f64
    }

    #[inline]
    fn tanh_act(self) -> Self {
        fast_tanh(self)
    }
}

/// Rational minimax approximation of `tanh` on `f32`, accurate to a few
/// ulp and branch-free so it vectorizes. Several times faster than the libm
/// call, which otherwise dominates training time.
#[inline]
#[allow(clippy::excessive_precision, clippy::manual_clamp)]
pub fn fast_tanh(x: f32) -> f32 {
    const CLAMP: f32 = 7.905_311;
    const A: [f32; 7] = [
        4.893_524_6e-3,
        6.372_619_3e-4,
        1.485_722_4e-5,
        5.122_297e-8,
        -8.604_671_5e-11,
        2.000_187_9e-13,
        -2.760_768_5e-16,
    ];
    const B: [f32; 4] = [4.893_525_2e-3, 2.268_434_6e-3, 1.185_347_1e-4, 1.198_258_4e-6];
    // max/min instead of clamp: no assert, and it vectorizes
    let x = x.max(-CLAMP).min(CLAMP);
    let x2 = x * x;
    let mut p = A[6];
    for &a in A[..6].iter().rev() {
        p = p * x2 + a;
    }
    let p = p * x;
    let q = ((B[3] * x2 + B[2]) * x2 + B[1]) * x2 + B[0];
    p / q
}

impl Scalar for f64 {
    fn to_f64(self) -> f64 {
        self
    }
}

/// Row-major 2-D tensor.
pub type Tensor<F> = Array2<F>;

/// Converts a tensor between element types.
pub fn cast<A: Scalar, B: Scalar>(t: &Tensor<A>) -> Tensor<B> {
    t.mapv(|v| <B as Scalar>::from_f64(v.to_f64()))
}
