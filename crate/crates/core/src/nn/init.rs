use ndarray::Array2;

use crate::autodiff::Scalar;
use crate::rng::RngStream;

/// `rows × cols` matrix with orthonormal columns (or rows, whichever is
/// shorter) scaled by `gain`, via Gram–Schmidt on a Gaussian draw.
pub fn orthogonal<F: Scalar>(rows: usize, cols: usize, gain: f64, rng: &mut RngStream) -> Array2<F> {
    let (long, short) = if rows >= cols { (rows, cols) } else { (cols, rows) };
    // `short` orthonormal vectors of length `long`
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(short);
    while basis.len() < short {
        let mut v: Vec<f64> = (0..long).map(|_| rng.normal()).collect();
        for b in &basis {
            let d: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= d * y);
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n < 1e-8 {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= n);
        basis.push(v);
    }
    Array2::from_shape_fn((rows, cols), |(r, c)| {
        let v = if rows >= cols { basis[c][r] } else { basis[r][c] };
        <F as Scalar>::from_f64(gain * v)
    })
}
