use super::ParamStore;
use crate::autodiff::Tensor;
use crate::rng::RngStream;

/// Outcome of comparing analytic gradients with central differences.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub checked: usize,
    pub max_rel_err: f64,
    /// Parameter name and flat offset of the worst coordinate.
    pub worst: Option<(String, usize)>,
}

/// Denominator floor for the relative error, so coordinates whose true
/// gradient is zero are judged by an absolute error of about this size.
pub const REL_ERR_FLOOR: f64 = 1e-6;

/// `|a − n| / max(|a| + |n|, REL_ERR_FLOOR)`
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(REL_ERR_FLOOR)
}

/// Compares `analytic` against `(loss(θ + h) − loss(θ − h)) / 2h` on up to
/// `samples` distinct coordinates drawn uniformly from the whole store.
pub fn check_gradients(
    store: &ParamStore<f64>,
    analytic: &[Tensor<f64>],
    loss: impl Fn(&ParamStore<f64>) -> f64,
    samples: usize,
    h: f64,
    rng: &mut RngStream,
) -> GradCheck {
    let all: Vec<usize> = (0..store.len()).collect();
    check_gradients_in(store, &all, analytic, loss, samples, h, rng)
}

/// [`check_gradients`] restricted to the parameter slots in `slots`.
pub fn check_gradients_in(
    store: &ParamStore<f64>,
    slots: &[usize],
    analytic: &[Tensor<f64>],
    loss: impl Fn(&ParamStore<f64>) -> f64,
    samples: usize,
    h: f64,
    rng: &mut RngStream,
) -> GradCheck {
    let mut coords: Vec<(usize, usize)> = slots
        .iter()
        .flat_map(|&i| (0..store.get(i).len()).map(move |j| (i, j)))
        .collect();
    rng.shuffle(&mut coords);
    coords.truncate(samples);
    let mut probe = store.clone();
    let mut out = GradCheck {
        checked: 0,
        max_rel_err: 0.0,
        worst: None,
    };
    for (i, j) in coords {
        let orig = probe.get(i).as_slice().expect("standard layout")[j];
        probe.get_mut(i).as_slice_mut().expect("standard layout")[j] = orig + h;
        let up = loss(&probe);
        probe.get_mut(i).as_slice_mut().expect("standard layout")[j] = orig - h;
        let down = loss(&probe);
        probe.get_mut(i).as_slice_mut().expect("standard layout")[j] = orig;
        let numeric = (up - down) / (2.0 * h);
        let a = analytic[i].as_slice().expect("standard layout")[j];
        let err = relative_error(a, numeric);
        out.checked += 1;
        if err > out.max_rel_err || out.worst.is_none() {
            out.max_rel_err = out.max_rel_err.max(err);
            out.worst = Some((store.name(i).to_string(), j));
        }
    }
    out
}

/// Adds `N(0, scale²)` noise to every parameter so checks do not sit on a
/// degenerate initialization (zero biases, tiny output layers).
pub fn jitter(store: &mut ParamStore<f64>, scale: f64, rng: &mut RngStream) {
    for t in store.tensors_mut() {
        t.mapv_inplace(|v| v + scale * rng.normal());
    }
}
