//! Preference vectors on the two-objective simplex and objective-space points.

use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;

const SIMPLEX_TOL: f64 = 1e-9;

/// Weights `[λ1, λ2]` with `λi ≥ 0` and `λ1 + λ2 = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct PreferenceVector([f64; 2]);

impl PreferenceVector {
    pub fn new(l1: f64, l2: f64) -> Result<Self> {
        if !(l1.is_finite() && l2.is_finite()) {
            return Err(Error::invalid("preference weights must be finite"));
        }
        if l1 < 0.0 || l2 < 0.0 {
            return Err(Error::invalid(format!(
                "preference weights must be non-negative, got ({l1}, {l2})"
            )));
        }
        if (l1 + l2 - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::invalid(format!(
                "preference weights must sum to 1, got {}",
                l1 + l2
            )));
        }
        Ok(Self([l1, l2]))
    }

    /// `(λ1, 1 − λ1)`; `λ1` must lie in `[0, 1]`.
    pub fn from_first(l1: f64) -> Result<Self> {
        Self::new(l1, 1.0 - l1)
    }

    pub fn balanced() -> Self {
        Self([0.5, 0.5])
    }

    pub fn weights(&self) -> [f64; 2] {
        self.0
    }

    pub fn first(&self) -> f64 {
        self.0[0]
    }

    pub fn second(&self) -> f64 {
        self.0[1]
    }

    /// Components swapped: `(λ2, λ1)`.
    pub fn mirrored(&self) -> Self {
        Self([self.0[1], self.0[0]])
    }

    /// Uniform grid `{(1 − k/(n−1), k/(n−1))}` for `k = 0..n`, starting at `(1, 0)`.
    pub fn simplex_grid(n: usize) -> Result<Vec<Self>> {
        if n < 2 {
            return Err(Error::invalid("simplex grid needs at least 2 points"));
        }
        Ok((0..n)
            .map(|k| {
                let t = k as f64 / (n - 1) as f64;
                Self([1.0 - t, t])
            })
            .collect())
    }
}

impl TryFrom<[f64; 2]> for PreferenceVector {
    type Error = Error;

    fn try_from(w: [f64; 2]) -> Result<Self> {
        Self::new(w[0], w[1])
    }
}

impl From<PreferenceVector> for [f64; 2] {
    fn from(p: PreferenceVector) -> Self {
        p.0
    }
}

/// Draws a preference from `Dirichlet(concentration)`.
pub fn sample_dirichlet(rng: &mut RngStream, concentration: [f64; 2]) -> Result<PreferenceVector> {
    if concentration.iter().any(|c| !(c.is_finite() && *c > 0.0)) {
        return Err(Error::invalid(format!(
            "Dirichlet concentration must be positive, got {concentration:?}"
        )));
    }
    let g1 = Gamma::new(concentration[0], 1.0).map_err(|e| Error::invalid(e.to_string()))?;
    let g2 = Gamma::new(concentration[1], 1.0).map_err(|e| Error::invalid(e.to_string()))?;
    let a: f64 = g1.sample(rng);
    let b: f64 = g2.sample(rng);
    let sum = a + b;
    if !(sum > 0.0) {
        // both gammas underflowed; only reachable for tiny concentrations
        return Ok(PreferenceVector::balanced());
    }
    let l1 = (a / sum).clamp(0.0, 1.0);
    Ok(PreferenceVector([l1, 1.0 - l1]))
}

/// Sanitizes raw (user or UI) weights onto the simplex.
///
/// Negative entries are floored at zero and the result renormalized; an
/// all-zero input maps to `(0.5, 0.5)`.
pub fn clamp_simplex(raw: [f64; 2]) -> Result<PreferenceVector> {
    if raw.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("non-finite preference {raw:?}")));
    }
    let a = raw[0].max(0.0);
    let b = raw[1].max(0.0);
    let sum = a + b;
    if sum == 0.0 {
        return Ok(PreferenceVector::balanced());
    }
    let l1 = a / sum;
    Ok(PreferenceVector([l1, 1.0 - l1]))
}

/// A point in objective space. All values are finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ObjectiveVector(Vec<f64>);

impl ObjectiveVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("objective vector must not be empty"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite objective vector {values:?}")));
        }
        Ok(Self(values))
    }

    pub fn pair(a: f64, b: f64) -> Result<Self> {
        Self::new(vec![a, b])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<f64>> for ObjectiveVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ObjectiveVector> for Vec<f64> {
    fn from(v: ObjectiveVector) -> Self {
        v.0
    }
}

impl std::ops::Index<usize> for ObjectiveVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_off_simplex() {
        assert!(PreferenceVector::new(0.4, 0.4).is_err());
        assert!(PreferenceVector::new(-0.1, 1.1).is_err());
        assert!(PreferenceVector::new(f64::NAN, 0.5).is_err());
        assert!(PreferenceVector::new(0.25, 0.75).is_ok());
    }

    #[test]
    fn clamp_examples() {
        assert_eq!(clamp_simplex([0.3, 0.7]).unwrap().weights(), [0.3, 0.7]);
        assert_eq!(clamp_simplex([2.0, 2.0]).unwrap().weights(), [0.5, 0.5]);
        assert_eq!(clamp_simplex([-1.0, 3.0]).unwrap().weights(), [0.0, 1.0]);
        assert_eq!(clamp_simplex([0.0, 0.0]).unwrap().weights(), [0.5, 0.5]);
        assert_eq!(clamp_simplex([-2.0, -5.0]).unwrap().weights(), [0.5, 0.5]);
        assert!(clamp_simplex([f64::INFINITY, 1.0]).is_err());
    }

    #[test]
    fn dirichlet_rejects_bad_concentration() {
        let mut rng = RngStream::new(0);
        assert!(sample_dirichlet(&mut rng, [0.0, 1.0]).is_err());
        assert!(sample_dirichlet(&mut rng, [1.0, -2.0]).is_err());
    }

    #[test]
    fn dirichlet_uniform_on_simplex() {
        let mut rng = RngStream::new(11);
        for _ in 0..1000 {
            let p = sample_dirichlet(&mut rng, [1.0, 1.0]).unwrap();
            assert!((0.0..=1.0).contains(&p.first()));
            assert!((p.first() + p.second() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn dirichlet_concentration_limit() {
        let mut rng = RngStream::new(12);
        for _ in 0..100 {
            let p = sample_dirichlet(&mut rng, [1e6, 1e6]).unwrap();
            assert!((p.first() - 0.5).abs() < 0.01);
        }
    }

    #[test]
    fn dirichlet_mean_monte_carlo() {
        // known Dirichlet mean α1 / (α1 + α2) = 0.5
        let mut rng = RngStream::new(13);
        let n = 100_000;
        let mean = (0..n)
            .map(|_| sample_dirichlet(&mut rng, [1.0, 1.0]).unwrap().first())
            .sum::<f64>()
            / n as f64;
        assert!((mean - 0.5).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn simplex_grid_five_points() {
        let g = PreferenceVector::simplex_grid(5).unwrap();
        let firsts: Vec<f64> = g.iter().map(|p| p.first()).collect();
        assert_eq!(firsts, vec![1.0, 0.75, 0.5, 0.25, 0.0]);
        let two = PreferenceVector::simplex_grid(2).unwrap();
        assert_eq!(two[0].weights(), [1.0, 0.0]);
        assert_eq!(two[1].weights(), [0.0, 1.0]);
        assert!(PreferenceVector::simplex_grid(1).is_err());
    }

    #[test]
    fn serde_validates() {
        let p: PreferenceVector = serde_json::from_str("[0.25,0.75]").unwrap();
        assert_eq!(p.weights(), [0.25, 0.75]);
        assert!(serde_json::from_str::<PreferenceVector>("[0.5,0.6]").is_err());
    }

    proptest! {
        #[test]
        fn clamp_always_valid(a in -10.0f64..10.0, b in -10.0f64..10.0) {
            let p = clamp_simplex([a, b]).unwrap();
            prop_assert!(p.first() >= 0.0 && p.second() >= 0.0);
            prop_assert!((p.first() + p.second() - 1.0).abs() <= 1e-9);
        }

        #[test]
        fn dirichlet_always_valid(seed in any::<u64>(), a in 0.05f64..50.0, b in 0.05f64..50.0) {
            let mut rng = RngStream::new(seed);
            let p = sample_dirichlet(&mut rng, [a, b]).unwrap();
            prop_assert!(PreferenceVector::new(p.first(), p.second()).is_ok());
        }
    }
}
