//! Dominance, Pareto filtering, hypervolume and sparsity (maximization).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::preference::ObjectiveVector;
use crate::rng::RngStream;

/// `a` Pareto-dominates `b`: no worse everywhere, strictly better somewhere.
pub fn dominates(a: &ObjectiveVector, b: &ObjectiveVector) -> Result<bool> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch {
            op: "dominates",
            expected: format!("length {}", a.len()),
            actual: format!("length {}", b.len()),
        });
    }
    Ok(dominates_slice(a.values(), b.values()))
}

fn dominates_slice(a: &[f64], b: &[f64]) -> bool {
    let mut strict = false;
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return false;
        }
        if x > y {
            strict = true;
        }
    }
    strict
}

/// Points not dominated by any other input point, in input order.
///
/// Exact duplicates do not dominate each other, so all copies survive.
/// Points of mismatched length are never compared as dominating.
pub fn pareto_filter(points: &[ObjectiveVector]) -> Vec<ObjectiveVector> {
    if points.iter().all(|p| p.len() == 2) {
        return pareto_filter_2d(points);
    }
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.retain(|&i| {
        !points.iter().any(|q| {
            q.len() == points[i].len() && dominates_slice(q.values(), points[i].values())
        })
    });
    order.into_iter().map(|i| points[i].clone()).collect()
}

// O(n log n): sweep by first objective descending, tracking the best second
// objective seen among strictly larger first objectives.
fn pareto_filter_2d(points: &[ObjectiveVector]) -> Vec<ObjectiveVector> {
    let n = points.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| {
        points[b][0]
            .total_cmp(&points[a][0])
            .then(points[b][1].total_cmp(&points[a][1]))
    });
    let mut keep = vec![false; n];
    let mut best_y_strict = f64::NEG_INFINITY; // max y over strictly larger x
    let mut i = 0;
    while i < n {
        // group of equal first objective
        let x = points[idx[i]][0];
        let mut j = i;
        while j < n && points[idx[j]][0] == x {
            j += 1;
        }
        let group_max_y = points[idx[i]][1];
        for &k in &idx[i..j] {
            let y = points[k][1];
            // dominated by a point with larger x and y' >= y, or by an equal-x point with larger y
            keep[k] = !(best_y_strict >= y || y < group_max_y);
        }
        best_y_strict = best_y_strict.max(group_max_y);
        i = j;
    }
    (0..n).filter(|&k| keep[k]).map(|k| points[k].clone()).collect()
}

/// A two-objective point set with its hypervolume reference point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoSet {
    points: Vec<ObjectiveVector>,
    reference: ObjectiveVector,
}

impl ParetoSet {
    /// Rejects points of the wrong dimension or lying below the reference in
    /// any coordinate.
    pub fn new(points: Vec<ObjectiveVector>, reference: ObjectiveVector) -> Result<Self> {
        for p in &points {
            if p.len() != reference.len() {
                return Err(Error::ShapeMismatch {
                    op: "ParetoSet::new",
                    expected: format!("length {}", reference.len()),
                    actual: format!("length {}", p.len()),
                });
            }
            if p.values().iter().zip(reference.values()).any(|(v, r)| v < r) {
                return Err(Error::invalid(format!(
                    "point {:?} lies below reference {:?}",
                    p.values(),
                    reference.values()
                )));
            }
        }
        Ok(Self { points, reference })
    }

    /// Reference at the coordinate-wise minimum minus `margin`.
    pub fn with_min_reference(points: Vec<ObjectiveVector>, margin: f64) -> Result<Self> {
        let first = points
            .first()
            .ok_or_else(|| Error::invalid("cannot derive a reference from an empty set"))?;
        let mut reference = first.values().to_vec();
        for p in &points {
            for (r, v) in reference.iter_mut().zip(p.values()) {
                *r = r.min(*v);
            }
        }
        reference.iter_mut().for_each(|r| *r -= margin);
        Self::new(points, ObjectiveVector::new(reference)?)
    }

    pub fn points(&self) -> &[ObjectiveVector] {
        &self.points
    }

    pub fn reference(&self) -> &ObjectiveVector {
        &self.reference
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Exact area dominated by the set and bounded below by the reference point.
pub fn hypervolume_2d(set: &ParetoSet) -> Result<f64> {
    if set.reference.len() != 2 {
        return Err(Error::invalid("hypervolume_2d requires two objectives"));
    }
    let mut front = pareto_filter(&set.points);
    front.sort_by(|a, b| b[0].total_cmp(&a[0]).then(a[1].total_cmp(&b[1])));
    let (rx, ry) = (set.reference[0], set.reference[1]);
    let mut area = 0.0;
    let mut prev_y = ry;
    for p in &front {
        if p[1] > prev_y {
            area += (p[0] - rx) * (p[1] - prev_y);
            prev_y = p[1];
        }
    }
    Ok(area)
}

/// Mean squared gap between consecutive values, each objective sorted
/// independently, normalized by `n − 1`. Zero for fewer than two points.
pub fn sparsity(set: &ParetoSet) -> f64 {
    sparsity_of(&set.points)
}

pub fn sparsity_of(points: &[ObjectiveVector]) -> f64 {
    let n = points.len();
    if n <= 1 {
        return 0.0;
    }
    let m = points[0].len();
    let mut total = 0.0;
    let mut column = Vec::with_capacity(n);
    for j in 0..m {
        column.clear();
        column.extend(points.iter().map(|p| p[j]));
        column.sort_by(f64::total_cmp);
        total += column.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum::<f64>();
    }
    total / (n - 1) as f64
}

/// Monte-Carlo hypervolume estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HypervolumeEstimate {
    pub value: f64,
    pub std_error: f64,
}

/// Uniform sampling of the box `[reference, max point]`, counting samples
/// dominated-or-equal by some point. Samples are split over `chunks` child
/// streams so the estimate is identical in every execution mode.
pub fn monte_carlo_hypervolume(
    set: &ParetoSet,
    samples: usize,
    chunks: usize,
    rng: &RngStream,
    exec: Execution,
) -> Result<HypervolumeEstimate> {
    if set.reference.len() != 2 {
        return Err(Error::invalid("monte_carlo_hypervolume requires two objectives"));
    }
    let (rx, ry) = (set.reference[0], set.reference[1]);
    let (mut hx, mut hy) = (rx, ry);
    for p in &set.points {
        hx = hx.max(p[0]);
        hy = hy.max(p[1]);
    }
    let box_area = (hx - rx) * (hy - ry);
    if box_area <= 0.0 || samples == 0 {
        return Ok(HypervolumeEstimate {
            value: 0.0,
            std_error: 0.0,
        });
    }
    let chunks = chunks.max(1);
    let pts: Vec<(f64, f64)> = set.points.iter().map(|p| (p[0], p[1])).collect();
    let hits: usize = exec
        .map_range(chunks, |c| {
            let mut r = rng.split(c as u64);
            let count = samples / chunks + usize::from(c < samples % chunks);
            (0..count)
                .filter(|_| {
                    let x = r.uniform_range(rx, hx);
                    let y = r.uniform_range(ry, hy);
                    pts.iter().any(|&(px, py)| px >= x && py >= y)
                })
                .count()
        })
        .into_iter()
        .sum();
    let frac = hits as f64 / samples as f64;
    Ok(HypervolumeEstimate {
        value: frac * box_area,
        std_error: box_area * (frac * (1.0 - frac) / samples as f64).sqrt(),
    })
}
