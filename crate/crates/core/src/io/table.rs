use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::envs::EnvName;
use crate::error::{Error, Result};
use crate::eval::SweepRow;
use crate::pareto::{hypervolume_2d, pareto_filter, sparsity_of, ParetoSet};
use crate::preference::ObjectiveVector;

/// Writes rows under the sweep header for `env`.
pub fn write_sweep_csv(path: &Path, env: EnvName, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(SweepRow::columns(env))?;
    for row in rows {
        w.write_record(row.values().iter().map(|v| v.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// A numeric CSV with named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl SweepTable {
    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::invalid(format!("unknown column `{name}` (have: {})", self.columns.join(", "))))
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let i = self.column_index(name)?;
        Ok(self.rows.iter().map(|r| r[i]).collect())
    }
}

pub fn read_sweep_csv(path: &Path) -> Result<SweepTable> {
    let mut r = csv::Reader::from_path(path)?;
    let columns: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|f| f.trim().parse::<f64>().map_err(|_| Error::invalid(format!("non-numeric field `{f}`"))))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(SweepTable { columns, rows })
}

/// Front quality of two chosen columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontMetrics {
    pub hypervolume: f64,
    pub sparsity: f64,
    pub pareto_points: usize,
    pub front: Vec<[f64; 2]>,
    pub reference: [f64; 2],
    pub objectives: [String; 2],
}

/// Maps `objectives` to a maximization space (columns named in `flip` are
/// negated), keeps the non-dominated rows and scores them. Without an
/// explicit reference, the coordinate-wise minimum minus 1e-6 is used.
pub fn front_metrics(
    table: &SweepTable,
    objectives: [&str; 2],
    flip: &[String],
    reference: Option<[f64; 2]>,
) -> Result<FrontMetrics> {
    for f in flip {
        table.column_index(f)?;
    }
    if table.rows.is_empty() {
        return Err(Error::invalid("sweep table has no rows"));
    }
    let cols = objectives
        .iter()
        .map(|name| {
            let sign = if flip.iter().any(|f| f == name) { -1.0 } else { 1.0 };
            Ok(table.column(name)?.into_iter().map(|v| sign * v).collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let points = (0..table.rows.len())
        .map(|k| ObjectiveVector::pair(cols[0][k], cols[1][k]))
        .collect::<Result<Vec<_>>>()?;
    let set = match reference {
        Some(r) => ParetoSet::new(points.clone(), ObjectiveVector::pair(r[0], r[1])?)?,
        None => ParetoSet::with_min_reference(points.clone(), 1e-6)?,
    };
    let front = pareto_filter(&points);
    Ok(FrontMetrics {
        hypervolume: hypervolume_2d(&set)?,
        sparsity: sparsity_of(&front),
        pareto_points: front.len(),
        front: front.iter().map(|p| [p[0], p[1]]).collect(),
        reference: [set.reference()[0], set.reference()[1]],
        objectives: [objectives[0].to_string(), objectives[1].to_string()],
    })
}
