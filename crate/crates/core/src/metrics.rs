//! Convergence measurement: per-step position MSE and cross-run aggregation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean and population standard deviation of the MSE at one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    /// 1-based comparison count.
    pub step_index: usize,
    pub mean_mse: f64,
    pub std_mse: f64,
    pub run_count: usize,
}

/// Aggregated MSE-per-comparison curve of one experiment cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceCurve {
    pub algorithm_label: String,
    pub list_length: usize,
    pub noise_level: f64,
    pub per_step: Vec<CurvePoint>,
}

pub const CSV_HEADER: &str = "algorithm,n,noise,step,mean_mse,std_mse,runs";

impl ConvergenceCurve {
    pub fn from_runs(
        algorithm_label: impl Into<String>,
        list_length: usize,
        noise_level: f64,
        runs: &[Vec<f64>],
    ) -> Result<Self> {
        Ok(ConvergenceCurve {
            algorithm_label: algorithm_label.into(),
            list_length,
            noise_level,
            per_step: pad_and_aggregate(runs)?,
        })
    }

    /// Mean MSE at a 1-based step; past the end the last value holds.
    pub fn mean_at(&self, step_index: usize) -> Option<f64> {
        let last = self.per_step.last()?;
        if step_index == 0 {
            return None;
        }
        Some(
            self.per_step
                .get(step_index - 1)
                .map_or(last.mean_mse, |p| p.mean_mse),
        )
    }

    pub fn final_mean(&self) -> Option<f64> {
        self.per_step.last().map(|p| p.mean_mse)
    }

    /// Sum of the mean MSE over the first `steps` steps (unit step width).
    pub fn area(&self, steps: usize) -> f64 {
        (1..=steps).filter_map(|s| self.mean_at(s)).sum()
    }

    /// CSV with header; floats in scientific notation, 13 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.per_step.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        for p in &self.per_step {
            out.push_str(&format!(
                "{},{},{:.12e},{},{:.12e},{:.12e},{}\n",
                self.algorithm_label,
                self.list_length,
                self.noise_level,
                p.step_index,
                p.mean_mse,
                p.std_mse,
                p.run_count
            ));
        }
        out
    }
}

pub(crate) fn check_permutation(order: &[usize]) -> Result<()> {
    let n = order.len();
    let mut seen = vec![false; n];
    for &v in order {
        if v >= n || std::mem::replace(&mut seen[v], true) {
            return Err(Error::NotAPermutation(n));
        }
    }
    Ok(())
}

/// `(1/n) * sum_k (order[k] - k)^2` for a permutation of `0..n` read as the
/// values at ascending target positions.
pub fn position_mse(order: &[usize]) -> Result<f64> {
    check_permutation(order)?;
    if order.is_empty() {
        return Ok(0.0);
    }
    Ok(squared_displacement(order.iter().copied().enumerate()) / order.len() as f64)
}

/// Sum of `(value - position)^2` over `(position, value)` pairs.
pub(crate) fn squared_displacement(items: impl Iterator<Item = (usize, usize)>) -> f64 {
    items
        .map(|(pos, value)| {
            let d = value as f64 - pos as f64;
            d * d
        })
        .sum()
}

/// Pads every series to the longest one with its final value, then takes
/// the mean and population standard deviation per step.
///
/// Values at each step are summed in sorted order, so the result does not
/// depend on the order of `runs`.
pub fn pad_and_aggregate(runs: &[Vec<f64>]) -> Result<Vec<CurvePoint>> {
    if runs.is_empty() || runs.iter().any(Vec::is_empty) {
        return Err(Error::EmptyAggregate);
    }
    let steps = runs.iter().map(Vec::len).max().unwrap_or(0);
    let count = runs.len() as f64;
    let mut column = Vec::with_capacity(runs.len());
    let points = (0..steps)
        .map(|s| {
            column.clear();
            column.extend(runs.iter().map(|r| *r.get(s).unwrap_or(&r[r.len() - 1])));
            column.sort_by(f64::total_cmp);
            let mean = column.iter().sum::<f64>() / count;
            let var = column.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / count;
            CurvePoint {
                step_index: s + 1,
                mean_mse: mean,
                std_mse: var.sqrt(),
                run_count: runs.len(),
            }
        })
        .collect();
    Ok(points)
}
