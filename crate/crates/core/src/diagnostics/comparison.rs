use alloc::format;
use alloc::vec::Vec;

use crate::solver::BackwardSolution;
use crate::{Error, Result};

/// Largest negative difference still counted as ordered.
pub const COMPARISON_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonReport {
    /// `y_hi - y_lo` per time index, flattened like the value tables.
    pub differences: Vec<Vec<f64>>,
    pub min_difference: f64,
    /// `(time index, node)` of the smallest difference.
    pub argmin: (usize, usize),
    pub tolerance: f64,
    pub pass: bool,
}

/// Node-wise `y_hi - y_lo` on two solutions over the same chain.
pub fn comparison_check(hi: &BackwardSolution, lo: &BackwardSolution) -> Result<ComparisonReport> {
    if !hi.is_complete() || !lo.is_complete() {
        return Err(Error::Mismatch("comparison needs two complete solutions".into()));
    }
    if hi.grid.times != lo.grid.times || hi.k != lo.k {
        return Err(Error::Mismatch("solutions live on different time grids".into()));
    }
    let mut differences = Vec::with_capacity(hi.y.len());
    let mut min_difference = f64::INFINITY;
    let mut argmin = (0, 0);
    for (i, (a, b)) in hi.y.iter().zip(&lo.y).enumerate() {
        if a.len() != b.len() {
            return Err(Error::Mismatch(format!(
                "tables at time index {i} have different sizes"
            )));
        }
        let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        for (idx, &v) in diff.iter().enumerate() {
            if v < min_difference {
                min_difference = v;
                argmin = (i, idx / hi.k);
            }
        }
        differences.push(diff);
    }
    Ok(ComparisonReport {
        differences,
        min_difference,
        argmin,
        tolerance: COMPARISON_TOLERANCE,
        pass: min_difference >= -COMPARISON_TOLERANCE,
    })
}
