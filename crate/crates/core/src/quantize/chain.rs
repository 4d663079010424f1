use alloc::borrow::Cow;
use alloc::vec::Vec;

use super::{build_spatial_grids, increment_weights, transition_row, GridPolicy, SpatialGrid, TransitionMode};
use crate::model::{ForwardSpec, ProblemSpec};
use crate::timegrid::TimeGrid;
use crate::Result;

/// Non-zero transitions out of one source node, with the increment weights
/// (`d` per column) for the same columns.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseRow {
    pub cols: Vec<u32>,
    pub probs: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Transitions from the grid at time index `index` to the one at `index + 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainStep {
    pub index: usize,
    pub h: f64,
    pub d: usize,
    pub rows: Vec<SparseRow>,
}

/// Access to the transition steps of a quantized chain.
pub trait TransitionSource {
    fn time_grid(&self) -> &TimeGrid;
    fn spaces(&self) -> &[SpatialGrid];
    fn step(&self, i: usize) -> Result<Cow<'_, ChainStep>>;
}

/// Builds the transition step out of time index `i`.
pub fn build_step(
    forward: &ForwardSpec,
    grid: &TimeGrid,
    spaces: &[SpatialGrid],
    i: usize,
    mode: TransitionMode,
) -> Result<ChainStep> {
    let (source, target) = (&spaces[i], &spaces[i + 1]);
    let (t, h) = (grid.times[i], grid.steps[i]);
    let rows = (0..source.len())
        .map(|k| {
            let (cols, probs) = transition_row(mode, source, k, target, forward, t, h, i)?;
            let weights = increment_weights(source, k, target, &cols, forward, t, h)?;
            Ok(SparseRow { cols, probs, weights })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ChainStep {
        index: i,
        h,
        d: source.dim(),
        rows,
    })
}

/// Fully materialized chain.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantizedChain {
    pub grid: TimeGrid,
    pub spaces: Vec<SpatialGrid>,
    pub steps: Vec<ChainStep>,
}

pub fn build_chain(
    problem: &ProblemSpec,
    grid: &TimeGrid,
    policy: &GridPolicy,
    mode: TransitionMode,
) -> Result<QuantizedChain> {
    let spaces = build_spatial_grids(&problem.forward, grid, policy)?;
    let steps = (0..grid.len())
        .map(|i| build_step(&problem.forward, grid, &spaces, i, mode))
        .collect::<Result<Vec<_>>>()?;
    Ok(QuantizedChain {
        grid: grid.clone(),
        spaces,
        steps,
    })
}

impl TransitionSource for QuantizedChain {
    fn time_grid(&self) -> &TimeGrid {
        &self.grid
    }
    fn spaces(&self) -> &[SpatialGrid] {
        &self.spaces
    }
    fn step(&self, i: usize) -> Result<Cow<'_, ChainStep>> {
        Ok(Cow::Borrowed(&self.steps[i]))
    }
}

/// Chain whose steps are built on request, for grids too fine to hold every
/// transition table at once.
#[derive(Clone, Debug)]
pub struct LazyChain {
    pub grid: TimeGrid,
    pub spaces: Vec<SpatialGrid>,
    pub forward: ForwardSpec,
    pub mode: TransitionMode,
}

impl LazyChain {
    pub fn new(problem: &ProblemSpec, grid: &TimeGrid, policy: &GridPolicy, mode: TransitionMode) -> Result<Self> {
        let spaces = build_spatial_grids(&problem.forward, grid, policy)?;
        Ok(LazyChain {
            grid: grid.clone(),
            spaces,
            forward: problem.forward.clone(),
            mode,
        })
    }

    pub fn materialize(&self) -> Result<QuantizedChain> {
        let steps = (0..self.grid.len())
            .map(|i| build_step(&self.forward, &self.grid, &self.spaces, i, self.mode))
            .collect::<Result<Vec<_>>>()?;
        Ok(QuantizedChain {
            grid: self.grid.clone(),
            spaces: self.spaces.clone(),
            steps,
        })
    }
}

impl TransitionSource for LazyChain {
    fn time_grid(&self) -> &TimeGrid {
        &self.grid
    }
    fn spaces(&self) -> &[SpatialGrid] {
        &self.spaces
    }
    fn step(&self, i: usize) -> Result<Cow<'_, ChainStep>> {
        build_step(&self.forward, &self.grid, &self.spaces, i, self.mode).map(Cow::Owned)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::presets;
    use crate::timegrid::{build_grid, radius, GridKind, GridParams};
    use approx::assert_abs_diff_eq;

    fn chain(n: usize, mode: TransitionMode) -> QuantizedChain {
        let problem = presets::damped_cubic_problem(if n == 1 { 0.5 } else { 1.0 }, 4.0).unwrap();
        let grid = build_grid(&GridKind::Uniform, &GridParams::from_problem(&problem), n).unwrap();
        build_chain(&problem, &grid, &GridPolicy::standard(), mode).unwrap()
    }

    #[test]
    fn rows_are_stochastic_and_weights_bounded() {
        let c = chain(12, TransitionMode::Analytic1d);
        for step in &c.steps {
            let bound = radius(step.h) / step.h;
            for row in &step.rows {
                assert_abs_diff_eq!(row.probs.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
                assert!(row.probs.iter().all(|&p| p >= 0.0));
                assert!(row.weights.iter().all(|w| w.abs() <= bound));
            }
        }
    }

    #[test]
    fn one_step_chain() {
        let c = chain(1, TransitionMode::Analytic1d);
        assert_eq!(c.steps.len(), 1);
        assert_eq!(c.steps[0].rows.len(), 1);
        assert_abs_diff_eq!(c.steps[0].rows[0].probs.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_drift_symmetry() {
        let c = chain(6, TransitionMode::Analytic1d);
        let step = &c.steps[3];
        let (ns, nt) = (c.spaces[3].len(), c.spaces[4].len());
        let dense = |k: usize, l: usize| {
            let row = &step.rows[k];
            row.cols
                .iter()
                .position(|&c| c as usize == l)
                .map_or(0.0, |p| row.probs[p])
        };
        for k in 0..ns {
            for l in 0..nt {
                assert_abs_diff_eq!(dense(k, l), dense(ns - 1 - k, nt - 1 - l), epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn lazy_matches_materialized() {
        let problem = presets::damped_cubic_problem(1.0, 4.0).unwrap();
        let grid = build_grid(&GridKind::Uniform, &GridParams::from_problem(&problem), 5).unwrap();
        let lazy = LazyChain::new(&problem, &grid, &GridPolicy::standard(), TransitionMode::Analytic1d).unwrap();
        let full = build_chain(&problem, &grid, &GridPolicy::standard(), TransitionMode::Analytic1d).unwrap();
        assert_eq!(lazy.materialize().unwrap(), full);
        assert_eq!(*lazy.step(2).unwrap(), full.steps[2]);
    }

    #[test]
    fn monte_carlo_chain_is_seed_deterministic() {
        let mode = TransitionMode::MonteCarlo {
            samples: 2000,
            seed: 11,
        };
        assert_eq!(chain(4, mode), chain(4, mode));
    }
}
