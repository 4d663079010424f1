//! Grid, chain and sweep for one problem at a given resolution `n`.

use crate::model::ProblemSpec;
use crate::quantize::{GridPolicy, LazyChain, TransitionMode};
use crate::solver::{sweep, BackwardSolution, SchemeKind, Sweep};
use crate::timegrid::{build_grid, GridKind, GridParams, TimeGrid};
use crate::Result;

#[derive(Clone, Debug)]
pub struct Pipeline {
    pub problem: ProblemSpec,
    pub grid_kind: GridKind,
    pub scheme: SchemeKind,
    pub policy: GridPolicy,
    pub mode: TransitionMode,
}

#[derive(Clone, Debug)]
pub struct Run {
    pub grid: TimeGrid,
    pub solution: BackwardSolution,
}

impl Pipeline {
    pub fn new(
        problem: &ProblemSpec,
        grid_kind: GridKind,
        scheme: SchemeKind,
        policy: GridPolicy,
        mode: TransitionMode,
    ) -> Self {
        Pipeline {
            problem: problem.clone(),
            grid_kind,
            scheme,
            policy,
            mode,
        }
    }

    pub fn with_problem(&self, problem: &ProblemSpec) -> Self {
        Pipeline {
            problem: problem.clone(),
            ..self.clone()
        }
    }

    pub fn with_scheme(&self, grid_kind: GridKind, scheme: SchemeKind) -> Self {
        Pipeline {
            grid_kind,
            scheme,
            ..self.clone()
        }
    }

    pub fn grid(&self, n: usize) -> Result<TimeGrid> {
        build_grid(&self.grid_kind, &GridParams::from_problem(&self.problem), n)
    }

    pub fn chain(&self, n: usize) -> Result<LazyChain> {
        LazyChain::new(&self.problem, &self.grid(n)?, &self.policy, self.mode)
    }

    /// Sweep that reports step failures instead of returning them as errors.
    pub fn sweep(&self, n: usize) -> Result<Sweep> {
        sweep(&self.chain(n)?, &self.problem, self.scheme)
    }

    pub fn run(&self, n: usize) -> Result<Run> {
        let s = self.sweep(n)?;
        match s.failure {
            Some(e) => Err(e),
            None => Ok(Run {
                grid: s.solution.grid.clone(),
                solution: s.solution,
            }),
        }
    }
}
