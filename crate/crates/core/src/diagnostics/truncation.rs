use alloc::vec::Vec;

use crate::model::ProblemSpec;
use crate::pipeline::Pipeline;
use crate::quantize::{GridPolicy, TransitionMode};
use crate::solver::SchemeKind;
use crate::timegrid::{truncation_level, BaseGrid, GridKind};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct TruncationPoint {
    pub n: usize,
    pub level: f64,
    pub steps: usize,
    pub y0: f64,
    pub error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TruncationReport {
    pub points: Vec<TruncationPoint>,
    pub n_ref: usize,
    pub reference: f64,
    /// Errors strictly decrease along `n`.
    pub decreasing: bool,
}

/// Truncated-terminal scheme on its adapted grid at each `n`, compared at
/// `(0, x0)` with the same scheme at `n_ref`.
#[allow(clippy::too_many_arguments)]
pub fn truncation_error_decay(
    problem: &ProblemSpec,
    base: BaseGrid,
    l0: f64,
    alpha: f64,
    n_list: &[usize],
    n_ref: usize,
    policy: GridPolicy,
    mode: TransitionMode,
) -> Result<TruncationReport> {
    if n_list.is_empty() || n_list.windows(2).any(|w| w[0] >= w[1]) || n_ref <= *n_list.last().unwrap() {
        return Err(Error::config("n values must increase strictly and stay below n_ref"));
    }
    let pipeline = Pipeline::new(
        problem,
        GridKind::AtsTruncTerminal { base, l0, alpha },
        SchemeKind::ExplicitTruncTerminal { l0, alpha },
        policy,
        mode,
    );
    let m = problem.driver.constants.m;
    let reference = pipeline.run(n_ref)?.solution.value_at_origin()[0];
    let points = n_list
        .iter()
        .map(|&n| {
            let run = pipeline.run(n)?;
            let y0 = run.solution.value_at_origin()[0];
            Ok(TruncationPoint {
                n,
                level: truncation_level(l0, alpha, m, n),
                steps: run.grid.len(),
                y0,
                error: (y0 - reference).abs(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let decreasing = points.windows(2).all(|w| w[1].error < w[0].error);
    Ok(TruncationReport {
        points,
        n_ref,
        reference,
        decreasing,
    })
}
