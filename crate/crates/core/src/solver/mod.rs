//! Backward sweeps on a quantized chain and exact one-step kernels.

mod kernel;
mod space;

pub use kernel::{explicit_step, implicit_step, ImplicitOptions, EXPLOSION_THRESHOLD};
pub use space::{exact_one_step, DiscreteSpace};

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::model::ProblemSpec;
use crate::quantize::TransitionSource;
use crate::timegrid::TimeGrid;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SchemeKind {
    ExplicitAts,
    ExplicitUniform,
    ImplicitUniform(ImplicitOptions),
    /// Explicit steps with the terminal values clamped to `+-L_n`,
    /// `L_n = l0 * n^(alpha / (2(m-1)))`.
    ExplicitTruncTerminal {
        l0: f64,
        alpha: f64,
    },
}

impl SchemeKind {
    pub fn implicit() -> Self {
        SchemeKind::ImplicitUniform(ImplicitOptions::default())
    }

    pub fn name(&self) -> &'static str {
        match self {
            SchemeKind::ExplicitAts => "explicit_ats",
            SchemeKind::ExplicitUniform => "explicit_uniform",
            SchemeKind::ImplicitUniform(_) => "implicit_uniform",
            SchemeKind::ExplicitTruncTerminal { .. } => "explicit_trunc_terminal",
        }
    }

    /// Terminal clamp level for resolution `n`, if the scheme truncates.
    pub fn terminal_level(&self, m: u32, n: usize) -> Option<f64> {
        match *self {
            SchemeKind::ExplicitTruncTerminal { l0, alpha } => Some(crate::timegrid::truncation_level(l0, alpha, m, n)),
            _ => None,
        }
    }
}

/// Value tables `y_i` (`k` per node) and control tables `z_i` (`k x d` per
/// node) at every grid time. Tables before `first_index` are empty when a
/// sweep stopped early.
#[derive(Clone, Debug, PartialEq)]
pub struct BackwardSolution {
    pub grid: TimeGrid,
    pub scheme: SchemeKind,
    pub k: usize,
    pub d: usize,
    pub first_index: usize,
    pub y: Vec<Vec<f64>>,
    pub z: Vec<Vec<f64>>,
    /// Index of the node at `x0` in each spatial grid.
    pub origin_nodes: Vec<usize>,
}

impl BackwardSolution {
    pub fn is_complete(&self) -> bool {
        self.first_index == 0
    }

    /// `y_0(x0)`
    pub fn value_at_origin(&self) -> &[f64] {
        self.value_at(0, self.origin_nodes[0])
    }

    /// `z_0(x0)`
    pub fn control_at_origin(&self) -> &[f64] {
        self.control_at(0, self.origin_nodes[0])
    }

    pub fn value_at(&self, i: usize, node: usize) -> &[f64] {
        &self.y[i][node * self.k..(node + 1) * self.k]
    }

    pub fn control_at(&self, i: usize, node: usize) -> &[f64] {
        let w = self.k * self.d;
        &self.z[i][node * w..(node + 1) * w]
    }

    pub fn nodes(&self, i: usize) -> usize {
        self.y[i].len() / self.k
    }
}

/// Result of a sweep that may have stopped on an explosion or a failed
/// implicit solve.
#[derive(Clone, Debug)]
pub struct Sweep {
    pub solution: BackwardSolution,
    pub failure: Option<Error>,
}

/// Runs the backward recursion from `y_N = g(x)` (clamped for truncated
/// schemes), `z_N = 0`. Step failures end the sweep and are returned in
/// [`Sweep::failure`]; configuration problems are errors.
pub fn sweep<S: TransitionSource + ?Sized>(chain: &S, problem: &ProblemSpec, scheme: SchemeKind) -> Result<Sweep> {
    let grid = chain.time_grid();
    let spaces = chain.spaces();
    let (k, d) = (problem.driver.k, problem.driver.d);
    if spaces.len() != grid.times.len() || spaces.iter().any(|s| s.dim() != d) {
        return Err(Error::Mismatch(format!(
            "chain has {} spatial grids for {} times (d = {d})",
            spaces.len(),
            grid.times.len()
        )));
    }
    let n_steps = grid.len();
    let terminal_space = &spaces[n_steps];
    let mut terminal = vec![0.0; terminal_space.len() * k];
    let mut x = vec![0.0; d];
    for node in 0..terminal_space.len() {
        terminal_space.node(node, &mut x);
        problem.terminal.eval_into(&x, &mut terminal[node * k..(node + 1) * k]);
    }
    if let Some(level) = scheme.terminal_level(problem.driver.constants.m, grid.n) {
        terminal.iter_mut().for_each(|v| *v = v.clamp(-level, level));
    }
    if terminal.iter().any(|v| !v.is_finite()) {
        return Err(Error::config(
            "terminal function produced non-finite values on the grid",
        ));
    }
    let mut y: Vec<Vec<f64>> = vec![Vec::new(); n_steps + 1];
    let mut z: Vec<Vec<f64>> = vec![Vec::new(); n_steps + 1];
    z[n_steps] = vec![0.0; terminal_space.len() * k * d];
    y[n_steps] = terminal;
    let mut failure = None;
    let mut first_index = n_steps;
    for i in (0..n_steps).rev() {
        let step = chain.step(i)?;
        if step.rows.len() != spaces[i].len() {
            return Err(Error::Mismatch(format!(
                "step {i} has {} rows for {} nodes",
                step.rows.len(),
                spaces[i].len()
            )));
        }
        let result = match scheme {
            SchemeKind::ImplicitUniform(opts) => implicit_step(&y[i + 1], &step, &problem.driver, &opts),
            _ => explicit_step(&y[i + 1], &step, &problem.driver),
        };
        match result {
            Ok((yi, zi)) => {
                y[i] = yi;
                z[i] = zi;
                first_index = i;
            }
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
    }
    let origin_nodes = spaces.iter().map(|s| s.project(&problem.forward.x0)).collect();
    Ok(Sweep {
        solution: BackwardSolution {
            grid: grid.clone(),
            scheme,
            k,
            d,
            first_index,
            y,
            z,
            origin_nodes,
        },
        failure,
    })
}

/// Full backward sweep; any step failure is an error.
pub fn solve_backward<S: TransitionSource + ?Sized>(
    chain: &S,
    problem: &ProblemSpec,
    scheme: SchemeKind,
) -> Result<BackwardSolution> {
    let s = sweep(chain, problem, scheme)?;
    match s.failure {
        Some(e) => Err(e),
        None => Ok(s.solution),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Probe {
    pub min: f64,
    pub max: f64,
    pub argmin: usize,
    pub argmax: usize,
}

/// Extremes of `y_i` over nodes (over all components when `k > 1`); ties go
/// to the first node.
pub fn solution_probe(sol: &BackwardSolution, i: usize) -> Probe {
    let mut p = Probe {
        min: f64::INFINITY,
        max: f64::NEG_INFINITY,
        argmin: 0,
        argmax: 0,
    };
    for (idx, &v) in sol.y[i].iter().enumerate() {
        let node = idx / sol.k;
        if v < p.min {
            p.min = v;
            p.argmin = node;
        }
        if v > p.max {
            p.max = v;
            p.argmax = node;
        }
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{presets, DriverSpec, ForwardSpec, TerminalSpec};
    use crate::quantize::{build_chain, GridPolicy, NodeSchedule, TransitionMode};
    use crate::timegrid::{build_grid, GridKind, GridParams};
    use approx::assert_abs_diff_eq;

    fn run(problem: &ProblemSpec, kind: GridKind, n: usize, scheme: SchemeKind) -> BackwardSolution {
        let grid = build_grid(&kind, &GridParams::from_problem(problem), n).unwrap();
        let chain = build_chain(problem, &grid, &GridPolicy::standard(), TransitionMode::Analytic1d).unwrap();
        solve_backward(&chain, problem, scheme).unwrap()
    }

    #[test]
    fn zero_terminal_gives_zero_tables() {
        let p = presets::damped_cubic_problem(1.0, 4.0)
            .unwrap()
            .with_terminal(TerminalSpec::zero(1, 1).unwrap())
            .unwrap();
        for scheme in [SchemeKind::ExplicitUniform, SchemeKind::implicit()] {
            let sol = run(&p, GridKind::Uniform, 8, scheme);
            assert!(sol.y.iter().chain(&sol.z).all(|t| t.iter().all(|&v| v == 0.0)));
            let probe = solution_probe(&sol, 3);
            assert_eq!(
                probe,
                Probe {
                    min: 0.0,
                    max: 0.0,
                    argmin: 0,
                    argmax: 0
                }
            );
        }
    }

    #[test]
    fn one_step_linear_decay() {
        let driver = DriverSpec::cubic_family(-1.0, 0.0, 0.0, None, 1, 1).unwrap();
        let terminal = TerminalSpec::new(
            crate::model::TerminalFn::Shifted {
                inner: alloc::boxed::Box::new(crate::model::TerminalFn::Zero),
                shift: 2.5,
            },
            2.5,
            0.0,
            1,
            1,
        )
        .unwrap();
        let p = ProblemSpec::new(0.5, ForwardSpec::brownian(vec![0.0]).unwrap(), driver, terminal).unwrap();
        let sol = run(&p, GridKind::Uniform, 1, SchemeKind::ExplicitUniform);
        assert_abs_diff_eq!(sol.value_at_origin()[0], 2.5 * (1.0 - 0.5), epsilon = 1e-15);
    }

    #[test]
    fn terminal_probe_hits_cap() {
        let p = presets::damped_cubic_problem(1.0, 4.0).unwrap();
        let sol = run(&p, GridKind::Uniform, 6, SchemeKind::implicit());
        let probe = solution_probe(&sol, 6);
        assert_eq!(probe.max, 4.0);
        assert_eq!(probe.argmax, 0);
        assert_eq!(probe.min, 0.0);
    }

    #[test]
    fn truncated_terminal_is_clamped() {
        let p = presets::damped_cubic_problem(1.0, 4.0)
            .unwrap()
            .with_terminal(TerminalSpec::square(1, 1).unwrap())
            .unwrap();
        let scheme = SchemeKind::ExplicitTruncTerminal { l0: 1.0, alpha: 1.0 };
        let sol = run(&p, GridKind::Uniform, 16, scheme);
        assert_eq!(scheme.terminal_level(3, 16), Some(2.0));
        assert_eq!(solution_probe(&sol, 16).max, 2.0);
    }

    #[test]
    fn uniform_explicit_explodes_on_large_caps() {
        let p = presets::damped_cubic_problem(1.0, 6.0).unwrap();
        let grid = build_grid(&GridKind::Uniform, &GridParams::from_problem(&p), 15).unwrap();
        let policy = GridPolicy {
            schedule: NodeSchedule::Linear { per_step: 1 },
            ..GridPolicy::standard()
        };
        let chain = build_chain(&p, &grid, &policy, TransitionMode::Analytic1d).unwrap();
        let s = sweep(&chain, &p, SchemeKind::ExplicitUniform).unwrap();
        assert!(matches!(s.failure, Some(Error::Explosion { .. })));
        assert!(!s.solution.is_complete());
        assert!(solve_backward(&chain, &p, SchemeKind::ExplicitUniform).is_err());
    }
}
