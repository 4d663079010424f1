use alloc::vec::Vec;

use crate::model::ProblemSpec;
use crate::solver::{BackwardSolution, Sweep};
use crate::{Error, Result};

/// Relative allowance for quantization bias in envelope verdicts.
pub const DEFAULT_QUANTIZATION_TOLERANCE: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnvelopeRegime {
    /// `b(t) = e^{M_y (T-t)} |xi|`
    OneD,
    /// `b(t) = e^{(M_y/4) (T-t)} |xi|`
    Multi,
    /// `b(t) = max(e^{M_y (T-t)} |xi|, K)` with the growth-condition rate.
    MonotoneGrowth,
}

impl EnvelopeRegime {
    pub fn name(self) -> &'static str {
        match self {
            EnvelopeRegime::OneD => "one_d",
            EnvelopeRegime::Multi => "multi",
            EnvelopeRegime::MonotoneGrowth => "gmongr",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnvelopePoint {
    pub index: usize,
    pub time: f64,
    pub min: f64,
    pub max: f64,
    /// Largest node norm `|y_i(x)|`.
    pub max_abs: f64,
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StabilityEnvelope {
    pub regime: EnvelopeRegime,
    pub tolerance: f64,
    /// One point per computed time, in increasing time order.
    pub points: Vec<EnvelopePoint>,
    /// Time indices where `max_abs > bound (1 + tolerance)`.
    pub violations: Vec<usize>,
    /// Time index and magnitude where the sweep blew up, if it did.
    pub explosion: Option<(usize, f64)>,
}

impl StabilityEnvelope {
    pub fn passes(&self) -> bool {
        self.violations.is_empty() && self.explosion.is_none()
    }

    pub fn min_value(&self) -> f64 {
        self.points.iter().fold(f64::INFINITY, |m, p| m.min(p.min))
    }
}

/// Envelope bound at time `t`. `terminal_bound` is the sup norm of the
/// terminal values actually used.
pub fn envelope_bound(regime: EnvelopeRegime, problem: &ProblemSpec, terminal_bound: f64, t: f64) -> Result<f64> {
    let s = problem.horizon - t;
    let m_y = problem.driver.constants.m_y;
    Ok(match regime {
        EnvelopeRegime::OneD => libm::exp(m_y * s) * terminal_bound,
        EnvelopeRegime::Multi => libm::exp(m_y / 4.0 * s) * terminal_bound,
        EnvelopeRegime::MonotoneGrowth => {
            let g = problem
                .driver
                .constants
                .growth
                .ok_or_else(|| Error::config("the gmongr envelope needs a growth radius K"))?;
            (libm::exp(g.rate * s) * terminal_bound).max(g.radius)
        }
    })
}

fn terminal_bound(sol: &BackwardSolution, problem: &ProblemSpec) -> f64 {
    let sup = problem.terminal.sup_norm;
    match sol.scheme.terminal_level(problem.driver.constants.m, sol.grid.n) {
        Some(level) => sup.min(level * libm::sqrt(sol.k as f64)),
        None => sup,
    }
}

pub fn stability_envelope(
    sol: &BackwardSolution,
    problem: &ProblemSpec,
    regime: EnvelopeRegime,
    tolerance: f64,
) -> Result<StabilityEnvelope> {
    let xi = terminal_bound(sol, problem);
    let mut points = Vec::new();
    let mut violations = Vec::new();
    for i in sol.first_index..sol.y.len() {
        let t = sol.grid.times[i];
        let bound = envelope_bound(regime, problem, xi, t)?;
        let (mut min, mut max, mut max_abs) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64);
        for node in sol.y[i].chunks(sol.k) {
            let norm = libm::sqrt(node.iter().map(|v| v * v).sum());
            max_abs = max_abs.max(norm);
            for &v in node {
                min = min.min(v);
                max = max.max(v);
            }
        }
        if max_abs > bound * (1.0 + tolerance) {
            violations.push(i);
        }
        points.push(EnvelopePoint {
            index: i,
            time: t,
            min,
            max,
            max_abs,
            bound,
        });
    }
    Ok(StabilityEnvelope {
        regime,
        tolerance,
        points,
        violations,
        explosion: None,
    })
}

/// Envelope of a possibly incomplete sweep; an explosion counts as a
/// violation at the step where it happened.
pub fn sweep_envelope(
    sweep: &Sweep,
    problem: &ProblemSpec,
    regime: EnvelopeRegime,
    tolerance: f64,
) -> Result<StabilityEnvelope> {
    let mut env = stability_envelope(&sweep.solution, problem, regime, tolerance)?;
    match &sweep.failure {
        None => {}
        Some(Error::Explosion {
            time_index, magnitude, ..
        }) => {
            env.explosion = Some((*time_index, *magnitude));
        }
        Some(Error::NoConvergence {
            time_index, residual, ..
        }) => {
            env.explosion = Some((*time_index, *residual));
        }
        Some(other) => return Err(other.clone()),
    }
    Ok(env)
}
