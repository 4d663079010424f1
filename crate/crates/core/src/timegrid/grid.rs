use alloc::format;
use alloc::vec::Vec;

use super::truncation::{h0_lipz, increment_error_moment, H_MAX};
use crate::model::{stability_flags, GrowthCondition, ProblemSpec, Regime};
use crate::{Error, Result};

/// When the earliest remaining time exceeds the step just computed by at
/// most this fraction of the horizon, the step runs to 0 instead of leaving
/// a round-off sliver behind.
pub const SNAP_FRACTION: f64 = 1e-9;

const MAX_STEPS: usize = 50_000_000;

/// Adapted grid families that can serve as the base of a refined or
/// truncated-terminal grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BaseGrid {
    OneD,
    Multi,
    Comparison { bound: f64 },
    MonotoneGrowth,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GridKind {
    Uniform,
    /// Scalar stability steps.
    Ats1d,
    /// Multi-dimensional stability steps; needs `L_z^2 <= -M_y / 4`.
    AtsMulti,
    /// Steps small enough for order preservation between terminal values
    /// bounded by `bound`.
    AtsComparison {
        bound: f64,
    },
    /// Base steps further reduced so the error rate constant stays negative.
    AtsRefined {
        base: BaseGrid,
    },
    /// Steps for drivers that are only monotone outside a ball.
    AtsMonotoneGrowth,
    /// Base steps computed with the terminal bound `l0 * n^(alpha / (2(m-1)))`.
    AtsTruncTerminal {
        base: BaseGrid,
        l0: f64,
        alpha: f64,
    },
}

impl GridKind {
    pub fn name(&self) -> &'static str {
        match self {
            GridKind::Uniform => "uniform",
            GridKind::Ats1d => "ats_1d",
            GridKind::AtsMulti => "ats_multi",
            GridKind::AtsComparison { .. } => "ats_comparison",
            GridKind::AtsRefined { .. } => "ats_refined",
            GridKind::AtsMonotoneGrowth => "ats_gmongr",
            GridKind::AtsTruncTerminal { .. } => "ats_trunc_terminal",
        }
    }

    pub fn is_adapted(&self) -> bool {
        !matches!(self, GridKind::Uniform)
    }
}

/// Which term of the step-size minimum is active.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Clause {
    Formula,
    H0Lz,
    HMax,
    TNext,
    TOverN,
}

impl Clause {
    pub fn label(self) -> &'static str {
        match self {
            Clause::Formula => "formula",
            Clause::H0Lz => "h0_Lz",
            Clause::HMax => "h_max",
            Clause::TNext => "t_next",
            Clause::TOverN => "T_over_n",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Step {
    pub h: f64,
    pub clause: Clause,
}

/// Constants shared by the multi-dimensional stability analysis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StabilityConstants {
    /// `M_y / 4`
    pub hat_m_y: f64,
    /// `1 / (16 (d+1) L_z^2)`, infinite when `L_z = 0`.
    pub hat_h0: f64,
    /// `h_0(L_z)`
    pub h0_lipz: f64,
    /// Uniform bound on `E|dW/h - H|^2` over admissible steps.
    pub c_h: f64,
}

impl StabilityConstants {
    pub fn new(m_y: f64, l_z: f64, d: usize) -> Self {
        let hat_h0 = if l_z == 0.0 {
            f64::INFINITY
        } else {
            0.125 / (2.0 * (d as f64 + 1.0) * l_z * l_z)
        };
        StabilityConstants {
            hat_m_y: m_y / 4.0,
            hat_h0,
            h0_lipz: h0_lipz(l_z),
            c_h: d as f64 * increment_error_moment(H_MAX).expect("h_max is admissible"),
        }
    }
}

/// Everything the step formulas read from a problem.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridParams {
    pub horizon: f64,
    pub m: u32,
    pub m_y: f64,
    pub l_y: f64,
    pub l_z: f64,
    pub d: usize,
    pub regime: Regime,
    pub growth: Option<GrowthCondition>,
    /// Bound on the terminal value, `sup |g|`.
    pub terminal_bound: f64,
    pub numerically_stable: bool,
    pub stability: StabilityConstants,
}

impl GridParams {
    pub fn from_problem(problem: &ProblemSpec) -> Self {
        let dr = &problem.driver;
        let c = dr.constants;
        GridParams {
            horizon: problem.horizon,
            m: c.m,
            m_y: c.m_y,
            l_y: c.l_y,
            l_z: c.l_z,
            d: dr.d,
            regime: dr.regime,
            growth: c.growth,
            terminal_bound: problem.terminal.sup_norm,
            numerically_stable: stability_flags(dr).numerical,
            stability: StabilityConstants::new(c.m_y, c.l_z, dr.d),
        }
    }
}

/// An ascending partition `0 = t_0 < ... < t_N = T`; `steps[i] = t_{i+1} - t_i`
/// and `clauses[i]` names the term that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeGrid {
    pub times: Vec<f64>,
    pub steps: Vec<f64>,
    pub clauses: Vec<Clause>,
    pub kind: GridKind,
    pub n: usize,
}

impl TimeGrid {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("grid has at least one time")
    }

    pub fn modulus(&self) -> f64 {
        self.steps.iter().fold(0.0, |a, &b| a.max(b))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridDiagnostics {
    pub steps: usize,
    pub excess: f64,
    pub non_uniformity: f64,
    pub min_step: f64,
    pub max_step: f64,
}

pub fn grid_diagnostics(grid: &TimeGrid, n: usize) -> GridDiagnostics {
    let min = grid.steps.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    let max = grid.modulus();
    GridDiagnostics {
        steps: grid.len(),
        excess: grid.len() as f64 / n as f64,
        non_uniformity: max / min,
        min_step: min,
        max_step: max,
    }
}

fn strict_kind_error(kind: &GridKind, m_y: f64) -> Error {
    Error::config(format!(
        "grid kind {} needs a strictly monotone driver but M_y = {m_y}; use the ats_gmongr grid for drivers that are only monotone outside a ball",
        kind.name()
    ))
}

fn check_base(kind: &GridKind, base: BaseGrid, p: &GridParams, refined: bool) -> Result<()> {
    match base {
        BaseGrid::OneD | BaseGrid::Comparison { .. } => {
            if p.m_y > 0.0 || (refined && p.m_y >= 0.0) {
                return Err(strict_kind_error(kind, p.m_y));
            }
        }
        BaseGrid::Multi => {
            if p.m_y >= 0.0 {
                return Err(strict_kind_error(kind, p.m_y));
            }
            if !p.numerically_stable {
                return Err(Error::config(format!(
                    "grid kind {} needs L_z^2 <= -M_y / 4 (L_z = {}, M_y = {})",
                    kind.name(),
                    p.l_z,
                    p.m_y
                )));
            }
        }
        BaseGrid::MonotoneGrowth => {
            if refined {
                return Err(Error::config(
                    "the refined grid is not defined over the ats_gmongr base",
                ));
            }
            match p.growth {
                Some(g) if g.rate < 0.0 && g.radius > 0.0 => {}
                _ => {
                    return Err(Error::config(
                        "grid kind ats_gmongr needs a growth condition (radius K > 0, negative rate)",
                    ))
                }
            }
        }
    }
    if let BaseGrid::Comparison { bound } = base {
        if !(bound >= 0.0 && bound.is_finite()) {
            return Err(Error::config(format!(
                "comparison bound must be finite and non-negative, got {bound}"
            )));
        }
    }
    Ok(())
}

fn check_kind(kind: &GridKind, p: &GridParams) -> Result<()> {
    let needs_bounded = |p: &GridParams| {
        if p.terminal_bound.is_finite() {
            Ok(())
        } else {
            Err(Error::config(format!(
                "grid kind {} needs a bounded terminal function; use ats_trunc_terminal",
                kind.name()
            )))
        }
    };
    match *kind {
        GridKind::Uniform => Ok(()),
        GridKind::Ats1d => {
            needs_bounded(p)?;
            check_base(kind, BaseGrid::OneD, p, false)
        }
        GridKind::AtsMulti => {
            needs_bounded(p)?;
            check_base(kind, BaseGrid::Multi, p, false)
        }
        GridKind::AtsComparison { bound } => check_base(kind, BaseGrid::Comparison { bound }, p, false),
        GridKind::AtsRefined { base } => {
            if !matches!(base, BaseGrid::Comparison { .. }) {
                needs_bounded(p)?;
            }
            check_base(kind, base, p, true)
        }
        GridKind::AtsMonotoneGrowth => {
            needs_bounded(p)?;
            check_base(kind, BaseGrid::MonotoneGrowth, p, false)
        }
        GridKind::AtsTruncTerminal { base, l0, alpha } => {
            if !(l0 > 0.0 && l0.is_finite()) || !(alpha > 0.0 && alpha <= 1.0) {
                return Err(Error::config(format!(
                    "truncated terminal needs L_0 > 0 and alpha in (0, 1], got L_0 = {l0}, alpha = {alpha}"
                )));
            }
            if p.m < 2 {
                return Err(Error::config("truncated terminal schedule needs m >= 2"));
            }
            check_base(kind, base, p, false)
        }
    }
}

/// `L_n = l0 * n^(alpha / (2(m-1)))`.
pub fn truncation_level(l0: f64, alpha: f64, m: u32, n: usize) -> f64 {
    l0 * libm::pow(n as f64, alpha / (2.0 * (m as f64 - 1.0)))
}

/// Terminal bound a base family uses when nothing overrides it.
fn natural_bound(base: BaseGrid, p: &GridParams) -> f64 {
    match base {
        BaseGrid::Comparison { bound } => bound,
        _ => p.terminal_bound,
    }
}

/// First-clause value and step ceiling of a base family at `s = T - t_next`,
/// with `bound` the terminal bound entering the formula.
fn base_formula(base: BaseGrid, p: &GridParams, s: f64, bound: f64) -> (f64, f64) {
    let pm1 = p.m as f64 - 1.0;
    let d1 = p.d as f64 + 1.0;
    match base {
        BaseGrid::OneD => {
            let g = libm::exp(pm1 * p.m_y * s) * libm::pow(bound, pm1);
            (1.0 / (3.0 * p.l_y * (1.0 + g)), p.stability.h0_lipz)
        }
        BaseGrid::Comparison { .. } => {
            let g = libm::exp(pm1 * p.m_y * s) * libm::pow(bound, pm1);
            (1.0 / (3.0 * p.l_y * (1.0 + 2.0 * g)), p.stability.h0_lipz)
        }
        BaseGrid::Multi => {
            let g = libm::exp(pm1 * 0.5 * p.m_y * s) * libm::pow(bound, 2.0 * pm1);
            let factor = if p.l_z == 0.0 { 1.0 } else { 2.0 };
            (
                0.25 * -p.m_y / (factor * d1 * p.l_y * p.l_y * (1.0 + g)),
                p.stability.hat_h0,
            )
        }
        BaseGrid::MonotoneGrowth => {
            let growth = p.growth.expect("checked");
            let g = (libm::exp(pm1 * growth.rate * s) * libm::pow(bound, pm1)).max(libm::pow(growth.radius, pm1));
            (1.0 / (3.0 * p.l_y * (1.0 + 2.0 * g)), p.stability.h0_lipz)
        }
    }
}

fn refined_formula(p: &GridParams, s: f64, bound: f64) -> f64 {
    let pm1 = p.m as f64 - 1.0;
    let d1 = p.d as f64 + 1.0;
    let g = libm::exp(2.0 * pm1 * p.stability.hat_m_y * s) * libm::pow(bound, 2.0 * pm1);
    0.25 * -p.m_y / (3.0 * d1 * p.l_y * p.l_y * (1.0 + 2.0 * g))
}

/// Step `h_{i+1}` ending at `t_next = t_{i+1}`: the minimum of the kind's
/// clauses in the fixed order formula, `h_0`, `h_max`, `t_next`, `T/n`.
/// Ties go to the earlier clause.
pub fn ats_step_size(kind: &GridKind, t_next: f64, params: &GridParams, n: usize) -> Result<Step> {
    check_kind(kind, params)?;
    if n == 0 {
        return Err(Error::config("grid resolution n must be at least 1"));
    }
    let t_over_n = params.horizon / n as f64;
    let s = params.horizon - t_next;
    let (formula, ceiling) = match *kind {
        GridKind::Uniform => (f64::INFINITY, f64::INFINITY),
        GridKind::Ats1d => base_formula(BaseGrid::OneD, params, s, params.terminal_bound),
        GridKind::AtsMulti => base_formula(BaseGrid::Multi, params, s, params.terminal_bound),
        GridKind::AtsComparison { bound } => base_formula(BaseGrid::Comparison { bound }, params, s, bound),
        GridKind::AtsMonotoneGrowth => base_formula(BaseGrid::MonotoneGrowth, params, s, params.terminal_bound),
        GridKind::AtsRefined { base } => {
            let bound = natural_bound(base, params);
            let (f, c) = base_formula(base, params, s, bound);
            (refined_formula(params, s, bound).min(f), c)
        }
        GridKind::AtsTruncTerminal { base, l0, alpha } => {
            let level = truncation_level(l0, alpha, params.m, n);
            base_formula(base, params, s, level)
        }
    };
    let clauses = [
        (formula, Clause::Formula),
        (ceiling, Clause::H0Lz),
        (H_MAX, Clause::HMax),
        (t_next, Clause::TNext),
        (t_over_n, Clause::TOverN),
    ];
    let mut best = clauses[0];
    for c in &clauses[1..] {
        if c.0 < best.0 {
            best = *c;
        }
    }
    if best.1 != Clause::TNext && t_next - best.0 <= SNAP_FRACTION * params.horizon {
        best = (t_next, Clause::TNext);
    }
    if !(best.0 > 0.0) {
        return Err(Error::config(format!(
            "step size formula produced {} at t = {t_next}; check the declared constants",
            best.0
        )));
    }
    Ok(Step {
        h: best.0,
        clause: best.1,
    })
}

/// Builds the grid backward from `T`; the uniform kind is laid out directly.
pub fn build_grid(kind: &GridKind, params: &GridParams, n: usize) -> Result<TimeGrid> {
    check_kind(kind, params)?;
    if n == 0 {
        return Err(Error::config("grid resolution n must be at least 1"));
    }
    let horizon = params.horizon;
    if let GridKind::Uniform = kind {
        let h = horizon / n as f64;
        if h > H_MAX {
            return Err(Error::config(format!(
                "uniform step T/n = {h} exceeds h_max = {H_MAX}; increase n"
            )));
        }
        let mut times: Vec<f64> = (0..n).map(|i| horizon * i as f64 / n as f64).collect();
        times.push(horizon);
        return Ok(TimeGrid {
            times,
            steps: alloc::vec![h; n],
            clauses: alloc::vec![Clause::TOverN; n],
            kind: *kind,
            n,
        });
    }
    let mut times = alloc::vec![horizon];
    let mut steps = Vec::new();
    let mut clauses = Vec::new();
    let mut t = horizon;
    loop {
        let step = ats_step_size(kind, t, params, n)?;
        steps.push(step.h);
        clauses.push(step.clause);
        if step.clause == Clause::TNext {
            times.push(0.0);
            break;
        }
        t -= step.h;
        times.push(t);
        if steps.len() > MAX_STEPS {
            return Err(Error::config(format!(
                "grid {} exceeded {MAX_STEPS} steps; the step formula is too small for this problem",
                kind.name()
            )));
        }
    }
    times.reverse();
    steps.reverse();
    clauses.reverse();
    Ok(TimeGrid {
        times,
        steps,
        clauses,
        kind: *kind,
        n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{presets, TerminalSpec};
    use approx::assert_relative_eq;

    fn params71(cap: f64) -> GridParams {
        GridParams::from_problem(&presets::damped_cubic_problem(1.0, cap).unwrap())
    }

    #[test]
    fn zero_terminal_ats1d_is_uniform() {
        let problem = presets::damped_cubic_problem(1.0, 3.6).unwrap();
        let problem = problem.with_terminal(TerminalSpec::zero(1, 1).unwrap()).unwrap();
        let p = GridParams::from_problem(&problem);
        let s = ats_step_size(&GridKind::Ats1d, 0.5, &p, 10).unwrap();
        assert_eq!(
            s,
            Step {
                h: 0.1,
                clause: Clause::TOverN
            }
        );
        let ats = build_grid(&GridKind::Ats1d, &p, 10).unwrap();
        let uni = build_grid(&GridKind::Uniform, &p, 10).unwrap();
        assert_eq!(ats.len(), 10);
        for (a, b) in ats.times.iter().zip(&uni.times) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(uni.steps.iter().all(|&h| h == 0.1));
    }

    #[test]
    fn comparison_first_clause_at_horizon() {
        let p = params71(3.6);
        let s = ats_step_size(&GridKind::AtsComparison { bound: 3.6 }, 1.0, &p, 15).unwrap();
        assert_eq!(s.clause, Clause::Formula);
        assert_relative_eq!(s.h, 1.0 / (4.5 * (1.0 + 2.0 * 3.6 * 3.6)), max_relative = 1e-15);
        assert_relative_eq!(s.h, 8.26e-3, max_relative = 1e-3);
    }

    #[test]
    fn small_t_next_wins() {
        let p = params71(3.6);
        let s = ats_step_size(&GridKind::Ats1d, 1e-4, &p, 10).unwrap();
        assert_eq!(
            s,
            Step {
                h: 1e-4,
                clause: Clause::TNext
            }
        );
    }

    #[test]
    fn snap_absorbs_round_off() {
        let p = params71(3.6);
        let s = ats_step_size(&GridKind::AtsComparison { bound: 0.0 }, 0.1 + 1e-15, &p, 10).unwrap();
        assert_eq!(s.clause, Clause::TNext);
        assert_eq!(s.h, 0.1 + 1e-15);
    }

    #[test]
    fn multi_rejects_without_numerical_stability() {
        let problem = presets::damped_cubic_problem(1.0, 3.6).unwrap();
        let mut p = GridParams::from_problem(&problem);
        p.l_z = 0.6;
        p.numerically_stable = false;
        assert!(matches!(build_grid(&GridKind::AtsMulti, &p, 10), Err(Error::Config(_))));
    }

    #[test]
    fn strict_kinds_reject_non_decreasing_drivers() {
        let p = GridParams::from_problem(&presets::pure_cubic_problem(1.0).unwrap());
        let err = build_grid(&GridKind::AtsMulti, &p, 10).unwrap_err();
        assert!(
            matches!(&err, Error::Config(msg) if msg.contains("ats_gmongr")),
            "{err}"
        );
        assert!(build_grid(&GridKind::AtsMonotoneGrowth, &p, 10).is_ok());
        assert!(build_grid(&GridKind::AtsMonotoneGrowth, &params71(3.6), 10).is_err());
    }

    #[test]
    fn unbounded_terminal_needs_truncation() {
        let problem = presets::damped_cubic_problem(1.0, 3.6).unwrap();
        let problem = problem.with_terminal(TerminalSpec::square(1, 1).unwrap()).unwrap();
        let p = GridParams::from_problem(&problem);
        assert!(build_grid(&GridKind::Ats1d, &p, 10).is_err());
        let kind = GridKind::AtsTruncTerminal {
            base: BaseGrid::OneD,
            l0: 1.0,
            alpha: 0.5,
        };
        assert!(build_grid(&kind, &p, 10).is_ok());
    }

    #[test]
    fn truncation_schedule() {
        assert_eq!(truncation_level(1.0, 1.0, 3, 16), 2.0);
    }

    #[test]
    fn diagnostics_of_uniform_grid() {
        let g = build_grid(&GridKind::Uniform, &params71(4.0), 15).unwrap();
        let d = grid_diagnostics(&g, 15);
        assert_eq!((d.steps, d.excess, d.non_uniformity), (15, 1.0, 1.0));
    }

    #[test]
    fn stability_constants() {
        let s = StabilityConstants::new(-1.0, 0.0, 1);
        assert_eq!(s.hat_m_y, -0.25);
        assert_eq!(s.hat_h0, f64::INFINITY);
        assert_eq!(s.h0_lipz, H_MAX);
        let s = StabilityConstants::new(-1.0, 0.5, 1);
        assert_relative_eq!(s.hat_h0, 0.125 / (2.0 * 2.0 * 0.25));
    }
}
