use alloc::format;
use alloc::vec::Vec;

use crate::pipeline::Pipeline;
use crate::solver::{ImplicitOptions, SchemeKind};
use crate::timegrid::GridKind;
use crate::{Error, Result};

/// Accepted range for the fitted log-log slope of the error.
pub const SLOPE_WINDOW: (f64, f64) = (-0.75, -0.30);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReferencePolicy {
    /// The same scheme at `n_ref`.
    FineGrid { n_ref: usize },
    /// Average of the implicit and explicit uniform-grid values at `n_ref`.
    ImplicitExplicitAverage { n_ref: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergencePoint {
    pub n: usize,
    pub steps: usize,
    pub y0: Vec<f64>,
    pub z0: Vec<f64>,
    /// Wall time in seconds, when the caller measured it.
    pub elapsed: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceReport {
    pub points: Vec<ConvergencePoint>,
    pub reference_points: Vec<ConvergencePoint>,
    pub reference: Vec<f64>,
    pub errors: Vec<f64>,
    pub slope: f64,
}

impl ConvergenceReport {
    pub fn slope_in_window(&self) -> bool {
        self.slope >= SLOPE_WINDOW.0 && self.slope <= SLOPE_WINDOW.1
    }
}

/// Runs the pipeline at `n` and records the values at `(0, x0)`.
pub fn convergence_point(pipeline: &Pipeline, n: usize) -> Result<ConvergencePoint> {
    let run = pipeline.run(n)?;
    Ok(ConvergencePoint {
        n,
        steps: run.grid.len(),
        y0: run.solution.value_at_origin().to_vec(),
        z0: run.solution.control_at_origin().to_vec(),
        elapsed: None,
    })
}

/// Reference runs for a policy: one for a fine grid, implicit then explicit
/// for the average.
pub fn reference_points(pipeline: &Pipeline, policy: ReferencePolicy) -> Result<Vec<ConvergencePoint>> {
    let diagnose = |e: Error, what: &str| Error::config(format!("reference run ({what}) failed: {e}"));
    match policy {
        ReferencePolicy::FineGrid { n_ref } => Ok(alloc::vec![
            convergence_point(pipeline, n_ref).map_err(|e| diagnose(e, "fine grid"))?
        ]),
        ReferencePolicy::ImplicitExplicitAverage { n_ref } => {
            let implicit = pipeline.with_scheme(
                GridKind::Uniform,
                SchemeKind::ImplicitUniform(ImplicitOptions::default()),
            );
            let explicit = pipeline.with_scheme(GridKind::Uniform, SchemeKind::ExplicitUniform);
            Ok(alloc::vec![
                convergence_point(&implicit, n_ref).map_err(|e| diagnose(e, "implicit"))?,
                convergence_point(&explicit, n_ref).map_err(|e| diagnose(e, "explicit"))?,
            ])
        }
    }
}

/// Least-squares slope of `ln error` against `ln n`, over positive errors.
/// `NaN` with fewer than two usable points.
pub fn fit_slope(ns: &[usize], errors: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = ns
        .iter()
        .zip(errors)
        .filter(|(_, &e)| e > 0.0 && e.is_finite())
        .map(|(&n, &e)| (libm::log(n as f64), libm::log(e)))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

pub fn assemble_report(
    points: Vec<ConvergencePoint>,
    reference_points: Vec<ConvergencePoint>,
) -> Result<ConvergenceReport> {
    if points.windows(2).any(|w| w[0].n >= w[1].n) {
        return Err(Error::config(
            "n values of a convergence study must be strictly increasing",
        ));
    }
    let first = reference_points
        .first()
        .ok_or_else(|| Error::config("missing reference run"))?;
    let mut reference = alloc::vec![0.0; first.y0.len()];
    for r in &reference_points {
        for (a, v) in reference.iter_mut().zip(&r.y0) {
            *a += v / reference_points.len() as f64;
        }
    }
    let errors: Vec<f64> = points
        .iter()
        .map(|p| libm::sqrt(p.y0.iter().zip(&reference).map(|(a, b)| (a - b) * (a - b)).sum()))
        .collect();
    let ns: Vec<usize> = points.iter().map(|p| p.n).collect();
    let slope = fit_slope(&ns, &errors);
    Ok(ConvergenceReport {
        points,
        reference_points,
        reference,
        errors,
        slope,
    })
}

/// Sequential study; each run is independent, so callers may also compute
/// the points in parallel and call [`assemble_report`].
pub fn convergence_study(pipeline: &Pipeline, n_list: &[usize], policy: ReferencePolicy) -> Result<ConvergenceReport> {
    if n_list.windows(2).any(|w| w[0] >= w[1]) || n_list.is_empty() {
        return Err(Error::config(
            "n values of a convergence study must be non-empty and strictly increasing",
        ));
    }
    let reference = reference_points(pipeline, policy)?;
    let points = n_list
        .iter()
        .map(|&n| convergence_point(pipeline, n))
        .collect::<Result<Vec<_>>>()?;
    assemble_report(points, reference)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SandwichRow {
    pub n: usize,
    pub ats: f64,
    /// `None` when the uniform explicit sweep blew up.
    pub explicit_uniform: Option<f64>,
    pub implicit_uniform: f64,
    pub inside: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SandwichReport {
    pub rows: Vec<SandwichRow>,
}

impl SandwichReport {
    pub fn count_inside(&self) -> usize {
        self.rows.iter().filter(|r| r.inside).count()
    }
}

/// Whether the adapted explicit value at `(0, x0)` lies in the closed
/// interval spanned by the uniform explicit and implicit values, per `n`.
/// Compares the first component.
pub fn sandwich_check(ats: &Pipeline, n_list: &[usize]) -> Result<SandwichReport> {
    let explicit = ats.with_scheme(GridKind::Uniform, SchemeKind::ExplicitUniform);
    let implicit = ats.with_scheme(
        GridKind::Uniform,
        SchemeKind::ImplicitUniform(ImplicitOptions::default()),
    );
    let rows = n_list
        .iter()
        .map(|&n| {
            let a = convergence_point(ats, n)?.y0[0];
            let s = explicit.sweep(n)?;
            let e = if s.failure.is_none() {
                Some(s.solution.value_at_origin()[0])
            } else {
                None
            };
            let i = convergence_point(&implicit, n)?.y0[0];
            Ok(sandwich_row(n, a, e, i))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SandwichReport { rows })
}

pub(crate) fn sandwich_row(n: usize, ats: f64, explicit: Option<f64>, implicit: f64) -> SandwichRow {
    let inside = explicit.is_some_and(|e| ats >= e.min(implicit) && ats <= e.max(implicit));
    SandwichRow {
        n,
        ats,
        explicit_uniform: explicit,
        implicit_uniform: implicit,
        inside,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn slope_of_power_law() {
        let ns = [10, 20, 40, 80];
        let errs: Vec<f64> = ns.iter().map(|&n| 3.0 / libm::sqrt(n as f64)).collect();
        assert_abs_diff_eq!(fit_slope(&ns, &errs), -0.5, epsilon = 1e-12);
        assert!(fit_slope(&[10], &[1.0]).is_nan());
        assert!(fit_slope(&[10, 20], &[0.0, 1.0]).is_nan());
    }

    #[test]
    fn sandwich_interval_is_closed() {
        assert!(sandwich_row(10, 1.0, Some(1.0), 2.0).inside);
        assert!(sandwich_row(10, 1.5, Some(2.0), 1.0).inside);
        assert!(!sandwich_row(10, 2.5, Some(2.0), 1.0).inside);
        assert!(!sandwich_row(10, 1.5, None, 1.0).inside);
    }

    #[test]
    fn report_rejects_unsorted() {
        let p = |n| ConvergencePoint {
            n,
            steps: n,
            y0: alloc::vec![1.0],
            z0: alloc::vec![0.0],
            elapsed: None,
        };
        assert!(assemble_report(alloc::vec![p(20), p(10)], alloc::vec![p(50)]).is_err());
        let r = assemble_report(alloc::vec![p(10), p(20)], alloc::vec![p(50)]).unwrap();
        assert_eq!(r.errors, alloc::vec![0.0, 0.0]);
    }
}
