//! The six subcommands. Each writes its CSV files and returns a summary
//! value plus a verdict.

use std::time::Instant;

use anyhow::Result;
use ats_core::diagnostics::{
    assemble_report, comparison_check, convergence_point, reference_points, sandwich_check, sweep_envelope,
    ConvergencePoint, SandwichRow, SLOPE_WINDOW,
};
use ats_core::model::{validate_driver, DriverSpec, ProblemSpec, TerminalSpec, ValidationOptions};
use ats_core::pipeline::Pipeline;
use ats_core::quantize::{build_step, ChainStep, LazyChain, QuantizedChain};
use ats_core::solver::{sweep, BackwardSolution, Sweep};
use ats_core::timegrid::{build_grid, grid_diagnostics, GridParams, TimeGrid};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{DriverBlock, DumpLevel, ExperimentConfig};
use crate::output::{float, header, Artifacts, Stage};
use crate::{ConfigError, Outcome};

pub struct Run<'a> {
    pub config: &'a ExperimentConfig,
    pub artifacts: &'a mut Artifacts,
    pub timings: Vec<Stage>,
}

impl Run<'_> {
    fn time<T>(&mut self, name: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.timings.push(Stage {
            name: name.into(),
            seconds: start.elapsed().as_secs_f64(),
        });
        out
    }

    fn pipeline(&self) -> Result<(Pipeline, usize)> {
        let c = self.config;
        let problem = c.problem()?;
        let kind = c.grid_kind(&problem)?;
        Ok((
            Pipeline::new(&problem, kind, c.scheme()?, c.policy()?, c.mode()?),
            c.n()?,
        ))
    }
}

fn verdict(pass: bool) -> Outcome {
    if pass {
        Outcome::Pass
    } else {
        Outcome::Fail
    }
}

/// Builds every transition step in parallel; steps are independent and each
/// is deterministic, so the result does not depend on the thread count.
fn materialize(problem: &ProblemSpec, grid: &TimeGrid, pipeline: &Pipeline) -> ats_core::Result<QuantizedChain> {
    let lazy = LazyChain::new(problem, grid, &pipeline.policy, pipeline.mode)?;
    let steps = (0..grid.len())
        .into_par_iter()
        .map(|i| build_step(&lazy.forward, &lazy.grid, &lazy.spaces, i, lazy.mode))
        .collect::<ats_core::Result<Vec<ChainStep>>>()?;
    Ok(QuantizedChain {
        grid: lazy.grid,
        spaces: lazy.spaces,
        steps,
    })
}

fn component_names(prefix: &str, n: usize) -> Vec<String> {
    if n == 1 {
        vec![prefix.to_string()]
    } else {
        (0..n).map(|j| format!("{prefix}_{j}")).collect()
    }
}

fn floats(v: &[f64]) -> impl Iterator<Item = String> + '_ {
    v.iter().map(|&x| float(x))
}

fn failure_json(s: &Sweep) -> Value {
    match &s.failure {
        None => Value::Null,
        Some(e) => json!(e.to_string()),
    }
}

pub fn grid(run: &mut Run) -> Result<(Value, Outcome)> {
    let c = run.config;
    let problem = c.problem()?;
    let kind = c.grid_kind(&problem)?;
    let n = c.n()?;
    let grid = run.time("grid", || build_grid(&kind, &GridParams::from_problem(&problem), n))?;
    let rows = (0..grid.len()).map(|i| {
        vec![
            i.to_string(),
            float(grid.times[i]),
            float(grid.steps[i]),
            grid.clauses[i].label().to_string(),
        ]
    });
    run.artifacts
        .csv("grid.csv", &header(&["i", "t_i", "h_i", "active_clause"]), rows)?;
    let diag = grid_diagnostics(&grid, n);
    println!(
        "{} n={n}: N={} excess={:.4} non_uniformity={:.4} min_step={:.6e} max_step={:.6e}",
        kind.name(),
        diag.steps,
        diag.excess,
        diag.non_uniformity,
        diag.min_step,
        diag.max_step
    );
    let summary = json!({
        "grid_kind": kind.name(),
        "n": n,
        "steps": diag.steps,
        "excess": diag.excess,
        "non_uniformity": diag.non_uniformity,
        "min_step": diag.min_step,
        "max_step": diag.max_step,
        "pass": true,
    });
    Ok((summary, Outcome::Pass))
}

fn solve_rows(sol: &BackwardSolution) -> Vec<Vec<String>> {
    (sol.first_index..sol.y.len())
        .map(|i| {
            let origin = sol.origin_nodes[i];
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for &v in &sol.y[i] {
                lo = lo.min(v);
                hi = hi.max(v);
            }
            let h = if i < sol.grid.len() {
                float(sol.grid.steps[i])
            } else {
                String::new()
            };
            let mut row = vec![i.to_string(), float(sol.grid.times[i]), h, float(lo), float(hi)];
            row.extend(floats(sol.value_at(i, origin)));
            row.extend(floats(sol.control_at(i, origin)));
            row
        })
        .collect()
}

fn dump_tables(artifacts: &mut Artifacts, sol: &BackwardSolution, chain: &QuantizedChain) -> Result<()> {
    let d = chain.spaces[0].dim();
    let mut cols = header(&["i", "t_i", "node"]);
    cols.extend(component_names("x", d));
    cols.extend(component_names("y", sol.k));
    cols.extend(component_names("z", sol.k * sol.d));
    let mut rows = Vec::new();
    for i in sol.first_index..sol.y.len() {
        for node in 0..sol.nodes(i) {
            let mut row = vec![i.to_string(), float(sol.grid.times[i]), node.to_string()];
            row.extend(floats(&chain.spaces[i].node_vec(node)));
            row.extend(floats(sol.value_at(i, node)));
            row.extend(floats(sol.control_at(i, node)));
            rows.push(row);
        }
    }
    artifacts.csv("tables.csv", &cols, rows)
}

fn dump_chain(artifacts: &mut Artifacts, chain: &QuantizedChain) -> Result<()> {
    let d = chain.spaces[0].dim();
    let mut cols = header(&["i", "k", "l", "p"]);
    cols.extend(component_names("h", d));
    let rows = chain.steps.iter().flat_map(|step| {
        step.rows.iter().enumerate().flat_map(move |(k, row)| {
            row.cols.iter().zip(&row.probs).enumerate().map(move |(j, (&l, &p))| {
                let mut r = vec![step.index.to_string(), k.to_string(), l.to_string(), float(p)];
                r.extend(floats(&row.weights[j * d..(j + 1) * d]));
                r
            })
        })
    });
    artifacts.csv("chain.csv", &cols, rows)
}

fn solve_header(k: usize, d: usize) -> Vec<String> {
    let mut cols = header(&["i", "t_i", "h_i", "min_y", "max_y"]);
    cols.extend(component_names("y_at_x0", k));
    cols.extend(component_names("z_at_x0", k * d));
    cols
}

pub fn solve(run: &mut Run) -> Result<(Value, Outcome)> {
    let (pipeline, n) = run.pipeline()?;
    let dump = run.config.dump()?;
    let grid = run.time("grid", || pipeline.grid(n))?;
    let chain = run.time("chain", || materialize(&pipeline.problem, &grid, &pipeline))?;
    let s = run.time("sweep", || sweep(&chain, &pipeline.problem, pipeline.scheme))?;
    let sol = &s.solution;
    run.artifacts
        .csv("solve.csv", &solve_header(sol.k, sol.d), solve_rows(sol))?;
    if dump >= DumpLevel::Tables {
        dump_tables(run.artifacts, sol, &chain)?;
    }
    if dump >= DumpLevel::Chain {
        dump_chain(run.artifacts, &chain)?;
    }
    let complete = s.failure.is_none();
    let summary = json!({
        "grid_kind": pipeline.grid_kind.name(),
        "scheme": pipeline.scheme.name(),
        "n": n,
        "steps": grid.len(),
        "complete": complete,
        "failure": failure_json(&s),
        "y0": if complete { json!(sol.value_at_origin()) } else { Value::Null },
        "z0": if complete { json!(sol.control_at_origin()) } else { Value::Null },
        "pass": complete,
    });
    Ok((summary, verdict(complete)))
}

pub fn stability(run: &mut Run) -> Result<(Value, Outcome)> {
    let (pipeline, n) = run.pipeline()?;
    let (regime, tolerance) = run.config.stability(&pipeline.grid_kind)?;
    let grid = run.time("grid", || pipeline.grid(n))?;
    let chain = run.time("chain", || materialize(&pipeline.problem, &grid, &pipeline))?;
    let s = run.time("sweep", || sweep(&chain, &pipeline.problem, pipeline.scheme))?;
    let env = sweep_envelope(&s, &pipeline.problem, regime, tolerance)?;
    let rows = env.points.iter().map(|p| {
        vec![
            p.index.to_string(),
            float(p.time),
            float(p.min),
            float(p.max),
            float(p.max_abs),
            float(p.bound),
            u8::from(env.violations.contains(&p.index)).to_string(),
        ]
    });
    let cols = header(&["i", "t_i", "min_y", "max_y", "max_abs_y", "bound", "violation"]);
    run.artifacts.csv("stability.csv", &cols, rows)?;
    let pass = env.passes();
    let summary = json!({
        "grid_kind": pipeline.grid_kind.name(),
        "scheme": pipeline.scheme.name(),
        "regime": regime.name(),
        "tolerance": tolerance,
        "n": n,
        "steps": grid.len(),
        "violations": env.violations,
        "min_value": env.min_value(),
        "explosion": env.explosion.map(|(i, m)| json!({"time_index": i, "magnitude": m})),
        "pass": pass,
    });
    Ok((summary, verdict(pass)))
}

pub fn compare(run: &mut Run) -> Result<(Value, Outcome)> {
    let c = run.config;
    let block = c
        .compare
        .as_ref()
        .ok_or_else(|| ConfigError("missing [compare] block".into()))?;
    let base = c.problem()?;
    let (hi, lo) = match block.against.as_str() {
        "shift" => {
            let shift = match block.shift {
                Some(s) if s >= 0.0 && s.is_finite() => s,
                _ => return Err(ConfigError("compare.against = \"shift\" needs compare.shift >= 0".into()).into()),
            };
            (base.with_terminal(base.terminal.shifted(shift)?)?, base.clone())
        }
        "zero" => {
            let k = base.driver.k;
            (
                base.clone(),
                base.with_terminal(TerminalSpec::zero(k, base.forward.dim())?)?,
            )
        }
        other => return Err(ConfigError(format!("unknown compare.against {other:?}; expected shift or zero")).into()),
    };
    // The grid and chain come from the upper problem so both sweeps share them.
    let kind = c.grid_kind(&hi)?;
    let n = c.n()?;
    let pipeline = Pipeline::new(&hi, kind, c.scheme()?, c.policy()?, c.mode()?);
    let grid = run.time("grid", || pipeline.grid(n))?;
    let chain = run.time("chain", || materialize(&hi, &grid, &pipeline))?;
    let (s_hi, s_lo) = run.time("sweeps", || {
        rayon::join(
            || sweep(&chain, &hi, pipeline.scheme),
            || sweep(&chain, &lo, pipeline.scheme),
        )
    });
    let (s_hi, s_lo) = (s_hi?, s_lo?);
    if s_hi.failure.is_some() || s_lo.failure.is_some() {
        let summary = json!({
            "grid_kind": kind.name(),
            "scheme": pipeline.scheme.name(),
            "upper_failure": failure_json(&s_hi),
            "lower_failure": failure_json(&s_lo),
            "pass": false,
        });
        return Ok((summary, Outcome::Fail));
    }
    let report = comparison_check(&s_hi.solution, &s_lo.solution)?;
    let (a, b) = (&s_hi.solution, &s_lo.solution);
    let k = a.k;
    let rows = report.differences.iter().enumerate().flat_map(|(i, diff)| {
        diff.iter().enumerate().map(move |(idx, &dv)| {
            vec![
                i.to_string(),
                float(a.grid.times[i]),
                (idx / k).to_string(),
                (idx % k).to_string(),
                float(a.y[i][idx]),
                float(b.y[i][idx]),
                float(dv),
            ]
        })
    });
    let cols = header(&["i", "t_i", "node", "component", "y_upper", "y_lower", "difference"]);
    run.artifacts.csv("compare.csv", &cols, rows)?;
    let summary = json!({
        "grid_kind": kind.name(),
        "scheme": pipeline.scheme.name(),
        "against": block.against,
        "n": n,
        "steps": grid.len(),
        "min_difference": report.min_difference,
        "argmin": {"time_index": report.argmin.0, "node": report.argmin.1},
        "tolerance": report.tolerance,
        "pass": report.pass,
    });
    Ok((summary, verdict(report.pass)))
}

pub fn convergence(run: &mut Run) -> Result<(Value, Outcome)> {
    let c = run.config;
    let problem = c.problem()?;
    let kind = c.grid_kind(&problem)?;
    let pipeline = Pipeline::new(&problem, kind, c.scheme()?, c.policy()?, c.mode()?);
    let (n_list, policy, with_sandwich) = c.reference()?;

    let start = Instant::now();
    let reference = reference_points(&pipeline, policy)?;
    run.timings.push(Stage {
        name: "reference".into(),
        seconds: start.elapsed().as_secs_f64(),
    });

    let timed: Vec<(ConvergencePoint, f64)> = n_list
        .par_iter()
        .map(|&n| {
            let start = Instant::now();
            let p = convergence_point(&pipeline, n)?;
            Ok((p, start.elapsed().as_secs_f64()))
        })
        .collect::<ats_core::Result<_>>()?;
    let mut points = Vec::with_capacity(timed.len());
    for (mut p, secs) in timed {
        run.timings.push(Stage {
            name: format!("n={}", p.n),
            seconds: secs,
        });
        p.elapsed = Some(secs);
        points.push(p);
    }
    let report = assemble_report(points, reference)?;

    let (k, d) = (problem.driver.k, problem.forward.dim());
    let mut cols = header(&["role", "n", "steps"]);
    cols.extend(component_names("y0", k));
    cols.extend(component_names("z0", k * d));
    cols.push("error".into());
    let row = |role: &str, p: &ConvergencePoint, err: Option<f64>| {
        let mut r = vec![role.to_string(), p.n.to_string(), p.steps.to_string()];
        r.extend(floats(&p.y0));
        r.extend(floats(&p.z0));
        r.push(err.map(float).unwrap_or_default());
        r
    };
    let roles: &[&str] = match policy {
        ats_core::diagnostics::ReferencePolicy::FineGrid { .. } => &["reference"],
        _ => &["reference_implicit", "reference_explicit"],
    };
    let mut rows: Vec<Vec<String>> = report
        .reference_points
        .iter()
        .zip(roles)
        .map(|(p, role)| row(role, p, None))
        .collect();
    rows.extend(
        report
            .points
            .iter()
            .zip(&report.errors)
            .map(|(p, &e)| row("point", p, Some(e))),
    );
    run.artifacts.csv("convergence.csv", &cols, rows)?;

    let slope_pass = report.slope_in_window();
    let mut pass = slope_pass;
    let mut summary = json!({
        "grid_kind": kind.name(),
        "scheme": pipeline.scheme.name(),
        "n_list": n_list,
        "reference": report.reference,
        "errors": report.errors,
        "slope": report.slope,
        "slope_window": [SLOPE_WINDOW.0, SLOPE_WINDOW.1],
        "slope_pass": slope_pass,
    });
    if with_sandwich {
        let start = Instant::now();
        let rows: Vec<SandwichRow> = n_list
            .par_iter()
            .map(|&n| sandwich_check(&pipeline, &[n]).map(|r| r.rows.into_iter().next().expect("one row")))
            .collect::<ats_core::Result<_>>()?;
        run.timings.push(Stage {
            name: "sandwich".into(),
            seconds: start.elapsed().as_secs_f64(),
        });
        let inside = rows.iter().filter(|r| r.inside).count();
        // At least three quarters of the resolutions must be sandwiched.
        let sandwich_pass = 4 * inside >= 3 * rows.len();
        pass &= sandwich_pass;
        let csv_rows = rows.iter().map(|r| {
            vec![
                r.n.to_string(),
                float(r.ats),
                r.explicit_uniform.map(float).unwrap_or_default(),
                float(r.implicit_uniform),
                u8::from(r.inside).to_string(),
            ]
        });
        let cols = header(&["n", "ats", "explicit_uniform", "implicit_uniform", "inside"]);
        run.artifacts.csv("sandwich.csv", &cols, csv_rows)?;
        summary["sandwich_inside"] = json!(inside);
        summary["sandwich_pass"] = json!(sandwich_pass);
    }
    summary["pass"] = json!(pass);
    Ok((summary, verdict(pass)))
}

pub fn validate(run: &mut Run, seed: u64) -> Result<(Value, Outcome)> {
    let c = run.config;
    let block = c
        .validate
        .as_ref()
        .ok_or_else(|| ConfigError("missing [validate] block".into()))?;
    let driver: DriverSpec = match &block.driver {
        Some(name) => crate::config::resolve_driver(
            &DriverBlock {
                kind: name.clone(),
                linear: None,
                cubic: None,
                z_coupling: None,
                radius: None,
                rate: None,
                k: None,
            },
            1,
        )?,
        None => c.problem()?.driver,
    };
    if block.samples == 0 {
        return Err(ConfigError("validate.samples must be at least 1".into()).into());
    }
    if !(block.box_half_width > 0.0) || !(block.tolerance >= 0.0) {
        return Err(
            ConfigError("validate.box_half_width must be positive and validate.tolerance non-negative".into()).into(),
        );
    }
    let options = ValidationOptions {
        box_half_width: block.box_half_width,
        tolerance: block.tolerance,
    };
    let report = run.time("validate", || validate_driver(&driver, block.samples, seed, options));
    let rows = report.checks.iter().map(|ch| {
        vec![
            ch.condition.name().to_string(),
            u8::from(ch.required).to_string(),
            ch.samples.to_string(),
            float(ch.worst_slack),
            u8::from(ch.pass).to_string(),
        ]
    });
    let cols = header(&["condition", "required", "samples", "worst_slack", "pass"]);
    run.artifacts.csv("validate.csv", &cols, rows)?;
    let pass = report.all_pass();
    let checks: Vec<Value> = report
        .checks
        .iter()
        .map(|ch| json!({"condition": ch.condition.name(), "required": ch.required, "worst_slack": ch.worst_slack, "pass": ch.pass}))
        .collect();
    let summary = json!({"seed": seed, "samples": block.samples, "checks": checks, "pass": pass});
    Ok((summary, verdict(pass)))
}
