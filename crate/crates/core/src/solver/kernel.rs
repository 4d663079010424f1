//! One backward step on a quantized chain.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg;
use crate::model::DriverSpec;
use crate::quantize::{ChainStep, SparseRow};
use crate::{Error, Result};

/// Values beyond this magnitude are reported as an explosion.
pub const EXPLOSION_THRESHOLD: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ImplicitOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Divergence cap on `|y|`.
    pub cap: f64,
}

impl Default for ImplicitOptions {
    fn default() -> Self {
        ImplicitOptions {
            tol: 1e-12,
            max_iter: 200,
            cap: EXPLOSION_THRESHOLD,
        }
    }
}

/// `z = sum_l p_l y_l H_l^T` for one row, written into `z` (`k x d`).
fn control(row: &SparseRow, y_next: &[f64], k: usize, d: usize, z: &mut [f64]) {
    z.fill(0.0);
    for (idx, (&c, &p)) in row.cols.iter().zip(&row.probs).enumerate() {
        let yl = &y_next[c as usize * k..(c as usize + 1) * k];
        let w = &row.weights[idx * d..(idx + 1) * d];
        for j in 0..k {
            let py = p * yl[j];
            for (a, &wc) in z[j * d..(j + 1) * d].iter_mut().zip(w) {
                *a += py * wc;
            }
        }
    }
}

/// `y = sum_l p_l (y_l + f(y_l, z) h)`.
fn explicit_value(
    row: &SparseRow,
    y_next: &[f64],
    z: &[f64],
    driver: &DriverSpec,
    h: f64,
    y: &mut [f64],
    f: &mut [f64],
) {
    let k = driver.k;
    y.fill(0.0);
    if k == 1 {
        let mut acc = 0.0;
        for (&c, &p) in row.cols.iter().zip(&row.probs) {
            let yl = y_next[c as usize];
            acc += p * (yl + driver.eval_scalar(yl, z) * h);
        }
        y[0] = acc;
        return;
    }
    for (&c, &p) in row.cols.iter().zip(&row.probs) {
        let yl = &y_next[c as usize * k..(c as usize + 1) * k];
        driver.eval_into(yl, z, f);
        for j in 0..k {
            y[j] += p * (yl[j] + f[j] * h);
        }
    }
}

fn magnitude(v: &[f64]) -> f64 {
    v.iter()
        .fold(0.0f64, |m, x| if x.is_nan() { f64::INFINITY } else { m.max(x.abs()) })
}

fn check(step: &ChainStep, node: usize, y: &[f64], z: &[f64]) -> Result<()> {
    let mag = magnitude(y).max(magnitude(z));
    if mag > EXPLOSION_THRESHOLD || !mag.is_finite() {
        return Err(Error::Explosion {
            time_index: step.index,
            node,
            magnitude: mag,
        });
    }
    Ok(())
}

/// Explicit step: per source node, `z` first, then `y` using that `z`.
/// Returns the `(y, z)` tables at the step's source time.
pub fn explicit_step(y_next: &[f64], step: &ChainStep, driver: &DriverSpec) -> Result<(Vec<f64>, Vec<f64>)> {
    let (k, d) = (driver.k, step.d);
    let nodes = step.rows.len();
    let mut ys = vec![0.0; nodes * k];
    let mut zs = vec![0.0; nodes * k * d];
    let mut f = vec![0.0; k];
    for (node, row) in step.rows.iter().enumerate() {
        let z = &mut zs[node * k * d..(node + 1) * k * d];
        control(row, y_next, k, d, z);
        let y = &mut ys[node * k..(node + 1) * k];
        explicit_value(row, y_next, z, driver, step.h, y, &mut f);
        check(step, node, y, z)?;
    }
    Ok((ys, zs))
}

/// Implicit step: `z` as in the explicit step, then `y` solves
/// `y = sum_l p_l y_l + f(y, z) h`.
///
/// The equation is solved by Newton's method with a forward-difference
/// Jacobian and a halving line search on the residual, started from the
/// explicit value (or from `sum_l p_l y_l` when that value is unusable).
pub fn implicit_step(
    y_next: &[f64],
    step: &ChainStep,
    driver: &DriverSpec,
    opts: &ImplicitOptions,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let (k, d) = (driver.k, step.d);
    let nodes = step.rows.len();
    let mut ys = vec![0.0; nodes * k];
    let mut zs = vec![0.0; nodes * k * d];
    let mut f = vec![0.0; k];
    let mut mean = vec![0.0; k];
    for (node, row) in step.rows.iter().enumerate() {
        let z = &mut zs[node * k * d..(node + 1) * k * d];
        control(row, y_next, k, d, z);
        mean.fill(0.0);
        for (&c, &p) in row.cols.iter().zip(&row.probs) {
            for j in 0..k {
                mean[j] += p * y_next[c as usize * k + j];
            }
        }
        let y = &mut ys[node * k..(node + 1) * k];
        explicit_value(row, y_next, z, driver, step.h, y, &mut f);
        if !(magnitude(y) <= opts.cap) {
            y.copy_from_slice(&mean);
        }
        solve_implicit(&mean, z, driver, step.h, opts, y).map_err(|e| match e {
            Solve::Diverged(m) => Error::Explosion {
                time_index: step.index,
                node,
                magnitude: m,
            },
            Solve::Stalled(r) => Error::NoConvergence {
                time_index: step.index,
                node,
                residual: r,
            },
        })?;
        check(step, node, y, z)?;
    }
    Ok((ys, zs))
}

enum Solve {
    Diverged(f64),
    Stalled(f64),
}

fn residual(y: &[f64], mean: &[f64], z: &[f64], driver: &DriverSpec, h: f64, out: &mut [f64]) {
    driver.eval_into(y, z, out);
    for j in 0..y.len() {
        out[j] = y[j] - mean[j] - h * out[j];
    }
}

fn solve_implicit(
    mean: &[f64],
    z: &[f64],
    driver: &DriverSpec,
    h: f64,
    opts: &ImplicitOptions,
    y: &mut [f64],
) -> core::result::Result<(), Solve> {
    let k = y.len();
    let mut r = vec![0.0; k];
    let mut r_trial = vec![0.0; k];
    let mut trial = vec![0.0; k];
    let mut jac = vec![0.0; k * k];
    let mut shifted = vec![0.0; k];
    let mut r_shift = vec![0.0; k];
    residual(y, mean, z, driver, h, &mut r);
    for _ in 0..opts.max_iter {
        let rn = linalg::norm(&r);
        if rn == 0.0 {
            return Ok(());
        }
        for c in 0..k {
            shifted.copy_from_slice(y);
            let delta = 1e-7 * y[c].abs().max(1.0);
            shifted[c] += delta;
            let delta = shifted[c] - y[c];
            residual(&shifted, mean, z, driver, h, &mut r_shift);
            for row in 0..k {
                jac[row * k + c] = (r_shift[row] - r[row]) / delta;
            }
        }
        let neg: Vec<f64> = r.iter().map(|v| -v).collect();
        let dir = linalg::solve(&jac, &neg).unwrap_or(neg);
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            for j in 0..k {
                trial[j] = y[j] + lambda * dir[j];
            }
            residual(&trial, mean, z, driver, h, &mut r_trial);
            let tn = linalg::norm(&r_trial);
            if tn.is_finite() && tn < rn {
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        let moved = magnitude(&dir) * lambda;
        if !accepted {
            // No decrease available: the iterate is as good as round-off allows.
            return if rn <= opts.tol * magnitude(y).max(1.0) * 1e3 {
                Ok(())
            } else {
                Err(Solve::Stalled(rn))
            };
        }
        y.copy_from_slice(&trial);
        r.copy_from_slice(&r_trial);
        let size = magnitude(y);
        if !(size <= opts.cap) {
            return Err(Solve::Diverged(size));
        }
        if moved <= opts.tol * size.max(1.0) {
            return Ok(());
        }
    }
    Err(Solve::Stalled(linalg::norm(&r)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{presets, DriverSpec};
    use approx::assert_abs_diff_eq;

    fn single(h: f64, y_next: f64) -> (ChainStep, Vec<f64>) {
        let row = SparseRow {
            cols: vec![0],
            probs: vec![1.0],
            weights: vec![0.0],
        };
        (
            ChainStep {
                index: 0,
                h,
                d: 1,
                rows: vec![row],
            },
            vec![y_next],
        )
    }

    fn linear() -> DriverSpec {
        DriverSpec::cubic_family(-1.0, 0.0, 0.0, None, 1, 1).unwrap()
    }

    #[test]
    fn explicit_linear_decay() {
        let (step, y) = single(0.1, 1.0);
        let (yi, zi) = explicit_step(&y, &step, &linear()).unwrap();
        assert_abs_diff_eq!(yi[0], 0.9, epsilon = 1e-16);
        assert_eq!(zi[0], 0.0);
        assert!(yi[0] <= libm::exp(-0.1));
    }

    #[test]
    fn explicit_zero_is_fixed() {
        let row = SparseRow {
            cols: vec![0, 1],
            probs: vec![0.5, 0.5],
            weights: vec![-0.3, 0.3],
        };
        let step = ChainStep {
            index: 0,
            h: 0.2,
            d: 1,
            rows: vec![row],
        };
        let (y, z) = explicit_step(&[0.0, 0.0], &step, &presets::cubic_damped()).unwrap();
        assert_eq!((y[0], z[0]), (0.0, 0.0));
    }

    #[test]
    fn explicit_odd_symmetry() {
        let row = SparseRow {
            cols: vec![0, 1],
            probs: vec![0.5, 0.5],
            weights: vec![-0.3, 0.3],
        };
        let step = ChainStep {
            index: 0,
            h: 0.2,
            d: 1,
            rows: vec![row],
        };
        let (y, z) = explicit_step(&[-1.7, 1.7], &step, &presets::pure_cubic(None)).unwrap();
        assert_eq!(y[0], 0.0);
        assert_abs_diff_eq!(z[0], 1.7 * 0.3, epsilon = 1e-15);
    }

    #[test]
    fn explicit_explosion_is_reported() {
        let (step, y) = single(0.9, 1e5);
        let err = explicit_step(&y, &step, &presets::cubic_damped()).unwrap_err();
        assert!(matches!(
            err,
            Error::Explosion {
                time_index: 0,
                node: 0,
                ..
            }
        ));
    }

    #[test]
    fn implicit_closed_forms() {
        let opts = ImplicitOptions::default();
        let (step, y) = single(0.1, 1.0);
        let (yi, _) = implicit_step(&y, &step, &linear(), &opts).unwrap();
        assert_abs_diff_eq!(yi[0], 1.0 / 1.1, epsilon = 1e-10);

        let (step, y) = single(0.95, 1.0);
        let (yi, _) = implicit_step(&y, &step, &presets::pure_cubic(None), &opts).unwrap();
        // Root of y + 0.95 y^3 = 1.
        let root = 0.689_115_320_246_979_7;
        assert_abs_diff_eq!(yi[0] + 0.95 * yi[0].powi(3), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(yi[0], root, epsilon = 1e-10);

        let zero = DriverSpec::cubic_family(0.0, 0.0, 0.0, None, 1, 1).unwrap();
        let row = SparseRow {
            cols: vec![0, 1],
            probs: vec![0.25, 0.75],
            weights: vec![-0.1, 0.1],
        };
        let step = ChainStep {
            index: 0,
            h: 0.3,
            d: 1,
            rows: vec![row],
        };
        let (yi, _) = implicit_step(&[2.0, 4.0], &step, &zero, &opts).unwrap();
        assert_eq!(yi[0], 3.5);
    }

    #[test]
    fn implicit_unit_step_cubic_root() {
        // y + y^3 = 1 with h = 1 (kernel only; grids cap steps at 0.95).
        let (step, y) = single(1.0, 1.0);
        let (yi, _) = implicit_step(&y, &step, &presets::pure_cubic(None), &ImplicitOptions::default()).unwrap();
        assert_abs_diff_eq!(yi[0], 0.682_327_803_828_019_3, epsilon = 1e-10);
    }

    #[test]
    fn implicit_stiff_start() {
        // Explicit value explodes; the implicit solve still lands on the root.
        let (step, y) = single(0.5, 50.0);
        let (yi, _) = implicit_step(&y, &step, &presets::pure_cubic(None), &ImplicitOptions::default()).unwrap();
        assert_abs_diff_eq!(yi[0] + 0.5 * yi[0].powi(3), 50.0, epsilon = 1e-9);
    }

    #[test]
    fn vector_implicit() {
        let driver = DriverSpec::cubic_family(-1.0, 1.0, 0.0, None, 2, 1).unwrap();
        let row = SparseRow {
            cols: vec![0],
            probs: vec![1.0],
            weights: vec![0.0],
        };
        let step = ChainStep {
            index: 0,
            h: 0.4,
            d: 1,
            rows: vec![row],
        };
        let (yi, _) = implicit_step(&[1.0, -2.0], &step, &driver, &ImplicitOptions::default()).unwrap();
        let sq = yi[0] * yi[0] + yi[1] * yi[1];
        assert_abs_diff_eq!(yi[0] * (1.0 + 0.4 * (1.0 + sq)), 1.0, epsilon = 1e-11);
        assert_abs_diff_eq!(yi[1] * (1.0 + 0.4 * (1.0 + sq)), -2.0, epsilon = 1e-11);
    }
}
