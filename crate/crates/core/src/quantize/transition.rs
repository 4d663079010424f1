use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::SpatialGrid;
use crate::gaussian;
use crate::linalg;
use crate::model::ForwardSpec;
use crate::timegrid::radius;
use crate::{Error, Result};

/// Analytic rows keep only the target cells within this many standard
/// deviations of the Euler mean; the outermost kept cells absorb the
/// remaining tails (less than 1e-30 of mass).
pub const WINDOW_STD_DEVS: f64 = 12.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TransitionMode {
    /// Exact Gaussian mass of each projection cell; `d = 1` only.
    Analytic1d,
    /// Empirical frequencies of projected Euler steps. Each source row of
    /// each step draws from its own ChaCha stream.
    MonteCarlo { samples: usize, seed: u64 },
}

/// Transition probabilities from node `k` of `source` (at time `t`) to the
/// nodes of `target` after a step `h`, as sorted `(column, probability)` pairs.
#[allow(clippy::too_many_arguments)]
pub fn transition_row(
    mode: TransitionMode,
    source: &SpatialGrid,
    k: usize,
    target: &SpatialGrid,
    forward: &ForwardSpec,
    t: f64,
    h: f64,
    step_index: usize,
) -> Result<(Vec<u32>, Vec<f64>)> {
    let d = source.dim();
    if target.len() == 1 {
        return Ok((vec![0], vec![1.0]));
    }
    let x = source.node_vec(k);
    let mut mu = vec![0.0; d];
    forward.drift(t, &x, &mut mu);
    let mut sigma = vec![0.0; d * d];
    forward.diffusion(t, &x, &mut sigma);
    match mode {
        TransitionMode::Analytic1d => {
            if d != 1 {
                return Err(Error::config(
                    "analytic transitions need d = 1; use the Monte Carlo mode",
                ));
            }
            let mean = x[0] + mu[0] * h;
            let s = sigma[0].abs() * libm::sqrt(h);
            if !(s > 0.0) || !s.is_finite() {
                return Err(Error::DegenerateDistribution { time: t });
            }
            Ok(analytic_row(target, mean, s))
        }
        TransitionMode::MonteCarlo { samples, seed } => {
            if samples == 0 {
                return Err(Error::config("Monte Carlo transitions need at least one sample"));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(((step_index as u64) << 32) | k as u64);
            let sqrt_h = libm::sqrt(h);
            let mut g = vec![0.0; d];
            let mut y = vec![0.0; d];
            let mut counts: BTreeMap<u32, u64> = BTreeMap::new();
            for _ in 0..samples {
                for v in g.iter_mut() {
                    *v = StandardNormal.sample(&mut rng);
                }
                for i in 0..d {
                    let noise: f64 = (0..d).map(|j| sigma[i * d + j] * g[j]).sum();
                    y[i] = x[i] + mu[i] * h + noise * sqrt_h;
                }
                *counts.entry(target.project(&y) as u32).or_insert(0) += 1;
            }
            let n = samples as f64;
            Ok(counts.into_iter().map(|(c, m)| (c, m as f64 / n)).unzip())
        }
    }
}

fn analytic_row(target: &SpatialGrid, mean: f64, s: f64) -> (Vec<u32>, Vec<f64>) {
    let last = 2 * target.half_count;
    let lo = target.axis_index(0, mean - WINDOW_STD_DEVS * s);
    let hi = target.axis_index(0, mean + WINDOW_STD_DEVS * s);
    let boundary = |j: usize, upper: bool| {
        let off = j as f64 - target.half_count as f64 + if upper { 0.5 } else { -0.5 };
        target.center[0] + off * target.spacing
    };
    let mut cols = Vec::with_capacity(hi - lo + 1);
    let mut probs = Vec::with_capacity(hi - lo + 1);
    for j in lo..=hi {
        let a = if j == lo {
            f64::NEG_INFINITY
        } else {
            (boundary(j, false) - mean) / s
        };
        let b = if j == hi || j == last {
            f64::INFINITY
        } else {
            (boundary(j, true) - mean) / s
        };
        cols.push(j as u32);
        probs.push(gaussian::interval(a, b));
    }
    (cols, probs)
}

/// Truncated increment weights `clamp(sigma^{-1}(x_l - x_k - mu h), +-R(h)) / h`
/// for the listed target columns, `d` values per column.
#[allow(clippy::too_many_arguments)]
pub fn increment_weights(
    source: &SpatialGrid,
    k: usize,
    target: &SpatialGrid,
    cols: &[u32],
    forward: &ForwardSpec,
    t: f64,
    h: f64,
) -> Result<Vec<f64>> {
    let d = source.dim();
    let x = source.node_vec(k);
    let mut mu = vec![0.0; d];
    forward.drift(t, &x, &mut mu);
    let mut sigma = vec![0.0; d * d];
    forward.diffusion(t, &x, &mut sigma);
    let r = radius(h);
    let mut out = Vec::with_capacity(cols.len() * d);
    let mut y = vec![0.0; d];
    let mut delta = vec![0.0; d];
    for &c in cols {
        target.node(c as usize, &mut y);
        for i in 0..d {
            delta[i] = y[i] - x[i] - mu[i] * h;
        }
        let w = linalg::solve(&sigma, &delta).ok_or(Error::SingularDiffusion { time: t })?;
        out.extend(w.into_iter().map(|v| v.clamp(-r, r) / h));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Coefficients;
    use approx::assert_abs_diff_eq;

    fn bm() -> ForwardSpec {
        ForwardSpec::brownian(vec![0.0]).unwrap()
    }

    #[test]
    fn single_target_node() {
        let src = SpatialGrid::single(vec![0.0]);
        let (c, p) = transition_row(TransitionMode::Analytic1d, &src, 0, &src, &bm(), 0.0, 0.5, 0).unwrap();
        assert_eq!((c, p), (vec![0], vec![1.0]));
    }

    #[test]
    fn three_node_middle_mass() {
        let src = SpatialGrid::single(vec![0.0]);
        let tgt = SpatialGrid {
            center: vec![0.0],
            spacing: 1.0,
            half_count: 1,
        };
        let (c, p) = transition_row(TransitionMode::Analytic1d, &src, 0, &tgt, &bm(), 0.0, 0.95, 0).unwrap();
        assert_eq!(c, vec![0, 1, 2]);
        // With h = 1 the middle mass is Phi(0.5) - Phi(-0.5); here s = sqrt(0.95).
        let s = libm::sqrt(0.95);
        assert_abs_diff_eq!(p[1], gaussian::interval(-0.5 / s, 0.5 / s), epsilon = 1e-16);
        assert_abs_diff_eq!(p.iter().sum::<f64>(), 1.0, epsilon = 1e-15);
        let p1 = analytic_row(&tgt, 0.0, 1.0).1;
        assert_abs_diff_eq!(p1[1], 0.382_924_922_548_026_2, epsilon = 1e-15);
    }

    #[test]
    fn degenerate_sigma_is_rejected() {
        let f = ForwardSpec::new(
            vec![0.0],
            Coefficients::Constant {
                drift: vec![0.0],
                diffusion: vec![0.0],
            },
        )
        .unwrap();
        let src = SpatialGrid::single(vec![0.0]);
        let tgt = SpatialGrid {
            center: vec![0.0],
            spacing: 1.0,
            half_count: 1,
        };
        assert!(matches!(
            transition_row(TransitionMode::Analytic1d, &src, 0, &tgt, &f, 0.0, 0.5, 0),
            Err(Error::DegenerateDistribution { .. })
        ));
        assert!(matches!(
            increment_weights(&src, 0, &tgt, &[0, 1], &f, 0.0, 0.5),
            Err(Error::SingularDiffusion { .. })
        ));
    }

    #[test]
    fn weights() {
        let src = SpatialGrid::single(vec![0.0]);
        let tgt = SpatialGrid {
            center: vec![0.0],
            spacing: 0.05,
            half_count: 1,
        };
        let w = increment_weights(&src, 0, &tgt, &[0, 1, 2], &bm(), 0.0, 0.95).unwrap();
        assert_abs_diff_eq!(w[1], 0.0);
        assert_abs_diff_eq!(w[2], 0.05 / 0.95, epsilon = 1e-15);
        let wide = SpatialGrid {
            center: vec![0.0],
            spacing: 1.0,
            half_count: 1,
        };
        let w = increment_weights(&src, 0, &wide, &[0, 2], &bm(), 0.0, 0.95).unwrap();
        assert_abs_diff_eq!(w[1], radius(0.95) / 0.95, epsilon = 1e-16);
        assert_abs_diff_eq!(w[0], -radius(0.95) / 0.95, epsilon = 1e-16);
    }

    #[test]
    fn monte_carlo_is_reproducible_and_stochastic() {
        let src = SpatialGrid {
            center: vec![0.0],
            spacing: 0.3,
            half_count: 2,
        };
        let tgt = SpatialGrid {
            center: vec![0.0],
            spacing: 0.4,
            half_count: 3,
        };
        let mode = TransitionMode::MonteCarlo { samples: 5000, seed: 3 };
        let a = transition_row(mode, &src, 1, &tgt, &bm(), 0.1, 0.2, 4).unwrap();
        let b = transition_row(mode, &src, 1, &tgt, &bm(), 0.1, 0.2, 4).unwrap();
        assert_eq!(a, b);
        assert_abs_diff_eq!(a.1.iter().sum::<f64>(), 1.0, epsilon = 1e-14);
        let c = transition_row(mode, &src, 2, &tgt, &bm(), 0.1, 0.2, 4).unwrap();
        assert_ne!(a, c);
    }
}
