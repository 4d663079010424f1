//! Exact one-step kernels on finite probability spaces.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;

use crate::model::DriverSpec;
use crate::timegrid::{lambda_factor, radius};
use crate::{Error, Result};

/// Finite outcome space with a trivial conditioning sigma-field: per-outcome
/// probabilities, next-step values (`k` each) and increment weights (`d`
/// each), with `E[H] = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteSpace {
    pub probs: Vec<f64>,
    pub y_next: Vec<f64>,
    pub weights: Vec<f64>,
    pub k: usize,
    pub d: usize,
}

impl DiscreteSpace {
    pub fn new(probs: Vec<f64>, y_next: Vec<f64>, weights: Vec<f64>, k: usize, d: usize) -> Result<Self> {
        let n = probs.len();
        if n == 0 || y_next.len() != n * k || weights.len() != n * d {
            return Err(Error::Mismatch(format!(
                "space with {n} outcomes needs {} values and {} weights, got {} and {}",
                n * k,
                n * d,
                y_next.len(),
                weights.len()
            )));
        }
        if probs.iter().any(|p| !(*p >= 0.0)) || (probs.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::config("outcome probabilities must be non-negative and sum to 1"));
        }
        let scale = weights.iter().fold(1.0f64, |m, w| m.max(w.abs()));
        for c in 0..d {
            let mean: f64 = probs.iter().enumerate().map(|(o, p)| p * weights[o * d + c]).sum();
            if mean.abs() > 1e-12 * scale {
                return Err(Error::config(format!(
                    "increment weights must have zero mean, axis {c} has {mean}"
                )));
            }
        }
        Ok(DiscreteSpace {
            probs,
            y_next,
            weights,
            k,
            d,
        })
    }

    /// Random space whose weights mimic truncated Gaussian increments:
    /// `|H_c| <= R(h)/h`, `E[H] = 0` and `E[H H^T] = (Lambda(h)/h) I`.
    /// Each axis carries a symmetric law on up to three atom pairs (plus an
    /// atom at 0); axes after the first use a single pair. Next-step values
    /// are uniform on `[-y_bound, y_bound]^k`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, k: usize, d: usize, h: f64, y_bound: f64) -> Result<Self> {
        let variance = lambda_factor(h)? / h;
        let cap = radius(h) / h;
        let lo = libm::sqrt(variance);
        let mut axes: Vec<Vec<(f64, f64)>> = Vec::with_capacity(d);
        for axis in 0..d {
            let pairs = if axis == 0 { rng.random_range(1..=3usize) } else { 1 };
            let mut u: Vec<f64> = (0..pairs).map(|_| rng.random_range(0.05..1.0)).collect();
            let total: f64 = u.iter().sum();
            u.iter_mut().for_each(|v| *v /= total);
            let mut atoms = Vec::new();
            let mut mass = 0.0;
            for &share in &u {
                let b = if cap > lo { rng.random_range(lo..=cap) } else { lo };
                let q = share * variance / (b * b);
                atoms.push((b, q / 2.0));
                atoms.push((-b, q / 2.0));
                mass += q;
            }
            if 1.0 - mass > 1e-15 {
                atoms.push((0.0, 1.0 - mass));
            }
            axes.push(atoms);
        }
        let mut probs = vec![1.0];
        let mut weights: Vec<Vec<f64>> = vec![Vec::new()];
        for atoms in &axes {
            let mut p2 = Vec::new();
            let mut w2 = Vec::new();
            for (p, w) in probs.iter().zip(&weights) {
                for &(b, q) in atoms {
                    p2.push(p * q);
                    let mut w = w.clone();
                    w.push(b);
                    w2.push(w);
                }
            }
            probs = p2;
            weights = w2;
        }
        let total: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= total);
        let n = probs.len();
        let y_next = (0..n * k).map(|_| rng.random_range(-y_bound..=y_bound)).collect();
        DiscreteSpace::new(probs, y_next, weights.concat(), k, d)
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Same probabilities and weights with other next-step values.
    pub fn with_values(&self, y_next: Vec<f64>) -> Result<Self> {
        DiscreteSpace::new(self.probs.clone(), y_next, self.weights.clone(), self.k, self.d)
    }

    /// `max |Y_{i+1}|` over outcomes (Euclidean norm per outcome).
    pub fn sup_norm(&self) -> f64 {
        self.y_next
            .chunks(self.k)
            .map(|v| libm::sqrt(v.iter().map(|x| x * x).sum()))
            .fold(0.0, f64::max)
    }

    /// `E|Y_{i+1}|^2`
    pub fn second_moment(&self) -> f64 {
        self.y_next
            .chunks(self.k)
            .zip(&self.probs)
            .map(|(v, p)| p * v.iter().map(|x| x * x).sum::<f64>())
            .sum()
    }
}

/// One explicit step with exact expectations: `Z = E[Y_{i+1} H^T]`,
/// `Y = E[Y_{i+1} + f(Y_{i+1}, Z) h]`. Returns `(Y, Z)`.
pub fn exact_one_step(space: &DiscreteSpace, driver: &DriverSpec, h: f64) -> (Vec<f64>, Vec<f64>) {
    let (k, d) = (space.k, space.d);
    let mut z = vec![0.0; k * d];
    for (o, &p) in space.probs.iter().enumerate() {
        for j in 0..k {
            for c in 0..d {
                z[j * d + c] += p * space.y_next[o * k + j] * space.weights[o * d + c];
            }
        }
    }
    let mut y = vec![0.0; k];
    let mut f = vec![0.0; k];
    for (o, &p) in space.probs.iter().enumerate() {
        let yo = &space.y_next[o * k..(o + 1) * k];
        driver.eval_into(yo, &z, &mut f);
        for j in 0..k {
            y[j] += p * (yo[j] + f[j] * h);
        }
    }
    (y, z)
}
