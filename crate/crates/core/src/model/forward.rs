use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use crate::{Error, Result};

/// `(t, x, out)`; drift writes `d` values, diffusion a row-major `d x d` matrix.
pub type CoefficientClosure = dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync;

#[derive(Clone)]
pub enum Coefficients {
    /// `mu = 0`, `sigma = I`.
    Brownian,
    Constant {
        drift: Vec<f64>,
        diffusion: Vec<f64>,
    },
    Custom {
        drift: Arc<CoefficientClosure>,
        diffusion: Arc<CoefficientClosure>,
    },
}

impl fmt::Debug for Coefficients {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coefficients::Brownian => f.write_str("Brownian"),
            Coefficients::Constant { drift, diffusion } => f
                .debug_struct("Constant")
                .field("drift", drift)
                .field("diffusion", diffusion)
                .finish(),
            Coefficients::Custom { .. } => f.write_str("Custom(..)"),
        }
    }
}

/// Forward diffusion `dX = mu(t, X) dt + sigma(t, X) dW`, `X_0 = x0`.
#[derive(Clone, Debug)]
pub struct ForwardSpec {
    pub x0: Vec<f64>,
    pub coefficients: Coefficients,
}

impl ForwardSpec {
    pub fn brownian(x0: Vec<f64>) -> Result<Self> {
        ForwardSpec::new(x0, Coefficients::Brownian)
    }

    pub fn new(x0: Vec<f64>, coefficients: Coefficients) -> Result<Self> {
        let d = x0.len();
        if d == 0 || x0.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("x0 must be a non-empty finite vector"));
        }
        if let Coefficients::Constant { drift, diffusion } = &coefficients {
            if drift.len() != d || diffusion.len() != d * d {
                return Err(Error::config("constant coefficients do not match the dimension of x0"));
            }
            if drift.iter().chain(diffusion).any(|v| !v.is_finite()) {
                return Err(Error::config("constant coefficients must be finite"));
            }
        }
        Ok(ForwardSpec { x0, coefficients })
    }

    pub fn dim(&self) -> usize {
        self.x0.len()
    }

    pub fn drift(&self, t: f64, x: &[f64], out: &mut [f64]) {
        match &self.coefficients {
            Coefficients::Brownian => out.fill(0.0),
            Coefficients::Constant { drift, .. } => out.copy_from_slice(drift),
            Coefficients::Custom { drift, .. } => drift(t, x, out),
        }
    }

    pub fn diffusion(&self, t: f64, x: &[f64], out: &mut [f64]) {
        match &self.coefficients {
            Coefficients::Brownian => {
                let d = self.dim();
                out.fill(0.0);
                for i in 0..d {
                    out[i * d + i] = 1.0;
                }
            }
            Coefficients::Constant { diffusion, .. } => out.copy_from_slice(diffusion),
            Coefficients::Custom { diffusion, .. } => diffusion(t, x, out),
        }
    }
}
