use alloc::boxed::Box;
use alloc::sync::Arc;
use core::fmt;

use crate::{Error, Result};

pub type TerminalClosure = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

/// Terminal function `g`; built-in variants write the same value into every
/// one of the `k` output components.
#[derive(Clone)]
pub enum TerminalFn {
    /// `min(|x|^2, cap)`
    CappedSquare {
        cap: f64,
    },
    /// `|x|^2`
    Square,
    Zero,
    /// `inner(x) + shift`
    Shifted {
        inner: Box<TerminalFn>,
        shift: f64,
    },
    Custom(Arc<TerminalClosure>),
}

impl fmt::Debug for TerminalFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TerminalFn::CappedSquare { cap } => write!(f, "CappedSquare {{ cap: {cap} }}"),
            TerminalFn::Square => f.write_str("Square"),
            TerminalFn::Zero => f.write_str("Zero"),
            TerminalFn::Shifted { inner, shift } => {
                write!(f, "Shifted {{ inner: {inner:?}, shift: {shift} }}")
            }
            TerminalFn::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl TerminalFn {
    fn eval(&self, x: &[f64], out: &mut [f64]) {
        let sq = || x.iter().map(|v| v * v).sum::<f64>();
        match self {
            TerminalFn::CappedSquare { cap } => out.fill(sq().min(*cap)),
            TerminalFn::Square => out.fill(sq()),
            TerminalFn::Zero => out.fill(0.0),
            TerminalFn::Shifted { inner, shift } => {
                inner.eval(x, out);
                out.iter_mut().for_each(|v| *v += shift);
            }
            TerminalFn::Custom(g) => g(x, out),
        }
    }
}

#[derive(Clone, Debug)]
pub struct TerminalSpec {
    pub func: TerminalFn,
    /// `sup |g|`, possibly infinite.
    pub sup_norm: f64,
    pub lipschitz: f64,
    pub k: usize,
    pub d: usize,
}

impl TerminalSpec {
    pub fn new(func: TerminalFn, sup_norm: f64, lipschitz: f64, k: usize, d: usize) -> Result<Self> {
        if !(sup_norm >= 0.0) || !(lipschitz >= 0.0) {
            return Err(Error::config(
                "terminal sup norm and Lipschitz bound must be non-negative",
            ));
        }
        if k == 0 || d == 0 {
            return Err(Error::config("terminal dimensions must be at least 1"));
        }
        Ok(TerminalSpec {
            func,
            sup_norm,
            lipschitz,
            k,
            d,
        })
    }

    pub fn capped_square(cap: f64, k: usize, d: usize) -> Result<Self> {
        if !(cap > 0.0 && cap.is_finite()) {
            return Err(Error::config("cap of the capped square must be positive and finite"));
        }
        TerminalSpec::new(TerminalFn::CappedSquare { cap }, cap, 2.0 * libm::sqrt(cap), k, d)
    }

    /// Unbounded `|x|^2`; only usable with a truncated terminal.
    pub fn square(k: usize, d: usize) -> Result<Self> {
        TerminalSpec::new(TerminalFn::Square, f64::INFINITY, f64::INFINITY, k, d)
    }

    pub fn zero(k: usize, d: usize) -> Result<Self> {
        TerminalSpec::new(TerminalFn::Zero, 0.0, 0.0, k, d)
    }

    /// `g + shift`; the sup norm grows by `|shift|`.
    pub fn shifted(&self, shift: f64) -> Result<Self> {
        TerminalSpec::new(
            TerminalFn::Shifted {
                inner: Box::new(self.func.clone()),
                shift,
            },
            self.sup_norm + shift.abs(),
            self.lipschitz,
            self.k,
            self.d,
        )
    }

    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        self.func.eval(x, out);
    }

    pub fn is_bounded(&self) -> bool {
        self.sup_norm.is_finite()
    }
}
