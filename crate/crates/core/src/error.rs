use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("step size {h} outside (0, 0.95]")]
    StepOutOfRange { h: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("driver returned a non-finite value at y = {y:?}, z = {z:?}")]
    NonFiniteDriver { y: Vec<f64>, z: Vec<f64> },

    #[error("spatial grid at time index {index} (t = {time}) has no nodes besides its center")]
    DegenerateGrid { index: usize, time: f64 },

    #[error("diffusion matrix is singular at t = {time}")]
    SingularDiffusion { time: f64 },

    #[error("analytic transition needs a non-degenerate diffusion at t = {time}; use the Monte Carlo mode")]
    DegenerateDistribution { time: f64 },

    #[error("scheme exploded at time index {time_index}, node {node}: |y| = {magnitude:e}")]
    Explosion {
        time_index: usize,
        node: usize,
        magnitude: f64,
    },

    #[error("implicit step did not converge at time index {time_index}, node {node} (residual {residual:e})")]
    NoConvergence {
        time_index: usize,
        node: usize,
        residual: f64,
    },

    #[error("inputs do not match: {0}")]
    Mismatch(String),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
