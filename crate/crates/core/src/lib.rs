//! Explicit backward schemes with adapted time steps for decoupled
//! forward-backward SDEs whose driver is monotone with polynomial growth.
//!
//! The crate is `no_std` (it needs `alloc`) and is organised bottom-up:
//!
//! - [`model`]: the problem description (forward coefficients, driver,
//!   terminal function) with the structural constants every step-size formula
//!   consumes, plus the reference presets and an audit of declared constants.
//! - [`timegrid`]: truncated Brownian increments, step ceilings, every
//!   adapted-time-step grid variant and the stability-rate constants.
//! - [`quantize`]: spatial grids, nearest-node projection, transition
//!   probabilities and truncated increment weights of the quantized chain.
//! - [`solver`]: explicit and implicit backward sweeps on a chain, plus exact
//!   one-step kernels on finite probability spaces.
//! - [`diagnostics`]: stability envelopes, comparison checks, convergence and
//!   truncation studies, theoretical error bounds.
//! - [`pipeline`]: grid, chain and sweep wired together for a given `n`.
//!
//! A typical run:
//!
//! ```
//! use ats_core::model::presets;
//! use ats_core::pipeline::Pipeline;
//! use ats_core::quantize::{GridPolicy, TransitionMode};
//! use ats_core::solver::SchemeKind;
//! use ats_core::timegrid::GridKind;
//!
//! let problem = presets::damped_cubic_problem(1.0, 3.6).unwrap();
//! let pipeline = Pipeline::new(
//!     &problem,
//!     GridKind::AtsComparison { bound: 3.6 },
//!     SchemeKind::ExplicitAts,
//!     GridPolicy::standard(),
//!     TransitionMode::Analytic1d,
//! );
//! let run = pipeline.run(15).unwrap();
//! assert!(run.solution.value_at_origin()[0] > 0.0);
//! ```

#![no_std]
// `!(x > 0.0)` is the NaN-rejecting form used throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod diagnostics;
mod error;
pub mod gaussian;
mod linalg;
pub mod model;
pub mod pipeline;
pub mod quantize;
pub mod solver;
pub mod timegrid;

pub use error::{Error, Result};
