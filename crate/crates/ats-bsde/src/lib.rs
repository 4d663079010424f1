//! Config-driven experiment runner for `ats-core`.
//!
//! ```text
//! ats-bsde stability --config configs/damped_cubic_stability.toml --out runs/c6
//! ```
//!
//! Every run writes its CSV files, `summary.json`, the resolved config and
//! `manifest.json` into the output directory. Exit codes: 0 when every
//! verdict passes, 1 on a failed verdict, 2 on a configuration error.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
mod commands;
pub mod config;
pub mod output;

pub use config::ExperimentConfig;

/// Invalid or incomplete configuration.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Fail,
}

pub const EXIT_PASS: u8 = 0;
pub const EXIT_FAIL: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;

/// Exit code for a finished run or the error that stopped it. Solver
/// failures during a run count as failed verdicts; everything that prevents
/// a run from starting is a configuration error.
pub fn exit_code(result: &anyhow::Result<Outcome>) -> u8 {
    match result {
        Ok(Outcome::Pass) => EXIT_PASS,
        Ok(Outcome::Fail) => EXIT_FAIL,
        Err(e) => {
            if e.downcast_ref::<ConfigError>().is_some() {
                return EXIT_CONFIG;
            }
            match e.downcast_ref::<ats_core::Error>() {
                Some(
                    ats_core::Error::Config(_) | ats_core::Error::Mismatch(_) | ats_core::Error::StepOutOfRange { .. },
                ) => EXIT_CONFIG,
                Some(_) => EXIT_FAIL,
                None => EXIT_CONFIG,
            }
        }
    }
}
