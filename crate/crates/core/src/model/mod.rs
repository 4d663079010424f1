//! Problem description: forward coefficients, driver and terminal function,
//! with the structural constants consumed by the grid and bound formulas.

mod driver;
mod forward;
pub mod presets;
mod terminal;
mod validate;

pub use driver::{stability_flags, DriverConstants, DriverFn, DriverSpec, GrowthCondition, Regime, StabilityFlags};
pub use forward::{Coefficients, ForwardSpec};
pub use terminal::{TerminalFn, TerminalSpec};
pub use validate::{validate_driver, Condition, ConditionCheck, ValidationOptions, ValidationReport};

use crate::{Error, Result};
use alloc::format;

/// A decoupled forward-backward problem on `[0, horizon]`.
#[derive(Clone, Debug)]
pub struct ProblemSpec {
    pub horizon: f64,
    pub forward: ForwardSpec,
    pub driver: DriverSpec,
    pub terminal: TerminalSpec,
}

impl ProblemSpec {
    pub fn new(horizon: f64, forward: ForwardSpec, driver: DriverSpec, terminal: TerminalSpec) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::config(format!(
                "horizon must be positive and finite, got {horizon}"
            )));
        }
        if forward.dim() != driver.d || terminal.d != driver.d {
            return Err(Error::config(format!(
                "dimension mismatch: forward d = {}, driver d = {}, terminal d = {}",
                forward.dim(),
                driver.d,
                terminal.d
            )));
        }
        if terminal.k != driver.k {
            return Err(Error::config(format!(
                "terminal has {} components but the driver has k = {}",
                terminal.k, driver.k
            )));
        }
        Ok(ProblemSpec {
            horizon,
            forward,
            driver,
            terminal,
        })
    }

    /// Same problem with a different terminal function.
    pub fn with_terminal(&self, terminal: TerminalSpec) -> Result<Self> {
        ProblemSpec::new(self.horizon, self.forward.clone(), self.driver.clone(), terminal)
    }

    pub fn with_horizon(&self, horizon: f64) -> Result<Self> {
        ProblemSpec::new(
            horizon,
            self.forward.clone(),
            self.driver.clone(),
            self.terminal.clone(),
        )
    }
}
