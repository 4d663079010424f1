//! Time discretization: truncated increments, step ceilings, adapted-step
//! grids and stability-rate constants.

mod bounds;
mod grid;
mod truncation;

pub use bounds::{stability_rate, step_bound, RateKind, StepRegime};
pub use grid::{
    ats_step_size, build_grid, grid_diagnostics, truncation_level, BaseGrid, Clause, GridDiagnostics, GridKind,
    GridParams, StabilityConstants, Step, TimeGrid, SNAP_FRACTION,
};
pub use truncation::{
    h0_lipz, increment_error_moment, increment_truncation, lambda_factor, radius, radius_normalized,
    truncation_moment_envelope, H_MAX,
};
