//! Verdicts on solutions: stability envelopes, comparison, convergence and
//! truncation studies, theoretical error bounds.

mod comparison;
mod convergence;
mod envelope;
mod error_bound;
mod truncation;

pub use comparison::{comparison_check, ComparisonReport, COMPARISON_TOLERANCE};
pub use convergence::{
    assemble_report, convergence_point, convergence_study, fit_slope, reference_points, sandwich_check,
    ConvergencePoint, ConvergenceReport, ReferencePolicy, SandwichReport, SandwichRow, SLOPE_WINDOW,
};
pub use envelope::{
    envelope_bound, stability_envelope, sweep_envelope, EnvelopePoint, EnvelopeRegime, StabilityEnvelope,
    DEFAULT_QUANTIZATION_TOLERANCE,
};
pub use error_bound::{theoretical_error_bound, ErrorBound};
pub use truncation::{truncation_error_decay, TruncationPoint, TruncationReport};
