use crate::model::ProblemSpec;
use crate::timegrid::{stability_rate, GridParams, RateKind, TimeGrid};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorBound {
    pub modulus: f64,
    /// `epsilon + M_y + 2 L_z^2 + 3 (d+1) L_y^2 |pi| (1 + 2 |g|^{2(m-1)})`
    pub rate: f64,
    /// `e^{rate T} C_eps |pi|`
    pub bound: f64,
    /// `epsilon + M_y / 4`, the rate on refined grids.
    pub refined_rate: f64,
    pub refined_bound: f64,
}

/// Error bound `e^{(epsilon + rate) T} C_eps |pi|` for a grid, with the
/// base-grid rate and the refined-grid rate side by side.
pub fn theoretical_error_bound(problem: &ProblemSpec, grid: &TimeGrid, epsilon: f64, c_eps: f64) -> Result<ErrorBound> {
    if !(epsilon > 0.0) {
        return Err(Error::config("epsilon must be positive"));
    }
    let params = GridParams::from_problem(problem);
    let modulus = grid.modulus();
    let rate = epsilon
        + stability_rate(
            RateKind::TildeG {
                g_norm: problem.terminal.sup_norm,
            },
            modulus,
            &params,
        );
    let refined_rate = epsilon + params.stability.hat_m_y;
    let t = problem.horizon;
    Ok(ErrorBound {
        modulus,
        rate,
        bound: libm::exp(rate * t) * c_eps * modulus,
        refined_rate,
        refined_bound: libm::exp(refined_rate * t) * c_eps * modulus,
    })
}
