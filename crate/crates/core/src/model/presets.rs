//! The reference drivers, terminal functions and experiment problems.

use alloc::vec;

use super::{DriverSpec, ForwardSpec, GrowthCondition, ProblemSpec, TerminalSpec};
use crate::{Error, Result};

/// Terminal caps used in the damped-cubic stability experiment.
pub const STUDIED_CAPS: [f64; 3] = [3.6, 4.0, 6.0];
/// Terminal cap of the pure-cubic experiment.
pub const PURE_CUBIC_CAP: f64 = 7.0;
/// Growth radius of the pure-cubic experiment.
pub const PURE_CUBIC_RADIUS: f64 = 1.0;

/// `f(y) = -y - y^3` with `m = 3`, `M_y = -1`, `L_y = 3/2`, `L_z = 0`.
pub fn cubic_damped() -> DriverSpec {
    DriverSpec::cubic_family(-1.0, 1.0, 0.0, None, 1, 1).expect("valid preset")
}

/// `f(y) = -y^3` with `m = 3`, `M_y = 0`, `L_y = 3/2`; with a radius `K`
/// the growth condition holds at rate `-K^2`.
pub fn pure_cubic(radius: Option<f64>) -> DriverSpec {
    let growth = radius.map(|k| GrowthCondition {
        radius: k,
        rate: -k * k,
    });
    DriverSpec::cubic_family(0.0, 1.0, 0.0, growth, 1, 1).expect("valid preset")
}

/// `f(y) = y - y^3`: monotone with `M_y = 1`, and `<y | f(y)> <= (1 - K^2)|y|^2`
/// for `|y| > K`, so any radius `K > 1` gives a growth condition.
pub fn cubic_unstable(radius: f64) -> Result<DriverSpec> {
    if !(radius > 1.0) {
        return Err(Error::config("cubic_unstable needs a growth radius K > 1"));
    }
    let growth = GrowthCondition {
        radius,
        rate: 1.0 - radius * radius,
    };
    DriverSpec::cubic_family(1.0, 1.0, 0.0, Some(growth), 1, 1)
}

/// Damped cubic driver, `g(x) = min(x^2, c)`, `X = W` started at 0.
pub fn damped_cubic_problem(horizon: f64, cap: f64) -> Result<ProblemSpec> {
    ProblemSpec::new(
        horizon,
        ForwardSpec::brownian(vec![0.0])?,
        cubic_damped(),
        TerminalSpec::capped_square(cap, 1, 1)?,
    )
}

/// Pure cubic driver with `K = 1`, `g(x) = min(x^2, 7)`, `X = W` started at 0.
pub fn pure_cubic_problem(horizon: f64) -> Result<ProblemSpec> {
    ProblemSpec::new(
        horizon,
        ForwardSpec::brownian(vec![0.0])?,
        pure_cubic(Some(PURE_CUBIC_RADIUS)),
        TerminalSpec::capped_square(PURE_CUBIC_CAP, 1, 1)?,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Regime;

    #[test]
    fn declared_constants() {
        let c = cubic_damped().constants;
        assert_eq!((c.m, c.m_y, c.l_y, c.l_z), (3, -1.0, 1.5, 0.0));
        let p = pure_cubic(Some(1.0));
        assert_eq!(p.regime, Regime::OverallMonotone);
        assert_eq!(p.decay_rate(), -1.0);
        assert_eq!(p.constants.m_y, 0.0);
        assert_eq!(pure_cubic(None).regime, Regime::TrulyMonotone);
        assert!(cubic_unstable(0.5).is_err());
    }

    #[test]
    fn problems() {
        let p = damped_cubic_problem(1.0, 3.6).unwrap();
        assert_eq!(p.terminal.sup_norm, 3.6);
        assert!(damped_cubic_problem(0.0, 3.6).is_err());
        assert_eq!(pure_cubic_problem(1.0).unwrap().terminal.sup_norm, 7.0);
    }
}
