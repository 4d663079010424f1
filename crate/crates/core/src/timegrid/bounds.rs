//! One-step size ceilings and the affine-in-`h` stability rates.

use super::grid::GridParams;
use super::truncation::H_MAX;
use crate::{Error, Result};
use alloc::format;

/// Input norms for a step ceiling.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepRegime {
    /// Scalar size bound for an input bounded by `norm`.
    OneD { norm: f64 },
    /// Scalar contraction and comparison for two inputs.
    OneDPair { hat: f64, norm: f64 },
    /// Multi-dimensional size bound.
    Multi { norm: f64 },
}

pub fn step_bound(regime: StepRegime, params: &GridParams) -> Result<f64> {
    let pm1 = params.m as f64 - 1.0;
    let p = |v: f64, e: f64| libm::pow(v, e);
    let bound = match regime {
        StepRegime::OneD { norm } => {
            check_norms(&[norm])?;
            (1.0 / (3.0 * params.l_y * (1.0 + p(norm, pm1)))).min(params.stability.h0_lipz)
        }
        StepRegime::OneDPair { hat, norm } => {
            check_norms(&[hat, norm])?;
            (1.0 / (3.0 * params.l_y * (1.0 + p(hat, pm1) + p(norm, pm1)))).min(params.stability.h0_lipz)
        }
        StepRegime::Multi { norm } => {
            check_norms(&[norm])?;
            if params.m_y >= 0.0 {
                return Err(Error::config(format!(
                    "multi-dimensional step bound needs M_y < 0, got {}",
                    params.m_y
                )));
            }
            let factor = if params.l_z == 0.0 { 1.0 } else { 2.0 };
            let d1 = params.d as f64 + 1.0;
            (0.25 * -params.m_y / (factor * d1 * params.l_y * params.l_y * (1.0 + p(norm, 2.0 * pm1))))
                .min(params.stability.hat_h0)
        }
    };
    Ok(bound.min(H_MAX))
}

fn check_norms(norms: &[f64]) -> Result<()> {
    if norms.iter().all(|v| *v >= 0.0) {
        Ok(())
    } else {
        Err(Error::config("input norms must be non-negative"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RateKind {
    /// One-step rate of the multi-dimensional size estimate.
    HatOneStep { norm: f64 },
    /// Rate of the two-input error propagation estimate.
    TildePair { hat: f64, norm: f64 },
    /// Global error rate for terminal functions bounded by `g_norm`.
    TildeG { g_norm: f64 },
}

/// Rate constant (1/time), affine in `h`. Without z-dependence the one-step
/// rate uses `(d+1) L_y^2` instead of `2 (d+1) L_y^2`.
pub fn stability_rate(which: RateKind, h: f64, params: &GridParams) -> f64 {
    let pm1 = params.m as f64 - 1.0;
    let d1 = params.d as f64 + 1.0;
    let base = params.m_y + 2.0 * params.l_z * params.l_z;
    let ly2 = params.l_y * params.l_y;
    let p = |v: f64| libm::pow(v, 2.0 * pm1);
    match which {
        RateKind::HatOneStep { norm } => {
            let factor = if params.l_z == 0.0 { 1.0 } else { 2.0 };
            base + factor * d1 * ly2 * (1.0 + p(norm)) * h
        }
        RateKind::TildePair { hat, norm } => base + 3.0 * d1 * ly2 * h * (1.0 + p(hat) + p(norm)),
        RateKind::TildeG { g_norm } => base + 3.0 * d1 * ly2 * h * (1.0 + 2.0 * p(g_norm)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::presets;
    use approx::assert_relative_eq;

    fn params() -> GridParams {
        GridParams::from_problem(&presets::damped_cubic_problem(1.0, 3.6).unwrap())
    }

    #[test]
    fn one_d_bounds() {
        let p = params();
        assert_relative_eq!(
            step_bound(StepRegime::OneD { norm: 2.0 }, &p).unwrap(),
            1.0 / 22.5,
            max_relative = 1e-15
        );
        assert_relative_eq!(
            step_bound(StepRegime::OneD { norm: 0.0 }, &p).unwrap(),
            2.0 / 9.0,
            max_relative = 1e-15
        );
        assert_relative_eq!(
            step_bound(StepRegime::OneDPair { hat: 1.0, norm: 2.0 }, &p).unwrap(),
            1.0 / (4.5 * 6.0),
            max_relative = 1e-15
        );
    }

    #[test]
    fn multi_bound() {
        let p = params();
        let h = step_bound(StepRegime::Multi { norm: 1.0 }, &p).unwrap();
        assert_relative_eq!(h, 0.25 / (2.0 * 2.25 * 2.0), max_relative = 1e-15);
        assert_relative_eq!(h, 0.02778, max_relative = 1e-3);
        let mut q = p;
        q.m_y = 0.0;
        assert!(step_bound(StepRegime::Multi { norm: 1.0 }, &q).is_err());
    }

    #[test]
    fn rates() {
        let p = params();
        assert_eq!(stability_rate(RateKind::HatOneStep { norm: 5.0 }, 0.0, &p), -1.0);
        let r = stability_rate(RateKind::TildeG { g_norm: 3.6 }, 0.01, &p);
        assert_relative_eq!(
            r,
            -1.0 + 13.5 * 0.01 * (1.0 + 2.0 * 3.6f64.powi(4)),
            max_relative = 1e-14
        );
        assert_relative_eq!(r, 44.48, max_relative = 1e-3);
        assert_relative_eq!(
            stability_rate(RateKind::TildeG { g_norm: 3.6 }, 1e-14, &p),
            -1.0,
            max_relative = 1e-9
        );
    }

    #[test]
    fn one_step_rate_below_quarter_decay_under_multi_bound() {
        for lz in [0.0, 0.3, 0.5] {
            let mut p = params();
            p.l_z = lz;
            p.stability = crate::timegrid::StabilityConstants::new(p.m_y, lz, p.d);
            for norm in [0.0, 0.5, 2.0, 7.0] {
                let h = step_bound(StepRegime::Multi { norm }, &p).unwrap();
                let rate = stability_rate(RateKind::HatOneStep { norm }, h, &p);
                assert!(rate <= p.m_y / 4.0 + 1e-15, "lz {lz} norm {norm}: {rate}");
            }
        }
    }
}
