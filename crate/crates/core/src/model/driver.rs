use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::{Error, Result};

/// Signature of a user-supplied driver: `(y, z, out)` with `z` a row-major
/// `k x d` matrix and `out` of length `k`.
pub type DriverClosure = dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync;

#[derive(Clone)]
pub enum DriverFn {
    /// `f(y, z) = linear * y - cubic * |y|^2 y + z_coupling * (row sums of z) / sqrt(d)`.
    Cubic {
        linear: f64,
        cubic: f64,
        z_coupling: f64,
    },
    Custom(Arc<DriverClosure>),
}

impl fmt::Debug for DriverFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DriverFn::Cubic {
                linear,
                cubic,
                z_coupling,
            } => f
                .debug_struct("Cubic")
                .field("linear", linear)
                .field("cubic", cubic)
                .field("z_coupling", z_coupling)
                .finish(),
            DriverFn::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

/// Whether the driver is decreasing in `y` (`m_y <= 0`), strictly so
/// (`m_y < 0`), or only pushes back toward the origin outside a ball.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    TrulyMonotone,
    StrictlyMonotone,
    OverallMonotone,
}

/// `<y | f(y, 0)> <= rate |y|^2` for every `|y| > radius`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GrowthCondition {
    pub radius: f64,
    pub rate: f64,
}

/// Declared structural constants.
///
/// `m_y` is always the one-sided Lipschitz constant in `y`. In the
/// overall-monotone regime the decay rate used by grids and envelopes is the
/// growth-condition rate instead, see [`DriverSpec::decay_rate`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DriverConstants {
    pub m: u32,
    pub m_y: f64,
    pub l_y: f64,
    pub l_z: f64,
    pub growth: Option<GrowthCondition>,
}

#[derive(Clone, Debug)]
pub struct DriverSpec {
    pub func: DriverFn,
    pub constants: DriverConstants,
    pub regime: Regime,
    pub k: usize,
    pub d: usize,
}

impl DriverSpec {
    /// Checks the declared constants against the regime and that `f(0, 0) = 0`.
    pub fn new(func: DriverFn, constants: DriverConstants, regime: Regime, k: usize, d: usize) -> Result<Self> {
        let c = &constants;
        if k == 0 || d == 0 {
            return Err(Error::config("dimensions k and d must be at least 1"));
        }
        if c.m == 0 {
            return Err(Error::config("polynomial degree m must be at least 1"));
        }
        if !(c.l_y >= 0.0 && c.l_y.is_finite()) || !(c.l_z >= 0.0 && c.l_z.is_finite()) {
            return Err(Error::config("L_y and L_z must be finite and non-negative"));
        }
        if !c.m_y.is_finite() {
            return Err(Error::config("M_y must be finite"));
        }
        match regime {
            Regime::StrictlyMonotone if c.m_y >= 0.0 => {
                return Err(Error::config(format!(
                    "strictly monotone regime needs M_y < 0, got {}",
                    c.m_y
                )))
            }
            Regime::TrulyMonotone if c.m_y > 0.0 => {
                return Err(Error::config(format!(
                    "truly monotone regime needs M_y <= 0, got {}",
                    c.m_y
                )))
            }
            Regime::OverallMonotone => match c.growth {
                Some(g) if g.radius > 0.0 && g.rate < 0.0 && g.radius.is_finite() => {}
                _ => {
                    return Err(Error::config(
                        "overall-monotone regime needs a growth condition with K > 0 and a negative rate",
                    ))
                }
            },
            _ => {}
        }
        if let DriverFn::Cubic {
            linear,
            cubic,
            z_coupling,
        } = func
        {
            if !(linear.is_finite() && cubic.is_finite() && z_coupling.is_finite()) {
                return Err(Error::config("driver coefficients must be finite"));
            }
        }
        let spec = DriverSpec {
            func,
            constants,
            regime,
            k,
            d,
        };
        let mut out = vec![f64::NAN; k];
        spec.eval_into(&vec![0.0; k], &vec![0.0; k * d], &mut out);
        if out.iter().any(|v| *v != 0.0) {
            return Err(Error::config(format!("driver must satisfy f(0, 0) = 0, got {out:?}")));
        }
        Ok(spec)
    }

    /// Cubic family with its constants derived by hand: `m = 3` (or 1 without
    /// the cubic term), `M_y = linear`, `L_y = max(|linear|, 3 cubic / 2)`,
    /// `L_z = z_coupling`.
    pub fn cubic_family(
        linear: f64,
        cubic: f64,
        z_coupling: f64,
        growth: Option<GrowthCondition>,
        k: usize,
        d: usize,
    ) -> Result<Self> {
        if cubic < 0.0 || z_coupling < 0.0 {
            return Err(Error::config("cubic and z_coupling coefficients must be non-negative"));
        }
        let m = if cubic > 0.0 { 3 } else { 1 };
        let constants = DriverConstants {
            m,
            m_y: linear,
            l_y: linear.abs().max(1.5 * cubic),
            l_z: z_coupling,
            growth,
        };
        let regime = if growth.is_some() {
            Regime::OverallMonotone
        } else if linear < 0.0 {
            Regime::StrictlyMonotone
        } else {
            Regime::TrulyMonotone
        };
        DriverSpec::new(
            DriverFn::Cubic {
                linear,
                cubic,
                z_coupling,
            },
            constants,
            regime,
            k,
            d,
        )
    }

    /// Evaluates `f(y, z)` into `out` without checking the result.
    #[inline]
    pub fn eval_into(&self, y: &[f64], z: &[f64], out: &mut [f64]) {
        match &self.func {
            DriverFn::Cubic {
                linear,
                cubic,
                z_coupling,
            } => {
                let sq: f64 = y.iter().map(|v| v * v).sum();
                let scale = linear - cubic * sq;
                for (o, v) in out.iter_mut().zip(y) {
                    *o = scale * v;
                }
                if *z_coupling != 0.0 {
                    let norm = z_coupling / libm::sqrt(self.d as f64);
                    for (j, o) in out.iter_mut().enumerate() {
                        let row: f64 = z[j * self.d..(j + 1) * self.d].iter().sum();
                        *o += norm * row;
                    }
                }
            }
            DriverFn::Custom(f) => f(y, z, out),
        }
    }

    /// Scalar fast path for `k = 1`.
    #[inline]
    pub fn eval_scalar(&self, y: f64, z: &[f64]) -> f64 {
        match &self.func {
            DriverFn::Cubic {
                linear,
                cubic,
                z_coupling,
            } => {
                let mut v = (linear - cubic * y * y) * y;
                if *z_coupling != 0.0 {
                    v += z_coupling / libm::sqrt(self.d as f64) * z.iter().sum::<f64>();
                }
                v
            }
            DriverFn::Custom(f) => {
                let mut out = [0.0];
                f(&[y], z, &mut out);
                out[0]
            }
        }
    }

    /// Evaluates `f(y, z)`, rejecting non-finite output.
    pub fn eval(&self, y: &[f64], z: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.k || z.len() != self.k * self.d {
            return Err(Error::Mismatch(format!(
                "driver expects y of length {} and z of length {}, got {} and {}",
                self.k,
                self.k * self.d,
                y.len(),
                z.len()
            )));
        }
        let mut out = vec![0.0; self.k];
        self.eval_into(y, z, &mut out);
        if out.iter().all(|v| v.is_finite()) {
            Ok(out)
        } else {
            Err(Error::NonFiniteDriver {
                y: y.to_vec(),
                z: z.to_vec(),
            })
        }
    }

    /// Rate at which bounds decay backward in time: the growth-condition rate
    /// in the overall-monotone regime, `m_y` otherwise.
    pub fn decay_rate(&self) -> f64 {
        match (self.regime, self.constants.growth) {
            (Regime::OverallMonotone, Some(g)) => g.rate,
            _ => self.constants.m_y,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StabilityFlags {
    /// `L_z^2 <= -M_y`
    pub continuous: bool,
    /// `L_z^2 <= -M_y / 4`
    pub numerical: bool,
}

pub fn stability_flags(spec: &DriverSpec) -> StabilityFlags {
    let c = &spec.constants;
    let lz2 = c.l_z * c.l_z;
    StabilityFlags {
        continuous: lz2 <= -c.m_y,
        numerical: lz2 <= -c.m_y / 4.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::presets;

    #[test]
    fn preset_evaluations() {
        let damped = presets::cubic_damped();
        assert_eq!(damped.eval(&[0.0], &[0.0]).unwrap(), vec![0.0]);
        assert_eq!(damped.eval(&[2.0], &[0.0]).unwrap(), vec![-10.0]);
        assert_eq!(presets::pure_cubic(None).eval(&[-1.0], &[0.0]).unwrap(), vec![1.0]);
        assert_eq!(damped.eval_scalar(2.0, &[0.0]), -10.0);
    }

    #[test]
    fn rejects_non_finite_output() {
        let d = presets::cubic_damped();
        assert!(matches!(d.eval(&[1e200], &[0.0]), Err(Error::NonFiniteDriver { .. })));
    }

    #[test]
    fn rejects_nonzero_origin() {
        let f: Arc<DriverClosure> = Arc::new(|_, _, out: &mut [f64]| out[0] = 1.0);
        let c = DriverConstants {
            m: 1,
            m_y: -1.0,
            l_y: 1.0,
            l_z: 0.0,
            growth: None,
        };
        assert!(DriverSpec::new(DriverFn::Custom(f), c, Regime::StrictlyMonotone, 1, 1).is_err());
    }

    #[test]
    fn regime_constraints() {
        let c = DriverConstants {
            m: 3,
            m_y: 0.0,
            l_y: 1.5,
            l_z: 0.0,
            growth: None,
        };
        let f = DriverFn::Cubic {
            linear: 0.0,
            cubic: 1.0,
            z_coupling: 0.0,
        };
        assert!(DriverSpec::new(f.clone(), c, Regime::StrictlyMonotone, 1, 1).is_err());
        assert!(DriverSpec::new(f.clone(), c, Regime::TrulyMonotone, 1, 1).is_ok());
        assert!(DriverSpec::new(f, c, Regime::OverallMonotone, 1, 1).is_err());
    }

    #[test]
    fn flags() {
        let mk = |lz: f64, my: f64| {
            let c = DriverConstants {
                m: 1,
                m_y: my,
                l_y: 1.0,
                l_z: lz,
                growth: None,
            };
            let regime = if my < 0.0 {
                Regime::StrictlyMonotone
            } else {
                Regime::TrulyMonotone
            };
            let f = DriverFn::Cubic {
                linear: my,
                cubic: 0.0,
                z_coupling: lz,
            };
            stability_flags(&DriverSpec::new(f, c, regime, 1, 1).unwrap())
        };
        assert_eq!(
            mk(0.0, -1.0),
            StabilityFlags {
                continuous: true,
                numerical: true
            }
        );
        assert_eq!(
            mk(0.3f64.sqrt(), -1.0),
            StabilityFlags {
                continuous: true,
                numerical: false
            }
        );
        assert_eq!(
            mk(0.0, 0.0),
            StabilityFlags {
                continuous: true,
                numerical: true
            }
        );
    }
}
