//! Spot checks of declared driver constants on a sampling box.

use alloc::vec;
use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{DriverSpec, Regime};
use crate::linalg::{dot, norm};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Condition {
    /// Chord slope `<dy | df> / |dy|^2` minus `M_y`.
    MonotoneInY,
    /// `|df| / (L_y (1 + |y'|^{m-1} + |y|^{m-1}) |dy|) - 1`.
    RegularityInY,
    /// `|df| / |dz| - L_z`.
    LipschitzInZ,
    /// Largest observed chord slope, including pairs near the origin; passes
    /// when it stays below `-tolerance`.
    StrictMonotonicity,
    /// `<y | f(y, 0)> / |y|^2` minus the growth rate, over `|y| > K`.
    MonotoneGrowth,
}

impl Condition {
    pub fn name(self) -> &'static str {
        match self {
            Condition::MonotoneInY => "monotone_y",
            Condition::RegularityInY => "regularity_y",
            Condition::LipschitzInZ => "lipschitz_z",
            Condition::StrictMonotonicity => "strict_monotone",
            Condition::MonotoneGrowth => "monotone_growth",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConditionCheck {
    pub condition: Condition,
    pub worst_slack: f64,
    pub samples: usize,
    pub pass: bool,
    /// Whether the driver's declared regime relies on this condition.
    pub required: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<ConditionCheck>,
    pub box_half_width: f64,
    pub tolerance: f64,
}

impl ValidationReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass || !c.required)
    }

    pub fn get(&self, condition: Condition) -> Option<&ConditionCheck> {
        self.checks.iter().find(|c| c.condition == condition)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ValidationOptions {
    pub box_half_width: f64,
    pub tolerance: f64,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        ValidationOptions {
            box_half_width: 10.0,
            tolerance: 1e-10,
        }
    }
}

struct Worst {
    slack: f64,
    samples: usize,
}

impl Worst {
    fn new() -> Self {
        Worst {
            slack: f64::NEG_INFINITY,
            samples: 0,
        }
    }
    fn push(&mut self, v: f64) {
        self.samples += 1;
        if v > self.slack || v.is_nan() {
            self.slack = if v.is_nan() { f64::INFINITY } else { v };
        }
    }
}

/// Draws `sample_count` independent samples, each from its own ChaCha stream
/// keyed by the sample index, so the report only depends on `seed`.
pub fn validate_driver(
    spec: &DriverSpec,
    sample_count: usize,
    seed: u64,
    options: ValidationOptions,
) -> ValidationReport {
    let (k, d) = (spec.k, spec.d);
    let c = spec.constants;
    let b = options.box_half_width;
    let pm1 = (c.m - 1) as i32;

    let mut mon = Worst::new();
    let mut reg = Worst::new();
    let mut lip = Worst::new();
    let mut strict = Worst::new();
    let mut growth = Worst::new();

    let mut y = vec![0.0; k];
    let mut yp = vec![0.0; k];
    let mut z = vec![0.0; k * d];
    let mut zp = vec![0.0; k * d];
    let mut f = vec![0.0; k];
    let mut fp = vec![0.0; k];
    let mut dy = vec![0.0; k];
    let mut df = vec![0.0; k];
    let zero_z = vec![0.0; k * d];

    let mut chord = |y: &[f64], yp: &[f64], z: &[f64], f: &mut [f64], fp: &mut [f64]| {
        spec.eval_into(y, z, f);
        spec.eval_into(yp, z, fp);
        for j in 0..k {
            dy[j] = yp[j] - y[j];
            df[j] = fp[j] - f[j];
        }
        let n2 = dot(&dy, &dy);
        (n2 > 0.0).then(|| (dot(&dy, &df) / n2, norm(&df) / libm::sqrt(n2)))
    };

    for sample in 0..sample_count {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(sample as u64);
        for v in y
            .iter_mut()
            .chain(yp.iter_mut())
            .chain(z.iter_mut())
            .chain(zp.iter_mut())
        {
            *v = rng.random_range(-b..=b);
        }

        if let Some((slope, ratio)) = chord(&y, &yp, &z, &mut f, &mut fp) {
            mon.push(slope - c.m_y);
            strict.push(slope);
            let growth_factor = 1.0 + libm::pow(norm(&yp), pm1 as f64) + libm::pow(norm(&y), pm1 as f64);
            let bound = c.l_y * growth_factor;
            reg.push(if bound > 0.0 {
                ratio / bound - 1.0
            } else if ratio > 0.0 {
                f64::INFINITY
            } else {
                -1.0
            });
        }

        spec.eval_into(&y, &z, &mut f);
        spec.eval_into(&y, &zp, &mut fp);
        let dz: f64 = z.iter().zip(&zp).map(|(a, b)| (a - b) * (a - b)).sum();
        if dz > 0.0 {
            let dfz: f64 = f.iter().zip(&fp).map(|(a, b)| (a - b) * (a - b)).sum();
            lip.push(libm::sqrt(dfz) / libm::sqrt(dz) - c.l_z);
        }

        if let Some(g) = c.growth {
            let ny = norm(&y);
            if ny > g.radius {
                spec.eval_into(&y, &zero_z, &mut f);
                growth.push(dot(&y, &f) / (ny * ny) - g.rate);
            }
        }
    }

    // Pairs at and around the origin, where strict monotonicity is decided.
    for j in 0..k {
        for &(a, e) in &[(0.0, 1e-6), (0.0, -1e-6), (1e-6, 2e-6), (-1e-6, 1e-6)] {
            y.fill(0.0);
            yp.fill(0.0);
            y[j] = a;
            yp[j] = e;
            if let Some((slope, _)) = chord(&y, &yp, &zero_z, &mut f, &mut fp) {
                strict.push(slope);
            }
        }
    }

    let tol = options.tolerance;
    let mut checks = vec![
        ConditionCheck {
            condition: Condition::MonotoneInY,
            worst_slack: mon.slack,
            samples: mon.samples,
            pass: mon.slack <= tol,
            required: true,
        },
        ConditionCheck {
            condition: Condition::RegularityInY,
            worst_slack: reg.slack,
            samples: reg.samples,
            pass: reg.slack <= tol,
            required: true,
        },
        ConditionCheck {
            condition: Condition::LipschitzInZ,
            worst_slack: lip.slack,
            samples: lip.samples,
            pass: lip.slack <= tol,
            required: true,
        },
        ConditionCheck {
            condition: Condition::StrictMonotonicity,
            worst_slack: strict.slack,
            samples: strict.samples,
            pass: strict.slack < -tol,
            required: spec.regime == Regime::StrictlyMonotone,
        },
    ];
    if c.growth.is_some() {
        checks.push(ConditionCheck {
            condition: Condition::MonotoneGrowth,
            worst_slack: growth.slack,
            samples: growth.samples,
            pass: growth.slack <= tol,
            required: spec.regime == Regime::OverallMonotone,
        });
    }
    ValidationReport {
        checks,
        box_half_width: b,
        tolerance: tol,
    }
}
