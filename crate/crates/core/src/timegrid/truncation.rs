//! Truncated Brownian increments: radii, the truncated second moment and the
//! moment bound of the truncation error.

use crate::gaussian;
use crate::{Error, Result};

/// Largest admissible step; keeps `r(h) > 0`.
pub const H_MAX: f64 = 0.95;

fn check_step(h: f64) -> Result<()> {
    if h > 0.0 && h <= H_MAX {
        Ok(())
    } else {
        Err(Error::StepOutOfRange { h })
    }
}

/// Normalised radius `r(h) = sqrt(2) ln(1/h)`.
pub fn radius_normalized(h: f64) -> f64 {
    core::f64::consts::SQRT_2 * libm::log(1.0 / h)
}

/// Increment radius `R(h) = sqrt(h) r(h)`.
pub fn radius(h: f64) -> f64 {
    libm::sqrt(h) * radius_normalized(h)
}

/// `(r(h), R(h))` for `0 < h <= 0.95`.
pub fn increment_truncation(h: f64) -> Result<(f64, f64)> {
    check_step(h)?;
    Ok((radius_normalized(h), radius(h)))
}

/// `E[clamp(G, -r(h), r(h))^2]` for `G ~ N(0, 1)`.
pub fn lambda_factor(h: f64) -> Result<f64> {
    check_step(h)?;
    let r = radius_normalized(h);
    let sf = gaussian::sf(r);
    Ok((1.0 - 2.0 * sf - 2.0 * r * gaussian::pdf(r)) + 2.0 * r * r * sf)
}

/// `E|dW/h - H|^2` in closed form for one dimension; multiply by `d` for `d`
/// independent components.
pub fn increment_error_moment(h: f64) -> Result<f64> {
    check_step(h)?;
    let r = radius_normalized(h);
    Ok(2.0 * ((1.0 + r * r) * gaussian::sf(r) - r * gaussian::pdf(r)) / h)
}

/// Tail envelope `phi(h) = 2^{d/2} (1/h) ln(1/h)^d exp(-ln(1/h)^2)`.
pub fn truncation_moment_envelope(h: f64, d: usize) -> Result<f64> {
    check_step(h)?;
    let l = libm::log(1.0 / h);
    let d = d as f64;
    Ok(libm::pow(2.0, d / 2.0) / h * libm::pow(l, d) * libm::exp(-l * l))
}

/// `h_0(L_z)`: largest step with `R(h) <= 1 / (3 L_z)` on the increasing
/// branch of `R`, so every smaller step satisfies the bound too.
pub fn h0_lipz(l_z: f64) -> f64 {
    if l_z <= 0.0 {
        return H_MAX;
    }
    let target = 1.0 / (3.0 * l_z);
    let peak = libm::exp(-2.0);
    if target >= radius(peak) {
        return H_MAX;
    }
    let (mut lo, mut hi) = (0.0_f64, peak);
    while hi - lo > 1e-12 * hi {
        let mid = 0.5 * (lo + hi);
        if radius(mid) <= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}
