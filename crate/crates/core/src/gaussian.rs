//! Standard normal density and distribution function.

use core::f64::consts::{FRAC_1_SQRT_2, PI};

/// Density of N(0, 1).
pub fn pdf(x: f64) -> f64 {
    libm::exp(-0.5 * x * x) / libm::sqrt(2.0 * PI)
}

/// Distribution function of N(0, 1).
pub fn cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Upper tail `1 - cdf(x)`, accurate for large positive `x`.
pub fn sf(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

/// Probability that a N(0, 1) variable lands in `[a, b]`.
///
/// Differences are taken on whichever tail keeps full relative precision.
pub fn interval(a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    if a >= 0.0 {
        sf(a) - sf(b)
    } else if b <= 0.0 {
        cdf(b) - cdf(a)
    } else {
        1.0 - cdf(a) - sf(b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn reference_values() {
        assert_abs_diff_eq!(cdf(0.0), 0.5, epsilon = 1e-16);
        assert_abs_diff_eq!(cdf(1.959_963_984_540_054), 0.975, epsilon = 1e-15);
        assert_abs_diff_eq!(pdf(0.0), 0.398_942_280_401_432_7, epsilon = 1e-16);
        // Phi(0.5) - Phi(-0.5)
        assert_abs_diff_eq!(interval(-0.5, 0.5), 0.382_924_922_548_026_2, epsilon = 1e-15);
    }

    #[test]
    fn tails_are_complementary() {
        for &x in &[-8.0, -1.3, 0.0, 0.7, 5.0, 12.0] {
            assert_abs_diff_eq!(cdf(x) + sf(x), 1.0, epsilon = 1e-15);
        }
        assert!(sf(12.0) > 0.0);
    }
}
