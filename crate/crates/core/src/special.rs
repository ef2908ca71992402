//! Normal-distribution helpers.
//!
//! `erfc` comes from `statrs`; quantiles are obtained by bracketed root
//! finding on the CDF rather than by rational approximations so that the
//! absolute accuracy is controlled explicitly.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use statrs::function::erf::erfc;

/// Absolute tolerance of the root-found inverses.
pub const ROOT_TOL: f64 = 1e-12;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// `ln Φ(x)`, accurate far into the lower tail.
pub fn log_norm_cdf(x: f64) -> f64 {
    if x > 5.0 {
        (-0.5 * erfc(x * FRAC_1_SQRT_2)).ln_1p()
    } else if x > -30.0 {
        (0.5 * erfc(-x * FRAC_1_SQRT_2)).ln()
    } else {
        // Mills-ratio series: Φ(x) = φ(x)/|x| · (1 - 1/x² + 3/x⁴ - 15/x⁶ + ...)
        let z2 = 1.0 / (x * x);
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..8 {
            term *= -((2 * k - 1) as f64) * z2;
            sum += term;
        }
        -0.5 * x * x - LN_SQRT_2PI - (-x).ln() + sum.ln()
    }
}

/// Finds the root of a monotone function on `[lo, hi]` by bisection.
///
/// `increasing` tells which way the function runs. The returned point is
/// within `tol` of the root.
fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, increasing: bool, tol: f64) -> f64 {
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let v = f(mid);
        if (v < 0.0) == increasing {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Standard normal quantile `Φ⁻¹(p)` for `p` in `(0, 1)`.
///
/// Returns `NaN` outside the open unit interval.
pub fn norm_quantile(p: f64) -> f64 {
    if !(p > 0.0 && p < 1.0) {
        return f64::NAN;
    }
    if p == 0.5 {
        return 0.0;
    }
    bisect(|x| norm_cdf(x) - p, -40.0, 40.0, true, ROOT_TOL)
}

/// Inverse complementary error function on `(0, 2)`.
///
/// Returns `NaN` outside the open interval.
pub fn erfc_inv(y: f64) -> f64 {
    if !(y > 0.0 && y < 2.0) {
        return f64::NAN;
    }
    if y == 1.0 {
        return 0.0;
    }
    bisect(|x| erfc(x) - y, -27.0, 27.0, false, ROOT_TOL)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn log_cdf_matches_direct_form_where_both_are_valid() {
        for &x in &[-29.0, -10.0, -3.0, 0.0, 2.0, 4.9, 5.1, 8.0] {
            let direct = norm_cdf(x).ln();
            assert_abs_diff_eq!(log_norm_cdf(x), direct, epsilon = 1e-12 * direct.abs().max(1.0));
        }
    }

    #[test]
    fn log_cdf_tail_branch_is_continuous() {
        let a = log_norm_cdf(-30.0 + 1e-9);
        let b = log_norm_cdf(-30.0 - 1e-9);
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        assert!(log_norm_cdf(-1e3).is_finite());
    }

    #[test]
    fn quantile_inverts_cdf() {
        for &p in &[1e-10, 0.01, 0.25, 0.5, 4.0 / 9.0, 0.75, 0.999] {
            let x = norm_quantile(p);
            assert_abs_diff_eq!(norm_cdf(x), p, epsilon = 1e-12);
        }
        assert!(norm_quantile(0.0).is_nan());
        assert!(norm_quantile(1.0).is_nan());
    }

    #[test]
    fn erfc_inv_special_points() {
        assert_eq!(erfc_inv(1.0), 0.0);
        assert_abs_diff_eq!(erfc(erfc_inv(0.05)), 0.05, epsilon = 1e-12);
        assert!(erfc_inv(0.0).is_nan());
    }
}
