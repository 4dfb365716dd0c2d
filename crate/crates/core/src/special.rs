//! Scalar distribution helpers shared by the numerical modules.

use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::erf::erfc_inv;
use statrs::function::gamma::{gamma_lr, ln_gamma};

/// Standard normal quantile.
pub fn normal_quantile(p: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p)
}

pub fn t_cdf(t: f64, df: usize) -> f64 {
    StudentsT::new(0.0, 1.0, df as f64)
        .expect("df is positive")
        .cdf(t)
}

pub fn t_quantile(p: f64, df: usize) -> f64 {
    StudentsT::new(0.0, 1.0, df as f64)
        .expect("df is positive")
        .inverse_cdf(p)
}

/// Inverse of the regularized lower incomplete gamma function `P(a, x)` in
/// `x`, to relative tolerance `1e-10` or better.
pub fn inverse_gamma_lr(a: f64, p: f64) -> f64 {
    debug_assert!(a > 0.0);
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let ln_gamma_a = ln_gamma(a);

    // Wilson-Hilferty start, falling back to the small-x series for small a.
    let mut x = {
        let h = 1.0 / (9.0 * a);
        let cube = 1.0 - h + normal_quantile(p) * h.sqrt();
        let wh = a * cube.powi(3);
        if a > 1.0 && cube > 0.0 && wh > 0.0 {
            wh
        } else {
            ((p.ln() + ln_gamma_a + a.ln()) / a).exp()
        }
    };

    // Bracket maintained for safeguarding Halley steps.
    let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
    for _ in 0..200 {
        let err = gamma_lr(a, x) - p;
        if err < 0.0 {
            lo = lo.max(x);
        } else {
            hi = hi.min(x);
        }
        let log_density = (a - 1.0) * x.ln() - x - ln_gamma_a;
        let density = log_density.exp();
        let mut next = if density > 0.0 && density.is_finite() {
            let ratio = err / density;
            let halley = ratio / (1.0 - 0.5 * (ratio * ((a - 1.0) / x - 1.0)).min(1.0));
            x - halley
        } else {
            f64::NAN
        };
        if !(next > lo && next < hi) || !next.is_finite() {
            next = if hi.is_finite() { 0.5 * (lo + hi) } else { 2.0 * x.max(lo) + 1.0 };
        }
        let step = (next - x).abs();
        x = next;
        if step <= 1e-13 * x || (hi.is_finite() && hi - lo <= 1e-14 * hi) {
            break;
        }
    }
    x
}
