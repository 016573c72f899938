//! Scalar special functions.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// Standard normal distribution function, evaluated through `erfc` so that
/// the lower tail keeps full relative precision.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Upper tail `1 - Φ(x)`.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

pub fn ln_normal_cdf(x: f64) -> f64 {
    normal_cdf(x).ln()
}

pub fn ln_normal_sf(x: f64) -> f64 {
    normal_sf(x).ln()
}

/// `ln Φ(x) - ln(1 - Φ(x))`.
pub fn probit_log_odds(x: f64) -> f64 {
    ln_normal_cdf(x) - ln_normal_sf(x)
}

pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Binomial coefficient as a float. Exact for every value representable
/// without rounding, which covers all arguments used by the design model.
pub fn choose(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    if n <= 60 {
        let mut acc: u128 = 1;
        for i in 0..k as u128 {
            acc = acc * (n as u128 - i) / (i + 1);
        }
        return acc as f64;
    }
    ln_choose(n, k).exp()
}

pub fn ln_choose(n: usize, k: usize) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    if n <= 60 {
        return choose(n, k).ln();
    }
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// Log-density of `Beta(a, b)` on the open unit interval.
pub fn beta_ln_pdf(x: f64, a: f64, b: f64) -> f64 {
    if !(x > 0.0 && x < 1.0) {
        return f64::NEG_INFINITY;
    }
    (a - 1.0) * x.ln() + (b - 1.0) * (-x).ln_1p() - ln_beta(a, b)
}

/// `x ln y` with the convention `0 ln 0 = 0`.
pub fn xlny(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * y.ln()
    }
}

pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

pub fn log_add_exp(a: f64, b: f64) -> f64 {
    log_sum_exp(&[a, b])
}

/// Log-probability of a Bernoulli outcome.
pub fn bernoulli_ln(active: bool, p: f64) -> f64 {
    if active {
        p.ln()
    } else {
        (-p).ln_1p()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // 50-digit reference values computed with arbitrary-precision arithmetic.
    const PHI_TABLE: &[(f64, f64)] = &[
        (-8.0, 6.220960574271784e-16),
        (-5.0, 2.866515718791939e-07),
        (-3.0, 0.0013498980316300946),
        (-1.0, 0.15865525393145705),
        (-0.5, 0.3085375387259869),
        (0.0, 0.5),
        (0.2, 0.579259709439103),
        (1.0, 0.8413447460685429),
        (2.5, 0.9937903346742238),
    ];

    fn phi_series(x: f64) -> f64 {
        // Φ(x) = 1/2 + φ(x) Σ x^(2k+1) / (1·3·5···(2k+1))
        let mut term = x;
        let mut sum = x;
        let mut k = 0.0;
        while term.abs() > 1e-20 * sum.abs().max(1e-300) {
            k += 1.0;
            term *= x * x / (2.0 * k + 1.0);
            sum += term;
        }
        0.5 + normal_pdf(x) * sum
    }

    #[test]
    fn normal_cdf_matches_reference_values() {
        for &(x, expected) in PHI_TABLE {
            let got = normal_cdf(x);
            assert!(
                ((got - expected) / expected).abs() < 1e-14,
                "x = {x}: {got} vs {expected}"
            );
        }
    }

    #[test]
    fn normal_cdf_matches_series_on_central_range() {
        for i in -60..=60 {
            let x = i as f64 * 0.05;
            assert!((normal_cdf(x) - phi_series(x)).abs() <= 1e-14, "x = {x}");
        }
    }

    #[test]
    fn normal_cdf_symmetry() {
        for i in 0..100 {
            let x = i as f64 * 0.07;
            assert!((normal_cdf(x) + normal_cdf(-x) - 1.0).abs() < 1e-15);
            assert_eq!(normal_sf(x), normal_cdf(-x));
        }
    }

    #[test]
    fn binomials() {
        assert_eq!(choose(5, 2), 10.0);
        assert_eq!(choose(3, 5), 0.0);
        assert_eq!(choose(60, 30), 118264581564861424.0);
        assert!((ln_choose(100, 50) - 66.78384165201743).abs() < 1e-9);
        assert_eq!(ln_choose(2, 3), f64::NEG_INFINITY);
    }

    #[test]
    fn beta_density_of_uniform_is_zero_log() {
        assert!(beta_ln_pdf(0.3, 1.0, 1.0).abs() < 1e-15);
        assert_eq!(beta_ln_pdf(0.0, 2.0, 2.0), f64::NEG_INFINITY);
        assert!((beta_ln_pdf(0.5, 2.0, 2.0) - 1.5f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn log_sum_exp_handles_infinities() {
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY, f64::NEG_INFINITY]), f64::NEG_INFINITY);
        assert!((log_sum_exp(&[0.0, 0.0]) - 2f64.ln()).abs() < 1e-15);
        assert!((log_add_exp(1000.0, 1000.0) - (1000.0 + 2f64.ln())).abs() < 1e-12);
    }
}
