use num_complex::Complex;

use super::gamma::log_gamma;
use crate::real::Real;

/// Riemann–Siegel theta: `Im log Γ(1/4 + it/2) − (t/2) log π`, the
/// continuous branch with `θ(0) = 0`. Odd in `t` by construction.
pub fn theta<T: Real>(t: T) -> T {
    let a = t.abs();
    if a == T::zero() {
        return T::zero();
    }
    let z = Complex::new(T::lit(0.25), a * T::lit(0.5));
    // 1/4 + i t/2 is never a pole.
    let lg = log_gamma(z).expect("log_gamma is regular on Re z = 1/4");
    let v = lg.im - a * T::lit(0.5) * T::PI().ln();
    if t < T::zero() {
        -v
    } else {
        v
    }
}

/// Asymptotic expansion of θ for large `t`; used only as a cross-check.
pub fn theta_asymptotic(t: f64) -> f64 {
    use std::f64::consts::PI;
    let t2 = t * t;
    t / 2.0 * (t / (2.0 * PI)).ln() - t / 2.0 - PI / 8.0
        + 1.0 / (48.0 * t)
        + 7.0 / (5760.0 * t * t2)
        + 31.0 / (80640.0 * t * t2 * t2)
        + 127.0 / (430080.0 * t * t2 * t2 * t2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_at_origin_and_odd() {
        assert_eq!(theta(0.0f64), 0.0);
        for t in [1.0f64, 5.0, 20.0] {
            assert_eq!(theta(-t), -theta(t));
        }
    }

    #[test]
    fn reference_values() {
        assert!((theta(100.0f64) - 87.972_165_231_787_22).abs() < 1e-11);
        assert!((theta(5.0f64) + 3.459_620_375_363_462_5).abs() < 1e-13);
    }

    #[test]
    fn root_between_ten_and_twenty() {
        // independent bisection on the log_gamma-based theta
        let (mut lo, mut hi) = (10.0f64, 20.0f64);
        assert!(theta(lo) < 0.0 && theta(hi) > 0.0);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if theta(mid) < 0.0 {
                lo = mid
            } else {
                hi = mid
            }
        }
        assert!((lo - 17.845_599_540_410_86).abs() < 1e-9);
    }

    #[test]
    fn matches_asymptotic_series_for_large_t() {
        for t in [30.0, 200.0, 5000.0, 1e5] {
            assert!((theta(t) - theta_asymptotic(t)).abs() < 1e-9 * t.max(1.0).ln());
        }
    }

    #[test]
    fn increasing_beyond_ten() {
        let mut prev = theta(10.0f64);
        for i in 1..5000 {
            let cur = theta(10.0 + i as f64 * 0.2);
            assert!(cur > prev);
            prev = cur;
        }
    }
}
