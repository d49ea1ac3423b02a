//! Complex log-Gamma on the principal branch and exact Bernoulli numbers.

use std::sync::OnceLock;

use num_bigint::BigInt;
use num_complex::Complex;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::real::Real;

/// Largest even index for which [`bernoulli_even`] is tabulated.
pub const MAX_BERNOULLI_INDEX: usize = 130;

/// Exact Bernoulli numbers `B_0..=B_n` (convention `B_1 = +1/2`) by the
/// Akiyama–Tanigawa recurrence.
pub fn bernoulli_exact(n: usize) -> Vec<BigRational> {
    let mut row: Vec<BigRational> = Vec::with_capacity(n + 1);
    let mut out = Vec::with_capacity(n + 1);
    for m in 0..=n {
        row.push(BigRational::new(
            BigInt::from(1),
            BigInt::from(m as u64 + 1),
        ));
        for j in (1..=m).rev() {
            let diff = &row[j - 1] - &row[j];
            row[j - 1] = diff * BigRational::from_integer(BigInt::from(j as u64));
        }
        out.push(row[0].clone());
    }
    out
}

fn bernoulli_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        bernoulli_exact(MAX_BERNOULLI_INDEX)
            .iter()
            .map(|b| {
                if b.is_zero() {
                    0.0
                } else {
                    b.to_f64().unwrap_or(f64::NAN)
                }
            })
            .collect()
    })
}

/// `B_{2j}` as a double. Panics past [`MAX_BERNOULLI_INDEX`].
pub fn bernoulli_even(j: usize) -> f64 {
    bernoulli_table()[2 * j]
}

const STIRLING_TERMS: usize = 14;
const STIRLING_RADIUS: f64 = 15.0;

/// Principal-branch `log Γ(z)`: analytic on ℂ minus `(-∞, 0]`, matching the
/// limit from above on the cut. Stirling's series at a recurrence-shifted
/// argument.
pub fn log_gamma<T: Real>(z: Complex<T>) -> Result<Complex<T>> {
    if !z.re.is_finite() || !z.im.is_finite() {
        return Err(Error::Domain(format!("log_gamma of non-finite {z:?}")));
    }
    if z.im == T::zero() && z.re <= T::zero() && z.re == z.re.floor() {
        return Err(Error::Domain(format!("Gamma has a pole at {}", z.re)));
    }
    let radius = T::lit(STIRLING_RADIUS);
    let mut w = z;
    let mut shift = Complex::new(T::zero(), T::zero());
    if z.norm() < radius || z.re < T::zero() {
        let m = (radius - z.re)
            .ceil()
            .max(T::zero())
            .to_usize()
            .unwrap_or(0);
        if m > 10_000_000 {
            return Err(Error::Domain(format!("argument {z:?} too far left")));
        }
        for k in 0..m {
            shift = shift + (z + T::from_usize(k).unwrap()).ln();
        }
        w = z + T::from_usize(m).unwrap();
    }
    Ok(stirling(w) - shift)
}

fn stirling<T: Real>(w: Complex<T>) -> Complex<T> {
    let half = T::lit(0.5);
    let half_ln_2pi = T::lit(0.918_938_533_204_672_8);
    let mut out = (w - half) * w.ln() - w + half_ln_2pi;
    let inv = w.inv();
    let inv2 = inv * inv;
    let mut pow = inv;
    for j in 1..=STIRLING_TERMS {
        let coef = bernoulli_even(j) / ((2 * j) as f64 * (2 * j - 1) as f64);
        out = out + pow * T::lit(coef);
        pow = pow * inv2;
    }
    out
}

/// `log Γ(x)` for real `x > 0`.
pub fn log_gamma_real<T: Real>(x: T) -> Result<T> {
    if x <= T::zero() {
        return Err(Error::Domain(format!(
            "log_gamma_real needs x > 0, got {x}"
        )));
    }
    Ok(log_gamma(Complex::new(x, T::zero()))?.re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    type C = Complex<f64>;

    #[test]
    fn bernoulli_small_values() {
        let b = bernoulli_exact(12);
        let r = |n: i64, d: i64| BigRational::new(BigInt::from(n), BigInt::from(d));
        assert_eq!(b[0], r(1, 1));
        assert_eq!(b[1], r(1, 2));
        assert_eq!(b[2], r(1, 6));
        assert_eq!(b[4], r(-1, 30));
        assert_eq!(b[12], r(-691, 2730));
        assert!(b[3].is_zero() && b[11].is_zero());
    }

    #[test]
    fn bernoulli_matches_zeta_even_values() {
        // B_{2j} = (-1)^{j+1} 2 (2j)! zeta(2j) / (2 pi)^{2j}
        for j in [3usize, 8, 15, 25] {
            let zeta: f64 = (1..2000).map(|n| (n as f64).powi(-(2 * j as i32))).sum();
            let mut fact = 1.0;
            for i in 1..=2 * j {
                fact *= i as f64;
            }
            let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
            let expect = sign * 2.0 * fact * zeta / (2.0 * PI).powi(2 * j as i32);
            let got = bernoulli_even(j);
            assert!(((got - expect) / expect).abs() < 1e-13, "j={j}");
        }
    }

    #[test]
    fn classical_values() {
        assert_abs_diff_eq!(
            log_gamma(C::new(1.0, 0.0)).unwrap().re,
            0.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            log_gamma(C::new(2.0, 0.0)).unwrap().re,
            0.0,
            epsilon = 1e-15
        );
        let half = log_gamma(C::new(0.5, 0.0)).unwrap();
        assert_abs_diff_eq!(half.re, 0.5 * PI.ln(), epsilon = 1e-14);
        assert_eq!(half.im, 0.0);
    }

    #[test]
    fn quarter_against_reflection() {
        let q = log_gamma_real(0.25f64).unwrap();
        let tq = log_gamma_real(0.75f64).unwrap();
        // Gamma(1/4) Gamma(3/4) = pi / sin(pi/4)
        assert_abs_diff_eq!(q + tq, (PI / (PI / 4.0).sin()).ln(), epsilon = 1e-14);
        assert_abs_diff_eq!(q, 1.288_022_524_698_077_5, epsilon = 1e-14);
    }

    #[test]
    fn complex_reference_values() {
        let cases = [
            (
                C::new(3.0, 4.0),
                C::new(-1.756_626_784_603_784_1, 4.742_664_438_034_657_9),
            ),
            (
                C::new(-2.5, 0.1),
                C::new(-0.103_149_244_042_819_2, -9.314_444_268_359_838),
            ),
            (
                C::new(0.1, 50.0),
                C::new(-79.185_684_608_589_47, 144.972_065_057_198_42),
            ),
        ];
        for (z, want) in cases {
            let got = log_gamma(z).unwrap();
            assert!((got - want).norm() < 1e-12, "{z}: {got} vs {want}");
        }
    }

    #[test]
    fn recurrence_holds() {
        for z in [C::new(0.3, 7.0), C::new(-3.7, -2.0), C::new(12.0, 0.5)] {
            let lhs = log_gamma(z + 1.0).unwrap();
            let rhs = log_gamma(z).unwrap() + z.ln();
            let d = lhs - rhs;
            // equal modulo 2 pi i
            assert!(d.re.abs() < 1e-12);
            let k = (d.im / (2.0 * PI)).round();
            assert!((d.im - 2.0 * PI * k).abs() < 1e-11);
        }
    }

    #[test]
    fn imaginary_part_is_continuous_along_vertical_line() {
        let mut prev = log_gamma(C::new(0.25, 0.0)).unwrap().im;
        for i in 1..=4000 {
            let cur = log_gamma(C::new(0.25, i as f64 * 0.05)).unwrap().im;
            assert!((cur - prev).abs() < 0.5);
            prev = cur;
        }
    }

    #[test]
    fn poles_are_domain_errors() {
        for x in [0.0, -1.0, -7.0] {
            assert!(matches!(log_gamma(C::new(x, 0.0)), Err(Error::Domain(_))));
        }
    }

    #[test]
    fn f32_instantiation() {
        let v = log_gamma(Complex::<f32>::new(0.25, 0.0)).unwrap();
        assert!((v.re - 1.288_022_5).abs() < 1e-5);
    }
}
