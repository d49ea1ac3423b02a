use num_complex::Complex;

use super::gamma::log_gamma;
use crate::error::{Error, Result};
use crate::real::Real;

/// `log sin z`, stable for large `|Im z|` (branch irrelevant: only exponentiated).
fn ln_sin<T: Real>(z: Complex<T>) -> Complex<T> {
    let big = T::lit(20.0);
    let i = Complex::new(T::zero(), T::one());
    if z.im > big {
        // sin z = e^{-iz} (1 - e^{2iz}) / (-2i)
        -i * z - (-i * T::lit(2.0)).ln()
            + (Complex::new(T::one(), T::zero()) - (i * z * T::lit(2.0)).exp()).ln()
    } else if z.im < -big {
        // sin z = e^{iz} (1 - e^{-2iz}) / (2i)
        i * z - (i * T::lit(2.0)).ln()
            + (Complex::new(T::one(), T::zero()) - (-i * z * T::lit(2.0)).exp()).ln()
    } else {
        z.sin().ln()
    }
}

fn ln_cos<T: Real>(z: Complex<T>) -> Complex<T> {
    ln_sin(z + T::FRAC_PI_2())
}

fn is_integer<T: Real>(s: Complex<T>) -> Option<i64> {
    if s.im == T::zero() && s.re == s.re.round() {
        s.re.to_i64()
    } else {
        None
    }
}

/// Functional-equation factor `χ(s) = 2^s π^{s−1} sin(πs/2) Γ(1−s)`.
///
/// For `Re s ≥ 1/2` the reflected form `2^{s−1} π^s / (cos(πs/2) Γ(s))` is
/// used, which is finite at the removable points `s = 2, 4, 6, …`.
pub fn chi<T: Real>(s: Complex<T>) -> Result<Complex<T>> {
    if let Some(n) = is_integer(s) {
        if n >= 1 && n % 2 == 1 {
            return Err(Error::Domain(format!("chi has a pole at s = {n}")));
        }
        if n <= 0 && n % 2 == 0 {
            return Ok(Complex::new(T::zero(), T::zero()));
        }
    }
    let two = T::lit(2.0);
    let ln2 = two.ln();
    let lnpi = T::PI().ln();
    let one = Complex::new(T::one(), T::zero());
    let half_pi_s = s * T::FRAC_PI_2();
    let log = if s.re >= T::lit(0.5) {
        (s - one) * ln2 + s * lnpi - log_gamma(s)? - ln_cos(half_pi_s)
    } else {
        s * ln2 + (s - one) * lnpi + ln_sin(half_pi_s) + log_gamma(one - s)?
    };
    Ok(log.exp())
}
