//! Double-double arithmetic (an unevaluated sum `hi + lo` of two `f64`s).
//!
//! Only the handful of operations needed by the oracle accumulators and the
//! phase reductions are provided.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DoubleDouble {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
pub fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
pub fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl DoubleDouble {
    pub const ZERO: Self = Self { hi: 0.0, lo: 0.0 };

    #[inline]
    pub const fn new(hi: f64) -> Self {
        Self { hi, lo: 0.0 }
    }

    #[inline]
    pub fn from_parts(hi: f64, lo: f64) -> Self {
        let (hi, lo) = quick_two_sum(hi, lo);
        Self { hi, lo }
    }

    #[inline]
    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    #[inline]
    pub fn add_f64(self, b: f64) -> Self {
        let (s, e) = two_sum(self.hi, b);
        Self::from_parts(s, e + self.lo)
    }

    #[inline]
    pub fn mul_f64(self, b: f64) -> Self {
        let (p, e) = two_prod(self.hi, b);
        Self::from_parts(p, e + self.lo * b)
    }

    /// Division by a plain double; one Newton correction on the quotient.
    pub fn div_f64(self, b: f64) -> Self {
        let q1 = self.hi / b;
        let r = self - Self::new(b).mul_f64(q1);
        let q2 = r.hi / b;
        let r = r - Self::new(b).mul_f64(q2);
        let q3 = r.hi / b;
        Self::from_parts(q1, q2).add_f64(q3)
    }

    pub fn floor(self) -> Self {
        let hi = self.hi.floor();
        if hi == self.hi {
            Self::from_parts(hi, self.lo.floor())
        } else {
            Self { hi, lo: 0.0 }
        }
    }

    /// `n^(1/k)` for a positive integer `n`, refined to double-double accuracy.
    pub fn root(n: u64, k: u32) -> Self {
        let nf = n as f64;
        // n may exceed 2^53
        let exact = Self::from_parts(nf, (n as i128 - nf as i128) as f64);
        let mut y = Self::new(nf.powf(1.0 / k as f64));
        for _ in 0..2 {
            let mut pow = Self::new(1.0);
            for _ in 0..k - 1 {
                pow = pow * y;
            }
            let resid = pow * y - exact;
            y = y - Self::new(resid.to_f64() / (k as f64 * pow.to_f64()));
        }
        y
    }
}

impl Add for DoubleDouble {
    type Output = Self;

    #[inline]
    fn add(self, b: Self) -> Self {
        let (s, e) = two_sum(self.hi, b.hi);
        let (t, f) = two_sum(self.lo, b.lo);
        let (s, e) = quick_two_sum(s, e + t);
        Self::from_parts(s, e + f)
    }
}

impl AddAssign for DoubleDouble {
    #[inline]
    fn add_assign(&mut self, b: Self) {
        *self = *self + b;
    }
}

impl Neg for DoubleDouble {
    type Output = Self;

    #[inline]
    fn neg(self) -> Self {
        Self {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Sub for DoubleDouble {
    type Output = Self;

    #[inline]
    fn sub(self, b: Self) -> Self {
        self + (-b)
    }
}

impl Mul for DoubleDouble {
    type Output = Self;

    #[inline]
    fn mul(self, b: Self) -> Self {
        let (p, e) = two_prod(self.hi, b.hi);
        Self::from_parts(p, e + (self.hi * b.lo + self.lo * b.hi))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_bits_lost_in_plain_sum() {
        let mut acc = DoubleDouble::new(1.0);
        for _ in 0..1000 {
            acc = acc.add_f64(1e-17);
        }
        assert!((acc.to_f64() - (1.0 + 1e-14)).abs() < 1e-22);
    }

    #[test]
    fn cube_root_squared_is_exact_for_cubes() {
        let v = DoubleDouble::root(1_000_000, 3);
        assert_eq!(v.hi, 100.0);
        assert!(v.lo.abs() < 1e-28);
        let w = DoubleDouble::root(2, 3);
        let cube = w * w * w;
        assert!((cube.hi - 2.0).abs() + cube.lo.abs() < 1e-29);
    }

    #[test]
    fn division_roundtrip() {
        let third = DoubleDouble::new(2.0).div_f64(3.0);
        let back = third.mul_f64(3.0);
        assert!((back.hi - 2.0 + back.lo).abs() < 1e-31);
    }
}
