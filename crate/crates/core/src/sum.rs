//! Compensated (Kahan–Babuška/Neumaier) summation.

use std::ops::AddAssign;

use crate::real::Real;

/// Running compensated sum. The pair `(sum, compensation)` is the complete
/// state, so a sum can be persisted and resumed bit-for-bit.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Kahan<T> {
    sum: T,
    comp: T,
}

impl<T: Real> Kahan<T> {
    pub fn new() -> Self {
        Self {
            sum: T::zero(),
            comp: T::zero(),
        }
    }

    pub fn from_parts(sum: T, comp: T) -> Self {
        Self { sum, comp }
    }

    #[inline]
    pub fn add(&mut self, x: T) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp = self.comp + ((self.sum - t) + x);
        } else {
            self.comp = self.comp + ((x - t) + self.sum);
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> T {
        self.sum + self.comp
    }

    pub fn raw_sum(&self) -> T {
        self.sum
    }

    pub fn compensation(&self) -> T {
        self.comp
    }
}

impl<T: Real> AddAssign<T> for Kahan<T> {
    #[inline]
    fn add_assign(&mut self, x: T) {
        self.add(x);
    }
}

impl<T: Real> FromIterator<T> for Kahan<T> {
    fn from_iter<I: IntoIterator<Item = T>>(iter: I) -> Self {
        let mut k = Kahan::new();
        for x in iter {
            k.add(x);
        }
        k
    }
}

/// Compensated sum of a slice.
pub fn compensated_sum<T: Real>(xs: &[T]) -> T {
    xs.iter().copied().collect::<Kahan<T>>().value()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ten_million_unit_panels() {
        // 0.1 is inexact, so a naive loop drifts by ~1e-10 relative here.
        let n = 10_000_000u64;
        let mut k = Kahan::<f64>::new();
        let mut naive = 0.0f64;
        for _ in 0..n {
            k += 0.1;
            naive += 0.1;
        }
        let exact = 1_000_000.0;
        let rel = ((k.value() - exact) / exact).abs();
        assert!(rel < 1e-10, "compensated rel error {rel}");
        assert!(((naive - exact) / exact).abs() > rel);
    }

    #[test]
    fn neumaier_handles_large_then_small() {
        let mut k = Kahan::<f64>::new();
        for x in [1e100, 1.0, -1e100] {
            k += x;
        }
        assert_eq!(k.value(), 1.0);
    }

    #[test]
    fn generic_over_f32() {
        let s: f32 = compensated_sum(&vec![0.1f32; 100_000]);
        assert!((s - 10_000.0).abs() < 1e-2);
    }

    #[test]
    fn resume_from_parts_is_bitwise() {
        let xs: Vec<f64> = (1..2000).map(|i| 1.0 / i as f64).collect();
        let mut one = Kahan::new();
        xs.iter().for_each(|&x| one += x);
        let mut first = Kahan::new();
        xs[..700].iter().for_each(|&x| first += x);
        let mut resumed = Kahan::from_parts(first.raw_sum(), first.compensation());
        xs[700..].iter().for_each(|&x| resumed += x);
        assert_eq!(one.value().to_bits(), resumed.value().to_bits());
    }
}
