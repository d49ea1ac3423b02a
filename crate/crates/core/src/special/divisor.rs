use crate::error::{Error, Result};

pub const MAX_DIVISOR_K: u32 = 5;

/// `d_k(n)` for `1 <= n <= n_max`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DivisorTable {
    k: u32,
    n_max: usize,
    // index 0 unused
    values: Vec<u64>,
}

impl DivisorTable {
    /// Builds the table by `k − 1` Dirichlet convolutions with the constant
    /// sequence 1, each a harmonic sieve over multiples.
    pub fn new(k: u32, n_max: usize) -> Result<Self> {
        if !(1..=MAX_DIVISOR_K).contains(&k) {
            return Err(Error::Precondition(format!(
                "divisor order k = {k} outside 1..={MAX_DIVISOR_K}"
            )));
        }
        if n_max < 1 {
            return Err(Error::Precondition("n_max must be >= 1".into()));
        }
        let mut cur = vec![1u64; n_max + 1];
        cur[0] = 0;
        for _ in 1..k {
            let mut next = vec![0u64; n_max + 1];
            for m in 1..=n_max {
                let dm = cur[m];
                for n in (m..=n_max).step_by(m) {
                    next[n] = next[n]
                        .checked_add(dm)
                        .ok_or_else(|| Error::Range(format!("d_{k}({n}) overflows u64")))?;
                }
            }
            cur = next;
        }
        Ok(Self {
            k,
            n_max,
            values: cur,
        })
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// `d_k(n)`; panics outside `1..=n_max`.
    pub fn get(&self, n: usize) -> u64 {
        assert!(
            n >= 1 && n <= self.n_max,
            "n = {n} outside table 1..={}",
            self.n_max
        );
        self.values[n]
    }

    pub fn try_get(&self, n: usize) -> Result<u64> {
        if n >= 1 && n <= self.n_max {
            Ok(self.values[n])
        } else {
            Err(Error::Coverage(format!(
                "d_{}({n}) requested, table covers 1..={}",
                self.k, self.n_max
            )))
        }
    }

    /// Values for `n = 1..=n_max`.
    pub fn values(&self) -> &[u64] {
        &self.values[1..]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute(k: u32, n: u64) -> u64 {
        if k == 1 {
            return 1;
        }
        (1..=n)
            .filter(|m| n % m == 0)
            .map(|m| brute(k - 1, n / m))
            .sum()
    }

    #[test]
    fn small_values() {
        let d1 = DivisorTable::new(1, 50).unwrap();
        assert!(d1.values().iter().all(|&v| v == 1));
        assert_eq!(DivisorTable::new(2, 10).unwrap().get(6), 4);
        assert_eq!(DivisorTable::new(3, 10).unwrap().get(4), 6);
        assert_eq!(DivisorTable::new(5, 1).unwrap().get(1), 1);
    }

    #[test]
    fn matches_brute_force() {
        for k in 1..=5 {
            let t = DivisorTable::new(k, 120).unwrap();
            for n in 1..=120 {
                assert_eq!(t.get(n), brute(k, n as u64), "d_{k}({n})");
            }
        }
    }

    #[test]
    fn rejects_bad_order() {
        assert!(DivisorTable::new(0, 10).is_err());
        assert!(DivisorTable::new(6, 10).is_err());
        assert!(matches!(
            DivisorTable::new(3, 10).unwrap().try_get(11),
            Err(Error::Coverage(_))
        ));
    }

    proptest! {
        #[test]
        fn convolution_consistency(k in 2u32..=5, n_max in 1usize..400) {
            let hi = DivisorTable::new(k, n_max).unwrap();
            let lo = DivisorTable::new(k - 1, n_max).unwrap();
            for n in 1..=n_max {
                let s: u64 = (1..=n).filter(|m| n % m == 0).map(|m| lo.get(m)).sum();
                prop_assert_eq!(hi.get(n), s);
                prop_assert!(hi.get(n) >= 1);
            }
        }
    }
}
