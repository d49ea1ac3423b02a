use num_complex::Complex64;

use super::config::EvalConfig;
use super::gamma::{bernoulli_even, MAX_BERNOULLI_INDEX};
use crate::dd::DoubleDouble;
use crate::error::{Error, Result};

const MAX_TERMS: usize = 20_000_000;

/// Result of an oracle evaluation together with its a-priori error bound.
#[derive(Clone, Copy, Debug)]
pub struct ZetaValue {
    pub value: Complex64,
    pub remainder_bound: f64,
    pub terms: usize,
}

/// log of the Euler–Maclaurin remainder bound
/// `|T_{M+1}| |s + 2M + 1| / (σ + 2M + 1)` after `n` explicit terms.
fn log_remainder_bound(s: Complex64, n: f64, m: usize) -> f64 {
    let b = bernoulli_even(m + 1).abs().ln();
    let mut log_fact = 0.0;
    for i in 1..=(2 * m + 2) {
        log_fact += (i as f64).ln();
    }
    let mut log_rise = 0.0;
    for i in 0..=(2 * m) {
        log_rise += (s + i as f64).norm().ln();
    }
    let denom = s.re + (2 * m + 1) as f64;
    b - log_fact + log_rise - (s.re + (2 * m + 1) as f64) * n.ln()
        + (s + (2 * m + 1) as f64).norm().ln()
        - denom.ln()
}

/// ζ(s) by Euler–Maclaurin summation with double-double accumulation of the
/// explicit sum. The cutoff is raised until the remainder bound drops below
/// `cfg.target_abs_error`.
pub fn zeta_oracle(s: Complex64, cfg: &EvalConfig) -> Result<ZetaValue> {
    if !(s.re.is_finite() && s.im.is_finite()) {
        return Err(Error::Domain(format!("zeta of non-finite {s}")));
    }
    if s == Complex64::new(1.0, 0.0) {
        return Err(Error::Pole("1".into()));
    }
    let m = cfg.em_terms as usize;
    if m + 1 > MAX_BERNOULLI_INDEX / 2 {
        return Err(Error::Config(format!(
            "em_terms {m} exceeds Bernoulli table"
        )));
    }
    if s.re + (2 * m + 1) as f64 <= 0.0 {
        return Err(Error::Precision(format!(
            "em_terms {m} too small for Re s = {}",
            s.re
        )));
    }
    let log_target = cfg.target_abs_error.ln();
    let mut n = ((s.norm() / (2.0 * std::f64::consts::PI)).ceil() as usize + 1).max(5);
    let mut bound = log_remainder_bound(s, n as f64, m);
    while bound > log_target {
        n = n + n / 4 + 1;
        if n > MAX_TERMS {
            return Err(Error::Precision(format!(
                "remainder bound for s = {s} with {m} Bernoulli terms not below {}",
                cfg.target_abs_error
            )));
        }
        bound = log_remainder_bound(s, n as f64, m);
    }

    let mut re = DoubleDouble::ZERO;
    let mut im = DoubleDouble::ZERO;
    for k in 1..n {
        let lk = (k as f64).ln();
        let mag = (-s.re * lk).exp();
        let (sin, cos) = (s.im * lk).sin_cos();
        re = re.add_f64(mag * cos);
        im = im.add_f64(-mag * sin);
    }

    let nf = n as f64;
    let n_pow = (-s * nf.ln()).exp();
    let mut tail = n_pow * nf / (s - 1.0) + n_pow * 0.5;
    // c_j = s(s+1)...(s+2j-2) N^{1-2j} / (2j)!
    let mut c = s / (2.0 * nf);
    for j in 1..=m {
        tail += n_pow * c * bernoulli_even(j);
        let a = 2 * j as u64;
        c = c * (s + (a - 1) as f64) * (s + a as f64) / (((a + 1) * (a + 2)) as f64 * nf * nf);
    }
    re = re.add_f64(tail.re);
    im = im.add_f64(tail.im);
    Ok(ZetaValue {
        value: Complex64::new(re.to_f64(), im.to_f64()),
        remainder_bound: bound.exp(),
        terms: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn cfg() -> EvalConfig {
        EvalConfig::oracle(1e-13)
    }

    #[test]
    fn classical_values() {
        let z2 = zeta_oracle(Complex64::new(2.0, 0.0), &cfg()).unwrap();
        assert!((z2.value.re - PI * PI / 6.0).abs() < 1e-14);
        let z0 = zeta_oracle(Complex64::new(0.0, 0.0), &cfg()).unwrap();
        assert!((z0.value.re + 0.5).abs() < 1e-14);
        let zh = zeta_oracle(Complex64::new(0.5, 0.0), &cfg()).unwrap();
        assert!((zh.value.re + 1.460_354_508_809_586_8).abs() < 1e-13);
    }

    #[test]
    fn complex_reference_values() {
        let cases = [
            (
                Complex64::new(2.0, 3.0),
                Complex64::new(0.798_021_985_146_275_7, -0.113_744_308_052_938_5),
            ),
            (
                Complex64::new(-0.5, 10.0),
                Complex64::new(2.042_262_365_980_451, -0.049_716_562_157_257_11),
            ),
            (
                Complex64::new(0.5, 1000.0),
                Complex64::new(0.356_334_367_194_396_06, 0.931_997_831_232_993_7),
            ),
        ];
        for (s, want) in cases {
            let got = zeta_oracle(s, &cfg()).unwrap();
            assert!((got.value - want).norm() < 1e-11, "{s}: {}", got.value);
            assert!(got.remainder_bound <= 1e-13);
        }
    }

    #[test]
    fn first_zero_is_tiny() {
        let v = zeta_oracle(Complex64::new(0.5, 14.134_725_142), &cfg()).unwrap();
        assert!(v.value.norm() < 1e-6);
    }

    #[test]
    fn pole_rejected() {
        assert!(matches!(
            zeta_oracle(Complex64::new(1.0, 0.0), &cfg()),
            Err(Error::Pole(_))
        ));
    }

    #[test]
    fn remainder_bound_controls_error() {
        // Loose target: the actual error must still respect the reported bound.
        let loose = EvalConfig::oracle(1e-6);
        let tight = zeta_oracle(Complex64::new(0.7, 40.0), &cfg())
            .unwrap()
            .value;
        let v = zeta_oracle(Complex64::new(0.7, 40.0), &loose).unwrap();
        assert!(v.remainder_bound <= 1e-6);
        assert!((v.value - tight).norm() <= v.remainder_bound + 1e-13);
    }
}
