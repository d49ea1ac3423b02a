use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    EulerMaclaurinOracle,
    RiemannSiegelFast,
}

/// Evaluation policy for ζ and Z.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub method: Method,
    pub target_abs_error: f64,
    /// Riemann–Siegel correction depth `d`: terms `C_0..=C_d` are used.
    pub rs_correction_terms: u8,
    /// Number of Bernoulli terms in the Euler–Maclaurin tail.
    pub em_terms: u32,
}

pub const MAX_RS_CORRECTION_TERMS: u8 = 4;
pub const MIN_EM_TERMS: u32 = 10;
pub const MAX_EM_TERMS: u32 = 60;

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            method: Method::RiemannSiegelFast,
            target_abs_error: 1e-8,
            rs_correction_terms: MAX_RS_CORRECTION_TERMS,
            em_terms: 20,
        }
    }
}

impl EvalConfig {
    pub fn oracle(target_abs_error: f64) -> Self {
        Self {
            method: Method::EulerMaclaurinOracle,
            target_abs_error,
            ..Self::default()
        }
    }

    pub fn fast(target_abs_error: f64, rs_correction_terms: u8) -> Self {
        Self {
            method: Method::RiemannSiegelFast,
            target_abs_error,
            rs_correction_terms,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.target_abs_error > 0.0 && self.target_abs_error.is_finite()) {
            return Err(Error::Config(format!(
                "target_abs_error must be positive, got {}",
                self.target_abs_error
            )));
        }
        if self.rs_correction_terms > MAX_RS_CORRECTION_TERMS {
            return Err(Error::Config(format!(
                "rs_correction_terms must be <= {MAX_RS_CORRECTION_TERMS}, got {}",
                self.rs_correction_terms
            )));
        }
        if !(MIN_EM_TERMS..=MAX_EM_TERMS).contains(&self.em_terms) {
            return Err(Error::Config(format!(
                "em_terms must lie in {MIN_EM_TERMS}..={MAX_EM_TERMS}, got {}",
                self.em_terms
            )));
        }
        Ok(())
    }

    /// Stable 64-bit fingerprint of every field that influences sample values.
    pub fn fingerprint(&self) -> u64 {
        let mut bytes = Vec::with_capacity(16);
        bytes.push(match self.method {
            Method::EulerMaclaurinOracle => 1u8,
            Method::RiemannSiegelFast => 2u8,
        });
        bytes.extend_from_slice(&self.target_abs_error.to_le_bytes());
        bytes.push(self.rs_correction_terms);
        bytes.extend_from_slice(&self.em_terms.to_le_bytes());
        crate::checksum::crc64(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid() {
        EvalConfig::default().validate().unwrap();
    }

    #[test]
    fn rejects_bad_fields() {
        let mut c = EvalConfig::default();
        c.rs_correction_terms = 5;
        assert!(c.validate().is_err());
        let mut c = EvalConfig::default();
        c.em_terms = 9;
        assert!(c.validate().is_err());
        let mut c = EvalConfig::default();
        c.target_abs_error = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn fingerprint_sensitive_to_every_field() {
        let base = EvalConfig::default();
        let variants = [
            EvalConfig {
                method: Method::EulerMaclaurinOracle,
                ..base
            },
            EvalConfig {
                target_abs_error: 1e-9,
                ..base
            },
            EvalConfig {
                rs_correction_terms: 2,
                ..base
            },
            EvalConfig {
                em_terms: 21,
                ..base
            },
        ];
        for v in variants {
            assert_ne!(v.fingerprint(), base.fingerprint());
        }
        assert_eq!(base.fingerprint(), EvalConfig::default().fingerprint());
    }
}
