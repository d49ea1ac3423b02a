use num_complex::Complex64;
use serde::Serialize;

use super::config::{EvalConfig, Method};
use super::rs;
use super::theta::theta;
use super::zeta::zeta_oracle;
use crate::error::{Error, Result};

/// Below this height the Riemann–Siegel main sum is empty or a single term.
pub const RS_MIN_T: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Fallback {
    /// `t` below the Riemann–Siegel switchover.
    BelowSwitchover,
    /// The remainder bound for the configured depth exceeds the target.
    DepthInsufficient,
}

/// A value of Z(t) with the metadata of how it was obtained.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ZValue {
    pub t: f64,
    pub value: f64,
    /// The path actually used.
    pub path: Method,
    pub fallback: Option<Fallback>,
    /// A-priori bound on the truncation error of the path.
    pub error_bound: f64,
    /// `Im(e^{iθ} ζ(1/2 + it))`, only available on the oracle path.
    pub imag_residue: Option<f64>,
}

/// `e^{iθ(t)} ζ(1/2 + it)` through the oracle.
pub fn rotated_zeta(t: f64, cfg: &EvalConfig) -> Result<(Complex64, f64)> {
    let z = zeta_oracle(Complex64::new(0.5, t), cfg)?;
    let th = theta(t);
    let rot = Complex64::from_polar(1.0, th) * z.value;
    Ok((rot, z.remainder_bound))
}

/// Hardy's function. Even in `t`; the fast path is used for `|t| >= 10`
/// whenever its remainder bound meets `cfg.target_abs_error`.
pub fn hardy_z(t: f64, cfg: &EvalConfig) -> Result<ZValue> {
    if !t.is_finite() {
        return Err(Error::Domain(format!("Z({t})")));
    }
    if t.abs() > 1e6 {
        return Err(Error::Domain(format!("|t| = {} above 1e6", t.abs())));
    }
    let a = t.abs();
    let fallback = match cfg.method {
        Method::EulerMaclaurinOracle => None,
        Method::RiemannSiegelFast if a < RS_MIN_T => Some(Fallback::BelowSwitchover),
        Method::RiemannSiegelFast => {
            let bound = rs::remainder_bound(a, cfg.rs_correction_terms);
            if bound > cfg.target_abs_error {
                Some(Fallback::DepthInsufficient)
            } else {
                return Ok(ZValue {
                    t,
                    value: rs::riemann_siegel(a, cfg.rs_correction_terms),
                    path: Method::RiemannSiegelFast,
                    fallback: None,
                    error_bound: bound,
                    imag_residue: None,
                });
            }
        }
    };
    let (rot, bound) = rotated_zeta(a, cfg)?;
    Ok(ZValue {
        t,
        value: rot.re,
        path: Method::EulerMaclaurinOracle,
        fallback,
        error_bound: bound,
        imag_residue: Some(rot.im),
    })
}

/// Convenience wrapper returning only the value.
pub fn z_value(t: f64, cfg: &EvalConfig) -> Result<f64> {
    hardy_z(t, cfg).map(|v| v.value)
}
