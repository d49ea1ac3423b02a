//! Linear least squares and power-law regression.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};

/// Condition number above which a least-squares problem is rejected.
pub const MAX_CONDITION: f64 = 1e10;

#[derive(Clone, Debug, Serialize)]
pub struct LeastSquares {
    pub coeffs: Vec<f64>,
    pub residual_rms: f64,
    pub max_abs_residual: f64,
    pub condition: f64,
}

/// Solves `min ||A c − y||` by SVD of the column-scaled design matrix.
pub fn least_squares(design: &DMatrix<f64>, y: &[f64]) -> Result<LeastSquares> {
    let (rows, cols) = design.shape();
    if rows != y.len() || rows < cols || cols == 0 {
        return Err(Error::Fit(format!(
            "design {rows}x{cols} against {} observations",
            y.len()
        )));
    }
    // equilibrate columns so the condition number reflects the model, not units
    let mut a = design.clone();
    let mut scale = vec![1.0; cols];
    for (j, s) in scale.iter_mut().enumerate() {
        let n = a.column(j).norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::Fit(format!("column {j} is zero or non-finite")));
        }
        *s = n;
        a.column_mut(j).scale_mut(1.0 / n);
    }
    let svd = a.clone().svd(true, true);
    let sv = &svd.singular_values;
    let smax = sv.max();
    let smin = sv.min();
    let condition = if smin > 0.0 {
        smax / smin
    } else {
        f64::INFINITY
    };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::Fit(format!(
            "ill-conditioned least squares (condition {condition:.3e})"
        )));
    }
    let rhs = DVector::from_column_slice(y);
    let sol = svd
        .solve(&rhs, 0.0)
        .map_err(|e| Error::Fit(e.to_string()))?;
    let coeffs: Vec<f64> = sol.iter().zip(&scale).map(|(c, s)| c / s).collect();
    let resid = &a * &sol - &rhs;
    let residual_rms = (resid.norm_squared() / rows as f64).sqrt();
    let max_abs_residual = resid.amax();
    Ok(LeastSquares {
        coeffs,
        residual_rms,
        max_abs_residual,
        condition,
    })
}

/// Polynomial least squares `y ≈ Σ c_j x^j`, `j < degree + 1`.
pub fn polyfit(x: &[f64], y: &[f64], degree: usize) -> Result<LeastSquares> {
    let design = DMatrix::from_fn(x.len(), degree + 1, |i, j| x[i].powi(j as i32));
    least_squares(&design, y)
}

/// `ln y = ln C + α ln x` regression.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct PowerLaw {
    pub exponent: f64,
    pub constant: f64,
    pub r_squared: f64,
    /// Standard error of the exponent.
    pub exponent_stderr: f64,
}

pub fn fit_power_law(x: &[f64], y: &[f64]) -> Result<PowerLaw> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(Error::Fit("power-law fit needs at least 3 points".into()));
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::Fit(
            "power-law fit needs positive finite data".into(),
        ));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::Fit("degenerate window: all abscissae equal".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = ly.iter().map(|v| (v - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    let exponent_stderr = if lx.len() > 2 {
        (sse / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(PowerLaw {
        exponent: slope,
        constant: intercept.exp(),
        r_squared,
        exponent_stderr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_polynomial_recovered() {
        let x: Vec<f64> = (0..50).map(|i| 4.0 + i as f64 * 0.1).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 - 2.0 * v + 0.5 * v * v).collect();
        let fit = polyfit(&x, &y, 2).unwrap();
        for (got, want) in fit.coeffs.iter().zip([3.0, -2.0, 0.5]) {
            assert!((got - want).abs() < 1e-10);
        }
        assert!(fit.residual_rms < 1e-12);
    }

    #[test]
    fn collinear_design_rejected() {
        let x = vec![1.0; 10];
        assert!(matches!(polyfit(&x, &x, 2), Err(Error::Fit(_))));
    }

    #[test]
    fn power_law_exact() {
        let x: Vec<f64> = (1..100).map(|i| 10.0 * i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.5 * v.powf(0.37)).collect();
        let p = fit_power_law(&x, &y).unwrap();
        assert!((p.exponent - 0.37).abs() < 1e-10);
        assert!((p.constant - 2.5).abs() < 1e-9);
        assert!((p.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn power_law_degenerate() {
        assert!(fit_power_law(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]).is_err());
        assert!(fit_power_law(&[1.0, 2.0, 3.0], &[1.0, 0.0, 3.0]).is_err());
    }
}
