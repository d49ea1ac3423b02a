//! Modified Mellin and Laplace transforms of powers of Z on sampled grids.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{polyfit, LeastSquares};
use crate::moments::ZSampleGrid;
use crate::quad::{simpson, FilonRule};
use crate::real::EULER_GAMMA;
use crate::special::{log_gamma, z_value, EvalConfig};
use crate::sum::Kahan;

/// Explicit bound `|ζ(1/2 + it)| <= 0.63 t^{1/6} log t` (t >= 3) used by the
/// analytic tail mode.
pub const SUBCONVEXITY_CONSTANT: f64 = 0.63;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailMode {
    GeometricExtrapolation,
    AnalyticBound,
}

/// Cutoffs for the infinite integrals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationSpec {
    pub x_max: f64,
    pub t_max: f64,
    pub tail_estimate_mode: TailMode,
}

impl TruncationSpec {
    pub fn new(x_max: f64, t_max: f64, tail_estimate_mode: TailMode) -> Result<Self> {
        let s = Self { x_max, t_max, tail_estimate_mode };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x_max >= 10.0 && self.x_max.is_finite()) {
            return Err(Error::Config(format!("x_max must be >= 10, got {}", self.x_max)));
        }
        if !(self.t_max >= 10.0 && self.t_max.is_finite()) {
            return Err(Error::Config(format!("t_max must be >= 10, got {}", self.t_max)));
        }
        Ok(())
    }
}

/// Height beyond which `|M_k(σ + it)|²` truncated at `x_max` has left the
/// stationary-phase range of the x-integral (`t ≈ k·x·θ'(x)` at `x = x_max`)
/// and decays like a boundary term.
pub fn recommended_t_max(k: u32, x_max: f64) -> f64 {
    let stationary = k as f64 * x_max * 0.5 * (x_max / (2.0 * PI)).ln().max(1.0);
    (1.1 * stationary + 50.0).ceil()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainTag {
    Mellin,
    Laplace,
    Generic,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexParam {
    pub sigma: f64,
    pub t: f64,
    pub domain_tag: DomainTag,
}

impl ComplexParam {
    pub fn new(sigma: f64, t: f64, domain_tag: DomainTag) -> Result<Self> {
        if !(sigma.is_finite() && t.is_finite()) {
            return Err(Error::Domain(format!("non-finite parameter {sigma} + {t}i")));
        }
        Ok(Self { sigma, t, domain_tag })
    }

    pub fn mellin(sigma: f64, t: f64) -> Self {
        Self { sigma, t, domain_tag: DomainTag::Mellin }
    }

    pub fn s(&self) -> Complex64 {
        Complex64::new(self.sigma, self.t)
    }
}

/// A truncated transform together with its estimated tail.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransformValue {
    pub value: Complex64,
    pub tail_bound: f64,
    pub spec: TruncationSpec,
}

/// Desk-scale absolute-convergence floor for `M_k`.
pub fn mellin_floor(k: u32) -> Result<f64> {
    match k {
        1 | 2 => Ok(1.0),
        3 => Ok(1.25),
        4 => Ok(1.5),
        _ => Err(Error::Precondition(format!("M_k supports k in 1..=4, got {k}"))),
    }
}

fn check_floor(k: u32, sigma: f64) -> Result<()> {
    let floor = mellin_floor(k)?;
    if !(sigma > floor) {
        return Err(Error::Convergence(format!("sigma = {sigma} not above the floor {floor} for k = {k}")));
    }
    Ok(())
}

/// Last grid index at or below `x`, after checking `[1, x]` is covered.
fn coverage_end(grid: &ZSampleGrid, x: f64) -> Result<usize> {
    if grid.t_min() != 1.0 {
        return Err(Error::Coverage(format!("grid starts at {}, transforms need it to start at 1", grid.t_min())));
    }
    let tol = 1e-7 * grid.step();
    if grid.t_last() < x - tol {
        return Err(Error::Coverage(format!("grid ends at {}, x_max = {x} requested", grid.t_last())));
    }
    Ok(((x - 1.0) / grid.step() + 1e-7).floor() as usize)
}

/// `∫_x^∞ y^{−a} log^m y dy` for `a > 1`, `x >= 1`.
pub fn power_log_tail(a: f64, m: u32, x: f64) -> f64 {
    let b = a - 1.0;
    let l = x.ln();
    let mut acc = 0.0;
    let mut falling = 1.0;
    for j in 0..=m {
        acc += falling * l.powi((m - j) as i32) / b.powi(j as i32 + 1);
        falling *= (m - j) as f64;
    }
    (-b * l).exp() * acc
}

/// Magnitudes of a positive integrand on the blocks `[X/8, X/4]`,
/// `[X/4, X/2]`, `[X/2, X]`, extrapolated geometrically past `X`.
fn geometric_tail(grid: &ZSampleGrid, end: usize, f: impl Fn(f64, f64) -> f64) -> Result<f64> {
    let x_end = grid.t_at(end);
    let block = |lo: f64, hi: f64| -> f64 {
        let a = ((lo - 1.0) / grid.step()).round().max(0.0) as usize;
        let b = (((hi - 1.0) / grid.step()).round() as usize).min(end);
        let vals: Vec<f64> = (a..=b).map(|i| f(grid.t_at(i), grid.values()[i])).collect();
        crate::quad::trapezoid(&vals, grid.step())
    };
    let m1 = block(x_end / 8.0, x_end / 4.0);
    let m3 = block(x_end / 2.0, x_end);
    if m3 == 0.0 {
        return Ok(0.0);
    }
    let r = (m3 / m1).sqrt();
    if !(r < 1.0) {
        return Err(Error::Convergence(format!(
            "dyadic block magnitudes do not decay near x = {x_end} (ratio {r:.3})"
        )));
    }
    Ok(m3 * r / (1.0 - r))
}

/// Precomputed Filon rule for `s ↦ ∫_1^{X} Z^k(x) x^{−s} dx` at fixed σ.
#[derive(Clone, Debug)]
pub struct MellinKernel {
    pub k: u32,
    pub sigma: f64,
    rule: FilonRule,
    pub x_end: f64,
    pub tail_bound: f64,
    pub spec: TruncationSpec,
}

impl MellinKernel {
    pub fn new(k: u32, sigma: f64, grid: &ZSampleGrid, trunc: &TruncationSpec) -> Result<Self> {
        Self::with_stride(k, sigma, grid, trunc, 1)
    }

    /// Same integral using every `stride`-th sample (1 or 2); the cutoff is
    /// the same for both.
    pub fn with_stride(k: u32, sigma: f64, grid: &ZSampleGrid, trunc: &TruncationSpec, stride: usize) -> Result<Self> {
        trunc.validate()?;
        check_floor(k, sigma)?;
        if !(1..=2).contains(&stride) {
            return Err(Error::Precondition(format!("kernel stride must be 1 or 2, got {stride}")));
        }
        let end = coverage_end(grid, trunc.x_max)?;
        let end = end - end % 4;
        let rule = filon_in_log(grid, 0, end, stride, |x, z| z.powi(k as i32) * x.powf(1.0 - sigma))?;
        let tail_bound = match trunc.tail_estimate_mode {
            TailMode::GeometricExtrapolation => {
                geometric_tail(grid, end, |x, z| z.abs().powi(k as i32) * x.powf(-sigma))?
            }
            TailMode::AnalyticBound => {
                let a = sigma - k as f64 / 6.0;
                if !(a > 1.0) {
                    return Err(Error::Convergence(format!(
                        "analytic tail bound needs sigma > 1 + k/6, got {sigma} for k = {k}"
                    )));
                }
                SUBCONVEXITY_CONSTANT.powi(k as i32) * power_log_tail(a, k, grid.t_at(end))
            }
        };
        Ok(Self { k, sigma, rule, x_end: grid.t_at(end), tail_bound, spec: *trunc })
    }

    /// `∫_1^{x_end} Z^k(x) x^{−σ−it} dx`.
    pub fn eval(&self, t: f64) -> Complex64 {
        self.rule.integrate(t)
    }

    pub fn value(&self, t: f64) -> TransformValue {
        TransformValue { value: self.eval(t), tail_bound: self.tail_bound, spec: self.spec }
    }
}

/// Filon rule in `u = log x` over grid indices `lo..=hi` (even span).
fn filon_in_log(
    grid: &ZSampleGrid,
    lo: usize,
    hi: usize,
    stride: usize,
    g: impl Fn(f64, f64) -> f64,
) -> Result<FilonRule> {
    let u: Vec<f64> = (lo..=hi).step_by(stride).map(|i| grid.t_at(i).ln()).collect();
    let v: Vec<f64> = (lo..=hi).step_by(stride).map(|i| g(grid.t_at(i), grid.values()[i])).collect();
    FilonRule::new(&u, &v)
}

/// `M_k(s) = ∫_1^∞ Z^k(x) x^{−s} dx`, truncated at `trunc.x_max`.
#[allow(non_snake_case)]
pub fn mellin_Mk(k: u32, s: &ComplexParam, grid: &ZSampleGrid, trunc: &TruncationSpec) -> Result<TransformValue> {
    Ok(MellinKernel::new(k, s.sigma, grid, trunc)?.value(s.t))
}

/// `(1/π)∫_0^{T} w(t)|M(σ + it)|² dt` with its error components.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SpectralIntegral {
    pub value: f64,
    /// Geometric extrapolation of the integrand past `t_max` (included in `value`).
    pub t_tail: f64,
    /// Difference between steps `h` and `h/2`.
    pub richardson: f64,
    pub t_max: f64,
    pub t_step: f64,
}

/// Trapezoid in t at `h/2` (and `h` for the Richardson check) of a weighted
/// `|M|²`, plus a geometric tail. The trapezoid rule is exact up to aliasing
/// when `log x_end < 2π/h`.
pub fn spectral_mean_square(
    kernel: &MellinKernel,
    t_max: f64,
    h: f64,
    weight: impl Fn(f64) -> f64 + Sync,
) -> Result<SpectralIntegral> {
    if !(h > 0.0 && t_max > 4.0 * h) {
        return Err(Error::Precondition(format!("t-step {h} too large for t_max {t_max}")));
    }
    if kernel.x_end.ln() >= 2.0 * PI / h {
        return Err(Error::Precondition(format!("t-step {h} aliases for x_max = {}", kernel.x_end)));
    }
    let half = h / 2.0;
    let n = (t_max / half).ceil() as usize;
    let n = n + (4 - n % 4) % 4;
    let t_max = n as f64 * half;
    let f: Vec<f64> = (0..=n).into_par_iter().map(|j| {
        let t = j as f64 * half;
        weight(t) * kernel.eval(t).norm_sqr()
    }).collect();
    let trap = |vals: &mut dyn Iterator<Item = f64>, len: usize, step: f64| -> f64 {
        let mut acc = Kahan::<f64>::new();
        for (i, v) in vals.enumerate() {
            acc.add(if i == 0 || i + 1 == len { 0.5 * v } else { v });
        }
        acc.value() * step
    };
    let fine = trap(&mut f.iter().copied(), f.len(), half);
    let coarse = trap(&mut f.iter().copied().step_by(2), n / 2 + 1, h);
    let block = |a: usize, b: usize| trap(&mut f[a..=b].iter().copied(), b - a + 1, half);
    let b1 = block(n / 4, n / 2);
    let b2 = block(n / 2, n);
    let tail = if b2 == 0.0 {
        0.0
    } else {
        let r = b2 / b1;
        if !(r < 1.0) {
            return Err(Error::Convergence(format!(
                "spectral integrand not decaying near t = {t_max} (block ratio {r:.3}); raise t_max"
            )));
        }
        b2 * r / (1.0 - r)
    };
    Ok(SpectralIntegral {
        value: (fine + tail) / PI,
        t_tail: tail / PI,
        richardson: (fine - coarse).abs() / PI,
        t_max,
        t_step: h,
    })
}

/// Estimate of the interpolation error of `(1/π)∫_0^{T}|M|² dt`: the same
/// integrand from a kernel on every second sample, compared at 64 heights.
pub fn interpolation_budget(kernel: &MellinKernel, grid: &ZSampleGrid, t_max: f64) -> Result<f64> {
    let coarse = MellinKernel::with_stride(kernel.k, kernel.sigma, grid, &kernel.spec, 2)?;
    let n = 64;
    let dt = t_max / n as f64;
    let diff: f64 = (0..n)
        .into_par_iter()
        .map(|j| {
            let t = (j as f64 + 0.5) * dt;
            (kernel.eval(t).norm_sqr() - coarse.eval(t).norm_sqr()).abs()
        })
        .collect::<Vec<_>>()
        .iter()
        .sum();
    Ok(diff * dt / PI)
}

/// Default t-step of the spectral quadrature.
pub const SPECTRAL_STEP: f64 = 0.25;

/// `∫_1^{X} Z^{p}(x) x^{1−2σ} dx` with its tail beyond `X`, `p` even.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct WeightedMoment {
    pub value: f64,
    pub x_tail: f64,
    /// Difference between Simpson at the grid step and at twice the step.
    pub quadrature: f64,
    pub x_end: f64,
}

pub fn weighted_moment(p: u32, sigma: f64, grid: &ZSampleGrid, trunc: &TruncationSpec) -> Result<WeightedMoment> {
    if p % 2 != 0 {
        return Err(Error::Precondition(format!("weighted moment needs an even power, got {p}")));
    }
    let end = coverage_end(grid, trunc.x_max)?;
    let end = end - end % 4;
    let w = 1.0 - 2.0 * sigma;
    let f: Vec<f64> = (0..=end).map(|i| grid.values()[i].powi(p as i32) * grid.t_at(i).powf(w)).collect();
    let value = simpson(&f, grid.step())?;
    let half: Vec<f64> = f.iter().copied().step_by(2).collect();
    let quadrature = (value - simpson(&half, 2.0 * grid.step())?).abs();
    let x_tail = match trunc.tail_estimate_mode {
        TailMode::GeometricExtrapolation => geometric_tail(grid, end, |x, z| z.powi(p as i32) * x.powf(w))?,
        TailMode::AnalyticBound => {
            let a = 2.0 * sigma - 1.0 - p as f64 / 6.0;
            if !(a > 1.0) {
                return Err(Error::Convergence(format!("analytic tail needs 2σ − 1 − p/6 > 1 (σ = {sigma}, p = {p})")));
            }
            SUBCONVEXITY_CONSTANT.powi(p as i32) * power_log_tail(a, p, grid.t_at(end))
        }
    };
    Ok(WeightedMoment { value, x_tail, quadrature, x_end: grid.t_at(end) })
}

/// Both sides of `(1/π)∫_0^∞|M_k(σ+it)|² dt = ∫_1^∞ Z^{2k}(x) x^{1−2σ} dx`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ParsevalSides {
    pub k: u32,
    pub sigma: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub lhs_detail: SpectralIntegral,
    /// Tail of the x-integral past the cutoff; shared by both sides.
    pub x_tail: f64,
    /// Tail of the Mellin transform itself, for reference.
    pub mellin_tail: f64,
    pub interpolation: f64,
    pub x_quadrature: f64,
    pub spec: TruncationSpec,
}

impl ParsevalSides {
    pub fn rel_diff(&self) -> f64 {
        (self.lhs - self.rhs).abs() / self.rhs.abs()
    }
}

/// Both sides truncated at the same `x_max`; requires σ at least half a unit
/// above the convergence floor.
pub fn parseval_sides(k: u32, sigma: f64, grid: &ZSampleGrid, trunc: &TruncationSpec) -> Result<ParsevalSides> {
    let floor = mellin_floor(k)?;
    if !(sigma >= floor + 0.5) {
        return Err(Error::Convergence(format!(
            "Parseval check needs sigma >= {} for k = {k}, got {sigma}",
            floor + 0.5
        )));
    }
    parseval_unchecked(k, sigma, grid, trunc)
}

pub(crate) fn parseval_unchecked(k: u32, sigma: f64, grid: &ZSampleGrid, trunc: &TruncationSpec) -> Result<ParsevalSides> {
    let kernel = MellinKernel::new(k, sigma, grid, trunc)?;
    let lhs_detail = spectral_mean_square(&kernel, trunc.t_max, SPECTRAL_STEP, |_| 1.0)?;
    let rhs = weighted_moment(2 * k, sigma, grid, trunc)?;
    let interpolation = interpolation_budget(&kernel, grid, lhs_detail.t_max)?;
    Ok(ParsevalSides {
        interpolation,
        x_quadrature: rhs.quadrature,
        k,
        sigma,
        lhs: lhs_detail.value,
        rhs: rhs.value,
        lhs_detail,
        x_tail: rhs.x_tail,
        mellin_tail: kernel.tail_bound,
        spec: *trunc,
    })
}

/// One rung of the Parseval-inequality ladder.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct BoundRow {
    pub t: f64,
    pub lhs: f64,
    pub bound: f64,
}

impl BoundRow {
    pub fn holds(&self) -> bool {
        self.lhs <= self.bound
    }
}

/// `∫_0^T |∫_a^b Z(x) x^{−s} dx|² dt` against `2π ∫_a^b Z² x^{1−2σ} dx`
/// for every `T` in the ladder.
pub fn parseval_bound_ladder(sigma: f64, a: f64, b: f64, grid: &ZSampleGrid, ladder: &[f64]) -> Result<Vec<BoundRow>> {
    let lo = grid.index_of(a).ok_or_else(|| Error::Precondition(format!("a = {a} not on the grid")))?;
    let mut hi = grid.index_of(b).ok_or_else(|| Error::Precondition(format!("b = {b} not on the grid")))?;
    if (hi - lo) % 2 == 1 {
        hi -= 1;
    }
    if hi <= lo + 2 {
        return Err(Error::Precondition("interval [a, b] too short".into()));
    }
    let rule = filon_in_log(grid, lo, hi, 1, |x, z| z * x.powf(1.0 - sigma))?;
    let f: Vec<f64> = (lo..=hi).map(|i| grid.values()[i].powi(2) * grid.t_at(i).powf(1.0 - 2.0 * sigma)).collect();
    let bound = 2.0 * PI * simpson(&f, grid.step())?;
    let h = 0.125;
    let t_top = ladder.iter().copied().fold(0.0, f64::max);
    let n = (t_top / h).ceil() as usize;
    let vals: Vec<f64> = (0..=n).into_par_iter().map(|j| rule.integrate(j as f64 * h).norm_sqr()).collect();
    let mut cum = Vec::with_capacity(n + 1);
    let mut acc = Kahan::<f64>::new();
    cum.push(0.0);
    for j in 1..=n {
        acc.add(0.5 * h * (vals[j - 1] + vals[j]));
        cum.push(acc.value());
    }
    ladder
        .iter()
        .map(|&t| {
            if t < 0.0 {
                return Err(Error::Precondition(format!("ladder height {t} negative")));
            }
            let x = t / h;
            let j = x.floor() as usize;
            let frac = x - j as f64;
            let lhs = if j >= n { cum[n] } else { cum[j] + frac * (cum[j + 1] - cum[j]) };
            Ok(BoundRow { t, lhs, bound })
        })
        .collect()
}

/// Result of the truncated inversion integral.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct InversionValue {
    pub x: f64,
    pub c: f64,
    pub u_max: f64,
    pub value: f64,
    /// Imaginary part of the contour integral; zero for an exact rule.
    pub imag: f64,
    pub spec: TruncationSpec,
}

/// `(1/2πi)∫_{c−iU}^{c+iU} x^{s−1} M_k(s) ds` by the trapezoid rule, step 0.1.
#[allow(non_snake_case)]
pub fn mellin_invert_Zk(
    k: u32,
    x: f64,
    c: f64,
    u_max: f64,
    grid: &ZSampleGrid,
    trunc: &TruncationSpec,
) -> Result<InversionValue> {
    if !(x > 1.0) {
        return Err(Error::Precondition(format!("inversion needs x > 1, got {x}")));
    }
    if !(u_max >= x) {
        return Err(Error::Precondition(format!("inversion needs U >= x, got U = {u_max}, x = {x}")));
    }
    let kernel = MellinKernel::new(k, c, grid, trunc)?;
    let h = 0.1;
    let n = (u_max / h).round() as usize;
    let lx = x.ln();
    let m: Vec<Complex64> = (0..=n).into_par_iter().map(|j| kernel.eval(j as f64 * h)).collect();
    let pre = x.powf(c - 1.0);
    let mut re = Kahan::<f64>::new();
    let mut im = Kahan::<f64>::new();
    for j in (0..=n).rev() {
        let t = j as f64 * h;
        let w = if j == n { 0.5 } else { 1.0 };
        let pos = Complex64::from_polar(pre, t * lx) * m[j];
        let terms: &[Complex64] = if j == 0 {
            &[pos]
        } else {
            &[pos, Complex64::from_polar(pre, -t * lx) * m[j].conj()]
        };
        for v in terms {
            re.add(w * v.re);
            im.add(w * v.im);
        }
    }
    let scale = h / (2.0 * PI);
    Ok(InversionValue {
        x,
        c,
        u_max: n as f64 * h,
        value: re.value() * scale,
        imag: im.value() * scale,
        spec: *trunc,
    })
}

fn laplace_cutoff(x_max: f64, sigma: f64) -> f64 {
    x_max.min((1.0 + 50.0 / sigma).max(10.0))
}

fn laplace_tail(k: u32, sigma: f64, grid: &ZSampleGrid, end: usize, mode: TailMode) -> Result<f64> {
    let x_end = grid.t_at(end);
    let decay = (-sigma * x_end).exp() / sigma;
    Ok(match mode {
        TailMode::GeometricExtrapolation => {
            let a = (((x_end / 2.0) - 1.0) / grid.step()).round() as usize;
            let vals = &grid.values()[a..=end];
            let mean = vals.iter().map(|z| z.abs().powi(k as i32)).sum::<f64>() / vals.len() as f64;
            mean * decay
        }
        TailMode::AnalyticBound => {
            let kf = k as f64;
            let slack = sigma - kf / (6.0 * x_end) - kf / (x_end * x_end.ln());
            if !(slack > 0.0) {
                return Err(Error::Convergence(format!("analytic Laplace tail needs larger x_max at sigma = {sigma}")));
            }
            (SUBCONVEXITY_CONSTANT * x_end.powf(1.0 / 6.0) * x_end.ln()).powi(k as i32) * (-sigma * x_end).exp() / slack
        }
    })
}

/// `𝓛_k(s) = ∫_1^∞ Z^k(x) e^{−sx} dx`. The integral stops where
/// `e^{−σx}` falls below `e^{−50}` (or at `x_max`); the tail bound covers
/// the rest.
pub fn modified_laplace(k: u32, s: Complex64, grid: &ZSampleGrid, trunc: &TruncationSpec) -> Result<TransformValue> {
    trunc.validate()?;
    if !(s.re > 0.0) {
        return Err(Error::Domain(format!("Laplace transform needs Re s > 0, got {s}")));
    }
    let x_cut = laplace_cutoff(trunc.x_max, s.re);
    let end = coverage_end(grid, x_cut)?;
    let end = end - end % 2;
    let x: Vec<f64> = (0..=end).map(|i| grid.t_at(i)).collect();
    let g: Vec<f64> = (0..=end).map(|i| grid.values()[i].powi(k as i32) * (-s.re * x[i]).exp()).collect();
    let value = FilonRule::new(&x, &g)?.integrate(s.im);
    let tail_bound = laplace_tail(k, s.re, grid, end, trunc.tail_estimate_mode)?;
    Ok(TransformValue { value, tail_bound, spec: *trunc })
}

/// Z on `[0, 1]` at step `10^{-3}`, the head of the classical Laplace transform.
#[derive(Clone, Debug)]
pub struct LaplaceHead {
    x: Vec<f64>,
    z: Vec<f64>,
}

pub const HEAD_STEP: f64 = 1e-3;

impl LaplaceHead {
    pub fn new(cfg: &EvalConfig) -> Result<Self> {
        let n = (1.0 / HEAD_STEP).round() as usize;
        let x: Vec<f64> = (0..=n).map(|i| i as f64 * HEAD_STEP).collect();
        let z = x.par_iter().map(|&t| z_value(t, cfg)).collect::<Result<Vec<f64>>>()?;
        Ok(Self { x, z })
    }

    fn integral(&self, k: u32, s: Complex64) -> Result<Complex64> {
        let g: Vec<f64> = self.x.iter().zip(&self.z).map(|(x, z)| z.powi(k as i32) * (-s.re * x).exp()).collect();
        Ok(FilonRule::new(&self.x, &g)?.integrate(s.im))
    }
}

/// `L_k(s) = ∫_0^∞ Z^k(x) e^{−sx} dx` = head on `[0, 1]` + `𝓛_k(s)`.
pub fn classical_laplace(
    k: u32,
    s: Complex64,
    grid: &ZSampleGrid,
    head: &LaplaceHead,
    trunc: &TruncationSpec,
) -> Result<TransformValue> {
    let body = modified_laplace(k, s, grid, trunc)?;
    Ok(TransformValue { value: body.value + head.integral(k, s)?, ..body })
}

/// `R(σ) = L_2(2σ) − (γ − log 4πσ) / (2 sin σ)`.
pub fn kober_residual(sigma: f64, grid: &ZSampleGrid, head: &LaplaceHead, trunc: &TruncationSpec) -> Result<f64> {
    let l2 = classical_laplace(2, Complex64::new(2.0 * sigma, 0.0), grid, head, trunc)?;
    Ok(l2.value.re - (EULER_GAMMA - (4.0 * PI * sigma).ln()) / (2.0 * sigma.sin()))
}

#[derive(Clone, Debug, Serialize)]
pub struct AtkinsonFit {
    /// Coefficients of `σ L_4(σ) ≈ Σ b_j log^j(1/σ)`, `j = 0..=4`.
    pub coeffs: Vec<f64>,
    pub leading: f64,
    pub target: f64,
    pub rel_error: f64,
    pub lsq: LeastSquares,
    pub sigmas: Vec<f64>,
}

/// Quartic fit of `σ L_4(σ)` in `log(1/σ)` over the given σ values.
pub fn atkinson_l4_fit(sigmas: &[f64], grid: &ZSampleGrid, head: &LaplaceHead, trunc: &TruncationSpec) -> Result<AtkinsonFit> {
    if sigmas.len() < 6 {
        return Err(Error::Fit("Atkinson fit needs at least 6 sigma values".into()));
    }
    let mut ys = Vec::with_capacity(sigmas.len());
    let mut vs = Vec::with_capacity(sigmas.len());
    for &s in sigmas {
        let l4 = classical_laplace(4, Complex64::new(s, 0.0), grid, head, trunc)?;
        ys.push((1.0 / s).ln());
        vs.push(s * l4.value.re);
    }
    let lsq = polyfit(&ys, &vs, 4)?;
    let leading = lsq.coeffs[4];
    let target = 1.0 / (2.0 * PI * PI);
    Ok(AtkinsonFit {
        coeffs: lsq.coeffs.clone(),
        leading,
        target,
        rel_error: (leading - target).abs() / target,
        lsq,
        sigmas: sigmas.to_vec(),
    })
}

/// `n` geometrically spaced values on `[lo, hi]`.
pub fn geomspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1).max(1) as f64).exp()).collect()
}

/// `𝓛_k(y)` for real `y > 0` by Simpson on the grid, with the same cutoff
/// rule as [`modified_laplace`].
fn laplace_real(k: u32, y: f64, grid: &ZSampleGrid, x_max: f64) -> Result<f64> {
    let end = coverage_end(grid, laplace_cutoff(x_max, y))?;
    let end = end - end % 2;
    let f: Vec<f64> = (0..=end).map(|i| grid.values()[i].powi(k as i32) * (-y * grid.t_at(i)).exp()).collect();
    simpson(&f, grid.step())
}

/// Nodes `u = log y` of the outer integrals: even counts on either side of
/// `u = 0`, from `y_min = 40/x_max` to `y = 60`.
fn outer_nodes(x_max: f64) -> (Vec<f64>, usize) {
    let hu = 0.01;
    let mut below = ((x_max / 40.0).ln() / hu).ceil() as usize;
    below += below % 2;
    let mut above = (60f64.ln() / hu).ceil() as usize;
    above += above % 2;
    let u = (0..=below + above).map(|j| (j as f64 - below as f64) * hu).collect();
    (u, below)
}

/// The two sides of the Γ–Mellin relation for the Laplace transform.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct GammaRelation {
    pub k: u32,
    pub s: Complex64,
    /// `Γ(s) M_k(s)`.
    pub gamma_mellin: Complex64,
    /// `∫_1^∞ 𝓛_k(1/x) x^{−1−s} dx`.
    pub outer_from_one: Complex64,
    /// `∫_0^1 𝓛_k(1/x) x^{−1−s} dx`.
    pub outer_below_one: Complex64,
    /// Estimated contribution of `x > 1/y_min` dropped from `outer_from_one`.
    pub outer_tail: f64,
    pub mellin_tail: f64,
}

impl GammaRelation {
    pub fn outer_full(&self) -> Complex64 {
        self.outer_from_one + self.outer_below_one
    }
    pub fn rel_diff_full(&self) -> f64 {
        (self.gamma_mellin - self.outer_full()).norm() / self.gamma_mellin.norm()
    }
    pub fn rel_diff_from_one(&self) -> f64 {
        (self.gamma_mellin - self.outer_from_one).norm() / self.gamma_mellin.norm()
    }
}

/// Computes `Γ(s)M_k(s)` and `∫ 𝓛_k(1/x) x^{−1−s} dx` over `x > 1` and
/// `0 < x < 1` separately (substituting `y = 1/x`).
pub fn gamma_relation(k: u32, s: Complex64, grid: &ZSampleGrid, trunc: &TruncationSpec) -> Result<GammaRelation> {
    let m = mellin_Mk(k, &ComplexParam::mellin(s.re, s.im), grid, trunc)?;
    let gamma = log_gamma(s)?.exp();
    let (u, below) = outer_nodes(trunc.x_max);
    let lap: Vec<f64> = u.par_iter().map(|&v| laplace_real(k, v.exp(), grid, trunc.x_max)).collect::<Result<_>>()?;
    // ∫ 𝓛(e^u) e^{σu} e^{itu} du
    let g: Vec<f64> = u.iter().zip(&lap).map(|(v, l)| l * (s.re * v).exp()).collect();
    let from_one = FilonRule::new(&u[..=below], &g[..=below])?.integrate(-s.im);
    let below_one = FilonRule::new(&u[below..], &g[below..])?.integrate(-s.im);
    if !(s.re > 1.0) {
        return Err(Error::Convergence(format!("outer integral tail estimate needs Re s > 1, got {s}")));
    }
    let y0 = u[0].exp();
    let outer_tail = 2.0 * lap[0].abs() * y0.powf(s.re) / (s.re - 1.0);
    Ok(GammaRelation {
        k,
        s,
        gamma_mellin: gamma * m.value,
        outer_from_one: from_one,
        outer_below_one: below_one,
        outer_tail,
        mellin_tail: gamma.norm() * m.tail_bound,
    })
}

/// Both sides of the Γ-weighted Parseval relation for the Laplace transform.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct LaplaceParseval {
    pub k: u32,
    pub sigma: f64,
    /// `∫_1^∞ 𝓛_k²(1/x) x^{−1−2σ} dx`.
    pub lhs_from_one: f64,
    /// `∫_0^1 𝓛_k²(1/x) x^{−1−2σ} dx`.
    pub lhs_below_one: f64,
    /// `(1/π)∫_0^∞ |Γ(σ+it)|² |M_k(σ+it)|² dt`.
    pub rhs: f64,
    pub rhs_detail: SpectralIntegral,
}

/// Experimental: the comparison is not part of any acceptance check because
/// the admissible range of σ is not pinned down. Refuses to run unless
/// `experimental` is set.
pub fn laplace_parseval(
    k: u32,
    sigma: f64,
    grid: &ZSampleGrid,
    trunc: &TruncationSpec,
    experimental: bool,
) -> Result<LaplaceParseval> {
    if !experimental {
        return Err(Error::Config("the Γ-weighted Parseval comparison is experimental; enable it explicitly".into()));
    }
    let kernel = MellinKernel::new(k, sigma, grid, trunc)?;
    let ln_gamma_sq = |t: f64| -> f64 {
        log_gamma(Complex64::new(sigma, t)).map(|v| (2.0 * v.re).exp()).unwrap_or(0.0)
    };
    // |Γ|² decays like e^{−πt}; a short range suffices
    let rhs_detail = spectral_mean_square(&kernel, trunc.t_max.min(60.0), SPECTRAL_STEP, ln_gamma_sq)?;
    let (u, below) = outer_nodes(trunc.x_max);
    let lap: Vec<f64> = u.par_iter().map(|&v| laplace_real(k, v.exp(), grid, trunc.x_max)).collect::<Result<_>>()?;
    let f: Vec<f64> = u.iter().zip(&lap).map(|(v, l)| l * l * (2.0 * sigma * v).exp()).collect();
    let hu = u[1] - u[0];
    Ok(LaplaceParseval {
        k,
        sigma,
        lhs_from_one: simpson(&f[..=below], hu)?,
        lhs_below_one: simpson(&f[below..], hu)?,
        rhs: rhs_detail.value,
        rhs_detail,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::build_grid;
    use std::sync::OnceLock;

    fn grid() -> &'static ZSampleGrid {
        static G: OnceLock<ZSampleGrid> = OnceLock::new();
        G.get_or_init(|| build_grid(1.0, 400.0, 0.025, &EvalConfig::default()).unwrap())
    }

    fn trunc(x_max: f64) -> TruncationSpec {
        TruncationSpec::new(x_max, 200.0, TailMode::GeometricExtrapolation).unwrap()
    }

    #[test]
    fn floors_and_coverage() {
        let g = grid();
        assert!(matches!(
            mellin_Mk(1, &ComplexParam::mellin(1.0, 0.0), g, &trunc(100.0)),
            Err(Error::Convergence(_))
        ));
        assert!(matches!(
            mellin_Mk(3, &ComplexParam::mellin(1.2, 0.0), g, &trunc(100.0)),
            Err(Error::Convergence(_))
        ));
        assert!(matches!(
            mellin_Mk(1, &ComplexParam::mellin(2.0, 0.0), g, &trunc(1000.0)),
            Err(Error::Coverage(_))
        ));
        assert!(TruncationSpec::new(5.0, 100.0, TailMode::AnalyticBound).is_err());
    }

    #[test]
    fn conjugate_symmetry() {
        let g = grid();
        let a = mellin_Mk(1, &ComplexParam::mellin(2.0, 5.0), g, &trunc(300.0)).unwrap();
        let b = mellin_Mk(1, &ComplexParam::mellin(2.0, -5.0), g, &trunc(300.0)).unwrap();
        assert!((a.value - b.value.conj()).norm() < 1e-12);
    }

    #[test]
    fn real_positive_for_even_k() {
        let v = mellin_Mk(2, &ComplexParam::mellin(2.0, 0.0), grid(), &trunc(300.0)).unwrap();
        assert!(v.value.re > 0.0 && v.value.im.abs() < 1e-15, "{v:?}");
        assert!(v.tail_bound > 0.0 && v.tail_bound < 0.05, "{v:?}");
    }

    #[test]
    fn filon_matches_direct_simpson_at_small_t() {
        // at t = 0.5 the x-integrand is smooth, so plain Simpson is a fair reference
        let g = grid();
        let end = ((300.0 - 1.0) / g.step()).round() as usize;
        let f: Vec<Complex64> = (0..=end)
            .map(|i| {
                let x = g.t_at(i);
                Complex64::new(g.values()[i], 0.0) * (Complex64::new(-2.0, -0.5) * x.ln()).exp()
            })
            .collect();
        let re: Vec<f64> = f.iter().map(|c| c.re).collect();
        let im: Vec<f64> = f.iter().map(|c| c.im).collect();
        let direct = Complex64::new(simpson(&re, g.step()).unwrap(), simpson(&im, g.step()).unwrap());
        let m = mellin_Mk(1, &ComplexParam::mellin(2.0, 0.5), g, &trunc(300.0)).unwrap();
        assert!((m.value - direct).norm() < 1e-6 * direct.norm(), "{} vs {direct}", m.value);
    }

    #[test]
    fn tail_honesty_on_doubling() {
        let g = grid();
        for t in [0.0, 3.0, 40.0] {
            let a = mellin_Mk(2, &ComplexParam::mellin(2.0, t), g, &trunc(190.0)).unwrap();
            let b = mellin_Mk(2, &ComplexParam::mellin(2.0, t), g, &trunc(380.0)).unwrap();
            assert!((a.value - b.value).norm() <= a.tail_bound, "t={t}");
        }
    }

    #[test]
    fn analytic_tail_mode() {
        let spec = TruncationSpec::new(300.0, 200.0, TailMode::AnalyticBound).unwrap();
        let v = mellin_Mk(1, &ComplexParam::mellin(2.0, 1.0), grid(), &spec).unwrap();
        let geo = mellin_Mk(1, &ComplexParam::mellin(2.0, 1.0), grid(), &trunc(300.0)).unwrap();
        assert!(v.tail_bound > geo.tail_bound);
        assert!(matches!(
            mellin_Mk(1, &ComplexParam::mellin(1.1, 1.0), grid(), &spec),
            Err(Error::Convergence(_))
        ));
    }

    #[test]
    fn power_log_tail_closed_form() {
        // ∫_x^∞ y^{-3} log y dy = (2 log x + 1) / (4 x²)
        let x = 7.0f64;
        assert!((power_log_tail(3.0, 1, x) - (2.0 * x.ln() + 1.0) / (4.0 * x * x)).abs() < 1e-15);
    }

    #[test]
    fn parseval_bound_never_violated() {
        let rows = parseval_bound_ladder(1.0, 2.0, 100.0, grid(), &[1.0, 5.0, 20.0, 80.0, 160.0]).unwrap();
        let mut last = 0.0;
        for r in &rows {
            assert!(r.holds(), "{r:?}");
            assert!(r.lhs >= last);
            last = r.lhs;
        }
    }

    #[test]
    fn laplace_domain_and_positivity() {
        let g = grid();
        assert!(matches!(modified_laplace(2, Complex64::new(0.0, 1.0), g, &trunc(300.0)), Err(Error::Domain(_))));
        let v = modified_laplace(2, Complex64::new(1.0, 0.0), g, &trunc(300.0)).unwrap();
        assert!(v.value.re > 0.0);
        let w = modified_laplace(2, Complex64::new(1.0, 3.0), g, &trunc(300.0)).unwrap();
        assert!(w.value.norm() <= v.value.re);
    }

    #[test]
    fn experimental_gate() {
        assert!(matches!(laplace_parseval(2, 2.0, grid(), &trunc(300.0), false), Err(Error::Config(_))));
    }

    #[test]
    fn inversion_preconditions() {
        assert!(mellin_invert_Zk(1, 6.0, 1.5, 5.0, grid(), &trunc(300.0)).is_err());
        assert!(mellin_invert_Zk(1, 0.5, 1.5, 50.0, grid(), &trunc(300.0)).is_err());
    }
}
