//! End-to-end checks of the mean-value identities, the exponential-sum
//! approximation of `F_k`, the `V_1` series and the extremum scanner.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use num_traits::{FromPrimitive, Num};
use serde::{Deserialize, Serialize};

use crate::dd::DoubleDouble;
use crate::error::{Error, Result};
use crate::fit::polyfit;
use crate::moments::{
    cumulative_moment, e1_series, e2_series, g_series, max_admissible_step, CumulativeSeries, MomentPolynomial,
    ZSampleGrid,
};
use crate::quad::simpson;
use crate::real::EULER_GAMMA;
use crate::special::{z_value, DivisorTable, EvalConfig};
use crate::sum::Kahan;
use crate::transforms::{
    interpolation_budget, power_log_tail, spectral_mean_square, ComplexParam, MellinKernel, TruncationSpec,
    SPECTRAL_STEP,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

/// Per-check tolerances and the factor by which the error budgets may
/// under-explain an observed difference.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub parseval: f64,
    pub theorem1: f64,
    pub theorem2: f64,
    pub safety_factor: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { parseval: 0.02, theorem1: 0.05, theorem2: 0.10, safety_factor: 10.0 }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("parseval", self.parseval), ("theorem1", self.theorem1), ("theorem2", self.theorem2)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Config(format!("tolerance {name} must lie in (0, 1), got {v}")));
            }
        }
        if !(self.safety_factor >= 1.0) {
            return Err(Error::Config(format!("safety factor must be >= 1, got {}", self.safety_factor)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub abs_diff: f64,
    pub rel_diff: f64,
    /// Absolute error components.
    pub budgets: BTreeMap<String, f64>,
    pub tolerance: f64,
    pub safety_factor: f64,
    pub verdict: Verdict,
}

impl IdentityReport {
    pub fn new(
        name: impl Into<String>,
        lhs: f64,
        rhs: f64,
        budgets: BTreeMap<String, f64>,
        tolerance: f64,
        safety_factor: f64,
    ) -> Self {
        let abs_diff = (lhs - rhs).abs();
        let rel_diff = abs_diff / rhs.abs();
        let budget_rel = budgets.values().map(|b| b.abs()).sum::<f64>() / rhs.abs();
        let verdict = if !(rel_diff <= tolerance) {
            Verdict::Fail
        } else if budget_rel > tolerance || rel_diff > safety_factor * budget_rel {
            Verdict::Inconclusive
        } else {
            Verdict::Pass
        };
        Self { name: name.into(), lhs, rhs, abs_diff, rel_diff, budgets, tolerance, safety_factor, verdict }
    }

    pub fn budget_total(&self) -> f64 {
        self.budgets.values().map(|b| b.abs()).sum()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// One CSV row per report: `name,lhs,rhs,rel_diff,verdict`.
pub fn summary_csv(reports: &[IdentityReport]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["name", "lhs", "rhs", "rel_diff", "verdict"])?;
    for r in reports {
        w.write_record([
            r.name.clone(),
            format!("{:e}", r.lhs),
            format!("{:e}", r.rhs),
            format!("{:e}", r.rel_diff),
            r.verdict.as_str().to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn budgets(items: &[(&str, f64)]) -> BTreeMap<String, f64> {
    items.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

/// Parseval comparison as a report.
pub fn parseval_check(
    k: u32,
    sigma: f64,
    grid: &ZSampleGrid,
    trunc: &TruncationSpec,
    tol: &Tolerances,
) -> Result<IdentityReport> {
    let p = crate::transforms::parseval_sides(k, sigma, grid, trunc)?;
    Ok(IdentityReport::new(
        format!("parseval_k{k}_sigma{sigma}"),
        p.lhs,
        p.rhs,
        budgets(&[
            ("lhs_t_tail", p.lhs_detail.t_tail),
            ("lhs_richardson", p.lhs_detail.richardson),
            ("lhs_interpolation", p.interpolation),
            ("rhs_quadrature", p.x_quadrature),
            ("shared_x_tail", p.x_tail),
        ]),
        tol.parseval,
        tol.safety_factor,
    ))
}

/// The constants of the mean-value identities.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TheoremConstants {
    /// `c_0..c_5` of the fourth-moment identity.
    pub c: [f64; 6],
    /// Named constant terms of the second-moment identity.
    pub c_rhs_components: BTreeMap<String, f64>,
}

/// `c_0 = A_0`, `c_j = A_{j−1}(j−1)!2^{−j} + A_j j! 2^{−j}` (`j = 1..4`),
/// `c_5 = A_4 4! 2^{−5}`, in any exact or floating arithmetic.
pub fn theorem2_c<T: Clone + Num + FromPrimitive>(a: &[T; 5]) -> [T; 6] {
    let lit = |v: u64| T::from_u64(v).expect("small integer");
    let fact = [1u64, 1, 2, 6, 24];
    let term = |j: usize| -> T { a[j].clone() * lit(fact[j]) / lit(1 << (j + 1)) };
    let mut c: [T; 6] = std::array::from_fn(|_| T::zero());
    c[0] = a[0].clone();
    for j in 1..=5 {
        c[j] = term(j - 1);
        if j <= 4 {
            c[j] = c[j].clone() + a[j].clone() * lit(fact[j]) / lit(1 << j);
        }
    }
    c
}

pub fn theorem2_constants(p4: &MomentPolynomial<f64>) -> Result<TheoremConstants> {
    if p4.k() != 2 || p4.degree() != 4 {
        return Err(Error::Precondition(format!(
            "fourth-moment constants need a quartic for k = 2, got degree {} for k = {}",
            p4.degree(),
            p4.k()
        )));
    }
    let a = p4.coeffs();
    let c = theorem2_c(&[a[0], a[1], a[2], a[3], a[4]]);
    Ok(TheoremConstants { c, c_rhs_components: theorem1_constants() })
}

fn theorem1_constants() -> BTreeMap<String, f64> {
    let l = (2.0 * PI).ln();
    budgets(&[
        ("pole_coefficient", 2.0 * EULER_GAMMA - l),
        ("constant", 2.0 * EULER_GAMMA - 1.0 - l),
        ("linear_coefficient", 2.0 * PI),
    ])
}

/// `(2γ − log 2π)/(2σ − 2) + 1/(2σ − 2)² + (2γ − 1 − log 2π) + 2πσ`.
pub fn theorem1_closed_form(sigma: f64) -> f64 {
    let l = (2.0 * PI).ln();
    let d = 2.0 * sigma - 2.0;
    (2.0 * EULER_GAMMA - l) / d + 1.0 / (d * d) + (2.0 * EULER_GAMMA - 1.0 - l) + 2.0 * PI * sigma
}

/// Moment data on one grid from `T = 1`, built once and shared by the checks.
#[derive(Clone, Debug)]
pub struct MomentData {
    pub e1: CumulativeSeries,
    pub g: CumulativeSeries,
    pub i2: CumulativeSeries,
}

impl MomentData {
    pub fn new(grid: &ZSampleGrid) -> Result<Self> {
        let i1 = cumulative_moment(1, grid)?;
        let e1 = e1_series(&i1)?;
        let g = g_series(&e1)?;
        let i2 = cumulative_moment(2, grid)?;
        Ok(Self { e1, g, i2 })
    }
}

fn grid_index(series: &CumulativeSeries, x: f64) -> usize {
    ((x - series.t0()) / series.step()).round() as usize
}

/// Simpson of `f(x, v)` over series indices `lo..=hi`, trimmed to an even span.
fn simpson_on(series: &CumulativeSeries, lo: usize, hi: usize, f: impl Fn(f64, f64) -> f64) -> Result<(f64, f64)> {
    let hi = hi - (hi - lo) % 4;
    let vals: Vec<f64> = (lo..=hi).map(|i| f(series.t_at(i), series.values()[i])).collect();
    let fine = simpson(&vals, series.step())?;
    let half: Vec<f64> = vals.iter().copied().step_by(2).collect();
    let coarse = simpson(&half, 2.0 * series.step())?;
    Ok((fine, (fine - coarse).abs()))
}

/// `sup_{[X/2, X]} |v(x)| / x^α` from a series.
fn sup_scaled(series: &CumulativeSeries, x: f64, alpha: f64) -> f64 {
    let hi = grid_index(series, x).min(series.len() - 1);
    let lo = grid_index(series, x / 2.0);
    (lo..=hi).map(|i| series.values()[i].abs() / series.t_at(i).powf(alpha)).fold(0.0, f64::max)
}

/// `∫_X^∞ x^{−a} Q(log x) dx` for `Q = P + P'` with `P` in ascending coefficients.
fn polynomial_tail(p: &[f64], a: f64, x: f64) -> f64 {
    let mut q = p.to_vec();
    for j in 1..p.len() {
        q[j - 1] += j as f64 * p[j];
    }
    q.iter().enumerate().map(|(j, c)| c * power_log_tail(a, j as u32, x)).sum()
}

/// `∫_1^∞ Z^{2k} x^{1−2σ} dx` split as the quadrature to `x_cut` plus an
/// analytic tail built from `I_k(x) = x P(log x) + E(x)`: the polynomial part
/// in closed form, `−E(x_c)x_c^{1−2σ}`, and `(2σ−1)∫ E x^{−2σ}` by quadrature
/// up to the end of the series with a growth bound `|E| ≪ x^α` beyond.
struct MomentTail {
    value: f64,
    beyond: f64,
    quadrature: f64,
}

fn moment_tail(sigma: f64, x_cut: f64, p: &[f64], e: &CumulativeSeries, alpha: f64) -> Result<MomentTail> {
    let a = 2.0 * sigma - 1.0;
    let main = polynomial_tail(p, a, x_cut);
    let ic = grid_index(e, x_cut);
    let x_c = e.t_at(ic);
    let boundary = -e.values()[ic] * x_c.powf(1.0 - 2.0 * sigma);
    let end = e.len() - 1;
    let (mid, quadrature) = simpson_on(e, ic, end, |x, v| v * x.powf(-2.0 * sigma))?;
    let x_end = e.t_at(end - (end - ic) % 4);
    let expo = 2.0 * sigma - alpha - 1.0;
    if !(expo > 0.0) {
        return Err(Error::Convergence(format!("E-tail bound diverges at sigma = {sigma}")));
    }
    let beyond = a * sup_scaled(e, x_end, alpha) * x_end.powf(-expo) / expo;
    Ok(MomentTail { value: main + boundary + a * mid, beyond, quadrature: a * quadrature })
}

/// Growth exponents used to bound `E`, `G` and `E_2` beyond the data.
const E1_GROWTH: f64 = 0.25;
const G_GROWTH: f64 = 0.75;
const E2_GROWTH: f64 = 2.0 / 3.0;

fn spectral_lhs(k: u32, sigma: f64, grid: &ZSampleGrid, trunc: &TruncationSpec) -> Result<(f64, BTreeMap<String, f64>, f64)> {
    let kernel = MellinKernel::new(k, sigma, grid, trunc)?;
    let spec = spectral_mean_square(&kernel, trunc.t_max, SPECTRAL_STEP, |_| 1.0)?;
    let interp = interpolation_budget(&kernel, grid, spec.t_max)?;
    Ok((
        spec.value,
        budgets(&[("lhs_t_tail", spec.t_tail), ("lhs_richardson", spec.richardson), ("lhs_interpolation", interp)]),
        kernel.x_end,
    ))
}

/// Second-moment identity at σ: `(1/π)∫|M_1|²` against the closed form plus
/// `2σ(2σ−1)∫_1^∞ G(x) x^{−1−2σ} dx`.
pub fn theorem1_check(
    sigma: f64,
    grid: &ZSampleGrid,
    data: &MomentData,
    trunc: &TruncationSpec,
    tol: &Tolerances,
) -> Result<IdentityReport> {
    if !(sigma > 1.0) {
        return Err(Error::Domain(format!("second-moment identity needs sigma > 1, got {sigma}")));
    }
    let (spectral, mut b, x_end) = spectral_lhs(1, sigma, grid, trunc)?;
    let p1 = MomentPolynomial::<f64>::p1();
    let tail = moment_tail(sigma, x_end, p1.coeffs(), &data.e1, E1_GROWTH)?;
    b.insert("lhs_x_tail".into(), tail.beyond);
    b.insert("lhs_x_quadrature".into(), tail.quadrature);
    let lhs = spectral + tail.value;

    let (g_int, g_quad, g_tail) = g_integral(sigma, &data.g)?;
    let w = 2.0 * sigma * (2.0 * sigma - 1.0);
    let rhs = theorem1_closed_form(sigma) + w * g_int;
    b.insert("rhs_g_tail".into(), w * g_tail);
    b.insert("rhs_quadrature".into(), w * g_quad);
    Ok(IdentityReport::new(format!("theorem1_sigma{sigma}"), lhs, rhs, b, tol.theorem1, tol.safety_factor))
}

/// `∫_1^{X} G(x) x^{−1−2σ} dx` over the whole series, its step-doubling
/// difference and a bound for the rest.
fn g_integral(sigma: f64, g: &CumulativeSeries) -> Result<(f64, f64, f64)> {
    let end = g.len() - 1;
    let (v, quad) = simpson_on(g, 0, end, |x, v| v * x.powf(-1.0 - 2.0 * sigma))?;
    let x_end = g.t_at(end - end % 4);
    let expo = 2.0 * sigma - G_GROWTH;
    Ok((v, quad, sup_scaled(g, x_end, G_GROWTH) * x_end.powf(-expo) / expo))
}

/// Fourth-moment identity at σ with a given `P_4`.
pub fn theorem2_check(
    sigma: f64,
    p4: &MomentPolynomial<f64>,
    grid: &ZSampleGrid,
    data: &MomentData,
    trunc: &TruncationSpec,
    tol: &Tolerances,
) -> Result<IdentityReport> {
    if !(sigma > 1.0) {
        return Err(Error::Domain(format!("fourth-moment identity needs sigma > 1, got {sigma}")));
    }
    let consts = theorem2_constants(p4)?;
    let e2 = e2_series(&data.i2, p4)?;
    let (spectral, mut b, x_end) = spectral_lhs(2, sigma, grid, trunc)?;
    let tail = moment_tail(sigma, x_end, p4.coeffs(), &e2, E2_GROWTH)?;
    b.insert("lhs_x_tail".into(), tail.beyond);
    b.insert("lhs_x_quadrature".into(), tail.quadrature);
    let lhs = spectral + tail.value;

    let (rhs, quad, beyond) = theorem2_rhs(sigma, &consts.c, &e2)?;
    b.insert("rhs_e2_tail".into(), beyond);
    b.insert("rhs_quadrature".into(), quad);
    Ok(IdentityReport::new(format!("theorem2_sigma{sigma}"), lhs, rhs, b, tol.theorem2, tol.safety_factor))
}

fn singular_sum(c: &[f64; 6], sigma: f64) -> f64 {
    c.iter().enumerate().map(|(j, cj)| cj / (sigma - 1.0).powi(j as i32)).sum()
}

fn theorem2_rhs(sigma: f64, c: &[f64; 6], e2: &CumulativeSeries) -> Result<(f64, f64, f64)> {
    let a = 2.0 * sigma - 1.0;
    let end = e2.len() - 1;
    let (v, quad) = simpson_on(e2, 0, end, |x, v| v * x.powf(-2.0 * sigma))?;
    let x_end = e2.t_at(end - end % 4);
    let expo = 2.0 * sigma - E2_GROWTH - 1.0;
    let beyond = a * sup_scaled(e2, x_end, E2_GROWTH) * x_end.powf(-expo) / expo;
    Ok((singular_sum(c, sigma) + a * v, a * quad, beyond))
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct TrendRow {
    pub sigma: f64,
    pub value: f64,
    pub budget: f64,
}

/// Values of a regularized left side approaching its σ → 1 limit.
#[derive(Clone, Debug, Serialize)]
pub struct CorollaryTable {
    pub name: String,
    pub rows: Vec<TrendRow>,
    /// The limit computed from the moment data.
    pub target: f64,
    /// Intercept at σ = 1 of a polynomial fit through the rows.
    pub extrapolated: f64,
    /// `|value − extrapolated|` decreases as σ decreases.
    pub monotone: bool,
}

impl CorollaryTable {
    fn new(name: &str, mut rows: Vec<TrendRow>, target: f64) -> Result<Self> {
        rows.sort_by(|a, b| b.sigma.total_cmp(&a.sigma));
        let xs: Vec<f64> = rows.iter().map(|r| r.sigma - 1.0).collect();
        let ys: Vec<f64> = rows.iter().map(|r| r.value).collect();
        let deg = (rows.len() - 1).min(2);
        let extrapolated = polyfit(&xs, &ys, deg)?.coeffs[0];
        let dist: Vec<f64> = ys.iter().map(|y| (y - extrapolated).abs()).collect();
        let monotone = dist.windows(2).all(|w| w[1] <= w[0]);
        Ok(Self { name: name.into(), rows, target, extrapolated, monotone })
    }
}

/// Moment-side value of `∫_1^∞ Z^{2k} x^{1−2σ} dx` (quadrature to `x_cut`
/// plus the analytic tail), with its budget.
fn x_side_moment(
    k: u32,
    sigma: f64,
    grid: &ZSampleGrid,
    x_cut: f64,
    p: &[f64],
    e: &CumulativeSeries,
    alpha: f64,
) -> Result<(f64, f64)> {
    let end = ((x_cut - grid.t_min()) / grid.step()).round() as usize;
    let end = end - end % 4;
    let w = 1.0 - 2.0 * sigma;
    let f: Vec<f64> = (0..=end).map(|i| grid.values()[i].powi(2 * k as i32) * grid.t_at(i).powf(w)).collect();
    let head = simpson(&f, grid.step())?;
    let tail = moment_tail(sigma, grid.t_at(end), p, e, alpha)?;
    Ok((head + tail.value, tail.beyond + tail.quadrature))
}

/// Second-moment corollary: `lhs − (2γ − log 2π)/(2σ−2) − 1/(2σ−2)²`
/// against `2π + 2γ − 1 − log 2π + 2∫_1^∞ G x^{−3} dx`. The left side is
/// taken from the x-integral because the t-integral cannot be resolved close
/// to σ = 1 at desk scale.
pub fn theorem1_corollary(sigmas: &[f64], grid: &ZSampleGrid, data: &MomentData, x_cut: f64) -> Result<CorollaryTable> {
    let l = (2.0 * PI).ln();
    let p1 = MomentPolynomial::<f64>::p1();
    let mut rows = Vec::new();
    for &s in sigmas {
        if !(s > 1.0) {
            return Err(Error::Domain(format!("corollary needs sigma > 1, got {s}")));
        }
        let (lhs, budget) = x_side_moment(1, s, grid, x_cut, p1.coeffs(), &data.e1, E1_GROWTH)?;
        let d = 2.0 * s - 2.0;
        rows.push(TrendRow { sigma: s, value: lhs - (2.0 * EULER_GAMMA - l) / d - 1.0 / (d * d), budget });
    }
    let (g_int, _, _) = g_integral(1.0, &data.g)?;
    let target = 2.0 * PI + 2.0 * EULER_GAMMA - 1.0 - l + 2.0 * g_int;
    CorollaryTable::new("theorem1_corollary", rows, target)
}

/// Fourth-moment corollary: `lhs − Σ c_j/(σ−1)^j` against `∫_1^∞ E_2 x^{−2} dx`.
pub fn theorem2_corollary(
    sigmas: &[f64],
    p4: &MomentPolynomial<f64>,
    grid: &ZSampleGrid,
    data: &MomentData,
    x_cut: f64,
) -> Result<CorollaryTable> {
    let consts = theorem2_constants(p4)?;
    let e2 = e2_series(&data.i2, p4)?;
    let mut rows = Vec::new();
    for &s in sigmas {
        if !(s > 1.0) {
            return Err(Error::Domain(format!("corollary needs sigma > 1, got {s}")));
        }
        let (lhs, budget) = x_side_moment(2, s, grid, x_cut, p4.coeffs(), &e2, E2_GROWTH)?;
        rows.push(TrendRow { sigma: s, value: lhs - singular_sum(&consts.c, s), budget });
    }
    let end = e2.len() - 1;
    let (target, _) = simpson_on(&e2, 0, end, |x, v| v / (x * x))?;
    CorollaryTable::new("theorem2_corollary", rows, target)
}

/// Summation range `(T/2π)^{k/2} <= n <= (T/π)^{k/2}`.
pub fn expsum_range(k: u32, t: f64) -> (u64, u64) {
    let e = k as f64 / 2.0;
    let lo = (t / (2.0 * PI)).powf(e).ceil() as u64;
    let hi = (t / PI).powf(e).floor() as u64;
    (lo.max(1), hi)
}

/// `k π n^{2/k}` reduced modulo `2π`, returned as a multiple of π in `[0, 2)`.
fn expsum_phase(k: u32, n: u64) -> f64 {
    match k {
        // n² ≡ n (mod 2)
        1 => (n % 2) as f64,
        3 => {
            let y = DoubleDouble::root(n * n, 3).mul_f64(3.0);
            let r = y - y.div_f64(2.0).floor().mul_f64(2.0);
            r.to_f64().rem_euclid(2.0)
        }
        _ => unreachable!("checked by caller"),
    }
}

/// `2π√(2/k) Σ d_k(n) n^{−1/2+1/k} cos(kπ n^{2/k} + (k−2)π/8)` over the range.
pub fn expsum_main(k: u32, t: f64, dtable: &DivisorTable) -> Result<f64> {
    if k != 1 && k != 3 {
        return Err(Error::Precondition(format!("exponential sum is implemented for k = 1, 3, got {k}")));
    }
    if dtable.k() != k {
        return Err(Error::Precondition(format!("divisor table is for k = {}, need {k}", dtable.k())));
    }
    if !(t >= 2.0 * PI) {
        return Err(Error::Precondition(format!("exponential sum needs T >= 2π, got {t}")));
    }
    let (lo, hi) = expsum_range(k, t);
    let expo = -0.5 + 1.0 / k as f64;
    let shift = (k as f64 - 2.0) / 8.0;
    let mut acc = Kahan::<f64>::new();
    for n in lo..=hi {
        let d = dtable.try_get(n as usize)? as f64;
        acc.add(d * (n as f64).powf(expo) * (PI * (expsum_phase(k, n) + shift)).cos());
    }
    Ok(2.0 * PI * (2.0 / k as f64).sqrt() * acc.value())
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct V1Partial {
    pub partial: Complex64,
    /// Sum of term magnitudes over `(N/2, N]`.
    pub tail_proxy: f64,
}

/// Partial sum to `N` of
/// `(2π)^{1−s}√(2/3) Σ d_3(n) n^{−1/6−2s/3} cos(3π n^{2/3} + π/8)`.
pub fn v1_series(s: &ComplexParam, n_terms: usize, dtable: &DivisorTable) -> Result<V1Partial> {
    if !(s.sigma >= 1.5) {
        return Err(Error::Domain(format!("V1 series needs sigma >= 3/2, got {}", s.sigma)));
    }
    if dtable.k() != 3 {
        return Err(Error::Precondition(format!("V1 needs a d_3 table, got k = {}", dtable.k())));
    }
    if n_terms > dtable.n_max() {
        return Err(Error::Coverage(format!("N = {n_terms} beyond divisor table ({})", dtable.n_max())));
    }
    let expo = Complex64::new(-1.0 / 6.0, 0.0) - s.s() * (2.0 / 3.0);
    let mut re = Kahan::<f64>::new();
    let mut im = Kahan::<f64>::new();
    let mut proxy = 0.0;
    for n in 1..=n_terms as u64 {
        let d = dtable.get(n as usize) as f64;
        let c = (PI * (expsum_phase(3, n) + 0.125)).cos();
        let term = (expo * (n as f64).ln()).exp() * (d * c);
        re.add(term.re);
        im.add(term.im);
        if 2 * n > n_terms as u64 {
            proxy += term.norm();
        }
    }
    let pre = ((Complex64::new(1.0, 0.0) - s.s()) * (2.0 * PI).ln()).exp() * (2.0f64 / 3.0).sqrt();
    Ok(V1Partial { partial: pre * Complex64::new(re.value(), im.value()), tail_proxy: pre.norm() * proxy })
}

/// A local extremum of Z and the zeros bracketing it (if any in range).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LehmerEntry {
    pub zero_left: Option<f64>,
    pub zero_right: Option<f64>,
    pub extremum_t: f64,
    pub extremum_value: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanReport {
    pub zeros: Vec<f64>,
    pub entries: Vec<LehmerEntry>,
}

const ZERO_TOL: f64 = 1e-7;

fn golden_max(f: &impl Fn(f64) -> Result<f64>, mut a: f64, mut b: f64) -> Result<(f64, f64)> {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while b - a > 1e-9 * (1.0 + a.abs()) {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d)?;
        }
    }
    let t = 0.5 * (a + b);
    Ok((t, f(t)?))
}

/// Zeros of Z on `[t_lo, t_hi]` by sign changes at an oscillation-resolving
/// step and bisection, plus every local extremum of Z refined by golden
/// section.
pub fn lehmer_scan(t_lo: f64, t_hi: f64, cfg: &EvalConfig) -> Result<ScanReport> {
    if !(t_lo >= 0.0 && t_hi > t_lo && t_hi <= 1e5) {
        return Err(Error::Precondition(format!("scan interval [{t_lo}, {t_hi}] outside 0 <= lo < hi <= 1e5")));
    }
    let step = (max_admissible_step(t_hi.max(2.0 * PI)) / 8.0).min(0.05);
    let n = ((t_hi - t_lo) / step).ceil() as usize;
    let h = (t_hi - t_lo) / n as f64;
    let ts: Vec<f64> = (0..=n).map(|i| t_lo + i as f64 * h).collect();
    let z = ts.iter().map(|&t| z_value(t, cfg)).collect::<Result<Vec<f64>>>()?;
    let zf = |t: f64| z_value(t, cfg);

    let mut zeros = Vec::new();
    for i in 0..n {
        if z[i] == 0.0 {
            zeros.push(ts[i]);
            continue;
        }
        if z[i] * z[i + 1] < 0.0 {
            let (mut a, mut b, sa) = (ts[i], ts[i + 1], z[i].signum());
            while b - a > ZERO_TOL {
                let m = 0.5 * (a + b);
                if zf(m)? * sa > 0.0 {
                    a = m;
                } else {
                    b = m;
                }
            }
            zeros.push(0.5 * (a + b));
        }
    }
    if z[n] == 0.0 {
        zeros.push(ts[n]);
    }

    let mut entries = Vec::new();
    for i in 1..n {
        let sign = if z[i] > z[i - 1] && z[i] >= z[i + 1] {
            1.0
        } else if z[i] < z[i - 1] && z[i] <= z[i + 1] {
            -1.0
        } else {
            continue;
        };
        let (t, v) = golden_max(&|t| Ok(sign * zf(t)?), ts[i - 1], ts[i + 1])?;
        let zero_left = zeros.iter().copied().filter(|&z0| z0 < t).last();
        let zero_right = zeros.iter().copied().find(|&z0| z0 > t);
        entries.push(LehmerEntry { zero_left, zero_right, extremum_t: t, extremum_value: sign * v });
    }
    Ok(ScanReport { zeros, entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;
    use num_rational::BigRational;

    #[test]
    fn c_constants_exact() {
        let a: [BigRational; 5] = std::array::from_fn(|j| BigRational::from_integer(BigInt::from(j as i64 + 2)));
        let c = theorem2_c(&a);
        assert_eq!(c[0], a[0]);
        // c_3 = A_2·2!/8 + A_3·3!/8 = 4·2/8 + 5·6/8
        assert_eq!(c[3], BigRational::new(BigInt::from(38), BigInt::from(8)));
        // c_5 = A_4·24/32
        assert_eq!(c[5], BigRational::new(BigInt::from(6 * 24), BigInt::from(32)));

        let p4 = MomentPolynomial::p4([0.0; 4]);
        let k = theorem2_constants(&p4).unwrap();
        assert!((k.c[5] - 3.0 / (8.0 * PI * PI)).abs() < 1e-15);
        assert!((k.c[4] - 1.5 / (2.0 * PI * PI)).abs() < 1e-15);
        let p = MomentPolynomial::p4([7.0, 0.0, 0.0, 0.0]);
        assert_eq!(theorem2_constants(&p).unwrap().c[0], 7.0);
        assert!(theorem2_constants(&MomentPolynomial::p1()).is_err());
    }

    #[test]
    fn closed_form_part() {
        let l = (2.0 * PI).ln();
        let want = (2.0 * EULER_GAMMA - l) + 1.0 + (2.0 * EULER_GAMMA - 1.0 - l) + 3.0 * PI;
        assert!((theorem1_closed_form(1.5) - want).abs() < 1e-14);
    }

    #[test]
    fn verdict_logic() {
        let b = |v: f64| budgets(&[("x", v)]);
        assert_eq!(IdentityReport::new("a", 1.01, 1.0, b(0.005), 0.05, 10.0).verdict, Verdict::Pass);
        assert_eq!(IdentityReport::new("a", 1.1, 1.0, b(0.005), 0.05, 10.0).verdict, Verdict::Fail);
        assert_eq!(IdentityReport::new("a", 1.01, 1.0, b(0.2), 0.05, 10.0).verdict, Verdict::Inconclusive);
        assert_eq!(IdentityReport::new("a", 1.04, 1.0, b(1e-4), 0.05, 10.0).verdict, Verdict::Inconclusive);
    }

    #[test]
    fn csv_summary() {
        let r = IdentityReport::new("t", 2.0, 1.0, BTreeMap::new(), 0.1, 10.0);
        let s = summary_csv(&[r]).unwrap();
        assert!(s.starts_with("name,lhs,rhs,rel_diff,verdict\n"));
        assert!(s.trim_end().ends_with(",fail"));
    }

    #[test]
    fn expsum_single_term() {
        let t = 8.0 * PI - 1e-6;
        assert_eq!(expsum_range(1, t), (2, 2));
        let d = DivisorTable::new(1, 10).unwrap();
        let want = 2.0 * PI * 2f64.sqrt() * 2f64.sqrt() * (-PI / 8.0).cos();
        assert!((expsum_main(1, t, &d).unwrap() - want).abs() < 1e-12);
        assert!(matches!(expsum_main(2, t, &d), Err(Error::Precondition(_))));
        assert!(matches!(expsum_main(1, 1e4, &d), Err(Error::Coverage(_))));
    }

    #[test]
    fn expsum_parity_identity() {
        for n in 1..200u64 {
            let a = (PI * (n * n) as f64 - PI / 8.0).cos();
            let b = (PI * expsum_phase(1, n) - PI / 8.0).cos();
            assert!((a - b).abs() < 1e-9 * (n * n) as f64, "{n}");
        }
    }

    #[test]
    fn k3_phase_against_exact_cubes() {
        // n = m³ gives n^{2/3} = m², so 3π n^{2/3} ≡ π (m² mod 2)·3 (mod 2π)
        for m in [10u64, 21, 999, 1000] {
            let want = ((3 * m * m) % 2) as f64;
            let got = expsum_phase(3, m * m * m);
            let d = (got - want).abs().min(2.0 - (got - want).abs());
            assert!(d < 1e-12, "{m}: {got}");
        }
    }

    #[test]
    fn v1_conjugation_and_stabilization() {
        let d = DivisorTable::new(3, 10_000).unwrap();
        let a = v1_series(&ComplexParam::mellin(2.0, 3.0), 2000, &d).unwrap();
        let b = v1_series(&ComplexParam::mellin(2.0, -3.0), 2000, &d).unwrap();
        assert!((a.partial - b.partial.conj()).norm() < 1e-14);
        let s3 = v1_series(&ComplexParam::mellin(2.0, 0.0), 1000, &d).unwrap();
        let s4 = v1_series(&ComplexParam::mellin(2.0, 0.0), 10_000, &d).unwrap();
        assert!((s3.partial - s4.partial).norm() < s3.tail_proxy);
        assert!(v1_series(&ComplexParam::mellin(1.2, 0.0), 10, &d).is_err());
        assert!(matches!(v1_series(&ComplexParam::mellin(2.0, 0.0), 20_000, &d), Err(Error::Coverage(_))));
    }

    #[test]
    fn v1_term_magnitudes_decrease_dyadically() {
        let d = DivisorTable::new(3, 1 << 14).unwrap();
        let mut last = f64::INFINITY;
        for j in 4..14 {
            let (lo, hi) = (1usize << j, 1usize << (j + 1));
            let avg = (lo..hi).map(|n| d.get(n) as f64 * (n as f64).powf(-1.0 / 6.0 - 4.0 / 3.0)).sum::<f64>()
                / (hi - lo) as f64;
            assert!(avg < last);
            last = avg;
        }
    }

    #[test]
    fn lehmer_anchor() {
        let r = lehmer_scan(1.0, 5.0, &EvalConfig::default()).unwrap();
        let e = r.entries.iter().find(|e| e.extremum_value < 0.0 && e.extremum_t > 2.0).unwrap();
        assert!((e.extremum_t - 2.47575).abs() < 5e-5, "{e:?}");
        assert!((e.extremum_value + 0.52625).abs() < 5e-5, "{e:?}");
        assert!(r.zeros.is_empty());
    }

    #[test]
    fn first_zeros_and_ordering() {
        let cfg = EvalConfig::default();
        let r = lehmer_scan(14.0, 22.0, &cfg).unwrap();
        assert_eq!(r.zeros.len(), 2);
        assert!((r.zeros[0] - 14.1347).abs() < 1e-4 && (r.zeros[1] - 21.0220).abs() < 1e-4);
        for z in &r.zeros {
            let a = z_value(z - 1e-6, &cfg).unwrap();
            let b = z_value(z + 1e-6, &cfg).unwrap();
            assert!(a * b < 0.0);
        }
        let inner = r.entries.iter().filter(|e| e.zero_left.is_some() && e.zero_right.is_some());
        for e in inner {
            assert!(e.zero_left.unwrap() < e.extremum_t && e.extremum_t < e.zero_right.unwrap());
        }
    }

    #[test]
    fn zero_count_on_0_100() {
        let cfg = EvalConfig::default();
        let r = lehmer_scan(0.0, 100.0, &cfg).unwrap();
        assert!(r.zeros.windows(2).all(|w| w[0] < w[1]));
        let predicted = crate::special::theta(100.0f64) / PI + 1.0;
        assert!((r.zeros.len() as f64 - predicted).abs() <= 1.0, "{} vs {predicted}", r.zeros.len());
    }
}
