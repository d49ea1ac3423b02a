//! Cumulative moment integrals of Z over uniform sample grids.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{fit_power_law, least_squares, LeastSquares, PowerLaw};
use crate::quad::CumulativeSimpson;
use crate::real::{Real, EULER_GAMMA};
use crate::special::{z_value, EvalConfig};
use crate::sum::Kahan;

/// `2π / (log(t_max/2π) + 4)`: about six samples per local oscillation of Z.
pub fn max_admissible_step(t_max: f64) -> f64 {
    2.0 * PI / ((t_max / (2.0 * PI)).ln() + 4.0)
}

fn sample_count(t_min: f64, t_max: f64, step: f64) -> usize {
    ((t_max - t_min) / step + 1e-9).floor() as usize + 1
}

/// Z(t) sampled at `t_min + i·step`, `i = 0..len`.
#[derive(Clone, Debug, PartialEq)]
pub struct ZSampleGrid {
    pub(crate) t_min: f64,
    pub(crate) t_max: f64,
    pub(crate) step: f64,
    pub(crate) values: Vec<f64>,
    pub(crate) cfg_fingerprint: u64,
}

impl ZSampleGrid {
    /// Assembles a grid from stored parts, checking every invariant.
    pub fn from_parts(
        t_min: f64,
        t_max: f64,
        step: f64,
        values: Vec<f64>,
        cfg_fingerprint: u64,
    ) -> Result<Self> {
        validate_range(t_min, t_max, step)?;
        let n = sample_count(t_min, t_max, step);
        if values.len() != n {
            return Err(Error::Precondition(format!(
                "grid [{t_min}, {t_max}] step {step} needs {n} samples, got {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Precondition(format!(
                "non-finite sample at index {i}"
            )));
        }
        Ok(Self {
            t_min,
            t_max,
            step,
            values,
            cfg_fingerprint,
        })
    }

    pub fn t_min(&self) -> f64 {
        self.t_min
    }
    pub fn t_max(&self) -> f64 {
        self.t_max
    }
    /// Abscissa of the last sample.
    pub fn t_last(&self) -> f64 {
        self.t_at(self.values.len() - 1)
    }
    pub fn step(&self) -> f64 {
        self.step
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn len(&self) -> usize {
        self.values.len()
    }
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
    pub fn cfg_fingerprint(&self) -> u64 {
        self.cfg_fingerprint
    }

    #[inline]
    pub fn t_at(&self, i: usize) -> f64 {
        self.t_min + i as f64 * self.step
    }

    /// Index of `t` if it is (to rounding) a grid abscissa.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        on_grid(self.t_min, self.step, self.len(), t)
    }

    /// Sample at a grid abscissa.
    pub fn sample_at(&self, t: f64) -> Result<f64> {
        self.index_of(t)
            .map(|i| self.values[i])
            .ok_or_else(|| Error::Range(format!("t = {t} is not a sample of the grid")))
    }

    /// Every `factor`-th sample, truncated to `t ≤ t_max`.
    pub fn decimate(&self, factor: usize, t_max: f64) -> Result<Self> {
        if factor == 0 {
            return Err(Error::Precondition("decimation factor 0".into()));
        }
        let t_max = t_max.min(self.t_max);
        let step = self.step * factor as f64;
        let n = sample_count(self.t_min, t_max, step);
        let values: Vec<f64> = (0..n).map(|i| self.values[i * factor]).collect();
        let t_max = self.t_min + (n - 1) as f64 * step;
        Ok(Self {
            t_min: self.t_min,
            t_max,
            step,
            values,
            cfg_fingerprint: self.cfg_fingerprint,
        })
    }

    /// Appends samples up to `new_t_max`; existing samples are untouched.
    pub fn extend(&mut self, new_t_max: f64, cfg: &EvalConfig) -> Result<usize> {
        if cfg.fingerprint() != self.cfg_fingerprint {
            return Err(Error::Config(format!(
                "grid was built with config {:016x}, extension requested with {:016x}",
                self.cfg_fingerprint,
                cfg.fingerprint()
            )));
        }
        if new_t_max < self.t_max {
            return Err(Error::Precondition(format!(
                "extend to {new_t_max} below current t_max {}",
                self.t_max
            )));
        }
        validate_range(self.t_min, new_t_max, self.step)?;
        let old = self.len();
        let n = sample_count(self.t_min, new_t_max, self.step);
        let (t_min, step) = (self.t_min, self.step);
        let fresh = sample_range(t_min, step, old, n, cfg)?;
        self.values.extend(fresh);
        self.t_max = new_t_max;
        Ok(n - old)
    }
}

fn on_grid(t0: f64, step: f64, len: usize, t: f64) -> Option<usize> {
    let x = (t - t0) / step;
    let r = x.round();
    if (x - r).abs() <= 1e-7 && r >= 0.0 && (r as usize) < len {
        Some(r as usize)
    } else {
        None
    }
}

fn validate_range(t_min: f64, t_max: f64, step: f64) -> Result<()> {
    if !(t_min >= 1.0 && t_max > t_min && t_max.is_finite()) {
        return Err(Error::Config(format!(
            "grid range needs 1 <= t_min < t_max, got [{t_min}, {t_max}]"
        )));
    }
    let max_step = max_admissible_step(t_max);
    if !(step > 0.0 && step <= max_step) {
        return Err(Error::Config(format!(
            "step {step} too coarse for t_max = {t_max}; maximal admissible step is {max_step}"
        )));
    }
    Ok(())
}

fn sample_range(
    t_min: f64,
    step: f64,
    from: usize,
    to: usize,
    cfg: &EvalConfig,
) -> Result<Vec<f64>> {
    // each sample is a pure function of its abscissa, so the collected order
    // and values do not depend on how rayon splits the range
    (from..to)
        .into_par_iter()
        .map(|i| z_value(t_min + i as f64 * step, cfg))
        .collect()
}

/// Samples Z on `t_min + i·step` up to `t_max`.
pub fn build_grid(t_min: f64, t_max: f64, step: f64, cfg: &EvalConfig) -> Result<ZSampleGrid> {
    cfg.validate()?;
    validate_range(t_min, t_max, step)?;
    let n = sample_count(t_min, t_max, step);
    let values = sample_range(t_min, step, 0, n, cfg)?;
    Ok(ZSampleGrid {
        t_min,
        t_max,
        step,
        values,
        cfg_fingerprint: cfg.fingerprint(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SeriesKind {
    /// `I_k(T) = ∫_1^T Z^{2k}`
    Ik,
    /// `F_k(T) = ∫_1^T Z^k`
    Fk,
    E1,
    E2,
    G,
    /// `∫_1^T E(t)^2 dt`
    E1Square,
}

impl SeriesKind {
    pub fn code(self) -> u32 {
        match self {
            Self::Ik => 1,
            Self::Fk => 2,
            Self::E1 => 3,
            Self::E2 => 4,
            Self::G => 5,
            Self::E1Square => 6,
        }
    }

    pub fn from_code(c: u32) -> Option<Self> {
        [
            Self::Ik,
            Self::Fk,
            Self::E1,
            Self::E2,
            Self::G,
            Self::E1Square,
        ]
        .into_iter()
        .find(|k| k.code() == c)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureMeta {
    /// `composite_simpson`, or `pointwise` for series derived sample by sample.
    pub rule: &'static str,
    pub step: f64,
    pub compensated: bool,
}

/// Values of an accumulated quantity on a uniform ascending T grid.
#[derive(Clone, Debug, PartialEq)]
pub struct CumulativeSeries {
    pub kind: SeriesKind,
    pub k: u32,
    t0: f64,
    step: f64,
    values: Vec<f64>,
    pub meta: QuadratureMeta,
}

/// Running integral state at an even grid index: enough to resume bitwise.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Checkpoint {
    pub t: f64,
    pub sum: f64,
    pub compensation: f64,
}

impl CumulativeSeries {
    pub fn t0(&self) -> f64 {
        self.t0
    }
    pub fn step(&self) -> f64 {
        self.step
    }
    pub fn len(&self) -> usize {
        self.values.len()
    }
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    #[inline]
    pub fn t_at(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.step
    }
    pub fn t_last(&self) -> f64 {
        self.t_at(self.len() - 1)
    }
    pub fn grid_t(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|i| self.t_at(i))
    }

    pub fn index_of(&self, t: f64) -> Option<usize> {
        on_grid(self.t0, self.step, self.len(), t)
    }

    /// Value at `t`; off-grid points use cubic interpolation.
    pub fn value_at(&self, t: f64) -> Result<f64> {
        if let Some(i) = self.index_of(t) {
            return Ok(self.values[i]);
        }
        let n = self.len();
        if n < 4 || !(t >= self.t0 && t <= self.t_last()) {
            return Err(Error::Range(format!(
                "T = {t} outside series range [{}, {}]",
                self.t0,
                self.t_last()
            )));
        }
        let x = (t - self.t0) / self.step;
        let base = (x.floor() as usize).saturating_sub(1).min(n - 4);
        let mut acc = 0.0;
        for a in 0..4 {
            let mut w = 1.0;
            for b in 0..4 {
                if a != b {
                    w *= (x - (base + b) as f64) / (a as f64 - b as f64);
                }
            }
            acc += w * self.values[base + a];
        }
        Ok(acc)
    }

    /// Grid indices with `lo <= t <= hi`.
    pub fn index_window(&self, lo: f64, hi: f64) -> Result<std::ops::RangeInclusive<usize>> {
        let tol = 1e-7 * self.step;
        if lo < self.t0 - tol || hi > self.t_last() + tol || lo > hi {
            return Err(Error::Range(format!(
                "window [{lo}, {hi}] outside series range [{}, {}]",
                self.t0,
                self.t_last()
            )));
        }
        let a = ((lo - self.t0) / self.step - 1e-7).ceil().max(0.0) as usize;
        let b = (((hi - self.t0) / self.step + 1e-7).floor() as usize).min(self.len() - 1);
        Ok(a..=b)
    }

    /// `max |value(T)| / T^α` over the window, with its location.
    pub fn sup_ratio(&self, alpha: f64, lo: f64, hi: f64) -> Result<(f64, f64)> {
        let mut best = (0.0, lo);
        for i in self.index_window(lo, hi)? {
            let t = self.t_at(i);
            let r = self.values[i].abs() / t.powf(alpha);
            if r > best.0 {
                best = (r, t);
            }
        }
        Ok(best)
    }

    /// Number of strict sign changes over the window (zeros are skipped).
    pub fn sign_changes(&self, lo: f64, hi: f64) -> Result<usize> {
        let mut last = 0.0f64;
        let mut count = 0;
        for i in self.index_window(lo, hi)? {
            let v = self.values[i];
            if v != 0.0 {
                if last != 0.0 && (v > 0.0) != (last > 0.0) {
                    count += 1;
                }
                last = v;
            }
        }
        Ok(count)
    }
}

fn simpson_series(
    kind: SeriesKind,
    k: u32,
    t0: f64,
    step: f64,
    integrand: &[f64],
    start: Option<(usize, Kahan<f64>)>,
    ladder: &[usize],
) -> Result<(CumulativeSeries, Vec<(usize, Kahan<f64>)>)> {
    if integrand.len() < 3 {
        return Err(Error::Precondition(
            "cumulative integration needs at least 3 samples".into(),
        ));
    }
    let (mut acc, first) = match start {
        None => (CumulativeSimpson::new(step), 0),
        Some((idx, state)) => (CumulativeSimpson::resume(step, idx, state)?, idx),
    };
    let mut values = Vec::with_capacity(integrand.len() - first);
    values.push(acc.value());
    let mut states = Vec::new();
    let mut stops: Vec<usize> = ladder
        .iter()
        .copied()
        .filter(|&i| i > first && i < integrand.len())
        .collect();
    stops.sort_unstable();
    stops.dedup();
    for stop in stops {
        acc.advance(integrand, stop + 1, &mut values)?;
        debug_assert_eq!(acc.index(), stop);
        states.push((stop, acc.state()));
    }
    acc.advance(integrand, integrand.len(), &mut values)?;
    let series = CumulativeSeries {
        kind,
        k,
        t0: t0 + first as f64 * step,
        step,
        values,
        meta: QuadratureMeta {
            rule: "composite_simpson",
            step,
            compensated: true,
        },
    };
    Ok((series, states))
}

fn power_integrand(grid: &ZSampleGrid, p: u32) -> Vec<f64> {
    grid.values.iter().map(|z| z.powi(p as i32)).collect()
}

fn require_anchor(grid: &ZSampleGrid) -> Result<()> {
    if grid.t_min != 1.0 {
        return Err(Error::Precondition(format!(
            "cumulative integrals start at T = 1, grid starts at {} (resume from a checkpoint instead)",
            grid.t_min
        )));
    }
    Ok(())
}

fn power_series(
    kind: SeriesKind,
    k: u32,
    power: u32,
    grid: &ZSampleGrid,
) -> Result<CumulativeSeries> {
    require_anchor(grid)?;
    Ok(simpson_series(
        kind,
        k,
        grid.t_min,
        grid.step,
        &power_integrand(grid, power),
        None,
        &[],
    )?
    .0)
}

/// `I_k(T) = ∫_1^T Z^{2k}(t) dt` at every grid abscissa.
pub fn cumulative_moment(k: u32, grid: &ZSampleGrid) -> Result<CumulativeSeries> {
    if !(1..=5).contains(&k) {
        return Err(Error::Precondition(format!(
            "moment order {k} outside 1..=5"
        )));
    }
    power_series(SeriesKind::Ik, k, 2 * k, grid)
}

/// `F_k(T) = ∫_1^T Z^k(t) dt`.
pub fn f_k_series(k: u32, grid: &ZSampleGrid) -> Result<CumulativeSeries> {
    if !(1..=5).contains(&k) {
        return Err(Error::Precondition(format!(
            "F_k needs k in 1..=5, got {k}"
        )));
    }
    power_series(SeriesKind::Fk, k, k, grid)
}

/// `F_k(T)` for a single `T`.
pub fn f_k(k: u32, t: f64, grid: &ZSampleGrid) -> Result<f64> {
    f_k_series(k, grid)?.value_at(t)
}

/// Integrates `Z^{power}` and records the running state at the grid points
/// nearest (from below, even index) to each `ladder` abscissa.
pub fn power_series_with_checkpoints(
    kind: SeriesKind,
    k: u32,
    grid: &ZSampleGrid,
    ladder: &[f64],
) -> Result<(CumulativeSeries, Vec<Checkpoint>)> {
    require_anchor(grid)?;
    let power = series_power(kind, k)?;
    let idx: Vec<usize> = ladder
        .iter()
        .filter(|&&t| t > grid.t_min && t <= grid.t_last())
        .map(|&t| {
            let i = ((t - grid.t_min) / grid.step + 1e-7).floor() as usize;
            i - i % 2
        })
        .collect();
    let (series, states) = simpson_series(
        kind,
        k,
        grid.t_min,
        grid.step,
        &power_integrand(grid, power),
        None,
        &idx,
    )?;
    let cps = states
        .into_iter()
        .map(|(i, s)| Checkpoint {
            t: grid.t_at(i),
            sum: s.raw_sum(),
            compensation: s.compensation(),
        })
        .collect();
    Ok((series, cps))
}

/// Continues an `I_k`/`F_k` integral from a checkpoint; the returned series
/// starts at the checkpoint abscissa.
pub fn resume_power_series(
    kind: SeriesKind,
    k: u32,
    grid: &ZSampleGrid,
    cp: &Checkpoint,
) -> Result<CumulativeSeries> {
    let power = series_power(kind, k)?;
    let i = grid.index_of(cp.t).ok_or_else(|| {
        Error::Precondition(format!("checkpoint T = {} is not a grid abscissa", cp.t))
    })?;
    if i % 2 != 0 {
        return Err(Error::Precondition(format!(
            "checkpoint T = {} sits at odd index {i}",
            cp.t
        )));
    }
    let state = Some((i, Kahan::from_parts(cp.sum, cp.compensation)));
    Ok(simpson_series(
        kind,
        k,
        grid.t_min,
        grid.step,
        &power_integrand(grid, power),
        state,
        &[],
    )?
    .0)
}

fn series_power(kind: SeriesKind, k: u32) -> Result<u32> {
    match kind {
        SeriesKind::Ik if (1..=5).contains(&k) => Ok(2 * k),
        SeriesKind::Fk if (1..=5).contains(&k) => Ok(k),
        _ => Err(Error::Precondition(format!(
            "{kind:?} with k = {k} is not a checkpointable power series"
        ))),
    }
}

/// `P_{k²}(y) = Σ a_j y^j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentPolynomial<T> {
    k: u32,
    coeffs: Vec<T>,
}

impl<T: Real> MomentPolynomial<T> {
    /// Requires exactly `k² + 1` coefficients with a nonzero leading one.
    pub fn new(k: u32, coeffs: Vec<T>) -> Result<Self> {
        let deg = (k * k) as usize;
        if coeffs.len() != deg + 1 {
            return Err(Error::Precondition(format!(
                "P for k = {k} needs {} coefficients, got {}",
                deg + 1,
                coeffs.len()
            )));
        }
        if coeffs[deg] == T::zero() {
            return Err(Error::Precondition("leading coefficient is zero".into()));
        }
        Ok(Self { k, coeffs })
    }

    /// `P_1(y) = y + 2γ − 1 − log 2π`.
    pub fn p1() -> Self {
        let a0 = T::lit(2.0 * EULER_GAMMA - 1.0) - (T::lit(2.0) * T::PI()).ln();
        Self {
            k: 1,
            coeffs: vec![a0, T::one()],
        }
    }

    /// Quartic for `k = 2` with `A_4 = 1/(2π²)` and the given `A_0..A_3`.
    pub fn p4(lower: [T; 4]) -> Self {
        let mut coeffs = lower.to_vec();
        coeffs.push(a4());
        Self { k: 2, coeffs }
    }

    pub fn k(&self) -> u32 {
        self.k
    }
    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }
    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, y: T) -> T {
        self.coeffs
            .iter()
            .rev()
            .fold(T::zero(), |acc, &c| acc * y + c)
    }
}

/// `A_4 = 1/(2π²)`.
pub fn a4<T: Real>() -> T {
    T::one() / (T::lit(2.0) * T::PI() * T::PI())
}

#[allow(non_snake_case)]
pub fn P1_eval<T: Real>(y: T) -> T {
    MomentPolynomial::<T>::p1().eval(y)
}

/// `E(1) = −P_1(0) = 1 + log 2π − 2γ`.
pub fn e1_at_one() -> f64 {
    -P1_eval(0.0)
}

fn pointwise(
    kind: SeriesKind,
    k: u32,
    base: &CumulativeSeries,
    f: impl Fn(f64, f64) -> f64,
) -> CumulativeSeries {
    let values = base
        .values
        .iter()
        .enumerate()
        .map(|(i, &v)| f(base.t_at(i), v))
        .collect();
    CumulativeSeries {
        kind,
        k,
        t0: base.t0,
        step: base.step,
        values,
        meta: QuadratureMeta {
            rule: "pointwise",
            step: base.step,
            compensated: base.meta.compensated,
        },
    }
}

fn require(series: &CumulativeSeries, kind: SeriesKind, k: u32) -> Result<()> {
    if series.kind != kind || series.k != k {
        return Err(Error::Precondition(format!(
            "expected a {kind:?} series with k = {k}, got {:?} with k = {}",
            series.kind, series.k
        )));
    }
    Ok(())
}

/// `E(T) = I_1(T) − T P_1(log T)` on the grid of `i1`.
pub fn e1_series(i1: &CumulativeSeries) -> Result<CumulativeSeries> {
    require(i1, SeriesKind::Ik, 1)?;
    let p1 = MomentPolynomial::<f64>::p1();
    Ok(pointwise(SeriesKind::E1, 1, i1, |t, v| {
        v - t * p1.eval(t.ln())
    }))
}

#[allow(non_snake_case)]
pub fn E1(t: f64, i1: &CumulativeSeries) -> Result<f64> {
    require(i1, SeriesKind::Ik, 1)?;
    if t == 1.0 && i1.t0 == 1.0 {
        return Ok(e1_at_one());
    }
    Ok(i1.value_at(t)? - t * P1_eval(t.ln()))
}

/// `G(T) = ∫_1^T E(t) dt − πT`.
pub fn g_series(e: &CumulativeSeries) -> Result<CumulativeSeries> {
    require(e, SeriesKind::E1, 1)?;
    if e.t0 != 1.0 {
        return Err(Error::Precondition("G needs E from T = 1".into()));
    }
    let (int_e, _) = simpson_series(SeriesKind::G, 1, e.t0, e.step, &e.values, None, &[])?;
    Ok(pointwise(SeriesKind::G, 1, &int_e, |t, v| v - PI * t))
}

#[allow(non_snake_case)]
pub fn G1(t: f64, g: &CumulativeSeries) -> Result<f64> {
    require(g, SeriesKind::G, 1)?;
    g.value_at(t)
}

/// `E_2(T) = I_2(T) − T P_4(log T)`.
pub fn e2_series(i2: &CumulativeSeries, p4: &MomentPolynomial<f64>) -> Result<CumulativeSeries> {
    require(i2, SeriesKind::Ik, 2)?;
    if p4.k() != 2 {
        return Err(Error::Precondition(format!(
            "E2 needs P4 (k = 2), got k = {}",
            p4.k()
        )));
    }
    Ok(pointwise(SeriesKind::E2, 2, i2, |t, v| {
        v - t * p4.eval(t.ln())
    }))
}

#[allow(non_snake_case)]
pub fn E2(t: f64, i2: &CumulativeSeries, p4: &MomentPolynomial<f64>) -> Result<f64> {
    require(i2, SeriesKind::Ik, 2)?;
    if p4.k() != 2 {
        return Err(Error::Precondition(format!(
            "E2 needs P4 (k = 2), got k = {}",
            p4.k()
        )));
    }
    if t == 1.0 && i2.t0 == 1.0 {
        return Ok(-p4.eval(0.0));
    }
    Ok(i2.value_at(t)? - t * p4.eval(t.ln()))
}

/// `∫_1^T E_j(t)^2 dt` as a series, for `E1` or `E2` input.
pub fn square_integral_series(e: &CumulativeSeries) -> Result<CumulativeSeries> {
    if !matches!(e.kind, SeriesKind::E1 | SeriesKind::E2) {
        return Err(Error::Precondition(format!(
            "square integral needs an E series, got {:?}",
            e.kind
        )));
    }
    let sq: Vec<f64> = e.values.iter().map(|v| v * v).collect();
    Ok(simpson_series(SeriesKind::E1Square, e.k, e.t0, e.step, &sq, None, &[])?.0)
}

/// `(∫_1^T E² dt) / T^{3/2}`.
#[allow(non_snake_case)]
pub fn mean_square_E(t: f64, e: &CumulativeSeries) -> Result<f64> {
    require(e, SeriesKind::E1, 1)?;
    if t < 100.0 {
        return Err(Error::Range(format!(
            "mean-square ratio needs T >= 100, got {t}"
        )));
    }
    Ok(square_integral_series(e)?.value_at(t)? / t.powf(1.5))
}

/// `D = 2 (2π)^{−1/2} ζ(3/2)^4 / (3 ζ(3))`.
pub fn mean_square_constant() -> Result<f64> {
    let cfg = EvalConfig::oracle(1e-14);
    let z32 = crate::special::zeta_oracle(num_complex::Complex64::new(1.5, 0.0), &cfg)?
        .value
        .re;
    let z3 = crate::special::zeta_oracle(num_complex::Complex64::new(3.0, 0.0), &cfg)?
        .value
        .re;
    Ok(2.0 / (2.0 * PI).sqrt() * z32.powi(4) / (3.0 * z3))
}

#[derive(Clone, Copy, Debug)]
pub struct P4FitOptions {
    /// Lower end of the fitting window.
    pub t_lo: f64,
    /// Number of log-spaced sample abscissae.
    pub points: usize,
    /// Minimal admissible upper end of the series.
    pub min_t_max: f64,
}

impl Default for P4FitOptions {
    fn default() -> Self {
        Self {
            t_lo: 100.0,
            points: 400,
            min_t_max: 1e4,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct P4Fit {
    pub poly: MomentPolynomial<f64>,
    pub lsq: LeastSquares,
    pub window: [f64; 2],
}

/// Least-squares fit of `I_2(T) ≈ T Σ A_j log^j T` with `A_4 = 1/(2π²)`.
#[allow(non_snake_case)]
pub fn fit_P4(i2: &CumulativeSeries, opts: &P4FitOptions) -> Result<P4Fit> {
    require(i2, SeriesKind::Ik, 2)?;
    let t_hi = i2.t_last();
    if i2.t0 != 1.0 || t_hi < opts.min_t_max {
        return Err(Error::Fit(format!(
            "P4 fit needs I_2 on [1, T] with T >= {}, series covers [{}, {t_hi}]",
            opts.min_t_max, i2.t0
        )));
    }
    if opts.points < 8 || !(opts.t_lo >= 1.0 && opts.t_lo < t_hi) {
        return Err(Error::Fit("P4 fit window or point count invalid".into()));
    }
    let a4 = a4::<f64>();
    let (l_lo, l_hi) = (opts.t_lo.ln(), t_hi.ln());
    let mut rows = Vec::with_capacity(opts.points);
    let mut ys = Vec::with_capacity(opts.points);
    for j in 0..opts.points {
        let l = l_lo + (l_hi - l_lo) * j as f64 / (opts.points - 1) as f64;
        let i = ((l.exp() - i2.t0) / i2.step).round() as usize;
        let t = i2.t_at(i.min(i2.len() - 1));
        let l = t.ln();
        rows.push(l);
        ys.push(i2.value_at(t)? / t - a4 * l.powi(4));
    }
    let design = nalgebra::DMatrix::from_fn(rows.len(), 4, |i, j| rows[i].powi(j as i32));
    let lsq = least_squares(&design, &ys)?;
    let poly = MomentPolynomial::p4([lsq.coeffs[0], lsq.coeffs[1], lsq.coeffs[2], lsq.coeffs[3]]);
    Ok(P4Fit {
        poly,
        lsq,
        window: [opts.t_lo, t_hi],
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct GrowthFit {
    pub exponent: f64,
    pub constant: f64,
    pub r_squared: f64,
    /// `exponent ± 2·stderr`.
    pub band: [f64; 2],
    pub window: [f64; 2],
}

/// Log–log regression of the running sup of `|series|` against T.
pub fn fit_growth_exponent(series: &CumulativeSeries, window: [f64; 2]) -> Result<GrowthFit> {
    let [lo, hi] = window;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::Fit(format!("degenerate window [{lo}, {hi}]")));
    }
    let idx = series.index_window(lo, hi)?;
    let end = *idx.end();
    let mut sup = 0.0f64;
    let mut running = Vec::with_capacity(end + 1);
    for v in &series.values[..=end] {
        sup = sup.max(v.abs());
        running.push(sup);
    }
    let samples = 200usize;
    let (l_lo, l_hi) = (lo.ln(), hi.ln());
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut last = usize::MAX;
    for j in 0..samples {
        let t = (l_lo + (l_hi - l_lo) * j as f64 / (samples - 1) as f64).exp();
        let i = (((t - series.t0) / series.step).round() as usize).clamp(*idx.start(), end);
        if i != last && running[i] > 0.0 {
            xs.push(series.t_at(i));
            ys.push(running[i]);
            last = i;
        }
    }
    if xs.len() < 3 {
        return Err(Error::Fit("series identically zero on the window".into()));
    }
    let PowerLaw {
        exponent,
        constant,
        r_squared,
        exponent_stderr,
    } = fit_power_law(&xs, &ys)?;
    Ok(GrowthFit {
        exponent,
        constant,
        r_squared,
        band: [
            exponent - 2.0 * exponent_stderr,
            exponent + 2.0 * exponent_stderr,
        ],
        window,
    })
}

/// One row of a moment table.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct MomentRow {
    #[serde(rename = "T")]
    pub t: f64,
    pub i_k: f64,
    #[serde(rename = "E")]
    pub e: Option<f64>,
    #[serde(rename = "G")]
    pub g: Option<f64>,
    #[serde(rename = "E2")]
    pub e2: Option<f64>,
}

/// `I_k` at the requested abscissae plus `E, G` (k = 1) or `E_2` (k = 2,
/// when a quartic is supplied).
pub fn moment_table(
    k: u32,
    grid: &ZSampleGrid,
    ts: &[f64],
    p4: Option<&MomentPolynomial<f64>>,
) -> Result<Vec<MomentRow>> {
    if grid.len() < 3 {
        // a single abscissa: only the analytic left-end values exist
        if ts.iter().all(|&t| t == 1.0) && grid.t_min == 1.0 {
            return Ok(ts
                .iter()
                .map(|_| MomentRow {
                    t: 1.0,
                    i_k: 0.0,
                    e: (k == 1).then(e1_at_one),
                    g: (k == 1).then_some(-PI),
                    e2: if k == 2 {
                        p4.map(|p| -p.eval(0.0))
                    } else {
                        None
                    },
                })
                .collect());
        }
        return Err(Error::Precondition(
            "moment table needs at least 3 samples".into(),
        ));
    }
    let ik = cumulative_moment(k, grid)?;
    let (e, g) = if k == 1 {
        let e = e1_series(&ik)?;
        let g = g_series(&e)?;
        (Some(e), Some(g))
    } else {
        (None, None)
    };
    let e2 = match (k, p4) {
        (2, Some(p)) => Some(e2_series(&ik, p)?),
        _ => None,
    };
    ts.iter()
        .map(|&t| {
            Ok(MomentRow {
                t,
                i_k: ik.value_at(t)?,
                e: e.as_ref().map(|s| s.value_at(t)).transpose()?,
                g: g.as_ref().map(|s| s.value_at(t)).transpose()?,
                e2: e2.as_ref().map(|s| s.value_at(t)).transpose()?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_grid(t_max: f64, step: f64) -> ZSampleGrid {
        build_grid(1.0, t_max, step, &EvalConfig::default()).unwrap()
    }

    #[test]
    fn sample_count_arithmetic() {
        let g = small_grid(2.0, 0.5);
        assert_eq!(g.len(), 3);
        assert!(build_grid(1.0, 1e4, 1.0, &EvalConfig::default()).is_err());
        let err = build_grid(1.0, 1e4, 1.0, &EvalConfig::default())
            .unwrap_err()
            .to_string();
        assert!(err.contains("maximal admissible step"), "{err}");
    }

    #[test]
    fn overlapping_grids_agree_bitwise() {
        let a = small_grid(30.0, 0.025);
        let b = small_grid(40.0, 0.025);
        for i in 0..a.len() {
            assert_eq!(a.values[i].to_bits(), b.values[i].to_bits());
        }
    }

    #[test]
    fn lehmer_sample() {
        // 2.47575 = 1 + 59.03 * 0.025 is not on a 0.025 grid; 1 + 0.00025 * 5903 is
        let g = small_grid(3.0, 0.00025);
        let z = g.sample_at(2.47575).unwrap();
        assert!((z + 0.52625).abs() < 5e-5);
    }

    #[test]
    fn left_end_values() {
        let g = small_grid(20.0, 0.025);
        let i1 = cumulative_moment(1, &g).unwrap();
        assert_eq!(i1.value_at(1.0).unwrap(), 0.0);
        let e = e1_series(&i1).unwrap();
        assert!((e.values()[0] - 1.683_445_736_606_279_8).abs() < 1e-12);
        assert_eq!(E1(1.0, &i1).unwrap(), e1_at_one());
        let gs = g_series(&e).unwrap();
        assert_eq!(G1(1.0, &gs).unwrap(), -PI);
        assert!((P1_eval((2.0 * PI).ln()) - (2.0 * EULER_GAMMA - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn moments_monotone_and_f2_is_i1() {
        let g = small_grid(60.0, 0.025);
        let i1 = cumulative_moment(1, &g).unwrap();
        let f2 = f_k_series(2, &g).unwrap();
        assert_eq!(i1.values(), f2.values());
        for k in 1..=3 {
            let ik = cumulative_moment(k, &g).unwrap();
            assert!(ik.values().windows(2).all(|w| w[1] >= w[0]), "k={k}");
        }
    }

    #[test]
    fn unanchored_grid_rejected() {
        let g = build_grid(2.0, 10.0, 0.1, &EvalConfig::default()).unwrap();
        assert!(matches!(
            cumulative_moment(1, &g),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn e2_left_end_and_substitution() {
        let g = small_grid(5.0, 0.01);
        let i2 = cumulative_moment(2, &g).unwrap();
        let p = MomentPolynomial::p4([7.0, 0.0, 0.0, 0.0]);
        assert_eq!(E2(1.0, &i2, &p).unwrap(), -7.0);
        let lead = MomentPolynomial::p4([0.0; 4]);
        let e = std::f64::consts::E;
        let want = i2.value_at(e).unwrap() - e / (2.0 * PI * PI);
        assert!((E2(e, &i2, &lead).unwrap() - want).abs() < 1e-13);
        assert_eq!(e2_series(&i2, &p).unwrap().values()[0], -7.0);
    }

    #[test]
    fn p4_fit_recovers_synthetic_quartic() {
        let q = [0.7, -0.3, 0.25, 0.09];
        let poly = MomentPolynomial::p4(q);
        let step = 1.0;
        let n = 10_000;
        let values: Vec<f64> = (0..n)
            .map(|i| {
                let t = 1.0 + i as f64 * step;
                t * poly.eval(t.ln())
            })
            .collect();
        let s = CumulativeSeries {
            kind: SeriesKind::Ik,
            k: 2,
            t0: 1.0,
            step,
            values,
            meta: QuadratureMeta {
                rule: "pointwise",
                step,
                compensated: false,
            },
        };
        let fit = fit_P4(&s, &P4FitOptions::default()).unwrap();
        for (got, want) in fit.poly.coeffs().iter().zip(q) {
            assert!((got - want).abs() < 1e-8, "{got} vs {want}");
        }
        assert_eq!(fit.poly.coeffs()[4], 1.0 / (2.0 * PI * PI));
        let short = CumulativeSeries {
            values: s.values[..5000].to_vec(),
            ..s.clone()
        };
        assert!(matches!(
            fit_P4(&short, &P4FitOptions::default()),
            Err(Error::Fit(_))
        ));
    }

    #[test]
    fn growth_exponent_of_power_law() {
        let step = 0.5;
        let values: Vec<f64> = (0..20_000)
            .map(|i| 3.0 * (1.0 + i as f64 * step).powf(0.3))
            .collect();
        let s = CumulativeSeries {
            kind: SeriesKind::Fk,
            k: 1,
            t0: 1.0,
            step,
            values,
            meta: QuadratureMeta {
                rule: "pointwise",
                step,
                compensated: false,
            },
        };
        let fit = fit_growth_exponent(&s, [100.0, 9000.0]).unwrap();
        assert!((fit.exponent - 0.3).abs() < 1e-6);
        assert!((fit.constant - 3.0).abs() < 1e-5);
        let zero = CumulativeSeries {
            values: vec![0.0; 20_000],
            ..s
        };
        assert!(fit_growth_exponent(&zero, [100.0, 9000.0]).is_err());
    }

    #[test]
    fn value_at_interpolates_and_checks_range() {
        let g = small_grid(30.0, 0.025);
        let i1 = cumulative_moment(1, &g).unwrap();
        assert!(i1.value_at(0.5).is_err());
        assert!(i1.value_at(31.0).is_err());
        let a = i1.value_at(20.0).unwrap();
        let b = i1.value_at(20.025).unwrap();
        let m = i1.value_at(20.0125).unwrap();
        assert!(m > a.min(b) && m < a.max(b));
    }

    #[test]
    fn checkpoint_resume_bitwise() {
        let g = small_grid(200.0, 0.025);
        let (full, cps) =
            power_series_with_checkpoints(SeriesKind::Ik, 1, &g, &[2.0, 4.0, 64.0, 128.0]).unwrap();
        assert_eq!(cps.len(), 4);
        let cp = cps[2];
        assert_eq!(cp.t, 64.0);
        let resumed = resume_power_series(SeriesKind::Ik, 1, &g, &cp).unwrap();
        let off = full.index_of(64.0).unwrap();
        assert_eq!(resumed.len(), full.len() - off);
        for (i, v) in resumed.values().iter().enumerate() {
            assert_eq!(v.to_bits(), full.values()[off + i].to_bits());
        }
    }

    #[test]
    fn mean_square_constant_value() {
        assert!((mean_square_constant().unwrap() - 10.304_717_439_500_139).abs() < 1e-11);
    }
}
