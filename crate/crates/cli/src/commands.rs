use std::path::PathBuf;

use hardy_core::identities::{
    expsum_main, expsum_range, lehmer_scan, parseval_check, theorem1_check, theorem2_check, IdentityReport,
    Verdict,
};
use hardy_core::moments::{
    cumulative_moment, f_k_series, fit_P4, fit_growth_exponent, moment_table, P4FitOptions, ZSampleGrid,
};
use hardy_core::special::DivisorTable;
use hardy_core::suite::{outcomes_csv, run_all, Workbench};
use hardy_core::transforms::{
    atkinson_l4_fit, geomspace, kober_residual, mellin_Mk, mellin_invert_Zk, ComplexParam, TruncationSpec,
};
use hardy_core::{hardy_z, store, Error, Result};
use serde::Serialize;
use serde_json::Value;

use crate::config::RunConfig;
use crate::output::{num, opt, Table};
use crate::{Cmd, FitCmd, GridCmd, LaplaceCmd, MellinCmd, MomentsCmd, SeriesArg, SuiteCmd, VerifyCmd, ZCmd};

pub struct CmdOutput {
    pub table: Table,
    pub extra: Option<Value>,
    pub verdict: Option<Verdict>,
}

impl CmdOutput {
    fn table(table: Table) -> Self {
        Self { table, extra: None, verdict: None }
    }
}

fn tag<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(Value::String(s)) => s,
        Ok(Value::Null) => String::new(),
        Ok(other) => other.to_string(),
        Err(_) => String::new(),
    }
}

fn pass_fail(ok: bool) -> Verdict {
    if ok {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

pub fn dispatch(cmd: &Cmd, cfg: &RunConfig) -> Result<(String, CmdOutput)> {
    let wb = Workbench::new(cfg.suite())?;
    Ok(match cmd {
        Cmd::Z(ZCmd::Eval { t }) => ("z eval".into(), z_eval(*t, cfg)?),
        Cmd::Z(ZCmd::Scan { from, to }) => ("z scan".into(), z_scan(*from, *to, cfg)?),
        Cmd::Grid(GridCmd::Build { to, step }) => ("grid build".into(), grid_cmd(false, *to, *step, cfg)?),
        Cmd::Grid(GridCmd::Extend { to, step }) => ("grid extend".into(), grid_cmd(true, *to, *step, cfg)?),
        Cmd::Moments(MomentsCmd::Table { k, to }) => ("moments table".into(), moments(*k, *to, &wb)?),
        Cmd::Fit(FitCmd::P4 { to }) => ("fit p4".into(), fit_p4(*to, &wb)?),
        Cmd::Fit(FitCmd::Growth { series, window }) => ("fit growth".into(), fit_growth(*series, window, &wb)?),
        Cmd::Mellin(MellinCmd::Eval { k, sigma, t }) => ("mellin eval".into(), mellin(*k, *sigma, *t, &wb)?),
        Cmd::Laplace(LaplaceCmd::Kober) => ("laplace kober".into(), kober(&wb)?),
        Cmd::Laplace(LaplaceCmd::AtkinsonL4) => ("laplace atkinson-l4".into(), atkinson(&wb)?),
        Cmd::Verify(v) => verify(v, &wb)?,
        Cmd::Suite(SuiteCmd::Acceptance) => ("suite acceptance".into(), acceptance(&wb)?),
    })
}

fn z_eval(t: f64, cfg: &RunConfig) -> Result<CmdOutput> {
    let z = hardy_z(t, &cfg.eval)?;
    let mut tb = Table::new(&["t", "Z", "path", "fallback", "error_bound"]);
    tb.push(vec![num(z.t), num(z.value), tag(&z.path), tag(&z.fallback), num(z.error_bound)]);
    Ok(CmdOutput::table(tb))
}

fn z_scan(from: f64, to: f64, cfg: &RunConfig) -> Result<CmdOutput> {
    let scan = lehmer_scan(from, to, &cfg.eval)?;
    let mut tb = Table::new(&["zero_left", "zero_right", "extremum_t", "extremum_value"]);
    for e in &scan.entries {
        tb.push(vec![opt(e.zero_left), opt(e.zero_right), num(e.extremum_t), num(e.extremum_value)]);
    }
    Ok(CmdOutput { table: tb, extra: Some(serde_json::json!({ "zeros": scan.zeros })), verdict: None })
}

fn grid_path(cfg: &RunConfig, step: f64) -> Result<PathBuf> {
    let dir = cfg
        .cache_dir
        .as_ref()
        .ok_or_else(|| Error::Config("grid commands need --cache-dir or HARDY_CACHE_DIR".into()))?;
    Ok(dir.join(store::grid_cache_name(cfg.eval.fingerprint(), step)))
}

fn grid_cmd(extend: bool, to: f64, step: Option<f64>, cfg: &RunConfig) -> Result<CmdOutput> {
    let step = step.unwrap_or(cfg.grid_step);
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::Config(format!("step must be positive, got {step}")));
    }
    let path = grid_path(cfg, step)?;
    let g = if extend {
        store::extend_grid(&path, to, &cfg.eval)?
    } else {
        store::load_or_build(&path, 1.0, to, step, &cfg.eval)?
    };
    let file = path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
    let mut tb = Table::new(&["file", "t_min", "t_max", "step", "samples", "cfg_fingerprint"]);
    tb.push(vec![
        file,
        num(g.t_min()),
        num(g.t_max()),
        num(g.step()),
        g.len().to_string(),
        format!("{:016x}", g.cfg_fingerprint()),
    ]);
    Ok(CmdOutput::table(tb))
}

/// Grid on `[1, t]`, trimmed so results do not depend on what the cache holds.
fn grid_upto(wb: &Workbench, t: f64) -> Result<ZSampleGrid> {
    if !(t >= 1.0 && t.is_finite()) {
        return Err(Error::Domain(format!("T must be >= 1, got {t}")));
    }
    let t = t.max(1.0 + 2.0 * wb.cfg.grid_step);
    wb.grid_to(t)?.decimate(1, t)
}

fn ladder(to: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut decade = 1.0;
    'outer: loop {
        for m in [1.0, 2.0, 5.0] {
            let v = m * decade;
            if v > to {
                break 'outer;
            }
            out.push(v);
        }
        decade *= 10.0;
    }
    if out.last() != Some(&to) {
        out.push(to);
    }
    out
}

fn moments(k: u32, to: f64, wb: &Workbench) -> Result<CmdOutput> {
    if k == 0 {
        return Err(Error::Domain("k must be positive".into()));
    }
    let grid = grid_upto(wb, to)?;
    let p4 = if k == 2 && to >= wb.cfg.p4_fit.t_hi { Some(wb.p4()?) } else { None };
    let rows = moment_table(k, &grid, &ladder(to), p4.as_ref())?;
    let ik = format!("I_{k}");
    let mut headers = vec!["T", ik.as_str()];
    match k {
        1 => headers.extend(["E", "G"]),
        2 => headers.push("E2"),
        _ => {}
    }
    let mut tb = Table::new(&headers);
    for r in rows {
        let mut row = vec![num(r.t), num(r.i_k)];
        match k {
            1 => row.extend([opt(r.e), opt(r.g)]),
            2 => row.push(opt(r.e2)),
            _ => {}
        }
        tb.push(row);
    }
    Ok(CmdOutput::table(tb))
}

fn fit_p4(to: f64, wb: &Workbench) -> Result<CmdOutput> {
    let w = wb.cfg.p4_fit;
    let grid = grid_upto(wb, to)?;
    let i2 = cumulative_moment(2, &grid)?;
    let opts = P4FitOptions { t_lo: w.t_lo, points: w.points, min_t_max: w.t_lo };
    let fit = fit_P4(&i2, &opts)?;
    let mut tb = Table::new(&["j", "A_j"]);
    for (j, a) in fit.poly.coeffs().iter().enumerate() {
        tb.push(vec![j.to_string(), num(*a)]);
    }
    let extra = serde_json::json!({ "window": fit.window, "lsq": fit.lsq });
    Ok(CmdOutput { table: tb, extra: Some(extra), verdict: None })
}

fn fit_growth(series: SeriesArg, window: &[f64], wb: &Workbench) -> Result<CmdOutput> {
    let &[lo, hi] = window else {
        return Err(Error::Config("--window takes two values a,b".into()));
    };
    let k = match series {
        SeriesArg::F1 => 1,
        SeriesArg::F3 => 3,
        SeriesArg::F5 => 5,
    };
    let grid = grid_upto(wb, hi)?;
    let f = f_k_series(k, &grid)?;
    let g = fit_growth_exponent(&f, [lo, hi])?;
    let mut tb = Table::new(&["series", "exponent", "band_lo", "band_hi", "constant", "r_squared", "window_lo", "window_hi"]);
    tb.push(vec![
        format!("F{k}"),
        num(g.exponent),
        num(g.band[0]),
        num(g.band[1]),
        num(g.constant),
        num(g.r_squared),
        num(g.window[0]),
        num(g.window[1]),
    ]);
    Ok(CmdOutput::table(tb))
}

fn transform_grid(wb: &Workbench, trunc: &TruncationSpec) -> Result<ZSampleGrid> {
    grid_upto(wb, trunc.x_max)
}

fn mellin(k: u32, sigma: f64, t: f64, wb: &Workbench) -> Result<CmdOutput> {
    let trunc = wb.cfg.truncation(k)?;
    let grid = transform_grid(wb, &trunc)?;
    let s = ComplexParam::new(sigma, t, hardy_core::transforms::DomainTag::Mellin)?;
    let v = mellin_Mk(k, &s, &grid, &trunc)?;
    let mut tb = Table::new(&["k", "sigma", "t", "re", "im", "tail_bound", "x_max"]);
    tb.push(vec![
        k.to_string(),
        num(sigma),
        num(t),
        num(v.value.re),
        num(v.value.im),
        num(v.tail_bound),
        num(trunc.x_max),
    ]);
    Ok(CmdOutput::table(tb))
}

fn laplace_trunc(wb: &Workbench, grid: &ZSampleGrid) -> Result<TruncationSpec> {
    TruncationSpec::new(grid.t_last(), 100.0, wb.cfg.tail_mode)
}

fn kober(wb: &Workbench) -> Result<CmdOutput> {
    let grid = wb.grid()?;
    let head = wb.head()?;
    let tr = laplace_trunc(wb, grid)?;
    let mut tb = Table::new(&["sigma", "R"]);
    let mut rs = Vec::new();
    for s in [0.02, 0.01, 0.005] {
        let r = kober_residual(s, grid, head, &tr)?;
        tb.push(vec![num(s), num(r)]);
        rs.push(r);
    }
    let spread = (rs[1] - rs[2]).abs();
    Ok(CmdOutput {
        table: tb,
        extra: Some(serde_json::json!({ "stabilization": spread, "tolerance": 0.05 })),
        verdict: Some(pass_fail(spread <= 0.05)),
    })
}

fn atkinson(wb: &Workbench) -> Result<CmdOutput> {
    let grid = wb.grid()?;
    let head = wb.head()?;
    let tr = laplace_trunc(wb, grid)?;
    let fit = atkinson_l4_fit(&geomspace(0.005, 0.05, 20), grid, head, &tr)?;
    let mut tb = Table::new(&["j", "b_j"]);
    for (j, b) in fit.coeffs.iter().enumerate() {
        tb.push(vec![j.to_string(), num(*b)]);
    }
    let extra = serde_json::json!({
        "leading": fit.leading,
        "target": fit.target,
        "rel_error": fit.rel_error,
        "sigmas": fit.sigmas,
    });
    Ok(CmdOutput { table: tb, extra: Some(extra), verdict: Some(pass_fail(fit.rel_error <= 0.25)) })
}

fn report_output(r: IdentityReport) -> CmdOutput {
    let mut headers: Vec<String> = ["name", "lhs", "rhs", "abs_diff", "rel_diff", "tolerance", "budget_total", "verdict"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let mut row = vec![
        r.name.clone(),
        num(r.lhs),
        num(r.rhs),
        num(r.abs_diff),
        num(r.rel_diff),
        num(r.tolerance),
        num(r.budget_total()),
        r.verdict.as_str().to_string(),
    ];
    for (k, v) in &r.budgets {
        headers.push(format!("budget_{k}"));
        row.push(num(*v));
    }
    CmdOutput { table: Table { headers, rows: vec![row] }, extra: None, verdict: Some(r.verdict) }
}

fn verify(v: &VerifyCmd, wb: &Workbench) -> Result<(String, CmdOutput)> {
    let tol = &wb.cfg.tolerances;
    Ok(match v {
        VerifyCmd::Parseval { k, sigma } => {
            let trunc = wb.cfg.truncation(*k)?;
            let grid = transform_grid(wb, &trunc)?;
            ("verify parseval".into(), report_output(parseval_check(*k, *sigma, &grid, &trunc, tol)?))
        }
        VerifyCmd::Theorem1 { sigma } => {
            let r = theorem1_check(*sigma, wb.grid()?, wb.data()?, &wb.cfg.truncation(1)?, tol)?;
            ("verify theorem1".into(), report_output(r))
        }
        VerifyCmd::Theorem2 { sigma } => {
            let p4 = wb.p4()?;
            let r = theorem2_check(*sigma, &p4, wb.grid()?, wb.data()?, &wb.cfg.truncation(2)?, tol)?;
            ("verify theorem2".into(), report_output(r))
        }
        VerifyCmd::Expsum { k, t } => ("verify expsum".into(), expsum(*k, *t, wb)?),
        VerifyCmd::Inversion { k, x, c, u } => ("verify inversion".into(), inversion(*k, *x, *c, *u, wb)?),
    })
}

/// `F_k(2T) − F_k(T)` against the divisor sum; only k = 1 has a stated bound.
fn expsum(k: u32, t: f64, wb: &Workbench) -> Result<CmdOutput> {
    if k != 1 && k != 3 {
        return Err(Error::Domain(format!("expsum supports k = 1 or 3, got {k}")));
    }
    let (_, hi) = expsum_range(k, t);
    let d = DivisorTable::new(k, (hi as usize).max(1))?;
    let main = expsum_main(k, t, &d)?;
    let f = f_k_series(k, &grid_upto(wb, 2.0 * t)?)?;
    let diff = f.value_at(2.0 * t)? - f.value_at(t)?;
    let resid = diff - main;
    let bound = (k == 1).then(|| 3.0 * t.powf(0.25));
    let mut tb = Table::new(&["k", "T", "F_diff", "S", "residual", "bound"]);
    tb.push(vec![k.to_string(), num(t), num(diff), num(main), num(resid), opt(bound)]);
    let verdict = bound.map(|b| pass_fail(resid.abs() <= b));
    Ok(CmdOutput { table: tb, extra: None, verdict })
}

fn inversion(k: u32, x: f64, c: f64, u: f64, wb: &Workbench) -> Result<CmdOutput> {
    let trunc = wb.cfg.truncation(k)?;
    let grid = transform_grid(wb, &trunc)?;
    let v = mellin_invert_Zk(k, x, c, u, &grid, &trunc)?;
    let target = hardy_z(x, &wb.cfg.eval)?.value.powi(k as i32);
    let err = (v.value - target).abs();
    let mut tb = Table::new(&["k", "x", "c", "U", "value", "imag", "Z^k", "abs_error"]);
    tb.push(vec![k.to_string(), num(x), num(c), num(v.u_max), num(v.value), num(v.imag), num(target), num(err)]);
    Ok(CmdOutput { table: tb, extra: None, verdict: Some(pass_fail(err <= 0.1)) })
}

fn acceptance(wb: &Workbench) -> Result<CmdOutput> {
    let outcomes = run_all(wb);
    let csv = outcomes_csv(&outcomes)?;
    let mut rdr = csv::Reader::from_reader(csv.as_bytes());
    let headers: Vec<String> = rdr.headers()?.iter().map(String::from).collect();
    let rows = rdr
        .records()
        .map(|r| r.map(|r| r.iter().map(String::from).collect()))
        .collect::<std::result::Result<Vec<Vec<String>>, _>>()?;
    let all = outcomes.iter().all(|o| o.passed);
    Ok(CmdOutput { table: Table { headers, rows }, extra: None, verdict: Some(pass_fail(all)) })
}
