//! `hardy`: batch front end for the hardy-core library.

mod commands;
mod config;
mod output;

use std::fs::{File, TryLockError};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hardy_core::identities::Verdict;
use hardy_core::{Error, Method, Result};

use config::{Format, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "hardy", version, about = "Hardy's Z function, its moments and transforms")]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Debug, Clone)]
struct GlobalOpts {
    /// TOML run configuration; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for cached sample grids.
    #[arg(long, global = true, env = "HARDY_CACHE_DIR")]
    cache_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Absolute error target for Z.
    #[arg(long, global = true)]
    target_error: Option<f64>,
    /// Riemann–Siegel correction depth.
    #[arg(long, global = true)]
    depth: Option<u8>,
    #[arg(long, global = true, value_enum)]
    method: Option<MethodArg>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MethodArg {
    Fast,
    Oracle,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Pointwise values and zero scans of Z.
    #[command(subcommand)]
    Z(ZCmd),
    /// Cached sample grids.
    #[command(subcommand)]
    Grid(GridCmd),
    #[command(subcommand)]
    Moments(MomentsCmd),
    #[command(subcommand)]
    Fit(FitCmd),
    #[command(subcommand)]
    Mellin(MellinCmd),
    #[command(subcommand)]
    Laplace(LaplaceCmd),
    /// Identity checks; exit code 3 on failure, 4 when inconclusive.
    #[command(subcommand)]
    Verify(VerifyCmd),
    #[command(subcommand)]
    Suite(SuiteCmd),
}

#[derive(Subcommand, Debug)]
enum ZCmd {
    Eval {
        #[arg(long, allow_negative_numbers = true)]
        t: f64,
    },
    /// Zeros and the extremum between each pair of consecutive zeros.
    Scan {
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
    },
}

#[derive(Subcommand, Debug)]
enum GridCmd {
    Build {
        #[arg(long)]
        to: f64,
        #[arg(long)]
        step: Option<f64>,
    },
    Extend {
        #[arg(long)]
        to: f64,
        #[arg(long)]
        step: Option<f64>,
    },
}

#[derive(Subcommand, Debug)]
enum MomentsCmd {
    /// I_k on a 1-2-5 ladder up to T, with E, G (k = 1) or E_2 (k = 2).
    Table {
        #[arg(long)]
        k: u32,
        #[arg(long)]
        to: f64,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SeriesArg {
    F1,
    F3,
    F5,
}

#[derive(Subcommand, Debug)]
enum FitCmd {
    P4 {
        #[arg(long)]
        to: f64,
    },
    Growth {
        #[arg(long, value_enum, ignore_case = true)]
        series: SeriesArg,
        #[arg(long, value_delimiter = ',', num_args = 2)]
        window: Vec<f64>,
    },
}

#[derive(Subcommand, Debug)]
enum MellinCmd {
    Eval {
        #[arg(long)]
        k: u32,
        #[arg(long)]
        sigma: f64,
        #[arg(long, allow_negative_numbers = true)]
        t: f64,
    },
}

#[derive(Subcommand, Debug)]
enum LaplaceCmd {
    Kober,
    AtkinsonL4,
}

#[derive(Subcommand, Debug)]
enum VerifyCmd {
    Parseval {
        #[arg(long)]
        k: u32,
        #[arg(long)]
        sigma: f64,
    },
    Theorem1 {
        #[arg(long)]
        sigma: f64,
    },
    Theorem2 {
        #[arg(long)]
        sigma: f64,
    },
    Expsum {
        #[arg(long)]
        k: u32,
        #[arg(long = "T")]
        t: f64,
    },
    Inversion {
        #[arg(long)]
        k: u32,
        #[arg(long)]
        x: f64,
        #[arg(long)]
        c: f64,
        #[arg(long = "U")]
        u: f64,
    },
}

#[derive(Subcommand, Debug)]
enum SuiteCmd {
    Acceptance,
}

fn effective_config(g: &GlobalOpts) -> Result<RunConfig> {
    let mut cfg = match &g.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    if let Some(d) = &g.cache_dir {
        cfg.cache_dir = Some(d.clone());
    }
    if let Some(n) = g.threads {
        cfg.threads = Some(n);
    }
    if let Some(f) = g.format {
        cfg.format = f;
    }
    if let Some(e) = g.target_error {
        cfg.eval.target_abs_error = e;
    }
    if let Some(d) = g.depth {
        cfg.eval.rs_correction_terms = d;
    }
    if let Some(m) = g.method {
        cfg.eval.method = match m {
            MethodArg::Fast => Method::RiemannSiegelFast,
            MethodArg::Oracle => Method::EulerMaclaurinOracle,
        };
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Holds an exclusive lock on `<dir>/.lock` for the life of the process.
fn lock_cache(dir: &Path) -> Result<File> {
    std::fs::create_dir_all(dir)?;
    let f = File::options().create(true).truncate(false).write(true).open(dir.join(".lock"))?;
    match f.try_lock() {
        Ok(()) => Ok(f),
        Err(TryLockError::WouldBlock) => Err(Error::Precondition(format!(
            "cache directory {} is locked by another process",
            dir.display()
        ))),
        Err(TryLockError::Error(e)) => Err(e.into()),
    }
}

fn exit_for(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Domain(_) => 1,
        _ => 2,
    }
}

fn run(cli: Cli) -> Result<u8> {
    let cfg = effective_config(&cli.global)?;
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    let _lock = match &cfg.cache_dir {
        Some(d) => Some(lock_cache(d)?),
        None => None,
    };
    let (name, res) = commands::dispatch(&cli.cmd, &cfg)?;
    let repro = output::Repro::new(&cfg);
    let stdout = io::stdout();
    let stderr = io::stderr();
    let mut out = stdout.lock();
    output::emit(cfg.format, &name, &res.table, res.extra, &repro, &mut out, &mut stderr.lock())?;
    out.flush()?;
    Ok(match res.verdict {
        None | Some(Verdict::Pass) => 0,
        Some(Verdict::Fail) => 3,
        Some(Verdict::Inconclusive) => 4,
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_for(&e))
        }
    }
}
