//! `shellvk` command line: config in, JSON/CSV results and a run manifest out.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 usage or configuration error,
//! 3 numerical failure or a failed `--verify` check.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
mod commands;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use shellvk::ShellError;

use crate::commands::Ctx;
use crate::config::{ConfigError, RunConfig};
use crate::output::{write_json, Outputs};

pub const THREADS_ENV: &str = "SHELLVK_THREADS";

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Numerical { stage: String, error: ShellError },
    Io(std::io::Error),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

#[derive(Parser, Debug)]
#[command(name = "shellvk", version, about = "Limit energies of thin elastic shells")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Run configuration file.
    #[arg(long, value_name = "FILE")]
    config: PathBuf,
    /// Exit with status 3 unless every invariant check passes.
    #[arg(long)]
    verify: bool,
    /// Overrides `[output] directory`.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Geometry report of the configured surface.
    Surface(Common),
    /// Near-isometry basis with Rayleigh quotients and mode dumps.
    Isometries(Common),
    /// Solves `sym∇w = B` for the configured strain.
    Membrane(Common),
    /// Evaluates the limit energy of the configured mode and load.
    Energy(Common),
    /// Minimizes the limit energy with the configured load.
    Minimize {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        kappa: Option<f64>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        max_iter: Option<usize>,
        #[arg(long)]
        restarts: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// 3D energies of recovery sequences along a thickness ladder.
    GammaCheck {
        #[command(flatten)]
        common: Common,
        /// Displacement preset, overrides `[solver] mode`.
        #[arg(long)]
        mode: Option<String>,
        #[arg(long)]
        kappa: Option<f64>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Surface(_) => "surface",
            Command::Isometries(_) => "isometries",
            Command::Membrane(_) => "membrane",
            Command::Energy(_) => "energy",
            Command::Minimize { .. } => "minimize",
            Command::GammaCheck { .. } => "gamma-check",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Surface(c) | Command::Isometries(c) | Command::Membrane(c) | Command::Energy(c) => c,
            Command::Minimize { common, .. } | Command::GammaCheck { common, .. } => common,
        }
    }

    /// Applies flag overrides; `true` if anything changed.
    fn apply(&self, cfg: &mut RunConfig) -> bool {
        let before = cfg.clone();
        if let Some(dir) = &self.common().out {
            cfg.output.directory = dir.display().to_string();
        }
        match self {
            Command::Minimize { kappa, tol, max_iter, restarts, seed, .. } => {
                if let Some(k) = kappa {
                    cfg.scaling.kappa = *k;
                }
                if let Some(t) = tol {
                    cfg.solver.tol = *t;
                }
                if let Some(m) = max_iter {
                    cfg.solver.max_iter = *m;
                }
                if let Some(r) = restarts {
                    cfg.solver.restarts = *r;
                }
                if let Some(s) = seed {
                    cfg.solver.seed = *s;
                }
            }
            Command::GammaCheck { mode, kappa, .. } => {
                if let Some(m) = mode {
                    cfg.solver.mode = Some(m.clone());
                }
                if let Some(k) = kappa {
                    cfg.scaling.kappa = *k;
                }
            }
            _ => {}
        }
        *cfg != before
    }
}

fn configure_threads() -> Result<usize, String> {
    if let Ok(raw) = std::env::var(THREADS_ENV) {
        let n: usize = raw
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| format!("{THREADS_ENV} must be a positive integer, got `{raw}`"))?;
        // a pool already built by an earlier run in this process stays in place
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(rayon::current_num_threads())
}

fn load_config(cmd: &Command) -> Result<(RunConfig, String), ConfigError> {
    let path = &cmd.common().config;
    let mut cfg = RunConfig::load(path)?;
    let mut shown = path.display().to_string();
    if cmd.apply(&mut cfg) {
        shown = format!("{shown} (with command-line overrides)");
        cfg = RunConfig::parse(&cfg.to_text(), &shown)?;
    }
    Ok((cfg, shown))
}

/// Runs one command line and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let threads = match configure_threads() {
        Ok(n) => n,
        Err(m) => {
            eprintln!("error: {m}");
            return 2;
        }
    };
    let name = cli.command.name();
    let verify = cli.command.common().verify;
    let (cfg, config_path) = match load_config(&cli.command) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return 2;
        }
    };
    let out = match Outputs::new(&cfg) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: cannot create output directory {}: {e}", cfg.output.directory);
            return 1;
        }
    };
    let mut ctx = Ctx { cfg, config_path, out, checks: Vec::new() };
    let result = match &cli.command {
        Command::Surface(_) => commands::surface(&mut ctx),
        Command::Isometries(_) => commands::isometries(&mut ctx),
        Command::Membrane(_) => commands::membrane(&mut ctx),
        Command::Energy(_) => commands::energy(&mut ctx),
        Command::Minimize { .. } => commands::minimize(&mut ctx),
        Command::GammaCheck { .. } => commands::gamma_check(&mut ctx),
    };
    let failed: Vec<_> = ctx.checks.iter().filter(|c| !c.pass).cloned().collect();
    let (code, status, error) = match &result {
        Ok(()) if verify && !failed.is_empty() => {
            let payload = json!({ "status": "verify-failed", "command": name, "failed": failed });
            eprintln!("{}", serde_json::to_string_pretty(&payload).unwrap_or_default());
            (3, "verify-failed", None)
        }
        Ok(()) => (0, "ok", None),
        Err(CliError::Config(e)) => {
            eprintln!("config error: {e}");
            (2, "config-error", Some(json!({ "message": e.to_string() })))
        }
        Err(CliError::Numerical { stage, error }) => {
            let payload = commands::error_payload(stage, error);
            eprintln!("{}", serde_json::to_string_pretty(&json!({ "status": "numerical-failure", "command": name, "error": payload })).unwrap_or_default());
            (3, "numerical-failure", Some(payload))
        }
        Err(CliError::Io(e)) => {
            eprintln!("error: {e}");
            (1, "io-error", Some(json!({ "message": e.to_string() })))
        }
    };
    let manifest = json!({
        "command": name,
        "config_path": ctx.config_path,
        "config": ctx.cfg,
        "config_text": ctx.cfg.to_text(),
        "versions": { "shellvk": shellvk::VERSION, "shellvk-cli": env!("CARGO_PKG_VERSION") },
        "threads": threads,
        "timings": ctx.out.timings(),
        "outputs": ctx.out.written,
        "verify": { "enabled": verify, "checks": ctx.checks },
        "status": status,
        "exit_code": code,
        "error": error,
    });
    if let Err(e) = write_json(&ctx.out.dir().join("manifest.json"), &manifest) {
        eprintln!("error: cannot write manifest: {e}");
        return if code == 0 { 1 } else { code };
    }
    if code == 0 {
        println!("{name}: ok, {} file(s) in {}", ctx.out.written.len() + 1, ctx.out.dir().display());
    }
    code
}
