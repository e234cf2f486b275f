//! Command-line front end.
//!
//! Every subcommand resolves its parameters from flags, then from the
//! matching table of an optional TOML file, then from defaults. Output files
//! start with a comment line holding the resolved arguments, so a file can be
//! regenerated by passing that line back to the binary.

/// Fills unset fields of `self` from `other`: options by `or`, switches by
/// `||`. The `preset`/`kernel` pair, when present, is taken as a unit.
macro_rules! merge_fields {
    ($ty:ident { $($field:ident),* $(,)? } switches { $($flag:ident),* $(,)? }) => {
        impl $ty {
            pub(crate) fn merge(self, other: Option<$ty>) -> $ty {
                let Some(o) = other else { return self };
                $ty { $($field: self.$field.or(o.$field),)* $($flag: self.$flag || o.$flag,)* }
            }
        }
    };
    ($ty:ident with kernel { $($field:ident),* $(,)? } switches { $($flag:ident),* $(,)? }) => {
        impl $ty {
            pub(crate) fn merge(self, other: Option<$ty>) -> $ty {
                let Some(o) = other else { return self };
                let (preset, kernel) = if self.preset.is_some() || self.kernel.is_some() {
                    (self.preset, self.kernel)
                } else {
                    (o.preset, o.kernel)
                };
                $ty { preset, kernel, $($field: self.$field.or(o.$field),)* $($flag: self.$flag || o.$flag,)* }
            }

            pub(crate) fn kernel_args(&self) -> crate::cli::KernelArgs {
                crate::cli::KernelArgs { preset: self.preset.clone(), kernel: self.kernel.clone() }
            }
        }
    };
}

mod checks;
mod config;
mod output;
mod runs;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::engine::{preset, InitialProfile};
use crate::error::{Error, Result};
use crate::Kernel;

pub use config::FileConfig;
pub use output::{parse_header, HEADER_PREFIX};

/// Environment variable bounding the worker pool.
pub const THREADS_ENV: &str = "SELFWALK_THREADS";

pub const EXIT_PASS: u8 = 0;
pub const EXIT_FAIL: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_RESOURCE: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "selfwalk", version, about = "Simulate and verify locally self-interacting walks")]
pub struct Cli {
    /// TOML file with one table per subcommand; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads (overrides SELFWALK_THREADS).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one walk and write its trajectory and local-time profile.
    Run(runs::RunArgs),
    /// Classify a batch of seeds for one kernel.
    Classify(runs::ClassifyArgs),
    /// Classify every point of an (a, b) grid.
    Sweep(runs::SweepArgs),
    /// Scan b/|a| around the stuck thresholds A_k.
    StuckScan(runs::StuckScanArgs),
    /// Exact stationarity check on a truncated gradient state space.
    GibbsCheck(checks::GibbsArgs),
    /// Coupled second-difference walks and the square-root scenario checks.
    CouplingCheck(checks::CouplingArgs),
}

/// Kernel selection shared by the subcommands: `--preset` or `--kernel`.
#[derive(Debug, Clone, Default)]
pub(crate) struct KernelArgs {
    pub preset: Option<String>,
    pub kernel: Option<String>,
}

impl KernelArgs {
    /// Kernel and initial profile, plus the flags that reproduce them.
    fn resolve(&self) -> Result<(Kernel, InitialProfile, Vec<String>)> {
        match (&self.preset, &self.kernel) {
            (Some(_), Some(_)) => Err(Error::Config("give either --preset or --kernel, not both".into())),
            (Some(name), None) => {
                let (k, p) = preset(name)?;
                Ok((k, p, vec!["--preset".into(), name.clone()]))
            }
            (None, Some(lit)) => {
                let k: Kernel = lit.parse()?;
                let canonical = k.literal();
                Ok((k, InitialProfile::zero(), vec!["--kernel".into(), canonical]))
            }
            (None, None) => Err(Error::Config("a kernel is required: --preset NAME or --kernel LITERAL".into())),
        }
    }
}

/// Exit code for a library error.
pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::DegenerateKernel
        | Error::HeightInvariance { .. }
        | Error::InvalidOffset(_)
        | Error::KernelLiteral { .. }
        | Error::UnknownPreset(_)
        | Error::Config(_)
        | Error::NotApplicable(_)
        | Error::NotPositiveDefinite => EXIT_USAGE,
        Error::Resource(_) => EXIT_RESOURCE,
        _ => EXIT_FAIL,
    }
}

/// Parses `args` (program name first) and runs the command, writing
/// human-readable output to `out` and diagnostics to `err`.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_PASS,
                _ => EXIT_USAGE,
            };
            let text = e.render().to_string();
            let _ = if code == EXIT_PASS { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    match execute(cli, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn execute(cli: Cli, out: &mut dyn Write) -> Result<u8> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let threads = match cli.threads.or(file.threads) {
        Some(n) => Some(n),
        None => match std::env::var(THREADS_ENV) {
            Ok(v) => Some(v.trim().parse().map_err(|_| Error::Config(format!("{THREADS_ENV}={v:?} is not a count")))?),
            Err(_) => None,
        },
    };
    if threads == Some(0) {
        return Err(Error::Config("thread count must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::Resource(format!("cannot start worker pool: {e}")))?;
    let mut buf: Vec<u8> = Vec::new();
    let result = pool.install(|| {
        let sink = &mut buf;
        match cli.command {
            Command::Run(a) => runs::cmd_run(a.merge(file.run), sink),
            Command::Classify(a) => runs::cmd_classify(a.merge(file.classify), &file.thresholds, sink),
            Command::Sweep(a) => runs::cmd_sweep(a.merge(file.sweep), &file.thresholds, sink),
            Command::StuckScan(a) => runs::cmd_stuck_scan(a.merge(file.stuck_scan), &file.thresholds, sink),
            Command::GibbsCheck(a) => checks::cmd_gibbs_check(a.merge(file.gibbs_check), sink),
            Command::CouplingCheck(a) => checks::cmd_coupling_check(a.merge(file.coupling_check), sink),
        }
    });
    out.write_all(&buf)?;
    out.flush()?;
    result
}
