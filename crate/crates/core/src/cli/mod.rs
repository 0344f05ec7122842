//! Command-line front end.
//!
//! Settings are layered: built-in defaults, then `--config FILE` (flat
//! `key=value` lines, or a JSON object such as a previous run's manifest),
//! then flags. The default output directory comes from `CRITSHE_OUT_DIR`.
//! Every run writes `<subcommand>.csv` (or `.json`) and
//! `<subcommand>.manifest.json`; re-running with `--config` pointed at the
//! manifest reproduces every number. Random streams are keyed by
//! `(seed, "<subcommand>/<estimator>")`.
//!
//! Exit codes: 0 success, 1 hard failure, 2 usage error, 3 unreliable
//! estimate, 4 a tested property failed. Errors are reported on stderr as
//! one JSON object `{"error": <class>, "message": ...}`.

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::error::Error;
pub use config::{Format, RunConfig, BUDGET_MINIMA, OUT_DIR_ENV, SUBCOMMANDS};
pub use output::{Outcome, Row, ROW_SCHEMA};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_UNRELIABLE: i32 = 3;
pub const EXIT_CHECK_FAILED: i32 = 4;

#[derive(Parser, Debug)]
#[command(name = "critshe", version, about = "Critical long-range stochastic heat equation: moments, Monte Carlo and regime experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// Run seed; every random stream derives from it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads. Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Result format: csv or json.
    #[arg(long, global = true)]
    pub format: Option<String>,
    /// Output directory (default: $CRITSHE_OUT_DIR, else the working directory).
    #[arg(long = "out-dir", global = true)]
    pub out_dir: Option<PathBuf>,
    /// Config file (key=value lines or a JSON manifest) applied before flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

impl Common {
    fn flags(&self) -> Vec<(&'static str, String)> {
        let mut v = Vec::new();
        if let Some(s) = self.seed {
            v.push(("seed", s.to_string()));
        }
        if let Some(t) = self.threads {
            v.push(("threads", t.to_string()));
        }
        if let Some(f) = &self.format {
            v.push(("format", f.clone()));
        }
        if let Some(o) = &self.out_dir {
            v.push(("out-dir", o.display().to_string()));
        }
        v
    }
}

macro_rules! flag_struct {
    ($(#[$sm:meta])* $name:ident { $( $(#[$m:meta])* $field:ident : $ty:ty = $key:literal ),* $(,)? }) => {
        $(#[$sm])*
        #[derive(Args, Debug, Clone, Default)]
        pub struct $name {
            $( $(#[$m])* #[arg(long = $key)] pub $field: Option<$ty>, )*
        }

        impl $name {
            fn flags(&self) -> Vec<(&'static str, String)> {
                let mut v = Vec::new();
                $( if let Some(x) = &self.$field { v.push(($key, x.to_string())); } )*
                v
            }
        }
    };
}

flag_struct!(SigmaArgs {
    /// Dimension.
    d: usize = "d",
    /// Coupling (any positive value; σ² scales as κ²).
    kappa: f64 = "kappa",
    /// Real-space Monte Carlo samples.
    samples: usize = "samples",
});

flag_struct!(ChaosVarArgs {
    /// Chaos order.
    n: usize = "n",
    d: usize = "d",
    kappa: f64 = "kappa",
    t: f64 = "t",
    /// Ball radius.
    r: f64 = "R",
    /// fourier, fk or both.
    method: String = "method",
    /// Feynman-Kac ball pairs.
    pairs: usize = "pairs",
    paths_per_pair: usize = "paths-per-pair",
    /// Minimum effective samples of the Fourier Monte Carlo (n >= 2).
    mc_samples: usize = "mc-samples",
    /// Base steps per Brownian path.
    base_steps: usize = "base-steps",
});

flag_struct!(PhiArgs {
    /// Comma-separated nonnegative rates.
    rates: String = "rates",
    /// Simplex Monte Carlo points.
    mc_samples: usize = "mc-samples",
    /// Split index of the chain bound.
    chain_k: usize = "chain-k",
});

flag_struct!(FkMomentsArgs {
    /// Comma-separated starting point (its length is the dimension).
    x: String = "x",
    t: f64 = "t",
    /// Highest moment of β.
    n_max: usize = "n-max",
    kappa: f64 = "kappa",
    paths: usize = "paths",
    base_steps: usize = "base-steps",
});

flag_struct!(ScalingArgs {
    d: usize = "d",
    kappa: f64 = "kappa",
    t: f64 = "t",
    r: f64 = "R",
    /// Comma-separated scaling factors.
    eps: String = "eps",
    pairs: usize = "pairs",
    /// Paths per side of the β-law KS test.
    ks_paths: usize = "ks-paths",
    base_steps: usize = "base-steps",
});

flag_struct!(CltArgs {
    d: usize = "d",
    kappa: f64 = "kappa",
    /// Comma-separated radii.
    r_list: String = "r-list",
    /// Minimum effective samples per higher-chaos estimate.
    mc_samples: usize = "mc-samples",
});

flag_struct!(ExtinctionArgs {
    d: usize = "d",
    kappa: f64 = "kappa",
    /// Comma-separated values of t/|x|^2 spanning at least two decades.
    taus: String = "taus",
    /// Paths per profile point.
    exp_paths: usize = "exp-paths",
    pairs: usize = "pairs",
    base_steps: usize = "base-steps",
});

flag_struct!(LatticeArgs {
    /// Grid points per axis (power of two).
    grid: usize = "grid",
    spacing: f64 = "spacing",
    /// Time step, or "auto" for spacing^2/12.
    dt: String = "dt",
    kappa: f64 = "kappa",
    replicas: usize = "replicas",
    /// exponential-euler or euler-maruyama.
    scheme: String = "scheme",
    /// Also write every ball average to lattice.ensemble.csv.
    dump: bool = "dump",
});

flag_struct!(ConstantsArgs {
    d: usize = "d",
    /// Coupling; values at or above (d-2)/2 are accepted to show summability failing.
    kappa: f64 = "kappa",
});

#[derive(Subcommand, Debug)]
pub enum Command {
    /// σ² by Fourier quadrature and by real-space Monte Carlo.
    Sigma {
        #[command(flatten)]
        args: SigmaArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Variance of the n-th chaos of a ball average, Fourier and/or Feynman-Kac.
    ChaosVar {
        #[command(flatten)]
        args: ChaosVarArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Simplex exponential integral with its bounds and Monte Carlo oracle.
    Phi {
        #[command(flatten)]
        args: PhiArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Moments of β_t(x) and the exponential moment E[exp(κ² β_t(x))].
    FkMoments {
        #[command(flatten)]
        args: FkMomentsArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Scaling identity, β-law invariance, second-moment collapse.
    ScalingCheck {
        #[command(flatten)]
        args: ScalingArgs,
        #[command(flatten)]
        common: Common,
    },
    /// First- and second-chaos variances along a radius sweep.
    CltTable {
        #[command(flatten)]
        args: CltArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Exponential-moment growth profile and moment signature.
    Extinction {
        #[command(flatten)]
        args: ExtinctionArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Periodic lattice ensemble in the three regimes.
    Lattice {
        #[command(flatten)]
        args: LatticeArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Constants of the higher-chaos summability argument.
    Constants {
        #[command(flatten)]
        args: ConstantsArgs,
        #[command(flatten)]
        common: Common,
    },
}

impl Command {
    fn parts(&self) -> (&'static str, Vec<(&'static str, String)>, &Common) {
        match self {
            Command::Sigma { args, common } => ("sigma", args.flags(), common),
            Command::ChaosVar { args, common } => ("chaos-var", args.flags(), common),
            Command::Phi { args, common } => ("phi", args.flags(), common),
            Command::FkMoments { args, common } => ("fk-moments", args.flags(), common),
            Command::ScalingCheck { args, common } => ("scaling-check", args.flags(), common),
            Command::CltTable { args, common } => ("clt-table", args.flags(), common),
            Command::Extinction { args, common } => ("extinction", args.flags(), common),
            Command::Lattice { args, common } => ("lattice", args.flags(), common),
            Command::Constants { args, common } => ("constants", args.flags(), common),
        }
    }
}

/// Merge defaults, config file and flags into a [`RunConfig`].
pub fn resolve(cmd: &Command, env_out_dir: Option<&str>) -> Result<RunConfig, Error> {
    let (sub, flags, common) = cmd.parts();
    let mut cfg = RunConfig::defaults(sub, env_out_dir)?;
    if let Some(path) = &common.config {
        cfg.apply_file(path)?;
    }
    for (k, v) in common.flags().into_iter().chain(flags) {
        cfg.set(k, v)?;
    }
    // fail on malformed common settings before any work starts
    cfg.seed()?;
    cfg.parallelism()?;
    cfg.format()?;
    Ok(cfg)
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Usage(_) => EXIT_USAGE,
        Error::Unreliable(_) | Error::HeavyTail { .. } => EXIT_UNRELIABLE,
        _ => EXIT_FAILURE,
    }
}

fn report_error(e: &Error) {
    let doc = serde_json::json!({"error": e.class(), "message": e.to_string()});
    eprintln!("{doc}");
}

fn print_summary(cfg: &RunConfig, out: &Outcome) {
    println!("critshe {} (seed {})", cfg.subcommand, cfg.raw("seed"));
    for r in out.rows.iter().filter(|r| !r.name.starts_with("pass:") && !r.name.starts_with("margin:")) {
        if r.stderr > 0.0 {
            println!("  {:<48} {:>14.8e} ± {:.2e}  [{}]", r.name, r.value, r.stderr, r.method);
        } else {
            println!("  {:<48} {:>14.8e}  [{}]", r.name, r.value, r.method);
        }
    }
    for (p, pass) in &out.verdicts {
        println!("  [{}] {p}", if *pass { "PASS" } else { "FAIL" });
    }
    for f in &out.flags {
        println!("  unreliable: {f}");
    }
}

/// Execute a resolved configuration, write its files and return the exit code.
pub fn execute(cfg: &RunConfig) -> i32 {
    let start = Instant::now();
    let result = commands::run(cfg).and_then(|out| {
        let format = cfg.format()?;
        let mut paths = vec![output::write_results(cfg, format, &out)?];
        for (name, body) in &out.extra {
            paths.push(output::write_extra(cfg, name, body)?);
        }
        Ok((out, paths))
    });
    let wall = start.elapsed().as_secs_f64();
    match result {
        Ok((out, paths)) => {
            let failed = out.failed();
            let (status, code) = if !out.flags.is_empty() {
                ("unreliable", EXIT_UNRELIABLE)
            } else if !failed.is_empty() {
                ("check-failed", EXIT_CHECK_FAILED)
            } else {
                ("ok", EXIT_OK)
            };
            let info = output::ManifestInfo {
                status,
                exit_code: code,
                wall_time_s: wall,
                outputs: &paths,
                flags: &out.flags,
                failed: &failed,
                error: None,
            };
            match output::write_manifest(cfg, &info) {
                Ok(m) => {
                    print_summary(cfg, &out);
                    for p in paths.iter().chain(std::iter::once(&m)) {
                        println!("  wrote {}", p.display());
                    }
                    code
                }
                Err(e) => {
                    report_error(&e);
                    exit_code(&e)
                }
            }
        }
        Err(e) => {
            let code = exit_code(&e);
            let info = output::ManifestInfo {
                status: "error",
                exit_code: code,
                wall_time_s: wall,
                outputs: &[],
                flags: &[],
                failed: &[],
                error: Some(&e),
            };
            let _ = output::write_manifest(cfg, &info);
            report_error(&e);
            code
        }
    }
}

/// Parse `args` (program name first) and run. Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return EXIT_OK;
            }
            if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand {
                let _ = e.print();
                return EXIT_USAGE;
            }
            let msg = e.to_string();
            report_error(&Error::Usage(msg.trim().trim_start_matches("error: ").to_string()));
            return EXIT_USAGE;
        }
    };
    let env_out = std::env::var(OUT_DIR_ENV).ok();
    match resolve(&cli.command, env_out.as_deref()) {
        Ok(cfg) => execute(&cfg),
        Err(e) => {
            report_error(&e);
            exit_code(&e)
        }
    }
}
