//! The `snls` command line front end.
//!
//! Every subcommand writes its artifacts and a `manifest.json` into the run
//! directory (`--out`, else `$SNLS_OUT_DIR`, else `./snls-out`). Exit codes:
//! 0 on success, 2 for invalid flags or parameters, 3 for numerical failure
//! (with `error.json` in the run directory).

mod commands;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::Value;

use crate::spectral::Scheme;
use crate::{Result, SnlsError};

/// Version of the manifest layout.
pub const MANIFEST_SCHEMA: u32 = 1;
pub const OUT_DIR_ENV: &str = "SNLS_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "snls-out";

#[derive(Debug, Parser, Serialize)]
#[command(name = "snls", version, about = "Horseshoe workbench for the perturbed even NLS equation")]
pub struct Cli {
    /// Run directory [default: $SNLS_OUT_DIR or ./snls-out]
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed for randomized probes
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Record wall-clock timings in the manifest (outputs are then no
    /// longer byte-identical between runs)
    #[arg(long, global = true)]
    pub timings: bool,
    /// Print nothing; artifacts and the exit code still report the outcome
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PhysArgs {
    #[arg(long, default_value_t = 0.8)]
    pub omega: f64,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 2.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 1e-2)]
    pub eps: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ModelArgs {
    /// Excursion model JSON [default: the built-in synthetic instance]
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Normal-form rates JSON [default: the built-in synthetic rates]
    #[arg(long)]
    pub rates: Option<PathBuf>,
    /// Section size
    #[arg(long)]
    pub eta: Option<f64>,
}

#[derive(Debug, Subcommand, Serialize)]
pub enum Command {
    /// The saddle Q_ε
    Saddle(PhysArgs),
    /// Eigenvalue ladder, rates, Silnikov ordering and nonresonance
    Spectrum {
        #[command(flatten)]
        phys: PhysArgs,
        #[arg(long, default_value_t = 16)]
        n_max: usize,
    },
    /// Finite nonresonance check on the physical or a given real ladder
    Nonres {
        #[command(flatten)]
        phys: PhysArgs,
        /// Comma-separated Λ₀, Λ₁, … (with Λ₋ₙ₋₁ = −Λₙ) instead of the physical ladder
        #[arg(long)]
        ladder: Option<String>,
        #[arg(long, default_value_t = 4)]
        s: u32,
        #[arg(long)]
        n_max: Option<usize>,
        #[arg(long)]
        r_max: Option<usize>,
        #[arg(long)]
        l_bound: Option<i64>,
    },
    /// Integrate the PDE from a perturbed saddle
    Evolve {
        #[command(flatten)]
        phys: PhysArgs,
        #[arg(long, default_value_t = 1.0)]
        tend: f64,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long, default_value_t = 64)]
        modes: usize,
        #[arg(long, default_value = "etdrk4")]
        scheme: Scheme,
        /// Size of the random perturbation of modes 1..4
        #[arg(long, default_value_t = 1e-3)]
        amp: f64,
        /// Record every this many steps
        #[arg(long, default_value_t = 100)]
        every: usize,
        #[arg(long)]
        no_dealias: bool,
    },
    /// Closed-form local map Σ₀ → Σ₁
    LocalMap {
        #[command(flatten)]
        model: ModelArgs,
        /// Flat point x,y,z1,z2,tail...
        #[arg(long, allow_hyphen_values = true)]
        point: Option<String>,
        /// Number of random admissible Σ₀ points
        #[arg(long, default_value_t = 0)]
        samples: usize,
    },
    /// Excursion map estimation and genericity checks
    GlobalMap {
        #[command(subcommand)]
        action: GlobalMapAction,
    },
    /// Asymptotic and refined fixed points of the return map
    FixedPoints {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
        l_min: i64,
        #[arg(long, default_value_t = 20)]
        l_max: i64,
        /// x-coordinate of the excursion exit [default: from the model]
        #[arg(long)]
        x0: Option<f64>,
    },
    /// Slices, Conley–Moser checks and periodic orbits
    Horseshoe {
        #[command(subcommand)]
        action: HorseshoeAction,
    },
    /// Summary table over previous run directories
    Report {
        #[arg(required = true)]
        runs: Vec<PathBuf>,
    },
}

#[derive(Debug, Subcommand, Serialize)]
pub enum GlobalMapAction {
    /// Recover C from the model's exact affine flow
    Estimate {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 1.0)]
        t1: f64,
    },
    /// Conditions (A2) and (A3)
    Check {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        theta: f64,
        #[arg(long, default_value_t = crate::global_map::GENERICITY_TOL)]
        tol: f64,
    },
}

#[derive(Debug, Subcommand, Serialize)]
pub enum HorseshoeAction {
    Run {
        #[command(flatten)]
        model: ModelArgs,
        /// Slab index [default: smallest usable in 1..=8]
        #[arg(long)]
        l: Option<i64>,
        #[arg(long, default_value_t = 8)]
        depth: usize,
        /// Largest period counted
        #[arg(long, default_value_t = 3)]
        period: usize,
        #[arg(long, default_value_t = 64)]
        grid: usize,
        #[arg(long, default_value_t = crate::horseshoe::DEFAULT_SAMPLE_BUDGET)]
        budget: usize,
        /// Random words for the conjugacy check
        #[arg(long, default_value_t = 50)]
        words: usize,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Saddle(_) => "saddle",
            Command::Spectrum { .. } => "spectrum",
            Command::Nonres { .. } => "nonres",
            Command::Evolve { .. } => "evolve",
            Command::LocalMap { .. } => "local-map",
            Command::GlobalMap {
                action: GlobalMapAction::Estimate { .. },
            } => "global-map estimate",
            Command::GlobalMap {
                action: GlobalMapAction::Check { .. },
            } => "global-map check",
            Command::FixedPoints { .. } => "fixed-points",
            Command::Horseshoe { .. } => "horseshoe run",
            Command::Report { .. } => "report",
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub schema: u32,
    pub command: String,
    pub version: String,
    pub config: Value,
    pub status: String,
    pub artifacts: Vec<String>,
    pub summary: BTreeMap<String, Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<BTreeMap<String, f64>>,
}

/// Run directory bookkeeping shared by the subcommands.
pub struct RunContext {
    pub dir: PathBuf,
    pub seed: u64,
    artifacts: Vec<String>,
    timings: Option<BTreeMap<String, f64>>,
    clock: Instant,
    pub summary: BTreeMap<String, Value>,
    /// Printed to stdout on success.
    pub stdout: Option<String>,
}

impl RunContext {
    fn new(dir: PathBuf, seed: u64, timings: bool) -> Result<Self> {
        fs::create_dir_all(&dir)?;
        Ok(Self {
            dir,
            seed,
            artifacts: Vec::new(),
            timings: timings.then(BTreeMap::new),
            clock: Instant::now(),
            summary: BTreeMap::new(),
            stdout: None,
        })
    }

    fn register(&mut self, name: &str) -> PathBuf {
        if !self.artifacts.iter().any(|a| a == name) {
            self.artifacts.push(name.to_string());
        }
        self.dir.join(name)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let path = self.register(name);
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.register(name);
        fs::write(path, bytes)?;
        Ok(())
    }

    /// Records the time since the previous lap under `label`.
    pub fn lap(&mut self, label: &str) {
        if let Some(t) = self.timings.as_mut() {
            t.insert(label.to_string(), self.clock.elapsed().as_secs_f64());
            self.clock = Instant::now();
        }
    }

    pub fn note<T: Serialize>(&mut self, key: &str, value: T) {
        self.summary
            .insert(key.to_string(), serde_json::to_value(value).unwrap_or(Value::Null));
    }
}

fn exit_code(e: &SnlsError) -> i32 {
    match e {
        SnlsError::InvalidParams(_) | SnlsError::BudgetExceeded { .. } => 2,
        _ => 3,
    }
}

fn out_dir(cli: &Cli) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

fn write_manifest(ctx: &mut RunContext, cli: &Cli, status: &str) -> Result<()> {
    let config = serde_json::to_value(cli)?;
    let mut artifacts = ctx.artifacts.clone();
    artifacts.sort();
    let manifest = Manifest {
        schema: MANIFEST_SCHEMA,
        command: cli.command.name().to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config,
        status: status.to_string(),
        artifacts,
        summary: ctx.summary.clone(),
        timings: ctx.timings.clone(),
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(ctx.dir.join("manifest.json"), text)?;
    Ok(())
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    schema: u32,
    command: &'a str,
    kind: &'a str,
    message: String,
}

fn error_kind(e: &SnlsError) -> &'static str {
    match e {
        SnlsError::InvalidParams(_) => "invalid_params",
        SnlsError::DomainExit(_) => "domain_exit",
        SnlsError::Transversality(_) => "transversality",
        SnlsError::SelfConsistency(_) => "self_consistency",
        SnlsError::Degenerate(_) => "degenerate",
        SnlsError::Newton(_) => "newton",
        SnlsError::Slices(_) => "slices",
        SnlsError::Inconclusive(_) => "inconclusive",
        SnlsError::Io(_) => "io",
        SnlsError::Json(_) => "json",
        SnlsError::BudgetExceeded { .. } => "budget_exceeded",
        SnlsError::Blowup { .. } => "blowup",
    }
}

/// Parse `argv` (including the program name), run the subcommand and return
/// the process exit code.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let mut ctx = match RunContext::new(out_dir(&cli), cli.seed, cli.timings) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: cannot create run directory: {e}");
            return 2;
        }
    };
    let result = commands::dispatch(&cli.command, &mut ctx);
    ctx.lap("total");
    match result {
        Ok(()) => {
            if let Err(e) = write_manifest(&mut ctx, &cli, "ok") {
                eprintln!("error: {e}");
                return 3;
            }
            match &ctx.stdout {
                Some(s) if !cli.quiet => println!("{s}"),
                _ => {}
            }
            0
        }
        Err(e) => {
            if !cli.quiet {
                eprintln!("error: {e}");
            }
            let report = ErrorReport {
                schema: MANIFEST_SCHEMA,
                command: cli.command.name(),
                kind: error_kind(&e),
                message: e.to_string(),
            };
            let _ = ctx.write_json("error.json", &report);
            let _ = write_manifest(&mut ctx, &cli, "failed");
            exit_code(&e)
        }
    }
}

/// Fails with an invalid-parameter error unless `path` exists.
fn require_file(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(SnlsError::InvalidParams(format!("file {} does not exist", path.display())))
    }
}
