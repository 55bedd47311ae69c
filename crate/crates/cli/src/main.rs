//! `hk`: bounded-confidence simulation, consensus certificates and
//! Monte-Carlo cluster statistics.
//!
//! Exit status: 0 success or Certified, 2 Inconclusive, 3 Refuted (or an
//! oracle disagreement), 1 error.

mod certify;
mod config;
mod manifest;
mod oracle;
mod sample;
mod simulate;

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rug::Rational;

use hk_core::certify::{Arith, Verdict};
use hk_core::numerics::{parse_rational, DEFAULT_PRECISION_BITS};
use hk_core::{ArithMode, HkError};

use config::{Config, Resolver};
use manifest::{digests, RunManifest};

/// An exact number given as a decimal (`5e-4`, `0.1`) or `p/q` literal.
#[derive(Debug, Clone, PartialEq)]
pub struct Num(pub Rational);

impl FromStr for Num {
    type Err = HkError;

    fn from_str(s: &str) -> Result<Self, HkError> {
        parse_rational(s).map(Num)
    }
}

impl fmt::Display for Num {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "hk",
    version,
    about = "Certified Hegselmann-Krause simulation and consensus verification"
)]
struct Cli {
    /// Flat `section.key = value` file; flags override its entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for independent grid points and trials (config `run.jobs`) [default: all cores]
    #[arg(long, global = true, env = "HK_JOBS")]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Iterate the update and write the trajectory (and optionally envelopes) as CSV.
    Simulate(simulate::SimulateArgs),
    /// Certify consensus for every diameter in [l-lo, l-hi] on a grid of equally spaced profiles.
    CertifyGrid(certify::GridArgs),
    /// Run the microcluster criterion on the equally spaced profile of diameter L.
    CertifyL6(certify::L6Args),
    /// Monte-Carlo cluster statistics for uniform random initial profiles.
    Sample(sample::SampleArgs),
    /// Compare the fast update with the naive one and with the closed forms.
    OracleCheck(oracle::OracleArgs),
    /// Re-run a recorded manifest and compare verdicts and output digests.
    Replay(ReplayArgs),
}

#[derive(Args, Debug)]
struct ReplayArgs {
    manifest: PathBuf,
    /// Write outputs here instead of the recorded paths.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

/// Arithmetic settings shared by the subcommands that compute.
#[derive(Args, Debug, Default, Clone)]
pub struct ArithArgs {
    /// Backend: rational, ball or float (config `arith.mode`)
    #[arg(long)]
    pub mode: Option<ArithMode>,
    /// Ball precision in bits (config `arith.precision_bits`) [default: 128]
    #[arg(long)]
    pub precision_bits: Option<u32>,
}

impl ArithArgs {
    pub fn resolve(&self, r: &mut Resolver, default: ArithMode) -> Result<Arith> {
        let mode = r.pick("arith.mode", self.mode, default)?;
        if mode != ArithMode::Ball {
            // recorded but unused
            r.pick_opt("arith.precision_bits", self.precision_bits)?;
            return Ok(Arith { mode, bits: None });
        }
        let bits = r.pick("arith.precision_bits", self.precision_bits, DEFAULT_PRECISION_BITS)?;
        if bits < 24 {
            bail!("precision below 24 bits");
        }
        Ok(Arith { mode, bits: Some(bits) })
    }
}

/// Runs `$body` with `$S` bound to the scalar type for `$arith` and `$ctx`
/// to its context.
#[macro_export]
macro_rules! with_backend {
    ($arith:expr, |$S:ident, $ctx:ident| $body:expr) => {{
        let arith: hk_core::certify::Arith = $arith;
        match arith.mode {
            hk_core::ArithMode::Rational => {
                type $S = hk_core::Exact;
                let $ctx = ();
                $body
            }
            hk_core::ArithMode::Ball => {
                type $S = hk_core::Ball;
                let $ctx = hk_core::Precision::new(arith.bits.unwrap_or(hk_core::numerics::DEFAULT_PRECISION_BITS));
                $body
            }
            hk_core::ArithMode::Float => {
                type $S = f64;
                let $ctx = ();
                $body
            }
        }
    }};
}

/// What a subcommand produced.
pub struct Run {
    pub config: BTreeMap<String, String>,
    pub arith: Arith,
    /// The first output carries the manifest.
    pub outputs: Vec<PathBuf>,
    pub verdict: Option<Verdict>,
    pub exit_code: i32,
    pub summary: serde_json::Value,
}

pub fn required<T>(v: Option<T>, key: &str, flag: &str) -> Result<T> {
    v.ok_or_else(|| anyhow!("missing `{flag}` (or config key `{key}`)"))
}

/// Output keys that `replay --out-dir` redirects.
const OUTPUT_KEYS: [&str; 6] = [
    "simulate.out",
    "simulate.envelope",
    "grid.out",
    "l6.out",
    "sample.out",
    "oracle.out",
];

fn dispatch(command: &Command, cfg: &Config) -> Result<(String, Run)> {
    let (name, run) = match command {
        Command::Simulate(a) => ("simulate", simulate::run(a, cfg)?),
        Command::CertifyGrid(a) => ("certify-grid", certify::run_grid(a, cfg)?),
        Command::CertifyL6(a) => ("certify-l6", certify::run_l6(a, cfg)?),
        Command::Sample(a) => ("sample", sample::run(a, cfg)?),
        Command::OracleCheck(a) => ("oracle-check", oracle::run(a, cfg)?),
        Command::Replay(_) => unreachable!("replay is handled separately"),
    };
    Ok((name.to_string(), run))
}

fn command_for(subcommand: &str) -> Result<Command> {
    Ok(match subcommand {
        "simulate" => Command::Simulate(Default::default()),
        "certify-grid" => Command::CertifyGrid(Default::default()),
        "certify-l6" => Command::CertifyL6(Default::default()),
        "sample" => Command::Sample(Default::default()),
        "oracle-check" => Command::OracleCheck(Default::default()),
        other => bail!("manifest names unknown subcommand `{other}`"),
    })
}

fn execute(command: &Command, cfg: &Config, run_cfg: BTreeMap<String, String>) -> Result<RunManifest> {
    let start = Instant::now();
    let (name, mut run) = dispatch(command, cfg)?;
    run.config.extend(run_cfg);
    let manifest = RunManifest {
        subcommand: name,
        config: run.config,
        arith: run.arith,
        version: env!("CARGO_PKG_VERSION").to_string(),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        exit_code: run.exit_code,
        verdict: run.verdict.map(|v| format!("{v:?}")),
        outputs: digests(&run.outputs)?,
        summary: run.summary,
    };
    let path = RunManifest::path_for(&run.outputs[0]);
    manifest.write(&path)?;
    println!("manifest: {}", path.display());
    Ok(manifest)
}

fn replay(args: &ReplayArgs, jobs: Option<BTreeMap<String, String>>) -> Result<RunManifest> {
    let recorded = RunManifest::read(&args.manifest)?;
    let mut entries = recorded.config.clone();
    if let Some(dir) = &args.out_dir {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for key in OUTPUT_KEYS {
            if let Some(v) = entries.get_mut(key) {
                let name = Path::new(v.as_str())
                    .file_name()
                    .ok_or_else(|| anyhow!("output path `{v}` has no file name"))?;
                *v = dir.join(name).to_string_lossy().into_owned();
            }
        }
    }
    // a jobs flag on the replay wins over the recorded one
    if jobs.is_some() {
        entries.remove("run.jobs");
    }
    let command = command_for(&recorded.subcommand)?;
    let fresh = execute(&command, &Config::from_map(entries), jobs.unwrap_or_default())?;

    if fresh.verdict != recorded.verdict || fresh.exit_code != recorded.exit_code {
        bail!(
            "replay diverged: recorded {:?} (exit {}), got {:?} (exit {})",
            recorded.verdict,
            recorded.exit_code,
            fresh.verdict,
            fresh.exit_code
        );
    }
    for (old, new) in recorded.outputs.iter().zip(&fresh.outputs) {
        if old.sha256 == new.sha256 {
            println!("reproduced {} byte for byte", new.path.display());
        } else if recorded.arith.mode == ArithMode::Rational {
            bail!(
                "replay diverged: {} differs from the recorded digest",
                new.path.display()
            );
        } else {
            println!("note: {} differs from the recorded digest", new.path.display());
        }
    }
    Ok(fresh)
}

fn main_inner(cli: Cli) -> Result<i32> {
    let cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    let jobs = match cli.jobs {
        Some(j) => Some(j),
        None => cfg
            .get("run.jobs")
            .map(|s| s.parse::<usize>().map_err(|e| anyhow!("config key `run.jobs`: {e}")))
            .transpose()?,
    };
    if let Some(j) = jobs.filter(|&j| j > 0) {
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .context("starting the worker pool")?;
    }
    let run_cfg = jobs.map(|j| BTreeMap::from([("run.jobs".to_string(), j.to_string())]));
    let manifest = match &cli.command {
        Command::Replay(a) => replay(a, cli.jobs.and(run_cfg))?,
        other => execute(other, &cfg, run_cfg.unwrap_or_default())?,
    };
    Ok(manifest.exit_code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match main_inner(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
