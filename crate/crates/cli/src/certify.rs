use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use rug::Rational;
use serde_json::json;

use hk_core::certify::{certify_grid_interval, certify_microcluster, Arith, Certificate, GridSpec};
use hk_core::{ArithMode, Spacing};

use crate::config::{Config, Resolver};
use crate::{required, with_backend, ArithArgs, Num, Run};

#[derive(Args, Debug, Default)]
pub struct GridArgs {
    /// Left end of the diameter interval (config `grid.l_lo`)
    #[arg(long)]
    l_lo: Option<Num>,
    /// Right end of the diameter interval (config `grid.l_hi`)
    #[arg(long)]
    l_hi: Option<Num>,
    /// Odd number of agents per grid profile (config `grid.n`) [default: 10001]
    #[arg(long)]
    n: Option<usize>,
    /// Tent height; sets the grid spacing 2 eps (n-1)/(n+1) (config `grid.eps`) [default: 5e-4]
    #[arg(long)]
    eps: Option<Num>,
    /// A point passes once D <= 2 - 2 delta and both extremist envelopes are below delta (config `grid.delta`) [default: 1e-2]
    #[arg(long)]
    delta: Option<Num>,
    /// Certified steps per grid point (config `grid.steps`) [default: 8]
    #[arg(long)]
    steps: Option<usize>,
    /// Certificate JSON (config `grid.out`) [default: cert.json]
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    arith: ArithArgs,
}

#[derive(Args, Debug, Default)]
pub struct L6Args {
    /// Odd number of agents (config `l6.n`) [default: 80005]
    #[arg(long)]
    n: Option<usize>,
    /// Certified steps before the partition test (config `l6.t0`) [default: 8]
    #[arg(long)]
    t0: Option<usize>,
    /// Diameter (config `l6.L`) [default: 6]
    #[arg(long = "L")]
    l: Option<Num>,
    /// Placement: cell-left puts agent i at (i-1)L/n, closed at (i-1)L/(n-1) (config `l6.spacing`) [default: cell-left]
    #[arg(long)]
    spacing: Option<Spacing>,
    /// Certificate JSON (config `l6.out`) [default: cert.json]
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    arith: ArithArgs,
}

fn out_path(r: &mut Resolver, key: &str, flag: &Option<PathBuf>) -> Result<PathBuf> {
    let v = r.pick(
        key,
        flag.as_ref().map(|p| p.display().to_string()),
        "cert.json".to_string(),
    )?;
    Ok(PathBuf::from(v))
}

fn certified_arith(args: &ArithArgs, r: &mut Resolver) -> Result<Arith> {
    let arith = args.resolve(r, ArithMode::Ball)?;
    if arith.mode == ArithMode::Float {
        bail!("certificates need rational or ball arithmetic");
    }
    Ok(arith)
}

fn finish(
    cert: Certificate,
    out: &Path,
    config: std::collections::BTreeMap<String, String>,
    arith: Arith,
) -> Result<Run> {
    std::fs::write(out, cert.to_json() + "\n").with_context(|| format!("writing {}", out.display()))?;
    println!("{}: {:?}", cert.criterion, cert.verdict);
    if let Some(p) = &cert.evidence.partition {
        let [a, b, c, d, e] = p.sizes();
        println!("partition |A|={a} |B|={b} |C|={c} |D|={d} |E|={e}");
    }
    for q in &cert.evidence.inequalities {
        println!("  {:<28} {:?}  margin >= {}", q.name, q.status, q.margin_lo);
    }
    for note in &cert.evidence.notes {
        println!("  note: {note}");
    }
    println!("certificate: {}", out.display());
    let summary = json!({
        "verdict": cert.verdict,
        "partition": cert.evidence.partition,
        "points": cert.evidence.points.len(),
    });
    Ok(Run {
        config,
        arith,
        outputs: vec![out.to_path_buf()],
        verdict: Some(cert.verdict),
        exit_code: cert.verdict.exit_code(),
        summary,
    })
}

pub fn run_grid(a: &GridArgs, cfg: &Config) -> Result<Run> {
    let mut r = Resolver::new(cfg);
    let arith = certified_arith(&a.arith, &mut r)?;
    let spec = GridSpec {
        l_lo: required(r.pick_opt("grid.l_lo", a.l_lo.clone())?, "grid.l_lo", "--l-lo")?.0,
        l_hi: required(r.pick_opt("grid.l_hi", a.l_hi.clone())?, "grid.l_hi", "--l-hi")?.0,
        n: r.pick("grid.n", a.n, 10_001)?,
        eps: r.pick("grid.eps", a.eps.clone(), Num(Rational::from((5, 10_000))))?.0,
        delta: r.pick("grid.delta", a.delta.clone(), Num(Rational::from((1, 100))))?.0,
        steps: r.pick("grid.steps", a.steps, 8)?,
    };
    let out = out_path(&mut r, "grid.out", &a.out)?;
    let config = r.finish(&["grid", "arith"])?;
    let points = spec.points()?.len();
    println!("certifying {points} grid point(s) with spacing {}", spec.spacing());
    let cert = with_backend!(arith, |S, ctx| certify_grid_interval::<S>(&spec, ctx)?);
    let failing: Vec<&str> = cert
        .evidence
        .points
        .iter()
        .filter(|p| p.t.is_none())
        .map(|p| p.l.as_str())
        .collect();
    if !failing.is_empty() {
        println!(
            "{} of {points} point(s) not certified, first L = {}",
            failing.len(),
            failing[0]
        );
    }
    finish(cert, &out, config, arith)
}

pub fn run_l6(a: &L6Args, cfg: &Config) -> Result<Run> {
    let mut r = Resolver::new(cfg);
    let arith = certified_arith(&a.arith, &mut r)?;
    let n = r.pick("l6.n", a.n, 80_005)?;
    let t0 = r.pick("l6.t0", a.t0, 8)?;
    let l = r.pick("l6.L", a.l.clone(), Num(Rational::from(6)))?.0;
    let spacing = r.pick("l6.spacing", a.spacing, Spacing::CellLeft)?;
    let out = out_path(&mut r, "l6.out", &a.out)?;
    let config = r.finish(&["l6", "arith"])?;
    let cert = with_backend!(arith, |S, ctx| certify_microcluster::<S>(n, &l, t0, spacing, ctx)?);
    finish(cert, &out, config, arith)
}
