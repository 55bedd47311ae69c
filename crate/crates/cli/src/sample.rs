use std::fs::File;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;

use hk_core::stochastic::consensus_rate_in;
use hk_core::ArithMode;

use crate::config::{Config, Resolver};
use crate::{required, with_backend, ArithArgs, Run};

#[derive(Args, Debug, Default)]
pub struct SampleArgs {
    /// Agents per trial (config `sample.n`) [default: 20000]
    #[arg(long)]
    n: Option<usize>,
    /// Opinions are drawn uniformly from [0, L] (config `sample.L`)
    #[arg(long = "L")]
    l: Option<f64>,
    /// Number of trials (config `sample.trials`) [default: 20]
    #[arg(long)]
    trials: Option<u64>,
    /// Trial k uses stream k of this seed (config `sample.seed`) [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Updates allowed before a trial counts as unfrozen (config `sample.freeze_cap`) [default: 10000]
    #[arg(long)]
    freeze_cap: Option<usize>,
    /// Per-trial CSV `trial,clusters,freeze_t,diameter_final` (config `sample.out`) [default: mc.csv]
    #[arg(long)]
    out: Option<PathBuf>,
    // float by default; rational replays the same draws exactly, for small n
    #[command(flatten)]
    arith: ArithArgs,
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn run(a: &SampleArgs, cfg: &Config) -> Result<Run> {
    let mut r = Resolver::new(cfg);
    let arith = a.arith.resolve(&mut r, ArithMode::Float)?;
    let n = r.pick("sample.n", a.n, 20_000)?;
    let l = required(r.pick_opt("sample.L", a.l)?, "sample.L", "--L")?;
    let trials = r.pick("sample.trials", a.trials, 20)?;
    let seed = r.pick("sample.seed", a.seed, 0)?;
    let cap = r.pick("sample.freeze_cap", a.freeze_cap, 10_000)?;
    let out = PathBuf::from(r.pick(
        "sample.out",
        a.out.as_ref().map(|p| p.display().to_string()),
        "mc.csv".into(),
    )?);
    let config = r.finish(&["sample", "arith"])?;
    if !l.is_finite() || l < 0.0 {
        bail!("L must be finite and non-negative");
    }

    let s = with_backend!(arith, |S, ctx| consensus_rate_in::<S>(n, l, trials, seed, cap, ctx)?);
    let mut w = csv::Writer::from_writer(File::create(&out).with_context(|| format!("creating {}", out.display()))?);
    w.write_record(["trial", "clusters", "freeze_t", "diameter_final"])?;
    for o in &s.outcomes {
        w.write_record([
            o.trial.to_string(),
            opt(o.clusters),
            opt(o.freeze_t),
            format!("{:?}", o.diameter_final),
        ])?;
    }
    w.flush()?;

    println!("n = {n}, L = {l}, {trials} trial(s), seed {seed}");
    println!("cluster counts: {:?}", s.cluster_count_histogram);
    println!(
        "consensus fraction {}, modal cluster count {}",
        s.consensus_fraction,
        opt(s.modal_clusters())
    );
    if s.cap_exhausted > 0 {
        println!("{} trial(s) hit the freeze cap", s.cap_exhausted);
    }
    println!("per-trial results: {}", out.display());

    let mut summary = serde_json::to_value(&s)?;
    if let Some(m) = summary.as_object_mut() {
        m.remove("outcomes");
        m.insert("modal_clusters".into(), serde_json::json!(s.modal_clusters()));
    }
    Ok(Run {
        config,
        arith,
        outputs: vec![out],
        verdict: None,
        exit_code: 0,
        summary,
    })
}
