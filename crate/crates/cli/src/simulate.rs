use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use serde_json::json;

use hk_core::deviation::{envelope_evolve_with, DeviationEnvelope};
use hk_core::numerics::{check_size_guard, parse_rational};
use hk_core::profile::equally_spaced_with;
use hk_core::update::{is_frozen, neighborhoods, update_with};
use hk_core::{ArithMode, Profile, Scalar, Spacing};

use crate::config::{Config, Resolver};
use crate::{required, with_backend, ArithArgs, Num, Run};

#[derive(Args, Debug, Default)]
pub struct SimulateArgs {
    /// Number of agents of the equally spaced start (config `simulate.n`)
    #[arg(long)]
    n: Option<usize>,
    /// Diameter of the equally spaced start (config `simulate.L`)
    #[arg(long = "L")]
    l: Option<Num>,
    /// Placement for --n/--L: closed or cell-left (config `simulate.spacing`) [default: closed]
    #[arg(long)]
    spacing: Option<Spacing>,
    /// Explicit sorted opinions, comma separated; overrides --L (config `simulate.opinions`)
    #[arg(long)]
    opinions: Option<String>,
    /// Start profile as `index,opinion_lo,opinion_hi` CSV (config `simulate.profile`)
    #[arg(long)]
    profile: Option<PathBuf>,
    /// Maximum number of updates (config `simulate.steps`) [default: 10]
    #[arg(long)]
    steps: Option<usize>,
    /// Stop after this many updates even if --steps is larger (config `simulate.freeze_cap`) [default: 10000]
    #[arg(long)]
    freeze_cap: Option<usize>,
    /// Trajectory CSV `t,i,opinion_lo,opinion_hi` (config `simulate.out`) [default: traj.csv]
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also propagate deviation envelopes and write `t,i,e_l,e_r` here (config `simulate.envelope`)
    #[arg(long)]
    envelope: Option<PathBuf>,
    /// Height of the tent envelope the propagation starts from (config `simulate.eps`) [default: 0]
    #[arg(long)]
    eps: Option<Num>,
    /// Rational mode: fail once a denominator exceeds this many bits (config `simulate.max_denominator_bits`) [default: 1048576]
    #[arg(long)]
    max_denominator_bits: Option<u32>,
    #[command(flatten)]
    arith: ArithArgs,
}

enum Start {
    Values(Vec<rug::Rational>),
    Csv(PathBuf),
    Spaced(usize, rug::Rational, Spacing),
}

struct Settings {
    start: Start,
    steps: usize,
    cap: usize,
    out: PathBuf,
    envelope: Option<(PathBuf, rug::Rational)>,
    guard: Option<u32>,
}

struct Trace<S: Scalar> {
    states: Vec<Profile<S>>,
    envs: Vec<DeviationEnvelope<S>>,
    frozen_at: Option<usize>,
    note: Option<String>,
}

pub fn run(a: &SimulateArgs, cfg: &Config) -> Result<Run> {
    let mut r = Resolver::new(cfg);
    let arith = a.arith.resolve(&mut r, ArithMode::Ball)?;
    let opinions = r.pick_opt("simulate.opinions", a.opinions.clone())?;
    let profile = r.pick_opt("simulate.profile", a.profile.as_ref().map(|p| p.display().to_string()))?;
    let n = r.pick_opt("simulate.n", a.n)?;
    let start = match (opinions, profile) {
        (Some(_), Some(_)) => bail!("give either --opinions or --profile, not both"),
        (Some(text), None) => {
            let v = text
                .split(',')
                .map(parse_rational)
                .collect::<Result<Vec<_>, _>>()
                .context("in --opinions")?;
            if n.is_some_and(|n| n != v.len()) {
                bail!("--n = {} but {} opinions were given", n.unwrap_or(0), v.len());
            }
            Start::Values(v)
        }
        (None, Some(p)) => Start::Csv(PathBuf::from(p)),
        (None, None) => {
            let n = required(n, "simulate.n", "--n")?;
            let l = required(r.pick_opt("simulate.L", a.l.clone())?, "simulate.L", "--L")?;
            let spacing = r.pick("simulate.spacing", a.spacing, Spacing::Closed)?;
            Start::Spaced(n, l.0, spacing)
        }
    };
    let steps = r.pick("simulate.steps", a.steps, 10)?;
    let cap = r.pick("simulate.freeze_cap", a.freeze_cap, 10_000)?;
    let out = PathBuf::from(r.pick(
        "simulate.out",
        a.out.as_ref().map(|p| p.display().to_string()),
        "traj.csv".into(),
    )?);
    let envelope = match r.pick_opt(
        "simulate.envelope",
        a.envelope.as_ref().map(|p| p.display().to_string()),
    )? {
        Some(p) => Some((
            PathBuf::from(p),
            r.pick("simulate.eps", a.eps.clone(), Num(0.into()))?.0,
        )),
        None => None,
    };
    let guard = match arith.mode {
        ArithMode::Rational => Some(r.pick("simulate.max_denominator_bits", a.max_denominator_bits, 1 << 20)?),
        _ => None,
    };
    let config = r.finish(&["simulate", "arith"])?;
    let s = Settings {
        start,
        steps,
        cap,
        out,
        envelope,
        guard,
    };

    let summary = with_backend!(arith, |S, ctx| simulate::<S>(&s, ctx)?);
    let mut outputs = vec![s.out.clone()];
    outputs.extend(s.envelope.as_ref().map(|(p, _)| p.clone()));
    Ok(Run {
        config,
        arith,
        outputs,
        verdict: None,
        exit_code: 0,
        summary,
    })
}

fn start_profile<S: Scalar>(start: &Start, ctx: S::Ctx) -> Result<Profile<S>> {
    Ok(match start {
        Start::Values(v) => Profile::from_rationals(v, ctx)?,
        Start::Csv(p) => {
            let file = File::open(p).with_context(|| format!("opening {}", p.display()))?;
            Profile::read_csv(file, ctx).with_context(|| format!("reading {}", p.display()))?
        }
        Start::Spaced(n, l, spacing) => equally_spaced_with(*n, l, *spacing, ctx)?,
    })
}

fn trace<S: Scalar>(f0: Profile<S>, s: &Settings, ctx: S::Ctx) -> Result<Trace<S>> {
    let limit = s.steps.min(s.cap);
    let mut tr = Trace {
        states: Vec::new(),
        envs: Vec::new(),
        frozen_at: None,
        note: None,
    };
    let mut guard_err = None;
    let mut frozen = |f: &Profile<S>, t: usize| -> bool {
        if let Err(e) = check_size_guard(f.values(), s.guard) {
            guard_err = Some(e);
            return true;
        }
        let stop = is_frozen(f, &neighborhoods(f));
        if stop {
            tr.frozen_at = Some(t);
        }
        stop || t == limit
    };

    if let Some((_, eps)) = &s.envelope {
        let env0 = DeviationEnvelope::<S>::tent(f0.n(), eps, ctx);
        let mut states = Vec::new();
        let mut envs = Vec::new();
        let res = envelope_evolve_with(&f0, &env0, limit, |step| {
            states.push(step.profile.clone());
            envs.push(step.env.clone());
            !frozen(&step.profile, step.t)
        });
        if let Err(e) = res {
            tr.note = Some(format!(
                "envelope propagation stopped after t = {}: {e}",
                states.len() - 1
            ));
        }
        tr.states = states;
        tr.envs = envs;
    } else {
        let mut cur = f0;
        for t in 0.. {
            let stop = frozen(&cur, t);
            let next = (!stop).then(|| update_with(&cur, &neighborhoods(&cur)));
            tr.states.push(cur);
            match next {
                Some(n) => cur = n,
                None => break,
            }
        }
    }
    if let Some(e) = guard_err {
        return Err(e.into());
    }
    Ok(tr)
}

fn simulate<S: Scalar>(s: &Settings, ctx: S::Ctx) -> Result<serde_json::Value> {
    let f0 = start_profile::<S>(&s.start, ctx)?;
    let tr = trace(f0, s, ctx)?;

    let mut w = BufWriter::new(File::create(&s.out).with_context(|| format!("creating {}", s.out.display()))?);
    writeln!(w, "t,i,opinion_lo,opinion_hi")?;
    for (t, f) in tr.states.iter().enumerate() {
        for (i, v) in f.values().iter().enumerate() {
            writeln!(w, "{t},{},{},{}", i + 1, v.format_lo(), v.format_hi())?;
        }
    }
    w.flush()?;
    if let Some((path, _)) = &s.envelope {
        let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
        writeln!(w, "t,i,e_l,e_r")?;
        for (t, env) in tr.envs.iter().enumerate() {
            for i in 0..env.n() {
                writeln!(w, "{t},{},{},{}", i + 1, env.e_l[i].format_hi(), env.e_r[i].format_hi())?;
            }
        }
        w.flush()?;
    }

    let last = tr.states.last().expect("trajectory has a start");
    let clusters = last.clusters();
    let diameter = last.diameter();
    println!(
        "n = {}, steps = {}, {}",
        last.n(),
        tr.states.len() - 1,
        match tr.frozen_at {
            Some(t) => format!("frozen at t = {t}"),
            None => "not frozen".to_string(),
        }
    );
    println!(
        "final: {} cluster(s), diameter in [{}, {}]",
        clusters.len(),
        diameter.format_lo(),
        diameter.format_hi()
    );
    if let Some(note) = &tr.note {
        println!("note: {note}");
    }
    println!("trajectory: {}", s.out.display());
    Ok(json!({
        "n": last.n(),
        "steps": tr.states.len() - 1,
        "frozen_at": tr.frozen_at,
        "clusters": clusters.len(),
        "diameter": [diameter.format_lo(), diameter.format_hi()],
        "note": tr.note,
    }))
}
