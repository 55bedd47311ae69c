use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rug::Rational;
use serde::Serialize;

use hk_core::certify::Arith;
use hk_core::profile::equally_spaced;
use hk_core::update::{closed_form_update, evolve, update, update_naive};
use hk_core::{ArithMode, Exact, Profile};

use crate::config::{Config, Resolver};
use crate::Run;

#[derive(Args, Debug, Default)]
pub struct OracleArgs {
    /// Largest random profile (config `oracle.n_max`) [default: 200]
    #[arg(long)]
    n_max: Option<usize>,
    /// Random profiles to compare (config `oracle.trials`) [default: 1000]
    #[arg(long)]
    trials: Option<u64>,
    /// (config `oracle.seed`) [default: 7]
    #[arg(long)]
    seed: Option<u64>,
    /// Report JSON (config `oracle.out`) [default: oracle.json]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
struct Mismatch {
    case: String,
    agent: usize,
    expected: String,
    got: String,
}

#[derive(Debug, Serialize)]
struct Report {
    random_profiles: u64,
    largest_profile: usize,
    update_mismatches: usize,
    closed_form_values: usize,
    closed_form_mismatches: usize,
    /// At most 20 of each kind.
    examples: Vec<Mismatch>,
}

/// Sorted rationals on a coarse grid, so that exact unit gaps and ties are
/// common.
fn random_profile(rng: &mut ChaCha8Rng, n_max: usize) -> Vec<Rational> {
    let n = rng.gen_range(1..=n_max);
    let den = rng.gen_range(1..=12i64);
    let spread = rng.gen_range(1..=(n as i64 / 4).max(2));
    let mut v: Vec<Rational> = (0..n)
        .map(|_| Rational::from((rng.gen_range(0..=spread * den), den)))
        .collect();
    v.sort();
    v
}

fn compare(case: &str, expected: &[Rational], got: &Profile<Exact>) -> Vec<Mismatch> {
    expected
        .iter()
        .zip(got.values())
        .enumerate()
        .filter(|(_, (e, g))| *e != g.value())
        .map(|(i, (e, g))| Mismatch {
            case: case.to_string(),
            agent: i + 1,
            expected: e.to_string(),
            got: g.value().to_string(),
        })
        .collect()
}

fn random_trial(seed: u64, trial: u64, n_max: usize) -> Result<(usize, Vec<Mismatch>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    let v = random_profile(&mut rng, n_max);
    let f = Profile::<Exact>::from_rationals(&v, ())?;
    let naive: Vec<Rational> = update_naive(&f).values().iter().map(|x| x.value().clone()).collect();
    Ok((
        v.len(),
        compare(&format!("random profile {trial}"), &naive, &update(&f)),
    ))
}

fn closed_form_case(n: usize, l: &Rational) -> Result<(usize, Vec<Mismatch>)> {
    let f = equally_spaced::<Exact>(n, l, ())?;
    let traj = evolve(&f, 2, None);
    let mut count = 0;
    let mut bad = Vec::new();
    for t in 1..=2 {
        let expected = (1..=n)
            .map(|i| closed_form_update(n, l, t, i))
            .collect::<Result<Vec<_>, _>>()?;
        // a frozen start stays put
        let state = traj.states.get(t).unwrap_or_else(|| traj.last());
        count += n;
        bad.extend(compare(&format!("n = {n}, L = {l}, t = {t}"), &expected, state));
    }
    Ok((count, bad))
}

pub fn run(a: &OracleArgs, cfg: &Config) -> Result<Run> {
    let mut r = Resolver::new(cfg);
    let n_max = r.pick("oracle.n_max", a.n_max, 200)?;
    let trials = r.pick("oracle.trials", a.trials, 1000)?;
    let seed = r.pick("oracle.seed", a.seed, 7)?;
    let out = PathBuf::from(r.pick(
        "oracle.out",
        a.out.as_ref().map(|p| p.display().to_string()),
        "oracle.json".into(),
    )?);
    let config = r.finish(&["oracle"])?;
    if n_max == 0 {
        bail!("--n-max must be positive");
    }

    let random: Vec<(usize, Vec<Mismatch>)> = (0..trials)
        .into_par_iter()
        .map(|k| random_trial(seed, k, n_max))
        .collect::<Result<_>>()?;
    let diameters = [Rational::from((3, 2)), Rational::from(3), Rational::from(6)];
    let cases: Vec<(usize, Rational)> = (5..=101)
        .step_by(2)
        .flat_map(|n| diameters.iter().map(move |l| (n, l.clone())))
        .collect();
    let closed: Vec<(usize, Vec<Mismatch>)> = cases
        .par_iter()
        .map(|(n, l)| closed_form_case(*n, l))
        .collect::<Result<_>>()?;

    let update_bad: Vec<Mismatch> = random.iter().flat_map(|(_, m)| m.iter()).cloned().collect();
    let closed_bad: Vec<Mismatch> = closed.iter().flat_map(|(_, m)| m.iter()).cloned().collect();
    let report = Report {
        random_profiles: trials,
        largest_profile: random.iter().map(|(n, _)| *n).max().unwrap_or(0),
        update_mismatches: update_bad.len(),
        closed_form_values: closed.iter().map(|(c, _)| c).sum(),
        closed_form_mismatches: closed_bad.len(),
        examples: update_bad
            .into_iter()
            .take(20)
            .chain(closed_bad.into_iter().take(20))
            .collect(),
    };
    std::fs::write(&out, serde_json::to_string_pretty(&report)? + "\n")
        .with_context(|| format!("writing {}", out.display()))?;

    let agree = report.update_mismatches == 0 && report.closed_form_mismatches == 0;
    println!(
        "fast vs naive: {} profile(s) up to n = {}, {} mismatching value(s)",
        report.random_profiles, report.largest_profile, report.update_mismatches
    );
    println!(
        "closed forms: {} value(s), {} mismatching",
        report.closed_form_values, report.closed_form_mismatches
    );
    println!(
        "{}; report: {}",
        if agree { "all oracles agree" } else { "ORACLES DISAGREE" },
        out.display()
    );
    Ok(Run {
        config,
        arith: Arith {
            mode: ArithMode::Rational,
            bits: None,
        },
        outputs: vec![out],
        verdict: None,
        exit_code: if agree { 0 } else { 3 },
        summary: serde_json::to_value(&report)?,
    })
}
