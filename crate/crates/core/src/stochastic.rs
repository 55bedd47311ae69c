//! Random initial profiles and Monte-Carlo cluster statistics.
//!
//! Trials run in plain `f64` by default; [`consensus_rate_in`] runs the
//! same draws in another backend for small-n validation. Trial `k` of a run with seed `s` draws from
//! ChaCha8 stream `k` of key `s`, so results do not depend on scheduling.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{domain, Result};
use crate::numerics::Scalar;
use crate::profile::Profile;
use crate::update::run_to_freeze;

fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

fn uniform_sorted(rng: &mut ChaCha8Rng, n: usize, l: f64) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * l).collect();
    v.sort_by(f64::total_cmp);
    v
}

/// `n` sorted uniform draws on `[0, L]`: the empirical quantile profile.
pub fn sample_uniform_profile(n: usize, l: f64, seed: u64) -> Result<Profile<f64>> {
    if n == 0 {
        return Err(domain("need at least one agent"));
    }
    if !(l.is_finite() && l >= 0.0) {
        return Err(domain("L must be finite and non-negative"));
    }
    Profile::new(uniform_sorted(&mut trial_rng(seed, 0), n, l))
}

/// `max_i max(|x_(i) - L(i-1)/n|, |x_(i) - L i/n|)`: the sup distance between
/// the empirical quantile function of sorted `x` and the linear one.
pub fn sup_distance(x: &[f64], l: f64) -> f64 {
    let n = x.len() as f64;
    x.iter()
        .enumerate()
        .map(|(k, &v)| {
            let a = l * k as f64 / n;
            let b = l * (k + 1) as f64 / n;
            (v - a).abs().max((v - b).abs())
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialOutcome {
    pub trial: u64,
    /// `None` when the freeze cap ran out.
    pub clusters: Option<usize>,
    pub freeze_t: Option<usize>,
    pub diameter_final: f64,
    pub sup_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McSummary {
    pub n: usize,
    #[serde(rename = "L")]
    pub l: f64,
    pub trials: u64,
    pub seed: u64,
    /// Cluster count to number of frozen trials.
    pub cluster_count_histogram: BTreeMap<usize, u64>,
    /// Trials that hit the freeze cap; excluded from the histogram.
    pub cap_exhausted: u64,
    pub consensus_fraction: f64,
    pub mean_freeze_t: f64,
    pub max_freeze_t: usize,
    pub mean_sup_distance: f64,
    pub max_sup_distance: f64,
    pub outcomes: Vec<TrialOutcome>,
}

impl McSummary {
    /// Most frequent cluster count, smallest on ties.
    pub fn modal_clusters(&self) -> Option<usize> {
        self.cluster_count_histogram
            .iter()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
            .map(|(&k, _)| k)
    }
}

fn run_trial<S: Scalar>(n: usize, l: f64, seed: u64, trial: u64, cap: usize, ctx: S::Ctx) -> Result<TrialOutcome> {
    let x = uniform_sorted(&mut trial_rng(seed, trial), n, l);
    let sup = sup_distance(&x, l);
    let out = run_to_freeze(&Profile::<S>::from_f64s(&x, ctx)?, cap);
    let clusters = out.state.clusters();
    if out.frozen && !clusters.frozen {
        return Err(crate::HkError::CertificationFailure(format!(
            "trial {trial}: frozen state has clusters within distance 1"
        )));
    }
    Ok(TrialOutcome {
        trial,
        clusters: out.frozen.then_some(clusters.len()),
        freeze_t: out.frozen.then_some(out.t),
        diameter_final: out.state.diameter().hi_f64(),
        sup_distance: sup,
    })
}

/// Runs `trials` independent uniform profiles to freezing (at most
/// `freeze_cap` updates each) on the current rayon pool.
pub fn consensus_rate(n: usize, l: f64, trials: u64, seed: u64, freeze_cap: usize) -> Result<McSummary> {
    consensus_rate_in::<f64>(n, l, trials, seed, freeze_cap, ())
}

/// [`consensus_rate`] in backend `S`. The draws are the same doubles; only
/// the dynamics change arithmetic.
pub fn consensus_rate_in<S: Scalar>(
    n: usize,
    l: f64,
    trials: u64,
    seed: u64,
    freeze_cap: usize,
    ctx: S::Ctx,
) -> Result<McSummary> {
    if trials == 0 {
        return Err(domain("need at least one trial"));
    }
    sample_uniform_profile(n, l, seed)?;
    let outcomes: Vec<TrialOutcome> = (0..trials)
        .into_par_iter()
        .map(|k| run_trial::<S>(n, l, seed, k, freeze_cap, ctx))
        .collect::<Result<_>>()?;

    let mut histogram = BTreeMap::new();
    let mut exhausted = 0;
    let (mut t_sum, mut t_max) = (0usize, 0usize);
    for o in &outcomes {
        match (o.clusters, o.freeze_t) {
            (Some(c), Some(t)) => {
                *histogram.entry(c).or_insert(0) += 1;
                t_sum += t;
                t_max = t_max.max(t);
            }
            _ => exhausted += 1,
        }
    }
    let frozen = trials - exhausted;
    let sups: Vec<f64> = outcomes.iter().map(|o| o.sup_distance).collect();
    Ok(McSummary {
        n,
        l,
        trials,
        seed,
        consensus_fraction: *histogram.get(&1).unwrap_or(&0) as f64 / trials as f64,
        cluster_count_histogram: histogram,
        cap_exhausted: exhausted,
        mean_freeze_t: if frozen > 0 {
            t_sum as f64 / frozen as f64
        } else {
            f64::NAN
        },
        max_freeze_t: t_max,
        mean_sup_distance: sups.iter().sum::<f64>() / trials as f64,
        max_sup_distance: sups.iter().copied().fold(0.0, f64::max),
        outcomes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_width_is_constant() {
        let f = sample_uniform_profile(17, 0.0, 3).unwrap();
        assert!(f.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn seeds_replay() {
        let a = sample_uniform_profile(100, 4.0, 9).unwrap();
        let b = sample_uniform_profile(100, 4.0, 9).unwrap();
        let c = sample_uniform_profile(100, 4.0, 10).unwrap();
        assert_eq!(a.values(), b.values());
        assert_ne!(a.values(), c.values());
        assert!(a.values().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn results_do_not_depend_on_thread_count() {
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| consensus_rate(300, 3.0, 12, 5, 10_000).unwrap())
        };
        assert_eq!(run(1), run(3));
    }

    #[test]
    fn narrow_profiles_reach_consensus_in_one_step() {
        let s = consensus_rate(500, 0.5, 20, 1, 100).unwrap();
        assert_eq!(s.consensus_fraction, 1.0);
        assert_eq!(s.max_freeze_t, 1);
        assert_eq!(
            s.cluster_count_histogram.values().sum::<u64>() + s.cap_exhausted,
            s.trials
        );
    }

    #[test]
    fn cap_exhaustion_is_reported() {
        let s = consensus_rate(200, 3.0, 4, 2, 1).unwrap();
        assert_eq!(s.cap_exhausted, 4);
        assert!(s.cluster_count_histogram.is_empty());
        assert_eq!(s.consensus_fraction, 0.0);
    }

    #[test]
    fn rational_trials_agree_with_float_on_easy_cases() {
        let a = consensus_rate(60, 1.5, 6, 4, 1000).unwrap();
        let b = consensus_rate_in::<crate::Exact>(60, 1.5, 6, 4, 1000, ()).unwrap();
        assert_eq!(a.cluster_count_histogram, b.cluster_count_histogram);
        assert_eq!(a.max_sup_distance, b.max_sup_distance);
    }

    #[test]
    fn sup_distance_examples() {
        assert_eq!(sup_distance(&[0.0], 1.0), 1.0);
        assert!((sup_distance(&[0.25, 0.75], 1.0) - 0.25).abs() < 1e-15);
    }
}
