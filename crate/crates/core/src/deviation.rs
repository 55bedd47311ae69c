//! Deviation envelopes under profile refinement.
//!
//! An envelope `(e_l, e_r)` around a profile `f` at time `t` bounds, for every
//! regular refinement `g` of the starting profile, how far the coarsening of
//! `U^t g` may lie below (`e_l`) or above (`e_r`) `U^t f`.
//!
//! One propagation step needs, per agent `i`, the four arrow sets: agents
//! that may join the neighbourhood on the right (`right_add`), leave it on
//! the left (`right_remove`), and the mirrored pair for the lower bound.
//! Membership is tested on the keys `f(j) - e_l(j)` and `f(j) + e_r(j)`:
//!
//! * right_add:    `j > i` outside the window, `f(j) - e_l(j) <= f(i) + 1 + e_r(i)`
//! * right_remove: `j < i` inside the window, `f(j) - e_l(j) <  f(i) - 1 + e_r(i)`
//! * left_add:     `j < i` outside the window, `f(j) + e_r(j) >= f(i) - 1 - e_l(i)`
//! * left_remove:  `j > i` inside the window, `f(j) + e_r(j) >  f(i) + 1 - e_l(i)`
//!
//! Undecided memberships count as members, and agents whose own window
//! membership is undecided are put in every set that could contain them;
//! both choices only enlarge the bounds.
//!
//! Two routes compute the sets: [`arrow_sets`] scans candidate ranges and
//! lists members explicitly, [`propagate`] counts and sums them offline with
//! Fenwick trees in O(n log n).

use std::cmp::Reverse;

use rayon::prelude::*;
use rug::Rational;

use crate::error::{domain, HkError, Result};
use crate::numerics::Scalar;
use crate::profile::Profile;
use crate::update::{neighborhoods, prefix_sums, range_sum, update_with, NeighborhoodIndex};

const PAR_THRESHOLD: usize = 4096;

#[derive(Debug, Clone)]
pub struct DeviationEnvelope<S: Scalar> {
    pub e_l: Vec<S>,
    pub e_r: Vec<S>,
}

impl<S: Scalar> DeviationEnvelope<S> {
    pub fn new(e_l: Vec<S>, e_r: Vec<S>) -> Result<Self> {
        if e_l.len() != e_r.len() || e_l.is_empty() {
            return Err(domain("envelope sides must have the same positive length"));
        }
        if e_l.iter().chain(&e_r).any(|e| !e.is_nonneg()) {
            return Err(domain("envelope entries must be non-negative"));
        }
        Ok(DeviationEnvelope { e_l, e_r })
    }

    pub fn zero(n: usize, ctx: S::Ctx) -> Self {
        DeviationEnvelope {
            e_l: vec![S::zero(ctx); n],
            e_r: vec![S::zero(ctx); n],
        }
    }

    /// Tent seed: `e_r(i) = max(0, 2i-n-1)/(n+1) eps`, `e_l(i) = max(0, n+1-2i)/(n+1) eps`.
    pub fn tent(n: usize, eps: &Rational, ctx: S::Ctx) -> Self {
        let n1 = (n + 1) as i64;
        let side = |m: i64| S::from_rational(&(Rational::from((m.max(0), n1)) * eps), ctx);
        DeviationEnvelope {
            e_l: (1..=n as i64).map(|i| side(n1 - 2 * i)).collect(),
            e_r: (1..=n as i64).map(|i| side(2 * i - n1)).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.e_l.len()
    }

    /// `e_l(i)`, 1-based.
    pub fn el(&self, i: usize) -> &S {
        &self.e_l[i - 1]
    }

    /// `e_r(i)`, 1-based.
    pub fn er(&self, i: usize) -> &S {
        &self.e_r[i - 1]
    }

    /// Whether `g` lies inside `[f - e_l, f + e_r]` for every agent.
    pub fn encloses(&self, f: &Profile<S>, g: &Profile<S>) -> bool {
        f.values().iter().zip(g.values()).enumerate().all(|(k, (fv, gv))| {
            let d = gv.sub(fv);
            !d.certainly_lt(&self.e_l[k].neg()) && !d.certainly_gt(&self.e_r[k])
        })
    }
}

impl DeviationEnvelope<crate::numerics::Exact> {
    pub fn to_backend<T: Scalar>(&self, ctx: T::Ctx) -> DeviationEnvelope<T> {
        let conv = |v: &[crate::numerics::Exact]| v.iter().map(|e| T::from_rational(e.value(), ctx)).collect();
        DeviationEnvelope {
            e_l: conv(&self.e_l),
            e_r: conv(&self.e_r),
        }
    }
}

/// Explicit arrow sets, 1-based agent indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArrowSets {
    pub right_add: Vec<Vec<usize>>,
    pub right_remove: Vec<Vec<usize>>,
    pub left_add: Vec<Vec<usize>>,
    pub left_remove: Vec<Vec<usize>>,
    /// Guaranteed neighbour count in the perturbed profile.
    pub n_i: Vec<i64>,
}

/// `2 / #N_i(f)` per agent (certain window size for enclosures).
pub fn ghost_bound<S: Scalar>(f: &Profile<S>) -> Vec<S> {
    let idx = neighborhoods(f);
    let two = S::from_i64(2, f.ctx());
    (0..f.n()).map(|k| two.div_count(idx.certain_len(k))).collect()
}

struct Thresholds<S: Scalar> {
    /// `(f(i) + 1 + e_r(i)).hi`
    right_add: Vec<S::Bound>,
    /// `(f(i) - 1 + e_r(i)).hi`
    right_remove: Vec<S::Bound>,
    /// `(f(i) - 1 - e_l(i)).lo`
    left_add: Vec<S::Bound>,
    /// `(f(i) + 1 - e_l(i)).lo`
    left_remove: Vec<S::Bound>,
}

fn thresholds<S: Scalar>(f: &Profile<S>, env: &DeviationEnvelope<S>) -> Thresholds<S> {
    let one = S::one(f.ctx());
    let v = f.values();
    let mut th = Thresholds {
        right_add: Vec::with_capacity(v.len()),
        right_remove: Vec::with_capacity(v.len()),
        left_add: Vec::with_capacity(v.len()),
        left_remove: Vec::with_capacity(v.len()),
    };
    for (k, x) in v.iter().enumerate() {
        let up = x.add(&one);
        let down = x.sub(&one);
        th.right_add.push(up.add(&env.e_r[k]).hi());
        th.right_remove.push(down.add(&env.e_r[k]).hi());
        th.left_add.push(down.sub(&env.e_l[k]).lo());
        th.left_remove.push(up.sub(&env.e_l[k]).lo());
    }
    th
}

/// Per-agent counts and sums feeding the bound formulas.
#[derive(Debug, Clone)]
pub(crate) struct SetTotals<S: Scalar> {
    pub right_add: usize,
    pub right_remove: usize,
    /// Sum of `f + e_r` over `right_remove`.
    pub right_remove_sum: S,
    pub left_add: usize,
    pub left_remove: usize,
    /// Sum of `f - e_l` over `left_remove`.
    pub left_remove_sum: S,
    pub n_i: i64,
}

fn check_inputs<S: Scalar>(f: &Profile<S>, env: &DeviationEnvelope<S>) -> Result<()> {
    if env.n() != f.n() {
        return Err(domain(format!(
            "envelope has {} agents, profile has {}",
            env.n(),
            f.n()
        )));
    }
    Ok(())
}

/// Scanning route.
pub fn arrow_sets<S: Scalar>(f: &Profile<S>, env: &DeviationEnvelope<S>) -> Result<ArrowSets> {
    check_inputs(f, env)?;
    let idx = neighborhoods(f);
    Ok(scan_sets(f, env, &idx))
}

fn scan_sets<S: Scalar>(f: &Profile<S>, env: &DeviationEnvelope<S>, idx: &NeighborhoodIndex) -> ArrowSets {
    let v = f.values();
    let n = v.len();
    let ctx = f.ctx();
    let th = thresholds(f, env);
    let zero = S::zero(ctx);
    let max_el = env.e_l.iter().fold(zero.clone(), |m, e| m.max(e)).upper();
    let max_er = env.e_r.iter().fold(zero, |m, e| m.max(e)).upper();
    let key_plus = |j: usize| v[j].sub(&env.e_l[j]).lo();
    let key_minus = |j: usize| v[j].add(&env.e_r[j]).hi();
    // lower bound for key_plus over j' >= j; upper bound for key_minus over j' <= j
    let floor_plus = |j: usize| v[j].lower().sub(&max_el).lo();
    let ceil_minus = |j: usize| v[j].upper().add(&max_er).hi();

    let mut out = ArrowSets {
        right_add: vec![Vec::new(); n],
        right_remove: vec![Vec::new(); n],
        left_add: vec![Vec::new(); n],
        left_remove: vec![Vec::new(); n],
        n_i: vec![0; n],
    };
    for i in 0..n {
        let (lc, rc, lp, rp) = (idx.lc[i], idx.rc[i], idx.lp[i], idx.rp[i]);

        let mut ra: Vec<usize> = (rc + 1..=rp).collect();
        let mut j = rp + 1;
        while j < n && floor_plus(j) <= th.right_add[i] {
            if key_plus(j) <= th.right_add[i] {
                ra.push(j);
            }
            j += 1;
        }

        let mut rr: Vec<usize> = (lp..lc).collect();
        let mut tested_rr = 0;
        let mut j = lc;
        while j < i && floor_plus(j) < th.right_remove[i] {
            if key_plus(j) < th.right_remove[i] {
                rr.push(j);
                tested_rr += 1;
            }
            j += 1;
        }

        let mut la: Vec<usize> = (lp..lc).collect();
        let mut j = lp;
        while j > 0 && ceil_minus(j - 1) >= th.left_add[i] {
            if key_minus(j - 1) >= th.left_add[i] {
                la.push(j - 1);
            }
            j -= 1;
        }

        let mut lr: Vec<usize> = (rc + 1..=rp).collect();
        let mut tested_lr = 0;
        let mut j = rc;
        while j > i && ceil_minus(j) > th.left_remove[i] {
            if key_minus(j) > th.left_remove[i] {
                lr.push(j);
                tested_lr += 1;
            }
            j -= 1;
        }

        let one_based = |mut s: Vec<usize>| {
            s.sort_unstable();
            s.into_iter().map(|j| j + 1).collect::<Vec<_>>()
        };
        out.n_i[i] = idx.certain_len(i) as i64 - tested_rr - tested_lr;
        out.right_add[i] = one_based(ra);
        out.right_remove[i] = one_based(rr);
        out.left_add[i] = one_based(la);
        out.left_remove[i] = one_based(lr);
    }
    out
}

fn totals_from_sets<S: Scalar>(f: &Profile<S>, env: &DeviationEnvelope<S>, sets: &ArrowSets) -> Vec<SetTotals<S>> {
    let v = f.values();
    let ctx = f.ctx();
    (0..f.n())
        .map(|i| {
            let mut rsum = S::zero(ctx);
            for &j in &sets.right_remove[i] {
                rsum = rsum.add(&v[j - 1].add(&env.e_r[j - 1]));
            }
            let mut lsum = S::zero(ctx);
            for &j in &sets.left_remove[i] {
                lsum = lsum.add(&v[j - 1].sub(&env.e_l[j - 1]));
            }
            SetTotals {
                right_add: sets.right_add[i].len(),
                right_remove: sets.right_remove[i].len(),
                right_remove_sum: rsum,
                left_add: sets.left_add[i].len(),
                left_remove: sets.left_remove[i].len(),
                left_remove_sum: lsum,
                n_i: sets.n_i[i],
            }
        })
        .collect()
}

/// Counts (and sums) over index ranges, in a Fenwick tree.
struct Fenwick<S: Scalar> {
    count: Vec<usize>,
    sum: Option<Vec<S>>,
}

impl<S: Scalar> Fenwick<S> {
    fn new(n: usize, with_sums: bool, ctx: S::Ctx) -> Self {
        Fenwick {
            count: vec![0; n + 1],
            sum: with_sums.then(|| vec![S::zero(ctx); n + 1]),
        }
    }

    fn insert(&mut self, pos: usize, value: Option<&S>) {
        let mut k = pos + 1;
        while k < self.count.len() {
            self.count[k] += 1;
            if let (Some(sum), Some(v)) = (self.sum.as_mut(), value) {
                sum[k] = sum[k].add(v);
            }
            k += k & k.wrapping_neg();
        }
    }

    /// Count and sum over positions `< end`.
    fn prefix(&self, end: usize, ctx: S::Ctx) -> (usize, Option<S>) {
        let mut k = end;
        let mut c = 0;
        let mut s = self.sum.as_ref().map(|_| S::zero(ctx));
        while k > 0 {
            c += self.count[k];
            if let (Some(acc), Some(sum)) = (s.as_mut(), self.sum.as_ref()) {
                *acc = acc.add(&sum[k]);
            }
            k &= k - 1;
        }
        (c, s)
    }
}

struct RangeQuery<K> {
    threshold: K,
    /// 0-based inclusive range; empty when `lo > hi`.
    lo: usize,
    hi: usize,
}

/// For every query, the number of `j` in its range with `keys[j] <= threshold`
/// (`<` when `strict`), plus the sum of `values[j]` over them when given.
fn offline_counts<K: Ord, S: Scalar>(
    keys: &[K],
    queries: &[RangeQuery<K>],
    strict: bool,
    values: Option<&[S]>,
    ctx: S::Ctx,
) -> Vec<(usize, Option<S>)> {
    let n = keys.len();
    let mut elems: Vec<usize> = (0..n).collect();
    elems.sort_by(|&a, &b| keys[a].cmp(&keys[b]));
    let mut order: Vec<usize> = (0..queries.len()).collect();
    order.sort_by(|&a, &b| queries[a].threshold.cmp(&queries[b].threshold));

    let mut tree = Fenwick::<S>::new(n, values.is_some(), ctx);
    let mut out: Vec<(usize, Option<S>)> = vec![(0, None); queries.len()];
    let mut next = 0;
    for q in order {
        let query = &queries[q];
        while next < n {
            let key = &keys[elems[next]];
            let admitted = if strict {
                *key < query.threshold
            } else {
                *key <= query.threshold
            };
            if !admitted {
                break;
            }
            tree.insert(elems[next], values.map(|v| &v[elems[next]]));
            next += 1;
        }
        if query.lo > query.hi {
            out[q] = (0, values.map(|_| S::zero(ctx)));
            continue;
        }
        let (c_hi, s_hi) = tree.prefix(query.hi + 1, ctx);
        let (c_lo, s_lo) = tree.prefix(query.lo, ctx);
        let sum = match (s_hi, s_lo) {
            (Some(a), Some(b)) => Some(a.sub(&b)),
            _ => None,
        };
        out[q] = (c_hi - c_lo, sum);
    }
    out
}

/// Fenwick route.
fn fenwick_totals<S: Scalar>(f: &Profile<S>, env: &DeviationEnvelope<S>, idx: &NeighborhoodIndex) -> Vec<SetTotals<S>> {
    let v = f.values();
    let n = v.len();
    let ctx = f.ctx();
    let th = thresholds(f, env);
    let key_plus: Vec<S::Bound> = (0..n).map(|j| v[j].sub(&env.e_l[j]).lo()).collect();
    let key_minus: Vec<Reverse<S::Bound>> = (0..n).map(|j| Reverse(v[j].add(&env.e_r[j]).hi())).collect();
    let g: Vec<S> = (0..n).map(|j| v[j].add(&env.e_r[j])).collect();
    let h: Vec<S> = (0..n).map(|j| v[j].sub(&env.e_l[j])).collect();
    let pg = prefix_sums(&g, ctx);
    let ph = prefix_sums(&h, ctx);

    let ra_q: Vec<RangeQuery<S::Bound>> = (0..n)
        .map(|i| RangeQuery {
            threshold: th.right_add[i].clone(),
            lo: idx.rp[i] + 1,
            hi: n - 1,
        })
        .collect();
    let rr_q: Vec<RangeQuery<S::Bound>> = (0..n)
        .map(|i| RangeQuery {
            threshold: th.right_remove[i].clone(),
            lo: idx.lc[i],
            hi: i.wrapping_sub(1),
        })
        .map(|q| {
            if q.hi == usize::MAX {
                RangeQuery { hi: 0, lo: 1, ..q }
            } else {
                q
            }
        })
        .collect();
    let la_q: Vec<RangeQuery<Reverse<S::Bound>>> = (0..n)
        .map(|i| RangeQuery {
            threshold: Reverse(th.left_add[i].clone()),
            lo: 0,
            hi: idx.lp[i].wrapping_sub(1),
        })
        .map(|q| {
            if q.hi == usize::MAX {
                RangeQuery { hi: 0, lo: 1, ..q }
            } else {
                q
            }
        })
        .collect();
    let lr_q: Vec<RangeQuery<Reverse<S::Bound>>> = (0..n)
        .map(|i| RangeQuery {
            threshold: Reverse(th.left_remove[i].clone()),
            lo: i + 1,
            hi: idx.rc[i],
        })
        .collect();

    let ra = offline_counts::<_, S>(&key_plus, &ra_q, false, None, ctx);
    let rr = offline_counts(&key_plus, &rr_q, true, Some(&g), ctx);
    let la = offline_counts::<_, S>(&key_minus, &la_q, false, None, ctx);
    let lr = offline_counts(&key_minus, &lr_q, true, Some(&h), ctx);

    (0..n)
        .map(|i| {
            let (lc, rc, lp, rp) = (idx.lc[i], idx.rc[i], idx.lp[i], idx.rp[i]);
            let forced_left = lc - lp;
            let forced_right = rp - rc;
            let mut rsum = rr[i].1.clone().expect("sums requested");
            if forced_left > 0 {
                rsum = range_sum(&pg, lp, lc - 1).add(&rsum);
            }
            let mut lsum = lr[i].1.clone().expect("sums requested");
            if forced_right > 0 {
                lsum = lsum.add(&range_sum(&ph, rc + 1, rp));
            }
            SetTotals {
                right_add: forced_right + ra[i].0,
                right_remove: forced_left + rr[i].0,
                right_remove_sum: rsum,
                left_add: forced_left + la[i].0,
                left_remove: forced_right + lr[i].0,
                left_remove_sum: lsum,
                n_i: idx.certain_len(i) as i64 - rr[i].0 as i64 - lr[i].0 as i64,
            }
        })
        .collect()
}

/// The recursive right and left bounds for one agent.
#[allow(clippy::too_many_arguments)]
fn agent_bounds<S: Scalar>(
    k: usize,
    f_next: &S,
    idx: &NeighborhoodIndex,
    tot: &SetTotals<S>,
    pg: &[S],
    ph: &[S],
    two: &S,
    zero: &S,
) -> Result<(S, S)> {
    if tot.n_i <= 0 {
        return Err(HkError::CertificationFailure(format!(
            "agent {}: guaranteed neighbour count {} is not positive",
            k + 1,
            tot.n_i
        )));
    }
    let ghost = two.div_count(tot.n_i as usize);
    let (lc, rc, lp, rp) = (idx.lc[k], idx.rc[k], idx.lp[k], idx.rp[k]);

    // right: window [lp, rc] minus right_remove, plus right_add
    let w = rc + 1 - lp;
    let kept = w - tot.right_remove;
    let avg = range_sum(pg, lp, rc).sub(&tot.right_remove_sum).div_count(kept);
    let add = two.mul_count(tot.right_add).div_count(kept + tot.right_add);
    let er = avg.add(&add).sub(f_next).add(&ghost).upper().max(zero);

    // left: window [lc, rp] minus left_remove, plus left_add
    let w = rp + 1 - lc;
    let kept = w - tot.left_remove;
    let avg = range_sum(ph, lc, rp).sub(&tot.left_remove_sum).div_count(kept);
    let add = two.mul_count(tot.left_add).div_count(kept + tot.left_add);
    let el = add.sub(&avg).add(f_next).add(&ghost).upper().max(zero);
    Ok((el, er))
}

fn bounds_from_totals<S: Scalar>(
    f_t: &Profile<S>,
    f_next: &Profile<S>,
    env: &DeviationEnvelope<S>,
    idx: &NeighborhoodIndex,
    totals: &[SetTotals<S>],
) -> Result<DeviationEnvelope<S>> {
    let v = f_t.values();
    let n = v.len();
    let ctx = f_t.ctx();
    let g: Vec<S> = (0..n).map(|j| v[j].add(&env.e_r[j])).collect();
    let h: Vec<S> = (0..n).map(|j| v[j].sub(&env.e_l[j])).collect();
    let pg = prefix_sums(&g, ctx);
    let ph = prefix_sums(&h, ctx);
    let two = S::from_i64(2, ctx);
    let zero = S::zero(ctx);
    let one_agent = |k: usize| agent_bounds(k, &f_next.values()[k], idx, &totals[k], &pg, &ph, &two, &zero);
    let pairs: Vec<(S, S)> = if n >= PAR_THRESHOLD {
        (0..n).into_par_iter().map(one_agent).collect::<Result<_>>()?
    } else {
        (0..n).map(one_agent).collect::<Result<_>>()?
    };
    let (e_l, e_r) = pairs.into_iter().unzip();
    Ok(DeviationEnvelope { e_l, e_r })
}

fn check_next<S: Scalar>(f_t: &Profile<S>, f_next: &Profile<S>, env: &DeviationEnvelope<S>) -> Result<()> {
    check_inputs(f_t, env)?;
    if f_next.n() != f_t.n() {
        return Err(domain("successor profile has a different agent count"));
    }
    Ok(())
}

/// One step of the envelope recursion: the bounds at `t + 1` from those at
/// `t`, with `f_next = U f_t`. Results are upper endpoints clamped at 0.
pub fn propagate<S: Scalar>(
    f_t: &Profile<S>,
    f_next: &Profile<S>,
    env: &DeviationEnvelope<S>,
) -> Result<DeviationEnvelope<S>> {
    check_next(f_t, f_next, env)?;
    let idx = neighborhoods(f_t);
    let totals = fenwick_totals(f_t, env, &idx);
    bounds_from_totals(f_t, f_next, env, &idx, &totals)
}

/// [`propagate`] through the scanned, explicitly listed arrow sets.
pub fn propagate_scan<S: Scalar>(
    f_t: &Profile<S>,
    f_next: &Profile<S>,
    env: &DeviationEnvelope<S>,
) -> Result<DeviationEnvelope<S>> {
    check_next(f_t, f_next, env)?;
    let idx = neighborhoods(f_t);
    let sets = scan_sets(f_t, env, &idx);
    let totals = totals_from_sets(f_t, env, &sets);
    bounds_from_totals(f_t, f_next, env, &idx, &totals)
}

#[derive(Debug, Clone)]
pub struct EnvelopeStep<S: Scalar> {
    pub t: usize,
    pub profile: Profile<S>,
    pub env: DeviationEnvelope<S>,
}

impl<S: Scalar> EnvelopeStep<S> {
    /// `e_l^t(1)`.
    pub fn el_first(&self) -> &S {
        &self.env.e_l[0]
    }

    /// `e_r^t(n)`.
    pub fn er_last(&self) -> &S {
        &self.env.e_r[self.env.n() - 1]
    }
}

/// Alternates update and propagation for `steps` steps. `visit` sees every
/// step (starting with `t = 0`) and may stop the run early by returning
/// `false`.
pub fn envelope_evolve_with<S: Scalar>(
    f0: &Profile<S>,
    env0: &DeviationEnvelope<S>,
    steps: usize,
    mut visit: impl FnMut(&EnvelopeStep<S>) -> bool,
) -> Result<Vec<EnvelopeStep<S>>> {
    check_inputs(f0, env0)?;
    let mut out = vec![EnvelopeStep {
        t: 0,
        profile: f0.clone(),
        env: env0.clone(),
    }];
    if !visit(&out[0]) {
        return Ok(out);
    }
    for t in 0..steps {
        let cur = &out[t];
        let idx = neighborhoods(&cur.profile);
        let next = update_with(&cur.profile, &idx);
        let totals = fenwick_totals(&cur.profile, &cur.env, &idx);
        let env = bounds_from_totals(&cur.profile, &next, &cur.env, &idx, &totals)?;
        out.push(EnvelopeStep {
            t: t + 1,
            profile: next,
            env,
        });
        if !visit(&out[t + 1]) {
            break;
        }
    }
    Ok(out)
}

pub fn envelope_evolve<S: Scalar>(
    f0: &Profile<S>,
    env0: &DeviationEnvelope<S>,
    steps: usize,
) -> Result<Vec<EnvelopeStep<S>>> {
    envelope_evolve_with(f0, env0, steps, |_| true)
}
