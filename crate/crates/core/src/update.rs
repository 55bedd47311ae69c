//! The bounded-confidence update operator on sorted profiles.
//!
//! For a sorted profile the neighbourhood of agent `i` is a contiguous index
//! window. Window edges are found with four monotone pointers and window
//! sums come from prefix sums, so one step costs O(n) scalar operations.
//!
//! With enclosures a boundary comparison may be undecided. Each agent then
//! carries a certain window `[lc, rc]` (members for sure) and a possible
//! window `[lp, rp]`. Since opinions are sorted, the smallest average over
//! any admissible window is the average over `[lp, rc]` and the largest the
//! one over `[lc, rp]`; the update returns the hull of both.

use rayon::prelude::*;
use rug::{Integer, Rational};

use crate::error::{domain, Result};
use crate::numerics::{ArithMode, Scalar};
use crate::profile::Profile;

const PAR_THRESHOLD: usize = 4096;

/// Inclusive, 1-based range of agents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Window {
    pub left: usize,
    pub right: usize,
}

impl Window {
    pub fn len(&self) -> usize {
        self.right + 1 - self.left
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, j: usize) -> bool {
        self.left <= j && j <= self.right
    }
}

/// Window edges per agent, stored 0-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborhoodIndex {
    pub(crate) lc: Vec<usize>,
    pub(crate) rc: Vec<usize>,
    pub(crate) lp: Vec<usize>,
    pub(crate) rp: Vec<usize>,
}

impl NeighborhoodIndex {
    pub fn n(&self) -> usize {
        self.lc.len()
    }

    /// Agents certainly within distance 1 of agent `i` (1-based).
    pub fn certain(&self, i: usize) -> Window {
        Window {
            left: self.lc[i - 1] + 1,
            right: self.rc[i - 1] + 1,
        }
    }

    /// Agents possibly within distance 1 of agent `i` (1-based).
    pub fn possible(&self, i: usize) -> Window {
        Window {
            left: self.lp[i - 1] + 1,
            right: self.rp[i - 1] + 1,
        }
    }

    /// Whether every window is decided.
    pub fn is_decided(&self) -> bool {
        self.lc == self.lp && self.rc == self.rp
    }

    pub(crate) fn decided_at(&self, k: usize) -> bool {
        self.lc[k] == self.lp[k] && self.rc[k] == self.rp[k]
    }

    pub(crate) fn same_windows(&self, a: usize, b: usize) -> bool {
        self.lc[a] == self.lc[b] && self.rc[a] == self.rc[b] && self.lp[a] == self.lp[b] && self.rp[a] == self.rp[b]
    }

    /// Size of the certain window, 0-based agent.
    pub(crate) fn certain_len(&self, k: usize) -> usize {
        self.rc[k] + 1 - self.lc[k]
    }
}

/// Window edges by four monotone pointers.
pub fn neighborhoods<S: Scalar>(f: &Profile<S>) -> NeighborhoodIndex {
    let v = f.values();
    let n = v.len();
    let one = S::one(f.ctx());
    let certain = |lower: &S, upper: &S| upper.sub(lower).certainly_le(&one);
    let possible = |lower: &S, upper: &S| !upper.sub(lower).certainly_gt(&one);

    let mut idx = NeighborhoodIndex {
        lc: vec![0; n],
        rc: vec![0; n],
        lp: vec![0; n],
        rp: vec![0; n],
    };
    let (mut lc, mut lp, mut rc, mut rp) = (0usize, 0usize, 0usize, 0usize);
    for i in 0..n {
        while lc < i && !certain(&v[lc], &v[i]) {
            lc += 1;
        }
        while lp < i && !possible(&v[lp], &v[i]) {
            lp += 1;
        }
        rc = rc.max(i);
        while rc + 1 < n && certain(&v[i], &v[rc + 1]) {
            rc += 1;
        }
        rp = rp.max(rc);
        while rp + 1 < n && possible(&v[i], &v[rp + 1]) {
            rp += 1;
        }
        idx.lc[i] = lc;
        idx.lp[i] = lp.min(lc);
        idx.rc[i] = rc;
        idx.rp[i] = rp;
    }
    idx
}

/// `P[k] = f(1) + ... + f(k)` in the profile's own arithmetic.
pub(crate) fn prefix_sums<S: Scalar>(values: &[S], ctx: S::Ctx) -> Vec<S> {
    let mut p = Vec::with_capacity(values.len() + 1);
    p.push(S::zero(ctx));
    for v in values {
        let next = p[p.len() - 1].add(v);
        p.push(next);
    }
    p
}

/// Sum over the 0-based inclusive range `[l, r]`.
pub(crate) fn range_sum<S: Scalar>(p: &[S], l: usize, r: usize) -> S {
    p[r + 1].sub(&p[l])
}

fn window_average<S: Scalar>(p: &[S], idx: &NeighborhoodIndex, k: usize) -> S {
    if idx.decided_at(k) {
        range_sum(p, idx.lc[k], idx.rc[k]).div_count(idx.rc[k] + 1 - idx.lc[k])
    } else {
        let low = range_sum(p, idx.lp[k], idx.rc[k])
            .div_count(idx.rc[k] + 1 - idx.lp[k])
            .lower();
        let high = range_sum(p, idx.lc[k], idx.rp[k])
            .div_count(idx.rp[k] + 1 - idx.lc[k])
            .upper();
        S::hull(&low, &high)
    }
}

/// Links of the updated profile: identical windows, and either decided
/// windows or agents that were already linked.
fn structural_links<S: Scalar>(f: &Profile<S>, idx: &NeighborhoodIndex) -> Vec<bool> {
    (0..f.n().saturating_sub(1))
        .map(|k| idx.same_windows(k, k + 1) && ((idx.decided_at(k) && idx.decided_at(k + 1)) || f.links()[k]))
        .collect()
}

fn finish<S: Scalar>(values: Vec<S>, links: Vec<bool>) -> Profile<S> {
    match S::MODE {
        ArithMode::Rational => {
            let links = values.windows(2).map(|w| w[0].same_point(&w[1])).collect();
            Profile::from_parts(values, links)
        }
        ArithMode::Float => {
            let links = values
                .windows(2)
                .zip(&links)
                .map(|(w, l)| *l || w[0].same_point(&w[1]))
                .collect();
            Profile::from_parts(values, links)
        }
        ArithMode::Ball => {
            let tightened = Profile::from_sorted_enclosures(values)
                .expect("updated enclosures of a sorted profile")
                .into_values();
            Profile::from_parts(tightened, links)
        }
    }
}

/// `Uf` given precomputed windows of `f`.
pub fn update_with<S: Scalar>(f: &Profile<S>, idx: &NeighborhoodIndex) -> Profile<S> {
    let n = f.n();
    let p = prefix_sums(f.values(), f.ctx());
    let links = structural_links(f, idx);
    let starts: Vec<usize> = (0..n).filter(|&k| k == 0 || !links[k - 1]).collect();
    let head_values: Vec<S> = if n >= PAR_THRESHOLD {
        starts.par_iter().map(|&k| window_average(&p, idx, k)).collect()
    } else {
        starts.iter().map(|&k| window_average(&p, idx, k)).collect()
    };
    let mut values: Vec<S> = Vec::with_capacity(n);
    let mut head = 0;
    for k in 0..n {
        if k > 0 && links[k - 1] {
            let prev = values[k - 1].clone();
            values.push(prev);
        } else {
            values.push(head_values[head].clone());
            head += 1;
        }
    }
    finish(values, links)
}

/// One synchronous update, `Uf(i) = <f(j)>` over `|f(j) - f(i)| <= 1`.
pub fn update<S: Scalar>(f: &Profile<S>) -> Profile<S> {
    update_with(f, &neighborhoods(f))
}

/// Quadratic transcription of the update rule; oracle for [`update`].
pub fn update_naive<S: Scalar>(f: &Profile<S>) -> Profile<S> {
    let v = f.values();
    let n = v.len();
    let ctx = f.ctx();
    let one = S::one(ctx);
    let mut idx = NeighborhoodIndex {
        lc: vec![0; n],
        rc: vec![0; n],
        lp: vec![0; n],
        rp: vec![0; n],
    };
    let mut values = Vec::with_capacity(n);
    for i in 0..n {
        let mut certain = Vec::new();
        let mut possible = Vec::new();
        for j in 0..n {
            let d = if j < i { v[i].sub(&v[j]) } else { v[j].sub(&v[i]) };
            if d.certainly_le(&one) {
                certain.push(j);
            }
            if !d.certainly_gt(&one) {
                possible.push(j);
            }
        }
        idx.lc[i] = certain[0];
        idx.rc[i] = certain[certain.len() - 1];
        idx.lp[i] = possible[0];
        idx.rp[i] = possible[possible.len() - 1];

        let low_set: Vec<usize> = possible
            .iter()
            .copied()
            .filter(|&j| j <= i)
            .chain(certain.iter().copied().filter(|&j| j > i))
            .collect();
        let high_set: Vec<usize> = certain
            .iter()
            .copied()
            .filter(|&j| j < i)
            .chain(possible.iter().copied().filter(|&j| j >= i))
            .collect();
        let avg = |set: &[usize]| {
            let mut s = S::zero(ctx);
            for &j in set {
                s = s.add(&v[j]);
            }
            s.div_count(set.len())
        };
        if low_set == high_set {
            values.push(avg(&low_set));
        } else {
            values.push(S::hull(&avg(&low_set).lower(), &avg(&high_set).upper()));
        }
    }
    let links = structural_links(f, &idx);
    if S::MODE == ArithMode::Ball {
        // linked agents share one value, as in the fast path
        for k in 1..n {
            if links[k - 1] {
                values[k] = values[k - 1].clone();
            }
        }
    }
    finish(values, links)
}

/// Certified fixed point: every linked run is exactly its own (decided)
/// neighbourhood, which also puts every other cluster certainly beyond 1.
pub fn is_frozen<S: Scalar>(f: &Profile<S>, idx: &NeighborhoodIndex) -> bool {
    let n = f.n();
    let mut start = 0;
    for k in 0..n {
        if k + 1 == n || !f.links()[k] {
            if !(idx.decided_at(start) && idx.lc[start] == start && idx.rc[start] == k) {
                return false;
            }
            start = k + 1;
        }
    }
    true
}

/// Components of the connectivity graph: maximal runs whose consecutive gaps
/// are not certainly above 1, with the gaps between runs.
pub fn connectivity<S: Scalar>(f: &Profile<S>) -> (Vec<Window>, Vec<S>) {
    let v = f.values();
    let one = S::one(f.ctx());
    let mut comps = Vec::new();
    let mut gaps = Vec::new();
    let mut start = 0;
    for k in 0..v.len() {
        if k + 1 == v.len() {
            comps.push(Window {
                left: start + 1,
                right: k + 1,
            });
        } else {
            let gap = v[k + 1].sub(&v[k]);
            if gap.certainly_gt(&one) {
                comps.push(Window {
                    left: start + 1,
                    right: k + 1,
                });
                gaps.push(gap);
                start = k + 1;
            }
        }
    }
    (comps, gaps)
}

#[derive(Debug, Clone)]
pub struct StepStats<S: Scalar> {
    pub t: usize,
    pub diameter: S,
    pub clusters: usize,
    pub min: S,
    pub max: S,
}

impl<S: Scalar> StepStats<S> {
    fn of(t: usize, f: &Profile<S>) -> Self {
        StepStats {
            t,
            diameter: f.diameter(),
            clusters: f.clusters().len(),
            min: f.first().clone(),
            max: f.last().clone(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory<S: Scalar> {
    /// `states[t] = U^t f`.
    pub states: Vec<Profile<S>>,
    pub stats: Vec<StepStats<S>>,
    /// First `t` at which `states[t]` is a certified fixed point.
    pub frozen_at: Option<usize>,
    /// The freezing cap ran out before the profile froze.
    pub cap_exhausted: bool,
}

impl<S: Scalar> Trajectory<S> {
    pub fn last(&self) -> &Profile<S> {
        &self.states[self.states.len() - 1]
    }

    pub fn steps(&self) -> usize {
        self.states.len() - 1
    }
}

/// Iterates the update for at most `steps` steps (and at most `freeze_cap`
/// when given), stopping at the first certified fixed point.
pub fn evolve<S: Scalar>(f: &Profile<S>, steps: usize, freeze_cap: Option<usize>) -> Trajectory<S> {
    let limit = freeze_cap.map_or(steps, |c| c.min(steps));
    let mut states = vec![f.clone()];
    let mut stats = vec![StepStats::of(0, f)];
    let mut frozen_at = None;
    for t in 0.. {
        let cur = &states[t];
        let idx = neighborhoods(cur);
        if is_frozen(cur, &idx) {
            frozen_at = Some(t);
            break;
        }
        if t == limit {
            break;
        }
        let next = update_with(cur, &idx);
        debug_assert!(
            !next.diameter().certainly_gt(&cur.diameter()),
            "diameter increased at t = {}",
            t + 1
        );
        stats.push(StepStats::of(t + 1, &next));
        states.push(next);
    }
    let cap_exhausted = frozen_at.is_none() && freeze_cap.is_some_and(|c| states.len() - 1 == c);
    Trajectory {
        states,
        stats,
        frozen_at,
        cap_exhausted,
    }
}

#[derive(Debug, Clone)]
pub struct FreezeOutcome<S: Scalar> {
    pub state: Profile<S>,
    /// Steps taken.
    pub t: usize,
    pub frozen: bool,
}

/// Runs to the first certified fixed point without keeping the history.
pub fn run_to_freeze<S: Scalar>(f: &Profile<S>, cap: usize) -> FreezeOutcome<S> {
    let mut cur = f.clone();
    for t in 0..=cap {
        let idx = neighborhoods(&cur);
        if is_frozen(&cur, &idx) {
            return FreezeOutcome {
                state: cur,
                t,
                frozen: true,
            };
        }
        if t == cap {
            break;
        }
        cur = update_with(&cur, &idx);
    }
    FreezeOutcome {
        state: cur,
        t: cap,
        frozen: false,
    }
}

/// Sum of `max(1, j - w)` for `j` in `[x, y]`.
fn sum_left_edges(x: i128, y: i128, w: i128) -> i128 {
    if x > y {
        return 0;
    }
    let split = w + 1;
    let ones = (y.min(split) - x + 1).max(0);
    let lo = x.max(split + 1);
    let rest = if lo <= y {
        (lo + y) * (y - lo + 1) / 2 - w * (y - lo + 1)
    } else {
        0
    };
    ones + rest
}

/// Sum of `min(n, j + w)` for `j` in `[x, y]`.
fn sum_right_edges(x: i128, y: i128, w: i128, n: i128) -> i128 {
    if x > y {
        return 0;
    }
    let split = n - w;
    let hi = y.min(split);
    let head = if x <= hi {
        (x + hi) * (hi - x + 1) / 2 + w * (hi - x + 1)
    } else {
        0
    };
    let tail = (y - x.max(split + 1) + 1).max(0) * n;
    head + tail
}

/// Closed forms for `U^t f^{n,L}(i)`, `t` in {1, 2}.
///
/// With `h = L/(n-1)` and `w = floor(1/h)`, agent `j` of `f^{n,L}` sees
/// `[a(j), b(j)] = [max(1, j-w), min(n, j+w)]`, hence
/// `Uf(j) = h (a(j) + b(j) - 2) / 2`. This is non-decreasing and piecewise
/// linear in `j` with breakpoints `w + 1` and `n - w`, so the second update
/// sums arithmetic series over the window of `Uf`, whose edges are located
/// by bisection on the same formula.
pub fn closed_form_update(n: usize, l: &Rational, t: usize, i: usize) -> Result<Rational> {
    if !(1..=2).contains(&t) {
        return Err(domain(format!("closed forms exist for t = 1, 2 only, got {t}")));
    }
    if n < 2 || i < 1 || i > n {
        return Err(domain("need n >= 2 and 1 <= i <= n"));
    }
    if l.cmp0() == std::cmp::Ordering::Less {
        return Err(domain("diameter must be non-negative"));
    }
    if l.cmp0() == std::cmp::Ordering::Equal {
        return Ok(Rational::new());
    }
    let nn = n as i128;
    let h = Rational::from(l / Integer::from(n - 1));
    let w_big = Rational::from(Integer::from(n - 1) / l).floor().numer().clone();
    let w: i128 = w_big.to_i128().unwrap_or(i128::MAX).min(nn);
    let first = |j: i128| -> Rational {
        let a = 1.max(j - w);
        let b = nn.min(j + w);
        Rational::from(&h * Integer::from(a + b - 2)) / 2u32
    };
    let i = i as i128;
    if t == 1 {
        return Ok(first(i));
    }
    let gi = first(i);
    let within = |j: i128| -> bool {
        let d = (&gi - first(j)).abs();
        d <= 1
    };
    // leftmost j in [1, i] seeing i: predicate is monotone in j
    let (mut lo, mut hi) = (1i128, i);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if within(mid) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let left = lo;
    let (mut lo, mut hi) = (i, nn);
    while lo < hi {
        let mid = (lo + hi + 1) / 2;
        if within(mid) {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    let right = lo;
    let m = right - left + 1;
    let edges = sum_left_edges(left, right, w) + sum_right_edges(left, right, w, nn) - 2 * m;
    Ok(Rational::from(&h * Integer::from(edges)) / Integer::from(2 * m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{Ball, Exact, Precision};
    use crate::profile::equally_spaced;

    fn q(p: i64, d: i64) -> Rational {
        Rational::from((p, d))
    }

    fn ex(vals: &[i64]) -> Profile<Exact> {
        let r: Vec<Rational> = vals.iter().map(|&v| Rational::from(v)).collect();
        Profile::from_rationals(&r, ()).unwrap()
    }

    fn rats(p: &Profile<Exact>) -> Vec<Rational> {
        p.values().iter().map(|v| v.value().clone()).collect()
    }

    #[test]
    fn windows_of_the_fragmentation_example() {
        let idx = neighborhoods(&ex(&[0, 0, 1, 2, 3, 3]));
        let got: Vec<(usize, usize)> = (1..=6).map(|i| (idx.certain(i).left, idx.certain(i).right)).collect();
        assert_eq!(got, vec![(1, 3), (1, 3), (1, 4), (3, 6), (4, 6), (4, 6)]);
        assert!(idx.is_decided());
        let idx = neighborhoods(&ex(&[0, 2]));
        assert_eq!(idx.certain(1), Window { left: 1, right: 1 });
        assert_eq!(idx.certain(2), Window { left: 2, right: 2 });
        let idx = neighborhoods(&ex(&[7; 5]));
        assert!((1..=5).all(|i| idx.certain(i) == Window { left: 1, right: 5 }));
    }

    #[test]
    fn fragmentation_example() {
        let f = ex(&[0, 0, 1, 2, 3, 3]);
        let g = update(&f);
        let want = vec![q(1, 3), q(1, 3), q(3, 4), q(9, 4), q(8, 3), q(8, 3)];
        assert_eq!(rats(&g), want);
        assert_eq!(rats(&update_naive(&f)), want);
        let (comps, gaps) = connectivity(&g);
        assert_eq!(comps.len(), 2);
        assert_eq!(gaps[0].value(), &q(3, 2));
    }

    #[test]
    fn fixed_points() {
        let c = ex(&[3; 4]);
        assert_eq!(rats(&update(&c)), rats(&c));
        let f = ex(&[0, 2]);
        assert_eq!(rats(&update(&f)), rats(&f));
        let tr = evolve(&f, 10, None);
        assert_eq!(tr.frozen_at, Some(0));
    }

    #[test]
    fn small_diameter_freezes_after_one_step() {
        let f = equally_spaced::<Exact>(9, &q(1, 2), ()).unwrap();
        let tr = evolve(&f, 10, None);
        assert_eq!(tr.frozen_at, Some(1));
        assert!(tr.last().clusters().is_consensus());

        let b = equally_spaced::<Ball>(9, &q(1, 2), Precision::default()).unwrap();
        let tr = evolve(&b, 10, None);
        assert_eq!(tr.frozen_at, Some(1));
    }

    #[test]
    fn freeze_cap_is_reported() {
        let f = equally_spaced::<Exact>(21, &q(3, 1), ()).unwrap();
        let tr = evolve(&f, 100, Some(1));
        assert!(tr.cap_exhausted);
        assert_eq!(tr.steps(), 1);
        let tr = evolve(&f, 1, None);
        assert!(!tr.cap_exhausted && tr.frozen_at.is_none());
    }

    #[test]
    fn ball_update_encloses_exact_update() {
        let f = equally_spaced::<Exact>(31, &q(7, 2), ()).unwrap();
        let b = f.to_backend::<Ball>(Precision::default());
        let (mut fe, mut fb) = (f, b);
        for _ in 0..4 {
            fe = update(&fe);
            fb = update(&fb);
            for (x, y) in fe.values().iter().zip(fb.values()) {
                assert!(y.contains(x.value()));
            }
        }
    }

    #[test]
    fn ties_at_exactly_one_are_neighbours() {
        // 0 and 1 see each other; 1 and 2 see each other; 0 and 2 do not
        let g = update(&ex(&[0, 1, 2]));
        assert_eq!(rats(&g), vec![q(1, 2), q(1, 1), q(3, 2)]);
    }

    #[test]
    fn closed_form_examples() {
        assert_eq!(closed_form_update(7, &q(3, 1), 1, 1).unwrap(), q(1, 2));
        assert!(closed_form_update(7, &q(3, 1), 3, 1).is_err());
        let l = q(6, 1);
        for t in 1..=2 {
            for i in 1..=15 {
                let a = closed_form_update(15, &l, t, i).unwrap();
                let b = closed_form_update(15, &l, t, 16 - i).unwrap();
                assert_eq!(a + b, l);
            }
        }
    }

    #[test]
    fn closed_forms_match_the_simulator() {
        for n in [5usize, 12, 33] {
            for l in [q(3, 2), q(3, 1), q(6, 1), q(1, 3)] {
                let f = equally_spaced::<Exact>(n, &l, ()).unwrap();
                let g1 = update(&f);
                let g2 = update(&g1);
                for i in 1..=n {
                    assert_eq!(&closed_form_update(n, &l, 1, i).unwrap(), g1.get(i).value());
                    assert_eq!(&closed_form_update(n, &l, 2, i).unwrap(), g2.get(i).value());
                }
            }
        }
    }
}
