//! Five-block partitions `A B C D E` of the left half of a symmetric
//! profile: extremists `A`, the central block `E` (symmetric about the
//! midpoint), and between them the agents `C` seeing both in full, with
//! leftovers `B` and `D`.

use crate::deviation::DeviationEnvelope;
use crate::numerics::Scalar;
use crate::profile::Profile;

use super::certificate::Block;
pub use super::certificate::GoodPartition;

impl GoodPartition {
    /// `[|A|, |B|, |C|, |D|, |E|]`.
    pub fn sizes(&self) -> [usize; 5] {
        [self.a.size, self.b.size, self.c.size, self.d.size, self.e.size]
    }

    fn blocks(&self) -> [Block; 5] {
        [self.a, self.b, self.c, self.d, self.e]
    }

    /// Conditions (i)-(iv): adjacent intervals starting at agent 1, with a
    /// nonempty `E` symmetric about the midpoint of `n` agents.
    pub fn is_well_formed(&self, n: usize) -> bool {
        let b = self.blocks();
        self.a.first == 1
            && self.a.size > 0
            && b.windows(2).all(|w| w[0].end() == w[1].first)
            && self.e.size > 0
            && self.e.first + self.e.last().unwrap_or(0) == n + 1
    }
}

/// Minimum segment tree with first/last-match descent.
struct MinTree<K> {
    size: usize,
    node: Vec<Option<K>>,
}

impl<K: Ord + Clone> MinTree<K> {
    fn new(keys: Vec<K>) -> Self {
        let size = keys.len().next_power_of_two().max(1);
        let mut node = vec![None; 2 * size];
        for (k, key) in keys.into_iter().enumerate() {
            node[size + k] = Some(key);
        }
        for p in (1..size).rev() {
            node[p] = match (&node[2 * p], &node[2 * p + 1]) {
                (Some(a), Some(b)) => Some(a.min(b).clone()),
                (Some(a), None) | (None, Some(a)) => Some(a.clone()),
                (None, None) => None,
            };
        }
        MinTree { size, node }
    }

    /// Extreme index in `[l, r]` whose key passes `ok`, which must be
    /// downward closed (passing keys stay passing when lowered).
    fn find(&self, l: usize, r: usize, last: bool, ok: &impl Fn(&K) -> bool) -> Option<usize> {
        if l > r {
            return None;
        }
        self.descend(1, 0, self.size - 1, l, r, last, ok)
    }

    #[allow(clippy::too_many_arguments)]
    fn descend(
        &self,
        p: usize,
        nl: usize,
        nr: usize,
        l: usize,
        r: usize,
        last: bool,
        ok: &impl Fn(&K) -> bool,
    ) -> Option<usize> {
        if nr < l || nl > r {
            return None;
        }
        match &self.node[p] {
            Some(k) if ok(k) => {}
            _ => return None,
        }
        if nl == nr {
            return Some(nl);
        }
        let mid = (nl + nr) / 2;
        let (first, second) = if last {
            ((2 * p + 1, mid + 1, nr), (2 * p, nl, mid))
        } else {
            ((2 * p, nl, mid), (2 * p + 1, mid + 1, nr))
        };
        self.descend(first.0, first.1, first.2, l, r, last, ok)
            .or_else(|| self.descend(second.0, second.1, second.2, l, r, last, ok))
    }
}

/// Searches for the partition with the largest `C`, ties going to the
/// largest `E`.
///
/// For each candidate `E = [s, n+1-s]`, `A = [1, a]` takes the largest `a`
/// out of sight of `E`; `C` is the widest interval after `A` whose last
/// member sees agent 1 and whose first member sees `max E`. With an envelope
/// every opinion is padded by its deviation bounds in the unfavourable
/// direction and all three tests must hold with certainty. Without one, `C`
/// is exactly the set of agents between `A` and `E` that see all of both.
///
/// Returns `None` when the diameter certainly exceeds 4 or no `E` admits a
/// nonempty `A`. A partition with an empty `C` is still returned.
pub fn find_good_partition<S: Scalar>(f: &Profile<S>, env: Option<&DeviationEnvelope<S>>) -> Option<GoodPartition> {
    let n = f.n();
    let ctx = f.ctx();
    if n < 3 || f.diameter().certainly_gt(&S::from_i64(4, ctx)) {
        return None;
    }
    if env.is_some_and(|e| e.n() != n) {
        return None;
    }
    let v = f.values();
    let zero = S::zero(ctx);
    let el = |j: usize| env.map_or(&zero, |e| &e.e_l[j]);
    let er = |j: usize| env.map_or(&zero, |e| &e.e_r[j]);
    let one = S::one(ctx);

    // right-padded upper ends and left-padded lower ends
    let up: Vec<S::Bound> = (0..n).map(|j| v[j].add(er(j)).hi()).collect();
    let down: Vec<std::cmp::Reverse<S::Bound>> = (0..n).map(|j| std::cmp::Reverse(v[j].sub(el(j)).lo())).collect();
    let up_tree = MinTree::new(up);
    let down_tree = MinTree::new(down);

    // max C sees agent 1: up(c) <= (f(1) - e_l(1) + 1).lo
    let sees_first = v[0].sub(el(0)).add(&one).lo();

    let mut best: Option<(usize, GoodPartition)> = None;
    // 0-based s = min E; E = [s, n-1-s]
    let mut s = 1;
    while s <= n - 1 - s {
        let e_max = n - 1 - s;
        let out_of_sight = v[s].sub(el(s)).sub(&one).lo();
        let a = match up_tree.find(0, s - 1, true, &|k| *k < out_of_sight) {
            Some(a) => a,
            None => {
                s += 1;
                continue;
            }
        };
        let sees_center = std::cmp::Reverse(v[e_max].add(er(e_max)).sub(&one).hi());
        let c_hi = up_tree.find(a + 1, s - 1, true, &|k| *k <= sees_first);
        let c_lo = down_tree.find(a + 1, s - 1, false, &|k| *k <= sees_center);
        let (c_first, c_size) = match (c_lo, c_hi) {
            (Some(lo), Some(hi)) if lo <= hi => (lo, hi + 1 - lo),
            _ => (s, 0),
        };
        // 1-based blocks
        let p = GoodPartition {
            a: Block { first: 1, size: a + 1 },
            b: Block {
                first: a + 2,
                size: c_first - (a + 1),
            },
            c: Block {
                first: c_first + 1,
                size: c_size,
            },
            d: Block {
                first: c_first + c_size + 1,
                size: s - (c_first + c_size),
            },
            e: Block {
                first: s + 1,
                size: e_max + 1 - s,
            },
        };
        if best.as_ref().is_none_or(|(size, _)| c_size > *size) {
            best = Some((c_size, p));
        }
        s += 1;
    }
    best.map(|(_, p)| p)
}

/// Checks conditions (i)-(v) directly, testing every agent of `B`, `C`
/// and `D` against every agent of `A` and `E`. Quadratic; meant for
/// verification.
pub fn is_good<S: Scalar>(f: &Profile<S>, p: &GoodPartition) -> bool {
    let n = f.n();
    if !p.is_well_formed(n) {
        return false;
    }
    let one = S::one(f.ctx());
    let v = f.values();
    let watched: Vec<usize> = (p.a.first..p.a.end()).chain(p.e.first..p.e.end()).collect();
    for i in p.b.first..p.d.end() {
        let mut sees_all = true;
        for &j in &watched {
            let gap = v[j - 1].sub(&v[i - 1]);
            let inside = gap.certainly_le(&one) && gap.neg().certainly_le(&one);
            let outside = gap.certainly_gt(&one) || gap.neg().certainly_gt(&one);
            if !inside && !outside {
                return false;
            }
            sees_all &= inside;
        }
        if sees_all != p.c.contains(i) {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Exact;
    use crate::profile::equally_spaced;
    use crate::update::update;
    use rug::Rational;

    fn ex(vals: &[i64]) -> Profile<Exact> {
        let r: Vec<Rational> = vals.iter().map(|&v| Rational::from(v)).collect();
        Profile::from_rationals(&r, ()).unwrap()
    }

    #[test]
    fn nine_agent_example() {
        let f = ex(&[-2, -2, -2, -1, 0, 1, 2, 2, 2]);
        let p = find_good_partition(&f, None).unwrap();
        assert_eq!(p.sizes(), [3, 0, 1, 0, 1]);
        assert_eq!(p.c.first, 4);
        assert!(is_good(&f, &p));
    }

    #[test]
    fn near_miss_profile_has_empty_c() {
        // 0.9 instead of 1: agent 4 no longer sees agent 1
        let r: Vec<Rational> = [-20, -20, -20, -9, 0, 9, 20, 20, 20]
            .iter()
            .map(|&v| Rational::from((v, 10)))
            .collect();
        let f = Profile::<Exact>::from_rationals(&r, ()).unwrap();
        let p = find_good_partition(&f, None).unwrap();
        assert_eq!(p.c.size, 0);
        assert!(is_good(&f, &p));
    }

    #[test]
    fn consensus_has_no_partition() {
        assert!(find_good_partition(&ex(&[1; 7]), None).is_none());
    }

    #[test]
    fn wide_profile_has_no_partition() {
        assert!(find_good_partition(&ex(&[0, 1, 2, 3, 5]), None).is_none());
    }

    #[test]
    fn matches_brute_force_on_evolved_profiles() {
        for (n, l) in [(61, 6), (101, 5), (151, 6), (45, 4)] {
            let mut f = equally_spaced::<Exact>(n, &Rational::from(l), ()).unwrap();
            for _ in 0..4 {
                f = update(&f);
                if let Some(p) = find_good_partition(&f, None) {
                    assert!(is_good(&f, &p), "n={n} L={l}: {p:?}");
                    assert_eq!(p.c.size, brute_best_c(&f));
                }
            }
        }
    }

    fn brute_best_c(f: &Profile<Exact>) -> usize {
        let n = f.n();
        let v: Vec<Rational> = f.values().iter().map(|x| x.value().clone()).collect();
        let mut best = 0;
        for s in 1..n {
            if s > n - 1 - s {
                break;
            }
            let Some(a) = (0..s).rev().find(|&a| v[a].clone() + 1 < v[s]) else {
                continue;
            };
            let c = (a + 1..s)
                .filter(|&i| v[i].clone() - &v[0] <= 1 && v[n - 1 - s].clone() - &v[i] <= 1)
                .count();
            best = best.max(c);
        }
        best
    }

    #[test]
    fn envelope_padding_shrinks_c() {
        let mut f = equally_spaced::<Exact>(151, &Rational::from(6), ()).unwrap();
        for _ in 0..5 {
            f = update(&f);
        }
        let bare = find_good_partition(&f, None).unwrap();
        let env = DeviationEnvelope::<Exact>::tent(151, &Rational::from((1, 10)), ());
        let padded = find_good_partition(&f, Some(&env)).unwrap();
        assert!(padded.c.size <= bare.c.size);
    }

    #[test]
    fn tree_descent() {
        let t = MinTree::new(vec![5, 1, 4, 2, 8]);
        assert_eq!(t.find(0, 4, true, &|k| *k < 3), Some(3));
        assert_eq!(t.find(0, 4, false, &|k| *k < 3), Some(1));
        assert_eq!(t.find(2, 2, false, &|k| *k < 3), None);
        assert_eq!(t.find(4, 2, false, &|k| *k < 30), None);
    }
}
