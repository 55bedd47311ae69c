//! Discrete opinion profiles.
//!
//! A profile stores its opinions in non-decreasing order together with a
//! `links` vector: `links[i]` says agent `i` (0-based) is known to hold the
//! same value as agent `i + 1`. In exact arithmetic that is plain equality;
//! with enclosures it is structural (both values came out of one shared
//! computation), which is what makes clusters and freezing decidable there.
//!
//! Public accessors taking an agent index are 1-based.

use std::io::{Read, Write};

use rug::Rational;
use serde::Serialize;

use crate::error::{domain, HkError, Result};
use crate::numerics::{parse_rational, ArithMode, Scalar};

#[derive(Clone, Debug)]
pub struct Profile<S: Scalar> {
    values: Vec<S>,
    links: Vec<bool>,
}

/// How `equally_spaced_with` places `n` agents on `[0, L]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Spacing {
    /// `(i-1)L/(n-1)`: both endpoints occupied, diameter `L`.
    #[default]
    Closed,
    /// `(i-1)L/n`: left endpoints of `n` equal cells, diameter `(n-1)L/n`.
    CellLeft,
}

impl std::str::FromStr for Spacing {
    type Err = HkError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "closed" => Ok(Spacing::Closed),
            "cell-left" | "cell" => Ok(Spacing::CellLeft),
            other => Err(domain(format!("unknown spacing `{other}`"))),
        }
    }
}

impl std::fmt::Display for Spacing {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Spacing::Closed => "closed",
            Spacing::CellLeft => "cell-left",
        })
    }
}

#[derive(Clone, Debug)]
pub struct Cluster<S: Scalar> {
    /// 1-based index of the first member.
    pub first: usize,
    pub size: usize,
    pub opinion: S,
}

#[derive(Clone, Debug)]
pub struct ClusterDecomposition<S: Scalar> {
    pub clusters: Vec<Cluster<S>>,
    /// Gaps between consecutive cluster opinions.
    pub separations: Vec<S>,
    /// Every separation is certainly greater than 1.
    pub frozen: bool,
}

impl<S: Scalar> ClusterDecomposition<S> {
    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn is_consensus(&self) -> bool {
        self.clusters.len() == 1
    }
}

fn value_links<S: Scalar>(values: &[S]) -> Vec<bool> {
    values.windows(2).map(|w| w[0].same_point(&w[1])).collect()
}

impl<S: Scalar> Profile<S> {
    /// Validates order (certain order in exact mode; separately ordered
    /// `lo` and `hi` sequences for enclosures).
    pub fn new(values: Vec<S>) -> Result<Self> {
        if values.is_empty() {
            return Err(domain("a profile needs at least one agent"));
        }
        for (k, w) in values.windows(2).enumerate() {
            let ok = match S::MODE {
                ArithMode::Ball => w[0].lo() <= w[1].lo() && w[0].hi() <= w[1].hi(),
                _ => w[0].certainly_le(&w[1]),
            };
            if !ok {
                return Err(domain(format!(
                    "opinions must be non-decreasing (agents {} and {})",
                    k + 1,
                    k + 2
                )));
            }
        }
        let links = value_links(&values);
        Ok(Profile { values, links })
    }

    /// Builds a profile from enclosures of a sequence known to be sorted,
    /// tightening `lo` forwards and `hi` backwards so both are ordered.
    pub fn from_sorted_enclosures(mut values: Vec<S>) -> Result<Self> {
        if values.is_empty() {
            return Err(domain("a profile needs at least one agent"));
        }
        if S::MODE == ArithMode::Ball {
            for k in 1..values.len() {
                if values[k].lo() < values[k - 1].lo() {
                    values[k] = values[k].max(&values[k - 1].lower());
                }
            }
            for k in (0..values.len() - 1).rev() {
                if values[k].hi() > values[k + 1].hi() {
                    values[k] = values[k].min(&values[k + 1].upper());
                }
            }
        }
        Profile::new(values)
    }

    pub(crate) fn from_parts(values: Vec<S>, links: Vec<bool>) -> Self {
        debug_assert_eq!(links.len() + 1, values.len());
        Profile { values, links }
    }

    pub fn from_rationals(values: &[Rational], ctx: S::Ctx) -> Result<Self> {
        Profile::new(values.iter().map(|r| S::from_rational(r, ctx)).collect())
    }

    pub fn from_f64s(values: &[f64], ctx: S::Ctx) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(domain("opinions must be finite"));
        }
        Profile::new(values.iter().map(|&v| S::from_f64(v, ctx)).collect())
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub fn links(&self) -> &[bool] {
        &self.links
    }

    pub fn into_values(self) -> Vec<S> {
        self.values
    }

    /// Opinion of agent `i`, 1-based.
    pub fn get(&self, i: usize) -> &S {
        assert!(i >= 1 && i <= self.n(), "agent {i} out of range 1..={}", self.n());
        &self.values[i - 1]
    }

    pub fn first(&self) -> &S {
        &self.values[0]
    }

    pub fn last(&self) -> &S {
        &self.values[self.n() - 1]
    }

    pub fn ctx(&self) -> S::Ctx {
        self.values[0].ctx()
    }

    pub fn mode(&self) -> ArithMode {
        S::MODE
    }

    /// `f(n) - f(1)`.
    pub fn diameter(&self) -> S {
        let d = self.last().sub(self.first());
        // in exact and float modes this is already non-negative; for balls
        // the lower end may dip below zero only through overlap
        if S::MODE == ArithMode::Ball && !d.is_nonneg() {
            d.max(&S::zero(self.ctx()))
        } else {
            d
        }
    }

    /// Returns the center sum `c` when `f(i) + f(n+1-i) = c` for every `i`
    /// is certain.
    pub fn symmetry_center(&self) -> Option<S> {
        let n = self.n();
        let c = self.values[0].add(&self.values[n - 1]);
        for i in 1..n.div_ceil(2) {
            let s = self.values[i].add(&self.values[n - 1 - i]);
            if !s.same_point(&c) {
                return None;
            }
        }
        Some(c)
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetry_center().is_some()
    }

    /// Maximal linked runs.
    pub fn clusters(&self) -> ClusterDecomposition<S> {
        let one = S::one(self.ctx());
        let mut clusters = Vec::new();
        let mut start = 0;
        for k in 0..self.n() {
            if k + 1 == self.n() || !self.links[k] {
                clusters.push(Cluster {
                    first: start + 1,
                    size: k + 1 - start,
                    opinion: self.values[start].clone(),
                });
                start = k + 1;
            }
        }
        let separations: Vec<S> = clusters.windows(2).map(|w| w[1].opinion.sub(&w[0].opinion)).collect();
        let frozen = separations.iter().all(|s| s.certainly_gt(&one));
        ClusterDecomposition {
            clusters,
            separations,
            frozen,
        }
    }

    /// `f + c`.
    pub fn translate(&self, c: &S) -> Self {
        Profile {
            values: self.values.iter().map(|v| v.add(c)).collect(),
            links: self.links.clone(),
        }
    }

    /// `a f + b` for `a >= 0`.
    pub fn affine(&self, a: &S, b: &S) -> Result<Self> {
        if !a.is_nonneg() {
            return Err(domain("affine scale must be non-negative"));
        }
        Profile::from_sorted_enclosures(self.values.iter().map(|v| v.mul(a).add(b)).collect())
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["index", "opinion_lo", "opinion_hi"])?;
        for (k, v) in self.values.iter().enumerate() {
            out.write_record([(k + 1).to_string(), v.format_lo(), v.format_hi()])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R, ctx: S::Ctx) -> Result<Self> {
        let mut input = csv::Reader::from_reader(r);
        let headers = input.headers()?.clone();
        let expected = ["index", "opinion_lo", "opinion_hi"];
        if headers.len() != 3 || headers.iter().zip(expected).any(|(h, e)| h.trim() != e) {
            return Err(HkError::Parse(format!(
                "profile CSV header must be `index,opinion_lo,opinion_hi`, got `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut values = Vec::new();
        for (row, rec) in input.records().enumerate() {
            let rec = rec?;
            let idx: usize = rec[0]
                .trim()
                .parse()
                .map_err(|_| HkError::Parse(format!("bad index `{}`", &rec[0])))?;
            if idx != row + 1 {
                return Err(HkError::Parse(format!(
                    "row {} carries index {idx}; indices must run 1..n",
                    row + 1
                )));
            }
            let lo = parse_rational(&rec[1])?;
            let hi = parse_rational(&rec[2])?;
            if lo > hi {
                return Err(HkError::Parse(format!("row {idx}: lo exceeds hi")));
            }
            let v = if lo == hi {
                S::from_rational(&lo, ctx)
            } else if S::MODE == ArithMode::Ball {
                S::hull(&S::from_rational(&lo, ctx), &S::from_rational(&hi, ctx))
            } else {
                return Err(HkError::Parse(format!(
                    "row {idx}: a non-degenerate enclosure needs ball arithmetic"
                )));
            };
            values.push(v);
        }
        Profile::new(values)
    }
}

impl Profile<crate::numerics::Exact> {
    /// Encloses an exact profile in another backend, keeping its links.
    pub fn to_backend<T: Scalar>(&self, ctx: T::Ctx) -> Profile<T> {
        Profile {
            values: self.values.iter().map(|v| T::from_rational(v.value(), ctx)).collect(),
            links: self.links.clone(),
        }
    }
}

fn spaced(n: usize, l: &Rational, spacing: Spacing) -> Result<Vec<Rational>> {
    if n < 2 {
        return Err(domain("an equally spaced profile needs n >= 2"));
    }
    if l.cmp0() == std::cmp::Ordering::Less {
        return Err(domain("diameter must be non-negative"));
    }
    let den = match spacing {
        Spacing::Closed => n - 1,
        Spacing::CellLeft => n,
    };
    let step = Rational::from(l / rug::Integer::from(den));
    Ok((0..n).map(|k| Rational::from(&step * rug::Integer::from(k))).collect())
}

/// `f^{n,L}(i) = (i-1)L/(n-1)`.
pub fn equally_spaced<S: Scalar>(n: usize, l: &Rational, ctx: S::Ctx) -> Result<Profile<S>> {
    equally_spaced_with(n, l, Spacing::Closed, ctx)
}

pub fn equally_spaced_with<S: Scalar>(n: usize, l: &Rational, spacing: Spacing, ctx: S::Ctx) -> Result<Profile<S>> {
    Profile::from_rationals(&spaced(n, l, spacing)?, ctx)
}

/// The same profile shifted so that its center of symmetry sits at 0.
pub fn centered_equally_spaced<S: Scalar>(n: usize, l: &Rational, ctx: S::Ctx) -> Result<Profile<S>> {
    let half = Rational::from(l / 2u32);
    let vals: Vec<Rational> = spaced(n, l, Spacing::Closed)?.into_iter().map(|v| v - &half).collect();
    Profile::from_rationals(&vals, ctx)
}

/// Canonical `k`-regular refinement: `k` arithmetic-progression interpolants
/// between each consecutive pair.
pub fn refine_canonical<S: Scalar>(f: &Profile<S>, k: usize) -> Result<Profile<S>> {
    if f.n() < 2 {
        return Err(domain("refinement needs n >= 2"));
    }
    if k == 0 {
        return Ok(f.clone());
    }
    let vals = f.values();
    let mut out = Vec::with_capacity(f.n() + (f.n() - 1) * k);
    for w in vals.windows(2) {
        out.push(w[0].clone());
        let d = w[1].sub(&w[0]);
        for m in 1..=k {
            out.push(w[0].add(&d.mul_count(m).div_count(k + 1)));
        }
    }
    out.push(vals[vals.len() - 1].clone());
    Profile::from_sorted_enclosures(out)
}

/// A general `k`-regular refinement: `inserted[i]` holds the `k` values
/// placed between agents `i+1` and `i+2`. Fails unless the result is
/// non-decreasing.
pub fn refine_with<S: Scalar>(f: &Profile<S>, k: usize, inserted: &[Vec<S>]) -> Result<Profile<S>> {
    if f.n() < 2 {
        return Err(domain("refinement needs n >= 2"));
    }
    if inserted.len() != f.n() - 1 || inserted.iter().any(|v| v.len() != k) {
        return Err(domain("need exactly k interpolants for each of the n-1 gaps"));
    }
    let mut out = Vec::with_capacity(f.n() + (f.n() - 1) * k);
    for (i, gap) in inserted.iter().enumerate() {
        out.push(f.values()[i].clone());
        out.extend(gap.iter().cloned());
    }
    out.push(f.last().clone());
    Profile::new(out)
}

/// `B_k^n`: picks agents `i + (i-1)k` out of an `n + (n-1)k` agent profile.
pub fn coarsen<S: Scalar>(g: &Profile<S>, n: usize, k: usize) -> Result<Profile<S>> {
    if n == 0 || g.n() != n + (n - 1) * k {
        return Err(domain(format!(
            "coarsening to {n} agents with k = {k} needs {} agents, got {}",
            n + n.saturating_sub(1) * k,
            g.n()
        )));
    }
    Profile::new((0..n).map(|i| g.values()[i * (k + 1)].clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{Ball, Exact, Precision};

    fn q(p: i64, d: i64) -> Rational {
        Rational::from((p, d))
    }

    fn ex(vals: &[Rational]) -> Profile<Exact> {
        Profile::from_rationals(vals, ()).unwrap()
    }

    fn rats(p: &Profile<Exact>) -> Vec<Rational> {
        p.values().iter().map(|v| v.value().clone()).collect()
    }

    #[test]
    fn equally_spaced_examples() {
        let f = equally_spaced::<Exact>(3, &q(2, 1), ()).unwrap();
        assert_eq!(rats(&f), vec![q(0, 1), q(1, 1), q(2, 1)]);
        let f = equally_spaced::<Exact>(5, &q(6, 1), ()).unwrap();
        assert_eq!(rats(&f), vec![q(0, 1), q(3, 2), q(3, 1), q(9, 2), q(6, 1)]);
        assert!(equally_spaced::<Exact>(1, &q(1, 1), ()).is_err());
        let f = equally_spaced_with::<Exact>(4, &q(4, 1), Spacing::CellLeft, ()).unwrap();
        assert_eq!(rats(&f), vec![q(0, 1), q(1, 1), q(2, 1), q(3, 1)]);
    }

    #[test]
    fn refinement_examples() {
        let f = ex(&[q(0, 1), q(2, 1)]);
        assert_eq!(rats(&refine_canonical(&f, 1).unwrap()), vec![q(0, 1), q(1, 1), q(2, 1)]);
        let f = ex(&[q(0, 1), q(1, 1), q(3, 1)]);
        assert_eq!(rats(&refine_canonical(&f, 0).unwrap()), rats(&f));
        let g = refine_canonical(&f, 2).unwrap();
        assert_eq!(
            rats(&g),
            vec![q(0, 1), q(1, 3), q(2, 3), q(1, 1), q(5, 3), q(7, 3), q(3, 1)]
        );
        assert_eq!(rats(&coarsen(&g, 3, 2).unwrap()), rats(&f));
        assert_eq!(rats(&coarsen(&f, 3, 0).unwrap()), rats(&f));
        assert!(coarsen(&g, 4, 2).is_err());
    }

    #[test]
    fn refinement_of_equally_spaced_is_equally_spaced() {
        for (n, k) in [(2, 3), (5, 1), (7, 4)] {
            let l = q(11, 3);
            let f = equally_spaced::<Exact>(n, &l, ()).unwrap();
            let g = refine_canonical(&f, k).unwrap();
            let h = equally_spaced::<Exact>(n + (n - 1) * k, &l, ()).unwrap();
            assert_eq!(rats(&g), rats(&h));
        }
    }

    #[test]
    fn diameter_and_symmetry() {
        let f = ex(&[q(0, 1), q(1, 1), q(2, 1)]);
        assert_eq!(f.diameter().value(), &q(2, 1));
        assert_eq!(f.symmetry_center().unwrap().value(), &q(2, 1));
        assert!(!ex(&[q(0, 1), q(1, 1), q(3, 1)]).is_symmetric());
        let c = ex(&vec![q(4, 1); 4]);
        assert_eq!(c.diameter().value(), &q(0, 1));
        let f = equally_spaced::<Exact>(8, &q(7, 2), ()).unwrap();
        assert_eq!(f.symmetry_center().unwrap().value(), &q(7, 2));
        assert_eq!(f.diameter().value(), &q(7, 2));
    }

    #[test]
    fn cluster_examples() {
        let f = ex(&[q(0, 1), q(0, 1), q(5, 2), q(5, 2)]);
        let c = f.clusters();
        assert_eq!(c.len(), 2);
        assert_eq!(c.clusters[1].size, 2);
        assert_eq!(c.separations[0].value(), &q(5, 2));
        assert!(c.frozen);

        let c = ex(&vec![q(1, 3); 5]).clusters();
        assert!(c.is_consensus() && c.frozen);

        let c = ex(&[q(0, 1), q(1, 2), q(1, 1)]).clusters();
        assert_eq!(c.len(), 3);
        assert!(!c.frozen);

        let b = Profile::<Ball>::from_f64s(&[0.0, 0.0, 2.5, 2.5], Precision::default()).unwrap();
        let c = b.clusters();
        assert_eq!(c.len(), 2);
        assert!(c.frozen);
    }

    #[test]
    fn unsorted_input_is_rejected() {
        assert!(Profile::<Exact>::from_rationals(&[q(1, 1), q(0, 1)], ()).is_err());
        assert!(Profile::<Exact>::from_rationals(&[], ()).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let f = ex(&[q(-1, 3), q(0, 1), q(7, 2)]);
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("index,opinion_lo,opinion_hi\n1,-1/3,-1/3\n"));
        let g = Profile::<Exact>::read_csv(&buf[..], ()).unwrap();
        assert_eq!(rats(&g), rats(&f));

        let b = equally_spaced::<Ball>(5, &q(1, 3), Precision::default()).unwrap();
        let mut buf = Vec::new();
        b.write_csv(&mut buf).unwrap();
        let back = Profile::<Ball>::read_csv(&buf[..], Precision::default()).unwrap();
        for (x, y) in b.values().iter().zip(back.values()) {
            assert!(y.lo() <= x.lo() && y.hi() >= x.hi());
        }
        let bad = "i,lo,hi\n1,0,0\n";
        assert!(Profile::<Exact>::read_csv(bad.as_bytes(), ()).is_err());
        let wide = "index,opinion_lo,opinion_hi\n1,0,1\n";
        assert!(Profile::<Exact>::read_csv(wide.as_bytes(), ()).is_err());
    }

    #[test]
    fn general_refinement_is_validated() {
        let f = ex(&[q(0, 1), q(1, 1)]);
        let ok = refine_with(&f, 2, &[vec![Exact::new(q(0, 1)), Exact::new(q(1, 1))]]).unwrap();
        assert_eq!(ok.n(), 4);
        assert!(refine_with(&f, 2, &[vec![Exact::new(q(1, 1)), Exact::new(q(0, 1))]]).is_err());
        assert!(refine_with(&f, 1, &[vec![Exact::new(q(1, 2))], vec![]]).is_err());
    }
}
