use rayon::prelude::*;
use rug::{Integer, Rational};

use crate::deviation::DeviationEnvelope;
use crate::error::{domain, Result};
use crate::numerics::Scalar;
use crate::profile::centered_equally_spaced;

use super::certificate::{arith_of, Certificate, GridPoint, Inequality, Verdict};
use super::{walk, WalkEnd};

/// A grid campaign over the diameters `[l_lo, l_hi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub l_lo: Rational,
    pub l_hi: Rational,
    /// Odd agent count.
    pub n: usize,
    /// Tent height.
    pub eps: Rational,
    pub delta: Rational,
    pub steps: usize,
}

impl GridSpec {
    fn validate(&self) -> Result<()> {
        if self.n < 3 || self.n.is_multiple_of(2) {
            return Err(domain(format!("n must be odd and at least 3, got {}", self.n)));
        }
        if self.eps <= 0 || self.delta <= 0 {
            return Err(domain("eps and delta must be positive"));
        }
        if self.l_lo < 0 || self.l_lo > self.l_hi {
            return Err(domain("need 0 <= l_lo <= l_hi"));
        }
        Ok(())
    }

    /// Largest diameter step the tent of height `eps` absorbs:
    /// `2 eps (n-1)/(n+1)`. A grid point `L` covers `[L, L + spacing]`.
    pub fn spacing(&self) -> Rational {
        let n = self.n as u64;
        Rational::from(&self.eps * 2u32) * Rational::from((n - 1, n + 1))
    }

    /// `l_lo, l_lo + s, ...` up to the first point whose cell reaches `l_hi`.
    pub fn points(&self) -> Result<Vec<Rational>> {
        self.validate()?;
        let s = self.spacing();
        let span = Rational::from(&self.l_hi - &self.l_lo) / &s;
        let (_, count) = span.fract_ceil(Integer::new());
        let count = count.to_usize().ok_or_else(|| domain("grid too large"))?.max(1);
        Ok((0..count)
            .map(|j| Rational::from(&s * Integer::from(j)) + &self.l_lo)
            .collect())
    }
}

/// Certifies consensus for every diameter in `[l_lo, l_hi]`.
///
/// Each grid point `L` runs the centered equally spaced profile of diameter
/// `L` with the tent envelope of height `eps` and passes at the first step
/// `t <= steps` where the diameter is at most `2 - 2 delta` and both
/// extremist envelopes are below `delta`. Points run in parallel on the
/// current rayon pool.
pub fn certify_grid_interval<S: Scalar>(spec: &GridSpec, ctx: S::Ctx) -> Result<Certificate> {
    let points = spec.points()?;
    let outcomes: Vec<GridPoint> = points
        .par_iter()
        .map(|l| grid_point::<S>(spec, l, ctx))
        .collect::<Result<_>>()?;
    let mut cert = Certificate::new("grid", arith_of::<S>(ctx))
        .param("l_lo", &spec.l_lo)
        .param("l_hi", &spec.l_hi)
        .param("n", spec.n)
        .param("eps", &spec.eps)
        .param("delta", &spec.delta)
        .param("steps", spec.steps)
        .param("spacing", spec.spacing())
        .param("points", points.len());
    for p in outcomes.iter().filter(|p| p.verdict != Verdict::Certified) {
        cert.evidence
            .notes
            .push(format!("grid point L = {} not certified", p.l));
    }
    cert.evidence.points = outcomes;
    let verdict = Verdict::all(cert.evidence.points.iter().map(|p| p.verdict));
    // a failing grid point leaves the interval open rather than refuting it
    cert.verdict = match verdict {
        Verdict::Refuted => Verdict::Inconclusive,
        v => v,
    };
    Ok(cert.gate())
}

fn grid_point<S: Scalar>(spec: &GridSpec, l: &Rational, ctx: S::Ctx) -> Result<GridPoint> {
    let f = centered_equally_spaced::<S>(spec.n, l, ctx)?;
    let env = DeviationEnvelope::<S>::tent(spec.n, &spec.eps, ctx);
    let two_minus = S::from_rational(&(Rational::from(2) - Rational::from(&spec.delta * 2u32)), ctx);
    let delta = S::from_rational(&spec.delta, ctx);

    let mut point = GridPoint {
        l: l.to_string(),
        verdict: Verdict::Inconclusive,
        t: None,
        steps: Vec::new(),
        inequalities: Vec::new(),
        note: None,
    };
    let n = spec.n;
    let end = walk(f, env, spec.steps, |step| {
        point.steps.push(step.record());
        let checks = vec![
            Inequality::check("diameter", &step.profile.diameter(), &two_minus, false),
            Inequality::check("left_extremist_bound", &step.env.e_l[0], &delta, true),
            Inequality::check("right_extremist_bound", &step.env.e_r[n - 1], &delta, true),
        ];
        let pass = checks.iter().all(|q| q.verdict() == Verdict::Certified);
        point.inequalities = checks;
        if pass {
            point.verdict = Verdict::Certified;
            point.t = Some(step.t);
        }
        !pass
    })?;
    if let WalkEnd::BlowUp { t, reason } = end {
        point.note = Some(format!("envelope blow-up at t = {t}: {reason}"));
    }
    Ok(point)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{Ball, Exact, Precision};
    use crate::profile::centered_equally_spaced;

    fn q(p: i64, d: i64) -> Rational {
        Rational::from((p, d))
    }

    fn spec(lo: Rational, hi: Rational, n: usize, eps: Rational, steps: usize) -> GridSpec {
        GridSpec {
            l_lo: lo,
            l_hi: hi,
            n,
            eps,
            delta: q(1, 100),
            steps,
        }
    }

    #[test]
    fn points_cover_the_interval() {
        let s = spec(q(49, 10), q(5, 1), 10001, q(5, 10000), 8);
        let pts = s.points().unwrap();
        assert_eq!(pts[0], q(49, 10));
        let last = pts.last().unwrap().clone() + s.spacing();
        assert!(last >= q(5, 1));
        assert!(pts.last().unwrap() < &q(5, 1));
        assert_eq!(pts.len(), 101);
        let single = spec(q(1, 1), q(1, 1), 11, q(1, 10), 1);
        assert_eq!(single.points().unwrap().len(), 1);
    }

    #[test]
    fn tent_absorbs_the_cell() {
        // every profile in a cell lies inside the tent around its left point
        let n = 21;
        let s = spec(q(3, 1), q(4, 1), n, q(1, 20), 1);
        let env = DeviationEnvelope::<Exact>::tent(n, &s.eps, ());
        for base in s.points().unwrap() {
            let f = centered_equally_spaced::<Exact>(n, &base, ()).unwrap();
            for frac in [q(0, 1), q(1, 3), q(1, 1)] {
                let l = &base + s.spacing() * frac;
                let g = centered_equally_spaced::<Exact>(n, &l, ()).unwrap();
                assert!(env.encloses(&f, &g), "L = {l}");
            }
            // and just past the cell it does not
            let l = &base + s.spacing() * q(11, 10);
            let g = centered_equally_spaced::<Exact>(n, &l, ()).unwrap();
            assert!(!env.encloses(&f, &g));
        }
    }

    #[test]
    fn small_diameters_certify() {
        let s = GridSpec {
            l_lo: q(1, 10),
            l_hi: q(9, 10),
            n: 101,
            eps: q(1, 20),
            // the ghost term alone is 2/101 after one step
            delta: q(1, 20),
            steps: 2,
        };
        let c = certify_grid_interval::<Ball>(&s, Precision::default()).unwrap();
        assert_eq!(c.verdict, Verdict::Certified, "{}", c.to_json());
        assert!(c.evidence.points.iter().all(|p| p.t.is_some_and(|t| t <= 1)));
    }

    #[test]
    fn invalid_specs() {
        assert!(spec(q(1, 1), q(2, 1), 10, q(1, 10), 1).points().is_err());
        assert!(spec(q(2, 1), q(1, 1), 11, q(1, 10), 1).points().is_err());
        assert!(spec(q(1, 1), q(2, 1), 11, q(0, 1), 1).points().is_err());
    }
}
