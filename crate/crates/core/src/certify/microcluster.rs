use rug::Rational;

use crate::deviation::DeviationEnvelope;
use crate::error::{domain, Result};
use crate::numerics::{Exact, Scalar, Trichotomy};
use crate::profile::{equally_spaced_with, Profile, Spacing};

use super::certificate::{arith_of, Certificate, Inequality, Status};
use super::partition::{find_good_partition, GoodPartition};
use super::{walk, WalkEnd};

/// Block sizes substituted into the three size conditions. The plain test
/// uses the actual sizes throughout; the refinement-uniform test shifts
/// each slot by one in its unfavourable direction.
struct Sizes {
    a: i64,
    a0: i64,
    b: i64,
    b0: i64,
    c: i64,
    d: i64,
    e: i64,
}

impl Sizes {
    fn plain(p: &GoodPartition) -> Self {
        let [a, b, c, d, e] = p.sizes().map(|x| x as i64);
        Sizes {
            a,
            a0: a,
            b,
            b0: b,
            c,
            d,
            e,
        }
    }

    fn shifted(p: &GoodPartition) -> Self {
        let [a, b, c, d, e] = p.sizes().map(|x| x as i64);
        Sizes {
            a: a - 1,
            a0: a,
            b: b + 1,
            b0: b,
            c: c - 1,
            d: d + 1,
            e: e - 1,
        }
    }
}

/// With `L` the diameter:
///
/// * `(n - 2a)/(n - a) L/2 <= 1`
/// * `(n - e)/(n + e) L/2 + 2b/(n - 2a0 - b) <= 1`
/// * `2b/(n - 2a0 - b) + 4d/(n - e) <= 2ce/((a + b0 + c)(n + e))`
fn size_conditions<S: Scalar>(n: usize, l: &S, z: &Sizes) -> Result<Vec<Inequality>> {
    let ctx = l.ctx();
    let k = |v: i64| S::from_i64(v, ctx);
    let n = n as i64;
    let one = k(1);
    let pull = k(2 * z.b).div(&k(n - 2 * z.a0 - z.b))?;
    let a_side = k(n - 2 * z.a).mul(l).div(&k(2 * (n - z.a)))?;
    let e_side = k(n - z.e).mul(l).div(&k(2 * (n + z.e)))?.add(&pull);
    let leak = pull.add(&k(4 * z.d).div(&k(n - z.e))?);
    let force = k(2 * z.c * z.e).div(&k((z.a + z.b0 + z.c) * (n + z.e)))?;
    Ok(vec![
        Inequality::check("a_stays_in_sight", &a_side, &one, false),
        Inequality::check("e_stays_in_sight", &e_side, &one, false),
        Inequality::check("microcluster_pull", &leak, &force, false),
    ])
}

/// Whether some mirrored pair certainly breaks symmetry.
fn asymmetry_certain<S: Scalar>(f: &Profile<S>) -> bool {
    let v = f.values();
    let n = v.len();
    let c = v[0].add(&v[n - 1]);
    (1..n / 2).any(|i| {
        matches!(
            v[i].add(&v[n - 1 - i]).compare(&c),
            Trichotomy::CertainlyLess | Trichotomy::CertainlyGreater
        )
    })
}

/// The five-block consensus criterion on a single profile: `C` nonempty
/// and the three size conditions with the actual block sizes.
pub fn check_6tocons<S: Scalar>(f: &Profile<S>, p: &GoodPartition) -> Result<Certificate> {
    let n = f.n();
    let ctx = f.ctx();
    if n < 3 || n.is_multiple_of(2) {
        return Err(domain(format!("n = {n} must be odd and at least 3")));
    }
    if !p.is_well_formed(n) || p.e.first <= p.a.size {
        return Err(domain("partition is not a valid five-block split"));
    }
    if asymmetry_certain(f) {
        return Err(domain("profile is not symmetric"));
    }
    let l = f.diameter();
    let four = S::from_i64(4, ctx);
    let small = Inequality::check("diameter_at_most_4", &l, &four, false);
    let one = S::one(ctx);
    let a_max = &f.values()[p.a.size - 1];
    let e_min = &f.values()[p.e.first - 1];
    let apart = Inequality::check("a_out_of_sight_of_e", &a_max.add(&one), e_min, true);
    for q in [&small, &apart] {
        if q.status == Status::Fails {
            return Err(domain(format!("precondition `{}` fails", q.name)));
        }
    }

    let mut cert = Certificate::new("six-to-consensus", arith_of::<S>(ctx)).param("n", n);
    cert.evidence.partition = Some(*p);
    cert.evidence.inequalities.push(small);
    cert.evidence.inequalities.push(apart);
    cert.evidence.inequalities.push(Inequality::from_margin(
        "c_nonempty",
        &S::from_i64(p.c.size as i64 - 1, ctx),
        false,
    ));
    cert.evidence
        .inequalities
        .extend(size_conditions(n, &l, &Sizes::plain(p))?);
    Ok(cert.conclude())
}

/// Microcluster criterion for `f^{n,L}` after `t0` updates, uniform over all
/// regular refinements.
///
/// Runs the profile with a zero seed envelope, then at `t0` requires:
/// the diameter plus both extremist envelopes at most 4; a partition with
/// `|A|, |C|, |E| >= 2` satisfying the size conditions with every size
/// shifted by one against it; the last agent of `C` certainly seeing agent
/// 1 and the first certainly seeing the last agent of `E`, both through the
/// envelopes; and `A` certainly out of sight of `E` likewise.
pub fn certify_microcluster<S: Scalar>(
    n: usize,
    l: &Rational,
    t0: usize,
    spacing: Spacing,
    ctx: S::Ctx,
) -> Result<Certificate> {
    if n < 3 || n.is_multiple_of(2) {
        return Err(domain(format!("n = {n} must be odd and at least 3")));
    }
    let base = equally_spaced_with::<Exact>(n, l, spacing, ())?;
    let mut cert = Certificate::new("microcluster", arith_of::<S>(ctx))
        .param("n", n)
        .param("L", l)
        .param("t0", t0)
        .param(
            "spacing",
            match spacing {
                Spacing::Closed => "closed",
                Spacing::CellLeft => "cell-left",
            },
        );

    let end = walk(base.to_backend::<S>(ctx), DeviationEnvelope::zero(n, ctx), t0, |step| {
        cert.evidence.steps.push(step.record());
        true
    })?;
    let (f, env) = match end {
        WalkEnd::Done(f, env) => (f, env),
        WalkEnd::BlowUp { t, reason } => {
            cert.evidence
                .notes
                .push(format!("envelope blow-up at t = {t}: {reason}"));
            return Ok(cert.conclude());
        }
    };

    let one = S::one(ctx);
    let four = S::from_i64(4, ctx);
    let el = |i: usize| &env.e_l[i - 1];
    let er = |i: usize| &env.e_r[i - 1];
    let at = |i: usize| &f.values()[i - 1];

    let d = f.diameter();
    let spread = d.add(el(1)).add(er(n));
    cert.evidence
        .inequalities
        .push(Inequality::check("diameter_with_envelope", &spread, &four, false));

    let Some(p) = find_good_partition(&f, Some(&env)) else {
        cert.evidence
            .notes
            .push("no partition with A certainly out of sight of E".into());
        // nothing else to check; the criterion cannot be applied
        cert = cert.conclude();
        cert.verdict = match cert.verdict {
            super::Verdict::Certified => super::Verdict::Inconclusive,
            v => v,
        };
        return Ok(cert);
    };
    cert.evidence.partition = Some(p);
    let smallest = p.a.size.min(p.c.size).min(p.e.size) as i64;
    cert.evidence.inequalities.push(Inequality::from_margin(
        "min_block_size",
        &S::from_i64(smallest - 2, ctx),
        false,
    ));
    if smallest >= 2 {
        cert.evidence
            .inequalities
            .extend(size_conditions(n, &d, &Sizes::shifted(&p))?);
    }
    if let Some(c_max) = p.c.last() {
        let c_min = p.c.first;
        let e_max = p.e.last().expect("E is nonempty");
        cert.evidence.inequalities.push(Inequality::check(
            "c_sees_extremist",
            &at(c_max).add(er(c_max)),
            &at(1).sub(el(1)).add(&one),
            false,
        ));
        cert.evidence.inequalities.push(Inequality::check(
            "c_sees_center",
            &at(e_max).add(er(e_max)).sub(&one),
            &at(c_min).sub(el(c_min)),
            false,
        ));
    }
    let a_max = p.a.size;
    let e_min = p.e.first;
    cert.evidence.inequalities.push(Inequality::check(
        "a_out_of_sight_of_e",
        &at(a_max).add(er(a_max)),
        &at(e_min).sub(el(e_min)).sub(&one),
        true,
    ));
    Ok(cert.conclude())
}
