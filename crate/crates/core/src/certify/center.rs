use crate::deviation::DeviationEnvelope;
use crate::error::{domain, Result};
use crate::numerics::{Exact, Scalar};
use crate::profile::Profile;

use super::certificate::{arith_of, Certificate, Inequality, Verdict};
use super::{walk, WalkEnd};

/// Central-agent criterion for an odd symmetric profile `f` with seed
/// envelope `env0`: Certified at the first step `s <= t` where
/// `D(U^s f) + e_l^s(1) + e_r^s(n) < 2` holds with certainty. The claim then
/// covers every canonical refinement with an even number of inserted agents
/// per gap, since those keep a central agent.
///
/// Refuted when the base trajectory freezes with diameter certainly `>= 2`,
/// after which the test can never pass. Symmetry and parity are checked
/// exactly on `f`; the run itself uses backend `S`.
pub fn certify_symmetric_center<S: Scalar>(
    f: &Profile<Exact>,
    env0: &DeviationEnvelope<Exact>,
    t: usize,
    ctx: S::Ctx,
) -> Result<Certificate> {
    let n = f.n();
    if n.is_multiple_of(2) {
        return Err(domain(format!("n = {n} is even; the criterion needs a central agent")));
    }
    if !f.is_symmetric() {
        return Err(domain("profile is not symmetric"));
    }
    if env0.n() != n {
        return Err(domain("envelope length differs from the profile"));
    }

    let mut cert = Certificate::new("symmetric-center", arith_of::<S>(ctx))
        .param("n", n)
        .param("t", t);
    let two = S::from_i64(2, ctx);
    let mut verdict = Verdict::Inconclusive;
    let mut last = None;
    let end = walk(f.to_backend::<S>(ctx), env0.to_backend::<S>(ctx), t, |step| {
        cert.evidence.steps.push(step.record());
        let d = step.profile.diameter();
        let total = d.add(&step.env.e_l[0]).add(&step.env.e_r[n - 1]);
        let q = Inequality::check("diameter_plus_extremist_bounds", &total, &two, true);
        if q.verdict() == Verdict::Certified {
            verdict = Verdict::Certified;
            last = Some(q);
            return false;
        }
        last = Some(q);
        if step.frozen && d.certainly_ge(&two) {
            verdict = Verdict::Refuted;
            cert.evidence
                .notes
                .push(format!("base profile frozen at t = {} with diameter >= 2", step.t));
            return false;
        }
        true
    })?;
    if let WalkEnd::BlowUp { t, reason } = end {
        cert.evidence
            .notes
            .push(format!("envelope blow-up at t = {t}: {reason}"));
    }
    cert.evidence.inequalities.extend(last);
    cert.verdict = verdict;
    Ok(cert.gate())
}
