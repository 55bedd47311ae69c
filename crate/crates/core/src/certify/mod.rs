//! Consensus certificates.
//!
//! Three criteria, each run on a base profile with a deviation envelope so
//! that the verdict holds for every regular refinement at once:
//!
//! * [`certify_symmetric_center`]: the diameter plus the extremists'
//!   envelopes drops below 2 for an odd symmetric profile.
//! * [`certify_grid_interval`]: the same test at every point of a grid of
//!   diameters, seeded with a tent envelope that covers the gaps.
//! * [`certify_microcluster`]: a five-block partition whose block sizes
//!   force the extremists into the center.

mod center;
mod certificate;
mod grid;
mod microcluster;
mod partition;
mod theory;

pub use center::certify_symmetric_center;
pub use certificate::{
    Arith, Block, Certificate, Evidence, GoodPartition, GridPoint, Inequality, Status, StepRecord, Verdict,
};
pub use grid::{certify_grid_interval, GridSpec};
pub use microcluster::{certify_microcluster, check_6tocons};
pub use partition::{find_good_partition, is_good};
pub use theory::theory_constants;

use crate::deviation::{propagate, DeviationEnvelope};
use crate::error::{HkError, Result};
use crate::numerics::Scalar;
use crate::profile::Profile;
use crate::update::{is_frozen, neighborhoods, update_with};

/// What one step of [`walk`] shows the visitor.
pub(crate) struct StepView<'a, S: Scalar> {
    pub t: usize,
    pub profile: &'a Profile<S>,
    pub env: &'a DeviationEnvelope<S>,
    /// The base profile is certainly a fixed point.
    pub frozen: bool,
}

impl<S: Scalar> StepView<'_, S> {
    pub fn record(&self) -> StepRecord {
        StepRecord::new(
            self.t,
            &self.profile.diameter(),
            &self.env.e_l[0],
            &self.env.e_r[self.env.n() - 1],
        )
    }
}

pub(crate) enum WalkEnd<S: Scalar> {
    /// Stopped by the visitor or at the last step.
    Done(Profile<S>, DeviationEnvelope<S>),
    /// The envelope outgrew the neighbourhoods.
    BlowUp { t: usize, reason: String },
}

/// Steps the profile and its envelope for up to `steps` updates, showing
/// every state (from `t = 0`) to `visit`; returning `false` stops the walk.
pub(crate) fn walk<S: Scalar>(
    f0: Profile<S>,
    env0: DeviationEnvelope<S>,
    steps: usize,
    mut visit: impl FnMut(&StepView<S>) -> bool,
) -> Result<WalkEnd<S>> {
    let (mut f, mut env) = (f0, env0);
    let mut t = 0;
    loop {
        let idx = neighborhoods(&f);
        let view = StepView {
            t,
            profile: &f,
            env: &env,
            frozen: is_frozen(&f, &idx),
        };
        if !visit(&view) || t == steps {
            return Ok(WalkEnd::Done(f, env));
        }
        let next = update_with(&f, &idx);
        env = match propagate(&f, &next, &env) {
            Ok(e) => e,
            Err(HkError::CertificationFailure(reason)) => return Ok(WalkEnd::BlowUp { t: t + 1, reason }),
            Err(e) => return Err(e),
        };
        f = next;
        t += 1;
    }
}
