use std::cmp::Ordering;

use rug::Rational;

use super::{ArithMode, Scalar, Trichotomy};
use crate::error::{domain, Result};

/// Totally ordered double (values are finite in practice).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct F64Bound(pub f64);

impl Eq for F64Bound {}

impl PartialOrd for F64Bound {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for F64Bound {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

// Uncertified: comparisons treat the double as the true value.
impl Scalar for f64 {
    type Ctx = ();
    type Bound = F64Bound;

    const MODE: ArithMode = ArithMode::Float;

    fn ctx(&self) {}

    fn from_i64(v: i64, _: ()) -> Self {
        v as f64
    }

    fn from_rational(r: &Rational, _: ()) -> Self {
        r.to_f64()
    }

    fn from_f64(v: f64, _: ()) -> Self {
        v
    }

    fn add(&self, rhs: &Self) -> Self {
        self + rhs
    }

    fn sub(&self, rhs: &Self) -> Self {
        self - rhs
    }

    fn mul(&self, rhs: &Self) -> Self {
        self * rhs
    }

    fn div(&self, rhs: &Self) -> Result<Self> {
        if *rhs == 0.0 {
            return Err(domain("division by zero"));
        }
        Ok(self / rhs)
    }

    fn neg(&self) -> Self {
        -self
    }

    fn min(&self, rhs: &Self) -> Self {
        f64::min(*self, *rhs)
    }

    fn max(&self, rhs: &Self) -> Self {
        f64::max(*self, *rhs)
    }

    fn mul_count(&self, k: usize) -> Self {
        self * k as f64
    }

    fn div_count(&self, k: usize) -> Self {
        assert!(k > 0, "division by an empty count");
        self / k as f64
    }

    fn hull(lower: &Self, _upper: &Self) -> Self {
        *lower
    }

    fn upper(&self) -> Self {
        *self
    }

    fn lower(&self) -> Self {
        *self
    }

    fn lo(&self) -> F64Bound {
        F64Bound(*self)
    }

    fn hi(&self) -> F64Bound {
        F64Bound(*self)
    }

    fn compare(&self, rhs: &Self) -> Trichotomy {
        match self.partial_cmp(rhs) {
            Some(Ordering::Less) => Trichotomy::CertainlyLess,
            Some(Ordering::Greater) => Trichotomy::CertainlyGreater,
            Some(Ordering::Equal) => Trichotomy::CertainlyEqual,
            None => Trichotomy::Unknown,
        }
    }

    fn same_point(&self, rhs: &Self) -> bool {
        self == rhs
    }

    fn contains(&self, r: &Rational) -> bool {
        *self == r.to_f64()
    }

    fn lo_f64(&self) -> f64 {
        *self
    }

    fn hi_f64(&self) -> f64 {
        *self
    }

    fn format_lo(&self) -> String {
        format!("{self:?}")
    }

    fn format_hi(&self) -> String {
        format!("{self:?}")
    }
}
