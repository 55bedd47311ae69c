//! Arithmetic kernel.
//!
//! Every opinion, envelope entry and certified margin in the crate is a
//! [`Scalar`]. Three backends implement it:
//!
//! * [`Exact`]: GMP rationals, no rounding at all.
//! * [`Ball`]: `[lo, hi]` enclosures on MPFR floats with outward rounding.
//! * `f64`: plain doubles for statistical runs. Not certified.
//!
//! The enclosure contract: for any expression evaluated through this trait,
//! the real result over any point values drawn from the operand enclosures
//! lies inside the computed `[lo, hi]`.

mod ball;
mod exact;
mod float;
mod literal;

use std::cmp::Ordering;
use std::fmt;

use rug::Rational;
use serde::{Deserialize, Serialize};

use crate::error::Result;

pub use ball::{Ball, BallBound, Precision, DEFAULT_PRECISION_BITS};
pub use exact::Exact;
pub use float::F64Bound;
pub use literal::parse_rational;

/// Outcome of comparing two enclosures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Trichotomy {
    CertainlyLess,
    CertainlyGreater,
    /// Only produced by exact backends.
    CertainlyEqual,
    Unknown,
}

impl Trichotomy {
    pub fn is_certain(self) -> bool {
        self != Trichotomy::Unknown
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArithMode {
    Rational,
    Ball,
    Float,
}

impl ArithMode {
    pub fn name(self) -> &'static str {
        match self {
            ArithMode::Rational => "rational",
            ArithMode::Ball => "ball",
            ArithMode::Float => "float",
        }
    }
}

impl fmt::Display for ArithMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ArithMode {
    type Err = crate::HkError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rational" | "exact" => Ok(ArithMode::Rational),
            "ball" | "interval" => Ok(ArithMode::Ball),
            "float" | "f64" => Ok(ArithMode::Float),
            other => Err(crate::error::domain(format!("unknown arithmetic mode `{other}`"))),
        }
    }
}

/// A real number carried with enclosure semantics.
pub trait Scalar: Clone + fmt::Debug + Send + Sync + 'static {
    /// Construction context (precision for balls, nothing otherwise).
    type Ctx: Copy + fmt::Debug + Send + Sync + PartialEq + 'static;
    /// Totally ordered endpoint type; `lo()`/`hi()` return these.
    type Bound: Ord + Clone + fmt::Debug + Send + Sync;

    const MODE: ArithMode;

    fn ctx(&self) -> Self::Ctx;

    fn from_i64(v: i64, ctx: Self::Ctx) -> Self;
    fn from_rational(r: &Rational, ctx: Self::Ctx) -> Self;
    /// Exact value of the double `v` (finite), enclosed.
    fn from_f64(v: f64, ctx: Self::Ctx) -> Self;

    fn zero(ctx: Self::Ctx) -> Self {
        Self::from_i64(0, ctx)
    }
    fn one(ctx: Self::Ctx) -> Self {
        Self::from_i64(1, ctx)
    }
    fn from_ratio(num: i64, den: i64, ctx: Self::Ctx) -> Self {
        Self::from_rational(&Rational::from((num, den)), ctx)
    }

    fn add(&self, rhs: &Self) -> Self;
    fn sub(&self, rhs: &Self) -> Self;
    fn mul(&self, rhs: &Self) -> Self;
    /// Fails with `DomainError` when the divisor enclosure contains zero.
    fn div(&self, rhs: &Self) -> Result<Self>;
    fn neg(&self) -> Self;
    fn min(&self, rhs: &Self) -> Self;
    fn max(&self, rhs: &Self) -> Self;

    fn mul_count(&self, k: usize) -> Self;
    /// Division by a positive agent count.
    fn div_count(&self, k: usize) -> Self;

    /// `[lower.lo, upper.hi]`.
    fn hull(lower: &Self, upper: &Self) -> Self;
    /// The point enclosure at `hi`.
    fn upper(&self) -> Self;
    /// The point enclosure at `lo`.
    fn lower(&self) -> Self;

    fn lo(&self) -> Self::Bound;
    fn hi(&self) -> Self::Bound;

    fn compare(&self, rhs: &Self) -> Trichotomy;

    /// Values are known to be identical (exact equality, or the same point).
    fn same_point(&self, rhs: &Self) -> bool;

    /// Whether the enclosure contains the rational `r`.
    fn contains(&self, r: &Rational) -> bool;

    fn lo_f64(&self) -> f64;
    fn hi_f64(&self) -> f64;
    /// Decimal (or `p/q` for exact values) text for the lower endpoint, rounded down.
    fn format_lo(&self) -> String;
    fn format_hi(&self) -> String;

    /// Working precision of the context, for enclosure backends.
    fn precision_bits(_ctx: Self::Ctx) -> Option<u32> {
        None
    }

    /// Significant bits of the denominator for exact rationals; 0 otherwise.
    fn size_bits(&self) -> u32 {
        0
    }

    // Derived predicates, all phrased so that `true` is a certain statement
    // about every point in the enclosures.

    fn certainly_lt(&self, rhs: &Self) -> bool {
        self.compare(rhs) == Trichotomy::CertainlyLess
    }
    fn certainly_le(&self, rhs: &Self) -> bool {
        self.hi() <= rhs.lo()
    }
    fn certainly_gt(&self, rhs: &Self) -> bool {
        self.compare(rhs) == Trichotomy::CertainlyGreater
    }
    fn certainly_ge(&self, rhs: &Self) -> bool {
        self.lo() >= rhs.hi()
    }
    fn possibly_le(&self, rhs: &Self) -> bool {
        !self.certainly_gt(rhs)
    }
    fn possibly_lt(&self, rhs: &Self) -> bool {
        !self.certainly_ge(rhs)
    }
    fn is_nonneg(&self) -> bool {
        self.lo() >= Self::zero(self.ctx()).lo()
    }
}

/// Sum of a sequence; `zero(ctx)` for an empty one.
pub fn sum<'a, S: Scalar>(values: impl IntoIterator<Item = &'a S>, ctx: S::Ctx) -> S {
    values.into_iter().fold(S::zero(ctx), |acc, v| acc.add(v))
}

/// Arithmetic mean of a non-empty slice.
pub fn average<S: Scalar>(values: &[S]) -> Result<S> {
    let first = values
        .first()
        .ok_or_else(|| crate::error::domain("average of an empty slice"))?;
    Ok(sum(values, first.ctx()).div_count(values.len()))
}

/// Largest denominator size over a set of values, for the exact-mode guard.
pub fn max_size_bits<'a, S: Scalar>(values: impl IntoIterator<Item = &'a S>) -> u32 {
    values.into_iter().map(Scalar::size_bits).max().unwrap_or(0)
}

/// Raises `ResourceError` once exact denominators exceed `cap` bits.
pub fn check_size_guard<'a, S: Scalar>(values: impl IntoIterator<Item = &'a S>, cap: Option<u32>) -> Result<()> {
    if let Some(cap) = cap {
        let bits = max_size_bits(values);
        if bits > cap {
            return Err(crate::HkError::Resource(format!(
                "denominator grew to {bits} bits (cap {cap})"
            )));
        }
    }
    Ok(())
}

/// Orders two bounds; used by callers holding `Bound` values directly.
pub fn cmp_bounds<S: Scalar>(a: &S::Bound, b: &S::Bound) -> Ordering {
    a.cmp(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ball(v: i64) -> Ball {
        Ball::from_i64(v, Precision::default())
    }

    #[test]
    fn integer_addition_is_exact() {
        let three = Exact::from_i64(1, ()).add(&Exact::from_i64(2, ()));
        assert_eq!(three, Exact::from_i64(3, ()));
        let b = ball(1).add(&ball(2));
        assert_eq!(b.lo_f64(), 3.0);
        assert_eq!(b.hi_f64(), 3.0);
    }

    #[test]
    fn rational_division_does_not_truncate() {
        let third = Exact::from_i64(1, ()).div(&Exact::from_i64(3, ())).unwrap();
        assert_eq!(third.value(), &Rational::from((1, 3)));
        assert_eq!(third.mul_count(3), Exact::from_i64(1, ()));
    }

    #[test]
    fn ball_average_is_tight() {
        let ctx = Precision::default();
        let vals = [Ball::from_i64(0, ctx), Ball::from_i64(1, ctx)];
        let avg = average(&vals).unwrap();
        let exact = average(&[Exact::from_i64(0, ()), Exact::from_i64(1, ())]).unwrap();
        assert!(avg.contains(exact.value()));
        // 0.5 is representable: zero width.
        assert_eq!(avg.lo_f64(), 0.5);
        assert_eq!(avg.hi_f64(), 0.5);

        let thirds = Ball::from_i64(1, ctx).div_count(3);
        assert!(thirds.contains(&Rational::from((1, 3))));
        let ulp = rug::Float::with_val(ctx.bits(), 1) >> (ctx.bits() - 1);
        assert!(thirds.width() <= ulp * 2u32);
    }

    #[test]
    fn division_by_enclosure_of_zero_fails() {
        let ctx = Precision::default();
        let z = Ball::hull(&Ball::from_i64(-1, ctx), &Ball::from_i64(1, ctx));
        assert!(Ball::from_i64(1, ctx).div(&z).is_err());
        assert!(Exact::from_i64(1, ()).div(&Exact::from_i64(0, ())).is_err());
        assert!(1f64.div(&0f64).is_err());
    }

    #[test]
    fn compare_examples() {
        let ctx = Precision::default();
        assert_eq!(ball(0).compare(&ball(1)), Trichotomy::CertainlyLess);
        let a = Ball::hull(&ball(0), &ball(2));
        let b = Ball::hull(&ball(1), &ball(3));
        assert_eq!(a.compare(&b), Trichotomy::Unknown);
        let half = Exact::from_ratio(1, 2, ());
        assert_eq!(half.compare(&Exact::from_ratio(2, 4, ())), Trichotomy::CertainlyEqual);
        // balls never certify equality, even for identical points
        let h = Ball::from_ratio(1, 2, ctx);
        assert_eq!(h.compare(&h.clone()), Trichotomy::Unknown);
    }

    #[test]
    fn size_guard_trips() {
        let mut x = Exact::from_i64(1, ());
        for _ in 0..40 {
            x = x.div_count(3);
        }
        assert!(check_size_guard([&x], Some(32)).is_err());
        assert!(check_size_guard([&x], Some(128)).is_ok());
        assert!(check_size_guard([&x], None).is_ok());
    }

    #[test]
    fn mode_names_round_trip() {
        for m in [ArithMode::Rational, ArithMode::Ball, ArithMode::Float] {
            assert_eq!(m.name().parse::<ArithMode>().unwrap(), m);
        }
        assert!("quad".parse::<ArithMode>().is_err());
    }
}
