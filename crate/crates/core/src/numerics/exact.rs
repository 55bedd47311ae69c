use std::cmp::Ordering;
use std::fmt;

use rug::ops::AssignRound;
use rug::Rational;

use super::{ArithMode, Scalar, Trichotomy};
use crate::error::{domain, Result};

/// An exact rational; `lo = hi`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Exact(Rational);

impl Exact {
    pub fn new(r: Rational) -> Self {
        Exact(r)
    }

    pub fn value(&self) -> &Rational {
        &self.0
    }

    pub fn into_inner(self) -> Rational {
        self.0
    }
}

impl fmt::Debug for Exact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for Exact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<Rational> for Exact {
    fn from(r: Rational) -> Self {
        Exact(r)
    }
}

impl Scalar for Exact {
    type Ctx = ();
    type Bound = Rational;

    const MODE: ArithMode = ArithMode::Rational;

    fn ctx(&self) {}

    fn from_i64(v: i64, _: ()) -> Self {
        Exact(Rational::from(v))
    }

    fn from_rational(r: &Rational, _: ()) -> Self {
        Exact(r.clone())
    }

    fn from_f64(v: f64, _: ()) -> Self {
        Exact(Rational::from_f64(v).expect("finite double"))
    }

    fn add(&self, rhs: &Self) -> Self {
        Exact(Rational::from(&self.0 + &rhs.0))
    }

    fn sub(&self, rhs: &Self) -> Self {
        Exact(Rational::from(&self.0 - &rhs.0))
    }

    fn mul(&self, rhs: &Self) -> Self {
        Exact(Rational::from(&self.0 * &rhs.0))
    }

    fn div(&self, rhs: &Self) -> Result<Self> {
        if rhs.0.cmp0() == Ordering::Equal {
            return Err(domain("division by zero"));
        }
        Ok(Exact(Rational::from(&self.0 / &rhs.0)))
    }

    fn neg(&self) -> Self {
        Exact(Rational::from(-&self.0))
    }

    fn min(&self, rhs: &Self) -> Self {
        if self.0 <= rhs.0 {
            self.clone()
        } else {
            rhs.clone()
        }
    }

    fn max(&self, rhs: &Self) -> Self {
        if self.0 >= rhs.0 {
            self.clone()
        } else {
            rhs.clone()
        }
    }

    fn mul_count(&self, k: usize) -> Self {
        let mut r = self.0.clone();
        r *= rug::Integer::from(k);
        Exact(r)
    }

    fn div_count(&self, k: usize) -> Self {
        assert!(k > 0, "division by an empty count");
        let mut r = self.0.clone();
        r /= rug::Integer::from(k);
        Exact(r)
    }

    fn hull(lower: &Self, upper: &Self) -> Self {
        debug_assert_eq!(lower, upper, "exact hull of distinct values");
        lower.clone()
    }

    fn upper(&self) -> Self {
        self.clone()
    }

    fn lower(&self) -> Self {
        self.clone()
    }

    fn lo(&self) -> Rational {
        self.0.clone()
    }

    fn hi(&self) -> Rational {
        self.0.clone()
    }

    fn compare(&self, rhs: &Self) -> Trichotomy {
        match self.0.cmp(&rhs.0) {
            Ordering::Less => Trichotomy::CertainlyLess,
            Ordering::Greater => Trichotomy::CertainlyGreater,
            Ordering::Equal => Trichotomy::CertainlyEqual,
        }
    }

    fn certainly_le(&self, rhs: &Self) -> bool {
        self.0 <= rhs.0
    }

    fn certainly_ge(&self, rhs: &Self) -> bool {
        self.0 >= rhs.0
    }

    fn same_point(&self, rhs: &Self) -> bool {
        self.0 == rhs.0
    }

    fn contains(&self, r: &Rational) -> bool {
        &self.0 == r
    }

    fn lo_f64(&self) -> f64 {
        let mut f = rug::Float::new(53);
        f.assign_round(&self.0, rug::float::Round::Down);
        f.to_f64()
    }

    fn hi_f64(&self) -> f64 {
        let mut f = rug::Float::new(53);
        f.assign_round(&self.0, rug::float::Round::Up);
        f.to_f64()
    }

    fn format_lo(&self) -> String {
        self.0.to_string()
    }

    fn format_hi(&self) -> String {
        self.0.to_string()
    }

    fn size_bits(&self) -> u32 {
        self.0.denom().significant_bits()
    }

    fn is_nonneg(&self) -> bool {
        self.0.cmp0() != Ordering::Less
    }
}
