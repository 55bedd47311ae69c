use std::cmp::Ordering;
use std::fmt;

use rug::float::Round;
use rug::{Float, Rational};
use serde::{Deserialize, Serialize};

use super::{ArithMode, Scalar, Trichotomy};
use crate::error::{domain, Result};

pub const DEFAULT_PRECISION_BITS: u32 = 128;

/// Working precision of a ball, in mantissa bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Precision(u32);

impl Precision {
    pub fn new(bits: u32) -> Self {
        assert!(bits >= 2, "precision must be at least 2 bits");
        Precision(bits)
    }

    pub fn bits(self) -> u32 {
        self.0
    }
}

impl Default for Precision {
    fn default() -> Self {
        Precision(DEFAULT_PRECISION_BITS)
    }
}

/// A closed interval `[lo, hi]` with MPFR endpoints; every operation rounds
/// `lo` down and `hi` up.
#[derive(Clone, PartialEq)]
pub struct Ball {
    lo: Float,
    hi: Float,
}

/// Endpoint of a ball. Endpoints are never NaN, so the order is total.
#[derive(Clone, Debug, PartialEq)]
pub struct BallBound(pub Float);

impl Eq for BallBound {}

impl PartialOrd for BallBound {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for BallBound {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.partial_cmp(&other.0).expect("ball endpoints are never NaN")
    }
}

impl Ball {
    /// Builds `[lo, hi]`; the endpoints must be ordered.
    pub fn from_endpoints(lo: Float, hi: Float) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(domain("ball endpoints must satisfy lo <= hi"));
        }
        Ok(Ball { lo, hi })
    }

    pub fn lo_float(&self) -> &Float {
        &self.lo
    }

    pub fn hi_float(&self) -> &Float {
        &self.hi
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    /// `hi - lo`, rounded up.
    pub fn width(&self) -> Float {
        Float::with_val_round(self.prec(), &self.hi - &self.lo, Round::Up).0
    }

    fn prec(&self) -> u32 {
        self.lo.prec()
    }

    fn prec2(&self, rhs: &Self) -> u32 {
        self.prec().max(rhs.prec())
    }
}

macro_rules! rd {
    ($prec:expr, $e:expr) => {
        Float::with_val_round($prec, $e, Round::Down).0
    };
}

macro_rules! ru {
    ($prec:expr, $e:expr) => {
        Float::with_val_round($prec, $e, Round::Up).0
    };
}

impl fmt::Debug for Ball {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_point() {
            write!(f, "[{}]", self.lo.to_string_radix(10, Some(20)))
        } else {
            write!(
                f,
                "[{}, {}]",
                self.lo.to_string_radix_round(10, Some(20), Round::Down),
                self.hi.to_string_radix_round(10, Some(20), Round::Up)
            )
        }
    }
}

fn min_f(a: Float, b: Float) -> Float {
    if a <= b {
        a
    } else {
        b
    }
}

fn max_f(a: Float, b: Float) -> Float {
    if a >= b {
        a
    } else {
        b
    }
}

impl Scalar for Ball {
    type Ctx = Precision;
    type Bound = BallBound;

    const MODE: ArithMode = ArithMode::Ball;

    fn precision_bits(ctx: Precision) -> Option<u32> {
        Some(ctx.bits())
    }

    fn ctx(&self) -> Precision {
        Precision(self.prec())
    }

    fn from_i64(v: i64, ctx: Precision) -> Self {
        Ball {
            lo: rd!(ctx.0, v),
            hi: ru!(ctx.0, v),
        }
    }

    fn from_rational(r: &Rational, ctx: Precision) -> Self {
        Ball {
            lo: rd!(ctx.0, r),
            hi: ru!(ctx.0, r),
        }
    }

    fn from_f64(v: f64, ctx: Precision) -> Self {
        assert!(v.is_finite(), "non-finite double");
        Ball {
            lo: rd!(ctx.0, v),
            hi: ru!(ctx.0, v),
        }
    }

    fn add(&self, rhs: &Self) -> Self {
        let p = self.prec2(rhs);
        Ball {
            lo: rd!(p, &self.lo + &rhs.lo),
            hi: ru!(p, &self.hi + &rhs.hi),
        }
    }

    fn sub(&self, rhs: &Self) -> Self {
        let p = self.prec2(rhs);
        Ball {
            lo: rd!(p, &self.lo - &rhs.hi),
            hi: ru!(p, &self.hi - &rhs.lo),
        }
    }

    fn mul(&self, rhs: &Self) -> Self {
        let p = self.prec2(rhs);
        if self.lo.cmp0() != Some(Ordering::Less) && rhs.lo.cmp0() != Some(Ordering::Less) {
            return Ball {
                lo: rd!(p, &self.lo * &rhs.lo),
                hi: ru!(p, &self.hi * &rhs.hi),
            };
        }
        let pairs = [
            (&self.lo, &rhs.lo),
            (&self.lo, &rhs.hi),
            (&self.hi, &rhs.lo),
            (&self.hi, &rhs.hi),
        ];
        let mut lo: Option<Float> = None;
        let mut hi: Option<Float> = None;
        for (a, b) in pairs {
            let d = rd!(p, a * b);
            let u = ru!(p, a * b);
            lo = Some(match lo {
                Some(x) => min_f(x, d),
                None => d,
            });
            hi = Some(match hi {
                Some(x) => max_f(x, u),
                None => u,
            });
        }
        Ball {
            lo: lo.expect("four products"),
            hi: hi.expect("four products"),
        }
    }

    fn div(&self, rhs: &Self) -> Result<Self> {
        let positive = rhs.lo.cmp0() == Some(Ordering::Greater);
        let negative = rhs.hi.cmp0() == Some(Ordering::Less);
        if !positive && !negative {
            return Err(domain("division by an enclosure containing zero"));
        }
        let p = self.prec2(rhs);
        let pairs = [
            (&self.lo, &rhs.lo),
            (&self.lo, &rhs.hi),
            (&self.hi, &rhs.lo),
            (&self.hi, &rhs.hi),
        ];
        let mut lo: Option<Float> = None;
        let mut hi: Option<Float> = None;
        for (a, b) in pairs {
            let d = rd!(p, a / b);
            let u = ru!(p, a / b);
            lo = Some(match lo {
                Some(x) => min_f(x, d),
                None => d,
            });
            hi = Some(match hi {
                Some(x) => max_f(x, u),
                None => u,
            });
        }
        Ok(Ball {
            lo: lo.expect("four quotients"),
            hi: hi.expect("four quotients"),
        })
    }

    fn neg(&self) -> Self {
        Ball {
            lo: Float::with_val(self.prec(), -&self.hi),
            hi: Float::with_val(self.prec(), -&self.lo),
        }
    }

    fn min(&self, rhs: &Self) -> Self {
        Ball {
            lo: min_f(self.lo.clone(), rhs.lo.clone()),
            hi: min_f(self.hi.clone(), rhs.hi.clone()),
        }
    }

    fn max(&self, rhs: &Self) -> Self {
        Ball {
            lo: max_f(self.lo.clone(), rhs.lo.clone()),
            hi: max_f(self.hi.clone(), rhs.hi.clone()),
        }
    }

    fn mul_count(&self, k: usize) -> Self {
        let p = self.prec();
        let k = k as u64;
        Ball {
            lo: rd!(p, &self.lo * k),
            hi: ru!(p, &self.hi * k),
        }
    }

    fn div_count(&self, k: usize) -> Self {
        assert!(k > 0, "division by an empty count");
        let p = self.prec();
        let k = k as u64;
        Ball {
            lo: rd!(p, &self.lo / k),
            hi: ru!(p, &self.hi / k),
        }
    }

    fn hull(lower: &Self, upper: &Self) -> Self {
        let lo = min_f(lower.lo.clone(), upper.lo.clone());
        let hi = max_f(lower.hi.clone(), upper.hi.clone());
        Ball { lo, hi }
    }

    fn upper(&self) -> Self {
        Ball {
            lo: self.hi.clone(),
            hi: self.hi.clone(),
        }
    }

    fn lower(&self) -> Self {
        Ball {
            lo: self.lo.clone(),
            hi: self.lo.clone(),
        }
    }

    fn lo(&self) -> BallBound {
        BallBound(self.lo.clone())
    }

    fn hi(&self) -> BallBound {
        BallBound(self.hi.clone())
    }

    fn compare(&self, rhs: &Self) -> Trichotomy {
        if self.hi < rhs.lo {
            Trichotomy::CertainlyLess
        } else if self.lo > rhs.hi {
            Trichotomy::CertainlyGreater
        } else {
            Trichotomy::Unknown
        }
    }

    fn certainly_le(&self, rhs: &Self) -> bool {
        self.hi <= rhs.lo
    }

    fn certainly_ge(&self, rhs: &Self) -> bool {
        self.lo >= rhs.hi
    }

    fn same_point(&self, rhs: &Self) -> bool {
        self.is_point() && rhs.is_point() && self.lo == rhs.lo
    }

    fn contains(&self, r: &Rational) -> bool {
        self.lo <= *r && self.hi >= *r
    }

    fn lo_f64(&self) -> f64 {
        self.lo.to_f64_round(Round::Down)
    }

    fn hi_f64(&self) -> f64 {
        self.hi.to_f64_round(Round::Up)
    }

    fn format_lo(&self) -> String {
        self.lo.to_string_radix_round(10, None, Round::Down)
    }

    fn format_hi(&self) -> String {
        self.hi.to_string_radix_round(10, None, Round::Up)
    }

    fn is_nonneg(&self) -> bool {
        self.lo.cmp0() != Some(Ordering::Less)
    }
}
