use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::numerics::{parse_rational, ArithMode, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    Certified,
    Inconclusive,
    Refuted,
}

impl Verdict {
    /// Process exit status for the verdict.
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Certified => 0,
            Verdict::Inconclusive => 2,
            Verdict::Refuted => 3,
        }
    }

    /// Certified only if all are; Refuted if any is.
    pub fn all(verdicts: impl IntoIterator<Item = Verdict>) -> Verdict {
        let mut out = Verdict::Certified;
        for v in verdicts {
            match v {
                Verdict::Refuted => return Verdict::Refuted,
                Verdict::Inconclusive => out = Verdict::Inconclusive,
                Verdict::Certified => {}
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Holds,
    Fails,
    Unknown,
}

/// One checked inequality `lhs <= rhs` (or `<`), recorded via its margin
/// `rhs - lhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inequality {
    pub name: String,
    /// Lower endpoint of the margin, rounded down.
    pub margin_lo: String,
    pub margin_hi: String,
    pub strict: bool,
    pub status: Status,
}

impl Inequality {
    pub fn from_margin<S: Scalar>(name: &str, margin: &S, strict: bool) -> Self {
        let zero = S::zero(margin.ctx());
        let holds = if strict {
            margin.certainly_gt(&zero)
        } else {
            margin.certainly_ge(&zero)
        };
        let fails = if strict {
            margin.certainly_le(&zero)
        } else {
            margin.certainly_lt(&zero)
        };
        Inequality {
            name: name.to_string(),
            margin_lo: margin.format_lo(),
            margin_hi: margin.format_hi(),
            strict,
            status: if holds {
                Status::Holds
            } else if fails {
                Status::Fails
            } else {
                Status::Unknown
            },
        }
    }

    /// `lhs <= rhs`, or `lhs < rhs` when `strict`.
    pub fn check<S: Scalar>(name: &str, lhs: &S, rhs: &S, strict: bool) -> Self {
        Self::from_margin(name, &rhs.sub(lhs), strict)
    }

    pub fn verdict(&self) -> Verdict {
        match self.status {
            Status::Holds => Verdict::Certified,
            Status::Fails => Verdict::Refuted,
            Status::Unknown => Verdict::Inconclusive,
        }
    }

    /// Re-reads the printed lower margin and checks it independently.
    fn recheck(&self) -> bool {
        match parse_rational(&self.margin_lo) {
            Ok(m) => {
                if self.strict {
                    m > 0
                } else {
                    m >= 0
                }
            }
            Err(_) => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    pub diameter: [String; 2],
    /// Upper end of `e_l^t(1)`.
    pub el1: String,
    /// Upper end of `e_r^t(n)`.
    pub ern: String,
}

impl StepRecord {
    pub fn new<S: Scalar>(t: usize, diameter: &S, el1: &S, ern: &S) -> Self {
        StepRecord {
            t,
            diameter: [diameter.format_lo(), diameter.format_hi()],
            el1: el1.format_hi(),
            ern: ern.format_hi(),
        }
    }
}

/// A block of consecutive agents; `first` is 1-based and meaningful even
/// when the block is empty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub first: usize,
    pub size: usize,
}

impl Block {
    /// Last member, `None` when empty.
    pub fn last(&self) -> Option<usize> {
        (self.size > 0).then(|| self.first + self.size - 1)
    }

    pub fn contains(&self, i: usize) -> bool {
        i >= self.first && i < self.first + self.size
    }

    /// One past the last member.
    pub fn end(&self) -> usize {
        self.first + self.size
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoodPartition {
    #[serde(rename = "A")]
    pub a: Block,
    #[serde(rename = "B")]
    pub b: Block,
    #[serde(rename = "C")]
    pub c: Block,
    #[serde(rename = "D")]
    pub d: Block,
    #[serde(rename = "E")]
    pub e: Block,
}

/// Outcome at one grid diameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    /// The grid diameter, exact.
    pub l: String,
    pub verdict: Verdict,
    /// First step meeting all conditions.
    pub t: Option<usize>,
    pub steps: Vec<StepRecord>,
    /// The conditions at step `t`, or at the last step reached.
    pub inequalities: Vec<Inequality>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub steps: Vec<StepRecord>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub partition: Option<GoodPartition>,
    pub inequalities: Vec<Inequality>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub points: Vec<GridPoint>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Arith {
    pub mode: ArithMode,
    pub bits: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub verdict: Verdict,
    pub criterion: String,
    pub params: BTreeMap<String, String>,
    pub evidence: Evidence,
    pub arith: Arith,
}

impl Certificate {
    pub fn new(criterion: &str, arith: Arith) -> Self {
        Certificate {
            verdict: Verdict::Inconclusive,
            criterion: criterion.to_string(),
            params: BTreeMap::new(),
            evidence: Evidence::default(),
            arith,
        }
    }

    pub fn param(mut self, key: &str, value: impl ToString) -> Self {
        self.params.insert(key.to_string(), value.to_string());
        self
    }

    /// Sets the verdict from the recorded inequalities and grid points, then
    /// gates a Certified verdict on an independent re-check of the printed
    /// margins.
    pub fn conclude(mut self) -> Self {
        let verdict = Verdict::all(
            self.evidence
                .inequalities
                .iter()
                .map(Inequality::verdict)
                .chain(self.evidence.points.iter().map(|p| p.verdict)),
        );
        self.verdict = verdict;
        self.gate()
    }

    /// Downgrades Certified to Inconclusive unless every margin re-parses as
    /// a satisfied bound and every grid point is Certified.
    pub fn gate(mut self) -> Self {
        if self.verdict != Verdict::Certified {
            return self;
        }
        let margins_ok = self
            .evidence
            .inequalities
            .iter()
            .all(|q| q.status == Status::Holds && q.recheck());
        let points_ok = self.evidence.points.iter().all(|p| {
            p.verdict == Verdict::Certified
                && p.t.is_some()
                && !p.inequalities.is_empty()
                && p.inequalities.iter().all(|q| q.status == Status::Holds && q.recheck())
        });
        let nonempty = !self.evidence.inequalities.is_empty() || !self.evidence.points.is_empty();
        if !(margins_ok && points_ok && nonempty) {
            self.verdict = Verdict::Inconclusive;
            self.evidence
                .notes
                .push("certified verdict withdrawn: evidence re-check failed".into());
        }
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serializes")
    }
}

pub(crate) fn arith_of<S: Scalar>(ctx: S::Ctx) -> Arith {
    Arith {
        mode: S::MODE,
        bits: S::precision_bits(ctx),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{Ball, Exact, Precision};

    #[test]
    fn inequality_status() {
        let one = Exact::from_i64(1, ());
        let two = Exact::from_i64(2, ());
        assert_eq!(Inequality::check("a", &one, &two, true).status, Status::Holds);
        assert_eq!(Inequality::check("b", &one, &one, true).status, Status::Fails);
        assert_eq!(Inequality::check("c", &one, &one, false).status, Status::Holds);
        let ctx = Precision::default();
        let fuzzy = Ball::hull(&Ball::from_i64(0, ctx), &Ball::from_i64(2, ctx));
        let q = Inequality::check("d", &fuzzy, &Ball::from_i64(1, ctx), false);
        assert_eq!(q.status, Status::Unknown);
        assert_eq!(q.verdict(), Verdict::Inconclusive);
    }

    #[test]
    fn gate_rejects_tampered_margins() {
        let one = Exact::from_i64(1, ());
        let two = Exact::from_i64(2, ());
        let mut c = Certificate::new("test", arith_of::<Exact>(()));
        c.evidence.inequalities.push(Inequality::check("x", &one, &two, true));
        let ok = c.clone().conclude();
        assert_eq!(ok.verdict, Verdict::Certified);
        c.evidence.inequalities[0].margin_lo = "-1/3".into();
        assert_eq!(c.conclude().verdict, Verdict::Inconclusive);
    }

    #[test]
    fn empty_evidence_is_not_certified() {
        let c = Certificate::new("empty", arith_of::<Exact>(())).conclude();
        assert_eq!(c.verdict, Verdict::Inconclusive);
    }

    #[test]
    fn json_round_trip() {
        let one = Exact::from_i64(1, ());
        let mut c = Certificate::new("rt", arith_of::<Exact>(())).param("n", 5);
        c.evidence.steps.push(StepRecord::new(0, &one, &one, &one));
        c.evidence.partition = Some(GoodPartition {
            a: Block { first: 1, size: 2 },
            b: Block { first: 3, size: 0 },
            c: Block { first: 3, size: 1 },
            d: Block { first: 4, size: 0 },
            e: Block { first: 4, size: 1 },
        });
        let text = c.to_json();
        assert!(text.contains("\"A\""));
        let back: Certificate = serde_json::from_str(&text).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn verdict_combination() {
        use Verdict::*;
        assert_eq!(Verdict::all([Certified, Certified]), Certified);
        assert_eq!(Verdict::all([Certified, Inconclusive]), Inconclusive);
        assert_eq!(Verdict::all([Inconclusive, Refuted]), Refuted);
        assert_eq!([Certified, Inconclusive, Refuted].map(Verdict::exit_code), [0, 2, 3]);
    }
}
