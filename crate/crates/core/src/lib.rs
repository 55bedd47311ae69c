//! Certified simulation of the bounded-confidence (Hegselmann–Krause) opinion
//! dynamics on the real line.

pub mod certify;
pub mod deviation;
pub mod error;
pub mod numerics;
pub mod profile;
pub mod stochastic;
pub mod update;

pub use error::{HkError, Result};
pub use numerics::{ArithMode, Ball, Exact, Precision, Scalar, Trichotomy};
pub use profile::{Profile, Spacing};
