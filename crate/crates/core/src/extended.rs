//! The projectively extended real line, where `+∞` and `-∞` are one point.

use std::fmt;

use serde::{Deserialize, Serialize};

/// A point of ℝ ∪ {∞}.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ExtendedReal {
    Finite(f64),
    Infinity,
}

impl ExtendedReal {
    /// Maps both signed IEEE infinities onto the single point at infinity.
    pub fn from_f64(x: f64) -> Self {
        if x.is_infinite() {
            ExtendedReal::Infinity
        } else {
            ExtendedReal::Finite(x)
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, ExtendedReal::Infinity)
    }

    pub fn finite(&self) -> Option<f64> {
        match *self {
            ExtendedReal::Finite(x) => Some(x),
            ExtendedReal::Infinity => None,
        }
    }

    /// Finite value, or `f64::INFINITY` for the point at infinity.
    pub fn to_f64(&self) -> f64 {
        match *self {
            ExtendedReal::Finite(x) => x,
            ExtendedReal::Infinity => f64::INFINITY,
        }
    }
}

impl From<f64> for ExtendedReal {
    fn from(x: f64) -> Self {
        ExtendedReal::from_f64(x)
    }
}

impl fmt::Display for ExtendedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedReal::Finite(x) => write!(f, "{x}"),
            ExtendedReal::Infinity => write!(f, "inf"),
        }
    }
}
