//! Extended reals: a finite `f64` or one of the two infinities.
//!
//! Envelope functions take the value −∞ on coordinate hyperplanes. Keeping that
//! as a distinct variant (instead of `f64::NEG_INFINITY` flowing through
//! arithmetic) makes every comparison against it exact and keeps `NaN` out.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Neg};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtReal {
    NegInf,
    Finite(f64),
    PosInf,
}

impl ExtReal {
    pub const ZERO: ExtReal = ExtReal::Finite(0.0);

    /// Maps an `f64` onto the extended line. `NaN` has no image.
    pub fn from_f64(x: f64) -> Option<Self> {
        if x.is_nan() {
            None
        } else if x == f64::NEG_INFINITY {
            Some(ExtReal::NegInf)
        } else if x == f64::INFINITY {
            Some(ExtReal::PosInf)
        } else {
            Some(ExtReal::Finite(x))
        }
    }

    /// Natural log of a non-negative real; `ln 0 = −∞`.
    pub fn ln(x: f64) -> Self {
        debug_assert!(x >= 0.0);
        if x == 0.0 {
            ExtReal::NegInf
        } else {
            ExtReal::from_f64(x.ln()).unwrap_or(ExtReal::NegInf)
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtReal::Finite(x) => Some(x),
            _ => None,
        }
    }

    pub fn to_f64(self) -> f64 {
        match self {
            ExtReal::NegInf => f64::NEG_INFINITY,
            ExtReal::Finite(x) => x,
            ExtReal::PosInf => f64::INFINITY,
        }
    }

    /// `self − other`, undefined for `∞ − ∞` of equal sign.
    pub fn checked_sub(self, other: ExtReal) -> Option<ExtReal> {
        self.checked_add(-other)
    }

    pub fn checked_add(self, other: ExtReal) -> Option<ExtReal> {
        use ExtReal::*;
        match (self, other) {
            (Finite(a), Finite(b)) => ExtReal::from_f64(a + b),
            (NegInf, PosInf) | (PosInf, NegInf) => None,
            (NegInf, _) | (_, NegInf) => Some(NegInf),
            (PosInf, _) | (_, PosInf) => Some(PosInf),
        }
    }

    pub fn scale(self, c: f64) -> ExtReal {
        use ExtReal::*;
        if c == 0.0 {
            return ExtReal::ZERO;
        }
        match self {
            Finite(a) => ExtReal::from_f64(a * c).unwrap_or(ExtReal::ZERO),
            NegInf if c > 0.0 => NegInf,
            NegInf => PosInf,
            PosInf if c > 0.0 => PosInf,
            PosInf => NegInf,
        }
    }
}

impl Neg for ExtReal {
    type Output = ExtReal;
    fn neg(self) -> ExtReal {
        match self {
            ExtReal::NegInf => ExtReal::PosInf,
            ExtReal::Finite(x) => ExtReal::Finite(-x),
            ExtReal::PosInf => ExtReal::NegInf,
        }
    }
}

impl Add<f64> for ExtReal {
    type Output = ExtReal;
    fn add(self, rhs: f64) -> ExtReal {
        match self {
            ExtReal::Finite(x) => ExtReal::Finite(x + rhs),
            other => other,
        }
    }
}

impl PartialOrd for ExtReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        use ExtReal::*;
        match (self, other) {
            (Finite(a), Finite(b)) => a.partial_cmp(b),
            (NegInf, NegInf) | (PosInf, PosInf) => Some(Ordering::Equal),
            (NegInf, _) | (_, PosInf) => Some(Ordering::Less),
            (PosInf, _) | (_, NegInf) => Some(Ordering::Greater),
        }
    }
}

impl From<f64> for ExtReal {
    fn from(x: f64) -> Self {
        ExtReal::from_f64(x).expect("NaN is not an extended real")
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::NegInf => f.write_str("-inf"),
            ExtReal::Finite(x) => write!(f, "{x}"),
            ExtReal::PosInf => f.write_str("inf"),
        }
    }
}

// JSON has no infinities: finite values are numbers, the others the strings "-inf"/"inf".
impl Serialize for ExtReal {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ExtReal::Finite(x) => s.serialize_f64(*x),
            ExtReal::NegInf => s.serialize_str("-inf"),
            ExtReal::PosInf => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for ExtReal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Tag(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(x) => ExtReal::from_f64(x).ok_or_else(|| serde::de::Error::custom("NaN")),
            Repr::Tag(t) if t == "-inf" => Ok(ExtReal::NegInf),
            Repr::Tag(t) if t == "inf" => Ok(ExtReal::PosInf),
            Repr::Tag(t) => Err(serde::de::Error::custom(format!("bad extended real {t:?}"))),
        }
    }
}
