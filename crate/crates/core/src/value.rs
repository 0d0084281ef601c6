use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A score that is either finite or the worst possible value.
///
/// `NegInfinity` orders below every finite value. There is deliberately no
/// arithmetic on `Value`; sums are formed over `f64` and wrapped afterwards.
#[derive(Debug, Clone, Copy)]
pub enum Value {
    Finite(f64),
    NegInfinity,
}

impl Value {
    /// Wraps a finite float; panics on NaN or infinities.
    pub fn finite(v: f64) -> Self {
        assert!(v.is_finite(), "Value::finite called with {v}");
        Value::Finite(v)
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Value::Finite(_))
    }

    pub fn as_finite(self) -> Option<f64> {
        match self {
            Value::Finite(v) => Some(v),
            Value::NegInfinity => None,
        }
    }

    /// For display and plotting only.
    pub fn to_f64(self) -> f64 {
        self.as_finite().unwrap_or(f64::NEG_INFINITY)
    }
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Value {}

impl PartialOrd for Value {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Value {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Value::NegInfinity, Value::NegInfinity) => Ordering::Equal,
            (Value::NegInfinity, Value::Finite(_)) => Ordering::Less,
            (Value::Finite(_), Value::NegInfinity) => Ordering::Greater,
            (Value::Finite(a), Value::Finite(b)) => a.total_cmp(b),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Finite(v) => match f.precision() {
                Some(p) => write!(f, "{v:.p$}"),
                None => write!(f, "{v}"),
            },
            Value::NegInfinity => f.pad("-inf"),
        }
    }
}

impl Serialize for Value {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Value::Finite(v) => s.serialize_f64(*v),
            Value::NegInfinity => s.serialize_str("-inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Value {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) if v.is_finite() => Ok(Value::Finite(v)),
            Raw::Text(t) if t == "-inf" => Ok(Value::NegInfinity),
            _ => Err(serde::de::Error::custom("expected a finite number or \"-inf\"")),
        }
    }
}
