use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::codec::{Canonical, DecodeError, Decoder, Encoder};

/// Fixed-point decimal with four fractional digits.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default)]
pub struct Decimal(i64);

impl Decimal {
    pub const SCALE: i64 = 10_000;

    pub const fn from_raw(raw: i64) -> Self {
        Decimal(raw)
    }

    pub fn from_int(v: i64) -> Self {
        Decimal(v.saturating_mul(Self::SCALE))
    }

    pub fn raw(self) -> i64 {
        self.0
    }

    pub fn checked_add(self, o: Decimal) -> Option<Decimal> {
        self.0.checked_add(o.0).map(Decimal)
    }

    pub fn checked_mul(self, o: Decimal) -> Option<Decimal> {
        let p = (self.0 as i128) * (o.0 as i128) / (Self::SCALE as i128);
        i64::try_from(p).ok().map(Decimal)
    }
}

impl fmt::Display for Decimal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let a = self.0.unsigned_abs();
        let int = a / Self::SCALE as u64;
        let frac = a % Self::SCALE as u64;
        if frac == 0 {
            write!(f, "{sign}{int}")
        } else {
            let s = format!("{frac:04}");
            write!(f, "{sign}{int}.{}", s.trim_end_matches('0'))
        }
    }
}

impl FromStr for Decimal {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (neg, body) = match s.strip_prefix('-') {
            Some(r) => (true, r),
            None => (false, s),
        };
        let (ip, fp) = body.split_once('.').unwrap_or((body, ""));
        if ip.is_empty() || fp.len() > 4 || !ip.bytes().all(|b| b.is_ascii_digit()) || !fp.bytes().all(|b| b.is_ascii_digit()) {
            return Err(format!("bad decimal literal {s:?}"));
        }
        let int: i64 = ip.parse().map_err(|_| format!("bad decimal literal {s:?}"))?;
        let frac: i64 = if fp.is_empty() { 0 } else { format!("{fp:0<4}").parse().unwrap() };
        let raw = int
            .checked_mul(Self::SCALE)
            .and_then(|v| v.checked_add(frac))
            .ok_or_else(|| format!("decimal out of range {s:?}"))?;
        Ok(Decimal(if neg { -raw } else { raw }))
    }
}

impl Serialize for Decimal {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Decimal {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize, Hash)]
#[serde(rename_all = "lowercase")]
pub enum ColumnType {
    Integer,
    Decimal,
    Text,
    Boolean,
}

impl ColumnType {
    fn tag(self) -> u8 {
        match self {
            ColumnType::Integer => 0,
            ColumnType::Decimal => 1,
            ColumnType::Text => 2,
            ColumnType::Boolean => 3,
        }
    }

    fn from_tag(tag: u8) -> Result<Self, DecodeError> {
        Ok(match tag {
            0 => ColumnType::Integer,
            1 => ColumnType::Decimal,
            2 => ColumnType::Text,
            3 => ColumnType::Boolean,
            tag => return Err(DecodeError::BadTag { what: "column type", tag }),
        })
    }
}

impl Canonical for ColumnType {
    fn encode_to(&self, enc: &mut Encoder) {
        enc.u8(self.tag());
    }

    fn decode_from(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        Self::from_tag(dec.u8()?)
    }
}

/// A scalar column value. Ordering sorts by type first, then by value, so
/// mixed-type comparisons are total and identical on every node.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Int(i64),
    Bool(bool),
    Dec(Decimal),
    Text(String),
}

impl Value {
    pub fn column_type(&self) -> ColumnType {
        match self {
            Value::Int(_) => ColumnType::Integer,
            Value::Dec(_) => ColumnType::Decimal,
            Value::Text(_) => ColumnType::Text,
            Value::Bool(_) => ColumnType::Boolean,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_dec(&self) -> Option<Decimal> {
        match self {
            Value::Dec(v) => Some(*v),
            Value::Int(v) => Some(Decimal::from_int(*v)),
            _ => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            Value::Text(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(v) => Some(*v),
            _ => None,
        }
    }

    /// Parses a literal as the given column type (used by the CLI filters).
    pub fn parse_as(ty: ColumnType, s: &str) -> Result<Value, String> {
        match ty {
            ColumnType::Integer => s.parse().map(Value::Int).map_err(|e| format!("{s:?}: {e}")),
            ColumnType::Decimal => s.parse().map(Value::Dec),
            ColumnType::Text => Ok(Value::Text(s.to_owned())),
            ColumnType::Boolean => s.parse().map(Value::Bool).map_err(|e| format!("{s:?}: {e}")),
        }
    }
}

impl From<i64> for Value {
    fn from(v: i64) -> Self {
        Value::Int(v)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Text(v.to_owned())
    }
}

impl From<String> for Value {
    fn from(v: String) -> Self {
        Value::Text(v)
    }
}

impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Value::Bool(v)
    }
}

impl From<Decimal> for Value {
    fn from(v: Decimal) -> Self {
        Value::Dec(v)
    }
}

impl PartialOrd for Value {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Value {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Value::Int(a), Value::Int(b)) => a.cmp(b),
            (Value::Dec(a), Value::Dec(b)) => a.cmp(b),
            (Value::Text(a), Value::Text(b)) => a.cmp(b),
            (Value::Bool(a), Value::Bool(b)) => a.cmp(b),
            _ => self.column_type().tag().cmp(&other.column_type().tag()),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Dec(v) => write!(f, "{v}"),
            Value::Text(v) => f.write_str(v),
            Value::Bool(v) => write!(f, "{v}"),
        }
    }
}

impl Canonical for Value {
    fn encode_to(&self, enc: &mut Encoder) {
        enc.u8(self.column_type().tag());
        match self {
            Value::Int(v) => enc.i64(*v),
            Value::Dec(v) => enc.i64(v.raw()),
            Value::Text(v) => enc.str(v),
            Value::Bool(v) => enc.bool(*v),
        };
    }

    fn decode_from(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        Ok(match ColumnType::from_tag(dec.u8()?)? {
            ColumnType::Integer => Value::Int(dec.i64()?),
            ColumnType::Decimal => Value::Dec(Decimal::from_raw(dec.i64()?)),
            ColumnType::Text => Value::Text(dec.string()?),
            ColumnType::Boolean => Value::Bool(dec.bool()?),
        })
    }
}

/// Column values in schema order.
pub type Row = Vec<Value>;

pub fn encode_row(enc: &mut Encoder, row: &[Value]) {
    enc.seq(row, |e, v| v.encode_to(e));
}

pub fn decode_row(dec: &mut Decoder<'_>) -> Result<Row, DecodeError> {
    dec.seq(Value::decode_from)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimal_parse_display() {
        for (s, raw) in [("0", 0), ("1.5", 15_000), ("-2.0001", -20_001), ("12", 120_000)] {
            let d: Decimal = s.parse().unwrap();
            assert_eq!(d.raw(), raw);
        }
        assert_eq!(Decimal::from_raw(15_000).to_string(), "1.5");
        assert_eq!(Decimal::from_raw(-20_001).to_string(), "-2.0001");
        assert!("1.23456".parse::<Decimal>().is_err());
        assert!("x".parse::<Decimal>().is_err());
    }

    #[test]
    fn decimal_mul() {
        let a: Decimal = "2.5".parse().unwrap();
        let b: Decimal = "4".parse().unwrap();
        assert_eq!(a.checked_mul(b).unwrap(), Decimal::from_int(10));
    }

    #[test]
    fn mixed_type_order_is_total() {
        let mut v = vec![Value::from("a"), Value::Int(3), Value::Bool(true), Value::Int(-1)];
        v.sort();
        assert_eq!(v, vec![Value::Int(-1), Value::Int(3), Value::from("a"), Value::Bool(true)]);
    }

    #[test]
    fn value_canonical_roundtrip() {
        for v in [Value::Int(-9), Value::Dec(Decimal::from_raw(7)), Value::from("xy"), Value::Bool(false)] {
            assert_eq!(Value::from_canonical(&v.to_canonical()).unwrap(), v);
        }
    }
}
