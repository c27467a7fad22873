use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::schema::TableSchema;
use super::value::Value;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cmp {
    Eq(Value),
    /// Closed range `[lo, hi]`.
    Between(Value, Value),
}

impl Cmp {
    pub fn matches(&self, v: &Value) -> bool {
        match self {
            Cmp::Eq(x) => v == x,
            Cmp::Between(lo, hi) => lo <= v && v <= hi,
        }
    }

    fn lower(&self) -> &Value {
        match self {
            Cmp::Eq(x) | Cmp::Between(x, _) => x,
        }
    }

    fn upper(&self) -> &Value {
        match self {
            Cmp::Eq(x) | Cmp::Between(_, x) => x,
        }
    }
}

/// Conjunction of per-column comparisons over a prefix of a declared index.
#[derive(Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Predicate {
    pub terms: Vec<(String, Cmp)>,
}

impl Predicate {
    /// Matches every row. Only usable for provenance scans.
    pub fn all() -> Self {
        Self::default()
    }

    pub fn eq(col: &str, v: impl Into<Value>) -> Self {
        Self::all().and_eq(col, v)
    }

    pub fn between(col: &str, lo: impl Into<Value>, hi: impl Into<Value>) -> Self {
        Self::all().and_between(col, lo, hi)
    }

    pub fn and_eq(mut self, col: &str, v: impl Into<Value>) -> Self {
        self.terms.push((col.to_owned(), Cmp::Eq(v.into())));
        self
    }

    pub fn and_between(mut self, col: &str, lo: impl Into<Value>, hi: impl Into<Value>) -> Self {
        self.terms.push((col.to_owned(), Cmp::Between(lo.into(), hi.into())));
        self
    }

    pub fn is_all(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn columns(&self) -> Vec<String> {
        self.terms.iter().map(|(c, _)| c.clone()).collect()
    }

    /// First declared index whose leading columns are exactly this
    /// predicate's columns, in order.
    pub fn find_index(&self, schema: &TableSchema) -> Option<usize> {
        if self.terms.is_empty() {
            return None;
        }
        schema.indexes.iter().position(|ix| {
            ix.len() >= self.terms.len() && self.terms.iter().zip(ix).all(|((c, _), i)| c == i)
        })
    }

    pub fn bind(&self, schema: &TableSchema) -> Option<BoundPredicate> {
        let mut cols = Vec::with_capacity(self.terms.len());
        for (c, cmp) in &self.terms {
            cols.push((schema.col(c)?, cmp.clone()));
        }
        Some(BoundPredicate { cols })
    }
}

/// A predicate resolved to column positions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoundPredicate {
    cols: Vec<(usize, Cmp)>,
}

impl BoundPredicate {
    pub fn matches(&self, row: &[Value]) -> bool {
        self.cols.iter().all(|(i, c)| c.matches(&row[*i]))
    }

    /// Index-key lower bound: equality values up to and including the first
    /// range's low end.
    pub(crate) fn lower_key(&self) -> Vec<Value> {
        self.prefix().map(|(_, c)| c.lower().clone()).collect()
    }

    /// True once an index key has moved past every possible match.
    pub(crate) fn past_end(&self, key: &[Value]) -> bool {
        for (k, (_, c)) in key.iter().zip(self.prefix()) {
            match k.cmp(c.upper()) {
                Ordering::Less => return false,
                Ordering::Greater => return true,
                Ordering::Equal => {}
            }
        }
        false
    }

    fn prefix(&self) -> impl Iterator<Item = &(usize, Cmp)> {
        let n = self
            .cols
            .iter()
            .position(|(_, c)| matches!(c, Cmp::Between(..)))
            .map_or(self.cols.len(), |i| i + 1);
        self.cols[..n].iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mvstore::value::ColumnType;

    fn schema() -> TableSchema {
        let mut s = TableSchema::new(
            "t",
            &[("a", ColumnType::Integer), ("b", ColumnType::Integer), ("c", ColumnType::Text)],
            &["a"],
        )
        .with_index(&["b", "c"]);
        s.validate().unwrap();
        s
    }

    #[test]
    fn index_resolution_requires_prefix() {
        let s = schema();
        assert_eq!(Predicate::eq("a", 1).find_index(&s), Some(0));
        assert_eq!(Predicate::eq("b", 1).find_index(&s), Some(1));
        assert_eq!(Predicate::eq("b", 1).and_eq("c", "x").find_index(&s), Some(1));
        assert_eq!(Predicate::eq("c", "x").find_index(&s), None);
        assert_eq!(Predicate::all().find_index(&s), None);
    }

    #[test]
    fn range_bounds() {
        let s = schema();
        let p = Predicate::eq("b", 2).and_between("c", "d", "f").bind(&s).unwrap();
        assert_eq!(p.lower_key(), vec![Value::Int(2), Value::from("d")]);
        assert!(!p.past_end(&[Value::Int(2), Value::from("e")]));
        assert!(p.past_end(&[Value::Int(2), Value::from("g")]));
        assert!(p.past_end(&[Value::Int(3), Value::from("a")]));
        assert!(p.matches(&[Value::Int(0), Value::Int(2), Value::from("f")]));
        assert!(!p.matches(&[Value::Int(0), Value::Int(2), Value::from("g")]));
    }
}
