use serde::{Deserialize, Serialize};

use super::value::{ColumnType, Value};
use super::StoreError;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnDef {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: ColumnType,
}

/// Table layout. `indexes[0]` is always the primary key once validated.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableSchema {
    pub name: String,
    pub columns: Vec<ColumnDef>,
    pub primary_key: Vec<String>,
    #[serde(default)]
    pub indexes: Vec<Vec<String>>,
}

impl TableSchema {
    pub fn new(name: &str, columns: &[(&str, ColumnType)], pk: &[&str]) -> Self {
        Self {
            name: name.to_owned(),
            columns: columns
                .iter()
                .map(|(n, t)| ColumnDef { name: (*n).to_owned(), ty: *t })
                .collect(),
            primary_key: pk.iter().map(|s| (*s).to_owned()).collect(),
            indexes: Vec::new(),
        }
    }

    pub fn with_index(mut self, cols: &[&str]) -> Self {
        self.indexes.push(cols.iter().map(|s| (*s).to_owned()).collect());
        self
    }

    /// Checks column references and moves the primary key to index slot 0.
    pub fn validate(&mut self) -> Result<(), StoreError> {
        let bad = |m: String| Err(StoreError::BadSchema(format!("{}: {m}", self.name)));
        if self.name.is_empty() || self.columns.is_empty() {
            return bad("empty name or column list".into());
        }
        for (i, c) in self.columns.iter().enumerate() {
            if self.columns[..i].iter().any(|d| d.name == c.name) {
                return bad(format!("duplicate column {}", c.name));
            }
        }
        if self.primary_key.is_empty() {
            return bad("empty primary key".into());
        }
        self.indexes.retain(|ix| *ix != self.primary_key);
        self.indexes.insert(0, self.primary_key.clone());
        for ix in &self.indexes {
            if ix.is_empty() {
                return bad("empty index".into());
            }
            for c in ix {
                if self.col(c).is_none() {
                    return bad(format!("unknown column {c}"));
                }
            }
        }
        Ok(())
    }

    pub fn col(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn positions(&self, cols: &[String]) -> Vec<usize> {
        cols.iter().map(|c| self.col(c).expect("validated column")).collect()
    }

    pub fn pk_positions(&self) -> Vec<usize> {
        self.positions(&self.primary_key)
    }

    pub fn check_row(&self, row: &[Value]) -> Result<(), StoreError> {
        if row.len() != self.columns.len() {
            return Err(StoreError::RowShape {
                table: self.name.clone(),
                detail: format!("expected {} values, got {}", self.columns.len(), row.len()),
            });
        }
        for (v, c) in row.iter().zip(&self.columns) {
            if v.column_type() != c.ty {
                return Err(StoreError::RowShape {
                    table: self.name.clone(),
                    detail: format!("column {} expects {:?}, got {v:?}", c.name, c.ty),
                });
            }
        }
        Ok(())
    }

    pub fn pk_of(&self, row: &[Value]) -> Vec<Value> {
        self.pk_positions().into_iter().map(|i| row[i].clone()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pk_becomes_first_index() {
        let mut s = TableSchema::new("t", &[("a", ColumnType::Integer), ("b", ColumnType::Text)], &["a"])
            .with_index(&["b"])
            .with_index(&["a"]);
        s.validate().unwrap();
        assert_eq!(s.indexes, vec![vec!["a".to_string()], vec!["b".to_string()]]);
    }

    #[test]
    fn rejects_unknown_columns_and_bad_rows() {
        let mut s = TableSchema::new("t", &[("a", ColumnType::Integer)], &["z"]);
        assert!(s.validate().is_err());
        let mut s = TableSchema::new("t", &[("a", ColumnType::Integer)], &["a"]);
        s.validate().unwrap();
        assert!(s.check_row(&[Value::from("x")]).is_err());
        assert!(s.check_row(&[]).is_err());
        assert!(s.check_row(&[Value::Int(1)]).is_ok());
    }
}
