//! Multi-version relational storage.
//!
//! Versions are only ever appended. An update marks the old version by
//! adding the writer to its `xmax` set and appends a successor; a delete
//! only marks. Block heights are stamped onto versions when their writer
//! commits, which is what block-height snapshots and provenance queries
//! read.

mod predicate;
mod schema;
mod store;
mod value;
mod version;

use thiserror::Error;

pub use predicate::{BoundPredicate, Cmp, Predicate};
pub use schema::{ColumnDef, TableSchema};
pub use store::{ScanResult, Store, VersionInfo, VersionRef, WriteKind, WriteOp, WriteSet};
pub use value::{decode_row, encode_row, ColumnType, Decimal, Row, Value};
pub use version::{visible, LocalTxId, RowVersion, SnapshotSpec, BOOTSTRAP_TX};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StoreError {
    #[error("unknown table {0}")]
    UnknownTable(String),
    #[error("table {0} already exists")]
    TableExists(String),
    #[error("bad schema: {0}")]
    BadSchema(String),
    #[error("row does not fit {table}: {detail}")]
    RowShape { table: String, detail: String },
    #[error("no index on {table} covers columns {columns:?}")]
    NoIndexForPredicate { table: String, columns: Vec<String> },
    #[error("phantom read on {table}: matching row committed after the snapshot")]
    PhantomRead { table: String },
    #[error("stale read on {table}: row superseded after the snapshot")]
    StaleRead { table: String },
    #[error("duplicate primary key {key} in {table}")]
    PrimaryKeyViolation { table: String, key: String },
    #[error("target version is not visible to the writer")]
    TargetNotVisible,
    #[error("update may not change the primary key")]
    PrimaryKeyChange,
    #[error("version already stamped")]
    AlreadyStamped,
    #[error("lost update: another writer already committed this version")]
    LostUpdate,
    #[error("unknown version reference")]
    UnknownVersion,
}

impl StoreError {
    /// Serializability anomalies against already committed blocks.
    pub fn is_anomaly(&self) -> bool {
        matches!(self, StoreError::PhantomRead { .. } | StoreError::StaleRead { .. })
    }
}
