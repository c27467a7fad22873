//! Execution context of one transaction on one node.

use crate::contracts::{ContractError, DataApi, RowRef};
use crate::mvstore::{
    LocalTxId, Predicate, Row, ScanResult, SnapshotSpec, Store, VersionRef, WriteKind, WriteOp, WriteSet,
};
use crate::ssi::ConflictTracker;

/// Routes contract data access through the store under a snapshot and
/// records rw-dependencies with concurrent transactions.
///
/// Every operation holds the tracker lock across the store call, so a read
/// and a concurrent write of the same range always see each other: either
/// the reader finds the writer's version, or the writer finds the reader's
/// range.
pub struct TxContext<'a> {
    store: &'a Store,
    tracker: &'a ConflictTracker,
    snap: SnapshotSpec,
    caller: String,
    check: bool,
    handles: Vec<VersionRef>,
    ws: WriteSet,
}

impl<'a> TxContext<'a> {
    /// `check` enables phantom and stale read detection for block-height
    /// snapshots.
    pub fn new(store: &'a Store, tracker: &'a ConflictTracker, snap: SnapshotSpec, caller: &str, check: bool) -> Self {
        Self { store, tracker, snap, caller: caller.to_owned(), check, handles: Vec::new(), ws: WriteSet::default() }
    }

    pub fn own(&self) -> LocalTxId {
        self.snap.own()
    }

    pub fn write_set(&self) -> &WriteSet {
        &self.ws
    }

    pub fn into_write_set(self) -> WriteSet {
        self.ws
    }

    fn record_read(&self, g: &mut crate::ssi::ConflictGraph, table: &str, pred: &Predicate, res: &ScanResult) {
        let own = self.own();
        if let Ok(schema) = self.store.schema(table) {
            if let Some(bp) = pred.bind(&schema) {
                g.add_read_range(own, table, bp);
            }
        }
        for &w in &res.writers {
            g.track_dependency(own, w);
        }
    }

    fn record_write(&self, g: &mut crate::ssi::ConflictGraph, table: &str, rows: &[&[crate::mvstore::Value]]) {
        let own = self.own();
        for r in g.readers_of(own, table, rows) {
            g.track_dependency(r, own);
        }
        if let Ok(schema) = self.store.schema(table) {
            g.add_write_key(own, table, schema.pk_of(rows[0]));
        }
    }

    fn target(&self, h: RowRef) -> Result<VersionRef, ContractError> {
        self.handles.get(h as usize).copied().ok_or(ContractError::BadHandle)
    }
}

impl DataApi for TxContext<'_> {
    fn caller(&self) -> &str {
        &self.caller
    }

    fn select(&mut self, table: &str, pred: &Predicate) -> Result<Vec<(RowRef, Row)>, ContractError> {
        let mut g = self.tracker.lock();
        let res = self.store.read_checked(&self.snap, table, pred, self.check)?;
        self.record_read(&mut g, table, pred, &res);
        drop(g);
        Ok(res
            .rows
            .into_iter()
            .map(|(r, row)| {
                self.handles.push(r);
                ((self.handles.len() - 1) as RowRef, row)
            })
            .collect())
    }

    fn insert(&mut self, table: &str, row: Row) -> Result<(), ContractError> {
        let mut g = self.tracker.lock();
        let (r, probe, res) = self.store.insert(&self.snap, table, row.clone(), self.check)?;
        self.record_read(&mut g, table, &probe, &res);
        self.record_write(&mut g, table, &[&row]);
        self.ws.ops.push(WriteOp { kind: WriteKind::Insert, created: Some(r), superseded: None });
        Ok(())
    }

    fn update(&mut self, target: RowRef, row: Row) -> Result<(), ContractError> {
        let t = self.target(target)?;
        let table = self.store.table_name(t)?;
        let mut g = self.tracker.lock();
        let (r, old) = self.store.update(&self.snap, t, row.clone())?;
        self.record_write(&mut g, &table, &[&row, &old]);
        self.ws.ops.push(WriteOp { kind: WriteKind::Update, created: Some(r), superseded: Some(t) });
        Ok(())
    }

    fn delete(&mut self, target: RowRef) -> Result<(), ContractError> {
        let t = self.target(target)?;
        let table = self.store.table_name(t)?;
        let mut g = self.tracker.lock();
        let old = self.store.delete(&self.snap, t)?;
        self.record_write(&mut g, &table, &[&old]);
        self.ws.ops.push(WriteOp { kind: WriteKind::Delete, created: None, superseded: Some(t) });
        Ok(())
    }
}
