//! Serializable snapshot isolation bookkeeping.
//!
//! The graph records rw-dependencies (reader → writer) between concurrent
//! transactions of one node. Commit decisions are made by the single
//! committer pass in block order, either with the classic two-list
//! heuristic ([`ConflictGraph::decide_standard`]) or with the block-aware
//! table ([`ConflictGraph::decide_block_aware`]).

mod rules;
mod ww;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use parking_lot::Mutex;
use serde::Serialize;

use crate::codec::Hash256;
use crate::mvstore::{BoundPredicate, LocalTxId, Value};

pub use rules::{AbortRow, Victim};
pub use ww::resolve_ww;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TxStatus {
    Executing,
    Ready,
    Committed,
    Aborted,
}

impl TxStatus {
    pub fn is_final(self) -> bool {
        matches!(self, TxStatus::Committed | TxStatus::Aborted)
    }
}

#[derive(Clone, Debug)]
pub struct ReadRange {
    pub table: String,
    pub pred: BoundPredicate,
}

#[derive(Clone, Debug)]
pub struct TxSSIState {
    pub global_id: Hash256,
    pub local_id: LocalTxId,
    pub in_conflict: BTreeSet<LocalTxId>,
    pub out_conflict: BTreeSet<LocalTxId>,
    pub read_ranges: Vec<ReadRange>,
    pub write_keys: BTreeSet<(String, Vec<Value>)>,
    pub committed_outconflict: bool,
    pub status: TxStatus,
}

/// Transactions of one block in commit order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TxOrder {
    pub block_number: u64,
    pub ids: Vec<Hash256>,
}

impl TxOrder {
    pub fn position(&self, id: &Hash256) -> Option<usize> {
        self.ids.iter().position(|x| x == id)
    }
}

#[derive(Default, Debug)]
pub struct ConflictGraph {
    txs: BTreeMap<LocalTxId, TxSSIState>,
}

impl ConflictGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn begin(&mut self, local_id: LocalTxId, global_id: Hash256) {
        self.txs.insert(
            local_id,
            TxSSIState {
                global_id,
                local_id,
                in_conflict: BTreeSet::new(),
                out_conflict: BTreeSet::new(),
                read_ranges: Vec::new(),
                write_keys: BTreeSet::new(),
                committed_outconflict: false,
                status: TxStatus::Executing,
            },
        );
    }

    pub fn get(&self, id: LocalTxId) -> Option<&TxSSIState> {
        self.txs.get(&id)
    }

    pub fn len(&self) -> usize {
        self.txs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.txs.is_empty()
    }

    pub fn status(&self, id: LocalTxId) -> Option<TxStatus> {
        self.txs.get(&id).map(|t| t.status)
    }

    fn live(&self, id: LocalTxId) -> bool {
        self.status(id).is_some_and(|s| !s.is_final())
    }

    pub fn set_status(&mut self, id: LocalTxId, to: TxStatus) {
        if let Some(t) = self.txs.get_mut(&id) {
            debug_assert!(
                matches!(
                    (t.status, to),
                    (TxStatus::Executing, TxStatus::Ready)
                        | (TxStatus::Executing, TxStatus::Aborted)
                        | (TxStatus::Ready, TxStatus::Committed)
                        | (TxStatus::Ready, TxStatus::Aborted)
                ) || t.status == to,
                "bad transition {:?} -> {to:?}",
                t.status
            );
            t.status = to;
        }
    }

    pub fn add_read_range(&mut self, id: LocalTxId, table: &str, pred: BoundPredicate) {
        if let Some(t) = self.txs.get_mut(&id) {
            t.read_ranges.push(ReadRange { table: table.to_owned(), pred });
        }
    }

    pub fn add_write_key(&mut self, id: LocalTxId, table: &str, pk: Vec<Value>) {
        if let Some(t) = self.txs.get_mut(&id) {
            t.write_keys.insert((table.to_owned(), pk));
        }
    }

    /// Records the rw-dependency `reader → writer`. Only live readers get
    /// edges; a reader of an already committed writer is flagged instead.
    pub fn track_dependency(&mut self, reader: LocalTxId, writer: LocalTxId) {
        if reader == writer || !self.live(reader) {
            return;
        }
        match self.status(writer) {
            Some(TxStatus::Committed) => {
                self.txs.get_mut(&reader).unwrap().committed_outconflict = true;
            }
            Some(TxStatus::Executing | TxStatus::Ready) => {
                self.txs.get_mut(&reader).unwrap().out_conflict.insert(writer);
                self.txs.get_mut(&writer).unwrap().in_conflict.insert(reader);
            }
            _ => {}
        }
    }

    /// Live transactions other than `writer` whose read ranges on `table`
    /// match any of `rows`.
    pub fn readers_of(&self, writer: LocalTxId, table: &str, rows: &[&[Value]]) -> Vec<LocalTxId> {
        self.txs
            .values()
            .filter(|t| t.local_id != writer && !t.status.is_final())
            .filter(|t| {
                t.read_ranges
                    .iter()
                    .any(|r| r.table == table && rows.iter().any(|row| r.pred.matches(row)))
            })
            .map(|t| t.local_id)
            .collect()
    }

    /// Marks `id` committed and flags its live readers.
    pub fn mark_committed(&mut self, id: LocalTxId) {
        self.set_status(id, TxStatus::Committed);
        let readers: Vec<_> = self.txs[&id].in_conflict.iter().copied().collect();
        for r in readers {
            if let Some(t) = self.txs.get_mut(&r) {
                if !t.status.is_final() {
                    t.committed_outconflict = true;
                }
            }
        }
    }

    /// Marks `id` aborted and drops all of its edges. An aborted
    /// transaction can no longer take part in an anomaly.
    pub fn mark_aborted(&mut self, id: LocalTxId) {
        if !self.txs.contains_key(&id) {
            return;
        }
        if self.txs[&id].status != TxStatus::Aborted {
            self.set_status(id, TxStatus::Aborted);
        }
        self.detach(id);
    }

    fn detach(&mut self, id: LocalTxId) {
        let (ins, outs) = {
            let t = self.txs.get_mut(&id).unwrap();
            (std::mem::take(&mut t.in_conflict), std::mem::take(&mut t.out_conflict))
        };
        for i in ins {
            if let Some(t) = self.txs.get_mut(&i) {
                t.out_conflict.remove(&id);
            }
        }
        for o in outs {
            if let Some(t) = self.txs.get_mut(&o) {
                t.in_conflict.remove(&id);
            }
        }
    }

    /// Forgets a finished transaction entirely.
    pub fn remove(&mut self, id: LocalTxId) {
        if self.txs.contains_key(&id) {
            self.detach(id);
            self.txs.remove(&id);
        }
    }

    /// Forgets every committed or aborted transaction.
    pub fn prune_final(&mut self) {
        let done: Vec<LocalTxId> = self.txs.values().filter(|t| t.status.is_final()).map(|t| t.local_id).collect();
        for id in done {
            self.remove(id);
        }
    }

    /// Checks that every in-edge has a matching out-edge and vice versa.
    pub fn edges_symmetric(&self) -> bool {
        self.txs.values().all(|t| {
            t.in_conflict.iter().all(|i| self.txs.get(i).is_some_and(|x| x.out_conflict.contains(&t.local_id)))
                && t.out_conflict.iter().all(|o| self.txs.get(o).is_some_and(|x| x.in_conflict.contains(&t.local_id)))
        })
    }

    pub fn local_of(&self) -> HashMap<Hash256, LocalTxId> {
        self.txs.values().map(|t| (t.global_id, t.local_id)).collect()
    }
}

pub type ConflictTracker = Mutex<ConflictGraph>;
