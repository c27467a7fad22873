//! Per-node bookkeeping shared by the block processor and the workers.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::codec::Hash256;
use crate::mvstore::{LocalTxId, WriteSet};
use crate::ssi::AbortRow;
use crate::tx::Transaction;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum AbortReason {
    Duplicate,
    UnknownUser,
    BadSignature,
    BadId,
    InvalidSnapshot,
    Dangerous(AbortRow),
    WriteConflict,
    ContractReplaced,
    Contract(String),
    Withheld,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RtState {
    /// Waiting until the node reaches the snapshot height.
    Deferred,
    /// Not yet executed; runs inside the commit pass.
    Lazy,
    Ready,
    Aborted(AbortReason),
    Committed,
}

impl RtState {
    pub fn is_final(&self) -> bool {
        matches!(self, RtState::Aborted(_) | RtState::Committed)
    }
}

#[derive(Clone, Debug)]
pub struct RtEntry {
    pub tx: Transaction,
    pub local: Option<LocalTxId>,
    pub ws: WriteSet,
    pub worker: Option<usize>,
    /// Done-executing gate: simulated time at which the worker finishes.
    pub done_at: Option<u64>,
    pub state: RtState,
}

impl RtEntry {
    pub fn new(tx: Transaction, state: RtState) -> Self {
        Self { tx, local: None, ws: WriteSet::default(), worker: None, done_at: None, state }
    }
}

/// In-flight transactions of one node, keyed by global id.
#[derive(Debug, Default)]
pub struct TxRuntimeTable {
    entries: BTreeMap<Hash256, RtEntry>,
    by_local: BTreeMap<LocalTxId, Hash256>,
    deferred: BTreeMap<u64, Vec<Hash256>>,
    pub last_committed: u64,
    pub current_block: Option<u64>,
}

impl TxRuntimeTable {
    pub fn get(&self, gid: &Hash256) -> Option<&RtEntry> {
        self.entries.get(gid)
    }

    pub fn get_mut(&mut self, gid: &Hash256) -> Option<&mut RtEntry> {
        self.entries.get_mut(gid)
    }

    pub fn contains(&self, gid: &Hash256) -> bool {
        self.entries.contains_key(gid)
    }

    pub fn insert(&mut self, e: RtEntry) {
        let gid = e.tx.global_id;
        if e.state == RtState::Deferred {
            self.deferred.entry(e.tx.snapshot_height.unwrap_or(0)).or_default().push(gid);
        }
        self.entries.insert(gid, e);
    }

    pub fn bind_local(&mut self, gid: Hash256, local: LocalTxId) {
        if let Some(e) = self.entries.get_mut(&gid) {
            if let Some(old) = e.local.replace(local) {
                self.by_local.remove(&old);
            }
            self.by_local.insert(local, gid);
        }
    }

    pub fn gid_of(&self, local: LocalTxId) -> Option<Hash256> {
        self.by_local.get(&local).copied()
    }

    /// Deferred transactions whose snapshot height is now reachable.
    pub fn release(&mut self, height: u64) -> Vec<Hash256> {
        let later = self.deferred.split_off(&(height + 1));
        let ready = std::mem::replace(&mut self.deferred, later);
        ready.into_values().flatten().filter(|g| self.entries.get(g).is_some_and(|e| e.state == RtState::Deferred)).collect()
    }

    pub fn remove(&mut self, gid: &Hash256) -> Option<RtEntry> {
        let e = self.entries.remove(gid)?;
        if let Some(l) = e.local {
            self.by_local.remove(&l);
        }
        Some(e)
    }

    /// Pending entries other than `except` that invoke one of `names`.
    pub fn invoking(&self, names: &[String], except: &Hash256) -> Vec<Hash256> {
        self.entries
            .iter()
            .filter(|(g, e)| *g != except && e.state == RtState::Ready && names.contains(&e.tx.invocation.contract))
            .map(|(g, _)| *g)
            .collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Execution workers of one node, modelled by the time each becomes free.
#[derive(Clone, Debug)]
pub struct WorkerPool {
    free_at: Vec<u64>,
}

impl WorkerPool {
    pub fn new(workers: usize) -> Self {
        Self { free_at: vec![0; workers.max(1)] }
    }

    /// Assigns a job of `cost` microseconds arriving at `now`. Returns the
    /// worker and the completion time.
    pub fn assign(&mut self, now: u64, cost: u64) -> (usize, u64) {
        let (w, free) = self.free_at.iter().copied().enumerate().min_by_key(|&(i, t)| (t, i)).unwrap();
        let done = now.max(free) + cost;
        self.free_at[w] = done;
        (w, done)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::KeyPair;
    use crate::mvstore::Value;
    use crate::tx::Invocation;

    fn tx(i: i64, snap: u64) -> Transaction {
        Transaction::new_eo(&KeyPair::derive(0, "u"), "u", Invocation::new("kv_add", vec![Value::Int(i)]), snap)
    }

    #[test]
    fn pool_spreads_jobs() {
        let mut p = WorkerPool::new(2);
        assert_eq!(p.assign(0, 10), (0, 10));
        assert_eq!(p.assign(0, 10), (1, 10));
        assert_eq!(p.assign(5, 10), (0, 20));
        assert_eq!(p.assign(30, 1), (1, 31));
    }

    #[test]
    fn release_by_height() {
        let mut t = TxRuntimeTable::default();
        let (a, b) = (tx(1, 2), tx(2, 4));
        t.insert(RtEntry::new(a.clone(), RtState::Deferred));
        t.insert(RtEntry::new(b.clone(), RtState::Deferred));
        assert!(t.release(1).is_empty());
        assert_eq!(t.release(3), vec![a.global_id]);
        assert_eq!(t.release(9), vec![b.global_id]);
    }
}
