use std::collections::{BTreeSet, HashSet};
use std::sync::Arc;

use super::value::Row;

/// Node-local transaction id. Id 0 is the bootstrap writer.
pub type LocalTxId = u64;

pub const BOOTSTRAP_TX: LocalTxId = 0;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RowVersion {
    pub payload: Row,
    pub xmin: LocalTxId,
    /// Transactions superseding or deleting this version. Several only while
    /// all of them are uncommitted.
    pub xmax: BTreeSet<LocalTxId>,
    pub creator_block: Option<u64>,
    pub deleter_block: Option<u64>,
}

impl RowVersion {
    pub fn new(payload: Row, xmin: LocalTxId) -> Self {
        Self { payload, xmin, xmax: BTreeSet::new(), creator_block: None, deleter_block: None }
    }

    pub fn is_committed(&self) -> bool {
        self.creator_block.is_some()
    }

    /// The committed deleter, once stamped.
    pub fn deleter(&self) -> Option<LocalTxId> {
        self.deleter_block.and(self.xmax.iter().next().copied())
    }
}

#[derive(Clone, Debug)]
pub enum SnapshotSpec {
    /// Sees versions whose writers are in `committed`.
    TxSet { committed: Arc<HashSet<LocalTxId>>, own: LocalTxId },
    /// Sees versions committed at or below `height`. `same_block`, when set,
    /// additionally admits commits already made in that block.
    BlockHeight { height: u64, own: LocalTxId, same_block: Option<u64> },
}

impl SnapshotSpec {
    pub fn at_height(height: u64, own: LocalTxId) -> Self {
        SnapshotSpec::BlockHeight { height, own, same_block: None }
    }

    pub fn own(&self) -> LocalTxId {
        match self {
            SnapshotSpec::TxSet { own, .. } | SnapshotSpec::BlockHeight { own, .. } => *own,
        }
    }

    pub fn height(&self) -> Option<u64> {
        match self {
            SnapshotSpec::BlockHeight { height, .. } => Some(*height),
            SnapshotSpec::TxSet { .. } => None,
        }
    }

    fn block_in_snapshot(&self, b: u64) -> bool {
        match self {
            SnapshotSpec::BlockHeight { height, same_block, .. } => b <= *height || Some(b) == *same_block,
            SnapshotSpec::TxSet { .. } => unreachable!(),
        }
    }
}

pub fn visible(v: &RowVersion, snap: &SnapshotSpec) -> bool {
    let own = snap.own();
    if v.xmax.contains(&own) {
        return false;
    }
    if v.xmin == own {
        return true;
    }
    match snap {
        SnapshotSpec::TxSet { committed, .. } => {
            committed.contains(&v.xmin) && !v.xmax.iter().any(|x| committed.contains(x))
        }
        SnapshotSpec::BlockHeight { .. } => match v.creator_block {
            Some(c) if snap.block_in_snapshot(c) => match v.deleter_block {
                None => true,
                Some(d) => !snap.block_in_snapshot(d),
            },
            _ => false,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mvstore::value::Value;

    fn ver(c: Option<u64>, d: Option<u64>) -> RowVersion {
        let mut v = RowVersion::new(vec![Value::Int(1)], 5);
        v.creator_block = c;
        v.deleter_block = d;
        if d.is_some() {
            v.xmax.insert(6);
        }
        v
    }

    #[test]
    fn block_height_examples() {
        let s = SnapshotSpec::at_height(5, 99);
        assert!(visible(&ver(Some(3), None), &s));
        assert!(!visible(&ver(Some(7), None), &s));
        assert!(visible(&ver(Some(0), None), &SnapshotSpec::at_height(0, 99)));
        assert!(visible(&ver(Some(3), Some(6)), &s));
        assert!(!visible(&ver(Some(3), Some(5)), &s));
        assert!(!visible(&ver(None, None), &s));
    }

    #[test]
    fn own_writes() {
        let s = SnapshotSpec::at_height(5, 5);
        let mut v = ver(None, None);
        assert!(visible(&v, &s));
        v.xmax.insert(5);
        assert!(!visible(&v, &s));
        let mut old = ver(Some(1), None);
        old.xmax.insert(5);
        assert!(!visible(&old, &s));
    }

    #[test]
    fn same_block_admission() {
        let s = SnapshotSpec::BlockHeight { height: 4, own: 99, same_block: Some(5) };
        assert!(visible(&ver(Some(5), None), &s));
        assert!(!visible(&ver(Some(2), Some(5)), &s));
        assert!(!visible(&ver(Some(6), None), &s));
    }

    #[test]
    fn tx_set_mode() {
        let committed: Arc<HashSet<_>> = Arc::new([5u64].into_iter().collect());
        let s = SnapshotSpec::TxSet { committed: committed.clone(), own: 9 };
        let mut v = RowVersion::new(vec![], 5);
        assert!(visible(&v, &s));
        v.xmax.insert(7);
        assert!(visible(&v, &s));
        v.xmax.insert(9);
        assert!(!visible(&v, &s));
        let v = RowVersion::new(vec![], 7);
        assert!(!visible(&v, &s));
    }
}
