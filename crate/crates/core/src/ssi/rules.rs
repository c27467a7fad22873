use std::collections::BTreeMap;

use serde::Serialize;

use super::{ConflictGraph, TxOrder, TxStatus};
use crate::mvstore::LocalTxId;

/// Which row of the block-aware abort table selected a victim.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum AbortRow {
    /// Both conflicts in the block, nearConflict earlier: farConflict aborts.
    BothNearFirst,
    /// Both conflicts in the block, farConflict earlier: nearConflict aborts.
    BothFarFirst,
    /// Only the nearConflict in the block: farConflict aborts.
    NearOnly,
    /// Only the farConflict in the block: nearConflict aborts.
    FarOnly,
    /// Neither in the block: nearConflict aborts.
    Neither,
    /// nearConflict outside the block and no farConflict.
    NoFar,
    /// Classic heuristic (order-then-execute).
    Standard,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Victim {
    pub tx: LocalTxId,
    pub row: AbortRow,
}

impl ConflictGraph {
    /// Abort-during-commit for `t`. Returns the transactions to abort; `t`
    /// itself is among them when its outConflict committed first and it has
    /// an inConflict.
    pub fn decide_standard(&self, t: LocalTxId) -> Vec<Victim> {
        let Some(st) = self.get(t) else { return Vec::new() };
        let pending = |x: LocalTxId| self.status(x).is_some_and(|s| !s.is_final());
        let mut out = Vec::new();
        for &n in &st.in_conflict {
            if !pending(n) {
                continue;
            }
            let near = &self.get(n).unwrap().in_conflict;
            if near.iter().any(|&f| f == t || pending(f)) {
                out.push(Victim { tx: n, row: AbortRow::Standard });
            }
        }
        if st.committed_outconflict && st.in_conflict.iter().any(|&n| self.status(n) != Some(TxStatus::Aborted)) {
            out.push(Victim { tx: t, row: AbortRow::Standard });
        }
        out.sort();
        out.dedup_by_key(|v| v.tx);
        out
    }

    /// Block-aware abort-during-commit for `t`, which must belong to
    /// `order`. A pure function of the graph and the order; `t` itself is
    /// never a victim.
    pub fn decide_block_aware(&self, t: LocalTxId, order: &TxOrder) -> Vec<Victim> {
        let Some(st) = self.get(t) else { return Vec::new() };
        let pos = |x: LocalTxId| self.get(x).and_then(|s| order.position(&s.global_id));
        let pending = |x: LocalTxId| self.status(x).is_some_and(|s| !s.is_final());
        let mut victims: BTreeMap<LocalTxId, AbortRow> = BTreeMap::new();
        let mut add = |tx: LocalTxId, row: AbortRow| {
            if tx != t && pending(tx) {
                let e = victims.entry(tx).or_insert(row);
                *e = (*e).min(row);
            }
        };
        for &n in &st.in_conflict {
            if !pending(n) {
                continue;
            }
            let fars: Vec<LocalTxId> = self
                .get(n)
                .unwrap()
                .in_conflict
                .iter()
                .copied()
                .filter(|&f| self.status(f) != Some(TxStatus::Aborted))
                .collect();
            let np = pos(n);
            if fars.is_empty() {
                if np.is_none() {
                    add(n, AbortRow::NoFar);
                }
                continue;
            }
            for f in fars {
                match (np, pos(f)) {
                    (Some(a), Some(b)) if a < b => add(f, AbortRow::BothNearFirst),
                    (Some(_), Some(_)) => add(n, AbortRow::BothFarFirst),
                    (Some(_), None) => add(f, AbortRow::NearOnly),
                    (None, Some(_)) => add(n, AbortRow::FarOnly),
                    (None, None) => add(n, AbortRow::Neither),
                }
            }
        }
        victims.into_iter().map(|(tx, row)| Victim { tx, row }).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::Hash256;

    fn gid(i: u64) -> Hash256 {
        Hash256::digest(&i.to_be_bytes())
    }

    /// Graph with T=1 committing, nearConflict n=2 (2 → 1) and optional
    /// farConflict f=3 (3 → 2).
    fn structure(with_far: bool) -> ConflictGraph {
        let mut g = ConflictGraph::new();
        for i in 1..=3 {
            g.begin(i, gid(i));
            g.set_status(i, TxStatus::Ready);
        }
        g.track_dependency(2, 1);
        if with_far {
            g.track_dependency(3, 2);
        }
        g
    }

    fn order(ids: &[u64]) -> TxOrder {
        TxOrder { block_number: 1, ids: ids.iter().map(|&i| gid(i)).collect() }
    }

    #[test]
    fn standard_aborts_near_when_both_pending() {
        let g = structure(true);
        assert_eq!(g.decide_standard(1), vec![Victim { tx: 2, row: AbortRow::Standard }]);
    }

    #[test]
    fn standard_commits_without_conflicts() {
        let mut g = ConflictGraph::new();
        g.begin(1, gid(1));
        g.set_status(1, TxStatus::Ready);
        assert!(g.decide_standard(1).is_empty());
    }

    #[test]
    fn standard_aborts_pivot_after_out_committed() {
        // 3 → 2 → 1 with 1 committed first: deciding 2 aborts 2 itself.
        let mut g = structure(true);
        g.mark_committed(1);
        assert_eq!(g.decide_standard(2), vec![Victim { tx: 2, row: AbortRow::Standard }]);
    }

    #[test]
    fn block_aware_rows() {
        let g = structure(true);
        assert_eq!(g.decide_block_aware(1, &order(&[1, 2, 3])), vec![Victim { tx: 3, row: AbortRow::BothNearFirst }]);
        assert_eq!(g.decide_block_aware(1, &order(&[1, 3, 2])), vec![Victim { tx: 2, row: AbortRow::BothFarFirst }]);
        assert_eq!(g.decide_block_aware(1, &order(&[1, 2])), vec![Victim { tx: 3, row: AbortRow::NearOnly }]);
        assert_eq!(g.decide_block_aware(1, &order(&[1, 3])), vec![Victim { tx: 2, row: AbortRow::FarOnly }]);
        assert_eq!(g.decide_block_aware(1, &order(&[1])), vec![Victim { tx: 2, row: AbortRow::Neither }]);
        let g = structure(false);
        assert_eq!(g.decide_block_aware(1, &order(&[1])), vec![Victim { tx: 2, row: AbortRow::NoFar }]);
        assert!(g.decide_block_aware(1, &order(&[1, 2])).is_empty());
    }

    #[test]
    fn aborted_edges_are_dropped() {
        let mut g = structure(true);
        g.mark_aborted(3);
        assert!(g.edges_symmetric());
        assert!(g.decide_standard(1).is_empty());
    }
}
