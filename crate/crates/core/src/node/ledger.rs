//! Ledger table and per-transaction commit log.

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use crate::codec::{Canonical, DecodeError, Decoder, Encoder, Hash256};
use crate::mvstore::{decode_row, encode_row, LocalTxId};
use crate::tx::Invocation;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Hash)]
#[serde(rename_all = "lowercase")]
pub enum LedgerStatus {
    Committed,
    Aborted,
}

impl LedgerStatus {
    fn tag(self) -> u8 {
        match self {
            LedgerStatus::Committed => 1,
            LedgerStatus::Aborted => 2,
        }
    }

    fn from_tag(t: u8) -> Result<Self, DecodeError> {
        match t {
            1 => Ok(LedgerStatus::Committed),
            2 => Ok(LedgerStatus::Aborted),
            tag => Err(DecodeError::BadTag { what: "status", tag }),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LedgerEntry {
    pub block_number: u64,
    pub position: u32,
    pub global_id: Hash256,
    pub local_id: LocalTxId,
    pub username: String,
    pub invocation: Invocation,
    pub status: Option<LedgerStatus>,
    /// Simulated microseconds at which the status was decided.
    pub commit_time: Option<u64>,
}

/// One durable ledger record. Entries and statuses of a block are each
/// written as a single record, which makes them atomic.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LedgerRecord {
    Entries { block: u64, entries: Vec<LedgerEntry> },
    Statuses { block: u64, statuses: Vec<(LedgerStatus, u64)> },
}

impl Canonical for LedgerRecord {
    fn encode_to(&self, e: &mut Encoder) {
        match self {
            LedgerRecord::Entries { block, entries } => {
                e.u8(1).u64(*block);
                e.seq(entries, |e, x| {
                    e.u32(x.position).hash(&x.global_id).u64(x.local_id).str(&x.username).str(&x.invocation.contract);
                    encode_row(e, &x.invocation.args);
                });
            }
            LedgerRecord::Statuses { block, statuses } => {
                e.u8(2).u64(*block);
                e.seq(statuses, |e, (s, t)| {
                    e.u8(s.tag()).u64(*t);
                });
            }
        }
    }

    fn decode_from(d: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        match d.u8()? {
            1 => {
                let block = d.u64()?;
                let entries = d.seq(|d| {
                    Ok(LedgerEntry {
                        block_number: block,
                        position: d.u32()?,
                        global_id: d.hash()?,
                        local_id: d.u64()?,
                        username: d.string()?,
                        invocation: Invocation { contract: d.string()?, args: decode_row(d)? },
                        status: None,
                        commit_time: None,
                    })
                })?;
                Ok(LedgerRecord::Entries { block, entries })
            }
            2 => {
                let block = d.u64()?;
                let statuses = d.seq(|d| Ok((LedgerStatus::from_tag(d.u8()?)?, d.u64()?)))?;
                Ok(LedgerRecord::Statuses { block, statuses })
            }
            tag => Err(DecodeError::BadTag { what: "ledger record", tag }),
        }
    }
}

/// Per-transaction decision, logged as soon as the transaction is decided.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TxLogRecord {
    pub block: u64,
    pub position: u32,
    pub global_id: Hash256,
    pub status: LedgerStatus,
    pub time: u64,
}

impl Canonical for TxLogRecord {
    fn encode_to(&self, e: &mut Encoder) {
        e.u64(self.block).u32(self.position).hash(&self.global_id).u8(self.status.tag()).u64(self.time);
    }

    fn decode_from(d: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        Ok(Self {
            block: d.u64()?,
            position: d.u32()?,
            global_id: d.hash()?,
            status: LedgerStatus::from_tag(d.u8()?)?,
            time: d.u64()?,
        })
    }
}

/// In-memory view of the ledger table.
#[derive(Clone, Debug, Default)]
pub struct Ledger {
    blocks: BTreeMap<u64, Vec<LedgerEntry>>,
    by_gid: HashMap<Hash256, Vec<(u64, u32)>>,
}

impl Ledger {
    pub fn apply(&mut self, rec: &LedgerRecord) {
        match rec {
            LedgerRecord::Entries { block, entries } => {
                for e in entries {
                    self.by_gid.entry(e.global_id).or_default().push((*block, e.position));
                }
                self.blocks.insert(*block, entries.clone());
            }
            LedgerRecord::Statuses { block, statuses } => {
                if let Some(es) = self.blocks.get_mut(block) {
                    for (e, (s, t)) in es.iter_mut().zip(statuses) {
                        e.status = Some(*s);
                        e.commit_time = Some(*t);
                    }
                }
            }
        }
    }

    pub fn last_block(&self) -> Option<u64> {
        self.blocks.keys().next_back().copied()
    }

    pub fn has_block(&self, b: u64) -> bool {
        self.blocks.contains_key(&b)
    }

    pub fn block(&self, b: u64) -> Option<&[LedgerEntry]> {
        self.blocks.get(&b).map(Vec::as_slice)
    }

    pub fn statuses_written(&self, b: u64) -> bool {
        self.blocks.get(&b).is_some_and(|es| es.iter().all(|e| e.status.is_some()))
    }

    /// Whether `gid` appears in any block before `block`, or earlier in
    /// `block` than `position`.
    pub fn seen_before(&self, gid: &Hash256, block: u64, position: u32) -> bool {
        self.by_gid.get(gid).is_some_and(|v| v.iter().any(|&(b, p)| (b, p) < (block, position)))
    }

    pub fn contains(&self, gid: &Hash256) -> bool {
        self.by_gid.contains_key(gid)
    }

    pub fn entries(&self) -> impl Iterator<Item = &LedgerEntry> {
        self.blocks.values().flatten()
    }

    /// Status per block in block order.
    pub fn status_vector(&self) -> Vec<(u64, Vec<Option<LedgerStatus>>)> {
        self.blocks.iter().map(|(b, es)| (*b, es.iter().map(|e| e.status).collect())).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mvstore::Value;

    fn entry(pos: u32, gid: &[u8]) -> LedgerEntry {
        LedgerEntry {
            block_number: 3,
            position: pos,
            global_id: Hash256::digest(gid),
            local_id: 9,
            username: "u".into(),
            invocation: Invocation::new("kv_add", vec![Value::Int(1)]),
            status: None,
            commit_time: None,
        }
    }

    #[test]
    fn records_roundtrip() {
        let r = LedgerRecord::Entries { block: 3, entries: vec![entry(0, b"a"), entry(1, b"b")] };
        assert_eq!(LedgerRecord::from_canonical(&r.to_canonical()).unwrap(), r);
        let s = LedgerRecord::Statuses { block: 3, statuses: vec![(LedgerStatus::Committed, 5)] };
        assert_eq!(LedgerRecord::from_canonical(&s.to_canonical()).unwrap(), s);
        let t = TxLogRecord { block: 1, position: 2, global_id: Hash256::ZERO, status: LedgerStatus::Aborted, time: 4 };
        assert_eq!(TxLogRecord::from_canonical(&t.to_canonical()).unwrap(), t);
    }

    #[test]
    fn statuses_and_duplicates() {
        let mut l = Ledger::default();
        l.apply(&LedgerRecord::Entries { block: 3, entries: vec![entry(0, b"a"), entry(1, b"a")] });
        assert!(!l.statuses_written(3));
        assert!(l.seen_before(&Hash256::digest(b"a"), 3, 1));
        assert!(!l.seen_before(&Hash256::digest(b"a"), 3, 0));
        l.apply(&LedgerRecord::Statuses {
            block: 3,
            statuses: vec![(LedgerStatus::Committed, 1), (LedgerStatus::Aborted, 1)],
        });
        assert!(l.statuses_written(3));
        assert_eq!(l.last_block(), Some(3));
    }
}
