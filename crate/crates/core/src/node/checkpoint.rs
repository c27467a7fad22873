//! Checkpoint records and cross-node comparison.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::codec::{Canonical, DecodeError, Decoder, Encoder, Hash256};
use crate::crypto::{KeyPair, PublicKey, Signature};

pub type NodeId = u32;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CheckpointRecord {
    pub height: u64,
    /// Hash over the versions created or superseded in the covered blocks.
    pub write_set_hash: Hash256,
    /// Hash over the whole committed store image.
    pub state_hash: Hash256,
    /// Hash of block `height` as stored by the node.
    pub chain_hash: Hash256,
    pub node: NodeId,
    pub sig: Signature,
}

impl CheckpointRecord {
    pub fn new(
        height: u64,
        write_set_hash: Hash256,
        state_hash: Hash256,
        chain_hash: Hash256,
        node: NodeId,
        key: &KeyPair,
    ) -> Self {
        let mut r = Self { height, write_set_hash, state_hash, chain_hash, node, sig: Signature::default() };
        r.sig = key.sign(r.signing_digest().as_bytes());
        r
    }

    pub fn signing_digest(&self) -> Hash256 {
        let mut e = Encoder::new();
        e.u64(self.height).hash(&self.write_set_hash).hash(&self.state_hash).hash(&self.chain_hash).u32(self.node);
        Hash256::digest(e.as_slice())
    }

    pub fn verify(&self, key: &PublicKey) -> bool {
        key.verify(self.signing_digest().as_bytes(), &self.sig)
    }

    fn fingerprint(&self) -> (Hash256, Hash256, Hash256) {
        (self.write_set_hash, self.state_hash, self.chain_hash)
    }
}

impl Canonical for CheckpointRecord {
    fn encode_to(&self, e: &mut Encoder) {
        e.u64(self.height)
            .hash(&self.write_set_hash)
            .hash(&self.state_hash)
            .hash(&self.chain_hash)
            .u32(self.node)
            .bytes(&self.sig.0);
    }

    fn decode_from(d: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        Ok(Self {
            height: d.u64()?,
            write_set_hash: d.hash()?,
            state_hash: d.hash()?,
            chain_hash: d.hash()?,
            node: d.u32()?,
            sig: Signature(d.bytes()?.to_vec()),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct DivergenceAlarm {
    pub height: u64,
    /// Nodes whose record disagrees with the majority.
    pub nodes: Vec<NodeId>,
}

/// Collects records per height and compares them once every node that is
/// still trusted has reported. Heights are evaluated in ascending order.
#[derive(Clone, Debug)]
pub struct CheckpointTracker {
    keys: Vec<PublicKey>,
    records: BTreeMap<u64, BTreeMap<NodeId, CheckpointRecord>>,
    excluded: BTreeSet<NodeId>,
    evaluated_upto: u64,
    /// Fingerprint agreed by the majority per evaluated height.
    agreed: BTreeMap<u64, (Hash256, Hash256, Hash256)>,
}

impl CheckpointTracker {
    pub fn new(keys: Vec<PublicKey>) -> Self {
        Self { keys, records: BTreeMap::new(), excluded: BTreeSet::new(), evaluated_upto: 0, agreed: BTreeMap::new() }
    }

    pub fn excluded(&self) -> &BTreeSet<NodeId> {
        &self.excluded
    }

    pub fn agreed(&self, height: u64) -> Option<Hash256> {
        self.agreed.get(&height).map(|f| f.1)
    }

    /// Adds a record and evaluates every height that became complete.
    pub fn add(&mut self, rec: CheckpointRecord) -> Vec<DivergenceAlarm> {
        if rec.height <= self.evaluated_upto || rec.node as usize >= self.keys.len() {
            return Vec::new();
        }
        self.records.entry(rec.height).or_default().entry(rec.node).or_insert(rec);
        self.evaluate(false)
    }

    /// Evaluates the remaining heights with whatever has arrived.
    pub fn finalize(&mut self) -> Vec<DivergenceAlarm> {
        self.evaluate(true)
    }

    fn complete(&self, recs: &BTreeMap<NodeId, CheckpointRecord>) -> bool {
        (0..self.keys.len() as NodeId).filter(|n| !self.excluded.contains(n)).all(|n| recs.contains_key(&n))
    }

    fn evaluate(&mut self, force: bool) -> Vec<DivergenceAlarm> {
        let mut alarms = Vec::new();
        while let Some((&h, recs)) = self.records.iter().next() {
            if !force && !self.complete(recs) {
                break;
            }
            let recs = self.records.remove(&h).unwrap();
            self.evaluated_upto = h;
            if let Some(a) = self.compare(h, &recs) {
                self.excluded.extend(a.nodes.iter().copied());
                alarms.push(a);
            }
        }
        alarms
    }

    fn compare(&mut self, h: u64, recs: &BTreeMap<NodeId, CheckpointRecord>) -> Option<DivergenceAlarm> {
        let mut groups: BTreeMap<(Hash256, Hash256, Hash256), Vec<NodeId>> = BTreeMap::new();
        let mut bad = Vec::new();
        for (&n, r) in recs {
            if self.excluded.contains(&n) {
                continue;
            }
            if r.verify(&self.keys[n as usize]) {
                groups.entry(r.fingerprint()).or_default().push(n);
            } else {
                bad.push(n);
            }
        }
        let voters = groups.values().map(Vec::len).sum::<usize>() + bad.len();
        let majority = groups.iter().find(|(_, v)| v.len() * 2 > voters).map(|(f, _)| *f);
        let mut named: Vec<NodeId> = match majority {
            Some(f) => {
                self.agreed.insert(h, f);
                groups.into_iter().filter(|(g, _)| *g != f).flat_map(|(_, v)| v).collect()
            }
            // no majority: nothing can be trusted
            None if groups.len() > 1 => groups.into_values().flatten().collect(),
            None => Vec::new(),
        };
        named.extend(bad);
        named.sort_unstable();
        (!named.is_empty()).then_some(DivergenceAlarm { height: h, nodes: named })
    }
}
