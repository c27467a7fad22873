use thiserror::Error;

use crate::codec::{Canonical, DecodeError, Decoder, Encoder, Hash256};
use crate::crypto::{KeyPair, PublicKey, Signature};
use crate::tx::Transaction;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BlockError {
    #[error("expected block {expected}, got {got}")]
    OutOfSequence { expected: u64, got: u64 },
    #[error("block hash does not match its contents or predecessor")]
    HashMismatch,
    #[error("orderer signature is invalid")]
    BadSignature,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Block {
    pub seq: u64,
    pub txs: Vec<Transaction>,
    pub consensus_meta: Vec<u8>,
    pub prev_hash: Hash256,
    pub this_hash: Hash256,
    pub orderer_sig: Signature,
}

impl Block {
    pub fn compute_hash(seq: u64, txs: &[Transaction], meta: &[u8], prev: &Hash256) -> Hash256 {
        let mut e = Encoder::new();
        e.u64(seq);
        e.seq(txs, |e, t| t.encode_to(e));
        e.bytes(meta).hash(prev);
        Hash256::digest(e.as_slice())
    }

    pub fn seal(seq: u64, txs: Vec<Transaction>, consensus_meta: Vec<u8>, prev_hash: Hash256, key: &KeyPair) -> Self {
        let this_hash = Self::compute_hash(seq, &txs, &consensus_meta, &prev_hash);
        let orderer_sig = key.sign(this_hash.as_bytes());
        Self { seq, txs, consensus_meta, prev_hash, this_hash, orderer_sig }
    }

    pub fn verify(&self, expected_seq: u64, prev_hash: &Hash256, orderer: &PublicKey) -> Result<(), BlockError> {
        if self.seq != expected_seq {
            return Err(BlockError::OutOfSequence { expected: expected_seq, got: self.seq });
        }
        if self.prev_hash != *prev_hash
            || Self::compute_hash(self.seq, &self.txs, &self.consensus_meta, &self.prev_hash) != self.this_hash
        {
            return Err(BlockError::HashMismatch);
        }
        if !orderer.verify(self.this_hash.as_bytes(), &self.orderer_sig) {
            return Err(BlockError::BadSignature);
        }
        Ok(())
    }
}

impl Canonical for Block {
    fn encode_to(&self, e: &mut Encoder) {
        e.u64(self.seq);
        e.seq(&self.txs, |e, t| t.encode_to(e));
        e.bytes(&self.consensus_meta).hash(&self.prev_hash).hash(&self.this_hash).bytes(&self.orderer_sig.0);
    }

    fn decode_from(d: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        Ok(Self {
            seq: d.u64()?,
            txs: d.seq(Transaction::decode_from)?,
            consensus_meta: d.bytes()?.to_vec(),
            prev_hash: d.hash()?,
            this_hash: d.hash()?,
            orderer_sig: Signature(d.bytes()?.to_vec()),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mvstore::Value;
    use crate::tx::Invocation;

    fn tx(i: i64) -> Transaction {
        let k = KeyPair::derive(0, "c");
        Transaction::new_eo(&k, "c", Invocation::new("simple_insert", vec![Value::Int(i), Value::from("v")]), 0)
    }

    #[test]
    fn genesis_verifies() {
        let k = KeyPair::derive(0, "orderer");
        let b = Block::seal(1, vec![tx(1)], vec![], Hash256::ZERO, &k);
        assert_eq!(b.verify(1, &Hash256::ZERO, &k.public()), Ok(()));
        assert_eq!(Block::from_canonical(&b.to_canonical()).unwrap(), b);
    }

    #[test]
    fn detects_tampering_gaps_and_forgery() {
        let k = KeyPair::derive(0, "orderer");
        let b = Block::seal(1, vec![tx(1), tx(2)], vec![], Hash256::ZERO, &k);
        let mut t = b.clone();
        t.txs[1].invocation.args[0] = Value::Int(3);
        assert_eq!(t.verify(1, &Hash256::ZERO, &k.public()), Err(BlockError::HashMismatch));
        let b5 = Block::seal(5, vec![], vec![], b.this_hash, &k);
        assert_eq!(b5.verify(4, &b.this_hash, &k.public()), Err(BlockError::OutOfSequence { expected: 4, got: 5 }));
        let other = KeyPair::derive(1, "orderer");
        let forged = Block::seal(1, vec![], vec![], Hash256::ZERO, &other);
        assert_eq!(forged.verify(1, &Hash256::ZERO, &k.public()), Err(BlockError::BadSignature));
    }
}
