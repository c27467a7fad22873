//! Client transactions.
//!
//! Arguments are encoded canonically as a length-prefixed sequence of
//! tagged values (see [`crate::mvstore::encode_row`]), so the transaction
//! hash does not depend on how a client spelled them.

use serde::Serialize;

use crate::codec::{Canonical, DecodeError, Decoder, Encoder, Hash256};
use crate::crypto::{KeyPair, PublicKey, Signature};
use crate::mvstore::{decode_row, encode_row, Value};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Invocation {
    pub contract: String,
    pub args: Vec<Value>,
}

impl Invocation {
    pub fn new(contract: &str, args: Vec<Value>) -> Self {
        Self { contract: contract.to_owned(), args }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transaction {
    pub username: String,
    pub invocation: Invocation,
    /// Block height the client executes against. Set only in the
    /// execute-and-order flow.
    pub snapshot_height: Option<u64>,
    pub global_id: Hash256,
    pub client_sig: Signature,
}

fn content_hash(username: &str, inv: &Invocation, snapshot: Option<u64>) -> Hash256 {
    let mut e = Encoder::new();
    e.str(username).str(&inv.contract);
    encode_row(&mut e, &inv.args);
    e.opt_u64(snapshot);
    Hash256::digest(e.as_slice())
}

impl Transaction {
    /// Execute-and-order transaction: the id is the hash of its content.
    pub fn new_eo(key: &KeyPair, username: &str, invocation: Invocation, snapshot_height: u64) -> Self {
        let global_id = content_hash(username, &invocation, Some(snapshot_height));
        Self::signed(key, username, invocation, Some(snapshot_height), global_id)
    }

    /// Order-then-execute transaction with a client-chosen unique id.
    pub fn new_oe(key: &KeyPair, username: &str, invocation: Invocation, unique_id: Hash256) -> Self {
        Self::signed(key, username, invocation, None, unique_id)
    }

    fn signed(key: &KeyPair, username: &str, invocation: Invocation, snapshot: Option<u64>, global_id: Hash256) -> Self {
        let mut tx = Self {
            username: username.to_owned(),
            invocation,
            snapshot_height: snapshot,
            global_id,
            client_sig: Signature::default(),
        };
        tx.client_sig = key.sign(tx.signing_digest().as_bytes());
        tx
    }

    /// Hash of every field except the signature.
    pub fn signing_digest(&self) -> Hash256 {
        let mut e = Encoder::new();
        e.str(&self.username).str(&self.invocation.contract);
        encode_row(&mut e, &self.invocation.args);
        e.opt_u64(self.snapshot_height).hash(&self.global_id);
        Hash256::digest(e.as_slice())
    }

    pub fn verify(&self, key: &PublicKey) -> bool {
        key.verify(self.signing_digest().as_bytes(), &self.client_sig)
    }

    /// Content-derived ids must match the content.
    pub fn id_consistent(&self) -> bool {
        match self.snapshot_height {
            Some(h) => content_hash(&self.username, &self.invocation, Some(h)) == self.global_id,
            None => true,
        }
    }
}

impl Canonical for Transaction {
    fn encode_to(&self, e: &mut Encoder) {
        e.str(&self.username).str(&self.invocation.contract);
        encode_row(e, &self.invocation.args);
        e.opt_u64(self.snapshot_height).hash(&self.global_id).bytes(&self.client_sig.0);
    }

    fn decode_from(d: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        let username = d.string()?;
        let contract = d.string()?;
        let args = decode_row(d)?;
        Ok(Self {
            username,
            invocation: Invocation { contract, args },
            snapshot_height: d.opt_u64()?,
            global_id: d.hash()?,
            client_sig: Signature(d.bytes()?.to_vec()),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inv() -> Invocation {
        Invocation::new("kv_add", vec![Value::Int(1), Value::Int(5)])
    }

    #[test]
    fn eo_id_is_content_hash() {
        let k = KeyPair::derive(1, "alice");
        let a = Transaction::new_eo(&k, "alice", inv(), 3);
        let b = Transaction::new_eo(&k, "alice", inv(), 3);
        let c = Transaction::new_eo(&k, "alice", inv(), 4);
        assert_eq!(a.global_id, b.global_id);
        assert_ne!(a.global_id, c.global_id);
        assert!(a.id_consistent());
    }

    #[test]
    fn tampering_breaks_signature() {
        let k = KeyPair::derive(1, "alice");
        let mut t = Transaction::new_oe(&k, "alice", inv(), Hash256::digest(b"n"));
        assert!(t.verify(&k.public()));
        t.invocation.args[1] = Value::Int(6);
        assert!(!t.verify(&k.public()));
    }

    #[test]
    fn canonical_roundtrip() {
        let k = KeyPair::derive(1, "alice");
        let t = Transaction::new_eo(&k, "alice", inv(), 9);
        assert_eq!(Transaction::from_canonical(&t.to_canonical()).unwrap(), t);
    }
}
