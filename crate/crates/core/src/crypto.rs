//! Ed25519 signing for clients, orderers and nodes.

use ed25519_dalek::{Signature as DalekSig, Signer, SigningKey, Verifier, VerifyingKey};
use serde::{Deserialize, Serialize};

use crate::codec::Hash256;

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize, PartialOrd, Ord)]
pub struct PublicKey(#[serde(with = "hex_32")] pub [u8; 32]);

impl PublicKey {
    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Option<Self> {
        let v = hex::decode(s).ok()?;
        Some(PublicKey(v.try_into().ok()?))
    }

    pub fn verify(&self, msg: &[u8], sig: &Signature) -> bool {
        let Ok(vk) = VerifyingKey::from_bytes(&self.0) else {
            return false;
        };
        let Ok(bytes) = <[u8; 64]>::try_from(sig.0.as_slice()) else {
            return false;
        };
        vk.verify(msg, &DalekSig::from_bytes(&bytes)).is_ok()
    }
}

/// Detached signature bytes. Kept as a `Vec` so that malformed signatures
/// can still travel through the codec and fail verification.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct Signature(pub Vec<u8>);

#[derive(Clone)]
pub struct KeyPair {
    sk: SigningKey,
}

impl std::fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "KeyPair({})", self.public().to_hex())
    }
}

impl KeyPair {
    /// Deterministic key derived from a label. Simulations derive every
    /// participant key from the scenario seed so that runs replay exactly.
    pub fn derive(seed: u64, label: &str) -> Self {
        let h = Hash256::digest_parts(&[b"relchain-key", &seed.to_be_bytes(), label.as_bytes()]);
        Self { sk: SigningKey::from_bytes(&h.0) }
    }

    pub fn public(&self) -> PublicKey {
        PublicKey(self.sk.verifying_key().to_bytes())
    }

    pub fn sign(&self, msg: &[u8]) -> Signature {
        Signature(self.sk.sign(msg).to_bytes().to_vec())
    }
}

mod hex_32 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[u8; 32], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[u8; 32], D::Error> {
        let s = String::deserialize(d)?;
        let v = hex::decode(&s).map_err(serde::de::Error::custom)?;
        v.try_into().map_err(|_| serde::de::Error::custom("expected 32 bytes"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_keys_are_stable_and_distinct() {
        let a = KeyPair::derive(7, "alice");
        assert_eq!(a.public(), KeyPair::derive(7, "alice").public());
        assert_ne!(a.public(), KeyPair::derive(8, "alice").public());
        assert_ne!(a.public(), KeyPair::derive(7, "bob").public());
    }

    #[test]
    fn sign_verify() {
        let k = KeyPair::derive(1, "k");
        let sig = k.sign(b"msg");
        assert!(k.public().verify(b"msg", &sig));
        assert!(!k.public().verify(b"msh", &sig));
        assert!(!k.public().verify(b"msg", &Signature(vec![1, 2, 3])));
    }
}
