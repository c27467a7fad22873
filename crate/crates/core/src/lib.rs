pub mod codec;
pub mod contracts;
pub mod crypto;
pub mod mvstore;
pub mod ordering;
pub mod ssi;
pub mod tx;
pub mod txn;
pub mod node;
pub mod netsim;
pub mod cli;
