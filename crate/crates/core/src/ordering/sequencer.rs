use std::collections::{HashSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::block::Block;
use crate::codec::{Encoder, Hash256};
use crate::crypto::{KeyPair, PublicKey};
use crate::tx::Transaction;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OrderingError {
    #[error("ordering queue is closed")]
    QueueClosed,
    #[error("invalid orderer configuration: {0}")]
    BadConfig(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrdererConfig {
    pub block_size: usize,
    /// Simulated microseconds since the first pending transaction.
    pub block_timeout_us: u64,
}

impl OrdererConfig {
    pub fn validate(&self) -> Result<(), OrderingError> {
        if self.block_size == 0 {
            return Err(OrderingError::BadConfig("block_size must be at least 1".into()));
        }
        if self.block_timeout_us == 0 {
            return Err(OrderingError::BadConfig("block timeout must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CutTrigger {
    Size,
    TimeToCut,
}

/// Result of a submission.
#[derive(Debug, Default)]
pub struct SubmitAck {
    pub duplicate: bool,
    /// Blocks cut because the size limit was reached.
    pub blocks: Vec<Block>,
    /// Height for which a time-to-cut timer must now be armed.
    pub arm_timer: Option<u64>,
}

/// A total-order block producer.
pub trait OrderingBackend {
    fn submit(&mut self, tx: Transaction) -> Result<SubmitAck, OrderingError>;
    /// Handles a time-to-cut message for `height`. Only the first message
    /// for a height with pending transactions cuts a block.
    fn time_to_cut(&mut self, height: u64) -> (Option<Block>, Option<u64>);
    /// Archived blocks with `from <= seq <= to`.
    fn fetch(&self, from: u64, to: u64) -> Vec<Block>;
    fn public_key(&self) -> PublicKey;
    fn shutdown(&mut self);
}

/// Single logical crash-fault-tolerant sequencer.
pub struct Sequencer {
    cfg: OrdererConfig,
    key: KeyPair,
    pending: VecDeque<Transaction>,
    seen: HashSet<Hash256>,
    next_seq: u64,
    prev: Hash256,
    archive: Vec<Block>,
    closed: bool,
    dedup: bool,
}

impl Sequencer {
    pub fn new(cfg: OrdererConfig, key: KeyPair) -> Result<Self, OrderingError> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            key,
            pending: VecDeque::new(),
            seen: HashSet::new(),
            next_seq: 1,
            prev: Hash256::ZERO,
            archive: Vec::new(),
            closed: false,
            dedup: true,
        })
    }

    /// Turns off duplicate-id filtering so that replicas must catch
    /// duplicates themselves.
    pub fn set_dedup(&mut self, on: bool) {
        self.dedup = on;
    }

    pub fn pending(&self) -> usize {
        self.pending.len()
    }

    pub fn height(&self) -> u64 {
        self.next_seq - 1
    }

    fn cut(&mut self, trigger: CutTrigger) -> Block {
        let n = self.pending.len().min(self.cfg.block_size);
        let txs: Vec<Transaction> = self.pending.drain(..n).collect();
        let mut meta = Encoder::new();
        meta.u8(match trigger {
            CutTrigger::Size => 0,
            CutTrigger::TimeToCut => 1,
        });
        let b = Block::seal(self.next_seq, txs, meta.finish(), self.prev, &self.key);
        self.prev = b.this_hash;
        self.next_seq += 1;
        self.archive.push(b.clone());
        b
    }

    fn timer_after_cut(&self) -> Option<u64> {
        (!self.pending.is_empty()).then_some(self.next_seq)
    }
}

impl OrderingBackend for Sequencer {
    fn submit(&mut self, tx: Transaction) -> Result<SubmitAck, OrderingError> {
        if self.closed {
            return Err(OrderingError::QueueClosed);
        }
        if !self.seen.insert(tx.global_id) && self.dedup {
            return Ok(SubmitAck { duplicate: true, ..SubmitAck::default() });
        }
        self.pending.push_back(tx);
        let mut ack = SubmitAck::default();
        if self.pending.len() == 1 {
            ack.arm_timer = Some(self.next_seq);
        }
        while self.pending.len() >= self.cfg.block_size {
            ack.blocks.push(self.cut(CutTrigger::Size));
            ack.arm_timer = self.timer_after_cut();
        }
        Ok(ack)
    }

    fn time_to_cut(&mut self, height: u64) -> (Option<Block>, Option<u64>) {
        if height != self.next_seq || self.pending.is_empty() {
            return (None, None);
        }
        let b = self.cut(CutTrigger::TimeToCut);
        (Some(b), self.timer_after_cut())
    }

    fn fetch(&self, from: u64, to: u64) -> Vec<Block> {
        let lo = from.max(1) as usize - 1;
        let hi = (to as usize).min(self.archive.len());
        if lo >= hi {
            return Vec::new();
        }
        self.archive[lo..hi].to_vec()
    }

    fn public_key(&self) -> PublicKey {
        self.key.public()
    }

    fn shutdown(&mut self) {
        self.closed = true;
    }
}
