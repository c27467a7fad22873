//! A database peer.
//!
//! The node is a passive state machine driven by the simulation: every
//! incoming message or timer returns the messages, timers and
//! notifications it produces. Execution effects are applied when a
//! transaction is dispatched; the worker pool only determines the
//! simulated time at which its done-executing gate opens. The block
//! processor handles one block at a time: `process_block` authenticates
//! and starts execution, and the `CommitBlock` timer runs the serial
//! commit pass once every transaction of the block is done.

pub mod checkpoint;
mod config;
pub mod durable;
pub mod ledger;
mod message;
pub mod runtime;

use std::collections::{BTreeMap, HashSet, VecDeque};
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::codec::{Canonical, DecodeError, Hash256};
use crate::contracts::{bootstrap, invoke, ContractError, Genesis, HostLibrary};
use crate::crypto::{KeyPair, PublicKey};
use crate::mvstore::{LocalTxId, Predicate, SnapshotSpec, Store, StoreError, Value, WriteSet, BOOTSTRAP_TX};
use crate::ordering::{Block, BlockError};
use crate::ssi::{resolve_ww, AbortRow, ConflictTracker, TxOrder, TxStatus};
use crate::tx::Transaction;
use crate::txn::TxContext;

pub use checkpoint::{CheckpointRecord, CheckpointTracker, DivergenceAlarm, NodeId};
pub use config::{CostModel, CrashPoint, Flow, NodeConfig, NodeFaults};
pub use durable::{LogError, RecordLog};
pub use ledger::{Ledger, LedgerEntry, LedgerRecord, LedgerStatus, TxLogRecord};
pub use message::Message;
pub use runtime::{AbortReason, RtEntry, RtState, TxRuntimeTable, WorkerPool};

#[derive(Debug, Error)]
pub enum NodeError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Log(#[from] LogError),
    #[error("undecodable durable record: {0}")]
    Decode(#[from] DecodeError),
    #[error("ledger and block store disagree: {0}")]
    CorruptLedger(String),
}

/// Append-only files that survive a crash.
#[derive(Clone, Debug)]
pub struct Durable {
    pub blocks: RecordLog,
    pub ledger: RecordLog,
    pub txlog: RecordLog,
}

impl Durable {
    pub fn memory() -> Self {
        Self { blocks: RecordLog::memory(), ledger: RecordLog::memory(), txlog: RecordLog::memory() }
    }

    pub fn in_dir(dir: &Path) -> Result<Self, LogError> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            blocks: RecordLog::file(dir.join("blocks.log"))?,
            ledger: RecordLog::file(dir.join("ledger.log"))?,
            txlog: RecordLog::file(dir.join("txlog.log"))?,
        })
    }

    pub fn export(&self, dir: &Path) -> Result<(), LogError> {
        std::fs::create_dir_all(dir)?;
        self.blocks.export(dir.join("blocks.log"))?;
        self.ledger.export(dir.join("ledger.log"))?;
        self.txlog.export(dir.join("txlog.log"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Dest {
    Node(NodeId),
    Peers,
    Orderer,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TimerEvent {
    CommitBlock(u64),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Output {
    Send { to: Dest, msg: Message },
    Timer { at: u64, event: TimerEvent },
    Notify { gid: Hash256, status: LedgerStatus, at: u64 },
    Rejected { gid: Hash256, reason: String },
    Alarm(DivergenceAlarm),
    Halted { reason: String },
    Crashed,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "state", content = "reason", rename_all = "lowercase")]
pub enum NodeState {
    Running,
    Halted(String),
    Crashed,
}

/// Raw per-node counters; rates are derived by the simulation report.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct NodeMetrics {
    pub blocks_received: u64,
    pub first_receive_us: Option<u64>,
    pub blocks_processed: u64,
    pub last_commit_us: u64,
    /// Sum over blocks of process start to commit end.
    pub process_us: u64,
    /// Sum over blocks of process start to the last done-executing gate.
    pub exec_phase_us: u64,
    /// Sum over blocks of the last done-executing gate to commit end.
    pub commit_phase_us: u64,
    pub txs_executed: u64,
    pub tx_exec_us: u64,
    pub missing_txs: u64,
    pub committed: u64,
    pub aborted: u64,
    pub rejected_blocks: u64,
}

/// One contested version and how it was resolved.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct WwEvent {
    pub block: u64,
    pub table: String,
    pub key: Vec<Value>,
    pub winner: Hash256,
    pub losers: Vec<Hash256>,
}

struct InFlight {
    block: Block,
    started: u64,
    exec_done: u64,
    invalid: BTreeMap<usize, AbortReason>,
}

/// Own id for internal reads that never write.
const READER: LocalTxId = LocalTxId::MAX;

pub struct Node {
    cfg: NodeConfig,
    key: KeyPair,
    lib: Arc<HostLibrary>,
    store: Arc<Store>,
    tracker: Arc<ConflictTracker>,
    durable: Durable,
    ledger: Ledger,
    rt: TxRuntimeTable,
    pool: WorkerPool,
    next_local: LocalTxId,
    committed_set: Arc<HashSet<LocalTxId>>,
    expected_seq: u64,
    last_hash: Hash256,
    block_hashes: Vec<Hash256>,
    buffered: BTreeMap<u64, Block>,
    queue: VecDeque<Block>,
    in_flight: Option<InFlight>,
    /// Block whose ledger entries survived a crash and must not be
    /// appended again.
    reprocess: Option<u64>,
    height: u64,
    checkpoints: CheckpointTracker,
    submitted: Vec<CheckpointRecord>,
    metrics: NodeMetrics,
    ww_log: Vec<WwEvent>,
    alarms: Vec<DivergenceAlarm>,
    state: NodeState,
    withheld: bool,
}

fn run_contract(
    store: &Store,
    tracker: &ConflictTracker,
    lib: &HostLibrary,
    snap: SnapshotSpec,
    tx: &Transaction,
    check: bool,
) -> (Result<(), ContractError>, WriteSet) {
    let mut ctx = TxContext::new(store, tracker, snap, &tx.username, check);
    let r = invoke(&mut ctx, lib, &tx.invocation.contract, &tx.invocation.args);
    (r, ctx.into_write_set())
}

impl Node {
    /// Opens a node over its durable files, rebuilding the store from
    /// genesis and replaying every committed transaction.
    pub fn open(
        cfg: NodeConfig,
        genesis: &Genesis,
        lib: Arc<HostLibrary>,
        durable: Durable,
        metrics: NodeMetrics,
    ) -> Result<Self, NodeError> {
        let store = Store::new();
        bootstrap(&store, genesis)?;
        let key = KeyPair::derive(cfg.key_seed, &format!("node{}", cfg.id));
        let mut committed = HashSet::new();
        committed.insert(BOOTSTRAP_TX);
        let mut n = Self {
            key,
            lib,
            store: Arc::new(store),
            tracker: Arc::new(ConflictTracker::default()),
            durable,
            ledger: Ledger::default(),
            rt: TxRuntimeTable::default(),
            pool: WorkerPool::new(cfg.workers),
            next_local: 1,
            committed_set: Arc::new(committed),
            expected_seq: 1,
            last_hash: Hash256::ZERO,
            block_hashes: Vec::new(),
            buffered: BTreeMap::new(),
            queue: VecDeque::new(),
            in_flight: None,
            reprocess: None,
            height: 0,
            checkpoints: CheckpointTracker::new(cfg.node_keys.clone()),
            submitted: Vec::new(),
            metrics,
            ww_log: Vec::new(),
            alarms: Vec::new(),
            state: NodeState::Running,
            withheld: false,
            cfg,
        };
        n.recover()?;
        Ok(n)
    }

    pub fn id(&self) -> NodeId {
        self.cfg.id
    }

    pub fn config(&self) -> &NodeConfig {
        &self.cfg
    }

    pub fn height(&self) -> u64 {
        self.height
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn ledger(&self) -> &Ledger {
        &self.ledger
    }

    pub fn durable(&self) -> &Durable {
        &self.durable
    }

    pub fn metrics(&self) -> &NodeMetrics {
        &self.metrics
    }

    pub fn ww_log(&self) -> &[WwEvent] {
        &self.ww_log
    }

    pub fn alarms(&self) -> &[DivergenceAlarm] {
        &self.alarms
    }

    pub fn submitted_checkpoints(&self) -> &[CheckpointRecord] {
        &self.submitted
    }

    pub fn state(&self) -> &NodeState {
        &self.state
    }

    pub fn is_running(&self) -> bool {
        self.state == NodeState::Running
    }

    pub fn block_hash(&self, seq: u64) -> Option<Hash256> {
        seq.checked_sub(1).and_then(|i| self.block_hashes.get(i as usize)).copied()
    }

    /// Transactions the runtime table still tracks.
    pub fn in_flight_txs(&self) -> usize {
        self.rt.len()
    }

    /// Actions after a (re)start: refetch missed blocks, resubmit the
    /// latest checkpoint and resume queued blocks.
    pub fn start(&mut self, now: u64) -> Vec<Output> {
        let mut out = vec![Output::Send {
            to: Dest::Orderer,
            msg: Message::FetchBlocks { from: self.expected_seq, node: self.cfg.id },
        }];
        let k = self.cfg.checkpoint_interval;
        if self.height > 0 && self.height.is_multiple_of(k) {
            self.checkpoint(self.height, &mut out);
        }
        self.guard(now, &mut out, |n, now, out| n.try_process(now, out));
        out
    }

    pub fn handle(&mut self, now: u64, msg: Message) -> Vec<Output> {
        let mut out = Vec::new();
        if !self.is_running() {
            return out;
        }
        match msg {
            Message::ClientTx(tx) => self.guard(now, &mut out, |n, now, out| n.on_tx(now, tx, true, out)),
            Message::ForwardTx(tx) => self.guard(now, &mut out, |n, now, out| n.on_tx(now, tx, false, out)),
            Message::DeliverBlock(b) => self.guard(now, &mut out, |n, now, out| n.on_block(now, b, out)),
            Message::DeliverCheckpoint(r) => self.on_checkpoint(r, &mut out),
            Message::SubmitTx(_) | Message::SubmitCheckpoint(_) | Message::FetchBlocks { .. } | Message::TimeToCut(_) => {}
        }
        out
    }

    pub fn on_timer(&mut self, now: u64, ev: TimerEvent) -> Vec<Output> {
        let mut out = Vec::new();
        if !self.is_running() {
            return out;
        }
        match ev {
            TimerEvent::CommitBlock(seq) => self.guard(now, &mut out, |n, now, out| n.commit_block(now, seq, out)),
        }
        out
    }

    /// Evaluates checkpoints that are still incomplete at the end of a run.
    pub fn finalize_checkpoints(&mut self) -> Vec<DivergenceAlarm> {
        let a = self.checkpoints.finalize();
        self.alarms.extend(a.iter().cloned());
        a
    }

    fn guard(
        &mut self,
        now: u64,
        out: &mut Vec<Output>,
        f: impl FnOnce(&mut Self, u64, &mut Vec<Output>) -> Result<(), NodeError>,
    ) {
        if let Err(e) = f(self, now, out) {
            self.halt(e.to_string(), out);
        }
    }

    fn halt(&mut self, reason: String, out: &mut Vec<Output>) {
        if self.is_running() {
            self.state = NodeState::Halted(reason.clone());
            out.push(Output::Halted { reason });
        }
    }

    fn alloc_local(&mut self) -> LocalTxId {
        let l = self.next_local;
        self.next_local += 1;
        l
    }

    fn user_key(&self, height: u64, username: &str) -> Option<PublicKey> {
        let snap = SnapshotSpec::at_height(height, READER);
        let res = self.store.read_checked(&snap, "sys_users", &Predicate::eq("username", username), false).ok()?;
        let (_, row) = res.rows.into_iter().next()?;
        PublicKey::from_hex(row[2].as_text()?)
    }

    fn check_signature(&self, tx: &Transaction, height: u64) -> Result<(), AbortReason> {
        if self.cfg.flow == Flow::ExecuteOrder && (tx.snapshot_height.is_none() || !tx.id_consistent()) {
            return Err(AbortReason::BadId);
        }
        let key = self.user_key(height, &tx.username).ok_or(AbortReason::UnknownUser)?;
        if !tx.verify(&key) {
            return Err(AbortReason::BadSignature);
        }
        Ok(())
    }

    /// Authentication at block processing time, against the state of the
    /// previous block, which every replica agrees on.
    fn authenticate(&self, tx: &Transaction, b: u64, pos: usize, seen: &mut HashSet<Hash256>) -> Result<(), AbortReason> {
        if self.ledger.seen_before(&tx.global_id, b, pos as u32) || !seen.insert(tx.global_id) {
            return Err(AbortReason::Duplicate);
        }
        if self.cfg.flow == Flow::ExecuteOrder && tx.snapshot_height.is_some_and(|s| s >= b) {
            return Err(AbortReason::InvalidSnapshot);
        }
        self.check_signature(tx, b - 1)
    }

    fn on_tx(&mut self, now: u64, tx: Transaction, from_client: bool, out: &mut Vec<Output>) -> Result<(), NodeError> {
        let gid = tx.global_id;
        let verdict = if self.ledger.contains(&gid) || self.rt.contains(&gid) {
            Err("duplicate transaction id".to_owned())
        } else {
            self.check_signature(&tx, self.height).map_err(|r| format!("{r:?}"))
        };
        if let Err(reason) = verdict {
            if from_client {
                out.push(Output::Rejected { gid, reason });
            }
            return Ok(());
        }
        if from_client {
            if self.cfg.flow == Flow::ExecuteOrder && !self.cfg.faults.drop_forwarding {
                out.push(Output::Send { to: Dest::Peers, msg: Message::ForwardTx(tx.clone()) });
            }
            out.push(Output::Send { to: Dest::Orderer, msg: Message::SubmitTx(tx.clone()) });
        }
        if self.cfg.flow == Flow::ExecuteOrder {
            let s = tx.snapshot_height.unwrap_or(0);
            if s > self.height {
                self.rt.insert(RtEntry::new(tx, RtState::Deferred));
            } else if self.cfg.same_block_visible {
                self.rt.insert(RtEntry::new(tx, RtState::Lazy));
            } else {
                self.rt.insert(RtEntry::new(tx, RtState::Lazy));
                self.execute_eo(now, gid, None);
            }
        }
        Ok(())
    }

    /// Executes a pending execute-and-order transaction. `same_block` runs
    /// it inside the commit pass of that block.
    fn execute_eo(&mut self, now: u64, gid: Hash256, same_block: Option<u64>) -> u64 {
        let local = self.alloc_local();
        let e = self.rt.get(&gid).expect("runtime entry");
        let tx = e.tx.clone();
        let s = tx.snapshot_height.unwrap_or(0);
        let snap = SnapshotSpec::BlockHeight { height: s, own: local, same_block };
        self.begin(gid, local);
        let (res, ws) = run_contract(&self.store, &self.tracker, &self.lib, snap, &tx, true);
        let cost = self.cfg.cost.exec(&tx.invocation.contract);
        let done = match same_block {
            Some(_) => now + cost,
            None => {
                let (w, done) = self.pool.assign(now, cost);
                self.rt.get_mut(&gid).unwrap().worker = Some(w);
                done
            }
        };
        self.finish_exec(gid, local, res, ws, done, cost);
        cost
    }

    fn begin(&mut self, gid: Hash256, local: LocalTxId) {
        self.store.register_tx(local, gid);
        self.tracker.lock().begin(local, gid);
        self.rt.bind_local(gid, local);
    }

    fn finish_exec(
        &mut self,
        gid: Hash256,
        local: LocalTxId,
        res: Result<(), ContractError>,
        ws: WriteSet,
        done: u64,
        cost: u64,
    ) {
        self.metrics.txs_executed += 1;
        self.metrics.tx_exec_us += cost;
        let e = self.rt.get_mut(&gid).unwrap();
        e.done_at = Some(done);
        match res {
            Ok(()) => {
                self.tracker.lock().set_status(local, TxStatus::Ready);
                e.ws = ws;
                e.state = RtState::Ready;
            }
            Err(err) => {
                self.store.rollback(local, &ws);
                self.tracker.lock().mark_aborted(local);
                e.ws = ws;
                e.state = RtState::Aborted(AbortReason::Contract(err.to_string()));
            }
        }
    }

    /// Aborts a pending transaction and withdraws its claims.
    fn abort_local(&mut self, local: LocalTxId, reason: AbortReason) {
        let Some(gid) = self.rt.gid_of(local) else {
            self.tracker.lock().mark_aborted(local);
            return;
        };
        let e = self.rt.get_mut(&gid).unwrap();
        if e.state.is_final() {
            return;
        }
        self.store.rollback(local, &e.ws);
        self.tracker.lock().mark_aborted(local);
        e.state = RtState::Aborted(reason);
    }

    fn on_block(&mut self, now: u64, block: Block, out: &mut Vec<Output>) -> Result<(), NodeError> {
        if block.seq < self.expected_seq {
            return Ok(());
        }
        if block.seq > self.expected_seq {
            self.buffered.insert(block.seq, block);
            return Ok(());
        }
        self.accept_block(now, block)?;
        while let Some(b) = self.buffered.remove(&self.expected_seq) {
            self.accept_block(now, b)?;
        }
        self.buffered.retain(|&s, _| s > self.expected_seq);
        self.try_process(now, out)
    }

    fn accept_block(&mut self, now: u64, block: Block) -> Result<(), NodeError> {
        match block.verify(self.expected_seq, &self.last_hash, &self.cfg.orderer_key) {
            Ok(()) => {}
            Err(BlockError::OutOfSequence { .. }) => return Ok(()),
            Err(BlockError::HashMismatch | BlockError::BadSignature) => {
                // a fetch would return the same stream; wait for the
                // checkpoint comparison instead
                self.metrics.rejected_blocks += 1;
                return Ok(());
            }
        }
        self.durable.blocks.append(&block.to_canonical())?;
        self.block_hashes.push(block.this_hash);
        self.last_hash = block.this_hash;
        self.expected_seq += 1;
        self.metrics.blocks_received += 1;
        self.metrics.first_receive_us.get_or_insert(now);
        self.queue.push_back(block);
        Ok(())
    }

    fn try_process(&mut self, now: u64, out: &mut Vec<Output>) -> Result<(), NodeError> {
        if self.in_flight.is_some() {
            return Ok(());
        }
        if let Some(b) = self.queue.pop_front() {
            self.process_block(now, b, out)?;
        }
        Ok(())
    }

    fn process_block(&mut self, now: u64, block: Block, out: &mut Vec<Output>) -> Result<(), NodeError> {
        let b = block.seq;
        self.rt.current_block = Some(b);
        let mut invalid = BTreeMap::new();
        let mut seen = HashSet::new();
        let mut valid = Vec::new();
        for (pos, tx) in block.txs.iter().enumerate() {
            match self.authenticate(tx, b, pos, &mut seen) {
                Ok(()) => valid.push(tx.global_id),
                Err(r) => {
                    if r != AbortReason::Duplicate {
                        if let Some(l) = self.rt.get(&tx.global_id).and_then(|e| e.local) {
                            self.abort_local(l, r.clone());
                        }
                    }
                    invalid.insert(pos, r);
                }
            }
        }
        let n = block.txs.len() as u64;
        let cost = self.cfg.cost.clone();
        let (exec_done, commit_at) = match self.cfg.flow {
            Flow::ExecuteOrder => {
                let mut lazy_cost = 0;
                for (pos, tx) in block.txs.iter().enumerate() {
                    if invalid.contains_key(&pos) {
                        continue;
                    }
                    let gid = tx.global_id;
                    let missing = !self.rt.contains(&gid);
                    if missing {
                        self.metrics.missing_txs += 1;
                        self.rt.insert(RtEntry::new(tx.clone(), RtState::Lazy));
                    }
                    let e = self.rt.get_mut(&gid).unwrap();
                    if self.cfg.same_block_visible {
                        if let (Some(l), false) = (e.local, e.state.is_final()) {
                            // discard the early run; it will be redone in order
                            let ws = std::mem::take(&mut e.ws);
                            self.store.rollback(l, &ws);
                            self.tracker.lock().mark_aborted(l);
                        }
                        let e = self.rt.get_mut(&gid).unwrap();
                        e.state = RtState::Lazy;
                        e.done_at = None;
                        lazy_cost += cost.exec(&tx.invocation.contract);
                    } else if matches!(e.state, RtState::Deferred | RtState::Lazy) {
                        e.state = RtState::Lazy;
                        self.execute_eo(now, gid, None);
                    }
                }
                let done = valid.iter().filter_map(|g| self.rt.get(g).and_then(|e| e.done_at)).fold(now, u64::max);
                (done, done + lazy_cost + cost.block_overhead_us + n * cost.commit_us)
            }
            Flow::OrderExecute => {
                let done = self.execute_oe(now, b, &block, &valid);
                (done, done + cost.block_overhead_us + n * cost.commit_us)
            }
            Flow::Serial => {
                let done = self.execute_serial(now, b, &block, &valid);
                (done, done + cost.block_overhead_us + n * cost.commit_us)
            }
        };
        if self.reprocess.take() != Some(b) {
            let entries = block
                .txs
                .iter()
                .enumerate()
                .map(|(pos, tx)| LedgerEntry {
                    block_number: b,
                    position: pos as u32,
                    global_id: tx.global_id,
                    local_id: if invalid.contains_key(&pos) {
                        0
                    } else {
                        self.rt.get(&tx.global_id).and_then(|e| e.local).unwrap_or(0)
                    },
                    username: tx.username.clone(),
                    invocation: tx.invocation.clone(),
                    status: None,
                    commit_time: None,
                })
                .collect();
            let rec = LedgerRecord::Entries { block: b, entries };
            self.durable.ledger.append(&rec.to_canonical())?;
            self.ledger.apply(&rec);
        }
        self.in_flight = Some(InFlight { block, started: now, exec_done, invalid });
        out.push(Output::Timer { at: commit_at, event: TimerEvent::CommitBlock(b) });
        Ok(())
    }

    /// Runs all valid transactions of a block concurrently against the last
    /// committed state.
    fn execute_oe(&mut self, now: u64, b: u64, block: &Block, valid: &[Hash256]) -> u64 {
        let mut jobs = Vec::new();
        for tx in &block.txs {
            if !valid.contains(&tx.global_id) || self.rt.contains(&tx.global_id) {
                continue;
            }
            self.rt.insert(RtEntry::new(tx.clone(), RtState::Lazy));
            let local = self.alloc_local();
            self.begin(tx.global_id, local);
            jobs.push((tx.clone(), local));
        }
        let _ = b;
        let committed = self.committed_set.clone();
        let (store, tracker, lib) = (&*self.store, &*self.tracker, &*self.lib);
        let run = |(tx, local): &(Transaction, LocalTxId)| {
            let snap = SnapshotSpec::TxSet { committed: committed.clone(), own: *local };
            run_contract(store, tracker, lib, snap, tx, false)
        };
        let results: Vec<_> = if self.cfg.parallel { jobs.par_iter().map(run).collect() } else { jobs.iter().map(run).collect() };
        drop(committed);
        let mut done_max = now;
        for ((tx, local), (res, ws)) in jobs.into_iter().zip(results) {
            let cost = self.cfg.cost.exec(&tx.invocation.contract);
            let (w, done) = self.pool.assign(now, cost);
            self.rt.get_mut(&tx.global_id).unwrap().worker = Some(w);
            self.finish_exec(tx.global_id, local, res, ws, done, cost);
            done_max = done_max.max(done);
        }
        done_max
    }

    /// Runs the valid transactions of a block one after another, each seeing
    /// the commits before it.
    fn execute_serial(&mut self, now: u64, b: u64, block: &Block, valid: &[Hash256]) -> u64 {
        let mut t = now;
        for tx in &block.txs {
            let gid = tx.global_id;
            if !valid.contains(&gid) || self.rt.contains(&gid) {
                continue;
            }
            self.rt.insert(RtEntry::new(tx.clone(), RtState::Lazy));
            let local = self.alloc_local();
            self.begin(gid, local);
            let snap = SnapshotSpec::BlockHeight { height: b - 1, own: local, same_block: Some(b) };
            let (res, ws) = run_contract(&self.store, &self.tracker, &self.lib, snap, tx, false);
            let cost = self.cfg.cost.exec(&tx.invocation.contract);
            t += cost;
            self.finish_exec(gid, local, res, ws, t, cost);
            if self.rt.get(&gid).unwrap().state == RtState::Ready {
                if self.withhold_now(b) {
                    self.abort_local(local, AbortReason::Withheld);
                } else {
                    let ws = self.rt.get(&gid).unwrap().ws.clone();
                    match self.store.stamp(&ws, b) {
                        Ok(()) => {
                            self.tracker.lock().mark_committed(local);
                            self.rt.get_mut(&gid).unwrap().state = RtState::Committed;
                        }
                        Err(_) => self.abort_local(local, AbortReason::WriteConflict),
                    }
                }
            }
        }
        t
    }

    fn withhold_now(&mut self, b: u64) -> bool {
        let hit = !self.withheld && self.cfg.faults.withhold_commit_at.is_some_and(|at| b >= at);
        self.withheld |= hit;
        hit
    }

    fn commit_block(&mut self, now: u64, seq: u64, out: &mut Vec<Output>) -> Result<(), NodeError> {
        let Some(fl) = self.in_flight.take_if_seq(seq) else { return Ok(()) };
        let b = seq;
        let order = TxOrder { block_number: b, ids: fl.block.txs.iter().map(|t| t.global_id).collect() };
        let n = fl.block.txs.len();
        let crash = self.cfg.faults.crash.filter(|(at, _)| *at == b).map(|(_, p)| p);
        let half = n.div_ceil(2);
        let mut statuses = Vec::with_capacity(n);
        for (pos, tx) in fl.block.txs.iter().enumerate() {
            if crash == Some(CrashPoint::MidBlock) && pos == half {
                return self.crash(out);
            }
            let status = if fl.invalid.contains_key(&pos) {
                LedgerStatus::Aborted
            } else {
                self.decide(now, b, &order, tx.global_id)?
            };
            let rec = TxLogRecord { block: b, position: pos as u32, global_id: tx.global_id, status, time: now };
            self.durable.txlog.append(&rec.to_canonical())?;
            statuses.push(status);
        }
        if crash == Some(CrashPoint::MidBlock) || crash == Some(CrashPoint::BeforeStatusWrite) {
            return self.crash(out);
        }
        let rec = LedgerRecord::Statuses { block: b, statuses: statuses.iter().map(|&s| (s, now)).collect() };
        self.durable.ledger.append(&rec.to_canonical())?;
        self.ledger.apply(&rec);
        if crash == Some(CrashPoint::AfterStatusWrite) {
            return self.crash(out);
        }
        self.height = b;
        self.store.set_height(b);
        self.rt.last_committed = b;
        self.rt.current_block = None;

        let m = &mut self.metrics;
        m.blocks_processed += 1;
        m.last_commit_us = now;
        m.process_us += now - fl.started;
        m.exec_phase_us += fl.exec_done - fl.started;
        m.commit_phase_us += now - fl.exec_done;
        for (pos, (tx, &s)) in fl.block.txs.iter().zip(&statuses).enumerate() {
            match s {
                LedgerStatus::Committed => m.committed += 1,
                LedgerStatus::Aborted => m.aborted += 1,
            }
            if fl.invalid.get(&pos) != Some(&AbortReason::Duplicate) {
                out.push(Output::Notify { gid: tx.global_id, status: s, at: now });
            }
        }

        if self.cfg.faults.tamper_row_at == Some(b) {
            self.tamper_row();
        }
        if b.is_multiple_of(self.cfg.checkpoint_interval) {
            self.checkpoint(b, out);
        }
        for (pos, tx) in fl.block.txs.iter().enumerate() {
            if fl.invalid.get(&pos) != Some(&AbortReason::Duplicate) {
                self.rt.remove(&tx.global_id);
            }
        }
        self.tracker.lock().prune_final();
        if self.cfg.flow == Flow::ExecuteOrder {
            for gid in self.rt.release(b) {
                if self.cfg.same_block_visible {
                    self.rt.get_mut(&gid).unwrap().state = RtState::Lazy;
                } else {
                    self.execute_eo(now, gid, None);
                }
            }
        }
        self.try_process(now, out)
    }

    fn crash(&mut self, out: &mut Vec<Output>) -> Result<(), NodeError> {
        self.state = NodeState::Crashed;
        out.push(Output::Crashed);
        Ok(())
    }

    /// Decides one transaction of block `b` in commit order.
    fn decide(&mut self, now: u64, b: u64, order: &TxOrder, gid: Hash256) -> Result<LedgerStatus, NodeError> {
        let state = self.rt.get(&gid).map(|e| e.state.clone());
        match state {
            None => return Ok(LedgerStatus::Aborted),
            Some(RtState::Committed) => return Ok(LedgerStatus::Committed),
            Some(RtState::Aborted(_)) => return Ok(LedgerStatus::Aborted),
            Some(RtState::Lazy | RtState::Deferred) => {
                let same = (self.cfg.flow == Flow::ExecuteOrder && self.cfg.same_block_visible).then_some(b);
                self.execute_eo(now, gid, same);
                if self.rt.get(&gid).unwrap().state != RtState::Ready {
                    return Ok(LedgerStatus::Aborted);
                }
            }
            Some(RtState::Ready) => {}
        }
        let local = self.rt.get(&gid).unwrap().local.expect("executed transaction has a local id");
        let victims = {
            let g = self.tracker.lock();
            match self.cfg.flow {
                Flow::OrderExecute => g.decide_standard(local),
                Flow::ExecuteOrder => g.decide_block_aware(local, order),
                Flow::Serial => Vec::new(),
            }
        };
        let mut self_abort = None;
        for v in victims {
            if v.tx == local {
                self_abort = Some(AbortReason::Dangerous(v.row));
            } else if v.row != AbortRow::NearOnly {
                // an out-of-block farConflict may not be known to every
                // replica; it is caught when its nearConflict commits
                self.abort_local(v.tx, AbortReason::Dangerous(v.row));
            }
        }
        if let Some(r) = self_abort {
            self.abort_local(local, r);
            return Ok(LedgerStatus::Aborted);
        }
        if self.withhold_now(b) {
            self.abort_local(local, AbortReason::Withheld);
            return Ok(LedgerStatus::Aborted);
        }
        let ws = self.rt.get(&gid).unwrap().ws.clone();
        for r in ws.superseded() {
            match resolve_ww(&self.store, r, local) {
                Ok(losers) if losers.is_empty() => {}
                Ok(losers) => {
                    let payload = self.store.payload(r)?;
                    let table = self.store.table_name(r)?;
                    let key = self.store.schema(&table)?.pk_of(&payload);
                    let loser_ids = losers.iter().map(|&l| self.store.gid_of(l).unwrap_or(Hash256::ZERO)).collect();
                    self.ww_log.push(WwEvent { block: b, table, key, winner: gid, losers: loser_ids });
                    for l in losers {
                        self.abort_local(l, AbortReason::WriteConflict);
                    }
                }
                Err(_) => {
                    self.abort_local(local, AbortReason::WriteConflict);
                    return Ok(LedgerStatus::Aborted);
                }
            }
        }
        if self.store.stamp(&ws, b).is_err() {
            self.abort_local(local, AbortReason::WriteConflict);
            return Ok(LedgerStatus::Aborted);
        }
        self.tracker.lock().mark_committed(local);
        if self.cfg.flow == Flow::OrderExecute {
            Arc::make_mut(&mut self.committed_set).insert(local);
        }
        self.rt.get_mut(&gid).unwrap().state = RtState::Committed;
        let replaced = self.replaced_contracts(&ws)?;
        if !replaced.is_empty() {
            for g in self.rt.invoking(&replaced, &gid) {
                if let Some(l) = self.rt.get(&g).and_then(|e| e.local) {
                    self.abort_local(l, AbortReason::ContractReplaced);
                }
            }
        }
        Ok(LedgerStatus::Committed)
    }

    /// Contract names whose definition `ws` changes.
    fn replaced_contracts(&self, ws: &WriteSet) -> Result<Vec<String>, NodeError> {
        let mut names = Vec::new();
        for r in ws.created().chain(ws.superseded()) {
            if self.store.table_name(r)? == "sys_contracts" {
                if let Some(n) = self.store.payload(r)?[0].as_text() {
                    names.push(n.to_owned());
                }
            }
        }
        names.sort();
        names.dedup();
        Ok(names)
    }

    fn tamper_row(&self) {
        let target = self
            .store
            .table_names()
            .into_iter()
            .filter(|t| !t.starts_with("sys_"))
            .chain(std::iter::once("sys_orgs".to_owned()))
            .find_map(|t| self.store.last_live(&t));
        if let Some(r) = target {
            if let Ok(mut row) = self.store.payload(r) {
                let last = row.len() - 1;
                row[last] = match &row[last] {
                    Value::Int(i) => Value::Int(i.wrapping_add(1)),
                    Value::Dec(d) => Value::Dec(crate::mvstore::Decimal::from_raw(d.raw().wrapping_add(1))),
                    Value::Text(s) => Value::Text(format!("{s}~")),
                    Value::Bool(b) => Value::Bool(!b),
                };
                let _ = self.store.overwrite_payload(r, row);
            }
        }
    }

    fn checkpoint(&mut self, h: u64, out: &mut Vec<Output>) {
        let k = self.cfg.checkpoint_interval;
        let ws = self.store.write_set_hash(h.saturating_sub(k), h);
        let mut state = self.store.state_hash();
        if self.cfg.faults.corrupt_checkpoint_at == Some(h) {
            state = Hash256::digest_parts(&[b"corrupt", state.as_bytes()]);
        }
        let chain = self.block_hash(h).unwrap_or(Hash256::ZERO);
        let rec = CheckpointRecord::new(h, ws, state, chain, self.cfg.id, &self.key);
        self.submitted.retain(|r| r.height != h);
        self.submitted.push(rec.clone());
        out.push(Output::Send { to: Dest::Orderer, msg: Message::SubmitCheckpoint(rec) });
    }

    fn on_checkpoint(&mut self, rec: CheckpointRecord, out: &mut Vec<Output>) {
        for a in self.checkpoints.add(rec) {
            let me = a.nodes.contains(&self.cfg.id);
            self.alarms.push(a.clone());
            out.push(Output::Alarm(a));
            if me {
                self.halt("named in a divergence alarm".into(), out);
            }
        }
    }

    /// Restores the durable state after a restart.
    fn recover(&mut self) -> Result<(), NodeError> {
        let blocks: Vec<Block> =
            self.durable.blocks.read_all()?.iter().map(|r| Block::from_canonical(r)).collect::<Result<_, _>>()?;
        let mut prev = Hash256::ZERO;
        for (i, b) in blocks.iter().enumerate() {
            b.verify(i as u64 + 1, &prev, &self.cfg.orderer_key)
                .map_err(|e| NodeError::CorruptLedger(format!("block store: {e}")))?;
            prev = b.this_hash;
        }
        for r in self.durable.ledger.read_all()? {
            self.ledger.apply(&LedgerRecord::from_canonical(&r)?);
        }
        let mut txlog: BTreeMap<(u64, u32), TxLogRecord> = BTreeMap::new();
        for r in self.durable.txlog.read_all()? {
            let rec = TxLogRecord::from_canonical(&r)?;
            txlog.insert((rec.block, rec.position), rec);
        }
        let last = self.ledger.last_block().unwrap_or(0);
        if last as usize > blocks.len() {
            return Err(NodeError::CorruptLedger(format!("ledger reaches block {last}, block store {}", blocks.len())));
        }
        let mut partial = None;
        for b in 1..=last {
            let block = &blocks[b as usize - 1];
            let entries = self.ledger.block(b).ok_or_else(|| NodeError::CorruptLedger(format!("no entries for {b}")))?;
            let same = entries.len() == block.txs.len()
                && entries.iter().zip(&block.txs).all(|(e, t)| e.global_id == t.global_id);
            if !same {
                return Err(NodeError::CorruptLedger(format!("transactions of block {b} differ")));
            }
            let statuses: Vec<LedgerStatus> = if self.ledger.statuses_written(b) {
                entries.iter().map(|e| e.status.unwrap()).collect()
            } else if b != last {
                return Err(NodeError::CorruptLedger(format!("block {b} has no statuses")));
            } else {
                let logged: Option<Vec<&TxLogRecord>> =
                    (0..block.txs.len() as u32).map(|p| txlog.get(&(b, p))).collect();
                match logged {
                    Some(recs) => {
                        let rec = LedgerRecord::Statuses { block: b, statuses: recs.iter().map(|r| (r.status, r.time)).collect() };
                        self.durable.ledger.append(&rec.to_canonical())?;
                        self.ledger.apply(&rec);
                        recs.iter().map(|r| r.status).collect()
                    }
                    None => {
                        partial = Some(b);
                        break;
                    }
                }
            };
            self.replay_block(block, &statuses)?;
            self.height = b;
        }
        self.block_hashes = blocks.iter().map(|b| b.this_hash).collect();
        self.expected_seq = blocks.len() as u64 + 1;
        self.last_hash = prev;
        self.queue = blocks.into_iter().skip(self.height as usize).collect();
        self.reprocess = partial;
        self.rt.last_committed = self.height;
        self.store.set_height(self.height);
        Ok(())
    }

    fn replay_block(&mut self, block: &Block, statuses: &[LedgerStatus]) -> Result<(), NodeError> {
        let b = block.seq;
        for (tx, s) in block.txs.iter().zip(statuses) {
            if *s != LedgerStatus::Committed {
                continue;
            }
            let local = self.alloc_local();
            self.store.register_tx(local, tx.global_id);
            let snap = match self.cfg.flow {
                Flow::ExecuteOrder => SnapshotSpec::BlockHeight {
                    height: tx.snapshot_height.unwrap_or(b - 1),
                    own: local,
                    same_block: self.cfg.same_block_visible.then_some(b),
                },
                Flow::OrderExecute => SnapshotSpec::at_height(b - 1, local),
                Flow::Serial => SnapshotSpec::BlockHeight { height: b - 1, own: local, same_block: Some(b) },
            };
            let (res, ws) = run_contract(&self.store, &self.tracker, &self.lib, snap, tx, false);
            res.map_err(|e| NodeError::CorruptLedger(format!("replay of {} failed: {e}", tx.global_id.short())))?;
            self.store.stamp(&ws, b)?;
            if self.cfg.flow == Flow::OrderExecute {
                Arc::make_mut(&mut self.committed_set).insert(local);
            }
        }
        Ok(())
    }
}

trait TakeIfSeq {
    fn take_if_seq(&mut self, seq: u64) -> Option<InFlight>;
}

impl TakeIfSeq for Option<InFlight> {
    fn take_if_seq(&mut self, seq: u64) -> Option<InFlight> {
        if self.as_ref().is_some_and(|f| f.block.seq == seq) {
            self.take()
        } else {
            None
        }
    }
}
