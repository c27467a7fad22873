//! Deterministic multi-node harness.
//!
//! Peers, the ordering service and the clients are actors on one
//! discrete-event scheduler. They share nothing: every message is
//! canonically encoded on send and decoded on delivery, over FIFO links
//! with seeded latency. Faults are injected either into a node's
//! configuration or at the fabric.

pub mod config;
mod consistency;
pub mod oracle;
pub mod report;
pub mod workload;

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap, HashSet};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::codec::{Canonical, DecodeError, Hash256};
use crate::contracts::{seed_workload_tables, workload_tables, Genesis, GenesisUser, HostLibrary};
use crate::crypto::KeyPair;
use crate::mvstore::Value;
use crate::node::{
    CheckpointRecord, DivergenceAlarm, Dest, Durable, LedgerEntry, LedgerStatus, Message, Node, NodeConfig,
    NodeError, NodeFaults, NodeId, NodeMetrics, Output, TimerEvent,
};
use crate::ordering::{Block, OrdererConfig, OrderingBackend, Sequencer};
use crate::tx::Transaction;

pub use config::{ConfigError, FaultKind, FaultSpec, Mode, Network, ScenarioConfig, WorkloadSpec};
pub use consistency::assert_consistency;
pub use report::{metrics_csv, CheckpointSummary, MetricsRow, NodeReport, RunReport, CSV_HEADER};

use oracle::MAX_ORACLE_TXS;
use report::{LatencySummary, OracleSummary, WwSummary};
use workload::Planned;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("node {node} failed to open: {source}")]
    Node { node: NodeId, source: NodeError },
    #[error("undecodable message on the fabric: {0}")]
    Fabric(#[from] DecodeError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Actor {
    Client,
    Orderer,
    Node(NodeId),
}

enum Event {
    Deliver { to: Actor, bytes: Vec<u8> },
    NodeTimer { node: NodeId, epoch: u32, ev: TimerEvent },
    Submit(usize),
    Restart(NodeId),
}

struct Scheduled {
    at: u64,
    seq: u64,
    ev: Event,
}

impl PartialEq for Scheduled {
    fn eq(&self, o: &Self) -> bool {
        (self.at, self.seq) == (o.at, o.seq)
    }
}

impl Eq for Scheduled {}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl Ord for Scheduled {
    // reversed: BinaryHeap pops the earliest event
    fn cmp(&self, o: &Self) -> Ordering {
        (o.at, o.seq).cmp(&(self.at, self.seq))
    }
}

struct Slot {
    cfg: NodeConfig,
    node: Option<Node>,
    durable: Durable,
    epoch: u32,
    byzantine: bool,
    metrics: NodeMetrics,
}

struct Orderer {
    seq: Sequencer,
    key: KeyPair,
    timeout_us: u64,
    checkpoints: Vec<CheckpointRecord>,
    checkpoint_seen: HashSet<(NodeId, u64)>,
    tamper: Option<(NodeId, u64)>,
}

/// A finished node's durable files and ledger.
pub struct NodeArtifact {
    pub id: NodeId,
    pub durable: Durable,
    pub ledger: Vec<LedgerEntry>,
}

pub struct RunOutput {
    pub report: RunReport,
    pub nodes: Vec<NodeArtifact>,
}

/// Genesis of a scenario and the signing keys of its clients.
pub fn genesis(cfg: &ScenarioConfig) -> (Genesis, Vec<KeyPair>) {
    let mut g = Genesis::with_builtins();
    g.orgs = (0..cfg.orgs).map(|o| format!("org{o}")).collect();
    let mut keys = Vec::new();
    for c in 0..cfg.workload.clients {
        let name = format!("client{c}");
        let k = KeyPair::derive(cfg.seed, &name);
        g.users.push(GenesisUser {
            username: name,
            org: format!("org{}", c % cfg.orgs),
            pubkey: k.public(),
            roles: vec!["client".into()],
            admin: false,
        });
        keys.push(k);
    }
    for o in 0..cfg.orgs {
        let name = format!("admin{o}");
        g.users.push(GenesisUser {
            username: name.clone(),
            org: format!("org{o}"),
            pubkey: KeyPair::derive(cfg.seed, &name).public(),
            roles: vec!["admin".into()],
            admin: true,
        });
    }
    g.tables = workload_tables();
    g.rows = seed_workload_tables(cfg.workload.key_space, cfg.workload.initial_balance);
    (g, keys)
}

/// Node configuration of node `id` under `cfg`.
pub fn node_config(cfg: &ScenarioConfig, id: NodeId) -> NodeConfig {
    let mut faults = NodeFaults::default();
    for f in cfg.faults.iter().filter(|f| f.node == id) {
        match f.kind {
            FaultKind::DropForwarding => faults.drop_forwarding = true,
            FaultKind::WithholdCommit => faults.withhold_commit_at = Some(f.at),
            FaultKind::TamperRow => faults.tamper_row_at = Some(f.at),
            FaultKind::CorruptCheckpoint => faults.corrupt_checkpoint_at = Some(f.at),
            FaultKind::CrashRestart => faults.crash = f.point.map(|p| (f.at, p)),
            FaultKind::TamperBlock | FaultKind::DuplicateSubmit => {}
        }
    }
    NodeConfig {
        id,
        flow: cfg.flow,
        workers: cfg.workers,
        cost: cfg.cost.clone(),
        checkpoint_interval: cfg.checkpoint_interval,
        same_block_visible: cfg.same_block_visible,
        parallel: cfg.mode == Mode::Parallel,
        key_seed: cfg.seed,
        orderer_key: KeyPair::derive(cfg.seed, "orderer").public(),
        node_keys: (0..cfg.nodes).map(|i| KeyPair::derive(cfg.seed, &format!("node{i}")).public()).collect(),
        faults,
    }
}

fn is_byzantine(cfg: &ScenarioConfig, id: NodeId) -> bool {
    cfg.faults.iter().any(|f| {
        f.node == id
            && matches!(
                f.kind,
                FaultKind::WithholdCommit | FaultKind::TamperRow | FaultKind::TamperBlock | FaultKind::CorruptCheckpoint
            )
    })
}

pub struct Simulation {
    cfg: ScenarioConfig,
    genesis: Genesis,
    lib: Arc<HostLibrary>,
    rng: ChaCha8Rng,
    now: u64,
    next_seq: u64,
    events: u64,
    queue: BinaryHeap<Scheduled>,
    links: HashMap<(Actor, Actor), u64>,
    slots: Vec<Slot>,
    orderer: Orderer,
    plan: Vec<Planned>,
    client_keys: Vec<KeyPair>,
    submitted: BTreeMap<Hash256, u64>,
    txs: HashMap<Hash256, Transaction>,
    commit_votes: HashMap<Hash256, usize>,
    majority_at: BTreeMap<Hash256, u64>,
    rejected: usize,
    alarms: BTreeSet<DivergenceAlarm>,
    duplicate: Option<FaultSpec>,
}

impl Simulation {
    pub fn new(cfg: ScenarioConfig) -> Result<Self, SimError> {
        cfg.validate()?;
        let (genesis, client_keys) = genesis(&cfg);
        let lib = Arc::new(HostLibrary::standard());
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let plan = workload::plan(&cfg.workload, &mut rng);
        let mut slots = Vec::with_capacity(cfg.nodes);
        for id in 0..cfg.nodes as NodeId {
            let ncfg = node_config(&cfg, id);
            let durable = Durable::memory();
            let node = Node::open(ncfg.clone(), &genesis, lib.clone(), durable.clone(), NodeMetrics::default())
                .map_err(|source| SimError::Node { node: id, source })?;
            slots.push(Slot {
                cfg: ncfg,
                node: Some(node),
                durable,
                epoch: 0,
                byzantine: is_byzantine(&cfg, id),
                metrics: NodeMetrics::default(),
            });
        }
        let okey = KeyPair::derive(cfg.seed, "orderer");
        let mut seq = Sequencer::new(
            OrdererConfig { block_size: cfg.block_size, block_timeout_us: cfg.block_timeout_us() },
            okey.clone(),
        )
        .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        seq.set_dedup(cfg.orderer_dedup);
        let tamper = cfg.faults.iter().find(|f| f.kind == FaultKind::TamperBlock).map(|f| (f.node, f.at));
        let duplicate = cfg.faults.iter().find(|f| f.kind == FaultKind::DuplicateSubmit).cloned();
        let mut sim = Self {
            orderer: Orderer {
                seq,
                key: okey,
                timeout_us: cfg.block_timeout_us(),
                checkpoints: Vec::new(),
                checkpoint_seen: HashSet::new(),
                tamper,
            },
            genesis,
            lib,
            rng,
            now: 0,
            next_seq: 0,
            events: 0,
            queue: BinaryHeap::new(),
            links: HashMap::new(),
            slots,
            plan,
            client_keys,
            submitted: BTreeMap::new(),
            txs: HashMap::new(),
            commit_votes: HashMap::new(),
            majority_at: BTreeMap::new(),
            rejected: 0,
            alarms: BTreeSet::new(),
            duplicate,
            cfg,
        };
        for i in 0..sim.plan.len() {
            let at = sim.plan[i].at_us;
            sim.schedule(at, Event::Submit(i));
        }
        Ok(sim)
    }

    fn schedule(&mut self, at: u64, ev: Event) {
        self.queue.push(Scheduled { at, seq: self.next_seq, ev });
        self.next_seq += 1;
    }

    fn send(&mut self, from: Actor, to: Actor, msg: &Message) {
        let base = self.cfg.network.latency_us() as f64;
        let spread = self.cfg.jitter * (self.rng.gen::<f64>() * 2.0 - 1.0);
        let arrive = self.now + (base * (1.0 + spread)).round().max(1.0) as u64;
        // FIFO per link
        let last = self.links.entry((from, to)).or_insert(0);
        let at = arrive.max(*last);
        *last = at;
        self.schedule(at, Event::Deliver { to, bytes: msg.to_canonical() });
    }

    fn n(&self) -> usize {
        self.slots.len()
    }

    /// Runs until no events remain or the configured duration elapses.
    pub fn run(mut self) -> Result<RunOutput, SimError> {
        let stop = self.cfg.duration_ms.map(|d| (d * 1000.0) as u64);
        while let Some(s) = self.queue.pop() {
            if stop.is_some_and(|t| s.at > t) {
                break;
            }
            self.now = s.at;
            self.events += 1;
            self.dispatch(s.ev)?;
        }
        for i in 0..self.n() {
            if let Some(n) = self.slots[i].node.as_mut().filter(|n| n.is_running()) {
                self.alarms.extend(n.finalize_checkpoints());
            }
        }
        self.finish()
    }

    fn dispatch(&mut self, ev: Event) -> Result<(), SimError> {
        match ev {
            Event::Deliver { to, bytes } => {
                let msg = Message::from_canonical(&bytes)?;
                match to {
                    Actor::Node(i) => {
                        let now = self.now;
                        if let Some(n) = self.slots[i as usize].node.as_mut() {
                            let out = n.handle(now, msg);
                            self.outputs(i, out);
                        }
                    }
                    Actor::Orderer => self.orderer_handle(msg),
                    Actor::Client => {}
                }
            }
            Event::NodeTimer { node, epoch, ev } => {
                let now = self.now;
                let slot = &mut self.slots[node as usize];
                if slot.epoch == epoch {
                    if let Some(n) = slot.node.as_mut() {
                        let out = n.on_timer(now, ev);
                        self.outputs(node, out);
                    }
                }
            }
            Event::Submit(i) => self.submit(i),
            Event::Restart(id) => {
                let slot = &mut self.slots[id as usize];
                slot.cfg.faults.crash = None;
                let mut node = Node::open(
                    slot.cfg.clone(),
                    &self.genesis,
                    self.lib.clone(),
                    slot.durable.clone(),
                    slot.metrics.clone(),
                )
                .map_err(|source| SimError::Node { node: id, source })?;
                let out = node.start(self.now);
                self.slots[id as usize].node = Some(node);
                self.outputs(id, out);
            }
        }
        Ok(())
    }

    fn submit(&mut self, i: usize) {
        let p = self.plan[i].clone();
        let n = self.n();
        let target = (0..n)
            .map(|k| ((p.client + k) % n) as NodeId)
            .find(|&t| self.slots[t as usize].node.as_ref().is_some_and(Node::is_running));
        let Some(target) = target else { return };
        let user = format!("client{}", p.client);
        let key = &self.client_keys[p.client];
        let tx = match self.cfg.flow {
            crate::node::Flow::ExecuteOrder => {
                let h = self.slots[target as usize].node.as_ref().map_or(0, Node::height);
                Transaction::new_eo(key, &user, p.invocation, h)
            }
            _ => {
                let id = Hash256::digest_parts(&[b"tx", &self.cfg.seed.to_be_bytes(), &(i as u64).to_be_bytes()]);
                Transaction::new_oe(key, &user, p.invocation, id)
            }
        };
        self.submitted.insert(tx.global_id, self.now);
        self.txs.insert(tx.global_id, tx.clone());
        self.send(Actor::Client, Actor::Node(target), &Message::ClientTx(tx));
    }

    fn outputs(&mut self, from: NodeId, out: Vec<Output>) {
        let n = self.n();
        for o in out {
            match o {
                Output::Send { to, msg } => match to {
                    Dest::Node(j) => self.send(Actor::Node(from), Actor::Node(j), &msg),
                    Dest::Peers => {
                        for j in (0..n as NodeId).filter(|&j| j != from) {
                            self.send(Actor::Node(from), Actor::Node(j), &msg);
                        }
                    }
                    Dest::Orderer => self.send(Actor::Node(from), Actor::Orderer, &msg),
                },
                Output::Timer { at, event } => {
                    let epoch = self.slots[from as usize].epoch;
                    self.schedule(at.max(self.now), Event::NodeTimer { node: from, epoch, ev: event });
                }
                Output::Notify { gid, status, at } => {
                    if status == LedgerStatus::Committed {
                        let v = self.commit_votes.entry(gid).or_insert(0);
                        *v += 1;
                        if *v * 2 > n && !self.majority_at.contains_key(&gid) {
                            self.majority_at.insert(gid, at);
                            self.maybe_duplicate(gid);
                        }
                    }
                }
                Output::Rejected { .. } => self.rejected += 1,
                Output::Alarm(a) => {
                    self.alarms.insert(a);
                }
                Output::Halted { .. } => {}
                Output::Crashed => {
                    let slot = &mut self.slots[from as usize];
                    if let Some(node) = slot.node.take() {
                        slot.metrics = node.metrics().clone();
                    }
                    slot.epoch += 1;
                    let at = self.now + (self.cfg.restart_delay_ms * 1000.0) as u64;
                    self.schedule(at, Event::Restart(from));
                }
            }
        }
    }

    /// Resends a committed transaction to two nodes and to the ordering
    /// service, once.
    fn maybe_duplicate(&mut self, gid: Hash256) {
        let Some(f) = self.duplicate.clone() else { return };
        if self.orderer.seq.height() < f.at {
            return;
        }
        self.duplicate = None;
        let tx = self.txs[&gid].clone();
        let n = self.n() as NodeId;
        for t in [f.node, (f.node + 1) % n] {
            self.send(Actor::Client, Actor::Node(t), &Message::ClientTx(tx.clone()));
        }
        self.send(Actor::Client, Actor::Orderer, &Message::SubmitTx(tx));
    }

    fn orderer_handle(&mut self, msg: Message) {
        match msg {
            Message::SubmitTx(tx) => {
                let Ok(ack) = self.orderer.seq.submit(tx) else { return };
                for b in ack.blocks {
                    self.broadcast_block(&b);
                }
                self.arm(ack.arm_timer);
            }
            Message::TimeToCut(h) => {
                let (b, next) = self.orderer.seq.time_to_cut(h);
                if let Some(b) = b {
                    self.broadcast_block(&b);
                }
                self.arm(next);
            }
            Message::SubmitCheckpoint(r) => {
                if self.orderer.checkpoint_seen.insert((r.node, r.height)) {
                    self.orderer.checkpoints.push(r.clone());
                    let msg = Message::DeliverCheckpoint(r);
                    for j in 0..self.n() as NodeId {
                        self.send(Actor::Orderer, Actor::Node(j), &msg);
                    }
                }
            }
            Message::FetchBlocks { from, node } => {
                for b in self.orderer.seq.fetch(from, u64::MAX) {
                    let b = self.deliverable(node, b);
                    self.send(Actor::Orderer, Actor::Node(node), &Message::DeliverBlock(b));
                }
                for r in self.orderer.checkpoints.clone() {
                    self.send(Actor::Orderer, Actor::Node(node), &Message::DeliverCheckpoint(r));
                }
            }
            Message::ClientTx(_) | Message::ForwardTx(_) | Message::DeliverBlock(_) | Message::DeliverCheckpoint(_) => {}
        }
    }

    fn arm(&mut self, h: Option<u64>) {
        if let Some(h) = h {
            let at = self.now + self.orderer.timeout_us;
            self.schedule(at, Event::Deliver { to: Actor::Orderer, bytes: Message::TimeToCut(h).to_canonical() });
        }
    }

    fn broadcast_block(&mut self, b: &Block) {
        for j in 0..self.n() as NodeId {
            let blk = self.deliverable(j, b.clone());
            self.send(Actor::Orderer, Actor::Node(j), &Message::DeliverBlock(blk));
        }
    }

    /// The block as node `j` receives it: the tamper fault swaps in a
    /// validly signed block whose first transaction was altered.
    fn deliverable(&self, j: NodeId, b: Block) -> Block {
        if self.orderer.tamper != Some((j, b.seq)) {
            return b;
        }
        let mut txs = b.txs;
        let mut meta = b.consensus_meta;
        match txs.first_mut() {
            Some(tx) => match tx.invocation.args.iter_mut().rev().find_map(|v| match v {
                Value::Int(i) => Some(i),
                _ => None,
            }) {
                Some(i) => *i = i.wrapping_add(1),
                None => tx.invocation.args.push(Value::Int(0)),
            },
            None => meta.push(0xff),
        }
        Block::seal(b.seq, txs, meta, b.prev_hash, &self.orderer.key)
    }

    fn finish(mut self) -> Result<RunOutput, SimError> {
        for i in 0..self.n() {
            if self.slots[i].node.is_none() {
                let s = &self.slots[i];
                let node = Node::open(s.cfg.clone(), &self.genesis, self.lib.clone(), s.durable.clone(), s.metrics.clone())
                    .map_err(|source| SimError::Node { node: i as NodeId, source })?;
                self.slots[i].node = Some(node);
            }
        }
        let archive = self.orderer.seq.fetch(1, u64::MAX);
        let lat: Vec<u64> = self.majority_at.iter().map(|(g, t)| t.saturating_sub(self.submitted[g])).collect();
        let latency = LatencySummary::from_us(lat);
        let first = self.submitted.values().min().copied().unwrap_or(0);
        let last = self.majority_at.values().max().copied().unwrap_or(0);
        let throughput = if last > first { self.majority_at.len() as f64 * 1e6 / (last - first) as f64 } else { 0.0 };

        let mut nodes = Vec::new();
        let mut ww = WwSummary::default();
        for s in &self.slots {
            let node = s.node.as_ref().unwrap();
            let mut status_of: HashMap<Hash256, Vec<LedgerStatus>> = HashMap::new();
            for e in node.ledger().entries() {
                if let Some(st) = e.status {
                    status_of.entry(e.global_id).or_default().push(st);
                }
            }
            let repeated_commits: BTreeSet<Hash256> = status_of
                .iter()
                .filter(|(_, v)| v.iter().filter(|s| **s == LedgerStatus::Committed).count() > 1)
                .map(|(g, _)| *g)
                .collect();
            let committed = |g: &Hash256| status_of.get(g).is_some_and(|v| v.contains(&LedgerStatus::Committed));
            if !s.byzantine {
                for e in node.ww_log() {
                    ww.events += 1;
                    if !committed(&e.winner) {
                        ww.violations.push(format!(
                            "node {}: ww winner {} on {} did not commit",
                            s.cfg.id,
                            e.winner.short(),
                            e.table
                        ));
                    }
                    for l in e.losers.iter().filter(|l| committed(l)) {
                        ww.violations.push(format!(
                            "node {}: ww loser {} on {} committed",
                            s.cfg.id,
                            l.short(),
                            e.table
                        ));
                    }
                }
            }
            let order_violations = archive
                .iter()
                .filter(|b| {
                    node.ledger().block(b.seq).is_some_and(|es| {
                        es.len() != b.txs.len()
                            || es.iter().enumerate().zip(&b.txs).any(|((p, e), t)| {
                                e.position as usize != p || e.global_id != t.global_id || e.block_number != b.seq
                            })
                    })
                })
                .map(|b| b.seq)
                .collect();
            let mut checkpoints: BTreeMap<u64, CheckpointSummary> = BTreeMap::new();
            let own = node.submitted_checkpoints().iter();
            for r in self.orderer.checkpoints.iter().filter(|r| r.node == s.cfg.id).chain(own) {
                checkpoints.insert(
                    r.height,
                    CheckpointSummary {
                        height: r.height,
                        write_set_hash: r.write_set_hash,
                        state_hash: r.state_hash,
                        chain_hash: r.chain_hash,
                    },
                );
            }
            let m = node.metrics();
            nodes.push(NodeReport {
                id: s.cfg.id,
                byzantine: s.byzantine,
                state: node.state().clone(),
                restarts: s.epoch,
                height: node.height(),
                state_hash: node.store().state_hash(),
                status_vector: node
                    .ledger()
                    .status_vector()
                    .into_iter()
                    .map(|(_, v)| {
                        v.iter()
                            .map(|s| match s {
                                Some(LedgerStatus::Committed) => 'C',
                                Some(LedgerStatus::Aborted) => 'A',
                                None => '-',
                            })
                            .collect()
                    })
                    .collect(),
                checkpoints: checkpoints.into_values().collect(),
                committed: m.committed,
                aborted: m.aborted,
                rejected_blocks: m.rejected_blocks,
                order_violations,
                repeated_commits: repeated_commits.into_iter().collect(),
                metrics: MetricsRow::derive(s.cfg.id, self.cfg.block_size, m, throughput, latency.mean_ms),
            });
        }

        let oracle = self.check_serializability(&archive);
        let mut report = RunReport {
            scenario: self.cfg.clone(),
            end_time_us: self.now,
            events: self.events,
            submitted: self.submitted.len(),
            rejected: self.rejected,
            committed: self.majority_at.len(),
            throughput_tps: throughput,
            latency,
            alarms: self.alarms.iter().cloned().collect(),
            nodes,
            oracle,
            ww,
            violations: Vec::new(),
        };
        report.violations = assert_consistency(&report);
        let nodes = self
            .slots
            .into_iter()
            .map(|s| {
                let ledger = s.node.as_ref().unwrap().ledger().entries().cloned().collect();
                NodeArtifact { id: s.cfg.id, durable: s.durable, ledger }
            })
            .collect();
        Ok(RunOutput { report, nodes })
    }

    /// Runs the serial-order oracle on every small block committed by the
    /// first honest running node.
    fn check_serializability(&self, archive: &[Block]) -> OracleSummary {
        let mut sum = OracleSummary::default();
        let Some(s) = self.slots.iter().find(|s| !s.byzantine && s.node.as_ref().is_some_and(Node::is_running)) else {
            return sum;
        };
        let node = s.node.as_ref().unwrap();
        sum.reference_node = Some(s.cfg.id);
        let store = node.store();
        let schemas = store.table_names().into_iter().filter_map(|t| Some((t.clone(), store.schema(&t).ok()?))).collect();
        for b in archive.iter().take_while(|b| b.seq <= node.height()) {
            if b.txs.len() > MAX_ORACLE_TXS {
                sum.blocks_skipped += 1;
                continue;
            }
            let Some(entries) = node.ledger().block(b.seq) else { continue };
            let txs: Vec<Transaction> = b
                .txs
                .iter()
                .zip(entries)
                .filter(|(_, e)| e.status == Some(LedgerStatus::Committed))
                .map(|(t, _)| t.clone())
                .collect();
            let before = store.rows_at(b.seq - 1);
            let after = store.rows_at(b.seq);
            sum.blocks_checked += 1;
            if oracle::find_serial_order(&schemas, &self.lib, &before, &after, &txs).is_none() {
                sum.counterexamples.push(b.seq);
            }
        }
        sum
    }
}

/// Runs a scenario to completion.
pub fn run(cfg: ScenarioConfig) -> Result<RunReport, SimError> {
    Ok(Simulation::new(cfg)?.run()?.report)
}

/// Runs a scenario and keeps every node's durable files.
pub fn run_full(cfg: ScenarioConfig) -> Result<RunOutput, SimError> {
    Simulation::new(cfg)?.run()
}

