use serde::Serialize;

use super::config::ScenarioConfig;
use crate::codec::Hash256;
use crate::node::{DivergenceAlarm, NodeId, NodeMetrics, NodeState};

/// Derived block-processor metrics of one node. Rates are per simulated
/// second, durations in milliseconds, `su` in percent.
#[derive(Clone, Debug, Default, PartialEq, Serialize, serde::Deserialize)]
pub struct MetricsRow {
    pub node: NodeId,
    pub bs: usize,
    /// Blocks received per second.
    pub brr: f64,
    /// Blocks processed and committed per second.
    pub bpr: f64,
    /// Mean time to process one block.
    pub bpt: f64,
    /// Mean time from block start until every transaction is done executing.
    pub bet: f64,
    /// Mean time spent committing a block.
    pub bct: f64,
    /// Mean execution time of one transaction.
    pub tet: f64,
    /// Mean number of transactions per block the node had not seen before.
    pub mt: f64,
    /// Block processor utilisation.
    pub su: f64,
    pub throughput: f64,
    pub avg_latency: f64,
}

pub const CSV_HEADER: [&str; 11] = ["bs", "brr", "bpr", "bpt", "bet", "bct", "tet", "mt", "su", "throughput", "avg_latency"];

impl MetricsRow {
    pub fn derive(node: NodeId, bs: usize, m: &NodeMetrics, throughput: f64, avg_latency: f64) -> Self {
        let blocks = m.blocks_processed;
        let span_us = m.first_receive_us.map_or(0, |f| m.last_commit_us.saturating_sub(f));
        let per_sec = |n: u64| if span_us == 0 { 0.0 } else { n as f64 * 1e6 / span_us as f64 };
        let mean_ms = |us: u64, n: u64| if n == 0 { 0.0 } else { us as f64 / n as f64 / 1000.0 };
        Self {
            node,
            bs,
            brr: per_sec(m.blocks_received),
            bpr: per_sec(blocks),
            bpt: mean_ms(m.process_us, blocks),
            bet: mean_ms(m.exec_phase_us, blocks),
            bct: mean_ms(m.commit_phase_us, blocks),
            tet: mean_ms(m.tx_exec_us, m.txs_executed),
            mt: if blocks == 0 { 0.0 } else { m.missing_txs as f64 / blocks as f64 },
            su: if span_us == 0 { 0.0 } else { m.process_us as f64 * 100.0 / span_us as f64 },
            throughput,
            avg_latency,
        }
    }

    pub fn csv_record(&self) -> [String; 11] {
        let f = |v: f64| format!("{v:.3}");
        [
            self.bs.to_string(),
            f(self.brr),
            f(self.bpr),
            f(self.bpt),
            f(self.bet),
            f(self.bct),
            f(self.tet),
            f(self.mt),
            f(self.su),
            f(self.throughput),
            f(self.avg_latency),
        ]
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct LatencySummary {
    pub count: usize,
    pub mean_ms: f64,
    pub p50_ms: f64,
    pub p95_ms: f64,
    pub p99_ms: f64,
    pub max_ms: f64,
}

impl LatencySummary {
    pub fn from_us(mut v: Vec<u64>) -> Self {
        if v.is_empty() {
            return Self::default();
        }
        v.sort_unstable();
        let ms = |x: u64| x as f64 / 1000.0;
        let q = |p: f64| ms(v[((v.len() - 1) as f64 * p).round() as usize]);
        Self {
            count: v.len(),
            mean_ms: ms(v.iter().sum::<u64>()) / v.len() as f64,
            p50_ms: q(0.5),
            p95_ms: q(0.95),
            p99_ms: q(0.99),
            max_ms: ms(*v.last().unwrap()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CheckpointSummary {
    pub height: u64,
    pub write_set_hash: Hash256,
    pub state_hash: Hash256,
    pub chain_hash: Hash256,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NodeReport {
    pub id: NodeId,
    /// Targeted by a fault that makes it misbehave.
    pub byzantine: bool,
    pub state: NodeState,
    pub restarts: u32,
    pub height: u64,
    pub state_hash: Hash256,
    /// One string per block: `C` committed, `A` aborted, `-` undecided.
    pub status_vector: Vec<String>,
    pub checkpoints: Vec<CheckpointSummary>,
    pub committed: u64,
    pub aborted: u64,
    pub rejected_blocks: u64,
    /// Blocks whose ledger order differs from the block.
    pub order_violations: Vec<u64>,
    /// Transaction ids committed more than once.
    pub repeated_commits: Vec<Hash256>,
    pub metrics: MetricsRow,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct OracleSummary {
    pub reference_node: Option<NodeId>,
    pub blocks_checked: usize,
    pub blocks_skipped: usize,
    pub counterexamples: Vec<u64>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct WwSummary {
    pub events: usize,
    pub violations: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub scenario: ScenarioConfig,
    pub end_time_us: u64,
    pub events: u64,
    pub submitted: usize,
    pub rejected: usize,
    /// Transactions committed on a majority of nodes.
    pub committed: usize,
    pub throughput_tps: f64,
    pub latency: LatencySummary,
    pub alarms: Vec<DivergenceAlarm>,
    pub nodes: Vec<NodeReport>,
    pub oracle: OracleSummary,
    pub ww: WwSummary,
    pub violations: Vec<String>,
}

impl RunReport {
    pub fn consistent(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn metrics_rows(&self) -> Vec<MetricsRow> {
        self.nodes.iter().map(|n| n.metrics.clone()).collect()
    }
}

/// Metric table as CSV, one row per node.
pub fn metrics_csv(rows: &[MetricsRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("in-memory write");
    for r in rows {
        w.write_record(r.csv_record()).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii")
}
