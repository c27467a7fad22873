use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::checkpoint::NodeId;
use crate::crypto::PublicKey;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Flow {
    /// Order-then-execute.
    #[serde(rename = "oe")]
    OrderExecute,
    /// Execute-and-order-in-parallel.
    #[serde(rename = "eo")]
    ExecuteOrder,
    /// Serial execution after ordering, one transaction at a time.
    #[serde(rename = "serial")]
    Serial,
}

impl Flow {
    pub fn label(self) -> &'static str {
        match self {
            Flow::OrderExecute => "oe",
            Flow::ExecuteOrder => "eo",
            Flow::Serial => "serial",
        }
    }
}

/// Simulated costs in microseconds.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostModel {
    pub exec_us: BTreeMap<String, u64>,
    pub default_exec_us: u64,
    pub commit_us: u64,
    pub block_overhead_us: u64,
}

impl Default for CostModel {
    fn default() -> Self {
        let exec_us = [
            ("simple_insert", 1000),
            ("kv_add", 1000),
            ("transfer", 1200),
            ("complex_join", 3000),
            ("complex_group", 3000),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_owned(), v))
        .collect();
        Self { exec_us, default_exec_us: 500, commit_us: 300, block_overhead_us: 2000 }
    }
}

impl CostModel {
    pub fn exec(&self, contract: &str) -> u64 {
        self.exec_us.get(contract).copied().unwrap_or(self.default_exec_us)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrashPoint {
    AfterStatusWrite,
    BeforeStatusWrite,
    MidBlock,
}

/// Misbehaviour and failures injected into one node.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct NodeFaults {
    pub drop_forwarding: bool,
    pub withhold_commit_at: Option<u64>,
    pub tamper_row_at: Option<u64>,
    pub corrupt_checkpoint_at: Option<u64>,
    pub crash: Option<(u64, CrashPoint)>,
}

#[derive(Clone, Debug)]
pub struct NodeConfig {
    pub id: NodeId,
    pub flow: Flow,
    pub workers: usize,
    pub cost: CostModel,
    pub checkpoint_interval: u64,
    /// Lets execute-and-order transactions see earlier commits of their
    /// own block. Every transaction then runs inside the commit pass.
    pub same_block_visible: bool,
    /// Executes order-then-execute blocks on a thread pool.
    pub parallel: bool,
    pub key_seed: u64,
    pub orderer_key: PublicKey,
    pub node_keys: Vec<PublicKey>,
    pub faults: NodeFaults,
}
