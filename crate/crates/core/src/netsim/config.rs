use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::node::{CostModel, CrashPoint, Flow, NodeId};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed scenario: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// One scheduler thread; the event trace is reproducible.
    Deterministic,
    /// Order-then-execute blocks run on a thread pool.
    Parallel,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Network {
    Lan,
    Wan,
}

impl Network {
    /// Mean one-way latency in microseconds.
    pub fn latency_us(self) -> u64 {
        match self {
            Network::Lan => 500,
            Network::Wan => 100_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorkloadSpec {
    pub txs: usize,
    /// Client submissions per simulated second, across all clients.
    pub arrival_rate: f64,
    /// Fraction of account operations aimed at the hot keys.
    pub contention: f64,
    pub hot_keys: i64,
    pub key_space: i64,
    pub clients: usize,
    pub initial_balance: i64,
    /// Relative weight per contract.
    pub mix: BTreeMap<String, f64>,
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        Self {
            txs: 200,
            arrival_rate: 1000.0,
            contention: 0.3,
            hot_keys: 4,
            key_space: 200,
            clients: 8,
            initial_balance: 1_000,
            mix: [("kv_add".to_owned(), 0.5), ("transfer".to_owned(), 0.3), ("simple_insert".to_owned(), 0.2)]
                .into_iter()
                .collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultKind {
    DropForwarding,
    WithholdCommit,
    TamperRow,
    TamperBlock,
    DuplicateSubmit,
    CrashRestart,
    CorruptCheckpoint,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultSpec {
    pub kind: FaultKind,
    pub node: NodeId,
    /// Block height at which the fault fires.
    #[serde(default = "one")]
    pub at: u64,
    /// Crash position for `crash_restart`.
    #[serde(default)]
    pub point: Option<CrashPoint>,
}

fn one() -> u64 {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub flow: Flow,
    pub nodes: usize,
    pub orgs: usize,
    pub block_size: usize,
    pub block_timeout_ms: f64,
    pub checkpoint_interval: u64,
    pub seed: u64,
    pub mode: Mode,
    pub workers: usize,
    pub network: Network,
    /// Relative spread of link latency.
    pub jitter: f64,
    pub same_block_visible: bool,
    /// Duplicate filtering at the ordering service.
    pub orderer_dedup: bool,
    pub restart_delay_ms: f64,
    /// Stops the run at this simulated time; unset runs to quiescence.
    pub duration_ms: Option<f64>,
    pub workload: WorkloadSpec,
    pub cost: CostModel,
    pub faults: Vec<FaultSpec>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            flow: Flow::ExecuteOrder,
            nodes: 4,
            orgs: 2,
            block_size: 10,
            block_timeout_ms: 5.0,
            checkpoint_interval: 1,
            seed: 1,
            mode: Mode::Deterministic,
            workers: 8,
            network: Network::Lan,
            jitter: 0.1,
            same_block_visible: false,
            orderer_dedup: true,
            restart_delay_ms: 20.0,
            duration_ms: None,
            workload: WorkloadSpec::default(),
            cost: CostModel::default(),
            faults: Vec::new(),
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml(s: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let s = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_toml(&s)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_owned()));
        let w = &self.workload;
        if self.nodes == 0 {
            return bad("nodes must be at least 1");
        }
        if self.orgs == 0 || self.orgs > self.nodes {
            return bad("orgs must be between 1 and nodes");
        }
        if self.block_size == 0 {
            return bad("block_size must be at least 1");
        }
        if self.block_timeout_ms.is_nan() || self.block_timeout_ms <= 0.0 {
            return bad("block_timeout_ms must be positive");
        }
        if self.checkpoint_interval == 0 {
            return bad("checkpoint_interval must be at least 1");
        }
        if self.workers == 0 {
            return bad("workers must be at least 1");
        }
        if !(0.0..1.0).contains(&self.jitter) {
            return bad("jitter must be in [0, 1)");
        }
        if w.arrival_rate.is_nan() || w.arrival_rate <= 0.0 {
            return bad("arrival_rate must be positive");
        }
        if !(0.0..=1.0).contains(&w.contention) {
            return bad("contention must be in [0, 1]");
        }
        if w.hot_keys < 1 || w.key_space < w.hot_keys.max(2) {
            return bad("need 1 <= hot_keys <= key_space and key_space >= 2");
        }
        if w.clients == 0 {
            return bad("clients must be at least 1");
        }
        if w.mix.is_empty() || w.mix.values().any(|v| v.is_nan() || *v < 0.0) || w.mix.values().sum::<f64>() <= 0.0 {
            return bad("mix needs non-negative weights with a positive sum");
        }
        for name in w.mix.keys() {
            if !["kv_add", "transfer", "simple_insert", "complex_join", "complex_group"].contains(&name.as_str()) {
                return Err(ConfigError::Invalid(format!("unknown contract {name} in mix")));
            }
        }
        for f in &self.faults {
            if f.node as usize >= self.nodes {
                return Err(ConfigError::Invalid(format!("fault {:?} targets missing node {}", f.kind, f.node)));
            }
            if f.at == 0 {
                return bad("fault heights start at 1");
            }
            if f.kind == FaultKind::CrashRestart && f.point.is_none() {
                return bad("crash_restart needs a point");
            }
        }
        Ok(())
    }

    pub fn block_timeout_us(&self) -> u64 {
        (self.block_timeout_ms * 1000.0).round() as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_and_full() {
        let c = ScenarioConfig::from_toml("flow = \"oe\"\nnodes = 3\n").unwrap();
        assert_eq!(c.flow, Flow::OrderExecute);
        assert_eq!(c.nodes, 3);
        let c = ScenarioConfig::from_toml(
            r#"
            flow = "eo"
            [workload]
            txs = 10
            mix = { kv_add = 1.0 }
            [[faults]]
            kind = "crash_restart"
            node = 2
            at = 3
            point = "mid_block"
            "#,
        )
        .unwrap();
        assert_eq!(c.faults[0].point, Some(CrashPoint::MidBlock));
        assert_eq!(ScenarioConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(matches!(ScenarioConfig::from_toml("nodes = 0"), Err(ConfigError::Invalid(_))));
        assert!(matches!(ScenarioConfig::from_toml("nodes = "), Err(ConfigError::Parse(_))));
        assert!(matches!(ScenarioConfig::from_toml("bogus = 1"), Err(ConfigError::Parse(_))));
        let f = "[[faults]]\nkind = \"tamper_row\"\nnode = 9\n";
        assert!(matches!(ScenarioConfig::from_toml(f), Err(ConfigError::Invalid(_))));
    }
}
