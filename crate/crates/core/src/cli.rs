//! Operator commands behind the `relchain` binary.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::codec::Hash256;
use crate::contracts::HostLibrary;
use crate::mvstore::{Predicate, Row, Value};
use crate::netsim::{self, metrics_csv, MetricsRow, ScenarioConfig, SimError};
use crate::node::{Durable, LedgerEntry, Node, NodeId, NodeMetrics};

#[derive(Debug, Parser)]
#[command(name = "relchain", version, about = "Replicated relational ledger simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a scenario and write its report, metrics and node files.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Succeed only if a divergence alarm fired.
        #[arg(long)]
        expect_alarm: bool,
    },
    /// Query every version of a table in a node directory of a finished run.
    Provenance {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        table: String,
        #[arg(long)]
        user: Option<String>,
        /// Inclusive creator block range `A:B`.
        #[arg(long, value_parser = parse_range)]
        blocks: Option<(u64, u64)>,
        /// Value of the first primary-key column.
        #[arg(long)]
        key: Option<String>,
        /// Inclusive commit time range `A:B` in simulated microseconds.
        #[arg(long, value_parser = parse_range)]
        time: Option<(u64, u64)>,
    },
    /// Print the metric table of a report as CSV.
    Metrics {
        #[arg(long)]
        report: PathBuf,
    },
}

fn parse_range(s: &str) -> Result<(u64, u64), String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("expected A:B, got {s:?}"))?;
    let a: u64 = a.trim().parse().map_err(|e| format!("{a:?}: {e}"))?;
    let b: u64 = b.trim().parse().map_err(|e| format!("{b:?}: {e}"))?;
    if a > b {
        return Err(format!("empty range {s}"));
    }
    Ok((a, b))
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Parses `args` (including the program name) and runs the command.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = if e.use_stderr() { write!(err, "{e}") } else { write!(out, "{e}") };
            return code;
        }
    };
    match cli.command {
        Command::Run { config, seed, out: dir, expect_alarm } => cmd_run(&config, seed, &dir, expect_alarm, out, err),
        Command::Provenance { store, table, user, blocks, key, time } => {
            let q = ProvenanceQuery { table, user, blocks, key, time };
            cmd_provenance(&store, &q, out, err)
        }
        Command::Metrics { report } => cmd_metrics(&report, out, err),
    }
}

#[derive(Serialize)]
struct NodeMeta {
    id: NodeId,
}

pub fn cmd_run(config: &Path, seed: Option<u64>, dir: &Path, expect_alarm: bool, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let mut cfg = match ScenarioConfig::load(config) {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(err, "{e}");
            return EXIT_USAGE;
        }
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let res = match netsim::run_full(cfg.clone()) {
        Ok(r) => r,
        Err(SimError::Config(e)) => {
            let _ = writeln!(err, "{e}");
            return EXIT_USAGE;
        }
        Err(e) => {
            let _ = writeln!(err, "run failed: {e}");
            return EXIT_FAIL;
        }
    };
    if let Err(e) = write_outputs(dir, &cfg, &res) {
        let _ = writeln!(err, "cannot write {}: {e}", dir.display());
        return EXIT_FAIL;
    }
    let r = &res.report;
    let _ = writeln!(
        out,
        "{} nodes, {} submitted, {} committed, {:.1} tps, mean latency {:.2} ms, {} alarm(s)",
        r.nodes.len(),
        r.submitted,
        r.committed,
        r.throughput_tps,
        r.latency.mean_ms,
        r.alarms.len()
    );
    for a in &r.alarms {
        let _ = writeln!(out, "alarm at height {}: nodes {:?}", a.height, a.nodes);
    }
    for v in &r.violations {
        let _ = writeln!(err, "violation: {v}");
    }
    let alarms_ok = if expect_alarm { !r.alarms.is_empty() } else { r.alarms.is_empty() };
    if !alarms_ok {
        let _ = writeln!(err, "{}", if expect_alarm { "expected an alarm, none fired" } else { "unexpected alarm" });
    }
    if r.consistent() && alarms_ok {
        EXIT_OK
    } else {
        EXIT_FAIL
    }
}

fn write_outputs(dir: &Path, cfg: &ScenarioConfig, res: &netsim::RunOutput) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    let toml = cfg.to_toml();
    fs::write(dir.join("report.json"), res.report.to_json())?;
    fs::write(dir.join("metrics.csv"), metrics_csv(&res.report.metrics_rows()))?;
    fs::write(dir.join("scenario.toml"), &toml)?;
    for n in &res.nodes {
        let nd = dir.join(format!("node{}", n.id));
        n.durable.export(&nd).map_err(std::io::Error::other)?;
        fs::write(nd.join("scenario.toml"), &toml)?;
        fs::write(nd.join("node.json"), serde_json::to_string(&NodeMeta { id: n.id })?)?;
        let mut lines = String::new();
        for e in &n.ledger {
            lines.push_str(&serde_json::to_string(e)?);
            lines.push('\n');
        }
        fs::write(nd.join("ledger.jsonl"), lines)?;
    }
    Ok(())
}

#[derive(Clone, Debug, Default)]
pub struct ProvenanceQuery {
    pub table: String,
    pub user: Option<String>,
    pub blocks: Option<(u64, u64)>,
    pub key: Option<String>,
    pub time: Option<(u64, u64)>,
}

/// One version joined with the ledger entry of its creator.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ProvenanceRow {
    pub row: Row,
    pub creator_block: u64,
    pub deleter_block: Option<u64>,
    pub creator: Hash256,
    pub user: Option<String>,
    pub contract: Option<String>,
    pub commit_time: Option<u64>,
}

/// Rebuilds a node from the files in `dir`.
pub fn open_store(dir: &Path) -> Result<Node, String> {
    let cfg_path = dir.join("scenario.toml");
    let cfg = ScenarioConfig::load(&cfg_path).map_err(|e| e.to_string())?;
    let meta = fs::read_to_string(dir.join("node.json")).map_err(|e| format!("{}: {e}", dir.join("node.json").display()))?;
    let id: NodeId = serde_json::from_str::<serde_json::Value>(&meta)
        .ok()
        .and_then(|v| v.get("id")?.as_u64())
        .ok_or("node.json has no id")? as NodeId;
    let mut ncfg = netsim::node_config(&cfg, id);
    ncfg.faults = Default::default();
    if !dir.join("blocks.log").is_file() {
        return Err(format!("{} holds no block store", dir.display()));
    }
    let durable = Durable::in_dir(dir).map_err(|e| e.to_string())?;
    let (genesis, _) = netsim::genesis(&cfg);
    Node::open(ncfg, &genesis, Arc::new(HostLibrary::standard()), durable, NodeMetrics::default()).map_err(|e| e.to_string())
}

/// Every committed version of the queried table that passes the filters.
pub fn provenance(node: &Node, q: &ProvenanceQuery) -> Result<Vec<ProvenanceRow>, String> {
    let store = node.store();
    let schema = store.schema(&q.table).map_err(|e| e.to_string())?;
    let pred = match &q.key {
        Some(k) => {
            let col = &schema.primary_key[0];
            let ty = schema.columns[schema.col(col).unwrap()].ty;
            Predicate::eq(col, Value::parse_as(ty, k)?)
        }
        None => Predicate::all(),
    };
    let entries: HashMap<Hash256, &LedgerEntry> =
        node.ledger().entries().filter(|e| e.status.is_some()).map(|e| (e.global_id, e)).collect();
    let mut rows = Vec::new();
    for v in store.provenance_scan(&q.table, &pred).map_err(|e| e.to_string())? {
        let e = entries.get(&v.creator).copied();
        let r = ProvenanceRow {
            row: v.row,
            creator_block: v.creator_block,
            deleter_block: v.deleter_block,
            creator: v.creator,
            user: e.map(|e| e.username.clone()),
            contract: e.map(|e| e.invocation.contract.clone()),
            commit_time: e.and_then(|e| e.commit_time),
        };
        if q.user.as_ref().is_some_and(|u| r.user.as_ref() != Some(u)) {
            continue;
        }
        if q.blocks.is_some_and(|(a, b)| !(a..=b).contains(&r.creator_block)) {
            continue;
        }
        if q.time.is_some_and(|(a, b)| !r.commit_time.is_some_and(|t| (a..=b).contains(&t))) {
            continue;
        }
        rows.push(r);
    }
    rows.sort_by(|a, b| (a.creator_block, &a.row).cmp(&(b.creator_block, &b.row)));
    Ok(rows)
}

pub fn cmd_provenance(dir: &Path, q: &ProvenanceQuery, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let rows = match open_store(dir).and_then(|n| provenance(&n, q)) {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(err, "{e}");
            return EXIT_FAIL;
        }
    };
    let _ = writeln!(out, "creator_block\tdeleter_block\tcreator\tuser\tcontract\tcommit_time\trow");
    for r in rows {
        let opt = |v: Option<String>| v.unwrap_or_else(|| "-".into());
        let row = r.row.iter().map(ToString::to_string).collect::<Vec<_>>().join(",");
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.creator_block,
            opt(r.deleter_block.map(|b| b.to_string())),
            r.creator.short(),
            opt(r.user),
            opt(r.contract),
            opt(r.commit_time.map(|t| t.to_string())),
            row
        );
    }
    EXIT_OK
}

pub fn cmd_metrics(path: &Path, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            let _ = writeln!(err, "{}: {e}", path.display());
            return EXIT_FAIL;
        }
    };
    let rows: Vec<MetricsRow> = if text.trim().is_empty() {
        Vec::new()
    } else {
        let v: serde_json::Value = match serde_json::from_str(&text) {
            Ok(v) => v,
            Err(e) => {
                let _ = writeln!(err, "{}: {e}", path.display());
                return EXIT_FAIL;
            }
        };
        let nodes = v.get("nodes").and_then(|n| n.as_array()).cloned().unwrap_or_default();
        match nodes.into_iter().map(|n| serde_json::from_value(n["metrics"].clone())).collect() {
            Ok(r) => r,
            Err(e) => {
                let _ = writeln!(err, "{}: {e}", path.display());
                return EXIT_FAIL;
            }
        }
    };
    let _ = write!(out, "{}", metrics_csv(&rows));
    EXIT_OK
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        assert_eq!(parse_range("3:9"), Ok((3, 9)));
        assert!(parse_range("9:3").is_err());
        assert!(parse_range("x").is_err());
    }

    #[test]
    fn usage_errors_exit_2() {
        let (mut o, mut e) = (Vec::new(), Vec::new());
        assert_eq!(main_with(["relchain", "bogus"], &mut o, &mut e), EXIT_USAGE);
        assert_eq!(main_with(["relchain", "provenance", "--store", "x", "--table", "t", "--blocks", "5"], &mut o, &mut e), EXIT_USAGE);
    }
}
