use std::path::Path;

use relchain::netsim::{run, run_full, FaultKind, FaultSpec, Network, ScenarioConfig, WorkloadSpec};
use relchain::node::{Flow, NodeState};

fn small(flow: Flow, seed: u64) -> ScenarioConfig {
    ScenarioConfig { flow, seed, block_size: 6, workload: WorkloadSpec { txs: 120, ..WorkloadSpec::default() }, ..ScenarioConfig::default() }
}

#[test]
fn bundled_scenarios_parse_and_round_trip() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut n = 0;
    for e in std::fs::read_dir(dir).unwrap() {
        let cfg = ScenarioConfig::load(&e.unwrap().path()).unwrap();
        assert_eq!(ScenarioConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
        n += 1;
    }
    assert!(n >= 4);
}

#[test]
fn same_seed_same_report() {
    for flow in [Flow::ExecuteOrder, Flow::OrderExecute, Flow::Serial] {
        let a = run(small(flow, 21)).unwrap().to_json();
        let b = run(small(flow, 21)).unwrap().to_json();
        assert_eq!(a, b, "{flow:?}");
        assert_ne!(a, run(small(flow, 22)).unwrap().to_json(), "{flow:?}");
    }
}

#[test]
fn serial_flow_commits_everything() {
    let r = run(small(Flow::Serial, 3)).unwrap();
    assert!(r.consistent(), "{:?}", r.violations);
    assert_eq!(r.committed + r.nodes[0].aborted as usize, r.submitted);
}

#[test]
fn same_block_visibility_stays_serializable() {
    for seed in 1..=3 {
        let r = run(ScenarioConfig { same_block_visible: true, ..small(Flow::ExecuteOrder, seed) }).unwrap();
        assert!(r.consistent(), "{:?}", r.violations);
        assert!(r.oracle.blocks_checked > 0);
    }
}

#[test]
fn wan_runs_are_slower_but_consistent() {
    let lan = run(small(Flow::OrderExecute, 5)).unwrap();
    let wan = run(ScenarioConfig { network: Network::Wan, ..small(Flow::OrderExecute, 5) }).unwrap();
    assert!(wan.consistent(), "{:?}", wan.violations);
    assert!(wan.latency.mean_ms > lan.latency.mean_ms + 100.0);
}

#[test]
fn corrupt_checkpoint_is_named() {
    for flow in [Flow::ExecuteOrder, Flow::OrderExecute] {
        let cfg = ScenarioConfig {
            faults: vec![FaultSpec { kind: FaultKind::CorruptCheckpoint, node: 3, at: 4, point: None }],
            ..small(flow, 8)
        };
        let r = run(cfg).unwrap();
        assert_eq!(r.alarms.len(), 1);
        assert_eq!(r.alarms[0].nodes, vec![3]);
        assert!(matches!(r.nodes[3].state, NodeState::Halted(_)));
        assert!(r.consistent(), "{:?}", r.violations);
    }
}

#[test]
fn dropped_forwarding_is_not_a_divergence() {
    let cfg = ScenarioConfig {
        faults: vec![FaultSpec { kind: FaultKind::DropForwarding, node: 1, at: 1, point: None }],
        ..small(Flow::ExecuteOrder, 4)
    };
    let r = run(cfg).unwrap();
    assert!(r.alarms.is_empty());
    assert!(r.consistent(), "{:?}", r.violations);
    assert!(r.nodes[0].metrics.mt >= r.nodes[1].metrics.mt);
}

#[test]
fn longer_checkpoint_interval_still_catches_tampering() {
    let cfg = ScenarioConfig {
        checkpoint_interval: 4,
        faults: vec![FaultSpec { kind: FaultKind::TamperRow, node: 0, at: 5, point: None }],
        ..small(Flow::OrderExecute, 6)
    };
    let r = run(cfg).unwrap();
    assert_eq!(r.alarms.len(), 1);
    assert_eq!(r.alarms[0].nodes, vec![0]);
    assert!(r.alarms[0].height >= 5 && r.alarms[0].height < 5 + 4);
    assert!(r.consistent(), "{:?}", r.violations);
}

#[test]
fn artifacts_reopen_to_the_same_state() {
    let out = run_full(small(Flow::ExecuteOrder, 13)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    for (a, rep) in out.nodes.iter().zip(&out.report.nodes) {
        let nd = dir.path().join(format!("node{}", a.id));
        a.durable.export(&nd).unwrap();
        std::fs::write(nd.join("scenario.toml"), out.report.scenario.to_toml()).unwrap();
        std::fs::write(nd.join("node.json"), format!("{{\"id\":{}}}", a.id)).unwrap();
        let node = relchain::cli::open_store(&nd).unwrap();
        assert_eq!(node.store().state_hash(), rep.state_hash);
        assert_eq!(node.height(), rep.height);
        let committed = a.ledger.iter().filter(|e| e.status == Some(relchain::node::LedgerStatus::Committed)).count();
        assert_eq!(committed as u64, rep.committed);
    }
}

#[test]
fn five_nodes_three_orgs() {
    let r = run(ScenarioConfig { nodes: 5, orgs: 3, ..small(Flow::OrderExecute, 2) }).unwrap();
    assert_eq!(r.nodes.len(), 5);
    assert!(r.consistent(), "{:?}", r.violations);
}
