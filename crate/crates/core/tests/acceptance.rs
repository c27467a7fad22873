//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! fails if any criterion fails.

use std::collections::BTreeMap;
use std::time::Instant;

use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

use relchain::codec::Hash256;
use relchain::mvstore::{
    visible, ColumnType, LocalTxId, Predicate, RowVersion, SnapshotSpec, Store, StoreError, TableSchema, Value,
    VersionRef, WriteKind, WriteOp, WriteSet,
};
use relchain::netsim::{run, FaultKind, FaultSpec, Mode, RunReport, ScenarioConfig, WorkloadSpec};
use relchain::node::{CrashPoint, Flow};
use relchain::ssi::{AbortRow, ConflictGraph, TxOrder, TxStatus, Victim};

type Outcome = Result<String, String>;

fn check(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn contended(flow: Flow, seed: u64) -> ScenarioConfig {
    ScenarioConfig {
        flow,
        nodes: 4,
        block_size: 6,
        seed,
        workload: WorkloadSpec { txs: 500, contention: 0.3, ..WorkloadSpec::default() },
        ..ScenarioConfig::default()
    }
}

// ---- criterion 1 ----

fn gid(i: u64) -> Hash256 {
    Hash256::digest(&i.to_be_bytes())
}

/// T=1 commits; n=2 has an rw edge into T; f=3 (optional) has one into n.
fn dangerous(with_far: bool) -> ConflictGraph {
    let mut g = ConflictGraph::new();
    for i in 1..=3 {
        g.begin(i, gid(i));
        g.set_status(i, TxStatus::Ready);
    }
    g.track_dependency(2, 1);
    if with_far {
        g.track_dependency(3, 2);
    }
    g
}

fn abort_table() -> Outcome {
    let order = |ids: &[u64]| TxOrder { block_number: 1, ids: ids.iter().map(|&i| gid(i)).collect() };
    // (label, far exists, block contents, expected victim)
    let rows: [(&str, bool, &[u64], u64, AbortRow); 6] = [
        ("near and far in block, near first", true, &[1, 2, 3], 3, AbortRow::BothNearFirst),
        ("near and far in block, far first", true, &[1, 3, 2], 2, AbortRow::BothFarFirst),
        ("only near in block", true, &[1, 2], 3, AbortRow::NearOnly),
        ("only far in block", true, &[1, 3], 2, AbortRow::FarOnly),
        ("neither in block", true, &[1], 2, AbortRow::Neither),
        ("near outside block, no far", false, &[1], 2, AbortRow::NoFar),
    ];
    for (label, far, ids, victim, row) in rows {
        let got = dangerous(far).decide_block_aware(1, &order(ids));
        check(got == vec![Victim { tx: victim, row }], format!("{label}: got {got:?}"))?;
    }
    Ok("6/6 rows".into())
}

// ---- criteria 2, 3, 6 ----

fn cross_node(reports: &[RunReport]) -> Outcome {
    for r in reports {
        let label = format!("{} seed {}", r.scenario.flow.label(), r.scenario.seed);
        check(r.consistent(), format!("{label}: {:?}", r.violations))?;
        let first = &r.nodes[0];
        for n in &r.nodes[1..] {
            check(n.status_vector == first.status_vector, format!("{label}: status vectors of node {} differ", n.id))?;
            check(n.checkpoints == first.checkpoints, format!("{label}: checkpoints of node {} differ", n.id))?;
            check(n.state_hash == first.state_hash, format!("{label}: final state of node {} differs", n.id))?;
        }
        check(!first.checkpoints.is_empty(), format!("{label}: no checkpoints"))?;
    }
    Ok(format!("{} runs identical", reports.len()))
}

fn serializable(reports: &[RunReport]) -> Outcome {
    let mut blocks = 0;
    for r in reports {
        let label = format!("{} seed {}", r.scenario.flow.label(), r.scenario.seed);
        check(r.oracle.counterexamples.is_empty(), format!("{label}: blocks {:?}", r.oracle.counterexamples))?;
        check(r.oracle.blocks_skipped == 0, format!("{label}: {} blocks too large", r.oracle.blocks_skipped))?;
        blocks += r.oracle.blocks_checked;
    }
    check(blocks > 0, "no blocks checked")?;
    Ok(format!("{blocks} blocks, 0 counterexamples"))
}

fn ww_first_wins(reports: &[RunReport]) -> Outcome {
    let mut events = 0;
    for r in reports {
        check(r.ww.violations.is_empty(), format!("{:?}", r.ww.violations))?;
        events += r.ww.events;
    }
    check(events > 0, "no contested versions")?;
    Ok(format!("{events} contested versions resolved"))
}

// ---- criterion 4 ----

/// Committed history of one key: consecutive versions separated by the
/// given block boundaries, the last one possibly live, plus an optional
/// uncommitted successor claimed by another transaction.
fn history() -> impl Strategy<Value = (Vec<RowVersion>, u64)> {
    (prop::collection::btree_set(0u64..40, 1..8), any::<bool>(), any::<bool>(), 0u64..45).prop_map(
        |(bounds, closed, pending, h)| {
            let b: Vec<u64> = bounds.into_iter().collect();
            let n = if closed { b.len() - 1 } else { b.len() };
            let mut out = Vec::new();
            for i in 0..n.max(1) {
                let mut v = RowVersion::new(vec![Value::Int(1), Value::Int(i as i64)], 10 + i as u64);
                v.creator_block = Some(b[i]);
                if let Some(&d) = b.get(i + 1) {
                    v.deleter_block = Some(d);
                    v.xmax.insert(11 + i as u64);
                }
                out.push(v);
            }
            if pending {
                let last = out.len() - 1;
                if out[last].deleter_block.is_none() {
                    out[last].xmax.insert(99);
                    out.push(RowVersion::new(vec![Value::Int(1), Value::Int(-1)], 99));
                }
            }
            (out, h)
        },
    )
}

fn in_interval(v: &RowVersion, h: u64) -> bool {
    match (v.creator_block, v.deleter_block) {
        (Some(c), None) => c <= h,
        (Some(c), Some(d)) => c <= h && h < d,
        (None, _) => false,
    }
}

fn visibility() -> Outcome {
    let mut runner = TestRunner::new(Config { cases: 10_000, failure_persistence: None, ..Config::default() });
    runner
        .run(&history(), |(versions, h)| {
            let snap = SnapshotSpec::at_height(h, 1_000);
            let mut seen = 0;
            for v in &versions {
                let got = visible(v, &snap);
                prop_assert_eq!(got, in_interval(v, h), "version {:?} at height {}", v, h);
                seen += usize::from(got);
            }
            prop_assert!(seen <= 1);
            Ok::<(), TestCaseError>(())
        })
        .map_err(|e| e.to_string())?;
    Ok("10000 cases".into())
}

// ---- criterion 5 ----

#[derive(Clone, Copy)]
enum Step {
    Insert { k: i64, g: i64, at: u64 },
    Update { k: i64, g: i64, at: u64 },
    Delete { k: i64, at: u64 },
    /// Written by a transaction that has not committed.
    PendingInsert { k: i64, g: i64 },
    PendingDelete { k: i64 },
}

#[derive(Debug, PartialEq)]
enum Expect {
    Rows(usize),
    Phantom,
    Stale,
}

struct Script {
    name: &'static str,
    steps: Vec<Step>,
    snapshot: u64,
    pred: Predicate,
    check: bool,
    expect: Expect,
}

fn live(store: &Store, k: i64) -> VersionRef {
    let snap = SnapshotSpec::at_height(u64::MAX, 0);
    store.read_checked(&snap, "t", &Predicate::eq("k", k), false).unwrap().rows[0].0
}

fn replay(steps: &[Step]) -> Store {
    let s = Store::new();
    s.create_table(TableSchema::new("t", &[("k", ColumnType::Integer), ("g", ColumnType::Integer)], &["k"]).with_index(&["g"]))
        .unwrap();
    let mut tx: LocalTxId = 100;
    let mut top = 0;
    for &step in steps {
        tx += 1;
        let row = |k: i64, g: i64| vec![Value::Int(k), Value::Int(g)];
        let snap = SnapshotSpec::at_height(u64::MAX, tx);
        let (op, at) = match step {
            Step::Insert { k, g, at } => {
                let (r, _, _) = s.insert(&snap, "t", row(k, g), false).unwrap();
                (WriteOp { kind: WriteKind::Insert, created: Some(r), superseded: None }, Some(at))
            }
            Step::Update { k, g, at } => {
                let old = live(&s, k);
                let (r, _) = s.update(&snap, old, row(k, g)).unwrap();
                (WriteOp { kind: WriteKind::Update, created: Some(r), superseded: Some(old) }, Some(at))
            }
            Step::Delete { k, at } => {
                let old = live(&s, k);
                s.delete(&snap, old).unwrap();
                (WriteOp { kind: WriteKind::Delete, created: None, superseded: Some(old) }, Some(at))
            }
            Step::PendingInsert { k, g } => {
                s.insert(&snap, "t", row(k, g), false).unwrap();
                continue;
            }
            Step::PendingDelete { k } => {
                s.delete(&snap, live(&s, k)).unwrap();
                continue;
            }
        };
        if let Some(at) = at {
            s.stamp(&WriteSet { ops: vec![op] }, at).unwrap();
            top = top.max(at);
        }
    }
    s.set_height(top);
    s
}

fn scripts() -> Vec<Script> {
    use Expect::*;
    use Step::*;
    let g1 = || Predicate::eq("g", 1);
    let k1_10 = || Predicate::between("k", 1, 10);
    let s = |name, steps, snapshot, pred, expect| Script { name, steps, snapshot, pred, check: true, expect };
    vec![
        s("insert above snapshot", vec![Insert { k: 1, g: 1, at: 7 }], 5, g1(), Phantom),
        s("delete above snapshot", vec![Insert { k: 1, g: 1, at: 3 }, Delete { k: 1, at: 7 }], 5, g1(), Stale),
        s("empty table", vec![], 5, g1(), Rows(0)),
        s("insert at snapshot", vec![Insert { k: 1, g: 1, at: 5 }], 5, g1(), Rows(1)),
        s("insert one above snapshot", vec![Insert { k: 1, g: 1, at: 6 }], 5, g1(), Phantom),
        s("delete at snapshot", vec![Insert { k: 1, g: 1, at: 3 }, Delete { k: 1, at: 5 }], 5, g1(), Rows(0)),
        s("delete one above snapshot", vec![Insert { k: 1, g: 1, at: 3 }, Delete { k: 1, at: 6 }], 5, g1(), Stale),
        s("update moves row out of range", vec![Insert { k: 1, g: 1, at: 3 }, Update { k: 1, g: 2, at: 6 }], 5, g1(), Stale),
        s("update moves row into range", vec![Insert { k: 1, g: 2, at: 3 }, Update { k: 1, g: 1, at: 6 }], 5, g1(), Phantom),
        s("non-matching insert above snapshot", vec![Insert { k: 1, g: 2, at: 6 }], 5, g1(), Rows(0)),
        s("range insert inside range", vec![Insert { k: 7, g: 0, at: 6 }], 5, k1_10(), Phantom),
        s("range insert outside range", vec![Insert { k: 12, g: 0, at: 6 }], 5, k1_10(), Rows(0)),
        s("insert and delete below snapshot", vec![Insert { k: 1, g: 1, at: 2 }, Delete { k: 1, at: 4 }], 5, g1(), Rows(0)),
        s("update below snapshot", vec![Insert { k: 1, g: 1, at: 1 }, Update { k: 1, g: 1, at: 4 }], 5, g1(), Rows(1)),
        s("update above lower snapshot", vec![Insert { k: 1, g: 1, at: 1 }, Update { k: 1, g: 2, at: 4 }], 3, g1(), Stale),
        s("pending insert", vec![Insert { k: 2, g: 1, at: 2 }, PendingInsert { k: 1, g: 1 }], 5, g1(), Rows(1)),
        s("pending delete", vec![Insert { k: 1, g: 1, at: 2 }, PendingDelete { k: 1 }], 5, g1(), Rows(1)),
        s("two rows below snapshot", vec![Insert { k: 1, g: 1, at: 2 }, Insert { k: 2, g: 1, at: 3 }], 5, g1(), Rows(2)),
        s("range delete above snapshot", vec![Insert { k: 3, g: 0, at: 2 }, Delete { k: 3, at: 8 }], 5, k1_10(), Stale),
        Script {
            name: "unchecked read ignores later commits",
            steps: vec![Insert { k: 1, g: 1, at: 7 }],
            snapshot: 5,
            pred: g1(),
            check: false,
            expect: Rows(0),
        },
    ]
}

fn phantom_stale() -> Outcome {
    let all = scripts();
    for sc in &all {
        let store = replay(&sc.steps);
        let got = match store.read_checked(&SnapshotSpec::at_height(sc.snapshot, 1), "t", &sc.pred, sc.check) {
            Ok(r) => Expect::Rows(r.rows.len()),
            Err(StoreError::PhantomRead { .. }) => Expect::Phantom,
            Err(StoreError::StaleRead { .. }) => Expect::Stale,
            Err(e) => return Err(format!("{}: {e}", sc.name)),
        };
        check(got == sc.expect, format!("{}: expected {:?}, got {got:?}", sc.name, sc.expect))?;
    }
    Ok(format!("{}/{} cases", all.len(), all.len()))
}

// ---- criterion 7 ----

fn byzantine(reports: &mut Vec<RunReport>) -> Outcome {
    let at = 5;
    let mut n = 0;
    for flow in [Flow::ExecuteOrder, Flow::OrderExecute] {
        for kind in [FaultKind::WithholdCommit, FaultKind::TamperRow, FaultKind::TamperBlock] {
            let cfg = ScenarioConfig {
                checkpoint_interval: 1,
                faults: vec![FaultSpec { kind, node: 2, at, point: None }],
                ..contended(flow, 11)
            };
            let r = run(cfg).map_err(|e| e.to_string())?;
            let label = format!("{} {kind:?}", flow.label());
            check(r.alarms.len() == 1, format!("{label}: {} alarms", r.alarms.len()))?;
            let a = &r.alarms[0];
            check(a.nodes == vec![2], format!("{label}: alarm names {:?}", a.nodes))?;
            check((at..=at + 1).contains(&a.height), format!("{label}: alarm at height {}", a.height))?;
            check(r.consistent(), format!("{label}: {:?}", r.violations))?;
            reports.push(r);
            n += 1;
        }
    }
    Ok(format!("{n} scenarios, one alarm each"))
}

// ---- criterion 8 ----

fn recovery(reports: &mut Vec<RunReport>) -> Outcome {
    let at = 5;
    let mut n = 0;
    for point in [CrashPoint::AfterStatusWrite, CrashPoint::BeforeStatusWrite, CrashPoint::MidBlock] {
        for seed in 1..=5 {
            let flow = if seed % 2 == 0 { Flow::OrderExecute } else { Flow::ExecuteOrder };
            let cfg = ScenarioConfig {
                faults: vec![FaultSpec { kind: FaultKind::CrashRestart, node: 1, at, point: Some(point) }],
                workload: WorkloadSpec { txs: 200, ..WorkloadSpec::default() },
                ..contended(flow, seed)
            };
            let r = run(cfg).map_err(|e| e.to_string())?;
            let label = format!("{point:?} seed {seed}");
            check(r.consistent(), format!("{label}: {:?}", r.violations))?;
            let (crashed, witness) = (&r.nodes[1], &r.nodes[0]);
            check(crashed.restarts == 1, format!("{label}: {} restarts", crashed.restarts))?;
            let later: BTreeMap<u64, _> = crashed.checkpoints.iter().filter(|c| c.height > at).map(|c| (c.height, c)).collect();
            let (h, mine) = later.iter().next().ok_or(format!("{label}: no checkpoint after restart"))?;
            let theirs = witness.checkpoints.iter().find(|c| c.height == *h).ok_or(format!("{label}: witness lacks {h}"))?;
            check(*mine == theirs, format!("{label}: checkpoint {h} differs"))?;
            check(crashed.state_hash == witness.state_hash, format!("{label}: final state differs"))?;
            reports.push(r);
            n += 1;
        }
    }
    Ok(format!("{n} restarts converged"))
}

// ---- criterion 9 ----

fn duplicates(reports: &mut Vec<RunReport>) -> Outcome {
    for dedup in [true, false] {
        for flow in [Flow::ExecuteOrder, Flow::OrderExecute] {
            let cfg = ScenarioConfig {
                orderer_dedup: dedup,
                faults: vec![FaultSpec { kind: FaultKind::DuplicateSubmit, node: 0, at: 3, point: None }],
                workload: WorkloadSpec { txs: 100, ..WorkloadSpec::default() },
                ..contended(flow, 5)
            };
            let r = run(cfg).map_err(|e| e.to_string())?;
            let label = format!("{} dedup={dedup}", flow.label());
            check(r.rejected > 0, format!("{label}: duplicate never rejected"))?;
            for n in &r.nodes {
                check(n.repeated_commits.is_empty(), format!("{label}: node {} repeats {:?}", n.id, n.repeated_commits))?;
            }
            check(r.consistent(), format!("{label}: {:?}", r.violations))?;
            reports.push(r);
        }
    }
    Ok("one committed entry per id".into())
}

// ---- criterion 10 ----

fn direction(reports: &mut Vec<RunReport>) -> Outcome {
    let mut tps = Vec::new();
    for flow in [Flow::ExecuteOrder, Flow::OrderExecute, Flow::Serial] {
        let cfg = ScenarioConfig {
            flow,
            block_size: 100,
            mode: Mode::Parallel,
            workload: WorkloadSpec {
                txs: 2_000,
                arrival_rate: 20_000.0,
                mix: [("simple_insert".to_owned(), 1.0)].into_iter().collect(),
                ..WorkloadSpec::default()
            },
            ..ScenarioConfig::default()
        };
        let r = run(cfg).map_err(|e| e.to_string())?;
        check(r.consistent(), format!("{}: {:?}", flow.label(), r.violations))?;
        tps.push(r.throughput_tps);
        reports.push(r);
    }
    let msg = format!("eo {:.0} tps, oe {:.0} tps, serial {:.0} tps", tps[0], tps[1], tps[2]);
    check(tps[0] >= tps[1] && tps[1] >= tps[2], msg.clone())?;
    Ok(msg)
}

// ---- criterion 11 ----

fn identities(reports: &[RunReport]) -> Outcome {
    let mut rows = 0;
    for r in reports {
        for m in r.metrics_rows() {
            if m.bpr == 0.0 {
                continue;
            }
            check((m.bct - (m.bpt - m.bet)).abs() <= 1e-3, format!("node {}: bct {} bpt {} bet {}", m.node, m.bct, m.bpt, m.bet))?;
            // su in percent, bpr per second, bpt in milliseconds
            let predicted = m.bpr * m.bpt / 10.0;
            check((m.su - predicted).abs() <= 0.05 * predicted, format!("node {}: su {} vs {predicted}", m.node, m.su))?;
            rows += 1;
        }
    }
    Ok(format!("{rows} metric rows from {} reports", reports.len()))
}

type Line = (u32, &'static str, Outcome, f64);

fn timed(results: &mut Vec<Line>, n: u32, name: &'static str, f: impl FnOnce() -> Outcome) {
    let t = Instant::now();
    let r = f();
    results.push((n, name, r, t.elapsed().as_secs_f64()));
}

fn main() {
    let mut results: Vec<Line> = Vec::new();
    timed(&mut results, 1, "block-aware abort table", abort_table);

    let mut base = Vec::new();
    let mut base_err = None;
    let t = Instant::now();
    'runs: for flow in [Flow::ExecuteOrder, Flow::OrderExecute] {
        for seed in 1..=20 {
            match run(contended(flow, seed)) {
                Ok(r) => base.push(r),
                Err(e) => {
                    base_err = Some(format!("{} seed {seed}: {e}", flow.label()));
                    break 'runs;
                }
            }
        }
    }
    let base_secs = t.elapsed().as_secs_f64();
    let with_base = |f: fn(&[RunReport]) -> Outcome| match &base_err {
        Some(e) => Err(e.clone()),
        None => f(&base),
    };
    results.push((2, "cross-node consistency", with_base(cross_node), base_secs));
    timed(&mut results, 3, "serializability oracle", || with_base(serializable));
    timed(&mut results, 4, "block-height visibility", visibility);
    timed(&mut results, 5, "phantom and stale reads", phantom_stale);
    timed(&mut results, 6, "ww resolution", || with_base(ww_first_wins));

    let mut extra = Vec::new();
    timed(&mut results, 7, "tamper and withhold detection", || byzantine(&mut extra));
    timed(&mut results, 8, "crash recovery", || recovery(&mut extra));
    timed(&mut results, 9, "duplicate id safety", || duplicates(&mut extra));
    timed(&mut results, 10, "directional throughput", || direction(&mut extra));
    let all: Vec<RunReport> = base.iter().chain(&extra).cloned().collect();
    timed(&mut results, 11, "metric identities", || identities(&all));

    results.sort_by_key(|r| r.0);
    let mut failed = 0;
    for (n, name, r, secs) in &results {
        match r {
            Ok(msg) => println!("criterion {n:>2} PASS  {name}: {msg} ({secs:.1}s)"),
            Err(msg) => {
                failed += 1;
                println!("criterion {n:>2} FAIL  {name}: {msg} ({secs:.1}s)");
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
