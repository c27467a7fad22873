use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;

use relchain::codec::{Decoder, Encoder, Hash256};
use relchain::crypto::KeyPair;
use relchain::mvstore::{
    decode_row, encode_row, visible, ColumnType, Decimal, LocalTxId, Predicate, RowVersion, SnapshotSpec, Store,
    TableSchema, Value, VersionRef, WriteKind, WriteOp, WriteSet,
};
use relchain::ordering::{OrdererConfig, OrderingBackend, Sequencer};
use relchain::ssi::{resolve_ww, ConflictGraph, TxOrder, TxStatus};
use relchain::tx::{Invocation, Transaction};

fn value() -> impl Strategy<Value = Value> {
    prop_oneof![
        any::<i64>().prop_map(Value::Int),
        any::<i64>().prop_map(|v| Value::Dec(Decimal::from_raw(v))),
        ".{0,12}".prop_map(Value::Text),
        any::<bool>().prop_map(Value::Bool),
    ]
}

proptest! {
    #[test]
    fn rows_round_trip(row in prop::collection::vec(value(), 0..8)) {
        let mut e = Encoder::new();
        encode_row(&mut e, &row);
        let bytes = e.finish();
        let mut d = Decoder::new(&bytes);
        prop_assert_eq!(decode_row(&mut d).unwrap(), row);
        d.finish().unwrap();
    }

    #[test]
    fn truncated_rows_never_decode(row in prop::collection::vec(value(), 1..6), cut in 1usize..64) {
        let mut e = Encoder::new();
        encode_row(&mut e, &row);
        let bytes = e.finish();
        let keep = bytes.len().saturating_sub(cut);
        let mut d = Decoder::new(&bytes[..keep]);
        prop_assert!(decode_row(&mut d).and_then(|_| d.finish()).is_err());
    }

    /// Visibility over increasing heights rises at most once and falls at
    /// most once.
    #[test]
    fn snapshot_monotonicity(c in 0u64..30, life in prop::option::of(1u64..30)) {
        let mut v = RowVersion::new(vec![Value::Int(1)], 7);
        v.creator_block = Some(c);
        if let Some(l) = life {
            v.deleter_block = Some(c + l);
            v.xmax.insert(8);
        }
        let trace: Vec<bool> = (0..70).map(|h| visible(&v, &SnapshotSpec::at_height(h, 99))).collect();
        let rises = trace.windows(2).filter(|w| !w[0] && w[1]).count();
        let falls = trace.windows(2).filter(|w| w[0] && !w[1]).count();
        prop_assert!(rises <= 1 && falls <= 1);
        prop_assert_eq!(trace.iter().position(|&x| x), Some(c as usize));
    }
}

#[derive(Clone, Debug)]
enum Op {
    Insert(i64),
    Update(i64),
    Delete(i64),
}

fn op() -> impl Strategy<Value = (Op, bool)> {
    let key = 0i64..4;
    (prop_oneof![key.clone().prop_map(Op::Insert), key.clone().prop_map(Op::Update), key.prop_map(Op::Delete)], any::<bool>())
}

fn table() -> Store {
    let s = Store::new();
    s.create_table(TableSchema::new("t", &[("k", ColumnType::Integer), ("v", ColumnType::Integer)], &["k"])).unwrap();
    s
}

proptest! {
    /// Random committed and aborted writes, one per block.
    #[test]
    fn store_history_invariants(ops in prop::collection::vec(op(), 1..40)) {
        let s = table();
        let mut frozen: BTreeMap<VersionRef, RowVersion> = BTreeMap::new();
        let mut count = 0;
        for (i, (op, commit)) in ops.into_iter().enumerate() {
            let tx = 10 + i as LocalTxId;
            let h = i as u64 + 1;
            let snap = SnapshotSpec::at_height(h - 1, tx);
            let cur = |k: i64| s.read_checked(&snap, "t", &Predicate::eq("k", k), false).unwrap().rows;
            let w = match op {
                Op::Insert(k) => s.insert(&snap, "t", vec![Value::Int(k), Value::Int(i as i64)], false).ok().map(|(r, _, _)| {
                    WriteOp { kind: WriteKind::Insert, created: Some(r), superseded: None }
                }),
                Op::Update(k) => cur(k).first().map(|(old, _)| {
                    let (r, _) = s.update(&snap, *old, vec![Value::Int(k), Value::Int(i as i64)]).unwrap();
                    WriteOp { kind: WriteKind::Update, created: Some(r), superseded: Some(*old) }
                }),
                Op::Delete(k) => cur(k).first().map(|(old, _)| {
                    s.delete(&snap, *old).unwrap();
                    WriteOp { kind: WriteKind::Delete, created: None, superseded: Some(*old) }
                }),
            };
            if let Some(w) = w {
                // read-own-writes
                let k = match &w.created.or(w.superseded) { Some(r) => s.payload(*r).unwrap()[0].clone(), None => unreachable!() };
                let own = s.read_checked(&snap, "t", &Predicate::eq("k", k), false).unwrap().rows;
                prop_assert_eq!(own.len(), usize::from(w.created.is_some()));
                if let Some(c) = w.created {
                    prop_assert_eq!(own[0].0, c);
                }
                let ws = WriteSet { ops: vec![w] };
                if commit {
                    s.stamp(&ws, h).unwrap();
                } else {
                    s.rollback(tx, &ws);
                }
            }
            s.set_height(h);

            let n = s.version_count();
            prop_assert!(n >= count);
            count = n;
            for (r, v) in &frozen {
                prop_assert_eq!(&s.version(*r).unwrap(), v);
            }
            for idx in 0..n as u32 {
                let r = VersionRef { table: 0, idx };
                let v = s.version(r).unwrap();
                if v.deleter_block.is_some() {
                    frozen.entry(r).or_insert(v);
                }
            }
        }
        for h in 0..=count as u64 + 1 {
            for k in 0..4 {
                let rows = s.read_checked(&SnapshotSpec::at_height(h, 1), "t", &Predicate::eq("k", k), false).unwrap().rows;
                prop_assert!(rows.len() <= 1, "key {} has {} versions at {}", k, rows.len(), h);
            }
        }
    }

    #[test]
    fn exactly_one_writer_survives(n in 1u64..6, first in 0u64..6) {
        let first = first % n + 1;
        let s = table();
        let v = s.bootstrap_insert("t", vec![Value::Int(1), Value::Int(0)]).unwrap();
        for w in 1..=n {
            s.delete(&SnapshotSpec::at_height(0, w), v).unwrap();
        }
        let victims: BTreeSet<_> = resolve_ww(&s, v, first).unwrap().into_iter().collect();
        let expect: BTreeSet<_> = (1..=n).filter(|&w| w != first).collect();
        prop_assert_eq!(victims, expect);
        prop_assert_eq!(s.version(v).unwrap().xmax.len(), 1);
    }
}

#[derive(Clone, Debug)]
enum GraphOp {
    Edge(u64, u64),
    Commit(u64),
    Abort(u64),
}

fn graph_op() -> impl Strategy<Value = GraphOp> {
    prop_oneof![
        4 => (1u64..8, 1u64..8).prop_map(|(a, b)| GraphOp::Edge(a, b)),
        1 => (1u64..8).prop_map(GraphOp::Commit),
        1 => (1u64..8).prop_map(GraphOp::Abort),
    ]
}

fn gid(i: u64) -> Hash256 {
    Hash256::digest(&i.to_be_bytes())
}

proptest! {
    #[test]
    fn conflict_edges_stay_symmetric(ops in prop::collection::vec(graph_op(), 0..40)) {
        let mut g = ConflictGraph::new();
        for i in 1..8 {
            g.begin(i, gid(i));
            g.set_status(i, TxStatus::Ready);
        }
        for op in ops {
            match op {
                GraphOp::Edge(a, b) if a != b => g.track_dependency(a, b),
                GraphOp::Edge(..) => {}
                GraphOp::Commit(t) if g.status(t) == Some(TxStatus::Ready) => g.mark_committed(t),
                GraphOp::Abort(t) if g.status(t) == Some(TxStatus::Ready) => g.mark_aborted(t),
                _ => {}
            }
            prop_assert!(g.edges_symmetric());
        }
    }

    /// Same graph and order, same victims; and an isolated transaction is
    /// never told to abort anything.
    #[test]
    fn decisions_are_pure(edges in prop::collection::vec((1u64..6, 1u64..6), 0..12), t in 1u64..6, split in 0usize..6) {
        let build = || {
            let mut g = ConflictGraph::new();
            for i in 1..6 {
                g.begin(i, gid(i));
                g.set_status(i, TxStatus::Ready);
            }
            for &(a, b) in &edges {
                if a != b {
                    g.track_dependency(a, b);
                }
            }
            g
        };
        let order = TxOrder { block_number: 1, ids: (1..6).take(split.max(1)).map(gid).collect() };
        let (a, b) = (build(), build());
        prop_assert_eq!(a.decide_block_aware(t, &order), b.decide_block_aware(t, &order));
        prop_assert_eq!(a.decide_standard(t), b.decide_standard(t));
        let isolated = !edges.iter().any(|&(x, y)| x != y && (x == t || y == t));
        if isolated {
            prop_assert!(a.decide_standard(t).is_empty());
            prop_assert!(a.decide_block_aware(t, &order).is_empty());
        }
    }

    #[test]
    fn sequencer_chains_unique_blocks(n in 1usize..60, bs in 1usize..9, dups in prop::collection::vec(0usize..60, 0..10)) {
        let key = KeyPair::derive(3, "orderer");
        let client = KeyPair::derive(3, "c");
        let mut s = Sequencer::new(OrdererConfig { block_size: bs, block_timeout_us: 1_000 }, key.clone()).unwrap();
        let txs: Vec<Transaction> = (0..n)
            .map(|i| Transaction::new_eo(&client, "c", Invocation::new("kv_add", vec![Value::Int(i as i64), Value::Int(1)]), 0))
            .collect();
        let mut blocks = Vec::new();
        let mut sent = Vec::new();
        for (i, tx) in txs.iter().enumerate() {
            sent.push(tx.clone());
            for &d in &dups {
                if d == i {
                    sent.push(txs[d / 2].clone());
                }
            }
        }
        for tx in sent {
            blocks.extend(s.submit(tx).unwrap().blocks);
        }
        while let (Some(b), _) = s.time_to_cut(s.height() + 1) {
            blocks.push(b);
        }
        let mut prev = Hash256::ZERO;
        let mut seen = BTreeSet::new();
        for (i, b) in blocks.iter().enumerate() {
            b.verify(i as u64 + 1, &prev, &key.public()).unwrap();
            prev = b.this_hash;
            prop_assert!(b.txs.len() <= bs);
            for tx in &b.txs {
                prop_assert!(seen.insert(tx.global_id));
            }
        }
        prop_assert_eq!(seen.len(), n);
    }
}
