use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::ops::Bound;

use parking_lot::RwLock;
use serde::Serialize;

use super::predicate::{BoundPredicate, Predicate};
use super::schema::TableSchema;
use super::value::{encode_row, Row, Value};
use super::version::{visible, LocalTxId, RowVersion, SnapshotSpec, BOOTSTRAP_TX};
use super::StoreError;
use crate::codec::{Encoder, Hash256};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VersionRef {
    pub table: u32,
    pub idx: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum WriteKind {
    Insert,
    Update,
    Delete,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WriteOp {
    pub kind: WriteKind,
    pub created: Option<VersionRef>,
    pub superseded: Option<VersionRef>,
}

/// Versions a transaction created or superseded, in write order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct WriteSet {
    pub ops: Vec<WriteOp>,
}

impl WriteSet {
    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn superseded(&self) -> impl Iterator<Item = VersionRef> + '_ {
        self.ops.iter().filter_map(|o| o.superseded)
    }

    pub fn created(&self) -> impl Iterator<Item = VersionRef> + '_ {
        self.ops.iter().filter_map(|o| o.created)
    }
}

/// Outcome of an index scan.
#[derive(Clone, Debug, Default)]
pub struct ScanResult {
    /// Visible matches in index order.
    pub rows: Vec<(VersionRef, Row)>,
    /// Uncommitted transactions other than the reader that created or
    /// marked a matching version.
    pub writers: BTreeSet<LocalTxId>,
}

/// A committed version as exposed to provenance queries.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct VersionInfo {
    pub table: String,
    pub row: Row,
    pub creator_block: u64,
    pub deleter_block: Option<u64>,
    pub creator: Hash256,
    pub deleter: Option<Hash256>,
}

struct Table {
    schema: TableSchema,
    pk: Vec<usize>,
    index_cols: Vec<Vec<usize>>,
    versions: Vec<RowVersion>,
    indexes: Vec<BTreeMap<Vec<Value>, Vec<u32>>>,
}

impl Table {
    fn index_key(&self, ix: usize, row: &[Value]) -> Vec<Value> {
        self.index_cols[ix].iter().chain(&self.pk).map(|&i| row[i].clone()).collect()
    }

    fn pk_of(&self, row: &[Value]) -> Vec<Value> {
        self.pk.iter().map(|&i| row[i].clone()).collect()
    }

    fn append(&mut self, v: RowVersion) -> u32 {
        let idx = self.versions.len() as u32;
        for ix in 0..self.indexes.len() {
            let key = self.index_key(ix, &v.payload);
            self.indexes[ix].entry(key).or_default().push(idx);
        }
        self.versions.push(v);
        idx
    }

    fn scan<'a>(&'a self, ix: usize, bp: &'a BoundPredicate) -> impl Iterator<Item = u32> + 'a {
        let lower = bp.lower_key();
        self.indexes[ix]
            .range::<Vec<Value>, _>((Bound::Included(lower), Bound::Unbounded))
            .take_while(move |(k, _)| !bp.past_end(k))
            .flat_map(|(_, vids)| vids.iter().copied())
            .filter(move |&i| bp.matches(&self.versions[i as usize].payload))
    }

    fn record(&self, v: &RowVersion, gids: &HashMap<LocalTxId, Hash256>, enc: &mut Encoder) {
        let gid = |l: LocalTxId| gids.get(&l).copied().unwrap_or(Hash256::ZERO);
        encode_row(enc, &v.payload);
        enc.opt_u64(v.creator_block).opt_u64(v.deleter_block);
        enc.hash(&gid(v.xmin));
        enc.opt_hash(v.deleter().map(gid).as_ref());
    }
}

#[derive(Default)]
struct Inner {
    tables: Vec<Table>,
    by_name: BTreeMap<String, u32>,
    gids: HashMap<LocalTxId, Hash256>,
    aborted: HashSet<LocalTxId>,
    touched: BTreeMap<u64, Vec<VersionRef>>,
    height: u64,
}

impl Inner {
    fn table_id(&self, name: &str) -> Result<u32, StoreError> {
        self.by_name.get(name).copied().ok_or_else(|| StoreError::UnknownTable(name.to_owned()))
    }

    fn version(&self, r: VersionRef) -> Result<&RowVersion, StoreError> {
        self.tables
            .get(r.table as usize)
            .and_then(|t| t.versions.get(r.idx as usize))
            .ok_or(StoreError::UnknownVersion)
    }

    fn version_mut(&mut self, r: VersionRef) -> Result<&mut RowVersion, StoreError> {
        self.tables
            .get_mut(r.table as usize)
            .and_then(|t| t.versions.get_mut(r.idx as usize))
            .ok_or(StoreError::UnknownVersion)
    }

    fn live_writer(&self, id: LocalTxId, own: LocalTxId) -> bool {
        id != own && id != BOOTSTRAP_TX && !self.aborted.contains(&id)
    }

    fn scan_checked(
        &self,
        snap: &SnapshotSpec,
        tid: u32,
        pred: &Predicate,
        check: bool,
    ) -> Result<ScanResult, StoreError> {
        let t = &self.tables[tid as usize];
        let name = &t.schema.name;
        let no_index = || StoreError::NoIndexForPredicate { table: name.clone(), columns: pred.columns() };
        let ix = pred.find_index(&t.schema).ok_or_else(no_index)?;
        let bp = pred.bind(&t.schema).ok_or_else(no_index)?;
        let own = snap.own();
        let mut out = ScanResult::default();
        for i in t.scan(ix, &bp) {
            let v = &t.versions[i as usize];
            if check {
                if let SnapshotSpec::BlockHeight { height, same_block, .. } = snap {
                    let seen = |b: u64| b <= *height || Some(b) == *same_block;
                    match (v.creator_block, v.deleter_block) {
                        (Some(c), _) if !seen(c) => return Err(StoreError::PhantomRead { table: name.clone() }),
                        (Some(_), Some(d)) if !seen(d) => return Err(StoreError::StaleRead { table: name.clone() }),
                        _ => {}
                    }
                }
            }
            if v.creator_block.is_none() && self.live_writer(v.xmin, own) {
                out.writers.insert(v.xmin);
            }
            if v.deleter_block.is_none() {
                out.writers.extend(v.xmax.iter().copied().filter(|&x| self.live_writer(x, own)));
            }
            if visible(v, snap) {
                out.rows.push((VersionRef { table: tid, idx: i }, v.payload.clone()));
            }
        }
        Ok(out)
    }
}

/// Versioned tables of one node. All methods take `&self`; a single
/// reader-writer lock makes version appends, index updates and `xmax`
/// changes atomic with respect to each other.
#[derive(Default)]
pub struct Store {
    inner: RwLock<Inner>,
}

impl Store {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn create_table(&self, mut schema: TableSchema) -> Result<(), StoreError> {
        schema.validate()?;
        let mut g = self.inner.write();
        if g.by_name.contains_key(&schema.name) {
            return Err(StoreError::TableExists(schema.name));
        }
        let id = g.tables.len() as u32;
        g.by_name.insert(schema.name.clone(), id);
        let pk = schema.pk_positions();
        let index_cols: Vec<Vec<usize>> = schema.indexes.iter().map(|ix| schema.positions(ix)).collect();
        g.tables.push(Table {
            indexes: vec![BTreeMap::new(); index_cols.len()],
            index_cols,
            pk,
            schema,
            versions: Vec::new(),
        });
        Ok(())
    }

    pub fn schema(&self, table: &str) -> Result<TableSchema, StoreError> {
        let g = self.inner.read();
        let id = g.table_id(table)?;
        Ok(g.tables[id as usize].schema.clone())
    }

    pub fn table_names(&self) -> Vec<String> {
        self.inner.read().by_name.keys().cloned().collect()
    }

    pub fn register_tx(&self, local: LocalTxId, gid: Hash256) {
        self.inner.write().gids.insert(local, gid);
    }

    pub fn gid_of(&self, local: LocalTxId) -> Option<Hash256> {
        self.inner.read().gids.get(&local).copied()
    }

    /// Committed height recorded by the owner of the store.
    pub fn height(&self) -> u64 {
        self.inner.read().height
    }

    pub fn set_height(&self, h: u64) {
        self.inner.write().height = h;
    }

    pub fn version_count(&self) -> usize {
        self.inner.read().tables.iter().map(|t| t.versions.len()).sum()
    }

    /// Genesis row, committed at height 0 by the bootstrap writer.
    pub fn bootstrap_insert(&self, table: &str, row: Row) -> Result<VersionRef, StoreError> {
        let mut g = self.inner.write();
        let tid = g.table_id(table)?;
        let t = &mut g.tables[tid as usize];
        t.schema.check_row(&row)?;
        let pk = t.pk_of(&row);
        let dup = t.indexes[0]
            .get(&t.index_key(0, &row))
            .is_some_and(|vids| vids.iter().any(|&i| t.versions[i as usize].deleter_block.is_none()));
        if dup {
            return Err(StoreError::PrimaryKeyViolation { table: table.to_owned(), key: fmt_key(&pk) });
        }
        let mut v = RowVersion::new(row, BOOTSTRAP_TX);
        v.creator_block = Some(0);
        let idx = t.append(v);
        let r = VersionRef { table: tid, idx };
        g.touched.entry(0).or_default().push(r);
        Ok(r)
    }

    /// Index read under `snap`. With `check` set, a block-height reader
    /// fails on any matching version committed or superseded above its
    /// snapshot height.
    pub fn read_checked(
        &self,
        snap: &SnapshotSpec,
        table: &str,
        pred: &Predicate,
        check: bool,
    ) -> Result<ScanResult, StoreError> {
        let g = self.inner.read();
        let tid = g.table_id(table)?;
        g.scan_checked(snap, tid, pred, check)
    }

    /// Appends a new row. The primary-key probe is a checked read, so its
    /// result (and any concurrent writers it saw) is returned too.
    pub fn insert(
        &self,
        snap: &SnapshotSpec,
        table: &str,
        row: Row,
        check: bool,
    ) -> Result<(VersionRef, Predicate, ScanResult), StoreError> {
        let mut g = self.inner.write();
        let tid = g.table_id(table)?;
        let (probe, scan) = {
            let t = &g.tables[tid as usize];
            t.schema.check_row(&row)?;
            let probe = pk_predicate(&t.schema, &row);
            let scan = g.scan_checked(snap, tid, &probe, check)?;
            if !scan.rows.is_empty() {
                return Err(StoreError::PrimaryKeyViolation {
                    table: table.to_owned(),
                    key: fmt_key(&t.pk_of(&row)),
                });
            }
            (probe, scan)
        };
        let idx = g.tables[tid as usize].append(RowVersion::new(row, snap.own()));
        Ok((VersionRef { table: tid, idx }, probe, scan))
    }

    /// Marks `target` as superseded by the caller and appends its successor.
    /// Returns the new version and the superseded payload.
    pub fn update(&self, snap: &SnapshotSpec, target: VersionRef, row: Row) -> Result<(VersionRef, Row), StoreError> {
        let mut g = self.inner.write();
        let old = g.version(target)?;
        if !visible(old, snap) {
            return Err(StoreError::TargetNotVisible);
        }
        let old_payload = old.payload.clone();
        let t = &mut g.tables[target.table as usize];
        t.schema.check_row(&row)?;
        if t.pk_of(&row) != t.pk_of(&old_payload) {
            return Err(StoreError::PrimaryKeyChange);
        }
        t.versions[target.idx as usize].xmax.insert(snap.own());
        let idx = t.append(RowVersion::new(row, snap.own()));
        Ok((VersionRef { table: target.table, idx }, old_payload))
    }

    pub fn delete(&self, snap: &SnapshotSpec, target: VersionRef) -> Result<Row, StoreError> {
        let mut g = self.inner.write();
        let v = g.version_mut(target)?;
        if !visible(v, snap) {
            return Err(StoreError::TargetNotVisible);
        }
        v.xmax.insert(snap.own());
        Ok(v.payload.clone())
    }

    pub fn payload(&self, r: VersionRef) -> Result<Row, StoreError> {
        Ok(self.inner.read().version(r)?.payload.clone())
    }

    pub fn version(&self, r: VersionRef) -> Result<RowVersion, StoreError> {
        self.inner.read().version(r).cloned()
    }

    pub fn table_name(&self, r: VersionRef) -> Result<String, StoreError> {
        let g = self.inner.read();
        g.tables.get(r.table as usize).map(|t| t.schema.name.clone()).ok_or(StoreError::UnknownVersion)
    }

    /// Reduces `xmax` of `r` to `winner` and returns the other claimants.
    pub fn resolve_xmax(&self, r: VersionRef, winner: LocalTxId) -> Result<Vec<LocalTxId>, StoreError> {
        let mut g = self.inner.write();
        let v = g.version_mut(r)?;
        if v.deleter_block.is_some() {
            return Err(StoreError::LostUpdate);
        }
        if !v.xmax.contains(&winner) {
            return Err(StoreError::UnknownVersion);
        }
        let victims: Vec<LocalTxId> = v.xmax.iter().copied().filter(|&x| x != winner).collect();
        v.xmax.retain(|&x| x == winner);
        Ok(victims)
    }

    /// Stamps creator and deleter heights for a committing transaction.
    pub fn stamp(&self, ws: &WriteSet, height: u64) -> Result<(), StoreError> {
        let mut g = self.inner.write();
        for r in ws.created() {
            if g.version(r)?.creator_block.is_some() {
                return Err(StoreError::AlreadyStamped);
            }
        }
        for r in ws.superseded() {
            let v = g.version(r)?;
            if v.deleter_block.is_some() || v.xmax.len() != 1 {
                return Err(StoreError::AlreadyStamped);
            }
        }
        let mut touched = Vec::new();
        for r in ws.created() {
            g.version_mut(r)?.creator_block = Some(height);
            touched.push(r);
        }
        for r in ws.superseded() {
            g.version_mut(r)?.deleter_block = Some(height);
            touched.push(r);
        }
        g.touched.entry(height).or_default().extend(touched);
        Ok(())
    }

    /// Withdraws an aborted transaction's claims. Its own versions stay
    /// behind, permanently invisible.
    pub fn rollback(&self, own: LocalTxId, ws: &WriteSet) {
        let mut g = self.inner.write();
        g.aborted.insert(own);
        for r in ws.superseded() {
            if let Ok(v) = g.version_mut(r) {
                if v.deleter_block.is_none() {
                    v.xmax.remove(&own);
                }
            }
        }
    }

    /// Every committed version of `table` matching `pred`, live or not.
    /// Unlike contract reads this accepts predicates without an index.
    pub fn provenance_scan(&self, table: &str, pred: &Predicate) -> Result<Vec<VersionInfo>, StoreError> {
        let g = self.inner.read();
        let tid = g.table_id(table)?;
        let t = &g.tables[tid as usize];
        let bp = pred.bind(&t.schema).ok_or_else(|| StoreError::NoIndexForPredicate {
            table: table.to_owned(),
            columns: pred.columns(),
        })?;
        let ids: Vec<u32> = match pred.find_index(&t.schema) {
            Some(ix) => t.scan(ix, &bp).collect(),
            None => t
                .indexes[0]
                .values()
                .flatten()
                .copied()
                .filter(|&i| bp.matches(&t.versions[i as usize].payload))
                .collect(),
        };
        let gid = |l: LocalTxId| g.gids.get(&l).copied().unwrap_or(Hash256::ZERO);
        Ok(ids
            .into_iter()
            .map(|i| &t.versions[i as usize])
            .filter_map(|v| {
                Some(VersionInfo {
                    table: table.to_owned(),
                    row: v.payload.clone(),
                    creator_block: v.creator_block?,
                    deleter_block: v.deleter_block,
                    creator: gid(v.xmin),
                    deleter: v.deleter().map(gid),
                })
            })
            .collect())
    }

    /// Live rows of every table as of `height`, keyed by primary key.
    pub fn rows_at(&self, height: u64) -> BTreeMap<String, BTreeMap<Vec<Value>, Row>> {
        let g = self.inner.read();
        let snap = SnapshotSpec::at_height(height, u64::MAX);
        g.by_name
            .iter()
            .map(|(name, &tid)| {
                let t = &g.tables[tid as usize];
                let rows = t
                    .versions
                    .iter()
                    .filter(|v| visible(v, &snap))
                    .map(|v| (t.pk_of(&v.payload), v.payload.clone()))
                    .collect();
                (name.clone(), rows)
            })
            .collect()
    }

    /// Canonical encoding of all committed versions. Local ids are replaced
    /// by global ids so that replicas with different execution
    /// interleavings encode identically.
    pub fn image(&self) -> Vec<u8> {
        let g = self.inner.read();
        let mut enc = Encoder::new();
        enc.u32(g.by_name.len() as u32);
        for (name, &tid) in &g.by_name {
            let t = &g.tables[tid as usize];
            let mut recs: Vec<(Vec<Value>, u64, Vec<u8>)> = t
                .versions
                .iter()
                .filter_map(|v| {
                    let c = v.creator_block?;
                    let mut e = Encoder::new();
                    t.record(v, &g.gids, &mut e);
                    Some((t.pk_of(&v.payload), c, e.finish()))
                })
                .collect();
            recs.sort();
            enc.str(name).u32(recs.len() as u32);
            for (_, _, r) in recs {
                enc.raw(&r);
            }
        }
        enc.finish()
    }

    pub fn state_hash(&self) -> Hash256 {
        Hash256::digest(&self.image())
    }

    /// Hash over versions created or superseded in blocks `(from, to]`.
    pub fn write_set_hash(&self, from: u64, to: u64) -> Hash256 {
        let g = self.inner.read();
        let mut enc = Encoder::new();
        for (b, refs) in g.touched.range(from + 1..=to) {
            let mut recs: Vec<Vec<u8>> = refs
                .iter()
                .map(|r| {
                    let t = &g.tables[r.table as usize];
                    let mut e = Encoder::new();
                    e.str(&t.schema.name);
                    t.record(&t.versions[r.idx as usize], &g.gids, &mut e);
                    e.finish()
                })
                .collect();
            recs.sort();
            enc.u64(*b).u32(recs.len() as u32);
            for r in recs {
                enc.raw(&r);
            }
        }
        Hash256::digest(enc.as_slice())
    }

    /// Rewrites a committed payload in place. Exists only so simulations can
    /// model a replica that tampers with its own state.
    pub fn overwrite_payload(&self, r: VersionRef, row: Row) -> Result<(), StoreError> {
        self.inner.write().version_mut(r)?.payload = row;
        Ok(())
    }

    /// Latest committed live version of `table`, if any.
    pub fn last_live(&self, table: &str) -> Option<VersionRef> {
        let g = self.inner.read();
        let tid = g.table_id(table).ok()?;
        let t = &g.tables[tid as usize];
        t.versions
            .iter()
            .rposition(|v| v.creator_block.is_some() && v.deleter_block.is_none())
            .map(|i| VersionRef { table: tid, idx: i as u32 })
    }
}

fn pk_predicate(schema: &TableSchema, row: &[Value]) -> Predicate {
    let mut p = Predicate::all();
    for c in &schema.primary_key {
        p = p.and_eq(c, row[schema.col(c).unwrap()].clone());
    }
    p
}

fn fmt_key(k: &[Value]) -> String {
    k.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}
