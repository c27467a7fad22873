//! Brute-force serializability check for small blocks.
//!
//! Contracts run against a plain map of committed rows with no
//! versioning or concurrency control at all, one after another. A block
//! passes when some order of its committed transactions, each run to
//! success, turns the state before the block into the state after it.

use std::collections::BTreeMap;

use crate::contracts::{invoke, ContractError, DataApi, HostLibrary, RowRef};
use crate::mvstore::{Predicate, Row, StoreError, TableSchema, Value};
use crate::tx::Transaction;

pub type Tables = BTreeMap<String, BTreeMap<Vec<Value>, Row>>;

/// Largest block the oracle enumerates.
pub const MAX_ORACLE_TXS: usize = 6;

struct MapApi<'a> {
    schemas: &'a BTreeMap<String, TableSchema>,
    rows: &'a mut Tables,
    caller: &'a str,
    handles: Vec<(String, Vec<Value>)>,
}

impl MapApi<'_> {
    fn schema(&self, table: &str) -> Result<&TableSchema, ContractError> {
        self.schemas.get(table).ok_or_else(|| StoreError::UnknownTable(table.to_owned()).into())
    }

    fn handle(&self, h: RowRef) -> Result<(String, Vec<Value>), ContractError> {
        self.handles.get(h as usize).cloned().ok_or(ContractError::BadHandle)
    }
}

impl DataApi for MapApi<'_> {
    fn caller(&self) -> &str {
        self.caller
    }

    fn select(&mut self, table: &str, pred: &Predicate) -> Result<Vec<(RowRef, Row)>, ContractError> {
        let schema = self.schema(table)?;
        let no_index = || StoreError::NoIndexForPredicate { table: table.to_owned(), columns: pred.columns() };
        let ix = pred.find_index(schema).ok_or_else(no_index)?;
        let bp = pred.bind(schema).ok_or_else(no_index)?;
        let ix_cols = schema.positions(&schema.indexes[ix]);
        let mut hits: Vec<(Vec<Value>, Vec<Value>, Row)> = self
            .rows
            .get(table)
            .into_iter()
            .flatten()
            .filter(|(_, r)| bp.matches(r))
            .map(|(pk, r)| (ix_cols.iter().map(|&i| r[i].clone()).collect(), pk.clone(), r.clone()))
            .collect();
        hits.sort();
        let mut out = Vec::with_capacity(hits.len());
        for (_, pk, r) in hits {
            out.push((self.handles.len() as RowRef, r));
            self.handles.push((table.to_owned(), pk));
        }
        Ok(out)
    }

    fn insert(&mut self, table: &str, row: Row) -> Result<(), ContractError> {
        let schema = self.schema(table)?;
        schema.check_row(&row)?;
        let pk = schema.pk_of(&row);
        let t = self.rows.entry(table.to_owned()).or_default();
        if t.contains_key(&pk) {
            let key = pk.iter().map(ToString::to_string).collect::<Vec<_>>().join(",");
            return Err(StoreError::PrimaryKeyViolation { table: table.to_owned(), key }.into());
        }
        t.insert(pk, row);
        Ok(())
    }

    fn update(&mut self, target: RowRef, row: Row) -> Result<(), ContractError> {
        let (table, pk) = self.handle(target)?;
        let schema = self.schema(&table)?;
        schema.check_row(&row)?;
        if schema.pk_of(&row) != pk {
            return Err(StoreError::PrimaryKeyChange.into());
        }
        match self.rows.get_mut(&table).and_then(|t| t.get_mut(&pk)) {
            Some(slot) => {
                *slot = row;
                Ok(())
            }
            None => Err(StoreError::TargetNotVisible.into()),
        }
    }

    fn delete(&mut self, target: RowRef) -> Result<(), ContractError> {
        let (table, pk) = self.handle(target)?;
        self.rows.get_mut(&table).and_then(|t| t.remove(&pk)).map(|_| ()).ok_or(StoreError::TargetNotVisible.into())
    }
}

/// Runs one transaction on a copy of `state`.
pub fn apply(
    schemas: &BTreeMap<String, TableSchema>,
    lib: &HostLibrary,
    state: &Tables,
    tx: &Transaction,
) -> Result<Tables, ContractError> {
    let mut rows = state.clone();
    let mut api = MapApi { schemas, rows: &mut rows, caller: &tx.username, handles: Vec::new() };
    invoke(&mut api, lib, &tx.invocation.contract, &tx.invocation.args)?;
    Ok(rows)
}

/// A serial order of `txs` that leads from `before` to `after`, if any.
pub fn find_serial_order(
    schemas: &BTreeMap<String, TableSchema>,
    lib: &HostLibrary,
    before: &Tables,
    after: &Tables,
    txs: &[Transaction],
) -> Option<Vec<usize>> {
    let mut used = vec![false; txs.len()];
    let mut order = Vec::with_capacity(txs.len());
    dfs(schemas, lib, before, after, txs, &mut used, &mut order).then_some(order)
}

fn dfs(
    schemas: &BTreeMap<String, TableSchema>,
    lib: &HostLibrary,
    state: &Tables,
    target: &Tables,
    txs: &[Transaction],
    used: &mut Vec<bool>,
    order: &mut Vec<usize>,
) -> bool {
    if order.len() == txs.len() {
        return normalized(state) == normalized(target);
    }
    for i in 0..txs.len() {
        if used[i] {
            continue;
        }
        let Ok(next) = apply(schemas, lib, state, &txs[i]) else { continue };
        used[i] = true;
        order.push(i);
        if dfs(schemas, lib, &next, target, txs, used, order) {
            return true;
        }
        order.pop();
        used[i] = false;
    }
    false
}

/// Drops empty tables so that "never created" equals "emptied".
fn normalized(t: &Tables) -> BTreeMap<&String, &BTreeMap<Vec<Value>, Row>> {
    t.iter().filter(|(_, rows)| !rows.is_empty()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contracts::{system_tables, workload_tables, Genesis};
    use crate::crypto::KeyPair;
    use crate::tx::Invocation;

    fn setup() -> (BTreeMap<String, TableSchema>, HostLibrary, Tables, KeyPair) {
        let mut schemas = BTreeMap::new();
        for mut s in system_tables().into_iter().chain(workload_tables()) {
            s.validate().unwrap();
            schemas.insert(s.name.clone(), s);
        }
        let key = KeyPair::derive(1, "alice");
        let mut state = Tables::new();
        let g = Genesis::with_builtins();
        for c in &g.contracts {
            state.entry("sys_contracts".into()).or_default().insert(
                vec![Value::from(c.name.as_str())],
                vec![Value::from(c.name.as_str()), Value::Int(1), Value::from(c.body.as_str()), Value::from(c.roles.join(","))],
            );
        }
        state.entry("sys_users".into()).or_default().insert(
            vec![Value::from("alice")],
            vec![Value::from("alice"), Value::from("o"), Value::from(key.public().to_hex()), Value::from("client"), Value::Bool(false)],
        );
        for i in 0..2 {
            state.entry("accounts".into()).or_default().insert(vec![Value::Int(i)], vec![Value::Int(i), Value::Int(10)]);
        }
        (schemas, HostLibrary::standard(), state, key)
    }

    fn tx(key: &KeyPair, name: &str, args: Vec<Value>, n: u64) -> Transaction {
        Transaction::new_eo(key, "alice", Invocation::new(name, args), n)
    }

    fn balance(t: &Tables, id: i64) -> i64 {
        t["accounts"][&vec![Value::Int(id)]][1].as_int().unwrap()
    }

    #[test]
    fn finds_the_only_working_order() {
        let (schemas, lib, before, key) = setup();
        // moving 11 out of a balance of 10 only works after the add
        let add = tx(&key, "kv_add", vec![Value::Int(0), Value::Int(1)], 0);
        let mv = tx(&key, "transfer", vec![Value::Int(0), Value::Int(1), Value::Int(11)], 0);
        let mid = apply(&schemas, &lib, &before, &add).unwrap();
        let after = apply(&schemas, &lib, &mid, &mv).unwrap();
        assert_eq!((balance(&after, 0), balance(&after, 1)), (0, 21));
        let txs = vec![mv, add];
        assert_eq!(find_serial_order(&schemas, &lib, &before, &after, &txs), Some(vec![1, 0]));
    }

    #[test]
    fn lost_update_has_no_serial_order() {
        let (schemas, lib, before, key) = setup();
        // both read 10 and the second write hides the first
        let a = tx(&key, "kv_add", vec![Value::Int(0), Value::Int(1)], 0);
        let b = tx(&key, "kv_add", vec![Value::Int(0), Value::Int(2)], 0);
        let mut after = before.clone();
        after.get_mut("accounts").unwrap().insert(vec![Value::Int(0)], vec![Value::Int(0), Value::Int(12)]);
        assert_eq!(find_serial_order(&schemas, &lib, &before, &after, &[a, b]), None);
    }

    #[test]
    fn empty_block_needs_equal_states() {
        let (schemas, lib, before, _) = setup();
        assert_eq!(find_serial_order(&schemas, &lib, &before, &before, &[]), Some(vec![]));
    }
}
