use std::collections::BTreeMap;

use super::{arg_int, arg_text, ContractError, DataApi, HostLibrary, ReadOrder};
use crate::mvstore::{ColumnType, Decimal, Predicate, Row, TableSchema, Value};

/// Built-in contracts and the roles allowed to call them.
pub const BUILTIN_CONTRACTS: &[(&str, &str)] = &[
    ("simple_insert", "client"),
    ("kv_add", "client"),
    ("transfer", "client"),
    ("complex_join", "client"),
    ("complex_group", "client"),
    ("create_deployTx", "*"),
    ("approve_deployTx", "*"),
    ("reject_deployTx", "*"),
    ("comment_deployTx", "*"),
    ("submit_deployTx", "*"),
    ("add_user", "*"),
    ("update_user", "*"),
    ("delete_user", "*"),
];

pub fn workload_tables() -> Vec<TableSchema> {
    use ColumnType::*;
    vec![
        TableSchema::new("simple", &[("id", Integer), ("val", Text)], &["id"]),
        TableSchema::new("accounts", &[("id", Integer), ("balance", Integer)], &["id"]),
        TableSchema::new("customers", &[("id", Integer), ("region", Integer)], &["id"]).with_index(&["region"]),
        TableSchema::new("orders", &[("id", Integer), ("customer", Integer), ("amount", Decimal)], &["id"])
            .with_index(&["customer"]),
        TableSchema::new(
            "join_results",
            &[("key", Integer), ("region", Integer), ("total", Decimal), ("orders", Integer)],
            &["key"],
        ),
        TableSchema::new("readings", &[("id", Integer), ("grp", Integer), ("sub", Integer), ("val", Decimal)], &["id"])
            .with_index(&["grp", "sub"]),
        TableSchema::new(
            "group_results",
            &[("key", Integer), ("grp", Integer), ("best_sub", Integer), ("best_total", Decimal)],
            &["key"],
        ),
    ]
}

pub const REGIONS: i64 = 4;
const CUSTOMERS: i64 = 20;
const ORDERS: i64 = 120;
const READINGS: i64 = 200;

/// Deterministic seed rows for the workload tables.
pub fn seed_workload_tables(accounts: i64, initial_balance: i64) -> Vec<(String, Row)> {
    let mut rows = Vec::new();
    for i in 0..accounts {
        rows.push(("accounts".into(), vec![Value::Int(i), Value::Int(initial_balance)]));
    }
    for i in 0..CUSTOMERS {
        rows.push(("customers".into(), vec![Value::Int(i), Value::Int(i % REGIONS)]));
    }
    for i in 0..ORDERS {
        let amount = Decimal::from_raw((i * 7919 % 100_000) * 10 + 2_500);
        rows.push(("orders".into(), vec![Value::Int(i), Value::Int((i * 7) % CUSTOMERS), Value::Dec(amount)]));
    }
    for i in 0..READINGS {
        let val = Decimal::from_raw((i * 104_729) % 500_000);
        rows.push((
            "readings".into(),
            vec![Value::Int(i), Value::Int(i % REGIONS), Value::Int((i / REGIONS) % 5), Value::Dec(val)],
        ));
    }
    rows
}

pub(super) fn register(lib: &mut HostLibrary) {
    lib.register("simple_insert", simple_insert);
    lib.register("kv_add", kv_add);
    lib.register("transfer", transfer);
    lib.register("complex_join", complex_join);
    lib.register("complex_group", complex_group);
}

fn simple_insert(api: &mut dyn DataApi, args: &[Value]) -> Result<(), ContractError> {
    let id = arg_int(args, 0)?;
    let val = arg_text(args, 1)?;
    api.insert("simple", vec![Value::Int(id), Value::from(val)])
}

fn kv_add(api: &mut dyn DataApi, args: &[Value]) -> Result<(), ContractError> {
    let key = arg_int(args, 0)?;
    let delta = arg_int(args, 1)?;
    match api.select("accounts", &Predicate::eq("id", key))?.into_iter().next() {
        Some((h, row)) => {
            let bal = row[1].as_int().unwrap_or(0);
            let next = bal.checked_add(delta).ok_or_else(|| ContractError::Logical("overflow".into()))?;
            api.update(h, vec![Value::Int(key), Value::Int(next)])
        }
        None => api.insert("accounts", vec![Value::Int(key), Value::Int(delta)]),
    }
}

fn transfer(api: &mut dyn DataApi, args: &[Value]) -> Result<(), ContractError> {
    let from = arg_int(args, 0)?;
    let to = arg_int(args, 1)?;
    let amount = arg_int(args, 2)?;
    if from == to || amount <= 0 {
        return Err(ContractError::BadArgs("transfer needs distinct accounts and a positive amount".into()));
    }
    let mut get = |id: i64| -> Result<_, ContractError> {
        api.select("accounts", &Predicate::eq("id", id))?
            .into_iter()
            .next()
            .ok_or_else(|| ContractError::Logical(format!("no account {id}")))
    };
    let (hf, rf) = get(from)?;
    let (ht, rt) = get(to)?;
    let bf = rf[1].as_int().unwrap_or(0);
    if bf < amount {
        return Err(ContractError::Logical("insufficient funds".into()));
    }
    api.update(hf, vec![Value::Int(from), Value::Int(bf - amount)])?;
    api.update(ht, vec![Value::Int(to), Value::Int(rt[1].as_int().unwrap_or(0) + amount)])
}

/// Joins customers of a region with their orders and stores the total.
fn complex_join(api: &mut dyn DataApi, args: &[Value]) -> Result<(), ContractError> {
    let region = arg_int(args, 0)?;
    let key = arg_int(args, 1)?;
    let mut total = Decimal::default();
    let mut count = 0i64;
    for (_, c) in api.select("customers", &Predicate::eq("region", region))? {
        for (_, o) in api.select("orders", &Predicate::eq("customer", c[0].clone()))? {
            let amt = o[2].as_dec().unwrap_or_default();
            total = total.checked_add(amt).ok_or_else(|| ContractError::Logical("overflow".into()))?;
            count += 1;
        }
    }
    api.insert("join_results", vec![Value::Int(key), Value::Int(region), Value::Dec(total), Value::Int(count)])
}

/// Sums readings per subgroup of a group and stores the largest subgroup.
fn complex_group(api: &mut dyn DataApi, args: &[Value]) -> Result<(), ContractError> {
    let grp = arg_int(args, 0)?;
    let key = arg_int(args, 1)?;
    let mut sums: BTreeMap<i64, Decimal> = BTreeMap::new();
    for (_, r) in api.select("readings", &Predicate::eq("grp", grp))? {
        let e = sums.entry(r[2].as_int().unwrap_or(0)).or_default();
        *e = e.checked_add(r[3].as_dec().unwrap_or_default()).ok_or_else(|| ContractError::Logical("overflow".into()))?;
    }
    // ties go to the lowest subgroup id
    let Some((best_sub, best)) = sums.iter().fold(None, |acc: Option<(i64, Decimal)>, (&s, &v)| match acc {
        Some((_, bv)) if bv >= v => acc,
        _ => Some((s, v)),
    }) else {
        return Err(ContractError::Logical(format!("group {grp} is empty")));
    };
    let first = api.select_limit("readings", &Predicate::eq("grp", grp).and_eq("sub", best_sub), 1, ReadOrder::Index)?;
    debug_assert_eq!(first.len(), 1);
    api.insert("group_results", vec![Value::Int(key), Value::Int(grp), Value::Int(best_sub), Value::Dec(best)])
}
