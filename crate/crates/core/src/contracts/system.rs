use serde::{Deserialize, Serialize};

use super::builtin::BUILTIN_CONTRACTS;
use super::ContractDef;
use crate::crypto::PublicKey;
use crate::mvstore::{ColumnType, Row, Store, StoreError, TableSchema, Value};

/// Upper bound for full-range scans over text keys.
pub const MAX_TEXT: &str = "\u{10FFFF}";

pub fn system_tables() -> Vec<TableSchema> {
    use ColumnType::*;
    vec![
        TableSchema::new("sys_orgs", &[("org", Text)], &["org"]),
        TableSchema::new(
            "sys_users",
            &[("username", Text), ("org", Text), ("pubkey", Text), ("roles", Text), ("admin", Boolean)],
            &["username"],
        )
        .with_index(&["org"]),
        TableSchema::new(
            "sys_contracts",
            &[("name", Text), ("version", Integer), ("body", Text), ("roles", Text)],
            &["name"],
        ),
        TableSchema::new(
            "sys_deployments",
            &[
                ("proposal", Text),
                ("action", Text),
                ("contract", Text),
                ("body", Text),
                ("roles", Text),
                ("state", Text),
                ("proposer", Text),
            ],
            &["proposal"],
        ),
        TableSchema::new(
            "sys_votes",
            &[("proposal", Text), ("admin", Text), ("kind", Text), ("org", Text), ("reason", Text)],
            &["proposal", "admin", "kind"],
        ),
        TableSchema::new(
            "sys_comments",
            &[("proposal", Text), ("admin", Text), ("body", Text)],
            &["proposal", "admin", "body"],
        ),
    ]
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenesisUser {
    pub username: String,
    pub org: String,
    pub pubkey: PublicKey,
    pub roles: Vec<String>,
    pub admin: bool,
}

/// Initial state shared by every replica.
#[derive(Clone, Debug, Default)]
pub struct Genesis {
    pub orgs: Vec<String>,
    pub users: Vec<GenesisUser>,
    pub tables: Vec<TableSchema>,
    pub rows: Vec<(String, Row)>,
    pub contracts: Vec<ContractDef>,
}

impl Genesis {
    /// Genesis with all built-in contracts installed.
    pub fn with_builtins() -> Self {
        let contracts = BUILTIN_CONTRACTS
            .iter()
            .map(|(name, roles)| ContractDef {
                name: (*name).to_owned(),
                version: 1,
                body: (*name).to_owned(),
                roles: roles.split(',').map(str::to_owned).collect(),
            })
            .collect();
        Self { contracts, ..Self::default() }
    }
}

pub fn bootstrap(store: &Store, g: &Genesis) -> Result<(), StoreError> {
    for t in system_tables().into_iter().chain(g.tables.iter().cloned()) {
        store.create_table(t)?;
    }
    for o in &g.orgs {
        store.bootstrap_insert("sys_orgs", vec![Value::from(o.as_str())])?;
    }
    for u in &g.users {
        store.bootstrap_insert(
            "sys_users",
            vec![
                Value::from(u.username.as_str()),
                Value::from(u.org.as_str()),
                Value::from(u.pubkey.to_hex()),
                Value::from(u.roles.join(",")),
                Value::Bool(u.admin),
            ],
        )?;
    }
    for c in &g.contracts {
        store.bootstrap_insert(
            "sys_contracts",
            vec![
                Value::from(c.name.as_str()),
                Value::Int(c.version),
                Value::from(c.body.as_str()),
                Value::from(c.roles.join(",")),
            ],
        )?;
    }
    for (t, r) in &g.rows {
        store.bootstrap_insert(t, r.clone())?;
    }
    Ok(())
}
