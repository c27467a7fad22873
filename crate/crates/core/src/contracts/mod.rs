//! Deterministic contract runtime.
//!
//! Contracts are host procedures that see the database only through
//! [`DataApi`]: indexed reads returned in index order, and writes against
//! row handles obtained from those reads. There is no clock, randomness or
//! ambient state on the API, so identical inputs produce identical writes.
//! The active definition of every contract is a row of `sys_contracts`,
//! which makes deployment an ordinary transaction.

mod builtin;
mod governance;
mod system;

use std::collections::BTreeMap;
use std::sync::Arc;

use thiserror::Error;

use crate::mvstore::{Predicate, Row, StoreError, Value};

pub use builtin::{seed_workload_tables, workload_tables, BUILTIN_CONTRACTS, REGIONS};
pub use system::{bootstrap, system_tables, Genesis, GenesisUser, MAX_TEXT};

/// Opaque handle to a row returned by a read.
pub type RowRef = u64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ContractError {
    #[error("unknown contract {0}")]
    UnknownContract(String),
    #[error("{user} may not invoke {contract}")]
    AccessDenied { user: String, contract: String },
    #[error("non-deterministic use of the data api: {0}")]
    DeterminismViolation(String),
    #[error("bad arguments: {0}")]
    BadArgs(String),
    #[error("contract failed: {0}")]
    Logical(String),
    #[error("caller is not an organization admin")]
    NotAdmin,
    #[error("approvals from {have} of {need} organizations")]
    InsufficientApprovals { have: usize, need: usize },
    #[error("unknown proposal {0}")]
    UnknownProposal(String),
    #[error("proposal {0} is already closed")]
    ProposalClosed(String),
    #[error("invalid row handle")]
    BadHandle,
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// What a contract body may do.
pub trait DataApi {
    fn caller(&self) -> &str;

    /// Rows matching `pred`, in index order.
    fn select(&mut self, table: &str, pred: &Predicate) -> Result<Vec<(RowRef, Row)>, ContractError>;

    fn insert(&mut self, table: &str, row: Row) -> Result<(), ContractError>;

    fn update(&mut self, target: RowRef, row: Row) -> Result<(), ContractError>;

    fn delete(&mut self, target: RowRef) -> Result<(), ContractError>;

    /// First `limit` rows. Only index order is allowed, since any other
    /// order could pick different rows on different replicas.
    fn select_limit(
        &mut self,
        table: &str,
        pred: &Predicate,
        limit: usize,
        order: ReadOrder,
    ) -> Result<Vec<(RowRef, Row)>, ContractError> {
        if order == ReadOrder::Unordered {
            return Err(ContractError::DeterminismViolation("LIMIT without index order".into()));
        }
        let mut rows = self.select(table, pred)?;
        rows.truncate(limit);
        Ok(rows)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReadOrder {
    Index,
    Unordered,
}

pub type Body = Arc<dyn Fn(&mut dyn DataApi, &[Value]) -> Result<(), ContractError> + Send + Sync>;

/// Host procedures available as contract bodies, by name.
#[derive(Clone, Default)]
pub struct HostLibrary {
    bodies: BTreeMap<String, Body>,
}

impl std::fmt::Debug for HostLibrary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.bodies.keys()).finish()
    }
}

impl HostLibrary {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Built-in workload, governance and user-management procedures.
    pub fn standard() -> Self {
        let mut lib = Self::empty();
        builtin::register(&mut lib);
        governance::register(&mut lib);
        lib
    }

    pub fn register(
        &mut self,
        name: &str,
        body: impl Fn(&mut dyn DataApi, &[Value]) -> Result<(), ContractError> + Send + Sync + 'static,
    ) {
        self.bodies.insert(name.to_owned(), Arc::new(body));
    }

    pub fn get(&self, name: &str) -> Option<&Body> {
        self.bodies.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.bodies.keys().map(String::as_str)
    }
}

/// Active definition of a contract as stored in `sys_contracts`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContractDef {
    pub name: String,
    pub version: i64,
    pub body: String,
    pub roles: Vec<String>,
}

impl ContractDef {
    fn from_row(row: &[Value]) -> Self {
        Self {
            name: row[0].as_text().unwrap_or_default().to_owned(),
            version: row[1].as_int().unwrap_or_default(),
            body: row[2].as_text().unwrap_or_default().to_owned(),
            roles: split_roles(row[3].as_text().unwrap_or_default()),
        }
    }
}

pub(crate) fn split_roles(s: &str) -> Vec<String> {
    s.split(',').map(str::trim).filter(|r| !r.is_empty()).map(str::to_owned).collect()
}

/// Runs contract `name` for the caller of `api`.
pub fn invoke(api: &mut dyn DataApi, lib: &HostLibrary, name: &str, args: &[Value]) -> Result<(), ContractError> {
    let rows = api.select("sys_contracts", &Predicate::eq("name", name))?;
    let def = match rows.first() {
        Some((_, r)) => ContractDef::from_row(r),
        None => return Err(ContractError::UnknownContract(name.to_owned())),
    };
    if !def.roles.iter().any(|r| r == "*") {
        let caller = api.caller().to_owned();
        let users = api.select("sys_users", &Predicate::eq("username", caller.as_str()))?;
        let allowed = users.first().is_some_and(|(_, u)| {
            let roles = split_roles(u[3].as_text().unwrap_or_default());
            roles.iter().any(|r| def.roles.contains(r))
        });
        if !allowed {
            return Err(ContractError::AccessDenied { user: caller, contract: name.to_owned() });
        }
    }
    let body = lib.get(&def.body).ok_or_else(|| ContractError::UnknownContract(def.body.clone()))?;
    body(api, args)
}

pub(crate) fn arg_int(args: &[Value], i: usize) -> Result<i64, ContractError> {
    args.get(i).and_then(Value::as_int).ok_or_else(|| ContractError::BadArgs(format!("argument {i} must be an integer")))
}

pub(crate) fn arg_text(args: &[Value], i: usize) -> Result<&str, ContractError> {
    args.get(i).and_then(Value::as_text).ok_or_else(|| ContractError::BadArgs(format!("argument {i} must be text")))
}

pub(crate) fn arg_bool(args: &[Value], i: usize) -> Result<bool, ContractError> {
    args.get(i).and_then(Value::as_bool).ok_or_else(|| ContractError::BadArgs(format!("argument {i} must be a boolean")))
}
