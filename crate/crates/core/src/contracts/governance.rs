//! Deployment governance and user management.
//!
//! A proposal to create, replace or drop a contract is recorded first and
//! only takes effect once admins of every organization have approved it and
//! someone submits it. All steps are ordinary transactions.

use std::collections::BTreeSet;

use super::{arg_bool, arg_text, ContractError, DataApi, HostLibrary, RowRef, MAX_TEXT};
use crate::mvstore::{Predicate, Row, Value};

pub(super) fn register(lib: &mut HostLibrary) {
    lib.register("create_deployTx", create);
    lib.register("approve_deployTx", approve);
    lib.register("reject_deployTx", reject);
    lib.register("comment_deployTx", comment);
    lib.register("submit_deployTx", submit);
    lib.register("add_user", add_user);
    lib.register("update_user", update_user);
    lib.register("delete_user", delete_user);
}

/// Organization of the calling admin.
fn admin_org(api: &mut dyn DataApi) -> Result<String, ContractError> {
    let caller = api.caller().to_owned();
    let rows = api.select("sys_users", &Predicate::eq("username", caller.as_str()))?;
    match rows.first() {
        Some((_, u)) if u[4].as_bool() == Some(true) => Ok(u[1].as_text().unwrap_or_default().to_owned()),
        _ => Err(ContractError::NotAdmin),
    }
}

fn pending_proposal(api: &mut dyn DataApi, id: &str) -> Result<(RowRef, Row), ContractError> {
    let (h, row) = api
        .select("sys_deployments", &Predicate::eq("proposal", id))?
        .into_iter()
        .next()
        .ok_or_else(|| ContractError::UnknownProposal(id.to_owned()))?;
    if row[5].as_text() != Some("pending") {
        return Err(ContractError::ProposalClosed(id.to_owned()));
    }
    Ok((h, row))
}

fn with_state(mut row: Row, state: &str) -> Row {
    row[5] = Value::from(state);
    row
}

fn create(api: &mut dyn DataApi, args: &[Value]) -> Result<(), ContractError> {
    admin_org(api)?;
    let id = arg_text(args, 0)?;
    let action = arg_text(args, 1)?;
    if !matches!(action, "create" | "replace" | "drop") {
        return Err(ContractError::BadArgs(format!("unknown deployment action {action}")));
    }
    let contract = arg_text(args, 2)?;
    let body = arg_text(args, 3).unwrap_or("");
    let roles = arg_text(args, 4).unwrap_or("*");
    let caller = api.caller().to_owned();
    api.insert(
        "sys_deployments",
        vec![
            Value::from(id),
            Value::from(action),
            Value::from(contract),
            Value::from(body),
            Value::from(roles),
            Value::from("pending"),
            Value::from(caller),
        ],
    )
}

fn vote(api: &mut dyn DataApi, id: &str, kind: &str, reason: &str) -> Result<bool, ContractError> {
    let org = admin_org(api)?;
    pending_proposal(api, id)?;
    let caller = api.caller().to_owned();
    let existing = api.select(
        "sys_votes",
        &Predicate::eq("proposal", id).and_eq("admin", caller.as_str()).and_eq("kind", kind),
    )?;
    if !existing.is_empty() {
        return Ok(false);
    }
    api.insert(
        "sys_votes",
        vec![Value::from(id), Value::from(caller), Value::from(kind), Value::from(org), Value::from(reason)],
    )?;
    Ok(true)
}

fn approve(api: &mut dyn DataApi, args: &[Value]) -> Result<(), ContractError> {
    vote(api, arg_text(args, 0)?, "approve", "").map(drop)
}

fn reject(api: &mut dyn DataApi, args: &[Value]) -> Result<(), ContractError> {
    let id = arg_text(args, 0)?;
    vote(api, id, "reject", arg_text(args, 1).unwrap_or(""))?;
    let (h, row) = pending_proposal(api, id)?;
    api.update(h, with_state(row, "rejected"))
}

fn comment(api: &mut dyn DataApi, args: &[Value]) -> Result<(), ContractError> {
    admin_org(api)?;
    let id = arg_text(args, 0)?;
    let text = arg_text(args, 1)?;
    if api.select("sys_deployments", &Predicate::eq("proposal", id))?.is_empty() {
        return Err(ContractError::UnknownProposal(id.to_owned()));
    }
    let caller = api.caller().to_owned();
    let key = Predicate::eq("proposal", id).and_eq("admin", caller.as_str()).and_eq("body", text);
    if api.select("sys_comments", &key)?.is_empty() {
        api.insert("sys_comments", vec![Value::from(id), Value::from(caller), Value::from(text)])?;
    }
    Ok(())
}

fn submit(api: &mut dyn DataApi, args: &[Value]) -> Result<(), ContractError> {
    admin_org(api)?;
    let id = arg_text(args, 0)?;
    let (h, prop) = pending_proposal(api, id)?;
    let orgs: BTreeSet<String> = api
        .select("sys_orgs", &Predicate::between("org", "", MAX_TEXT))?
        .into_iter()
        .map(|(_, r)| r[0].to_string())
        .collect();
    let approved: BTreeSet<String> = api
        .select("sys_votes", &Predicate::eq("proposal", id))?
        .into_iter()
        .filter(|(_, r)| r[2].as_text() == Some("approve"))
        .map(|(_, r)| r[3].to_string())
        .collect();
    let have = orgs.intersection(&approved).count();
    if have < orgs.len() {
        return Err(ContractError::InsufficientApprovals { have, need: orgs.len() });
    }
    let action = prop[1].to_string();
    let name = prop[2].to_string();
    let body = prop[3].clone();
    let roles = prop[4].clone();
    let current = api.select("sys_contracts", &Predicate::eq("name", name.as_str()))?.into_iter().next();
    match (action.as_str(), current) {
        ("create", None) => api.insert("sys_contracts", vec![Value::from(name), Value::Int(1), body, roles])?,
        ("replace", Some((ch, c))) => {
            let version = c[1].as_int().unwrap_or(0) + 1;
            api.update(ch, vec![Value::from(name), Value::Int(version), body, roles])?
        }
        ("drop", Some((ch, _))) => api.delete(ch)?,
        (_, _) => return Err(ContractError::Logical(format!("cannot {action} contract {name}"))),
    }
    api.update(h, with_state(prop, "executed"))
}

fn add_user(api: &mut dyn DataApi, args: &[Value]) -> Result<(), ContractError> {
    admin_org(api)?;
    let row = vec![
        Value::from(arg_text(args, 0)?),
        Value::from(arg_text(args, 1)?),
        Value::from(arg_text(args, 2)?),
        Value::from(arg_text(args, 3)?),
        Value::Bool(arg_bool(args, 4)?),
    ];
    api.insert("sys_users", row)
}

fn update_user(api: &mut dyn DataApi, args: &[Value]) -> Result<(), ContractError> {
    admin_org(api)?;
    let name = arg_text(args, 0)?;
    let roles = arg_text(args, 1)?;
    let (h, mut row) = api
        .select("sys_users", &Predicate::eq("username", name))?
        .into_iter()
        .next()
        .ok_or_else(|| ContractError::Logical(format!("no user {name}")))?;
    row[3] = Value::from(roles);
    api.update(h, row)
}

fn delete_user(api: &mut dyn DataApi, args: &[Value]) -> Result<(), ContractError> {
    admin_org(api)?;
    let name = arg_text(args, 0)?;
    let (h, _) = api
        .select("sys_users", &Predicate::eq("username", name))?
        .into_iter()
        .next()
        .ok_or_else(|| ContractError::Logical(format!("no user {name}")))?;
    api.delete(h)
}
