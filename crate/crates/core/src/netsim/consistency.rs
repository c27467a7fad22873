use std::collections::BTreeMap;

use super::report::{NodeReport, RunReport};
use crate::codec::Hash256;

type Fingerprint = (Hash256, Hash256, Hash256);

/// Every property violation found in a finished run. Byzantine nodes are
/// only required to be named by an alarm; all other checks cover the
/// remaining nodes.
pub fn assert_consistency(report: &RunReport) -> Vec<String> {
    let mut v = Vec::new();
    let honest: Vec<&NodeReport> = report.nodes.iter().filter(|n| !n.byzantine).collect();

    if let Some((first, rest)) = honest.split_first() {
        for n in rest {
            let common = first.status_vector.len().min(n.status_vector.len());
            for b in 0..common {
                if first.status_vector[b] != n.status_vector[b] {
                    v.push(format!(
                        "status vector of block {} differs: node {} {:?}, node {} {:?}",
                        b + 1,
                        first.id,
                        first.status_vector[b],
                        n.id,
                        n.status_vector[b]
                    ));
                }
            }
        }
    }

    let mut by_height: BTreeMap<u64, BTreeMap<Fingerprint, Vec<u32>>> = BTreeMap::new();
    for n in &honest {
        for c in &n.checkpoints {
            by_height.entry(c.height).or_default().entry((c.write_set_hash, c.state_hash, c.chain_hash)).or_default().push(n.id);
        }
    }
    for (h, groups) in by_height {
        if groups.len() > 1 {
            let nodes: Vec<_> = groups.values().collect();
            v.push(format!("checkpoint {h} differs between honest node groups {nodes:?}"));
        }
    }

    for n in &honest {
        for b in &n.order_violations {
            v.push(format!("node {}: ledger order of block {b} differs from the block", n.id));
        }
        for g in &n.repeated_commits {
            v.push(format!("node {}: transaction {} committed more than once", n.id, g.short()));
        }
    }

    for b in &report.oracle.counterexamples {
        v.push(format!("block {b} has no equivalent serial order"));
    }
    v.extend(report.ww.violations.iter().cloned());

    let byzantine: Vec<u32> = report.nodes.iter().filter(|n| n.byzantine).map(|n| n.id).collect();
    for a in &report.alarms {
        for n in &a.nodes {
            if !byzantine.contains(n) {
                v.push(format!("alarm at height {} names honest node {n}", a.height));
            }
        }
    }
    v
}
