use crate::mvstore::{LocalTxId, Store, StoreError, VersionRef};

/// Lock-free write-write resolution: the first claimant of `version` to
/// commit keeps it, every other claimant must abort.
pub fn resolve_ww(store: &Store, version: VersionRef, committer: LocalTxId) -> Result<Vec<LocalTxId>, StoreError> {
    store.resolve_xmax(version, committer)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mvstore::{ColumnType, SnapshotSpec, TableSchema, Value};

    fn contested(writers: &[LocalTxId]) -> (Store, VersionRef) {
        let s = Store::new();
        s.create_table(TableSchema::new("t", &[("k", ColumnType::Integer)], &["k"])).unwrap();
        let v = s.bootstrap_insert("t", vec![Value::Int(1)]).unwrap();
        for &w in writers {
            s.delete(&SnapshotSpec::at_height(0, w), v).unwrap();
        }
        (s, v)
    }

    #[test]
    fn single_claimant_has_no_victims() {
        let (s, v) = contested(&[1]);
        assert!(resolve_ww(&s, v, 1).unwrap().is_empty());
    }

    #[test]
    fn first_in_order_survives_for_every_order() {
        let ids = [1, 2, 3];
        for first in ids {
            let (s, v) = contested(&ids);
            let victims = resolve_ww(&s, v, first).unwrap();
            let expect: Vec<_> = ids.iter().copied().filter(|&x| x != first).collect();
            assert_eq!(victims, expect);
            assert_eq!(s.version(v).unwrap().xmax.into_iter().collect::<Vec<_>>(), vec![first]);
        }
    }

    #[test]
    fn resolution_after_commit_is_lost_update() {
        let (s, v) = contested(&[1, 2]);
        resolve_ww(&s, v, 1).unwrap();
        let ws = crate::mvstore::WriteSet {
            ops: vec![crate::mvstore::WriteOp {
                kind: crate::mvstore::WriteKind::Delete,
                created: None,
                superseded: Some(v),
            }],
        };
        s.stamp(&ws, 1).unwrap();
        assert_eq!(resolve_ww(&s, v, 2), Err(StoreError::LostUpdate));
    }
}
