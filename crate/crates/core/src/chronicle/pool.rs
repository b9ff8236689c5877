use std::collections::{BTreeMap, BTreeSet};
use std::sync::{Arc, RwLock, RwLockReadGuard, RwLockWriteGuard};

use super::{ChronicleError, ChronicleGraph, Result};

/// Shared, lock-protected Chronicle. Readers proceed concurrently; writers are
/// serialized per Chronicle.
#[derive(Debug, Clone)]
pub struct ChronicleHandle(Arc<RwLock<ChronicleGraph>>);

impl ChronicleHandle {
    pub fn new(graph: ChronicleGraph) -> Self {
        ChronicleHandle(Arc::new(RwLock::new(graph)))
    }

    pub fn read(&self) -> RwLockReadGuard<'_, ChronicleGraph> {
        self.0.read().unwrap_or_else(|e| e.into_inner())
    }

    pub fn write(&self) -> RwLockWriteGuard<'_, ChronicleGraph> {
        self.0.write().unwrap_or_else(|e| e.into_inner())
    }

    /// Immutable copy of the current graph.
    pub fn snapshot(&self) -> ChronicleGraph {
        self.read().clone()
    }
}

#[derive(Debug)]
struct PoolEntry {
    graph: ChronicleHandle,
    consent: BTreeSet<String>,
}

/// Registry of shared Chronicles gated by per-owner consent.
#[derive(Debug, Default)]
pub struct ChroniclePool {
    entries: RwLock<BTreeMap<String, PoolEntry>>,
}

impl ChroniclePool {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers (or replaces) the Chronicle of `graph.owner()`.
    pub fn insert<I, S>(&self, graph: ChronicleGraph, consent: I) -> ChronicleHandle
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let owner = graph.owner().to_string();
        let handle = ChronicleHandle::new(graph);
        let entry = PoolEntry {
            graph: handle.clone(),
            consent: consent.into_iter().map(Into::into).collect(),
        };
        self.entries
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .insert(owner, entry);
        handle
    }

    pub fn grant(&self, owner: &str, grantee: &str) -> Result<()> {
        let mut entries = self.entries.write().unwrap_or_else(|e| e.into_inner());
        let entry = entries
            .get_mut(owner)
            .ok_or_else(|| ChronicleError::NotFound(owner.to_string()))?;
        entry.consent.insert(grantee.to_string());
        Ok(())
    }

    pub fn revoke(&self, owner: &str, grantee: &str) -> Result<()> {
        let mut entries = self.entries.write().unwrap_or_else(|e| e.into_inner());
        let entry = entries
            .get_mut(owner)
            .ok_or_else(|| ChronicleError::NotFound(owner.to_string()))?;
        entry.consent.remove(grantee);
        Ok(())
    }

    pub fn owners(&self) -> Vec<String> {
        self.entries
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .keys()
            .cloned()
            .collect()
    }

    /// Access succeeds iff `requester == owner` or the owner granted consent.
    /// An unknown owner yields [`ChronicleError::NotFound`], never a denial.
    pub fn get(&self, owner: &str, requester: &str) -> Result<ChronicleHandle> {
        let entries = self.entries.read().unwrap_or_else(|e| e.into_inner());
        let entry = entries
            .get(owner)
            .ok_or_else(|| ChronicleError::NotFound(owner.to_string()))?;
        if requester == owner || entry.consent.contains(requester) {
            Ok(entry.graph.clone())
        } else {
            Err(ChronicleError::Denied {
                owner: owner.to_string(),
                requester: requester.to_string(),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pool() -> ChroniclePool {
        let pool = ChroniclePool::new();
        pool.insert(ChronicleGraph::new("user_123"), Vec::<String>::new());
        pool.insert(ChronicleGraph::new("friend_42"), ["user_123"]);
        pool
    }

    #[test]
    fn self_access() {
        assert!(pool().get("user_123", "user_123").is_ok());
    }

    #[test]
    fn consented_friend_access() {
        let h = pool().get("friend_42", "user_123").unwrap();
        assert_eq!(h.read().owner(), "friend_42");
    }

    #[test]
    fn stranger_denied() {
        assert!(matches!(
            pool().get("user_123", "stranger").unwrap_err(),
            ChronicleError::Denied { .. }
        ));
    }

    #[test]
    fn unknown_owner_is_not_found() {
        assert!(matches!(
            pool().get("nobody", "nobody").unwrap_err(),
            ChronicleError::NotFound(_)
        ));
    }

    #[test]
    fn grant_and_revoke() {
        let p = pool();
        p.grant("user_123", "friend_42").unwrap();
        assert!(p.get("user_123", "friend_42").is_ok());
        p.revoke("user_123", "friend_42").unwrap();
        assert!(p.get("user_123", "friend_42").is_err());
    }

    #[test]
    fn handles_share_state() {
        let p = pool();
        let a = p.get("user_123", "user_123").unwrap();
        let b = p.get("user_123", "user_123").unwrap();
        a.write()
            .add_node(crate::chronicle::ChronicleNode::new("x", ["User"]))
            .unwrap();
        assert!(b.read().node("x").is_some());
    }
}
