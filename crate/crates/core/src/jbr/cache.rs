use std::collections::{BTreeMap, BTreeSet};

use crate::simcore::NodeId;

#[derive(Debug, Clone, PartialEq)]
pub struct CacheEntry {
    pub route: Vec<NodeId>,
    pub created_at: f64,
}

/// Janitor route cache: destination to a route starting at the owner.
#[derive(Debug, Clone, PartialEq)]
pub struct RouteCache {
    owner: NodeId,
    entries: BTreeMap<NodeId, CacheEntry>,
}

impl RouteCache {
    pub fn new(owner: NodeId) -> Self {
        Self {
            owner,
            entries: BTreeMap::new(),
        }
    }

    /// Stores `route` for its last node. Rejects routes that do not start at
    /// the owner, are shorter than one hop, or repeat a node.
    pub fn insert(&mut self, route: Vec<NodeId>, now: f64) -> bool {
        if route.len() < 2 || route[0] != self.owner || !is_simple(&route) {
            return false;
        }
        let dest = *route.last().expect("nonempty");
        self.entries.insert(
            dest,
            CacheEntry {
                route,
                created_at: now,
            },
        );
        true
    }

    /// The cached route to `dest`, provided its first hop is still a neighbor.
    pub fn lookup(&self, dest: NodeId, neighbors: &BTreeSet<NodeId>) -> Option<&[NodeId]> {
        self.entries
            .get(&dest)
            .filter(|e| neighbors.contains(&e.route[1]))
            .map(|e| e.route.as_slice())
    }

    /// Drops every route that uses the link `u`-`v` in either direction.
    pub fn purge_link(&mut self, u: NodeId, v: NodeId) -> usize {
        let before = self.entries.len();
        self.entries.retain(|_, e| {
            !e.route
                .windows(2)
                .any(|w| (w[0] == u && w[1] == v) || (w[0] == v && w[1] == u))
        });
        before - self.entries.len()
    }

    pub fn entry(&self, dest: NodeId) -> Option<&CacheEntry> {
        self.entries.get(&dest)
    }

    pub fn remove(&mut self, dest: NodeId) -> bool {
        self.entries.remove(&dest).is_some()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&NodeId, &CacheEntry)> {
        self.entries.iter()
    }
}

pub fn is_simple(route: &[NodeId]) -> bool {
    let mut seen = BTreeSet::new();
    route.iter().all(|n| seen.insert(*n))
}

/// Removes cycles: whenever a node reappears, everything between its two
/// occurrences is cut. Consecutive nodes stay consecutive in the input, so a
/// path stays a path.
pub fn compress_route(route: &[NodeId]) -> Vec<NodeId> {
    let mut out: Vec<NodeId> = Vec::with_capacity(route.len());
    for &n in route {
        if let Some(pos) = out.iter().position(|&m| m == n) {
            out.truncate(pos + 1);
        } else {
            out.push(n);
        }
    }
    out
}

/// Skips ahead when a node further down `route` is already in range of
/// `route[at]`: the hops in between are cut out.
pub fn shorten_route(route: &mut Vec<NodeId>, at: usize, neighbors: &BTreeSet<NodeId>) {
    if let Some(j) = (at + 2..route.len())
        .rev()
        .find(|&j| neighbors.contains(&route[j]))
    {
        route.drain(at + 1..j);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(v: &[u32]) -> Vec<NodeId> {
        v.iter().map(|&i| NodeId(i)).collect()
    }

    #[test]
    fn insert_rules() {
        let mut c = RouteCache::new(NodeId(1));
        assert!(!c.insert(ids(&[2, 3]), 0.0));
        assert!(!c.insert(ids(&[1]), 0.0));
        assert!(!c.insert(ids(&[1, 2, 1, 3]), 0.0));
        assert!(c.insert(ids(&[1, 2, 3]), 0.0));
        assert_eq!(c.len(), 1);
    }

    #[test]
    fn lookup_requires_live_first_hop() {
        let mut c = RouteCache::new(NodeId(1));
        c.insert(ids(&[1, 2, 3, 4]), 0.0);
        let live: BTreeSet<NodeId> = ids(&[2]).into_iter().collect();
        assert_eq!(
            c.lookup(NodeId(4), &live),
            Some(ids(&[1, 2, 3, 4]).as_slice())
        );
        let gone: BTreeSet<NodeId> = ids(&[5]).into_iter().collect();
        assert_eq!(c.lookup(NodeId(4), &gone), None);
    }

    #[test]
    fn purge_removes_routes_with_link() {
        let mut c = RouteCache::new(NodeId(1));
        c.insert(ids(&[1, 2, 3, 4]), 0.0);
        c.insert(ids(&[1, 5, 6]), 0.0);
        assert_eq!(c.purge_link(NodeId(3), NodeId(2)), 1);
        assert_eq!(c.len(), 1);
        assert!(c.entries().all(|(d, _)| *d == NodeId(6)));
    }

    #[test]
    fn shorten_skips_to_farthest_neighbor() {
        let nb: BTreeSet<NodeId> = ids(&[2, 4]).into_iter().collect();
        let mut r = ids(&[0, 1, 2, 3, 4, 5]);
        shorten_route(&mut r, 1, &nb);
        assert_eq!(r, ids(&[0, 1, 4, 5]));
        let mut r = ids(&[0, 1, 2]);
        shorten_route(&mut r, 0, &ids(&[9]).into_iter().collect());
        assert_eq!(r, ids(&[0, 1, 2]));
    }

    #[test]
    fn compress_cuts_cycles() {
        assert_eq!(compress_route(&ids(&[1, 2, 3, 2, 4])), ids(&[1, 2, 4]));
        assert_eq!(compress_route(&ids(&[1, 2, 3, 1, 5])), ids(&[1, 5]));
        assert_eq!(compress_route(&ids(&[1, 2, 3])), ids(&[1, 2, 3]));
    }
}
