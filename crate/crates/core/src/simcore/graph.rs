//! Unit-disk connectivity.

use std::collections::BTreeSet;

use super::mobility::Point;
use super::NodeId;

/// Symmetric adjacency where `u ~ v` iff `distance(u, v) <= range`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConnectivityGraph {
    adjacency: Vec<BTreeSet<NodeId>>,
    epoch: u64,
}

/// Edge differences produced by [`ConnectivityGraph::recompute`]. Each edge
/// appears once with the lower id first.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LinkChanges {
    pub up: Vec<(NodeId, NodeId)>,
    pub down: Vec<(NodeId, NodeId)>,
}

impl LinkChanges {
    pub fn is_empty(&self) -> bool {
        self.up.is_empty() && self.down.is_empty()
    }
}

impl ConnectivityGraph {
    pub fn from_positions(positions: &[Point], range: f64) -> Self {
        let mut g = Self {
            adjacency: vec![BTreeSet::new(); positions.len()],
            epoch: 0,
        };
        g.recompute(positions, range);
        g
    }

    /// Rebuilds adjacency from `positions`. The epoch is bumped only if at
    /// least one edge changed.
    pub fn recompute(&mut self, positions: &[Point], range: f64) -> LinkChanges {
        let n = positions.len();
        let mut next = vec![BTreeSet::new(); n];
        for i in 0..n {
            for j in (i + 1)..n {
                if positions[i].distance(positions[j]) <= range {
                    next[i].insert(NodeId::from(j));
                    next[j].insert(NodeId::from(i));
                }
            }
        }
        let mut changes = LinkChanges::default();
        self.adjacency.resize(n, BTreeSet::new());
        for (i, (old, new)) in self.adjacency.iter().zip(&next).enumerate() {
            let me = NodeId::from(i);
            for &v in new.difference(old).filter(|&&v| v > me) {
                changes.up.push((me, v));
            }
            for &v in old.difference(new).filter(|&&v| v > me) {
                changes.down.push((me, v));
            }
        }
        if !changes.is_empty() {
            self.epoch += 1;
        }
        self.adjacency = next;
        changes
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn neighbors(&self, node: NodeId) -> &BTreeSet<NodeId> {
        &self.adjacency[node.index()]
    }

    pub fn degree(&self, node: NodeId) -> usize {
        self.adjacency[node.index()].len()
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.adjacency
            .get(u.index())
            .is_some_and(|nbrs| nbrs.contains(&v))
    }

    /// Number of active connections of `x` other than `m`.
    pub fn degree_excluding(&self, x: NodeId, m: NodeId) -> usize {
        let nbrs = self.neighbors(x);
        nbrs.len() - usize::from(nbrs.contains(&m))
    }

    /// True if consecutive entries of `route` are adjacent.
    pub fn is_path(&self, route: &[NodeId]) -> bool {
        route.windows(2).all(|w| self.has_edge(w[0], w[1]))
    }

    /// Hop distances from `src` (unreachable nodes are `None`).
    pub fn hop_distances(&self, src: NodeId) -> Vec<Option<u32>> {
        let mut dist = vec![None; self.node_count()];
        let mut frontier = std::collections::VecDeque::from([src]);
        dist[src.index()] = Some(0);
        while let Some(u) = frontier.pop_front() {
            let d = dist[u.index()].unwrap_or(0);
            for &v in self.neighbors(u) {
                if dist[v.index()].is_none() {
                    dist[v.index()] = Some(d + 1);
                    frontier.push_back(v);
                }
            }
        }
        dist
    }

    /// Connected component label per node; labels are dense from 0.
    pub fn components(&self) -> Vec<usize> {
        let mut label = vec![usize::MAX; self.node_count()];
        let mut next = 0;
        for s in 0..self.node_count() {
            if label[s] != usize::MAX {
                continue;
            }
            for (v, d) in self.hop_distances(NodeId::from(s)).into_iter().enumerate() {
                if d.is_some() {
                    label[v] = next;
                }
            }
            next += 1;
        }
        label
    }

    /// Largest finite hop distance between any two nodes.
    pub fn diameter(&self) -> u32 {
        (0..self.node_count())
            .flat_map(|s| self.hop_distances(NodeId::from(s)).into_iter().flatten())
            .max()
            .unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_distance_is_connected() {
        let g = ConnectivityGraph::from_positions(
            &[Point::new(0.0, 0.0), Point::new(250.0, 0.0)],
            250.0,
        );
        assert!(g.has_edge(NodeId(0), NodeId(1)));
        assert!(g.has_edge(NodeId(1), NodeId(0)));
        let g = ConnectivityGraph::from_positions(
            &[Point::new(0.0, 0.0), Point::new(250.000001, 0.0)],
            250.0,
        );
        assert!(!g.has_edge(NodeId(0), NodeId(1)));
    }

    #[test]
    fn lone_node_has_degree_zero() {
        let g = ConnectivityGraph::from_positions(
            &[
                Point::new(0.0, 0.0),
                Point::new(10.0, 0.0),
                Point::new(900.0, 900.0),
            ],
            100.0,
        );
        assert_eq!(g.degree(NodeId(2)), 0);
        assert_eq!(g.degree(NodeId(0)), 1);
    }

    #[test]
    fn degree_excluding_cases() {
        // 0 - 1 - 2, and 3 isolated
        let g = ConnectivityGraph::from_positions(
            &[
                Point::new(0.0, 0.0),
                Point::new(10.0, 0.0),
                Point::new(20.0, 0.0),
                Point::new(500.0, 0.0),
            ],
            10.0,
        );
        assert_eq!(
            g.degree_excluding(NodeId(1), NodeId(3)),
            g.degree(NodeId(1))
        );
        assert_eq!(g.degree_excluding(NodeId(0), NodeId(1)), 0);
        assert_eq!(g.degree_excluding(NodeId(1), NodeId(0)), 1);
    }

    #[test]
    fn diffs_and_epoch() {
        let mut pos = vec![
            Point::new(0.0, 0.0),
            Point::new(5.0, 0.0),
            Point::new(50.0, 0.0),
        ];
        let mut g = ConnectivityGraph::from_positions(&pos, 10.0);
        let e0 = g.epoch();
        assert!(g.recompute(&pos, 10.0).is_empty());
        assert_eq!(g.epoch(), e0);
        pos[2] = Point::new(12.0, 0.0);
        pos[1] = Point::new(30.0, 0.0);
        let ch = g.recompute(&pos, 10.0);
        assert_eq!(ch.down, vec![(NodeId(0), NodeId(1))]);
        assert!(ch.up.is_empty());
        assert_eq!(g.epoch(), e0 + 1);
    }
}
