//! The local degree rule a node applies after a hello exchange.

use crate::simcore::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Election {
    /// No known neighbor.
    Isolated,
    /// Strictly best in its neighborhood: a janitor with no janitor of its own.
    SelfElected,
    /// Two nodes of degree one facing each other; each is the other's janitor.
    Mutual(NodeId),
    /// Follows the best neighbor.
    Follow(NodeId),
}

/// True if `(da, a)` ranks above `(db, b)`: higher degree, then lower id.
pub fn outranks(da: u32, a: NodeId, db: u32, b: NodeId) -> bool {
    da > db || (da == db && a < b)
}

/// The best-ranked neighbor.
pub fn best_neighbor(neighbors: impl IntoIterator<Item = (NodeId, u32)>) -> Option<(NodeId, u32)> {
    neighbors
        .into_iter()
        .fold(None, |best: Option<(NodeId, u32)>, (n, d)| match best {
            Some((b, db)) if !outranks(d, n, db, b) => Some((b, db)),
            _ => Some((n, d)),
        })
}

pub fn elect(
    me: NodeId,
    my_degree: u32,
    neighbors: impl IntoIterator<Item = (NodeId, u32)>,
) -> Election {
    let Some((b, db)) = best_neighbor(neighbors) else {
        return Election::Isolated;
    };
    if my_degree == 1 && db == 1 {
        Election::Mutual(b)
    } else if outranks(my_degree, me, db, b) {
        Election::SelfElected
    } else {
        Election::Follow(b)
    }
}
