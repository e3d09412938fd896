//! Janitor based routing: degree-elected janitors route on behalf of the
//! nodes that chose them, discovering routes by querying neighboring janitors.

mod cache;
mod election;
mod message;
mod node;

pub use cache::{compress_route, is_simple, shorten_route, CacheEntry, RouteCache};
pub use election::{best_neighbor, elect, outranks, Election};
pub use message::{Affiliation, JbrMessage};
pub use node::{JbrCounters, JbrNode, JbrParams, JbrTimer, Member, NeighborInfo, Role};

#[cfg(test)]
mod tests;
