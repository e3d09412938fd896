//! Deterministic discrete-event simulation of a mobile ad hoc network.

mod agent;
mod engine;
mod graph;
mod mobility;
mod queue;
mod stats;

use std::fmt;

pub use agent::{
    Action, Agent, DataPacket, Dest, DropReason, NodeCtx, PacketId, QueryKey, Report, WireMessage,
};
pub use engine::{stream_rng, Flow, Mobility, MobilityCause, ScriptedMove, SimEvent, Simulation};
pub use graph::{ConnectivityGraph, LinkChanges};
pub use mobility::{advance_waypoint, Field, NodeKinematics, Point, WaypointParams};
pub use queue::{EventHandle, EventQueue};
pub use stats::{KindTally, SimStats};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<usize> for NodeId {
    fn from(i: usize) -> Self {
        NodeId(u32::try_from(i).expect("node index fits in u32"))
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}
