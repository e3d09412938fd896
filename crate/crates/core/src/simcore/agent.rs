//! The contract between the engine and per-node routing state machines.
//!
//! A routing agent never touches the clock, the radio or other nodes. Each
//! callback receives a [`NodeCtx`] describing the node's local view (time and
//! current link-layer neighbors) and records its outputs into it as
//! [`Action`]s, which the engine then carries out.

use std::collections::BTreeSet;
use std::fmt::Debug;

use super::NodeId;
use crate::config::WireSizes;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PacketId(pub u64);

/// An application packet handed to the routing layer by a traffic flow.
#[derive(Debug, Clone, PartialEq)]
pub struct DataPacket {
    pub id: PacketId,
    pub flow: u32,
    pub source: NodeId,
    pub destination: NodeId,
    pub payload_bytes: u32,
    pub created_at: f64,
    /// Route recoveries this packet has already triggered.
    pub recoveries: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dest {
    Unicast(NodeId),
    Broadcast,
    /// Unicast to the given node, also overheard by every other neighbor.
    Overheard(NodeId),
}

/// Identity of a janitor route query: (origin janitor, destination, sequence).
pub type QueryKey = (NodeId, NodeId, u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum DropReason {
    BufferOverflow,
    NoRoute,
    Unreachable,
    ReturnPathBroken,
    TooManyRecoveries,
    HopLimit,
    Stranded,
}

impl DropReason {
    pub fn as_str(self) -> &'static str {
        match self {
            DropReason::BufferOverflow => "buffer_overflow",
            DropReason::NoRoute => "no_route",
            DropReason::Unreachable => "unreachable",
            DropReason::ReturnPathBroken => "return_path_broken",
            DropReason::TooManyRecoveries => "too_many_recoveries",
            DropReason::HopLimit => "hop_limit",
            DropReason::Stranded => "stranded",
        }
    }
}

/// Protocol-level observations the engine aggregates into statistics.
#[derive(Debug, Clone, PartialEq)]
pub enum Report {
    Delivered(PacketId),
    Dropped(PacketId, DropReason),
    /// The source of a flow learned that `destination` cannot be reached.
    Unreachable {
        source: NodeId,
        destination: NodeId,
    },
    /// A route discovery finished after `latency` seconds.
    RouteFound {
        latency: f64,
    },
    /// A route was written into `owner`'s cache.
    CacheInsert {
        owner: NodeId,
        route: Vec<NodeId>,
    },
    QueryProcessed {
        janitor: NodeId,
        query: QueryKey,
    },
    HelloStarted,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Action<M, T> {
    Send {
        dest: Dest,
        msg: M,
    },
    /// Arms `timer`, replacing it if it is already armed.
    SetTimer {
        timer: T,
        delay: f64,
    },
    CancelTimer(T),
    Report(Report),
}

/// Local view handed to every agent callback.
pub struct NodeCtx<'a, M, T> {
    pub now: f64,
    pub node: NodeId,
    pub neighbors: &'a BTreeSet<NodeId>,
    actions: &'a mut Vec<Action<M, T>>,
}

impl<'a, M, T> NodeCtx<'a, M, T> {
    pub fn new(
        now: f64,
        node: NodeId,
        neighbors: &'a BTreeSet<NodeId>,
        actions: &'a mut Vec<Action<M, T>>,
    ) -> Self {
        Self {
            now,
            node,
            neighbors,
            actions,
        }
    }

    pub fn degree(&self) -> u32 {
        self.neighbors.len() as u32
    }

    pub fn is_neighbor(&self, v: NodeId) -> bool {
        self.neighbors.contains(&v)
    }

    pub fn unicast(&mut self, to: NodeId, msg: M) {
        self.actions.push(Action::Send {
            dest: Dest::Unicast(to),
            msg,
        });
    }

    pub fn broadcast(&mut self, msg: M) {
        self.actions.push(Action::Send {
            dest: Dest::Broadcast,
            msg,
        });
    }

    pub fn send_overheard(&mut self, to: NodeId, msg: M) {
        self.actions.push(Action::Send {
            dest: Dest::Overheard(to),
            msg,
        });
    }

    pub fn set_timer(&mut self, timer: T, delay: f64) {
        self.actions.push(Action::SetTimer { timer, delay });
    }

    pub fn cancel_timer(&mut self, timer: T) {
        self.actions.push(Action::CancelTimer(timer));
    }

    pub fn report(&mut self, report: Report) {
        self.actions.push(Action::Report(report));
    }
}

pub trait WireMessage: Clone + Debug {
    /// Stable kind name used for per-kind tallies and traces.
    fn kind(&self) -> &'static str;
    fn wire_size(&self, sizes: &WireSizes) -> u32;
    /// Everything except application data and its acknowledgements.
    fn is_control(&self) -> bool;
    /// One-line description for traces.
    fn describe(&self) -> String {
        format!("{:?}", self)
    }
}

pub trait Agent {
    type Msg: WireMessage;
    type Timer: Copy + Eq + Ord + Debug;

    fn protocol_name(&self) -> &'static str;
    fn start(&mut self, ctx: &mut NodeCtx<Self::Msg, Self::Timer>);
    fn on_message(
        &mut self,
        ctx: &mut NodeCtx<Self::Msg, Self::Timer>,
        from: NodeId,
        msg: Self::Msg,
    );
    /// A unicast between two other nodes was heard on the air.
    fn on_overheard(
        &mut self,
        _ctx: &mut NodeCtx<Self::Msg, Self::Timer>,
        _from: NodeId,
        _to: NodeId,
        _msg: &Self::Msg,
    ) {
    }
    fn on_timer(&mut self, ctx: &mut NodeCtx<Self::Msg, Self::Timer>, timer: Self::Timer);
    fn on_link_change(
        &mut self,
        _ctx: &mut NodeCtx<Self::Msg, Self::Timer>,
        _up: &[NodeId],
        _down: &[NodeId],
    ) {
    }
    fn originate(&mut self, ctx: &mut NodeCtx<Self::Msg, Self::Timer>, packet: DataPacket);
    /// Local state invariants; checked by the engine after every callback.
    fn check_invariants(&self) -> Result<(), String> {
        Ok(())
    }
}
