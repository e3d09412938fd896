//! JBR wire messages.

use crate::config::WireSizes;
use crate::simcore::{DataPacket, NodeId, PacketId, QueryKey, WireMessage};

/// What a node believes about one neighbor's place in the janitor structure.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Affiliation {
    pub janitor: bool,
    pub my_janitor: Option<NodeId>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum JbrMessage {
    Hello {
        degree: u32,
        affiliation: Affiliation,
    },
    HelloReply {
        degree: u32,
        affiliation: Affiliation,
    },
    NewJanitor {
        degree: u32,
    },
    /// Keepalive from a covered node. The first one after an election
    /// doubles as registration. Carries the sender's neighborhood so the
    /// janitor knows its two-hop zone.
    JanitorAliveRequest {
        degree: u32,
        neighbors: Vec<(NodeId, Affiliation)>,
    },
    JanitorAliveReply {
        degree: u32,
    },
    /// `route` is `None` only on the hop from a source to its janitor;
    /// otherwise `hop` is the receiver's index in `route`.
    Data {
        packet: DataPacket,
        route: Option<Vec<NodeId>>,
        hop: u32,
        /// Neighbor affiliations, piggybacked on packets handed to the janitor.
        report: Vec<(NodeId, Affiliation)>,
    },
    Ack {
        flow: u32,
        packet: PacketId,
        janitor_alive: bool,
    },
    /// Travels between janitors over relay paths. `trail` lists every node
    /// that transmitted this copy, `to_go` the relays still ahead.
    RouteQuery {
        key: QueryKey,
        destination: NodeId,
        visited: Vec<NodeId>,
        chain: Vec<NodeId>,
        trail: Vec<NodeId>,
        to_go: Vec<NodeId>,
    },
    RouteReply {
        key: QueryKey,
        destination: NodeId,
        route: Vec<NodeId>,
        back: Vec<NodeId>,
    },
    RouteError {
        link: (NodeId, NodeId),
        packet: DataPacket,
        back: Vec<NodeId>,
    },
    /// With a query key: a janitor tells its parent that its branch failed.
    /// Without: a janitor tells a source that `destination` is unreachable.
    RouteUnreachable {
        key: Option<QueryKey>,
        destination: NodeId,
        origin: NodeId,
        back: Vec<NodeId>,
    },
}

impl WireMessage for JbrMessage {
    fn kind(&self) -> &'static str {
        match self {
            JbrMessage::Hello { .. } => "Hello",
            JbrMessage::HelloReply { .. } => "HelloReply",
            JbrMessage::NewJanitor { .. } => "NewJanitor",
            JbrMessage::JanitorAliveRequest { .. } => "JanitorAliveRequest",
            JbrMessage::JanitorAliveReply { .. } => "JanitorAliveReply",
            JbrMessage::Data { .. } => "Data",
            JbrMessage::Ack { .. } => "Ack",
            JbrMessage::RouteQuery { .. } => "RouteQuery",
            JbrMessage::RouteReply { .. } => "RouteReply",
            JbrMessage::RouteError { .. } => "RouteError",
            JbrMessage::RouteUnreachable { .. } => "RouteUnreachable",
        }
    }

    fn wire_size(&self, s: &WireSizes) -> u32 {
        let entries = |n: usize| s.per_entry * n as u32;
        match self {
            JbrMessage::Hello { .. } => s.hello,
            JbrMessage::HelloReply { .. } => s.hello_reply,
            JbrMessage::NewJanitor { .. } => s.new_janitor,
            JbrMessage::JanitorAliveRequest { neighbors, .. } => {
                s.alive_request + entries(neighbors.len())
            }
            JbrMessage::JanitorAliveReply { .. } => s.alive_reply,
            JbrMessage::Data {
                packet,
                route,
                report,
                ..
            } => {
                s.data_header
                    + packet.payload_bytes
                    + entries(route.as_ref().map_or(0, Vec::len) + report.len())
            }
            JbrMessage::Ack { .. } => s.ack,
            JbrMessage::RouteQuery { visited, .. } => s.route_query + entries(visited.len()),
            JbrMessage::RouteReply { route, .. } => s.route_reply + entries(route.len()),
            JbrMessage::RouteError { .. } => s.route_error,
            JbrMessage::RouteUnreachable { .. } => s.route_unreachable,
        }
    }

    fn is_control(&self) -> bool {
        !matches!(self, JbrMessage::Data { .. } | JbrMessage::Ack { .. })
    }

    fn describe(&self) -> String {
        let list = |v: &[NodeId]| {
            v.iter()
                .map(|n| n.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        match self {
            JbrMessage::Hello { degree, .. } | JbrMessage::HelloReply { degree, .. } => {
                format!("{} degree={degree}", self.kind())
            }
            JbrMessage::NewJanitor { degree } => format!("NewJanitor degree={degree}"),
            JbrMessage::JanitorAliveRequest { neighbors, .. } => {
                format!("JanitorAliveRequest entries={}", neighbors.len())
            }
            JbrMessage::JanitorAliveReply { .. } => "JanitorAliveReply".to_string(),
            JbrMessage::Data {
                packet, route, hop, ..
            } => match route {
                Some(r) => format!("Data packet={} hop={hop} route=[{}]", packet.id.0, list(r)),
                None => format!("Data packet={} to_janitor", packet.id.0),
            },
            JbrMessage::Ack { packet, .. } => format!("Ack packet={}", packet.0),
            JbrMessage::RouteQuery { key, trail, .. } => {
                format!(
                    "RouteQuery key={}:{}:{} trail=[{}]",
                    key.0,
                    key.1,
                    key.2,
                    list(trail)
                )
            }
            JbrMessage::RouteReply { key, route, .. } => {
                format!(
                    "RouteReply key={}:{}:{} route=[{}]",
                    key.0,
                    key.1,
                    key.2,
                    list(route)
                )
            }
            JbrMessage::RouteError { link, packet, .. } => {
                format!(
                    "RouteError link={}-{} packet={}",
                    link.0, link.1, packet.id.0
                )
            }
            JbrMessage::RouteUnreachable {
                destination,
                origin,
                ..
            } => {
                format!("RouteUnreachable destination={destination} origin={origin}")
            }
        }
    }
}
