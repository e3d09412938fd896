//! On-demand flooding baseline: the source floods a request, the target
//! answers along the reverse path, and data follows the discovered source
//! route. Shares the engine's accounting with JBR.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::config::{ScenarioConfig, WireSizes};
use crate::jbr::{shorten_route, RouteCache};
use crate::simcore::{Agent, DataPacket, DropReason, NodeCtx, NodeId, Report, WireMessage};

type Ctx<'a> = NodeCtx<'a, FloodMessage, FloodTimer>;

/// Request identity: (source, sequence).
pub type RequestId = (NodeId, u32);

#[derive(Debug, Clone, PartialEq)]
pub enum FloodMessage {
    FloodRequest {
        id: RequestId,
        destination: NodeId,
        route: Vec<NodeId>,
    },
    FloodReply {
        id: RequestId,
        route: Vec<NodeId>,
        back: Vec<NodeId>,
    },
    FloodData {
        packet: DataPacket,
        route: Vec<NodeId>,
        hop: u32,
    },
    FloodError {
        link: (NodeId, NodeId),
        packet: DataPacket,
        back: Vec<NodeId>,
    },
}

impl WireMessage for FloodMessage {
    fn kind(&self) -> &'static str {
        match self {
            FloodMessage::FloodRequest { .. } => "FloodRequest",
            FloodMessage::FloodReply { .. } => "FloodReply",
            FloodMessage::FloodData { .. } => "FloodData",
            FloodMessage::FloodError { .. } => "FloodError",
        }
    }

    fn wire_size(&self, s: &WireSizes) -> u32 {
        let entries = |n: usize| s.per_entry * n as u32;
        match self {
            FloodMessage::FloodRequest { route, .. } => s.flood_request + entries(route.len()),
            FloodMessage::FloodReply { route, .. } => s.flood_reply + entries(route.len()),
            FloodMessage::FloodData { packet, route, .. } => {
                s.data_header + packet.payload_bytes + entries(route.len())
            }
            FloodMessage::FloodError { .. } => s.flood_error,
        }
    }

    fn is_control(&self) -> bool {
        !matches!(self, FloodMessage::FloodData { .. })
    }

    fn describe(&self) -> String {
        let list = |v: &[NodeId]| {
            v.iter()
                .map(|n| n.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        match self {
            FloodMessage::FloodRequest {
                id,
                destination,
                route,
            } => {
                format!(
                    "FloodRequest id={}:{} destination={destination} route=[{}]",
                    id.0,
                    id.1,
                    list(route)
                )
            }
            FloodMessage::FloodReply { id, route, .. } => {
                format!("FloodReply id={}:{} route=[{}]", id.0, id.1, list(route))
            }
            FloodMessage::FloodData { packet, route, hop } => {
                format!(
                    "FloodData packet={} hop={hop} route=[{}]",
                    packet.id.0,
                    list(route)
                )
            }
            FloodMessage::FloodError { link, packet, .. } => {
                format!(
                    "FloodError link={}-{} packet={}",
                    link.0, link.1, packet.id.0
                )
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum FloodTimer {
    /// Reply deadline of a discovery, by request sequence.
    Request(u32),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FloodParams {
    pub hop_limit: u32,
    pub request_timeout: f64,
    pub request_retries: u32,
    pub pending_capacity: usize,
    pub max_recoveries: u32,
}

impl FloodParams {
    pub fn from_config(c: &ScenarioConfig) -> Self {
        Self {
            hop_limit: c.hop_limit,
            request_timeout: c.request_timeout,
            request_retries: c.request_retries,
            pending_capacity: c.pending_capacity,
            max_recoveries: c.max_recoveries,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Discovery {
    seq: u32,
    attempts: u32,
    started: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FloodCounters {
    pub floods_started: u64,
    pub failed_discoveries: u64,
}

#[derive(Debug, Clone)]
pub struct FloodNode {
    id: NodeId,
    params: FloodParams,
    seen: BTreeSet<RequestId>,
    cache: RouteCache,
    pending: BTreeMap<NodeId, VecDeque<DataPacket>>,
    discovery: BTreeMap<NodeId, Discovery>,
    next_seq: u32,
    counters: FloodCounters,
}

impl FloodNode {
    pub fn new(id: NodeId, params: FloodParams) -> Self {
        Self {
            id,
            params,
            seen: BTreeSet::new(),
            cache: RouteCache::new(id),
            pending: BTreeMap::new(),
            discovery: BTreeMap::new(),
            next_seq: 0,
            counters: FloodCounters::default(),
        }
    }

    pub fn for_scenario(config: &ScenarioConfig) -> Vec<Self> {
        let params = FloodParams::from_config(config);
        (0..config.node_count)
            .map(|i| Self::new(NodeId::from(i), params))
            .collect()
    }

    pub fn cache(&self) -> &RouteCache {
        &self.cache
    }

    pub fn counters(&self) -> FloodCounters {
        self.counters
    }

    fn send(&mut self, ctx: &mut Ctx, packet: DataPacket) {
        let d = packet.destination;
        if d == self.id {
            ctx.report(Report::Delivered(packet.id));
            return;
        }
        let route = if ctx.is_neighbor(d) {
            Some(vec![self.id, d])
        } else {
            self.cache.lookup(d, ctx.neighbors).map(<[NodeId]>::to_vec)
        };
        if let Some(route) = route {
            self.forward(ctx, packet, route, 0);
            return;
        }
        let queue = self.pending.entry(d).or_default();
        if queue.len() >= self.params.pending_capacity {
            if let Some(old) = queue.pop_front() {
                ctx.report(Report::Dropped(old.id, DropReason::BufferOverflow));
            }
        }
        queue.push_back(packet);
        if !self.discovery.contains_key(&d) {
            self.flood_discover(ctx, d, 0, ctx.now);
        }
    }

    /// Broadcasts a fresh request for `destination`.
    pub fn flood_discover(
        &mut self,
        ctx: &mut Ctx,
        destination: NodeId,
        attempts: u32,
        started: f64,
    ) {
        self.next_seq += 1;
        let seq = self.next_seq;
        let id = (self.id, seq);
        self.seen.insert(id);
        self.counters.floods_started += 1;
        self.discovery.insert(
            destination,
            Discovery {
                seq,
                attempts,
                started,
            },
        );
        ctx.broadcast(FloodMessage::FloodRequest {
            id,
            destination,
            route: vec![self.id],
        });
        ctx.set_timer(FloodTimer::Request(seq), self.params.request_timeout);
    }

    fn forward(&mut self, ctx: &mut Ctx, packet: DataPacket, mut route: Vec<NodeId>, at: usize) {
        if at + 1 >= route.len() {
            ctx.report(Report::Delivered(packet.id));
            return;
        }
        shorten_route(&mut route, at, ctx.neighbors);
        let next = route[at + 1];
        if ctx.is_neighbor(next) {
            ctx.unicast(
                next,
                FloodMessage::FloodData {
                    packet,
                    route,
                    hop: (at + 1) as u32,
                },
            );
            return;
        }
        // next hop gone: tell the source
        let link = (route[at], next);
        self.cache.purge_link(link.0, link.1);
        let mut back: Vec<NodeId> = route[..at].iter().rev().copied().collect();
        if back.is_empty() {
            self.recover(ctx, packet);
            return;
        }
        let first = back.remove(0);
        if ctx.is_neighbor(first) {
            ctx.unicast(first, FloodMessage::FloodError { link, packet, back });
        } else {
            ctx.report(Report::Dropped(packet.id, DropReason::ReturnPathBroken));
        }
    }

    fn recover(&mut self, ctx: &mut Ctx, mut packet: DataPacket) {
        packet.recoveries += 1;
        if packet.recoveries > self.params.max_recoveries {
            ctx.report(Report::Dropped(packet.id, DropReason::TooManyRecoveries));
        } else {
            self.send(ctx, packet);
        }
    }

    fn on_request(
        &mut self,
        ctx: &mut Ctx,
        id: RequestId,
        destination: NodeId,
        mut route: Vec<NodeId>,
    ) {
        if !self.seen.insert(id) {
            return;
        }
        route.push(self.id);
        if destination == self.id {
            let mut back: Vec<NodeId> = route[..route.len() - 1].iter().rev().copied().collect();
            let next = back.remove(0);
            if ctx.is_neighbor(next) {
                ctx.unicast(next, FloodMessage::FloodReply { id, route, back });
            }
        } else if (route.len() as u32 - 1) < self.params.hop_limit {
            ctx.broadcast(FloodMessage::FloodRequest {
                id,
                destination,
                route,
            });
        }
    }

    fn on_reply(
        &mut self,
        ctx: &mut Ctx,
        id: RequestId,
        route: Vec<NodeId>,
        mut back: Vec<NodeId>,
    ) {
        if let Some(next) = (!back.is_empty()).then(|| back.remove(0)) {
            if ctx.is_neighbor(next) {
                ctx.unicast(next, FloodMessage::FloodReply { id, route, back });
            }
            return;
        }
        let Some(&d) = route.last() else {
            return;
        };
        let Some(disc) = self.discovery.get(&d).copied() else {
            return;
        };
        if self.cache.insert(route.clone(), ctx.now) {
            ctx.report(Report::CacheInsert {
                owner: self.id,
                route: route.clone(),
            });
        }
        self.discovery.remove(&d);
        ctx.cancel_timer(FloodTimer::Request(disc.seq));
        ctx.report(Report::RouteFound {
            latency: ctx.now - disc.started,
        });
        let packets: Vec<DataPacket> = self.pending.remove(&d).unwrap_or_default().into();
        for p in packets {
            self.send(ctx, p);
        }
    }

    fn on_timeout(&mut self, ctx: &mut Ctx, seq: u32) {
        let Some((&d, &disc)) = self.discovery.iter().find(|(_, disc)| disc.seq == seq) else {
            return;
        };
        if disc.attempts < self.params.request_retries {
            self.flood_discover(ctx, d, disc.attempts + 1, disc.started);
            return;
        }
        self.discovery.remove(&d);
        self.counters.failed_discoveries += 1;
        for p in self.pending.remove(&d).unwrap_or_default() {
            ctx.report(Report::Dropped(p.id, DropReason::Unreachable));
        }
        ctx.report(Report::Unreachable {
            source: self.id,
            destination: d,
        });
    }
}

impl Agent for FloodNode {
    type Msg = FloodMessage;
    type Timer = FloodTimer;

    fn protocol_name(&self) -> &'static str {
        "flood"
    }

    fn start(&mut self, _ctx: &mut Ctx) {}

    fn on_message(&mut self, ctx: &mut Ctx, _from: NodeId, msg: FloodMessage) {
        match msg {
            FloodMessage::FloodRequest {
                id,
                destination,
                route,
            } => self.on_request(ctx, id, destination, route),
            FloodMessage::FloodReply { id, route, back } => self.on_reply(ctx, id, route, back),
            FloodMessage::FloodData { packet, route, hop } => {
                let at = hop as usize;
                if route.get(at) == Some(&self.id) {
                    self.forward(ctx, packet, route, at);
                } else {
                    ctx.report(Report::Dropped(packet.id, DropReason::NoRoute));
                }
            }
            FloodMessage::FloodError {
                link,
                packet,
                mut back,
            } => {
                self.cache.purge_link(link.0, link.1);
                if back.is_empty() {
                    self.recover(ctx, packet);
                    return;
                }
                let next = back.remove(0);
                if ctx.is_neighbor(next) {
                    ctx.unicast(next, FloodMessage::FloodError { link, packet, back });
                } else {
                    ctx.report(Report::Dropped(packet.id, DropReason::ReturnPathBroken));
                }
            }
        }
    }

    fn on_timer(&mut self, ctx: &mut Ctx, timer: FloodTimer) {
        let FloodTimer::Request(seq) = timer;
        self.on_timeout(ctx, seq);
    }

    fn originate(&mut self, ctx: &mut Ctx, packet: DataPacket) {
        self.send(ctx, packet);
    }
}
