//! Per-node JBR state machine.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::cache::{compress_route, shorten_route, RouteCache};
use super::election::{best_neighbor, elect, outranks, Election};
use super::message::{Affiliation, JbrMessage};
use crate::config::ScenarioConfig;
use crate::simcore::{Agent, DataPacket, DropReason, NodeCtx, NodeId, QueryKey, Report};

type Ctx<'a, 'b> = NodeCtx<'a, JbrMessage, JbrTimer>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum JbrTimer {
    /// End of the reply collection window of a hello session.
    HelloWindow,
    /// A session that found no neighbor gives up and starts over.
    HelloTimeout,
    Keepalive,
    JanitorIdle,
    /// Safety net for an outstanding route query, by sequence number.
    Query(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Ordinary,
    Janitor,
}

/// Protocol constants taken from the scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JbrParams {
    pub hop_limit: u32,
    pub timer_alive: f64,
    pub timer_janitor_idle: f64,
    pub hello_window: f64,
    pub pending_capacity: usize,
    pub request_timeout: f64,
    /// How long a destination stays marked unreachable after a failed query.
    pub hold_down: f64,
    pub cache_reply_lifetime: f64,
    pub max_recoveries: u32,
}

impl JbrParams {
    pub fn from_config(c: &ScenarioConfig) -> Self {
        Self {
            hop_limit: c.hop_limit,
            timer_alive: c.timer_alive,
            timer_janitor_idle: c.timer_janitor_idle,
            hello_window: 4.0 * c.hop_latency,
            pending_capacity: c.pending_capacity,
            request_timeout: c.request_timeout,
            hold_down: c.request_timeout * f64::from(c.request_retries + 1),
            cache_reply_lifetime: c.cache_reply_lifetime,
            max_recoveries: c.max_recoveries,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborInfo {
    pub degree: u32,
    pub affiliation: Affiliation,
    pub heard_at: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Member {
    pub last_contact: f64,
    pub report: Vec<(NodeId, Affiliation)>,
}

#[derive(Debug, Clone, PartialEq)]
struct QueryState {
    destination: NodeId,
    /// Parent janitor and the relay path back to it; `None` at the origin.
    parent: Option<(NodeId, Vec<NodeId>)>,
    outstanding: usize,
    replied: bool,
    done: bool,
    started: f64,
}

/// Event counts kept for tests and diagnostics.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct JbrCounters {
    pub hello_sessions: u64,
    pub hello_suppressed: u64,
    pub hello_replies_received: u64,
    pub keepalives_sent: u64,
    pub keepalives_suppressed: u64,
    pub queries_originated: u64,
    pub new_janitor_sent: u64,
    pub queries_without_peers: u64,
    pub queries_exhausted: u64,
    pub queries_timed_out: u64,
    pub held_down_packets: u64,
    pub lost_query_copies: u64,
    pub lost_replies: u64,
    pub stale_replies: u64,
}

#[derive(Debug, Clone)]
pub struct JbrNode {
    id: NodeId,
    params: JbrParams,
    role: Role,
    self_elected: bool,
    mutual: bool,
    my_janitor: Option<NodeId>,
    neighbors: BTreeMap<NodeId, NeighborInfo>,
    cache: RouteCache,
    /// Last data or ack exchanged with the janitor.
    last_janitor_contact: f64,
    awaiting_reply: bool,
    hello_active: bool,
    keepalive_armed: bool,
    idle_armed: bool,
    contact_since_idle_check: bool,
    covered: BTreeMap<NodeId, Member>,
    /// Packets waiting for a janitor.
    pending: VecDeque<DataPacket>,
    /// Packets at a janitor waiting for a route, per destination.
    waiting: BTreeMap<NodeId, VecDeque<DataPacket>>,
    active_query: BTreeMap<NodeId, u32>,
    queries: BTreeMap<QueryKey, QueryState>,
    next_seq: u32,
    /// Destinations recently found unreachable, with hold-down expiry.
    hold_down: BTreeMap<NodeId, f64>,
    /// Links reported broken, with the time the report stops counting.
    broken: BTreeMap<(NodeId, NodeId), f64>,
    counters: JbrCounters,
}

impl JbrNode {
    pub fn new(id: NodeId, params: JbrParams) -> Self {
        Self {
            id,
            params,
            role: Role::Ordinary,
            self_elected: false,
            mutual: false,
            my_janitor: None,
            neighbors: BTreeMap::new(),
            cache: RouteCache::new(id),
            last_janitor_contact: f64::NEG_INFINITY,
            awaiting_reply: false,
            hello_active: false,
            keepalive_armed: false,
            idle_armed: false,
            contact_since_idle_check: false,
            covered: BTreeMap::new(),
            pending: VecDeque::new(),
            waiting: BTreeMap::new(),
            active_query: BTreeMap::new(),
            queries: BTreeMap::new(),
            next_seq: 0,
            hold_down: BTreeMap::new(),
            broken: BTreeMap::new(),
            counters: JbrCounters::default(),
        }
    }

    /// One agent per node of `config`.
    pub fn for_scenario(config: &ScenarioConfig) -> Vec<Self> {
        let params = JbrParams::from_config(config);
        (0..config.node_count)
            .map(|i| Self::new(NodeId::from(i), params))
            .collect()
    }

    pub fn id(&self) -> NodeId {
        self.id
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn is_janitor(&self) -> bool {
        self.role == Role::Janitor
    }

    pub fn my_janitor(&self) -> Option<NodeId> {
        self.my_janitor
    }

    pub fn hello_active(&self) -> bool {
        self.hello_active
    }

    pub fn keepalive_armed(&self) -> bool {
        self.keepalive_armed
    }

    pub fn covered_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.covered.keys().copied()
    }

    pub fn neighbor_degree(&self, n: NodeId) -> Option<u32> {
        self.neighbors.get(&n).map(|i| i.degree)
    }

    pub fn cache(&self) -> &RouteCache {
        &self.cache
    }

    pub fn counters(&self) -> JbrCounters {
        self.counters
    }

    pub fn pending_len(&self) -> usize {
        self.pending.len() + self.waiting.values().map(VecDeque::len).sum::<usize>()
    }

    fn affiliation(&self) -> Affiliation {
        Affiliation {
            janitor: self.is_janitor(),
            my_janitor: self.my_janitor,
        }
    }

    fn hear(
        &mut self,
        now: f64,
        from: NodeId,
        degree: Option<u32>,
        affiliation: Option<Affiliation>,
    ) {
        let entry = self.neighbors.entry(from).or_insert(NeighborInfo {
            degree: 0,
            affiliation: Affiliation::default(),
            heard_at: now,
        });
        entry.heard_at = now;
        if let Some(d) = degree {
            entry.degree = d;
        }
        if let Some(a) = affiliation {
            entry.affiliation = a;
        }
    }

    /// Known degrees of current link neighbors.
    fn known_neighbors(&self, ctx: &Ctx) -> Vec<(NodeId, u32)> {
        ctx.neighbors
            .iter()
            .filter_map(|n| self.neighbors.get(n).map(|i| (*n, i.degree)))
            .collect()
    }

    fn update_role(&mut self, ctx: &mut Ctx) {
        let janitor = self.self_elected || self.mutual || !self.covered.is_empty();
        self.role = if janitor {
            Role::Janitor
        } else {
            Role::Ordinary
        };
        if janitor && !self.idle_armed {
            self.idle_armed = true;
            self.contact_since_idle_check = false;
            ctx.set_timer(JbrTimer::JanitorIdle, self.params.timer_janitor_idle);
        }
    }

    // ---- hello sessions and election ----

    /// Starts a hello session unless one is already running.
    pub fn on_node_up(&mut self, ctx: &mut Ctx) {
        if self.hello_active {
            self.counters.hello_suppressed += 1;
            return;
        }
        self.hello_active = true;
        self.awaiting_reply = false;
        if self.keepalive_armed {
            self.keepalive_armed = false;
            ctx.cancel_timer(JbrTimer::Keepalive);
        }
        self.counters.hello_sessions += 1;
        ctx.report(Report::HelloStarted);
        ctx.broadcast(JbrMessage::Hello {
            degree: ctx.degree(),
            affiliation: self.affiliation(),
        });
        ctx.set_timer(JbrTimer::HelloWindow, self.params.hello_window);
    }

    fn end_session(&mut self, ctx: &mut Ctx) {
        if self.hello_active {
            self.hello_active = false;
            ctx.cancel_timer(JbrTimer::HelloWindow);
            ctx.cancel_timer(JbrTimer::HelloTimeout);
        }
    }

    fn evaluate_janitor(&mut self, ctx: &mut Ctx) {
        let known = self.known_neighbors(ctx);
        match elect(self.id, ctx.degree(), known) {
            Election::Isolated => {
                self.self_elected = false;
                self.mutual = false;
                self.my_janitor = None;
                self.update_role(ctx);
                ctx.set_timer(JbrTimer::HelloTimeout, self.params.timer_alive);
                return;
            }
            Election::SelfElected => {
                let fresh = !self.self_elected;
                self.self_elected = true;
                self.mutual = false;
                self.my_janitor = None;
                self.end_session(ctx);
                if fresh {
                    self.counters.new_janitor_sent += 1;
                    ctx.broadcast(JbrMessage::NewJanitor {
                        degree: ctx.degree(),
                    });
                }
            }
            Election::Mutual(b) => {
                self.self_elected = false;
                self.mutual = true;
                self.end_session(ctx);
                self.follow(ctx, b);
            }
            Election::Follow(b) => {
                self.self_elected = false;
                self.mutual = false;
                self.end_session(ctx);
                // an existing janitor next door beats creating a new one
                let j = self.best_janitor_neighbor(ctx).unwrap_or(b);
                self.follow(ctx, j);
            }
        }
        self.update_role(ctx);
        self.flush_pending(ctx);
    }

    /// The best-ranked neighbor currently known to be a janitor.
    fn best_janitor_neighbor(&self, ctx: &Ctx) -> Option<NodeId> {
        let janitors: Vec<(NodeId, u32)> = self
            .known_neighbors(ctx)
            .into_iter()
            .filter(|(n, _)| self.neighbors.get(n).is_some_and(|i| i.affiliation.janitor))
            .collect();
        best_neighbor(janitors).map(|(n, _)| n)
    }

    fn follow(&mut self, ctx: &mut Ctx, janitor: NodeId) {
        self.my_janitor = Some(janitor);
        self.send_keepalive(ctx);
    }

    /// Accepts a janitor claim from the best-ranked neighbor.
    pub fn on_new_janitor(&mut self, ctx: &mut Ctx, from: NodeId, degree: u32) {
        self.hear(ctx.now, from, Some(degree), None);
        if let Some(info) = self.neighbors.get_mut(&from) {
            info.affiliation.janitor = true;
        }
        if !ctx.is_neighbor(from) || !outranks(degree, from, ctx.degree(), self.id) {
            return;
        }
        let best = self
            .known_neighbors(ctx)
            .into_iter()
            .all(|(n, d)| n == from || !outranks(d, n, degree, from));
        if !best || self.my_janitor == Some(from) {
            return;
        }
        self.self_elected = false;
        self.mutual = false;
        self.end_session(ctx);
        self.follow(ctx, from);
        self.update_role(ctx);
        self.flush_pending(ctx);
    }

    // ---- keepalive ----

    fn send_keepalive(&mut self, ctx: &mut Ctx) {
        let Some(j) = self.my_janitor else {
            return;
        };
        if !ctx.is_neighbor(j) {
            self.my_janitor = None;
            self.on_node_up(ctx);
            return;
        }
        let neighbors = self.neighbor_report(ctx, j);
        self.counters.keepalives_sent += 1;
        ctx.send_overheard(
            j,
            JbrMessage::JanitorAliveRequest {
                degree: ctx.degree(),
                neighbors,
            },
        );
        self.awaiting_reply = true;
        self.arm_keepalive(ctx);
    }

    /// What this node knows about its other neighbors, for janitor `j`.
    fn neighbor_report(&self, ctx: &Ctx, j: NodeId) -> Vec<(NodeId, Affiliation)> {
        ctx.neighbors
            .iter()
            .filter(|&&n| n != j)
            .map(|&n| {
                (
                    n,
                    self.neighbors
                        .get(&n)
                        .map(|i| i.affiliation)
                        .unwrap_or_default(),
                )
            })
            .collect()
    }

    fn arm_keepalive(&mut self, ctx: &mut Ctx) {
        self.keepalive_armed = true;
        ctx.set_timer(JbrTimer::Keepalive, self.params.timer_alive);
    }

    pub fn keepalive_tick(&mut self, ctx: &mut Ctx) {
        self.keepalive_armed = false;
        if self.hello_active || self.my_janitor.is_none() {
            return;
        }
        if self.awaiting_reply {
            self.my_janitor = None;
            self.mutual = false;
            self.update_role(ctx);
            self.on_node_up(ctx);
        } else if ctx.now - self.last_janitor_contact < self.params.timer_alive {
            self.counters.keepalives_suppressed += 1;
            self.arm_keepalive(ctx);
        } else {
            self.send_keepalive(ctx);
        }
    }

    pub fn janitor_idle_tick(&mut self, ctx: &mut Ctx) {
        self.idle_armed = false;
        let contact = std::mem::replace(&mut self.contact_since_idle_check, false);
        let stale = 3.0 * self.params.timer_alive;
        self.covered
            .retain(|_, m| ctx.now - m.last_contact <= stale);
        self.update_role(ctx);
        if self.is_janitor() && !contact {
            self.on_node_up(ctx);
        }
    }

    fn on_alive_request(
        &mut self,
        ctx: &mut Ctx,
        from: NodeId,
        degree: u32,
        report: Vec<(NodeId, Affiliation)>,
    ) {
        self.hear(
            ctx.now,
            from,
            Some(degree),
            Some(Affiliation {
                janitor: self
                    .neighbors
                    .get(&from)
                    .is_some_and(|i| i.affiliation.janitor),
                my_janitor: Some(self.id),
            }),
        );
        self.register(ctx, from, report);
        ctx.unicast(
            from,
            JbrMessage::JanitorAliveReply {
                degree: ctx.degree(),
            },
        );
    }

    /// Records `from` as a covered node, taking the janitor role if needed.
    fn register(&mut self, ctx: &mut Ctx, from: NodeId, report: Vec<(NodeId, Affiliation)>) {
        let was_janitor = self.is_janitor();
        self.covered.insert(
            from,
            Member {
                last_contact: ctx.now,
                report,
            },
        );
        self.contact_since_idle_check = true;
        self.update_role(ctx);
        if !was_janitor && !self.mutual {
            self.counters.new_janitor_sent += 1;
            ctx.broadcast(JbrMessage::NewJanitor {
                degree: ctx.degree(),
            });
        }
    }

    // ---- data ----

    pub fn send_data(&mut self, ctx: &mut Ctx, packet: DataPacket) {
        let d = packet.destination;
        if d == self.id {
            ctx.report(Report::Delivered(packet.id));
        } else if ctx.is_neighbor(d) {
            self.send_routed(ctx, packet, vec![self.id, d]);
        } else if self.is_janitor() {
            self.janitor_route(ctx, packet);
        } else if let Some(j) = self.my_janitor.filter(|j| ctx.is_neighbor(*j)) {
            let report = self.neighbor_report(ctx, j);
            ctx.send_overheard(
                j,
                JbrMessage::Data {
                    packet,
                    route: None,
                    hop: 0,
                    report,
                },
            );
        } else {
            self.my_janitor = None;
            if self.pending.len() >= self.params.pending_capacity {
                if let Some(old) = self.pending.pop_front() {
                    ctx.report(Report::Dropped(old.id, DropReason::BufferOverflow));
                }
            }
            self.pending.push_back(packet);
            self.on_node_up(ctx);
        }
    }

    fn flush_pending(&mut self, ctx: &mut Ctx) {
        if self.my_janitor.is_none() && !self.is_janitor() {
            return;
        }
        let packets: Vec<DataPacket> = self.pending.drain(..).collect();
        for p in packets {
            self.send_data(ctx, p);
        }
    }

    /// Sends `packet` along `route`, whose first node is this one.
    fn send_routed(&mut self, ctx: &mut Ctx, packet: DataPacket, route: Vec<NodeId>) {
        debug_assert_eq!(route[0], self.id);
        self.forward_data(ctx, packet, route, 0);
    }

    fn forward_data(
        &mut self,
        ctx: &mut Ctx,
        packet: DataPacket,
        mut route: Vec<NodeId>,
        at: usize,
    ) {
        if at + 1 >= route.len() {
            ctx.report(Report::Delivered(packet.id));
            return;
        }
        if at > 0 {
            // the sender at position 0 handed over to its janitor; keep that hop
            shorten_route(&mut route, at, ctx.neighbors);
        }
        let next = route[at + 1];
        if ctx.is_neighbor(next) {
            ctx.unicast(
                next,
                JbrMessage::Data {
                    packet,
                    route: Some(route),
                    hop: (at + 1) as u32,
                    report: Vec::new(),
                },
            );
        } else {
            self.on_link_break_with_packet(ctx, packet, &route, at);
        }
    }

    /// The next hop of a source route is gone: hand the packet back toward
    /// its source with a RouteError and re-run the local election.
    pub fn on_link_break_with_packet(
        &mut self,
        ctx: &mut Ctx,
        packet: DataPacket,
        route: &[NodeId],
        at: usize,
    ) {
        let link = (route[at], route[at + 1]);
        self.forget_link(ctx.now, link);
        let mut back: Vec<NodeId> = route[..at].iter().rev().copied().collect();
        if back.is_empty() {
            self.recover(ctx, packet);
        } else {
            let next = back.remove(0);
            if ctx.is_neighbor(next) {
                ctx.unicast(next, JbrMessage::RouteError { link, packet, back });
            } else {
                ctx.report(Report::Dropped(packet.id, DropReason::ReturnPathBroken));
            }
        }
        if Some(link.1) == self.my_janitor
            || self.covered.contains_key(&link.1)
            || self.is_janitor()
        {
            self.covered.remove(&link.1);
            self.on_node_up(ctx);
        }
    }

    fn recover(&mut self, ctx: &mut Ctx, mut packet: DataPacket) {
        packet.recoveries += 1;
        if packet.recoveries > self.params.max_recoveries {
            ctx.report(Report::Dropped(packet.id, DropReason::TooManyRecoveries));
        } else {
            self.send_data(ctx, packet);
        }
    }

    /// Drops every cached route and zone entry that relies on `link`.
    fn forget_link(&mut self, now: f64, link: (NodeId, NodeId)) {
        self.cache.purge_link(link.0, link.1);
        let key = (link.0.min(link.1), link.0.max(link.1));
        self.broken.insert(key, now + self.params.timer_alive);
        for (a, b) in [link, (link.1, link.0)] {
            if let Some(m) = self.covered.get_mut(&a) {
                m.report.retain(|(n, _)| *n != b);
            }
        }
    }

    fn on_route_error(
        &mut self,
        ctx: &mut Ctx,
        link: (NodeId, NodeId),
        packet: DataPacket,
        mut back: Vec<NodeId>,
    ) {
        self.forget_link(ctx.now, link);
        if back.is_empty() {
            self.recover(ctx, packet);
            return;
        }
        let next = back.remove(0);
        if ctx.is_neighbor(next) {
            ctx.unicast(next, JbrMessage::RouteError { link, packet, back });
        } else {
            ctx.report(Report::Dropped(packet.id, DropReason::ReturnPathBroken));
        }
    }

    fn on_data(
        &mut self,
        ctx: &mut Ctx,
        from: NodeId,
        packet: DataPacket,
        route: Option<Vec<NodeId>>,
        hop: u32,
        report: Vec<(NodeId, Affiliation)>,
    ) {
        match route {
            Some(route) => {
                let at = hop as usize;
                if route.get(at) != Some(&self.id) {
                    ctx.report(Report::Dropped(packet.id, DropReason::NoRoute));
                    return;
                }
                if self.my_janitor == Some(from) {
                    self.last_janitor_contact = ctx.now;
                }
                self.contact_since_idle_check |= self.is_janitor();
                self.forward_data(ctx, packet, route, at);
            }
            None => {
                self.register(ctx, from, report);
                if from == packet.source {
                    ctx.unicast(
                        from,
                        JbrMessage::Ack {
                            flow: packet.flow,
                            packet: packet.id,
                            janitor_alive: true,
                        },
                    );
                }
                if packet.destination == self.id {
                    ctx.report(Report::Delivered(packet.id));
                } else {
                    self.janitor_route(ctx, packet);
                }
            }
        }
    }

    /// Route selection at a janitor holding a packet for a remote destination.
    pub fn janitor_route(&mut self, ctx: &mut Ctx, packet: DataPacket) {
        let d = packet.destination;
        if let Some(route) = self.route_to(ctx, d) {
            let route = self.with_source(&packet, route);
            self.send_routed_from(ctx, packet, route);
            return;
        }
        if self.hold_down.get(&d).is_some_and(|&until| ctx.now < until) {
            self.counters.held_down_packets += 1;
            self.notify_unreachable(ctx, d, vec![packet]);
            return;
        }
        let queue = self.waiting.entry(d).or_default();
        if queue.len() >= self.params.pending_capacity {
            if let Some(old) = queue.pop_front() {
                ctx.report(Report::Dropped(old.id, DropReason::BufferOverflow));
            }
        }
        queue.push_back(packet);
        if !self.active_query.contains_key(&d) {
            self.start_query(ctx, d);
        }
    }

    /// Prepends the source when a packet was handed over by a covered node,
    /// so that a route error can find its way back.
    fn with_source(&self, packet: &DataPacket, route: Vec<NodeId>) -> Vec<NodeId> {
        if packet.source == self.id || route.contains(&packet.source) {
            route
        } else {
            let mut full = Vec::with_capacity(route.len() + 1);
            full.push(packet.source);
            full.extend(route);
            full
        }
    }

    fn send_routed_from(&mut self, ctx: &mut Ctx, packet: DataPacket, route: Vec<NodeId>) {
        let at = route.iter().position(|&n| n == self.id).unwrap_or(0);
        self.forward_data(ctx, packet, route, at);
    }

    /// A route from this node to `d`: itself, a neighbor, a node next to a
    /// covered node, or a cached route with a live first hop.
    fn route_to(&self, ctx: &Ctx, d: NodeId) -> Option<Vec<NodeId>> {
        if d == self.id {
            return Some(vec![self.id]);
        }
        if ctx.is_neighbor(d) {
            return Some(vec![self.id, d]);
        }
        for (m, member) in &self.covered {
            if ctx.is_neighbor(*m) && member.report.iter().any(|(n, _)| *n == d) {
                return Some(vec![self.id, *m, d]);
            }
        }
        self.cache.lookup(d, ctx.neighbors).map(<[NodeId]>::to_vec)
    }

    /// Whether `route` uses a link that was reported broken recently.
    fn uses_broken_link(&self, now: f64, route: &[NodeId]) -> bool {
        route.windows(2).any(|w| {
            let key = (w[0].min(w[1]), w[0].max(w[1]));
            self.broken.get(&key).is_some_and(|&until| now < until)
        })
    }

    /// A current neighbor known to be affiliated with `target`.
    fn neighbor_of(&self, ctx: &Ctx, target: NodeId, avoid: &[NodeId]) -> Option<NodeId> {
        ctx.neighbors.iter().copied().find(|n| {
            !avoid.contains(n)
                && self
                    .neighbors
                    .get(n)
                    .is_some_and(|i| i.affiliation.my_janitor == Some(target))
        })
    }

    /// Janitors reachable over at most three hops, with the relay path to
    /// each (path excludes this node and ends at the peer).
    pub fn peer_janitors(&self, neighbors: &BTreeSet<NodeId>) -> BTreeMap<NodeId, Vec<NodeId>> {
        let mut best: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
        let me = self.id;
        let mut offer = |peer: NodeId, path: Vec<NodeId>| {
            if peer == me || path.contains(&me) {
                return;
            }
            match best.get(&peer) {
                Some(old) if (old.len(), old) <= (path.len(), &path) => {}
                _ => {
                    best.insert(peer, path);
                }
            }
        };
        for &x in neighbors {
            if let Some(info) = self.neighbors.get(&x) {
                if info.affiliation.janitor {
                    offer(x, vec![x]);
                }
                if let Some(y) = info.affiliation.my_janitor {
                    if y != x {
                        offer(y, vec![x, y]);
                    }
                }
            }
        }
        for (&m, member) in &self.covered {
            if !neighbors.contains(&m) {
                continue;
            }
            for &(x, aff) in &member.report {
                if x == m {
                    continue;
                }
                if aff.janitor {
                    offer(x, vec![m, x]);
                }
                if let Some(y) = aff.my_janitor {
                    if y != m && y != x {
                        offer(y, vec![m, x, y]);
                    }
                }
            }
        }
        best
    }

    // ---- route discovery across janitors ----

    fn start_query(&mut self, ctx: &mut Ctx, d: NodeId) {
        let peers = prune_peers(self.peer_janitors(ctx.neighbors));
        self.next_seq += 1;
        let seq = self.next_seq;
        let key = (self.id, d, seq);
        self.counters.queries_originated += 1;
        ctx.report(Report::QueryProcessed {
            janitor: self.id,
            query: key,
        });
        let visited: Vec<NodeId> = std::iter::once(self.id)
            .chain(peers.keys().copied())
            .collect();
        let sent = self.fan_out(ctx, key, d, &visited, &[self.id], &[self.id], &peers);
        self.queries.insert(
            key,
            QueryState {
                destination: d,
                parent: None,
                outstanding: sent,
                replied: false,
                done: false,
                started: ctx.now,
            },
        );
        self.active_query.insert(d, seq);
        if sent == 0 {
            self.counters.queries_without_peers += 1;
            self.query_failed(ctx, key);
        } else {
            ctx.set_timer(JbrTimer::Query(seq), self.params.request_timeout);
        }
    }

    /// Sends one query copy to each peer; returns how many left this node.
    #[allow(clippy::too_many_arguments)]
    fn fan_out(
        &self,
        ctx: &mut Ctx,
        key: QueryKey,
        destination: NodeId,
        visited: &[NodeId],
        chain: &[NodeId],
        trail: &[NodeId],
        peers: &BTreeMap<NodeId, Vec<NodeId>>,
    ) -> usize {
        let mut sent = 0;
        for path in peers.values() {
            if !ctx.is_neighbor(path[0]) {
                continue;
            }
            ctx.unicast(
                path[0],
                JbrMessage::RouteQuery {
                    key,
                    destination,
                    visited: visited.to_vec(),
                    chain: chain.to_vec(),
                    trail: trail.to_vec(),
                    to_go: path[1..].to_vec(),
                },
            );
            sent += 1;
        }
        sent
    }

    #[allow(clippy::too_many_arguments)]
    fn on_route_query(
        &mut self,
        ctx: &mut Ctx,
        key: QueryKey,
        destination: NodeId,
        mut visited: Vec<NodeId>,
        mut chain: Vec<NodeId>,
        mut trail: Vec<NodeId>,
        mut to_go: Vec<NodeId>,
    ) {
        trail.push(self.id);
        if !to_go.is_empty() {
            // relay hop, repaired locally when the planned next hop is gone
            let target = *to_go.last().expect("nonempty");
            if ctx.is_neighbor(target) {
                to_go.clear();
                to_go.push(target);
            } else if !ctx.is_neighbor(to_go[0]) {
                if let Some(via) = self.neighbor_of(ctx, target, &trail) {
                    to_go = vec![via, target];
                }
            }
            let next = to_go.remove(0);
            if ctx.is_neighbor(next) {
                ctx.unicast(
                    next,
                    JbrMessage::RouteQuery {
                        key,
                        destination,
                        visited,
                        chain,
                        trail,
                        to_go,
                    },
                );
            } else {
                self.counters.lost_query_copies += 1;
            }
            return;
        }
        let parent = *chain.last().expect("query chain starts at its origin");
        let from_parent = trail.iter().rposition(|&n| n == parent).unwrap_or(0);
        let back_to_parent: Vec<NodeId> = trail[from_parent..trail.len() - 1]
            .iter()
            .rev()
            .copied()
            .collect();
        if self.queries.contains_key(&key) {
            // already handled through another branch; stay silent
            return;
        }
        ctx.report(Report::QueryProcessed {
            janitor: self.id,
            query: key,
        });
        let mut state = QueryState {
            destination,
            parent: Some((parent, back_to_parent.clone())),
            outstanding: 0,
            replied: false,
            done: true,
            started: ctx.now,
        };
        // cached routes answer other janitors only while young
        let zone = self.route_to(ctx, destination).filter(|z| {
            z.len() <= 3
                || self
                    .cache
                    .entry(destination)
                    .is_some_and(|e| ctx.now - e.created_at <= self.params.cache_reply_lifetime)
        });
        if let Some(zone) = zone {
            let mut full = trail.clone();
            full.extend_from_slice(&zone[1..]);
            let route = compress_route(&full);
            let mut back: Vec<NodeId> = trail[..trail.len() - 1].iter().rev().copied().collect();
            state.replied = true;
            self.queries.insert(key, state);
            let next = back.remove(0);
            if ctx.is_neighbor(next) {
                ctx.unicast(
                    next,
                    JbrMessage::RouteReply {
                        key,
                        destination,
                        route,
                        back,
                    },
                );
            } else {
                self.counters.lost_replies += 1;
            }
            return;
        }
        let peers: BTreeMap<NodeId, Vec<NodeId>> = if chain.len() as u32 >= self.params.hop_limit {
            BTreeMap::new()
        } else {
            prune_peers(
                self.peer_janitors(ctx.neighbors)
                    .into_iter()
                    .filter(|(p, _)| !visited.contains(p))
                    .collect(),
            )
        };
        visited.extend(peers.keys().copied());
        chain.push(self.id);
        let sent = self.fan_out(ctx, key, destination, &visited, &chain, &trail, &peers);
        if sent == 0 {
            self.queries.insert(key, state);
            self.send_echo(ctx, key, destination, back_to_parent);
        } else {
            state.outstanding = sent;
            state.done = false;
            self.queries.insert(key, state);
        }
    }

    /// Tells the parent janitor that this branch found nothing.
    fn send_echo(&self, ctx: &mut Ctx, key: QueryKey, destination: NodeId, mut back: Vec<NodeId>) {
        if back.is_empty() {
            return;
        }
        let next = back.remove(0);
        if ctx.is_neighbor(next) {
            ctx.unicast(
                next,
                JbrMessage::RouteUnreachable {
                    key: Some(key),
                    destination,
                    origin: self.id,
                    back,
                },
            );
        }
    }

    fn on_route_reply(
        &mut self,
        ctx: &mut Ctx,
        key: QueryKey,
        destination: NodeId,
        route: Vec<NodeId>,
        mut back: Vec<NodeId>,
    ) {
        if self.uses_broken_link(ctx.now, &route) {
            self.counters.stale_replies += 1;
            if let Some(pos) = route.iter().position(|&n| n == self.id) {
                let mine = &route[pos..];
                if let Some(w) = mine.windows(2).find(|w| self.uses_broken_link(ctx.now, w)) {
                    self.cache.purge_link(w[0], w[1]);
                }
            }
            return;
        }
        if let Some(state) = self.queries.get_mut(&key) {
            if state.replied {
                return;
            }
            state.replied = true;
            state.done = true;
            if let Some(pos) = route.iter().position(|&n| n == self.id) {
                let suffix = route[pos..].to_vec();
                if self.cache.insert(suffix.clone(), ctx.now) {
                    ctx.report(Report::CacheInsert {
                        owner: self.id,
                        route: suffix,
                    });
                }
            }
        }
        if !back.is_empty() {
            let next = back.remove(0);
            if ctx.is_neighbor(next) {
                ctx.unicast(
                    next,
                    JbrMessage::RouteReply {
                        key,
                        destination,
                        route,
                        back,
                    },
                );
            } else {
                self.counters.lost_replies += 1;
            }
            return;
        }
        if key.0 != self.id {
            return;
        }
        let Some(state) = self.queries.get(&key) else {
            return;
        };
        ctx.report(Report::RouteFound {
            latency: ctx.now - state.started,
        });
        if self.active_query.get(&destination) == Some(&key.2) {
            self.active_query.remove(&destination);
            ctx.cancel_timer(JbrTimer::Query(key.2));
        }
        let packets: Vec<DataPacket> = self.waiting.remove(&destination).unwrap_or_default().into();
        for p in packets {
            match self.route_to(ctx, destination) {
                Some(r) => {
                    let r = self.with_source(&p, r);
                    self.send_routed_from(ctx, p, r);
                }
                None => ctx.report(Report::Dropped(p.id, DropReason::NoRoute)),
            }
        }
    }

    fn on_route_unreachable(
        &mut self,
        ctx: &mut Ctx,
        key: Option<QueryKey>,
        destination: NodeId,
        origin: NodeId,
        mut back: Vec<NodeId>,
    ) {
        if !back.is_empty() {
            let next = back.remove(0);
            if ctx.is_neighbor(next) {
                ctx.unicast(
                    next,
                    JbrMessage::RouteUnreachable {
                        key,
                        destination,
                        origin,
                        back,
                    },
                );
            }
            return;
        }
        let Some(key) = key else {
            ctx.report(Report::Unreachable {
                source: self.id,
                destination,
            });
            return;
        };
        let Some(state) = self.queries.get_mut(&key) else {
            return;
        };
        state.outstanding = state.outstanding.saturating_sub(1);
        if state.outstanding > 0 || state.done || state.replied {
            return;
        }
        state.done = true;
        match state.parent.clone() {
            Some((_, back)) => self.send_echo(ctx, key, destination, back),
            None => {
                self.counters.queries_exhausted += 1;
                self.query_failed(ctx, key);
            }
        }
    }

    fn query_failed(&mut self, ctx: &mut Ctx, key: QueryKey) {
        let d = key.1;
        if let Some(state) = self.queries.get_mut(&key) {
            state.done = true;
        }
        if self.active_query.get(&d) != Some(&key.2) {
            return;
        }
        self.active_query.remove(&d);
        ctx.cancel_timer(JbrTimer::Query(key.2));
        self.hold_down.insert(d, ctx.now + self.params.hold_down);
        let packets: Vec<DataPacket> = self.waiting.remove(&d).unwrap_or_default().into();
        self.notify_unreachable(ctx, d, packets);
    }

    fn notify_unreachable(&mut self, ctx: &mut Ctx, d: NodeId, packets: Vec<DataPacket>) {
        let mut sources = BTreeSet::new();
        for p in packets {
            ctx.report(Report::Dropped(p.id, DropReason::Unreachable));
            sources.insert(p.source);
        }
        for s in sources {
            if s == self.id {
                ctx.report(Report::Unreachable {
                    source: s,
                    destination: d,
                });
            } else if ctx.is_neighbor(s) {
                ctx.unicast(
                    s,
                    JbrMessage::RouteUnreachable {
                        key: None,
                        destination: d,
                        origin: self.id,
                        back: Vec::new(),
                    },
                );
            }
        }
    }
}

/// Drops peers whose relay path runs through another peer: that peer
/// forwards the query onward itself.
fn prune_peers(peers: BTreeMap<NodeId, Vec<NodeId>>) -> BTreeMap<NodeId, Vec<NodeId>> {
    let keys: BTreeSet<NodeId> = peers.keys().copied().collect();
    peers
        .into_iter()
        .filter(|(_, path)| !path[..path.len() - 1].iter().any(|n| keys.contains(n)))
        .collect()
}

impl Agent for JbrNode {
    type Msg = JbrMessage;
    type Timer = JbrTimer;

    fn protocol_name(&self) -> &'static str {
        "jbr"
    }

    fn start(&mut self, ctx: &mut Ctx) {
        self.on_node_up(ctx);
    }

    fn on_message(&mut self, ctx: &mut Ctx, from: NodeId, msg: JbrMessage) {
        match msg {
            JbrMessage::Hello {
                degree,
                affiliation,
            } => {
                self.hear(ctx.now, from, Some(degree), Some(affiliation));
                ctx.unicast(
                    from,
                    JbrMessage::HelloReply {
                        degree: ctx.degree(),
                        affiliation: self.affiliation(),
                    },
                );
            }
            JbrMessage::HelloReply {
                degree,
                affiliation,
            } => {
                self.counters.hello_replies_received += 1;
                self.hear(ctx.now, from, Some(degree), Some(affiliation));
            }
            JbrMessage::NewJanitor { degree } => self.on_new_janitor(ctx, from, degree),
            JbrMessage::JanitorAliveRequest { degree, neighbors } => {
                self.on_alive_request(ctx, from, degree, neighbors)
            }
            JbrMessage::JanitorAliveReply { degree } => {
                self.hear(ctx.now, from, Some(degree), None);
                if let Some(info) = self.neighbors.get_mut(&from) {
                    info.affiliation.janitor = true;
                }
                if self.my_janitor == Some(from) {
                    self.awaiting_reply = false;
                    // in a mutual pair the partner is also our member
                    self.contact_since_idle_check |= self.mutual;
                }
            }
            JbrMessage::Data {
                packet,
                route,
                hop,
                report,
            } => self.on_data(ctx, from, packet, route, hop, report),
            JbrMessage::Ack { janitor_alive, .. } => {
                if janitor_alive && self.my_janitor == Some(from) {
                    self.last_janitor_contact = ctx.now;
                    self.awaiting_reply = false;
                }
            }
            JbrMessage::RouteQuery {
                key,
                destination,
                visited,
                chain,
                trail,
                to_go,
            } => self.on_route_query(ctx, key, destination, visited, chain, trail, to_go),
            JbrMessage::RouteReply {
                key,
                destination,
                route,
                back,
            } => self.on_route_reply(ctx, key, destination, route, back),
            JbrMessage::RouteError { link, packet, back } => {
                self.on_route_error(ctx, link, packet, back)
            }
            JbrMessage::RouteUnreachable {
                key,
                destination,
                origin,
                back,
            } => self.on_route_unreachable(ctx, key, destination, origin, back),
        }
    }

    fn on_overheard(&mut self, ctx: &mut Ctx, from: NodeId, to: NodeId, msg: &JbrMessage) {
        let degree = match msg {
            JbrMessage::JanitorAliveRequest { degree, .. } => Some(*degree),
            JbrMessage::Data { route: None, .. } => None,
            _ => return,
        };
        let janitor = self
            .neighbors
            .get(&from)
            .is_some_and(|i| i.affiliation.janitor);
        self.hear(
            ctx.now,
            from,
            degree,
            Some(Affiliation {
                janitor,
                my_janitor: Some(to),
            }),
        );
        if let Some(info) = self.neighbors.get_mut(&to) {
            info.affiliation.janitor = true;
        }
        if self.covered.remove(&from).is_some() {
            self.update_role(ctx);
        }
    }

    fn on_timer(&mut self, ctx: &mut Ctx, timer: JbrTimer) {
        match timer {
            JbrTimer::HelloWindow => {
                if self.hello_active {
                    self.evaluate_janitor(ctx);
                }
            }
            JbrTimer::HelloTimeout => {
                if self.hello_active {
                    self.hello_active = false;
                    self.on_node_up(ctx);
                }
            }
            JbrTimer::Keepalive => self.keepalive_tick(ctx),
            JbrTimer::JanitorIdle => self.janitor_idle_tick(ctx),
            JbrTimer::Query(seq) => {
                if let Some((&d, _)) = self.active_query.iter().find(|(_, &s)| s == seq) {
                    self.counters.queries_timed_out += 1;
                    self.query_failed(ctx, (self.id, d, seq));
                }
            }
        }
    }

    fn on_link_change(&mut self, ctx: &mut Ctx, _up: &[NodeId], down: &[NodeId]) {
        for n in down {
            self.neighbors.remove(n);
            if self.covered.remove(n).is_some() {
                self.update_role(ctx);
            }
        }
    }

    fn originate(&mut self, ctx: &mut Ctx, packet: DataPacket) {
        self.send_data(ctx, packet);
    }

    fn check_invariants(&self) -> Result<(), String> {
        if self.hello_active && self.keepalive_armed {
            return Err("hello session active with keepalive armed".into());
        }
        let janitor = self.self_elected || self.mutual || !self.covered.is_empty();
        if janitor != self.is_janitor() {
            return Err("role disagrees with election state".into());
        }
        Ok(())
    }
}
