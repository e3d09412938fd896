//! The discrete-event driver: mobility, radio delivery, timers and traffic.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use super::agent::{Action, Agent, DataPacket, Dest, NodeCtx, PacketId, Report, WireMessage};
use super::graph::ConnectivityGraph;
use super::mobility::{advance_waypoint, Field, NodeKinematics, Point, WaypointParams};
use super::queue::{EventHandle, EventQueue};
use super::stats::SimStats;
use super::NodeId;
use crate::config::ScenarioConfig;
use crate::error::ConfigError;

/// A constant-destination traffic source.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Flow {
    pub id: u32,
    pub source: NodeId,
    pub destination: NodeId,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScriptedMove {
    pub at: f64,
    pub node: NodeId,
    pub to: Point,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Mobility {
    /// Uniform initial placement; every node rests `pause_time` before its
    /// first leg.
    RandomWaypoint,
    /// Fixed placement, optionally with instantaneous relocations.
    Scripted {
        positions: Vec<Point>,
        moves: Vec<ScriptedMove>,
    },
}

impl Mobility {
    pub fn fixed(positions: Vec<Point>) -> Self {
        Mobility::Scripted {
            positions,
            moves: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MobilityCause {
    Tick,
    Arrival(NodeId),
    Departure(NodeId),
    Teleport(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub enum SimEvent<M, T> {
    MobilityUpdate(MobilityCause),
    TimerFire(NodeId, T),
    MessageDelivery {
        from: NodeId,
        to: NodeId,
        /// Set when `to` only overhears a unicast meant for this node.
        overheard_for: Option<NodeId>,
        msg: M,
    },
    TrafficArrival(usize),
    /// One packet injected by a test or script rather than a flow.
    Inject {
        source: NodeId,
        destination: NodeId,
    },
}

/// Derives an independent generator for one purpose from the run seed.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

const MOBILITY_STREAM: u64 = 1;
const TRAFFIC_STREAM_BASE: u64 = 1 << 32;

pub struct Simulation<A: Agent> {
    config: ScenarioConfig,
    waypoint: WaypointParams,
    queue: EventQueue<SimEvent<A::Msg, A::Timer>>,
    kinematics: Vec<NodeKinematics>,
    moves: Vec<ScriptedMove>,
    graph: ConnectivityGraph,
    agents: Vec<A>,
    timers: BTreeMap<(NodeId, A::Timer), EventHandle>,
    mobility_rng: ChaCha8Rng,
    flows: Vec<Flow>,
    flow_rngs: Vec<ChaCha8Rng>,
    next_packet: u64,
    stats: SimStats,
    trace: Option<Vec<String>>,
    last_event_time: f64,
    actions: Vec<Action<A::Msg, A::Timer>>,
}

impl<A: Agent> Simulation<A> {
    pub fn new(
        config: ScenarioConfig,
        mobility: Mobility,
        flows: Vec<Flow>,
        agents: Vec<A>,
    ) -> Result<Self, ConfigError> {
        config.validate()?;
        let n = config.node_count;
        if agents.len() != n {
            return Err(ConfigError::Invalid(format!(
                "{} agents for {} nodes",
                agents.len(),
                n
            )));
        }
        for f in &flows {
            if f.source.index() >= n || f.destination.index() >= n || f.source == f.destination {
                return Err(ConfigError::Invalid(format!("bad flow {f:?}")));
            }
        }
        let waypoint = WaypointParams {
            field: Field {
                width: config.field_width,
                height: config.field_height,
            },
            speed_min: config.speed_min,
            speed_max: config.speed_max,
            pause_time: config.pause_time,
        };
        let mut mobility_rng = stream_rng(config.rng_seed, MOBILITY_STREAM);
        let mut queue = EventQueue::new();
        let (positions, moves, random) = match mobility {
            Mobility::RandomWaypoint => {
                let p: Vec<Point> = (0..n)
                    .map(|_| waypoint.field.sample(&mut mobility_rng))
                    .collect();
                (p, Vec::new(), true)
            }
            Mobility::Scripted { positions, moves } => {
                if positions.len() != n {
                    return Err(ConfigError::Invalid(format!(
                        "{} positions for {} nodes",
                        positions.len(),
                        n
                    )));
                }
                (positions, moves, false)
            }
        };
        let kinematics: Vec<NodeKinematics> = positions
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                let rest = if random {
                    config.pause_time
                } else {
                    f64::INFINITY
                };
                NodeKinematics::resting(NodeId::from(i), p, rest)
            })
            .collect();
        if random && config.speed_max > 0.0 {
            for k in &kinematics {
                queue
                    .schedule(
                        k.paused_until,
                        SimEvent::MobilityUpdate(MobilityCause::Departure(k.node_id)),
                    )
                    .expect("departure in the future");
            }
            queue
                .schedule(
                    config.graph_tick,
                    SimEvent::MobilityUpdate(MobilityCause::Tick),
                )
                .expect("tick in the future");
        }
        for (i, m) in moves.iter().enumerate() {
            if m.node.index() >= n {
                return Err(ConfigError::Invalid(format!(
                    "scripted move for unknown {}",
                    m.node
                )));
            }
            queue
                .schedule(m.at, SimEvent::MobilityUpdate(MobilityCause::Teleport(i)))
                .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        }
        let flow_rngs = flows
            .iter()
            .map(|f| stream_rng(config.rng_seed, TRAFFIC_STREAM_BASE + u64::from(f.id)))
            .collect();
        let graph = ConnectivityGraph::from_positions(&positions, config.tx_range);
        let mut sim = Self {
            config,
            waypoint,
            queue,
            kinematics,
            moves,
            graph,
            agents,
            timers: BTreeMap::new(),
            mobility_rng,
            flows,
            flow_rngs,
            next_packet: 0,
            stats: SimStats::default(),
            trace: None,
            last_event_time: 0.0,
            actions: Vec::new(),
        };
        for i in 0..sim.flows.len() {
            sim.schedule_next_arrival(i, sim.config.warmup);
        }
        for i in 0..n {
            sim.with_agent(NodeId::from(i), |agent, ctx| agent.start(ctx));
        }
        Ok(sim)
    }

    /// Records one line per processed event from now on.
    pub fn enable_trace(&mut self) {
        self.trace.get_or_insert_with(Vec::new);
    }

    pub fn take_trace(&mut self) -> Vec<String> {
        self.trace.as_mut().map(std::mem::take).unwrap_or_default()
    }

    pub fn now(&self) -> f64 {
        self.queue.now()
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn graph(&self) -> &ConnectivityGraph {
        &self.graph
    }

    pub fn agents(&self) -> &[A] {
        &self.agents
    }

    pub fn agent(&self, node: NodeId) -> &A {
        &self.agents[node.index()]
    }

    pub fn stats(&self) -> &SimStats {
        &self.stats
    }

    pub fn into_stats(self) -> SimStats {
        self.stats
    }

    pub fn flows(&self) -> &[Flow] {
        &self.flows
    }

    pub fn positions(&self) -> Vec<Point> {
        let now = self.now();
        self.kinematics.iter().map(|k| k.position_at(now)).collect()
    }

    pub fn timer_armed(&self, node: NodeId, timer: A::Timer) -> bool {
        self.timers.contains_key(&(node, timer))
    }

    /// Queues one packet from `source` to `destination` at time `at`.
    pub fn inject_packet(&mut self, at: f64, source: NodeId, destination: NodeId) {
        self.queue
            .schedule(
                at,
                SimEvent::Inject {
                    source,
                    destination,
                },
            )
            .expect("injection time must not be in the past");
    }

    /// Processes every event with fire time `<= t_end`, then sets the clock
    /// to `t_end`.
    pub fn run_until(&mut self, t_end: f64) -> &SimStats {
        while let Some((time, _, event)) = self.queue.pop_until(t_end) {
            if time < self.last_event_time {
                self.stats.violation(format!(
                    "event order: {time} after {}",
                    self.last_event_time
                ));
            }
            self.last_event_time = time;
            self.stats.events_processed += 1;
            self.process(time, event);
        }
        self.queue.advance_to(t_end);
        &self.stats
    }

    /// Runs to `sim_duration`.
    pub fn run(&mut self) -> &SimStats {
        let end = self.config.sim_duration;
        self.run_until(end)
    }

    fn trace_line(&mut self, time: f64, kind: &str, details: impl FnOnce() -> String) {
        if let Some(trace) = self.trace.as_mut() {
            trace.push(format!("{time:.6}\t{kind}\t{}", details()));
        }
    }

    fn process(&mut self, time: f64, event: SimEvent<A::Msg, A::Timer>) {
        match event {
            SimEvent::MobilityUpdate(cause) => self.on_mobility(time, cause),
            SimEvent::TimerFire(node, timer) => {
                self.timers.remove(&(node, timer));
                self.trace_line(time, "timer", || format!("node={node} timer={timer:?}"));
                self.with_agent(node, |agent, ctx| agent.on_timer(ctx, timer));
            }
            SimEvent::MessageDelivery {
                from,
                to,
                overheard_for,
                msg,
            } => {
                self.trace_line(time, "deliver", || {
                    let via = overheard_for
                        .map(|o| format!(" overheard_for={o}"))
                        .unwrap_or_default();
                    format!("from={from} to={to}{via} {}", msg.describe())
                });
                match overheard_for {
                    None => self.with_agent(to, |agent, ctx| agent.on_message(ctx, from, msg)),
                    Some(target) => self
                        .with_agent(to, |agent, ctx| agent.on_overheard(ctx, from, target, &msg)),
                }
            }
            SimEvent::TrafficArrival(idx) => {
                let flow = self.flows[idx];
                let packet = self.new_packet(time, flow.id, flow.source, flow.destination);
                self.trace_line(time, "traffic", || {
                    format!(
                        "flow={} packet={} src={} dst={}",
                        flow.id, packet.id.0, flow.source, flow.destination
                    )
                });
                self.with_agent(flow.source, |agent, ctx| agent.originate(ctx, packet));
                self.schedule_next_arrival(idx, time);
            }
            SimEvent::Inject {
                source,
                destination,
            } => {
                let packet = self.new_packet(time, u32::MAX, source, destination);
                self.trace_line(time, "traffic", || {
                    format!(
                        "inject packet={} src={source} dst={destination}",
                        packet.id.0
                    )
                });
                self.with_agent(source, |agent, ctx| agent.originate(ctx, packet));
            }
        }
    }

    fn new_packet(
        &mut self,
        time: f64,
        flow: u32,
        source: NodeId,
        destination: NodeId,
    ) -> DataPacket {
        let id = PacketId(self.next_packet);
        self.next_packet += 1;
        self.stats.data_generated += 1;
        DataPacket {
            id,
            flow,
            source,
            destination,
            payload_bytes: self.config.payload_bytes,
            created_at: time,
            recoveries: 0,
        }
    }

    fn schedule_next_arrival(&mut self, idx: usize, after: f64) {
        if self.config.traffic_rate <= 0.0 {
            return;
        }
        let exp = Exp::new(self.config.traffic_rate).expect("positive rate");
        let gap = exp.sample(&mut self.flow_rngs[idx]);
        let at = after + gap;
        if at <= self.config.sim_duration {
            self.queue
                .schedule(at, SimEvent::TrafficArrival(idx))
                .expect("arrival in the future");
        }
    }

    fn on_mobility(&mut self, time: f64, cause: MobilityCause) {
        match cause {
            MobilityCause::Tick => {
                let changed = self.refresh_graph(time);
                let epoch = self.graph.epoch();
                self.trace_line(time, "mobility", || {
                    format!("tick epoch={epoch} changes={changed}")
                });
                self.queue
                    .schedule(
                        time + self.config.graph_tick,
                        SimEvent::MobilityUpdate(MobilityCause::Tick),
                    )
                    .expect("tick in the future");
            }
            MobilityCause::Arrival(node) => {
                let k = self.kinematics[node.index()].arrive(&self.waypoint);
                self.kinematics[node.index()] = k;
                if k.paused_until.is_finite() {
                    self.queue
                        .schedule(
                            k.paused_until,
                            SimEvent::MobilityUpdate(MobilityCause::Departure(node)),
                        )
                        .expect("departure in the future");
                }
                let changed = self.refresh_graph(time);
                let epoch = self.graph.epoch();
                self.trace_line(time, "mobility", || {
                    format!("arrival node={node} epoch={epoch} changes={changed}")
                });
            }
            MobilityCause::Departure(node) => {
                let k = advance_waypoint(
                    &self.kinematics[node.index()],
                    time,
                    &self.waypoint,
                    &mut self.mobility_rng,
                );
                self.kinematics[node.index()] = k;
                if let Some(arrival) = k.arrival_time() {
                    self.queue
                        .schedule(
                            arrival,
                            SimEvent::MobilityUpdate(MobilityCause::Arrival(node)),
                        )
                        .expect("arrival in the future");
                }
                self.trace_line(time, "mobility", || {
                    format!(
                        "departure node={node} to=({:.3},{:.3}) speed={:.3}",
                        k.waypoint.x, k.waypoint.y, k.speed
                    )
                });
            }
            MobilityCause::Teleport(i) => {
                let m = self.moves[i];
                self.kinematics[m.node.index()] =
                    NodeKinematics::resting(m.node, m.to, f64::INFINITY);
                let changed = self.refresh_graph(time);
                let epoch = self.graph.epoch();
                self.trace_line(time, "mobility", || {
                    format!(
                        "move node={} to=({:.3},{:.3}) epoch={} changes={changed}",
                        m.node, m.to.x, m.to.y, epoch
                    )
                });
            }
        }
    }

    /// Recomputes connectivity and tells affected agents; returns the number
    /// of changed edges.
    fn refresh_graph(&mut self, time: f64) -> usize {
        let positions: Vec<Point> = self
            .kinematics
            .iter()
            .map(|k| k.position_at(time))
            .collect();
        let changes = self.graph.recompute(&positions, self.config.tx_range);
        if changes.is_empty() {
            return 0;
        }
        let n = self.agents.len();
        let mut up = vec![Vec::new(); n];
        let mut down = vec![Vec::new(); n];
        for &(a, b) in &changes.up {
            up[a.index()].push(b);
            up[b.index()].push(a);
        }
        for &(a, b) in &changes.down {
            down[a.index()].push(b);
            down[b.index()].push(a);
        }
        for i in 0..n {
            if up[i].is_empty() && down[i].is_empty() {
                continue;
            }
            let (u, d) = (std::mem::take(&mut up[i]), std::mem::take(&mut down[i]));
            self.with_agent(NodeId::from(i), |agent, ctx| {
                agent.on_link_change(ctx, &u, &d)
            });
        }
        changes.up.len() + changes.down.len()
    }

    fn with_agent<F>(&mut self, node: NodeId, f: F)
    where
        F: FnOnce(&mut A, &mut NodeCtx<A::Msg, A::Timer>),
    {
        let now = self.now();
        let mut actions = std::mem::take(&mut self.actions);
        {
            let neighbors = self.graph.neighbors(node);
            let mut ctx = NodeCtx::new(now, node, neighbors, &mut actions);
            f(&mut self.agents[node.index()], &mut ctx);
        }
        if let Err(what) = self.agents[node.index()].check_invariants() {
            self.stats.violation(format!("t={now} node={node}: {what}"));
        }
        for action in actions.drain(..) {
            self.apply(node, action);
        }
        self.actions = actions;
    }

    fn apply(&mut self, node: NodeId, action: Action<A::Msg, A::Timer>) {
        let now = self.now();
        match action {
            Action::Send { dest, msg } => self.transmit(node, dest, msg),
            Action::SetTimer { timer, delay } => {
                if let Some(old) = self.timers.remove(&(node, timer)) {
                    self.queue.cancel(old);
                }
                let handle = self
                    .queue
                    .schedule(now + delay.max(0.0), SimEvent::TimerFire(node, timer))
                    .expect("timer in the future");
                self.timers.insert((node, timer), handle);
            }
            Action::CancelTimer(timer) => {
                if let Some(old) = self.timers.remove(&(node, timer)) {
                    self.queue.cancel(old);
                }
            }
            Action::Report(report) => self.record(node, report),
        }
    }

    fn transmit(&mut self, from: NodeId, dest: Dest, msg: A::Msg) {
        let bytes = msg.wire_size(&self.config.sizes);
        self.stats.tally(msg.kind(), bytes, msg.is_control());
        let at = self.now() + self.config.hop_latency;
        let neighbors: Vec<NodeId> = self.graph.neighbors(from).iter().copied().collect();
        let deliver =
            |queue: &mut EventQueue<_>, to: NodeId, overheard_for: Option<NodeId>, msg: A::Msg| {
                queue
                    .schedule(
                        at,
                        SimEvent::MessageDelivery {
                            from,
                            to,
                            overheard_for,
                            msg,
                        },
                    )
                    .expect("delivery in the future");
            };
        match dest {
            Dest::Broadcast => {
                for v in neighbors {
                    deliver(&mut self.queue, v, None, msg.clone());
                }
            }
            Dest::Unicast(to) => {
                if neighbors.contains(&to) {
                    deliver(&mut self.queue, to, None, msg);
                } else {
                    self.stats.link_losses += 1;
                }
            }
            Dest::Overheard(to) => {
                if !neighbors.contains(&to) {
                    self.stats.link_losses += 1;
                }
                for v in neighbors {
                    let tag = (v != to).then_some(to);
                    deliver(&mut self.queue, v, tag, msg.clone());
                }
            }
        }
    }

    fn record(&mut self, node: NodeId, report: Report) {
        let now = self.now();
        let stats = &mut self.stats;
        match report {
            Report::Delivered(id) => {
                if stats.delivered_ids.insert(id) {
                    stats.data_delivered += 1;
                } else {
                    stats.duplicate_deliveries += 1;
                }
            }
            Report::Dropped(_, reason) => *stats.drops.entry(reason).or_insert(0) += 1,
            Report::Unreachable {
                source,
                destination,
            } => {
                stats.unreachable_reports += 1;
                stats.unreachable_pairs.insert((source, destination));
                let comp = self.graph.components();
                if comp[source.index()] == comp[destination.index()] {
                    stats.connected_unreachables += 1;
                }
            }
            Report::RouteFound { latency } => {
                stats.discoveries += 1;
                stats.discovery_latency_sum += latency;
            }
            Report::CacheInsert { owner, route } => {
                stats.cache_inserts += 1;
                let starts_at_owner = route.first() == Some(&owner);
                let unique = {
                    let mut seen = std::collections::BTreeSet::new();
                    route.iter().all(|v| seen.insert(*v))
                };
                if !(starts_at_owner && unique && self.graph.is_path(&route)) {
                    stats.stale_cache_inserts += 1;
                }
            }
            Report::QueryProcessed { janitor, query } => {
                stats.queries_processed += 1;
                if !stats.processed_queries.insert((janitor, query)) {
                    stats.query_reprocessing += 1;
                    stats.violation(format!(
                        "t={now} node={node}: query {query:?} processed twice"
                    ));
                }
            }
            Report::HelloStarted => stats.hello_sessions += 1,
        }
    }
}
