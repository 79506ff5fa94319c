//! Discrete-time world: radio broadcast within range, synchronized phase
//! schedule, and straight-line movement towards elected cluster points.

mod config;
mod population;

use std::collections::{BTreeMap, VecDeque};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use config::{
    load_scenario, load_taxonomy_and_catalog, ConfigError, PhaseDurations, Placement, ScenarioFile,
    SimConfig, SubjectAssignment,
};

use crate::metrics::{CensusEntry, Level, MetricsLog};
use crate::protocol::{
    DensityParams, Location, Message, NodeId, NodeState, Phase, ProtocolConfig, SubjectId,
};
use crate::taxonomy::{Classification, Profile};

/// One simulated attendee.
#[derive(Debug, Clone)]
pub struct SimNode {
    pub state: NodeState,
    pub profile: Profile,
    pub classification: Classification,
}

/// Tick at which each phase starts, plus the end of the last window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Schedule {
    pub discover: u64,
    pub density_exchange: u64,
    pub elect: u64,
    pub converge: u64,
    pub sub_cluster: u64,
    pub topic_election: u64,
    pub steady: u64,
    pub end: u64,
}

impl Schedule {
    pub fn new(p: &PhaseDurations) -> Self {
        let discover = 1;
        let density_exchange = discover + p.discover;
        let elect = density_exchange + p.density_exchange;
        let converge = elect + p.elect;
        let sub_cluster = converge + p.converge;
        let topic_election = sub_cluster + p.sub_cluster / 3;
        let steady = sub_cluster + p.sub_cluster;
        Self {
            discover,
            density_exchange,
            elect,
            converge,
            sub_cluster,
            topic_election,
            steady,
            end: steady + p.steady,
        }
    }

    fn phase_starting_at(&self, tick: u64) -> Option<Phase> {
        [
            (self.discover, Phase::Discover),
            (self.density_exchange, Phase::DensityExchange),
            (self.elect, Phase::Elect),
            (self.converge, Phase::Converge),
            (self.sub_cluster, Phase::SubCluster),
            (self.steady, Phase::Steady),
        ]
        .into_iter()
        .find(|&(t, _)| t == tick)
        .map(|(_, p)| p)
    }
}

/// Result of the primary election as it stood when Converge began.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElectionRecord {
    pub node: NodeId,
    pub own_density: f64,
    pub elected: NodeId,
}

/// One delivery, for trace export.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub tick: u64,
    pub msg_type: &'static str,
    pub origin: NodeId,
    pub receiver: NodeId,
    pub subject: String,
    pub value: f64,
}

/// Moves `from` towards `target` by at most `step`, never closer than
/// `radius` to the target.
pub fn advance_toward(from: Location, target: Location, step: f64, radius: f64) -> Location {
    let d = from.distance(target);
    if d <= radius {
        return from;
    }
    let travel = step.min(d - radius);
    let f = travel / d;
    Location::new(
        from.x + (target.x - from.x) * f,
        from.y + (target.y - from.y) * f,
    )
}

/// Groups the nodes of `subject` into sets that can reach each other over
/// hops of at most `range`, relaying through nodes of any subject.
pub fn reachability_components(
    positions: &[Location],
    subjects: &[SubjectId],
    subject: SubjectId,
    range: f64,
) -> Vec<Vec<NodeId>> {
    let n = positions.len();
    let mut component = vec![usize::MAX; n];
    let mut count = 0;
    for start in 0..n {
        if component[start] != usize::MAX || subjects[start] != subject {
            continue;
        }
        component[start] = count;
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            for v in 0..n {
                if component[v] == usize::MAX && positions[u].distance(positions[v]) <= range {
                    component[v] = count;
                    queue.push_back(v);
                }
            }
        }
        count += 1;
    }
    let mut out = vec![Vec::new(); count];
    for (i, &c) in component.iter().enumerate() {
        if c != usize::MAX && subjects[i] == subject {
            out[c].push(i as NodeId);
        }
    }
    out
}

pub struct World {
    clock: u64,
    config: SimConfig,
    proto: ProtocolConfig,
    schedule: Schedule,
    nodes: Vec<SimNode>,
    initial_positions: Vec<Location>,
    in_flight: BTreeMap<u64, Vec<(NodeId, Arc<Message>)>>,
    metrics: MetricsLog,
    election: Option<Vec<ElectionRecord>>,
    trace: Vec<TraceRow>,
    /// Neighbour lists for the current positions, rebuilt after movement.
    neighbours: Option<Vec<Vec<NodeId>>>,
}

impl World {
    pub fn new(config: SimConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let built = population::populate(&config, &mut rng)?;
        Ok(Self::from_nodes(config, built))
    }

    fn from_nodes(config: SimConfig, nodes: Vec<SimNode>) -> Self {
        let catalog = config.catalog.clone();
        let proto = ProtocolConfig {
            params: DensityParams {
                alpha: config.alpha,
                beta: config.beta,
                population: config.population,
            },
            ttl: config.ttl,
            subjects: catalog.len() as u16,
            topic_subjects: catalog.topics().map(|(s, _)| SubjectId(s as u16)).collect(),
            quorum_threshold: config.quorum_threshold,
        };
        let mut sizes = vec![0u32; catalog.len()];
        for n in &nodes {
            sizes[n.state.subject.0 as usize] += 1;
        }
        let mut metrics = MetricsLog::new(
            catalog.subjects().iter().map(|s| s.id.clone()).collect(),
            catalog.topics().map(|(_, t)| t.id.clone()).collect(),
            sizes,
        );
        metrics.config_echo = config.echo();
        Self {
            clock: 0,
            schedule: Schedule::new(&config.phases),
            initial_positions: nodes.iter().map(|n| n.state.location).collect(),
            proto,
            nodes,
            in_flight: BTreeMap::new(),
            metrics,
            election: None,
            trace: Vec::new(),
            neighbours: None,
            config,
        }
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn protocol_config(&self) -> &ProtocolConfig {
        &self.proto
    }

    pub fn schedule(&self) -> Schedule {
        self.schedule
    }

    pub fn nodes(&self) -> &[SimNode] {
        &self.nodes
    }

    pub fn initial_positions(&self) -> &[Location] {
        &self.initial_positions
    }

    pub fn metrics(&self) -> &MetricsLog {
        &self.metrics
    }

    pub fn trace(&self) -> &[TraceRow] {
        &self.trace
    }

    /// Election outcome captured at the start of Converge.
    pub fn election(&self) -> Option<&[ElectionRecord]> {
        self.election.as_deref()
    }

    pub fn in_flight_count(&self) -> usize {
        self.in_flight.values().map(Vec::len).sum()
    }

    pub fn subjects(&self) -> Vec<SubjectId> {
        self.nodes.iter().map(|n| n.state.subject).collect()
    }

    /// Same-subject components over the current positions.
    pub fn reachability(&self, subject: SubjectId) -> Vec<Vec<NodeId>> {
        let positions: Vec<Location> = self.nodes.iter().map(|n| n.state.location).collect();
        reachability_components(
            &positions,
            &self.subjects(),
            subject,
            self.config.radio_range,
        )
    }

    fn neighbour_lists(&mut self) {
        let nodes = &self.nodes;
        let range = self.config.radio_range;
        self.neighbours.get_or_insert_with(|| {
            nodes
                .iter()
                .map(|a| {
                    nodes
                        .iter()
                        .filter(|b| {
                            b.state.id != a.state.id
                                && b.state.location.distance(a.state.location) <= range
                        })
                        .map(|b| b.state.id)
                        .collect()
                })
                .collect()
        });
    }

    /// Sends `msg` to every node within radio range of `sender`, arriving
    /// on the next tick.
    pub fn broadcast(&mut self, sender: NodeId, msg: Message) {
        let now = self.clock;
        let keep_all = self.config.trace;
        let id = msg.id();
        self.neighbour_lists();
        let receivers = &self.neighbours.as_ref().expect("just built")[sender as usize];
        self.metrics
            .record_transmission(now, msg.subject().0, msg.kind(), receivers.len());
        if receivers.is_empty() {
            return;
        }
        let msg = Arc::new(msg);
        let queue = self.in_flight.entry(now + 1).or_default();
        for &r in receivers {
            // a node that already holds the id would drop the copy on arrival
            if keep_all || !self.nodes[r as usize].state.has_seen(id) {
                queue.push((r, msg.clone()));
            }
        }
    }

    fn broadcast_all(&mut self, sender: NodeId, msgs: Vec<Message>) {
        for m in msgs {
            self.broadcast(sender, m);
        }
    }

    /// Advances one tick: deliver, fire phase transitions, move, record
    /// cluster entries.
    pub fn step(&mut self) {
        self.clock += 1;
        let now = self.clock;

        if let Some(mut due) = self.in_flight.remove(&now) {
            due.sort_by_key(|(r, m)| (*r, m.id()));
            for (receiver, msg) in due {
                if self.config.trace {
                    self.trace.push(TraceRow {
                        tick: now,
                        msg_type: msg.kind().as_str(),
                        origin: msg.origin(),
                        receiver,
                        subject: self.metrics.subjects[msg.subject().0 as usize].clone(),
                        value: msg.value(),
                    });
                }
                let node = &mut self.nodes[receiver as usize].state;
                let out = node.on_message(&msg, &self.proto);
                self.broadcast_all(receiver, out);
            }
        }

        if let Some(phase) = self.schedule.phase_starting_at(now) {
            if phase == Phase::Converge {
                self.snapshot_election();
            }
            for i in 0..self.nodes.len() {
                let out = self.nodes[i]
                    .state
                    .start_phase(phase, &self.proto)
                    .expect("schedule drives phases in order");
                self.broadcast_all(i as NodeId, out);
            }
        }
        if now == self.schedule.topic_election {
            for i in 0..self.nodes.len() {
                let out = self.nodes[i]
                    .state
                    .start_topic_election(&self.proto)
                    .expect("topic election follows SubCluster start");
                self.broadcast_all(i as NodeId, out);
            }
        }
        self.refresh_cluster_points(now);

        self.move_nodes();
        self.record_entries(now);
    }

    fn refresh_cluster_points(&mut self, now: u64) {
        let since = now.saturating_sub(self.schedule.converge);
        let interval = self.config.refresh_interval;
        let drain = u64::from(self.config.ttl) + 2;
        if now <= self.schedule.converge
            || !since.is_multiple_of(interval)
            || now + drain > self.schedule.end
        {
            return;
        }
        for i in 0..self.nodes.len() {
            let state = &mut self.nodes[i].state;
            if state.is_cluster_point() == Ok(true) {
                let out = state
                    .cluster_point_refresh(&self.proto)
                    .expect("cluster point in a post-election phase");
                self.broadcast_all(i as NodeId, out);
            }
        }
        if now >= self.schedule.steady {
            for node in &mut self.nodes {
                let summaries = node.state.collected_summaries();
                if let Some(target) = node.state.migration_decision(&summaries) {
                    node.state.migrate_to(target);
                }
            }
        }
    }

    fn snapshot_election(&mut self) {
        self.election = Some(
            self.nodes
                .iter()
                .map(|n| {
                    let s = &n.state;
                    ElectionRecord {
                        node: s.id,
                        own_density: s.primary.own_density.unwrap_or(0.0),
                        elected: s.primary.best.as_ref().map_or(s.id, |b| b.origin),
                    }
                })
                .collect(),
        );
    }

    fn move_nodes(&mut self) {
        let step = self.config.walk_speed * self.config.tick_seconds;
        let radius = self.config.arrival_radius;
        let (w, h) = (self.config.hall_width, self.config.hall_height);
        for node in &mut self.nodes {
            if let Some(target) = node.state.elected_target() {
                let next = advance_toward(node.state.location, target, step, radius);
                let next = Location::new(next.x.clamp(0.0, w), next.y.clamp(0.0, h));
                if next != node.state.location {
                    node.state.location = next;
                    self.neighbours = None;
                }
            }
        }
    }

    fn record_entries(&mut self, now: u64) {
        let radius = self.config.arrival_radius + 1e-9;
        for i in 0..self.nodes.len() {
            let state = &self.nodes[i].state;
            let (id, subject, here) = (state.id, state.subject.0, state.location);
            if let Some(cp) = state.cluster_location() {
                if here.distance(cp) <= radius
                    && self.metrics.record_entry(Level::Primary, id, subject, now)
                {
                    let out = self.nodes[i].state.on_arrival();
                    self.broadcast_all(id, out);
                }
            }
            let state = &self.nodes[i].state;
            if state.phase() == Phase::Steady {
                if let (Some(_), Some(t)) = (state.joined_sub_cluster(), state.elected_target()) {
                    if here.distance(t) <= radius {
                        self.metrics.record_entry(Level::Sub, id, subject, now);
                    }
                }
            }
        }
    }

    /// Steps until `tick` (inclusive).
    pub fn run_until(&mut self, tick: u64) {
        while self.clock < tick {
            self.step();
        }
    }

    /// Runs every phase window, then drains the message queue.
    pub fn run_to_completion(&mut self) -> &MetricsLog {
        self.run_until(self.schedule.end);
        self.metrics.in_flight_at_schedule_end = self.in_flight_count();
        let cap = self.schedule.end + 4 * (u64::from(self.config.ttl) + 2);
        while !self.in_flight.is_empty() && self.clock < cap {
            self.step();
        }
        self.finish();
        &self.metrics
    }

    fn finish(&mut self) {
        self.metrics.final_tick = self.clock;
        self.metrics.malformed_dropped = self.nodes.iter().map(|n| n.state.malformed_dropped).sum();
        self.metrics.census = self
            .nodes
            .iter()
            .map(|n| {
                let s = &n.state;
                CensusEntry {
                    cluster_point: s.joined_cluster().unwrap_or(s.id),
                    subject: s.subject.0,
                    topic: s.joined_sub_cluster().map(|(t, _)| t.0),
                    member: s.id,
                }
            })
            .collect();
    }

    pub fn into_metrics(self) -> MetricsLog {
        self.metrics
    }
}

/// Builds the world for `config`, runs it to completion and returns its log.
pub fn run(config: SimConfig) -> Result<MetricsLog, ConfigError> {
    let mut world = World::new(config)?;
    world.run_to_completion();
    Ok(world.into_metrics())
}

#[cfg(test)]
mod tests;
