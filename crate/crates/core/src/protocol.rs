//! Per-node self-organisation state machine.
//!
//! Every device runs the same transition function. Expertise requests flood
//! the network, same-interest neighbours answer with one-hop expertise
//! replies, and each device turns the replies it heard into a density weight
//! `D = α·n/N + β·mean(E)`. Density messages then form a gradient: a device
//! only forwards a density that beats the best one it knows, so the trail
//! converges on the densest device, which becomes the cluster point.
//!
//! The same machinery runs a second time inside each primary cluster, keyed
//! by the device's top Topic of Interest, to form sub-clusters.

use std::collections::BTreeMap;
use std::fmt;

use rustc_hash::FxHashSet;
use thiserror::Error;

pub type NodeId = u32;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error("phase {requested:?} requested while in {current:?}")]
    PhaseOrder { current: Phase, requested: Phase },
    #[error("election has not completed (phase {0:?})")]
    ElectionPending(Phase),
    #[error("node {0} is not a cluster point")]
    NotClusterPoint(NodeId),
    #[error("invalid density parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SubjectId(pub u16);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TopicId(pub u16);

/// Globally unique message id: the emitting node in the high half, a
/// per-node sequence number in the low half.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MsgId(u64);

impl MsgId {
    pub fn new(emitter: NodeId, seq: u32) -> Self {
        Self((u64::from(emitter) << 32) | u64::from(seq))
    }

    pub fn emitter(self) -> NodeId {
        (self.0 >> 32) as NodeId
    }
}

impl fmt::Display for MsgId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.emitter(), self.0 as u32)
    }
}

/// Position in the hall, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Location {
    pub x: f64,
    pub y: f64,
}

impl Location {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Location) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// What a message is about: a Subject of Interest, or a Topic of Interest
/// inside one primary cluster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scope {
    Subject(SubjectId),
    Topic {
        subject: SubjectId,
        cluster: NodeId,
        topic: TopicId,
    },
}

impl Scope {
    pub fn subject(self) -> SubjectId {
        match self {
            Scope::Subject(s) | Scope::Topic { subject: s, .. } => s,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMsg {
    pub origin: NodeId,
    pub scope: Scope,
    pub density: f64,
    pub location: Location,
    pub id: MsgId,
    pub hop: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSummary {
    pub cluster_point: NodeId,
    pub subject: SubjectId,
    /// Advertised topics with their member counts, ordered by topic id.
    pub topics: Vec<(TopicId, u32)>,
    pub density: f64,
    pub location: Location,
    pub id: MsgId,
    pub hop: u32,
}

impl ClusterSummary {
    pub fn advertises(&self, topic: TopicId) -> bool {
        self.topics.iter().any(|&(t, c)| t == topic && c > 0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    ExpertiseRequest {
        origin: NodeId,
        scope: Scope,
        id: MsgId,
        hop: u32,
    },
    ExpertiseReply {
        origin: NodeId,
        scope: Scope,
        expertise: f64,
        id: MsgId,
    },
    Density(DensityMsg),
    ClusterSummary(ClusterSummary),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MsgKind {
    ExpertiseRequest,
    ExpertiseReply,
    Density,
    ClusterSummary,
}

impl MsgKind {
    pub const ALL: [MsgKind; 4] = [
        MsgKind::ExpertiseRequest,
        MsgKind::ExpertiseReply,
        MsgKind::Density,
        MsgKind::ClusterSummary,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MsgKind::ExpertiseRequest => "expertise_request",
            MsgKind::ExpertiseReply => "expertise_reply",
            MsgKind::Density => "density",
            MsgKind::ClusterSummary => "cluster_summary",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }

    /// Messages that make up cluster-point traffic.
    pub fn is_cluster_point_traffic(self) -> bool {
        matches!(self, MsgKind::Density | MsgKind::ClusterSummary)
    }
}

impl Message {
    pub fn id(&self) -> MsgId {
        match self {
            Message::ExpertiseRequest { id, .. } | Message::ExpertiseReply { id, .. } => *id,
            Message::Density(d) => d.id,
            Message::ClusterSummary(s) => s.id,
        }
    }

    pub fn kind(&self) -> MsgKind {
        match self {
            Message::ExpertiseRequest { .. } => MsgKind::ExpertiseRequest,
            Message::ExpertiseReply { .. } => MsgKind::ExpertiseReply,
            Message::Density(_) => MsgKind::Density,
            Message::ClusterSummary(_) => MsgKind::ClusterSummary,
        }
    }

    pub fn subject(&self) -> SubjectId {
        match self {
            Message::ExpertiseRequest { scope, .. } | Message::ExpertiseReply { scope, .. } => {
                scope.subject()
            }
            Message::Density(d) => d.scope.subject(),
            Message::ClusterSummary(s) => s.subject,
        }
    }

    pub fn origin(&self) -> NodeId {
        match self {
            Message::ExpertiseRequest { origin, .. } | Message::ExpertiseReply { origin, .. } => {
                *origin
            }
            Message::Density(d) => d.origin,
            Message::ClusterSummary(s) => s.cluster_point,
        }
    }

    /// The scalar carried for trace export: expertise or density, 0 otherwise.
    pub fn value(&self) -> f64 {
        match self {
            Message::ExpertiseReply { expertise, .. } => *expertise,
            Message::Density(d) => d.density,
            Message::ClusterSummary(s) => s.density,
            Message::ExpertiseRequest { .. } => 0.0,
        }
    }
}

/// Weights of the density formula. `alpha + beta` must equal 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityParams {
    pub alpha: f64,
    pub beta: f64,
    pub population: u32,
}

impl DensityParams {
    pub fn new(alpha: f64, beta: f64, population: u32) -> Result<Self, ProtocolError> {
        if !(alpha >= 0.0 && beta >= 0.0) {
            return Err(ProtocolError::InvalidParams(
                "alpha and beta must be non-negative".into(),
            ));
        }
        if ((alpha + beta) - 1.0).abs() > 1e-9 {
            return Err(ProtocolError::InvalidParams(format!(
                "alpha + beta must equal 1 (got {})",
                alpha + beta
            )));
        }
        if population == 0 {
            return Err(ProtocolError::InvalidParams(
                "population must be positive".into(),
            ));
        }
        Ok(Self {
            alpha,
            beta,
            population,
        })
    }
}

impl Default for DensityParams {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            beta: 0.5,
            population: 1,
        }
    }
}

/// Density weight of a node that heard `replies` from same-interest
/// neighbours. The node itself counts towards `n` and the mean.
///
/// Expertise values are summed in ascending order so that two nodes holding
/// the same multiset of values get bit-identical densities.
pub fn compute_density(
    replies: &BTreeMap<NodeId, f64>,
    self_expertise: f64,
    params: &DensityParams,
) -> f64 {
    let mut values: Vec<f64> = Vec::with_capacity(replies.len() + 1);
    values.push(self_expertise);
    values.extend(replies.values().copied());
    values.sort_by(f64::total_cmp);
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    params.alpha * (n / f64::from(params.population)) + params.beta * mean
}

/// Shared, read-only protocol settings.
#[derive(Debug, Clone)]
pub struct ProtocolConfig {
    pub params: DensityParams,
    pub ttl: u32,
    pub subjects: u16,
    /// Owning subject of every topic, indexed by topic id.
    pub topic_subjects: Vec<SubjectId>,
    /// Minimum own density for a node to advertise itself as a cluster point.
    pub quorum_threshold: Option<f64>,
}

impl ProtocolConfig {
    fn scope_is_valid(&self, scope: Scope) -> bool {
        match scope {
            Scope::Subject(s) => s.0 < self.subjects,
            Scope::Topic { subject, topic, .. } => {
                subject.0 < self.subjects
                    && self
                        .topic_subjects
                        .get(topic.0 as usize)
                        .is_some_and(|&owner| owner == subject)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Phase {
    Idle,
    Discover,
    DensityExchange,
    Elect,
    Converge,
    SubCluster,
    Steady,
}

impl Phase {
    pub fn next(self) -> Option<Phase> {
        use Phase::*;
        match self {
            Idle => Some(Discover),
            Discover => Some(DensityExchange),
            DensityExchange => Some(Elect),
            Elect => Some(Converge),
            Converge => Some(SubCluster),
            SubCluster => Some(Steady),
            Steady => None,
        }
    }
}

/// Topic sub-election progress inside the SubCluster phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubStage {
    TopicDiscover,
    TopicElect,
}

/// Best density a node knows about, with the message that carried it.
#[derive(Debug, Clone, PartialEq)]
pub struct BestDensity {
    pub density: f64,
    pub origin: NodeId,
    pub location: Location,
    /// What to re-broadcast when answering a weaker density; `None` for an
    /// own density that was not advertised.
    msg: Option<DensityMsg>,
}

impl BestDensity {
    /// Strict preference: higher density, then smaller origin id.
    fn beaten_by(&self, density: f64, origin: NodeId) -> bool {
        density > self.density || (density == self.density && origin < self.origin)
    }
}

/// One quorum-sensing round: replies heard, own density, best known density.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Election {
    pub replies: BTreeMap<NodeId, f64>,
    pub own_density: Option<f64>,
    pub best: Option<BestDensity>,
}

#[derive(Debug, Clone)]
pub struct NodeState {
    pub id: NodeId,
    pub location: Location,
    pub subject: SubjectId,
    pub expertise: f64,
    /// Ranked topics with their expertise scores, best first.
    pub topics: Vec<(TopicId, f64)>,
    phase: Phase,
    sub_stage: Option<SubStage>,
    pub primary: Election,
    pub topic: Election,
    elected_target: Option<Location>,
    joined_cluster: Option<(NodeId, Location)>,
    joined_sub_cluster: Option<(TopicId, NodeId)>,
    summaries: BTreeMap<NodeId, ClusterSummary>,
    member_topics: BTreeMap<NodeId, TopicId>,
    seen: FxHashSet<MsgId>,
    next_seq: u32,
    arrived: bool,
    pub malformed_dropped: u64,
}

impl NodeState {
    pub fn new(
        id: NodeId,
        location: Location,
        subject: SubjectId,
        expertise: f64,
        topics: Vec<(TopicId, f64)>,
    ) -> Self {
        Self {
            id,
            location,
            subject,
            expertise: expertise.clamp(0.0, 1.0),
            topics,
            phase: Phase::Idle,
            sub_stage: None,
            primary: Election::default(),
            topic: Election::default(),
            elected_target: None,
            joined_cluster: None,
            joined_sub_cluster: None,
            summaries: BTreeMap::new(),
            member_topics: BTreeMap::new(),
            seen: FxHashSet::default(),
            next_seq: 0,
            arrived: false,
            malformed_dropped: 0,
        }
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn sub_stage(&self) -> Option<SubStage> {
        self.sub_stage
    }

    pub fn elected_target(&self) -> Option<Location> {
        self.elected_target
    }

    pub fn joined_cluster(&self) -> Option<NodeId> {
        self.joined_cluster.map(|(id, _)| id)
    }

    pub fn cluster_location(&self) -> Option<Location> {
        self.joined_cluster.map(|(_, loc)| loc)
    }

    pub fn joined_sub_cluster(&self) -> Option<(TopicId, NodeId)> {
        self.joined_sub_cluster
    }

    pub fn top_topic(&self) -> Option<TopicId> {
        self.topics.first().map(|&(t, _)| t)
    }

    pub fn summaries(&self) -> impl Iterator<Item = &ClusterSummary> {
        self.summaries.values()
    }

    pub fn has_seen(&self, id: MsgId) -> bool {
        self.seen.contains(&id)
    }

    fn fresh_id(&mut self) -> MsgId {
        let id = MsgId::new(self.id, self.next_seq);
        self.next_seq += 1;
        self.seen.insert(id);
        id
    }

    fn topic_scope(&self) -> Option<Scope> {
        let (cluster, _) = self.joined_cluster?;
        Some(Scope::Topic {
            subject: self.subject,
            cluster,
            topic: self.top_topic()?,
        })
    }

    fn matches(&self, scope: Scope) -> bool {
        match scope {
            Scope::Subject(s) => s == self.subject,
            t @ Scope::Topic { .. } => self.topic_scope() == Some(t),
        }
    }

    fn expertise_for(&self, scope: Scope) -> f64 {
        match scope {
            Scope::Subject(_) => self.expertise,
            Scope::Topic { topic, .. } => self
                .topics
                .iter()
                .find(|&&(t, _)| t == topic)
                .map_or(0.0, |&(_, e)| e),
        }
    }

    fn election_mut(&mut self, scope: Scope) -> &mut Election {
        match scope {
            Scope::Subject(_) => &mut self.primary,
            Scope::Topic { .. } => &mut self.topic,
        }
    }

    /// Handles one delivered message and returns what the node broadcasts
    /// in response. Duplicates and malformed messages produce nothing.
    pub fn on_message(&mut self, msg: &Message, cfg: &ProtocolConfig) -> Vec<Message> {
        if self.seen.contains(&msg.id()) {
            return Vec::new();
        }
        let valid = match msg {
            Message::ExpertiseRequest { scope, .. } | Message::ExpertiseReply { scope, .. } => {
                cfg.scope_is_valid(*scope)
            }
            Message::Density(d) => cfg.scope_is_valid(d.scope),
            Message::ClusterSummary(s) => cfg.scope_is_valid(Scope::Subject(s.subject)),
        };
        if !valid {
            self.malformed_dropped += 1;
            return Vec::new();
        }
        self.seen.insert(msg.id());

        let mut out = Vec::new();
        match msg {
            &Message::ExpertiseRequest {
                origin,
                scope,
                id,
                hop,
            } => {
                if let Scope::Topic { cluster, topic, .. } = scope {
                    if cluster == self.id {
                        self.member_topics.insert(origin, topic);
                    }
                }
                if self.matches(scope) {
                    out.push(Message::ExpertiseReply {
                        origin: self.id,
                        scope,
                        expertise: self.expertise_for(scope),
                        id: self.fresh_id(),
                    });
                }
                if hop < cfg.ttl {
                    out.push(Message::ExpertiseRequest {
                        origin,
                        scope,
                        id,
                        hop: hop + 1,
                    });
                }
            }
            &Message::ExpertiseReply {
                origin,
                scope,
                expertise,
                ..
            } => {
                if self.matches(scope) && origin != self.id {
                    self.election_mut(scope).replies.insert(origin, expertise);
                }
            }
            Message::Density(d) => {
                if self.matches(d.scope) {
                    out.extend(self.on_density(d, cfg));
                } else if d.hop < cfg.ttl {
                    out.push(Message::Density(DensityMsg {
                        hop: d.hop + 1,
                        ..d.clone()
                    }));
                }
            }
            Message::ClusterSummary(s) => {
                if s.subject == self.subject && s.cluster_point != self.id {
                    let newer = self
                        .summaries
                        .get(&s.cluster_point)
                        .is_none_or(|old| old.id < s.id);
                    if newer {
                        self.summaries.insert(s.cluster_point, s.clone());
                    }
                }
                if s.hop < cfg.ttl {
                    out.push(Message::ClusterSummary(ClusterSummary {
                        hop: s.hop + 1,
                        ..s.clone()
                    }));
                }
            }
        }
        out
    }

    fn on_density(&mut self, d: &DensityMsg, cfg: &ProtocolConfig) -> Vec<Message> {
        let ttl = cfg.ttl;
        let election = self.election_mut(d.scope);
        let adopt = match &election.best {
            None => true,
            Some(best) if best.origin == d.origin => d.density > best.density,
            Some(best) => best.beaten_by(d.density, d.origin),
        };
        if adopt {
            let relay = DensityMsg {
                hop: d.hop + 1,
                ..d.clone()
            };
            election.best = Some(BestDensity {
                density: d.density,
                origin: d.origin,
                location: d.location,
                msg: Some(relay.clone()),
            });
            if d.hop < ttl {
                return vec![Message::Density(relay)];
            }
            return Vec::new();
        }
        // A weaker density from another origin: answer with the stronger one.
        match &election.best {
            Some(BestDensity {
                origin,
                msg: Some(m),
                ..
            }) if *origin != d.origin && m.hop <= ttl => vec![Message::Density(m.clone())],
            _ => Vec::new(),
        }
    }

    /// Advances to `phase` and returns the messages the node emits on entry.
    pub fn start_phase(
        &mut self,
        phase: Phase,
        cfg: &ProtocolConfig,
    ) -> Result<Vec<Message>, ProtocolError> {
        if self.phase.next() != Some(phase) {
            return Err(ProtocolError::PhaseOrder {
                current: self.phase,
                requested: phase,
            });
        }
        self.phase = phase;
        let out = match phase {
            Phase::Idle => Vec::new(),
            Phase::Discover => {
                let id = self.fresh_id();
                vec![Message::ExpertiseRequest {
                    origin: self.id,
                    scope: Scope::Subject(self.subject),
                    id,
                    hop: 0,
                }]
            }
            Phase::DensityExchange => self
                .emit_own_density(Scope::Subject(self.subject), cfg)
                .into_iter()
                .collect(),
            Phase::Elect => Vec::new(),
            Phase::Converge => {
                let (origin, location) = match &self.primary.best {
                    Some(b) => (b.origin, b.location),
                    None => (self.id, self.location),
                };
                self.joined_cluster = Some((origin, location));
                self.elected_target = Some(location);
                Vec::new()
            }
            Phase::SubCluster => {
                self.sub_stage = Some(SubStage::TopicDiscover);
                match self.topic_scope() {
                    Some(scope) => {
                        let id = self.fresh_id();
                        if let Scope::Topic { cluster, topic, .. } = scope {
                            if cluster == self.id {
                                self.member_topics.insert(self.id, topic);
                            }
                        }
                        vec![Message::ExpertiseRequest {
                            origin: self.id,
                            scope,
                            id,
                            hop: 0,
                        }]
                    }
                    None => Vec::new(),
                }
            }
            Phase::Steady => {
                self.sub_stage = None;
                if let Some(topic) = self.top_topic() {
                    let (point, location) = match &self.topic.best {
                        Some(b) => (b.origin, b.location),
                        None => (self.id, self.location),
                    };
                    self.joined_sub_cluster = Some((topic, point));
                    self.elected_target = Some(location);
                }
                Vec::new()
            }
        };
        Ok(out)
    }

    /// Second step of the SubCluster phase: compute the topic density from
    /// the topic replies heard so far and advertise it.
    pub fn start_topic_election(
        &mut self,
        cfg: &ProtocolConfig,
    ) -> Result<Vec<Message>, ProtocolError> {
        if self.phase != Phase::SubCluster || self.sub_stage != Some(SubStage::TopicDiscover) {
            return Err(ProtocolError::PhaseOrder {
                current: self.phase,
                requested: Phase::SubCluster,
            });
        }
        self.sub_stage = Some(SubStage::TopicElect);
        Ok(match self.topic_scope() {
            Some(scope) => self.emit_own_density(scope, cfg).into_iter().collect(),
            None => Vec::new(),
        })
    }

    fn emit_own_density(&mut self, scope: Scope, cfg: &ProtocolConfig) -> Option<Message> {
        let expertise = self.expertise_for(scope);
        let own = compute_density(&self.election_mut(scope).replies, expertise, &cfg.params);
        let eligible = cfg.quorum_threshold.is_none_or(|t| own >= t);
        let (id, location) = (self.id, self.location);
        let msg = eligible.then(|| DensityMsg {
            origin: id,
            scope,
            density: own,
            location,
            id: self.fresh_id(),
            hop: 0,
        });
        let election = self.election_mut(scope);
        election.own_density = Some(own);
        if election.best.as_ref().is_none_or(|b| b.beaten_by(own, id)) {
            election.best = Some(BestDensity {
                density: own,
                origin: id,
                location,
                msg: msg.clone(),
            });
        }
        msg.map(Message::Density)
    }

    /// True when this node's own density won the primary election.
    pub fn is_cluster_point(&self) -> Result<bool, ProtocolError> {
        if self.phase < Phase::Converge {
            return Err(ProtocolError::ElectionPending(self.phase));
        }
        Ok(self
            .primary
            .best
            .as_ref()
            .is_none_or(|b| b.origin == self.id))
    }

    /// Cluster point recomputes its density from everyone it has heard from
    /// and re-advertises it together with a summary of its sub-clusters.
    pub fn cluster_point_refresh(
        &mut self,
        cfg: &ProtocolConfig,
    ) -> Result<Vec<Message>, ProtocolError> {
        if !matches!(
            self.phase,
            Phase::Converge | Phase::SubCluster | Phase::Steady
        ) {
            return Err(ProtocolError::ElectionPending(self.phase));
        }
        if !self.is_cluster_point()? {
            return Err(ProtocolError::NotClusterPoint(self.id));
        }
        let own = compute_density(&self.primary.replies, self.expertise, &cfg.params);
        self.primary.own_density = Some(own);
        let scope = Scope::Subject(self.subject);
        let density = DensityMsg {
            origin: self.id,
            scope,
            density: own,
            location: self.location,
            id: self.fresh_id(),
            hop: 0,
        };
        if self.primary.best.as_ref().is_none_or(|b| own > b.density) {
            self.primary.best = Some(BestDensity {
                density: own,
                origin: self.id,
                location: self.location,
                msg: Some(density.clone()),
            });
        }
        let mut counts: BTreeMap<TopicId, u32> = BTreeMap::new();
        for &t in self.member_topics.values() {
            *counts.entry(t).or_default() += 1;
        }
        let summary = ClusterSummary {
            cluster_point: self.id,
            subject: self.subject,
            topics: counts.into_iter().collect(),
            density: own,
            location: self.location,
            id: self.fresh_id(),
            hop: 0,
        };
        Ok(vec![
            Message::Density(density),
            Message::ClusterSummary(summary),
        ])
    }

    /// Emitted once when the node reaches its cluster point, so the cluster
    /// point can count it in its next refresh.
    pub fn on_arrival(&mut self) -> Vec<Message> {
        if self.arrived {
            return Vec::new();
        }
        self.arrived = true;
        if self.joined_cluster() == Some(self.id) || self.joined_cluster().is_none() {
            return Vec::new();
        }
        let scope = Scope::Subject(self.subject);
        vec![Message::ExpertiseReply {
            origin: self.id,
            scope,
            expertise: self.expertise,
            id: self.fresh_id(),
        }]
    }

    /// Picks a remote cluster to migrate to, if the current one advertises
    /// none of this node's topics and a remote one advertises its top topic.
    pub fn migration_decision(&self, summaries: &[ClusterSummary]) -> Option<NodeId> {
        if !matches!(self.phase, Phase::SubCluster | Phase::Steady) {
            return None;
        }
        let current = self.joined_cluster()?;
        let top = self.top_topic()?;
        let here = summaries.iter().find(|s| s.cluster_point == current)?;
        if self.topics.iter().any(|&(t, _)| here.advertises(t)) {
            return None;
        }
        summaries
            .iter()
            .filter(|s| {
                s.cluster_point != current && s.subject == self.subject && s.advertises(top)
            })
            .map(|s| s.cluster_point)
            .min()
    }

    /// Moves membership to a remote cluster point whose summary we hold.
    pub fn migrate_to(&mut self, cluster_point: NodeId) -> bool {
        let Some(s) = self.summaries.get(&cluster_point) else {
            return false;
        };
        let location = s.location;
        self.joined_cluster = Some((cluster_point, location));
        self.elected_target = Some(location);
        if let Some(topic) = self.top_topic() {
            self.joined_sub_cluster = Some((topic, cluster_point));
        }
        true
    }

    /// Summaries this node has collected, in cluster-point order.
    pub fn collected_summaries(&self) -> Vec<ClusterSummary> {
        self.summaries.values().cloned().collect()
    }
}
