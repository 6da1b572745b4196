//! Simulated mesh network: range-limited topology, per-message latency and loss,
//! and mesh-wide flooding with duplicate suppression for bidding traffic.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BinaryHeap, HashSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bidding::{Bid, BidScore};
use crate::rng::SimRng;
use crate::world::AgentState;
use crate::{AgentId, Error, Result, TileIndex, Vec3};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    #[serde(default)]
    pub mean_delay: f64,
    /// Half-width of the uniform latency jitter. Defaults to a quarter of the mean.
    #[serde(default)]
    pub delay_jitter: Option<f64>,
    #[serde(default)]
    pub drop_probability: f64,
    #[serde(default = "NetworkConfig::d_comm_range")]
    pub comm_range: f64,
    #[serde(default = "NetworkConfig::d_max_hops")]
    pub max_hops: u32,
    /// Flood bidding traffic through the mesh; when false bids reach immediate
    /// neighbors only and rely on corrections to spread.
    #[serde(default = "NetworkConfig::d_propagate_bids")]
    pub propagate_bids: bool,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            mean_delay: 0.0,
            delay_jitter: None,
            drop_probability: 0.0,
            comm_range: Self::d_comm_range(),
            max_hops: Self::d_max_hops(),
            propagate_bids: Self::d_propagate_bids(),
        }
    }
}

impl NetworkConfig {
    fn d_comm_range() -> f64 {
        200.0
    }
    fn d_max_hops() -> u32 {
        16
    }
    fn d_propagate_bids() -> bool {
        true
    }

    pub fn with_delay(mean_delay: f64) -> Self {
        NetworkConfig {
            mean_delay,
            ..Default::default()
        }
    }

    pub fn jitter(&self) -> f64 {
        self.delay_jitter.unwrap_or(0.25 * self.mean_delay)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mean_delay.is_finite() && self.mean_delay >= 0.0) {
            return Err(Error::config("network.mean_delay", "must be >= 0"));
        }
        if !(self.jitter().is_finite() && self.jitter() >= 0.0) {
            return Err(Error::config("network.delay_jitter", "must be >= 0"));
        }
        if !(0.0..=1.0).contains(&self.drop_probability) {
            return Err(Error::config(
                "network.drop_probability",
                "must lie in [0, 1]",
            ));
        }
        if !(self.comm_range.is_finite() && self.comm_range > 0.0) {
            return Err(Error::config("network.comm_range", "must be positive"));
        }
        if self.max_hops == 0 {
            return Err(Error::config("network.max_hops", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MessageId {
    pub origin: AgentId,
    pub seq: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MessageKind {
    PositionUpdate,
    BidAnnounce,
    ClaimAnnounce,
    SearchedAnnounce,
    Correction,
}

impl MessageKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MessageKind::PositionUpdate => "position",
            MessageKind::BidAnnounce => "bid",
            MessageKind::ClaimAnnounce => "claim",
            MessageKind::SearchedAnnounce => "searched",
            MessageKind::Correction => "correction",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Payload {
    Position {
        position: Vec3,
        velocity: Vec3,
        acceleration: Vec3,
    },
    Bid(Bid),
    Claim {
        tile: TileIndex,
        score: BidScore,
    },
    Searched {
        tile: TileIndex,
        searcher: AgentId,
    },
    /// Re-assertion of the sender's own claim after it saw a weaker one.
    Correction {
        tile: TileIndex,
        score: BidScore,
    },
}

impl Payload {
    pub fn kind(&self) -> MessageKind {
        match self {
            Payload::Position { .. } => MessageKind::PositionUpdate,
            Payload::Bid(_) => MessageKind::BidAnnounce,
            Payload::Claim { .. } => MessageKind::ClaimAnnounce,
            Payload::Searched { .. } => MessageKind::SearchedAnnounce,
            Payload::Correction { .. } => MessageKind::Correction,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub id: MessageId,
    pub sender: AgentId,
    pub sent_at: f64,
    pub payload: Payload,
    pub propagate: bool,
    pub hop_count: u32,
}

impl Message {
    pub fn kind(&self) -> MessageKind {
        self.payload.kind()
    }
}

/// Other alive agents within `comm_range` of agent `id`.
pub fn neighbors(states: &[AgentState], id: AgentId, comm_range: f64) -> Result<Vec<AgentId>> {
    let me = states
        .iter()
        .find(|s| s.id == id)
        .ok_or(Error::UnknownAgent(id))?;
    let r2 = comm_range * comm_range;
    Ok(states
        .iter()
        .filter(|s| s.id != id && s.alive && s.position.distance_squared(me.position) <= r2)
        .map(|s| s.id)
        .collect())
}

#[derive(Debug, Clone)]
struct Entry {
    delivery_time: f64,
    recipient: AgentId,
    message: Message,
}

impl Entry {
    fn key(&self) -> (AgentId, u64, AgentId, u32) {
        (
            self.message.id.origin,
            self.message.id.seq,
            self.recipient,
            self.message.hop_count,
        )
    }
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Entry {}
impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.delivery_time
            .total_cmp(&other.delivery_time)
            .then_with(|| self.key().cmp(&other.key()))
    }
}

/// Messages in flight, always popped in `(delivery_time, sender, sequence)` order.
#[derive(Debug, Clone, Default)]
pub struct InFlightQueue {
    heap: BinaryHeap<Reverse<Entry>>,
}

impl InFlightQueue {
    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn push(&mut self, delivery_time: f64, recipient: AgentId, message: Message) {
        self.heap.push(Reverse(Entry {
            delivery_time,
            recipient,
            message,
        }));
    }

    /// Removes every entry due at or before `now`, in delivery order.
    fn pop_due(&mut self, now: f64) -> Vec<(f64, AgentId, Message)> {
        let mut due = Vec::new();
        while let Some(Reverse(top)) = self.heap.peek() {
            if top.delivery_time > now {
                break;
            }
            let Reverse(e) = self.heap.pop().expect("peeked");
            due.push((e.delivery_time, e.recipient, e.message));
        }
        due
    }

    /// Drains due entries grouped by recipient, without any network side effects.
    pub fn deliver_due(&mut self, now: f64) -> BTreeMap<AgentId, Vec<Message>> {
        let mut out: BTreeMap<AgentId, Vec<Message>> = BTreeMap::new();
        for (_, recipient, msg) in self.pop_due(now) {
            out.entry(recipient).or_default().push(msg);
        }
        out
    }
}

/// One line of the optional delivery trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeliveryRecord {
    pub time: f64,
    pub kind: &'static str,
    pub sender: AgentId,
    pub recipient: AgentId,
    pub hop_count: u32,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkStats {
    pub transmissions: u64,
    pub dropped: u64,
    pub delivered: u64,
    pub duplicates_suppressed: u64,
}

/// The network for one trial: queue, per-agent duplicate filters and the loss/latency RNG.
#[derive(Debug, Clone)]
pub struct Network {
    pub cfg: NetworkConfig,
    queue: InFlightQueue,
    seen: Vec<HashSet<MessageId>>,
    next_seq: Vec<u64>,
    rng: SimRng,
    trace: Option<Vec<DeliveryRecord>>,
    pub stats: NetworkStats,
}

impl Network {
    pub fn new(cfg: NetworkConfig, n_agents: usize, rng: SimRng) -> Self {
        Network {
            cfg,
            queue: InFlightQueue::default(),
            seen: vec![HashSet::new(); n_agents],
            next_seq: vec![0; n_agents],
            rng,
            trace: None,
            stats: NetworkStats::default(),
        }
    }

    pub fn enable_trace(&mut self) {
        self.trace.get_or_insert_with(Vec::new);
    }

    pub fn take_trace(&mut self) -> Vec<DeliveryRecord> {
        self.trace.take().unwrap_or_default()
    }

    pub fn in_flight(&self) -> usize {
        self.queue.len()
    }

    /// Builds an outbound message with a fresh id from `sender`.
    pub fn compose(&mut self, sender: AgentId, now: f64, payload: Payload) -> Message {
        let seq = &mut self.next_seq[sender as usize];
        let id = MessageId { origin: sender, seq: *seq };
        *seq += 1;
        let propagate = match payload.kind() {
            MessageKind::PositionUpdate => false,
            _ => self.cfg.propagate_bids,
        };
        Message {
            id,
            sender,
            sent_at: now,
            payload,
            propagate,
            hop_count: 0,
        }
    }

    fn latency(&mut self) -> f64 {
        let jitter = self.cfg.jitter();
        let sample = if jitter > 0.0 {
            self.rng.random_range(-jitter..=jitter)
        } else {
            0.0
        };
        (self.cfg.mean_delay + sample).max(0.0)
    }

    /// Schedules `msg` from `transmitter` to each of its current neighbors.
    fn transmit(&mut self, msg: &Message, transmitter: AgentId, states: &[AgentState], now: f64) {
        let Some(me) = states.get(transmitter as usize).filter(|s| s.alive) else {
            return;
        };
        let origin = me.position;
        let r2 = self.cfg.comm_range * self.cfg.comm_range;
        for other in states {
            if other.id == transmitter || !other.alive {
                continue;
            }
            if other.position.distance_squared(origin) > r2 {
                continue;
            }
            if msg.propagate && self.seen[other.id as usize].contains(&msg.id) {
                continue;
            }
            self.stats.transmissions += 1;
            if self.cfg.drop_probability > 0.0 && self.rng.random_bool(self.cfg.drop_probability) {
                self.stats.dropped += 1;
                continue;
            }
            let at = now + self.latency();
            self.queue.push(at, other.id, msg.clone());
        }
    }

    /// Sends a message originated by `msg.sender`. `states` is indexed by agent id.
    pub fn send(&mut self, msg: Message, states: &[AgentState], now: f64) {
        if msg.propagate {
            self.seen[msg.sender as usize].insert(msg.id);
        }
        self.transmit(&msg, msg.sender, states, now);
    }

    /// Delivers everything due by `now`, forwarding flooded messages onward from each
    /// first-time recipient. Forwarded copies are never delivered within the same call.
    pub fn deliver_due(&mut self, now: f64, states: &[AgentState]) -> BTreeMap<AgentId, Vec<Message>> {
        let mut out: BTreeMap<AgentId, Vec<Message>> = BTreeMap::new();
        for (time, recipient, msg) in self.queue.pop_due(now) {
            if !states.get(recipient as usize).is_some_and(|s| s.alive) {
                continue;
            }
            if msg.propagate {
                if !self.seen[recipient as usize].insert(msg.id) {
                    self.stats.duplicates_suppressed += 1;
                    continue;
                }
                if msg.hop_count + 1 < self.cfg.max_hops {
                    let mut fwd = msg.clone();
                    fwd.hop_count += 1;
                    self.transmit(&fwd, recipient, states, now);
                }
            }
            self.stats.delivered += 1;
            if let Some(trace) = self.trace.as_mut() {
                trace.push(DeliveryRecord {
                    time,
                    kind: msg.kind().as_str(),
                    sender: msg.sender,
                    recipient,
                    hop_count: msg.hop_count,
                });
            }
            out.entry(recipient).or_default().push(msg);
        }
        out
    }
}
