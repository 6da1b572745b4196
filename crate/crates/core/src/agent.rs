//! Per-agent decision process: belief maintenance, bidding, neighbor prediction,
//! the receding-horizon solve and actuation.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bidding::{self, AuctionEvent, Bid, BidScore, BidWeights, TileBelief, TileStatus};
use crate::costs::{self, CostProfile, DecisionContext, NeighborPath};
use crate::meshnet::{Message, Payload};
use crate::optimizer::{self, DEParams, Solution};
use crate::rng::{self, SimRng};
use crate::world::{AgentState, Tile, WorldConfig};
use crate::{AgentId, TileIndex, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeighborBelief {
    pub id: AgentId,
    pub position: Vec3,
    pub velocity: Vec3,
    pub acceleration: Vec3,
    /// Sender timestamp of the update this belief came from.
    pub observed_at: f64,
}

/// Dead-reckons a neighbor to `horizon_time`.
pub fn predict_neighbor(belief: &NeighborBelief, horizon_time: f64) -> Vec3 {
    costs::dead_reckon(
        belief.position,
        belief.velocity,
        belief.acceleration,
        horizon_time - belief.observed_at,
    )
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Messages naming a tile outside the grid.
    pub ignored_messages: u64,
    pub stale_updates: u64,
    pub corrections_sent: u64,
}

/// One agent's local view of the world.
#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeBase {
    pub neighbors: BTreeMap<AgentId, NeighborBelief>,
    pub tiles: Vec<TileBelief>,
    cols: u32,
    pub current_goal: Option<TileIndex>,
    pub candidate_bid: Option<Bid>,
    pub diagnostics: Diagnostics,
}

impl KnowledgeBase {
    pub fn new(tiles: &[Tile], cols: u32) -> Self {
        KnowledgeBase {
            neighbors: BTreeMap::new(),
            tiles: tiles.iter().map(|t| TileBelief::new(t.index)).collect(),
            cols,
            current_goal: None,
            candidate_bid: None,
            diagnostics: Diagnostics::default(),
        }
    }

    pub fn linear(&self, (row, col): TileIndex) -> Option<usize> {
        let i = row as usize * self.cols as usize + col as usize;
        (col < self.cols && i < self.tiles.len()).then_some(i)
    }

    pub fn tile(&self, index: TileIndex) -> Option<&TileBelief> {
        self.linear(index).map(|i| &self.tiles[i])
    }

    /// Upserts a position update, keeping the newest by sender timestamp.
    pub fn observe_neighbor(&mut self, update: NeighborBelief) {
        match self.neighbors.get(&update.id) {
            Some(old) if old.observed_at >= update.observed_at => self.diagnostics.stale_updates += 1,
            _ => {
                self.neighbors.insert(update.id, update);
            }
        }
    }

    /// Drops goal or candidate if the tile's belief no longer supports it.
    fn refresh_commitments(&mut self, self_id: AgentId, i: usize) {
        let b = self.tiles[i];
        if self.current_goal == Some(b.index) && b.state != TileStatus::ClaimedBySelf {
            self.current_goal = None;
        }
        if let Some(c) = self.candidate_bid {
            if c.tile == b.index && !(b.state == TileStatus::InAuction && b.leading(self_id)) {
                self.candidate_bid = None;
            }
        }
    }

    /// Applies a batch of delivered messages in order. Returns corrective payloads.
    pub fn ingest(&mut self, self_id: AgentId, batch: &[Message], t_auction: f64, now: f64) -> Vec<Payload> {
        let mut out = Vec::new();
        for msg in batch {
            match msg.payload {
                Payload::Position {
                    position,
                    velocity,
                    acceleration,
                } => {
                    if msg.sender != self_id {
                        self.observe_neighbor(NeighborBelief {
                            id: msg.sender,
                            position,
                            velocity,
                            acceleration,
                            observed_at: msg.sent_at,
                        });
                    }
                }
                ref p => {
                    let Some(i) = bidding::payload_tile(p).and_then(|t| self.linear(t)) else {
                        self.diagnostics.ignored_messages += 1;
                        continue;
                    };
                    let replies = bidding::reconcile(p, &mut self.tiles[i], self_id, t_auction, now);
                    self.diagnostics.corrections_sent += replies.len() as u64;
                    out.extend(replies);
                    self.refresh_commitments(self_id, i);
                }
            }
        }
        out
    }

    /// Records a tile this agent photographed. Returns the announcement on first sight.
    pub fn observe_searched(&mut self, self_id: AgentId, i: usize) -> Option<Payload> {
        let b = &mut self.tiles[i];
        if b.state == TileStatus::Searched {
            return None;
        }
        b.state = TileStatus::Searched;
        b.auction_deadline = None;
        let tile = b.index;
        self.refresh_commitments(self_id, i);
        Some(Payload::Searched {
            tile,
            searcher: self_id,
        })
    }

    /// Closes expired auctions. Returns claims won.
    pub fn resolve_deadlines(&mut self, self_id: AgentId, now: f64) -> Vec<Payload> {
        let mut out = Vec::new();
        for i in 0..self.tiles.len() {
            if self.tiles[i].auction_deadline.is_none() {
                continue;
            }
            if let Some(claim) = bidding::resolve_deadline(&mut self.tiles[i], self_id, now) {
                out.push(claim);
                if self.current_goal.is_none() {
                    self.current_goal = Some(self.tiles[i].index);
                }
            }
            self.refresh_commitments(self_id, i);
        }
        out
    }

    /// Fresh neighbor beliefs.
    pub fn fresh_neighbors(&self, now: f64, staleness_limit: f64) -> impl Iterator<Item = &NeighborBelief> {
        self.neighbors
            .values()
            .filter(move |b| now - b.observed_at <= staleness_limit)
    }
}

/// Mutable per-agent controller state around its knowledge base.
#[derive(Debug, Clone)]
pub struct Agent {
    pub id: AgentId,
    pub kb: KnowledgeBase,
    pub profile: CostProfile,
    pub de: DEParams,
    pub weights: BidWeights,
    seed: u64,
    gps: SimRng,
    /// Acceleration commanded by the latest decision.
    command: Vec3,
    last_solution: Option<Vec3>,
    next_decision: f64,
    next_broadcast: f64,
    pub decisions: u64,
    pub infeasible_decisions: u64,
    pub auction_log: Option<Vec<AuctionEvent>>,
}

/// What one agent wants to happen this tick.
#[derive(Debug, Clone, Default)]
pub struct StepOutput {
    pub outbox: Vec<Payload>,
    /// Waypoint handed to the kinematics for this tick.
    pub waypoint: Option<Vec3>,
}

impl Agent {
    pub fn new(id: AgentId, kb: KnowledgeBase, profile: CostProfile, de: DEParams, master_seed: u64) -> Self {
        Agent {
            id,
            kb,
            profile,
            de,
            weights: BidWeights::default(),
            seed: master_seed,
            gps: rng::stream(master_seed, &[rng::tag::GPS, id as u64]),
            command: Vec3::ZERO,
            last_solution: None,
            next_decision: 0.0,
            next_broadcast: 0.0,
            decisions: 0,
            infeasible_decisions: 0,
            auction_log: None,
        }
    }

    fn log(&mut self, now: f64, tile: TileIndex, event: &'static str, value: Option<f64>) {
        if let Some(log) = self.auction_log.as_mut() {
            log.push(AuctionEvent {
                time: now,
                tile,
                event,
                agent: self.id,
                bid_value: value,
            });
        }
    }

    /// Tile center this agent is flying to: the claimed tile, else the bid candidate.
    pub fn goal_center(&self, tiles: &[Tile]) -> Option<Vec3> {
        self.kb
            .current_goal
            .or(self.kb.candidate_bid.map(|b| b.tile))
            .and_then(|t| self.kb.linear(t))
            .map(|i| tiles[i].center)
    }

    /// Picks and places a bid if the agent has neither a goal nor an open bid.
    fn bidding_phase(&mut self, state: &AgentState, tiles: &[Tile], cfg: &WorldConfig, now: f64) -> Option<Payload> {
        if self.kb.current_goal.is_some() || self.kb.candidate_bid.is_some() {
            return None;
        }
        // a leftover claim from a racing auction is taken before bidding again
        if let Some(b) = self.kb.tiles.iter().find(|b| b.state == TileStatus::ClaimedBySelf) {
            self.kb.current_goal = Some(b.index);
            return None;
        }
        let others: Vec<Vec3> = self
            .kb
            .fresh_neighbors(now, cfg.staleness_limit)
            .map(|b| predict_neighbor(b, now))
            .collect();
        let d_max = cfg.diagonal();
        let mut best: Option<(usize, BidScore)> = None;
        for (i, b) in self.kb.tiles.iter().enumerate() {
            if !matches!(b.state, TileStatus::Unclaimed | TileStatus::InAuction) {
                continue;
            }
            let score = BidScore {
                value: bidding::score_tile(state.position, tiles[i].center, &others, self.weights, d_max),
                bidder: self.id,
            };
            if !b.would_win(score) {
                continue;
            }
            if best.is_none_or(|(_, s)| score.value > s.value) {
                best = Some((i, score));
            }
        }
        let (i, score) = best?;
        let bid = Bid {
            tile: tiles[i].index,
            score,
            placed_at: now,
        };
        let payload = bidding::open_or_raise(bid, &mut self.kb.tiles[i], cfg.t_auction, now)
            .expect("only open tiles are bid on");
        self.kb.candidate_bid = Some(bid);
        self.log(now, bid.tile, "bid", Some(score.value));
        Some(payload)
    }

    /// Builds the decision context for the current state.
    pub fn context(&self, state: &AgentState, tiles: &[Tile], cfg: &WorldConfig, now: f64) -> DecisionContext {
        let acc = state.max_acc_actual;
        // stretch the horizon so the stopping distance at the current speed fits inside it
        let braking = state.velocity.norm() / (2.0 * acc.x.min(acc.y));
        let horizon = cfg.horizon.max(braking);
        let at = now + horizon;
        DecisionContext {
            position: state.position,
            velocity: state.velocity,
            acc_limits: acc,
            horizon,
            neighbors: self
                .kb
                .fresh_neighbors(now, cfg.staleness_limit)
                .map(|b| predict_neighbor(b, at))
                .collect(),
            neighbor_paths: self
                .kb
                .fresh_neighbors(now, cfg.staleness_limit)
                .map(|b| NeighborPath {
                    position: b.position,
                    velocity: b.velocity,
                    acceleration: b.acceleration,
                    elapsed: now - b.observed_at,
                })
                .collect(),
            goal: self.goal_center(tiles),
            profile: self.profile,
            comm_range: cfg.comm_range,
        }
    }

    /// One receding-horizon solve. Returns the chosen horizon position.
    pub fn decide(&mut self, ctx: &DecisionContext, tick: u64) -> Solution {
        let bx = ctx.reachable_box();
        let params = self
            .de
            .with_seed(rng::derive_seed(self.seed ^ self.de.seed, &[rng::tag::OPTIMIZER, self.id as u64, tick]));
        let mut hints = Vec::with_capacity(2);
        if let Some(p) = self.last_solution {
            hints.push(p);
        }
        if let Some(g) = ctx.goal {
            hints.push(g);
        }
        let sol = optimizer::minimize_hinted(
            |p| costs::objective(p, ctx),
            |p| costs::violation(p, ctx),
            &bx,
            &params,
            &hints,
        );
        debug_assert!(bx.contains(sol.point));
        self.decisions += 1;
        if !sol.feasible {
            self.infeasible_decisions += 1;
        }
        sol
    }

    /// Position update with horizontal GPS noise.
    pub fn broadcast_self(&mut self, state: &AgentState, gps_noise_radius: f64) -> Payload {
        Payload::Position {
            position: state.position + gps_offset(&mut self.gps, gps_noise_radius),
            velocity: state.velocity,
            acceleration: state.acceleration,
        }
    }

    /// Runs one tick of the agent's loop and returns its messages and waypoint.
    #[allow(clippy::too_many_arguments)]
    pub fn step(
        &mut self,
        state: &AgentState,
        inbox: &[Message],
        photographed: Option<usize>,
        tiles: &[Tile],
        cfg: &WorldConfig,
        tick: u64,
        now: f64,
    ) -> StepOutput {
        let mut out = StepOutput::default();
        let goal_before = self.kb.current_goal;
        let candidate_before = self.kb.candidate_bid;
        out.outbox.extend(self.kb.ingest(self.id, inbox, cfg.t_auction, now));
        if let Some(i) = photographed {
            if let Some(p) = self.kb.observe_searched(self.id, i) {
                self.log(now, tiles[i].index, "searched", None);
                out.outbox.push(p);
            }
        }
        for claim in self.kb.resolve_deadlines(self.id, now) {
            if let Payload::Claim { tile, score } = claim {
                self.log(now, tile, "claim", Some(score.value));
            }
            out.outbox.push(claim);
        }
        if self.auction_log.is_some() {
            if let Some(c) = candidate_before {
                if self.kb.candidate_bid.is_none() && self.kb.current_goal != Some(c.tile) {
                    self.log(now, c.tile, "lost", Some(c.score.value));
                }
            }
            if let Some(g) = goal_before {
                if self.kb.current_goal.is_none() && self.kb.tile(g).is_some_and(|b| b.state != TileStatus::Searched) {
                    self.log(now, g, "dropped", None);
                }
            }
        }
        if let Some(bid) = self.bidding_phase(state, tiles, cfg, now) {
            out.outbox.push(bid);
        }

        if now + 1e-9 >= self.next_decision {
            self.next_decision = now + cfg.t_update;
            let ctx = self.context(state, tiles, cfg, now);
            let sol = self.decide(&ctx, tick);
            let t = ctx.horizon;
            self.command = (sol.point - state.position - state.velocity * t) * (2.0 / (t * t));
            self.last_solution = Some(sol.point);
        }
        let dt = cfg.sim_dt;
        out.waypoint = Some(state.position + state.velocity * dt + self.command * (dt * dt));

        if now + 1e-9 >= self.next_broadcast {
            self.next_broadcast = now + cfg.t_broadcast;
            out.outbox.push(self.broadcast_self(state, cfg.gps_noise_radius));
        }
        out
    }
}

/// Uniform sample from the horizontal disk of radius `r`.
pub fn gps_offset(rng: &mut impl Rng, r: f64) -> Vec3 {
    if r <= 0.0 {
        return Vec3::ZERO;
    }
    let rho = r * rng.random::<f64>().sqrt();
    let theta = TAU * rng.random::<f64>();
    Vec3::new(rho * theta.cos(), rho * theta.sin(), 0.0)
}
