//! Decentralized tile auction.
//!
//! Every agent keeps its own [`TileBelief`] per tile and only learns about other
//! agents' bids, claims and searches through messages. Conflicts caused by late
//! or lost messages are repaired by the reconcile rules:
//!
//! - a stronger bid or claim on a tile this agent claimed (and has not searched)
//!   makes it drop the claim;
//! - a weaker bid or claim on its own claim is answered with a `Correction`
//!   re-asserting the claim;
//! - any bid or claim on a tile it believes searched is answered with a
//!   `SearchedAnnounce`;
//! - `SearchedAnnounce` always wins.
//!
//! Bids are totally ordered by `(value, bidder)`, so every agent that eventually
//! sees the same set of bids agrees on the winner.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::meshnet::Payload;
use crate::{AgentId, Error, Result, TileIndex, Vec3};

/// Bid value with the bidder id as final tie-break.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BidScore {
    pub value: f64,
    pub bidder: AgentId,
}

impl Eq for BidScore {}

impl PartialOrd for BidScore {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for BidScore {
    fn cmp(&self, other: &Self) -> Ordering {
        self.value
            .total_cmp(&other.value)
            .then(self.bidder.cmp(&other.bidder))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bid {
    pub tile: TileIndex,
    pub score: BidScore,
    pub placed_at: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TileStatus {
    Unclaimed,
    InAuction,
    ClaimedBySelf,
    ClaimedByOther,
    Searched,
}

/// One agent's view of one tile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TileBelief {
    pub index: TileIndex,
    pub state: TileStatus,
    /// Strongest bid or claim known for the tile.
    pub best: Option<BidScore>,
    /// This agent's own most recent bid, even if it is losing.
    pub own_bid: Option<BidScore>,
    pub auction_deadline: Option<f64>,
}

impl TileBelief {
    pub fn new(index: TileIndex) -> Self {
        TileBelief {
            index,
            state: TileStatus::Unclaimed,
            best: None,
            own_bid: None,
            auction_deadline: None,
        }
    }

    /// True if `score` would beat the strongest known bid.
    pub fn would_win(&self, score: BidScore) -> bool {
        self.best.is_none_or(|b| score > b)
    }

    /// Whether this agent is currently the best-known bidder.
    pub fn leading(&self, self_id: AgentId) -> bool {
        self.best.is_some_and(|b| b.bidder == self_id)
    }

    fn raise(&mut self, score: BidScore) -> bool {
        if self.would_win(score) {
            self.best = Some(score);
            true
        } else {
            false
        }
    }
}

/// Fixed bid weights; they are not part of the adaptation space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BidWeights {
    pub w_dist: f64,
    pub w_near: f64,
}

impl Default for BidWeights {
    fn default() -> Self {
        BidWeights {
            w_dist: 1.0,
            w_near: 0.3,
        }
    }
}

/// Bid for a tile: nearness to self plus a spread term that grows with the
/// distance of the nearest other known agent to the tile. Higher is better.
pub fn score_tile(
    self_position: Vec3,
    tile_center: Vec3,
    believed_others: &[Vec3],
    weights: BidWeights,
    d_max: f64,
) -> f64 {
    let nearness = 1.0 - self_position.distance(tile_center) / d_max;
    let spread = believed_others
        .iter()
        .map(|o| o.distance(tile_center))
        .min_by(f64::total_cmp)
        .map_or(1.0, |d| d / d_max);
    weights.w_dist * nearness + weights.w_near * spread
}

/// Places (or raises) this agent's bid. Returns the announcement to send.
pub fn open_or_raise(bid: Bid, belief: &mut TileBelief, t_auction: f64, now: f64) -> Result<Payload> {
    match belief.state {
        TileStatus::Unclaimed => {
            belief.state = TileStatus::InAuction;
            belief.auction_deadline = Some(now + t_auction);
            belief.best = Some(bid.score);
        }
        TileStatus::InAuction => {
            belief.raise(bid.score);
        }
        other => {
            return Err(Error::InvalidBid(format!(
                "tile {:?} is {other:?}",
                belief.index
            )))
        }
    }
    belief.own_bid = Some(bid.score);
    Ok(Payload::Bid(bid))
}

/// Closes an auction whose deadline has passed. Emits a claim if this agent won.
pub fn resolve_deadline(belief: &mut TileBelief, self_id: AgentId, now: f64) -> Option<Payload> {
    if belief.state != TileStatus::InAuction || belief.auction_deadline.is_none_or(|d| now < d) {
        return None;
    }
    belief.auction_deadline = None;
    if belief.leading(self_id) {
        belief.state = TileStatus::ClaimedBySelf;
        Some(Payload::Claim {
            tile: belief.index,
            score: belief.best.expect("leading implies a best bid"),
        })
    } else {
        belief.state = TileStatus::ClaimedByOther;
        None
    }
}

/// Applies one incoming bidding message to the belief of the tile it names.
/// Returns any corrective messages this agent should send.
pub fn reconcile(
    incoming: &Payload,
    belief: &mut TileBelief,
    self_id: AgentId,
    t_auction: f64,
    now: f64,
) -> Vec<Payload> {
    let searched_reply = |b: &TileBelief| Payload::Searched {
        tile: b.index,
        searcher: self_id,
    };
    match *incoming {
        Payload::Searched { .. } => {
            belief.state = TileStatus::Searched;
            belief.auction_deadline = None;
            vec![]
        }
        Payload::Bid(Bid { score, .. }) => {
            if score.bidder == self_id {
                return vec![];
            }
            match belief.state {
                TileStatus::Searched => vec![searched_reply(belief)],
                TileStatus::ClaimedBySelf => {
                    let mine = belief.best.expect("own claim has a score");
                    if score > mine {
                        belief.best = Some(score);
                        belief.state = TileStatus::InAuction;
                        belief.auction_deadline = Some(now + t_auction);
                        vec![]
                    } else {
                        vec![Payload::Correction {
                            tile: belief.index,
                            score: mine,
                        }]
                    }
                }
                TileStatus::ClaimedByOther | TileStatus::InAuction => {
                    belief.raise(score);
                    vec![]
                }
                TileStatus::Unclaimed => {
                    belief.state = TileStatus::InAuction;
                    belief.best = Some(score);
                    belief.auction_deadline = Some(now + t_auction);
                    vec![]
                }
            }
        }
        Payload::Claim { score, .. } | Payload::Correction { score, .. } => {
            if score.bidder == self_id {
                return vec![];
            }
            match belief.state {
                TileStatus::Searched => vec![searched_reply(belief)],
                TileStatus::ClaimedBySelf => {
                    let mine = belief.best.expect("own claim has a score");
                    if score > mine {
                        belief.best = Some(score);
                        belief.state = TileStatus::ClaimedByOther;
                        vec![]
                    } else {
                        vec![Payload::Correction {
                            tile: belief.index,
                            score: mine,
                        }]
                    }
                }
                TileStatus::ClaimedByOther => {
                    belief.raise(score);
                    vec![]
                }
                TileStatus::InAuction | TileStatus::Unclaimed => {
                    if belief.raise(score) {
                        belief.state = TileStatus::ClaimedByOther;
                        belief.auction_deadline = None;
                    }
                    vec![]
                }
            }
        }
        Payload::Position { .. } => vec![],
    }
}

/// Tile named by a bidding payload, if any.
pub fn payload_tile(p: &Payload) -> Option<TileIndex> {
    match p {
        Payload::Bid(b) => Some(b.tile),
        Payload::Claim { tile, .. }
        | Payload::Correction { tile, .. }
        | Payload::Searched { tile, .. } => Some(*tile),
        Payload::Position { .. } => None,
    }
}

/// One line of the optional auction trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuctionEvent {
    pub time: f64,
    pub tile: TileIndex,
    pub event: &'static str,
    pub agent: AgentId,
    pub bid_value: Option<f64>,
}
