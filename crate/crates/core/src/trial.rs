//! One seeded end-to-end trial and its scoring.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::agent::{Agent, KnowledgeBase, NeighborBelief};
use crate::bidding::AuctionEvent;
use crate::costs::CostProfile;
use crate::meshnet::{DeliveryRecord, Network, NetworkConfig};
use crate::optimizer::{DEParams, SearchBox};
use crate::rng;
use crate::world::{step_kinematics, AgentState, TileState, World, WorldConfig};
use crate::{AgentId, Error, Result, Vec3};

/// Per-agent limit perturbations drawn once at spawn.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Heterogeneity {
    pub velocity_noise_sigma: f64,
    pub acceleration_noise_sigma: f64,
}

impl Heterogeneity {
    pub fn validate(&self) -> Result<()> {
        for (key, v) in [
            ("heterogeneity.velocity_noise_sigma", self.velocity_noise_sigma),
            ("heterogeneity.acceleration_noise_sigma", self.acceleration_noise_sigma),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(key, "must be a finite value >= 0"));
            }
        }
        Ok(())
    }
}

/// How agents are driven.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Controller {
    /// Decentralized auction plus receding-horizon control.
    #[default]
    Drhc,
    /// Centralized baseline: a precomputed lawnmower sweep split between agents,
    /// no communication and no avoidance.
    FlightPlan,
}

/// Everything a trial needs apart from its seed.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialSetup {
    pub world: WorldConfig,
    pub network: NetworkConfig,
    pub profile: CostProfile,
    pub de: DEParams,
    pub n_agents: usize,
    pub heterogeneity: Option<Heterogeneity>,
    pub controller: Controller,
    pub record_tile_times: bool,
}

impl TrialSetup {
    pub fn new(world: WorldConfig, network: NetworkConfig, profile: CostProfile, n_agents: usize) -> Self {
        TrialSetup {
            world,
            network,
            profile,
            de: DEParams::default(),
            n_agents,
            heterogeneity: None,
            controller: Controller::Drhc,
            record_tile_times: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.world.validate()?;
        self.network.validate()?;
        self.profile.validate()?;
        self.de.validate()?;
        if let Some(h) = &self.heterogeneity {
            h.validate()?;
        }
        if self.n_agents == 0 {
            return Err(Error::config("n_agents", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TileTime {
    pub row: u32,
    pub col: u32,
    pub time: f64,
    pub agent: AgentId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub seed: u64,
    pub n_agents: usize,
    /// Seconds until every tile was searched, or `t_max` if the trial timed out.
    pub duration: f64,
    pub fraction_searched: f64,
    pub searched_tiles: usize,
    pub total_tiles: usize,
    /// Distinct pairs of agents that came within the collision radius.
    pub collisions: usize,
    pub heuristic: f64,
    pub messages_delivered: u64,
    pub infeasible_decisions: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_tile_times: Option<Vec<TileTime>>,
}

/// Trial heuristic: normalized time, unsearched fraction and collision penalty,
/// weighted 1, 2 and 4.
pub fn heuristic_e_c(duration: f64, fraction_searched: f64, collisions: usize, t_max: f64, n_agents: usize) -> f64 {
    let c_time = if t_max > 0.0 {
        (duration / t_max).clamp(0.0, 1.0)
    } else {
        1.0
    };
    let c_nsrh = 1.0 - fraction_searched.clamp(0.0, 1.0);
    let c_clsn = if collisions == 0 {
        0.0
    } else {
        (0.25 + 0.75 * collisions as f64 / n_agents.max(1) as f64).min(1.0)
    };
    c_time + 2.0 * c_nsrh + 4.0 * c_clsn
}

/// Grid-packed start cluster in the bottom-left corner at search altitude.
pub fn spawn_positions(cfg: &WorldConfig, n: usize) -> Vec<Vec3> {
    let spacing = cfg.spawn_spacing.unwrap_or(2.0 * cfg.collision_radius);
    let k = (n as f64).sqrt().ceil().max(1.0) as usize;
    (0..n)
        .map(|i| {
            Vec3::new(
                spacing * (1 + i % k) as f64,
                spacing * (1 + i / k) as f64,
                cfg.search_altitude,
            )
        })
        .collect()
}

/// Spawn states, with heterogeneity drawn once per agent from the trial seed.
pub fn spawn_states(cfg: &WorldConfig, n: usize, het: Option<&Heterogeneity>, seed: u64) -> Vec<AgentState> {
    let mut states: Vec<AgentState> = spawn_positions(cfg, n)
        .into_iter()
        .enumerate()
        .map(|(i, p)| AgentState::at_rest(i as AgentId, p, cfg))
        .collect();
    if let Some(h) = het {
        let mut r = rng::stream(seed, &[rng::tag::SPAWN]);
        let vel = Normal::new(0.0, h.velocity_noise_sigma).expect("sigma validated");
        let acc = Normal::new(0.0, h.acceleration_noise_sigma).expect("sigma validated");
        for s in &mut states {
            s.max_speed_actual = (cfg.max_speed + vel.sample(&mut r)).max(1.0);
            let da = acc.sample(&mut r);
            s.max_acc_actual = cfg.acc_limits().map(|a| (a + da).max(0.1));
        }
    }
    states
}

/// Lawnmower order over tile linear indices: rows alternate direction.
pub fn boustrophedon(cfg: &WorldConfig) -> Vec<usize> {
    let (rows, cols) = (cfg.rows() as usize, cfg.cols() as usize);
    let mut order = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        if r % 2 == 0 {
            order.extend((0..cols).map(|c| r * cols + c));
        } else {
            order.extend((0..cols).rev().map(|c| r * cols + c));
        }
    }
    order
}

struct FlightPlan {
    route: Vec<usize>,
    next: usize,
}

/// A trial in progress.
pub struct Simulation {
    setup: TrialSetup,
    seed: u64,
    world: World,
    net: Network,
    agents: Vec<Agent>,
    plans: Vec<FlightPlan>,
    finished: Option<f64>,
}

impl Simulation {
    pub fn new(setup: &TrialSetup, seed: u64) -> Result<Self> {
        setup.validate()?;
        if setup.world.comm_range != setup.network.comm_range {
            return Err(Error::config(
                "network.comm_range",
                "must equal world.comm_range",
            ));
        }
        let states = spawn_states(&setup.world, setup.n_agents, setup.heterogeneity.as_ref(), seed);
        let world = World::new(setup.world.clone(), states)?;
        let net = Network::new(
            setup.network.clone(),
            setup.n_agents,
            rng::stream(seed, &[rng::tag::NETWORK]),
        );
        let agents = (0..setup.n_agents)
            .map(|i| {
                let mut kb = KnowledgeBase::new(&world.tiles, setup.world.cols());
                if setup.world.launch_sync {
                    for s in world.agents.iter().filter(|s| s.id != i as AgentId) {
                        kb.observe_neighbor(NeighborBelief {
                            id: s.id,
                            position: s.position,
                            velocity: s.velocity,
                            acceleration: s.acceleration,
                            observed_at: 0.0,
                        });
                    }
                }
                Agent::new(i as AgentId, kb, setup.profile, setup.de, seed)
            })
            .collect();
        let plans = match setup.controller {
            Controller::Drhc => Vec::new(),
            Controller::FlightPlan => {
                let order = boustrophedon(&setup.world);
                let n = setup.n_agents;
                let chunk = order.len().div_ceil(n);
                (0..n)
                    .map(|i| FlightPlan {
                        route: order.iter().skip(i * chunk).take(chunk).copied().collect(),
                        next: 0,
                    })
                    .collect()
            }
        };
        Ok(Simulation {
            setup: setup.clone(),
            seed,
            world,
            net,
            agents,
            plans,
            finished: None,
        })
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn agents(&self) -> &[Agent] {
        &self.agents
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn is_finished(&self) -> bool {
        self.finished.is_some()
    }

    pub fn enable_traces(&mut self) {
        self.net.enable_trace();
        for a in &mut self.agents {
            a.auction_log.get_or_insert_with(Vec::new);
        }
    }

    pub fn take_traces(&mut self) -> (Vec<DeliveryRecord>, Vec<AuctionEvent>) {
        let mut auctions: Vec<AuctionEvent> = self
            .agents
            .iter_mut()
            .flat_map(|a| a.auction_log.take().unwrap_or_default())
            .collect();
        auctions.sort_by(|a, b| a.time.total_cmp(&b.time).then(a.agent.cmp(&b.agent)));
        (self.net.take_trace(), auctions)
    }

    /// Advances one tick. Returns false once the trial has ended.
    pub fn step(&mut self) -> bool {
        if self.finished.is_some() {
            return false;
        }
        let cfg = &self.setup.world;
        let now = self.world.now();
        if now >= cfg.t_max {
            self.finished = Some(cfg.t_max);
            return false;
        }
        let tick = self.world.clock.tick;
        let seen = self.world.observe_searches();
        let mut photographed = vec![None; self.setup.n_agents];
        for (ai, ti) in seen {
            photographed[ai] = Some(ti);
        }
        if self.setup.controller == Controller::FlightPlan {
            return self.step_flight_plan(now);
        }
        if self.world.all_searched() {
            // the last photographs are still announced so beliefs can converge
            for (ai, ti) in photographed.iter().enumerate() {
                if let Some(ti) = *ti {
                    if let Some(p) = self.agents[ai].kb.observe_searched(ai as AgentId, ti) {
                        let msg = self.net.compose(ai as AgentId, now, p);
                        self.net.send(msg, &self.world.agents, now);
                    }
                }
            }
            self.finished = Some(now);
            return false;
        }

        let mut inbox = self.net.deliver_due(now, &self.world.agents);
        let mut outboxes = Vec::with_capacity(self.agents.len());
        let mut next_states = Vec::with_capacity(self.agents.len());
        for (i, agent) in self.agents.iter_mut().enumerate() {
            let state = &self.world.agents[i];
            let batch = inbox.remove(&agent.id).unwrap_or_default();
            let out = agent.step(state, &batch, photographed[i], &self.world.tiles, cfg, tick, now);
            let target = out.waypoint.unwrap_or(state.position);
            next_states.push(if state.alive {
                step_kinematics(state, target, cfg.sim_dt)
            } else {
                state.clone()
            });
            outboxes.push(out.outbox);
        }
        for (i, outbox) in outboxes.into_iter().enumerate() {
            for p in outbox {
                let msg = self.net.compose(i as AgentId, now, p);
                self.net.send(msg, &self.world.agents, now);
            }
        }
        self.world.agents = next_states;
        self.world.record_collisions();
        self.world.clock.advance();
        true
    }

    fn step_flight_plan(&mut self, now: f64) -> bool {
        if self.world.all_searched() {
            self.finished = Some(now);
            return false;
        }
        let cfg = &self.setup.world;
        for (i, plan) in self.plans.iter_mut().enumerate() {
            while plan
                .route
                .get(plan.next)
                .is_some_and(|&t| self.world.tiles[t].true_state == TileState::Searched)
            {
                plan.next += 1;
            }
            let state = &self.world.agents[i];
            let waypoint = match plan.route.get(plan.next) {
                Some(&t) => steer(state, self.world.tiles[t].center, cfg),
                None => state.position,
            };
            self.world.agents[i] = step_kinematics(state, waypoint, cfg.sim_dt);
        }
        self.world.record_collisions();
        self.world.clock.advance();
        true
    }

    /// Runs to completion.
    pub fn run(&mut self) -> TrialOutcome {
        while self.step() {}
        self.outcome()
    }

    /// Keeps delivering messages, without moving anyone, until nothing is in flight
    /// or `max_ticks` pass. Returns true if the network went quiet.
    pub fn drain(&mut self, max_ticks: u64) -> bool {
        let cfg = self.setup.world.clone();
        for _ in 0..max_ticks {
            if self.net.in_flight() == 0 {
                return true;
            }
            self.world.clock.advance();
            let now = self.world.now();
            let inbox = self.net.deliver_due(now, &self.world.agents);
            for (id, batch) in inbox {
                let agent = &mut self.agents[id as usize];
                let mut out = agent.kb.ingest(id, &batch, cfg.t_auction, now);
                out.extend(agent.kb.resolve_deadlines(id, now));
                for p in out {
                    let msg = self.net.compose(id, now, p);
                    self.net.send(msg, &self.world.agents, now);
                }
            }
        }
        self.net.in_flight() == 0
    }

    pub fn outcome(&self) -> TrialOutcome {
        let cfg = &self.setup.world;
        let total = self.world.tiles.len();
        let searched = self.world.searched_count();
        let fraction = if total == 0 { 0.0 } else { searched as f64 / total as f64 };
        let duration = self.finished.unwrap_or_else(|| self.world.now().min(cfg.t_max));
        let collisions = self.world.collision_count();
        let per_tile_times = self.setup.record_tile_times.then(|| {
            self.world
                .tiles
                .iter()
                .filter_map(|t| {
                    Some(TileTime {
                        row: t.index.0,
                        col: t.index.1,
                        time: t.searched_at?,
                        agent: t.searched_by?,
                    })
                })
                .collect()
        });
        TrialOutcome {
            seed: self.seed,
            n_agents: self.setup.n_agents,
            duration,
            fraction_searched: fraction,
            searched_tiles: searched,
            total_tiles: total,
            collisions,
            heuristic: heuristic_e_c(duration, fraction, collisions, cfg.t_max, self.setup.n_agents),
            messages_delivered: self.net.stats.delivered,
            infeasible_decisions: self.agents.iter().map(|a| a.infeasible_decisions).sum(),
            per_tile_times,
        }
    }
}

/// Waypoint for this tick that aims to reach `target` at the horizon.
fn steer(state: &AgentState, target: Vec3, cfg: &WorldConfig) -> Vec3 {
    let acc = state.max_acc_actual;
    let t = cfg.horizon.max(state.velocity.norm() / (2.0 * acc.x.min(acc.y)));
    let center = state.position + state.velocity * t;
    let half = acc * (0.5 * t * t);
    let h = SearchBox::new(center - half, center + half).clamp(target);
    let command = (h - center) * (2.0 / (t * t));
    let dt = cfg.sim_dt;
    state.position + state.velocity * dt + command * (dt * dt)
}

pub fn run_setup(setup: &TrialSetup, seed: u64) -> Result<TrialOutcome> {
    Ok(Simulation::new(setup, seed)?.run())
}

/// Runs one trial with default optimizer settings and no heterogeneity.
pub fn run_trial(
    cfg: &WorldConfig,
    net: &NetworkConfig,
    profile: &CostProfile,
    n_agents: usize,
    seed: u64,
) -> Result<TrialOutcome> {
    run_setup(&TrialSetup::new(cfg.clone(), net.clone(), *profile, n_agents), seed)
}

/// Sample mean and unbiased sample variance; variance is 0 for a single value.
pub fn mean_variance(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, ss / (n - 1) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub variance: f64,
}

impl Stat {
    fn of(xs: &[f64]) -> Self {
        let (mean, variance) = mean_variance(xs);
        Stat { mean, variance }
    }
}

/// Aggregate over a batch of trials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n_trials: usize,
    pub duration: Stat,
    /// Percent of tiles searched, 0 to 100.
    pub pct_searched: Stat,
    pub collisions: Stat,
    pub e_c: Stat,
}

pub fn summarize(outcomes: &[TrialOutcome]) -> Result<Summary> {
    if outcomes.is_empty() {
        return Err(Error::Empty("trial outcomes"));
    }
    let col = |f: fn(&TrialOutcome) -> f64| Stat::of(&outcomes.iter().map(f).collect::<Vec<_>>());
    Ok(Summary {
        n_trials: outcomes.len(),
        duration: col(|o| o.duration),
        pct_searched: col(|o| 100.0 * o.fraction_searched),
        collisions: col(|o| o.collisions as f64),
        e_c: col(|o| o.heuristic),
    })
}
