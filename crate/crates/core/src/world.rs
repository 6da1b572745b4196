//! Ground truth: the tile grid, point-mass agent kinematics, collisions and the clock.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::{AgentId, Error, Result, TileIndex, Vec3};

fn default_tile_size() -> f64 {
    25.0
}

/// World geometry, agent limits and timing. Only the area dimensions are required
/// in a scenario file; everything else defaults to the reference experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldConfig {
    pub area_width: f64,
    pub area_height: f64,
    pub tile_size: f64,
    #[serde(default = "WorldConfig::d_z_min")]
    pub z_min: f64,
    #[serde(default = "WorldConfig::d_z_max")]
    pub z_max: f64,
    #[serde(default = "WorldConfig::d_search_radius")]
    pub search_radius: f64,
    #[serde(default = "WorldConfig::d_search_altitude")]
    pub search_altitude: f64,
    #[serde(default = "WorldConfig::d_altitude_tolerance")]
    pub altitude_tolerance: f64,
    #[serde(default = "WorldConfig::d_collision_radius")]
    pub collision_radius: f64,
    #[serde(default = "WorldConfig::d_comm_range")]
    pub comm_range: f64,
    #[serde(default = "WorldConfig::d_max_speed")]
    pub max_speed: f64,
    #[serde(default = "WorldConfig::d_max_acc_horizontal")]
    pub max_acc_horizontal: f64,
    #[serde(default = "WorldConfig::d_max_acc_vertical")]
    pub max_acc_vertical: f64,
    #[serde(default = "WorldConfig::d_sim_dt")]
    pub sim_dt: f64,
    #[serde(default = "WorldConfig::d_t_update")]
    pub t_update: f64,
    #[serde(default = "WorldConfig::d_t_broadcast")]
    pub t_broadcast: f64,
    #[serde(default = "WorldConfig::d_t_auction")]
    pub t_auction: f64,
    #[serde(default = "WorldConfig::d_t_max")]
    pub t_max: f64,
    #[serde(default = "WorldConfig::d_gps_noise_radius")]
    pub gps_noise_radius: f64,
    /// Look-ahead of each receding-horizon solve, seconds.
    #[serde(default = "WorldConfig::d_horizon")]
    pub horizon: f64,
    /// Neighbor beliefs older than this (by sender timestamp) are ignored, seconds.
    #[serde(default = "WorldConfig::d_staleness_limit")]
    pub staleness_limit: f64,
    /// Distance between neighbors in the start cluster. Defaults to twice the
    /// collision radius.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spawn_spacing: Option<f64>,
    /// Agents begin knowing the launch position of every other agent.
    #[serde(default = "WorldConfig::d_launch_sync")]
    pub launch_sync: bool,
}

impl WorldConfig {
    fn d_z_min() -> f64 {
        35.0
    }
    fn d_z_max() -> f64 {
        100.0
    }
    fn d_search_radius() -> f64 {
        5.0
    }
    fn d_search_altitude() -> f64 {
        40.0
    }
    fn d_altitude_tolerance() -> f64 {
        2.0
    }
    fn d_collision_radius() -> f64 {
        1.0
    }
    fn d_comm_range() -> f64 {
        200.0
    }
    fn d_max_speed() -> f64 {
        40.0
    }
    fn d_max_acc_horizontal() -> f64 {
        3.0
    }
    fn d_max_acc_vertical() -> f64 {
        6.0
    }
    fn d_sim_dt() -> f64 {
        0.05
    }
    fn d_t_update() -> f64 {
        0.05
    }
    fn d_t_broadcast() -> f64 {
        0.25
    }
    fn d_t_auction() -> f64 {
        0.5
    }
    fn d_t_max() -> f64 {
        300.0
    }
    fn d_gps_noise_radius() -> f64 {
        2.0
    }
    fn d_horizon() -> f64 {
        2.0
    }
    fn d_staleness_limit() -> f64 {
        10.0
    }
    fn d_launch_sync() -> bool {
        true
    }

    /// Reference configuration for an area, all other fields at their defaults.
    pub fn with_area(area_width: f64, area_height: f64) -> Self {
        WorldConfig {
            area_width,
            area_height,
            tile_size: default_tile_size(),
            z_min: Self::d_z_min(),
            z_max: Self::d_z_max(),
            search_radius: Self::d_search_radius(),
            search_altitude: Self::d_search_altitude(),
            altitude_tolerance: Self::d_altitude_tolerance(),
            collision_radius: Self::d_collision_radius(),
            comm_range: Self::d_comm_range(),
            max_speed: Self::d_max_speed(),
            max_acc_horizontal: Self::d_max_acc_horizontal(),
            max_acc_vertical: Self::d_max_acc_vertical(),
            sim_dt: Self::d_sim_dt(),
            t_update: Self::d_t_update(),
            t_broadcast: Self::d_t_broadcast(),
            t_auction: Self::d_t_auction(),
            t_max: Self::d_t_max(),
            gps_noise_radius: Self::d_gps_noise_radius(),
            horizon: Self::d_horizon(),
            staleness_limit: Self::d_staleness_limit(),
            spawn_spacing: None,
            launch_sync: Self::d_launch_sync(),
        }
    }

    pub fn cols(&self) -> u32 {
        (self.area_width / self.tile_size).round() as u32
    }

    pub fn rows(&self) -> u32 {
        (self.area_height / self.tile_size).round() as u32
    }

    pub fn tile_count(&self) -> usize {
        self.rows() as usize * self.cols() as usize
    }

    /// Length of the area diagonal.
    pub fn diagonal(&self) -> f64 {
        self.area_width.hypot(self.area_height)
    }

    pub fn acc_limits(&self) -> Vec3 {
        Vec3::new(
            self.max_acc_horizontal,
            self.max_acc_horizontal,
            self.max_acc_vertical,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("world.area_width", self.area_width),
            ("world.area_height", self.area_height),
            ("world.tile_size", self.tile_size),
            ("world.search_radius", self.search_radius),
            ("world.collision_radius", self.collision_radius),
            ("world.comm_range", self.comm_range),
            ("world.max_speed", self.max_speed),
            ("world.max_acc_horizontal", self.max_acc_horizontal),
            ("world.max_acc_vertical", self.max_acc_vertical),
            ("world.sim_dt", self.sim_dt),
            ("world.horizon", self.horizon),
            ("world.staleness_limit", self.staleness_limit),
        ];
        for (key, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(key, format!("must be positive, got {v}")));
            }
        }
        for (key, v) in [
            ("world.altitude_tolerance", self.altitude_tolerance),
            ("world.gps_noise_radius", self.gps_noise_radius),
            ("world.t_max", self.t_max),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(key, format!("must be non-negative, got {v}")));
            }
        }
        for (key, extent) in [
            ("world.area_width", self.area_width),
            ("world.area_height", self.area_height),
        ] {
            let cells = extent / self.tile_size;
            if cells < 0.5 || (cells - cells.round()).abs() > 1e-9 * cells.max(1.0) {
                return Err(Error::config(
                    key,
                    format!(
                        "{extent} is not a positive integer multiple of tile_size {}",
                        self.tile_size
                    ),
                ));
            }
        }
        if self.search_radius >= self.tile_size / 2.0 {
            return Err(Error::config(
                "world.search_radius",
                "must be smaller than half the tile size",
            ));
        }
        if !(self.z_min < self.search_altitude && self.search_altitude < self.z_max) {
            return Err(Error::config(
                "world.search_altitude",
                format!(
                    "must lie strictly between z_min {} and z_max {}",
                    self.z_min, self.z_max
                ),
            ));
        }
        if self.sim_dt > self.t_update {
            return Err(Error::config("world.t_update", "must be >= sim_dt"));
        }
        if self.t_update > self.t_broadcast {
            return Err(Error::config("world.t_broadcast", "must be >= t_update"));
        }
        if self.t_broadcast > self.t_auction {
            return Err(Error::config("world.t_auction", "must be >= t_broadcast"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TileState {
    Unsearched,
    Searched,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tile {
    pub index: TileIndex,
    pub center: Vec3,
    pub true_state: TileState,
    pub searched_by: Option<AgentId>,
    pub searched_at: Option<f64>,
}

impl Tile {
    /// Marks the tile searched. Returns false if it already was.
    pub fn mark_searched(&mut self, by: AgentId, at: f64) -> bool {
        if self.true_state == TileState::Searched {
            return false;
        }
        self.true_state = TileState::Searched;
        self.searched_by = Some(by);
        self.searched_at = Some(at);
        true
    }
}

/// Builds the row-major tile grid. Rows run along y, columns along x.
pub fn build_grid(cfg: &WorldConfig) -> Result<Vec<Tile>> {
    cfg.validate()?;
    let (rows, cols) = (cfg.rows(), cfg.cols());
    let mut tiles = Vec::with_capacity(rows as usize * cols as usize);
    for row in 0..rows {
        for col in 0..cols {
            tiles.push(Tile {
                index: (row, col),
                center: Vec3::new(
                    (col as f64 + 0.5) * cfg.tile_size,
                    (row as f64 + 0.5) * cfg.tile_size,
                    cfg.search_altitude,
                ),
                true_state: TileState::Unsearched,
                searched_by: None,
                searched_at: None,
            });
        }
    }
    Ok(tiles)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub id: AgentId,
    pub position: Vec3,
    pub velocity: Vec3,
    pub acceleration: Vec3,
    pub max_speed_actual: f64,
    /// Per-axis acceleration limits (x, y, z).
    pub max_acc_actual: Vec3,
    pub alive: bool,
}

impl AgentState {
    pub fn at_rest(id: AgentId, position: Vec3, cfg: &WorldConfig) -> Self {
        AgentState {
            id,
            position,
            velocity: Vec3::ZERO,
            acceleration: Vec3::ZERO,
            max_speed_actual: cfg.max_speed,
            max_acc_actual: cfg.acc_limits(),
            alive: true,
        }
    }
}

/// One semi-implicit Euler step of a point mass steering at `desired_position`.
///
/// The commanded acceleration is the one that would land exactly on the desired
/// position after `dt`, clamped per axis; a desired position equal to the current
/// one therefore brakes.
pub fn step_kinematics(state: &AgentState, desired_position: Vec3, dt: f64) -> AgentState {
    debug_assert!(dt > 0.0);
    let lim = state.max_acc_actual;
    let ballistic = state.position + state.velocity * dt;
    let required = (desired_position - ballistic) * (1.0 / (dt * dt));
    let acceleration = required.clamp(-lim, lim);
    let mut velocity = state.velocity + acceleration * dt;
    let speed = velocity.norm();
    if speed > state.max_speed_actual {
        velocity = velocity * (state.max_speed_actual / speed);
    }
    AgentState {
        position: state.position + velocity * dt,
        velocity,
        acceleration,
        ..state.clone()
    }
}

/// All unordered pairs of alive agents closer than `collision_radius` right now.
pub fn detect_collisions(states: &[AgentState], collision_radius: f64) -> Vec<(AgentId, AgentId)> {
    let r2 = collision_radius * collision_radius;
    let mut pairs = Vec::new();
    for (i, a) in states.iter().enumerate() {
        if !a.alive {
            continue;
        }
        for b in &states[i + 1..] {
            if b.alive && a.position.distance_squared(b.position) < r2 {
                let (lo, hi) = if a.id < b.id { (a.id, b.id) } else { (b.id, a.id) };
                pairs.push((lo, hi));
            }
        }
    }
    pairs
}

/// True iff the agent is inside the tile's photograph zone.
pub fn check_tile_searched(state: &AgentState, tile: &Tile, cfg: &WorldConfig) -> bool {
    state.position.horizontal_distance(tile.center) <= cfg.search_radius
        && (state.position.z - cfg.search_altitude).abs() <= cfg.altitude_tolerance
}

/// Simulation clock; time is always derived from the tick count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimClock {
    pub tick: u64,
    pub dt: f64,
}

impl SimClock {
    pub fn new(dt: f64) -> Self {
        SimClock { tick: 0, dt }
    }

    pub fn now(&self) -> f64 {
        self.tick as f64 * self.dt
    }

    pub fn advance(&mut self) {
        self.tick += 1;
    }
}

/// Ground-truth world state for one trial.
#[derive(Debug, Clone)]
pub struct World {
    pub cfg: WorldConfig,
    pub tiles: Vec<Tile>,
    pub agents: Vec<AgentState>,
    pub clock: SimClock,
    contacts: BTreeSet<(AgentId, AgentId)>,
    searched: usize,
}

impl World {
    pub fn new(cfg: WorldConfig, agents: Vec<AgentState>) -> Result<Self> {
        let tiles = build_grid(&cfg)?;
        Ok(World {
            clock: SimClock::new(cfg.sim_dt),
            cfg,
            tiles,
            agents,
            contacts: BTreeSet::new(),
            searched: 0,
        })
    }

    pub fn now(&self) -> f64 {
        self.clock.now()
    }

    /// Linear index of the tile whose cell contains `p` horizontally.
    pub fn tile_under(&self, p: Vec3) -> Option<usize> {
        tile_under(&self.cfg, p)
    }

    pub fn searched_count(&self) -> usize {
        self.searched
    }

    pub fn all_searched(&self) -> bool {
        self.searched == self.tiles.len()
    }

    /// Tiles each alive agent is currently photographing, as `(agent index, tile index)`.
    /// Ground truth is updated for tiles seen for the first time.
    pub fn observe_searches(&mut self) -> Vec<(usize, usize)> {
        let now = self.now();
        let mut seen = Vec::new();
        for (ai, agent) in self.agents.iter().enumerate() {
            if !agent.alive {
                continue;
            }
            let Some(ti) = tile_under(&self.cfg, agent.position) else {
                continue;
            };
            let tile = &mut self.tiles[ti];
            if check_tile_searched(agent, tile, &self.cfg) {
                if tile.mark_searched(agent.id, now) {
                    self.searched += 1;
                }
                seen.push((ai, ti));
            }
        }
        seen
    }

    /// Records first contacts; returns the number of new colliding pairs.
    pub fn record_collisions(&mut self) -> usize {
        let before = self.contacts.len();
        for pair in detect_collisions(&self.agents, self.cfg.collision_radius) {
            self.contacts.insert(pair);
        }
        self.contacts.len() - before
    }

    pub fn collision_pairs(&self) -> impl Iterator<Item = &(AgentId, AgentId)> {
        self.contacts.iter()
    }

    pub fn collision_count(&self) -> usize {
        self.contacts.len()
    }
}

pub fn tile_under(cfg: &WorldConfig, p: Vec3) -> Option<usize> {
    if p.x < 0.0 || p.y < 0.0 {
        return None;
    }
    let col = (p.x / cfg.tile_size).floor() as u64;
    let row = (p.y / cfg.tile_size).floor() as u64;
    let (rows, cols) = (cfg.rows() as u64, cfg.cols() as u64);
    (col < cols && row < rows).then(|| (row * cols + col) as usize)
}
