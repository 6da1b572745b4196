//! Decentralized receding-horizon control (D-RHC) for mesh-networked swarms.
//!
//! The crate is split along the data flow of one simulated trial:
//!
//! - [`world`]: ground truth (tile grid, point-mass kinematics, collisions, clock).
//! - [`meshnet`]: range-limited lossy/delayed message delivery with mesh propagation.
//! - [`costs`] and [`optimizer`]: the per-agent constrained objective and the
//!   differential-evolution solver that minimizes it every decision step.
//! - [`bidding`]: the decentralized tile auction and its correction protocol.
//! - [`agent`]: knowledge base, neighbor prediction and the decision loop.
//! - [`trial`]: one seeded end-to-end run and its scoring heuristic.
//! - [`adaptation`]: adaptive simulated annealing over the cost profile.
//! - [`scenario`] and [`cli`]: configuration files and the operator commands.

pub mod adaptation;
pub mod agent;
pub mod bidding;
pub mod cli;
pub mod costs;
pub mod error;
pub mod geom;
pub mod meshnet;
pub mod optimizer;
pub mod rng;
pub mod scenario;
pub mod trial;
pub mod world;

pub use error::{Error, Result};
pub use geom::Vec3;

/// Agent identifier. Agents are numbered densely from zero within a trial.
pub type AgentId = u32;

/// Tile index as `(row, col)`; rows run along y, columns along x.
pub type TileIndex = (u32, u32);
