//! Seed derivation. Every random stream in a trial is a ChaCha8 generator keyed by
//! a master seed plus a tag path, so streams are independent of evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Stream tags. Values are arbitrary but frozen: changing them changes every trial.
pub mod tag {
    pub const NETWORK: u64 = 0x6e65_7477;
    pub const GPS: u64 = 0x6770_7331;
    pub const OPTIMIZER: u64 = 0x6f70_7431;
    pub const SPAWN: u64 = 0x7370_776e;
    pub const TRIAL: u64 = 0x7472_6961;
    pub const ASA: u64 = 0x6173_6131;
    pub const ASA_EVAL: u64 = 0x6576_616c;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a tag path into a master seed.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(master), |acc, &t| splitmix64(acc ^ splitmix64(t)))
}

pub fn stream(master: u64, path: &[u64]) -> SimRng {
    SimRng::seed_from_u64(derive_seed(master, path))
}
