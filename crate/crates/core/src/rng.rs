//! Seeded random streams.
//!
//! A run has one master seed. Every consumer (environment, agent, wind,
//! baseline, replay) draws from its own stream derived from the master seed
//! and a fixed label, so adding a consumer never perturbs existing ones.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

pub mod stream {
    pub const ENV: &str = "env";
    pub const TARGET: &str = "target";
    pub const WIND: &str = "wind";
    pub const AGENT: &str = "agent";
    pub const REPLAY: &str = "replay";
    pub const INIT: &str = "init";
    pub const BASELINE: &str = "baseline";
    pub const EVAL: &str = "eval";
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(label: &str) -> u64 {
    label.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}

/// Seed for the `index`-th instance of stream `label` under `master`.
pub fn derive_seed(master: u64, label: &str, index: u64) -> u64 {
    splitmix64(splitmix64(master ^ fnv1a(label)).wrapping_add(index))
}

pub fn stream_rng(master: u64, label: &str, index: u64) -> SimRng {
    SimRng::seed_from_u64(derive_seed(master, label, index))
}
