//! Seeded, splittable random streams.
//!
//! Every random quantity in the crate is drawn from a stream addressed by
//! `(seed, domain, index)`, so results do not depend on the order in which
//! paths, frames or samples are generated, and parallel execution reproduces
//! sequential output bit for bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Well-separated domains for the streams used across the crate.
pub mod domain {
    pub const TRAFFIC_PATH: u64 = 0x01;
    pub const CHANNEL: u64 = 0x02;
    pub const SENSING: u64 = 0x03;
    pub const TRAINING_CHANNEL: u64 = 0x11;
    pub const TRAINING_SENSING: u64 = 0x12;
    pub const EVAL_CHANNEL: u64 = 0x21;
    pub const EVAL_TRAFFIC: u64 = 0x22;
    pub const EVAL_SOURCE_ERRORS: u64 = 0x23;
    pub const EVAL_RELAY_ERRORS: u64 = 0x24;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent generator for one `(seed, domain, index)` triple.
pub fn substream(seed: u64, domain: u64, index: u64) -> StreamRng {
    let key = splitmix64(seed ^ splitmix64(domain.wrapping_mul(0xa076_1d64_78bd_642f)));
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(index);
    rng
}
