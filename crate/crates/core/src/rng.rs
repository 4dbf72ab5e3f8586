//! Deterministic random streams.
//!
//! Every random decision in the crate is drawn from a stream keyed by a base
//! seed and a short tuple of tags (ensemble, node, walk, ...). Streams are
//! independent of scheduling, so parallel and sequential runs agree bit for bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Domain tags keeping streams for different purposes apart.
pub mod tag {
    pub const GRF_WALK: u64 = 0x67_72_66;
    pub const SWING_LENGTH: u64 = 0x6c_65_6e;
    pub const SWING_POINT_FACTOR: u64 = 0x70_61;
    pub const SWING_WALKER_FACTOR: u64 = 0x70_62;
    pub const FEATURES: u64 = 0x66_65_61;
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a base seed with a tag tuple into a 64-bit stream key.
pub fn stream_key(seed: u64, tags: &[u64]) -> u64 {
    let mut h = splitmix64(seed);
    for &t in tags {
        h = splitmix64(h ^ splitmix64(t.wrapping_add(0x632B_E59B_D9B4_E019)));
    }
    h
}

pub fn stream(seed: u64, tags: &[u64]) -> StreamRng {
    StreamRng::seed_from_u64(stream_key(seed, tags))
}
