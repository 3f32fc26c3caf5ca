//! Deterministic random streams derived from a master seed.
//!
//! Each independent consumer (ensemble member, filter pass, purpose) gets its own ChaCha
//! stream keyed by a tuple of tags, so results do not depend on scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream for `(seed, tags…)`. Distinct tag tuples give statistically independent streams.
pub fn stream(seed: u64, tags: &[u64]) -> ChaCha8Rng {
    let mut h = splitmix64(seed);
    for &t in tags {
        h = splitmix64(h ^ splitmix64(t.wrapping_add(0x632B_E59B_D9B4_E019)));
    }
    ChaCha8Rng::seed_from_u64(h)
}

/// Tags used to separate purposes of random draws.
pub mod purpose {
    pub const PREVALENCE: u64 = 1;
    pub const DIAGNOSES: u64 = 2;
    pub const MORTALITY_INIT: u64 = 3;
    pub const OBS_PERTURBATION: u64 = 4;
    pub const SYNTH_NOISE: u64 = 5;
    pub const SYNTH_TRUTH: u64 = 6;
    pub const RESTART: u64 = 7;
}
