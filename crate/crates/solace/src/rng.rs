//! Named, independently seeded RNG streams.
//!
//! One master seed fans out into per-concern streams (population synthesis,
//! building damage, agent behavior) so that changing how one concern draws
//! numbers cannot perturb the others, and paired-seed scenario comparisons
//! keep population and damage draws aligned. ChaCha8 is used for its stable
//! cross-platform output.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Deterministic sub-seed for a named stream under a master seed.
pub fn stream_seed(master: u64, name: &str) -> u64 {
    splitmix64(master ^ fnv1a64(name.as_bytes()))
}

/// RNG for a named stream.
pub fn stream_rng(master: u64, name: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(master, name))
}

/// The streams one simulation run consumes.
pub struct Streams {
    pub population: ChaCha8Rng,
    pub damage: ChaCha8Rng,
    pub behavior: ChaCha8Rng,
}

impl Streams {
    pub fn new(master: u64) -> Self {
        Streams {
            population: stream_rng(master, "population"),
            damage: stream_rng(master, "damage"),
            behavior: stream_rng(master, "behavior"),
        }
    }
}

/// Uniform draw on [lo, hi] that always consumes exactly one underlying
/// sample, including for the degenerate lo == hi case. Keeping the draw count
/// fixed keeps downstream draws aligned across configuration variants.
pub fn uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    let u: f64 = rng.random();
    lo + u * (hi - lo)
}

/// Bernoulli draw consuming exactly one underlying sample.
pub fn chance<R: Rng>(rng: &mut R, p: f64) -> bool {
    let u: f64 = rng.random();
    u < p
}
