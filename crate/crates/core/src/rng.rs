//! Seed derivation for reproducible, parallelizable experiments.
//!
//! Every random stream in the crate is a [`ChaCha8Rng`] seeded by mixing a
//! master seed with a stable stream tag. Tasks fanned out across workers
//! derive their seeds from their indices, never from worker identity, so
//! serial and parallel runs consume identical randomness.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags for the independent generators hanging off one master seed.
#[derive(Debug, Clone, Copy)]
pub enum Stream {
    /// Bernoulli occupancy initialization.
    Init,
    /// Per-intersection turn sampling, tie-breaks and policy coin flips.
    Intersection(u64),
    /// Block-length sampling during network construction.
    BlockLengths,
    /// One replicate of a density sweep: (density index, repetition index).
    Replicate(u64, u64),
    /// One random-search trial.
    Trial(u64),
    /// The trainer's own action sampling.
    Trainer,
    /// Internal baseline estimation runs.
    Baseline,
}

impl Stream {
    fn tag(self) -> u64 {
        match self {
            Stream::Init => 0x01,
            Stream::Intersection(i) => 0x1000_0000 ^ i,
            Stream::BlockLengths => 0x02,
            Stream::Replicate(d, r) => 0x2000_0000 ^ (d << 32) ^ r,
            Stream::Trial(t) => 0x3000_0000 ^ t,
            Stream::Trainer => 0x03,
            Stream::Baseline => 0x04,
        }
    }
}

/// SplitMix64 finalizer; decorrelates structured tags.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a child seed from a master seed and a stream tag.
pub fn derive_seed(master: u64, stream: Stream) -> u64 {
    mix(mix(master) ^ stream.tag())
}

/// Seeded generator for the given stream.
pub fn stream_rng(master: u64, stream: Stream) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, stream))
}
