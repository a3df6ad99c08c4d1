//! Counter-based random stream derivation.
//!
//! Every random draw in the crate comes from a stream keyed by
//! `(master seed, purpose, replicate, time, index)`. Streams never depend on
//! the order in which work is scheduled, so parallel and sequential runs
//! produce the same bytes.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a stream is used for. Part of the stream key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Purpose {
    Trajectory,
    Init,
    Resample,
    Propagate,
    Sampling,
    Other(u32),
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Trajectory => 1,
            Purpose::Init => 2,
            Purpose::Resample => 3,
            Purpose::Propagate => 4,
            Purpose::Sampling => 5,
            Purpose::Other(k) => 0x100 + u64::from(k),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngPolicy {
    master_seed: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngPolicy {
    pub fn new(master_seed: u64) -> Self {
        Self { master_seed }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    /// Derives the 256-bit ChaCha key for a stream.
    pub fn stream_key(&self, purpose: Purpose, replicate: u64, time: u64, index: u64) -> [u8; 32] {
        let mut h = splitmix64(self.master_seed);
        for word in [purpose.tag(), replicate, time, index] {
            h = splitmix64(h ^ splitmix64(word));
        }
        let mut key = [0u8; 32];
        for (lane, chunk) in key.chunks_exact_mut(8).enumerate() {
            h = splitmix64(h.wrapping_add(lane as u64));
            chunk.copy_from_slice(&h.to_le_bytes());
        }
        key
    }

    pub fn stream(&self, purpose: Purpose, replicate: u64, time: u64, index: u64) -> ChaCha8Rng {
        ChaCha8Rng::from_seed(self.stream_key(purpose, replicate, time, index))
    }
}
