//! Seeded, splittable random streams.
//!
//! A stream is a `(master_seed, stream_id)` pair mapped onto one ChaCha8
//! keystream. Monte Carlo work units derive child streams from their logical
//! coordinates (SNR index, codebook draw, channel draw), so the numbers a unit
//! sees do not depend on which worker runs it or in which order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Generator handed out by [`RngStream::generator`].
pub type StreamRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub master_seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        RngStream { master_seed, stream_id }
    }

    /// Fresh generator positioned at the start of this stream.
    pub fn generator(&self) -> StreamRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_id);
        rng
    }

    /// Child stream identified by `tag`. Distinct tags give unrelated streams.
    pub fn derive(&self, tag: u64) -> RngStream {
        let id = splitmix64(splitmix64(self.stream_id ^ 0xa076_1d64_78bd_642f).wrapping_add(tag));
        RngStream { master_seed: self.master_seed, stream_id: id }
    }

    /// Shorthand for a chain of [`derive`](Self::derive) calls.
    pub fn derive_path(&self, tags: &[u64]) -> RngStream {
        tags.iter().fold(*self, |s, &t| s.derive(t))
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}
