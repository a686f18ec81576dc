//! Deterministic randomness.
//!
//! Every random draw in the crate comes from a ChaCha20 stream keyed by a
//! [`Seed`]: the root selects the key, the stream index selects ChaCha's
//! 64-bit stream (nonce). Identical `(root, stream)` pairs give identical
//! draws whatever thread evaluates them.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Seed {
    pub root: u64,
    pub stream: u64,
}

/// Domain tags for [`Seed::derive`], so that draws serving different purposes
/// never share a stream.
pub mod domain {
    pub const FAMILY: u64 = 0x4b52_4155_5300_0001;
    pub const EXPECTATION: u64 = 0x4b52_4155_5300_0002;
    pub const PROBES: u64 = 0x4b52_4155_5300_0003;
}

impl Seed {
    pub const fn new(root: u64, stream: u64) -> Self {
        Self { root, stream }
    }

    pub fn rng(&self) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.root);
        rng.set_stream(self.stream);
        rng
    }

    pub fn with_stream(&self, stream: u64) -> Self {
        Self { root: self.root, stream }
    }

    /// A seed with an unrelated root, keyed by `(self.root, tag)`.
    pub fn derive(&self, tag: u64) -> Self {
        Self { root: splitmix64(self.root ^ splitmix64(tag)), stream: self.stream }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
