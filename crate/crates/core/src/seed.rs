//! Deterministic seed fan-out.
//!
//! Every random choice in the pipeline draws from a [`RngSeed`] derived from the
//! experiment seed by a fixed path of component names, so re-running a pipeline
//! with the same root seed reproduces every model bit for bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Root or derived 64-bit seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RngSeed(pub u64);

impl RngSeed {
    /// Child seed for a named component. Stable across platforms and releases.
    pub fn derive(self, component: &str) -> RngSeed {
        let mut h = fnv1a(component.as_bytes());
        h ^= splitmix64(self.0);
        RngSeed(splitmix64(h))
    }

    /// Child seed for the `index`-th member of a family (restarts, folds).
    pub fn derive_index(self, index: u64) -> RngSeed {
        RngSeed(splitmix64(self.0 ^ splitmix64(index.wrapping_add(0x9e37_79b9))))
    }

    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }
}

impl Default for RngSeed {
    fn default() -> Self {
        RngSeed(0x5eed)
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
