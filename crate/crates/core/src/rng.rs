//! Seed derivation.
//!
//! Every random choice in the crate is driven by a [`Seed`]. Child seeds are
//! derived as `mix(parent, fnv1a(tag), index)`, so independent roles (samples,
//! hashes, attacks, trials) never share a stream and results do not depend on
//! evaluation order. Streams are ChaCha8; outputs are reproducible within a
//! build but no cross-language bit-exactness is promised.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub type Rng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Seed(pub u64);

impl Seed {
    pub fn derive(self, tag: &str, index: u64) -> Seed {
        let mut h = splitmix64(self.0 ^ 0x6a09_e667_f3bc_c909);
        h = splitmix64(h ^ fnv1a(tag.as_bytes()));
        Seed(splitmix64(h ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15)))
    }

    pub fn rng(self) -> Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }
}

impl From<u64> for Seed {
    fn from(v: u64) -> Self {
        Seed(v)
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

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
