//! Seeded random streams.
//!
//! A run has one root seed. Every consumer asks for a stream by purpose
//! label (and optionally an index), so adding a new consumer never shifts
//! the numbers an existing one sees.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(bytes: &[u8], mut hash: u64) -> u64 {
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

// splitmix64 finalizer
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Root of a family of independent, label-addressed generators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedStreams {
    root: u64,
}

impl SeedStreams {
    pub fn new(root: u64) -> Self {
        SeedStreams { root }
    }

    pub fn root(&self) -> u64 {
        self.root
    }

    /// Generator for a purpose label.
    pub fn stream(&self, label: &str) -> Rng {
        self.substream(label, 0)
    }

    /// Generator for the `index`-th member of a labelled family, e.g. one
    /// per chain or per start point.
    pub fn substream(&self, label: &str, index: u64) -> Rng {
        let key = fnv1a(&index.to_le_bytes(), fnv1a(label.as_bytes(), FNV_OFFSET));
        let mut rng = ChaCha8Rng::seed_from_u64(mix(self.root ^ mix(key)));
        rng.set_stream(key);
        rng
    }

    /// Seed for a nested [`SeedStreams`], for handing a whole family to a
    /// sub-computation.
    pub fn child(&self, label: &str) -> SeedStreams {
        let key = fnv1a(label.as_bytes(), FNV_OFFSET);
        SeedStreams::new(mix(self.root.wrapping_add(mix(key))))
    }
}
