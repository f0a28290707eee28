//! Explicitly seeded random streams.
//!
//! Every randomized operation takes a [`RngStream`]. Sub-tasks get their own
//! stream through [`RngStream::child`], which derives a new seed from the
//! parent seed and a label, so the draws of one sub-task never depend on how
//! many numbers another sub-task consumed.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Identifier of the generator family behind every stream.
pub const ALGORITHM: &str = "chacha8";

#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn algorithm(&self) -> &'static str {
        ALGORITHM
    }

    /// Independent stream keyed by `label`. Does not advance `self`.
    pub fn child(&self, label: &str) -> RngStream {
        RngStream::new(derive_seed(self.seed, label.as_bytes()))
    }

    /// Independent stream keyed by an integer index.
    pub fn child_index(&self, index: u64) -> RngStream {
        RngStream::new(derive_seed(self.seed, &index.to_le_bytes()))
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

// FNV-1a over the label, mixed with the parent seed.
fn derive_seed(parent: u64, label: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in label {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    splitmix64(splitmix64(parent) ^ h)
}
