//! Seeded random streams.
//!
//! Every run derives its randomness from one 64-bit seed. Stream 0 belongs to
//! the master; particle `i` owns stream `i + 1`. Streams are independent
//! ChaCha8 sequences, so the draws a particle sees do not depend on how many
//! draws any other particle made.

use rand::seq::index;
use sha2::{Digest, Sha256};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct RngStream {
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { inner }
    }

    pub fn master(seed: u64) -> Self {
        Self::new(seed, 0)
    }

    pub fn for_particle(seed: u64, particle: usize) -> Self {
        Self::new(seed, particle as u64 + 1)
    }

    /// Uniform draw on the closed interval `[lo, hi]`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        if lo == hi {
            // still consume one draw so stream positions don't depend on the range
            let _ = self.inner.next_u64();
            return lo;
        }
        self.inner.gen_range(lo..=hi)
    }

    pub fn unit(&mut self) -> f64 {
        self.inner.gen::<f64>()
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.inner.gen_range(0..n)
    }

    pub fn range_inclusive(&mut self, lo: usize, hi: usize) -> usize {
        self.inner.gen_range(lo..=hi)
    }

    pub fn chance(&mut self, p: f64) -> bool {
        self.unit() < p
    }

    /// `amount` distinct indices from `0..n`, uniformly.
    pub fn sample_indices(&mut self, n: usize, amount: usize) -> Vec<usize> {
        index::sample(&mut self.inner, n, amount).into_vec()
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }
}

/// Mixes a base seed with two indices (swarm, repetition) into a new seed.
pub fn derive_seed(base: u64, a: u64, b: u64) -> u64 {
    let mut z = base ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    // splitmix64 finalizer
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Platform-independent 64-bit hash (first 8 bytes of SHA-256, big-endian).
pub fn stable_hash64(bytes: &[u8]) -> u64 {
    let digest = Sha256::digest(bytes);
    let mut head = [0u8; 8];
    head.copy_from_slice(&digest[..8]);
    u64::from_be_bytes(head)
}
