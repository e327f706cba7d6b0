//! Counter-based random streams.
//!
//! Every consumer of randomness (a photon, a dataset row, an epoch shuffle)
//! gets its own PCG-64 stream keyed by `(seed, domain, index)`. The sequence
//! a stream produces depends only on that key, never on which thread asks for
//! it or in what order, so parallel work stays bit-reproducible.

use rand_core::Rng;
use rand_distr::{Distribution, StandardNormal};
use rand_pcg::Pcg64;

/// Domain tags keep unrelated consumers of the same user seed apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Photon = 1,
    Noise = 2,
    Ppg = 3,
    MlpInit = 4,
    MlpShuffle = 5,
    Split = 6,
}

/// One independent deterministic random stream.
#[derive(Clone, Debug)]
pub struct RngStream {
    inner: Pcg64,
}

fn mix(mut z: u64) -> u64 {
    // splitmix64 finalizer
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64, domain: Domain, index: u64) -> Self {
        let key = mix(seed ^ mix(domain as u64));
        let state = ((mix(key ^ index) as u128) << 64) | mix(index.wrapping_add(key.rotate_left(17))) as u128;
        // Distinct increments select non-overlapping sequences.
        let stream = ((key as u128) << 64) | index as u128;
        Self { inner: Pcg64::new(state, stream) }
    }

    /// Stream dedicated to one photon history.
    pub fn photon(seed: u64, photon_index: u64) -> Self {
        Self::new(seed, Domain::Photon, photon_index)
    }

    /// Uniform draw on the open interval (0, 1).
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        let bits = self.inner.next_u64() >> 11;
        (bits as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal draw.
    #[inline]
    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    /// Uniform integer in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        // Lemire's multiply-shift; the bias is < n / 2^64.
        ((self.inner.next_u64() as u128 * n as u128) >> 64) as usize
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}
