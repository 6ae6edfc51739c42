//! The single pseudo-random generator used everywhere a seed is accepted.
//!
//! The generator is xoshiro256++ (Blackman & Vigna). A 64-bit seed is expanded
//! into the 256-bit state with SplitMix64:
//!
//! ```text
//! z  = (s += 0x9E3779B97F4A7C15)
//! z  = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//! z  = (z ^ (z >> 27)) * 0x94D049BB133111EB
//! out = z ^ (z >> 31)
//! ```
//!
//! called four times for the four state words. Each output is
//!
//! ```text
//! result = rotl(s0 + s3, 23) + s0
//! t  = s1 << 17
//! s2 ^= s0; s3 ^= s1; s1 ^= s2; s0 ^= s3
//! s2 ^= t;  s3 = rotl(s3, 45)
//! ```
//!
//! Derived draws are defined here rather than borrowed from a distribution
//! library, so golden values never move:
//!
//! - [`SeededRng::below`] is Lemire's multiply-shift with rejection, exact
//!   uniform over `[0, n)`.
//! - [`SeededRng::unit`] takes the top 53 bits: `(x >> 11) * 2^-53`, in `[0, 1)`.

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

#[derive(Clone, Debug)]
pub struct SeededRng {
    inner: Xoshiro256PlusPlus,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: Xoshiro256PlusPlus::seed_from_u64(seed),
        }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform integer in `[0, n)`. `n` must be non-zero.
    #[inline]
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "empty range");
        let mut m = u128::from(self.next_u64()) * u128::from(n);
        let mut low = m as u64;
        if low < n {
            let threshold = n.wrapping_neg() % n;
            while low < threshold {
                m = u128::from(self.next_u64()) * u128::from(n);
                low = m as u64;
            }
        }
        (m >> 64) as u64
    }

    /// Uniform float in `[0, 1)`.
    #[inline]
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// One Bernoulli trial that succeeds with probability `p`.
    #[inline]
    pub fn trial(&mut self, p: f64) -> bool {
        self.unit() < p
    }
}

/// Mixes a master seed with a path of indices into an independent child seed.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    let mut z = master;
    for &p in path {
        z = splitmix(z ^ splitmix(p.wrapping_add(0x9E37_79B9_7F4A_7C15)));
    }
    splitmix(z)
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
