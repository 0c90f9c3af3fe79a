//! Deterministic, splittable randomness.
//!
//! Two flavours are provided:
//!
//! * a counter-based pseudorandom function [`prf`] mapping `(seed, words…)`
//!   to 64 uniformly scrambled bits. It has no state, so a random field indexed
//!   by space-time points is a pure function of its coordinates and can be
//!   queried in any order, from any thread, any number of times.
//! * [`RngStream`], a sequential ChaCha8 stream whose 256-bit key is derived
//!   from `(seed, words…)`. Distinct word tuples give independent streams.
//!
//! Every consumer tags its derivations with a constant from [`domain`] so two
//! subsystems never read correlated bits.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Domain-separation tags.
pub mod domain {
    pub const ARROWS: u64 = 0xA770_0001;
    pub const ENV_INIT: u64 = 0xE171_0002;
    pub const ENV_CLOCKS: u64 = 0xC10C_0003;
    pub const ENV_EVOLVE: u64 = 0xE7E0_0004;
    pub const REPLICATION: u64 = 0x4E91_0005;
    pub const LABELS: u64 = 0x1ABE_0006;
    pub const POISSON_SPACE: u64 = 0x9055_0007;
    pub const MARKS: u64 = 0x3A4C_0008;
    pub const COUPLING: u64 = 0xC0B1_0009;
    pub const PROBE: u64 = 0x9B0B_000A;
    pub const BLOCK: u64 = 0xB10C_000B;
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output finalizer; a bijection on `u64` with full avalanche.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counter-based pseudorandom function of a seed and a tuple of words.
#[inline]
pub fn prf(seed: u64, words: &[u64]) -> u64 {
    let mut h = mix64(seed ^ GOLDEN);
    for (i, &w) in words.iter().enumerate() {
        h = mix64(h ^ w.wrapping_add(GOLDEN.wrapping_mul(i as u64 + 1)));
        h = h.wrapping_add(GOLDEN);
    }
    mix64(h)
}

/// Maps 64 random bits to a double in `[0, 1)` using the top 53 bits.
#[inline]
pub fn to_unit(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform in `[0, 1)` as a pure function of `(seed, words…)`.
#[inline]
pub fn uniform(seed: u64, words: &[u64]) -> f64 {
    to_unit(prf(seed, words))
}

/// Reinterprets a signed coordinate as a word for [`prf`].
#[inline]
pub fn signed(x: i64) -> u64 {
    x as u64
}

/// Derives a child seed; used to give each replication its own epoch.
pub fn derive_seed(seed: u64, words: &[u64]) -> u64 {
    prf(seed, words)
}

/// Seed of replication `rep` under a master seed.
pub fn replication_seed(master: u64, rep: u64) -> u64 {
    prf(master, &[domain::REPLICATION, rep])
}

/// A sequential random stream keyed by `(seed, words…)`.
#[derive(Debug, Clone)]
pub struct RngStream(ChaCha8Rng);

impl RngStream {
    pub fn derive(seed: u64, words: &[u64]) -> Self {
        let mut key = [0u8; 32];
        let mut h = prf(seed, words);
        for chunk in key.chunks_mut(8) {
            chunk.copy_from_slice(&h.to_le_bytes());
            h = mix64(h.wrapping_add(GOLDEN));
        }
        RngStream(ChaCha8Rng::from_seed(key))
    }

    pub fn from_seed(seed: u64) -> Self {
        Self::derive(seed, &[])
    }

    /// Uniform in `[0, 1)`.
    #[inline]
    pub fn unit(&mut self) -> f64 {
        to_unit(self.0.next_u64())
    }

    /// Uniform in `(0, 1]`, safe to take logarithms of.
    #[inline]
    pub fn open_unit(&mut self) -> f64 {
        1.0 - self.unit()
    }

    /// Exponential variate with the given rate.
    #[inline]
    pub fn exp(&mut self, rate: f64) -> f64 {
        -self.open_unit().ln() / rate
    }

    /// Uniform integer in `0..n`.
    #[inline]
    pub fn below(&mut self, n: usize) -> usize {
        self.0.random_range(0..n)
    }

    #[inline]
    pub fn coin(&mut self) -> bool {
        self.0.next_u64() >> 63 == 1
    }

    #[inline]
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.unit() < p
    }

    /// Poisson variate by inversion for small means, normal-free rejection otherwise.
    pub fn poisson(&mut self, mean: f64) -> u32 {
        if mean <= 0.0 {
            return 0;
        }
        if mean < 30.0 {
            poisson_inverse(mean, self.unit())
        } else {
            use rand_distr::{Distribution, Poisson};
            let d = Poisson::new(mean).expect("finite positive mean");
            d.sample(&mut self.0) as u32
        }
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.0.fill_bytes(dst)
    }
}

/// Poisson quantile function evaluated at `u`, by sequential search.
/// Intended for small means; cost is linear in the returned value.
pub fn poisson_inverse(mean: f64, u: f64) -> u32 {
    let mut k = 0u32;
    let mut p = (-mean).exp();
    let mut cdf = p;
    while u >= cdf {
        k += 1;
        p *= mean / k as f64;
        cdf += p;
        if p < 1e-300 && cdf >= 1.0 - 1e-15 {
            break;
        }
    }
    k
}

/// Cumulative `Poisson(mean)` table for repeated inversion at a fixed mean.
#[derive(Debug, Clone, PartialEq)]
pub struct PoissonTable {
    cdf: Vec<f64>,
}

impl PoissonTable {
    pub fn new(mean: f64) -> Self {
        let mut cdf = Vec::new();
        let mut p = (-mean).exp();
        let mut acc = p;
        let mut k = 0u32;
        cdf.push(acc);
        while acc < 1.0 - 1e-17 && (k as f64) < mean + 50.0 + 20.0 * mean.sqrt() {
            k += 1;
            p *= mean / k as f64;
            acc += p;
            cdf.push(acc);
        }
        PoissonTable { cdf }
    }

    /// Same value as [`poisson_inverse`] up to rounding in the far tail.
    #[inline]
    pub fn sample(&self, u: f64) -> u32 {
        let mut k = 0;
        while k < self.cdf.len() && u >= self.cdf[k] {
            k += 1;
        }
        k as u32
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prf_is_pure_and_word_sensitive() {
        assert_eq!(prf(7, &[1, 2, 3]), prf(7, &[1, 2, 3]));
        assert_ne!(prf(7, &[1, 2, 3]), prf(7, &[1, 2, 4]));
        assert_ne!(prf(7, &[1, 2, 3]), prf(8, &[1, 2, 3]));
        assert_ne!(prf(7, &[1, 2]), prf(7, &[2, 1]));
        assert_ne!(prf(7, &[0]), prf(7, &[0, 0]));
    }

    #[test]
    fn unit_range() {
        assert_eq!(to_unit(0), 0.0);
        assert!(to_unit(u64::MAX) < 1.0);
    }

    #[test]
    fn streams_replay() {
        let mut a = RngStream::derive(3, &[domain::ENV_INIT, 9]);
        let mut b = RngStream::derive(3, &[domain::ENV_INIT, 9]);
        let mut c = RngStream::derive(3, &[domain::ENV_INIT, 10]);
        let xa: Vec<u64> = (0..8).map(|_| a.next_u64()).collect();
        let xb: Vec<u64> = (0..8).map(|_| b.next_u64()).collect();
        let xc: Vec<u64> = (0..8).map(|_| c.next_u64()).collect();
        assert_eq!(xa, xb);
        assert_ne!(xa, xc);
    }

    #[test]
    fn poisson_inverse_matches_cdf_edges() {
        // P(0) = e^{-1} ≈ 0.3679 for mean 1.
        assert_eq!(poisson_inverse(1.0, 0.36), 0);
        assert_eq!(poisson_inverse(1.0, 0.37), 1);
        assert_eq!(poisson_inverse(0.5, 0.0), 0);
    }

    #[test]
    fn poisson_table_agrees_with_inversion() {
        for mean in [0.5, 1.0, 3.7] {
            let t = PoissonTable::new(mean);
            for i in 0..1000 {
                let u = (i as f64 + 0.5) / 1000.0;
                assert_eq!(t.sample(u), poisson_inverse(mean, u));
            }
        }
    }

    #[test]
    fn poisson_sample_mean() {
        let mut r = RngStream::from_seed(11);
        let n = 200_000;
        let s: u64 = (0..n).map(|_| r.poisson(2.5) as u64).sum();
        let mean = s as f64 / n as f64;
        assert!((mean - 2.5).abs() < 3.0 * (2.5f64 / n as f64).sqrt() * 1.5);
    }
}
