//! Deterministic 64-bit generator used everywhere randomness is needed
//! (synthetic data, SVD range sampling, sub-embedding init, user subsampling).
//!
//! The generator is counter-based splitmix64 so that any implementation
//! language can reproduce identical streams from the same seed:
//!
//! ```text
//! state    <- state + 0x9E3779B97F4A7C15                (per draw)
//! z        <- state
//! z        <- (z XOR (z >> 30)) * 0xBF58476D1CE4E5B9
//! z        <- (z XOR (z >> 27)) * 0x94D049BB133111EB
//! output   <- z XOR (z >> 31)
//! ```
//!
//! Derived streams: `fork(i)` seeds a fresh generator with
//! `mix64(seed_0 + (i + 1) * 0x9E3779B97F4A7C15)` where `seed_0` is the
//! root seed and `mix64` is the output function above. Uniform floats use
//! the top 53 bits; integers in `[0, n)` use the 128-bit multiply-shift
//! reduction; gaussians use the basic Box-Muller transform on two
//! consecutive uniforms.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone)]
pub struct SplitMix64 {
    seed: u64,
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { seed, state: seed }
    }

    /// Independent stream derived from the root seed and a stream index.
    pub fn fork(&self, index: u64) -> Self {
        Self::new(mix64(
            self.seed
                .wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)),
        ))
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }

    /// Uniform in [0, 1) with 53-bit resolution.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in [0, n); n must be nonzero.
    #[inline]
    pub fn next_below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        ((self.next_u64() as u128 * n as u128) >> 64) as u64
    }

    /// Standard normal via Box-Muller on two consecutive uniforms.
    pub fn next_gaussian(&mut self) -> f64 {
        // shift into (0, 1] so the log is finite
        let u1 = ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, slice: &mut [T]) {
        for i in (1..slice.len()).rev() {
            let j = self.next_below(i as u64 + 1) as usize;
            slice.swap(i, j);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible() {
        let mut a = SplitMix64::new(42);
        let mut b = SplitMix64::new(42);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn forked_streams_differ_from_parent_and_each_other() {
        let root = SplitMix64::new(7);
        let mut seen = std::collections::HashSet::new();
        for i in 0..50 {
            let mut s = root.fork(i);
            assert!(seen.insert(s.next_u64()));
        }
    }

    #[test]
    fn uniform_stays_in_unit_interval() {
        let mut rng = SplitMix64::new(123);
        for _ in 0..10_000 {
            let x = rng.next_f64();
            assert!((0.0..1.0).contains(&x));
        }
    }

    #[test]
    fn next_below_is_in_range_and_roughly_uniform() {
        let mut rng = SplitMix64::new(5);
        let n = 10u64;
        let mut counts = [0usize; 10];
        for _ in 0..100_000 {
            counts[rng.next_below(n) as usize] += 1;
        }
        for &c in &counts {
            // expectation 10_000 per bucket
            assert!(c > 9_000 && c < 11_000, "bucket count {c}");
        }
    }

    #[test]
    fn gaussian_moments_are_sane() {
        let mut rng = SplitMix64::new(99);
        let n = 200_000;
        let (mut sum, mut sq) = (0.0, 0.0);
        for _ in 0..n {
            let g = rng.next_gaussian();
            sum += g;
            sq += g * g;
        }
        let mean = sum / n as f64;
        let var = sq / n as f64 - mean * mean;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "var {var}");
    }
}
