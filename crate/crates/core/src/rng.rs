//! SplitMix64, the generator behind every seeded instance.
//!
//! State advances by the golden-ratio increment `0x9E3779B97F4A7C15`; outputs
//! are mixed with the multipliers `0xBF58476D1CE4E5B9` and `0x94D049BB133111EB`
//! and shifts 30, 27, 31. Derived draws:
//!
//! * `uniform()`: top 53 bits of one output times `2^-53`, in `[0, 1)`.
//! * `normal()`: Box-Muller on two uniforms `u1, u2`, returning
//!   `sqrt(-2 ln(1 - u1)) cos(2 pi u2)`; the sine branch is discarded.
//! * `below(k)`: `uniform() * k` truncated, for `k <= 2^53`.

#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(Self::GAMMA);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in the open interval `(-radius, radius)` up to rounding.
    pub fn symmetric(&mut self, radius: f64) -> f64 {
        radius * (2.0 * self.uniform() - 1.0)
    }

    pub fn normal(&mut self) -> f64 {
        let u1 = self.uniform();
        let u2 = self.uniform();
        (-2.0 * (1.0 - u1).ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    pub fn below(&mut self, k: usize) -> usize {
        ((self.uniform() * k as f64) as usize).min(k.saturating_sub(1))
    }

    /// `count` distinct indices from `0..n` via a partial Fisher-Yates shuffle,
    /// in the order drawn.
    pub fn sample_indices(&mut self, n: usize, count: usize) -> Vec<usize> {
        let mut pool: Vec<usize> = (0..n).collect();
        for i in 0..count.min(n) {
            let j = i + self.below(n - i);
            pool.swap(i, j);
        }
        pool.truncate(count.min(n));
        pool
    }

    /// Derives an independent stream, e.g. one per repetition of an experiment.
    pub fn fork(&mut self) -> Self {
        Self::new(self.next_u64())
    }
}
