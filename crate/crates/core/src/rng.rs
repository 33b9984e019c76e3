//! Labelled SplitMix64 streams.
//!
//! Every stochastic component of task generation draws from its own
//! [`RngStream`], derived from a `(seed, label)` pair. The algorithm is fixed
//! and documented here so that suites can be regenerated from seeds alone by
//! any implementation:
//!
//! * label hash: 64-bit FNV-1a over the UTF-8 bytes of the label;
//! * initial state: `splitmix64_mix(seed ^ fnv1a(label))`;
//! * step: `state += 0x9E3779B97F4A7C15`, output `splitmix64_mix(state)`;
//! * `next_f64`: top 53 bits of the next output scaled by `2^-53`;
//! * `below(n)`: rejection sampling on the next output against the largest
//!   multiple of `n`;
//! * `normal`: Box–Muller on two `next_f64` draws (cosine branch only).

use serde::{Deserialize, Serialize};

/// Identifier of the generator algorithm recorded alongside streams.
pub const ALGORITHM_ID: &str = "splitmix64/fnv1a-label/v1";

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// The SplitMix64 output finalizer.
pub fn splitmix64_mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// 64-bit FNV-1a.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// A labelled deterministic random stream.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngStream {
    state: u64,
    label: String,
}

impl RngStream {
    pub fn new(seed: u64, label: &str) -> Self {
        Self { state: splitmix64_mix(seed ^ fnv1a(label.as_bytes())), label: label.to_string() }
    }

    /// Derive a child stream. The child's seed is the next output of `self`
    /// mixed with the child label, so siblings with different labels are
    /// independent and the parent advances by exactly one draw.
    pub fn fork(&mut self, label: &str) -> RngStream {
        let seed = self.next_u64();
        RngStream::new(seed, &format!("{}/{}", self.label, label))
    }

    /// Derive a 64-bit seed for `(seed, label)` without keeping a stream.
    pub fn derive_seed(seed: u64, label: &str) -> u64 {
        RngStream::new(seed, label).next_u64()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn algorithm_id(&self) -> &'static str {
        ALGORITHM_ID
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        splitmix64_mix(self.state)
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[0, n)`. Panics if `n == 0`.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0)");
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let v = self.next_u64();
            if v < zone {
                return v % n;
            }
        }
    }

    /// Uniform integer in the inclusive range `[lo, hi]`.
    pub fn range_inclusive(&mut self, lo: i64, hi: i64) -> i64 {
        assert!(lo <= hi, "empty range");
        let span = (hi - lo) as u64 + 1;
        lo + self.below(span) as i64
    }

    pub fn index(&mut self, len: usize) -> usize {
        self.below(len as u64) as usize
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }

    /// Normal draw with the given mean and standard deviation.
    pub fn normal(&mut self, mean: f64, std: f64) -> f64 {
        // 1 - u keeps the log argument in (0, 1].
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        let z = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
        mean + std * z
    }

    /// Fisher–Yates shuffle, iterating from the back.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }

    pub fn choose<'a, T>(&mut self, items: &'a [T]) -> Option<&'a T> {
        if items.is_empty() {
            None
        } else {
            Some(&items[self.index(items.len())])
        }
    }

    /// Random permutation of `0..n`.
    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut p: Vec<usize> = (0..n).collect();
        self.shuffle(&mut p);
        p
    }
}
