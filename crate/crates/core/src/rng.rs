//! Deterministic random source.
//!
//! Everything stochastic in this workspace (noise synthesis, weight init,
//! epoch shuffling, dropout, schedule stress tests) draws from this one
//! generator so that a master seed pins every output bit-for-bit. Streams
//! for independent units of work (a session, a training fold, a detector)
//! are derived by hashing a label path into the seed, which keeps parallel
//! execution order irrelevant to the numbers produced.

use alloc::string::String;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(GOLDEN);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a 64-bit hash. Used for stream derivation and data fingerprints.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x1000_0000_01B3);
    }
    h
}

/// Xoshiro256** seeded through SplitMix64.
#[derive(Clone, Debug)]
pub struct Rng {
    s: [u64; 4],
    seed: u64,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        let mut sm = seed;
        let s = [
            splitmix64(&mut sm),
            splitmix64(&mut sm),
            splitmix64(&mut sm),
            splitmix64(&mut sm),
        ];
        Rng { s, seed }
    }

    /// The seed this stream was created from (derivations included).
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// A new independent stream for the labelled child unit of work.
    /// Derivation depends only on (seed, label), never on draws already
    /// taken from `self`.
    pub fn derive(&self, label: &str) -> Rng {
        let mut mix = self.seed ^ fnv1a64(label.as_bytes());
        Rng::new(splitmix64(&mut mix))
    }

    /// Like [`Rng::derive`] but keyed by an index.
    pub fn derive_u64(&self, index: u64) -> Rng {
        let mut mix = self.seed ^ index.wrapping_mul(GOLDEN);
        Rng::new(splitmix64(&mut mix))
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let result = self.s[1].wrapping_mul(5).rotate_left(7).wrapping_mul(9);
        let t = self.s[1] << 17;
        self.s[2] ^= self.s[0];
        self.s[3] ^= self.s[1];
        self.s[1] ^= self.s[2];
        self.s[0] ^= self.s[3];
        self.s[2] ^= t;
        self.s[3] = self.s[3].rotate_left(45);
        result
    }

    /// Uniform in [0, 1) with 53-bit resolution.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `0..n`. Modulo bias is negligible for the small ranges
    /// used here (image positions, shuffles).
    #[inline]
    pub fn next_below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        (self.next_u64() % n as u64) as usize
    }

    /// Standard normal via Box-Muller. Draws exactly two uniforms and
    /// discards the sine partner, so the draw count per call is fixed.
    pub fn next_gaussian(&mut self) -> f64 {
        let u1 = ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
        let u2 = self.next_f64();
        libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * core::f64::consts::PI * u2)
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, slice: &mut [T]) {
        for i in (1..slice.len()).rev() {
            let j = self.next_below(i + 1);
            slice.swap(i, j);
        }
    }

    /// `k` distinct indices drawn uniformly from `0..n`, in ascending order.
    pub fn choose_indices(&mut self, n: usize, k: usize) -> alloc::vec::Vec<usize> {
        debug_assert!(k <= n);
        let mut pool: alloc::vec::Vec<usize> = (0..n).collect();
        self.shuffle(&mut pool);
        let mut picked = pool[..k].to_vec();
        picked.sort_unstable();
        picked
    }
}

/// Hex rendering used wherever a hash is echoed to the user.
pub fn hex64(h: u64) -> String {
    use core::fmt::Write;
    let mut s = String::with_capacity(18);
    let _ = write!(s, "{h:016x}");
    s
}
