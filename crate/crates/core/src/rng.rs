//! Deterministic RNG for the simulator.
//!
//! splitmix64 over a counter: stable output across platforms, cheap to fork
//! into independent substreams. Not cryptographically secure and never used
//! for secrets; validator keys are derived separately via SHA-256.

use sha2::{Digest, Sha256};

/// splitmix64 finalizer. Also used by the toy inference model as its mixing
/// primitive, so it lives here.
#[inline]
pub fn mix64(mut x: u64) -> u64 {
    x ^= x >> 30;
    x = x.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x ^= x >> 27;
    x = x.wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^= x >> 31;
    x
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// Counter-based splitmix64 stream.
#[derive(Clone, Debug)]
pub struct DetRng {
    state: u64,
}

impl DetRng {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    /// Named substream of a root seed. The (domain, a, b) tuple is hashed so
    /// substreams never collide across call sites.
    pub fn substream(root: u64, domain: &str, a: u64, b: u64) -> Self {
        let mut h = Sha256::new();
        h.update(b"infermesh-stream");
        h.update(root.to_le_bytes());
        h.update((domain.len() as u64).to_le_bytes());
        h.update(domain.as_bytes());
        h.update(a.to_le_bytes());
        h.update(b.to_le_bytes());
        let digest = h.finalize();
        let mut seed = [0u8; 8];
        seed.copy_from_slice(&digest[..8]);
        Self::new(u64::from_le_bytes(seed))
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix64(self.state)
    }

    /// Uniform value in `[lo, hi]` (inclusive). Modulo bias is negligible for
    /// the span sizes the simulator uses (< 2^32).
    pub fn range_inclusive(&mut self, lo: u64, hi: u64) -> u64 {
        debug_assert!(lo <= hi);
        let span = hi - lo + 1;
        lo + self.next_u64() % span
    }

    /// Bernoulli draw with probability `num / den`.
    pub fn chance(&mut self, num: u64, den: u64) -> bool {
        debug_assert!(den > 0 && num <= den);
        self.next_u64() % den < num
    }

    pub fn token(&mut self) -> u16 {
        (self.next_u64() & 0xffff) as u16
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_deterministic() {
        let mut a = DetRng::new(7);
        let mut b = DetRng::new(7);
        for _ in 0..32 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn substreams_differ_by_domain_and_index() {
        let mut t = DetRng::substream(42, "traffic", 0, 0);
        let mut j = DetRng::substream(42, "judge", 0, 0);
        let mut t1 = DetRng::substream(42, "traffic", 1, 0);
        let first = t.next_u64();
        assert_ne!(first, j.next_u64());
        assert_ne!(first, t1.next_u64());
    }

    #[test]
    fn range_hits_bounds() {
        let mut r = DetRng::new(1);
        let mut seen_lo = false;
        let mut seen_hi = false;
        for _ in 0..1000 {
            let v = r.range_inclusive(3, 6);
            assert!((3..=6).contains(&v));
            seen_lo |= v == 3;
            seen_hi |= v == 6;
        }
        assert!(seen_lo && seen_hi);
    }
}
