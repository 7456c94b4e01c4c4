//! Seeded randomness beacon.
//!
//! Draw `i` is the first eight bytes (little-endian) of
//! `SHA-256("ddrm/beacon" ‖ seed_be ‖ i_be)`. Bounded integers use
//! rejection sampling so every value in range is equally likely, and
//! subset draws are a partial Fisher–Yates shuffle over the pool sorted
//! ascending. Nothing else feeds the beacon, so identical seeds and
//! identical call sequences give identical outputs.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("cannot draw {requested} from a pool of {available}")]
pub struct PoolTooSmall {
    pub requested: usize,
    pub available: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RandomBeacon {
    seed: u64,
    counter: u64,
}

impl RandomBeacon {
    pub fn new(seed: u64) -> Self {
        RandomBeacon { seed, counter: 0 }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of 64-bit words drawn so far.
    pub fn counter(&self) -> u64 {
        self.counter
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut h = Sha256::new();
        h.update(b"ddrm/beacon");
        h.update(self.seed.to_be_bytes());
        h.update(self.counter.to_be_bytes());
        let out = h.finalize();
        self.counter += 1;
        u64::from_le_bytes(out[..8].try_into().expect("8 bytes"))
    }

    /// Uniform in `0..n`. `n` must be positive.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0)");
        // Largest multiple of n that fits; values at or above it are redrawn.
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let x = self.next_u64();
            if x < zone {
                return x % n;
            }
        }
    }

    /// Uniform in `lo..=hi`.
    pub fn range_inclusive(&mut self, lo: u64, hi: u64) -> u64 {
        assert!(lo <= hi);
        lo + self.below(hi - lo + 1)
    }

    /// True with probability `p` (clamped to [0, 1]). Consumes a draw
    /// only when `p` is strictly between 0 and 1.
    pub fn chance(&mut self, p: f64) -> bool {
        if p <= 0.0 {
            return false;
        }
        if p >= 1.0 {
            return true;
        }
        let unit = (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
        unit < p
    }

    /// Samples `k` distinct items without replacement.
    pub fn draw<T: Ord + Clone>(&mut self, pool: &[T], k: usize) -> Result<Vec<T>, PoolTooSmall> {
        if k > pool.len() {
            return Err(PoolTooSmall { requested: k, available: pool.len() });
        }
        let mut items = pool.to_vec();
        items.sort();
        let n = items.len();
        for i in 0..k {
            let j = i + self.below((n - i) as u64) as usize;
            items.swap(i, j);
        }
        items.truncate(k);
        Ok(items)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn exhaustive_draw_returns_whole_pool() {
        let mut b = RandomBeacon::new(1);
        let pool = [5, 3, 9, 1, 7];
        let got: BTreeSet<_> = b.draw(&pool, 5).unwrap().into_iter().collect();
        assert_eq!(got, pool.into_iter().collect());
    }

    #[test]
    fn same_seed_same_draw() {
        let pool: Vec<u64> = (0..100).collect();
        let a = RandomBeacon::new(42).draw(&pool, 5).unwrap();
        let b = RandomBeacon::new(42).draw(&pool, 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.iter().collect::<BTreeSet<_>>().len(), 5);
        let c = RandomBeacon::new(43).draw(&pool, 5).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn draw_ignores_input_order() {
        let fwd: Vec<u64> = (0..20).collect();
        let rev: Vec<u64> = (0..20).rev().collect();
        assert_eq!(
            RandomBeacon::new(9).draw(&fwd, 4).unwrap(),
            RandomBeacon::new(9).draw(&rev, 4).unwrap()
        );
    }

    #[test]
    fn empty_pool_is_too_small() {
        let mut b = RandomBeacon::new(0);
        let empty: [u64; 0] = [];
        assert_eq!(b.draw(&empty, 1), Err(PoolTooSmall { requested: 1, available: 0 }));
        assert_eq!(b.counter(), 0);
    }

    #[test]
    fn below_is_roughly_uniform() {
        let mut b = RandomBeacon::new(3);
        let mut counts = [0u32; 5];
        for _ in 0..5_000 {
            counts[b.below(5) as usize] += 1;
        }
        for c in counts {
            assert!((850..1150).contains(&c), "{counts:?}");
        }
    }

    #[test]
    fn chance_extremes_do_not_consume() {
        let mut b = RandomBeacon::new(3);
        assert!(b.chance(1.0));
        assert!(!b.chance(0.0));
        assert_eq!(b.counter(), 0);
    }
}
