//! Seeded random-number handle.
//!
//! Every draw in the crate goes through [`RngHandle`], which wraps the
//! ChaCha8 stream cipher generator from `rand_chacha`. ChaCha8 output is
//! specified independently of platform and word size, so a seed fixes the
//! draw sequence everywhere. Uniform reals use the top 53 bits of a `u64`
//! draw scaled into `[0, 1)`.

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for shard or stream `index` of `parent`.
///
/// `derive_seed(p, i) = mix64(p ^ mix64(i))` where `mix64` is the SplitMix64
/// finalizer.
pub fn derive_seed(parent: u64, index: u64) -> u64 {
    mix64(parent ^ mix64(index))
}

#[derive(Debug)]
pub struct RngHandle {
    seed: u64,
    inner: ChaCha8Rng,
}

impl RngHandle {
    pub fn new(seed: u64) -> Self {
        RngHandle {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent handle seeded with [`derive_seed`]`(self.seed(), index)`.
    pub fn child(&self, index: u64) -> RngHandle {
        RngHandle::new(derive_seed(self.seed, index))
    }

    /// Uniform on `[0, 1)`.
    #[inline]
    pub fn unit(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `[lo, hi)`; returns `lo` when `lo == hi`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> Result<f64> {
        if !(lo <= hi) {
            return Err(Error::InvalidRange { lo, hi });
        }
        if lo == hi {
            return Ok(lo);
        }
        let x = lo + (hi - lo) * self.unit();
        // Rounding can land exactly on `hi`; keep the half-open contract.
        Ok(if x < hi { x } else { lo.max(hi.next_down()) })
    }

    pub fn normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        items.shuffle(&mut self.inner);
    }

    /// A uniformly random permutation of `0..n`.
    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..n).collect();
        self.shuffle(&mut idx);
        idx
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_width_range() {
        let mut rng = RngHandle::new(1);
        assert_eq!(rng.uniform(3.0, 3.0).unwrap(), 3.0);
    }

    #[test]
    fn inverted_range_rejected() {
        let mut rng = RngHandle::new(1);
        assert!(matches!(
            rng.uniform(2.0, 1.0),
            Err(Error::InvalidRange { .. })
        ));
    }

    #[test]
    fn same_seed_same_stream() {
        let mut a = RngHandle::new(42);
        let mut b = RngHandle::new(42);
        for _ in 0..1000 {
            assert_eq!(
                a.uniform(0.0, 1.0).unwrap().to_bits(),
                b.uniform(0.0, 1.0).unwrap().to_bits()
            );
        }
    }

    #[test]
    fn uniform_mean_is_half() {
        let mut rng = RngHandle::new(7);
        let n = 100_000;
        let mean: f64 = (0..n).map(|_| rng.uniform(0.0, 1.0).unwrap()).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn draws_stay_in_half_open_range() {
        let mut rng = RngHandle::new(3);
        for _ in 0..10_000 {
            let x = rng.uniform(-2.0, 5.0).unwrap();
            assert!((-2.0..5.0).contains(&x));
        }
    }

    #[test]
    fn children_differ_from_parent_and_each_other() {
        let parent = RngHandle::new(9);
        let mut c0 = parent.child(0);
        let mut c1 = parent.child(1);
        assert_ne!(c0.seed(), c1.seed());
        assert_ne!(c0.unit(), c1.unit());
        assert_eq!(parent.child(0).seed(), derive_seed(9, 0));
    }
}
