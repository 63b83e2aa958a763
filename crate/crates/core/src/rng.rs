//! Sources of uniform choices.
//!
//! Every random construction in this crate draws its randomness through
//! [`Chooser::choose`], which returns a uniform index in `0..n`. Two drivers
//! implement it:
//!
//! * [`RngStream`], a seeded ChaCha8 stream used for Monte Carlo;
//! * [`Enumerator`], which replays the construction once per leaf of its
//!   choice tree, so that [`enumerate`] yields every outcome with its exact
//!   rational weight.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub trait Chooser {
    /// A uniform index in `0..n`. `n` must be positive.
    fn choose(&mut self, n: usize) -> usize;

    /// A uniform ordered pair of distinct indices in `0..n`, `n >= 2`.
    fn choose_distinct_pair(&mut self, n: usize) -> (usize, usize) {
        debug_assert!(n >= 2);
        let a = self.choose(n);
        let mut b = self.choose(n - 1);
        if b >= a {
            b += 1;
        }
        (a, b)
    }
}

impl<C: Chooser + ?Sized> Chooser for &mut C {
    fn choose(&mut self, n: usize) -> usize {
        (**self).choose(n)
    }
}

/// A reproducible random stream.
///
/// The generator is ChaCha8 keyed by `master_seed` (expanded through
/// `seed_from_u64`) with its 64-bit stream id set to `stream_index`. ChaCha
/// is counter based, so stream `i` yields the same draws whatever thread or
/// order it is consumed in, and on every platform.
#[derive(Debug, Clone)]
pub struct RngStream {
    master_seed: u64,
    stream_index: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(stream_index);
        RngStream { master_seed, stream_index, rng }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_index(&self) -> u64 {
        self.stream_index
    }

    /// Uniform float in `[0, 1)`.
    pub fn unit(&mut self) -> f64 {
        self.rng.random::<f64>()
    }
}

impl Chooser for RngStream {
    fn choose(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        // Sampled in u64 so 32- and 64-bit targets draw identically.
        self.rng.random_range(0..n as u64) as usize
    }
}

/// Depth-first walker over the tree of choices made by a construction.
#[derive(Debug, Default)]
pub struct Enumerator {
    path: Vec<(usize, usize)>,
    cursor: usize,
}

impl Enumerator {
    fn weight(&self) -> BigRational {
        let den = self.path.iter().fold(BigInt::one(), |acc, &(_, arity)| acc * BigInt::from(arity));
        BigRational::new(BigInt::one(), den)
    }

    /// Moves to the next unexplored leaf; false once the tree is exhausted.
    fn advance(&mut self) -> bool {
        self.path.truncate(self.cursor);
        self.cursor = 0;
        while let Some(&(choice, arity)) = self.path.last() {
            if choice + 1 < arity {
                self.path.last_mut().unwrap().0 += 1;
                return true;
            }
            self.path.pop();
        }
        false
    }
}

impl Chooser for Enumerator {
    fn choose(&mut self, n: usize) -> usize {
        assert!(n > 0, "choice over an empty range");
        let choice = if self.cursor < self.path.len() {
            let (choice, arity) = self.path[self.cursor];
            assert_eq!(arity, n, "construction is not deterministic given its choices");
            choice
        } else {
            self.path.push((0, n));
            0
        };
        self.cursor += 1;
        choice
    }
}

/// Runs `f` once per leaf of its choice tree, returning each result with
/// its probability. Fails once more than `leaf_cap` leaves have been visited.
pub fn enumerate_capped<T, F>(leaf_cap: usize, mut f: F) -> Result<Vec<(T, BigRational)>>
where
    F: FnMut(&mut Enumerator) -> T,
{
    let mut driver = Enumerator::default();
    let mut out = Vec::new();
    loop {
        let value = f(&mut driver);
        out.push((value, driver.weight()));
        if out.len() > leaf_cap {
            return Err(Error::StateSpaceExceeded { states: out.len(), cap: leaf_cap });
        }
        if !driver.advance() {
            return Ok(out);
        }
    }
}

/// Exact law of `f`'s output, summing weights of equal outcomes.
pub fn enumerate_law<K, F>(leaf_cap: usize, mut f: F) -> Result<BTreeMap<K, BigRational>>
where
    K: Ord,
    F: FnMut(&mut Enumerator) -> K,
{
    let mut law: BTreeMap<K, BigRational> = BTreeMap::new();
    let mut driver = Enumerator::default();
    let mut leaves = 0usize;
    loop {
        let key = f(&mut driver);
        let w = driver.weight();
        let slot = law.entry(key).or_insert_with(BigRational::zero);
        *slot += w;
        leaves += 1;
        if leaves > leaf_cap {
            return Err(Error::StateSpaceExceeded { states: leaves, cap: leaf_cap });
        }
        if !driver.advance() {
            return Ok(law);
        }
    }
}
