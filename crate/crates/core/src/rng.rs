//! Seeds, stream derivation and the worker-count invariant trial loops.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// A reproducible random stream: the same `(seed, stream_index)` always yields the same numbers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct RngSeed {
    pub seed: u64,
    pub stream_index: u64,
}

impl RngSeed {
    pub fn new(seed: u64) -> Self {
        RngSeed { seed, stream_index: 0 }
    }

    pub fn with_stream(self, stream_index: u64) -> Self {
        RngSeed { stream_index, ..self }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_index);
        rng
    }

    /// A child seed for an independent sub-computation labelled `tag`.
    ///
    /// Children of the same parent never share a stream with each other or with the parent.
    pub fn derive(&self, tag: u64) -> RngSeed {
        let s = splitmix64(self.seed ^ splitmix64(self.stream_index.wrapping_add(0x9e37_79b9)) ^ splitmix64(tag));
        RngSeed { seed: s, stream_index: 0 }
    }

    /// Seed for trial `i` of a computation rooted at `self`: stream index = trial index.
    pub fn trial(&self, i: u64) -> RngSeed {
        RngSeed { seed: splitmix64(self.seed ^ self.stream_index.rotate_left(29)), stream_index: i }
    }
}

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

const CHUNK: usize = 1024;

/// Counts trials for which `f` holds. Chunks are fixed-size, so the result does not depend on
/// how many workers rayon uses.
pub fn count_trials<F>(trials: usize, f: F) -> usize
where
    F: Fn(u64) -> bool + Sync,
{
    let chunks = trials.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(trials);
            (lo..hi).filter(|&i| f(i as u64)).count()
        })
        .sum()
}

/// Like [`count_trials`], with a per-chunk scratch state cloned from `init` (for warm starts).
pub fn count_trials_with<S, F>(trials: usize, init: &S, f: F) -> usize
where
    S: Clone + Sync,
    F: Fn(&mut S, u64) -> bool + Sync,
{
    let chunks = trials.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut state = init.clone();
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(trials);
            (lo..hi).filter(|&i| f(&mut state, i as u64)).count()
        })
        .sum()
}

/// Sum and sum of squares of `f` over trials, reduced in a fixed chunk order.
pub fn moment_trials<F>(trials: usize, f: F) -> (f64, f64)
where
    F: Fn(u64) -> f64 + Sync,
{
    let chunks = trials.div_ceil(CHUNK);
    let partial: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(trials);
            let mut s = 0.0;
            let mut s2 = 0.0;
            for i in lo..hi {
                let v = f(i as u64);
                s += v;
                s2 += v * v;
            }
            (s, s2)
        })
        .collect();
    partial.into_iter().fold((0.0, 0.0), |(a, b), (c, d)| (a + c, b + d))
}

/// Maps every trial index in order, in parallel.
pub fn map_trials<T, F>(trials: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    (0..trials as u64).into_par_iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: u64 = RngSeed::new(7).rng().gen();
        let b: u64 = RngSeed::new(7).rng().gen();
        let c: u64 = RngSeed::new(7).with_stream(1).rng().gen();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(RngSeed::new(7).derive(1), RngSeed::new(7).derive(2));
    }

    #[test]
    fn reductions_do_not_depend_on_pool_size() {
        let f = |i: u64| {
            let x: f64 = RngSeed::new(3).trial(i).rng().gen();
            x
        };
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| moment_trials(5000, f));
        let b = four.install(|| moment_trials(5000, f));
        assert_eq!(a, b);
        let c = one.install(|| count_trials(5000, |i| f(i) < 0.3));
        let d = four.install(|| count_trials(5000, |i| f(i) < 0.3));
        assert_eq!(c, d);
    }
}
