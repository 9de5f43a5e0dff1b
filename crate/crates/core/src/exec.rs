//! Execution policy for the data-parallel loops.
//!
//! Two loops dominate the runtime: evaluating the convolution at every grid
//! node, and drawing independent Monte Carlo replicates. Both are written as
//! "compute item `i` for `i in 0..count`" and dispatched here, either through
//! rayon (feature `parallel`, on by default) or a plain loop.
//!
//! Results are always collected in index order, so the output of a run does not
//! depend on the policy or on the number of worker threads.
//!
//! # Random streams
//!
//! Replicate `i` of a run with root seed `s` draws from
//! `ChaCha8Rng::seed_from_u64(s)` switched to stream `i` via `set_stream`.
//! Distinct purposes inside one run (graph draws, limit replicates, recursion
//! samples) use distinct root seeds derived with [`Streams::derive`].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    /// Falls back to sequential when the crate is built without `parallel`.
    Parallel,
}

impl Default for Exec {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }
}

impl Exec {
    /// Evaluates `f(0), ..., f(count - 1)` and returns the results in order.
    pub fn map<T, F>(self, count: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel => (0..count).into_par_iter().map(f).collect(),
            _ => (0..count).map(f).collect(),
        }
    }
}

/// A root seed plus an execution policy; hands out one reproducible random
/// stream per replicate index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Streams {
    pub seed: u64,
    pub exec: Exec,
}

impl Streams {
    pub fn new(seed: u64) -> Self {
        Streams {
            seed,
            exec: Exec::default(),
        }
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    pub fn stream(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        rng
    }

    /// A child root seed for a separate purpose within the same run
    /// (splitmix64 of `seed + tag`).
    pub fn derive(&self, tag: u64) -> Streams {
        let mut z = self.seed.wrapping_add(tag.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
        Streams {
            seed: z,
            exec: self.exec,
        }
    }

    /// Runs `f(i, stream_i)` for every replicate and returns results in order.
    pub fn map<T, F>(&self, count: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize, &mut ChaCha8Rng) -> T + Sync + Send,
    {
        self.exec.map(count, |i| {
            let mut rng = self.stream(i as u64);
            f(i, &mut rng)
        })
    }
}
