//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (on by default) [`Exec::Parallel`] dispatches
//! to rayon; without it every call runs on the current thread. Reductions are
//! split into fixed-size chunks whose partial results are combined in index
//! order, so floating-point results do not depend on thread scheduling.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Samples per reduction chunk. Fixed so that summation order is stable.
pub const CHUNK: usize = 512;

/// Execution strategy for the data-parallel inner loops.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exec {
    Sequential,
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
    /// `f(i)` for `i in 0..n`, results in index order.
    pub fn map<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel => (0..n).into_par_iter().map(f).collect(),
            _ => (0..n).map(f).collect(),
        }
    }

    /// Chunked map-reduce over `0..n`.
    ///
    /// `partial(range)` produces one value per chunk; the chunk values are
    /// folded left to right with `combine`. Returns `None` when `n == 0`.
    pub fn reduce_chunks<T, P, C>(self, n: usize, partial: P, combine: C) -> Option<T>
    where
        T: Send,
        P: Fn(std::ops::Range<usize>) -> T + Sync + Send,
        C: Fn(T, T) -> T,
    {
        let chunks = n.div_ceil(CHUNK);
        let parts = self.map(chunks, |c| {
            let start = c * CHUNK;
            partial(start..(start + CHUNK).min(n))
        });
        parts.into_iter().reduce(combine)
    }
}
