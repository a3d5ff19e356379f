//! Data-parallel execution with a sequential fallback.
//!
//! With the `parallel` feature (default) indexed maps run on the rayon pool.
//! Results are always returned in index order, so any reduction performed on
//! them afterwards is bit-identical between the two strategies.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    #[cfg_attr(not(feature = "parallel"), default)]
    Sequential,
    #[cfg(feature = "parallel")]
    #[default]
    Parallel,
}

impl Exec {
    /// Evaluates `f(0..n)` and returns the results in index order.
    pub fn map_indexed<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            Exec::Sequential => (0..n).map(f).collect(),
            #[cfg(feature = "parallel")]
            Exec::Parallel => (0..n).into_par_iter().map(f).collect(),
        }
    }

    /// Maps over fixed-size chunks of `items`, preserving chunk order.
    pub fn map_chunks<I, T, F>(self, items: &[I], chunk: usize, f: F) -> Vec<T>
    where
        I: Sync,
        T: Send,
        F: Fn(&[I]) -> T + Sync + Send,
    {
        let chunk = chunk.max(1);
        match self {
            Exec::Sequential => items.chunks(chunk).map(f).collect(),
            #[cfg(feature = "parallel")]
            Exec::Parallel => items.par_chunks(chunk).map(f).collect(),
        }
    }
}
