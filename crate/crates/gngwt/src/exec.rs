//! Execution strategy for data-parallel inner loops.
//!
//! Everything here maps a function over a slice and collects the results in
//! input order, so outputs are identical regardless of strategy. Floating
//! point reductions are performed sequentially by the callers on the
//! collected vectors, which keeps runs bit-reproducible.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// How to run an embarrassingly parallel loop.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parallelism {
    /// Plain sequential iteration.
    Sequential,
    /// Rayon work-stealing thread pool.
    #[cfg(feature = "parallel")]
    Rayon,
}

impl Default for Parallelism {
    #[cfg(feature = "parallel")]
    fn default() -> Self {
        Parallelism::Rayon
    }

    #[cfg(not(feature = "parallel"))]
    fn default() -> Self {
        Parallelism::Sequential
    }
}

impl Parallelism {
    /// Maps `f` over `items`, preserving order.
    pub fn map<T, U, F>(self, items: &[T], f: F) -> Vec<U>
    where
        T: Sync,
        U: Send,
        F: Fn(&T) -> U + Sync + Send,
    {
        match self {
            Parallelism::Sequential => items.iter().map(f).collect(),
            #[cfg(feature = "parallel")]
            Parallelism::Rayon => items.par_iter().map(f).collect(),
        }
    }

    /// Maps `f` over `items` with the element index, preserving order.
    pub fn map_indexed<T, U, F>(self, items: &[T], f: F) -> Vec<U>
    where
        T: Sync,
        U: Send,
        F: Fn(usize, &T) -> U + Sync + Send,
    {
        match self {
            Parallelism::Sequential => items.iter().enumerate().map(|(i, t)| f(i, t)).collect(),
            #[cfg(feature = "parallel")]
            Parallelism::Rayon => items.par_iter().enumerate().map(|(i, t)| f(i, t)).collect(),
        }
    }
}
