//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature the maps and reductions below run on the rayon
//! pool; without it they are plain iterator loops. Reductions always use the
//! same fixed chunking so results are bitwise identical across thread counts
//! and across both builds.

use std::ops::Add;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Elements per reduction chunk.
pub const CHUNK: usize = 512;

/// `(0..n).map(f).collect()`, evaluated in parallel when available.
pub fn map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Order-preserving parallel map over a slice.
pub fn map_slice<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Deterministic sum of `f(i)` for `i in 0..n`.
pub fn sum_range<T, F>(n: usize, f: F) -> T
where
    T: Send + Copy + Default + Add<Output = T>,
    F: Fn(usize) -> T + Sync + Send,
{
    let n_chunks = n.div_ceil(CHUNK);
    let partial = map_range(n_chunks, |c| {
        let start = c * CHUNK;
        let end = (start + CHUNK).min(n);
        (start..end).fold(T::default(), |acc, i| acc + f(i))
    });
    partial.into_iter().fold(T::default(), |acc, x| acc + x)
}
