//! Trial-level data parallelism.
//!
//! Randomized suites, refinement ladders and parameter sweeps are mapped over
//! independent indices. With the `parallel` feature (default) the map runs on
//! the rayon pool; without it, or through the `*_seq` variants, it runs in
//! order on the calling thread. Results are always returned in index order so
//! downstream reductions are bitwise reproducible either way.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map `f` over `0..count`, in parallel when the feature is enabled.
pub fn map_indexed<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..count).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..count).map(f).collect()
    }
}

/// Map `f` over a slice, in parallel when the feature is enabled.
pub fn map_slice<I, T, F>(items: &[I], f: F) -> Vec<T>
where
    I: Sync,
    T: Send,
    F: Fn(&I) -> T + Sync + Send,
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

/// Always-sequential counterpart of [`map_indexed`].
pub fn map_indexed_seq<T, F>(count: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..count).map(f).collect()
}

/// Whether the rayon backend is compiled in.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
