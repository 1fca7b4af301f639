//! Thin parallelism layer.
//!
//! All data-parallel loops in the crate go through the helpers here so that
//! the `parallel` feature (rayon) and the sequential fallback share one code
//! path per call site. Helpers only ever split work into index-addressed
//! chunks that are written independently or reduced in a fixed order, so
//! output is bit-identical for any worker count.
//!
//! The `JSPL_THREADS` environment variable caps the rayon pool size
//! (0 or unset = automatic). It is read once, the first time a parallel
//! helper runs.

#[cfg(feature = "parallel")]
use std::sync::Once;

#[cfg(feature = "parallel")]
static POOL_INIT: Once = Once::new();

/// Number of worker threads requested via `JSPL_THREADS` (0 = automatic).
pub fn requested_threads() -> usize {
    std::env::var("JSPL_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .unwrap_or(0)
}

#[cfg(feature = "parallel")]
fn ensure_pool() {
    POOL_INIT.call_once(|| {
        let n = requested_threads();
        if n > 0 {
            // Ignore the error: a pool may already exist (e.g. tests that
            // install their own), in which case that pool wins.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    });
}

/// Apply `f` to every element of `items`, in parallel when enabled.
///
/// Elements are mutated independently; `f` receives the element index.
pub fn for_each_mut<T, F>(items: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize, &mut T) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        ensure_pool();
        use rayon::prelude::*;
        items.par_iter_mut().enumerate().for_each(|(i, t)| f(i, t));
    }
    #[cfg(not(feature = "parallel"))]
    {
        for (i, t) in items.iter_mut().enumerate() {
            f(i, t);
        }
    }
}

/// Map `0..n` through `f` and collect results in index order.
pub fn map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        ensure_pool();
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}
