//! Bounded worker parallelism. Per-document stages map in parallel and
//! collect by index, so any job count produces the same bytes as the
//! single-threaded reference.

/// Runs `f` inside a rayon pool with `jobs` worker threads
/// (0 → logical cores).
pub fn with_jobs<R: Send>(jobs: usize, f: impl FnOnce() -> R + Send) -> R {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .expect("thread pool")
        .install(f)
}

/// Parallel map preserving input order.
pub fn map_ordered<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}
