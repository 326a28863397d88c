//! Data-parallel helpers.
//!
//! With the `parallel` feature (on by default) batch work is spread over the
//! rayon pool; without it every [`Execution`] mode runs on the calling thread.
//! Both paths produce results in input order.

/// How a batch operation distributes its work.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// True when work will actually be fanned out to worker threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Maps `f` over `items`, preserving order.
pub fn map<T, R, F>(items: &[T], exec: Execution, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}

/// Maps `f` over `items` with their indices, preserving order.
pub fn map_indexed<T, R, F>(items: &[T], exec: Execution, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return items.par_iter().enumerate().map(|(i, t)| f(i, t)).collect();
    }
    let _ = exec;
    items.iter().enumerate().map(|(i, t)| f(i, t)).collect()
}

/// Sums `f` over `items`.
///
/// The parallel path sums fixed-size chunks and then the chunk totals in
/// order, so the result does not depend on how rayon schedules the work.
pub fn sum<T, F>(items: &[T], exec: Execution, f: F) -> f64
where
    T: Sync,
    F: Fn(&T) -> f64 + Sync + Send,
{
    const CHUNK: usize = 64;
    let chunks: Vec<&[T]> = items.chunks(CHUNK).collect();
    let partial = map(&chunks, exec, |chunk| chunk.iter().map(&f).sum::<f64>());
    partial.into_iter().sum()
}

/// Runs `f` over `items` on a dedicated pool of at most `threads` workers.
///
/// Used for I/O-bound fan-out (LLM calls) where the global pool size is not
/// the right bound.
pub fn map_bounded<T, R, F>(items: &[T], exec: Execution, threads: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() && threads > 1 {
        use rayon::prelude::*;
        if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
            return pool.install(|| items.par_iter().enumerate().map(|(i, t)| f(i, t)).collect());
        }
    }
    let _ = (exec, threads);
    items.iter().enumerate().map(|(i, t)| f(i, t)).collect()
}
