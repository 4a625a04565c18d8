//! Row-parallel primitives with a sequential fallback.
//!
//! Every helper returns results in input order and reduces floating-point
//! sums over fixed-size chunks, so the output does not depend on how many
//! threads executed it.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Chunk length for deterministic reductions.
const SUM_CHUNK: usize = 4096;
/// Below this many items the parallel path is not worth the dispatch.
#[cfg(feature = "parallel")]
const PAR_MIN: usize = 2048;

/// Execution strategy for row sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    #[cfg(feature = "parallel")]
    Parallel,
}

impl Exec {
    /// Sequential for one worker, rayon otherwise (when compiled in).
    pub fn for_workers(workers: usize) -> Self {
        #[cfg(feature = "parallel")]
        if workers > 1 {
            return Exec::Parallel;
        }
        let _ = workers;
        Exec::Sequential
    }

    #[inline]
    fn parallel_for(self, len: usize) -> bool {
        #[cfg(feature = "parallel")]
        {
            self == Exec::Parallel && len >= PAR_MIN
        }
        #[cfg(not(feature = "parallel"))]
        {
            let _ = len;
            false
        }
    }
}

/// Indices `i < len` with `pred(i)`, ascending.
pub fn filter_indices<F>(exec: Exec, len: usize, pred: F) -> Vec<u32>
where
    F: Fn(usize) -> bool + Sync + Send,
{
    if exec.parallel_for(len) {
        #[cfg(feature = "parallel")]
        return (0..len)
            .into_par_iter()
            .filter(|&i| pred(i))
            .map(|i| i as u32)
            .collect();
    }
    (0..len).filter(|&i| pred(i)).map(|i| i as u32).collect()
}

/// `items.map(f)` in input order.
pub fn map_collect<T, U, F>(exec: Exec, items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    if exec.parallel_for(items.len()) {
        #[cfg(feature = "parallel")]
        return items.par_iter().map(f).collect();
    }
    items.iter().map(f).collect()
}

/// `sum f(x)` accumulated chunk by chunk in a fixed order.
pub fn chunked_sum<T, F>(exec: Exec, items: &[T], f: F) -> f64
where
    T: Sync,
    F: Fn(&T) -> f64 + Sync + Send,
{
    let chunk_sum = |c: &[T]| c.iter().map(&f).sum::<f64>();
    if exec.parallel_for(items.len()) {
        #[cfg(feature = "parallel")]
        {
            let partials: Vec<f64> = items.par_chunks(SUM_CHUNK).map(chunk_sum).collect();
            return partials.iter().sum();
        }
    }
    items.chunks(SUM_CHUNK).map(chunk_sum).sum()
}

/// Runs `f` on a pool with `workers` threads (or inline when sequential).
pub fn with_workers<R: Send>(workers: usize, f: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    if workers > 1 {
        match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
            Ok(pool) => return pool.install(f),
            Err(_) => return f(),
        }
    }
    let _ = workers;
    f()
}

/// Worker count used when none is configured.
pub fn default_workers() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}
