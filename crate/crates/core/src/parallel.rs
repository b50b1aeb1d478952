//! Order-preserving fan-out over scoped threads.

use std::num::NonZeroUsize;
use std::thread;

/// Environment variable capping worker threads.
pub const THREADS_ENV: &str = "RL_THREADS";

/// Worker count: `RL_THREADS` when set to a positive integer, otherwise the
/// available parallelism.
pub fn worker_threads() -> usize {
    let auto = thread::available_parallelism().map(NonZeroUsize::get).unwrap_or(1);
    match std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        Some(n) if n > 0 => n,
        _ => auto,
    }
}

/// Maps `f` over `items` on up to [`worker_threads`] threads. Results come
/// back in input order, so the output does not depend on scheduling.
pub fn par_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let threads = worker_threads().min(items.len()).max(1);
    if threads == 1 {
        return items.iter().map(&f).collect();
    }
    let chunk = items.len().div_ceil(threads);
    let f = &f;
    thread::scope(|s| {
        let handles: Vec<_> = items.chunks(chunk).map(|part| s.spawn(move || part.iter().map(f).collect::<Vec<R>>())).collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    })
}
