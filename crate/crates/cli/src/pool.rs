//! Ordered worker pool over sweep points.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::thread;

/// Environment variable capping the worker count.
pub const WORKERS_ENV: &str = "AUTOQEC_WORKERS";

/// Worker count from the command line, the machine and the environment cap.
pub fn worker_count(requested: Option<usize>) -> usize {
    let machine = thread::available_parallelism().map_or(1, |n| n.get());
    let cap = std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0);
    let n = requested.unwrap_or(machine).max(1);
    cap.map_or(n, |c| n.min(c))
}

/// Applies `f` to every item on up to `workers` threads and returns the
/// results in input order.
pub fn map_ordered<T, R, F>(items: &[T], workers: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let workers = workers.clamp(1, items.len().max(1));
    if workers == 1 {
        return items.iter().map(&f).collect();
    }
    let next = AtomicUsize::new(0);
    let mut done: Vec<(usize, R)> = thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|_| {
                s.spawn(|| {
                    let mut out = Vec::new();
                    loop {
                        let i = next.fetch_add(1, Ordering::Relaxed);
                        let Some(item) = items.get(i) else { break };
                        out.push((i, f(item)));
                    }
                    out
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("sweep worker panicked"))
            .collect()
    });
    done.sort_by_key(|(i, _)| *i);
    done.into_iter().map(|(_, r)| r).collect()
}
