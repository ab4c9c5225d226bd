//! Fixed-size worker pool for embarrassingly parallel job lists.
//!
//! Jobs are claimed by index from a shared counter, so results land in input
//! order regardless of which worker ran them. The pool size defaults to the
//! available hardware parallelism and can be capped with the
//! `IBC_FEM_THREADS` environment variable.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::OnceLock;

/// Worker count honouring the `IBC_FEM_THREADS` cap.
pub fn thread_cap() -> usize {
    match std::env::var("IBC_FEM_THREADS") {
        Ok(raw) => match raw.trim().parse::<usize>() {
            Ok(n) if n >= 1 => n,
            _ => {
                eprintln!("warning: ignoring invalid IBC_FEM_THREADS value {raw:?}");
                default_threads()
            }
        },
        Err(_) => default_threads(),
    }
}

fn default_threads() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

/// Applies `f` to every item, spreading the work over the pool, and returns
/// the results in input order.
pub fn parallel_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send + Sync,
    F: Fn(&T) -> R + Sync,
{
    let workers = thread_cap().min(items.len()).max(1);
    if workers == 1 {
        return items.iter().map(f).collect();
    }
    let slots: Vec<OnceLock<R>> = items.iter().map(|_| OnceLock::new()).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let result = f(&items[i]);
                slots[i].set(result).ok().expect("job claimed twice");
            });
        }
    });
    slots
        .into_iter()
        .map(|slot| slot.into_inner().expect("worker left a job unfinished"))
        .collect()
}
