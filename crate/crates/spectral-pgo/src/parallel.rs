//! Worker-thread cap and a deterministic indexed map.
//!
//! Per-edge computations (world-frame conjugation, edge-weight eigensolves)
//! are independent, so they may run on multiple threads; results are always
//! collected in index order, keeping downstream accumulation bit-identical
//! for any thread count.

use std::sync::OnceLock;

static THREAD_CAP: OnceLock<usize> = OnceLock::new();

/// Override the worker-thread cap. The first call wins; after that (or after
/// the first use of [`thread_cap`]) the cap is fixed for the process.
pub fn set_thread_cap(n: usize) {
    let _ = THREAD_CAP.set(n.max(1));
}

/// Worker-thread cap, defaulting to the `SPECTRAL_PGO_THREADS` environment
/// variable, or 1 when unset.
pub fn thread_cap() -> usize {
    *THREAD_CAP.get_or_init(|| {
        std::env::var("SPECTRAL_PGO_THREADS")
            .ok()
            .and_then(|s| s.parse::<usize>().ok())
            .filter(|&n| n >= 1)
            .unwrap_or(1)
    })
}

/// Apply `f` to every index in `0..len`, returning results in index order.
pub fn map_indexed<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let threads = thread_cap().min(len.max(1));
    if threads <= 1 {
        return (0..len).map(f).collect();
    }
    let chunk = len.div_ceil(threads);
    let mut out = Vec::with_capacity(len);
    std::thread::scope(|scope| {
        let mut handles = Vec::with_capacity(threads);
        for t in 0..threads {
            let start = t * chunk;
            let end = ((t + 1) * chunk).min(len);
            let f = &f;
            handles.push(scope.spawn(move || (start..end).map(f).collect::<Vec<T>>()));
        }
        for h in handles {
            out.extend(h.join().expect("worker thread panicked"));
        }
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_preserves_index_order() {
        let squares = map_indexed(100, |i| i * i);
        assert_eq!(squares.len(), 100);
        for (i, v) in squares.iter().enumerate() {
            assert_eq!(*v, i * i);
        }
    }
}
