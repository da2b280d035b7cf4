//! Order-preserving fan-out over independent work items.
//!
//! With the `parallel` feature, work runs on a dedicated rayon pool sized by
//! the caller. Without it, or with `workers == 1`, items are processed in a
//! plain loop. Results always come back in input order, so downstream output
//! never depends on the worker count.

use crate::error::Result;

/// Number of worker threads to use. `0` means "let the runtime decide".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Workers(pub usize);

impl Workers {
    pub const SEQUENTIAL: Workers = Workers(1);

    pub fn is_sequential(self) -> bool {
        self.0 == 1 || !cfg!(feature = "parallel")
    }
}

/// Maps `f` over `items`, preserving order. Stops at the first error in input
/// order.
pub fn try_map<T, U, F>(workers: Workers, items: &[T], f: F) -> Result<Vec<U>>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> Result<U> + Sync + Send,
{
    if workers.is_sequential() {
        return items.iter().map(&f).collect();
    }
    imp::try_map(workers, items, f)
}

/// Infallible variant of [`try_map`].
pub fn map<T, U, F>(workers: Workers, items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    if workers.is_sequential() {
        return items.iter().map(&f).collect();
    }
    imp::map(workers, items, f)
}

#[cfg(feature = "parallel")]
mod imp {
    use rayon::prelude::*;

    use super::Workers;
    use crate::error::Result;

    fn pool(workers: Workers) -> Option<rayon::ThreadPool> {
        if workers.0 == 0 {
            return None;
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers.0)
            .build()
            .ok()
    }

    pub(super) fn try_map<T, U, F>(workers: Workers, items: &[T], f: F) -> Result<Vec<U>>
    where
        T: Sync,
        U: Send,
        F: Fn(&T) -> Result<U> + Sync + Send,
    {
        let run = || items.par_iter().map(&f).collect::<Vec<_>>();
        let results = match pool(workers) {
            Some(pool) => pool.install(run),
            None => run(),
        };
        results.into_iter().collect()
    }

    pub(super) fn map<T, U, F>(workers: Workers, items: &[T], f: F) -> Vec<U>
    where
        T: Sync,
        U: Send,
        F: Fn(&T) -> U + Sync + Send,
    {
        let run = || items.par_iter().map(&f).collect();
        match pool(workers) {
            Some(pool) => pool.install(run),
            None => run(),
        }
    }
}

#[cfg(not(feature = "parallel"))]
mod imp {
    use super::Workers;
    use crate::error::Result;

    pub(super) fn try_map<T, U, F>(_: Workers, items: &[T], f: F) -> Result<Vec<U>>
    where
        F: Fn(&T) -> Result<U>,
    {
        items.iter().map(f).collect()
    }

    pub(super) fn map<T, U, F>(_: Workers, items: &[T], f: F) -> Vec<U>
    where
        F: Fn(&T) -> U,
    {
        items.iter().map(f).collect()
    }
}
