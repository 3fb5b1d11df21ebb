//! Execution policy for the data-parallel loops.
//!
//! With the `parallel` feature (default) the policy dispatches to rayon;
//! without it every policy runs sequentially. Results never depend on the
//! policy: each work item is computed by exactly one thread and reductions
//! happen in index order afterwards.

/// How to run independent work items.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// Global rayon pool.
    #[default]
    Parallel,
    /// Dedicated pool with at most this many threads.
    ParallelCapped(usize),
}

impl Execution {
    /// `"0"` means the global pool, `"1"` sequential, `"n"` a pool of `n`.
    pub fn parse_threads(value: &str) -> crate::Result<Self> {
        match value.trim().parse::<usize>() {
            Ok(0) => Ok(Execution::Parallel),
            Ok(1) => Ok(Execution::Sequential),
            Ok(n) => Ok(Execution::ParallelCapped(n)),
            Err(_) => crate::error::config_err(format!(
                "thread count must be a non-negative integer, got `{value}`"
            )),
        }
    }

    /// Reads `CATGAN_THREADS`; unset or unparsable falls back to the global pool.
    pub fn from_env() -> Self {
        match std::env::var("CATGAN_THREADS")
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
        {
            Some(0) | None => Execution::Parallel,
            Some(1) => Execution::Sequential,
            Some(n) => Execution::ParallelCapped(n),
        }
    }

    /// Maps `f` over `items`, preserving order.
    pub fn map<T, R, F>(self, items: Vec<T>, f: F) -> Vec<R>
    where
        T: Send,
        R: Send,
        F: Fn(T) -> R + Sync + Send,
    {
        match self {
            Execution::Sequential => items.into_iter().map(f).collect(),
            Execution::Parallel => parallel_map(items, f),
            Execution::ParallelCapped(n) => capped_map(n, items, f),
        }
    }
}

#[cfg(feature = "parallel")]
fn parallel_map<T: Send, R: Send, F: Fn(T) -> R + Sync + Send>(items: Vec<T>, f: F) -> Vec<R> {
    use rayon::prelude::*;
    items.into_par_iter().map(f).collect()
}

#[cfg(feature = "parallel")]
fn capped_map<T: Send, R: Send, F: Fn(T) -> R + Sync + Send>(
    threads: usize,
    items: Vec<T>,
    f: F,
) -> Vec<R> {
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(|| parallel_map(items, f)),
        Err(_) => parallel_map(items, f),
    }
}

#[cfg(not(feature = "parallel"))]
fn parallel_map<T: Send, R: Send, F: Fn(T) -> R + Sync + Send>(items: Vec<T>, f: F) -> Vec<R> {
    items.into_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn capped_map<T: Send, R: Send, F: Fn(T) -> R + Sync + Send>(
    _threads: usize,
    items: Vec<T>,
    f: F,
) -> Vec<R> {
    items.into_iter().map(f).collect()
}

/// Below this many multiply-adds a matrix product stays on the calling thread.
#[cfg(feature = "parallel")]
pub(crate) const PAR_MATMUL_THRESHOLD: usize = 1 << 15;

/// Fills each output row with `row_fn(row_index, row)`.
pub(crate) fn for_each_row(
    out: &mut [f64],
    cols: usize,
    work: usize,
    row_fn: impl Fn(usize, &mut [f64]) + Sync + Send,
) {
    #[cfg(feature = "parallel")]
    if work >= PAR_MATMUL_THRESHOLD {
        use rayon::prelude::*;
        out.par_chunks_mut(cols)
            .enumerate()
            .for_each(|(i, row)| row_fn(i, row));
        return;
    }
    let _ = work;
    out.chunks_mut(cols)
        .enumerate()
        .for_each(|(i, row)| row_fn(i, row));
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policies_agree() {
        let items: Vec<u64> = (0..100).collect();
        let f = |x: u64| x * x + 1;
        let a = Execution::Sequential.map(items.clone(), f);
        let b = Execution::Parallel.map(items.clone(), f);
        let c = Execution::ParallelCapped(2).map(items, f);
        assert_eq!(a, b);
        assert_eq!(a, c);
    }
}
