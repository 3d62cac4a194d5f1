//! Order-preserving fan-out over independent work items.
//!
//! With the `parallel` feature (default) [`ExecMode::Parallel`] runs on the
//! rayon pool; without it every mode runs sequentially. Results always come
//! back in input order, so downstream output does not depend on scheduling.

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ExecMode {
    Sequential,
    #[default]
    Parallel,
}

impl ExecMode {
    /// Parallel when compiled in, sequential otherwise.
    pub fn available() -> Self {
        if cfg!(feature = "parallel") {
            ExecMode::Parallel
        } else {
            ExecMode::Sequential
        }
    }
}

pub fn map_range<T, F>(mode: ExecMode, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match mode {
        #[cfg(feature = "parallel")]
        ExecMode::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(f).collect()
        }
        _ => (0..n).map(f).collect(),
    }
}

pub fn map_slice<S, T, F>(mode: ExecMode, items: &[S], f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&S) -> T + Sync + Send,
{
    map_range(mode, items.len(), |i| f(&items[i]))
}

/// Caps the global rayon pool. Returns false if the pool was already built.
#[cfg(feature = "parallel")]
pub fn init_thread_pool(threads: usize) -> bool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .is_ok()
}

#[cfg(not(feature = "parallel"))]
pub fn init_thread_pool(_threads: usize) -> bool {
    false
}
