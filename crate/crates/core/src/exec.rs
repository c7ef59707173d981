//! Sequential / parallel execution switch for the per-point loops.

/// How a data-parallel loop is executed.
///
/// `Parallel` uses rayon when the `parallel` feature is compiled in and
/// silently degrades to `Sequential` otherwise. Every loop that goes through
/// this type collects results in index order, so both modes produce
/// bit-identical output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

impl Execution {
    /// True when this mode will actually fan out across threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }

    /// Evaluates `f(0..n)` and returns the results in index order.
    pub fn map_range<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Execution::Parallel {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }

    /// Maps a slice element-wise, preserving order.
    pub fn map_slice<S, T, F>(self, items: &[S], f: F) -> Vec<T>
    where
        S: Sync,
        T: Send,
        F: Fn(&S) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Execution::Parallel {
            use rayon::prelude::*;
            return items.par_iter().map(f).collect();
        }
        items.iter().map(f).collect()
    }
}
