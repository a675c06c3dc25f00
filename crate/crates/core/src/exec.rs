//! Execution policy for replicate-level data parallelism.
//!
//! Every batch operation maps a pure function over replicate (or pair)
//! indices and collects results in index order, so the output is identical
//! whichever policy runs it.

/// How batch operations spread independent jobs across threads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    /// Run jobs one after another on the calling thread.
    Sequential,
    /// Run jobs on the rayon global pool (falls back to sequential when the
    /// crate is built without the `parallel` feature).
    #[default]
    Parallel,
}

impl Execution {
    /// Map `job` over `0..n` and collect in index order.
    pub fn map<T, F>(self, n: usize, job: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                (0..n).into_par_iter().map(job).collect()
            }
            _ => (0..n).map(job).collect(),
        }
    }

    /// Fallible variant of [`Execution::map`]; returns the error of the
    /// lowest failing index.
    pub fn try_map<T, E, F>(self, n: usize, job: F) -> Result<Vec<T>, E>
    where
        T: Send,
        E: Send,
        F: Fn(usize) -> Result<T, E> + Sync + Send,
    {
        self.map(n, job).into_iter().collect()
    }
}
