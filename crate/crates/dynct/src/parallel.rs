//! Thread-pool executor. Results come back in index order and every item is
//! computed independently, so outputs do not depend on the thread count.

use dynct_core::exec::Executor;
use rayon::prelude::*;

use crate::error::{Error, Result};

pub const THREADS_VAR: &str = "DYNCT_THREADS";

pub struct RayonExecutor {
    pool: rayon::ThreadPool,
}

impl RayonExecutor {
    /// `threads = 0` lets rayon pick.
    pub fn new(threads: usize) -> Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(|e| Error::invalid(THREADS_VAR, e.to_string()))?;
        Ok(Self { pool })
    }

    /// Thread count from `DYNCT_THREADS` (unset or 0 = auto).
    pub fn from_env() -> Result<Self> {
        let threads = match std::env::var(THREADS_VAR) {
            Err(_) => 0,
            Ok(v) => v.trim().parse().map_err(|_| Error::invalid(THREADS_VAR, format!("`{v}` is not a thread count")))?,
        };
        Self::new(threads)
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl Executor for RayonExecutor {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        self.pool.install(|| (0..n).into_par_iter().map(f).collect())
    }
}
