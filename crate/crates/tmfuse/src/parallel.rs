//! Rayon-backed batch runner. Results come back in index order, so output
//! does not depend on the thread count.

use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuilder};
use tmfuse_core::eval::train::BatchRunner;

use crate::error::{Error, Result};

pub struct RayonRunner {
    pool: ThreadPool,
}

impl RayonRunner {
    /// `None` uses one thread per core.
    pub fn new(threads: Option<usize>) -> Result<Self> {
        let mut b = ThreadPoolBuilder::new();
        if let Some(n) = threads {
            b = b.num_threads(n.max(1));
        }
        let pool = b.build().map_err(|e| Error::Internal(format!("thread pool: {e}")))?;
        Ok(Self { pool })
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }

    pub fn map<T: Sync, R: Send>(&self, items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
        self.pool.install(|| items.par_iter().map(f).collect())
    }
}

impl BatchRunner for RayonRunner {
    fn run<R: Send>(&self, n: usize, job: &(dyn Fn(usize) -> R + Sync)) -> Vec<R> {
        self.pool.install(|| (0..n).into_par_iter().map(job).collect())
    }
}
