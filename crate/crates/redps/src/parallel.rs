//! Thread-pool execution. Blocks draw from their own streams and are merged
//! in block order, so results do not depend on the thread count.

use std::time::Instant;

use rayon::prelude::*;
use redps_core::rng::block_count;
use redps_core::sampling::{finish, run_block, Replication};
use redps_core::{Error, EstimationReport, Result};

pub struct Runner {
    pool: rayon::ThreadPool,
}

impl Runner {
    /// `threads = 0` uses all available cores.
    pub fn new(threads: usize) -> Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
        Ok(Runner { pool })
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }

    pub fn run<E: Replication + ?Sized>(&self, est: &E, n: u64, seed: u64, keep_outputs: bool) -> Result<EstimationReport> {
        if n < 2 {
            return Err(Error::InvalidArgument("need n >= 2 replications".into()));
        }
        let start = Instant::now();
        let blocks: Vec<_> = self.pool.install(|| {
            (0..block_count(n)).into_par_iter().map(|b| run_block(est, n, seed, b, keep_outputs)).collect()
        });
        let mut report = finish(est, blocks, seed);
        report.wall_time = start.elapsed().as_secs_f64();
        Ok(report)
    }

    /// `f(0), ..., f(count - 1)` evaluated on the pool, returned in order.
    pub fn map<T: Send, F: Fn(usize) -> T + Sync + Send>(&self, count: usize, f: F) -> Vec<T> {
        self.pool.install(|| (0..count).into_par_iter().map(&f).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use redps_core::sampling::{run, CrudeMc};
    use redps_core::event_sets::two_tail_set;
    use redps_core::{GaussianModel, RateModel};

    #[test]
    fn thread_count_does_not_change_results() {
        let model = RateModel::Gaussian(GaussianModel::standard(1));
        let set = two_tail_set(1.5, 2.0).unwrap();
        let est = CrudeMc::new(&model, &set).unwrap();
        let serial = run(&est, 20_000, 9, false).unwrap();
        for t in [1, 3, 8] {
            let mut r = Runner::new(t).unwrap().run(&est, 20_000, 9, false).unwrap();
            r.wall_time = 0.0;
            assert_eq!(r, serial);
        }
        let squares = Runner::new(4).unwrap().map(5, |i| i * i);
        assert_eq!(squares, vec![0, 1, 4, 9, 16]);
    }
}
