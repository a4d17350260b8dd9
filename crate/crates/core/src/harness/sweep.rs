//! Many seeded runs, optionally over several selectors, on a bounded
//! thread pool.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::harness::config::{RunConfig, SelectorConfig};
use crate::harness::run::{run_seed, RunOutput};

/// Runs every (selector, seed) pair; results come back ordered by selector,
/// then seed, whatever the degree of parallelism.
pub fn sweep(cfg: &RunConfig, selectors: &[SelectorConfig], parallel: usize) -> Result<Vec<RunOutput>> {
    let jobs: Vec<RunConfig> = selectors
        .iter()
        .map(|s| RunConfig { selector: *s, ..cfg.clone() })
        .collect();
    for job in &jobs {
        job.validate()?;
    }
    let pairs: Vec<(&RunConfig, u64)> = jobs.iter().flat_map(|j| cfg.seed_list().into_iter().map(move |s| (j, s))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallel.max(1))
        .build()
        .map_err(|e| Error::Usage(format!("cannot start worker pool: {e}")))?;
    pool.install(|| pairs.par_iter().map(|(job, seed)| run_seed(job, *seed)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_and_serial_agree() {
        let cfg = RunConfig::parse("episodes = 300\nseeds = 2\neval_every = 0\neval_episodes = 2").unwrap();
        let selectors = [SelectorConfig::Alternating, SelectorConfig::Vote];
        let a = sweep(&cfg, &selectors, 1).unwrap();
        let b = sweep(&cfg, &selectors, 4).unwrap();
        assert_eq!(a.len(), 4);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!((x.seed, &x.selector, &x.csv_rows), (y.seed, &y.selector, &y.csv_rows));
        }
    }
}
