//! Parallel trajectory ensembles.
//!
//! Trajectories are split into fixed-size chunks of consecutive indices and
//! the partial sums are merged in chunk order, so results do not depend on
//! the number of threads.

use fockfilter_core::filter::{ensemble_range, EnsembleAccumulator, SdeConfig, MIN_TRAJECTORIES};
use fockfilter_core::{AtomModel, Error};
use rayon::prelude::*;

use crate::error::{CliError, Result};

/// Trajectories per work item.
pub const CHUNK: u64 = 64;

pub fn parallel_ensemble(model: &AtomModel, cfg: &SdeConfig) -> Result<EnsembleAccumulator> {
    if cfg.n_traj < MIN_TRAJECTORIES {
        return Err(Error::Precondition(format!("ensemble averages need at least {MIN_TRAJECTORIES} trajectories")).into());
    }
    let n = cfg.n_traj as u64;
    let chunks: Vec<u64> = (0..n.div_ceil(CHUNK)).collect();
    let parts = chunks
        .par_iter()
        .map(|&c| ensemble_range(model, cfg, c * CHUNK..((c + 1) * CHUNK).min(n)))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let mut parts = parts.into_iter();
    let first = parts.next().expect("at least one chunk");
    Ok(parts.fold(first, EnsembleAccumulator::merge))
}

/// Run `f` on a pool of `threads` workers, or on the global pool.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::usage(format!("cannot start {n} threads: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use fockfilter_core::filter::ensemble_average;
    use fockfilter_core::{Ket2, ModelParams, PulseEnvelope};

    #[test]
    fn thread_count_does_not_change_the_result() {
        let m = AtomModel::pure(ModelParams::new(1.0, 0.0).unwrap(), PulseEnvelope::square(0.5).unwrap(), Ket2::plus()).unwrap();
        let cfg = SdeConfig {
            dt: 1e-2,
            t_end: 4.0,
            n_traj: 300,
            seed0: 9,
            output_grid: vec![0.0, 1.0, 4.0],
        };
        let one = with_threads(Some(1), || parallel_ensemble(&m, &cfg)).unwrap().unwrap();
        let four = with_threads(Some(4), || parallel_ensemble(&m, &cfg)).unwrap().unwrap();
        assert_eq!(one, four);
        assert_eq!(one.trajectories(), 300);

        let serial = ensemble_average(&m, &cfg).unwrap();
        for (a, b) in one.finish().iter().zip(&serial) {
            assert!(a.mean.max_abs_diff(&b.mean) < 1e-12);
            assert_eq!(a.count_frequencies, b.count_frequencies);
        }
    }

    #[test]
    fn small_ensembles_are_rejected() {
        let m = AtomModel::pure(ModelParams::new(1.0, 0.0).unwrap(), PulseEnvelope::square(0.5).unwrap(), Ket2::ground()).unwrap();
        let cfg = SdeConfig {
            dt: 1e-2,
            t_end: 1.0,
            n_traj: 10,
            seed0: 1,
            output_grid: vec![1.0],
        };
        assert_eq!(parallel_ensemble(&m, &cfg).unwrap_err().exit_code(), 2);
    }
}
