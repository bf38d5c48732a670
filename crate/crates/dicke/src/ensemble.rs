//! Parallel trajectory ensembles with scheduling-independent results.

use std::ops::Range;

use dicke_core::operators::PureState;
use dicke_core::trajectories::{SampledRun, TrajectoryRecord, TrajectorySimulator};
use rayon::prelude::*;

use crate::error::{Result, RunError};

fn pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        b = b.num_threads(n.max(1));
    }
    b.build().map_err(|e| RunError::Empty(format!("thread pool: {e}")))
}

/// Trajectories `streams` under `seed_base`, ordered by stream index.
pub fn run_streams(
    sim: &TrajectorySimulator,
    psi0: &PureState,
    label: &str,
    seed_base: u64,
    streams: Range<u64>,
    threads: Option<usize>,
) -> Result<Vec<TrajectoryRecord>> {
    let out: std::result::Result<Vec<_>, _> = pool(threads)?.install(|| {
        streams
            .into_par_iter()
            .map(|k| sim.run(psi0, label, seed_base, k))
            .collect()
    });
    Ok(out?)
}

pub fn ensemble(
    sim: &TrajectorySimulator,
    psi0: &PureState,
    label: &str,
    n_traj: usize,
    seed_base: u64,
    threads: Option<usize>,
) -> Result<Vec<TrajectoryRecord>> {
    if n_traj == 0 {
        return Err(RunError::spec("numerics.n_traj", "must be at least 1"));
    }
    run_streams(sim, psi0, label, seed_base, 0..n_traj as u64, threads)
}

/// Union of two ensembles drawn from the same seed, ordered by stream.
pub fn merge(a: Vec<TrajectoryRecord>, b: Vec<TrajectoryRecord>) -> Result<Vec<TrajectoryRecord>> {
    let mut all = a;
    all.extend(b);
    all.sort_by_key(|r| r.stream);
    if all.windows(2).any(|w| w[0].stream == w[1].stream) {
        return Err(RunError::Empty("ensembles share a stream index".into()));
    }
    if all.windows(2).any(|w| w[0].seed != w[1].seed) {
        return Err(RunError::Empty("ensembles use different seeds".into()));
    }
    Ok(all)
}

/// Mean and standard error of sampled populations.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationEstimate {
    /// `mean[c][s]` at checkpoint `c` for observable `s`.
    pub mean: Vec<Vec<f64>>,
    pub std_err: Vec<Vec<f64>>,
    pub n_traj: usize,
}

#[allow(clippy::too_many_arguments)]
pub fn sampled_ensemble(
    sim: &TrajectorySimulator,
    psi0: &PureState,
    n_traj: usize,
    seed_base: u64,
    checkpoints: &[f64],
    observables: &[PureState],
    snapshot_after: Option<usize>,
    threads: Option<usize>,
) -> Result<(PopulationEstimate, Vec<SampledRun>)> {
    if n_traj < 2 {
        return Err(RunError::spec("numerics.n_traj", "need at least two trajectories for standard errors"));
    }
    let runs: std::result::Result<Vec<_>, _> = pool(threads)?.install(|| {
        (0..n_traj as u64)
            .into_par_iter()
            .map(|k| sim.run_sampled(psi0, "sampled", seed_base, k, checkpoints, observables, snapshot_after))
            .collect()
    });
    let runs = runs?;
    let (nc, ns) = (checkpoints.len(), observables.len());
    let mut mean = vec![vec![0.0; ns]; nc];
    let mut sq = vec![vec![0.0; ns]; nc];
    for r in &runs {
        for c in 0..nc {
            for s in 0..ns {
                let v = r.samples[c][s];
                mean[c][s] += v;
                sq[c][s] += v * v;
            }
        }
    }
    let n = n_traj as f64;
    let mut std_err = vec![vec![0.0; ns]; nc];
    for c in 0..nc {
        for s in 0..ns {
            let m = mean[c][s] / n;
            let var = ((sq[c][s] / n - m * m) * n / (n - 1.0)).max(0.0);
            mean[c][s] = m;
            std_err[c][s] = (var / n).sqrt();
        }
    }
    Ok((PopulationEstimate { mean, std_err, n_traj }, runs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use dicke_core::coupling::{build_coupling_matrices, CouplingParams};
    use dicke_core::geometry::linear_chain;
    use dicke_core::operators::build_h_between_jumps;
    use dicke_core::trajectories::source_mode_jumps;

    fn simulator() -> TrajectorySimulator {
        let cfg = linear_chain(3, 0.4, false).unwrap();
        let m = build_coupling_matrices(&cfg, &CouplingParams::default()).unwrap();
        let hb = build_h_between_jumps(&m).unwrap();
        TrajectorySimulator::new(&hb, source_mode_jumps(&m).unwrap(), 30.0).unwrap()
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let sim = simulator();
        let psi = PureState::fully_excited(3).unwrap();
        let a = ensemble(&sim, &psi, "eee", 64, 9, Some(1)).unwrap();
        let b = ensemble(&sim, &psi, "eee", 64, 9, Some(4)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn halves_merge_to_whole() {
        let sim = simulator();
        let psi = PureState::fully_excited(3).unwrap();
        let whole = ensemble(&sim, &psi, "eee", 40, 3, None).unwrap();
        let lo = run_streams(&sim, &psi, "eee", 3, 0..20, Some(2)).unwrap();
        let hi = run_streams(&sim, &psi, "eee", 3, 20..40, Some(3)).unwrap();
        assert_eq!(merge(hi.clone(), lo.clone()).unwrap(), whole);
        assert!(merge(lo.clone(), lo).is_err());
        let single = ensemble(&sim, &psi, "eee", 1, 3, None).unwrap();
        assert_eq!(single[0], sim.run(&psi, "eee", 3, 0).unwrap());
    }
}
