use rayon::prelude::*;

use super::{EngineError, SimConfig, Simulator, Trajectory};
use crate::qtgraph::Graph;

/// Independent replicas of one configuration. Replica `r` uses stream `r`
/// of the base seed, so results do not depend on the thread count.
#[derive(Debug, Clone)]
pub struct ReplicaSet {
    pub trajectories: Vec<Trajectory>,
}

impl ReplicaSet {
    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn grid_len(&self) -> usize {
        self.trajectories.first().map_or(0, Trajectory::len)
    }

    pub fn grid_dt(&self) -> f64 {
        self.trajectories[0].grid_dt()
    }

    /// Density of state `s` of type `k` at grid index `i`, one per replica.
    pub fn samples(&self, i: usize, k: usize, s: usize) -> Vec<f64> {
        self.trajectories.iter().map(|t| t.densities_at(i)[k][s]).collect()
    }

    /// Pointwise mean density, `[grid][type][state]`.
    pub fn mean(&self) -> Vec<Vec<[f64; 3]>> {
        let r = self.len() as f64;
        let mut acc = self.zeros();
        for t in &self.trajectories {
            for (i, row) in acc.iter_mut().enumerate() {
                for (a, d) in row.iter_mut().zip(t.densities_at(i)) {
                    for s in 0..3 {
                        a[s] += d[s] / r;
                    }
                }
            }
        }
        acc
    }

    /// Pointwise unbiased variance of the densities.
    pub fn variance(&self) -> Vec<Vec<[f64; 3]>> {
        let mean = self.mean();
        let mut acc = self.zeros();
        if self.len() < 2 {
            return acc;
        }
        let denom = (self.len() - 1) as f64;
        for t in &self.trajectories {
            for (i, row) in acc.iter_mut().enumerate() {
                for (k, (a, d)) in row.iter_mut().zip(t.densities_at(i)).enumerate() {
                    for s in 0..3 {
                        let dev = d[s] - mean[i][k][s];
                        a[s] += dev * dev / denom;
                    }
                }
            }
        }
        acc
    }

    fn zeros(&self) -> Vec<Vec<[f64; 3]>> {
        let nt = self.trajectories.first().map_or(0, Trajectory::n_types);
        vec![vec![[0.0; 3]; nt]; self.grid_len()]
    }
}

pub fn run_replicas(g: &Graph, cfg: &SimConfig, replicas: usize) -> Result<ReplicaSet, EngineError> {
    run_replicas_with_jobs(g, cfg, replicas, None)
}

/// Like [`run_replicas`] on a dedicated pool of `jobs` threads.
pub fn run_replicas_with_jobs(
    g: &Graph,
    cfg: &SimConfig,
    replicas: usize,
    jobs: Option<usize>,
) -> Result<ReplicaSet, EngineError> {
    let sim = Simulator::new(g);
    let work = || -> Result<Vec<Trajectory>, EngineError> {
        (0..replicas as u64)
            .into_par_iter()
            .map(|r| sim.run_stream(cfg, cfg.seed, r))
            .collect()
    };
    let trajectories = match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| EngineError::InvalidConfig(format!("thread pool: {e}")))?
            .install(work)?,
        None => work()?,
    };
    Ok(ReplicaSet { trajectories })
}
