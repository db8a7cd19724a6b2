use std::io::Write;

use serde::{Deserialize, Serialize};

use super::EventCounters;

/// Per-type `[X, Y, Z]` counts on the grid `0, dt, 2dt, ...`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    grid_dt: f64,
    type_sizes: Vec<usize>,
    /// Grid-major: entry `i * n_types + k`.
    counts: Vec<[u64; 3]>,
    #[serde(skip)]
    counters: EventCounters,
}

impl Trajectory {
    pub(crate) fn with_capacity(type_sizes: Vec<usize>, steps: usize, grid_dt: f64) -> Self {
        let nt = type_sizes.len();
        Self {
            grid_dt,
            type_sizes,
            counts: Vec::with_capacity((steps + 1) * nt),
            counters: EventCounters::default(),
        }
    }

    pub(crate) fn push(&mut self, counts: &[[u64; 3]]) {
        self.counts.extend_from_slice(counts);
    }

    pub(crate) fn set_counters(&mut self, c: EventCounters) {
        self.counters = c;
    }

    pub fn n_types(&self) -> usize {
        self.type_sizes.len()
    }

    /// Number of grid points.
    pub fn len(&self) -> usize {
        self.counts.len() / self.n_types()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn grid_dt(&self) -> f64 {
        self.grid_dt
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.grid_dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.time(i)).collect()
    }

    pub fn type_sizes(&self) -> &[usize] {
        &self.type_sizes
    }

    pub fn num_vertices(&self) -> usize {
        self.type_sizes.iter().sum()
    }

    pub fn counts_at(&self, i: usize) -> &[[u64; 3]] {
        let nt = self.n_types();
        &self.counts[i * nt..(i + 1) * nt]
    }

    /// Counts divided by the total number of vertices, so summing over
    /// types and states gives one.
    pub fn densities_at(&self, i: usize) -> Vec<[f64; 3]> {
        let n = self.num_vertices() as f64;
        self.counts_at(i)
            .iter()
            .map(|c| c.map(|v| v as f64 / n))
            .collect()
    }

    pub fn counters(&self) -> &EventCounters {
        &self.counters
    }

    /// Grid index of time `t`, if `t` is a grid point.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let i = (t / self.grid_dt).round();
        if i < 0.0 || (i * self.grid_dt - t).abs() > 1e-9 * t.abs().max(1.0) {
            return None;
        }
        let i = i as usize;
        (i < self.len()).then_some(i)
    }

    /// CSV with columns `t,type,X,Y,Z`; raw counts or densities.
    pub fn write_csv<W: Write>(&self, mut w: W, normalized: bool) -> std::io::Result<()> {
        writeln!(w, "t,type,X,Y,Z")?;
        for i in 0..self.len() {
            let t = self.time(i);
            if normalized {
                for (k, d) in self.densities_at(i).iter().enumerate() {
                    writeln!(w, "{t},{k},{},{},{}", d[0], d[1], d[2])?;
                }
            } else {
                for (k, c) in self.counts_at(i).iter().enumerate() {
                    writeln!(w, "{t},{k},{},{},{}", c[0], c[1], c[2])?;
                }
            }
        }
        Ok(())
    }
}
