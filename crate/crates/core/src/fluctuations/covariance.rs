use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::FluctError;
use crate::meanfield::MeanFieldSolution;
use crate::qtgraph::TypeBlueprint;
use crate::stifling::StiflingLaw;

/// Which covariance structure to assemble for the conversion and
/// contact-stifling noises. The initial-spreader block is the same in both.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceModel {
    /// The tabulated formulas taken literally: every block is a function of
    /// `t ^ r` only, and the equal-time `(Y_kj, Z_kj)` cross covariance is
    /// minus the `Y_kj` variance. This matrix is generally not positive
    /// semidefinite, so it can be evaluated and exported but not sampled.
    Table,
    /// Covariances of compensated marked counting processes: a conversion at
    /// `s` contributes `1{t < s + eta}` to `Y_kj(t)` and `1{s + eta <= t}`
    /// to `Z_kj(t)`. Built as a nonnegative sum of rank-one second-moment
    /// matrices, so it is positive semidefinite by construction.
    #[default]
    MarkedPoisson,
}

impl fmt::Display for CovarianceModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CovarianceModel::Table => "table",
            CovarianceModel::MarkedPoisson => "marked_poisson",
        })
    }
}

impl std::str::FromStr for CovarianceModel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "table" => Ok(CovarianceModel::Table),
            "marked_poisson" | "marked-poisson" => Ok(CovarianceModel::MarkedPoisson),
            other => Err(format!("unknown covariance model '{other}' (expected table or marked_poisson)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BlockId {
    /// `(Y0_k, Z0_k)`, `2n x 2n`.
    Initial { k: usize },
    /// `(Y_kj, Z_kj)`, `2n x 2n`.
    Conversion { k: usize, j: usize },
    /// `B_kj`, `n x n`.
    Contact { k: usize, j: usize },
}

impl fmt::Display for BlockId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BlockId::Initial { k } => write!(f, "initial_k{k}"),
            BlockId::Conversion { k, j } => write!(f, "conversion_k{k}_j{j}"),
            BlockId::Contact { k, j } => write!(f, "contact_k{k}_j{j}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairBlock {
    pub k: usize,
    pub j: usize,
    /// `c_kj = n_k(j) / p_j`.
    pub coupling: f64,
    pub conversion: DMatrix<f64>,
    pub contact: DMatrix<f64>,
}

/// Block covariances on the times `times`. Two-process blocks are laid out
/// as `[Y(t_0), ..., Y(t_{n-1}), Z(t_0), ..., Z(t_{n-1})]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseCovariance {
    pub model: CovarianceModel,
    pub times: Vec<f64>,
    /// Position of each time on the mean-field grid.
    pub grid_index: Vec<usize>,
    pub dt: f64,
    pub initial: Vec<DMatrix<f64>>,
    /// Only pairs with `n_k(j) > 0`; all other pairs carry no noise.
    pub pairs: Vec<PairBlock>,
}

impl NoiseCovariance {
    pub fn n_times(&self) -> usize {
        self.times.len()
    }

    pub fn n_types(&self) -> usize {
        self.initial.len()
    }

    pub fn blocks(&self) -> Vec<(BlockId, &DMatrix<f64>)> {
        let mut out: Vec<(BlockId, &DMatrix<f64>)> = self
            .initial
            .iter()
            .enumerate()
            .map(|(k, m)| (BlockId::Initial { k }, m))
            .collect();
        for p in &self.pairs {
            out.push((BlockId::Conversion { k: p.k, j: p.j }, &p.conversion));
            out.push((BlockId::Contact { k: p.k, j: p.j }, &p.contact));
        }
        out
    }

    pub fn block(&self, id: BlockId) -> Option<&DMatrix<f64>> {
        match id {
            BlockId::Initial { k } => self.initial.get(k),
            BlockId::Conversion { k, j } => self.pair(k, j).map(|p| &p.conversion),
            BlockId::Contact { k, j } => self.pair(k, j).map(|p| &p.contact),
        }
    }

    pub fn pair(&self, k: usize, j: usize) -> Option<&PairBlock> {
        self.pairs.iter().find(|p| p.k == k && p.j == j)
    }

    /// `Cov[Y_kj(t), B_kj(r)]`: the two share no jumps, so always zero.
    pub fn conversion_contact_cov(&self, _k: usize, _j: usize, _t: usize, _r: usize) -> f64 {
        0.0
    }

    fn labels(&self, id: BlockId) -> Vec<String> {
        let single = |prefix: &str| -> Vec<String> { self.times.iter().map(|t| format!("{prefix}@{t}")).collect() };
        match id {
            BlockId::Initial { .. } => [single("Y0"), single("Z0")].concat(),
            BlockId::Conversion { .. } => [single("Y"), single("Z")].concat(),
            BlockId::Contact { .. } => single("B"),
        }
    }

    /// Writes one dense CSV per block plus `covariance_index.json` into
    /// `dir`; returns the index path.
    pub fn export(&self, dir: &Path) -> Result<PathBuf, FluctError> {
        let mut entries = Vec::new();
        for (id, m) in self.blocks() {
            let name = format!("covariance_{id}.csv");
            let labels = self.labels(id);
            let mut w = BufWriter::new(File::create(dir.join(&name))?);
            writeln!(w, "label,{}", labels.join(","))?;
            for (i, label) in labels.iter().enumerate() {
                let row: Vec<String> = (0..m.ncols()).map(|c| m[(i, c)].to_string()).collect();
                writeln!(w, "{label},{}", row.join(","))?;
            }
            w.flush()?;
            entries.push(serde_json::json!({ "block": id.to_string(), "file": name, "labels": labels }));
        }
        let index = serde_json::json!({
            "model": self.model.to_string(),
            "times": self.times,
            "blocks": entries,
        });
        let path = dir.join("covariance_index.json");
        std::fs::write(&path, serde_json::to_string_pretty(&index).expect("json value") + "\n")?;
        Ok(path)
    }
}

/// Assembles every noise block on `times`, which must be points of the
/// solution grid. Integrals use the solution's grid: trapezoidal sums for
/// [`CovarianceModel::Table`], midpoint sums for
/// [`CovarianceModel::MarkedPoisson`].
pub fn eval_noise_covariance(
    sol: &MeanFieldSolution,
    blueprint: &TypeBlueprint,
    lambda: f64,
    law: &StiflingLaw,
    times: &[f64],
    model: CovarianceModel,
) -> Result<NoiseCovariance, FluctError> {
    let nt = blueprint.n_types();
    if sol.n_types() != nt {
        return Err(FluctError::InvalidInput(format!(
            "solution has {} types, blueprint {nt}",
            sol.n_types()
        )));
    }
    let grid_index = times
        .iter()
        .map(|&t| sol.index_of(t).ok_or(FluctError::TimesOutsideGrid { t }))
        .collect::<Result<Vec<_>, _>>()?;
    let n = times.len();
    let dt = sol.dt;
    let p = &sol.proportions;
    let top = grid_index.iter().copied().max().unwrap_or(0);
    let t_of = |g: usize| g as f64 * dt;

    let initial = (0..nt)
        .map(|k| {
            let y0 = sol.values[0][k][1];
            let mut m = DMatrix::zeros(2 * n, 2 * n);
            for a in 0..n {
                for b in 0..n {
                    let (lo, hi) = (t_of(grid_index[a].min(grid_index[b])), t_of(grid_index[a].max(grid_index[b])));
                    let v = y0 * law.cdf(lo) * law.survival(hi);
                    m[(a, b)] = v;
                    m[(n + a, n + b)] = v;
                    m[(a, n + b)] = -v;
                    m[(n + a, b)] = -v;
                }
            }
            m
        })
        .collect();

    let mut pairs = Vec::new();
    for k in 0..nt {
        for j in 0..nt {
            if blueprint.count(k, j) == 0 {
                continue;
            }
            let c = blueprint.coupling(k, j);
            let a: Vec<f64> = (0..=top)
                .map(|i| lambda * c * sol.values[i][k][0] * sol.values[i][j][1])
                .collect();
            let b: Vec<f64> = (0..=top)
                .map(|i| lambda * c * sol.values[i][k][1] * (p[j] - sol.values[i][j][0]))
                .collect();
            let (conversion, contact) = match model {
                CovarianceModel::Table => table_blocks(&a, &b, law, dt, &grid_index),
                CovarianceModel::MarkedPoisson => marked_blocks(&a, &b, law, dt, &grid_index),
            };
            pairs.push(PairBlock {
                k,
                j,
                coupling: c,
                conversion,
                contact,
            });
        }
    }
    Ok(NoiseCovariance {
        model,
        times: times.to_vec(),
        grid_index,
        dt,
        initial,
        pairs,
    })
}

fn table_blocks(a: &[f64], b: &[f64], law: &StiflingLaw, dt: f64, idx: &[usize]) -> (DMatrix<f64>, DMatrix<f64>) {
    let top = a.len() - 1;
    let fc: Vec<f64> = (0..=top).map(|i| law.survival(i as f64 * dt)).collect();
    let ff: Vec<f64> = (0..=top).map(|i| law.cdf(i as f64 * dt)).collect();
    let trap = |u: usize, kern: &dyn Fn(usize) -> f64| -> f64 {
        if u == 0 {
            return 0.0;
        }
        let inner: f64 = (1..u).map(|i| kern(i)).sum();
        dt * (0.5 * kern(0) + inner + 0.5 * kern(u))
    };
    let vy: Vec<f64> = (0..=top).map(|u| trap(u, &|i| fc[u - i] * a[i])).collect();
    let vz: Vec<f64> = (0..=top).map(|u| trap(u, &|i| ff[u - i] * a[i])).collect();
    let vb: Vec<f64> = (0..=top).map(|u| trap(u, &|i| b[i])).collect();
    let n = idx.len();
    let mut conv = DMatrix::zeros(2 * n, 2 * n);
    let mut cont = DMatrix::zeros(n, n);
    for x in 0..n {
        for y in 0..n {
            let u = idx[x].min(idx[y]);
            conv[(x, y)] = vy[u];
            conv[(n + x, n + y)] = vz[u];
            conv[(x, n + y)] = -vy[u];
            conv[(n + x, y)] = -vy[u];
            cont[(x, y)] = vb[u];
        }
    }
    (conv, cont)
}

fn marked_blocks(a: &[f64], b: &[f64], law: &StiflingLaw, dt: f64, idx: &[usize]) -> (DMatrix<f64>, DMatrix<f64>) {
    let top = a.len() - 1;
    // F at half-grid offsets: fh[d] = F((d + 1/2) dt)
    let fh: Vec<f64> = (0..top.max(1)).map(|d| law.cdf((d as f64 + 0.5) * dt)).collect();
    let a_mid: Vec<f64> = (0..top).map(|l| dt * 0.5 * (a[l] + a[l + 1])).collect();
    let b_cum: Vec<f64> = std::iter::once(0.0)
        .chain((0..top).scan(0.0, |acc, l| {
            *acc += dt * 0.5 * (b[l] + b[l + 1]);
            Some(*acc)
        }))
        .collect();
    let n = idx.len();
    let mut conv = DMatrix::zeros(2 * n, 2 * n);
    let mut cont = DMatrix::zeros(n, n);
    for x in 0..n {
        for y in 0..n {
            let (gx, gy) = (idx[x], idx[y]);
            let (lo, hi) = (gx.min(gy), gx.max(gy));
            let (mut yy, mut zz, mut yz) = (0.0, 0.0, 0.0);
            for l in 0..lo {
                let w = a_mid[l];
                let f_lo = fh[lo - l - 1];
                let f_hi = fh[hi - l - 1];
                yy += w * (1.0 - f_hi);
                zz += w * f_lo;
                // Y at the earlier time and Z at the later one: the clock
                // rings in between
                yz += w * (f_hi - f_lo);
            }
            conv[(x, y)] = yy;
            conv[(n + x, n + y)] = zz;
            if gx < gy {
                conv[(x, n + y)] = yz;
                conv[(n + y, x)] = yz;
            }
            cont[(x, y)] = b_cum[lo];
        }
    }
    (conv, cont)
}
