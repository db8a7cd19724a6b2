use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{BlockId, FluctError, NoiseCovariance};

/// Diagonal ridge added before factorising, relative to the block trace.
pub const RIDGE_FACTOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct PairNoise {
    pub k: usize,
    pub j: usize,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub b: Vec<f64>,
}

/// One draw of every noise process on the covariance times.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseRealization {
    pub times: Vec<f64>,
    /// `(Y0_k, Z0_k)` per type.
    pub initial: Vec<(Vec<f64>, Vec<f64>)>,
    pub pairs: Vec<PairNoise>,
}

impl NoiseRealization {
    /// Identically zero noises with the layout of `cov`.
    pub fn zeros(cov: &NoiseCovariance) -> Self {
        let n = cov.n_times();
        Self {
            times: cov.times.clone(),
            initial: vec![(vec![0.0; n], vec![0.0; n]); cov.n_types()],
            pairs: cov
                .pairs
                .iter()
                .map(|p| PairNoise {
                    k: p.k,
                    j: p.j,
                    y: vec![0.0; n],
                    z: vec![0.0; n],
                    b: vec![0.0; n],
                })
                .collect(),
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        let s = |v: &Vec<f64>| v.iter().map(|x| x * c).collect::<Vec<_>>();
        Self {
            times: self.times.clone(),
            initial: self.initial.iter().map(|(y, z)| (s(y), s(z))).collect(),
            pairs: self
                .pairs
                .iter()
                .map(|p| PairNoise {
                    k: p.k,
                    j: p.j,
                    y: s(&p.y),
                    z: s(&p.z),
                    b: s(&p.b),
                })
                .collect(),
        }
    }

    /// Total forcing of `Y_k`: `Y0_k + sum_j Y_kj + sum_j B_kj`.
    pub fn forcing_y(&self, k: usize) -> Vec<f64> {
        let mut out = self.initial[k].0.clone();
        for p in self.pairs.iter().filter(|p| p.k == k) {
            for (i, o) in out.iter_mut().enumerate() {
                *o += p.y[i] + p.b[i];
            }
        }
        out
    }

    /// Total forcing of `Z_k`: `Z0_k + sum_j Z_kj - sum_j B_kj`.
    pub fn forcing_z(&self, k: usize) -> Vec<f64> {
        let mut out = self.initial[k].1.clone();
        for p in self.pairs.iter().filter(|p| p.k == k) {
            for (i, o) in out.iter_mut().enumerate() {
                *o += p.z[i] - p.b[i];
            }
        }
        out
    }
}

/// `A[perm, perm] = L L^T` for `A` plus the ridge.
#[derive(Debug, Clone)]
struct Factor {
    perm: Vec<usize>,
    l: DMatrix<f64>,
}

impl Factor {
    fn draw<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let n = self.perm.len();
        let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let mut x = vec![0.0; n];
        for i in 0..n {
            let mut acc = 0.0;
            for (j, zj) in z.iter().enumerate().take(i + 1) {
                acc += self.l[(i, j)] * zj;
            }
            x[self.perm[i]] = acc;
        }
        x
    }
}

/// Symmetric pivoted Cholesky of `a + ridge I`, `ridge = RIDGE_FACTOR * tr(a)`.
/// Any non-positive pivot means the ridge was not enough.
fn factorize(id: BlockId, a: &DMatrix<f64>) -> Result<(Factor, f64), FluctError> {
    let n = a.nrows();
    let trace = a.trace();
    if trace == 0.0 && a.iter().all(|v| *v == 0.0) {
        return Ok((
            Factor {
                perm: (0..n).collect(),
                l: DMatrix::zeros(n, n),
            },
            0.0,
        ));
    }
    let ridge = RIDGE_FACTOR * trace.abs();
    let mut s = a.clone();
    for i in 0..n {
        s[(i, i)] += ridge;
    }
    let mut perm: Vec<usize> = (0..n).collect();
    let mut l = DMatrix::zeros(n, n);
    for c in 0..n {
        // pivot on the largest remaining diagonal
        let (best, &pivot) = (c..n)
            .map(|i| (i, &s[(perm[i], perm[i])]))
            .max_by(|x, y| x.1.total_cmp(y.1))
            .expect("non-empty range");
        if !(pivot > 0.0) {
            let min_eigenvalue = SymmetricEigen::new(a.clone())
                .eigenvalues
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min);
            return Err(FluctError::NotPSDAfterRidge {
                block: id,
                min_eigenvalue,
                ridge,
            });
        }
        perm.swap(c, best);
        l.swap_rows(c, best);
        let d = pivot.sqrt();
        l[(c, c)] = d;
        let pc = perm[c];
        for r in c + 1..n {
            let pr = perm[r];
            let v = s[(pr, pc)] / d;
            l[(r, c)] = v;
        }
        for r in c + 1..n {
            let pr = perm[r];
            for q in c + 1..=r {
                let pq = perm[q];
                let upd = s[(pr, pq)] - l[(r, c)] * l[(q, c)];
                s[(pr, pq)] = upd;
                s[(pq, pr)] = upd;
            }
        }
    }
    Ok((Factor { perm, l }, ridge))
}

/// Factorised covariance, reusable for many draws.
#[derive(Debug, Clone)]
pub struct NoiseSampler {
    times: Vec<f64>,
    initial: Vec<Factor>,
    pairs: Vec<(usize, usize, Factor, Factor)>,
    /// Ridge added to each block.
    pub ridges: Vec<(BlockId, f64)>,
}

impl NoiseSampler {
    pub fn new(cov: &NoiseCovariance) -> Result<Self, FluctError> {
        let mut ridges = Vec::new();
        let mut initial = Vec::new();
        for (k, m) in cov.initial.iter().enumerate() {
            let id = BlockId::Initial { k };
            let (f, r) = factorize(id, m)?;
            ridges.push((id, r));
            initial.push(f);
        }
        let mut pairs = Vec::new();
        for p in &cov.pairs {
            let cid = BlockId::Conversion { k: p.k, j: p.j };
            let (fc, rc) = factorize(cid, &p.conversion)?;
            let bid = BlockId::Contact { k: p.k, j: p.j };
            let (fb, rb) = factorize(bid, &p.contact)?;
            ridges.push((cid, rc));
            ridges.push((bid, rb));
            pairs.push((p.k, p.j, fc, fb));
        }
        Ok(Self {
            times: cov.times.clone(),
            initial,
            pairs,
            ridges,
        })
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> NoiseRealization {
        let n = self.times.len();
        let initial = self
            .initial
            .iter()
            .map(|f| {
                let x = f.draw(rng);
                (x[..n].to_vec(), x[n..].to_vec())
            })
            .collect();
        let pairs = self
            .pairs
            .iter()
            .map(|(k, j, fc, fb)| {
                let x = fc.draw(rng);
                PairNoise {
                    k: *k,
                    j: *j,
                    y: x[..n].to_vec(),
                    z: x[n..].to_vec(),
                    b: fb.draw(rng),
                }
            })
            .collect();
        NoiseRealization {
            times: self.times.clone(),
            initial,
            pairs,
        }
    }
}

/// One draw of all noises, deterministic in `seed`.
pub fn sample_limit_noises(cov: &NoiseCovariance, seed: u64) -> Result<NoiseRealization, FluctError> {
    let sampler = NoiseSampler::new(cov)?;
    Ok(sampler.sample(&mut ChaCha8Rng::seed_from_u64(seed)))
}
