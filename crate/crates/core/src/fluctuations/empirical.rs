use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::FluctError;
use crate::engine::{ReplicaSet, Trajectory};
use crate::meanfield::MeanFieldSolution;
use crate::stifling::StiflingLaw;

/// Centering used for rescaled fluctuations.
#[derive(Debug, Clone, Copy)]
pub enum Reference<'a> {
    MeanField(&'a MeanFieldSolution),
    /// The replica mean at each grid point.
    EmpiricalMean,
}

/// `sqrt(N) * (density - reference)` per grid point, type and state.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalFluctuations {
    pub times: Vec<f64>,
    pub n_vertices: usize,
    pub empirical_reference: bool,
    /// `[grid][type][state]`, one value per replica.
    pub values: Vec<Vec<[Vec<f64>; 3]>>,
}

impl EmpiricalFluctuations {
    pub fn index_of(&self, t: f64) -> Option<usize> {
        self.times.iter().position(|&s| (s - t).abs() <= 1e-9 * t.abs().max(1.0))
    }

    pub fn samples(&self, i: usize, k: usize, s: usize) -> &[f64] {
        &self.values[i][k][s]
    }

    /// Sum over types of state `s` at grid index `i`, per replica.
    pub fn total(&self, i: usize, s: usize) -> Vec<f64> {
        let r = self.values[i][0][s].len();
        (0..r).map(|x| self.values[i].iter().map(|v| v[s][x]).sum()).collect()
    }
}

/// Centres and rescales replica trajectories.
pub fn center_and_rescale(replicas: &[Trajectory], reference: Reference<'_>) -> Result<EmpiricalFluctuations, FluctError> {
    let first = replicas
        .first()
        .ok_or_else(|| FluctError::GridMismatch("no replicas".into()))?;
    for t in replicas {
        if t.len() != first.len() || t.type_sizes() != first.type_sizes() || t.grid_dt() != first.grid_dt() {
            return Err(FluctError::GridMismatch("replicas differ in grid or graph size".into()));
        }
    }
    let n = first.num_vertices();
    let nt = first.n_types();
    let times = first.times();
    let ref_index: Option<Vec<usize>> = match reference {
        Reference::MeanField(sol) => {
            if sol.n_types() != nt {
                return Err(FluctError::GridMismatch(format!("{} mean-field types for {nt} graph types", sol.n_types())));
            }
            Some(
                times
                    .iter()
                    .map(|&t| {
                        sol.index_of(t)
                            .ok_or_else(|| FluctError::GridMismatch(format!("time {t} is not on the mean-field grid")))
                    })
                    .collect::<Result<_, _>>()?,
            )
        }
        Reference::EmpiricalMean => None,
    };
    let root = (n as f64).sqrt();
    let values = (0..times.len())
        .map(|i| {
            let dens: Vec<Vec<[f64; 3]>> = replicas.iter().map(|t| t.densities_at(i)).collect();
            (0..nt)
                .map(|k| {
                    std::array::from_fn(|s| {
                        let centre = match (&ref_index, reference) {
                            (Some(idx), Reference::MeanField(sol)) => sol.values[idx[i]][k][s],
                            _ => dens.iter().map(|d| d[k][s]).sum::<f64>() / dens.len() as f64,
                        };
                        dens.iter().map(|d| root * (d[k][s] - centre)).collect()
                    })
                })
                .collect()
        })
        .collect();
    Ok(EmpiricalFluctuations {
        times,
        n_vertices: n,
        empirical_reference: ref_index.is_none(),
        values,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentStats {
    pub n: usize,
    pub mean: f64,
    /// Unbiased.
    pub variance: f64,
    /// Adjusted Fisher-Pearson skewness; `None` for constant samples.
    pub skewness: Option<f64>,
    /// Bias-corrected excess kurtosis; `None` for constant samples.
    pub excess_kurtosis: Option<f64>,
}

impl MomentStats {
    /// Large-sample standard errors of skewness and excess kurtosis.
    pub fn standard_errors(&self) -> (f64, f64) {
        let n = self.n as f64;
        let se_skew = (6.0 * n * (n - 1.0) / ((n - 2.0) * (n + 1.0) * (n + 3.0))).sqrt();
        let se_kurt = 2.0 * se_skew * ((n * n - 1.0) / ((n - 3.0) * (n + 5.0))).sqrt();
        (se_skew, se_kurt)
    }
}

pub fn moment_stats(samples: &[f64]) -> Result<MomentStats, FluctError> {
    const MIN: usize = 30;
    if samples.len() < MIN {
        return Err(FluctError::TooFewSamples {
            needed: MIN,
            got: samples.len(),
        });
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in samples {
        let d = x - mean;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    let variance = m2 / (n - 1.0);
    let (m2, m3, m4) = (m2 / n, m3 / n, m4 / n);
    let (skewness, excess_kurtosis) = if m2 == 0.0 {
        (None, None)
    } else {
        let g1 = m3 / m2.powf(1.5);
        let g2 = m4 / (m2 * m2) - 3.0;
        let skew = g1 * (n * (n - 1.0)).sqrt() / (n - 2.0);
        let kurt = (n - 1.0) / ((n - 2.0) * (n - 3.0)) * ((n + 1.0) * g2 + 6.0);
        (Some(skew), Some(kurt))
    };
    Ok(MomentStats {
        n: samples.len(),
        mean,
        variance,
        skewness,
        excess_kurtosis,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceRatioReport {
    pub n_small: usize,
    pub n_large: usize,
    pub var_small: f64,
    pub var_large: f64,
    /// `var_small / var_large`; `None` when either variance vanishes.
    pub ratio: Option<f64>,
    /// Bootstrap 95% percentile interval.
    pub ci: Option<(f64, f64)>,
    /// `n_large / n_small`, the ratio the CLT scaling predicts.
    pub expected: f64,
}

impl VarianceRatioReport {
    pub fn degenerate(&self) -> bool {
        self.ratio.is_none()
    }
}

fn unbiased_var(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0)
}

/// Variance of the type-summed density of `state` at time `t` on two graph
/// sizes, with a bootstrap interval for the ratio.
pub fn variance_scaling_check(
    small: &ReplicaSet,
    large: &ReplicaSet,
    t: f64,
    state: usize,
    seed: u64,
) -> Result<VarianceRatioReport, FluctError> {
    const MIN: usize = 30;
    const BOOT: usize = 2000;
    let pick = |set: &ReplicaSet| -> Result<(usize, Vec<f64>), FluctError> {
        if set.len() < MIN {
            return Err(FluctError::TooFewSamples {
                needed: MIN,
                got: set.len(),
            });
        }
        let first = &set.trajectories[0];
        let i = first
            .index_of(t)
            .ok_or_else(|| FluctError::GridMismatch(format!("time {t} is not on the replica grid")))?;
        let x = set
            .trajectories
            .iter()
            .map(|tr| tr.densities_at(i).iter().map(|d| d[state]).sum())
            .collect();
        Ok((first.num_vertices(), x))
    };
    let (n_small, xs) = pick(small)?;
    let (n_large, xl) = pick(large)?;
    let var_small = unbiased_var(&xs);
    let var_large = unbiased_var(&xl);
    let expected = n_large as f64 / n_small as f64;
    if var_small == 0.0 || var_large == 0.0 {
        return Ok(VarianceRatioReport {
            n_small,
            n_large,
            var_small,
            var_large,
            ratio: None,
            ci: None,
            expected,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut boots = Vec::with_capacity(BOOT);
    let resample = |x: &[f64], rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..x.len()).map(|_| x[rng.random_range(0..x.len())]).collect()
    };
    for _ in 0..BOOT {
        let a = unbiased_var(&resample(&xs, &mut rng));
        let b = unbiased_var(&resample(&xl, &mut rng));
        if b > 0.0 {
            boots.push(a / b);
        }
    }
    boots.sort_by(f64::total_cmp);
    let q = |p: f64| boots[((boots.len() - 1) as f64 * p).round() as usize];
    Ok(VarianceRatioReport {
        n_small,
        n_large,
        var_small,
        var_large,
        ratio: Some(var_small / var_large),
        ci: (!boots.is_empty()).then(|| (q(0.025), q(0.975))),
        expected,
    })
}

/// Empirical against formula covariance at one `(t, r)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceCheck {
    pub t: f64,
    pub r: f64,
    /// `Cov[Y0(t), Y0(r)]`.
    pub empirical_yy: f64,
    pub formula_yy: f64,
    pub se_yy: f64,
    /// `Cov[Y0(t), Z0(r)]`.
    pub empirical_yz: f64,
    pub formula_yz: f64,
    pub se_yz: f64,
}

impl CovarianceCheck {
    fn z(emp: f64, formula: f64, se: f64) -> f64 {
        let d = emp - formula;
        if d == 0.0 {
            0.0
        } else if se == 0.0 {
            f64::INFINITY
        } else {
            d.abs() / se
        }
    }

    /// Largest standardised deviation of the two comparisons.
    pub fn max_z(&self) -> f64 {
        Self::z(self.empirical_yy, self.formula_yy, self.se_yy).max(Self::z(self.empirical_yz, self.formula_yz, self.se_yz))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseCheckReport {
    pub spreaders: usize,
    pub n_particles: usize,
    pub replicas: usize,
    pub checks: Vec<CovarianceCheck>,
    /// The formula is symmetric in `(t, r)` at every requested pair.
    pub formula_symmetric: bool,
}

impl NoiseCheckReport {
    pub fn max_z(&self) -> f64 {
        self.checks.iter().map(CovarianceCheck::max_z).fold(0.0, f64::max)
    }

    pub fn within(&self, sigmas: f64) -> bool {
        self.formula_symmetric && self.max_z() <= sigmas
    }
}

/// Simulates the centred initial-spreader processes
/// `Y0(t) = N^{-1/2} sum_i (1{t < eta_i} - F^c(t))` and
/// `Z0(t) = N^{-1/2} sum_i (1{eta_i <= t} - F(t))` over `round(y0 N)`
/// spreaders and compares their covariance across replicas with
/// `y0 F(t ^ r) F^c(t v r)`.
pub fn empirical_noise_check(
    law: &StiflingLaw,
    y0: f64,
    n_particles: usize,
    n_replicas: usize,
    pairs: &[(f64, f64)],
    seed: u64,
) -> Result<NoiseCheckReport, FluctError> {
    let spreaders = (y0 * n_particles as f64).round() as usize;
    if spreaders == 0 || n_replicas < 2 {
        return Err(FluctError::InvalidInput(format!(
            "need at least one spreader and two replicas (got {spreaders} and {n_replicas})"
        )));
    }
    let y_eff = spreaders as f64 / n_particles as f64;
    let mut times: Vec<f64> = pairs.iter().flat_map(|&(t, r)| [t, r]).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let pos = |x: f64| times.iter().position(|&s| s == x).expect("time listed");
    let root = (n_particles as f64).sqrt();

    // per replica: (Y0(t), Z0(t)) at every listed time
    let draws: Vec<Vec<(f64, f64)>> = (0..n_replicas as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r);
            let mut alive = vec![0usize; times.len()];
            for _ in 0..spreaders {
                let eta = law.sample(&mut rng);
                for (c, &t) in alive.iter_mut().zip(&times) {
                    if t < eta {
                        *c += 1;
                    }
                }
            }
            times
                .iter()
                .zip(&alive)
                .map(|(&t, &a)| {
                    let m = spreaders as f64;
                    let y = (a as f64 - m * law.survival(t)) / root;
                    let z = ((m - a as f64) - m * law.cdf(t)) / root;
                    (y, z)
                })
                .collect()
        })
        .collect();

    let cov_with_se = |a: &dyn Fn(&Vec<(f64, f64)>) -> f64, b: &dyn Fn(&Vec<(f64, f64)>) -> f64| -> (f64, f64) {
        let r = draws.len() as f64;
        let ma = draws.iter().map(a).sum::<f64>() / r;
        let mb = draws.iter().map(b).sum::<f64>() / r;
        let prods: Vec<f64> = draws.iter().map(|d| (a(d) - ma) * (b(d) - mb)).collect();
        let cov = prods.iter().sum::<f64>() / (r - 1.0);
        let mp = prods.iter().sum::<f64>() / r;
        let sd = (prods.iter().map(|p| (p - mp) * (p - mp)).sum::<f64>() / (r - 1.0)).sqrt();
        (cov, sd / r.sqrt())
    };
    let formula = |t: f64, r: f64| y_eff * law.cdf(t.min(r)) * law.survival(t.max(r));
    let checks = pairs
        .iter()
        .map(|&(t, r)| {
            let (it, ir) = (pos(t), pos(r));
            let (eyy, se_yy) = cov_with_se(&|d| d[it].0, &|d| d[ir].0);
            let (eyz, se_yz) = cov_with_se(&|d| d[it].0, &|d| d[ir].1);
            CovarianceCheck {
                t,
                r,
                empirical_yy: eyy,
                formula_yy: formula(t, r),
                se_yy,
                empirical_yz: eyz,
                formula_yz: -formula(t, r),
                se_yz,
            }
        })
        .collect();
    let formula_symmetric = pairs.iter().all(|&(t, r)| formula(t, r) == formula(r, t));
    Ok(NoiseCheckReport {
        spreaders,
        n_particles,
        replicas: n_replicas,
        checks,
        formula_symmetric,
    })
}
