//! Deterministic large-graph limit of the per-type densities.
//!
//! With `c_kj = n_k(j) / p_j`, conversion flux `a_k = lambda X_k sum_j c_kj Y_j`
//! and contact-stifling flux `b_k = lambda Y_k sum_j c_kj (p_j - X_j)`:
//!
//! ```text
//! Y_k(t) = Y_k(0) F^c(t) + int_0^t F^c(t-s) a_k(s) ds - int_0^t b_k(s) ds
//! Z_k(t) = Z_k(0) + Y_k(0) F(t) + int_0^t F(t-s) a_k(s) ds + int_0^t b_k(s) ds
//! X_k(t) = p_k - Y_k(t) - Z_k(t)
//! ```
//!
//! All densities are relative to the total vertex count, so type `k` lives
//! in `[0, p_k]`.

use std::io::Write;

use thiserror::Error;

use crate::qtgraph::TypeBlueprint;
use crate::stifling::StiflingLaw;

/// Fixed-point iterations allowed per time step.
pub const MAX_FIXED_POINT_ITERS: usize = 50;
/// Sup-norm change below which a step's fixed point is accepted.
pub const FIXED_POINT_TOL: f64 = 1e-12;
/// Default grid step for horizons up to 20.
pub const DEFAULT_DT: f64 = 0.01;

#[derive(Debug, Error, PartialEq)]
pub enum MeanFieldError {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("fixed-point iteration did not settle at step {step} (residual {residual:e})")]
    FixedPointDiverged { step: usize, residual: f64 },
    #[error("the classic ODE reduction needs the never law, got {0}")]
    NeedsNeverLaw(StiflingLaw),
    #[error("convergence study: {0}")]
    BadStepList(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanFieldProblem {
    pub blueprint: TypeBlueprint,
    pub lambda: f64,
    pub law: StiflingLaw,
    /// `(Y_k(0), Z_k(0))` as densities, per type.
    pub initial: Vec<(f64, f64)>,
    pub t_max: f64,
    pub dt: f64,
}

impl MeanFieldProblem {
    /// Problem whose initial state gives, per type, the fractions `[x, y, z]`
    /// of that type's vertices (as in the simulator's proportion start).
    pub fn from_fractions(
        blueprint: TypeBlueprint,
        lambda: f64,
        law: StiflingLaw,
        fractions: &[[f64; 3]],
        t_max: f64,
        dt: f64,
    ) -> Result<Self, MeanFieldError> {
        let p = blueprint.proportions();
        if fractions.len() != p.len() {
            return Err(MeanFieldError::InvalidProblem(format!(
                "{} initial fractions for {} types",
                fractions.len(),
                p.len()
            )));
        }
        let initial = fractions.iter().zip(&p).map(|(f, pk)| (f[1] * pk, f[2] * pk)).collect();
        let prob = Self {
            blueprint,
            lambda,
            law,
            initial,
            t_max,
            dt,
        };
        prob.validate()?;
        Ok(prob)
    }

    /// Number of grid intervals.
    pub fn steps(&self) -> Result<usize, MeanFieldError> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(MeanFieldError::InvalidProblem(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_max.is_finite() && self.t_max >= 0.0) {
            return Err(MeanFieldError::InvalidProblem(format!("bad t_max {}", self.t_max)));
        }
        let m = (self.t_max / self.dt).round();
        if (m * self.dt - self.t_max).abs() > 1e-9 * self.t_max.max(1.0) {
            return Err(MeanFieldError::InvalidProblem(format!(
                "dt {} does not divide t_max {}",
                self.dt, self.t_max
            )));
        }
        Ok(m as usize)
    }

    pub fn validate(&self) -> Result<usize, MeanFieldError> {
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(MeanFieldError::InvalidProblem(format!("lambda must be positive, got {}", self.lambda)));
        }
        self.law
            .validated()
            .map_err(|e| MeanFieldError::InvalidProblem(e.to_string()))?;
        let p = self.blueprint.proportions();
        if self.initial.len() != p.len() {
            return Err(MeanFieldError::InvalidProblem(format!(
                "initial values for {} types, blueprint has {}",
                self.initial.len(),
                p.len()
            )));
        }
        for (k, (&(y, z), &pk)) in self.initial.iter().zip(&p).enumerate() {
            if !(y >= 0.0 && z >= 0.0 && y + z <= pk * (1.0 + 1e-12)) {
                return Err(MeanFieldError::InvalidProblem(format!(
                    "type {k}: need 0 <= Y(0), Z(0) and Y(0) + Z(0) <= p_k = {pk}, got ({y}, {z})"
                )));
            }
        }
        self.steps()
    }

    fn couplings(&self) -> Vec<Vec<f64>> {
        let nt = self.blueprint.n_types();
        (0..nt)
            .map(|k| (0..nt).map(|j| self.blueprint.coupling(k, j)).collect())
            .collect()
    }
}

/// Densities `[X, Y, Z]` per type on the grid `0, dt, ..., t_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanFieldSolution {
    pub dt: f64,
    pub proportions: Vec<f64>,
    /// `[grid][type][state]`.
    pub values: Vec<Vec<[f64; 3]>>,
}

impl MeanFieldSolution {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn n_types(&self) -> usize {
        self.proportions.len()
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.time(i)).collect()
    }

    pub fn t_max(&self) -> f64 {
        self.time(self.len() - 1)
    }

    /// Grid index of `t`, if `t` is a grid point.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let i = (t / self.dt).round();
        if i < 0.0 || (i * self.dt - t).abs() > 1e-9 * t.abs().max(1.0) {
            return None;
        }
        let i = i as usize;
        (i < self.len()).then_some(i)
    }

    /// One series, `s` in `0..3` for X, Y, Z.
    pub fn series(&self, k: usize, s: usize) -> Vec<f64> {
        self.values.iter().map(|row| row[k][s]).collect()
    }

    /// Sum over types of state `s` at grid index `i`.
    pub fn total(&self, i: usize, s: usize) -> f64 {
        self.values[i].iter().map(|v| v[s]).sum()
    }

    /// Largest absolute difference to `other` over the grid points the two
    /// share. Requires `other.dt` to be an integer multiple of `self.dt`,
    /// or the reverse.
    pub fn sup_distance(&self, other: &MeanFieldSolution) -> f64 {
        let (fine, coarse) = if self.dt <= other.dt { (self, other) } else { (other, self) };
        let ratio = (coarse.dt / fine.dt).round() as usize;
        let mut worst: f64 = 0.0;
        for i in 0..coarse.len() {
            let j = i * ratio;
            if j >= fine.len() {
                break;
            }
            for (a, b) in coarse.values[i].iter().zip(&fine.values[j]) {
                for s in 0..3 {
                    worst = worst.max((a[s] - b[s]).abs());
                }
            }
        }
        worst
    }

    /// CSV with columns `t,type,X,Y,Z`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,type,X,Y,Z")?;
        for (i, row) in self.values.iter().enumerate() {
            let t = self.time(i);
            for (k, v) in row.iter().enumerate() {
                writeln!(w, "{t},{k},{},{},{}", v[0], v[1], v[2])?;
            }
        }
        Ok(())
    }
}

fn fluxes(lambda: f64, c: &[Vec<f64>], p: &[f64], y: &[f64], z: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let nt = p.len();
    let x: Vec<f64> = (0..nt).map(|k| p[k] - y[k] - z[k]).collect();
    let mut a = vec![0.0; nt];
    let mut b = vec![0.0; nt];
    for k in 0..nt {
        let (mut sy, mut sn) = (0.0, 0.0);
        for j in 0..nt {
            sy += c[k][j] * y[j];
            sn += c[k][j] * (p[j] - x[j]);
        }
        a[k] = lambda * x[k] * sy;
        b[k] = lambda * y[k] * sn;
    }
    (a, b)
}

/// Trapezoidal time stepping of the integral system. The unknown endpoint
/// value at each step is found by fixed-point iteration.
pub fn solve_flln(prob: &MeanFieldProblem) -> Result<MeanFieldSolution, MeanFieldError> {
    let steps = prob.validate()?;
    let p = prob.blueprint.proportions();
    let c = prob.couplings();
    let nt = p.len();
    let dt = prob.dt;
    let fc: Vec<f64> = (0..=steps).map(|m| prob.law.survival(m as f64 * dt)).collect();
    let ff: Vec<f64> = (0..=steps).map(|m| prob.law.cdf(m as f64 * dt)).collect();

    let y0: Vec<f64> = prob.initial.iter().map(|v| v.0).collect();
    let z0: Vec<f64> = prob.initial.iter().map(|v| v.1).collect();
    // the equations at t = 0 itself: a law with an atom at zero removes
    // those initial spreaders before anything else happens
    let y_start: Vec<f64> = (0..nt).map(|k| y0[k] * fc[0]).collect();
    let z_start: Vec<f64> = (0..nt).map(|k| z0[k] + y0[k] * ff[0]).collect();
    let (a0, b0) = fluxes(prob.lambda, &c, &p, &y_start, &z_start);
    let mut ys = vec![y_start];
    let mut zs = vec![z_start];
    let mut a_hist = vec![a0];
    let mut b_prev = b0;
    let mut b_cum = vec![0.0; nt];

    for m in 1..=steps {
        // history part of both convolutions, fixed during the iteration
        let mut conv_c = vec![0.0; nt];
        let mut conv_f = vec![0.0; nt];
        for (i, a) in a_hist.iter().enumerate() {
            let w = if i == 0 { 0.5 } else { 1.0 };
            for k in 0..nt {
                conv_c[k] += w * fc[m - i] * a[k];
                conv_f[k] += w * ff[m - i] * a[k];
            }
        }
        let mut y = ys[m - 1].clone();
        let mut z = zs[m - 1].clone();
        let mut residual = f64::INFINITY;
        for _ in 0..MAX_FIXED_POINT_ITERS {
            let (a, b) = fluxes(prob.lambda, &c, &p, &y, &z);
            let mut change: f64 = 0.0;
            for k in 0..nt {
                let b_int = b_cum[k] + 0.5 * dt * (b_prev[k] + b[k]);
                let ny = y0[k] * fc[m] + dt * (conv_c[k] + 0.5 * fc[0] * a[k]) - b_int;
                let nz = z0[k] + y0[k] * ff[m] + dt * (conv_f[k] + 0.5 * ff[0] * a[k]) + b_int;
                change = change.max((ny - y[k]).abs()).max((nz - z[k]).abs());
                y[k] = ny;
                z[k] = nz;
            }
            residual = change;
            if !residual.is_finite() || residual <= FIXED_POINT_TOL {
                break;
            }
        }
        if !(residual <= FIXED_POINT_TOL) {
            return Err(MeanFieldError::FixedPointDiverged { step: m, residual });
        }
        let (a, b) = fluxes(prob.lambda, &c, &p, &y, &z);
        for k in 0..nt {
            b_cum[k] += 0.5 * dt * (b_prev[k] + b[k]);
        }
        b_prev = b;
        a_hist.push(a);
        ys.push(y);
        zs.push(z);
    }
    Ok(assemble(dt, p, &ys, &zs))
}

fn assemble(dt: f64, p: Vec<f64>, ys: &[Vec<f64>], zs: &[Vec<f64>]) -> MeanFieldSolution {
    let values = ys
        .iter()
        .zip(zs)
        .map(|(y, z)| {
            (0..p.len())
                .map(|k| [p[k] - y[k] - z[k], y[k], z[k]])
                .collect()
        })
        .collect();
    MeanFieldSolution {
        dt,
        proportions: p,
        values,
    }
}

/// Alternative closure in which a converted spreader is counted as a
/// spreader at `t` only if its own clock has not rung *and* it has not been
/// stifled by contact in between:
///
/// ```text
/// X_k(t) = X_k(0) - int_0^t a_k(s) ds
/// Y_k(t) = Y_k(0) F^c(t) e^{-L_k(0,t)} + int_0^t F^c(t-s) e^{-L_k(s,t)} a_k(s) ds
/// L_k(s,t) = int_s^t lambda sum_j c_kj (p_j - X_j(u)) du
/// ```
///
/// with `Z = p - X - Y`. Under the never law it coincides with
/// [`solve_flln`]; otherwise it stays inside the simplex where the other
/// form can leave it. Same trapezoidal stepping and fixed-point control.
pub fn solve_flln_survival_weighted(prob: &MeanFieldProblem) -> Result<MeanFieldSolution, MeanFieldError> {
    let steps = prob.validate()?;
    let p = prob.blueprint.proportions();
    let c = prob.couplings();
    let nt = p.len();
    let dt = prob.dt;
    let lambda = prob.lambda;
    let fc: Vec<f64> = (0..=steps).map(|m| prob.law.survival(m as f64 * dt)).collect();
    let hazard = |x: &[f64]| -> Vec<f64> {
        (0..nt)
            .map(|k| lambda * (0..nt).map(|j| c[k][j] * (p[j] - x[j])).sum::<f64>())
            .collect()
    };
    let conversion = |x: &[f64], y: &[f64]| -> Vec<f64> {
        (0..nt)
            .map(|k| lambda * x[k] * (0..nt).map(|j| c[k][j] * y[j]).sum::<f64>())
            .collect()
    };

    let y0: Vec<f64> = prob.initial.iter().map(|v| v.0).collect();
    let x0: Vec<f64> = (0..nt).map(|k| p[k] - prob.initial[k].0 - prob.initial[k].1).collect();
    let y_start: Vec<f64> = (0..nt).map(|k| y0[k] * fc[0]).collect();
    let mut xs = vec![x0.clone()];
    let mut ys = vec![y_start.clone()];
    let mut a_hist = vec![conversion(&x0, &y_start)];
    let mut beta_prev = hazard(&x0);
    let mut l_hist: Vec<Vec<f64>> = vec![vec![0.0; nt]];
    let mut a_cum = vec![0.0; nt];

    for m in 1..=steps {
        let l_prev = &l_hist[m - 1];
        // history relative to L(t_{m-1}); the last factor is applied per iteration
        let mut hist = vec![0.0; nt];
        for (i, a) in a_hist.iter().enumerate() {
            let w = if i == 0 { 0.5 } else { 1.0 };
            for k in 0..nt {
                hist[k] += w * fc[m - i] * (l_hist[i][k] - l_prev[k]).exp() * a[k];
            }
        }
        let mut x = xs[m - 1].clone();
        let mut y = ys[m - 1].clone();
        let mut residual = f64::INFINITY;
        for _ in 0..MAX_FIXED_POINT_ITERS {
            let a = conversion(&x, &y);
            let beta = hazard(&x);
            let mut change: f64 = 0.0;
            for k in 0..nt {
                let step_l = 0.5 * dt * (beta_prev[k] + beta[k]);
                let decay = (-step_l).exp();
                let l_m = l_prev[k] + step_l;
                let nx = x0[k] - a_cum[k] - 0.5 * dt * (a_hist[m - 1][k] + a[k]);
                let ny = y0[k] * fc[m] * (-l_m).exp() + dt * (hist[k] * decay + 0.5 * fc[0] * a[k]);
                change = change.max((nx - x[k]).abs()).max((ny - y[k]).abs());
                x[k] = nx;
                y[k] = ny;
            }
            residual = change;
            if !residual.is_finite() || residual <= FIXED_POINT_TOL {
                break;
            }
        }
        if !(residual <= FIXED_POINT_TOL) {
            return Err(MeanFieldError::FixedPointDiverged { step: m, residual });
        }
        let a = conversion(&x, &y);
        let beta = hazard(&x);
        let l_m: Vec<f64> = (0..nt).map(|k| l_prev[k] + 0.5 * dt * (beta_prev[k] + beta[k])).collect();
        for k in 0..nt {
            a_cum[k] += 0.5 * dt * (a_hist[m - 1][k] + a[k]);
        }
        beta_prev = beta;
        l_hist.push(l_m);
        a_hist.push(a);
        xs.push(x);
        ys.push(y);
    }
    let zs: Vec<Vec<f64>> = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (0..nt).map(|k| p[k] - x[k] - y[k]).collect())
        .collect();
    Ok(assemble(dt, p, &ys, &zs))
}

/// Fourth-order Runge-Kutta on the differential form that the integral
/// system takes when spreaders never stop on their own. Shares no code with
/// [`solve_flln`] beyond the problem type.
pub fn classic_mt_ode(prob: &MeanFieldProblem) -> Result<MeanFieldSolution, MeanFieldError> {
    if prob.law != StiflingLaw::Never {
        return Err(MeanFieldError::NeedsNeverLaw(prob.law));
    }
    let steps = prob.validate()?;
    let p = prob.blueprint.proportions();
    let nt = p.len();
    let lambda = prob.lambda;
    let n: Vec<Vec<f64>> = (0..nt)
        .map(|k| (0..nt).map(|j| prob.blueprint.count(k, j) as f64 / p[j]).collect())
        .collect();
    // state vector [Y_0..Y_{K-1}, Z_0..Z_{K-1}]
    let rhs = |s: &[f64]| -> Vec<f64> {
        let mut d = vec![0.0; 2 * nt];
        for k in 0..nt {
            let xk = p[k] - s[k] - s[nt + k];
            let mut gain = 0.0;
            let mut loss = 0.0;
            for j in 0..nt {
                let xj = p[j] - s[j] - s[nt + j];
                gain += n[k][j] * s[j];
                loss += n[k][j] * (p[j] - xj);
            }
            let stifle = lambda * s[k] * loss;
            d[k] = lambda * xk * gain - stifle;
            d[nt + k] = stifle;
        }
        d
    };
    let h = prob.dt;
    let mut s: Vec<f64> = prob
        .initial
        .iter()
        .map(|v| v.0)
        .chain(prob.initial.iter().map(|v| v.1))
        .collect();
    let mut ys = vec![s[..nt].to_vec()];
    let mut zs = vec![s[nt..].to_vec()];
    let axpy = |s: &[f64], k: &[f64], f: f64| -> Vec<f64> { s.iter().zip(k).map(|(a, b)| a + f * b).collect() };
    for _ in 0..steps {
        let k1 = rhs(&s);
        let k2 = rhs(&axpy(&s, &k1, h / 2.0));
        let k3 = rhs(&axpy(&s, &k2, h / 2.0));
        let k4 = rhs(&axpy(&s, &k3, h));
        for i in 0..s.len() {
            s[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        ys.push(s[..nt].to_vec());
        zs.push(s[nt..].to_vec());
    }
    Ok(assemble(h, p, &ys, &zs))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solver {
    Flln,
    SurvivalWeighted,
    ClassicOde,
}

impl Solver {
    pub fn solve(self, prob: &MeanFieldProblem) -> Result<MeanFieldSolution, MeanFieldError> {
        match self {
            Solver::Flln => solve_flln(prob),
            Solver::SurvivalWeighted => solve_flln_survival_weighted(prob),
            Solver::ClassicOde => classic_mt_ode(prob),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub dts: Vec<f64>,
    /// Sup error of each step size against the finest solution (0 for the
    /// finest itself).
    pub errors_vs_finest: Vec<f64>,
    /// Sup differences between consecutive refinements.
    pub successive_diffs: Vec<f64>,
    /// Observed order from each consecutive triple of step sizes.
    pub local_orders: Vec<f64>,
    /// Least-squares slope of `log diff` against `log dt`; NaN when degenerate.
    pub order: f64,
    /// Every difference is at roundoff level, so no order can be read off.
    pub degenerate: bool,
}

/// Observed order of accuracy from a geometric sequence of step sizes.
///
/// Consecutive refinements `u_h`, `u_{h/r}` are compared on the coarse grid;
/// the ratio of successive differences gives `r^order`. Using differences
/// rather than errors against the finest run removes the finest run's own
/// error from the estimate.
pub fn convergence_order(prob: &MeanFieldProblem, dts: &[f64], solver: Solver) -> Result<ConvergenceReport, MeanFieldError> {
    if dts.len() < 3 {
        return Err(MeanFieldError::BadStepList(format!("need at least 3 step sizes, got {}", dts.len())));
    }
    let mut dts = dts.to_vec();
    dts.sort_by(|a, b| b.total_cmp(a));
    let r = dts[0] / dts[1];
    for w in dts.windows(2) {
        let ri = w[0] / w[1];
        if (ri - r).abs() > 1e-9 * r || (ri.round() - ri).abs() > 1e-9 || ri < 1.5 {
            return Err(MeanFieldError::BadStepList(format!(
                "step sizes {dts:?} are not a geometric sequence with an integer ratio"
            )));
        }
    }
    let sols = dts
        .iter()
        .map(|&dt| solver.solve(&MeanFieldProblem { dt, ..prob.clone() }))
        .collect::<Result<Vec<_>, _>>()?;
    let finest = sols.last().expect("at least three runs");
    let errors_vs_finest = sols.iter().map(|s| s.sup_distance(finest)).collect();
    let successive_diffs: Vec<f64> = sols.windows(2).map(|w| w[0].sup_distance(&w[1])).collect();
    let floor = 1e-13;
    let degenerate = successive_diffs.iter().all(|&d| d < floor);
    let (local_orders, order) = if degenerate {
        (vec![f64::NAN; successive_diffs.len() - 1], f64::NAN)
    } else {
        let local = successive_diffs
            .windows(2)
            .map(|w| (w[0] / w[1]).ln() / r.ln())
            .collect();
        let xs: Vec<f64> = dts[..successive_diffs.len()].iter().map(|h| h.ln()).collect();
        let ys: Vec<f64> = successive_diffs.iter().map(|d| d.max(floor).ln()).collect();
        (local, slope(&xs, &ys))
    };
    Ok(ConvergenceReport {
        dts,
        errors_vs_finest,
        successive_diffs,
        local_orders,
        order,
        degenerate,
    })
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_type(law: StiflingLaw, y0: f64, t_max: f64, dt: f64) -> MeanFieldProblem {
        MeanFieldProblem {
            blueprint: TypeBlueprint::new(vec![vec![4]]).unwrap(),
            lambda: 0.5,
            law,
            initial: vec![(y0, 0.0)],
            t_max,
            dt,
        }
    }

    fn two_four(law: StiflingLaw) -> MeanFieldProblem {
        let bp = TypeBlueprint::new(vec![vec![0, 2], vec![4, 0]]).unwrap();
        MeanFieldProblem::from_fractions(bp, 1.0, law, &[[0.99, 0.01, 0.0], [0.98, 0.01, 0.01]], 6.0, 0.01).unwrap()
    }

    #[test]
    fn zero_spreaders_is_constant() {
        let mut prob = two_four(StiflingLaw::exponential(1.0).unwrap());
        prob.initial = vec![(0.0, 0.1), (0.0, 0.0)];
        let sol = solve_flln(&prob).unwrap();
        for row in &sol.values {
            assert_eq!(row[0], [2.0 / 3.0 - 0.1, 0.0, 0.1]);
            assert_eq!(row[1], [1.0 / 3.0, 0.0, 0.0]);
        }
    }

    #[test]
    fn immediate_law_absorbs_initial_spreaders() {
        let prob = one_type(StiflingLaw::Immediate, 0.05, 3.0, 0.01);
        let sol = solve_flln(&prob).unwrap();
        for i in 1..sol.len() {
            assert_eq!(sol.values[i][0][1], 0.0);
            assert!((sol.values[i][0][2] - 0.05).abs() < 1e-15);
        }
    }

    fn assert_physical(sol: &MeanFieldSolution) {
        for (i, row) in sol.values.iter().enumerate() {
            for (k, v) in row.iter().enumerate() {
                let pk = sol.proportions[k];
                assert!((v[0] + v[1] + v[2] - pk).abs() < 1e-10);
                assert!(v[1] >= 0.0 && v[1] <= pk, "Y out of range at {i}");
                if i > 0 {
                    let prev = sol.values[i - 1][k];
                    assert!(v[0] <= prev[0] + 1e-14, "X rises at {i}");
                    assert!(v[2] >= prev[2] - 1e-14, "Z falls at {i}");
                }
            }
        }
    }

    #[test]
    fn conservation_and_monotonicity() {
        assert_physical(&solve_flln(&two_four(StiflingLaw::Never)).unwrap());
        let mut short = two_four(StiflingLaw::exponential(1.0).unwrap());
        short.t_max = 2.0;
        assert_physical(&solve_flln(&short).unwrap());
        for law in [StiflingLaw::exponential(1.0).unwrap(), StiflingLaw::weibull(2.0, 5.0).unwrap()] {
            let mut long = two_four(law);
            long.t_max = 20.0;
            assert_physical(&solve_flln_survival_weighted(&long).unwrap());
        }
        assert_physical(&solve_flln_survival_weighted(&one_type(StiflingLaw::weibull(2.0, 5.0).unwrap(), 0.01, 20.0, 0.01)).unwrap());
    }

    #[test]
    fn stated_form_leaves_the_simplex() {
        // Contact-stifled spreaders keep being discounted by F^c, so once
        // contact stifling dominates Y is pushed below zero and the
        // iteration eventually blows up.
        let prob = one_type(StiflingLaw::weibull(2.0, 5.0).unwrap(), 0.01, 8.0, 0.01);
        let sol = solve_flln(&prob).unwrap();
        let first_negative = (0..sol.len()).find(|&i| sol.values[i][0][1] < 0.0).unwrap();
        assert!((4.0..5.0).contains(&sol.time(first_negative)));
        let long = MeanFieldProblem { t_max: 20.0, ..prob };
        assert!(matches!(solve_flln(&long), Err(MeanFieldError::FixedPointDiverged { .. })));
    }

    #[test]
    fn closures_agree_without_spontaneous_stifling() {
        let a = solve_flln(&two_four(StiflingLaw::Never)).unwrap();
        let b = solve_flln_survival_weighted(&two_four(StiflingLaw::Never)).unwrap();
        // same limit, different O(dt^2) discretisations
        assert!(a.sup_distance(&b) < 1e-4, "{}", a.sup_distance(&b));
    }

    #[test]
    fn survival_weighted_is_second_order() {
        let prob = one_type(StiflingLaw::weibull(2.0, 5.0).unwrap(), 0.01, 20.0, 0.01);
        let r = convergence_order(&prob, &[0.08, 0.04, 0.02, 0.01], Solver::SurvivalWeighted).unwrap();
        assert!((1.7..=2.3).contains(&r.order), "{r:?}");
    }

    #[test]
    fn never_law_matches_rk4() {
        let a = solve_flln(&one_type(StiflingLaw::Never, 0.01, 20.0, 1e-3)).unwrap();
        let b = classic_mt_ode(&one_type(StiflingLaw::Never, 0.01, 20.0, 1e-3)).unwrap();
        assert!(a.sup_distance(&b) <= 1e-3, "gap {}", a.sup_distance(&b));
        let a = solve_flln(&two_four(StiflingLaw::Never)).unwrap();
        let b = classic_mt_ode(&two_four(StiflingLaw::Never)).unwrap();
        assert!(a.sup_distance(&b) <= 1e-3);
    }

    #[test]
    fn classic_ode_needs_never_law() {
        let prob = one_type(StiflingLaw::exponential(1.0).unwrap(), 0.01, 1.0, 0.1);
        assert!(matches!(classic_mt_ode(&prob), Err(MeanFieldError::NeedsNeverLaw(_))));
    }

    #[test]
    fn rk4_is_fourth_order() {
        let prob = one_type(StiflingLaw::Never, 0.01, 20.0, 0.1);
        let r = convergence_order(&prob, &[0.2, 0.1, 0.05, 0.025], Solver::ClassicOde).unwrap();
        assert!((3.5..=4.5).contains(&r.order), "{r:?}");
    }

    #[test]
    fn trapezoid_is_second_order_before_trouble() {
        let prob = one_type(StiflingLaw::exponential(0.2).unwrap(), 0.01, 8.0, 0.1);
        let r = convergence_order(&prob, &[0.08, 0.04, 0.02, 0.01], Solver::Flln).unwrap();
        assert!((1.7..=2.3).contains(&r.order), "{r:?}");
    }

    #[test]
    fn constant_solution_is_degenerate() {
        let prob = one_type(StiflingLaw::exponential(1.0).unwrap(), 0.0, 2.0, 0.1);
        let r = convergence_order(&prob, &[0.08, 0.04, 0.02], Solver::Flln).unwrap();
        assert!(r.degenerate && r.order.is_nan());
        assert!(convergence_order(&prob, &[0.08, 0.04], Solver::Flln).is_err());
        assert!(convergence_order(&prob, &[0.08, 0.04, 0.03], Solver::Flln).is_err());
    }

    #[test]
    fn time_rescaling_invariance() {
        // lambda -> c lambda together with eta -> eta / c runs the same
        // curves on a clock that is c times faster
        let c = 2.0;
        for law in [
            StiflingLaw::exponential(0.7).unwrap(),
            StiflingLaw::weibull(2.0, 5.0).unwrap(),
            StiflingLaw::deterministic(1.25).unwrap(),
        ] {
            let base = one_type(law, 0.02, 4.0, 0.02);
            let fast = MeanFieldProblem {
                lambda: base.lambda * c,
                law: law.time_scaled(c),
                t_max: base.t_max / c,
                dt: base.dt / c,
                ..base.clone()
            };
            let a = solve_flln(&base).unwrap();
            let b = solve_flln(&fast).unwrap();
            assert_eq!(a.len(), b.len());
            for (ra, rb) in a.values.iter().zip(&b.values) {
                for s in 0..3 {
                    assert!((ra[0][s] - rb[0][s]).abs() < 1e-10, "{law}");
                }
            }
        }
    }

    #[test]
    fn rejects_bad_problems() {
        let mut prob = one_type(StiflingLaw::Never, 0.5, 1.0, 0.3);
        assert!(solve_flln(&prob).is_err());
        prob.dt = 0.25;
        prob.initial = vec![(0.7, 0.4)];
        assert!(matches!(solve_flln(&prob), Err(MeanFieldError::InvalidProblem(_))));
        prob.initial = vec![(0.1, 0.0)];
        prob.lambda = 0.0;
        assert!(solve_flln(&prob).is_err());
    }

    #[test]
    fn csv_header() {
        let sol = solve_flln(&one_type(StiflingLaw::Never, 0.1, 0.5, 0.25)).unwrap();
        let mut buf = Vec::new();
        sol.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,type,X,Y,Z\n0,0,0.9,0.1,0\n"));
        assert_eq!(text.lines().count(), 4);
    }
}
