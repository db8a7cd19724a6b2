use std::io::Write;

use nalgebra::{DMatrix, DVector};

use super::{FluctError, NoiseCovariance, NoiseRealization};
use crate::meanfield::MeanFieldSolution;
use crate::qtgraph::TypeBlueprint;
use crate::stifling::StiflingLaw;

/// One path of the limiting fluctuation process.
#[derive(Debug, Clone, PartialEq)]
pub struct FluctuationSample {
    pub dt: f64,
    /// `[grid][type]` of `[X^, Y^, Z^]`.
    pub values: Vec<Vec<[f64; 3]>>,
    pub noises: NoiseRealization,
}

impl FluctuationSample {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }

    /// Sum over types of component `s` at grid index `i`.
    pub fn total(&self, i: usize, s: usize) -> f64 {
        self.values[i].iter().map(|v| v[s]).sum()
    }
}

/// CSV with columns `sample_id,t,type,X,Y,Z`.
pub fn write_samples_csv<W: Write>(samples: &[FluctuationSample], mut w: W) -> std::io::Result<()> {
    writeln!(w, "sample_id,t,type,X,Y,Z")?;
    for (id, s) in samples.iter().enumerate() {
        for (i, row) in s.values.iter().enumerate() {
            let t = s.time(i);
            for (k, v) in row.iter().enumerate() {
                writeln!(w, "{id},{t},{k},{},{},{}", v[0], v[1], v[2])?;
            }
        }
    }
    Ok(())
}

/// Solves the linearised integral system driven by `noises`.
///
/// The covariance times must be the first grid points of `sol`, so that the
/// noise is known at every step. Convolutions use the trapezoidal rule; the
/// unknown endpoint enters linearly, so each step is a `2K x 2K` LU solve.
/// `X^ = -Y^ - Z^` holds by construction.
pub fn solve_fclt(
    cov: &NoiseCovariance,
    noises: &NoiseRealization,
    initial: &[(f64, f64)],
    blueprint: &TypeBlueprint,
    lambda: f64,
    law: &StiflingLaw,
    sol: &MeanFieldSolution,
) -> Result<FluctuationSample, FluctError> {
    let nt = blueprint.n_types();
    let n = cov.n_times();
    if cov.grid_index.iter().enumerate().any(|(i, &g)| g != i) || (sol.dt - cov.dt).abs() > 1e-15 * sol.dt {
        return Err(FluctError::GridMismatch(
            "covariance times must be the leading points of the mean-field grid".into(),
        ));
    }
    if n > sol.len() || noises.times.len() != n {
        return Err(FluctError::GridMismatch(format!(
            "{n} covariance times, {} noise times, {} solution points",
            noises.times.len(),
            sol.len()
        )));
    }
    if initial.len() != nt || sol.n_types() != nt || noises.initial.len() != nt {
        return Err(FluctError::InvalidInput(format!("type count mismatch (blueprint has {nt})")));
    }
    let dt = sol.dt;
    let p = &sol.proportions;
    let c: Vec<Vec<f64>> = (0..nt)
        .map(|k| (0..nt).map(|j| blueprint.coupling(k, j)).collect())
        .collect();
    let fc: Vec<f64> = (0..n).map(|m| law.survival(m as f64 * dt)).collect();
    let ff: Vec<f64> = (0..n).map(|m| law.cdf(m as f64 * dt)).collect();
    let ny: Vec<Vec<f64>> = (0..nt).map(|k| noises.forcing_y(k)).collect();
    let nz: Vec<Vec<f64>> = (0..nt).map(|k| noises.forcing_z(k)).collect();

    // g = conversion fluctuation, h = contact-stifling fluctuation; both are
    // linear in u = [Y^_0..Y^_{K-1}, Z^_0..Z^_{K-1}] at a grid point
    let jacobians = |i: usize| -> (DMatrix<f64>, DMatrix<f64>) {
        let row = &sol.values[i];
        let mut g = DMatrix::zeros(nt, 2 * nt);
        let mut h = DMatrix::zeros(nt, 2 * nt);
        for k in 0..nt {
            for j in 0..nt {
                let ckj = lambda * c[k][j];
                if ckj == 0.0 {
                    continue;
                }
                // X^_k Y_j + X_k Y^_j with X^_k = -Y^_k - Z^_k
                g[(k, k)] -= ckj * row[j][1];
                g[(k, nt + k)] -= ckj * row[j][1];
                g[(k, j)] += ckj * row[k][0];
                // Y^_k (p_j - X_j) - Y_k X^_j
                h[(k, k)] += ckj * (p[j] - row[j][0]);
                h[(k, j)] += ckj * row[k][1];
                h[(k, nt + j)] += ckj * row[k][1];
            }
        }
        (g, h)
    };

    let mut us: Vec<DVector<f64>> = Vec::with_capacity(n);
    let mut gs: Vec<DVector<f64>> = Vec::with_capacity(n);
    let mut hs: Vec<DVector<f64>> = Vec::with_capacity(n);
    let mut h_cum = DVector::zeros(nt);
    let eye = DMatrix::<f64>::identity(2 * nt, 2 * nt);

    for m in 0..n {
        let (g_m, h_m) = jacobians(m);
        let mut rhs = DVector::zeros(2 * nt);
        for k in 0..nt {
            rhs[k] = initial[k].0 * fc[m] + ny[k][m];
            // the initial spreaders that stop on their own move to Z^ as
            // they do in the mean-field system
            rhs[nt + k] = initial[k].1 + initial[k].0 * ff[m] + nz[k][m];
        }
        let u = if m == 0 {
            rhs
        } else {
            let mut conv_c = DVector::zeros(nt);
            let mut conv_f = DVector::zeros(nt);
            for (i, g) in gs.iter().enumerate() {
                let w = if i == 0 { 0.5 } else { 1.0 };
                conv_c += g * (w * fc[m - i]);
                conv_f += g * (w * ff[m - i]);
            }
            let hist_h = &h_cum + &hs[m - 1] * (0.5 * dt);
            for k in 0..nt {
                rhs[k] += dt * conv_c[k] - hist_h[k];
                rhs[nt + k] += dt * conv_f[k] + hist_h[k];
            }
            // endpoint terms: dt/2 (F^c(0) g - h) for Y, dt/2 (F(0) g + h) for Z
            let mut a = eye.clone();
            for k in 0..nt {
                for col in 0..2 * nt {
                    a[(k, col)] -= 0.5 * dt * (fc[0] * g_m[(k, col)] - h_m[(k, col)]);
                    a[(nt + k, col)] -= 0.5 * dt * (ff[0] * g_m[(k, col)] + h_m[(k, col)]);
                }
            }
            let lu = a.clone().lu();
            let u = lu.solve(&rhs).ok_or(FluctError::FixedPointDiverged {
                step: m,
                residual: f64::NAN,
            })?;
            let residual = (&a * &u - &rhs).amax();
            if !(residual <= 1e-9 * (1.0 + rhs.amax())) {
                return Err(FluctError::FixedPointDiverged { step: m, residual });
            }
            h_cum += (&hs[m - 1] + &h_m * &u) * (0.5 * dt);
            u
        };
        gs.push(&g_m * &u);
        hs.push(&h_m * &u);
        us.push(u);
    }

    let values = us
        .iter()
        .map(|u| (0..nt).map(|k| [-u[k] - u[nt + k], u[k], u[nt + k]]).collect())
        .collect();
    Ok(FluctuationSample {
        dt,
        values,
        noises: noises.clone(),
    })
}
