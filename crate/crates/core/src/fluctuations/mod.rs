//! Gaussian fluctuations around the mean-field limit.
//!
//! The limit noises come in independent blocks: per type `k` the initial
//! spreader pair `(Y0_k, Z0_k)`, and per neighbour pair `(k, j)` the joint
//! conversion pair `(Y_kj, Z_kj)` and the contact-stifling noise `B_kj`.
//! [`eval_noise_covariance`] assembles the block covariances on a time grid,
//! [`NoiseSampler`] draws from them and [`solve_fclt`] feeds a draw through
//! the linearised integral system. The empirical side ([`center_and_rescale`],
//! [`moment_stats`], [`variance_scaling_check`], [`empirical_noise_check`])
//! works on simulator output.

mod covariance;
mod empirical;
mod fclt;
mod sampling;

use thiserror::Error;

pub use covariance::{eval_noise_covariance, BlockId, CovarianceModel, NoiseCovariance, PairBlock};
pub use empirical::{
    center_and_rescale, empirical_noise_check, moment_stats, variance_scaling_check, CovarianceCheck,
    EmpiricalFluctuations, MomentStats, NoiseCheckReport, Reference, VarianceRatioReport,
};
pub use fclt::{solve_fclt, write_samples_csv, FluctuationSample};
pub use sampling::{sample_limit_noises, NoiseRealization, NoiseSampler, PairNoise, RIDGE_FACTOR};

#[derive(Debug, Error)]
pub enum FluctError {
    #[error("time {t} is not a point of the mean-field grid")]
    TimesOutsideGrid { t: f64 },
    #[error("covariance block {block} is not positive semidefinite (most negative eigenvalue {min_eigenvalue:e}, ridge {ridge:e})")]
    NotPSDAfterRidge {
        block: BlockId,
        min_eigenvalue: f64,
        ridge: f64,
    },
    #[error("linear step solve failed at step {step} (residual {residual:e})")]
    FixedPointDiverged { step: usize, residual: f64 },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
