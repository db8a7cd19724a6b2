//! Waiting-time laws for spontaneous stifling.
//!
//! Every law is sampled by inverse transform from exactly one uniform draw,
//! so two laws driven by the same stream stay aligned draw for draw.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LawError {
    #[error("invalid parameter for {law}: {detail}")]
    InvalidParameter { law: &'static str, detail: String },
    #[error("cannot parse stifling law `{0}`")]
    Parse(String),
}

/// Distribution of the spontaneous stifling time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum StiflingLaw {
    Exponential { rate: f64 },
    Weibull { shape: f64, scale: f64 },
    /// Cauchy(loc, scale) conditioned on being non-negative.
    TruncatedCauchy { loc: f64, scale: f64 },
    Deterministic { t0: f64 },
    /// No spontaneous stifling; the classic Maki-Thompson dynamics.
    Never,
    /// Stifles at the moment of becoming a spreader.
    Immediate,
}

fn cauchy_cdf(z: f64) -> f64 {
    0.5 + z.atan() / PI
}

impl StiflingLaw {
    pub fn exponential(rate: f64) -> Result<Self, LawError> {
        Self::Exponential { rate }.validated()
    }

    pub fn weibull(shape: f64, scale: f64) -> Result<Self, LawError> {
        Self::Weibull { shape, scale }.validated()
    }

    pub fn truncated_cauchy(loc: f64, scale: f64) -> Result<Self, LawError> {
        Self::TruncatedCauchy { loc, scale }.validated()
    }

    pub fn deterministic(t0: f64) -> Result<Self, LawError> {
        Self::Deterministic { t0 }.validated()
    }

    /// Checks parameters, returning the law unchanged when they are valid.
    pub fn validated(self) -> Result<Self, LawError> {
        let positive = |law, name, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(LawError::InvalidParameter {
                    law,
                    detail: format!("{name} must be positive and finite, got {v}"),
                })
            }
        };
        match self {
            Self::Exponential { rate } => positive("exponential", "rate", rate)?,
            Self::Weibull { shape, scale } => {
                positive("weibull", "shape", shape)?;
                positive("weibull", "scale", scale)?;
            }
            Self::TruncatedCauchy { loc, scale } => {
                positive("truncated_cauchy", "scale", scale)?;
                if !loc.is_finite() {
                    return Err(LawError::InvalidParameter {
                        law: "truncated_cauchy",
                        detail: format!("loc must be finite, got {loc}"),
                    });
                }
            }
            Self::Deterministic { t0 } => {
                if !(t0.is_finite() && t0 >= 0.0) {
                    return Err(LawError::InvalidParameter {
                        law: "deterministic",
                        detail: format!("t0 must be finite and non-negative, got {t0}"),
                    });
                }
            }
            Self::Never | Self::Immediate => {}
        }
        Ok(self)
    }

    /// F(t) = P(eta <= t).
    pub fn cdf(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        match *self {
            Self::Exponential { rate } => -(-rate * t).exp_m1(),
            Self::Weibull { shape, scale } => -(-(t / scale).powf(shape)).exp_m1(),
            Self::TruncatedCauchy { loc, scale } => {
                let c0 = cauchy_cdf(-loc / scale);
                ((cauchy_cdf((t - loc) / scale) - c0) / (1.0 - c0)).clamp(0.0, 1.0)
            }
            Self::Deterministic { t0 } => {
                if t >= t0 {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Never => 0.0,
            Self::Immediate => 1.0,
        }
    }

    /// F^c(t) = 1 - F(t).
    pub fn survival(&self, t: f64) -> f64 {
        1.0 - self.cdf(t)
    }

    /// Inverse of the cdf on [0, 1); `u` is a uniform draw.
    pub fn quantile(&self, u: f64) -> f64 {
        match *self {
            Self::Exponential { rate } => -(-u).ln_1p() / rate,
            Self::Weibull { shape, scale } => scale * (-(-u).ln_1p()).powf(1.0 / shape),
            Self::TruncatedCauchy { loc, scale } => {
                let c0 = cauchy_cdf(-loc / scale);
                let c = c0 + u * (1.0 - c0);
                (loc + scale * (PI * (c - 0.5)).tan()).max(0.0)
            }
            Self::Deterministic { t0 } => t0,
            Self::Never => f64::INFINITY,
            Self::Immediate => 0.0,
        }
    }

    /// Draws a stifling time. Always consumes exactly one `f64` from `rng`.
    /// Returns `f64::INFINITY` for [`StiflingLaw::Never`].
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        self.quantile(u)
    }

    /// Rate of the exponential law, `Some(0.0)` for `Never`; `None` for laws
    /// without the memoryless property.
    pub fn markov_rate(&self) -> Option<f64> {
        match *self {
            Self::Exponential { rate } => Some(rate),
            Self::Never => Some(0.0),
            _ => None,
        }
    }

    /// Law of `eta / c`: the same waiting time on a clock running `c` times
    /// faster.
    pub fn time_scaled(&self, c: f64) -> Self {
        match *self {
            Self::Exponential { rate } => Self::Exponential { rate: rate * c },
            Self::Weibull { shape, scale } => Self::Weibull {
                shape,
                scale: scale / c,
            },
            Self::TruncatedCauchy { loc, scale } => Self::TruncatedCauchy {
                loc: loc / c,
                scale: scale / c,
            },
            Self::Deterministic { t0 } => Self::Deterministic { t0: t0 / c },
            Self::Never => Self::Never,
            Self::Immediate => Self::Immediate,
        }
    }
}

impl fmt::Display for StiflingLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Exponential { rate } => write!(f, "exponential:{rate}"),
            Self::Weibull { shape, scale } => write!(f, "weibull:{shape}:{scale}"),
            Self::TruncatedCauchy { loc, scale } => write!(f, "cauchy:{loc}:{scale}"),
            Self::Deterministic { t0 } => write!(f, "deterministic:{t0}"),
            Self::Never => write!(f, "never"),
            Self::Immediate => write!(f, "immediate"),
        }
    }
}

impl FromStr for StiflingLaw {
    type Err = LawError;

    /// Short form used on the command line: `exponential:1`, `weibull:2:5`,
    /// `cauchy:4:1.4`, `deterministic:3.5`, `never`, `immediate`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || LawError::Parse(s.to_string());
        let mut parts = s.split(':');
        let name = parts.next().ok_or_else(bad)?;
        let nums: Vec<f64> = parts
            .map(|p| p.parse::<f64>().map_err(|_| bad()))
            .collect::<Result<_, _>>()?;
        let law = match (name, nums.as_slice()) {
            ("exponential" | "exp", [rate]) => Self::Exponential { rate: *rate },
            ("weibull", [shape, scale]) => Self::Weibull {
                shape: *shape,
                scale: *scale,
            },
            ("cauchy" | "truncated_cauchy", [loc, scale]) => Self::TruncatedCauchy {
                loc: *loc,
                scale: *scale,
            },
            ("deterministic", [t0]) => Self::Deterministic { t0: *t0 },
            ("never", []) => Self::Never,
            ("immediate", []) => Self::Immediate,
            _ => return Err(bad()),
        };
        law.validated()
    }
}
