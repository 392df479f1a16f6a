//! Equity risk factors built from the positions of dead trading alphas.
//!
//! An alpha is labeled dead when its moving-average return and Sharpe ratio
//! both fall below configured floors. The leading principal components of
//! the dead-alpha position Gram matrix are kept as factors, with their count
//! set by the spectral-entropy effective rank. The factors can then be
//!
//! * projected out of the holdings of good alphas (least-squares residuals,
//!   rescaled to unit L1 norm), or
//! * used as loadings in a multifactor risk-model covariance.
//!
//! The modules follow the data flow: [`ingest`] loads position and return
//! panels, [`alpha_stats`] computes realized and expected alpha returns and
//! labels alphas dead or good, [`factor_extract`] produces a [`FactorSet`],
//! [`neutralize`] applies it to good holdings, and [`risk_model`] assembles
//! the covariance. [`pipeline`], [`config`] and [`synth`] back the CLI.

pub mod alpha_stats;
pub mod config;
pub mod error;
pub mod factor_extract;
pub mod ingest;
pub mod neutralize;
pub mod pipeline;
pub mod risk_model;
pub mod synth;

pub use alpha_stats::{AlphaLabel, AlphaStats, ClassificationConfig, Labels};
pub use error::{Error, Result};
pub use factor_extract::{FactorSet, GramMatrix, RoundingMode};
pub use ingest::{ConstraintMatrix, PositionPanel, ReturnPanel};
pub use neutralize::NeutralizedHoldings;
pub use risk_model::RiskModel;
