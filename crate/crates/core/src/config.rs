//! Pipeline configuration: flat `key = value` text with `#` comments.
//!
//! ```text
//! positions = data/positions.csv
//! returns = data/returns.csv
//! out_dir = out
//! d = 10
//! eta_dead = 0.005
//! eta_min = 0.008
//! s_dead = 6
//! s_min = 8
//! rounding_mode = trunc
//! tol.l1 = 1e-8
//! ```
//!
//! Relative paths are resolved against the directory of the config file.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::alpha_stats::ClassificationConfig;
use crate::error::{Error, Result};
use crate::factor_extract::{RoundingMode, POSITIVITY_THRESHOLD};
use crate::ingest::L1_TOLERANCE;
use crate::neutralize::SPANNED_THRESHOLD;
use crate::risk_model::FactorCovMode;

/// Named numerical tolerances, overridable as `tol.<name>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    /// Position L1-norm validation.
    pub l1: f64,
    /// Relative eigenvalue positivity threshold.
    pub positivity: f64,
    /// Residual L1 norm below which a good alpha is fully spanned.
    pub spanned: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            l1: L1_TOLERANCE,
            positivity: POSITIVITY_THRESHOLD,
            spanned: SPANNED_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineConfig {
    pub positions: Option<PathBuf>,
    pub returns: Option<PathBuf>,
    pub out_dir: PathBuf,
    /// Expected-return window.
    pub d: usize,
    /// Gram averaging window; defaults to `d`.
    pub d_gram: Option<usize>,
    /// Volatility window; defaults to `d`.
    pub d_vol: Option<usize>,
    pub eta_min: f64,
    pub eta_dead: f64,
    pub s_min: f64,
    pub s_dead: f64,
    pub rounding_mode: RoundingMode,
    pub tolerances: Tolerances,
    pub seed: Option<u64>,
    /// Optional `symbol,expected_return` file; enables the risk-model step.
    pub expected_returns: Option<PathBuf>,
    pub specific_risk_scale: f64,
    pub factor_cov_mode: FactorCovMode,
    pub factor_cov: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            positions: None,
            returns: None,
            out_dir: PathBuf::from("out"),
            d: 10,
            d_gram: None,
            d_vol: None,
            eta_min: 0.0,
            eta_dead: 0.0,
            s_min: 0.0,
            s_dead: 0.0,
            rounding_mode: RoundingMode::Truncate,
            tolerances: Tolerances::default(),
            seed: None,
            expected_returns: None,
            specific_risk_scale: 1.0,
            factor_cov_mode: FactorCovMode::Eigenvalues,
            factor_cov: None,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| Error::Config(format!("bad value for '{key}': '{value}' ({e})")))
}

impl PipelineConfig {
    /// Parses config text. Paths stay as written.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut thresholds = [false; 4];
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected 'key = value'", ln + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "positions" => cfg.positions = Some(value.into()),
                "returns" => cfg.returns = Some(value.into()),
                "out_dir" => cfg.out_dir = value.into(),
                "d" => cfg.d = parse(key, value)?,
                "d_gram" => cfg.d_gram = Some(parse(key, value)?),
                "d_vol" => cfg.d_vol = Some(parse(key, value)?),
                "eta_min" => (cfg.eta_min, thresholds[0]) = (parse(key, value)?, true),
                "eta_dead" => (cfg.eta_dead, thresholds[1]) = (parse(key, value)?, true),
                "s_min" => (cfg.s_min, thresholds[2]) = (parse(key, value)?, true),
                "s_dead" => (cfg.s_dead, thresholds[3]) = (parse(key, value)?, true),
                "rounding_mode" | "mode" => cfg.rounding_mode = value.parse()?,
                "seed" => cfg.seed = Some(parse(key, value)?),
                "expected_returns" => cfg.expected_returns = Some(value.into()),
                "specific_risk_scale" => cfg.specific_risk_scale = parse(key, value)?,
                "factor_cov_mode" => cfg.factor_cov_mode = value.parse()?,
                "factor_cov" => cfg.factor_cov = Some(value.into()),
                "tol.l1" => cfg.tolerances.l1 = parse(key, value)?,
                "tol.positivity" => cfg.tolerances.positivity = parse(key, value)?,
                "tol.spanned" => cfg.tolerances.spanned = parse(key, value)?,
                other => {
                    return Err(Error::Config(format!(
                        "line {}: unknown key '{other}'",
                        ln + 1
                    )))
                }
            }
        }
        if let Some(missing) = ["eta_min", "eta_dead", "s_min", "s_dead"]
            .iter()
            .zip(thresholds)
            .find(|(_, set)| !set)
        {
            return Err(Error::Config(format!("missing required key '{}'", missing.0)));
        }
        Ok(cfg)
    }

    /// Reads and parses a config file, resolving relative paths against its
    /// directory.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        cfg.positions.as_mut().map(resolve);
        cfg.returns.as_mut().map(resolve);
        cfg.expected_returns.as_mut().map(resolve);
        cfg.factor_cov.as_mut().map(resolve);
        resolve(&mut cfg.out_dir);
        Ok(cfg)
    }

    pub fn gram_window(&self) -> usize {
        self.d_gram.unwrap_or(self.d)
    }

    pub fn classification(&self) -> ClassificationConfig {
        ClassificationConfig {
            d: self.d,
            d_vol: self.d_vol,
            eta_min: self.eta_min,
            eta_dead: self.eta_dead,
            s_min: self.s_min,
            s_dead: self.s_dead,
        }
    }

    /// Checks everything that can be checked without touching data.
    pub fn validate(&self) -> Result<()> {
        self.classification().validate()?;
        if self.gram_window() == 0 {
            return Err(Error::Config("d_gram must be positive".into()));
        }
        let t = self.tolerances;
        if [t.l1, t.positivity, t.spanned]
            .iter()
            .any(|x| !(*x >= 0.0 && x.is_finite()))
        {
            return Err(Error::Config("tolerances must be finite and nonnegative".into()));
        }
        if !(self.specific_risk_scale > 0.0 && self.specific_risk_scale.is_finite()) {
            return Err(Error::Config("specific_risk_scale must be positive".into()));
        }
        if self.factor_cov_mode == FactorCovMode::File && self.factor_cov.is_none() {
            return Err(Error::Config(
                "factor_cov_mode = file needs a factor_cov path".into(),
            ));
        }
        Ok(())
    }
}
