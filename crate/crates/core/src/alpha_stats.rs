//! Realized and expected alpha returns, moving volatility, and dead/good
//! classification.
//!
//! Day index 0 is the most recent day. The expected return on day `s`
//! averages realized returns over the `d` strictly prior days
//! `s+1..=s+d`, so it is defined for `s < T - d`. The volatility on day `s`
//! is the sample standard deviation of expected returns over `s+1..=s+d`.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::{format_date, PositionPanel, ReturnPanel};

/// `ρ_is = sum_A P_iAs R_As`, as an `N × T` matrix over the position panel's
/// alphas and dates.
pub fn realized_returns(positions: &PositionPanel, returns: &ReturnPanel) -> Result<DMatrix<f64>> {
    let r = returns.aligned(positions.stocks(), positions.dates())?;
    let (n, t) = (positions.n_alphas(), positions.n_days());
    Ok(DMatrix::from_fn(n, t, |i, s| {
        positions
            .row(i, s)
            .iter()
            .zip(r.column(s).iter())
            .map(|(p, x)| p * x)
            .sum()
    }))
}

fn window_mean(row: impl Iterator<Item = f64>, d: usize) -> f64 {
    row.sum::<f64>() / d as f64
}

/// Moving-average expected returns `η_is = (1/d) sum_{s'=s+1}^{s+d} ρ_is'`.
///
/// Returns an `N × (T - d)` matrix.
pub fn expected_returns(realized: &DMatrix<f64>, d: usize) -> Result<DMatrix<f64>> {
    let t = realized.ncols();
    if d == 0 {
        return Err(Error::Config("window length d must be positive".into()));
    }
    if t <= d {
        return Err(Error::InsufficientHistory {
            required: d + 1,
            actual: t,
        });
    }
    Ok(DMatrix::from_fn(realized.nrows(), t - d, |i, s| {
        window_mean((s + 1..=s + d).map(|k| realized[(i, k)]), d)
    }))
}

/// Moving serial volatility of expected returns over the `d` prior days.
///
/// Returns `(σ, η̄)`, both `N × (T' - d)` where `T'` is the number of days
/// with a defined expected return.
pub fn moving_volatility(
    expected: &DMatrix<f64>,
    d: usize,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if d < 2 {
        return Err(Error::Config(format!(
            "volatility window must be at least 2, got {d}"
        )));
    }
    let t = expected.ncols();
    if t <= d {
        return Err(Error::InsufficientHistory {
            required: d + 1,
            actual: t,
        });
    }
    let (n, tv) = (expected.nrows(), t - d);
    let mean = DMatrix::from_fn(n, tv, |i, s| {
        window_mean((s + 1..=s + d).map(|k| expected[(i, k)]), d)
    });
    let sigma = DMatrix::from_fn(n, tv, |i, s| {
        // Deviations are taken from the first window value so that a flat
        // window gives exactly zero.
        let x0 = expected[(i, s + 1)];
        let shift = window_mean((s + 1..=s + d).map(|k| expected[(i, k)] - x0), d);
        let ss: f64 = (s + 1..=s + d)
            .map(|k| (expected[(i, k)] - x0 - shift).powi(2))
            .sum();
        (ss / (d - 1) as f64).sqrt()
    });
    Ok((sigma, mean))
}

/// Sharpe ratio `η/σ`; when `σ = 0` it is `±∞` by the sign of `η`, or 0.
pub fn sharpe_ratio(eta: f64, sigma: f64) -> f64 {
    if sigma > 0.0 {
        eta / sigma
    } else if eta > 0.0 {
        f64::INFINITY
    } else if eta < 0.0 {
        f64::NEG_INFINITY
    } else {
        0.0
    }
}

/// Per-alpha return statistics over the panel's dates.
#[derive(Debug, Clone)]
pub struct AlphaStats {
    pub alphas: Vec<String>,
    pub dates: Vec<NaiveDate>,
    /// `N × T` realized returns.
    pub realized: DMatrix<f64>,
    /// `N × (T - d)` expected returns.
    pub expected: DMatrix<f64>,
    /// Volatility of expected returns; columns are the days where it is defined.
    pub volatility: DMatrix<f64>,
    pub window_mean: DMatrix<f64>,
}

impl AlphaStats {
    /// `d` is the expected-return window, `d_vol` the volatility window.
    pub fn compute(
        positions: &PositionPanel,
        returns: &ReturnPanel,
        d: usize,
        d_vol: usize,
    ) -> Result<Self> {
        let realized = realized_returns(positions, returns)?;
        let t = realized.ncols();
        let expected = expected_returns(&realized, d)?;
        let (volatility, window_mean) =
            moving_volatility(&expected, d_vol).map_err(|e| match e {
                Error::InsufficientHistory { .. } => Error::InsufficientHistory {
                    required: d + d_vol + 1,
                    actual: t,
                },
                other => other,
            })?;
        Ok(Self {
            alphas: positions.alphas().to_vec(),
            dates: positions.dates().to_vec(),
            realized,
            expected,
            volatility,
            window_mean,
        })
    }

    /// Number of days for which both `η` and `σ` are defined.
    pub fn n_classifiable_days(&self) -> usize {
        self.volatility.ncols()
    }

    pub fn sharpe(&self, i: usize, s: usize) -> Option<f64> {
        (s < self.n_classifiable_days())
            .then(|| sharpe_ratio(self.expected[(i, s)], self.volatility[(i, s)]))
    }
}

/// Thresholds for labeling alphas.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassificationConfig {
    /// Expected-return window.
    pub d: usize,
    /// Volatility window; defaults to `d`.
    pub d_vol: Option<usize>,
    pub eta_min: f64,
    pub eta_dead: f64,
    pub s_min: f64,
    pub s_dead: f64,
}

impl ClassificationConfig {
    pub fn volatility_window(&self) -> usize {
        self.d_vol.unwrap_or(self.d)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 2 || self.volatility_window() < 2 {
            return Err(Error::Config(format!(
                "windows must be at least 2 days (d={}, d_vol={})",
                self.d,
                self.volatility_window()
            )));
        }
        let all = [self.eta_min, self.eta_dead, self.s_min, self.s_dead];
        if all.iter().any(|x| x.is_nan()) {
            return Err(Error::Config("thresholds must not be NaN".into()));
        }
        if self.eta_dead > self.eta_min {
            return Err(Error::Config(format!(
                "eta_dead ({}) must not exceed eta_min ({})",
                self.eta_dead, self.eta_min
            )));
        }
        if self.s_dead > self.s_min {
            return Err(Error::Config(format!(
                "s_dead ({}) must not exceed s_min ({})",
                self.s_dead, self.s_min
            )));
        }
        Ok(())
    }

    /// Labels a single `(η, σ)` pair.
    pub fn label(&self, eta: f64, sigma: f64) -> AlphaLabel {
        let sharpe = sharpe_ratio(eta, sigma);
        if eta < self.eta_dead && sharpe < self.s_dead {
            AlphaLabel::Dead
        } else if eta >= self.eta_min && sharpe >= self.s_min {
            AlphaLabel::Good
        } else {
            AlphaLabel::Indeterminate
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AlphaLabel {
    Dead,
    Good,
    Indeterminate,
}

impl AlphaLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Dead => "dead",
            Self::Good => "good",
            Self::Indeterminate => "indeterminate",
        }
    }
}

impl fmt::Display for AlphaLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AlphaLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dead" => Ok(Self::Dead),
            "good" => Ok(Self::Good),
            "indeterminate" => Ok(Self::Indeterminate),
            other => Err(Error::Validation(format!("unknown label '{other}'"))),
        }
    }
}

/// Labels for every alpha on every classifiable day.
#[derive(Debug, Clone, PartialEq)]
pub struct Labels {
    n_alphas: usize,
    n_days: usize,
    // alpha-major
    labels: Vec<AlphaLabel>,
}

impl Labels {
    /// `None` on days where statistics are undefined.
    pub fn get(&self, i: usize, s: usize) -> Option<AlphaLabel> {
        (i < self.n_alphas && s < self.n_days).then(|| self.labels[i * self.n_days + s])
    }

    pub fn n_days(&self) -> usize {
        self.n_days
    }

    /// Indices of alphas carrying `label` on day `s`.
    pub fn with_label(&self, label: AlphaLabel, s: usize) -> Vec<usize> {
        (0..self.n_alphas)
            .filter(|&i| self.get(i, s) == Some(label))
            .collect()
    }
}

/// Labels each `(alpha, day)` where `η` and `σ` are both defined.
///
/// Dead: `η < eta_dead` and `η/σ < s_dead`. Good: `η ≥ eta_min` and
/// `η/σ ≥ s_min`. Anything else is indeterminate.
pub fn classify(stats: &AlphaStats, cfg: &ClassificationConfig) -> Result<Labels> {
    cfg.validate()?;
    let (n, t) = (stats.alphas.len(), stats.n_classifiable_days());
    let labels = (0..n)
        .flat_map(|i| (0..t).map(move |s| (i, s)))
        .map(|(i, s)| cfg.label(stats.expected[(i, s)], stats.volatility[(i, s)]))
        .collect();
    Ok(Labels {
        n_alphas: n,
        n_days: t,
        labels,
    })
}

/// Writes `date,alpha_id,realized,expected,volatility,sharpe,label`; cells
/// are empty where a statistic is undefined.
pub fn write_stats(stats: &AlphaStats, labels: &Labels, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(out, "date,alpha_id,realized,expected,volatility,sharpe,label").map_err(io)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for (s, date) in stats.dates.iter().enumerate() {
        let date = format_date(*date);
        for (i, alpha) in stats.alphas.iter().enumerate() {
            let expected = (s < stats.expected.ncols()).then(|| stats.expected[(i, s)]);
            let vol = (s < stats.volatility.ncols()).then(|| stats.volatility[(i, s)]);
            writeln!(
                out,
                "{date},{alpha},{},{},{},{},{}",
                stats.realized[(i, s)],
                opt(expected),
                opt(vol),
                opt(stats.sharpe(i, s)),
                labels.get(i, s).map(AlphaLabel::as_str).unwrap_or(""),
            )
            .map_err(io)?;
        }
    }
    out.flush().map_err(io)
}
