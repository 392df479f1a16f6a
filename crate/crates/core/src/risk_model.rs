//! Multifactor risk-model covariance with dead-alpha factors as loadings.
//!
//! `Φ = diag(ξ²) + Ω φ Ωᵀ`, where `ξ` is the specific risk, `Ω` the factor
//! loadings and `φ` the factor covariance. Unconstrained mean-variance
//! weights `w ∝ Φ⁻¹ e` become exactly neutral to the factor columns as
//! `ξ → 0`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::factor_extract::FactorSet;
use crate::ingest::ReturnPanel;

/// Cosine above which an appended loading column duplicates an existing one.
pub const DUPLICATE_COSINE: f64 = 1.0 - 1e-6;

/// Largest acceptable condition number of `Φ` for a weight solve.
pub const MAX_CONDITION: f64 = 1e12;

const SYMMETRY_TOLERANCE: f64 = 1e-12;
const PSD_TOLERANCE: f64 = 1e-10;

/// `M × F` factor loadings over a named stock universe.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorLoadings {
    pub stocks: Vec<String>,
    pub values: DMatrix<f64>,
}

impl FactorLoadings {
    /// Loadings with no factors.
    pub fn empty(stocks: Vec<String>) -> Self {
        let m = stocks.len();
        Self {
            stocks,
            values: DMatrix::zeros(m, 0),
        }
    }
}

/// An appended column nearly parallel to an existing one.
#[derive(Debug, Clone, PartialEq)]
pub struct DuplicateLoading {
    /// Index of the appended column in the augmented matrix.
    pub column: usize,
    /// Index of the existing column it duplicates.
    pub existing: usize,
    pub cosine: f64,
}

/// Appends the factor components as loading columns after `base`.
pub fn augment_loadings(
    base: &FactorLoadings,
    factors: &FactorSet,
) -> Result<(FactorLoadings, Vec<DuplicateLoading>)> {
    if base.stocks != factors.stocks {
        return Err(Error::Index(
            "loading and factor stock universes differ".into(),
        ));
    }
    let (m, f0) = base.values.shape();
    let k = factors.k;
    let mut values = DMatrix::zeros(m, f0 + k);
    values.columns_mut(0, f0).copy_from(&base.values);
    values.columns_mut(f0, k).copy_from(&factors.components);

    let mut duplicates = Vec::new();
    for new in f0..f0 + k {
        let v = values.column(new);
        for old in 0..new {
            let u = values.column(old);
            let denom = u.norm() * v.norm();
            if denom == 0.0 {
                continue;
            }
            let cosine = u.dot(&v).abs() / denom;
            if cosine > DUPLICATE_COSINE {
                duplicates.push(DuplicateLoading {
                    column: new,
                    existing: old,
                    cosine,
                });
            }
        }
    }
    for dup in &duplicates {
        log::warn!(
            "loading column {} duplicates column {} (|cos| = {})",
            dup.column,
            dup.existing,
            dup.cosine
        );
    }
    Ok((
        FactorLoadings {
            stocks: base.stocks.clone(),
            values,
        },
        duplicates,
    ))
}

/// Assembled risk model.
#[derive(Debug, Clone)]
pub struct RiskModel {
    pub stocks: Vec<String>,
    pub specific_risk: DVector<f64>,
    pub loadings: DMatrix<f64>,
    pub factor_cov: DMatrix<f64>,
    pub assembled: DMatrix<f64>,
    cholesky: Cholesky<f64, Dyn>,
}

fn check_symmetric_psd(name: &str, m: &DMatrix<f64>) -> Result<()> {
    let scale = m.amax();
    if (m - m.transpose()).amax() > SYMMETRY_TOLERANCE * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::Validation(format!("{name} is not symmetric")));
    }
    if m.nrows() == 0 {
        return Ok(());
    }
    let eig = m.clone().symmetric_eigenvalues();
    let max = eig.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    let min = eig.min();
    if min < -PSD_TOLERANCE * max {
        return Err(Error::Validation(format!(
            "{name} is not positive semi-definite (min eigenvalue {min:e})"
        )));
    }
    Ok(())
}

/// `Φ_AB = ξ_A² δ_AB + sum_{μν} Ω_Aμ φ_μν Ω_Bν`.
pub fn assemble_covariance(
    stocks: Vec<String>,
    specific_risk: DVector<f64>,
    loadings: DMatrix<f64>,
    factor_cov: DMatrix<f64>,
) -> Result<RiskModel> {
    let m = stocks.len();
    if specific_risk.len() != m || loadings.nrows() != m {
        return Err(Error::Index(format!(
            "{m} stocks but {} specific risks and {} loading rows",
            specific_risk.len(),
            loadings.nrows()
        )));
    }
    let f = loadings.ncols();
    if factor_cov.shape() != (f, f) {
        return Err(Error::Index(format!(
            "factor covariance is {:?} for {f} factors",
            factor_cov.shape()
        )));
    }
    if let Some((a, x)) = specific_risk
        .iter()
        .enumerate()
        .find(|(_, x)| !(**x > 0.0 && x.is_finite()))
    {
        return Err(Error::Validation(format!(
            "specific risk of '{}' must be positive, got {x}",
            stocks[a]
        )));
    }
    check_symmetric_psd("factor covariance", &factor_cov)?;

    let mut assembled = &loadings * &factor_cov * loadings.transpose();
    for a in 0..m {
        assembled[(a, a)] += specific_risk[a] * specific_risk[a];
        for b in a + 1..m {
            let v = 0.5 * (assembled[(a, b)] + assembled[(b, a)]);
            assembled[(a, b)] = v;
            assembled[(b, a)] = v;
        }
    }
    let cholesky = Cholesky::new(assembled.clone()).ok_or_else(|| {
        Error::Numerical("risk-model covariance is not positive definite".into())
    })?;
    Ok(RiskModel {
        stocks,
        specific_risk,
        loadings,
        factor_cov,
        assembled,
        cholesky,
    })
}

/// `w = Φ⁻¹ e` rescaled to unit L1 norm.
pub fn mean_variance_weights(model: &RiskModel, expected: &DVector<f64>) -> Result<DVector<f64>> {
    if expected.len() != model.stocks.len() {
        return Err(Error::Index(format!(
            "{} expected returns for {} stocks",
            expected.len(),
            model.stocks.len()
        )));
    }
    if expected.iter().all(|&x| x == 0.0) {
        return Err(Error::ZeroExpectedReturns);
    }
    let eig = model.assembled.clone().symmetric_eigenvalues();
    let condition = eig.max() / eig.min();
    if !(condition.is_finite() && condition > 0.0 && condition <= MAX_CONDITION) {
        return Err(Error::Numerical(format!(
            "risk-model covariance is ill-conditioned (condition {condition:e})"
        )));
    }
    let w = model.cholesky.solve(expected);
    let l1: f64 = w.iter().map(|x| x.abs()).sum();
    if !(l1 > 0.0 && l1.is_finite()) {
        return Err(Error::Numerical("weight solve produced a degenerate vector".into()));
    }
    Ok(w / l1)
}

/// Exposure of portfolio `weights` to each factor column, `Vᵀw`.
pub fn factor_exposures(factors: &FactorSet, weights: &DVector<f64>) -> DVector<f64> {
    factors.components.tr_mul(weights)
}

/// Default specific risk: `scale` times each stock's sample volatility over
/// the `d` most recent days.
pub fn specific_risk_from_returns(
    returns: &ReturnPanel,
    stocks: &[String],
    d: usize,
    scale: f64,
) -> Result<DVector<f64>> {
    if d < 2 {
        return Err(Error::Config("specific-risk window must be at least 2".into()));
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::Config(format!("specific_risk_scale must be positive, got {scale}")));
    }
    let dates = returns.dates();
    if dates.len() < d {
        return Err(Error::InsufficientHistory {
            required: d,
            actual: dates.len(),
        });
    }
    let r = returns.aligned(stocks, &dates[..d])?;
    let xi = DVector::from_fn(stocks.len(), |a, _| {
        let row = r.row(a);
        let mean = row.mean();
        let var = row.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (d - 1) as f64;
        scale * var.sqrt()
    });
    if let Some(a) = xi.iter().position(|&x| !(x > 0.0)) {
        return Err(Error::Validation(format!(
            "stock '{}' has zero return volatility over the last {d} days",
            stocks[a]
        )));
    }
    Ok(xi)
}

/// Source of the factor covariance for dead-alpha factor columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FactorCovMode {
    /// `diag(λ_1..λ_K)` from the Gram spectrum.
    #[default]
    Eigenvalues,
    Identity,
    /// Read from a `v1,...,vK` CSV.
    File,
}

impl FromStr for FactorCovMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eigenvalues" => Ok(Self::Eigenvalues),
            "identity" => Ok(Self::Identity),
            "file" => Ok(Self::File),
            other => Err(Error::Config(format!("unknown factor_cov_mode '{other}'"))),
        }
    }
}

/// Factor covariance for `factors` under `mode`; `file` is required for
/// [`FactorCovMode::File`].
pub fn factor_covariance(
    factors: &FactorSet,
    mode: FactorCovMode,
    file: Option<&Path>,
) -> Result<DMatrix<f64>> {
    let k = factors.k;
    match mode {
        FactorCovMode::Eigenvalues => Ok(DMatrix::from_diagonal(&DVector::from_column_slice(
            &factors.eigenvalues,
        ))),
        FactorCovMode::Identity => Ok(DMatrix::identity(k, k)),
        FactorCovMode::File => {
            let path = file.ok_or_else(|| {
                Error::Config("factor_cov_mode = file needs a factor_cov path".into())
            })?;
            let cov = load_matrix(path)?;
            if cov.shape() != (k, k) {
                return Err(Error::Index(format!(
                    "factor covariance file is {:?}, expected {k}×{k}",
                    cov.shape()
                )));
            }
            Ok(cov)
        }
    }
}

/// Reads a dense matrix from CSV with a header row.
fn load_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let shown = path.display().to_string();
    let mut rows = Vec::new();
    for (ln, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|x| {
                x.trim().parse::<f64>().map_err(|e| Error::Format {
                    path: shown.clone(),
                    line: ln as u64 + 1,
                    message: format!("bad number '{x}': {e}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    let ncols = rows.first().map(Vec::len).unwrap_or(0);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Format {
            path: shown,
            line: 0,
            message: "ragged matrix rows".into(),
        });
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |r, c| rows[r][c]))
}

/// Reads `symbol,expected_return` and orders it by `stocks`.
pub fn load_expected_returns(path: &Path, stocks: &[String]) -> Result<DVector<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let shown = path.display().to_string();
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("symbol,expected_return") {
        return Err(Error::Format {
            path: shown,
            line: 1,
            message: "expected header 'symbol,expected_return'".into(),
        });
    }
    let mut map = std::collections::HashMap::new();
    for (ln, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (sym, val) = line.split_once(',').ok_or_else(|| Error::Format {
            path: shown.clone(),
            line: ln as u64 + 2,
            message: "expected two fields".into(),
        })?;
        let v = val.trim().parse::<f64>().map_err(|e| Error::Format {
            path: shown.clone(),
            line: ln as u64 + 2,
            message: format!("bad number '{val}': {e}"),
        })?;
        if !v.is_finite() {
            return Err(Error::Validation(format!("non-finite expected return for '{sym}'")));
        }
        map.insert(sym.trim().to_string(), v);
    }
    stocks
        .iter()
        .map(|s| {
            map.get(s)
                .copied()
                .ok_or_else(|| Error::Index(format!("no expected return for '{s}'")))
        })
        .collect::<Result<Vec<_>>>()
        .map(DVector::from_vec)
}

/// Writes `symbol,weight` and `factor,exposure`.
pub fn write_weights(
    stocks: &[String],
    weights: &DVector<f64>,
    exposures: &DVector<f64>,
    weights_path: impl AsRef<Path>,
    exposures_path: impl AsRef<Path>,
) -> Result<()> {
    let path = weights_path.as_ref();
    let io = |e| Error::io(path, e);
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    writeln!(out, "symbol,weight").map_err(io)?;
    for (s, w) in stocks.iter().zip(weights.iter()) {
        writeln!(out, "{s},{w}").map_err(io)?;
    }
    out.flush().map_err(io)?;

    let path = exposures_path.as_ref();
    let io = |e| Error::io(path, e);
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    writeln!(out, "factor,exposure").map_err(io)?;
    for (k, x) in exposures.iter().enumerate() {
        writeln!(out, "v{},{x}", k + 1).map_err(io)?;
    }
    out.flush().map_err(io)
}
