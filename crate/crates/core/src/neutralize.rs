//! Neutralization of good-alpha holdings against dead-alpha factors.
//!
//! Each holding vector is replaced by its residual after projecting out the
//! factor columns, `r = P - V (Vᵀ P)`, and rescaled to unit L1 norm. With
//! orthonormal `V` this is the residual of an intercept-free regression of
//! `P` on the factors.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::factor_extract::{extract_factors, FactorSet, RoundingMode};
use crate::ingest::PositionPanel;

/// Residual L1 norm below which a holding counts as lying in the factor span.
pub const SPANNED_THRESHOLD: f64 = 1e-12;

/// A good alpha that could not be neutralized.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Exclusion {
    pub alpha: String,
    pub reason: String,
}

/// Factor-neutral holdings with unit L1 norm per alpha.
#[derive(Debug, Clone, PartialEq)]
pub struct NeutralizedHoldings {
    pub alphas: Vec<String>,
    pub stocks: Vec<String>,
    /// `N_good × M`.
    pub values: DMatrix<f64>,
    /// Renormalization factors `1 / sum_A |r_iA|`.
    pub gammas: Vec<f64>,
    pub excluded: Vec<Exclusion>,
}

/// Neutralizes each row of `good` (`N_good × M`, rows labeled by `alphas`).
pub fn neutralize_holdings(
    alphas: &[String],
    good: &DMatrix<f64>,
    factors: &FactorSet,
) -> Result<NeutralizedHoldings> {
    neutralize_holdings_with(alphas, good, factors, SPANNED_THRESHOLD)
}

pub fn neutralize_holdings_with(
    alphas: &[String],
    good: &DMatrix<f64>,
    factors: &FactorSet,
    spanned_threshold: f64,
) -> Result<NeutralizedHoldings> {
    if good.nrows() == 0 {
        return Err(Error::NoGoodAlphas);
    }
    if alphas.len() != good.nrows() {
        return Err(Error::Index(format!(
            "{} alpha ids for {} holding rows",
            alphas.len(),
            good.nrows()
        )));
    }
    if good.ncols() != factors.stocks.len() {
        return Err(Error::Index(format!(
            "holdings cover {} stocks, factors cover {}",
            good.ncols(),
            factors.stocks.len()
        )));
    }

    let v = &factors.components;
    let residual = good - (good * v) * v.transpose();

    let mut kept = Vec::new();
    let mut gammas = Vec::new();
    let mut excluded = Vec::new();
    for (i, row) in residual.row_iter().enumerate() {
        let l1: f64 = row.iter().map(|x| x.abs()).sum();
        if good.row(i).iter().all(|&x| x == 0.0) {
            excluded.push(Exclusion {
                alpha: alphas[i].clone(),
                reason: "no positions on the neutralization day".into(),
            });
        } else if l1 < spanned_threshold {
            excluded.push(Exclusion {
                alpha: alphas[i].clone(),
                reason: "fully spanned by dead directions".into(),
            });
        } else {
            kept.push(i);
            gammas.push(1.0 / l1);
        }
    }
    for e in &excluded {
        log::warn!("alpha '{}' excluded: {}", e.alpha, e.reason);
    }

    let values = DMatrix::from_fn(kept.len(), good.ncols(), |r, a| {
        residual[(kept[r], a)] * gammas[r]
    });
    Ok(NeutralizedHoldings {
        alphas: kept.iter().map(|&i| alphas[i].clone()).collect(),
        stocks: factors.stocks.clone(),
        values,
        gammas,
        excluded,
    })
}

/// Neutralized holdings together with the factors they were neutralized against.
#[derive(Debug, Clone, PartialEq)]
pub struct DeadAlphasOutput {
    pub holdings: NeutralizedHoldings,
    pub factors: FactorSet,
}

impl DeadAlphasOutput {
    /// Neutralized holdings stacked above `Vᵀ`: an `(N_good + K) × M` matrix.
    pub fn stacked(&self) -> DMatrix<f64> {
        let (n, k) = (self.holdings.values.nrows(), self.factors.k);
        let m = self.holdings.values.ncols();
        DMatrix::from_fn(n + k, m, |r, a| {
            if r < n {
                self.holdings.values[(r, a)]
            } else {
                self.factors.components[(a, r - n)]
            }
        })
    }
}

/// Factors from dead alphas over days `s..s+d`, then neutralization of the
/// good holdings (`N_good × M`, same stock order as `dead_panel`).
pub fn dead_alphas_pipeline(
    good_alphas: &[String],
    good: &DMatrix<f64>,
    dead_panel: &PositionPanel,
    dead: &[usize],
    s: usize,
    d: usize,
    mode: RoundingMode,
) -> Result<DeadAlphasOutput> {
    if good.nrows() == 0 {
        return Err(Error::NoGoodAlphas);
    }
    let factors = extract_factors(dead_panel, dead, s, d, mode)?;
    let holdings = neutralize_holdings(good_alphas, good, &factors)?;
    Ok(DeadAlphasOutput { holdings, factors })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

/// Writes `alpha_id,symbol,position`, `alpha_id,gamma` and
/// `alpha_id,reason` files.
pub fn write_holdings(
    holdings: &NeutralizedHoldings,
    positions_path: impl AsRef<Path>,
    gammas_path: impl AsRef<Path>,
    excluded_path: impl AsRef<Path>,
) -> Result<()> {
    let path = positions_path.as_ref();
    let io = |e| Error::io(path, e);
    let mut out = create(path)?;
    writeln!(out, "alpha_id,symbol,position").map_err(io)?;
    for (i, alpha) in holdings.alphas.iter().enumerate() {
        for (a, stock) in holdings.stocks.iter().enumerate() {
            writeln!(out, "{alpha},{stock},{}", holdings.values[(i, a)]).map_err(io)?;
        }
    }
    out.flush().map_err(io)?;

    let path = gammas_path.as_ref();
    let io = |e| Error::io(path, e);
    let mut out = create(path)?;
    writeln!(out, "alpha_id,gamma").map_err(io)?;
    for (alpha, gamma) in holdings.alphas.iter().zip(&holdings.gammas) {
        writeln!(out, "{alpha},{gamma}").map_err(io)?;
    }
    out.flush().map_err(io)?;

    let path = excluded_path.as_ref();
    let io = |e| Error::io(path, e);
    let mut out = create(path)?;
    writeln!(out, "alpha_id,reason").map_err(io)?;
    for e in &holdings.excluded {
        writeln!(out, "{},\"{}\"", e.alpha, e.reason.replace('"', "\"\"")).map_err(io)?;
    }
    out.flush().map_err(io)
}
