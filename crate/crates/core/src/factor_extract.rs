//! Risk directions from dead-alpha positions.
//!
//! The Gram matrix `X_AB = (1/d) sum_{s'} sum_{i in dead} P_iAs' P_iBs'` is
//! eigendecomposed and its leading `K` eigenvectors are kept, with `K`
//! taken from the effective rank (exponentiated spectral entropy) of the
//! positive spectrum.
//!
//! When the number of stacked position rows `n = |dead|·d` is smaller than
//! the number of stocks, the `n × n` matrix `B Bᵀ` is decomposed instead and
//! its eigenvectors are mapped back through `Bᵀ`.

use std::cmp::Ordering;
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::PositionPanel;

/// Eigenvalues at or below this fraction of the largest one are treated as zero.
pub const POSITIVITY_THRESHOLD: f64 = 1e-12;

/// Allowed negative eigenvalue, relative to the largest, for a PSD matrix.
const PSD_TOLERANCE: f64 = 1e-10;

/// Relative gap under which two eigenvalues are considered degenerate.
const DEGENERACY_TOLERANCE: f64 = 1e-10;

/// Relative gap under which two entry magnitudes tie for the sign convention.
const SIGN_TIE_TOLERANCE: f64 = 1e-10;

/// An eRank within this distance of an integer is taken to be that integer.
const ERANK_SNAP: f64 = 1e-9;

const MAX_EIGEN_ITERATIONS: usize = 100_000;

/// How the fractional effective rank becomes an integer `K`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RoundingMode {
    #[default]
    Truncate,
    Round,
}

impl fmt::Display for RoundingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Truncate => "truncate",
            Self::Round => "round",
        })
    }
}

impl FromStr for RoundingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "trunc" | "truncate" => Ok(Self::Truncate),
            "round" => Ok(Self::Round),
            other => Err(Error::Config(format!(
                "rounding mode must be 'trunc' or 'round', got '{other}'"
            ))),
        }
    }
}

/// Which eigensolver route produced a factor set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EigenPath {
    /// `M × M` Gram matrix.
    Direct,
    /// `n × n` Gram matrix of the stacked position rows.
    Dual,
}

/// Symmetric PSD Gram matrix of dead-alpha positions.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    pub stocks: Vec<String>,
    pub values: DMatrix<f64>,
    pub n_dead: usize,
    pub n_days: usize,
}

/// Stacked non-zero position rows of the dead alphas over days
/// `s..s+d`, unscaled. Errors if no row is non-zero.
fn stacked_rows(
    panel: &PositionPanel,
    dead: &[usize],
    s: usize,
    d: usize,
) -> Result<DMatrix<f64>> {
    if dead.is_empty() {
        return Err(Error::NoDeadAlphas);
    }
    if d == 0 {
        return Err(Error::Config("Gram window must be at least 1 day".into()));
    }
    if s + d > panel.n_days() {
        return Err(Error::InsufficientHistory {
            required: s + d,
            actual: panel.n_days(),
        });
    }
    if let Some(&i) = dead.iter().find(|&&i| i >= panel.n_alphas()) {
        return Err(Error::Index(format!("dead alpha index {i} out of range")));
    }
    let rows: Vec<(usize, usize)> = (s..s + d)
        .flat_map(|day| dead.iter().map(move |&i| (i, day)))
        .filter(|&(i, day)| !panel.is_zero_row(i, day))
        .collect();
    if rows.is_empty() {
        return Err(Error::NoDeadAlphas);
    }
    Ok(DMatrix::from_fn(rows.len(), panel.n_stocks(), |r, a| {
        let (i, day) = rows[r];
        panel.get(i, a, day)
    }))
}

/// `X_AB = sum_{i in dead} P_iAs P_iBs` on day `s`.
pub fn build_gram(panel: &PositionPanel, dead: &[usize], s: usize) -> Result<GramMatrix> {
    build_averaged_gram(panel, dead, s, 1)
}

/// Gram matrix averaged over days `s..s+d` (the window includes day `s`).
///
/// All-zero rows contribute nothing and are skipped.
pub fn build_averaged_gram(
    panel: &PositionPanel,
    dead: &[usize],
    s: usize,
    d: usize,
) -> Result<GramMatrix> {
    let stacked = stacked_rows(panel, dead, s, d)?;
    let mut values = stacked.tr_mul(&stacked) / d as f64;
    // tr_mul is symmetric up to rounding; make it exact
    let m = values.nrows();
    for a in 0..m {
        for b in a + 1..m {
            let v = 0.5 * (values[(a, b)] + values[(b, a)]);
            values[(a, b)] = v;
            values[(b, a)] = v;
        }
    }
    Ok(GramMatrix {
        stocks: panel.stocks().to_vec(),
        values,
        n_dead: dead.len(),
        n_days: d,
    })
}

/// Spectral-entropy effective rank `exp(-sum p_a ln p_a)` over eigenvalues
/// above `POSITIVITY_THRESHOLD × max`.
pub fn effective_rank(eigenvalues: &[f64]) -> Result<f64> {
    effective_rank_with(eigenvalues, POSITIVITY_THRESHOLD)
}

pub fn effective_rank_with(eigenvalues: &[f64], threshold: f64) -> Result<f64> {
    let max = eigenvalues.iter().copied().fold(0.0f64, f64::max);
    if !(max > 0.0) || !max.is_finite() {
        return Err(Error::ZeroSpectrum);
    }
    let cutoff = threshold * max;
    let kept: Vec<f64> = eigenvalues.iter().copied().filter(|&l| l > cutoff).collect();
    let total: f64 = kept.iter().sum();
    let entropy: f64 = kept
        .iter()
        .map(|&l| {
            let p = l / total;
            -p * p.ln()
        })
        .sum();
    Ok(entropy.exp().clamp(1.0, kept.len() as f64))
}

/// `K` from the effective rank: floor or round-half-up, clamped to `[1, max_k]`.
pub fn select_k(erank: f64, mode: RoundingMode, max_k: usize) -> usize {
    let nearest = erank.round();
    let erank = if (erank - nearest).abs() < ERANK_SNAP {
        nearest
    } else {
        erank
    };
    let k = match mode {
        RoundingMode::Truncate => erank.floor(),
        RoundingMode::Round => (erank + 0.5).floor(),
    };
    let k = if k.is_finite() && k > 0.0 { k as usize } else { 1 };
    k.clamp(1, max_k.max(1))
}

/// Positive eigenpairs, eigenvalues descending, vectors as columns.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

/// Flips `v` so its largest-magnitude entry is positive; ties go to the
/// lowest index.
fn fix_sign(v: &mut DVector<f64>) {
    let max = v.amax();
    if max == 0.0 {
        return;
    }
    let pivot = v
        .iter()
        .position(|x| x.abs() >= max * (1.0 - SIGN_TIE_TOLERANCE))
        .unwrap_or(0);
    if v[pivot] < 0.0 {
        v.neg_mut();
    }
}

fn lexicographic_desc(a: &DVector<f64>, b: &DVector<f64>) -> Ordering {
    for (x, y) in a.iter().zip(b.iter()) {
        match y.partial_cmp(x) {
            Some(Ordering::Equal) | None => continue,
            Some(o) => return o,
        }
    }
    Ordering::Equal
}

/// Sign-fixes, sorts descending and drops non-positive eigenpairs.
fn canonicalize(mut pairs: Vec<(f64, DVector<f64>)>, threshold: f64) -> Result<EigenPairs> {
    let m = pairs.first().map(|p| p.1.len()).unwrap_or(0);
    let max = pairs.iter().map(|p| p.0).fold(0.0f64, f64::max);
    let min = pairs.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    if pairs.iter().any(|p| !p.0.is_finite()) {
        return Err(Error::Numerical("non-finite eigenvalue".into()));
    }
    if min < -PSD_TOLERANCE * max {
        return Err(Error::Validation(format!(
            "matrix is not positive semi-definite (eigenvalues {min:e}..{max:e})"
        )));
    }
    pairs.retain(|p| p.0 > threshold * max);
    for (_, v) in pairs.iter_mut() {
        fix_sign(v);
    }
    pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal));

    // order degenerate runs by their sign-fixed vectors
    let mut start = 0;
    while start < pairs.len() {
        let mut end = start + 1;
        while end < pairs.len() && pairs[end - 1].0 - pairs[end].0 <= DEGENERACY_TOLERANCE * max {
            end += 1;
        }
        pairs[start..end].sort_by(|a, b| lexicographic_desc(&a.1, &b.1));
        start = end;
    }

    let values = pairs.iter().map(|p| p.0).collect();
    let vectors = DMatrix::from_fn(m, pairs.len(), |a, k| pairs[k].1[a]);
    Ok(EigenPairs { values, vectors })
}

fn symmetric_eigen(matrix: DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = matrix.nrows();
    let norm = matrix.amax();
    let eig = matrix
        .try_symmetric_eigen(f64::EPSILON, MAX_EIGEN_ITERATIONS)
        .ok_or_else(|| {
            Error::Numerical(format!(
                "symmetric eigensolver did not converge ({n}×{n}, max |entry| {norm:e})"
            ))
        })?;
    Ok((eig.eigenvalues, eig.eigenvectors))
}

/// All positive eigenpairs of the Gram matrix.
pub fn eigendecompose(gram: &GramMatrix) -> Result<EigenPairs> {
    eigendecompose_matrix(&gram.values, POSITIVITY_THRESHOLD)
}

/// Positive eigenpairs of a symmetric PSD matrix.
pub fn eigendecompose_matrix(matrix: &DMatrix<f64>, threshold: f64) -> Result<EigenPairs> {
    if !matrix.is_square() || matrix.nrows() == 0 {
        return Err(Error::Index(format!(
            "expected a non-empty square matrix, got {:?}",
            matrix.shape()
        )));
    }
    let (values, vectors) = symmetric_eigen(matrix.clone())?;
    let pairs = values
        .iter()
        .zip(vectors.column_iter())
        .map(|(&l, v)| (l, v.into_owned()))
        .collect();
    canonicalize(pairs, threshold)
}

/// Positive eigenpairs of `BᵀB` computed from the `n × n` matrix `B Bᵀ`.
///
/// Each eigenpair `(λ, u)` of `B Bᵀ` maps to `(λ, Bᵀu / √λ)`. Requires
/// `n < M`; otherwise the direct route is cheaper.
pub fn eigendecompose_dual(stacked: &DMatrix<f64>) -> Result<EigenPairs> {
    eigendecompose_dual_with(stacked, POSITIVITY_THRESHOLD)
}

pub fn eigendecompose_dual_with(stacked: &DMatrix<f64>, threshold: f64) -> Result<EigenPairs> {
    let (n, m) = stacked.shape();
    if n == 0 {
        return Err(Error::NoDeadAlphas);
    }
    if n >= m {
        return Err(Error::Validation(format!(
            "dual eigendecomposition needs fewer rows than stocks (n={n}, M={m})"
        )));
    }
    let small = stacked * stacked.transpose();
    let (values, vectors) = symmetric_eigen(small)?;
    let max = values.iter().copied().fold(0.0f64, f64::max);
    let pairs = values
        .iter()
        .zip(vectors.column_iter())
        .map(|(&l, u)| {
            if l > threshold * max {
                let mut v = stacked.tr_mul(&u) / l.sqrt();
                v.normalize_mut();
                (l, v)
            } else {
                (l, DVector::zeros(m))
            }
        })
        .collect();
    canonicalize(pairs, threshold)
}

/// Leading principal components of the dead-alpha Gram matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorSet {
    pub stocks: Vec<String>,
    /// `M × K`, orthonormal columns.
    pub components: DMatrix<f64>,
    /// The `K` retained eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
    /// Every positive eigenvalue, descending.
    pub spectrum: Vec<f64>,
    pub erank: f64,
    pub k: usize,
    pub rounding_mode: RoundingMode,
    pub path: EigenPath,
}

impl FactorSet {
    /// Builds a factor set from precomputed eigenpairs.
    pub fn from_eigenpairs(
        stocks: Vec<String>,
        pairs: EigenPairs,
        mode: RoundingMode,
        path: EigenPath,
    ) -> Result<Self> {
        let erank = effective_rank(&pairs.values)?;
        let k = select_k(erank, mode, pairs.values.len());
        Ok(Self {
            stocks,
            components: pairs.vectors.columns(0, k).into_owned(),
            eigenvalues: pairs.values[..k].to_vec(),
            spectrum: pairs.values,
            erank,
            k,
            rounding_mode: mode,
            path,
        })
    }

    pub fn component(&self, a: usize) -> nalgebra::DVectorView<'_, f64> {
        self.components.column(a)
    }
}

/// Overrides for [`extract_factors_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtractOptions {
    pub positivity_threshold: f64,
    /// Force an eigensolver route instead of choosing by size.
    pub path: Option<EigenPath>,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        Self {
            positivity_threshold: POSITIVITY_THRESHOLD,
            path: None,
        }
    }
}

/// Factors from dead alphas `dead` over days `s..s+d`.
pub fn extract_factors(
    panel: &PositionPanel,
    dead: &[usize],
    s: usize,
    d: usize,
    mode: RoundingMode,
) -> Result<FactorSet> {
    extract_factors_with(panel, dead, s, d, mode, &ExtractOptions::default())
}

pub fn extract_factors_with(
    panel: &PositionPanel,
    dead: &[usize],
    s: usize,
    d: usize,
    mode: RoundingMode,
    opts: &ExtractOptions,
) -> Result<FactorSet> {
    let path = opts.path.unwrap_or(if dead.len() * d < panel.n_stocks() {
        EigenPath::Dual
    } else {
        EigenPath::Direct
    });
    let pairs = match path {
        EigenPath::Direct => {
            let gram = build_averaged_gram(panel, dead, s, d)?;
            eigendecompose_matrix(&gram.values, opts.positivity_threshold)?
        }
        EigenPath::Dual => {
            let stacked = stacked_rows(panel, dead, s, d)? / (d as f64).sqrt();
            eigendecompose_dual_with(&stacked, opts.positivity_threshold)?
        }
    };
    log::debug!(
        "{} positive eigenvalues from {} dead alphas over {d} days ({path:?} path)",
        pairs.values.len(),
        dead.len()
    );
    FactorSet::from_eigenpairs(panel.stocks().to_vec(), pairs, mode, path)
}

/// Writes `symbol,v1,...,vK` and the sidecar `k,erank,mode,eigenvalues`
/// (eigenvalues `;`-separated).
pub fn write_factors(
    factors: &FactorSet,
    components_path: impl AsRef<Path>,
    meta_path: impl AsRef<Path>,
) -> Result<()> {
    let path = components_path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    let header: Vec<String> = std::iter::once("symbol".to_string())
        .chain((1..=factors.k).map(|a| format!("v{a}")))
        .collect();
    writeln!(out, "{}", header.join(",")).map_err(io)?;
    for (a, stock) in factors.stocks.iter().enumerate() {
        write!(out, "{stock}").map_err(io)?;
        for k in 0..factors.k {
            write!(out, ",{}", factors.components[(a, k)]).map_err(io)?;
        }
        writeln!(out).map_err(io)?;
    }
    out.flush().map_err(io)?;

    let path = meta_path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    let eigenvalues: Vec<String> = factors.eigenvalues.iter().map(f64::to_string).collect();
    writeln!(out, "k,erank,mode,eigenvalues").map_err(io)?;
    writeln!(
        out,
        "{},{},{},{}",
        factors.k,
        factors.erank,
        factors.rounding_mode,
        eigenvalues.join(";")
    )
    .map_err(io)?;
    out.flush().map_err(io)
}
