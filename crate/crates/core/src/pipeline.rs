//! End-to-end runs: classify at the most recent day, extract factors from
//! the dead alphas, neutralize the good ones, optionally build the risk
//! model, and write every artifact plus a manifest.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use serde::Serialize;

use crate::alpha_stats::{classify, write_stats, AlphaLabel, AlphaStats, Labels};
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::factor_extract::{extract_factors_with, write_factors, EigenPath, ExtractOptions, FactorSet};
use crate::ingest::{format_date, load_positions_with, load_returns, PanelFormat, PositionPanel, ReturnPanel};
use crate::neutralize::{neutralize_holdings_with, write_holdings, NeutralizedHoldings};
use crate::risk_model::{
    assemble_covariance, factor_covariance, factor_exposures, load_expected_returns,
    mean_variance_weights, specific_risk_from_returns, write_weights,
};

pub const STATS_FILE: &str = "stats.csv";
pub const NEUTRALIZED_FILE: &str = "neutralized.csv";
pub const FACTORS_FILE: &str = "factors.csv";
pub const FACTOR_META_FILE: &str = "factor_meta.csv";
pub const GAMMAS_FILE: &str = "gammas.csv";
pub const EXCLUDED_FILE: &str = "excluded.csv";
pub const WEIGHTS_FILE: &str = "weights.csv";
pub const EXPOSURES_FILE: &str = "exposures.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Statistics and labels for every alpha.
#[derive(Debug, Clone)]
pub struct Classification {
    pub stats: AlphaStats,
    pub labels: Labels,
}

impl Classification {
    /// Alpha indices with `label` on the most recent day.
    pub fn today(&self, label: AlphaLabel) -> Vec<usize> {
        self.labels.with_label(label, 0)
    }
}

pub fn classify_panels(
    positions: &PositionPanel,
    returns: &ReturnPanel,
    cfg: &PipelineConfig,
) -> Result<Classification> {
    let c = cfg.classification();
    c.validate()?;
    let stats = AlphaStats::compute(positions, returns, c.d, c.volatility_window())?;
    let labels = classify(&stats, &c)?;
    Ok(Classification { stats, labels })
}

/// In-memory result of a pipeline run.
#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub classification: Classification,
    pub dead: Vec<usize>,
    pub good: Vec<usize>,
    pub factors: FactorSet,
    pub holdings: NeutralizedHoldings,
}

/// Factors and neutralized holdings for already-classified panels.
pub fn neutralize_classified(
    positions: &PositionPanel,
    classification: Classification,
    cfg: &PipelineConfig,
) -> Result<PipelineRun> {
    let dead = classification.today(AlphaLabel::Dead);
    let good = classification.today(AlphaLabel::Good);
    if dead.is_empty() {
        return Err(Error::NoDeadAlphas);
    }
    if good.is_empty() {
        return Err(Error::NoGoodAlphas);
    }
    let opts = ExtractOptions {
        positivity_threshold: cfg.tolerances.positivity,
        path: None,
    };
    let factors = extract_factors_with(
        positions,
        &dead,
        0,
        cfg.gram_window(),
        cfg.rounding_mode,
        &opts,
    )?;
    let good_ids: Vec<String> = good.iter().map(|&i| positions.alphas()[i].clone()).collect();
    let holdings = neutralize_holdings_with(
        &good_ids,
        &positions.day_matrix(&good, 0),
        &factors,
        cfg.tolerances.spanned,
    )?;
    Ok(PipelineRun {
        classification,
        dead,
        good,
        factors,
        holdings,
    })
}

pub fn run_panels(
    positions: &PositionPanel,
    returns: &ReturnPanel,
    cfg: &PipelineConfig,
) -> Result<PipelineRun> {
    cfg.validate()?;
    let classification = classify_panels(positions, returns, cfg)?;
    neutralize_classified(positions, classification, cfg)
}

/// Mean-variance weights under the dead-alpha risk model.
#[derive(Debug, Clone)]
pub struct RiskOutputs {
    pub weights: DVector<f64>,
    pub exposures: DVector<f64>,
}

pub fn risk_step(
    factors: &FactorSet,
    returns: &ReturnPanel,
    expected: &DVector<f64>,
    cfg: &PipelineConfig,
) -> Result<RiskOutputs> {
    let xi = specific_risk_from_returns(returns, &factors.stocks, cfg.d, cfg.specific_risk_scale)?;
    let phi = factor_covariance(factors, cfg.factor_cov_mode, cfg.factor_cov.as_deref())?;
    let model = assemble_covariance(factors.stocks.clone(), xi, factors.components.clone(), phi)?;
    let weights = mean_variance_weights(&model, expected)?;
    let exposures = factor_exposures(factors, &weights);
    Ok(RiskOutputs { weights, exposures })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunCounts {
    pub n_alphas: usize,
    pub n_dead: usize,
    pub n_good: usize,
    pub n_indeterminate: usize,
    pub m_stocks: usize,
    pub t_days: usize,
    pub k: usize,
    pub erank: f64,
    pub eigen_path: EigenPath,
    pub n_neutralized: usize,
    pub n_excluded: usize,
    pub zero_position_rows: usize,
    pub filled_return_cells: usize,
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub as_of: String,
    pub config: PipelineConfig,
    pub counts: RunCounts,
    pub outputs: Vec<String>,
}

fn required<'a>(p: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
    p.as_deref()
        .ok_or_else(|| Error::Config(format!("missing required key '{key}'")))
}

fn create_out_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Loads inputs, runs the pipeline and writes outputs into `cfg.out_dir`.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<Manifest> {
    cfg.validate()?;
    let positions_path = required(&cfg.positions, "positions")?;
    let returns_path = required(&cfg.returns, "returns")?;

    let positions = load_positions_with(positions_path, PanelFormat::Long, cfg.tolerances.l1)?;
    let returns = load_returns(returns_path)?;
    let classification = classify_panels(&positions, &returns, cfg)?;

    let out = &cfg.out_dir;
    create_out_dir(out)?;
    write_stats(&classification.stats, &classification.labels, out.join(STATS_FILE))?;
    let mut outputs = vec![STATS_FILE.to_string()];

    let n_indeterminate = classification.today(AlphaLabel::Indeterminate).len();
    let run = neutralize_classified(&positions, classification, cfg)?;

    write_factors(&run.factors, out.join(FACTORS_FILE), out.join(FACTOR_META_FILE))?;
    write_holdings(
        &run.holdings,
        out.join(NEUTRALIZED_FILE),
        out.join(GAMMAS_FILE),
        out.join(EXCLUDED_FILE),
    )?;
    outputs.extend(
        [FACTORS_FILE, FACTOR_META_FILE, NEUTRALIZED_FILE, GAMMAS_FILE, EXCLUDED_FILE]
            .map(String::from),
    );

    if let Some(path) = &cfg.expected_returns {
        let expected = load_expected_returns(path, &run.factors.stocks)?;
        let risk = risk_step(&run.factors, &returns, &expected, cfg)?;
        write_weights(
            &run.factors.stocks,
            &risk.weights,
            &risk.exposures,
            out.join(WEIGHTS_FILE),
            out.join(EXPOSURES_FILE),
        )?;
        outputs.extend([WEIGHTS_FILE, EXPOSURES_FILE].map(String::from));
    }

    outputs.push(MANIFEST_FILE.to_string());
    let manifest = Manifest {
        as_of: format_date(positions.dates()[0]),
        config: cfg.clone(),
        counts: RunCounts {
            n_alphas: positions.n_alphas(),
            n_dead: run.dead.len(),
            n_good: run.good.len(),
            n_indeterminate,
            m_stocks: positions.n_stocks(),
            t_days: positions.n_days(),
            k: run.factors.k,
            erank: run.factors.erank,
            eigen_path: run.factors.path,
            n_neutralized: run.holdings.alphas.len(),
            n_excluded: run.holdings.excluded.len(),
            zero_position_rows: positions.zero_rows().len(),
            filled_return_cells: returns.filled_cells(),
        },
        outputs,
    };
    write_json(&manifest, &out.join(MANIFEST_FILE))?;
    Ok(manifest)
}

pub(crate) fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let io = |e| Error::io(path, e);
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    serde_json::to_writer_pretty(&mut out, value)
        .map_err(|e| Error::Validation(format!("serializing {}: {e}", path.display())))?;
    writeln!(out).map_err(io)?;
    out.flush().map_err(io)
}

/// Stats and labels only; writes `stats.csv`.
pub fn run_classify(cfg: &PipelineConfig) -> Result<Classification> {
    cfg.validate()?;
    let positions = load_positions_with(
        required(&cfg.positions, "positions")?,
        PanelFormat::Long,
        cfg.tolerances.l1,
    )?;
    let returns = load_returns(required(&cfg.returns, "returns")?)?;
    let classification = classify_panels(&positions, &returns, cfg)?;
    create_out_dir(&cfg.out_dir)?;
    write_stats(
        &classification.stats,
        &classification.labels,
        cfg.out_dir.join(STATS_FILE),
    )?;
    Ok(classification)
}

/// Factors from a file holding only dead-alpha positions; writes
/// `factors.csv` and `factor_meta.csv`.
pub fn run_extract(
    dead_positions: &Path,
    d: usize,
    mode: crate::factor_extract::RoundingMode,
    tolerances: &crate::config::Tolerances,
    out_dir: &Path,
) -> Result<FactorSet> {
    if d == 0 {
        return Err(Error::Config("d must be positive".into()));
    }
    let panel = load_positions_with(dead_positions, PanelFormat::Long, tolerances.l1)?;
    let dead: Vec<usize> = (0..panel.n_alphas()).collect();
    let opts = ExtractOptions {
        positivity_threshold: tolerances.positivity,
        path: None,
    };
    let factors = extract_factors_with(&panel, &dead, 0, d, mode, &opts)?;
    create_out_dir(out_dir)?;
    write_factors(&factors, out_dir.join(FACTORS_FILE), out_dir.join(FACTOR_META_FILE))?;
    Ok(factors)
}
