//! Seeded synthetic position and return panels.
//!
//! Stock returns are a predictable daily drift plus a few planted latent
//! factors plus noise. Good alphas hold the drift direction, so they earn
//! it. Dead alphas start the same way but their drift exposure shrinks
//! geometrically after a per-alpha death day, leaving bets on the planted
//! factors and noise: their positions stay L1-normalized while their
//! returns flatline.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use chrono::{Datelike, NaiveDate, Weekday};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::{write_positions, write_returns, PositionPanel, ReturnPanel};

/// Drift volatility, relative to `noise_scale`.
const DRIFT_SCALE: f64 = 2.0;
/// Planted factor return volatility, relative to `noise_scale`.
const FACTOR_SCALE: f64 = 0.2;
/// Factor tilt in positions.
const GOOD_TILT: f64 = 0.3;
const DEAD_TILT: f64 = 1.5;
/// Alpha-specific position noise.
const POSITION_NOISE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SyntheticSpec {
    pub n_alphas: usize,
    pub n_dead_target: usize,
    pub m_stocks: usize,
    pub t_days: usize,
    /// Statistics window the data is meant for; `t_days` must exceed `2d`.
    pub d: usize,
    pub n_factors: usize,
    /// Per-day multiplicative shrinkage of a dead alpha's drift exposure.
    pub signal_decay: f64,
    /// Idiosyncratic daily return volatility.
    pub noise_scale: f64,
    pub dollar_neutral: bool,
    /// Last (most recent) trading date.
    pub end_date: NaiveDate,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_alphas: 500,
            n_dead_target: 400,
            m_stocks: 50,
            t_days: 60,
            d: 10,
            n_factors: 3,
            signal_decay: 0.7,
            noise_scale: 0.01,
            dollar_neutral: true,
            end_date: NaiveDate::from_ymd_opt(2017, 7, 28).expect("valid date"),
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Validation(m));
        if self.n_alphas == 0 || self.m_stocks < 2 {
            return fail("need at least one alpha and two stocks".into());
        }
        if self.n_dead_target > self.n_alphas {
            return fail(format!(
                "n_dead_target ({}) exceeds n_alphas ({})",
                self.n_dead_target, self.n_alphas
            ));
        }
        if self.d < 2 {
            return fail(format!("d must be at least 2, got {}", self.d));
        }
        if self.t_days <= 2 * self.d {
            return fail(format!(
                "t_days ({}) must exceed 2d ({})",
                self.t_days,
                2 * self.d
            ));
        }
        if self.n_factors >= self.m_stocks {
            return fail("n_factors must be below m_stocks".into());
        }
        if !(0.0..=1.0).contains(&self.signal_decay) {
            return fail(format!("signal_decay must lie in [0, 1], got {}", self.signal_decay));
        }
        if !(self.noise_scale > 0.0 && self.noise_scale.is_finite()) {
            return fail(format!("noise_scale must be positive, got {}", self.noise_scale));
        }
        Ok(())
    }
}

/// Classification thresholds that separate the generated populations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuggestedThresholds {
    pub eta_dead: f64,
    pub eta_min: f64,
    pub s_dead: f64,
    pub s_min: f64,
}

/// What was planted, for checking recovery.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroundTruth {
    pub spec: SyntheticSpec,
    pub seed: u64,
    pub dead_alphas: Vec<String>,
    /// Unit-norm planted factor directions, one per factor, in stock order.
    pub factor_directions: Vec<Vec<f64>>,
    pub suggested: SuggestedThresholds,
}

#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub positions: PositionPanel,
    pub returns: ReturnPanel,
    pub truth: GroundTruth,
}

/// `count` weekdays ending at `end`, most recent first.
fn business_days(end: NaiveDate, count: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(count);
    let mut day = end;
    while out.len() < count {
        if !matches!(day.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(day);
        }
        day = day.pred_opt().expect("date in range");
    }
    out
}

fn normal_vec(rng: &mut ChaCha8Rng, len: usize) -> DVector<f64> {
    DVector::from_fn(len, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Generates a dataset; identical `spec` and `seed` give identical output.
pub fn generate_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<SyntheticDataset> {
    spec.validate()?;
    let (n, m, t, f) = (spec.n_alphas, spec.m_stocks, spec.t_days, spec.n_factors);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut beta = DMatrix::from_fn(m, f, |_, _| rng.sample::<f64, _>(StandardNormal));
    if spec.dollar_neutral {
        for mut col in beta.column_iter_mut() {
            let mean = col.mean();
            col.add_scalar_mut(-mean);
        }
    }

    // chronological index: 0 is the oldest day
    let drift_vol = DRIFT_SCALE * spec.noise_scale;
    let factor_vol = FACTOR_SCALE * spec.noise_scale;
    let mut drift = Vec::with_capacity(t);
    let mut returns = DMatrix::zeros(m, t);
    for tc in 0..t {
        let z = normal_vec(&mut rng, m);
        let fr = normal_vec(&mut rng, f) * factor_vol;
        let eps = normal_vec(&mut rng, m) * spec.noise_scale;
        let r = &z * drift_vol + &beta * fr + eps;
        returns.set_column(t - 1 - tc, &r);
        drift.push(z);
    }

    let tilts: Vec<DVector<f64>> = (0..n).map(|_| &beta * normal_vec(&mut rng, f)).collect();
    let death: Vec<usize> = (0..n).map(|_| rng.random_range(t / 4..t / 2)).collect();

    let mut values = vec![0.0; n * m * t];
    for tc in 0..t {
        let s = t - 1 - tc;
        for i in 0..n {
            let dead = i < spec.n_dead_target;
            let strength = if dead && tc >= death[i] {
                spec.signal_decay.powi((tc - death[i]) as i32 + 1)
            } else {
                1.0
            };
            let tilt = if dead { DEAD_TILT } else { GOOD_TILT };
            let mut raw = &drift[tc] * strength
                + &tilts[i] * tilt
                + normal_vec(&mut rng, m) * POSITION_NOISE;
            if spec.dollar_neutral {
                let mean = raw.mean();
                raw.add_scalar_mut(-mean);
            }
            let l1: f64 = raw.iter().map(|x| x.abs()).sum();
            let row = &mut values[(s * n + i) * m..(s * n + i + 1) * m];
            for (dst, x) in row.iter_mut().zip(raw.iter()) {
                *dst = x / l1;
            }
        }
    }

    let alphas: Vec<String> = (0..n).map(|i| format!("A{:04}", i + 1)).collect();
    let stocks: Vec<String> = (0..m).map(|a| format!("S{:03}", a + 1)).collect();
    let dates = business_days(spec.end_date, t);
    let positions = PositionPanel::new(alphas.clone(), stocks.clone(), dates.clone(), values, 1e-8)?;
    let returns = ReturnPanel::new(stocks, dates, returns)?;

    let factor_directions = beta
        .column_iter()
        .map(|c| {
            let norm = c.norm();
            c.iter().map(|x| x / norm).collect()
        })
        .collect();
    let truth = GroundTruth {
        spec: spec.clone(),
        seed,
        dead_alphas: alphas[..spec.n_dead_target].to_vec(),
        factor_directions,
        suggested: SuggestedThresholds {
            eta_dead: 0.5 * spec.noise_scale,
            eta_min: 0.8 * spec.noise_scale,
            s_dead: 6.0,
            s_min: 8.0,
        },
    };
    Ok(SyntheticDataset {
        positions,
        returns,
        truth,
    })
}

/// Writes `positions.csv`, `returns.csv` and `synth_manifest.json` into `dir`.
pub fn write_dataset(data: &SyntheticDataset, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_positions(&data.positions, dir.join("positions.csv"))?;
    write_returns(&data.returns, dir.join("returns.csv"))?;
    let path = dir.join("synth_manifest.json");
    let io = |e| Error::io(&path, e);
    let mut out = BufWriter::new(File::create(&path).map_err(io)?);
    serde_json::to_writer_pretty(&mut out, &data.truth)
        .map_err(|e| Error::Validation(format!("manifest serialization: {e}")))?;
    writeln!(out).map_err(io)?;
    out.flush().map_err(io)
}
