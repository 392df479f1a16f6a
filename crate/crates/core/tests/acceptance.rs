//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fail.
//!
//! The fixture is generated with the CLI into a temporary directory, the
//! pipeline is run on it through the CLI, and the written files are checked
//! against the brute-force oracle in `common`.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;
use deadalpha::config::PipelineConfig;
use deadalpha::factor_extract::{
    build_averaged_gram, effective_rank, eigendecompose_dual, eigendecompose_matrix,
    extract_factors, extract_factors_with, select_k, EigenPairs, EigenPath, ExtractOptions,
    POSITIVITY_THRESHOLD,
};
use deadalpha::neutralize::neutralize_holdings;
use deadalpha::pipeline::{run_panels, PipelineRun};
use deadalpha::risk_model::{assemble_covariance, mean_variance_weights};
use deadalpha::synth::SyntheticDataset;
use deadalpha::{FactorSet, PositionPanel, RoundingMode};

/// Frozen regression values of the fixture, confirmed by the oracle.
const FIXTURE_N_DEAD: usize = 390;
const FIXTURE_N_GOOD: usize = 97;
const FIXTURE_K: usize = 4;

const BIN: &str = env!("CARGO_BIN_EXE_deadalpha");

type Outcome = Result<String, String>;
type Check = fn(&Ctx) -> Outcome;

struct Ctx {
    root: PathBuf,
    data: SyntheticDataset,
    run: PipelineRun,
    oracle: OracleRun,
    run_seconds: f64,
}

impl Ctx {
    fn out(&self) -> PathBuf {
        self.root.join("out")
    }
}

fn cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(BIN)
        .args(args)
        .output()
        .map_err(|e| format!("spawning {BIN}: {e}"))?;
    if !out.status.success() {
        return Err(format!(
            "deadalpha {args:?} failed: {}{}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(())
}

fn read_rows(path: &Path) -> Result<Vec<Vec<String>>, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(text
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect())
}

fn num(s: &str) -> f64 {
    s.parse().unwrap_or(f64::NAN)
}

/// `alpha -> position row` from `neutralized.csv`, in stock order.
fn read_holdings(path: &Path) -> Result<BTreeMap<String, Vec<f64>>, String> {
    let mut map: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for row in read_rows(path)? {
        map.entry(row[0].clone()).or_default().push(num(&row[2]));
    }
    Ok(map)
}

/// Factor columns from `factors.csv`.
fn read_factors(path: &Path) -> Result<Vec<Vec<f64>>, String> {
    let rows = read_rows(path)?;
    let k = rows.first().map(|r| r.len() - 1).unwrap_or(0);
    Ok((0..k)
        .map(|j| rows.iter().map(|r| num(&r[j + 1])).collect())
        .collect())
}

fn read_gammas(path: &Path) -> Result<BTreeMap<String, f64>, String> {
    Ok(read_rows(path)?
        .into_iter()
        .map(|r| (r[0].clone(), num(&r[1])))
        .collect())
}

fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

fn setup() -> Result<Ctx, String> {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = tmp.keep();
    let data_dir = root.join("data");
    cli(&["synth", "--seed", &FIXTURE_SEED.to_string(), "--out-dir", data_dir.to_str().unwrap()])?;
    let config = root.join("fixture.conf");
    fs::write(&config, fixture_config_text("out")).map_err(|e| e.to_string())?;

    let start = Instant::now();
    cli(&["run", "--config", config.to_str().unwrap()])?;
    let run_seconds = start.elapsed().as_secs_f64();

    let data = fixture();
    let cfg = PipelineConfig::from_file(&config).map_err(|e| e.to_string())?;
    let run = run_panels(&data.positions, &data.returns, &cfg).map_err(|e| e.to_string())?;
    let oracle = oracle_pipeline(&data.positions, &data.returns, &OracleParams::fixture());
    Ok(Ctx {
        root,
        data,
        run,
        oracle,
        run_seconds,
    })
}

fn orthogonality(ctx: &Ctx) -> Outcome {
    let holdings = read_holdings(&ctx.out().join("neutralized.csv"))?;
    let factors = read_factors(&ctx.out().join("factors.csv"))?;
    if holdings.is_empty() || factors.is_empty() {
        return Err("no holdings or factors written".into());
    }
    let worst = holdings
        .values()
        .flat_map(|p| factors.iter().map(move |v| dot(p, v).abs()))
        .fold(0.0f64, f64::max);
    let ok = worst <= 1e-8 && ctx.run_seconds < 10.0;
    let msg = format!(
        "max |<P~_i, V_a>| = {worst:.2e} over {} holdings x {} factors, run took {:.2}s",
        holdings.len(),
        factors.len(),
        ctx.run_seconds
    );
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn normalization(ctx: &Ctx) -> Outcome {
    let holdings = read_holdings(&ctx.out().join("neutralized.csv"))?;
    let gammas = read_gammas(&ctx.out().join("gammas.csv"))?;
    let worst = holdings
        .values()
        .map(|p| (l1(p) - 1.0).abs())
        .fold(0.0f64, f64::max);
    let min_gamma = gammas.values().cloned().fold(f64::INFINITY, f64::min);
    let msg = format!(
        "max |L1 - 1| = {worst:.2e}, min gamma = {min_gamma:.4}, {} rows",
        holdings.len()
    );
    if worst <= 1e-10 && min_gamma > 0.0 && gammas.len() == holdings.len() && !holdings.is_empty() {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn oracle_equivalence(ctx: &Ctx) -> Outcome {
    let o = &ctx.oracle;
    let alphas = ctx.data.positions.alphas();
    let mut problems = Vec::new();
    let mut worst = 0.0f64;
    let mut track = |x: f64, y: f64| worst = worst.max((x - y).abs());

    // stats and labels at the most recent date
    let latest = ctx.data.positions.dates()[0].format("%Y-%m-%d").to_string();
    let mut dead = Vec::new();
    let mut good = Vec::new();
    for row in read_rows(&ctx.out().join("stats.csv"))? {
        if row[0] != latest {
            continue;
        }
        let i = ctx.data.positions.alpha_index(&row[1]).ok_or("unknown alpha in stats")?;
        track(num(&row[3]), o.expected[i]);
        track(num(&row[4]), o.volatility[i]);
        match row[6].as_str() {
            "dead" => dead.push(i),
            "good" => good.push(i),
            _ => {}
        }
    }
    if dead != o.dead || good != o.good {
        problems.push(format!(
            "labels differ: dead {} vs oracle {}, good {} vs oracle {}",
            dead.len(),
            o.dead.len(),
            good.len(),
            o.good.len()
        ));
    }

    // factors
    let meta = read_rows(&ctx.out().join("factor_meta.csv"))?;
    let k: usize = meta[0][0].parse().map_err(|_| "bad k")?;
    let erank = num(&meta[0][1]);
    let eigenvalues: Vec<f64> = meta[0][3].split(';').map(num).collect();
    if k != o.k {
        problems.push(format!("K = {k}, oracle {}", o.k));
    }
    track(erank, o.erank);
    for (x, y) in eigenvalues.iter().zip(&o.spectrum) {
        track(*x, *y);
    }
    let spectrum = &ctx.run.factors.spectrum;
    if spectrum.len() != o.spectrum.len() {
        problems.push(format!(
            "{} positive eigenvalues, oracle {}",
            spectrum.len(),
            o.spectrum.len()
        ));
    }
    for (x, y) in spectrum.iter().zip(&o.spectrum) {
        track(*x, *y);
    }
    let factors = read_factors(&ctx.out().join("factors.csv"))?;
    for (v, w) in factors.iter().zip(&o.factors) {
        for (x, y) in v.iter().zip(w) {
            track(*x, *y);
        }
    }

    // neutralized holdings and gammas
    let holdings = read_holdings(&ctx.out().join("neutralized.csv"))?;
    let gammas = read_gammas(&ctx.out().join("gammas.csv"))?;
    for (r, &i) in o.good.iter().enumerate() {
        let id = &alphas[i];
        let (Some(p), Some(g)) = (holdings.get(id), gammas.get(id)) else {
            problems.push(format!("alpha {id} missing from outputs"));
            continue;
        };
        for (x, y) in p.iter().zip(&o.holdings[r]) {
            track(*x, *y);
        }
        track(*g, o.gammas[r]);
    }
    if holdings.len() != o.good.len() {
        problems.push(format!("{} holdings written, oracle {}", holdings.len(), o.good.len()));
    }

    if (o.dead.len(), o.good.len(), o.k) != (FIXTURE_N_DEAD, FIXTURE_N_GOOD, FIXTURE_K) {
        problems.push(format!(
            "oracle counts ({}, {}, {}) differ from frozen ({FIXTURE_N_DEAD}, {FIXTURE_N_GOOD}, {FIXTURE_K})",
            o.dead.len(),
            o.good.len(),
            o.k
        ));
    }
    if worst > 1e-8 {
        problems.push(format!("max entrywise difference {worst:.2e}"));
    }
    let msg = format!(
        "max |pipeline - oracle| = {worst:.2e}; N_dead = {}, N_good = {}, K = {k}, eRank = {erank:.6}",
        dead.len(),
        good.len()
    );
    if problems.is_empty() {
        Ok(msg)
    } else {
        Err(format!("{msg}; {}", problems.join("; ")))
    }
}

fn random_panel(rng: &mut ChaCha8Rng, n: usize, m: usize, t: usize) -> PositionPanel {
    let alphas = (0..n).map(|i| format!("D{i:02}")).collect();
    let stocks = (0..m).map(|a| format!("S{a:02}")).collect();
    let end = NaiveDate::from_ymd_opt(2020, 1, 31).unwrap();
    let dates = (0..t).map(|s| end - chrono::Days::new(s as u64)).collect();
    let mut values = Vec::with_capacity(n * m * t);
    for _ in 0..n * t {
        let row: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
        let norm = l1(&row);
        values.extend(row.iter().map(|x| x / norm));
    }
    PositionPanel::new(alphas, stocks, dates, values, 1e-8).unwrap()
}

fn overlap_and_gap(a: &EigenPairs, b: &EigenPairs) -> Result<(f64, f64), String> {
    if a.values.len() != b.values.len() {
        return Err(format!("{} vs {} eigenpairs", a.values.len(), b.values.len()));
    }
    let mut rel = 0.0f64;
    let mut overlap = 1.0f64;
    for j in 0..a.values.len() {
        rel = rel.max((a.values[j] - b.values[j]).abs() / b.values[j].abs());
        overlap = overlap.min(a.vectors.column(j).dot(&b.vectors.column(j)).abs());
    }
    Ok((rel, overlap))
}

fn dual_direct(_: &Ctx) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (n_dead, d, m) = (3, 2, 30);
    let mut worst_rel = 0.0f64;
    let mut worst_overlap = 1.0f64;
    for _ in 0..20 {
        let panel = random_panel(&mut rng, n_dead, m, d);
        let dead: Vec<usize> = (0..n_dead).collect();

        // full positive spectrum through both routes
        let gram = build_averaged_gram(&panel, &dead, 0, d).map_err(|e| e.to_string())?;
        let direct = eigendecompose_matrix(&gram.values, POSITIVITY_THRESHOLD).map_err(|e| e.to_string())?;
        let mut stacked = DMatrix::zeros(n_dead * d, m);
        for s in 0..d {
            for (r, &i) in dead.iter().enumerate() {
                for a in 0..m {
                    stacked[(s * n_dead + r, a)] = panel.get(i, a, s) / (d as f64).sqrt();
                }
            }
        }
        let dual = eigendecompose_dual(&stacked).map_err(|e| e.to_string())?;
        let (rel, overlap) = overlap_and_gap(&dual, &direct)?;
        worst_rel = worst_rel.max(rel);
        worst_overlap = worst_overlap.min(overlap);

        // retained components through the extraction entry point
        for mode in [RoundingMode::Truncate, RoundingMode::Round] {
            let by = |path| {
                let opts = ExtractOptions {
                    path: Some(path),
                    ..Default::default()
                };
                extract_factors_with(&panel, &dead, 0, d, mode, &opts).map_err(|e| e.to_string())
            };
            let (fd, fx) = (by(EigenPath::Dual)?, by(EigenPath::Direct)?);
            if fd.k != fx.k {
                return Err(format!("K differs: dual {} direct {}", fd.k, fx.k));
            }
            for j in 0..fd.k {
                worst_rel = worst_rel
                    .max((fd.eigenvalues[j] - fx.eigenvalues[j]).abs() / fx.eigenvalues[j]);
                worst_overlap =
                    worst_overlap.min(fd.component(j).dot(&fx.component(j)).abs());
            }
        }
    }
    let msg = format!(
        "20 instances (3 dead, d = 2, M = 30): max eigenvalue rel diff {worst_rel:.2e}, min overlap 1 - {:.2e}",
        1.0 - worst_overlap
    );
    if worst_rel <= 1e-10 && worst_overlap >= 1.0 - 1e-8 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn erank_exactness(_: &Ctx) -> Outcome {
    let mut problems = Vec::new();
    for l in [1usize, 2, 5, 20] {
        let e = effective_rank(&vec![0.37; l]).map_err(|e| e.to_string())?;
        if (e - l as f64).abs() > 1e-9 {
            problems.push(format!("flat L = {l} gives {e}"));
        }
    }
    let e31 = effective_rank(&[3.0, 1.0]).map_err(|e| e.to_string())?;
    let want = (-(0.75f64 * 0.75f64.ln() + 0.25 * 0.25f64.ln())).exp();
    let want_oracle = erank(&[3.0, 1.0]);
    if (e31 - want).abs() > 1e-9 || (e31 - want_oracle).abs() > 1e-9 {
        problems.push(format!("(3, 1) gives {e31}, expected {want}"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut mismatches = 0;
    for _ in 0..100 {
        let len = rng.random_range(1..=30);
        let scale = 10f64.powf(rng.random_range(-3.0..3.0));
        let mut spectrum: Vec<f64> = (0..len).map(|_| scale * rng.random::<f64>().powi(3)).collect();
        spectrum.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let e_oracle = erank(&spectrum);
        let e = effective_rank(&spectrum).map_err(|e| e.to_string())?;
        let max_k = spectrum.len();
        let trunc = select_k(e, RoundingMode::Truncate, max_k);
        let round = select_k(e, RoundingMode::Round, max_k);
        let want_trunc = (e_oracle.floor() as usize).clamp(1, max_k);
        let want_round = ((e_oracle + 0.5).floor() as usize).clamp(1, max_k);

        let pairs = EigenPairs {
            values: spectrum.clone(),
            vectors: DMatrix::identity(len, len),
        };
        let stocks: Vec<String> = (0..len).map(|a| format!("S{a}")).collect();
        let via_set = |mode| {
            FactorSet::from_eigenpairs(stocks.clone(), pairs.clone(), mode, EigenPath::Direct)
                .map(|f| f.k)
                .unwrap_or(0)
        };
        if (e - e_oracle).abs() > 1e-9
            || trunc != want_trunc
            || round != want_round
            || via_set(RoundingMode::Truncate) != want_trunc
            || via_set(RoundingMode::Round) != want_round
        {
            mismatches += 1;
        }
    }
    if mismatches > 0 {
        problems.push(format!("{mismatches} of 100 random spectra disagree with the oracle"));
    }
    let msg = format!("flat L in {{1, 2, 5, 20}}, (3, 1) -> {e31:.12}, 100 random spectra floor/round");
    if problems.is_empty() {
        Ok(msg)
    } else {
        Err(format!("{msg}; {}", problems.join("; ")))
    }
}

fn dollar_neutrality(ctx: &Ctx) -> Outcome {
    let p = &ctx.data.positions;
    let input_worst = (0..p.n_days())
        .flat_map(|s| (0..p.n_alphas()).map(move |i| (i, s)))
        .map(|(i, s)| p.row(i, s).iter().sum::<f64>().abs())
        .fold(0.0f64, f64::max);
    let f = &ctx.run.factors;
    let factor_worst = (0..f.k).map(|j| f.component(j).sum().abs()).fold(0.0f64, f64::max);
    let h = &ctx.run.holdings.values;
    let holding_worst = h.row_iter().map(|r| r.sum().abs()).fold(0.0f64, f64::max);
    let msg = format!(
        "input rows {input_worst:.2e}, factor sums {factor_worst:.2e}, P~ row sums {holding_worst:.2e}"
    );
    if input_worst <= 1e-12 && factor_worst <= 1e-8 && holding_worst <= 1e-9 && h.nrows() > 0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn idempotence(ctx: &Ctx) -> Outcome {
    let h = &ctx.run.holdings;
    let again = neutralize_holdings(&h.alphas, &h.values, &ctx.run.factors).map_err(|e| e.to_string())?;
    if again.alphas != h.alphas {
        return Err("second pass dropped alphas".into());
    }
    let change = (&again.values - &h.values).amax();
    let gamma = again.gammas.iter().map(|g| (g - 1.0).abs()).fold(0.0f64, f64::max);
    let msg = format!("max entry change {change:.2e}, max |gamma - 1| {gamma:.2e}");
    if change <= 1e-10 && gamma <= 1e-10 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn orthonormal_columns(rng: &mut ChaCha8Rng, m: usize, k: usize) -> DMatrix<f64> {
    let mut cols: Vec<DVector<f64>> = Vec::new();
    while cols.len() < k {
        let mut v = DVector::from_fn(m, |_, _| rng.random_range(-1.0..1.0));
        for c in &cols {
            let proj = c.dot(&v);
            v -= c * proj;
        }
        let norm = v.norm();
        if norm > 1e-6 {
            cols.push(v / norm);
        }
    }
    DMatrix::from_columns(&cols)
}

fn xi_limit(_: &Ctx) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (m, k) = (20, 3);
    let eps = [1.0, 1e-1, 1e-2, 1e-3, 1e-4];
    let mut worst_ratio = 0.0f64;
    for inst in 0..10 {
        let v = orthonormal_columns(&mut rng, m, k);
        let a = DMatrix::from_fn(k, k, |_, _| rng.random_range(-0.5..0.5));
        let phi = &a * a.transpose() + DMatrix::identity(k, k) * 0.5;
        let xi0 = DVector::from_fn(m, |_, _| rng.random_range(0.5..1.5));
        let e = DVector::from_fn(m, |_, _| rng.random_range(-1.0..1.0));
        let stocks: Vec<String> = (0..m).map(|a| format!("S{a:02}")).collect();
        let mut exposures = Vec::new();
        for &x in &eps {
            let model = assemble_covariance(stocks.clone(), &xi0 * x, v.clone(), phi.clone())
                .map_err(|e| format!("instance {inst}, eps {x}: {e}"))?;
            let w = mean_variance_weights(&model, &e).map_err(|e| format!("instance {inst}, eps {x}: {e}"))?;
            exposures.push(v.tr_mul(&w).norm());
        }
        if !exposures.windows(2).all(|p| p[1] < p[0]) {
            return Err(format!("instance {inst}: exposures not decreasing {exposures:?}"));
        }
        worst_ratio = worst_ratio.max(exposures[4] / exposures[0]);
    }
    let msg = format!("10 instances (M = 20, K = 3): max exposure ratio at eps = 1e-4 is {worst_ratio:.2e}");
    if worst_ratio < 1e-3 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn scale_equivariance(ctx: &Ctx) -> Outcome {
    let p = &ctx.data.positions;
    let run = &ctx.run;
    let (n, m, t) = (p.n_alphas(), p.n_stocks(), p.n_days());
    let is_dead: Vec<bool> = (0..n).map(|i| run.dead.contains(&i)).collect();
    let mut values = Vec::with_capacity(n * m * t);
    for s in 0..t {
        for (i, &dead) in is_dead.iter().enumerate() {
            let f = if dead { 2.0 } else { 1.0 };
            values.extend(p.row(i, s).iter().map(|x| x * f));
        }
    }
    let scaled = PositionPanel::new(
        p.alphas().to_vec(),
        p.stocks().to_vec(),
        p.dates().to_vec(),
        values,
        f64::INFINITY,
    )
    .map_err(|e| e.to_string())?;
    let base = &run.factors;
    let f2 = extract_factors(&scaled, &run.dead, 0, FIXTURE_D, base.rounding_mode).map_err(|e| e.to_string())?;

    let mut problems = Vec::new();
    if f2.spectrum.len() != base.spectrum.len() {
        problems.push("spectrum length changed".to_string());
    }
    let eig_rel = f2
        .spectrum
        .iter()
        .zip(&base.spectrum)
        .map(|(x, y)| (x - 4.0 * y).abs() / (4.0 * y))
        .fold(0.0f64, f64::max);
    let erank_diff = (f2.erank - base.erank).abs();
    if f2.k != base.k {
        problems.push(format!("K {} -> {}", base.k, f2.k));
    }
    let v_diff = if f2.k == base.k {
        (&f2.components - &base.components).amax()
    } else {
        f64::INFINITY
    };
    let good = p.day_matrix(&run.good, 0);
    let h2 = neutralize_holdings(&run.holdings.alphas, &good, &f2).map_err(|e| e.to_string())?;
    let h_diff = (&h2.values - &run.holdings.values).amax();
    let msg = format!(
        "eigenvalue x4 rel err {eig_rel:.2e}, eRank diff {erank_diff:.2e}, V diff {v_diff:.2e}, P~ diff {h_diff:.2e}"
    );
    if eig_rel > 1e-10 || erank_diff > 1e-10 || v_diff > 1e-10 || h_diff > 1e-10 {
        problems.push("tolerance exceeded".into());
    }
    if problems.is_empty() {
        Ok(msg)
    } else {
        Err(format!("{msg}; {}", problems.join("; ")))
    }
}

fn same_files(a: &Path, b: &Path) -> Result<usize, String> {
    let mut names: Vec<_> = fs::read_dir(a)
        .map_err(|e| e.to_string())?
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    let mut other: Vec<_> = fs::read_dir(b)
        .map_err(|e| e.to_string())?
        .map(|e| e.unwrap().file_name())
        .collect();
    other.sort();
    if names != other {
        return Err(format!("file sets differ: {names:?} vs {other:?}"));
    }
    for name in &names {
        let (x, y) = (fs::read(a.join(name)), fs::read(b.join(name)));
        if x.map_err(|e| e.to_string())? != y.map_err(|e| e.to_string())? {
            return Err(format!("{} differs", name.to_string_lossy()));
        }
    }
    Ok(names.len())
}

fn reproducibility(ctx: &Ctx) -> Outcome {
    let second = ctx.root.join("data2");
    cli(&["synth", "--seed", &FIXTURE_SEED.to_string(), "--out-dir", second.to_str().unwrap()])?;
    let n_data = same_files(&ctx.root.join("data"), &second)?;

    // same config, same output directory: keep the first run's files aside
    let first = ctx.root.join("out_first");
    fs::rename(ctx.out(), &first).map_err(|e| e.to_string())?;
    let config = ctx.root.join("fixture.conf");
    cli(&["run", "--config", config.to_str().unwrap()])?;
    let n_out = same_files(&first, &ctx.out())?;
    Ok(format!("synth: {n_data} files identical, run: {n_out} files identical"))
}

fn main() {
    let ctx = match setup() {
        Ok(ctx) => ctx,
        Err(e) => {
            println!("acceptance setup failed: {e}");
            std::process::exit(1);
        }
    };
    let criteria: [(&str, Check); 10] = [
        ("orthogonality", orthogonality),
        ("normalization", normalization),
        ("oracle equivalence", oracle_equivalence),
        ("dual/direct eigen path equivalence", dual_direct),
        ("eRank exactness", erank_exactness),
        ("dollar-neutrality preservation", dollar_neutrality),
        ("idempotence", idempotence),
        ("specific risk to zero neutrality", xi_limit),
        ("scale equivariance", scale_equivariance),
        ("reproducibility", reproducibility),
    ];
    let mut failed = 0;
    for (n, (name, check)) in criteria.iter().enumerate() {
        match check(&ctx) {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", n + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail}", n + 1);
            }
        }
    }
    let _ = fs::remove_dir_all(&ctx.root);
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
