//! Brute-force reference implementations used as test oracles.
//!
//! Everything here works on plain `Vec<Vec<f64>>` with explicit loops and
//! shares no numerical code with the library: the eigensolver is cyclic
//! Jacobi, regressions go through the normal equations and Gaussian
//! elimination.

#![allow(dead_code, clippy::needless_range_loop)]

use deadalpha::ingest::{PositionPanel, ReturnPanel};
use deadalpha::synth::{generate_synthetic, SyntheticDataset, SyntheticSpec};

pub type Mat = Vec<Vec<f64>>;

/// Seed of the standard fixture.
pub const FIXTURE_SEED: u64 = 42;
pub const FIXTURE_D: usize = 10;
pub const FIXTURE_ETA_DEAD: f64 = 0.005;
pub const FIXTURE_ETA_MIN: f64 = 0.008;
pub const FIXTURE_S_DEAD: f64 = 6.0;
pub const FIXTURE_S_MIN: f64 = 8.0;

/// Config text matching `fixtures/fixture.conf`, with data paths relative
/// to the config file.
pub fn fixture_config_text(out_dir: &str) -> String {
    format!(
        "positions = data/positions.csv\nreturns = data/returns.csv\nout_dir = {out_dir}\n\
         d = {FIXTURE_D}\neta_dead = {FIXTURE_ETA_DEAD}\neta_min = {FIXTURE_ETA_MIN}\n\
         s_dead = {FIXTURE_S_DEAD}\ns_min = {FIXTURE_S_MIN}\nrounding_mode = trunc\n"
    )
}

/// The 500 alpha, 50 stock, 60 day dataset.
pub fn fixture() -> SyntheticDataset {
    generate_synthetic(&SyntheticSpec::default(), FIXTURE_SEED).expect("fixture generation")
}

pub fn zeros(r: usize, c: usize) -> Mat {
    vec![vec![0.0; c]; r]
}

/// `X_AB = (1/d) sum_{s'=s}^{s+d-1} sum_{i in dead} P_iAs' P_iBs'`.
pub fn naive_gram(panel: &PositionPanel, dead: &[usize], s: usize, d: usize) -> Mat {
    let m = panel.n_stocks();
    let mut x = zeros(m, m);
    for day in s..s + d {
        for &i in dead {
            for a in 0..m {
                for b in 0..m {
                    x[a][b] += panel.get(i, a, day) * panel.get(i, b, day);
                }
            }
        }
    }
    for row in x.iter_mut() {
        for v in row.iter_mut() {
            *v /= d as f64;
        }
    }
    x
}

/// Flips `v` so its largest-magnitude entry is positive (first index wins
/// near-ties).
pub fn sign_fix(v: &mut [f64]) {
    let max = v.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    if max == 0.0 {
        return;
    }
    let pivot = v.iter().position(|x| x.abs() >= max * (1.0 - 1e-10)).unwrap();
    if v[pivot] < 0.0 {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
}

/// Full eigendecomposition of a symmetric matrix by cyclic Jacobi sweeps.
/// Eigenvalues come back descending; vectors are sign-fixed and returned as
/// a list (one `Vec` per eigenvalue).
pub fn jacobi_eigen(a: &Mat) -> (Vec<f64>, Mat) {
    let n = a.len();
    let mut a = a.clone();
    let mut v = zeros(n, n);
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    let scale: f64 = a.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|p| (0..n).filter(move |&q| q != p).map(move |q| (p, q)))
            .map(|(p, q)| a[p][q] * a[p][q])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale || scale == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut pairs: Vec<(f64, Vec<f64>)> = (0..n)
        .map(|k| {
            let mut col: Vec<f64> = v.iter().map(|row| row[k]).collect();
            sign_fix(&mut col);
            (a[k][k], col)
        })
        .collect();
    pairs.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap());
    pairs.into_iter().unzip()
}

/// `exp` of the Shannon entropy of the normalized positive spectrum.
pub fn erank(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(0.0f64, f64::max);
    let pos: Vec<f64> = values.iter().cloned().filter(|&l| l > 1e-12 * max).collect();
    let total: f64 = pos.iter().sum();
    let h: f64 = pos
        .iter()
        .map(|l| {
            let p = l / total;
            -p * p.ln()
        })
        .sum();
    h.exp()
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn solve(a: &Mat, b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut m: Mat = a
        .iter()
        .zip(b)
        .map(|(row, &bi)| {
            let mut r = row.clone();
            r.push(bi);
            r
        })
        .collect();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&x, &y| m[x][col].abs().partial_cmp(&m[y][col].abs()).unwrap())
            .unwrap();
        m.swap(col, piv);
        for r in col + 1..n {
            let f = m[r][col] / m[col][col];
            for c in col..=n {
                m[r][c] -= f * m[col][c];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let tail: f64 = (r + 1..n).map(|c| m[r][c] * x[c]).sum();
        x[r] = (m[r][n] - tail) / m[r][r];
    }
    x
}

/// Residual of the intercept-free least-squares regression of `y` on the
/// columns `cols` (each of length `y.len()`), via the normal equations.
pub fn ls_residual(y: &[f64], cols: &[Vec<f64>]) -> Vec<f64> {
    let k = cols.len();
    if k == 0 {
        return y.to_vec();
    }
    let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    let gram: Mat = (0..k)
        .map(|i| (0..k).map(|j| dot(&cols[i], &cols[j])).collect())
        .collect();
    let rhs: Vec<f64> = cols.iter().map(|c| dot(c, y)).collect();
    let beta = solve(&gram, &rhs);
    (0..y.len())
        .map(|a| y[a] - (0..k).map(|j| beta[j] * cols[j][a]).sum::<f64>())
        .collect()
}

pub fn l1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

/// Everything the pipeline produces at the most recent day.
#[derive(Debug)]
pub struct OracleRun {
    pub expected: Vec<f64>,
    pub volatility: Vec<f64>,
    pub dead: Vec<usize>,
    pub good: Vec<usize>,
    pub spectrum: Vec<f64>,
    pub erank: f64,
    pub k: usize,
    /// `K` factor vectors of length `M`.
    pub factors: Mat,
    /// Neutralized, L1-normalized holdings of the good alphas.
    pub holdings: Mat,
    pub gammas: Vec<f64>,
}

pub struct OracleParams {
    pub d: usize,
    pub d_vol: usize,
    pub eta_dead: f64,
    pub eta_min: f64,
    pub s_dead: f64,
    pub s_min: f64,
    pub round: bool,
}

impl OracleParams {
    pub fn fixture() -> Self {
        Self {
            d: FIXTURE_D,
            d_vol: FIXTURE_D,
            eta_dead: FIXTURE_ETA_DEAD,
            eta_min: FIXTURE_ETA_MIN,
            s_dead: FIXTURE_S_DEAD,
            s_min: FIXTURE_S_MIN,
            round: false,
        }
    }
}

/// The whole pipeline at day 0 by explicit loops.
pub fn oracle_pipeline(positions: &PositionPanel, returns: &ReturnPanel, p: &OracleParams) -> OracleRun {
    let (n, m, t) = (positions.n_alphas(), positions.n_stocks(), positions.n_days());
    assert_eq!(returns.stocks(), positions.stocks());
    assert_eq!(returns.dates(), positions.dates());
    let r = returns.values();

    let mut rho = zeros(n, t);
    for i in 0..n {
        for s in 0..t {
            for a in 0..m {
                rho[i][s] += positions.get(i, a, s) * r[(a, s)];
            }
        }
    }
    let eta_at = |i: usize, s: usize| (s + 1..=s + p.d).map(|k| rho[i][k]).sum::<f64>() / p.d as f64;

    let mut expected = vec![0.0; n];
    let mut volatility = vec![0.0; n];
    let (mut dead, mut good) = (Vec::new(), Vec::new());
    for i in 0..n {
        let eta = eta_at(i, 0);
        let hist: Vec<f64> = (1..=p.d_vol).map(|k| eta_at(i, k)).collect();
        let mean = hist.iter().sum::<f64>() / p.d_vol as f64;
        let var = hist.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (p.d_vol - 1) as f64;
        let sigma = var.sqrt();
        let sharpe = if sigma > 0.0 {
            eta / sigma
        } else if eta > 0.0 {
            f64::INFINITY
        } else if eta < 0.0 {
            f64::NEG_INFINITY
        } else {
            0.0
        };
        expected[i] = eta;
        volatility[i] = sigma;
        if eta < p.eta_dead && sharpe < p.s_dead {
            dead.push(i);
        } else if eta >= p.eta_min && sharpe >= p.s_min {
            good.push(i);
        }
    }

    let gram = naive_gram(positions, &dead, 0, p.d);
    let (values, vectors) = jacobi_eigen(&gram);
    let max = values[0];
    let keep: Vec<usize> = (0..values.len()).filter(|&j| values[j] > 1e-12 * max).collect();
    let spectrum: Vec<f64> = keep.iter().map(|&j| values[j]).collect();
    let e = erank(&spectrum);
    let k = if p.round { (e + 0.5).floor() } else { e.floor() } as usize;
    let k = k.clamp(1, spectrum.len());
    let factors: Mat = keep[..k].iter().map(|&j| vectors[j].clone()).collect();

    let mut holdings = Vec::new();
    let mut gammas = Vec::new();
    for &i in &good {
        let y: Vec<f64> = (0..m).map(|a| positions.get(i, a, 0)).collect();
        let res = ls_residual(&y, &factors);
        let norm = l1(&res);
        holdings.push(res.iter().map(|x| x / norm).collect());
        gammas.push(1.0 / norm);
    }

    OracleRun {
        expected,
        volatility,
        dead,
        good,
        spectrum,
        erank: e,
        k,
        factors,
        holdings,
        gammas,
    }
}
