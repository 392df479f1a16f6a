//! Loading and validation of position, return and constraint panels.
//!
//! All panels use a canonical ordering: alphas and stocks sorted
//! lexicographically, dates sorted descending so that day index 0 is the
//! most recent trading day.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Default tolerance on `|sum_A |P_iAs| - 1|`.
pub const L1_TOLERANCE: f64 = 1e-8;

const DATE_FORMAT: &str = "%Y-%m-%d";

/// On-disk layout of a position file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PanelFormat {
    /// One row per `(date, alpha, symbol)` cell: `date,alpha_id,symbol,position`.
    #[default]
    Long,
}

impl FromStr for PanelFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "long" => Ok(Self::Long),
            other => Err(Error::Config(format!("unknown panel format '{other}'"))),
        }
    }
}

pub(crate) fn format_date(date: NaiveDate) -> String {
    date.format(DATE_FORMAT).to_string()
}

fn parse_date(path: &str, line: u64, raw: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(raw, DATE_FORMAT).map_err(|e| Error::Format {
        path: path.to_string(),
        line,
        message: format!("bad date '{raw}': {e}"),
    })
}

fn parse_value(path: &str, line: u64, raw: &str) -> Result<f64> {
    raw.parse::<f64>().map_err(|e| Error::Format {
        path: path.to_string(),
        line,
        message: format!("bad number '{raw}': {e}"),
    })
}

fn open_csv(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn csv_error(path: &Path, err: csv::Error) -> Error {
    let line = err.position().map(|p| p.line()).unwrap_or(0);
    Error::Format {
        path: path.display().to_string(),
        line,
        message: err.to_string(),
    }
}

/// Reads the header row. `Ok(None)` means the file is empty.
fn read_header(path: &Path, reader: &mut csv::Reader<File>) -> Result<Option<Vec<String>>> {
    let header = reader.headers().map_err(|e| csv_error(path, e))?;
    if header.is_empty() {
        return Ok(None);
    }
    Ok(Some(header.iter().map(str::to_string).collect()))
}

fn expect_header(path: &Path, found: &[String], expected: &[&str]) -> Result<()> {
    if found.iter().map(String::as_str).ne(expected.iter().copied()) {
        return Err(Error::Format {
            path: path.display().to_string(),
            line: 1,
            message: format!(
                "expected header '{}', found '{}'",
                expected.join(","),
                found.join(",")
            ),
        });
    }
    Ok(())
}

fn index_of<T: Ord + Clone>(set: &BTreeSet<T>) -> BTreeMap<T, usize> {
    set.iter().cloned().enumerate().map(|(i, k)| (k, i)).collect()
}

/// L1-normalized stock positions `P_iAs` of `N` alphas over `M` stocks and
/// `T` days.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionPanel {
    alphas: Vec<String>,
    stocks: Vec<String>,
    dates: Vec<NaiveDate>,
    // day-major: ((s * N) + i) * M + A
    values: Vec<f64>,
    zero_rows: Vec<(usize, usize)>,
}

impl PositionPanel {
    /// Builds a panel from canonical index lists and a day-major value
    /// buffer (`values[(s * N + i) * M + A]`).
    ///
    /// Every `(alpha, day)` row must either have unit L1 norm within
    /// `l1_tol` or be identically zero; zero rows are recorded as flagged.
    pub fn new(
        alphas: Vec<String>,
        stocks: Vec<String>,
        dates: Vec<NaiveDate>,
        values: Vec<f64>,
        l1_tol: f64,
    ) -> Result<Self> {
        let (n, m, t) = (alphas.len(), stocks.len(), dates.len());
        if n == 0 || m == 0 || t == 0 {
            return Err(Error::Validation("no data rows".into()));
        }
        if values.len() != n * m * t {
            return Err(Error::Index(format!(
                "value buffer has {} entries, expected {}",
                values.len(),
                n * m * t
            )));
        }
        if !alphas.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Index("alpha ids must be unique and sorted".into()));
        }
        if !stocks.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Index("stock symbols must be unique and sorted".into()));
        }
        if !dates.windows(2).all(|w| w[0] > w[1]) {
            return Err(Error::Index("dates must be unique and sorted descending".into()));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Validation(format!("non-finite position {v}")));
        }

        let mut zero_rows = Vec::new();
        for s in 0..t {
            for i in 0..n {
                let row = &values[(s * n + i) * m..(s * n + i + 1) * m];
                if row.iter().all(|&v| v == 0.0) {
                    zero_rows.push((i, s));
                    continue;
                }
                let l1: f64 = row.iter().map(|v| v.abs()).sum();
                if (l1 - 1.0).abs() > l1_tol {
                    return Err(Error::Validation(format!(
                        "positions of alpha '{}' on {} have L1 norm {l1}, expected 1",
                        alphas[i],
                        format_date(dates[s])
                    )));
                }
            }
        }
        if !zero_rows.is_empty() {
            log::info!("{} all-zero (alpha, day) position rows flagged", zero_rows.len());
        }

        Ok(Self {
            alphas,
            stocks,
            dates,
            values,
            zero_rows,
        })
    }

    /// Builds a panel from unordered `(date, alpha, symbol, position)` cells.
    /// Unreferenced cells are zero.
    pub fn from_cells(
        cells: impl IntoIterator<Item = (NaiveDate, String, String, f64)>,
        l1_tol: f64,
    ) -> Result<Self> {
        let cells: Vec<_> = cells.into_iter().collect();
        let alpha_set: BTreeSet<String> = cells.iter().map(|c| c.1.clone()).collect();
        let stock_set: BTreeSet<String> = cells.iter().map(|c| c.2.clone()).collect();
        let date_set: BTreeSet<std::cmp::Reverse<NaiveDate>> =
            cells.iter().map(|c| std::cmp::Reverse(c.0)).collect();
        let alpha_ix = index_of(&alpha_set);
        let stock_ix = index_of(&stock_set);
        let date_ix = index_of(&date_set);
        let (n, m, t) = (alpha_set.len(), stock_set.len(), date_set.len());

        let mut values = vec![0.0; n * m * t];
        let mut seen = vec![false; n * m * t];
        for (date, alpha, stock, v) in &cells {
            let s = date_ix[&std::cmp::Reverse(*date)];
            let idx = (s * n + alpha_ix[alpha]) * m + stock_ix[stock];
            if seen[idx] {
                return Err(Error::Validation(format!(
                    "duplicate position for ({}, {alpha}, {stock})",
                    format_date(*date)
                )));
            }
            seen[idx] = true;
            values[idx] = *v;
        }

        Self::new(
            alpha_set.into_iter().collect(),
            stock_set.into_iter().collect(),
            date_set.into_iter().map(|d| d.0).collect(),
            values,
            l1_tol,
        )
    }

    pub fn alphas(&self) -> &[String] {
        &self.alphas
    }

    pub fn stocks(&self) -> &[String] {
        &self.stocks
    }

    /// Dates, most recent first.
    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn n_alphas(&self) -> usize {
        self.alphas.len()
    }

    pub fn n_stocks(&self) -> usize {
        self.stocks.len()
    }

    pub fn n_days(&self) -> usize {
        self.dates.len()
    }

    /// Positions of alpha `i` on day `s`.
    pub fn row(&self, i: usize, s: usize) -> &[f64] {
        let (n, m) = (self.n_alphas(), self.n_stocks());
        &self.values[(s * n + i) * m..(s * n + i + 1) * m]
    }

    pub fn get(&self, i: usize, a: usize, s: usize) -> f64 {
        self.row(i, s)[a]
    }

    /// `(alpha, day)` pairs whose positions are identically zero.
    pub fn zero_rows(&self) -> &[(usize, usize)] {
        &self.zero_rows
    }

    pub fn is_zero_row(&self, i: usize, s: usize) -> bool {
        self.row(i, s).iter().all(|&v| v == 0.0)
    }

    pub fn alpha_index(&self, id: &str) -> Option<usize> {
        self.alphas.binary_search_by(|a| a.as_str().cmp(id)).ok()
    }

    /// Day-`s` positions of the listed alphas as a `len × M` matrix.
    pub fn day_matrix(&self, alphas: &[usize], s: usize) -> DMatrix<f64> {
        DMatrix::from_fn(alphas.len(), self.n_stocks(), |r, a| {
            self.get(alphas[r], a, s)
        })
    }

    /// Restricts the panel to a subset of alphas (given by index).
    pub fn select_alphas(&self, alphas: &[usize]) -> Result<Self> {
        let mut sorted = alphas.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        let (m, t) = (self.n_stocks(), self.n_days());
        let mut values = Vec::with_capacity(sorted.len() * m * t);
        for s in 0..t {
            for &i in &sorted {
                values.extend_from_slice(self.row(i, s));
            }
        }
        Self::new(
            sorted.iter().map(|&i| self.alphas[i].clone()).collect(),
            self.stocks.clone(),
            self.dates.clone(),
            values,
            f64::INFINITY,
        )
    }

    /// Non-zero cells in canonical order (date descending, alpha, stock).
    pub fn cells(&self) -> impl Iterator<Item = (NaiveDate, &str, &str, f64)> + '_ {
        (0..self.n_days()).flat_map(move |s| {
            (0..self.n_alphas()).flat_map(move |i| {
                self.row(i, s)
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(move |(a, &v)| {
                        (
                            self.dates[s],
                            self.alphas[i].as_str(),
                            self.stocks[a].as_str(),
                            v,
                        )
                    })
            })
        })
    }
}

/// Loads a position file with the default L1 tolerance.
pub fn load_positions(path: impl AsRef<Path>, format: PanelFormat) -> Result<PositionPanel> {
    load_positions_with(path, format, L1_TOLERANCE)
}

/// Loads a long-format position file: header `date,alpha_id,symbol,position`.
pub fn load_positions_with(
    path: impl AsRef<Path>,
    format: PanelFormat,
    l1_tol: f64,
) -> Result<PositionPanel> {
    let path = path.as_ref();
    let PanelFormat::Long = format;
    let shown = path.display().to_string();
    let mut reader = open_csv(path)?;
    let Some(header) = read_header(path, &mut reader)? else {
        return Err(Error::Validation(format!("{shown}: no data rows")));
    };
    expect_header(path, &header, &["date", "alpha_id", "symbol", "position"])?;

    let mut cells = Vec::new();
    let mut record = csv::StringRecord::new();
    loop {
        match reader.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => return Err(csv_error(path, e)),
        }
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let date = parse_date(&shown, line, &record[0])?;
        let value = parse_value(&shown, line, &record[3])?;
        if !value.is_finite() {
            return Err(Error::Validation(format!(
                "{shown} line {line}: non-finite position {value}"
            )));
        }
        cells.push((date, record[1].to_string(), record[2].to_string(), value));
    }
    if cells.is_empty() {
        return Err(Error::Validation(format!("{shown}: no data rows")));
    }
    PositionPanel::from_cells(cells, l1_tol)
}

/// Writes every non-zero cell of `panel` in long format.
pub fn write_positions(panel: &PositionPanel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(out, "date,alpha_id,symbol,position").map_err(io)?;
    for (date, alpha, stock, v) in panel.cells() {
        writeln!(out, "{},{alpha},{stock},{v}", format_date(date)).map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Realized daily stock returns `R_As`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnPanel {
    stocks: Vec<String>,
    dates: Vec<NaiveDate>,
    values: DMatrix<f64>,
    filled_cells: usize,
}

impl ReturnPanel {
    /// `values` is `M × T`, columns ordered like `dates` (most recent first).
    pub fn new(stocks: Vec<String>, dates: Vec<NaiveDate>, values: DMatrix<f64>) -> Result<Self> {
        if stocks.is_empty() || dates.is_empty() {
            return Err(Error::Validation("no data rows".into()));
        }
        if values.shape() != (stocks.len(), dates.len()) {
            return Err(Error::Index(format!(
                "return matrix is {:?}, expected {:?}",
                values.shape(),
                (stocks.len(), dates.len())
            )));
        }
        if !stocks.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Index("stock symbols must be unique and sorted".into()));
        }
        if !dates.windows(2).all(|w| w[0] > w[1]) {
            return Err(Error::Index("dates must be unique and sorted descending".into()));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Validation(format!("non-finite return {v}")));
        }
        Ok(Self {
            stocks,
            dates,
            values,
            filled_cells: 0,
        })
    }

    pub fn stocks(&self) -> &[String] {
        &self.stocks
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    /// `M × T` returns, most recent day in column 0.
    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// Number of `(stock, date)` cells absent from the source file and set to 0.
    pub fn filled_cells(&self) -> usize {
        self.filled_cells
    }

    /// Returns re-indexed to the given stock and date lists.
    pub fn aligned(&self, stocks: &[String], dates: &[NaiveDate]) -> Result<DMatrix<f64>> {
        let stock_ix: HashMap<&str, usize> = self
            .stocks
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i))
            .collect();
        let date_ix: HashMap<NaiveDate, usize> =
            self.dates.iter().enumerate().map(|(i, d)| (*d, i)).collect();
        let rows = stocks
            .iter()
            .map(|s| {
                stock_ix
                    .get(s.as_str())
                    .copied()
                    .ok_or_else(|| Error::Index(format!("no returns for stock '{s}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        let cols = dates
            .iter()
            .map(|d| {
                date_ix
                    .get(d)
                    .copied()
                    .ok_or_else(|| Error::Index(format!("no returns on {}", format_date(*d))))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(DMatrix::from_fn(rows.len(), cols.len(), |r, c| {
            self.values[(rows[r], cols[c])]
        }))
    }
}

/// Loads a returns file: header `date,symbol,return`. Missing cells are zero.
pub fn load_returns(path: impl AsRef<Path>) -> Result<ReturnPanel> {
    let path = path.as_ref();
    let shown = path.display().to_string();
    let mut reader = open_csv(path)?;
    let Some(header) = read_header(path, &mut reader)? else {
        return Err(Error::Validation(format!("{shown}: no data rows")));
    };
    expect_header(path, &header, &["date", "symbol", "return"])?;

    let mut cells: Vec<(NaiveDate, String, f64)> = Vec::new();
    let mut record = csv::StringRecord::new();
    loop {
        match reader.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => return Err(csv_error(path, e)),
        }
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let date = parse_date(&shown, line, &record[0])?;
        let value = parse_value(&shown, line, &record[2])?;
        if !value.is_finite() {
            return Err(Error::Validation(format!(
                "{shown} line {line}: non-finite return {value}"
            )));
        }
        cells.push((date, record[1].to_string(), value));
    }
    if cells.is_empty() {
        return Err(Error::Validation(format!("{shown}: no data rows")));
    }

    let stock_set: BTreeSet<String> = cells.iter().map(|c| c.1.clone()).collect();
    let date_set: BTreeSet<std::cmp::Reverse<NaiveDate>> =
        cells.iter().map(|c| std::cmp::Reverse(c.0)).collect();
    let stock_ix = index_of(&stock_set);
    let date_ix = index_of(&date_set);
    let (m, t) = (stock_set.len(), date_set.len());
    let mut values = DMatrix::zeros(m, t);
    let mut seen = DMatrix::from_element(m, t, false);
    for (date, stock, v) in &cells {
        let (a, s) = (stock_ix[stock], date_ix[&std::cmp::Reverse(*date)]);
        if seen[(a, s)] {
            return Err(Error::Validation(format!(
                "duplicate return for ({}, {stock})",
                format_date(*date)
            )));
        }
        seen[(a, s)] = true;
        values[(a, s)] = *v;
    }
    let filled = seen.iter().filter(|x| !**x).count();
    if filled > 0 {
        log::warn!("{shown}: {filled} missing (stock, date) return cells filled with 0");
    }

    let mut panel = ReturnPanel::new(
        stock_set.into_iter().collect(),
        date_set.into_iter().map(|d| d.0).collect(),
        values,
    )?;
    panel.filled_cells = filled;
    Ok(panel)
}

/// Writes every cell of `panel`: header `date,symbol,return`.
pub fn write_returns(panel: &ReturnPanel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(out, "date,symbol,return").map_err(io)?;
    for (s, date) in panel.dates.iter().enumerate() {
        let date = format_date(*date);
        for (a, stock) in panel.stocks.iter().enumerate() {
            writeln!(out, "{date},{stock},{}", panel.values[(a, s)]).map_err(io)?;
        }
    }
    out.flush().map_err(io)
}

/// Linear constraints `sum_A P_iAs Q_Aα = 0` shared by all alphas.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintMatrix {
    stocks: Vec<String>,
    columns: DMatrix<f64>,
}

impl ConstraintMatrix {
    /// `columns` is `M × p` with `p < M` linearly independent columns.
    pub fn new(stocks: Vec<String>, columns: DMatrix<f64>) -> Result<Self> {
        let (m, p) = columns.shape();
        if m != stocks.len() {
            return Err(Error::Index(format!(
                "constraint matrix has {m} rows for {} stocks",
                stocks.len()
            )));
        }
        if p == 0 || p >= m {
            return Err(Error::Validation(format!(
                "need 0 < p < M constraint columns, got p={p}, M={m}"
            )));
        }
        let sv = columns.clone().singular_values();
        let (lo, hi) = sv
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), &x| (lo.min(x), hi.max(x)));
        if !(lo > 1e-10 * hi) {
            return Err(Error::Validation(format!(
                "constraint columns are linearly dependent (singular values {lo:e}..{hi:e})"
            )));
        }
        Ok(Self { stocks, columns })
    }

    /// The single all-ones column: dollar neutrality.
    pub fn dollar_neutral(stocks: Vec<String>) -> Result<Self> {
        let m = stocks.len();
        Self::new(stocks, DMatrix::from_element(m, 1, 1.0))
    }

    pub fn stocks(&self) -> &[String] {
        &self.stocks
    }

    pub fn columns(&self) -> &DMatrix<f64> {
        &self.columns
    }
}

/// Loads a constraint file: header `symbol,c1,...,cp`.
pub fn load_constraints(path: impl AsRef<Path>) -> Result<ConstraintMatrix> {
    let path = path.as_ref();
    let shown = path.display().to_string();
    let mut reader = open_csv(path)?;
    let Some(header) = read_header(path, &mut reader)? else {
        return Err(Error::Validation(format!("{shown}: no data rows")));
    };
    let p = header.len().saturating_sub(1);
    let expected: Vec<String> = std::iter::once("symbol".to_string())
        .chain((1..=p).map(|k| format!("c{k}")))
        .collect();
    if p == 0 || header != expected {
        return Err(Error::Format {
            path: shown,
            line: 1,
            message: format!("expected header 'symbol,c1,...,cp', found '{}'", header.join(",")),
        });
    }

    let mut rows: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut record = csv::StringRecord::new();
    loop {
        match reader.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => return Err(csv_error(path, e)),
        }
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let values = (1..=p)
            .map(|k| parse_value(&shown, line, &record[k]))
            .collect::<Result<Vec<_>>>()?;
        if rows.insert(record[0].to_string(), values).is_some() {
            return Err(Error::Validation(format!(
                "duplicate constraint row for '{}'",
                &record[0]
            )));
        }
    }
    if rows.is_empty() {
        return Err(Error::Validation(format!("{shown}: no data rows")));
    }
    let m = rows.len();
    let columns = DMatrix::from_fn(m, p, |a, k| rows.values().nth(a).unwrap()[k]);
    ConstraintMatrix::new(rows.into_keys().collect(), columns)
}

/// `|sum_A P_iAs Q_Aα|` for one `(alpha, day, column)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintCheck {
    pub alpha: usize,
    pub day: usize,
    pub column: usize,
    pub value: f64,
    pub flagged: bool,
}

impl fmt::Display for ConstraintCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "alpha {} day {} column {}: {:e}{}",
            self.alpha,
            self.day,
            self.column,
            self.value,
            if self.flagged { " (violated)" } else { "" }
        )
    }
}

/// Evaluates every constraint column against every `(alpha, day)` row.
pub fn check_constraints(
    panel: &PositionPanel,
    q: &ConstraintMatrix,
    tol: f64,
) -> Result<Vec<ConstraintCheck>> {
    if panel.stocks() != q.stocks() {
        return Err(Error::Index(
            "position and constraint stock universes differ".into(),
        ));
    }
    let cols = q.columns();
    let mut report = Vec::with_capacity(panel.n_alphas() * panel.n_days() * cols.ncols());
    for s in 0..panel.n_days() {
        for i in 0..panel.n_alphas() {
            let row = panel.row(i, s);
            for (k, col) in cols.column_iter().enumerate() {
                let value = row
                    .iter()
                    .zip(col.iter())
                    .map(|(p, c)| p * c)
                    .sum::<f64>()
                    .abs();
                report.push(ConstraintCheck {
                    alpha: i,
                    day: s,
                    column: k,
                    value,
                    flagged: value > tol,
                });
            }
        }
    }
    Ok(report)
}
