//! Price ingestion and the return pipeline: CSV panel -> simple returns ->
//! overlapping state windows -> train/test splits, plus the covariance
//! estimate the reward penalty is taken against.
//!
//! Rows with gaps, non-positive prices, or out-of-order dates are rejected
//! at load; nothing is ever imputed, since silent imputation would change
//! the covariance estimator.

use std::io::BufRead;

use serde::Serialize;
use thiserror::Error;

use crate::core::StateWindow;

#[derive(Debug, Error, PartialEq)]
pub enum DataError {
    #[error("parse error at line {line}: {detail}")]
    ParseError { line: usize, detail: String },
    #[error("non-positive price at line {line}, column {ticker}")]
    NonPositivePrice { line: usize, ticker: String },
    #[error("dates not strictly increasing at line {line}")]
    NonMonotoneDates { line: usize },
    #[error("too short: {detail}")]
    TooShort { detail: String },
    #[error("split out of range: {detail}")]
    SplitOutOfRange { detail: String },
}

/// A loaded panel of strictly positive prices on strictly increasing dates.
#[derive(Debug, Clone)]
pub struct PricePanel {
    pub dates: Vec<String>,
    /// Row-major `T x D`.
    pub prices: Vec<f64>,
    pub tickers: Vec<String>,
}

impl PricePanel {
    pub fn rows(&self) -> usize {
        self.dates.len()
    }

    pub fn n_assets(&self) -> usize {
        self.tickers.len()
    }

    pub fn row(&self, t: usize) -> &[f64] {
        let d = self.n_assets();
        &self.prices[t * d..(t + 1) * d]
    }
}

/// Simple returns between consecutive panel rows; each return row is
/// labelled with the date of the later price.
#[derive(Debug, Clone)]
pub struct ReturnPanel {
    pub dates: Vec<String>,
    /// Row-major `(T-1) x D`.
    pub returns: Vec<f64>,
    pub n_assets: usize,
}

impl ReturnPanel {
    pub fn rows(&self) -> usize {
        self.dates.len()
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.returns[t * self.n_assets..(t + 1) * self.n_assets]
    }

    pub fn row_vecs(&self) -> Vec<Vec<f64>> {
        (0..self.rows()).map(|t| self.row(t).to_vec()).collect()
    }

    fn slice(&self, range: std::ops::Range<usize>) -> ReturnPanel {
        let d = self.n_assets;
        ReturnPanel {
            dates: self.dates[range.clone()].to_vec(),
            returns: self.returns[range.start * d..range.end * d].to_vec(),
            n_assets: d,
        }
    }
}

fn valid_iso_date(s: &str) -> bool {
    let bytes = s.as_bytes();
    if bytes.len() != 10 || bytes[4] != b'-' || bytes[7] != b'-' {
        return false;
    }
    let digits = |r: std::ops::Range<usize>| bytes[r].iter().all(u8::is_ascii_digit);
    if !(digits(0..4) && digits(5..7) && digits(8..10)) {
        return false;
    }
    let month: u32 = s[5..7].parse().unwrap_or(0);
    let day: u32 = s[8..10].parse().unwrap_or(0);
    (1..=12).contains(&month) && (1..=31).contains(&day)
}

/// Parses `date,TICKER1,...,TICKERD` CSV with ISO-8601 dates and decimal
/// prices, enforcing every panel invariant.
pub fn load_prices<R: BufRead>(reader: R) -> Result<PricePanel, DataError> {
    let mut lines = reader.lines().enumerate();
    let (_, header) = lines.next().ok_or(DataError::ParseError {
        line: 1,
        detail: "empty input, expected a header row".into(),
    })?;
    let header = header.map_err(|e| DataError::ParseError { line: 1, detail: e.to_string() })?;
    let mut fields = header.split(',');
    let first = fields.next().unwrap_or("").trim();
    if !first.eq_ignore_ascii_case("date") {
        return Err(DataError::ParseError {
            line: 1,
            detail: format!("header must start with 'date', got '{first}'"),
        });
    }
    let tickers: Vec<String> = fields.map(|f| f.trim().to_string()).collect();
    if tickers.is_empty() || tickers.iter().any(String::is_empty) {
        return Err(DataError::ParseError {
            line: 1,
            detail: "header needs at least one non-empty ticker".into(),
        });
    }
    let d = tickers.len();

    let mut dates: Vec<String> = Vec::new();
    let mut prices: Vec<f64> = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line =
            line.map_err(|e| DataError::ParseError { line: line_no, detail: e.to_string() })?;
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != d + 1 {
            return Err(DataError::ParseError {
                line: line_no,
                detail: format!("expected {} cells, got {}", d + 1, cells.len()),
            });
        }
        let date = cells[0];
        if !valid_iso_date(date) {
            return Err(DataError::ParseError {
                line: line_no,
                detail: format!("'{date}' is not an ISO-8601 date"),
            });
        }
        if let Some(last) = dates.last() {
            // ISO dates order lexicographically
            if date <= last.as_str() {
                return Err(DataError::NonMonotoneDates { line: line_no });
            }
        }
        for (k, cell) in cells[1..].iter().enumerate() {
            if cell.is_empty() {
                return Err(DataError::ParseError {
                    line: line_no,
                    detail: format!("missing price for {}", tickers[k]),
                });
            }
            let value: f64 = cell.parse().map_err(|_| DataError::ParseError {
                line: line_no,
                detail: format!("'{cell}' is not a number"),
            })?;
            if !(value > 0.0) || !value.is_finite() {
                return Err(DataError::NonPositivePrice {
                    line: line_no,
                    ticker: tickers[k].clone(),
                });
            }
            prices.push(value);
        }
        dates.push(date.to_string());
    }
    if dates.is_empty() {
        return Err(DataError::TooShort { detail: "no data rows".into() });
    }
    Ok(PricePanel { dates, prices, tickers })
}

/// Elementwise simple returns `(S_t - S_{t-1}) / S_{t-1}`.
pub fn compute_returns(panel: &PricePanel) -> Result<ReturnPanel, DataError> {
    let t_rows = panel.rows();
    if t_rows < 2 {
        return Err(DataError::TooShort {
            detail: format!("{t_rows} price rows cannot form returns"),
        });
    }
    let d = panel.n_assets();
    let mut returns = Vec::with_capacity((t_rows - 1) * d);
    for t in 1..t_rows {
        let prev = panel.row(t - 1);
        let cur = panel.row(t);
        for k in 0..d {
            returns.push((cur[k] - prev[k]) / prev[k]);
        }
    }
    Ok(ReturnPanel { dates: panel.dates[1..].to_vec(), returns, n_assets: d })
}

/// Overlapping windows paired with the realized next return: pair `j`
/// holds rows `j..j+m` and row `j+m`. Consecutive windows share `m - 1`
/// rows.
pub fn build_windows(
    panel: &ReturnPanel,
    m: usize,
) -> Result<Vec<(StateWindow, Vec<f64>)>, DataError> {
    let rows = panel.rows();
    if m < 1 || rows < m + 1 {
        return Err(DataError::TooShort {
            detail: format!(
                "{rows} return rows cannot form any window of length {m} plus a successor"
            ),
        });
    }
    let mut out = Vec::with_capacity(rows - m);
    for j in 0..rows - m {
        let rows_slice: Vec<Vec<f64>> = (j..j + m).map(|t| panel.row(t).to_vec()).collect();
        let window =
            StateWindow::from_rows(&rows_slice).expect("panel rows are finite and rectangular");
        out.push((window, panel.row(j + m).to_vec()));
    }
    Ok(out)
}

/// Unbiased sample covariance of the return rows about their mean,
/// computed in two passes.
pub fn estimate_sigma_r(panel: &ReturnPanel) -> Result<Vec<f64>, DataError> {
    let n = panel.rows();
    if n < 2 {
        return Err(DataError::TooShort {
            detail: format!("{n} return rows cannot estimate a covariance"),
        });
    }
    let d = panel.n_assets;
    let mut mean = vec![0.0; d];
    for t in 0..n {
        for (k, v) in panel.row(t).iter().enumerate() {
            mean[k] += v;
        }
    }
    for v in &mut mean {
        *v /= n as f64;
    }
    let mut cov = vec![0.0; d * d];
    for t in 0..n {
        let row = panel.row(t);
        for a in 0..d {
            let da = row[a] - mean[a];
            for b in 0..d {
                cov[a * d + b] += da * (row[b] - mean[b]);
            }
        }
    }
    for v in &mut cov {
        *v /= (n - 1) as f64;
    }
    Ok(cov)
}

/// How to cut the return panel into a training stretch and test periods.
#[derive(Debug, Clone)]
pub enum SplitSpec {
    /// Leading fraction of rows trains; the remainder (if any) is a single
    /// test period.
    Fraction(f64),
    /// Rows up to and including `train_end` train; each `(start, end)`
    /// date range (inclusive) becomes one test period.
    Periods { train_end: String, periods: Vec<(String, String)> },
}

/// A test period plus rows of pre-period context prepended so that the
/// early in-period returns can be traded from full-length windows.
#[derive(Debug, Clone)]
pub struct TestPanel {
    pub panel: ReturnPanel,
    /// Leading rows that are context, not tradable period rows.
    pub warmup_rows: usize,
    pub label: String,
}

#[derive(Debug, Clone)]
pub struct SplitResult {
    pub train: ReturnPanel,
    pub tests: Vec<TestPanel>,
}

/// Split metadata emitted alongside training artifacts.
#[derive(Debug, Clone, Serialize)]
pub struct SplitSummary {
    pub train_rows: usize,
    pub train_start: String,
    pub train_end: String,
    pub test_periods: Vec<TestPeriodSummary>,
    pub sigma_r: Vec<f64>,
    pub n_assets: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct TestPeriodSummary {
    pub label: String,
    pub rows: usize,
    pub warmup_rows: usize,
    pub start: String,
    pub end: String,
}

/// Cuts the inclusive `[start_date, end_date]` range out of the panel,
/// prepending up to `warmup` rows of immediately preceding context.
pub fn period_slice(
    panel: &ReturnPanel,
    start_date: &str,
    end_date: &str,
    warmup: usize,
    label: String,
) -> Result<TestPanel, DataError> {
    if start_date > end_date {
        return Err(DataError::SplitOutOfRange {
            detail: format!("period {start_date}:{end_date} is reversed"),
        });
    }
    let first = panel
        .dates
        .iter()
        .position(|d| d.as_str() >= start_date)
        .ok_or_else(|| DataError::SplitOutOfRange {
            detail: format!("period start {start_date} beyond the data"),
        })?;
    let last = panel
        .dates
        .iter()
        .rposition(|d| d.as_str() <= end_date)
        .ok_or_else(|| DataError::SplitOutOfRange {
            detail: format!("period end {end_date} before the data"),
        })?;
    if last < first {
        return Err(DataError::SplitOutOfRange {
            detail: format!("period {start_date}:{end_date} contains no rows"),
        });
    }
    let context_start = first.saturating_sub(warmup);
    Ok(TestPanel {
        panel: panel.slice(context_start..last + 1),
        warmup_rows: first - context_start,
        label,
    })
}

/// Chronologically disjoint train/test split. Test panels carry up to
/// `warmup` rows of immediately preceding context, flagged by count.
pub fn train_test_split(
    panel: &ReturnPanel,
    spec: &SplitSpec,
    warmup: usize,
) -> Result<SplitResult, DataError> {
    let rows = panel.rows();
    match spec {
        SplitSpec::Fraction(f) => {
            if !(0.0..=1.0).contains(f) {
                return Err(DataError::SplitOutOfRange {
                    detail: format!("fraction {f} outside [0, 1]"),
                });
            }
            let train_rows = (rows as f64 * f).floor() as usize;
            if train_rows == 0 {
                return Err(DataError::SplitOutOfRange {
                    detail: "fraction leaves no training rows".into(),
                });
            }
            let train = panel.slice(0..train_rows);
            let tests = if train_rows == rows {
                Vec::new()
            } else {
                let start = train_rows.saturating_sub(warmup);
                vec![TestPanel {
                    panel: panel.slice(start..rows),
                    warmup_rows: train_rows - start,
                    label: "test".into(),
                }]
            };
            Ok(SplitResult { train, tests })
        }
        SplitSpec::Periods { train_end, periods } => {
            let train_rows = panel
                .dates
                .iter()
                .take_while(|d| d.as_str() <= train_end.as_str())
                .count();
            if train_rows == 0 {
                return Err(DataError::SplitOutOfRange {
                    detail: format!("train_end {train_end} precedes all data"),
                });
            }
            let train = panel.slice(0..train_rows);
            let mut tests = Vec::new();
            for (idx, (start_date, end_date)) in periods.iter().enumerate() {
                tests.push(period_slice(
                    panel,
                    start_date,
                    end_date,
                    warmup,
                    format!("period-{}", idx + 1),
                )?);
            }
            Ok(SplitResult { train, tests })
        }
    }
}
