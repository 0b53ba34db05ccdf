//! Options-chain and underlying-bar ingestion from flat CSV files.
//!
//! Chain schema: `date,ticker,expiry,strike,kind,open_interest,implied_vol,gamma,bid,ask`
//! (kind C or P, gamma may be empty). Bars schema: `date,open,high,low,close`.
//! The chain schema carries no spot column; [`attach_spots`] fills snapshot
//! spot from the matching bar close before any GEX work. Floats are written
//! back in shortest round-trip decimal form.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::greeks::OptionKind;

#[derive(Debug, Error)]
pub enum MarketDataError {
    #[error("{path}:{line}: malformed {field}: {detail}")]
    MalformedRow {
        path: PathBuf,
        line: u64,
        field: &'static str,
        detail: String,
    },
    #[error("{path}:{line}: negative open interest {value}")]
    NegativeOi {
        path: PathBuf,
        line: u64,
        value: i64,
    },
    #[error("{path}:{line}: inverted quote (ask {ask} < bid {bid})")]
    InvertedQuote {
        path: PathBuf,
        line: u64,
        bid: f64,
        ask: f64,
    },
    #[error("{path}:{line}: high {high} < low {low}")]
    HighLowInversion {
        path: PathBuf,
        line: u64,
        high: f64,
        low: f64,
    },
    #[error("{path}:{line}: duplicate date {date}")]
    DuplicateDate {
        path: PathBuf,
        line: u64,
        date: NaiveDate,
    },
    #[error("{path}: file contains no data rows")]
    EmptyFile { path: PathBuf },
    #[error("no bar close available for snapshot date {date}")]
    MissingSpot { date: NaiveDate },
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("csv error on {path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
}

/// One listed contract inside a daily snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptionContract {
    pub strike: f64,
    pub expiry: NaiveDate,
    pub kind: OptionKind,
    pub open_interest: u64,
    pub implied_vol: f64,
    /// Vendor per-share gamma; recomputed downstream when absent.
    pub gamma: Option<f64>,
    pub bid: f64,
    pub ask: f64,
}

/// One trading day's full chain for one underlying.
///
/// `spot` is 0.0 straight out of [`load_chain_file`] (the chain schema has no
/// spot column) and must be populated via [`attach_spots`]; GEX computation
/// rejects snapshots whose spot was never attached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSnapshot {
    pub as_of: NaiveDate,
    pub ticker: String,
    pub spot: f64,
    pub contracts: Vec<OptionContract>,
}

impl ChainSnapshot {
    /// Warns when the chain does not span at least +/-10% around spot.
    pub fn strike_coverage_warning(&self) -> Option<String> {
        if self.spot <= 0.0 {
            return None;
        }
        let max_dev = self
            .contracts
            .iter()
            .map(|c| (c.strike / self.spot - 1.0).abs())
            .fold(0.0_f64, f64::max);
        if max_dev < 0.10 {
            Some(format!(
                "{} {}: strike coverage spans only {:.1}% around spot (expected >= 10%)",
                self.as_of,
                self.ticker,
                max_dev * 100.0
            ))
        } else {
            None
        }
    }
}

/// Daily OHLC bar of the underlying.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnderlyingBar {
    pub date: NaiveDate,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
}

/// Ordered trading dates plus coverage against an expected count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calendar {
    pub dates: Vec<NaiveDate>,
    pub coverage_ratio: f64,
}

impl Calendar {
    /// Builds from distinct snapshot dates, ascending.
    pub fn from_snapshots(snapshots: &[ChainSnapshot], expected: u32) -> Self {
        Self::from_dates(snapshots.iter().map(|s| s.as_of).collect(), expected)
    }

    pub fn from_dates(mut dates: Vec<NaiveDate>, expected: u32) -> Self {
        dates.sort_unstable();
        dates.dedup();
        let coverage_ratio = if expected == 0 {
            0.0
        } else {
            dates.len() as f64 / expected as f64
        };
        Self {
            dates,
            coverage_ratio,
        }
    }

    /// Index of a trading date within the calendar.
    pub fn position(&self, date: NaiveDate) -> Option<usize> {
        self.dates.binary_search(&date).ok()
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }
}

/// Coverage summary against the validity threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub observed: u32,
    pub expected: u32,
    pub ratio: f64,
    pub threshold: f64,
    pub pass: bool,
}

/// Ratio + pass/fail against the coverage threshold (default 0.80).
pub fn coverage_report(calendar: &Calendar, expected: u32, threshold: f64) -> CoverageReport {
    let observed = calendar.len() as u32;
    let ratio = observed as f64 / expected as f64;
    CoverageReport {
        observed,
        expected,
        ratio,
        threshold,
        pass: ratio >= threshold,
    }
}

fn parse_date(
    raw: &str,
    path: &Path,
    line: u64,
    field: &'static str,
) -> Result<NaiveDate, MarketDataError> {
    NaiveDate::parse_from_str(raw.trim(), "%Y-%m-%d").map_err(|e| MarketDataError::MalformedRow {
        path: path.to_path_buf(),
        line,
        field,
        detail: format!("{raw:?}: {e}"),
    })
}

fn parse_f64(
    raw: &str,
    path: &Path,
    line: u64,
    field: &'static str,
) -> Result<f64, MarketDataError> {
    let v: f64 = raw
        .trim()
        .parse()
        .map_err(|e| MarketDataError::MalformedRow {
            path: path.to_path_buf(),
            line,
            field,
            detail: format!("{raw:?}: {e}"),
        })?;
    if !v.is_finite() {
        return Err(MarketDataError::MalformedRow {
            path: path.to_path_buf(),
            line,
            field,
            detail: format!("{raw:?}: not finite"),
        });
    }
    Ok(v)
}

/// Loads, validates, and groups a chain CSV into per-(date, ticker)
/// snapshots, sorted by date then ticker. Zero-OI contracts are retained;
/// they contribute nothing to GEX.
pub fn load_chain_file(path: &Path) -> Result<Vec<ChainSnapshot>, MarketDataError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|source| MarketDataError::Csv {
            path: path.to_path_buf(),
            source,
        })?;

    let mut groups: BTreeMap<(NaiveDate, String), Vec<OptionContract>> = BTreeMap::new();
    let mut any = false;
    for (idx, record) in reader.records().enumerate() {
        let line = idx as u64 + 2; // header occupies line 1
        let record = record.map_err(|source| MarketDataError::Csv {
            path: path.to_path_buf(),
            source,
        })?;
        any = true;
        let field = |i: usize| record.get(i).unwrap_or("");

        let date = parse_date(field(0), path, line, "date")?;
        let ticker = field(1).to_string();
        if ticker.is_empty() {
            return Err(MarketDataError::MalformedRow {
                path: path.to_path_buf(),
                line,
                field: "ticker",
                detail: "empty".into(),
            });
        }
        let expiry = parse_date(field(2), path, line, "expiry")?;
        let strike = parse_f64(field(3), path, line, "strike")?;
        if strike <= 0.0 {
            return Err(MarketDataError::MalformedRow {
                path: path.to_path_buf(),
                line,
                field: "strike",
                detail: format!("must be > 0, got {strike}"),
            });
        }
        if expiry < date {
            return Err(MarketDataError::MalformedRow {
                path: path.to_path_buf(),
                line,
                field: "expiry",
                detail: format!("expiry {expiry} precedes snapshot date {date}"),
            });
        }
        let kind = match field(4) {
            "C" => OptionKind::Call,
            "P" => OptionKind::Put,
            other => {
                return Err(MarketDataError::MalformedRow {
                    path: path.to_path_buf(),
                    line,
                    field: "kind",
                    detail: format!("expected C or P, got {other:?}"),
                })
            }
        };
        let oi_raw: i64 = field(5)
            .parse()
            .map_err(|e| MarketDataError::MalformedRow {
                path: path.to_path_buf(),
                line,
                field: "open_interest",
                detail: format!("{:?}: {e}", field(5)),
            })?;
        if oi_raw < 0 {
            return Err(MarketDataError::NegativeOi {
                path: path.to_path_buf(),
                line,
                value: oi_raw,
            });
        }
        let implied_vol = parse_f64(field(6), path, line, "implied_vol")?;
        if implied_vol <= 0.0 {
            return Err(MarketDataError::MalformedRow {
                path: path.to_path_buf(),
                line,
                field: "implied_vol",
                detail: format!("must be > 0, got {implied_vol}"),
            });
        }
        let gamma = if field(7).is_empty() {
            None
        } else {
            let g = parse_f64(field(7), path, line, "gamma")?;
            if g < 0.0 {
                return Err(MarketDataError::MalformedRow {
                    path: path.to_path_buf(),
                    line,
                    field: "gamma",
                    detail: format!("must be >= 0, got {g}"),
                });
            }
            Some(g)
        };
        let bid = parse_f64(field(8), path, line, "bid")?;
        if bid < 0.0 {
            return Err(MarketDataError::MalformedRow {
                path: path.to_path_buf(),
                line,
                field: "bid",
                detail: format!("must be >= 0, got {bid}"),
            });
        }
        let ask = parse_f64(field(9), path, line, "ask")?;
        if ask < bid {
            return Err(MarketDataError::InvertedQuote {
                path: path.to_path_buf(),
                line,
                bid,
                ask,
            });
        }

        groups.entry((date, ticker)).or_default().push(OptionContract {
            strike,
            expiry,
            kind,
            open_interest: oi_raw as u64,
            implied_vol,
            gamma,
            bid,
            ask,
        });
    }
    if !any {
        return Err(MarketDataError::EmptyFile {
            path: path.to_path_buf(),
        });
    }

    let snapshots = groups
        .into_iter()
        .map(|((as_of, ticker), mut contracts)| {
            // canonical in-memory order matches the canonical file order
            contracts.sort_by(|a, b| {
                a.expiry
                    .cmp(&b.expiry)
                    .then(a.strike.total_cmp(&b.strike))
                    .then_with(|| kind_rank(a.kind).cmp(&kind_rank(b.kind)))
            });
            ChainSnapshot {
                as_of,
                ticker,
                spot: 0.0,
                contracts,
            }
        })
        .collect::<Vec<_>>();
    for snapshot in &snapshots {
        if let Some(msg) = snapshot.strike_coverage_warning() {
            log::warn!("{msg}");
        }
    }
    Ok(snapshots)
}

/// Fills each snapshot's spot from the matching bar close.
pub fn attach_spots(
    snapshots: &mut [ChainSnapshot],
    bars: &[UnderlyingBar],
) -> Result<(), MarketDataError> {
    let closes: BTreeMap<NaiveDate, f64> = bars.iter().map(|b| (b.date, b.close)).collect();
    for snapshot in snapshots.iter_mut() {
        let close = closes
            .get(&snapshot.as_of)
            .copied()
            .ok_or(MarketDataError::MissingSpot {
                date: snapshot.as_of,
            })?;
        snapshot.spot = close;
        if let Some(msg) = snapshot.strike_coverage_warning() {
            log::warn!("{msg}");
        }
    }
    Ok(())
}

/// Loads daily bars, sorted by date, enforcing OHLC invariants and unique dates.
pub fn load_bars_file(path: &Path) -> Result<Vec<UnderlyingBar>, MarketDataError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|source| MarketDataError::Csv {
            path: path.to_path_buf(),
            source,
        })?;
    let mut bars: Vec<UnderlyingBar> = Vec::new();
    let mut seen: BTreeMap<NaiveDate, u64> = BTreeMap::new();
    let mut any = false;
    for (idx, record) in reader.records().enumerate() {
        let line = idx as u64 + 2;
        let record = record.map_err(|source| MarketDataError::Csv {
            path: path.to_path_buf(),
            source,
        })?;
        any = true;
        let field = |i: usize| record.get(i).unwrap_or("");
        let date = parse_date(field(0), path, line, "date")?;
        if seen.insert(date, line).is_some() {
            return Err(MarketDataError::DuplicateDate {
                path: path.to_path_buf(),
                line,
                date,
            });
        }
        let open = parse_f64(field(1), path, line, "open")?;
        let high = parse_f64(field(2), path, line, "high")?;
        let low = parse_f64(field(3), path, line, "low")?;
        let close = parse_f64(field(4), path, line, "close")?;
        if high < low {
            return Err(MarketDataError::HighLowInversion {
                path: path.to_path_buf(),
                line,
                high,
                low,
            });
        }
        if low <= 0.0 {
            return Err(MarketDataError::MalformedRow {
                path: path.to_path_buf(),
                line,
                field: "low",
                detail: format!("must be > 0, got {low}"),
            });
        }
        if high < open.max(close) || low > open.min(close) {
            return Err(MarketDataError::MalformedRow {
                path: path.to_path_buf(),
                line,
                field: "high",
                detail: format!(
                    "ohlc inconsistent: open {open} high {high} low {low} close {close}"
                ),
            });
        }
        bars.push(UnderlyingBar {
            date,
            open,
            high,
            low,
            close,
        });
    }
    if !any {
        return Err(MarketDataError::EmptyFile {
            path: path.to_path_buf(),
        });
    }
    bars.sort_by_key(|b| b.date);
    Ok(bars)
}

/// Canonical shortest round-trip decimal used in all CSV output.
pub fn fmt_f64(v: f64) -> String {
    let mut s = String::new();
    write!(s, "{v}").unwrap();
    s
}

fn fmt_opt_f64(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// Writes snapshots back in canonical form: rows sorted by
/// (date, ticker, expiry, strike, kind) with shortest round-trip floats.
pub fn write_chain_file(path: &Path, snapshots: &[ChainSnapshot]) -> Result<(), MarketDataError> {
    let mut rows: Vec<(&ChainSnapshot, &OptionContract)> = snapshots
        .iter()
        .flat_map(|s| s.contracts.iter().map(move |c| (s, c)))
        .collect();
    rows.sort_by(|(sa, ca), (sb, cb)| {
        (sa.as_of, &sa.ticker, ca.expiry)
            .cmp(&(sb.as_of, &sb.ticker, cb.expiry))
            .then(ca.strike.total_cmp(&cb.strike))
            .then_with(|| kind_rank(ca.kind).cmp(&kind_rank(cb.kind)))
    });
    let mut writer = csv::Writer::from_path(path).map_err(|source| MarketDataError::Csv {
        path: path.to_path_buf(),
        source,
    })?;
    writer
        .write_record([
            "date",
            "ticker",
            "expiry",
            "strike",
            "kind",
            "open_interest",
            "implied_vol",
            "gamma",
            "bid",
            "ask",
        ])
        .map_err(|source| MarketDataError::Csv {
            path: path.to_path_buf(),
            source,
        })?;
    for (snapshot, c) in rows {
        writer
            .write_record([
                snapshot.as_of.to_string(),
                snapshot.ticker.clone(),
                c.expiry.to_string(),
                fmt_f64(c.strike),
                match c.kind {
                    OptionKind::Call => "C".to_string(),
                    OptionKind::Put => "P".to_string(),
                },
                c.open_interest.to_string(),
                fmt_f64(c.implied_vol),
                fmt_opt_f64(c.gamma),
                fmt_f64(c.bid),
                fmt_f64(c.ask),
            ])
            .map_err(|source| MarketDataError::Csv {
                path: path.to_path_buf(),
                source,
            })?;
    }
    writer.flush().map_err(|source| MarketDataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(())
}

fn kind_rank(kind: OptionKind) -> u8 {
    match kind {
        OptionKind::Call => 0,
        OptionKind::Put => 1,
    }
}

/// Writes bars in canonical form, sorted by date.
pub fn write_bars_file(path: &Path, bars: &[UnderlyingBar]) -> Result<(), MarketDataError> {
    let mut sorted: Vec<&UnderlyingBar> = bars.iter().collect();
    sorted.sort_by_key(|b| b.date);
    let mut writer = csv::Writer::from_path(path).map_err(|source| MarketDataError::Csv {
        path: path.to_path_buf(),
        source,
    })?;
    writer
        .write_record(["date", "open", "high", "low", "close"])
        .map_err(|source| MarketDataError::Csv {
            path: path.to_path_buf(),
            source,
        })?;
    for b in sorted {
        writer
            .write_record([
                b.date.to_string(),
                fmt_f64(b.open),
                fmt_f64(b.high),
                fmt_f64(b.low),
                fmt_f64(b.close),
            ])
            .map_err(|source| MarketDataError::Csv {
                path: path.to_path_buf(),
                source,
            })?;
    }
    writer.flush().map_err(|source| MarketDataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    const CHAIN_HEADER: &str =
        "date,ticker,expiry,strike,kind,open_interest,implied_vol,gamma,bid,ask\n";

    #[test]
    fn two_rows_one_snapshot() {
        let f = write_tmp(&format!(
            "{CHAIN_HEADER}2024-01-16,SPY,2024-02-16,470,C,1000,0.18,,1.2,1.3\n2024-01-16,SPY,2024-02-16,470,P,500,0.19,0.004,1.0,1.1\n"
        ));
        let snaps = load_chain_file(f.path()).unwrap();
        assert_eq!(snaps.len(), 1);
        assert_eq!(snaps[0].contracts.len(), 2);
        assert_eq!(snaps[0].ticker, "SPY");
        assert_eq!(snaps[0].contracts[0].gamma, None);
        assert_eq!(snaps[0].contracts[1].gamma, Some(0.004));
    }

    #[test]
    fn negative_oi_is_an_error() {
        let f = write_tmp(&format!(
            "{CHAIN_HEADER}2024-01-16,SPY,2024-02-16,470,C,-5,0.18,,1.2,1.3\n"
        ));
        let err = load_chain_file(f.path()).unwrap_err();
        assert!(matches!(err, MarketDataError::NegativeOi { value: -5, .. }));
    }

    #[test]
    fn inverted_quote_is_an_error() {
        let f = write_tmp(&format!(
            "{CHAIN_HEADER}2024-01-16,SPY,2024-02-16,470,C,5,0.18,,1.5,1.2\n"
        ));
        let err = load_chain_file(f.path()).unwrap_err();
        assert!(matches!(err, MarketDataError::InvertedQuote { .. }));
    }

    #[test]
    fn empty_file_is_an_error() {
        let f = write_tmp(CHAIN_HEADER);
        assert!(matches!(
            load_chain_file(f.path()).unwrap_err(),
            MarketDataError::EmptyFile { .. }
        ));
    }

    #[test]
    fn malformed_row_reports_line_and_field() {
        let f = write_tmp(&format!(
            "{CHAIN_HEADER}2024-01-16,SPY,2024-02-16,470,C,10,0.18,,1.2,1.3\n2024-01-17,SPY,2024-02-16,oops,C,10,0.18,,1.2,1.3\n"
        ));
        match load_chain_file(f.path()).unwrap_err() {
            MarketDataError::MalformedRow { line, field, .. } => {
                assert_eq!(line, 3);
                assert_eq!(field, "strike");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn coverage_matches_trading_day_counts() {
        // 242 distinct dates against 253 expected -> 0.956..., pass.
        let dates: Vec<NaiveDate> = (0..242)
            .map(|i| NaiveDate::from_ymd_opt(2024, 1, 1).unwrap() + chrono::Days::new(i))
            .collect();
        let cal = Calendar::from_dates(dates, 253);
        assert!((cal.coverage_ratio - 242.0 / 253.0).abs() < 1e-12);
        let report = coverage_report(&cal, 253, 0.80);
        assert!(report.pass);
        assert!((report.ratio - 0.956).abs() < 1e-3);

        let full = Calendar::from_dates(
            (0..253)
                .map(|i| NaiveDate::from_ymd_opt(2024, 1, 1).unwrap() + chrono::Days::new(i))
                .collect(),
            253,
        );
        assert_eq!(coverage_report(&full, 253, 0.80).ratio, 1.0);

        let sparse = Calendar::from_dates(
            (0..100)
                .map(|i| NaiveDate::from_ymd_opt(2024, 1, 1).unwrap() + chrono::Days::new(i))
                .collect(),
            253,
        );
        let report = coverage_report(&sparse, 253, 0.80);
        assert!(!report.pass);
        assert!((report.ratio - 0.395).abs() < 5e-4);
    }

    #[test]
    fn bars_single_row_and_inversion() {
        let f = write_tmp("date,open,high,low,close\n2024-01-16,470,472,469,471\n");
        let bars = load_bars_file(f.path()).unwrap();
        assert_eq!(bars.len(), 1);
        assert_eq!(bars[0].close, 471.0);

        let f = write_tmp("date,open,high,low,close\n2024-01-16,470,469,472,471\n");
        assert!(matches!(
            load_bars_file(f.path()).unwrap_err(),
            MarketDataError::HighLowInversion { .. }
        ));
    }

    #[test]
    fn duplicate_bar_date_is_an_error() {
        let f = write_tmp(
            "date,open,high,low,close\n2024-01-16,470,472,469,471\n2024-01-16,470,472,469,471\n",
        );
        assert!(matches!(
            load_bars_file(f.path()).unwrap_err(),
            MarketDataError::DuplicateDate { .. }
        ));
    }

    #[test]
    fn attach_spots_fills_from_bar_close() {
        let f = write_tmp(&format!(
            "{CHAIN_HEADER}2024-01-16,SPY,2024-02-16,470,C,1000,0.18,,1.2,1.3\n"
        ));
        let mut snaps = load_chain_file(f.path()).unwrap();
        let bars = vec![UnderlyingBar {
            date: NaiveDate::from_ymd_opt(2024, 1, 16).unwrap(),
            open: 470.0,
            high: 472.0,
            low: 469.0,
            close: 471.25,
        }];
        attach_spots(&mut snaps, &bars).unwrap();
        assert_eq!(snaps[0].spot, 471.25);

        let mut missing = snaps.clone();
        missing[0].as_of = NaiveDate::from_ymd_opt(2024, 1, 17).unwrap();
        assert!(matches!(
            attach_spots(&mut missing, &bars).unwrap_err(),
            MarketDataError::MissingSpot { .. }
        ));
    }

    #[test]
    fn chain_round_trip_is_byte_identical() {
        let f = write_tmp(&format!(
            "{CHAIN_HEADER}2024-01-17,SPY,2024-02-16,480.5,P,10,0.21,0.0031,0.9,1\n2024-01-16,SPY,2024-02-16,470,C,1000,0.18,,1.2,1.3\n2024-01-16,SPY,2024-01-19,471,P,50,0.2,,0.5,0.6\n"
        ));
        let snaps = load_chain_file(f.path()).unwrap();
        let out1 = tempfile::NamedTempFile::new().unwrap();
        write_chain_file(out1.path(), &snaps).unwrap();
        let reloaded = load_chain_file(out1.path()).unwrap();
        assert_eq!(snaps, reloaded);
        let out2 = tempfile::NamedTempFile::new().unwrap();
        write_chain_file(out2.path(), &reloaded).unwrap();
        let b1 = std::fs::read(out1.path()).unwrap();
        let b2 = std::fs::read(out2.path()).unwrap();
        assert_eq!(b1, b2);
    }

    #[test]
    fn strike_coverage_warning_fires_on_narrow_chains() {
        let narrow = ChainSnapshot {
            as_of: NaiveDate::from_ymd_opt(2024, 1, 16).unwrap(),
            ticker: "SPY".into(),
            spot: 500.0,
            contracts: vec![OptionContract {
                strike: 505.0,
                expiry: NaiveDate::from_ymd_opt(2024, 1, 19).unwrap(),
                kind: OptionKind::Call,
                open_interest: 1,
                implied_vol: 0.2,
                gamma: None,
                bid: 0.0,
                ask: 0.1,
            }],
        };
        assert!(narrow.strike_coverage_warning().is_some());
        let mut wide = narrow.clone();
        wide.contracts.push(OptionContract {
            strike: 555.0,
            ..narrow.contracts[0]
        });
        assert!(wide.strike_coverage_warning().is_none());
    }

    #[test]
    fn snapshot_dates_unique_in_calendar() {
        let f = write_tmp(&format!(
            "{CHAIN_HEADER}2024-01-16,SPY,2024-02-16,470,C,1,0.2,,0,0.1\n2024-01-16,SPY,2024-02-16,480,C,1,0.2,,0,0.1\n2024-01-17,SPY,2024-02-16,470,C,1,0.2,,0,0.1\n"
        ));
        let snaps = load_chain_file(f.path()).unwrap();
        let cal = Calendar::from_snapshots(&snaps, 253);
        assert_eq!(cal.len(), 2);
        for s in &snaps {
            assert_eq!(cal.dates.iter().filter(|d| **d == s.as_of).count(), 1);
        }
    }
}
