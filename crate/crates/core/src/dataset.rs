//! Trade ingestion, validation, and train/test partitioning.
//!
//! Input is JSON-lines, one trade per line:
//!
//! ```text
//! {"trade_id": "t1", "symbol": "BTC", "side": "long", "entry_time": 1700000000000,
//!  "entry_price": "100.0", "path": [{"t": 1700000900000, "p": 101.2}, ...],
//!  "lookback": [{"t": ..., "p": ...}, ...]}
//! ```
//!
//! Prices are parsed straight from the JSON text into [`Decimal`], so a
//! load/serialize round trip reproduces every digit.

use std::cmp::Ordering;
use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use rand_core::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Milliseconds per hour.
pub const HOUR_MS: i64 = 3_600_000;

/// A UTC instant with millisecond resolution (unix epoch milliseconds).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Timestamp(pub i64);

impl Timestamp {
    pub fn millis(self) -> i64 {
        self.0
    }

    pub fn plus_hours(self, hours: u32) -> Timestamp {
        Timestamp(self.0 + i64::from(hours) * HOUR_MS)
    }

    /// Fractional hours elapsed from `earlier` to `self`.
    pub fn hours_since(self, earlier: Timestamp) -> f64 {
        (self.0 - earlier.0) as f64 / HOUR_MS as f64
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Long,
    Short,
}

/// One price-path snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PricePoint {
    #[serde(rename = "t")]
    pub timestamp: Timestamp,
    #[serde(rename = "p", with = "rust_decimal::serde::arbitrary_precision")]
    pub price: Decimal,
}

impl PricePoint {
    pub fn new(timestamp: i64, price: Decimal) -> Self {
        Self { timestamp: Timestamp(timestamp), price }
    }
}

/// One historical trade with its observed price path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TradeRecord {
    pub trade_id: String,
    pub symbol: String,
    pub side: Side,
    pub entry_time: Timestamp,
    #[serde(with = "rust_decimal::serde::arbitrary_precision")]
    pub entry_price: Decimal,
    pub path: Vec<PricePoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lookback: Option<Vec<PricePoint>>,
}

impl TradeRecord {
    /// Checks the record invariants, returning the first violation.
    pub fn validate(&self) -> Result<(), String> {
        if self.trade_id.is_empty() {
            return Err("trade_id is empty".into());
        }
        if self.entry_price <= Decimal::ZERO {
            return Err(format!("entry_price {} is not positive", self.entry_price));
        }
        if self.path.is_empty() {
            return Err("path is empty".into());
        }
        check_points(&self.path, "path")?;
        if let Some(first) = self.path.first() {
            if first.timestamp < self.entry_time {
                return Err(format!("path timestamp {} precedes entry_time {}", first.timestamp, self.entry_time));
            }
        }
        if let Some(lookback) = &self.lookback {
            check_points(lookback, "lookback")?;
            if let Some(last) = lookback.last() {
                if last.timestamp >= self.entry_time {
                    return Err(format!(
                        "lookback timestamp {} is not before entry_time {}",
                        last.timestamp, self.entry_time
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn last_point(&self) -> &PricePoint {
        self.path.last().expect("validated trade has a non-empty path")
    }
}

fn check_points(points: &[PricePoint], what: &str) -> Result<(), String> {
    for (i, pt) in points.iter().enumerate() {
        if pt.price <= Decimal::ZERO {
            return Err(format!("{what}[{i}] price {} is not positive", pt.price));
        }
        if i > 0 && points[i - 1].timestamp >= pt.timestamp {
            return Err(format!("{what}[{i}] timestamp {} is not strictly increasing", pt.timestamp));
        }
    }
    Ok(())
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("malformed record on line {line_no}: {message}")]
    MalformedRecord { line_no: usize, message: String },
    #[error("trade {trade_id} violates invariants: {reason}")]
    InvariantViolation { trade_id: String, reason: String },
    #[error("duplicate trade_id {0}")]
    DuplicateTradeId(String),
    #[error("dataset contains no trades")]
    EmptyDataset,
    #[error("split needs at least 2 trades, got {0}")]
    InsufficientTrades(usize),
    #[error("train_fraction {0} must lie strictly between 0 and 1")]
    InvalidTrainFraction(f64),
}

/// An immutable, entry-time-ordered trade set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    trades: Vec<TradeRecord>,
    source_digest: String,
}

fn entry_order(a: &TradeRecord, b: &TradeRecord) -> Ordering {
    a.entry_time.cmp(&b.entry_time).then_with(|| a.trade_id.cmp(&b.trade_id))
}

impl Dataset {
    /// Builds a dataset from already-validated records, sorting and
    /// rejecting duplicate ids.
    pub fn from_trades(mut trades: Vec<TradeRecord>, source_digest: String) -> Result<Self, DatasetError> {
        for t in &trades {
            t.validate().map_err(|reason| DatasetError::InvariantViolation { trade_id: t.trade_id.clone(), reason })?;
        }
        trades.sort_by(entry_order);
        let mut ids: Vec<&str> = trades.iter().map(|t| t.trade_id.as_str()).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(DatasetError::DuplicateTradeId(w[0].to_string()));
        }
        Ok(Self { trades, source_digest })
    }

    pub fn trades(&self) -> &[TradeRecord] {
        &self.trades
    }

    pub fn len(&self) -> usize {
        self.trades.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trades.is_empty()
    }

    /// Hex SHA-256 of the raw input bytes.
    pub fn source_digest(&self) -> &str {
        &self.source_digest
    }

    pub fn trade_ids(&self) -> Vec<&str> {
        self.trades.iter().map(|t| t.trade_id.as_str()).collect()
    }

    /// Writes the dataset back out as JSON-lines.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> io::Result<()> {
        for t in &self.trades {
            serde_json::to_writer(&mut out, t)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    fn subset(&self, mut trades: Vec<TradeRecord>) -> Dataset {
        trades.sort_by(entry_order);
        Dataset { trades, source_digest: self.source_digest.clone() }
    }
}

/// Per-line result of validating a JSON-lines file.
#[derive(Debug)]
pub struct LineCheck {
    pub line_no: usize,
    pub result: Result<TradeRecord, DatasetError>,
}

/// Parses and validates every non-blank line without stopping at the
/// first failure. Duplicate ids are reported on the later line.
pub fn check_file(file_path: &Path) -> Result<(Vec<LineCheck>, String), DatasetError> {
    let bytes =
        fs::read(file_path).map_err(|source| DatasetError::Io { path: file_path.display().to_string(), source })?;
    Ok(check_bytes(&bytes))
}

pub fn check_bytes(bytes: &[u8]) -> (Vec<LineCheck>, String) {
    let digest = hex::encode(Sha256::digest(bytes));
    let mut seen = std::collections::HashSet::new();
    let mut checks = Vec::new();
    for (idx, raw) in bytes.split(|&b| b == b'\n').enumerate() {
        let line_no = idx + 1;
        let line = match std::str::from_utf8(raw) {
            Ok(s) => s.trim(),
            Err(e) => {
                checks.push(LineCheck {
                    line_no,
                    result: Err(DatasetError::MalformedRecord { line_no, message: e.to_string() }),
                });
                continue;
            }
        };
        if line.is_empty() {
            continue;
        }
        let result = serde_json::from_str::<TradeRecord>(line)
            .map_err(|e| DatasetError::MalformedRecord { line_no, message: e.to_string() })
            .and_then(|t| {
                t.validate()
                    .map_err(|reason| DatasetError::InvariantViolation { trade_id: t.trade_id.clone(), reason })?;
                if !seen.insert(t.trade_id.clone()) {
                    return Err(DatasetError::DuplicateTradeId(t.trade_id));
                }
                Ok(t)
            });
        checks.push(LineCheck { line_no, result });
    }
    (checks, digest)
}

/// Loads a JSON-lines trade file, failing on the first bad record.
pub fn load_dataset(file_path: &Path) -> Result<Dataset, DatasetError> {
    let (checks, digest) = check_file(file_path)?;
    dataset_from_checks(checks, digest)
}

pub fn parse_dataset(bytes: &[u8]) -> Result<Dataset, DatasetError> {
    let (checks, digest) = check_bytes(bytes);
    dataset_from_checks(checks, digest)
}

fn dataset_from_checks(checks: Vec<LineCheck>, digest: String) -> Result<Dataset, DatasetError> {
    let trades = checks.into_iter().map(|c| c.result).collect::<Result<Vec<_>, _>>()?;
    if trades.is_empty() {
        return Err(DatasetError::EmptyDataset);
    }
    Dataset::from_trades(trades, digest)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitMode {
    Chronological,
    Randomized,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub mode: SplitMode,
    pub train_fraction: f64,
    /// Only consulted in randomized mode.
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self { mode: SplitMode::Chronological, train_fraction: 0.7, seed: 0 }
    }
}

impl SplitSpec {
    pub fn chronological(train_fraction: f64) -> Self {
        Self { mode: SplitMode::Chronological, train_fraction, seed: 0 }
    }

    pub fn randomized(train_fraction: f64, seed: u64) -> Self {
        Self { mode: SplitMode::Randomized, train_fraction, seed }
    }

    /// Number of trades assigned to train out of `n`.
    pub fn train_len(&self, n: usize) -> usize {
        (n as f64 * self.train_fraction).floor() as usize
    }
}

/// Portable shuffle generator: xoshiro256** seeded through SplitMix64.
pub struct ShuffleRng(Xoshiro256StarStar);

impl ShuffleRng {
    pub fn new(seed: u64) -> Self {
        Self(Xoshiro256StarStar::seed_from_u64(seed))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Unbiased integer in `0..bound` by rejection of the low zone.
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0);
        let reject_under = bound.wrapping_neg() % bound;
        loop {
            let x = self.next_u64();
            if x >= reject_under {
                return x % bound;
            }
        }
    }
}

/// In-place Fisher–Yates shuffle, high index to low.
pub fn fisher_yates<T>(items: &mut [T], rng: &mut ShuffleRng) {
    for i in (1..items.len()).rev() {
        let j = rng.below(i as u64 + 1) as usize;
        items.swap(i, j);
    }
}

/// Partitions a dataset into train and test. Both halves come back sorted
/// by entry time.
pub fn split(dataset: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset), DatasetError> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(DatasetError::InvalidTrainFraction(spec.train_fraction));
    }
    let n = dataset.len();
    if n < 2 {
        return Err(DatasetError::InsufficientTrades(n));
    }
    let mut order: Vec<TradeRecord> = dataset.trades.clone();
    if spec.mode == SplitMode::Randomized {
        fisher_yates(&mut order, &mut ShuffleRng::new(spec.seed));
    }
    let test = order.split_off(spec.train_len(n));
    Ok((dataset.subset(order), dataset.subset(test)))
}
