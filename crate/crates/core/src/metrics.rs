//! Portfolio metrics over replayed outcomes: cumulative-PnL equity curve,
//! maximum drawdown in currency, profit factor, and a daily-resampled
//! annualized Sharpe ratio.

use std::cmp::Ordering;
use std::fmt;

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Timestamp;
use crate::exit_engine::{to_f64, TradeOutcome};

pub const DAY_MS: i64 = 86_400_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("no trades to measure")]
    NoTrades,
    #[error("sized PnL has {got} entries for {expected} outcomes")]
    MisalignedSizing { expected: usize, got: usize },
    #[error("equity curve spans {0} return period(s); at least 2 are needed")]
    InsufficientSpan(usize),
    #[error("capital base must be positive")]
    InvalidCapitalBase,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquityPoint {
    pub timestamp: Timestamp,
    pub equity: f64,
}

/// Cumulative PnL over time. The curve starts at `starting_capital` at
/// `origin` (the earliest entry); each point is the equity after every
/// trade closing at that millisecond.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquityCurve {
    pub origin: Timestamp,
    pub starting_capital: f64,
    pub points: Vec<EquityPoint>,
    pub notional: f64,
}

impl EquityCurve {
    /// Equity values including the starting point.
    pub fn values(&self) -> Vec<f64> {
        std::iter::once(self.starting_capital).chain(self.points.iter().map(|p| p.equity)).collect()
    }

    pub fn final_equity(&self) -> f64 {
        self.points.last().map_or(self.starting_capital, |p| p.equity)
    }
}

/// Per-trade PnL in currency: `sized_pnl` when given, else `notional · r`.
pub fn trade_pnl(
    outcomes: &[TradeOutcome],
    sized_pnl: Option<&[f64]>,
    notional: f64,
) -> Result<Vec<f64>, MetricsError> {
    match sized_pnl {
        Some(s) if s.len() != outcomes.len() => {
            Err(MetricsError::MisalignedSizing { expected: outcomes.len(), got: s.len() })
        }
        Some(s) => Ok(s.to_vec()),
        None => Ok(outcomes.iter().map(|o| notional * o.realized_f64()).collect()),
    }
}

pub fn build_equity_curve(
    outcomes: &[TradeOutcome],
    sized_pnl: Option<&[f64]>,
    notional: f64,
) -> Result<EquityCurve, MetricsError> {
    if outcomes.is_empty() {
        return Err(MetricsError::NoTrades);
    }
    let pnl = trade_pnl(outcomes, sized_pnl, notional)?;
    let mut events: Vec<(Timestamp, &str, f64)> =
        outcomes.iter().zip(&pnl).map(|(o, &p)| (o.exit_time(), o.trade_id.as_str(), p)).collect();
    events.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(b.1)));

    let origin = outcomes.iter().map(|o| o.entry_time).min().expect("non-empty");
    let mut points: Vec<EquityPoint> = Vec::with_capacity(events.len());
    let mut equity = 0.0;
    for (ts, _, p) in events {
        equity += p;
        match points.last_mut() {
            Some(last) if last.timestamp == ts => last.equity = equity,
            _ => points.push(EquityPoint { timestamp: ts, equity }),
        }
    }
    Ok(EquityCurve { origin, starting_capital: 0.0, points, notional })
}

/// Largest peak-to-trough decline in a value sequence.
pub fn max_drawdown_of(values: &[f64]) -> f64 {
    let mut peak = f64::NEG_INFINITY;
    let mut worst = 0.0_f64;
    for &v in values {
        peak = peak.max(v);
        worst = worst.max(peak - v);
    }
    worst
}

pub fn max_drawdown(curve: &EquityCurve) -> f64 {
    max_drawdown_of(&curve.values())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ProfitFactor {
    Finite(f64),
    Infinite,
}

impl ProfitFactor {
    fn rank_key(self) -> f64 {
        match self {
            ProfitFactor::Finite(v) => v,
            ProfitFactor::Infinite => f64::INFINITY,
        }
    }

    pub fn cmp_value(&self, other: &Self) -> Ordering {
        self.rank_key().total_cmp(&other.rank_key())
    }
}

impl fmt::Display for ProfitFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProfitFactor::Finite(v) => write!(f, "{v:.6}"),
            ProfitFactor::Infinite => f.write_str("inf"),
        }
    }
}

pub fn profit_factor_of(pnl: &[f64]) -> Result<ProfitFactor, MetricsError> {
    if pnl.is_empty() {
        return Err(MetricsError::NoTrades);
    }
    let gains: f64 = pnl.iter().filter(|&&p| p > 0.0).sum();
    let losses: f64 = pnl.iter().filter(|&&p| p < 0.0).map(|p| -p).sum();
    Ok(if losses == 0.0 {
        if gains > 0.0 {
            ProfitFactor::Infinite
        } else {
            ProfitFactor::Finite(0.0)
        }
    } else {
        ProfitFactor::Finite(gains / losses)
    })
}

pub fn profit_factor(
    outcomes: &[TradeOutcome],
    sized_pnl: Option<&[f64]>,
    notional: f64,
) -> Result<ProfitFactor, MetricsError> {
    if outcomes.is_empty() {
        return Err(MetricsError::NoTrades);
    }
    profit_factor_of(&trade_pnl(outcomes, sized_pnl, notional)?)
}

/// Sharpe value. `Infinite` means zero variance with positive mean and
/// ranks above every finite value; `Undefined` is excluded from rankings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Sharpe {
    Finite(f64),
    Infinite,
    Undefined,
}

impl Sharpe {
    pub fn is_defined(&self) -> bool {
        !matches!(self, Sharpe::Undefined)
    }

    pub fn value(&self) -> Option<f64> {
        match *self {
            Sharpe::Finite(v) => Some(v),
            Sharpe::Infinite => Some(f64::INFINITY),
            Sharpe::Undefined => None,
        }
    }

    /// Ordering for defined values; undefined sorts lowest.
    pub fn cmp_value(&self, other: &Self) -> Ordering {
        let key = |s: &Sharpe| s.value().unwrap_or(f64::NEG_INFINITY);
        key(self).total_cmp(&key(other))
    }
}

impl fmt::Display for Sharpe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sharpe::Finite(v) => write!(f, "{v:.6}"),
            Sharpe::Infinite => f.write_str("inf"),
            Sharpe::Undefined => f.write_str("undefined"),
        }
    }
}

/// Resampling and annualization conventions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SharpeConfig {
    pub periods_per_year: f64,
    pub bucket_ms: i64,
    /// Sample (n−1) standard deviation when true, population otherwise.
    pub sample_std: bool,
}

impl Default for SharpeConfig {
    fn default() -> Self {
        Self { periods_per_year: 365.0, bucket_ms: DAY_MS, sample_std: true }
    }
}

/// Period-close returns: closes are forward-filled over empty buckets, and
/// the starting capital serves as the close before the origin bucket.
pub fn period_returns(curve: &EquityCurve, capital_base: f64, bucket_ms: i64) -> Vec<f64> {
    let bucket = |t: Timestamp| t.millis().div_euclid(bucket_ms);
    let first = bucket(curve.origin);
    let last = curve.points.last().map_or(first, |p| bucket(p.timestamp)).max(first);
    let mut returns = Vec::with_capacity((last - first + 1) as usize);
    let mut prev = curve.starting_capital;
    let mut close = curve.starting_capital;
    let mut idx = 0;
    for b in first..=last {
        while idx < curve.points.len() && bucket(curve.points[idx].timestamp) <= b {
            close = curve.points[idx].equity;
            idx += 1;
        }
        returns.push((close - prev) / capital_base);
        prev = close;
    }
    returns
}

pub fn sharpe_ratio(curve: &EquityCurve, capital_base: f64, config: &SharpeConfig) -> Result<Sharpe, MetricsError> {
    if capital_base.is_nan() || capital_base <= 0.0 {
        return Err(MetricsError::InvalidCapitalBase);
    }
    let r = period_returns(curve, capital_base, config.bucket_ms);
    if r.len() < 2 {
        return Err(MetricsError::InsufficientSpan(r.len()));
    }
    let n = r.len() as f64;
    let mean = r.iter().sum::<f64>() / n;
    let denom = if config.sample_std { n - 1.0 } else { n };
    let sd = (r.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / denom).sqrt();
    // Differences of cumulative float sums leave ~1e-16 relative noise.
    let scale = r.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if sd <= 1e-12 * scale {
        return Ok(if mean > 0.0 { Sharpe::Infinite } else { Sharpe::Undefined });
    }
    Ok(Sharpe::Finite(mean / sd * config.periods_per_year.sqrt()))
}

/// Portfolio-level summary for one configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub sharpe: Sharpe,
    pub profit_factor: ProfitFactor,
    pub max_drawdown: f64,
    pub total_pnl: f64,
    pub n_trades: usize,
    pub win_rate: f64,
    pub mean_capture_gap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsSettings {
    pub notional: f64,
    /// Denominator for period returns; defaults to `notional`.
    pub capital_base: Option<f64>,
    pub sharpe: SharpeConfig,
}

impl MetricsSettings {
    pub fn new(notional: f64) -> Self {
        Self { notional, capital_base: None, sharpe: SharpeConfig::default() }
    }

    pub fn capital_base(&self) -> f64 {
        self.capital_base.unwrap_or(self.notional)
    }
}

/// Full report. A curve too short for Sharpe yields `Sharpe::Undefined`.
pub fn evaluate(
    outcomes: &[TradeOutcome],
    sized_pnl: Option<&[f64]>,
    settings: &MetricsSettings,
) -> Result<MetricsReport, MetricsError> {
    let curve = build_equity_curve(outcomes, sized_pnl, settings.notional)?;
    let pnl = trade_pnl(outcomes, sized_pnl, settings.notional)?;
    let sharpe = match sharpe_ratio(&curve, settings.capital_base(), &settings.sharpe) {
        Ok(s) => s,
        Err(MetricsError::InsufficientSpan(_)) => Sharpe::Undefined,
        Err(e) => return Err(e),
    };
    let n = outcomes.len();
    let wins = outcomes.iter().filter(|o| o.realized_return > Decimal::ZERO).count();
    let gap = outcomes.iter().map(|o| to_f64(o.capture_gap)).sum::<f64>() / n as f64;
    Ok(MetricsReport {
        sharpe,
        profit_factor: profit_factor_of(&pnl)?,
        max_drawdown: max_drawdown(&curve),
        total_pnl: curve.final_equity(),
        n_trades: n,
        win_rate: wins as f64 / n as f64,
        mean_capture_gap: gap,
    })
}
