//! Second-pass overlay: entry-frozen ATR stop/take-profit levels and a
//! portfolio-level circuit breaker that cuts position size after a run of
//! losing trades.

use std::fmt;
use std::str::FromStr;

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Dataset, PricePoint, Side, Timestamp, TradeRecord};
use crate::exit_engine::{simulate_trade_with_levels, to_f64, AtrLevels, EngineError, ExitConfig, TradeOutcome};

pub const DEFAULT_ATR_PERIOD: usize = 14;

/// Circuit-breaker setting. `Disabled` carries no loss threshold, so
/// configurations that differ only in an unused threshold compare equal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CircuitBreaker {
    Disabled,
    Enabled { loss_threshold: u32, reduction_factor: Decimal },
}

impl CircuitBreaker {
    pub fn validate(&self) -> Result<(), String> {
        match *self {
            CircuitBreaker::Disabled => Ok(()),
            CircuitBreaker::Enabled { loss_threshold, reduction_factor } => {
                if loss_threshold == 0 {
                    return Err("cb_loss_threshold must be at least 1".into());
                }
                if !(reduction_factor > Decimal::ZERO && reduction_factor < Decimal::ONE) {
                    return Err(format!("cb_reduction_factor = {reduction_factor} must lie in (0, 1)"));
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct OverlayConfig {
    pub atr_stop_mult: Decimal,
    pub atr_tp_mult: Decimal,
    pub breaker: CircuitBreaker,
    #[serde(default = "default_period")]
    pub atr_period: usize,
}

fn default_period() -> usize {
    DEFAULT_ATR_PERIOD
}

impl OverlayConfig {
    /// 1.0× ATR stop, 2.0× ATR take-profit, size ×0.25 after 2 losses.
    pub fn recommended() -> Self {
        Self {
            atr_stop_mult: Decimal::new(10, 1),
            atr_tp_mult: Decimal::new(20, 1),
            breaker: CircuitBreaker::Enabled { loss_threshold: 2, reduction_factor: Decimal::new(25, 2) },
            atr_period: DEFAULT_ATR_PERIOD,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.atr_stop_mult <= Decimal::ZERO {
            return Err(format!("atr_stop_mult = {} must be positive", self.atr_stop_mult));
        }
        if self.atr_tp_mult <= Decimal::ZERO {
            return Err(format!("atr_tp_mult = {} must be positive", self.atr_tp_mult));
        }
        if self.atr_period == 0 {
            return Err("atr_period must be at least 1".into());
        }
        self.breaker.validate()
    }
}

/// Reduction factor axis value; `Disabled` turns the breaker off.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CbFactor {
    Reduce(Decimal),
    Disabled,
}

impl fmt::Display for CbFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CbFactor::Reduce(d) => write!(f, "{}", d.normalize()),
            CbFactor::Disabled => f.write_str("disabled"),
        }
    }
}

impl FromStr for CbFactor {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("disabled") || s.eq_ignore_ascii_case("off") {
            return Ok(CbFactor::Disabled);
        }
        Decimal::from_str(s).map(CbFactor::Reduce).map_err(|e| format!("bad reduction factor {s:?}: {e}"))
    }
}

impl CircuitBreaker {
    pub fn from_axes(loss_threshold: u32, factor: CbFactor) -> Self {
        match factor {
            CbFactor::Disabled => CircuitBreaker::Disabled,
            CbFactor::Reduce(reduction_factor) => CircuitBreaker::Enabled { loss_threshold, reduction_factor },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AtrSource {
    Lookback,
    PathWarmup,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AtrEstimate {
    #[serde(with = "rust_decimal::serde::arbitrary_precision")]
    pub value: Decimal,
    /// Number of true ranges that went into the estimate.
    pub n_periods: usize,
    pub source: AtrSource,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OverlayError {
    #[error("ATR needs at least 2 points, got {0}")]
    InsufficientPoints(usize),
    #[error("invalid overlay config: {0}")]
    InvalidConfig(String),
    #[error("notional must be positive")]
    InvalidNotional,
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Wilder-smoothed average of snapshot-to-snapshot absolute price changes.
///
/// The first `period` true ranges seed the average with their arithmetic
/// mean; each later range updates `atr = (atr·(period−1) + tr) / period`.
/// With fewer than `period + 1` points the mean of the available ranges is
/// returned.
pub fn compute_atr(points: &[PricePoint], period: usize, source: AtrSource) -> Result<AtrEstimate, OverlayError> {
    if points.len() < 2 {
        return Err(OverlayError::InsufficientPoints(points.len()));
    }
    let period = period.max(1);
    let ranges: Vec<Decimal> = points.windows(2).map(|w| (w[1].price - w[0].price).abs()).collect();
    let seed_len = ranges.len().min(period);
    let seed = ranges[..seed_len].iter().copied().sum::<Decimal>() / Decimal::from(seed_len);
    let weight = Decimal::from(period - 1);
    let n = Decimal::from(period);
    let value = ranges[seed_len..].iter().fold(seed, |atr, &tr| (atr * weight + tr) / n);
    Ok(AtrEstimate { value, n_periods: ranges.len(), source })
}

/// ATR available at entry: from the lookback when it has two or more
/// points, otherwise from the entry price followed by the first `period`
/// path snapshots.
pub fn entry_atr(trade: &TradeRecord, period: usize) -> Result<AtrEstimate, OverlayError> {
    match &trade.lookback {
        Some(lb) if lb.len() >= 2 => compute_atr(lb, period, AtrSource::Lookback),
        _ => {
            let mut warmup = Vec::with_capacity(period + 1);
            warmup.push(PricePoint { timestamp: trade.entry_time, price: trade.entry_price });
            warmup.extend(trade.path.iter().take(period).copied());
            compute_atr(&warmup, period, AtrSource::PathWarmup)
        }
    }
}

/// Stop and take-profit levels for one trade. Zero ATR disables both.
pub fn atr_levels(trade: &TradeRecord, atr: &AtrEstimate, overlay: &OverlayConfig) -> AtrLevels {
    if atr.value.is_zero() {
        return AtrLevels::default();
    }
    let stop_dist = overlay.atr_stop_mult * atr.value;
    let tp_dist = overlay.atr_tp_mult * atr.value;
    let e = trade.entry_price;
    match trade.side {
        Side::Long => AtrLevels { stop: Some(e - stop_dist), take_profit: Some(e + tp_dist) },
        Side::Short => AtrLevels { stop: Some(e + stop_dist), take_profit: Some(e - tp_dist) },
    }
}

/// Per-trade overlay detail for reporting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlayTrade {
    pub trade_id: String,
    #[serde(with = "rust_decimal::serde::arbitrary_precision")]
    pub sizing: Decimal,
    pub atr: AtrEstimate,
    pub atr_stop_level: Option<Decimal>,
    pub atr_tp_level: Option<Decimal>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OverlayRun {
    pub outcomes: Vec<TradeOutcome>,
    /// `notional · sizing · realized_return`, aligned with `outcomes`.
    pub sized_pnl: Vec<f64>,
    pub details: Vec<OverlayTrade>,
    /// Trades whose ATR was zero, so the ATR levels were not applied.
    pub zero_atr_trades: Vec<String>,
}

/// Assigns breaker sizing to trades in entry order. The loss counter only
/// sees trades that closed strictly before the current entry, in exit-time
/// order (ties by trade id); a closed trade with non-negative return resets
/// it.
pub fn breaker_sizing(outcomes: &[TradeOutcome], breaker: &CircuitBreaker) -> Vec<Decimal> {
    let CircuitBreaker::Enabled { loss_threshold, reduction_factor } = *breaker else {
        return vec![Decimal::ONE; outcomes.len()];
    };
    let mut by_exit: Vec<(Timestamp, &str, bool)> =
        outcomes.iter().map(|o| (o.exit_time(), o.trade_id.as_str(), o.realized_return < Decimal::ZERO)).collect();
    by_exit.sort();
    let mut next_closed = 0;
    let mut streak = 0u32;
    outcomes
        .iter()
        .map(|o| {
            while next_closed < by_exit.len() && by_exit[next_closed].0 < o.entry_time {
                streak = if by_exit[next_closed].2 { streak.saturating_add(1) } else { 0 };
                next_closed += 1;
            }
            if streak >= loss_threshold {
                reduction_factor
            } else {
                Decimal::ONE
            }
        })
        .collect()
}

/// Replays `trades` (entry order) with ATR levels added to `base` and the
/// circuit breaker applied to sizing.
pub fn simulate_with_overlay(
    trades: &Dataset,
    base: &ExitConfig,
    overlay: &OverlayConfig,
    notional: f64,
) -> Result<OverlayRun, OverlayError> {
    overlay.validate().map_err(OverlayError::InvalidConfig)?;
    if !(notional > 0.0 && notional.is_finite()) {
        return Err(OverlayError::InvalidNotional);
    }
    let mut run = OverlayRun::default();
    for trade in trades.trades() {
        let atr = entry_atr(trade, overlay.atr_period)?;
        let levels = atr_levels(trade, &atr, overlay);
        if atr.value.is_zero() {
            run.zero_atr_trades.push(trade.trade_id.clone());
        }
        run.outcomes.push(simulate_trade_with_levels(trade, base, levels, Decimal::ONE)?);
        run.details.push(OverlayTrade {
            trade_id: trade.trade_id.clone(),
            sizing: Decimal::ONE,
            atr,
            atr_stop_level: levels.stop,
            atr_tp_level: levels.take_profit,
        });
    }
    let sizing = breaker_sizing(&run.outcomes, &overlay.breaker);
    for ((outcome, detail), s) in run.outcomes.iter_mut().zip(run.details.iter_mut()).zip(sizing) {
        outcome.sizing = s;
        detail.sizing = s;
        run.sized_pnl.push(notional * to_f64(s) * outcome.realized_f64());
    }
    Ok(run)
}
