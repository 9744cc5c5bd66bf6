//! Counterfactual replay of a single trade under a parameterized exit stack.
//!
//! Snapshots are processed in timestamp order. Within one snapshot the rules
//! are checked in a fixed priority, loss side first:
//!
//! `StopLoss → AtrStop → TrailingStop → PartialTakeProfit → AtrTakeProfit → StaleClose`
//!
//! (the ATR rules are only present under an overlay). Stop-like rules fill at
//! the worse of their level and the snapshot price; limit-like rules fill at
//! their level exactly; stale and path-end closes fill at the snapshot price.
//! All trigger comparisons happen in price space against precomputed levels
//! using exact decimal arithmetic.

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Dataset, PricePoint, Side, Timestamp, TradeRecord};

/// The six first-pass exit parameters. Fractions are relative to entry price.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ExitConfig {
    pub stop_loss: Decimal,
    pub trail_activation: Decimal,
    pub trail_distance: Decimal,
    pub ptp_threshold: Decimal,
    pub ptp_fraction: Decimal,
    pub stale_hours: u32,
}

impl ExitConfig {
    /// Production defaults: SL 25%, TA 3%, TD 2%, PTP 5% for 50%, 24 h.
    pub fn baseline() -> Self {
        Self {
            stop_loss: Decimal::new(25, 2),
            trail_activation: Decimal::new(3, 2),
            trail_distance: Decimal::new(2, 2),
            ptp_threshold: Decimal::new(5, 2),
            ptp_fraction: Decimal::new(50, 2),
            stale_hours: 24,
        }
    }

    /// Recommended setting: SL 10%, TA 3%, TD 5%, PTP 10% for 75%, 48 h.
    pub fn recommended() -> Self {
        Self {
            stop_loss: Decimal::new(10, 2),
            trail_activation: Decimal::new(3, 2),
            trail_distance: Decimal::new(5, 2),
            ptp_threshold: Decimal::new(10, 2),
            ptp_fraction: Decimal::new(75, 2),
            stale_hours: 48,
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "baseline" => Some(Self::baseline()),
            "recommended" => Some(Self::recommended()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let unit = |name: &str, v: Decimal| {
            if v > Decimal::ZERO && v <= Decimal::ONE {
                Ok(())
            } else {
                Err(format!("{name} = {v} must lie in (0, 1]"))
            }
        };
        unit("stop_loss", self.stop_loss)?;
        unit("trail_activation", self.trail_activation)?;
        unit("trail_distance", self.trail_distance)?;
        unit("ptp_threshold", self.ptp_threshold)?;
        unit("ptp_fraction", self.ptp_fraction)?;
        if self.stop_loss >= Decimal::ONE {
            return Err(format!("stop_loss = {} must be below 1", self.stop_loss));
        }
        if self.trail_distance >= Decimal::ONE {
            return Err(format!("trail_distance = {} must be below 1", self.trail_distance));
        }
        if self.stale_hours == 0 {
            return Err("stale_hours must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FillReason {
    StopLoss,
    TrailingStop,
    PartialTakeProfit,
    StaleClose,
    AtrStop,
    AtrTakeProfit,
    PathEnd,
}

impl FillReason {
    pub fn as_str(self) -> &'static str {
        match self {
            FillReason::StopLoss => "stop_loss",
            FillReason::TrailingStop => "trailing_stop",
            FillReason::PartialTakeProfit => "partial_take_profit",
            FillReason::StaleClose => "stale_close",
            FillReason::AtrStop => "atr_stop",
            FillReason::AtrTakeProfit => "atr_take_profit",
            FillReason::PathEnd => "path_end",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fill {
    pub timestamp: Timestamp,
    #[serde(with = "rust_decimal::serde::arbitrary_precision")]
    pub price: Decimal,
    /// Fraction of the original position closed by this fill.
    #[serde(with = "rust_decimal::serde::arbitrary_precision")]
    pub fraction: Decimal,
    pub reason: FillReason,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeOutcome {
    pub trade_id: String,
    pub entry_time: Timestamp,
    pub fills: Vec<Fill>,
    #[serde(with = "rust_decimal::serde::arbitrary_precision")]
    pub realized_return: Decimal,
    #[serde(with = "rust_decimal::serde::arbitrary_precision")]
    pub peak_unrealized_return: Decimal,
    #[serde(with = "rust_decimal::serde::arbitrary_precision")]
    pub capture_gap: Decimal,
    pub holding_hours: f64,
    pub exit_reason: FillReason,
    #[serde(with = "rust_decimal::serde::arbitrary_precision")]
    pub sizing: Decimal,
}

impl TradeOutcome {
    pub fn exit_time(&self) -> Timestamp {
        self.fills.last().map(|f| f.timestamp).unwrap_or(self.entry_time)
    }

    pub fn realized_f64(&self) -> f64 {
        to_f64(self.realized_return)
    }
}

pub(crate) fn to_f64(d: Decimal) -> f64 {
    use rust_decimal::prelude::ToPrimitive;
    d.to_f64().unwrap_or(f64::NAN)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("trade {0}: empty price path")]
    EmptyPath(String),
    #[error("trade {0}: non-positive price")]
    NonPositivePrice(String),
    #[error("invalid exit config: {0}")]
    InvalidConfig(String),
    #[error("trade {trade_id}: sizing {sizing} must lie in (0, 1]")]
    InvalidSizing { trade_id: String, sizing: Decimal },
}

/// Side-dependent price arithmetic. Long positions gain when price rises;
/// short positions mirror every comparison.
#[derive(Debug, Clone, Copy)]
struct Direction(Side);

impl Direction {
    /// Entry-relative level `entry · (1 ± offset)` on the profitable side.
    fn above(self, base: Decimal, offset: Decimal) -> Decimal {
        match self.0 {
            Side::Long => base * (Decimal::ONE + offset),
            Side::Short => base * (Decimal::ONE - offset),
        }
    }

    /// Level `base · (1 ∓ offset)` on the losing side.
    fn below(self, base: Decimal, offset: Decimal) -> Decimal {
        match self.0 {
            Side::Long => base * (Decimal::ONE - offset),
            Side::Short => base * (Decimal::ONE + offset),
        }
    }

    /// `price` has reached or passed `level` in the adverse direction.
    fn adverse(self, price: Decimal, level: Decimal) -> bool {
        match self.0 {
            Side::Long => price <= level,
            Side::Short => price >= level,
        }
    }

    /// `price` has reached or passed `level` in the favorable direction.
    fn favorable(self, price: Decimal, level: Decimal) -> bool {
        match self.0 {
            Side::Long => price >= level,
            Side::Short => price <= level,
        }
    }

    fn better(self, a: Decimal, b: Decimal) -> Decimal {
        if self.favorable(a, b) {
            a
        } else {
            b
        }
    }

    fn worse(self, a: Decimal, b: Decimal) -> Decimal {
        if self.adverse(a, b) {
            a
        } else {
            b
        }
    }

    fn unrealized(self, entry: Decimal, price: Decimal) -> Decimal {
        match self.0 {
            Side::Long => (price - entry) / entry,
            Side::Short => (entry - price) / entry,
        }
    }
}

/// ATR-derived price levels injected by the second-pass overlay.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AtrLevels {
    pub stop: Option<Decimal>,
    pub take_profit: Option<Decimal>,
}

/// Price levels for one trade, fixed at entry.
#[derive(Debug, Clone, Copy)]
struct Levels {
    stop: Decimal,
    activation: Decimal,
    ptp: Decimal,
    atr: AtrLevels,
    stale_at: Timestamp,
}

/// Mutable replay state for one position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionState {
    pub open_fraction: Decimal,
    pub peak_price: Decimal,
    pub trailing_armed: bool,
    pub ptp_fired: bool,
    /// Index of the next snapshot to process.
    pub cursor: usize,
}

/// Step-wise exit simulator for one trade.
pub struct ExitSimulator<'a> {
    trade: &'a TradeRecord,
    config: ExitConfig,
    dir: Direction,
    levels: Levels,
    state: PositionState,
    fills: Vec<Fill>,
    best_observed: Option<Decimal>,
}

impl<'a> ExitSimulator<'a> {
    pub fn new(trade: &'a TradeRecord, config: ExitConfig, atr: AtrLevels) -> Result<Self, EngineError> {
        config.validate().map_err(EngineError::InvalidConfig)?;
        if trade.path.is_empty() {
            return Err(EngineError::EmptyPath(trade.trade_id.clone()));
        }
        if trade.entry_price <= Decimal::ZERO || trade.path.iter().any(|p| p.price <= Decimal::ZERO) {
            return Err(EngineError::NonPositivePrice(trade.trade_id.clone()));
        }
        let dir = Direction(trade.side);
        let entry = trade.entry_price;
        let levels = Levels {
            stop: dir.below(entry, config.stop_loss),
            activation: dir.above(entry, config.trail_activation),
            ptp: dir.above(entry, config.ptp_threshold),
            atr,
            stale_at: trade.entry_time.plus_hours(config.stale_hours),
        };
        Ok(Self {
            trade,
            config,
            dir,
            levels,
            state: PositionState {
                open_fraction: Decimal::ONE,
                peak_price: entry,
                trailing_armed: false,
                ptp_fired: false,
                cursor: 0,
            },
            fills: Vec::new(),
            best_observed: None,
        })
    }

    pub fn state(&self) -> &PositionState {
        &self.state
    }

    pub fn fills(&self) -> &[Fill] {
        &self.fills
    }

    pub fn is_done(&self) -> bool {
        self.state.open_fraction.is_zero() || self.state.cursor >= self.trade.path.len()
    }

    fn observe(&mut self, price: Decimal) {
        let r = self.dir.unrealized(self.trade.entry_price, price);
        self.best_observed = Some(self.best_observed.map_or(r, |b| b.max(r)));
    }

    fn fill(&mut self, at: &PricePoint, price: Decimal, fraction: Decimal, reason: FillReason) {
        self.observe(price);
        self.state.open_fraction -= fraction;
        self.fills.push(Fill { timestamp: at.timestamp, price, fraction, reason });
    }

    fn close(&mut self, at: &PricePoint, price: Decimal, reason: FillReason) {
        let rest = self.state.open_fraction;
        self.fill(at, price, rest, reason);
    }

    /// Processes the next snapshot. Returns `false` once the position is
    /// flat or the path is exhausted.
    pub fn step(&mut self) -> bool {
        if self.is_done() {
            return false;
        }
        let pt = self.trade.path[self.state.cursor];
        self.state.cursor += 1;
        let dir = self.dir;
        let p = pt.price;
        self.observe(p);
        self.state.peak_price = dir.better(self.state.peak_price, p);
        if !self.state.trailing_armed && dir.favorable(self.state.peak_price, self.levels.activation) {
            self.state.trailing_armed = true;
        }

        if dir.adverse(p, self.levels.stop) {
            self.close(&pt, dir.worse(p, self.levels.stop), FillReason::StopLoss);
            return false;
        }
        if let Some(level) = self.levels.atr.stop {
            if dir.adverse(p, level) {
                self.close(&pt, dir.worse(p, level), FillReason::AtrStop);
                return false;
            }
        }
        if self.state.trailing_armed {
            let trail = dir.below(self.state.peak_price, self.config.trail_distance);
            if dir.adverse(p, trail) {
                self.close(&pt, dir.worse(p, trail), FillReason::TrailingStop);
                return false;
            }
        }
        if !self.state.ptp_fired && dir.favorable(p, self.levels.ptp) {
            self.state.ptp_fired = true;
            let fraction = self.config.ptp_fraction.min(self.state.open_fraction);
            self.fill(&pt, self.levels.ptp, fraction, FillReason::PartialTakeProfit);
            if self.state.open_fraction.is_zero() {
                return false;
            }
        }
        if let Some(level) = self.levels.atr.take_profit {
            if dir.favorable(p, level) {
                self.close(&pt, level, FillReason::AtrTakeProfit);
                return false;
            }
        }
        if pt.timestamp >= self.levels.stale_at {
            self.close(&pt, p, FillReason::StaleClose);
            return false;
        }
        !self.is_done()
    }

    /// Runs to completion, closing any residual at the last snapshot.
    pub fn finish(mut self, sizing: Decimal) -> TradeOutcome {
        while self.step() {}
        if !self.state.open_fraction.is_zero() {
            let last = *self.trade.last_point();
            self.close(&last, last.price, FillReason::PathEnd);
        }
        let entry = self.trade.entry_price;
        let realized =
            self.fills.iter().fold(Decimal::ZERO, |acc, f| acc + f.fraction * self.dir.unrealized(entry, f.price));
        let peak = self.best_observed.expect("at least one snapshot processed");
        let last = self.fills.last().expect("position closed by at least one fill");
        TradeOutcome {
            trade_id: self.trade.trade_id.clone(),
            entry_time: self.trade.entry_time,
            realized_return: realized,
            peak_unrealized_return: peak,
            capture_gap: peak - realized,
            holding_hours: last.timestamp.hours_since(self.trade.entry_time),
            exit_reason: last.reason,
            sizing,
            fills: self.fills,
        }
    }
}

fn check_sizing(trade: &TradeRecord, sizing: Decimal) -> Result<(), EngineError> {
    if sizing > Decimal::ZERO && sizing <= Decimal::ONE {
        Ok(())
    } else {
        Err(EngineError::InvalidSizing { trade_id: trade.trade_id.clone(), sizing })
    }
}

/// Replays one trade under `config`. `sizing` scales PnL downstream and is
/// carried on the outcome; it does not change fills.
pub fn simulate_trade(trade: &TradeRecord, config: &ExitConfig, sizing: Decimal) -> Result<TradeOutcome, EngineError> {
    simulate_trade_with_levels(trade, config, AtrLevels::default(), sizing)
}

pub fn simulate_trade_with_levels(
    trade: &TradeRecord,
    config: &ExitConfig,
    atr: AtrLevels,
    sizing: Decimal,
) -> Result<TradeOutcome, EngineError> {
    check_sizing(trade, sizing)?;
    Ok(ExitSimulator::new(trade, *config, atr)?.finish(sizing))
}

/// Replays every trade at full size, preserving dataset order.
pub fn replay_portfolio(trades: &Dataset, config: &ExitConfig) -> Result<Vec<TradeOutcome>, EngineError> {
    trades.trades().iter().map(|t| simulate_trade(t, config, Decimal::ONE)).collect()
}
