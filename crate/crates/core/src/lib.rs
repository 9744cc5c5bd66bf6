//! Deterministic counterfactual replay of historical trades under
//! parameterized exit rules, with grid-search calibration and
//! risk-adjusted ranking.
//!
//! - [`dataset`]: JSON-lines ingestion, validation, and train/test splits.
//! - [`exit_engine`]: per-trade replay under stop-loss, trailing stop,
//!   partial take-profit, and stale-close rules.
//! - [`overlay`]: ATR stop/take-profit levels and the circuit breaker.
//! - [`metrics`]: equity curve, drawdown, profit factor, Sharpe.
//! - [`search`]: grid enumeration, ranking, heatmap, Pareto frontier.

pub mod dataset;
pub mod exit_engine;
pub mod metrics;
pub mod overlay;
pub mod search;

pub use dataset::{load_dataset, split, Dataset, PricePoint, Side, SplitMode, SplitSpec, Timestamp, TradeRecord};
pub use exit_engine::{replay_portfolio, simulate_trade, ExitConfig, Fill, FillReason, TradeOutcome};
pub use metrics::{MetricsReport, MetricsSettings, ProfitFactor, Sharpe};
pub use overlay::{compute_atr, simulate_with_overlay, CbFactor, CircuitBreaker, OverlayConfig};
pub use search::{enumerate_grid, refine_pass2, run_grid, EvalSettings, GridSpec, OverlayAxes, RankedResult};
