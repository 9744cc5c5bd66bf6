//! Two-stage configuration search: exhaustive first-pass grid over the six
//! exit parameters, second-pass overlay refinement of the strongest bases,
//! ranking, heatmap aggregation, and the Sharpe/drawdown Pareto frontier.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Dataset;
use crate::exit_engine::{replay_portfolio, EngineError, ExitConfig};
use crate::metrics::{evaluate, MetricsError, MetricsReport, MetricsSettings};
use crate::overlay::{
    simulate_with_overlay, CbFactor, CircuitBreaker, OverlayConfig, OverlayError, DEFAULT_ATR_PERIOD,
};

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("grid axis {0} is empty")]
    EmptyAxis(&'static str),
    #[error("grid axis {axis}: {reason}")]
    InvalidAxis { axis: &'static str, reason: String },
    #[error("unknown axis {0:?}")]
    UnknownAxis(String),
    #[error("heatmap axes must differ")]
    SameAxis,
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("no base configurations to refine")]
    NoBaseConfigs,
    #[error("failed to build worker pool: {0}")]
    Pool(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Overlay(#[from] OverlayError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

fn decimals(values: &[(i64, u32)]) -> Vec<Decimal> {
    values.iter().map(|&(m, s)| Decimal::new(m, s)).collect()
}

/// Explicit value lists for each first-pass parameter.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub stop_loss: Vec<Decimal>,
    pub trail_activation: Vec<Decimal>,
    pub trail_distance: Vec<Decimal>,
    pub ptp_threshold: Vec<Decimal>,
    pub ptp_fraction: Vec<Decimal>,
    pub stale_hours: Vec<u32>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            stop_loss: decimals(&[(5, 2), (10, 2), (15, 2), (20, 2), (25, 2), (30, 2), (50, 2)]),
            trail_activation: decimals(&[(3, 2), (5, 2), (8, 2), (10, 2), (15, 2)]),
            trail_distance: decimals(&[(2, 2), (3, 2), (5, 2), (8, 2)]),
            ptp_threshold: decimals(&[(5, 2), (10, 2), (15, 2), (20, 2)]),
            ptp_fraction: decimals(&[(25, 2), (33, 2), (50, 2), (75, 2)]),
            stale_hours: vec![12, 24, 48, 72],
        }
    }
}

fn check_axis<T: PartialOrd + fmt::Display>(name: &'static str, values: &[T]) -> Result<(), SearchError> {
    if values.is_empty() {
        return Err(SearchError::EmptyAxis(name));
    }
    if let Some(w) = values.windows(2).find(|w| w[0] >= w[1]) {
        return Err(SearchError::InvalidAxis {
            axis: name,
            reason: format!("values must be strictly increasing ({} then {})", w[0], w[1]),
        });
    }
    Ok(())
}

impl GridSpec {
    /// A grid holding exactly one configuration.
    pub fn single(config: &ExitConfig) -> Self {
        Self {
            stop_loss: vec![config.stop_loss],
            trail_activation: vec![config.trail_activation],
            trail_distance: vec![config.trail_distance],
            ptp_threshold: vec![config.ptp_threshold],
            ptp_fraction: vec![config.ptp_fraction],
            stale_hours: vec![config.stale_hours],
        }
    }

    pub fn validate(&self) -> Result<(), SearchError> {
        check_axis("stop_loss", &self.stop_loss)?;
        check_axis("trail_activation", &self.trail_activation)?;
        check_axis("trail_distance", &self.trail_distance)?;
        check_axis("ptp_threshold", &self.ptp_threshold)?;
        check_axis("ptp_fraction", &self.ptp_fraction)?;
        check_axis("stale_hours", &self.stale_hours)?;
        // Corners of the box cover every per-field bound.
        for corner in [self.first(), self.last()] {
            corner.validate().map_err(|reason| SearchError::InvalidAxis { axis: "grid", reason })?;
        }
        Ok(())
    }

    fn first(&self) -> ExitConfig {
        ExitConfig {
            stop_loss: self.stop_loss[0],
            trail_activation: self.trail_activation[0],
            trail_distance: self.trail_distance[0],
            ptp_threshold: self.ptp_threshold[0],
            ptp_fraction: self.ptp_fraction[0],
            stale_hours: self.stale_hours[0],
        }
    }

    fn last(&self) -> ExitConfig {
        ExitConfig {
            stop_loss: *self.stop_loss.last().unwrap(),
            trail_activation: *self.trail_activation.last().unwrap(),
            trail_distance: *self.trail_distance.last().unwrap(),
            ptp_threshold: *self.ptp_threshold.last().unwrap(),
            ptp_fraction: *self.ptp_fraction.last().unwrap(),
            stale_hours: *self.stale_hours.last().unwrap(),
        }
    }

    pub fn len(&self) -> usize {
        self.stop_loss.len()
            * self.trail_activation.len()
            * self.trail_distance.len()
            * self.ptp_threshold.len()
            * self.ptp_fraction.len()
            * self.stale_hours.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Cartesian product, stop-loss outermost and stale hours innermost.
pub fn enumerate_grid(spec: &GridSpec) -> Result<Vec<ExitConfig>, SearchError> {
    spec.validate()?;
    let mut out = Vec::with_capacity(spec.len());
    for &stop_loss in &spec.stop_loss {
        for &trail_activation in &spec.trail_activation {
            for &trail_distance in &spec.trail_distance {
                for &ptp_threshold in &spec.ptp_threshold {
                    for &ptp_fraction in &spec.ptp_fraction {
                        for &stale_hours in &spec.stale_hours {
                            out.push(ExitConfig {
                                stop_loss,
                                trail_activation,
                                trail_distance,
                                ptp_threshold,
                                ptp_fraction,
                                stale_hours,
                            });
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalSettings {
    pub metrics: MetricsSettings,
    /// Worker threads; 0 lets the pool pick.
    pub jobs: usize,
}

impl EvalSettings {
    pub fn new(notional: f64) -> Self {
        Self { metrics: MetricsSettings::new(notional), jobs: 0 }
    }
}

/// One evaluated configuration, before ranking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub config: ExitConfig,
    pub overlay: Option<OverlayConfig>,
    pub metrics: MetricsReport,
    /// Breaker-free metrics under an overlay, for comparison with sized.
    pub unsized_metrics: Option<MetricsReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedResult {
    pub rank: usize,
    pub config: ExitConfig,
    pub overlay: Option<OverlayConfig>,
    pub metrics: MetricsReport,
    pub unsized_metrics: Option<MetricsReport>,
}

/// Ranked configurations plus those whose Sharpe was undefined.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SearchRun {
    pub ranked: Vec<RankedResult>,
    pub excluded: Vec<Evaluation>,
}

/// Sharpe descending, profit factor descending, then configuration
/// ascending field by field.
pub fn ranking_order(a: &Evaluation, b: &Evaluation) -> Ordering {
    b.metrics
        .sharpe
        .cmp_value(&a.metrics.sharpe)
        .then_with(|| b.metrics.profit_factor.cmp_value(&a.metrics.profit_factor))
        .then_with(|| a.config.cmp(&b.config))
        .then_with(|| a.overlay.cmp(&b.overlay))
}

pub fn rank(evaluations: Vec<Evaluation>) -> SearchRun {
    let (mut defined, excluded): (Vec<_>, Vec<_>) =
        evaluations.into_iter().partition(|e| e.metrics.sharpe.is_defined());
    defined.sort_by(ranking_order);
    let ranked = defined
        .into_iter()
        .enumerate()
        .map(|(i, e)| RankedResult {
            rank: i + 1,
            config: e.config,
            overlay: e.overlay,
            metrics: e.metrics,
            unsized_metrics: e.unsized_metrics,
        })
        .collect();
    SearchRun { ranked, excluded }
}

fn par_map<T, R, F>(jobs: usize, items: &[T], f: F) -> Result<Vec<R>, SearchError>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R, SearchError> + Sync,
{
    let pool =
        rayon::ThreadPoolBuilder::new().num_threads(jobs).build().map_err(|e| SearchError::Pool(e.to_string()))?;
    let results: Vec<Result<R, SearchError>> = pool.install(|| items.par_iter().map(&f).collect());
    results.into_iter().collect()
}

/// Replays `dataset` under `config` and measures it.
pub fn evaluate_config(
    dataset: &Dataset,
    config: &ExitConfig,
    settings: &MetricsSettings,
) -> Result<MetricsReport, SearchError> {
    let outcomes = replay_portfolio(dataset, config)?;
    Ok(evaluate(&outcomes, None, settings)?)
}

/// Overlay replay measured on sized PnL, plus the unsized counterpart.
pub fn evaluate_overlay(
    dataset: &Dataset,
    config: &ExitConfig,
    overlay: &OverlayConfig,
    settings: &MetricsSettings,
) -> Result<(MetricsReport, MetricsReport), SearchError> {
    let run = simulate_with_overlay(dataset, config, overlay, settings.notional)?;
    let sized = evaluate(&run.outcomes, Some(&run.sized_pnl), settings)?;
    let plain = evaluate(&run.outcomes, None, settings)?;
    Ok((sized, plain))
}

pub fn evaluate_configs(
    dataset: &Dataset,
    configs: &[ExitConfig],
    settings: &EvalSettings,
) -> Result<Vec<Evaluation>, SearchError> {
    if dataset.is_empty() {
        return Err(SearchError::EmptyDataset);
    }
    par_map(settings.jobs, configs, |c| {
        Ok(Evaluation {
            config: *c,
            overlay: None,
            metrics: evaluate_config(dataset, c, &settings.metrics)?,
            unsized_metrics: None,
        })
    })
}

pub fn evaluate_overlays(
    dataset: &Dataset,
    candidates: &[(ExitConfig, OverlayConfig)],
    settings: &EvalSettings,
) -> Result<Vec<Evaluation>, SearchError> {
    if dataset.is_empty() {
        return Err(SearchError::EmptyDataset);
    }
    par_map(settings.jobs, candidates, |(c, o)| {
        let (metrics, plain) = evaluate_overlay(dataset, c, o, &settings.metrics)?;
        Ok(Evaluation { config: *c, overlay: Some(*o), metrics, unsized_metrics: Some(plain) })
    })
}

/// Evaluates every grid configuration and ranks by Sharpe.
pub fn run_grid(dataset: &Dataset, spec: &GridSpec, settings: &EvalSettings) -> Result<SearchRun, SearchError> {
    let configs = enumerate_grid(spec)?;
    Ok(rank(evaluate_configs(dataset, &configs, settings)?))
}

/// Value lists for the four overlay parameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverlayAxes {
    pub atr_stop_mult: Vec<Decimal>,
    pub atr_tp_mult: Vec<Decimal>,
    pub cb_loss_threshold: Vec<u32>,
    pub cb_reduction_factor: Vec<CbFactor>,
    pub atr_period: usize,
}

impl Default for OverlayAxes {
    fn default() -> Self {
        Self {
            atr_stop_mult: decimals(&[(10, 1), (15, 1), (20, 1), (25, 1), (30, 1)]),
            atr_tp_mult: decimals(&[(20, 1), (30, 1), (40, 1), (60, 1)]),
            cb_loss_threshold: vec![2, 3, 4, 5],
            cb_reduction_factor: vec![
                CbFactor::Reduce(Decimal::new(25, 2)),
                CbFactor::Reduce(Decimal::new(50, 2)),
                CbFactor::Reduce(Decimal::new(75, 2)),
                CbFactor::Disabled,
            ],
            atr_period: DEFAULT_ATR_PERIOD,
        }
    }
}

impl OverlayAxes {
    pub fn validate(&self) -> Result<(), SearchError> {
        check_axis("atr_stop_mult", &self.atr_stop_mult)?;
        check_axis("atr_tp_mult", &self.atr_tp_mult)?;
        check_axis("cb_loss_threshold", &self.cb_loss_threshold)?;
        if self.cb_reduction_factor.is_empty() {
            return Err(SearchError::EmptyAxis("cb_reduction_factor"));
        }
        Ok(())
    }

    pub fn nominal_len(&self) -> usize {
        self.atr_stop_mult.len()
            * self.atr_tp_mult.len()
            * self.cb_loss_threshold.len()
            * self.cb_reduction_factor.len()
    }
}

/// One cell of the nominal pass-2 cross product and the unique
/// configuration it was evaluated as.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NominalEntry {
    pub nominal_index: usize,
    pub base_index: usize,
    pub atr_stop_mult: Decimal,
    pub atr_tp_mult: Decimal,
    pub cb_loss_threshold: u32,
    pub cb_reduction_factor: CbFactor,
    pub evaluated_index: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RefinePlan {
    pub nominal: Vec<NominalEntry>,
    /// Unique (base, overlay) pairs in first-seen order.
    pub unique: Vec<(ExitConfig, OverlayConfig)>,
}

/// Expands the pass-2 cross product. A disabled breaker ignores its loss
/// threshold, so those variants collapse onto one evaluated configuration.
pub fn plan_refinement(top_k: &[ExitConfig], axes: &OverlayAxes) -> Result<RefinePlan, SearchError> {
    if top_k.is_empty() {
        return Err(SearchError::NoBaseConfigs);
    }
    axes.validate()?;
    let mut plan = RefinePlan::default();
    let mut seen: BTreeMap<(ExitConfig, OverlayConfig), usize> = BTreeMap::new();
    for (base_index, base) in top_k.iter().enumerate() {
        for &atr_stop_mult in &axes.atr_stop_mult {
            for &atr_tp_mult in &axes.atr_tp_mult {
                for &cb_loss_threshold in &axes.cb_loss_threshold {
                    for &cb_reduction_factor in &axes.cb_reduction_factor {
                        let overlay = OverlayConfig {
                            atr_stop_mult,
                            atr_tp_mult,
                            breaker: CircuitBreaker::from_axes(cb_loss_threshold, cb_reduction_factor),
                            atr_period: axes.atr_period,
                        };
                        overlay.validate().map_err(|reason| SearchError::InvalidAxis { axis: "overlay", reason })?;
                        let key = (*base, overlay);
                        let evaluated_index = *seen.entry(key).or_insert_with(|| {
                            plan.unique.push(key);
                            plan.unique.len() - 1
                        });
                        plan.nominal.push(NominalEntry {
                            nominal_index: plan.nominal.len(),
                            base_index,
                            atr_stop_mult,
                            atr_tp_mult,
                            cb_loss_threshold,
                            cb_reduction_factor,
                            evaluated_index,
                        });
                    }
                }
            }
        }
    }
    Ok(plan)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RefineRun {
    pub plan: RefinePlan,
    pub search: SearchRun,
}

pub fn refine_pass2(
    dataset: &Dataset,
    top_k: &[ExitConfig],
    axes: &OverlayAxes,
    settings: &EvalSettings,
) -> Result<RefineRun, SearchError> {
    let plan = plan_refinement(top_k, axes)?;
    let search = rank(evaluate_overlays(dataset, &plan.unique, settings)?);
    Ok(RefineRun { plan, search })
}

/// First-pass parameter used as a heatmap axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    StopLoss,
    TrailActivation,
    TrailDistance,
    PtpThreshold,
    PtpFraction,
    StaleHours,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::StopLoss => "stop_loss",
            Axis::TrailActivation => "trail_activation",
            Axis::TrailDistance => "trail_distance",
            Axis::PtpThreshold => "ptp_threshold",
            Axis::PtpFraction => "ptp_fraction",
            Axis::StaleHours => "stale_hours",
        }
    }

    pub fn value(self, c: &ExitConfig) -> Decimal {
        match self {
            Axis::StopLoss => c.stop_loss,
            Axis::TrailActivation => c.trail_activation,
            Axis::TrailDistance => c.trail_distance,
            Axis::PtpThreshold => c.ptp_threshold,
            Axis::PtpFraction => c.ptp_fraction,
            Axis::StaleHours => Decimal::from(c.stale_hours),
        }
    }
}

impl FromStr for Axis {
    type Err = SearchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "stop_loss" | "sl" => Axis::StopLoss,
            "trail_activation" | "ta" => Axis::TrailActivation,
            "trail_distance" | "td" => Axis::TrailDistance,
            "ptp_threshold" | "ptp" => Axis::PtpThreshold,
            "ptp_fraction" | "pf" => Axis::PtpFraction,
            "stale_hours" | "hours" => Axis::StaleHours,
            other => return Err(SearchError::UnknownAxis(other.to_string())),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapCell {
    pub x: Decimal,
    pub y: Decimal,
    pub mean_sharpe: f64,
    pub n_configs: usize,
}

/// Mean Sharpe per (x, y) value pair, cells in ascending axis order.
pub fn heatmap(results: &[RankedResult], x_axis: Axis, y_axis: Axis) -> Result<Vec<HeatmapCell>, SearchError> {
    if x_axis == y_axis {
        return Err(SearchError::SameAxis);
    }
    let mut cells: BTreeMap<(Decimal, Decimal), (f64, usize)> = BTreeMap::new();
    for r in results {
        let Some(s) = r.metrics.sharpe.value() else { continue };
        let cell = cells.entry((x_axis.value(&r.config), y_axis.value(&r.config))).or_default();
        cell.0 += s;
        cell.1 += 1;
    }
    Ok(cells
        .into_iter()
        .map(|((x, y), (sum, n))| HeatmapCell { x, y, mean_sharpe: sum / n as f64, n_configs: n })
        .collect())
}

pub fn heatmap_by_name(results: &[RankedResult], x_axis: &str, y_axis: &str) -> Result<Vec<HeatmapCell>, SearchError> {
    heatmap(results, x_axis.parse()?, y_axis.parse()?)
}

/// `true` where a point is dominated under (maximize Sharpe, minimize
/// drawdown). Identical points do not dominate each other.
pub fn dominated_flags(points: &[(f64, f64)]) -> Vec<bool> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| points[a].1.total_cmp(&points[b].1).then(points[b].0.total_cmp(&points[a].0)));
    let mut flags = vec![false; points.len()];
    let mut best_before = f64::NEG_INFINITY;
    let mut i = 0;
    while i < order.len() {
        let dd = points[order[i]].1;
        let mut j = i;
        while j < order.len() && points[order[j]].1 == dd {
            j += 1;
        }
        // Group sorted by Sharpe descending, so its first entry is the max.
        let group_best = points[order[i]].0;
        for &k in &order[i..j] {
            flags[k] = points[k].0 < group_best || points[k].0 <= best_before;
        }
        best_before = best_before.max(group_best);
        i = j;
    }
    flags
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    /// Position of the source entry in the input results.
    pub index: usize,
    pub config: ExitConfig,
    pub overlay: Option<OverlayConfig>,
    pub sharpe: f64,
    pub max_drawdown: f64,
    pub dominated: bool,
}

/// Every result flagged for Pareto membership, ordered by drawdown
/// ascending then Sharpe descending.
pub fn pareto_frontier(results: &[RankedResult]) -> Vec<ParetoPoint> {
    let pts: Vec<(f64, f64)> = results
        .iter()
        .map(|r| (r.metrics.sharpe.value().unwrap_or(f64::NEG_INFINITY), r.metrics.max_drawdown))
        .collect();
    let flags = dominated_flags(&pts);
    let mut out: Vec<ParetoPoint> = results
        .iter()
        .enumerate()
        .map(|(i, r)| ParetoPoint {
            index: i,
            config: r.config,
            overlay: r.overlay,
            sharpe: pts[i].0,
            max_drawdown: pts[i].1,
            dominated: flags[i],
        })
        .collect();
    out.sort_by(|a, b| {
        a.max_drawdown.total_cmp(&b.max_drawdown).then(b.sharpe.total_cmp(&a.sharpe)).then(a.index.cmp(&b.index))
    });
    out
}
