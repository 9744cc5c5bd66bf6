//! Brute-force counterparts of the metric and frontier computations.

use exitcal_core::dataset::{Dataset, TradeRecord};
use exitcal_core::metrics::{build_equity_curve, max_drawdown_of, sharpe_ratio, MetricsReport, SharpeConfig};
use exitcal_core::search::dominated_flags;
use exitcal_core::{enumerate_grid, replay_portfolio, GridSpec, ProfitFactor, RankedResult, Sharpe};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::cases::CaseGen;

/// O(n²) drawdown: the largest `v[i] − v[j]` over `i ≤ j`.
pub fn brute_max_drawdown(values: &[f64]) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..values.len() {
        for j in i..values.len() {
            if values[i] - values[j] > worst {
                worst = values[i] - values[j];
            }
        }
    }
    worst
}

/// Daily Sharpe from raw (timestamp, pnl) events. Each day's close is
/// recomputed as the sum of all PnL realized up to the end of that day.
pub fn naive_daily_sharpe(origin_ms: i64, events: &[(i64, f64)], capital: f64) -> f64 {
    let day = 86_400_000_i64;
    let first = origin_ms.div_euclid(day);
    let last = events.iter().map(|e| e.0.div_euclid(day)).max().unwrap().max(first);
    let close = |d: i64| -> f64 { events.iter().filter(|e| e.0.div_euclid(day) <= d).map(|e| e.1).sum() };
    let mut rets = Vec::new();
    let mut prev = 0.0;
    for d in first..=last {
        let c = close(d);
        rets.push((c - prev) / capital);
        prev = c;
    }
    let n = rets.len() as f64;
    let mut mean = 0.0;
    for r in &rets {
        mean += r;
    }
    mean /= n;
    let mut ss = 0.0;
    for r in &rets {
        ss += (r - mean) * (r - mean);
    }
    let sd = (ss / (n - 1.0)).sqrt();
    mean / sd * 365.0_f64.sqrt()
}

/// All-pairs domination under (maximize Sharpe, minimize drawdown).
pub fn brute_dominated(points: &[(f64, f64)]) -> Vec<bool> {
    points.iter().map(|&(s, d)| points.iter().any(|&(s2, d2)| s2 >= s && d2 <= d && (s2 > s || d2 < d))).collect()
}

/// Random walks of `len` points; returns (fast, brute) drawdown per curve.
pub fn drawdown_pairs(seed: u64, curves: usize, len: usize) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..curves)
        .map(|_| {
            let mut v = 0.0;
            let xs: Vec<f64> = (0..len)
                .map(|_| {
                    v += rng.random_range(-10.0..10.0);
                    v
                })
                .collect();
            (max_drawdown_of(&xs), brute_max_drawdown(&xs))
        })
        .collect()
}

fn shift(mut t: TradeRecord, ms: i64) -> TradeRecord {
    t.entry_time.0 += ms;
    for p in &mut t.path {
        p.timestamp.0 += ms;
    }
    t
}

/// A 60-day portfolio replayed through the engine. Returns the library
/// Sharpe and the naive-loop Sharpe.
pub fn sixty_day_sharpe(seed: u64) -> (f64, f64) {
    let mut gen = CaseGen::new(seed);
    let cfg = gen.config();
    let day = 86_400_000_i64;
    let trades: Vec<TradeRecord> = (0..240)
        .map(|i| {
            // Pin the first and second entries to the ends of the window.
            let d = match i {
                0 => 0,
                1 => 59,
                _ => gen.rng.random_range(0..60),
            };
            let t = gen.trade(i, &cfg, 20);
            let off = 1_700_000_000_000 + d * day - t.entry_time.millis();
            shift(t, off)
        })
        .collect();
    let ds = Dataset::from_trades(trades, String::new()).unwrap();
    let outcomes = replay_portfolio(&ds, &cfg).unwrap();
    let notional = 1000.0;
    let curve = build_equity_curve(&outcomes, None, notional).unwrap();
    let ours = match sharpe_ratio(&curve, notional, &SharpeConfig::default()).unwrap() {
        Sharpe::Finite(s) => s,
        other => panic!("expected finite Sharpe, got {other:?}"),
    };
    let origin = outcomes.iter().map(|o| o.entry_time.millis()).min().unwrap();
    let events: Vec<(i64, f64)> =
        outcomes.iter().map(|o| (o.exit_time().millis(), notional * o.realized_f64())).collect();
    let span = (curve.points.last().unwrap().timestamp.millis() - origin) / day;
    assert!(span >= 59, "span {span} days");
    (ours, naive_daily_sharpe(origin, &events, notional))
}

/// Random (Sharpe, DD) points on a coarse lattice so ties occur.
pub fn random_frontier_points(seed: u64, n: usize) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (rng.random_range(-40..40) as f64 / 20.0, rng.random_range(0..60) as f64 * 5.0)).collect()
}

/// Whether the sweep and the all-pairs check agree on every point.
pub fn pareto_agrees(seed: u64, n: usize) -> bool {
    let pts = random_frontier_points(seed, n);
    dominated_flags(&pts) == brute_dominated(&pts)
}

/// The default grid with seeded random finite Sharpe values attached.
pub fn synthetic_grid_results(seed: u64) -> Vec<RankedResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    enumerate_grid(&GridSpec::default())
        .unwrap()
        .into_iter()
        .enumerate()
        .map(|(i, config)| RankedResult {
            rank: i + 1,
            config,
            overlay: None,
            metrics: MetricsReport {
                sharpe: Sharpe::Finite(rng.random_range(-3.0..3.0)),
                profit_factor: ProfitFactor::Finite(rng.random_range(0.0..3.0)),
                max_drawdown: rng.random_range(0.0..500.0),
                total_pnl: 0.0,
                n_trades: 1,
                win_rate: 0.0,
                mean_capture_gap: 0.0,
            },
            unsized_metrics: None,
        })
        .collect()
}
