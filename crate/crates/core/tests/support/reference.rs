//! Naive reference replay. Recomputes the peak from scratch at every
//! snapshot and tests each rule in a flat list, sharing no code with the
//! engine beyond the record types.

use exitcal_core::dataset::{Side, TradeRecord};
use exitcal_core::exit_engine::{Fill, FillReason};
use exitcal_core::ExitConfig;
use rust_decimal::Decimal;

#[derive(Debug, Clone, PartialEq)]
pub struct RefOutcome {
    pub fills: Vec<Fill>,
    pub realized_return: Decimal,
    pub peak_unrealized_return: Decimal,
    pub capture_gap: Decimal,
    pub holding_hours: f64,
    pub exit_reason: FillReason,
}

pub fn reference_replay(
    trade: &TradeRecord,
    cfg: &ExitConfig,
    atr_stop: Option<Decimal>,
    atr_tp: Option<Decimal>,
) -> RefOutcome {
    let e = trade.entry_price;
    let one = Decimal::ONE;
    let is_long = trade.side == Side::Long;
    let gain = |p: Decimal| if is_long { (p - e) / e } else { (e - p) / e };
    // "down" means adverse for the side.
    let at_or_below = |p: Decimal, lvl: Decimal| if is_long { p <= lvl } else { p >= lvl };
    let at_or_above = |p: Decimal, lvl: Decimal| if is_long { p >= lvl } else { p <= lvl };

    let stop = if is_long { e * (one - cfg.stop_loss) } else { e * (one + cfg.stop_loss) };
    let arm = if is_long { e * (one + cfg.trail_activation) } else { e * (one - cfg.trail_activation) };
    let ptp = if is_long { e * (one + cfg.ptp_threshold) } else { e * (one - cfg.ptp_threshold) };
    let deadline = trade.entry_time.millis() + i64::from(cfg.stale_hours) * 3_600_000;

    let mut fills: Vec<Fill> = Vec::new();
    let mut open = one;
    let mut ptp_done = false;
    let mut processed = 0;

    for i in 0..trade.path.len() {
        processed = i + 1;
        let pt = trade.path[i];
        let p = pt.price;
        let mut peak = e;
        for q in &trade.path[..=i] {
            if is_long && q.price > peak || !is_long && q.price < peak {
                peak = q.price;
            }
        }
        let armed = trade.path[..=i].iter().any(|q| at_or_above(q.price, arm));
        let mut push = |price: Decimal, fraction: Decimal, reason: FillReason| {
            fills.push(Fill { timestamp: pt.timestamp, price, fraction, reason });
        };

        if at_or_below(p, stop) {
            push(p, open, FillReason::StopLoss);
            open = Decimal::ZERO;
            break;
        }
        if let Some(lvl) = atr_stop {
            if at_or_below(p, lvl) {
                push(p, open, FillReason::AtrStop);
                open = Decimal::ZERO;
                break;
            }
        }
        if armed {
            let trail = if is_long { peak * (one - cfg.trail_distance) } else { peak * (one + cfg.trail_distance) };
            if at_or_below(p, trail) {
                push(p, open, FillReason::TrailingStop);
                open = Decimal::ZERO;
                break;
            }
        }
        if !ptp_done && at_or_above(p, ptp) {
            ptp_done = true;
            let f = if cfg.ptp_fraction < open { cfg.ptp_fraction } else { open };
            push(ptp, f, FillReason::PartialTakeProfit);
            open -= f;
            if open.is_zero() {
                break;
            }
        }
        if let Some(lvl) = atr_tp {
            if at_or_above(p, lvl) {
                push(lvl, open, FillReason::AtrTakeProfit);
                open = Decimal::ZERO;
                break;
            }
        }
        if pt.timestamp.millis() >= deadline {
            push(p, open, FillReason::StaleClose);
            open = Decimal::ZERO;
            break;
        }
    }
    if !open.is_zero() {
        let last = *trade.path.last().unwrap();
        fills.push(Fill { timestamp: last.timestamp, price: last.price, fraction: open, reason: FillReason::PathEnd });
    }

    let mut realized = Decimal::ZERO;
    for f in &fills {
        realized += f.fraction * gain(f.price);
    }
    let mut peak_ret: Option<Decimal> = None;
    for p in trade.path[..processed].iter().map(|q| q.price).chain(fills.iter().map(|f| f.price)) {
        let g = gain(p);
        peak_ret = Some(match peak_ret {
            Some(b) if b >= g => b,
            _ => g,
        });
    }
    let peak_ret = peak_ret.unwrap();
    let last = fills.last().unwrap();
    RefOutcome {
        holding_hours: (last.timestamp.millis() - trade.entry_time.millis()) as f64 / 3_600_000.0,
        exit_reason: last.reason,
        realized_return: realized,
        peak_unrealized_return: peak_ret,
        capture_gap: peak_ret - realized,
        fills,
    }
}

#[derive(Debug, Default)]
pub struct OracleSweep {
    pub cases: usize,
    pub mismatches: Vec<String>,
    pub reasons: std::collections::BTreeSet<FillReason>,
}

/// Engine vs reference on `n` seeded random trades with ATR levels.
pub fn oracle_sweep(seed: u64, n: usize) -> OracleSweep {
    use exitcal_core::exit_engine::{simulate_trade_with_levels, AtrLevels};
    let mut gen = super::cases::CaseGen::new(seed);
    let mut sweep = OracleSweep::default();
    for i in 0..n {
        let config = gen.config();
        let trade = gen.trade(i, &config, 20);
        let (stop, tp) = gen.atr_levels(&trade);
        let got =
            simulate_trade_with_levels(&trade, &config, AtrLevels { stop, take_profit: tp }, Decimal::ONE).unwrap();
        let want = reference_replay(&trade, &config, stop, tp);
        let same = got.fills == want.fills
            && got.realized_return == want.realized_return
            && got.peak_unrealized_return == want.peak_unrealized_return
            && got.capture_gap == want.capture_gap
            && got.holding_hours == want.holding_hours
            && got.exit_reason == want.exit_reason;
        if !same {
            sweep.mismatches.push(format!("case {i}: {trade:?} {config:?}"));
        }
        sweep.reasons.extend(got.fills.iter().map(|f| f.reason));
        sweep.cases += 1;
    }
    sweep
}
