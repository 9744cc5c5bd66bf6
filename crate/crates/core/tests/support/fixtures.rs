//! The four hand-traced rule examples, plus an ATR gap-through.

use exitcal_core::dataset::{PricePoint, Side, Timestamp, TradeRecord};
use exitcal_core::exit_engine::{simulate_trade_with_levels, AtrLevels, FillReason, TradeOutcome};
use exitcal_core::ExitConfig;
use rust_decimal::Decimal;

use super::cases::STEP_MS;

pub const RETURN_TOLERANCE: &str = "0.000000001";

fn d(s: &str) -> Decimal {
    s.parse().unwrap()
}

fn long_trade(prices: &[&str]) -> TradeRecord {
    TradeRecord {
        trade_id: "hand".into(),
        symbol: "X".into(),
        side: Side::Long,
        entry_time: Timestamp(0),
        entry_price: d("100"),
        path: prices.iter().enumerate().map(|(i, p)| PricePoint::new((i as i64 + 1) * STEP_MS, d(p))).collect(),
        lookback: None,
    }
}

fn cfg(v: [&str; 5], hours: u32) -> ExitConfig {
    ExitConfig {
        stop_loss: d(v[0]),
        trail_activation: d(v[1]),
        trail_distance: d(v[2]),
        ptp_threshold: d(v[3]),
        ptp_fraction: d(v[4]),
        stale_hours: hours,
    }
}

fn run(t: &TradeRecord, c: &ExitConfig, levels: AtrLevels) -> TradeOutcome {
    simulate_trade_with_levels(t, c, levels, Decimal::ONE).unwrap()
}

type Expected = Vec<(&'static str, &'static str, FillReason)>;

fn check(out: &TradeOutcome, fills: Expected, realized: &str) -> Result<(), String> {
    let got: Vec<_> = out.fills.iter().map(|f| (f.price, f.fraction, f.reason)).collect();
    let want: Vec<_> = fills.iter().map(|&(p, f, r)| (d(p), d(f), r)).collect();
    if got != want {
        return Err(format!("fills {got:?}, expected {want:?}"));
    }
    if (out.realized_return - d(realized)).abs() > d(RETURN_TOLERANCE) {
        return Err(format!("realized {} expected {realized}", out.realized_return));
    }
    Ok(())
}

/// (name, verdict) for each traced example.
pub fn hand_traced() -> Vec<(&'static str, Result<(), String>)> {
    use FillReason::*;
    let none = AtrLevels::default();
    let gap = run(&long_trade(&["101", "95", "89.9", "102"]), &cfg(["0.10", "0.15", "0.08", "0.20", "0.25"], 72), none);
    let armed = run(&long_trade(&["103", "106", "103.9"]), &cfg(["0.25", "0.03", "0.02", "0.20", "0.25"], 72), none);
    let fall = run(&long_trade(&["100.5", "99.8", "100.7"]), &cfg(["0.5", "0.15", "0.08", "0.2", "0.5"], 72), none);
    let ptp = run(&long_trade(&["105.2", "108", "99"]), &cfg(["0.25", "0.03", "0.02", "0.05", "0.75"], 72), none);
    let atr_levels = AtrLevels { stop: Some(d("98.0")), take_profit: Some(d("104")) };
    let atr = run(&long_trade(&["99.2", "97.5"]), &ExitConfig::baseline(), atr_levels);
    vec![
        ("gap-through stop at 89.9", check(&gap, vec![("89.9", "1", StopLoss)], "-0.101")),
        (
            "trailing armed, untouched, path end",
            check(&armed, vec![("103.9", "1", PathEnd)], "0.039")
                .and_then(|_| (armed.peak_unrealized_return == d("0.06")).then_some(()).ok_or("peak".to_string())),
        ),
        ("nothing triggers, path end", check(&fall, vec![("100.7", "1", PathEnd)], "0.007")),
        (
            "PTP 75% then trailing remainder",
            check(&ptp, vec![("105.00", "0.75", PartialTakeProfit), ("99", "0.25", TrailingStop)], "0.035"),
        ),
        ("ATR stop gap-through", check(&atr, vec![("97.5", "1", AtrStop)], "-0.025")),
    ]
}
