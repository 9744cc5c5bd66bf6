//! Randomized invariant sweeps. Each returns `(cases, violations)`.

use exitcal_core::dataset::{Dataset, PricePoint, Side, Timestamp, TradeRecord};
use exitcal_core::exit_engine::{AtrLevels, ExitSimulator, FillReason};
use exitcal_core::{
    replay_portfolio, simulate_trade, simulate_with_overlay, CircuitBreaker, ExitConfig, OverlayConfig,
};
use rand::Rng;
use rust_decimal::Decimal;

use super::cases::{CaseGen, STEP_MS};

#[derive(Debug, Default, Clone, Copy)]
pub struct Tally {
    pub cases: usize,
    pub violations: usize,
}

impl Tally {
    fn check(&mut self, ok: bool) {
        self.cases += 1;
        if !ok {
            self.violations += 1;
        }
    }
}

pub fn fractions_sum_to_one(seed: u64, n: usize) -> Tally {
    let mut gen = CaseGen::new(seed);
    let mut t = Tally::default();
    for i in 0..n {
        let c = gen.config();
        let trade = gen.trade(i, &c, 20);
        let o = simulate_trade(&trade, &c, Decimal::ONE).unwrap();
        t.check(o.fills.iter().map(|f| f.fraction).sum::<Decimal>() == Decimal::ONE);
    }
    t
}

pub fn capture_gap_non_negative(seed: u64, n: usize) -> Tally {
    let mut gen = CaseGen::new(seed);
    let mut t = Tally::default();
    for i in 0..n {
        let c = gen.config();
        let trade = gen.trade(i, &c, 20);
        let o = simulate_trade(&trade, &c, Decimal::ONE).unwrap();
        t.check(o.capture_gap >= Decimal::ZERO && o.capture_gap == o.peak_unrealized_return - o.realized_return);
    }
    t
}

pub fn monotone_state(seed: u64, n: usize) -> Tally {
    let mut gen = CaseGen::new(seed);
    let mut t = Tally::default();
    for i in 0..n {
        let c = gen.config();
        let trade = gen.trade(i, &c, 20);
        let (stop, take_profit) = gen.atr_levels(&trade);
        let mut sim = ExitSimulator::new(&trade, c, AtrLevels { stop, take_profit }).unwrap();
        let mut prev = *sim.state();
        let mut ok = true;
        loop {
            let more = sim.step();
            let s = *sim.state();
            ok &= !(prev.trailing_armed && !s.trailing_armed);
            ok &= !(prev.ptp_fired && !s.ptp_fired);
            ok &= s.open_fraction <= prev.open_fraction;
            ok &= s.open_fraction >= Decimal::ZERO && s.open_fraction <= Decimal::ONE;
            ok &= !s.ptp_fired || s.open_fraction <= Decimal::ONE - c.ptp_fraction;
            prev = s;
            if !more {
                break;
            }
        }
        t.check(ok);
    }
    t
}

pub fn stale_close_timing(seed: u64, n: usize) -> Tally {
    let mut gen = CaseGen::new(seed);
    let mut t = Tally::default();
    for i in 0..n {
        let c = gen.config();
        let trade = gen.trade(i, &c, 20);
        let o = simulate_trade(&trade, &c, Decimal::ONE).unwrap();
        let deadline = trade.entry_time.millis() + i64::from(c.stale_hours) * 3_600_000;
        let first_due = trade.path.iter().find(|p| p.timestamp.millis() >= deadline).map(|p| p.timestamp);
        let ok = match first_due {
            None => o.fills.iter().all(|f| f.reason != FillReason::StaleClose),
            Some(due) => {
                o.exit_time() <= due
                    && o.fills.iter().filter(|f| f.reason == FillReason::StaleClose).all(|f| f.timestamp == due)
                    && o.exit_reason != FillReason::PathEnd
            }
        };
        t.check(ok);
    }
    t
}

/// Paths that wander strictly inside the rule band, then print exactly on
/// the stop level: realized loss must equal the stop-loss fraction.
pub fn exact_stop_without_gap(seed: u64, n: usize) -> Tally {
    let mut gen = CaseGen::new(seed);
    let mut t = Tally::default();
    for i in 0..n {
        let mut c = gen.config();
        c.stale_hours = 1000;
        let side = if gen.rng.random_bool(0.7) { Side::Long } else { Side::Short };
        let entry = Decimal::new(gen.rng.random_range(100..100_000), 2);
        let one = Decimal::ONE;
        let lo = c.stop_loss;
        let hi = c.trail_activation.min(c.ptp_threshold);
        let mut path = Vec::new();
        let steps = gen.rng.random_range(0..19);
        for k in 0..steps {
            // Offset strictly inside (−stop_loss, +min(activation, ptp)).
            let u = Decimal::new(gen.rng.random_range(1..1000), 3);
            let off = -lo + (lo + hi) * u;
            let p = match side {
                Side::Long => entry * (one + off),
                Side::Short => entry * (one - off),
            };
            path.push(PricePoint::new((k + 1) * STEP_MS, p));
        }
        let stop_px = match side {
            Side::Long => entry * (one - c.stop_loss),
            Side::Short => entry * (one + c.stop_loss),
        };
        path.push(PricePoint::new((steps + 1) * STEP_MS, stop_px));
        let trade = TradeRecord {
            trade_id: format!("stop-{i}"),
            symbol: "SYN".into(),
            side,
            entry_time: Timestamp(0),
            entry_price: entry,
            path,
            lookback: None,
        };
        let o = simulate_trade(&trade, &c, one).unwrap();
        t.check(o.exit_reason == FillReason::StopLoss && o.fills.len() == 1 && o.realized_return == -c.stop_loss);
    }
    t
}

pub fn random_dataset(gen: &mut CaseGen, n: usize, cfg: &ExitConfig) -> Dataset {
    let trades = (0..n).map(|i| gen.trade(i, cfg, 20)).collect();
    Dataset::from_trades(trades, String::new()).unwrap()
}

pub fn overlay_neutrality(seed: u64, datasets: usize) -> Tally {
    let mut gen = CaseGen::new(seed);
    let mut t = Tally::default();
    let neutral = OverlayConfig {
        atr_stop_mult: Decimal::from(1_000_000),
        atr_tp_mult: Decimal::from(1_000_000),
        breaker: CircuitBreaker::Disabled,
        atr_period: 14,
    };
    for _ in 0..datasets {
        let c = gen.config();
        let n = gen.rng.random_range(5..=15);
        let ds = random_dataset(&mut gen, n, &c);
        let base = replay_portfolio(&ds, &c).unwrap();
        let run = simulate_with_overlay(&ds, &c, &neutral, 1000.0).unwrap();
        for (a, b) in base.iter().zip(&run.outcomes) {
            t.check(a == b);
        }
        t.check(base.len() == run.outcomes.len() && run.details.iter().all(|d| d.sizing == Decimal::ONE));
    }
    t
}
