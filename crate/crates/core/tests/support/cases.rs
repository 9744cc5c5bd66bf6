//! Seeded random trades and configurations for oracle and invariant checks.

use exitcal_core::dataset::{PricePoint, Side, Timestamp, TradeRecord};
use exitcal_core::ExitConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rust_decimal::Decimal;

pub const STEP_MS: i64 = 15 * 60 * 1000;

pub struct CaseGen {
    pub rng: ChaCha8Rng,
}

impl CaseGen {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    fn pick<T: Copy>(&mut self, xs: &[T]) -> T {
        xs[self.rng.random_range(0..xs.len())]
    }

    fn cents(&mut self, lo: i64, hi: i64) -> Decimal {
        Decimal::new(self.rng.random_range(lo..=hi), 2)
    }

    pub fn config(&mut self) -> ExitConfig {
        if self.rng.random_bool(0.5) {
            ExitConfig {
                stop_loss: self.pick(&[5, 10, 15, 20, 25, 30, 50]).into(),
                trail_activation: self.pick(&[3, 5, 8, 10, 15]).into(),
                trail_distance: self.pick(&[2, 3, 5, 8]).into(),
                ptp_threshold: self.pick(&[5, 10, 15, 20]).into(),
                ptp_fraction: self.pick(&[25, 33, 50, 75]).into(),
                stale_hours: self.pick(&[1, 2, 3, 4, 6]),
            }
            .scaled()
        } else {
            ExitConfig {
                stop_loss: self.cents(1, 60),
                trail_activation: self.cents(1, 30),
                trail_distance: self.cents(1, 20),
                ptp_threshold: self.cents(1, 30),
                ptp_fraction: self.cents(1, 100),
                stale_hours: self.rng.random_range(1..=6),
            }
        }
    }

    /// A trade with at most `max_points` snapshots. Some snapshots land
    /// exactly on a rule level to exercise boundary comparisons.
    pub fn trade(&mut self, id: usize, cfg: &ExitConfig, max_points: usize) -> TradeRecord {
        let side = if self.rng.random_bool(0.75) { Side::Long } else { Side::Short };
        let entry = Decimal::new(self.rng.random_range(100..100_000), 2);
        let entry_time = 1_700_000_000_000 + self.rng.random_range(0..1_000) * STEP_MS;
        let n = self.rng.random_range(1..=max_points);
        let one = Decimal::ONE;
        let sign = if side == Side::Long { one } else { -one };
        let mut t = entry_time + self.rng.random_range(0..STEP_MS);
        let mut x = entry;
        let mut peak = entry;
        let mut path = Vec::with_capacity(n);
        for _ in 0..n {
            let roll = self.rng.random_range(0..10);
            x = match roll {
                0 => entry * (one - sign * cfg.stop_loss),
                1 => entry * (one + sign * cfg.ptp_threshold),
                2 => entry * (one + sign * cfg.trail_activation),
                3 => peak * (one - sign * cfg.trail_distance),
                _ => {
                    let step = Decimal::new(self.rng.random_range(-1200..=1200), 4);
                    (x * (one + step)).round_dp(4)
                }
            };
            if x <= Decimal::ZERO {
                x = Decimal::new(1, 2);
            }
            if side == Side::Long && x > peak || side == Side::Short && x < peak {
                peak = x;
            }
            path.push(PricePoint { timestamp: Timestamp(t), price: x });
            t += STEP_MS + self.rng.random_range(-60_000..=60_000);
        }
        TradeRecord {
            trade_id: format!("case-{id}"),
            symbol: "SYN".into(),
            side,
            entry_time: Timestamp(entry_time),
            entry_price: entry,
            path,
            lookback: None,
        }
    }

    /// Optional ATR-like levels around entry.
    pub fn atr_levels(&mut self, trade: &TradeRecord) -> (Option<Decimal>, Option<Decimal>) {
        if self.rng.random_bool(0.5) {
            return (None, None);
        }
        let atr = trade.entry_price * Decimal::new(self.rng.random_range(1..=500), 4);
        let sm = Decimal::new(self.rng.random_range(10..=30), 1);
        let tm = Decimal::new(self.rng.random_range(20..=60), 1);
        match trade.side {
            Side::Long => (Some(trade.entry_price - sm * atr), Some(trade.entry_price + tm * atr)),
            Side::Short => (Some(trade.entry_price + sm * atr), Some(trade.entry_price - tm * atr)),
        }
    }
}

trait Percent {
    fn scaled(self) -> Self;
}

impl Percent for ExitConfig {
    /// Integer percentages to fractions.
    fn scaled(mut self) -> Self {
        let h = Decimal::ONE_HUNDRED;
        self.stop_loss /= h;
        self.trail_activation /= h;
        self.trail_distance /= h;
        self.ptp_threshold /= h;
        self.ptp_fraction /= h;
        self
    }
}
