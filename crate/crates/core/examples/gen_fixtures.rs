//! Regenerates the synthetic trade fixtures under `crates/core/fixtures/`.
//!
//! `cargo run -p exitcal-core --example gen_fixtures`

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use exitcal_core::{PricePoint, Side, Timestamp, TradeRecord};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rust_decimal::Decimal;

const STEP_MS: i64 = 15 * 60 * 1000;
// 2025-01-01T00:00:00Z
const EPOCH: i64 = 1_735_689_600_000;

struct Shape {
    n: usize,
    span_days: i64,
    min_points: usize,
    max_points: usize,
    lookback_every: usize,
    drift: (f64, f64),
}

fn price(x: f64) -> Decimal {
    Decimal::from_f64_retain((x * 1e4).round() / 1e4).unwrap().round_dp(4).normalize()
}

fn generate(seed: u64, prefix: &str, shape: &Shape) -> Vec<TradeRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let symbols = ["BTC", "ETH", "SOL", "AVAX", "LINK", "DOGE"];
    (0..shape.n)
        .map(|i| {
            let entry_time = EPOCH + rng.random_range(0..shape.span_days * 24 * 4) * STEP_MS;
            let entry = rng.random_range(5.0..500.0_f64);
            let vol = rng.random_range(0.003..0.02_f64);
            let drift = rng.random_range(shape.drift.0..shape.drift.1);
            let n_points = rng.random_range(shape.min_points..=shape.max_points);
            let mut x = entry;
            let offset = rng.random_range(0..STEP_MS / 60_000) * 60_000;
            let path: Vec<PricePoint> = (0..n_points)
                .map(|k| {
                    let shock: f64 = rng.random_range(-1.0..1.0) * vol * 1.7;
                    x *= (1.0 + drift + shock).max(0.5);
                    PricePoint::new(entry_time + offset + k as i64 * STEP_MS, price(x))
                })
                .collect();
            let lookback = (shape.lookback_every > 0 && i % shape.lookback_every == 0).then(|| {
                let mut y = entry;
                let mut back: Vec<PricePoint> = (1..=20)
                    .map(|k| {
                        y *= 1.0 + rng.random_range(-1.0..1.0) * vol;
                        PricePoint::new(entry_time - k * STEP_MS, price(y))
                    })
                    .collect();
                back.reverse();
                back
            });
            TradeRecord {
                trade_id: format!("{prefix}-{i:03}"),
                symbol: symbols[i % symbols.len()].to_string(),
                side: Side::Long,
                entry_time: Timestamp(entry_time),
                entry_price: price(entry),
                path,
                lookback,
            }
        })
        .collect()
}

fn write(path: &Path, trades: &[TradeRecord]) -> std::io::Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for t in trades {
        serde_json::to_writer(&mut out, t)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

fn main() -> std::io::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    std::fs::create_dir_all(&dir)?;
    let mini = Shape { n: 10, span_days: 6, min_points: 6, max_points: 120, lookback_every: 3, drift: (-0.006, 0.003) };
    write(&dir.join("mini_10.jsonl"), &generate(10, "mini", &mini))?;
    let regression =
        Shape { n: 100, span_days: 60, min_points: 24, max_points: 320, lookback_every: 2, drift: (-0.0017, 0.0023) };
    write(&dir.join("regression_100.jsonl"), &generate(100, "reg", &regression))?;
    Ok(())
}
