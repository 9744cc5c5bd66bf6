use std::io::Write;

use exitcal_core::metrics::evaluate;
use exitcal_core::overlay::{AtrSource, OverlayTrade};
use exitcal_core::{replay_portfolio, simulate_with_overlay, ExitConfig, MetricsSettings, OverlayConfig};
use rust_decimal::Decimal;
use serde_json::json;

use super::{check_notional, load};
use crate::args::{OverlayPreset, SimulateArgs};
use crate::config::{parse_run_config, render_run_config, RunConfig};
use crate::error::{CliError, Result};
use crate::manifest::{now, RunManifest};
use crate::output::{d6, emit, f6, metrics_json, pf_str, read_file, sharpe_str, OutDir, Table};

const OUTCOME_HEADER: [&str; 15] = [
    "trade_id",
    "side",
    "entry_time",
    "exit_time",
    "exit_reason",
    "n_fills",
    "realized_return",
    "peak_unrealized_return",
    "capture_gap",
    "holding_hours",
    "sizing",
    "pnl",
    "atr_value",
    "atr_stop_level",
    "atr_tp_level",
];

pub fn resolve(a: &SimulateArgs) -> Result<RunConfig> {
    if let Some(p) = &a.config {
        return Ok(parse_run_config(&read_file(p)?)?);
    }
    let preset = a.preset.ok_or_else(|| CliError::Usage("give --preset or --config".into()))?;
    let exit = ExitConfig::preset(preset.name()).expect("preset names match");
    let overlay = a.overlay.map(|OverlayPreset::Recommended| OverlayConfig::recommended());
    Ok(RunConfig { exit, overlay })
}

pub fn run(a: &SimulateArgs, argv: &[String], out: &mut dyn Write) -> Result<()> {
    let started = now();
    let notional = check_notional(a.notional)?;
    let cfg = resolve(a)?;
    let ds = load(&a.data)?;

    let mut zero_atr = Vec::new();
    let (outcomes, sized, details): (_, Option<Vec<f64>>, Vec<Option<OverlayTrade>>) = match &cfg.overlay {
        None => {
            let o = replay_portfolio(&ds, &cfg.exit)?;
            let n = o.len();
            (o, None, vec![None; n])
        }
        Some(ov) => {
            let run = simulate_with_overlay(&ds, &cfg.exit, ov, notional)?;
            zero_atr = run.zero_atr_trades;
            (run.outcomes, Some(run.sized_pnl), run.details.into_iter().map(Some).collect())
        }
    };
    let settings = MetricsSettings::new(notional);
    let metrics = evaluate(&outcomes, sized.as_deref(), &settings)?;
    let unsized_metrics = match sized {
        Some(_) => Some(evaluate(&outcomes, None, &settings)?),
        None => None,
    };

    let dir = OutDir::create(&a.out)?;
    let mut table = Table::new(&OUTCOME_HEADER);
    let mut jsonl = Vec::new();
    for (i, (o, trade)) in outcomes.iter().zip(ds.trades()).enumerate() {
        let detail = details[i].as_ref();
        let sizing = detail.map_or(Decimal::ONE, |d| d.sizing);
        let pnl = sized.as_ref().map_or(notional * o.realized_f64(), |s| s[i]);
        let opt = |x: Option<Decimal>| x.map(d6).unwrap_or_default();
        table.row(&[
            o.trade_id.clone(),
            format!("{:?}", trade.side).to_lowercase(),
            o.entry_time.millis().to_string(),
            o.exit_time().millis().to_string(),
            o.exit_reason.as_str().to_string(),
            o.fills.len().to_string(),
            d6(o.realized_return),
            d6(o.peak_unrealized_return),
            d6(o.capture_gap),
            f6(o.holding_hours),
            d6(sizing),
            f6(pnl),
            opt(detail.map(|d| d.atr.value)),
            opt(detail.and_then(|d| d.atr_stop_level)),
            opt(detail.and_then(|d| d.atr_tp_level)),
        ]);
        jsonl.extend(serde_json::to_vec(o).expect("outcome serializes"));
        jsonl.push(b'\n');
    }
    dir.write_table("outcomes.csv", table)?;
    dir.write("outcomes.jsonl", &jsonl)?;
    let mut m = json!({ "notional": notional, "metrics": metrics_json(&metrics) });
    if let Some(u) = &unsized_metrics {
        m["unsized_metrics"] = metrics_json(u);
        let from_lookback = details.iter().flatten().filter(|d| d.atr.source == AtrSource::Lookback).count();
        m["atr"] = json!({
            "from_lookback": from_lookback,
            "from_path_warmup": details.len() - from_lookback,
            "zero_atr_trades": zero_atr,
        });
    }
    dir.write_json("metrics.json", &m)?;

    let params = json!({
        "data": a.data.display().to_string(),
        "preset": a.preset.map(|p| p.name()),
        "config_file": a.config.as_ref().map(|p| p.display().to_string()),
        "config": render_run_config(&cfg),
        "notional": notional,
    });
    RunManifest::new("simulate", argv, ds.source_digest(), None, params, started).write(&dir)?;

    emit(out, &format!("{} trades replayed", outcomes.len()))?;
    emit(out, &format!("sharpe {}", sharpe_str(metrics.sharpe)))?;
    emit(out, &format!("profit_factor {}", pf_str(metrics.profit_factor)))?;
    emit(out, &format!("max_drawdown {}", f6(metrics.max_drawdown)))?;
    emit(out, &format!("total_pnl {}", f6(metrics.total_pnl)))?;
    emit(out, &format!("results in {}", dir.path().display()))
}
