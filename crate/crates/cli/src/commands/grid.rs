use std::io::Write;

use exitcal_core::search::{heatmap, pareto_frontier, Axis, SearchRun};
use exitcal_core::{enumerate_grid, run_grid, EvalSettings, ExitConfig, GridSpec, MetricsSettings, SplitSpec};
use serde_json::{json, Value};

use super::{check_notional, load, partition_header, partition_rows, Kind, Partitions};
use crate::args::{GridArgs, SplitArg};
use crate::config::parse_grid;
use crate::error::{CliError, Result};
use crate::manifest::{now, RunManifest};
use crate::output::{
    config_cells, emit, f6, header, metrics_cells, read_file, sharpe_str, OutDir, Table, CONFIG_HEADER, METRICS_HEADER,
};

pub const GRID_RESULTS: &str = "grid_results.csv";

pub fn grid_spec(a: &GridArgs) -> Result<GridSpec> {
    let spec = match &a.grid_file {
        Some(p) => parse_grid(&read_file(p)?)?,
        None => GridSpec::default(),
    };
    enumerate_grid(&spec)?;
    Ok(spec)
}

pub fn split_spec(a: &GridArgs) -> Option<SplitSpec> {
    if a.full_sample {
        return None;
    }
    Some(match a.split {
        SplitArg::Chrono => SplitSpec::chronological(a.train_fraction),
        SplitArg::Random => SplitSpec::randomized(a.train_fraction, a.seed),
    })
}

/// Ranked rows first, then configurations without a defined Sharpe.
pub fn results_table(run: &SearchRun) -> Table {
    let mut t = Table::new(&header(&[&["rank"], &CONFIG_HEADER, &METRICS_HEADER]));
    for r in &run.ranked {
        let mut row = vec![r.rank.to_string()];
        row.extend(config_cells(&r.config));
        row.extend(metrics_cells(&r.metrics));
        t.row(&row);
    }
    let mut excluded: Vec<_> = run.excluded.iter().collect();
    excluded.sort_by_key(|e| e.config);
    for e in excluded {
        let mut row = vec![String::new()];
        row.extend(config_cells(&e.config));
        row.extend(metrics_cells(&e.metrics));
        t.row(&row);
    }
    t
}

fn config_json(c: &ExitConfig) -> Value {
    let cells = config_cells(c);
    let map: serde_json::Map<String, Value> =
        CONFIG_HEADER.iter().zip(cells).map(|(k, v)| (k.to_string(), Value::String(v))).collect();
    Value::Object(map)
}

fn axis_strings<T: ToString>(xs: &[T]) -> Vec<String> {
    xs.iter().map(|x| x.to_string()).collect()
}

pub fn run(a: &GridArgs, argv: &[String], out: &mut dyn Write) -> Result<()> {
    let started = now();
    let notional = check_notional(a.notional)?;
    if a.top_k == 0 {
        return Err(CliError::Usage("--top-k must be at least 1".into()));
    }
    let spec = grid_spec(a)?;
    let hx: Axis = a.heatmap_x.parse()?;
    let hy: Axis = a.heatmap_y.parse()?;
    let ds = load(&a.data)?;
    let digest = ds.source_digest().to_string();
    let split = split_spec(a);
    let parts = Partitions::new(ds, split)?;
    let settings = EvalSettings { metrics: MetricsSettings::new(notional), jobs: a.jobs };
    let search = run_grid(parts.ranking(), &spec, &settings)?;

    let dir = OutDir::create(&a.out)?;
    dir.write_table(GRID_RESULTS, results_table(&search))?;

    let mut top = Table::new(&partition_header(Kind::Base));
    for r in search.ranked.iter().take(a.top_k) {
        for row in partition_rows(&r.rank.to_string(), &parts, &r.config, None, &settings.metrics)? {
            top.row(&row);
        }
    }
    dir.write_table("top_k.csv", top)?;

    let mut base = Table::new(&partition_header(Kind::Base));
    for row in partition_rows("", &parts, &ExitConfig::baseline(), None, &settings.metrics)? {
        base.row(&row);
    }
    dir.write_table("baseline.csv", base)?;

    let mut heat = Table::new(&[hx.name(), hy.name(), "mean_sharpe", "n_configs"]);
    for c in heatmap(&search.ranked, hx, hy)? {
        heat.row(&[c.x.to_string(), c.y.to_string(), f6(c.mean_sharpe), c.n_configs.to_string()]);
    }
    dir.write_table("heatmap.csv", heat)?;

    let mut pareto = Table::new(&header(&[&["rank", "sharpe", "max_drawdown", "dominated"], &CONFIG_HEADER]));
    for p in pareto_frontier(&search.ranked) {
        let mut row = vec![
            search.ranked[p.index].rank.to_string(),
            sharpe_str(search.ranked[p.index].metrics.sharpe),
            f6(p.max_drawdown),
            p.dominated.to_string(),
        ];
        row.extend(config_cells(&p.config));
        pareto.row(&row);
    }
    dir.write_table("pareto.csv", pareto)?;

    let n_configs = search.ranked.len() + search.excluded.len();
    let mut excluded: Vec<_> = search.excluded.iter().map(|e| e.config).collect();
    excluded.sort();
    let diagnostics = json!({
        "n_configs": n_configs,
        "n_ranked": search.ranked.len(),
        "n_excluded": excluded.len(),
        "excluded_undefined_sharpe": excluded.iter().map(config_json).collect::<Vec<_>>(),
        "partitions": parts.describe(),
        "membership": parts.membership(),
    });
    dir.write_json("diagnostics.json", &diagnostics)?;

    let params = json!({
        "data": a.data.display().to_string(),
        "grid_file": a.grid_file.as_ref().map(|p| p.display().to_string()),
        "grid": {
            "stop_loss": axis_strings(&spec.stop_loss),
            "trail_activation": axis_strings(&spec.trail_activation),
            "trail_distance": axis_strings(&spec.trail_distance),
            "ptp_threshold": axis_strings(&spec.ptp_threshold),
            "ptp_fraction": axis_strings(&spec.ptp_fraction),
            "stale_hours": axis_strings(&spec.stale_hours),
        },
        "split": super::split_json(split.as_ref()),
        "full_sample": a.full_sample,
        "ranking_partition": parts.ranking_name(),
        "notional": notional,
        "jobs": a.jobs,
        "top_k": a.top_k,
        "heatmap": [hx.name(), hy.name()],
    });
    let seed = split.filter(|s| s.mode == exitcal_core::SplitMode::Randomized).map(|s| s.seed);
    RunManifest::new("grid", argv, &digest, seed, params, started).write(&dir)?;

    emit(
        out,
        &format!("{n_configs} configurations evaluated on {} ({} trades)", parts.ranking_name(), parts.ranking().len()),
    )?;
    emit(out, &format!("{} ranked, {} excluded for undefined Sharpe", search.ranked.len(), excluded.len()))?;
    if let Some(best) = search.ranked.first() {
        emit(
            out,
            &format!("best sharpe {} at {}", sharpe_str(best.metrics.sharpe), config_cells(&best.config).join(" ")),
        )?;
    }
    emit(out, &format!("results in {}", dir.path().display()))
}
