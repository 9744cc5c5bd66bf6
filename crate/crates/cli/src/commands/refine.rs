use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use exitcal_core::overlay::entry_atr;
use exitcal_core::search::{NominalEntry, SearchRun};
use exitcal_core::{refine_pass2, Dataset, EvalSettings, ExitConfig, MetricsSettings, OverlayAxes, OverlayConfig};
use serde_json::json;

use super::grid::GRID_RESULTS;
use super::{check_notional, load, partition_header, partition_rows, split_from_json, Kind, Partitions};
use crate::args::RefineArgs;
use crate::error::{CliError, Result};
use crate::manifest::{now, RunManifest};
use crate::output::{
    config_cells, emit, f6, header, metrics_cells, overlay_cells, pf_str, sharpe_str, OutDir, Table, CONFIG_HEADER,
    METRICS_HEADER, OVERLAY_HEADER,
};

pub const REFINE_RESULTS: &str = "refine_results.csv";

fn bad(path: &Path, message: impl Into<String>) -> CliError {
    CliError::BadResults { path: path.to_path_buf(), message: message.into() }
}

/// The `k` best-ranked configurations of a pass-1 results file.
pub fn read_top_k(path: &Path, k: usize) -> Result<Vec<ExitConfig>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| bad(path, e.to_string()))?;
    let hdr = rdr.headers().map_err(|e| bad(path, e.to_string()))?.clone();
    let col =
        |name: &str| hdr.iter().position(|h| h == name).ok_or_else(|| bad(path, format!("missing column {name}")));
    let rank_col = col("rank")?;
    let cols: Vec<usize> = CONFIG_HEADER.iter().map(|n| col(n)).collect::<Result<_>>()?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| bad(path, e.to_string()))?;
        if rec[rank_col].is_empty() {
            continue;
        }
        let field = |i: usize| &rec[cols[i]];
        let dec =
            |i: usize| field(i).parse().map_err(|_| bad(path, format!("bad {} {:?}", CONFIG_HEADER[i], field(i))));
        out.push(ExitConfig {
            stop_loss: dec(0)?,
            trail_activation: dec(1)?,
            trail_distance: dec(2)?,
            ptp_threshold: dec(3)?,
            ptp_fraction: dec(4)?,
            stale_hours: field(5).parse().map_err(|_| bad(path, format!("bad stale_hours {:?}", field(5))))?,
        });
        if out.len() == k {
            break;
        }
    }
    Ok(out)
}

pub fn axes(a: &RefineArgs) -> OverlayAxes {
    let mut axes = OverlayAxes::default();
    if let Some(v) = &a.atr_stop_mult {
        axes.atr_stop_mult = v.clone();
    }
    if let Some(v) = &a.atr_tp_mult {
        axes.atr_tp_mult = v.clone();
    }
    if let Some(v) = &a.cb_loss_threshold {
        axes.cb_loss_threshold = v.clone();
    }
    if let Some(v) = &a.cb_reduction_factor {
        axes.cb_reduction_factor = v.clone();
    }
    if let Some(p) = a.atr_period {
        axes.atr_period = p;
    }
    axes
}

pub fn results_table(run: &SearchRun) -> Table {
    let mut t = Table::new(&header(&[
        &["rank"],
        &CONFIG_HEADER,
        &OVERLAY_HEADER,
        &METRICS_HEADER,
        &["unsized_sharpe", "unsized_profit_factor", "unsized_max_drawdown"],
    ]));
    let mut push =
        |rank: String, c: &ExitConfig, o: &Option<OverlayConfig>, m, u: &Option<exitcal_core::MetricsReport>| {
            let mut row = vec![rank];
            row.extend(config_cells(c));
            row.extend(o.as_ref().map(overlay_cells).unwrap_or_default());
            row.extend(metrics_cells(m));
            if let Some(u) = u {
                row.extend([sharpe_str(u.sharpe), pf_str(u.profit_factor), f6(u.max_drawdown)]);
            }
            t.row(&row);
        };
    for r in &run.ranked {
        push(r.rank.to_string(), &r.config, &r.overlay, &r.metrics, &r.unsized_metrics);
    }
    let mut excluded: Vec<_> = run.excluded.iter().collect();
    excluded.sort_by_key(|e| (e.config, e.overlay));
    for e in excluded {
        push(String::new(), &e.config, &e.overlay, &e.metrics, &e.unsized_metrics);
    }
    t
}

fn mapping_table(nominal: &[NominalEntry], unique: &[(ExitConfig, OverlayConfig)], run: &SearchRun) -> Table {
    let ranks: BTreeMap<(ExitConfig, OverlayConfig), usize> =
        run.ranked.iter().filter_map(|r| Some(((r.config, r.overlay?), r.rank))).collect();
    let mut t = Table::new(&header(&[
        &["nominal_index", "base_rank"],
        &OVERLAY_HEADER[..4],
        &["evaluated_index", "evaluated_rank"],
    ]));
    for n in nominal {
        t.row(&[
            n.nominal_index.to_string(),
            (n.base_index + 1).to_string(),
            n.atr_stop_mult.to_string(),
            n.atr_tp_mult.to_string(),
            n.cb_loss_threshold.to_string(),
            n.cb_reduction_factor.to_string(),
            n.evaluated_index.to_string(),
            ranks.get(&unique[n.evaluated_index]).map(|r| r.to_string()).unwrap_or_default(),
        ]);
    }
    t
}

/// Trades whose entry ATR is zero, so no ATR level applies to them in any
/// pass-2 configuration.
fn zero_atr_trades(ds: &Dataset, period: usize) -> Vec<&str> {
    ds.trades()
        .iter()
        .filter(|t| entry_atr(t, period).is_ok_and(|a| a.value.is_zero()))
        .map(|t| t.trade_id.as_str())
        .collect()
}

pub fn run(a: &RefineArgs, argv: &[String], out: &mut dyn Write) -> Result<()> {
    let started = now();
    let results = a.pass1_results.join(GRID_RESULTS);
    if !results.is_file() {
        return Err(CliError::MissingPass1(a.pass1_results.clone()));
    }
    let pass1 = RunManifest::read(&a.pass1_results)?;
    let notional = check_notional(match a.notional {
        Some(n) => n,
        None => pass1.params["notional"].as_f64().unwrap_or(1000.0),
    })?;
    let split = split_from_json(&pass1.params["split"]);
    let axes = axes(a);
    let top = read_top_k(&results, a.top_k)?;

    let ds = load(&a.data)?;
    if ds.source_digest() != pass1.dataset_digest {
        return Err(CliError::DigestMismatch { expected: pass1.dataset_digest, actual: ds.source_digest().into() });
    }
    let digest = ds.source_digest().to_string();
    let parts = Partitions::new(ds, split)?;
    let settings = EvalSettings { metrics: MetricsSettings::new(notional), jobs: a.jobs };
    let refined = refine_pass2(parts.ranking(), &top, &axes, &settings)?;
    let search = &refined.search;

    let out_dir: PathBuf = a.out.clone().unwrap_or_else(|| a.pass1_results.join("pass2"));
    let dir = OutDir::create(&out_dir)?;
    dir.write_table(REFINE_RESULTS, results_table(search))?;
    dir.write_table("refine_mapping.csv", mapping_table(&refined.plan.nominal, &refined.plan.unique, search))?;

    let mut top_t = Table::new(&partition_header(Kind::Overlay));
    for r in search.ranked.iter().take(a.top_k) {
        for row in partition_rows(&r.rank.to_string(), &parts, &r.config, r.overlay.as_ref(), &settings.metrics)? {
            top_t.row(&row);
        }
    }
    dir.write_table("top_k.csv", top_t)?;

    let n_nominal = refined.plan.nominal.len();
    let n_unique = refined.plan.unique.len();
    let diagnostics = json!({
        "n_nominal": n_nominal,
        "n_evaluated": n_unique,
        "n_ranked": search.ranked.len(),
        "n_excluded": search.excluded.len(),
        "base_configs": top.iter().map(|c| config_cells(c).join(" ")).collect::<Vec<_>>(),
        "partitions": parts.describe(),
        "zero_atr_trades": zero_atr_trades(parts.ranking(), axes.atr_period),
    });
    dir.write_json("diagnostics.json", &diagnostics)?;

    let params = json!({
        "data": a.data.display().to_string(),
        "pass1_results": a.pass1_results.display().to_string(),
        "top_k": a.top_k,
        "axes": {
            "atr_stop_mult": axes.atr_stop_mult.iter().map(|x| x.to_string()).collect::<Vec<_>>(),
            "atr_tp_mult": axes.atr_tp_mult.iter().map(|x| x.to_string()).collect::<Vec<_>>(),
            "cb_loss_threshold": axes.cb_loss_threshold,
            "cb_reduction_factor": axes.cb_reduction_factor.iter().map(|x| x.to_string()).collect::<Vec<_>>(),
            "atr_period": axes.atr_period,
        },
        "split": super::split_json(split.as_ref()),
        "ranking_partition": parts.ranking_name(),
        "notional": notional,
        "jobs": a.jobs,
    });
    RunManifest::new("refine", argv, &digest, pass1.seed, params, started).write(&dir)?;

    emit(out, &format!("{n_nominal} nominal / {n_unique} evaluated configurations over {} base configs", top.len()))?;
    emit(out, &format!("{} ranked, {} excluded for undefined Sharpe", search.ranked.len(), search.excluded.len()))?;
    if let Some(best) = search.ranked.first() {
        emit(out, &format!("best sharpe {}", sharpe_str(best.metrics.sharpe)))?;
    }
    emit(out, &format!("results in {}", dir.path().display()))
}
