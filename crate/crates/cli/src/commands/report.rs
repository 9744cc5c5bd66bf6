use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::Value;

use super::grid::GRID_RESULTS;
use super::refine::REFINE_RESULTS;
use crate::args::ReportArgs;
use crate::error::{CliError, Result};
use crate::manifest::RunManifest;
use crate::output::emit;

pub const REPORT: &str = "report.txt";

/// Relative Sharpe change in percent, truncated toward zero at one
/// decimal. `None` when the reference is not a positive finite number.
pub fn improvement(old: f64, new: f64) -> Option<f64> {
    if !(old > 0.0 && old.is_finite() && new.is_finite()) {
        return None;
    }
    let tenths = (new - old) / old * 1000.0;
    // Guard against 24.9999999 for ratios that are exact in decimal.
    Some((tenths + tenths.signum() * 1e-7).trunc() / 10.0)
}

pub fn format_improvement(old: Option<f64>, new: Option<f64>) -> String {
    match (old, new) {
        (Some(o), Some(n)) => improvement(o, n).map_or("n/a".into(), |p| format!("{p:.1}%")),
        _ => "n/a".into(),
    }
}

type Row = csv::StringRecord;

struct Results {
    header: Row,
    rows: Vec<Row>,
    path: PathBuf,
}

impl Results {
    fn read(path: PathBuf) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(&path).map_err(|e| bad(&path, e))?;
        let header = rdr.headers().map_err(|e| bad(&path, e))?.clone();
        let rows = rdr.records().collect::<std::result::Result<Vec<_>, _>>().map_err(|e| bad(&path, e))?;
        Ok(Self { header, rows, path })
    }

    fn get<'a>(&self, row: &'a Row, name: &str) -> Result<&'a str> {
        let i = self
            .header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| bad(&self.path, format!("missing column {name}")))?;
        Ok(&row[i])
    }

    fn find(&self, col: &str, value: &str) -> Result<Option<&Row>> {
        for r in &self.rows {
            if self.get(r, col)? == value {
                return Ok(Some(r));
            }
        }
        Ok(None)
    }
}

fn bad(path: &Path, e: impl ToString) -> CliError {
    CliError::BadResults { path: path.to_path_buf(), message: e.to_string() }
}

struct Line {
    case: &'static str,
    config: String,
    profit_factor: String,
    max_dd: String,
    sharpe: String,
    sharpe_value: Option<f64>,
}

fn fixed(raw: &str, dp: usize) -> String {
    match raw.parse::<f64>() {
        Ok(v) if v.is_finite() => format!("{v:.dp$}"),
        _ => raw.to_string(),
    }
}

fn base_desc(r: &Results, row: &Row) -> Result<String> {
    Ok(format!(
        "SL {}, TA {}, TD {}, PTP {}, PF {}, {} h",
        r.get(row, "stop_loss")?,
        r.get(row, "trail_activation")?,
        r.get(row, "trail_distance")?,
        r.get(row, "ptp_threshold")?,
        r.get(row, "ptp_fraction")?,
        r.get(row, "stale_hours")?
    ))
}

fn overlay_desc(r: &Results, row: &Row) -> Result<String> {
    let base = ["stop_loss", "trail_activation", "trail_distance", "ptp_threshold", "ptp_fraction", "stale_hours"]
        .iter()
        .map(|c| r.get(row, c))
        .collect::<Result<Vec<_>>>()?
        .join(",");
    let breaker = match r.get(row, "cb_reduction_factor")? {
        "disabled" => "circuit breaker off".to_string(),
        f => format!("CB factor {f} after {} losses", r.get(row, "cb_loss_threshold")?),
    };
    Ok(format!(
        "Base ({base}) + ATR SL {}x, ATR TP {}x, {breaker}",
        r.get(row, "atr_stop_mult")?,
        r.get(row, "atr_tp_mult")?
    ))
}

fn line(case: &'static str, r: &Results, row: &Row, config: String) -> Result<Line> {
    let sharpe = r.get(row, "sharpe")?;
    Ok(Line {
        case,
        config,
        profit_factor: fixed(r.get(row, "profit_factor")?, 3),
        max_dd: fixed(r.get(row, "max_drawdown")?, 1),
        sharpe: fixed(sharpe, 3),
        sharpe_value: sharpe.parse::<f64>().ok().filter(|v| v.is_finite()),
    })
}

fn missing(case: &'static str) -> Line {
    let na = || "n/a".to_string();
    Line { case, config: "no results".into(), profit_factor: na(), max_dd: na(), sharpe: na(), sharpe_value: None }
}

fn render(lines: &[Line], footer: &[String]) -> String {
    let base = lines[0].sharpe_value;
    let pass1 = lines[1].sharpe_value;
    let mut cells: Vec<Vec<String>> =
        vec![["Case", "Configuration", "Profit factor", "Max DD", "Sharpe", "vs baseline", "vs pass 1"]
            .map(String::from)
            .to_vec()];
    for (i, l) in lines.iter().enumerate() {
        cells.push(vec![
            l.case.to_string(),
            l.config.clone(),
            l.profit_factor.clone(),
            l.max_dd.clone(),
            l.sharpe.clone(),
            if i == 0 { String::new() } else { format_improvement(base, l.sharpe_value) },
            if i == 2 { format_improvement(pass1, l.sharpe_value) } else { String::new() },
        ]);
    }
    let widths: Vec<usize> = (0..7).map(|c| cells.iter().map(|r| r[c].chars().count()).max().unwrap_or(0)).collect();
    let mut s = String::new();
    for (i, r) in cells.iter().enumerate() {
        let text: Vec<String> = r.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        s += text.join("  ").trim_end();
        s.push('\n');
        if i == 0 {
            s += &"-".repeat(widths.iter().sum::<usize>() + 2 * 6);
            s.push('\n');
        }
    }
    s.push('\n');
    for f in footer {
        s += f;
        s.push('\n');
    }
    s
}

fn partition_note(m: &RunManifest, diagnostics: Option<Value>) -> String {
    let part = m.params["ranking_partition"].as_str().unwrap_or("full");
    let n = diagnostics
        .as_ref()
        .and_then(|d| d["partitions"]["sizes"][part].as_u64())
        .map(|n| format!("{n} trades"))
        .unwrap_or_else(|| "unknown size".into());
    let split = &m.params["split"];
    let how = match split["mode"].as_str() {
        Some("random") => {
            format!("randomized split, train fraction {}, seed {}", split["train_fraction"], split["seed"])
        }
        Some(_) => format!("chronological split, train fraction {}", split["train_fraction"]),
        None => "no split".into(),
    };
    format!("Metrics on the {part} partition ({n}; {how}), notional {}.", m.params["notional"])
}

fn read_json(path: &Path) -> Option<Value> {
    serde_json::from_str(&fs::read_to_string(path).ok()?).ok()
}

pub fn build(dir: &Path, refine_dir: Option<&Path>) -> Result<String> {
    let grid_path = dir.join(GRID_RESULTS);
    let base_path = dir.join("baseline.csv");
    if !grid_path.is_file() || !base_path.is_file() {
        return Err(CliError::MissingResults(dir.to_path_buf()));
    }
    let manifest = RunManifest::read(dir)?;
    let part = manifest.params["ranking_partition"].as_str().unwrap_or("full").to_string();

    let baseline = Results::read(base_path)?;
    let base_row = baseline.find("partition", &part)?.ok_or_else(|| bad(&baseline.path, format!("no {part} row")))?;
    let mut lines = vec![line("Baseline", &baseline, base_row, base_desc(&baseline, base_row)?)?];

    let grid = Results::read(grid_path)?;
    lines.push(match grid.find("rank", "1")? {
        Some(row) => line("Best pass 1", &grid, row, base_desc(&grid, row)?)?,
        None => missing("Best pass 1"),
    });

    let refine_dir = match refine_dir {
        Some(d) if !d.join(REFINE_RESULTS).is_file() => return Err(CliError::MissingResults(d.to_path_buf())),
        Some(d) => Some(d.to_path_buf()),
        None => Some(dir.join("pass2")).filter(|d| d.join(REFINE_RESULTS).is_file()),
    };
    let mut footer = vec![partition_note(&manifest, read_json(&dir.join("diagnostics.json")))];
    match &refine_dir {
        Some(d) => {
            let refine = Results::read(d.join(REFINE_RESULTS))?;
            lines.push(match refine.find("rank", "1")? {
                Some(row) => line("Best pass 2", &refine, row, overlay_desc(&refine, row)?)?,
                None => missing("Best pass 2"),
            });
            if let Some(diag) = read_json(&d.join("diagnostics.json")) {
                footer.push(format!(
                    "Pass 2 evaluated {} unique of {} nominal configurations.",
                    diag["n_evaluated"], diag["n_nominal"]
                ));
            }
        }
        None => {
            lines.push(missing("Best pass 2"));
            footer.push("No pass-2 results were found.".into());
        }
    }
    footer.push("Improvements are (new - old) / old on Sharpe, truncated toward zero to one decimal,".into());
    footer.push("computed from the six-decimal Sharpe values in the results files.".into());
    Ok(render(&lines, &footer))
}

pub fn run(a: &ReportArgs, out: &mut dyn Write) -> Result<()> {
    let text = build(&a.dir, a.refine_dir.as_deref())?;
    let path = a.out.clone().unwrap_or_else(|| a.dir.join(REPORT));
    fs::write(&path, &text).map_err(|e| CliError::io(&path, e))?;
    emit(out, text.trim_end())
}
