//! Fixed-precision formatting and file writers shared by the commands.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use exitcal_core::metrics::MetricsReport;
use exitcal_core::{CircuitBreaker, ExitConfig, OverlayConfig, ProfitFactor, Sharpe};
use rust_decimal::Decimal;
use serde_json::Value;

use crate::error::{CliError, Result};

/// Six decimal places; non-finite values spelled out.
pub fn f6(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        let s = format!("{x:.6}");
        if s == "-0.000000" {
            "0.000000".into()
        } else {
            s
        }
    }
}

pub fn d6(x: Decimal) -> String {
    format!("{:.6}", x.round_dp(6))
}

pub fn sharpe_str(s: Sharpe) -> String {
    match s {
        Sharpe::Finite(v) => f6(v),
        Sharpe::Infinite => "inf".into(),
        Sharpe::Undefined => "undefined".into(),
    }
}

pub fn pf_str(p: ProfitFactor) -> String {
    match p {
        ProfitFactor::Finite(v) => f6(v),
        ProfitFactor::Infinite => "inf".into(),
    }
}

/// A JSON number carrying exactly the six-decimal text, or a string for
/// non-finite values.
pub fn json6(x: f64) -> Value {
    let s = f6(x);
    serde_json::from_str(&s).unwrap_or(Value::String(s))
}

fn json_text(s: String) -> Value {
    serde_json::from_str(&s).unwrap_or(Value::String(s))
}

pub fn metrics_json(m: &MetricsReport) -> Value {
    serde_json::json!({
        "sharpe": json_text(sharpe_str(m.sharpe)),
        "profit_factor": json_text(pf_str(m.profit_factor)),
        "max_drawdown": json6(m.max_drawdown),
        "total_pnl": json6(m.total_pnl),
        "n_trades": m.n_trades,
        "win_rate": json6(m.win_rate),
        "mean_capture_gap": json6(m.mean_capture_gap),
    })
}

pub const CONFIG_HEADER: [&str; 6] =
    ["stop_loss", "trail_activation", "trail_distance", "ptp_threshold", "ptp_fraction", "stale_hours"];
pub const OVERLAY_HEADER: [&str; 5] =
    ["atr_stop_mult", "atr_tp_mult", "cb_loss_threshold", "cb_reduction_factor", "atr_period"];
pub const METRICS_HEADER: [&str; 7] =
    ["sharpe", "profit_factor", "max_drawdown", "total_pnl", "n_trades", "win_rate", "mean_capture_gap"];

pub fn config_cells(c: &ExitConfig) -> Vec<String> {
    vec![
        c.stop_loss.to_string(),
        c.trail_activation.to_string(),
        c.trail_distance.to_string(),
        c.ptp_threshold.to_string(),
        c.ptp_fraction.to_string(),
        c.stale_hours.to_string(),
    ]
}

pub fn overlay_cells(o: &OverlayConfig) -> Vec<String> {
    let (threshold, factor) = match o.breaker {
        CircuitBreaker::Disabled => (String::new(), "disabled".to_string()),
        CircuitBreaker::Enabled { loss_threshold, reduction_factor } => {
            (loss_threshold.to_string(), reduction_factor.to_string())
        }
    };
    vec![o.atr_stop_mult.to_string(), o.atr_tp_mult.to_string(), threshold, factor, o.atr_period.to_string()]
}

pub fn metrics_cells(m: &MetricsReport) -> Vec<String> {
    vec![
        sharpe_str(m.sharpe),
        pf_str(m.profit_factor),
        f6(m.max_drawdown),
        f6(m.total_pnl),
        m.n_trades.to_string(),
        f6(m.win_rate),
        f6(m.mean_capture_gap),
    ]
}

/// Rows buffered in memory and written in one go.
pub struct Table {
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        writer.write_record(header.iter().map(|s| s.as_ref())).expect("in-memory write");
        Self { writer }
    }

    pub fn row<S: AsRef<str>>(&mut self, cells: &[S]) {
        self.writer.write_record(cells.iter().map(|s| s.as_ref())).expect("in-memory write");
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.writer.into_inner().expect("in-memory flush")
    }
}

pub fn header(parts: &[&[&str]]) -> Vec<String> {
    parts.iter().flat_map(|p| p.iter().map(|s| s.to_string())).collect()
}

pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(Self { root: root.to_path_buf() })
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    pub fn write(&self, name: &str, bytes: &[u8]) -> Result<()> {
        let p = self.root.join(name);
        fs::write(&p, bytes).map_err(|e| CliError::io(p, e))
    }

    pub fn write_table(&self, name: &str, table: Table) -> Result<()> {
        self.write(name, &table.into_bytes())
    }

    pub fn write_json(&self, name: &str, value: &Value) -> Result<()> {
        let mut s = serde_json::to_string_pretty(value).expect("value serializes");
        s.push('\n');
        self.write(name, s.as_bytes())
    }
}

pub fn emit(out: &mut dyn Write, line: &str) -> Result<()> {
    writeln!(out, "{line}").map_err(|e| CliError::io("<stdout>", e))
}

pub fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}
