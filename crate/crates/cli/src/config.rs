//! Flat `key = value` files for exit configs, overlays, and grids.
//!
//! Blank lines and `#` comments are ignored. Grid files take comma-separated
//! lists; axes left out keep their default values.

use std::collections::BTreeMap;
use std::str::FromStr;

use exitcal_core::overlay::DEFAULT_ATR_PERIOD;
use exitcal_core::{CbFactor, CircuitBreaker, ExitConfig, GridSpec, OverlayConfig};
use rust_decimal::Decimal;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected key = value")]
    Syntax { line: usize },
    #[error("line {line}: unknown field {key}")]
    UnknownField { key: String, line: usize },
    #[error("line {line}: field {key} given twice")]
    Duplicate { key: String, line: usize },
    #[error("missing field {0}")]
    Missing(&'static str),
    #[error("field {field}: cannot parse {value:?}")]
    BadValue { field: String, value: String },
    #[error("field {field}: {reason}")]
    Invalid { field: String, reason: String },
}

const EXIT_FIELDS: [&str; 6] =
    ["stop_loss", "trail_activation", "trail_distance", "ptp_threshold", "ptp_fraction", "stale_hours"];
const OVERLAY_FIELDS: [&str; 5] =
    ["atr_stop_mult", "atr_tp_mult", "cb_loss_threshold", "cb_reduction_factor", "atr_period"];

type Fields = BTreeMap<String, (usize, String)>;

fn parse_fields(text: &str, allowed: &[&str]) -> Result<Fields, ConfigError> {
    let mut out = Fields::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (k, v) = body.split_once('=').ok_or(ConfigError::Syntax { line })?;
        let key = k.trim().to_string();
        if !allowed.contains(&key.as_str()) {
            return Err(ConfigError::UnknownField { key, line });
        }
        if out.contains_key(&key) {
            return Err(ConfigError::Duplicate { key, line });
        }
        out.insert(key, (line, v.trim().to_string()));
    }
    Ok(out)
}

fn value<T: FromStr>(field: &str, raw: &str) -> Result<T, ConfigError> {
    raw.trim().parse().map_err(|_| ConfigError::BadValue { field: field.into(), value: raw.trim().into() })
}

fn required<T: FromStr>(f: &Fields, field: &'static str) -> Result<T, ConfigError> {
    let (_, raw) = f.get(field).ok_or(ConfigError::Missing(field))?;
    value(field, raw)
}

fn list<T: FromStr>(field: &str, raw: &str) -> Result<Vec<T>, ConfigError> {
    raw.split(',').map(|s| value(field, s)).collect()
}

/// A base config plus an optional overlay, as read from one file.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub exit: ExitConfig,
    pub overlay: Option<OverlayConfig>,
}

pub fn parse_run_config(text: &str) -> Result<RunConfig, ConfigError> {
    let allowed: Vec<&str> = EXIT_FIELDS.iter().chain(&OVERLAY_FIELDS).copied().collect();
    let f = parse_fields(text, &allowed)?;
    let exit = ExitConfig {
        stop_loss: required(&f, "stop_loss")?,
        trail_activation: required(&f, "trail_activation")?,
        trail_distance: required(&f, "trail_distance")?,
        ptp_threshold: required(&f, "ptp_threshold")?,
        ptp_fraction: required(&f, "ptp_fraction")?,
        stale_hours: required(&f, "stale_hours")?,
    };
    exit.validate().map_err(|reason| ConfigError::Invalid { field: "exit config".into(), reason })?;

    if !OVERLAY_FIELDS.iter().any(|k| f.contains_key(*k)) {
        return Ok(RunConfig { exit, overlay: None });
    }
    let factor: CbFactor = match f.get("cb_reduction_factor") {
        Some((_, raw)) => value("cb_reduction_factor", raw)?,
        None => CbFactor::Disabled,
    };
    let breaker = match factor {
        CbFactor::Disabled => CircuitBreaker::Disabled,
        _ => CircuitBreaker::from_axes(required(&f, "cb_loss_threshold")?, factor),
    };
    let overlay = OverlayConfig {
        atr_stop_mult: required(&f, "atr_stop_mult")?,
        atr_tp_mult: required(&f, "atr_tp_mult")?,
        breaker,
        atr_period: match f.get("atr_period") {
            Some((_, raw)) => value("atr_period", raw)?,
            None => DEFAULT_ATR_PERIOD,
        },
    };
    overlay.validate().map_err(|reason| ConfigError::Invalid { field: "overlay".into(), reason })?;
    Ok(RunConfig { exit, overlay: Some(overlay) })
}

pub fn parse_grid(text: &str) -> Result<GridSpec, ConfigError> {
    let f = parse_fields(text, &EXIT_FIELDS)?;
    let mut g = GridSpec::default();
    for (key, (_, raw)) in &f {
        match key.as_str() {
            "stop_loss" => g.stop_loss = list(key, raw)?,
            "trail_activation" => g.trail_activation = list(key, raw)?,
            "trail_distance" => g.trail_distance = list(key, raw)?,
            "ptp_threshold" => g.ptp_threshold = list(key, raw)?,
            "ptp_fraction" => g.ptp_fraction = list::<Decimal>(key, raw)?,
            "stale_hours" => g.stale_hours = list(key, raw)?,
            _ => unreachable!("filtered by parse_fields"),
        }
    }
    Ok(g)
}

/// Renders a config in the same format `parse_run_config` reads.
pub fn render_run_config(cfg: &RunConfig) -> String {
    let e = &cfg.exit;
    let mut s = format!(
        "stop_loss = {}\ntrail_activation = {}\ntrail_distance = {}\nptp_threshold = {}\nptp_fraction = {}\nstale_hours = {}\n",
        e.stop_loss, e.trail_activation, e.trail_distance, e.ptp_threshold, e.ptp_fraction, e.stale_hours
    );
    if let Some(o) = &cfg.overlay {
        s += &format!(
            "atr_stop_mult = {}\natr_tp_mult = {}\natr_period = {}\n",
            o.atr_stop_mult, o.atr_tp_mult, o.atr_period
        );
        match o.breaker {
            CircuitBreaker::Disabled => s += "cb_reduction_factor = disabled\n",
            CircuitBreaker::Enabled { loss_threshold, reduction_factor } => {
                s += &format!("cb_loss_threshold = {loss_threshold}\ncb_reduction_factor = {reduction_factor}\n")
            }
        }
    }
    s
}
