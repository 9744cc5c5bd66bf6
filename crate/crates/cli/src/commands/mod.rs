pub mod grid;
pub mod refine;
pub mod report;
pub mod simulate;
pub mod validate;

use std::path::Path;

use exitcal_core::search::{evaluate_config, evaluate_overlay};
use exitcal_core::{
    load_dataset, split, Dataset, ExitConfig, MetricsReport, MetricsSettings, OverlayConfig, SplitMode, SplitSpec,
};
use serde_json::{json, Value};

use crate::error::{CliError, Result};
use crate::output::{config_cells, metrics_cells, overlay_cells};

pub fn load(data: &Path) -> Result<Dataset> {
    Ok(load_dataset(data)?)
}

pub fn check_notional(notional: f64) -> Result<f64> {
    if notional > 0.0 && notional.is_finite() {
        Ok(notional)
    } else {
        Err(CliError::Usage(format!("--notional must be positive, got {notional}")))
    }
}

/// The partition used for ranking plus the others reported alongside it.
pub struct Partitions {
    pub split: Option<SplitSpec>,
    /// (name, data); the first entry is the ranking partition.
    pub parts: Vec<(&'static str, Dataset)>,
}

impl Partitions {
    pub fn new(full: Dataset, split_spec: Option<SplitSpec>) -> Result<Self> {
        let parts = match split_spec {
            None => vec![("full", full)],
            Some(spec) => {
                let (train, test) = split(&full, &spec)?;
                vec![("train", train), ("test", test), ("full", full)]
            }
        };
        Ok(Self { split: split_spec, parts })
    }

    pub fn ranking(&self) -> &Dataset {
        &self.parts[0].1
    }

    pub fn ranking_name(&self) -> &'static str {
        self.parts[0].0
    }

    pub fn describe(&self) -> Value {
        let sizes: serde_json::Map<String, Value> =
            self.parts.iter().map(|(n, d)| (n.to_string(), json!(d.len()))).collect();
        json!({
            "ranking_partition": self.ranking_name(),
            "split": split_json(self.split.as_ref()),
            "sizes": sizes,
        })
    }

    pub fn membership(&self) -> Value {
        let m: serde_json::Map<String, Value> = self
            .parts
            .iter()
            .filter(|(n, _)| *n != "full")
            .map(|(n, d)| (n.to_string(), json!(d.trade_ids())))
            .collect();
        Value::Object(m)
    }
}

pub fn split_json(spec: Option<&SplitSpec>) -> Value {
    match spec {
        None => Value::Null,
        Some(s) => json!({
            "mode": match s.mode { SplitMode::Chronological => "chrono", SplitMode::Randomized => "random" },
            "train_fraction": s.train_fraction,
            "seed": s.seed,
        }),
    }
}

pub fn split_from_json(v: &Value) -> Option<SplitSpec> {
    let mode = v.get("mode")?.as_str()?;
    let f = v.get("train_fraction")?.as_f64()?;
    let seed = v.get("seed")?.as_u64()?;
    Some(match mode {
        "random" => SplitSpec::randomized(f, seed),
        _ => SplitSpec::chronological(f),
    })
}

pub fn measure(ds: &Dataset, c: &ExitConfig, o: Option<&OverlayConfig>, m: &MetricsSettings) -> Result<MetricsReport> {
    Ok(match o {
        None => evaluate_config(ds, c, m)?,
        Some(o) => evaluate_overlay(ds, c, o, m)?.0,
    })
}

pub enum Kind {
    Base,
    Overlay,
}

pub fn partition_header(kind: Kind) -> Vec<String> {
    let mut h = vec!["rank".to_string(), "partition".to_string()];
    h.extend(crate::output::CONFIG_HEADER.iter().map(|s| s.to_string()));
    if let Kind::Overlay = kind {
        h.extend(crate::output::OVERLAY_HEADER.iter().map(|s| s.to_string()));
    }
    h.extend(crate::output::METRICS_HEADER.iter().map(|s| s.to_string()));
    h
}

/// One row per partition for a single configuration.
pub fn partition_rows(
    rank: &str,
    parts: &Partitions,
    c: &ExitConfig,
    o: Option<&OverlayConfig>,
    m: &MetricsSettings,
) -> Result<Vec<Vec<String>>> {
    parts
        .parts
        .iter()
        .map(|(name, ds)| {
            let mut row = vec![rank.to_string(), name.to_string()];
            row.extend(config_cells(c));
            if let Some(o) = o {
                row.extend(overlay_cells(o));
            }
            row.extend(metrics_cells(&measure(ds, c, o, m)?));
            Ok(row)
        })
        .collect()
}
