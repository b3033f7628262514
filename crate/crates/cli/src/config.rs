use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use recmap_core::metrics::Metric;
use recmap_core::recoverability::IndicatorChannel;
use recmap_core::sampling::VariantName;
use serde::{Deserialize, Serialize};

pub const SEED_ENV: &str = "RECMAP_SEED";

/// Settings shared by config files and the `config` section of `run.json` sidecars.
///
/// Every field is optional; command-line flags take precedence over file values, which
/// take precedence over built-in defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub digits: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variant: Option<VariantName>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pairs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub splits: Option<[usize; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub restorer: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unsharp_amount: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unsharp_sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wiener_sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wiener_nsr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub plugin_workers: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub plugin_fresh: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub plugin_timeout: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub easy_n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hard_n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub easy_cutoff: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_range: Option<[u32; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta_range: Option<[u32; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bypass: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub channel: Option<IndicatorChannel>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metric: Option<Metric>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bins: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub plot_channel: Option<String>,
}

impl RunConfig {
    /// Reads a JSON or TOML config. A `run.json` sidecar is accepted too: its `config`
    /// section is used.
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let is_toml = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("toml"));
        let mut value: serde_json::Value = if is_toml {
            toml::from_str(&text).with_context(|| format!("parsing TOML {}", path.display()))?
        } else {
            serde_json::from_str(&text).with_context(|| format!("parsing JSON {}", path.display()))?
        };
        if let Some(inner) = value.get_mut("config").map(serde_json::Value::take) {
            value = inner;
        }
        serde_json::from_value(value).with_context(|| format!("invalid config {}", path.display()))
    }
}

/// Seed fallback when neither a flag nor the config file gives one.
pub fn default_seed() -> Result<u64> {
    match std::env::var(SEED_ENV) {
        Ok(v) => match v.trim().parse() {
            Ok(seed) => Ok(seed),
            Err(_) => bail!("{SEED_ENV}={v:?} is not an unsigned integer"),
        },
        Err(_) => Ok(0),
    }
}
