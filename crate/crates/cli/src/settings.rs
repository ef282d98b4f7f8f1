//! Run configuration: a TOML file with one table per command, overlaid by flags.

use std::path::{Path, PathBuf};

use clap::Args;
use randset::config::ModelDef;
use randset::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyticSection {
    /// Absolute scales at which to estimate s_ε by Monte Carlo (comma separated).
    #[arg(long = "eps", value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<Vec<f64>>,
    /// Trials per ε.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub survival_horizon: Option<usize>,
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleSection {
    /// Coding depth; the realisation is drawn `survival_horizon` levels deeper.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub survival_horizon: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale_min_exp: Option<u32>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale_max_exp: Option<u32>,
    /// Graymap side is 2^grid_exponent.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_exponent: Option<u32>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cell_budget: Option<u64>,
    /// Largest number of ε-codings held in memory for the graymap.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub member_budget: Option<u64>,
    /// Render a graymap (2-d models only).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub render: Option<bool>,
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmpiricalSection {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
    /// Number of realisations.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seeds: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub survival_horizon: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_grid: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_grid: Option<Vec<f64>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center_cap: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale_min_exp: Option<u32>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale_max_exp: Option<u32>,
    /// Largest R/r for the naive Assouad probe.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratio_cap: Option<f64>,
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GwSection {
    /// `binomial(n,p)`, `point(k)`, `table(p0,p1,..)` or `from-rifs`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub offspring: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generations: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runs: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_exponent: Option<f64>,
    #[arg(long = "C")]
    #[serde(rename = "C", skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    /// Absolute scale of the ε-codings when the law comes from the model.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    /// Realisations for the empirical offspring law.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub survival_horizon: Option<usize>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelDef>,
    #[serde(default)]
    pub analytic: AnalyticSection,
    #[serde(default)]
    pub sample: SampleSection,
    #[serde(default)]
    pub empirical: EmpiricalSection,
    #[serde(default)]
    pub gw: GwSection,
}

fn toml_error(e: toml::de::Error) -> Error {
    let key = e.message().split('`').nth(1).unwrap_or("config").to_string();
    Error::config(key, e.message().trim().to_string())
}

impl Settings {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("config", format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(toml_error)
    }

    pub fn echo(&self) -> String {
        toml::to_string(self).expect("settings serialize")
    }
}

/// Fields set in `flags` replace those in `base`.
pub fn overlay<T: Serialize + for<'de> Deserialize<'de>>(base: &T, flags: &T) -> Result<T> {
    let mut table = toml::Table::try_from(base).expect("section serializes");
    let top = toml::Table::try_from(flags).expect("section serializes");
    table.extend(top);
    table.try_into().map_err(toml_error)
}

/// `--model`: a `.toml` file holding a model table, or a builtin spec.
pub fn model_from_flag(value: &str) -> Result<ModelDef> {
    let path = PathBuf::from(value);
    if path.extension().is_some_and(|e| e == "toml") {
        let text = std::fs::read_to_string(&path)
            .map_err(|e| Error::config("model", format!("cannot read {}: {e}", path.display())))?;
        return ModelDef::from_toml(&text);
    }
    Ok(ModelDef::builtin(value))
}

/// Label used in CSV rows: the builtin spec, or `custom`.
pub fn model_id(model: &ModelDef) -> String {
    model.builtin.clone().unwrap_or_else(|| "custom".into())
}
