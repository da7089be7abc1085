//! Run reports: pretty-printed JSON with schema tag `dualex-report/1`.
//! Floats round-trip exactly; optional sections are omitted when absent.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::example::ExampleImportance;

pub const SCHEMA: &str = "dualex-report/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema: String,
    pub command: String,
    pub seed: u64,
    pub config: RunConfig,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub points: Vec<PointResult>,
    pub aggregate: Aggregate,
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<Timing>,
}

/// Echo of everything that determines the output.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub dataset: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blackbox: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_lambda: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    #[serde(default)]
    pub global: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lime_n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lime_cov: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lime_v: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lime_weighting: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nam: Option<NamConfigEcho>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ale_bins: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ale_probe: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamConfigEcho {
    pub lr: f64,
    pub alpha: f64,
    pub epochs: usize,
    pub batch: usize,
    pub hidden: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PointResult {
    pub index: usize,
    pub x0: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contains_x0: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mse_dual: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lime_coefficients: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lime_intercept: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mse_lime: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_a: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std_a: Option<Vec<f64>>,
    /// Mean over points of `|a_i| / sum_j |a_j|`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_normalized_importance: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mse: Option<MseStats>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub importance_tables: Vec<ExampleImportance>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nam_training: Option<NamTraining>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseStats {
    pub dual_mean: f64,
    pub dual_median: f64,
    pub lime_mean: f64,
    pub lime_median: f64,
    /// Points where the dual surrogate error is strictly smaller.
    pub dual_better: usize,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamTraining {
    pub initial_loss: f64,
    pub final_loss: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub unix_time: u64,
    pub elapsed_seconds: f64,
}

impl RunReport {
    pub fn new(command: &str, seed: u64, config: RunConfig) -> Self {
        RunReport {
            schema: SCHEMA.into(),
            command: command.into(),
            seed,
            config,
            points: Vec::new(),
            aggregate: Aggregate::default(),
            warnings: Vec::new(),
            timing: None,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: RunReport = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        if r.schema != SCHEMA {
            return Err(Error::Format(format!("unsupported schema '{}', expected '{SCHEMA}'", r.schema)));
        }
        Ok(r)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}
