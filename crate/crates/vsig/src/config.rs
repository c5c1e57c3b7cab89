//! Experiment configuration: one flat JSON document per run.
//!
//! The kernel block uses the same tagged layout everywhere, e.g.
//! `{"type":"diag_sum_exp","alpha":[0.18,16.02],"lambda":[22.69,0.14],"dim":3}`;
//! see the README for every variant's field names.

use crate::error::{AppError, Result};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use vsig_core::kernel::{KernelSpec, StateSpaceTerm};
use vsig_core::linalg::Mat;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum KernelConfig {
    /// `{"type":"constant","matrix":[[1.0]]}` or `{"type":"constant","dim":2}`.
    Constant {
        #[serde(skip_serializing_if = "Option::is_none")]
        matrix: Option<Vec<Vec<f64>>>,
        #[serde(skip_serializing_if = "Option::is_none")]
        dim: Option<usize>,
    },
    /// `{"type":"fractional","beta":1.05,"dim":2}` (identity matrix) or an
    /// explicit `"matrix"`.
    Fractional {
        beta: f64,
        #[serde(skip_serializing_if = "Option::is_none")]
        matrix: Option<Vec<Vec<f64>>>,
        #[serde(skip_serializing_if = "Option::is_none")]
        dim: Option<usize>,
    },
    /// `{"type":"scalar_exp","alpha":1.0,"lambda":2.0,"dim":2}`.
    ScalarExp { alpha: f64, lambda: f64, dim: usize },
    /// `{"type":"diag_sum_exp","alpha":[...],"lambda":[...],"dim":2}`.
    DiagSumExp {
        alpha: Vec<f64>,
        lambda: Vec<f64>,
        dim: usize,
    },
    /// `{"type":"state_space","lambda":[[...]],"terms":[{"b":[...],"a":[[...]]}]}`.
    StateSpace {
        lambda: Vec<Vec<f64>>,
        terms: Vec<StateSpaceTermConfig>,
    },
    /// `{"type":"tabulated","lags":[...],"values":[[[...]],...]}`.
    Tabulated {
        lags: Vec<f64>,
        values: Vec<Vec<Vec<f64>>>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateSpaceTermConfig {
    pub b: Vec<f64>,
    pub a: Vec<Vec<f64>>,
}

fn rows_to_mat(rows: &[Vec<f64>]) -> Result<Mat> {
    Mat::from_rows(rows).map_err(|e| AppError::Config(e.to_string()))
}

impl KernelConfig {
    pub fn to_spec(&self) -> Result<KernelSpec> {
        let spec = match self {
            KernelConfig::Constant { matrix, dim } => match (matrix, dim) {
                (Some(rows), _) => KernelSpec::Constant {
                    a: rows_to_mat(rows)?,
                },
                (None, Some(d)) => KernelSpec::constant_identity(*d),
                (None, None) => {
                    return Err(AppError::Config(
                        "constant kernel needs \"matrix\" or \"dim\"".into(),
                    ))
                }
            },
            KernelConfig::Fractional { beta, matrix, dim } => {
                let a = match (matrix, dim) {
                    (Some(rows), _) => rows_to_mat(rows)?,
                    (None, Some(d)) => Mat::identity(*d),
                    (None, None) => {
                        return Err(AppError::Config(
                            "fractional kernel needs \"matrix\" or \"dim\"".into(),
                        ))
                    }
                };
                KernelSpec::Fractional { beta: *beta, a }
            }
            KernelConfig::ScalarExp { alpha, lambda, dim } => KernelSpec::ScalarExp {
                alpha: *alpha,
                lambda: *lambda,
                dim: *dim,
            },
            KernelConfig::DiagSumExp { alpha, lambda, dim } => KernelSpec::DiagSumExp {
                alpha: alpha.clone(),
                lambda: lambda.clone(),
                dim: *dim,
            },
            KernelConfig::StateSpace { lambda, terms } => KernelSpec::StateSpace {
                lambda: rows_to_mat(lambda)?,
                terms: terms
                    .iter()
                    .map(|t| {
                        Ok(StateSpaceTerm {
                            b: t.b.clone(),
                            a: rows_to_mat(&t.a)?,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?,
            },
            KernelConfig::Tabulated { lags, values } => KernelSpec::Tabulated {
                lags: lags.clone(),
                values: values
                    .iter()
                    .map(|v| rows_to_mat(v))
                    .collect::<Result<Vec<_>>>()?,
            },
        };
        spec.validate()
            .map_err(|e| AppError::Config(e.to_string()))?;
        Ok(spec)
    }
}

/// Simulation / data grid block.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct GridConfig {
    /// Horizon for simulated grids.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    /// Number of segments for simulated grids.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    /// CSV input for data-driven experiments.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data_file: Option<PathBuf>,
}

/// Model block: truncation levels, ridge penalties, hyperparameter grids,
/// window sizes and forecast horizons.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelConfig {
    #[serde(default = "default_level")]
    pub level: usize,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default = "default_sde_lambda_grid")]
    pub lambda_grid: Vec<f64>,
    #[serde(default = "default_alpha_grid")]
    pub alpha_grid: Vec<f64>,
    #[serde(default = "default_level_grid")]
    pub level_grid: Vec<usize>,
    #[serde(default = "default_eta_grid")]
    pub eta_grid: Vec<f64>,
    /// Past-window sizes `p` (in observations) for forecasting.
    #[serde(default = "default_windows")]
    pub windows: Vec<usize>,
    /// Forecast horizons `q` (in observations).
    #[serde(default = "default_horizons")]
    pub horizons: Vec<usize>,
    /// HAR regressors: "moving_average" (default) or "raw_lags".
    #[serde(default = "default_har_variant")]
    pub har_variant: String,
}

fn default_level() -> usize {
    5
}
fn default_eta() -> f64 {
    1e-8
}
fn default_sde_lambda_grid() -> Vec<f64> {
    (0..=10).map(|i| i as f64).collect()
}
fn default_alpha_grid() -> Vec<f64> {
    vec![0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0]
}
fn default_level_grid() -> Vec<usize> {
    vec![2, 3, 4]
}
fn default_eta_grid() -> Vec<f64> {
    // 1e-8 .. 1e2, 13 logarithmic points.
    (0..13)
        .map(|i| 10f64.powf(-8.0 + 10.0 * i as f64 / 12.0))
        .collect()
}
fn default_windows() -> Vec<usize> {
    vec![20, 60, 110, 150, 200, 240]
}
fn default_horizons() -> Vec<usize> {
    vec![1, 3, 5]
}
fn default_har_variant() -> String {
    "moving_average".into()
}

impl Default for ModelConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults deserialize")
    }
}

/// Volatility-forecasting kernel grid: rates and weights for the
/// two-exponential family; pairs are formed from these lists.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VolKernelGrid {
    #[serde(default = "default_vol_lambda_grid")]
    pub lambda: Vec<f64>,
    #[serde(default = "default_alpha_grid")]
    pub alpha: Vec<f64>,
}

fn default_vol_lambda_grid() -> Vec<f64> {
    vec![0.05, 0.1, 0.25, 0.5, 1.0, 2.0, 5.0, 10.0, 25.0, 50.0]
}

impl Default for VolKernelGrid {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults deserialize")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitConfig {
    /// Training share; defaults per experiment (0.9 for sde, 0.8 for
    /// volforecast, matching the studies they reproduce).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_fraction: Option<f64>,
    /// Share of the training range reserved for hyperparameter tuning.
    #[serde(default = "default_validation_fraction")]
    pub validation_fraction: f64,
}

fn default_validation_fraction() -> f64 {
    0.2
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            train_fraction: None,
            validation_fraction: default_validation_fraction(),
        }
    }
}

impl SplitConfig {
    pub fn train_fraction_or(&self, default: f64) -> f64 {
        self.train_fraction.unwrap_or(default)
    }
}

/// Coefficients of the linear Volterra SDE study.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SdeConfig {
    #[serde(default = "one")]
    pub y0: f64,
    #[serde(default)]
    pub b0: f64,
    #[serde(default = "minus_one")]
    pub b1: f64,
    #[serde(default = "one")]
    pub sigma0: f64,
    #[serde(default = "half")]
    pub sigma1: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Fitting uses grid nodes with `t <= fit_t_max` only.
    #[serde(default = "one")]
    pub fit_t_max: f64,
    /// Dump the simulated dataset: "wide" (one CSV, sample id column) or
    /// "per_sample" (one CSV per sample).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset_dump: Option<String>,
}

fn one() -> f64 {
    1.0
}
fn minus_one() -> f64 {
    -1.0
}
fn half() -> f64 {
    0.5
}
fn default_samples() -> usize {
    1000
}

impl Default for SdeConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults deserialize")
    }
}

/// Column names for realized-volatility CSV ingestion.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DataColumns {
    #[serde(default = "default_date_column")]
    pub date_column: String,
    #[serde(default = "default_price_column")]
    pub price_column: String,
    #[serde(default = "default_rv_column")]
    pub rv_column: String,
    /// Set when the price column holds raw prices needing a log transform.
    #[serde(default)]
    pub price_is_raw: bool,
}

fn default_date_column() -> String {
    "date".into()
}
fn default_price_column() -> String {
    "log_price".into()
}
fn default_rv_column() -> String {
    "rv".into()
}

impl Default for DataColumns {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults deserialize")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Sde,
    Volforecast,
    Sig,
    Gram,
}

/// One experiment run, fully specified.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Grid time per observation; defaults to trading days in years (1/252).
    #[serde(default = "default_time_unit_scale")]
    pub time_unit_scale: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelConfig>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub vol_kernel_grid: VolKernelGrid,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub sde: SdeConfig,
    #[serde(default)]
    pub data: DataColumns,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_time_unit_scale() -> f64 {
    1.0 / 252.0
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| AppError::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| AppError::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let frac_ok = |f: f64| f > 0.0 && f < 1.0;
        if !frac_ok(self.split.train_fraction.unwrap_or(0.5))
            || !frac_ok(self.split.validation_fraction)
        {
            return Err(AppError::Config(
                "split fractions must lie in (0, 1)".into(),
            ));
        }
        if self.time_unit_scale <= 0.0 {
            return Err(AppError::Config("time_unit_scale must be positive".into()));
        }
        if self.model.windows.contains(&0) || self.model.horizons.contains(&0) {
            return Err(AppError::Config(
                "windows and horizons must be positive".into(),
            ));
        }
        if let Some(f) = &self.grid.data_file {
            if !f.exists() {
                return Err(AppError::Config(format!(
                    "data file {} does not exist",
                    f.display()
                )));
            }
        }
        match self.experiment {
            ExperimentKind::Sde => {
                if let Some(mode) = &self.sde.dataset_dump {
                    if !matches!(mode.as_str(), "wide" | "per_sample") {
                        return Err(AppError::Config(format!(
                            "dataset_dump must be \"wide\" or \"per_sample\", got \"{mode}\""
                        )));
                    }
                }
                if self.sde.samples == 0 {
                    return Err(AppError::Config("sde.samples must be positive".into()));
                }
                if self.model.lambda_grid.is_empty() {
                    return Err(AppError::Config("empty lambda grid".into()));
                }
                let n = self.grid.steps.unwrap_or(1000);
                let t = self.grid.t_end.unwrap_or(2.0);
                if n == 0 || t <= 0.0 {
                    return Err(AppError::Config(
                        "grid needs steps >= 1 and t_end > 0".into(),
                    ));
                }
                if self.sde.fit_t_max <= 0.0 || self.sde.fit_t_max > t {
                    return Err(AppError::Config("fit_t_max must lie in (0, t_end]".into()));
                }
            }
            ExperimentKind::Volforecast
                if (self.model.level_grid.is_empty()
                    || self.model.eta_grid.is_empty()
                    || self.vol_kernel_grid.lambda.is_empty()
                    || self.vol_kernel_grid.alpha.is_empty()) =>
            {
                return Err(AppError::Config("empty hyperparameter grid".into()));
            }
            _ => {}
        }
        Ok(())
    }

    pub fn echo_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}
