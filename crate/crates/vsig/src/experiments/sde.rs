//! The synthetic linear-Volterra-SDE study.
//!
//! Simulate `(B, Y)` pairs, lift the time-augmented Brownian interpolation
//! with three feature maps (the classical signature, the Volterra
//! signature under the data-generating kernel, and the Volterra signature
//! under a scalar-exponential kernel with a grid-searched rate), then ridge
//! regress `Y_t` on the features over the fitting interval and evaluate on
//! both the fitting interval and the full horizon.

use crate::config::ExperimentConfig;
use crate::error::{AppError, Result};
use crate::experiments::promote_scalar_kernel;
use crate::report::{fmt_float, Table};
use rayon::prelude::*;
use serde_json::{json, Value};
use std::collections::BTreeMap;
use vsig_core::kernel::KernelSpec;
use vsig_core::learning::{metrics, ridge_fit, select_best, FeatureMatrix, RidgeModel};
use vsig_core::path::{AugmentMode, PiecewiseLinearPath, TimeGrid};
use vsig_core::statespace::{lift_solve, StepRule};
use vsig_core::tensor::TruncatedTensorSeries;
use vsig_core::volterra::{simulate_sample, VsdeParams, VsdeSample};
use vsig_core::vsig::{classical_signature, diagonal_signature, QuadratureConfig};

/// Per-model evaluation on the two intervals.
#[derive(Debug, Clone, Copy)]
pub struct IntervalMetrics {
    pub mse_fit: f64,
    pub r2_fit: f64,
    pub mse_full: f64,
    pub r2_full: f64,
}

/// Driver output: results document plus the emitted tables.
pub struct SdeOutcome {
    pub results: Value,
    pub table: Table,
    pub predictions: Table,
    pub metrics: BTreeMap<String, IntervalMetrics>,
    pub best_lambda: f64,
    /// Simulation grid times (for dataset dumps).
    pub times: Vec<f64>,
    /// The simulated samples, kept only when a dataset dump is requested.
    pub dataset: Option<Vec<VsdeSample>>,
}

const MODELS: [&str; 3] = ["sig", "vsig_k", "vsig_lambda"];

fn flatten_series(series: &TruncatedTensorSeries) -> Vec<f64> {
    let mut row = Vec::new();
    for lv in series.levels() {
        row.extend_from_slice(lv);
    }
    row
}

type RowBlock = (FeatureMatrix, Vec<f64>, Vec<(usize, usize)>);

/// Feature rows for the given samples at the given nodes, in sample-major
/// order; the featurizer runs sample-parallel with deterministic assembly.
fn build_rows<F>(
    paths: &[PiecewiseLinearPath],
    samples: &[VsdeSample],
    sample_indices: &[usize],
    nodes: &[usize],
    words: &[Vec<usize>],
    featurize: F,
) -> Result<RowBlock>
where
    F: Fn(&PiecewiseLinearPath) -> Result<Vec<TruncatedTensorSeries>> + Sync,
{
    let per_sample: Vec<Vec<Vec<f64>>> = sample_indices
        .par_iter()
        .map(|&i| {
            let series = featurize(&paths[i])?;
            Ok(nodes.iter().map(|&n| flatten_series(&series[n])).collect())
        })
        .collect::<Result<_>>()?;
    let mut x = FeatureMatrix::new(words.to_vec());
    let mut y = Vec::with_capacity(sample_indices.len() * nodes.len());
    let mut meta = Vec::with_capacity(sample_indices.len() * nodes.len());
    for (rows, &i) in per_sample.into_iter().zip(sample_indices.iter()) {
        for (row, &n) in rows.into_iter().zip(nodes.iter()) {
            x.push_row(row).map_err(AppError::Compute)?;
            y.push(samples[i].y[n]);
            meta.push((i, n));
        }
    }
    Ok((x, y, meta))
}

pub fn run_sde_experiment(cfg: &ExperimentConfig) -> Result<SdeOutcome> {
    let kernel_cfg = cfg
        .kernel
        .as_ref()
        .ok_or_else(|| AppError::Config("sde experiment needs a kernel block".into()))?;
    let scalar_kernel = kernel_cfg.to_spec()?;
    let t_end = cfg.grid.t_end.unwrap_or(2.0);
    let steps = cfg.grid.steps.unwrap_or(1000);
    let grid = TimeGrid::uniform(0.0, t_end, steps).map_err(AppError::Compute)?;
    let level = cfg.model.level;

    let params = VsdeParams {
        y0: cfg.sde.y0,
        b0: cfg.sde.b0,
        b1: cfg.sde.b1,
        sigma0: cfg.sde.sigma0,
        sigma1: cfg.sde.sigma1,
        kernel: scalar_kernel.clone(),
        grid: grid.clone(),
        samples: cfg.sde.samples,
        seed: cfg.seed,
    };
    let samples: Vec<VsdeSample> = (0..params.samples)
        .into_par_iter()
        .map(|i| simulate_sample(&params, i))
        .collect::<std::result::Result<_, _>>()
        .map_err(AppError::Compute)?;

    // Time-augmented piecewise-linear Brownian interpolations (B, t).
    let times = grid.times().to_vec();
    let paths: Vec<PiecewiseLinearPath> = samples
        .par_iter()
        .map(|s| {
            let values: Vec<Vec<f64>> = s.brownian.iter().map(|&b| vec![b]).collect();
            PiecewiseLinearPath::from_samples(times.clone(), values)
                .map(|p| p.augment(&[AugmentMode::Time]))
        })
        .collect::<std::result::Result<_, _>>()
        .map_err(AppError::Compute)?;
    let path_dim = 2usize;
    let feature_kernel = promote_scalar_kernel(&scalar_kernel, path_dim)?;
    let words = FeatureMatrix::word_columns(path_dim, level);

    // Node sets: fitting restricted to t <= fit_t_max (leakage guard below),
    // evaluation on both the fitting interval and the whole horizon.
    let fit_t_max = cfg.sde.fit_t_max;
    let fit_nodes: Vec<usize> = (0..times.len())
        .filter(|&i| times[i] <= fit_t_max + 1e-12)
        .collect();
    let all_nodes: Vec<usize> = (0..times.len()).collect();
    for &n in &fit_nodes {
        assert!(
            times[n] <= fit_t_max + 1e-9,
            "leakage guard: fit node beyond the interval"
        );
    }

    // Sample split: train / test, plus a validation tail inside train for
    // the rate search.
    let m_total = params.samples;
    let train_fraction = cfg.split.train_fraction_or(0.9);
    let n_train = ((m_total as f64) * train_fraction).floor() as usize;
    if n_train == 0 || n_train == m_total {
        return Err(AppError::Config("degenerate train/test split".into()));
    }
    let n_val = ((n_train as f64) * cfg.split.validation_fraction).ceil() as usize;
    let n_fit = n_train - n_val.min(n_train - 1);
    let fit_samples: Vec<usize> = (0..n_fit).collect();
    let val_samples: Vec<usize> = (n_fit..n_train).collect();
    let train_samples: Vec<usize> = (0..n_train).collect();
    let test_samples: Vec<usize> = (n_train..m_total).collect();

    let sig_featurize =
        |p: &PiecewiseLinearPath| classical_signature(p, level).map_err(AppError::Compute);
    // The simulator is a left-point scheme, so left-rule features make the
    // discretized solution an exact linear functional of the truncated
    // signature; kernel-aware features inherit that alignment. Kernels with
    // a singular diagonal still need the product rule.
    let vsig_quad = match vsig_core::kernel::Kernel::fractional_parts(&feature_kernel) {
        Some((beta, _)) if beta < 1.0 => QuadratureConfig::product_integration(),
        _ => QuadratureConfig { rule: vsig_core::vsig::QuadRule::Left, refinement: 1 },
    };
    let vsig_featurize = |p: &PiecewiseLinearPath| {
        diagonal_signature(p, &feature_kernel, level, &vsig_quad)
            .map(|f| f.series().to_vec())
            .map_err(AppError::Compute)
    };
    let lambda_featurize = |lambda: f64| {
        move |p: &PiecewiseLinearPath| {
            let k = KernelSpec::ScalarExp {
                alpha: 1.0,
                lambda,
                dim: path_dim,
            };
            lift_solve(p, &k, level, StepRule::ExponentialMidpoint)
                .map(|l| l.reconstruct())
                .map_err(AppError::Compute)
        }
    };

    // Rate search for the exponential surrogate kernel on the validation tail.
    let eta = cfg.model.eta;
    let mut lambda_scores = Vec::with_capacity(cfg.model.lambda_grid.len());
    for &lambda in &cfg.model.lambda_grid {
        let featurize = lambda_featurize(lambda);
        let (x_fit, y_fit, _) = build_rows(
            &paths,
            &samples,
            &fit_samples,
            &fit_nodes,
            &words,
            featurize,
        )?;
        let (x_val, y_val, _) = build_rows(
            &paths,
            &samples,
            &val_samples,
            &fit_nodes,
            &words,
            featurize,
        )?;
        let model = ridge_fit(&x_fit, &y_fit, eta).map_err(AppError::Compute)?;
        let mse = metrics(&model.predict(&x_val), &y_val)
            .map_err(AppError::Compute)?
            .mse;
        lambda_scores.push(mse);
    }
    let best_lambda = cfg.model.lambda_grid[select_best(&lambda_scores)];

    // Final fits on the full training set.
    let fit_model = |name: &str| -> Result<RidgeModel> {
        let (x, y, _) = match name {
            "sig" => build_rows(
                &paths,
                &samples,
                &train_samples,
                &fit_nodes,
                &words,
                sig_featurize,
            )?,
            "vsig_k" => build_rows(
                &paths,
                &samples,
                &train_samples,
                &fit_nodes,
                &words,
                vsig_featurize,
            )?,
            _ => build_rows(
                &paths,
                &samples,
                &train_samples,
                &fit_nodes,
                &words,
                lambda_featurize(best_lambda),
            )?,
        };
        ridge_fit(&x, &y, eta).map_err(AppError::Compute)
    };
    let models: Vec<RidgeModel> = MODELS
        .iter()
        .map(|name| fit_model(name))
        .collect::<Result<_>>()?;

    // Test predictions over the full horizon.
    let mut test_predictions: Vec<Vec<f64>> = Vec::new();
    let mut test_meta: Vec<(usize, usize)> = Vec::new();
    let mut test_y: Vec<f64> = Vec::new();
    for (idx, name) in MODELS.iter().enumerate() {
        let (x, y, meta) = match *name {
            "sig" => build_rows(
                &paths,
                &samples,
                &test_samples,
                &all_nodes,
                &words,
                sig_featurize,
            )?,
            "vsig_k" => build_rows(
                &paths,
                &samples,
                &test_samples,
                &all_nodes,
                &words,
                vsig_featurize,
            )?,
            _ => build_rows(
                &paths,
                &samples,
                &test_samples,
                &all_nodes,
                &words,
                lambda_featurize(best_lambda),
            )?,
        };
        if idx == 0 {
            test_meta = meta;
            test_y = y;
        }
        test_predictions.push(models[idx].predict(&x));
    }

    // Metrics on [0, fit_t_max] and on the full horizon, test samples only.
    let fit_mask: Vec<bool> = test_meta
        .iter()
        .map(|&(_, n)| times[n] <= fit_t_max + 1e-12)
        .collect();
    let mut metrics_map = BTreeMap::new();
    for (idx, name) in MODELS.iter().enumerate() {
        let preds = &test_predictions[idx];
        let sub_pred: Vec<f64> = preds
            .iter()
            .zip(fit_mask.iter())
            .filter_map(|(p, &m)| m.then_some(*p))
            .collect();
        let sub_y: Vec<f64> = test_y
            .iter()
            .zip(fit_mask.iter())
            .filter_map(|(p, &m)| m.then_some(*p))
            .collect();
        let fit = metrics(&sub_pred, &sub_y).map_err(AppError::Compute)?;
        let full = metrics(preds, &test_y).map_err(AppError::Compute)?;
        metrics_map.insert(
            name.to_string(),
            IntervalMetrics {
                mse_fit: fit.mse,
                r2_fit: fit.r2.unwrap_or(f64::NAN),
                mse_full: full.mse,
                r2_full: full.r2.unwrap_or(f64::NAN),
            },
        );
    }

    let mut table = Table::new(&[
        "method",
        "mse_fit_interval",
        "r2_fit_interval",
        "mse_full",
        "r2_full",
    ]);
    let label = |name: &str| match name {
        "sig" => "Sig",
        "vsig_k" => "VSig_k",
        _ => "VSig_klambda",
    };
    for name in MODELS {
        let m = &metrics_map[name];
        table.push(vec![
            label(name).to_string(),
            fmt_float(m.mse_fit),
            fmt_float(m.r2_fit),
            fmt_float(m.mse_full),
            fmt_float(m.r2_full),
        ]);
    }

    let mut predictions = Table::new(&["sample", "t", "y", "sig", "vsig_k", "vsig_lambda"]);
    for (row, &(sample, node)) in test_meta.iter().enumerate() {
        predictions.push(vec![
            sample.to_string(),
            fmt_float(times[node]),
            fmt_float(test_y[row]),
            fmt_float(test_predictions[0][row]),
            fmt_float(test_predictions[1][row]),
            fmt_float(test_predictions[2][row]),
        ]);
    }

    let model_dumps: serde_json::Map<String, Value> = MODELS
        .iter()
        .zip(models.iter())
        .map(|(name, model)| (name.to_string(), crate::report::ridge_model_json(model)))
        .collect();
    let results = json!({
        "model_dumps": model_dumps,
        "models": metrics_map.iter().map(|(name, m)| {
            (name.clone(), json!({
                "mse_fit_interval": m.mse_fit,
                "r2_fit_interval": m.r2_fit,
                "mse_full": m.mse_full,
                "r2_full": m.r2_full,
            }))
        }).collect::<serde_json::Map<String, Value>>(),
        "best_lambda": best_lambda,
        "lambda_scores": lambda_scores,
        "train_samples": n_train,
        "test_samples": m_total - n_train,
        "fit_nodes": fit_nodes.len(),
        "grid_nodes": times.len(),
    });

    let dataset = cfg.sde.dataset_dump.as_ref().map(|_| samples);
    Ok(SdeOutcome {
        results,
        table,
        predictions,
        metrics: metrics_map,
        best_lambda,
        times,
        dataset,
    })
}
