//! Realized-volatility forecasting on sliding past windows.
//!
//! For each window length `p` and horizon `q`, the driver regresses
//! `v_{n+q}` on signature features of the augmented log-price path
//! restricted to `[t_{n-p}, t_n]`. The Volterra features use the
//! two-exponential kernel family computed by the state-space engine;
//! `(lambda_1, lambda_2, alpha_1, alpha_2, L, eta)` are tuned on the tail
//! of the training range. Windows keep absolute time so one learned rate
//! means the same thing across window lengths.

use crate::config::ExperimentConfig;
use crate::error::{AppError, Result};
use crate::io::RvSeries;
use crate::report::{fmt_float, Table};
use rayon::prelude::*;
use serde_json::{json, Value};
use std::collections::BTreeMap;
use vsig_core::kernel::KernelSpec;
use vsig_core::learning::{har_fit_predict, metrics, ridge_fit, FeatureMatrix, HarVariant};
use vsig_core::path::{AugmentMode, PiecewiseLinearPath};
use vsig_core::statespace::{lift_solve, StepRule};
use vsig_core::vsig::classical_signature;

/// Per-(q, p) outcome for the three methods.
#[derive(Debug, Clone)]
pub struct CellResult {
    pub horizon: usize,
    pub window: usize,
    pub r2_sig: f64,
    pub r2_vsig: f64,
    pub r2_har: f64,
    pub val_r2_sig: f64,
    pub val_r2_vsig: f64,
    pub vsig_lambda: (f64, f64),
    pub vsig_alpha: (f64, f64),
    pub vsig_level: usize,
    pub vsig_eta: f64,
    pub sig_level: usize,
    pub sig_eta: f64,
}

#[derive(Debug)]
pub struct VolOutcome {
    pub results: Value,
    pub table: Table,
    pub predictions: Table,
    pub cells: Vec<CellResult>,
}

#[derive(Debug, Clone, Copy)]
struct VsigCandidate {
    lambda: (f64, f64),
    alpha: (f64, f64),
    level: usize,
}

fn flatten(series: &vsig_core::tensor::TruncatedTensorSeries) -> Vec<f64> {
    let mut row = Vec::new();
    for lv in series.levels() {
        row.extend_from_slice(lv);
    }
    row
}

/// Signature features of the window `[n-p, n]` for every row, in row order.
fn window_rows<F>(
    path: &PiecewiseLinearPath,
    rows: &[usize],
    window: usize,
    featurize: F,
) -> Result<Vec<Vec<f64>>>
where
    F: Fn(&PiecewiseLinearPath) -> Result<Vec<f64>> + Sync,
{
    rows.par_iter()
        .map(|&n| {
            let w = path.slice(n - window, n).map_err(AppError::Compute)?;
            // Look-ahead guard: the window must end exactly at the feature time.
            assert!(
                (w.grid().times().last().unwrap() - path.grid().times()[n]).abs() < 1e-12,
                "window leaks past its feature time"
            );
            featurize(&w)
        })
        .collect()
}

fn matrix_from(words: &[Vec<usize>], rows: &[Vec<f64>], pick: &[usize]) -> Result<FeatureMatrix> {
    let mut x = FeatureMatrix::new(words.to_vec());
    for &i in pick {
        x.push_row(rows[i].clone()).map_err(AppError::Compute)?;
    }
    Ok(x)
}

type FeatureBlock = (Vec<Vec<usize>>, Vec<Vec<f64>>);

struct FamilyFit {
    test_predictions: Vec<f64>,
    r2_test: f64,
    r2_val: f64,
    eta: f64,
    candidate_index: usize,
}

/// Tunes `(candidate, eta)` on the validation rows, refits on the full
/// training range, evaluates on the test rows.
#[allow(clippy::too_many_arguments)]
fn fit_family<F>(
    path: &PiecewiseLinearPath,
    window: usize,
    targets: &[f64],
    fit_rows: &[usize],
    val_rows: &[usize],
    train_rows: &[usize],
    test_rows: &[usize],
    row_index: &BTreeMap<usize, usize>,
    eta_grid: &[f64],
    candidates: usize,
    features_for: F,
) -> Result<FamilyFit>
where
    F: Fn(usize) -> Result<FeatureBlock>,
{
    let y_of =
        |rows: &[usize]| -> Vec<f64> { rows.iter().map(|&n| targets[row_index[&n]]).collect() };
    let y_fit = y_of(fit_rows);
    let y_val = y_of(val_rows);
    let y_train = y_of(train_rows);
    let y_test = y_of(test_rows);
    let pick = |rows: &[usize]| -> Vec<usize> { rows.iter().map(|&n| row_index[&n]).collect() };
    let fit_pick = pick(fit_rows);
    let val_pick = pick(val_rows);
    let train_pick = pick(train_rows);
    let test_pick = pick(test_rows);

    let mut best: Option<(f64, usize, f64)> = None; // (mse, candidate, eta)
    let mut best_rows: Option<FeatureBlock> = None;
    for c in 0..candidates {
        let (words, rows) = features_for(c)?;
        let x_fit = matrix_from(&words, &rows, &fit_pick)?;
        let x_val = matrix_from(&words, &rows, &val_pick)?;
        for &eta in eta_grid {
            let model = ridge_fit(&x_fit, &y_fit, eta).map_err(AppError::Compute)?;
            let mse = metrics(&model.predict(&x_val), &y_val)
                .map_err(AppError::Compute)?
                .mse;
            let better = match &best {
                None => true,
                Some((b, _, _)) => mse < *b,
            };
            if better {
                best = Some((mse, c, eta));
                best_rows = Some((words.clone(), rows.clone()));
            }
        }
    }
    let (_, cand, eta) =
        best.ok_or_else(|| AppError::Config("empty hyperparameter grid".into()))?;
    let (words, rows) = best_rows.expect("winner recorded");
    // Validation score of the winner (for reporting and the synthetic check).
    let x_fit = matrix_from(&words, &rows, &fit_pick)?;
    let x_val = matrix_from(&words, &rows, &val_pick)?;
    let winner = ridge_fit(&x_fit, &y_fit, eta).map_err(AppError::Compute)?;
    let r2_val = metrics(&winner.predict(&x_val), &y_val)
        .map_err(AppError::Compute)?
        .r2
        .unwrap_or(f64::NAN);
    // Refit on the whole training range, evaluate on test.
    let x_train = matrix_from(&words, &rows, &train_pick)?;
    let x_test = matrix_from(&words, &rows, &test_pick)?;
    let final_model = ridge_fit(&x_train, &y_train, eta).map_err(AppError::Compute)?;
    let preds = final_model.predict(&x_test);
    let r2_test = metrics(&preds, &y_test)
        .map_err(AppError::Compute)?
        .r2
        .unwrap_or(f64::NAN);
    let _ = window;
    let _ = path;
    Ok(FamilyFit {
        test_predictions: preds,
        r2_test,
        r2_val,
        eta,
        candidate_index: cand,
    })
}

pub fn run_vol_forecast(cfg: &ExperimentConfig, series: &RvSeries) -> Result<VolOutcome> {
    let scale = cfg.time_unit_scale;
    let n_obs = series.len();
    if n_obs < 30 {
        return Err(AppError::Data("series too short".into()));
    }
    let har_variant = match cfg.model.har_variant.as_str() {
        "moving_average" => HarVariant::MovingAverage,
        "raw_lags" => HarVariant::RawLags,
        other => return Err(AppError::Config(format!("unknown har_variant \"{other}\""))),
    };
    let times: Vec<f64> = (0..n_obs).map(|i| i as f64 * scale).collect();
    let values: Vec<Vec<f64>> = series.log_price.iter().map(|&x| vec![x]).collect();
    let base =
        PiecewiseLinearPath::from_samples(times.clone(), values).map_err(AppError::Compute)?;
    let path = base.augment(&[AugmentMode::CumulativeAbsIncrement, AugmentMode::Time]);
    let dim = path.dim();

    let train_fraction = cfg.split.train_fraction_or(0.8);
    let train_end = ((n_obs as f64) * train_fraction).floor() as usize;

    // Two-exponential candidates: ordered rate pairs, free weight pairs.
    let mut vsig_candidates = Vec::new();
    for (i, &l1) in cfg.vol_kernel_grid.lambda.iter().enumerate() {
        for &l2 in cfg.vol_kernel_grid.lambda.iter().take(i + 1) {
            for &a1 in &cfg.vol_kernel_grid.alpha {
                for &a2 in &cfg.vol_kernel_grid.alpha {
                    for &level in &cfg.model.level_grid {
                        vsig_candidates.push(VsigCandidate {
                            lambda: (l1, l2),
                            alpha: (a1, a2),
                            level,
                        });
                    }
                }
            }
        }
    }
    let sig_levels: Vec<usize> = cfg.model.level_grid.clone();

    let mut cells = Vec::new();
    let mut predictions = Table::new(&["q", "p", "index", "date", "actual", "sig", "vsig", "har"]);
    for &q in &cfg.model.horizons {
        for &p in &cfg.model.windows {
            let n_min = p.max(22);
            // Feature rows: features at n, target v_{n+q}; strictly past
            // windows, targets strictly ahead.
            let rows_all: Vec<usize> = (n_min..n_obs.saturating_sub(q)).collect();
            let (train_rows, test_rows): (Vec<usize>, Vec<usize>) =
                rows_all.iter().partition(|&&n| n + q < train_end);
            if train_rows.len() < 25 || test_rows.len() < 5 {
                return Err(AppError::Config(format!(
                    "insufficient history for window {p} and horizon {q}"
                )));
            }
            let n_val = ((train_rows.len() as f64) * cfg.split.validation_fraction).ceil() as usize;
            let n_fit = train_rows.len() - n_val.min(train_rows.len() - 1);
            let fit_rows: Vec<usize> = train_rows[..n_fit].to_vec();
            let val_rows: Vec<usize> = train_rows[n_fit..].to_vec();
            let targets: Vec<f64> = rows_all.iter().map(|&n| series.rv[n + q]).collect();
            let row_index: BTreeMap<usize, usize> =
                rows_all.iter().enumerate().map(|(i, &n)| (n, i)).collect();

            // Classical signature family.
            let sig_fit = fit_family(
                &path,
                p,
                &targets,
                &fit_rows,
                &val_rows,
                &train_rows,
                &test_rows,
                &row_index,
                &cfg.model.eta_grid,
                sig_levels.len(),
                |c| {
                    let level = sig_levels[c];
                    let words = FeatureMatrix::word_columns(dim, level);
                    let rows = window_rows(&path, &rows_all, p, |w| {
                        classical_signature(w, level)
                            .map(|s| flatten(s.last().unwrap()))
                            .map_err(AppError::Compute)
                    })?;
                    Ok((words, rows))
                },
            )?;

            // Volterra signature family under the two-exponential kernels.
            let vsig_fit = fit_family(
                &path,
                p,
                &targets,
                &fit_rows,
                &val_rows,
                &train_rows,
                &test_rows,
                &row_index,
                &cfg.model.eta_grid,
                vsig_candidates.len(),
                |c| {
                    let cand = vsig_candidates[c];
                    let kernel = KernelSpec::DiagSumExp {
                        alpha: vec![cand.alpha.0, cand.alpha.1],
                        lambda: vec![cand.lambda.0, cand.lambda.1],
                        dim,
                    };
                    let words = FeatureMatrix::word_columns(dim, cand.level);
                    let rows = window_rows(&path, &rows_all, p, |w| {
                        lift_solve(w, &kernel, cand.level, StepRule::ExponentialMidpoint)
                            .map(|l| flatten(&l.terminal()))
                            .map_err(AppError::Compute)
                    })?;
                    Ok((words, rows))
                },
            )?;
            let chosen = vsig_candidates[vsig_fit.candidate_index];

            // HAR benchmark on the same test rows.
            let har = har_fit_predict(&series.rv, q, train_end, har_variant)
                .map_err(AppError::Compute)?;
            let har_by_target: BTreeMap<usize, f64> = har
                .test_indices
                .iter()
                .zip(har.test_predictions.iter())
                .map(|(&i, &v)| (i, v))
                .collect();
            let har_preds: Vec<f64> = test_rows
                .iter()
                .map(|&n| {
                    har_by_target.get(&(n + q)).copied().ok_or_else(|| {
                        AppError::Data(format!("HAR prediction missing for target {}", n + q))
                    })
                })
                .collect::<Result<_>>()?;
            let y_test: Vec<f64> = test_rows.iter().map(|&n| series.rv[n + q]).collect();
            let r2_har = metrics(&har_preds, &y_test)
                .map_err(AppError::Compute)?
                .r2
                .unwrap_or(f64::NAN);

            for (i, &n) in test_rows.iter().enumerate() {
                predictions.push(vec![
                    q.to_string(),
                    p.to_string(),
                    (n + q).to_string(),
                    series.dates[n + q].clone(),
                    fmt_float(series.rv[n + q]),
                    fmt_float(sig_fit.test_predictions[i]),
                    fmt_float(vsig_fit.test_predictions[i]),
                    fmt_float(har_preds[i]),
                ]);
            }

            cells.push(CellResult {
                horizon: q,
                window: p,
                r2_sig: sig_fit.r2_test,
                r2_vsig: vsig_fit.r2_test,
                r2_har,
                val_r2_sig: sig_fit.r2_val,
                val_r2_vsig: vsig_fit.r2_val,
                vsig_lambda: chosen.lambda,
                vsig_alpha: chosen.alpha,
                vsig_level: chosen.level,
                vsig_eta: vsig_fit.eta,
                sig_level: sig_levels[sig_fit.candidate_index],
                sig_eta: sig_fit.eta,
            });
        }
    }

    let mut table = Table::new(&["q", "p", "r2_sig", "r2_vsig", "r2_har"]);
    for cell in &cells {
        table.push(vec![
            cell.horizon.to_string(),
            cell.window.to_string(),
            fmt_float(cell.r2_sig),
            fmt_float(cell.r2_vsig),
            fmt_float(cell.r2_har),
        ]);
    }

    let results = json!({
        "train_end_index": train_end,
        "cells": cells.iter().map(|c| json!({
            "q": c.horizon,
            "p": c.window,
            "r2_sig": c.r2_sig,
            "r2_vsig": c.r2_vsig,
            "r2_har": c.r2_har,
            "validation_r2_sig": c.val_r2_sig,
            "validation_r2_vsig": c.val_r2_vsig,
            "vsig_kernel": {
                "lambda": [c.vsig_lambda.0, c.vsig_lambda.1],
                "alpha": [c.vsig_alpha.0, c.vsig_alpha.1],
                "level": c.vsig_level,
                "eta": c.vsig_eta,
            },
            "sig_model": {"level": c.sig_level, "eta": c.sig_eta},
        })).collect::<Vec<_>>(),
    });

    Ok(VolOutcome {
        results,
        table,
        predictions,
        cells,
    })
}
