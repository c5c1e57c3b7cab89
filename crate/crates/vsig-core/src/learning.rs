//! Ridge regression on signature features, metrics, grid search, HAR.
//!
//! Feature rows are flattened truncated series (all words of length 0..=L
//! in word-index order, so column 0 is the level-0 constant). Columns are
//! standardized on the training rows before penalization (signature
//! entries span many orders of magnitude across levels), and the constant
//! column is neither standardized nor penalized.

use crate::error::Error;
use crate::linalg::LstsqAccumulator;
use crate::math::sqrt;
use crate::tensor::{TruncatedTensorSeries, Word};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

/// Dense observation matrix whose columns are signature words.
#[derive(Debug, Clone)]
pub struct FeatureMatrix {
    words: Vec<Vec<usize>>,
    data: Vec<f64>,
    n_rows: usize,
}

impl FeatureMatrix {
    /// Column labels (word letter sequences) for alphabet `m`, levels 0..=L.
    pub fn word_columns(m: usize, level: usize) -> Vec<Vec<usize>> {
        let mut words = Vec::new();
        for len in 0..=level {
            for idx in 0..m.pow(len as u32) {
                words.push(Word::from_index(m, len, idx).letters().to_vec());
            }
        }
        words
    }

    pub fn new(words: Vec<Vec<usize>>) -> Self {
        FeatureMatrix {
            words,
            data: Vec::new(),
            n_rows: 0,
        }
    }

    /// Appends one flattened series as an observation row.
    pub fn push_series(&mut self, series: &TruncatedTensorSeries) -> Result<(), Error> {
        let mut row = Vec::with_capacity(self.words.len());
        for lv in series.levels() {
            row.extend_from_slice(lv);
        }
        self.push_row(row)
    }

    pub fn push_row(&mut self, row: Vec<f64>) -> Result<(), Error> {
        if row.len() != self.words.len() {
            return Err(Error::DimensionMismatch(alloc::format!(
                "row has {} entries, expected {}",
                row.len(),
                self.words.len()
            )));
        }
        self.data.extend_from_slice(&row);
        self.n_rows += 1;
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.words.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.words.len()..(i + 1) * self.words.len()]
    }

    pub fn words(&self) -> &[Vec<usize>] {
        &self.words
    }

    /// Dotted word labels ("" for the empty word) in column order.
    pub fn labels(&self) -> Vec<String> {
        self.words
            .iter()
            .map(|w| {
                let mut s = String::new();
                for (k, l) in w.iter().enumerate() {
                    if k > 0 {
                        s.push('.');
                    }
                    s.push_str(&alloc::format!("{l}"));
                }
                s
            })
            .collect()
    }
}

/// Fitted ridge model: coefficients live in the standardized feature space.
#[derive(Debug, Clone)]
pub struct RidgeModel {
    theta: Vec<f64>,
    means: Vec<f64>,
    scales: Vec<f64>,
    eta: f64,
    words: Vec<Vec<usize>>,
}

impl RidgeModel {
    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn words(&self) -> &[Vec<usize>] {
        &self.words
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut acc = self.theta[0] * row[0];
        for j in 1..row.len() {
            acc += self.theta[j] * (row[j] - self.means[j]) / self.scales[j];
        }
        acc
    }

    pub fn predict(&self, x: &FeatureMatrix) -> Vec<f64> {
        (0..x.n_rows())
            .map(|i| self.predict_row(x.row(i)))
            .collect()
    }

    /// Coefficients mapped back to the raw feature scale; entry 0 absorbs
    /// the standardization offsets.
    pub fn coefficients_raw(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.theta.len()];
        out[0] = self.theta[0];
        for j in 1..self.theta.len() {
            out[j] = self.theta[j] / self.scales[j];
            out[0] -= self.theta[j] * self.means[j] / self.scales[j];
        }
        out
    }
}

/// Minimizes `mean (y - <theta, row>)^2 + eta |theta|^2` with the constant
/// column excluded from the penalty, via QR on the augmented system.
pub fn ridge_fit(x: &FeatureMatrix, y: &[f64], eta: f64) -> Result<RidgeModel, Error> {
    if x.n_rows() == 0 || y.is_empty() {
        return Err(Error::InvalidInput("empty training data".into()));
    }
    if x.n_rows() != y.len() {
        return Err(Error::DimensionMismatch(alloc::format!(
            "{} rows vs {} targets",
            x.n_rows(),
            y.len()
        )));
    }
    if eta < 0.0 {
        return Err(Error::InvalidInput("eta must be nonnegative".into()));
    }
    let p = x.n_cols();
    let n = x.n_rows();
    let mut means = vec![0.0; p];
    let mut scales = vec![1.0; p];
    for j in 1..p {
        let mut s = 0.0;
        for i in 0..n {
            s += x.row(i)[j];
        }
        let mean = s / n as f64;
        let mut v = 0.0;
        for i in 0..n {
            let d = x.row(i)[j] - mean;
            v += d * d;
        }
        let sd = sqrt(v / n as f64);
        means[j] = mean;
        scales[j] = if sd > 1e-12 { sd } else { 1.0 };
    }

    let mut acc = LstsqAccumulator::new(p);
    let mut row_buf = vec![0.0; p];
    for i in 0..n {
        let row = x.row(i);
        row_buf[0] = row[0];
        for j in 1..p {
            row_buf[j] = (row[j] - means[j]) / scales[j];
        }
        acc.push_row(&row_buf, y[i]);
    }
    if eta > 0.0 {
        let penalty = sqrt(n as f64 * eta);
        for j in 1..p {
            row_buf.fill(0.0);
            row_buf[j] = penalty;
            acc.push_row(&row_buf, 0.0);
        }
    }
    let theta = acc.solve()?;
    Ok(RidgeModel {
        theta,
        means,
        scales,
        eta,
        words: x.words().to_vec(),
    })
}

/// Mean squared error and coefficient of determination.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub mse: f64,
    /// `None` when the targets are constant (SST = 0).
    pub r2: Option<f64>,
}

pub fn metrics(predicted: &[f64], actual: &[f64]) -> Result<Metrics, Error> {
    if predicted.len() != actual.len() {
        return Err(Error::DimensionMismatch(
            "prediction/target lengths differ".into(),
        ));
    }
    if actual.len() < 2 {
        return Err(Error::InvalidInput("need at least two observations".into()));
    }
    let n = actual.len() as f64;
    let mean = actual.iter().sum::<f64>() / n;
    let mut sse = 0.0;
    let mut sst = 0.0;
    for (p, a) in predicted.iter().zip(actual.iter()) {
        sse += (p - a) * (p - a);
        sst += (a - mean) * (a - mean);
    }
    let mse = sse / n;
    let r2 = if sst <= 1e-14 * n * (1.0 + mean * mean) {
        None
    } else {
        Some(1.0 - sse / sst)
    };
    Ok(Metrics { mse, r2 })
}

/// Result of an exhaustive hyperparameter sweep.
#[derive(Debug, Clone)]
pub struct GridSearchOutcome {
    /// Index of the best candidate (first occurrence wins ties).
    pub best_index: usize,
    /// Validation score of every candidate, in candidate order.
    pub scores: Vec<f64>,
}

/// Exhaustive search; best by validation score (lower is better), ties
/// broken by candidate order.
pub fn grid_search<C>(
    candidates: &[C],
    mut eval: impl FnMut(&C) -> Result<f64, Error>,
) -> Result<GridSearchOutcome, Error> {
    if candidates.is_empty() {
        return Err(Error::InvalidInput("empty candidate list".into()));
    }
    let mut scores = Vec::with_capacity(candidates.len());
    for c in candidates {
        scores.push(eval(c)?);
    }
    Ok(GridSearchOutcome {
        best_index: select_best(&scores),
        scores,
    })
}

/// First index achieving the minimum score.
pub fn select_best(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s < scores[best] {
            best = i;
        }
    }
    best
}

/// Regressor layout for the heterogeneous autoregressive benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HarVariant {
    /// `(1, v_n, mean of last 5, mean of last 22)`, the standard model.
    MovingAverage,
    /// `(1, v_n, v_{n-5}, v_{n-22})`, raw lags.
    RawLags,
}

/// HAR forecasts: `(target index, prediction)` lists for train and test rows.
#[derive(Debug, Clone)]
pub struct HarForecast {
    pub train_indices: Vec<usize>,
    pub train_predictions: Vec<f64>,
    pub test_indices: Vec<usize>,
    pub test_predictions: Vec<f64>,
}

fn har_row(rv: &[f64], n: usize, variant: HarVariant) -> [f64; 4] {
    match variant {
        HarVariant::MovingAverage => {
            let weekly = rv[n - 4..=n].iter().sum::<f64>() / 5.0;
            let monthly = rv[n - 21..=n].iter().sum::<f64>() / 22.0;
            [1.0, rv[n], weekly, monthly]
        }
        HarVariant::RawLags => [1.0, rv[n], rv[n - 5], rv[n - 22]],
    }
}

/// Fits `v_{n+q} ~ HAR regressors at n` on targets inside `0..train_len`
/// and predicts the remaining targets.
pub fn har_fit_predict(
    rv: &[f64],
    horizon: usize,
    train_len: usize,
    variant: HarVariant,
) -> Result<HarForecast, Error> {
    if horizon == 0 {
        return Err(Error::InvalidInput("horizon must be positive".into()));
    }
    if rv.len() < 23 + horizon {
        return Err(Error::InvalidInput(
            "need at least 23 observations of history".into(),
        ));
    }
    let first = 22usize;
    let mut acc = LstsqAccumulator::new(4);
    let mut train_rows = Vec::new();
    let mut test_rows = Vec::new();
    for n in first..rv.len() - horizon {
        let target_idx = n + horizon;
        if target_idx < train_len {
            acc.push_row(&har_row(rv, n, variant), rv[target_idx]);
            train_rows.push(n);
        } else {
            test_rows.push(n);
        }
    }
    if train_rows.is_empty() {
        return Err(Error::InvalidInput(
            "no training rows before the split".into(),
        ));
    }
    let beta = acc.solve()?;
    let predict = |n: usize| -> f64 {
        let row = har_row(rv, n, variant);
        row.iter().zip(beta.iter()).map(|(a, b)| a * b).sum()
    };
    Ok(HarForecast {
        train_indices: train_rows.iter().map(|&n| n + horizon).collect(),
        train_predictions: train_rows.iter().map(|&n| predict(n)).collect(),
        test_indices: test_rows.iter().map(|&n| n + horizon).collect(),
        test_predictions: test_rows.iter().map(|&n| predict(n)).collect(),
    })
}
