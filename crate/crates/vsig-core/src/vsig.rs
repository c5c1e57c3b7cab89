//! General-kernel Volterra signature engine.
//!
//! Everything rests on the diagonal recursion: the coefficient of the word
//! `w i` at `(s, t, tau)` is the integral over `u in [s, t]` of the diagonal
//! value of `w` at `u` times the `i`-th component of `K(tau, u) dx_u`. Only
//! diagonal values feed the recursion, so the engine stores one tensor
//! series per grid node and evaluates off-diagonal targets lazily with a
//! single extra kernel-weighted integration.

use crate::error::Error;
use crate::kernel::Kernel;
use crate::math::{fabs, gamma, pow};
use crate::path::PiecewiseLinearPath;
use crate::tensor::{tensor_exp, tensor_mul, TruncatedTensorSeries, Word};
use alloc::vec;
use alloc::vec::Vec;

/// Quadrature rule for the kernel-weighted integrals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadRule {
    /// Left endpoint, first order.
    Left,
    /// Per-segment trapezoid, second order; needs the kernel finite on the diagonal.
    Trapezoid,
    /// Product-trapezoidal rule for fractional kernels: the weight
    /// `(t-u)^{beta-1}` is integrated exactly on each segment against the
    /// linear interpolant of the smooth factor. Second order, and the only
    /// admissible rule when `beta < 1` (the other rules would evaluate the
    /// kernel on its singular diagonal).
    ProductIntegration,
}

/// Quadrature configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuadratureConfig {
    pub rule: QuadRule,
    /// Each path segment is subdivided this many times before integrating;
    /// exact for piecewise-linear paths, used by convergence studies.
    pub refinement: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            rule: QuadRule::Trapezoid,
            refinement: 1,
        }
    }
}

impl QuadratureConfig {
    pub fn trapezoid() -> Self {
        Self::default()
    }

    pub fn left() -> Self {
        QuadratureConfig {
            rule: QuadRule::Left,
            refinement: 1,
        }
    }

    pub fn product_integration() -> Self {
        QuadratureConfig {
            rule: QuadRule::ProductIntegration,
            refinement: 1,
        }
    }

    /// Picks the rule a kernel needs: product integration for fractional
    /// kernels (their diagonal derivative blow-up ruins plain trapezoid
    /// rates even when `beta > 1`), trapezoid otherwise.
    pub fn for_kernel<K: Kernel + ?Sized>(kernel: &K) -> Self {
        match kernel.fractional_parts() {
            Some(_) => Self::product_integration(),
            _ => Self::trapezoid(),
        }
    }
}

/// The diagonal field `VSig(x; K)^{t_i}_{t_0, t_i}` at every grid node.
#[derive(Debug, Clone)]
pub struct DiagonalSignatureField {
    times: Vec<f64>,
    series: Vec<TruncatedTensorSeries>,
}

impl DiagonalSignatureField {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn series(&self) -> &[TruncatedTensorSeries] {
        &self.series
    }

    pub fn at_node(&self, i: usize) -> &TruncatedTensorSeries {
        &self.series[i]
    }

    pub fn terminal(&self) -> &TruncatedTensorSeries {
        self.series.last().expect("field has at least one node")
    }
}

fn validate_engine_inputs<K: Kernel + ?Sized>(
    path: &PiecewiseLinearPath,
    kernel: &K,
    quad: &QuadratureConfig,
) -> Result<(), Error> {
    if path.grid().segments() == 0 {
        return Err(Error::InvalidGrid("path needs at least one segment".into()));
    }
    if kernel.input_dim() != path.dim() {
        return Err(Error::DimensionMismatch(alloc::format!(
            "kernel input dim {} vs path dim {}",
            kernel.input_dim(),
            path.dim()
        )));
    }
    match (quad.rule, kernel.fractional_parts()) {
        (QuadRule::ProductIntegration, None) => Err(Error::IncompatibleQuadrature(
            "product integration needs a fractional kernel".into(),
        )),
        (QuadRule::Left | QuadRule::Trapezoid, Some((beta, _))) if beta < 1.0 => {
            Err(Error::IncompatibleQuadrature(
                "fractional kernel with beta < 1 requires product integration".into(),
            ))
        }
        _ => Ok(()),
    }
}

/// Per-target kernel rows with a lag cache for stationary kernels on
/// uniform grids (the dominant case; it removes almost all kernel calls).
pub(crate) struct KernelRows<'a, K: ?Sized> {
    kernel: &'a K,
    times: &'a [f64],
    m: usize,
    d: usize,
    lag_cache: Option<Vec<f64>>,
}

impl<'a, K: Kernel + ?Sized> KernelRows<'a, K> {
    pub(crate) fn new(kernel: &'a K, path: &'a PiecewiseLinearPath) -> Result<Self, Error> {
        let times = path.grid().times();
        let m = kernel.output_dim();
        let d = kernel.input_dim();
        let cacheable = kernel.is_stationary()
            && path.grid().is_uniform()
            && kernel
                .fractional_parts()
                .is_none_or(|(beta, _)| beta >= 1.0);
        let lag_cache = if cacheable {
            let n = times.len();
            let mut cache = vec![0.0; n * m * d];
            for lag_idx in 0..n {
                let dst = &mut cache[lag_idx * m * d..(lag_idx + 1) * m * d];
                kernel.eval_into(times[lag_idx], times[0], dst)?;
            }
            Some(cache)
        } else {
            None
        };
        Ok(KernelRows {
            kernel,
            times,
            m,
            d,
            lag_cache,
        })
    }

    /// Writes `K(target_time, t_u)` for `u in lo..=hi` into `out` contiguously.
    fn fill(
        &self,
        target_idx: usize,
        target_time: f64,
        lo: usize,
        hi: usize,
        out: &mut Vec<f64>,
    ) -> Result<(), Error> {
        let md = self.m * self.d;
        out.resize((hi - lo + 1) * md, 0.0);
        if let Some(cache) = &self.lag_cache {
            for u in lo..=hi {
                let lag = target_idx - u;
                out[(u - lo) * md..(u - lo + 1) * md]
                    .copy_from_slice(&cache[lag * md..(lag + 1) * md]);
            }
        } else {
            for u in lo..=hi {
                let dst = &mut out[(u - lo) * md..(u - lo + 1) * md];
                self.kernel.eval_into(target_time, self.times[u], dst)?;
            }
        }
        Ok(())
    }
}

/// Nodal integration vectors: `c_u` in `R^m` such that
/// `int_{t_lo}^{t_hi} f(u) (x) K(tau, u) dx_u ~= sum_u f(t_u) (x) c_u`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn node_vectors<K: Kernel + ?Sized>(
    rows: &KernelRows<'_, K>,
    path: &PiecewiseLinearPath,
    rule: QuadRule,
    target_idx: usize,
    target_time: f64,
    lo: usize,
    hi: usize,
    scratch: &mut Vec<f64>,
    out: &mut Vec<f64>,
) -> Result<(), Error> {
    let m = rows.m;
    let d = rows.d;
    let times = path.grid().times();
    out.resize((hi - lo + 1) * m, 0.0);
    out.fill(0.0);
    if hi == lo {
        return Ok(());
    }
    match rule {
        QuadRule::Left => {
            rows.fill(target_idx, target_time, lo, hi - 1, scratch)?;
            for u in lo..hi {
                let dt = times[u + 1] - times[u];
                let v = path.derivative(u);
                let mat = &scratch[(u - lo) * m * d..(u - lo + 1) * m * d];
                let dst = &mut out[(u - lo) * m..(u - lo + 1) * m];
                for r in 0..m {
                    let mut acc = 0.0;
                    for c in 0..d {
                        acc += mat[r * d + c] * v[c];
                    }
                    dst[r] += dt * acc;
                }
            }
        }
        QuadRule::Trapezoid => {
            rows.fill(target_idx, target_time, lo, hi, scratch)?;
            let mut wv = vec![0.0f64; d];
            for u in lo..=hi {
                let mat = &scratch[(u - lo) * m * d..(u - lo + 1) * m * d];
                // Derivative mass adjacent to node u inside [lo, hi].
                wv.fill(0.0);
                if u > lo {
                    let dt = times[u] - times[u - 1];
                    for (k, x) in path.derivative(u - 1).iter().enumerate() {
                        wv[k] += 0.5 * dt * x;
                    }
                }
                if u < hi {
                    let dt = times[u + 1] - times[u];
                    for (k, x) in path.derivative(u).iter().enumerate() {
                        wv[k] += 0.5 * dt * x;
                    }
                }
                let dst = &mut out[(u - lo) * m..(u - lo + 1) * m];
                for r in 0..m {
                    let mut acc = 0.0;
                    for c in 0..d {
                        acc += mat[r * d + c] * wv[c];
                    }
                    dst[r] += acc;
                }
            }
        }
        QuadRule::ProductIntegration => {
            let (beta, a) = rows.kernel.fractional_parts().ok_or_else(|| {
                Error::IncompatibleQuadrature("fractional kernel required".into())
            })?;
            let g = gamma(beta);
            for u in lo..hi {
                // Exact moments of (tau - u)^{beta-1} over the segment:
                // m0 = int w^{beta-1}, m1 = int (u - t_u) w^{beta-1}, with
                // w = tau - u running from cc down to dd.
                let cc = target_time - times[u];
                let dd = (target_time - times[u + 1]).max(0.0);
                let dt = times[u + 1] - times[u];
                let pow_c = pow(cc, beta);
                let pow_d = pow(dd, beta);
                let m0 = (pow_c - pow_d) / beta;
                let m1 = cc * m0 - (pow_c * cc - pow_d * dd) / (beta + 1.0);
                let w_left = (m0 - m1 / dt) / g;
                let w_right = (m1 / dt) / g;
                let v = path.derivative(u);
                for r in 0..m {
                    let mut acc = 0.0;
                    for c in 0..d {
                        acc += a[(r, c)] * v[c];
                    }
                    out[(u - lo) * m + r] += w_left * acc;
                    out[(u + 1 - lo) * m + r] += w_right * acc;
                }
            }
        }
    }
    Ok(())
}

/// Raw diagonal levels on `start..=end`: `levels[n][i - start]` is the dense
/// level-n block of `VSig^{t_i}_{t_start, t_i}`.
fn diagonal_levels<K: Kernel + ?Sized>(
    path: &PiecewiseLinearPath,
    kernel: &K,
    level: usize,
    rule: QuadRule,
    start: usize,
    end: usize,
) -> Result<Vec<Vec<Vec<f64>>>, Error> {
    let m = kernel.output_dim();
    let count = end - start + 1;
    let rows = KernelRows::new(kernel, path)?;
    let mut levels: Vec<Vec<Vec<f64>>> = Vec::with_capacity(level + 1);
    levels.push(vec![vec![1.0]; count]);
    for n in 1..=level {
        levels.push(vec![vec![0.0; m.pow(n as u32)]; count]);
    }
    let times = path.grid().times();
    let mut cvec: Vec<f64> = Vec::new();
    let mut scratch: Vec<f64> = Vec::new();
    for i in (start + 1)..=end {
        node_vectors(
            &rows,
            path,
            rule,
            i,
            times[i],
            start,
            i,
            &mut scratch,
            &mut cvec,
        )?;
        for n in 0..level {
            let (lower, upper) = levels.split_at_mut(n + 1);
            let src = &lower[n];
            let dst = &mut upper[0][i - start];
            for u in start..=i {
                let f = &src[u - start];
                let c = &cvec[(u - start) * m..(u - start + 1) * m];
                let mut pos = 0;
                for &fv in f.iter() {
                    if fv == 0.0 {
                        pos += m;
                        continue;
                    }
                    for &cv in c.iter() {
                        dst[pos] += fv * cv;
                        pos += 1;
                    }
                }
            }
        }
    }
    Ok(levels)
}

fn levels_to_series(m: usize, levels: &[Vec<Vec<f64>>], node: usize) -> TruncatedTensorSeries {
    let mut s = TruncatedTensorSeries::zero(m, levels.len() - 1);
    for (n, lv) in levels.iter().enumerate() {
        s.level_slice_mut(n).copy_from_slice(&lv[node]);
    }
    s
}

/// `VSig(x; K)^{t_i}_{t_0, t_i}` at every grid node.
pub fn diagonal_signature<K: Kernel + ?Sized>(
    path: &PiecewiseLinearPath,
    kernel: &K,
    level: usize,
    quad: &QuadratureConfig,
) -> Result<DiagonalSignatureField, Error> {
    validate_engine_inputs(path, kernel, quad)?;
    let factor = quad.refinement.max(1);
    let work = path.refine(factor);
    let end = work.grid().segments();
    let levels = diagonal_levels(&work, kernel, level, quad.rule, 0, end)?;
    let m = kernel.output_dim();
    let n_orig = path.node_count();
    let mut series = Vec::with_capacity(n_orig);
    for i in 0..n_orig {
        series.push(levels_to_series(m, &levels, i * factor));
    }
    Ok(DiagonalSignatureField {
        times: path.grid().times().to_vec(),
        series,
    })
}

/// `VSig(x; K)^{tau}_{s, t}` for grid-aligned `s <= t <= tau`: the diagonal
/// recursion started at `s`, closed by one kernel-weighted integration with
/// target `tau`.
pub fn signature_at<K: Kernel + ?Sized>(
    path: &PiecewiseLinearPath,
    kernel: &K,
    level: usize,
    s: f64,
    t: f64,
    tau: f64,
    quad: &QuadratureConfig,
) -> Result<TruncatedTensorSeries, Error> {
    validate_engine_inputs(path, kernel, quad)?;
    if !(s <= t && t <= tau) {
        return Err(Error::InvalidInterval(alloc::format!(
            "need s <= t <= tau, got ({s}, {t}, {tau})"
        )));
    }
    let factor = quad.refinement.max(1);
    let work = path.refine(factor);
    let s_idx = work.grid().locate(s)?;
    let t_idx = work.grid().locate(t)?;
    let tau_idx = work.grid().locate(tau)?;
    let m = kernel.output_dim();
    let mut out = TruncatedTensorSeries::unit(m, level);
    if t_idx == s_idx || level == 0 {
        return Ok(out);
    }
    let levels = diagonal_levels(&work, kernel, level - 1, quad.rule, s_idx, t_idx)?;
    let rows = KernelRows::new(kernel, &work)?;
    let mut cvec: Vec<f64> = Vec::new();
    let mut scratch: Vec<f64> = Vec::new();
    node_vectors(
        &rows,
        &work,
        quad.rule,
        tau_idx,
        work.grid().times()[tau_idx],
        s_idx,
        t_idx,
        &mut scratch,
        &mut cvec,
    )?;
    for n in 0..level {
        let src = &levels[n];
        let dst = out.level_slice_mut(n + 1);
        for u in s_idx..=t_idx {
            let f = &src[u - s_idx];
            let c = &cvec[(u - s_idx) * m..(u - s_idx + 1) * m];
            let mut pos = 0;
            for &fv in f.iter() {
                for &cv in c.iter() {
                    dst[pos] += fv * cv;
                    pos += 1;
                }
            }
        }
    }
    Ok(out)
}

/// Exact truncated classical signature at every node: per-segment tensor
/// exponentials composed with the Chen product, no quadrature error.
pub fn classical_signature(
    path: &PiecewiseLinearPath,
    level: usize,
) -> Result<Vec<TruncatedTensorSeries>, Error> {
    let d = path.dim();
    let mut out = Vec::with_capacity(path.node_count());
    let mut acc = TruncatedTensorSeries::unit(d, level);
    out.push(acc.clone());
    for i in 0..path.grid().segments() {
        let dt = path.grid().times()[i + 1] - path.grid().times()[i];
        let increment: Vec<f64> = path.derivative(i).iter().map(|v| v * dt).collect();
        let seg = tensor_exp(&increment, level);
        acc = tensor_mul(&acc, &seg, level)?;
        out.push(acc.clone());
    }
    Ok(out)
}

/// n-th order convolution `[y * z]^{w, tau}_{s, t}` of a scalar grid
/// function `y` with the Volterra path of `(path, kernel)`.
///
/// Evaluated through the recursive tower property with the same quadrature
/// as [`diagonal_signature`]; the empty word returns `y_tau`.
#[allow(clippy::too_many_arguments)]
pub fn convolution<K: Kernel + ?Sized>(
    y: &[f64],
    path: &PiecewiseLinearPath,
    kernel: &K,
    word: &Word,
    s: f64,
    t: f64,
    tau: f64,
    quad: &QuadratureConfig,
) -> Result<f64, Error> {
    validate_engine_inputs(path, kernel, quad)?;
    if word.alphabet() != kernel.output_dim() {
        return Err(Error::AlphabetMismatch {
            left: word.alphabet(),
            right: kernel.output_dim(),
        });
    }
    if y.len() != path.node_count() {
        return Err(Error::DimensionMismatch(alloc::format!(
            "y has {} nodes, path has {}",
            y.len(),
            path.node_count()
        )));
    }
    if !(s <= t && t <= tau) {
        return Err(Error::InvalidInterval("need s <= t <= tau".into()));
    }
    let factor = quad.refinement.max(1);
    let work = path.refine(factor);
    let yy = refine_grid_function(y, factor);
    let s_idx = work.grid().locate(s)?;
    let t_idx = work.grid().locate(t)?;
    let tau_idx = work.grid().locate(tau)?;
    if word.is_empty() {
        return Ok(yy[tau_idx]);
    }
    let initial: Vec<f64> = yy[s_idx..=t_idx].to_vec();
    convolve_tower(
        &work,
        kernel,
        initial,
        word.letters(),
        s_idx,
        t_idx,
        tau_idx,
        quad.rule,
    )
}

fn refine_grid_function(y: &[f64], factor: usize) -> Vec<f64> {
    if factor <= 1 {
        return y.to_vec();
    }
    let n = y.len() - 1;
    let mut out = Vec::with_capacity(n * factor + 1);
    for i in 0..n {
        for s in 0..factor {
            let frac = s as f64 / factor as f64;
            out.push(y[i] + frac * (y[i + 1] - y[i]));
        }
    }
    out.push(y[n]);
    out
}

/// Shared tower recursion: starting from `cur[r - s_idx] = y_r`, each letter
/// maps `y` to `r -> int_s^r y(u) (K(r,u) xdot_u)_letter du`; the final letter
/// integrates over `[s, t]` with target `tau`.
#[allow(clippy::too_many_arguments)]
fn convolve_tower<K: Kernel + ?Sized>(
    path: &PiecewiseLinearPath,
    kernel: &K,
    mut cur: Vec<f64>,
    letters: &[usize],
    s_idx: usize,
    t_idx: usize,
    tau_idx: usize,
    rule: QuadRule,
) -> Result<f64, Error> {
    let m = kernel.output_dim();
    let rows = KernelRows::new(kernel, path)?;
    let times = path.grid().times();
    let mut scratch = Vec::new();
    let mut cvec = Vec::new();
    for (step, &letter) in letters.iter().enumerate() {
        let is_last = step + 1 == letters.len();
        if is_last {
            node_vectors(
                &rows,
                path,
                rule,
                tau_idx,
                times[tau_idx],
                s_idx,
                t_idx,
                &mut scratch,
                &mut cvec,
            )?;
            let mut acc = 0.0;
            for u in s_idx..=t_idx {
                acc += cur[u - s_idx] * cvec[(u - s_idx) * m + (letter - 1)];
            }
            return Ok(acc);
        }
        let mut next = vec![0.0; t_idx - s_idx + 1];
        for r in (s_idx + 1)..=t_idx {
            node_vectors(
                &rows,
                path,
                rule,
                r,
                times[r],
                s_idx,
                r,
                &mut scratch,
                &mut cvec,
            )?;
            let mut acc = 0.0;
            for u in s_idx..=r {
                acc += cur[u - s_idx] * cvec[(u - s_idx) * m + (letter - 1)];
            }
            next[r - s_idx] = acc;
        }
        cur = next;
    }
    unreachable!("letters is nonempty")
}

/// Max over words `|w| <= level` of the Chen-identity defect
/// `|VSig^{w,tau}_{s,t} - sum_k [VSig^{w<=k, .}_{s,u} * z]^{w>k, tau}_{u,t}|`.
#[allow(clippy::too_many_arguments)]
pub fn chen_residual<K: Kernel + ?Sized>(
    path: &PiecewiseLinearPath,
    kernel: &K,
    level: usize,
    s: f64,
    u: f64,
    t: f64,
    tau: f64,
    quad: &QuadratureConfig,
) -> Result<f64, Error> {
    validate_engine_inputs(path, kernel, quad)?;
    if !(s <= u && u <= t && t <= tau) {
        return Err(Error::InvalidInterval("need s <= u <= t <= tau".into()));
    }
    let factor = quad.refinement.max(1);
    let work = path.refine(factor);
    let s_idx = work.grid().locate(s)?;
    let u_idx = work.grid().locate(u)?;
    let t_idx = work.grid().locate(t)?;
    let tau_idx = work.grid().locate(tau)?;
    let m = kernel.output_dim();
    let times = work.grid().times();
    let rows = KernelRows::new(kernel, &work)?;

    // Off-diagonal prefix values: prefix_vals[n][r - u_idx][word] = VSig^{(n), t_r}_{s, u}.
    let left_levels = if u_idx > s_idx && level >= 1 {
        Some(diagonal_levels(
            &work,
            kernel,
            level - 1,
            quad.rule,
            s_idx,
            u_idx,
        )?)
    } else {
        None
    };
    let mut prefix_vals: Vec<Vec<Vec<f64>>> = Vec::with_capacity(level + 1);
    prefix_vals.push(vec![vec![1.0]; tau_idx - u_idx + 1]);
    let mut scratch: Vec<f64> = Vec::new();
    let mut cvec: Vec<f64> = Vec::new();
    for n in 1..=level {
        let mut per_target = Vec::with_capacity(tau_idx - u_idx + 1);
        for r in u_idx..=tau_idx {
            let mut block = vec![0.0; m.pow(n as u32)];
            if let Some(left) = &left_levels {
                node_vectors(
                    &rows,
                    &work,
                    quad.rule,
                    r,
                    times[r],
                    s_idx,
                    u_idx,
                    &mut scratch,
                    &mut cvec,
                )?;
                let src = &left[n - 1];
                for q in s_idx..=u_idx {
                    let f = &src[q - s_idx];
                    let c = &cvec[(q - s_idx) * m..(q - s_idx + 1) * m];
                    let mut pos = 0;
                    for &fv in f.iter() {
                        for &cv in c.iter() {
                            block[pos] += fv * cv;
                            pos += 1;
                        }
                    }
                }
            }
            per_target.push(block);
        }
        prefix_vals.push(per_target);
    }

    let mut worst = 0.0f64;
    for len in 0..=level {
        for widx in 0..m.pow(len as u32) {
            let word = Word::from_index(m, len, widx);
            let lhs = if len == 0 {
                1.0
            } else {
                let initial = vec![1.0; t_idx - s_idx + 1];
                convolve_tower(
                    &work,
                    kernel,
                    initial,
                    word.letters(),
                    s_idx,
                    t_idx,
                    tau_idx,
                    quad.rule,
                )?
            };
            let mut rhs = 0.0;
            for k in 0..=len {
                let prefix_idx = crate::tensor::word_index(m, &word.letters()[..k]);
                let suffix = &word.letters()[k..];
                if suffix.is_empty() {
                    rhs += prefix_vals[k][tau_idx - u_idx][prefix_idx];
                } else {
                    let initial: Vec<f64> = (u_idx..=t_idx)
                        .map(|r| prefix_vals[k][r - u_idx][prefix_idx])
                        .collect();
                    rhs += convolve_tower(
                        &work, kernel, initial, suffix, u_idx, t_idx, tau_idx, quad.rule,
                    )?;
                }
            }
            let defect = fabs(lhs - rhs);
            if defect > worst {
                worst = defect;
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelSpec;
    use crate::path::PiecewiseLinearPath;
    use approx::assert_relative_eq;

    use crate::testutil::{line_path, sawtooth_path};

    #[test]
    fn monomial_identity_for_constant_kernel() {
        // x_t = t, K = 1: level n at t is t^n / n!.
        let path = line_path(1000, 1.0);
        let kernel = KernelSpec::constant_identity(1);
        let field = diagonal_signature(&path, &kernel, 3, &QuadratureConfig::default()).unwrap();
        let top = field.terminal();
        assert_relative_eq!(top.level_slice(1)[0], 1.0, epsilon = 5e-4);
        assert_relative_eq!(top.level_slice(2)[0], 0.5, epsilon = 5e-4);
        assert_relative_eq!(top.level_slice(3)[0], 1.0 / 6.0, epsilon = 5e-4);
    }

    #[test]
    fn constant_path_has_zero_signature() {
        let path = PiecewiseLinearPath::from_samples(
            vec![0.0, 0.5, 1.0],
            vec![vec![2.0], vec![2.0], vec![2.0]],
        )
        .unwrap();
        let kernel = KernelSpec::ScalarExp {
            alpha: 1.0,
            lambda: 1.0,
            dim: 1,
        };
        let field = diagonal_signature(&path, &kernel, 3, &QuadratureConfig::default()).unwrap();
        for s in field.series() {
            assert_eq!(s.level_norm(1), 0.0);
            assert_eq!(s.level_norm(2), 0.0);
            assert_eq!(s.level_norm(3), 0.0);
        }
    }

    #[test]
    fn scalar_exp_level_one_closed_form() {
        // int_0^1 e^{-(1-u)} du = 1 - e^{-1}
        let path = line_path(1000, 1.0);
        let kernel = KernelSpec::ScalarExp {
            alpha: 1.0,
            lambda: 1.0,
            dim: 1,
        };
        let field = diagonal_signature(&path, &kernel, 1, &QuadratureConfig::default()).unwrap();
        assert_relative_eq!(
            field.terminal().level_slice(1)[0],
            0.6321205588285577,
            epsilon = 1e-6
        );
    }

    #[test]
    fn signature_at_constant_kernel_ignores_tau() {
        let path = line_path(64, 2.0);
        let kernel = KernelSpec::constant_identity(1);
        let q = QuadratureConfig::default();
        let a = signature_at(&path, &kernel, 3, 0.0, 1.0, 1.0, &q).unwrap();
        let b = signature_at(&path, &kernel, 3, 0.0, 1.0, 2.0, &q).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-14);
    }

    #[test]
    fn signature_at_scalar_exp_level_one() {
        // level 1 of VSig^{tau}_{s,t} = int_s^t e^{-(tau-u)} du = e^{-1} - e^{-2}
        let path = line_path(1000, 2.0);
        let kernel = KernelSpec::ScalarExp {
            alpha: 1.0,
            lambda: 1.0,
            dim: 1,
        };
        let s = signature_at(
            &path,
            &kernel,
            1,
            0.0,
            1.0,
            2.0,
            &QuadratureConfig::default(),
        )
        .unwrap();
        assert_relative_eq!(s.level_slice(1)[0], 0.23254415793482963, epsilon = 1e-6);
    }

    #[test]
    fn signature_at_rejects_bad_ordering_and_off_grid() {
        let path = line_path(10, 1.0);
        let kernel = KernelSpec::constant_identity(1);
        let q = QuadratureConfig::default();
        assert!(signature_at(&path, &kernel, 2, 0.5, 0.2, 1.0, &q).is_err());
        assert!(signature_at(&path, &kernel, 2, 0.0, 0.55, 1.0, &q).is_err());
    }

    #[test]
    fn classical_signature_of_linear_path() {
        // 1-d x_t = a t: level n at T=1 is a^n/n!.
        let a = 1.7;
        let path = PiecewiseLinearPath::from_samples(
            vec![0.0, 0.3, 1.0],
            vec![vec![0.0], vec![0.3 * a], vec![a]],
        )
        .unwrap();
        let sigs = classical_signature(&path, 4).unwrap();
        let top = &sigs[2];
        let mut fact = 1.0;
        for n in 1..=4usize {
            fact *= n as f64;
            assert_relative_eq!(
                top.level_slice(n)[0],
                libm::pow(a, n as f64) / fact,
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn classical_signature_chen_concatenation() {
        let path = sawtooth_path(32, 1.0, 7, 2);
        let sigs = classical_signature(&path, 3).unwrap();
        // sig(x on [0,u]) (x) sig(x on [u,T]) = sig(x on [0,T])
        let mid = 17;
        let tail = path.slice(mid, 32).unwrap();
        let tail_sigs = classical_signature(&tail, 3).unwrap();
        let prod = tensor_mul(&sigs[mid], tail_sigs.last().unwrap(), 3).unwrap();
        assert!(prod.max_abs_diff(sigs.last().unwrap()) < 1e-12);
    }

    #[test]
    fn diagonal_matches_classical_for_constant_kernel_with_second_order_rate() {
        let seed = 11;
        let kernel = KernelSpec::constant_identity(1);
        let mut errs = Vec::new();
        for factor in [1usize, 2, 4] {
            let path = sawtooth_path(125, 1.0, seed, 1).refine(factor);
            let exact = classical_signature(&path, 3).unwrap();
            let field =
                diagonal_signature(&path, &kernel, 3, &QuadratureConfig::default()).unwrap();
            let mut worst = 0.0f64;
            for (a, b) in exact.iter().zip(field.series()) {
                worst = worst.max(a.max_abs_diff(b));
            }
            errs.push(worst);
        }
        let order1 = libm::log2(errs[0] / errs[1]);
        let order2 = libm::log2(errs[1] / errs[2]);
        assert!(
            order1 > 1.8 && order2 > 1.8,
            "orders {order1}, {order2}, errs {errs:?}"
        );
    }

    #[test]
    fn convolution_empty_word_returns_y_at_tau() {
        let path = line_path(16, 2.0);
        let y: Vec<f64> = (0..=16).map(|i| i as f64).collect();
        let kernel = KernelSpec::constant_identity(1);
        let w = Word::empty(1);
        let v = convolution(
            &y,
            &path,
            &kernel,
            &w,
            0.0,
            1.0,
            2.0,
            &QuadratureConfig::default(),
        )
        .unwrap();
        assert_eq!(v, 16.0);
    }

    #[test]
    fn convolution_with_unit_y_matches_signature_component() {
        let path = sawtooth_path(64, 1.5, 3, 2);
        let kernel = KernelSpec::ScalarExp {
            alpha: 1.0,
            lambda: 0.8,
            dim: 2,
        };
        let q = QuadratureConfig::default();
        let y = vec![1.0; path.node_count()];
        let times = path.grid().times();
        let (s, t, tau) = (times[0], times[40], times[56]);
        let sig = signature_at(&path, &kernel, 3, s, t, tau, &q).unwrap();
        for letters in [vec![1], vec![2, 1], vec![1, 2, 2]] {
            let w = Word::new(2, letters.clone()).unwrap();
            let conv = convolution(&y, &path, &kernel, &w, s, t, tau, &q).unwrap();
            let direct = sig.coeff(&w).unwrap();
            assert!(
                (conv - direct).abs() < 1e-10,
                "word {letters:?}: {conv} vs {direct}"
            );
        }
    }

    #[test]
    fn convolution_double_integral_of_time() {
        // K = 1, y = 1, |w| = 2, x_t = t on [0,1]: (t-s)^2/2.
        let path = line_path(400, 1.0);
        let kernel = KernelSpec::constant_identity(1);
        let y = vec![1.0; path.node_count()];
        let w = Word::new(1, vec![1, 1]).unwrap();
        let v = convolution(
            &y,
            &path,
            &kernel,
            &w,
            0.0,
            1.0,
            1.0,
            &QuadratureConfig::default(),
        )
        .unwrap();
        assert_relative_eq!(v, 0.5, epsilon = 1e-5);
    }

    #[test]
    fn chen_residual_collapses_at_the_ends() {
        let path = sawtooth_path(64, 1.0, 5, 1);
        let kernel = KernelSpec::ScalarExp {
            alpha: 1.0,
            lambda: 1.0,
            dim: 1,
        };
        let q = QuadratureConfig::default();
        let times = path.grid().times();
        let r0 = chen_residual(
            &path, &kernel, 2, times[0], times[0], times[48], times[56], &q,
        )
        .unwrap();
        assert!(r0 < 1e-12, "u = s residual {r0}");
        let r1 = chen_residual(
            &path, &kernel, 2, times[0], times[48], times[48], times[56], &q,
        )
        .unwrap();
        assert!(r1 < 1e-12, "u = t residual {r1}");
    }

    #[test]
    fn chen_residual_is_exact_for_nodal_quadrature() {
        // The nodal rules are interval-additive at grid splits, so the
        // discrete scheme satisfies the convolutional Chen identity exactly;
        // the residual sits at rounding level at every resolution.
        for kernel in [
            KernelSpec::constant_identity(1),
            KernelSpec::ScalarExp {
                alpha: 1.0,
                lambda: 1.0,
                dim: 1,
            },
        ] {
            for factor in [1usize, 2, 4] {
                let path = sawtooth_path(96, 1.0, 9, 1).refine(factor);
                let times = path.grid().times();
                let n = path.grid().segments();
                let r = chen_residual(
                    &path,
                    &kernel,
                    3,
                    times[0],
                    times[n / 3],
                    times[2 * n / 3],
                    times[n],
                    &QuadratureConfig::default(),
                )
                .unwrap();
                assert!(r < 1e-12, "residual {r} at factor {factor}");
            }
        }
    }

    #[test]
    fn product_integration_handles_singular_fractional_kernel() {
        // beta < 1: trapezoid must refuse; product integration converges to
        // the monomial value, level 1 = t^beta / Gamma(beta + 1) for x_t = t.
        let beta = 0.75;
        let kernel = KernelSpec::Fractional {
            beta,
            a: crate::linalg::Mat::identity(1),
        };
        let path = line_path(2000, 1.0);
        assert!(matches!(
            diagonal_signature(&path, &kernel, 1, &QuadratureConfig::default()),
            Err(Error::IncompatibleQuadrature(_))
        ));
        let field = diagonal_signature(&path, &kernel, 1, &QuadratureConfig::product_integration())
            .unwrap();
        let expected = 1.0 / crate::math::gamma(1.0 + beta);
        assert_relative_eq!(field.terminal().level_slice(1)[0], expected, epsilon = 1e-3);
    }

    #[test]
    fn factorial_decay_bound_holds() {
        // |VSig^(n)| <= z^n / (n!)^{1/q}, z = |xdot| ||K||_{L^inf,p} T^{1/q}, p = q = 2.
        let kernels = [
            KernelSpec::constant_identity(2),
            KernelSpec::ScalarExp {
                alpha: 1.0,
                lambda: 1.0,
                dim: 2,
            },
            KernelSpec::DiagSumExp {
                alpha: vec![1.0, 0.5],
                lambda: vec![1.0, 3.0],
                dim: 2,
            },
        ];
        let path = sawtooth_path(256, 1.0, 21, 2);
        let t_end = 1.0;
        for kernel in &kernels {
            let z = path.max_derivative_norm()
                * kernel.linf_p_norm(t_end, 2.0, 4000).unwrap()
                * libm::sqrt(t_end);
            let field = diagonal_signature(&path, kernel, 4, &QuadratureConfig::default()).unwrap();
            let top = field.terminal();
            let mut fact = 1.0;
            for n in 1..=4usize {
                fact *= n as f64;
                let bound = libm::pow(z, n as f64) / libm::sqrt(fact);
                assert!(
                    top.level_norm(n) <= bound * (1.0 + 1e-6) + 1e-12,
                    "level {n}: {} > {bound}",
                    top.level_norm(n)
                );
            }
        }
    }

    #[test]
    fn local_lipschitz_probe_over_random_perturbations() {
        // Perturb the derivative by deterministic noise with sup-norm at
        // most 0.1; the level-wise response ratio must stay bounded (no
        // blow-up across 20 draws), probing local Lipschitz continuity.
        let kernel = KernelSpec::ScalarExp {
            alpha: 1.0,
            lambda: 1.0,
            dim: 1,
        };
        let quad = QuadratureConfig::default();
        let base = sawtooth_path(128, 1.0, 51, 1);
        let base_field = diagonal_signature(&base, &kernel, 3, &quad).unwrap();
        let mut ratios = Vec::new();
        let mut state = 999u64;
        let mut rnd = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        for trial in 0..20 {
            let eps = 0.1 * (0.1 + 0.9 * (trial as f64) / 19.0);
            let times = base.grid().times().to_vec();
            let mut values = Vec::with_capacity(times.len());
            let mut acc = 0.0;
            values.push(vec![base.value(0)[0]]);
            let mut sup_delta: f64 = 0.0;
            for i in 1..times.len() {
                let dt = times[i] - times[i - 1];
                let delta_dot = eps * 2.0 * rnd();
                sup_delta = sup_delta.max(delta_dot.abs());
                acc += delta_dot * dt;
                values.push(vec![base.value(i)[0] + acc]);
            }
            let perturbed = PiecewiseLinearPath::from_samples(times, values).unwrap();
            let field = diagonal_signature(&perturbed, &kernel, 3, &quad).unwrap();
            let mut response: f64 = 0.0;
            for n in 1..=3 {
                let mut diff = field.terminal().clone();
                diff.axpy_in_place(-1.0, base_field.terminal());
                response = response.max(diff.level_norm(n));
            }
            ratios.push(response / sup_delta);
        }
        // Boundedness, not a sharp constant: for unit-scale paths and this
        // kernel a crude chain bound gives C well below 10.
        let max = ratios.iter().cloned().fold(0.0f64, f64::max);
        assert!(max.is_finite() && max > 0.0);
        assert!(
            max <= 10.0,
            "response ratio {max} exceeds the estimated constant"
        );
    }

    #[test]
    fn finite_grid_distinguishability_of_augmented_paths() {
        // 50 distinct time-augmented paths must have pairwise distinct
        // level <= 3 signatures under a scalar-exponential kernel.
        let kernel = KernelSpec::ScalarExp {
            alpha: 1.0,
            lambda: 1.0,
            dim: 2,
        };
        let quad = QuadratureConfig::default();
        let sigs: Vec<TruncatedTensorSeries> = (0..50u64)
            .map(|seed| {
                let p = sawtooth_path(32, 1.0, 1000 + seed, 1)
                    .augment(&[crate::path::AugmentMode::Time]);
                diagonal_signature(&p, &kernel, 3, &quad)
                    .unwrap()
                    .terminal()
                    .clone()
            })
            .collect();
        let mut min_dist = f64::INFINITY;
        for i in 0..sigs.len() {
            for j in (i + 1)..sigs.len() {
                let mut diff = sigs[i].clone();
                diff.axpy_in_place(-1.0, &sigs[j]);
                min_dist = min_dist.min(diff.hs_norm());
            }
        }
        assert!(min_dist > 1e-6, "minimum pairwise distance {min_dist}");
    }

    #[test]
    fn refinement_config_refines_quadrature() {
        let path = line_path(25, 1.0);
        let kernel = KernelSpec::ScalarExp {
            alpha: 1.0,
            lambda: 2.0,
            dim: 1,
        };
        let coarse = diagonal_signature(&path, &kernel, 2, &QuadratureConfig::default()).unwrap();
        let fine = diagonal_signature(
            &path,
            &kernel,
            2,
            &QuadratureConfig {
                rule: QuadRule::Trapezoid,
                refinement: 8,
            },
        )
        .unwrap();
        // int_0^1 e^{-2(1-u)} du = (1 - e^{-2})/2
        let exact = (1.0 - libm::exp(-2.0)) / 2.0;
        let e_coarse = (coarse.terminal().level_slice(1)[0] - exact).abs();
        let e_fine = (fine.terminal().level_slice(1)[0] - exact).abs();
        assert!(e_fine < e_coarse / 16.0, "coarse {e_coarse}, fine {e_fine}");
        assert_eq!(fine.times().len(), path.node_count());
    }
}
