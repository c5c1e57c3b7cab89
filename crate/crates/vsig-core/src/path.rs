//! Piecewise-linear paths on a time grid.
//!
//! Paths are stored at nodes only; the derivative is constant per segment,
//! so every kernel-weighted integral `int f(u) dx_u` the engines compute is
//! a weighted sum with segment weights `xdot * dt`, exact in the path, with
//! quadrature error coming only from `f` and the kernel.

use crate::error::Error;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

/// Strictly increasing time grid `t_0 < ... < t_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    times: Vec<f64>,
}

impl TimeGrid {
    pub fn new(times: Vec<f64>) -> Result<Self, Error> {
        if times.is_empty() {
            return Err(Error::InvalidGrid("grid needs at least one node".into()));
        }
        if times.iter().any(|t| !t.is_finite()) {
            return Err(Error::NonFinite("grid time".into()));
        }
        for w in times.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::InvalidGrid(format!(
                    "times not strictly increasing at {} -> {}",
                    w[0], w[1]
                )));
            }
        }
        Ok(TimeGrid { times })
    }

    /// Uniform grid with `n` segments on `[t0, t1]`.
    pub fn uniform(t0: f64, t1: f64, n: usize) -> Result<Self, Error> {
        if n == 0 || t1 <= t0 {
            return Err(Error::InvalidGrid("need n >= 1 and t1 > t0".into()));
        }
        let dt = (t1 - t0) / n as f64;
        let mut times: Vec<f64> = (0..=n).map(|i| t0 + i as f64 * dt).collect();
        // Pin the endpoint so refinement studies share it exactly.
        times[n] = t1;
        TimeGrid::new(times)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn segments(&self) -> usize {
        self.times.len() - 1
    }

    pub fn is_uniform(&self) -> bool {
        if self.segments() < 2 {
            return true;
        }
        let dt = self.times[1] - self.times[0];
        self.times
            .windows(2)
            .all(|w| crate::math::fabs((w[1] - w[0]) - dt) <= 1e-12 * (1.0 + crate::math::fabs(dt)))
    }

    /// Index of a node matching `t` exactly (within a tight tolerance).
    pub fn locate(&self, t: f64) -> Result<usize, Error> {
        let scale = 1.0 + crate::math::fabs(t);
        for (i, &ti) in self.times.iter().enumerate() {
            if crate::math::fabs(ti - t) <= 1e-10 * scale {
                return Ok(i);
            }
        }
        Err(Error::InvalidInterval(format!(
            "time {t} is not a grid node"
        )))
    }
}

/// Augmentation channels appended by [`PiecewiseLinearPath::augment`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AugmentMode {
    /// Running total of absolute increments, one channel per original coordinate.
    CumulativeAbsIncrement,
    /// The node time itself.
    Time,
}

/// A continuous path, linear on each grid segment.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinearPath {
    grid: TimeGrid,
    dim: usize,
    /// Node values, row-major `(N+1) x dim`.
    values: Vec<f64>,
    /// Segment derivatives, row-major `N x dim`.
    derivs: Vec<f64>,
}

impl PiecewiseLinearPath {
    /// Interpolates the samples exactly at the nodes.
    pub fn from_samples(times: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self, Error> {
        if times.len() != values.len() {
            return Err(Error::InvalidGrid(format!(
                "{} times vs {} value rows",
                times.len(),
                values.len()
            )));
        }
        let grid = TimeGrid::new(times)?;
        let dim = values.first().map(|v| v.len()).unwrap_or(0);
        if dim == 0 {
            return Err(Error::DimensionMismatch(
                "path dimension must be positive".into(),
            ));
        }
        let mut flat = Vec::with_capacity(values.len() * dim);
        for row in &values {
            if row.len() != dim {
                return Err(Error::DimensionMismatch("ragged value rows".into()));
            }
            for &x in row {
                if !x.is_finite() {
                    return Err(Error::NonFinite("path value".into()));
                }
                flat.push(x);
            }
        }
        Ok(Self::from_flat(grid, dim, flat))
    }

    /// Builds from a flat `(N+1) x dim` buffer (values assumed finite).
    pub fn from_flat(grid: TimeGrid, dim: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len() * dim);
        let n = grid.segments();
        let mut derivs = vec![0.0; n * dim];
        for i in 0..n {
            let dt = grid.times()[i + 1] - grid.times()[i];
            for k in 0..dim {
                derivs[i * dim + k] = (values[(i + 1) * dim + k] - values[i * dim + k]) / dt;
            }
        }
        PiecewiseLinearPath {
            grid,
            dim,
            values,
            derivs,
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn node_count(&self) -> usize {
        self.grid.len()
    }

    pub fn value(&self, node: usize) -> &[f64] {
        &self.values[node * self.dim..(node + 1) * self.dim]
    }

    /// Constant derivative on segment `i` (between nodes `i` and `i+1`).
    pub fn derivative(&self, segment: usize) -> &[f64] {
        &self.derivs[segment * self.dim..(segment + 1) * self.dim]
    }

    /// Largest Euclidean norm of the segment derivatives.
    pub fn max_derivative_norm(&self) -> f64 {
        let mut best = 0.0f64;
        for i in 0..self.grid.segments() {
            let d = self.derivative(i);
            let norm = crate::math::sqrt(d.iter().map(|x| x * x).sum());
            if norm > best {
                best = norm;
            }
        }
        best
    }

    /// Total variation per coordinate.
    pub fn total_variation(&self) -> Vec<f64> {
        let mut tv = vec![0.0; self.dim];
        for i in 0..self.grid.segments() {
            for k in 0..self.dim {
                tv[k] += crate::math::fabs(
                    self.values[(i + 1) * self.dim + k] - self.values[i * self.dim + k],
                );
            }
        }
        tv
    }

    /// Appends channels in the fixed order original | cumulative | time.
    pub fn augment(&self, modes: &[AugmentMode]) -> PiecewiseLinearPath {
        let cumulative = modes.contains(&AugmentMode::CumulativeAbsIncrement);
        let time = modes.contains(&AugmentMode::Time);
        let extra = if cumulative { self.dim } else { 0 } + usize::from(time);
        if extra == 0 {
            return self.clone();
        }
        let new_dim = self.dim + extra;
        let n_nodes = self.node_count();
        let mut values = vec![0.0; n_nodes * new_dim];
        let mut running = vec![0.0; self.dim];
        for i in 0..n_nodes {
            if i > 0 {
                for k in 0..self.dim {
                    running[k] += crate::math::fabs(
                        self.values[i * self.dim + k] - self.values[(i - 1) * self.dim + k],
                    );
                }
            }
            let dst = &mut values[i * new_dim..(i + 1) * new_dim];
            dst[..self.dim].copy_from_slice(self.value(i));
            let mut pos = self.dim;
            if cumulative {
                dst[pos..pos + self.dim].copy_from_slice(&running);
                pos += self.dim;
            }
            if time {
                dst[pos] = self.grid.times()[i];
            }
        }
        Self::from_flat(self.grid.clone(), new_dim, values)
    }

    /// Moves the nodes to `rho(t_i)` keeping the values; `rho` must fix both
    /// endpoints and be strictly increasing on the nodes.
    pub fn reparameterize(&self, rho: impl Fn(f64) -> f64) -> Result<PiecewiseLinearPath, Error> {
        let times = self.grid.times();
        let mapped: Vec<f64> = times.iter().map(|&t| rho(t)).collect();
        let tol = 1e-9 * (1.0 + crate::math::fabs(times[times.len() - 1]));
        if crate::math::fabs(mapped[0] - times[0]) > tol
            || crate::math::fabs(mapped[mapped.len() - 1] - times[times.len() - 1]) > tol
        {
            return Err(Error::InvalidGrid(
                "reparameterization must fix the endpoints".into(),
            ));
        }
        let grid = TimeGrid::new(mapped)
            .map_err(|_| Error::InvalidGrid("reparameterization not strictly increasing".into()))?;
        Ok(Self::from_flat(grid, self.dim, self.values.clone()))
    }

    /// Restriction to the node range `start..=end` (inclusive).
    pub fn slice(&self, start: usize, end: usize) -> Result<PiecewiseLinearPath, Error> {
        if start >= end || end >= self.node_count() {
            return Err(Error::InvalidInterval(format!("bad slice {start}..={end}")));
        }
        let times = self.grid.times()[start..=end].to_vec();
        let values = self.values[start * self.dim..(end + 1) * self.dim].to_vec();
        Ok(Self::from_flat(TimeGrid::new(times)?, self.dim, values))
    }

    /// Linear refinement: each segment is split into `factor` equal parts.
    /// Exact for piecewise-linear paths.
    pub fn refine(&self, factor: usize) -> PiecewiseLinearPath {
        if factor <= 1 {
            return self.clone();
        }
        let n = self.grid.segments();
        let mut times = Vec::with_capacity(n * factor + 1);
        let mut values = Vec::with_capacity((n * factor + 1) * self.dim);
        for i in 0..n {
            let t0 = self.grid.times()[i];
            let t1 = self.grid.times()[i + 1];
            for s in 0..factor {
                let frac = s as f64 / factor as f64;
                times.push(t0 + frac * (t1 - t0));
                for k in 0..self.dim {
                    let a = self.values[i * self.dim + k];
                    let b = self.values[(i + 1) * self.dim + k];
                    values.push(a + frac * (b - a));
                }
            }
        }
        times.push(self.grid.times()[n]);
        values.extend_from_slice(self.value(n));
        Self::from_flat(
            TimeGrid::new(times).expect("refined grid is increasing"),
            self.dim,
            values,
        )
    }

    /// Scales every value (and hence every increment) by `c`.
    pub fn scaled(&self, c: f64) -> PiecewiseLinearPath {
        let values = self.values.iter().map(|x| c * x).collect();
        Self::from_flat(self.grid.clone(), self.dim, values)
    }
}
