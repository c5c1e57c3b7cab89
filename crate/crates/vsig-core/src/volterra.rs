//! Linear controlled Volterra equations and the linear Volterra SDE.
//!
//! `y_t = xi + int_{t0}^t A(K(t,u) xdot_u) y_u du` admits the signature
//! expansion `y_t = sum_n Atilde(VSig^{(n),t}_{t0,t}) xi` with the lifted map
//! applying the letter matrices in reversed order. The left-point Euler
//! scheme re-weights the whole history each step and serves as the
//! independent oracle for that expansion.

use crate::error::Error;
use crate::kernel::{Kernel, KernelSpec};
use crate::linalg::Mat;
use crate::math::sqrt;
use crate::path::{PiecewiseLinearPath, TimeGrid};
use crate::rng::Stream;
use crate::vsig::{diagonal_signature, QuadratureConfig};
use alloc::vec;
use alloc::vec::Vec;

/// Linear Volterra problem `y = xi + int A(K xdot) y du` on the path's grid.
#[derive(Debug, Clone)]
pub struct LinearVolterraProblem {
    /// Initial value, length k.
    pub xi: Vec<f64>,
    /// One k x k matrix per kernel output coordinate: `A(v) = sum_i v_i A_i`.
    pub a_mats: Vec<Mat>,
    pub path: PiecewiseLinearPath,
    pub kernel: KernelSpec,
}

impl LinearVolterraProblem {
    fn validate(&self) -> Result<(usize, usize), Error> {
        let k = self.xi.len();
        let m = self.kernel.output_dim();
        if self.a_mats.len() != m {
            return Err(Error::DimensionMismatch(alloc::format!(
                "expected {m} coefficient matrices, got {}",
                self.a_mats.len()
            )));
        }
        if self.a_mats.iter().any(|a| a.rows() != k || a.cols() != k) {
            return Err(Error::DimensionMismatch("A_i must be k x k".into()));
        }
        if self.kernel.input_dim() != self.path.dim() {
            return Err(Error::DimensionMismatch(
                "kernel input dim vs path dim".into(),
            ));
        }
        Ok((k, m))
    }

    /// Frobenius-type bound on the operator norm of `v -> A(v)`.
    fn a_norm(&self) -> f64 {
        sqrt(
            self.a_mats
                .iter()
                .map(|a| {
                    let f = a.frobenius_norm();
                    f * f
                })
                .sum(),
        )
    }
}

/// Factorial-decay tail `sum_{n > level} z^n / sqrt(n!)`.
fn roc_tail(z: f64, level: usize) -> f64 {
    let mut fact = 1.0;
    for n in 1..=level {
        fact *= n as f64;
    }
    let mut term_z = crate::math::pow(z, (level + 1) as f64);
    let mut acc = 0.0;
    for n in (level + 1)..(level + 500) {
        fact *= n as f64;
        let term = term_z / sqrt(fact);
        acc += term;
        if term < 1e-18 * (1.0 + acc) {
            break;
        }
        term_z *= z;
    }
    acc
}

/// Solves the linear Volterra equation via the signature expansion
/// `y_t = sum_{n <= level} Atilde(VSig^{(n),t}) xi`.
///
/// Refuses to run when the factorial-decay tail bound at `level` exceeds
/// `tail_tol`, reporting the level that would suffice.
pub fn resolvent_solve(
    problem: &LinearVolterraProblem,
    level: usize,
    tail_tol: f64,
) -> Result<Vec<Vec<f64>>, Error> {
    let (k, m) = problem.validate()?;
    let times = problem.path.grid().times();
    let horizon = times[times.len() - 1] - times[0];
    let knorm = problem.kernel.linf_p_norm(horizon, 2.0, 4000)?;
    let z = problem.a_norm() * problem.path.max_derivative_norm() * knorm * sqrt(horizon);
    let tail = roc_tail(z, level);
    if tail > tail_tol {
        let mut required = level;
        while required < 600 && roc_tail(z, required) > tail_tol {
            required += 1;
        }
        return Err(Error::TailBound {
            requested: level,
            required,
        });
    }

    let quad = QuadratureConfig::for_kernel(&problem.kernel);
    let field = diagonal_signature(&problem.path, &problem.kernel, level, &quad)?;
    let mut out = Vec::with_capacity(times.len());
    for series in field.series() {
        // Depth-first traversal shares the chained products A_{i_l} ... A_{i_1} xi
        // across words with common prefixes.
        let mut y = vec![0.0; k];
        for (c, x) in y.iter_mut().zip(problem.xi.iter()) {
            *c = series.level_slice(0)[0] * x;
        }
        let mut stack: Vec<(usize, usize, Vec<f64>)> = vec![(0, 0, problem.xi.clone())];
        while let Some((depth, idx, v)) = stack.pop() {
            if depth >= series.level() {
                continue;
            }
            for letter in 1..=m {
                let child_idx = idx * m + (letter - 1);
                let child_v = problem.a_mats[letter - 1].matvec(&v);
                let coeff = series.level_slice(depth + 1)[child_idx];
                if coeff != 0.0 {
                    for (acc, x) in y.iter_mut().zip(child_v.iter()) {
                        *acc += coeff * x;
                    }
                }
                stack.push((depth + 1, child_idx, child_v));
            }
        }
        out.push(y);
    }
    Ok(out)
}

/// Left-point Euler discretization with full-history kernel re-weighting:
/// `y_{n+1} = xi + sum_{j <= n} A(K(t_{n+1}, t_j) xdot_j) y_j dt_j`.
pub fn euler_volterra(problem: &LinearVolterraProblem) -> Result<Vec<Vec<f64>>, Error> {
    let (k, m) = problem.validate()?;
    let times = problem.path.grid().times();
    let n = problem.path.grid().segments();
    let mut out = Vec::with_capacity(n + 1);
    out.push(problem.xi.clone());
    let mut kbuf = vec![0.0; m * problem.path.dim()];
    for step in 0..n {
        let t_next = times[step + 1];
        let mut y = problem.xi.clone();
        for j in 0..=step {
            problem.kernel.eval_into(t_next, times[j], &mut kbuf)?;
            let v = problem.path.derivative(j);
            let dt = times[j + 1] - times[j];
            // u = K(t_{n+1}, t_j) xdot_j
            let d = problem.path.dim();
            let yj = &out[j];
            for (i, a) in problem.a_mats.iter().enumerate() {
                let mut ui = 0.0;
                for c in 0..d {
                    ui += kbuf[i * d + c] * v[c];
                }
                if ui == 0.0 {
                    continue;
                }
                let ay = a.matvec(yj);
                for (acc, x) in y.iter_mut().zip(ay.iter()) {
                    *acc += dt * ui * x;
                }
            }
        }
        debug_assert_eq!(y.len(), k);
        out.push(y);
    }
    Ok(out)
}

/// Parameters of the linear Volterra SDE
/// `Y_t = Y_0 + int (b0 + b1 Y_s) k(t,s) ds + int (s0 + s1 Y_s) k(t,s) dB_s`.
#[derive(Debug, Clone)]
pub struct VsdeParams {
    pub y0: f64,
    pub b0: f64,
    pub b1: f64,
    pub sigma0: f64,
    pub sigma1: f64,
    /// Scalar kernel (output and input dimension one).
    pub kernel: KernelSpec,
    /// Uniform simulation grid.
    pub grid: TimeGrid,
    pub samples: usize,
    pub seed: u64,
}

/// One Euler-Maruyama sample: Brownian node values and the solution.
#[derive(Debug, Clone, PartialEq)]
pub struct VsdeSample {
    pub brownian: Vec<f64>,
    pub y: Vec<f64>,
}

fn vsde_lag_weights(params: &VsdeParams) -> Result<Vec<f64>, Error> {
    if !params.grid.is_uniform() {
        return Err(Error::InvalidGrid(
            "the SDE simulator needs a uniform grid".into(),
        ));
    }
    if params.kernel.output_dim() != 1 || params.kernel.input_dim() != 1 {
        return Err(Error::UnsupportedKernel(
            "the SDE kernel must be scalar".into(),
        ));
    }
    if let Some((beta, _)) = params.kernel.fractional_parts() {
        if beta <= 0.5 {
            return Err(Error::UnsupportedKernel(
                "fractional kernels with beta <= 0.5 are outside the simulator's scope".into(),
            ));
        }
    }
    let times = params.grid.times();
    // Lag 0 is never touched (left-point scheme), so singular kernels with
    // beta in (0.5, 1) are fine.
    let mut weights = vec![0.0; times.len()];
    let mut buf = [0.0f64; 1];
    for (lag, w) in weights.iter_mut().enumerate().skip(1) {
        params.kernel.eval_into(times[lag], times[0], &mut buf)?;
        *w = buf[0];
    }
    Ok(weights)
}

/// Simulates the sample with index `idx` on its own random substream.
pub fn simulate_sample(params: &VsdeParams, idx: usize) -> Result<VsdeSample, Error> {
    let weights = vsde_lag_weights(params)?;
    simulate_with_weights(params, idx, &weights)
}

fn simulate_with_weights(
    params: &VsdeParams,
    idx: usize,
    lag_weights: &[f64],
) -> Result<VsdeSample, Error> {
    let times = params.grid.times();
    let n = params.grid.segments();
    let dt = times[1] - times[0];
    let sqrt_dt = sqrt(dt);
    let mut stream = Stream::new(params.seed, idx as u64);
    let mut brownian = Vec::with_capacity(n + 1);
    brownian.push(0.0);
    let mut db = Vec::with_capacity(n);
    for j in 0..n {
        let increment = sqrt_dt * stream.next_gaussian();
        db.push(increment);
        brownian.push(brownian[j] + increment);
    }
    let mut y = Vec::with_capacity(n + 1);
    y.push(params.y0);
    // c_j = (b0 + b1 Y_j) dt, d_j = (s0 + s1 Y_j) dB_j, filled as Y unfolds.
    let mut forcing = Vec::with_capacity(n);
    for step in 0..n {
        let yj = y[step];
        forcing.push(
            (params.b0 + params.b1 * yj) * dt + (params.sigma0 + params.sigma1 * yj) * db[step],
        );
        let mut acc = params.y0;
        for (j, f) in forcing.iter().enumerate() {
            acc += lag_weights[step + 1 - j] * f;
        }
        y.push(acc);
    }
    Ok(VsdeSample { brownian, y })
}

/// Simulates all `params.samples` paths; sample `i` uses substream `i`, so
/// the output is identical however the batch is scheduled.
pub fn simulate_linear_vsde(params: &VsdeParams) -> Result<Vec<VsdeSample>, Error> {
    if params.samples < 1 {
        return Err(Error::InvalidInput("need at least one sample".into()));
    }
    let weights = vsde_lag_weights(params)?;
    (0..params.samples)
        .map(|i| simulate_with_weights(params, i, &weights))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::line_path;
    use approx::assert_relative_eq;

    fn scalar_problem(kernel: KernelSpec, a: f64, n: usize, t_end: f64) -> LinearVolterraProblem {
        let mut am = Mat::zeros(1, 1);
        am[(0, 0)] = a;
        LinearVolterraProblem {
            xi: vec![1.0],
            a_mats: vec![am],
            path: line_path(n, t_end),
            kernel,
        }
    }

    #[test]
    fn zero_operator_keeps_initial_value() {
        let p = scalar_problem(KernelSpec::constant_identity(1), 0.0, 64, 1.0);
        let resolvent = resolvent_solve(&p, 4, 1e-6).unwrap();
        let euler = euler_volterra(&p).unwrap();
        for (a, b) in resolvent.iter().zip(euler.iter()) {
            assert_eq!(a[0], 1.0);
            assert_eq!(b[0], 1.0);
        }
    }

    #[test]
    fn constant_kernel_linear_ode_gives_exponential() {
        // k = 1, A = -1, x_t = t: y_t = e^{-t}.
        let p = scalar_problem(KernelSpec::constant_identity(1), -1.0, 1000, 1.0);
        let y = resolvent_solve(&p, 12, 1e-4).unwrap();
        assert_relative_eq!(y[1000][0], 0.36787944117144233, epsilon = 1e-4);
        let euler = euler_volterra(&p).unwrap();
        assert_relative_eq!(euler[1000][0], 0.36787944117144233, epsilon = 2e-3);
    }

    #[test]
    fn tail_bound_reports_required_level() {
        let p = scalar_problem(KernelSpec::constant_identity(1), -1.0, 32, 1.0);
        match resolvent_solve(&p, 2, 1e-8) {
            Err(Error::TailBound {
                requested,
                required,
            }) => {
                assert_eq!(requested, 2);
                assert!(required > 2 && required < 40, "required {required}");
            }
            other => panic!("expected tail-bound error, got {other:?}"),
        }
    }

    #[test]
    fn fractional_resolvent_matches_euler_oracle() {
        let kernel = KernelSpec::Fractional {
            beta: 1.05,
            a: Mat::identity(1),
        };
        let p = scalar_problem(kernel, -1.0, 1000, 1.0);
        let resolvent = resolvent_solve(&p, 12, 1e-4).unwrap();
        let euler = euler_volterra(&p).unwrap();
        let diff = (resolvent[1000][0] - euler[1000][0]).abs();
        assert!(diff < 1e-3, "resolvent vs Euler gap {diff}");
    }

    #[test]
    fn euler_first_order_convergence() {
        let exact = 0.36787944117144233;
        let mut errs = Vec::new();
        for n in [250usize, 500, 1000] {
            let p = scalar_problem(KernelSpec::constant_identity(1), -1.0, n, 1.0);
            let y = euler_volterra(&p).unwrap();
            errs.push((y[n][0] - exact).abs());
        }
        let o1 = libm::log2(errs[0] / errs[1]);
        let o2 = libm::log2(errs[1] / errs[2]);
        assert!(o1 > 0.8 && o2 > 0.8, "orders {o1}, {o2}");
        assert!(o1 < 1.3 && o2 < 1.3, "orders {o1}, {o2}");
    }

    #[test]
    fn discretizations_share_one_limit() {
        // Different schemes (left-point Euler vs trapezoid resolvent) must
        // approach each other under refinement.
        let kernel = KernelSpec::ScalarExp {
            alpha: 1.0,
            lambda: 1.0,
            dim: 1,
        };
        let mut gaps = Vec::new();
        for n in [250usize, 1000] {
            let p = scalar_problem(kernel.clone(), -1.0, n, 1.0);
            let a = resolvent_solve(&p, 12, 1e-4).unwrap();
            let b = euler_volterra(&p).unwrap();
            gaps.push((a[n][0] - b[n][0]).abs());
        }
        assert!(gaps[1] < gaps[0] / 2.0, "gaps {gaps:?}");
    }

    #[test]
    fn vsde_noise_off_matches_euler_volterra() {
        // With sigma = 0 the scheme is the affine-augmented Euler recursion.
        let kernel = KernelSpec::Fractional {
            beta: 1.05,
            a: Mat::identity(1),
        };
        let grid = TimeGrid::uniform(0.0, 2.0, 500).unwrap();
        let params = VsdeParams {
            y0: 1.0,
            b0: 0.3,
            b1: -1.0,
            sigma0: 0.0,
            sigma1: 0.0,
            kernel: kernel.clone(),
            grid: grid.clone(),
            samples: 1,
            seed: 1,
        };
        let sample = simulate_sample(&params, 0).unwrap();

        // Augmented state (Y, 1): A(v) (y, c) = v (b1 y + b0 c, 0).
        let mut a = Mat::zeros(2, 2);
        a[(0, 0)] = params.b1;
        a[(0, 1)] = params.b0;
        let times = grid.times().to_vec();
        let values: Vec<Vec<f64>> = times.iter().map(|&t| vec![t]).collect();
        let p = LinearVolterraProblem {
            xi: vec![1.0, 1.0],
            a_mats: vec![a],
            path: PiecewiseLinearPath::from_samples(times, values).unwrap(),
            kernel,
        };
        let euler = euler_volterra(&p).unwrap();
        for (s, e) in sample.y.iter().zip(euler.iter()) {
            assert!((s - e[0]).abs() < 1e-12, "{s} vs {}", e[0]);
        }
    }

    #[test]
    fn vsde_seed_determinism() {
        let params = VsdeParams {
            y0: 1.0,
            b0: 0.0,
            b1: -1.0,
            sigma0: 1.0,
            sigma1: 0.5,
            kernel: KernelSpec::Fractional {
                beta: 1.05,
                a: Mat::identity(1),
            },
            grid: TimeGrid::uniform(0.0, 1.0, 200).unwrap(),
            samples: 3,
            seed: 99,
        };
        let a = simulate_linear_vsde(&params).unwrap();
        let b = simulate_linear_vsde(&params).unwrap();
        assert_eq!(a, b);
        // Substreams differ.
        assert_ne!(a[0].brownian, a[1].brownian);
        // Order of evaluation does not matter.
        let direct = simulate_sample(&params, 2).unwrap();
        assert_eq!(a[2], direct);
    }

    #[test]
    fn vsde_sample_mean_tracks_mean_equation() {
        // E[Y] obeys the noise-free recursion exactly; the Monte Carlo mean
        // must sit within three standard errors of it.
        let kernel = KernelSpec::Fractional {
            beta: 1.05,
            a: Mat::identity(1),
        };
        let grid = TimeGrid::uniform(0.0, 2.0, 1000).unwrap();
        let params = VsdeParams {
            y0: 1.0,
            b0: 0.0,
            b1: -1.0,
            sigma0: 1.0,
            sigma1: 0.5,
            kernel: kernel.clone(),
            grid: grid.clone(),
            samples: 1000,
            seed: 2024,
        };
        let samples = simulate_linear_vsde(&params).unwrap();
        let deterministic = {
            let mut p = params.clone();
            p.sigma0 = 0.0;
            p.sigma1 = 0.0;
            simulate_sample(&p, 0).unwrap()
        };
        let node = 500; // t = 1
        let m = params.samples as f64;
        let mean: f64 = samples.iter().map(|s| s.y[node]).sum::<f64>() / m;
        let var: f64 = samples
            .iter()
            .map(|s| (s.y[node] - mean) * (s.y[node] - mean))
            .sum::<f64>()
            / (m - 1.0);
        let se = sqrt(var / m);
        let gap = (mean - deterministic.y[node]).abs();
        assert!(gap <= 3.0 * se, "gap {gap} exceeds 3 SE = {}", 3.0 * se);
    }

    #[test]
    fn vsde_rejects_bad_input() {
        let base = VsdeParams {
            y0: 1.0,
            b0: 0.0,
            b1: 0.0,
            sigma0: 1.0,
            sigma1: 0.0,
            kernel: KernelSpec::constant_identity(1),
            grid: TimeGrid::new(vec![0.0, 0.1, 0.5]).unwrap(),
            samples: 1,
            seed: 0,
        };
        assert!(matches!(
            simulate_linear_vsde(&base),
            Err(Error::InvalidGrid(_))
        ));
        let mut no_samples = base.clone();
        no_samples.grid = TimeGrid::uniform(0.0, 1.0, 4).unwrap();
        no_samples.samples = 0;
        assert!(matches!(
            simulate_linear_vsde(&no_samples),
            Err(Error::InvalidInput(_))
        ));
        let mut singular = no_samples.clone();
        singular.samples = 1;
        singular.kernel = KernelSpec::Fractional {
            beta: 0.4,
            a: Mat::identity(1),
        };
        assert!(matches!(
            simulate_linear_vsde(&singular),
            Err(Error::UnsupportedKernel(_))
        ));
    }
}
