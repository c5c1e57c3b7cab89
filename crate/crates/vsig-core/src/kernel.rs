//! Memory kernels `K(t, s)` with values in the m x d matrices.
//!
//! All built-in kernels are convolution kernels (they depend on `t - s`
//! only); the [`Kernel`] trait keeps the engines open to arbitrary
//! two-parameter kernels, which the reparameterization tests exploit.

use crate::error::Error;
use crate::linalg::{expm, Mat};
use crate::math::{exp, fabs, gamma, pow, sqrt};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

/// Pointwise evaluation interface used by every engine.
pub trait Kernel {
    /// Output dimension m (the signature alphabet size).
    fn output_dim(&self) -> usize;
    /// Input dimension d (must match the path dimension).
    fn input_dim(&self) -> usize;
    /// Writes `K(t, s)` row-major into `out` (length `m * d`); requires `s <= t`.
    fn eval_into(&self, t: f64, s: f64, out: &mut [f64]) -> Result<(), Error>;
    /// Whether the kernel depends on `(t, s)` through `t - s` only.
    fn is_stationary(&self) -> bool {
        false
    }
    /// For kernels `(t-s)^{beta-1}/Gamma(beta) * A`, the pair `(beta, A)`;
    /// enables exact product-integration weights near the diagonal.
    fn fractional_parts(&self) -> Option<(f64, &Mat)> {
        None
    }

    fn eval(&self, t: f64, s: f64) -> Result<Mat, Error> {
        let mut out = vec![0.0; self.output_dim() * self.input_dim()];
        self.eval_into(t, s, &mut out)?;
        Mat::from_vec(self.output_dim(), self.input_dim(), out)
    }
}

/// One summand of a finite-state-space kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceTerm {
    /// Loading vector `b_r` of length R.
    pub b: Vec<f64>,
    /// Output matrix `A_r`, m x d.
    pub a: Mat,
}

/// Tagged description of a memory kernel.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelSpec {
    /// `K(t, s) = A`.
    Constant { a: Mat },
    /// `K(t, s) = (t-s)^{beta-1} / Gamma(beta) * A`, `beta > 0`.
    Fractional { beta: f64, a: Mat },
    /// `K(t, s) = alpha e^{-lambda (t-s)} I_d`.
    ScalarExp { alpha: f64, lambda: f64, dim: usize },
    /// `K(t, s) = sum_l alpha_l e^{-lambda_l (t-s)} I_d`.
    DiagSumExp {
        alpha: Vec<f64>,
        lambda: Vec<f64>,
        dim: usize,
    },
    /// `K(t, s) = sum_r (1^T e^{-Lambda (t-s)} b_r) A_r`.
    StateSpace {
        lambda: Mat,
        terms: Vec<StateSpaceTerm>,
    },
    /// Lag-sampled values with linear interpolation in `t - s`.
    Tabulated { lags: Vec<f64>, values: Vec<Mat> },
}

impl KernelSpec {
    pub fn constant_identity(dim: usize) -> Self {
        KernelSpec::Constant {
            a: Mat::identity(dim),
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        match self {
            KernelSpec::Constant { .. } => Ok(()),
            KernelSpec::Fractional { beta, .. } => {
                if *beta <= 0.0 {
                    Err(Error::InvalidInput(
                        "fractional kernel needs beta > 0".into(),
                    ))
                } else {
                    Ok(())
                }
            }
            KernelSpec::ScalarExp { lambda, dim, .. } => {
                if *lambda < 0.0 {
                    Err(Error::InvalidInput(
                        "scalar exponential needs lambda >= 0".into(),
                    ))
                } else if *dim == 0 {
                    Err(Error::InvalidInput(
                        "kernel dimension must be positive".into(),
                    ))
                } else {
                    Ok(())
                }
            }
            KernelSpec::DiagSumExp { alpha, lambda, dim } => {
                if alpha.len() != lambda.len() || alpha.is_empty() {
                    Err(Error::DimensionMismatch(
                        "alpha/lambda lengths differ or empty".into(),
                    ))
                } else if lambda.iter().any(|&l| l < 0.0) {
                    Err(Error::InvalidInput("rates must be nonnegative".into()))
                } else if *dim == 0 {
                    Err(Error::InvalidInput(
                        "kernel dimension must be positive".into(),
                    ))
                } else {
                    Ok(())
                }
            }
            KernelSpec::StateSpace { lambda, terms } => {
                if lambda.rows() != lambda.cols() {
                    return Err(Error::DimensionMismatch("Lambda must be square".into()));
                }
                if terms.is_empty() {
                    return Err(Error::InvalidInput(
                        "state-space kernel needs >= 1 term".into(),
                    ));
                }
                let (m, d) = (terms[0].a.rows(), terms[0].a.cols());
                for t in terms {
                    if t.b.len() != lambda.rows() {
                        return Err(Error::DimensionMismatch("b_r length must equal R".into()));
                    }
                    if t.a.rows() != m || t.a.cols() != d {
                        return Err(Error::DimensionMismatch("A_r shapes differ".into()));
                    }
                }
                Ok(())
            }
            KernelSpec::Tabulated { lags, values } => {
                if lags.len() != values.len() || lags.len() < 2 {
                    return Err(Error::DimensionMismatch(
                        "tabulated kernel needs >= 2 matching samples".into(),
                    ));
                }
                if lags.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::InvalidGrid("tabulated lags must increase".into()));
                }
                let (m, d) = (values[0].rows(), values[0].cols());
                if values.iter().any(|v| v.rows() != m || v.cols() != d) {
                    return Err(Error::DimensionMismatch(
                        "tabulated value shapes differ".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    /// `sup_t (int_0^t |K(t,s)|^p ds)^{1/p}` with the Frobenius matrix norm.
    ///
    /// Closed forms for the constant, scalar-exponential and fractional
    /// kernels; trapezoid quadrature in the lag variable otherwise. All
    /// supported kernels are stationary, so the supremum sits at `t = T`.
    pub fn linf_p_norm(&self, horizon: f64, p: f64, resolution: usize) -> Result<f64, Error> {
        if p < 1.0 {
            return Err(Error::InvalidInput("need p >= 1".into()));
        }
        if horizon <= 0.0 {
            return Err(Error::InvalidInput("need horizon > 0".into()));
        }
        match self {
            KernelSpec::Constant { a } => Ok(a.frobenius_norm() * pow(horizon, 1.0 / p)),
            KernelSpec::ScalarExp { alpha, lambda, dim } => {
                let amp = fabs(*alpha) * sqrt(*dim as f64);
                if *lambda == 0.0 {
                    Ok(amp * pow(horizon, 1.0 / p))
                } else {
                    Ok(amp * pow((1.0 - exp(-p * lambda * horizon)) / (p * lambda), 1.0 / p))
                }
            }
            KernelSpec::Fractional { beta, a } => {
                let expo = 1.0 - p * (1.0 - beta);
                if expo <= 0.0 {
                    return Err(Error::DivergentNorm(format!(
                        "fractional kernel with beta={beta} has divergent L^(inf,{p}) norm"
                    )));
                }
                let scalar = pow(horizon, expo) / expo;
                Ok(a.frobenius_norm() / gamma(*beta) * pow(scalar, 1.0 / p))
            }
            _ => {
                let n = resolution.max(8);
                let dt = horizon / n as f64;
                let mut buf = vec![0.0; self.output_dim() * self.input_dim()];
                let g = |lag: f64, buf: &mut [f64]| -> Result<f64, Error> {
                    self.eval_into(lag, 0.0, buf)?;
                    let fro: f64 = buf.iter().map(|x| x * x).sum();
                    Ok(pow(sqrt(fro), p))
                };
                let mut acc = 0.0;
                let mut prev = g(0.0, &mut buf)?;
                for i in 1..=n {
                    let cur = g(i as f64 * dt, &mut buf)?;
                    acc += 0.5 * (prev + cur) * dt;
                    prev = cur;
                }
                Ok(pow(acc, 1.0 / p))
            }
        }
    }

    /// Embeds sums of exponentials into the state-space family.
    pub fn to_state_space(&self) -> Result<KernelSpec, Error> {
        match self {
            KernelSpec::ScalarExp { alpha, lambda, dim } => {
                let mut l = Mat::zeros(1, 1);
                l[(0, 0)] = *lambda;
                Ok(KernelSpec::StateSpace {
                    lambda: l,
                    terms: vec![StateSpaceTerm {
                        b: vec![*alpha],
                        a: Mat::identity(*dim),
                    }],
                })
            }
            KernelSpec::DiagSumExp { alpha, lambda, dim } => {
                let r = alpha.len();
                let mut l = Mat::zeros(r, r);
                for i in 0..r {
                    l[(i, i)] = lambda[i];
                }
                Ok(KernelSpec::StateSpace {
                    lambda: l,
                    terms: vec![StateSpaceTerm {
                        b: alpha.clone(),
                        a: Mat::identity(*dim),
                    }],
                })
            }
            KernelSpec::StateSpace { .. } => Ok(self.clone()),
            _ => Err(Error::UnsupportedKernel(
                "only exponential-family kernels embed into the state space".into(),
            )),
        }
    }

    /// Samples any kernel into the tabulated variant on `n` uniform lags.
    pub fn tabulate(&self, max_lag: f64, n: usize) -> Result<KernelSpec, Error> {
        if n < 2 {
            return Err(Error::InvalidInput("need at least two lag samples".into()));
        }
        let mut lags = Vec::with_capacity(n);
        let mut values = Vec::with_capacity(n);
        for i in 0..n {
            let lag = max_lag * i as f64 / (n - 1) as f64;
            lags.push(lag);
            values.push(self.eval(lag, 0.0)?);
        }
        Ok(KernelSpec::Tabulated { lags, values })
    }
}

impl Kernel for KernelSpec {
    fn output_dim(&self) -> usize {
        match self {
            KernelSpec::Constant { a } | KernelSpec::Fractional { a, .. } => a.rows(),
            KernelSpec::ScalarExp { dim, .. } | KernelSpec::DiagSumExp { dim, .. } => *dim,
            KernelSpec::StateSpace { terms, .. } => terms[0].a.rows(),
            KernelSpec::Tabulated { values, .. } => values[0].rows(),
        }
    }

    fn input_dim(&self) -> usize {
        match self {
            KernelSpec::Constant { a } | KernelSpec::Fractional { a, .. } => a.cols(),
            KernelSpec::ScalarExp { dim, .. } | KernelSpec::DiagSumExp { dim, .. } => *dim,
            KernelSpec::StateSpace { terms, .. } => terms[0].a.cols(),
            KernelSpec::Tabulated { values, .. } => values[0].cols(),
        }
    }

    fn is_stationary(&self) -> bool {
        true
    }

    fn fractional_parts(&self) -> Option<(f64, &Mat)> {
        match self {
            KernelSpec::Fractional { beta, a } => Some((*beta, a)),
            _ => None,
        }
    }

    fn eval_into(&self, t: f64, s: f64, out: &mut [f64]) -> Result<(), Error> {
        if s > t + 1e-14 * (1.0 + fabs(t)) {
            return Err(Error::KernelDomain(format!(
                "require s <= t, got s={s}, t={t}"
            )));
        }
        let lag = (t - s).max(0.0);
        match self {
            KernelSpec::Constant { a } => out.copy_from_slice(a.data()),
            KernelSpec::Fractional { beta, a } => {
                let w = if lag == 0.0 {
                    if *beta > 1.0 {
                        0.0
                    } else if *beta == 1.0 {
                        1.0 / gamma(*beta)
                    } else {
                        return Err(Error::KernelDomain(
                            "singular point: fractional kernel with beta < 1 on the diagonal"
                                .into(),
                        ));
                    }
                } else {
                    pow(lag, beta - 1.0) / gamma(*beta)
                };
                for (o, &x) in out.iter_mut().zip(a.data().iter()) {
                    *o = w * x;
                }
            }
            KernelSpec::ScalarExp { alpha, lambda, dim } => {
                let w = alpha * exp(-lambda * lag);
                out.fill(0.0);
                for i in 0..*dim {
                    out[i * dim + i] = w;
                }
            }
            KernelSpec::DiagSumExp { alpha, lambda, dim } => {
                let mut w = 0.0;
                for (a, l) in alpha.iter().zip(lambda.iter()) {
                    w += a * exp(-l * lag);
                }
                out.fill(0.0);
                for i in 0..*dim {
                    out[i * dim + i] = w;
                }
            }
            KernelSpec::StateSpace { lambda, terms } => {
                let e = expm(&lambda.scale(-lag));
                let r = lambda.rows();
                out.fill(0.0);
                for term in terms {
                    // 1^T e^{-Lambda lag} b_r
                    let mut w = 0.0;
                    for i in 0..r {
                        for j in 0..r {
                            w += e[(i, j)] * term.b[j];
                        }
                    }
                    for (o, &x) in out.iter_mut().zip(term.a.data().iter()) {
                        *o += w * x;
                    }
                }
            }
            KernelSpec::Tabulated { lags, values } => {
                let last = lags.len() - 1;
                if lag <= lags[0] {
                    out.copy_from_slice(values[0].data());
                } else if lag >= lags[last] {
                    out.copy_from_slice(values[last].data());
                } else {
                    let mut hi = lags.partition_point(|&l| l < lag);
                    if hi == 0 {
                        hi = 1;
                    }
                    let lo = hi - 1;
                    let frac = (lag - lags[lo]) / (lags[hi] - lags[lo]);
                    for (k, o) in out.iter_mut().enumerate() {
                        let a = values[lo].data()[k];
                        let b = values[hi].data()[k];
                        *o = a + frac * (b - a);
                    }
                }
            }
        }
        Ok(())
    }
}
