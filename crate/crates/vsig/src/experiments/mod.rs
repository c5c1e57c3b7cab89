//! Experiment drivers for the two reproduction studies.

pub mod sde;
pub mod synthetic;
pub mod volforecast;

use crate::error::{AppError, Result};
use vsig_core::kernel::KernelSpec;
use vsig_core::linalg::Mat;

/// Promotes a scalar kernel specification (output/input dimension one, or a
/// diagonal family) to act diagonally on a `dim`-channel path.
pub fn promote_scalar_kernel(spec: &KernelSpec, dim: usize) -> Result<KernelSpec> {
    let promoted = match spec {
        KernelSpec::Constant { a } if a.rows() == 1 && a.cols() == 1 => KernelSpec::Constant {
            a: Mat::identity(dim).scale(a[(0, 0)]),
        },
        KernelSpec::Fractional { beta, a } if a.rows() == 1 && a.cols() == 1 => {
            KernelSpec::Fractional {
                beta: *beta,
                a: Mat::identity(dim).scale(a[(0, 0)]),
            }
        }
        KernelSpec::ScalarExp { alpha, lambda, .. } => KernelSpec::ScalarExp {
            alpha: *alpha,
            lambda: *lambda,
            dim,
        },
        KernelSpec::DiagSumExp { alpha, lambda, .. } => KernelSpec::DiagSumExp {
            alpha: alpha.clone(),
            lambda: lambda.clone(),
            dim,
        },
        other => {
            if vsig_core::kernel::Kernel::input_dim(other) == dim {
                other.clone()
            } else {
                return Err(AppError::Config(format!(
                    "kernel is not scalar and its input dimension differs from {dim}"
                )));
            }
        }
    };
    Ok(promoted)
}
