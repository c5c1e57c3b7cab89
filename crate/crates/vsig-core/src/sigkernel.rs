//! The Volterra signature kernel `kappa(z, y)_{s,t} = <z^s_{0,s}, y^t_{0,t}>`
//! and Gram-matrix assembly.
//!
//! Three routes compute `kappa`:
//! * [`gram_entry_truncated`]: the truncation-L inner-product oracle;
//! * [`gram_entry_integral`]: the two-parameter integral equation
//!   `kappa_{s,t} = 1 + int int kappa_{u,v} <zdot_u^s, ydot_v^t> du dv`,
//!   solved forward node by node (each derivative carries its own outer
//!   time, the pairing the equation's derivation produces);
//! * [`gram_entry_pde_exp`]: for state-space kernels, a Goursat system in
//!   the matrices `(K, Psi, Phi)` with `kappa = 1 + 1^T K 1`.
//!
//! The integral solver re-weights for every outer node pair, an O(N^4)
//! sweep that is accepted at desk scale; callers cap the grid.

use crate::error::Error;
use crate::kernel::{Kernel, KernelSpec};
use crate::linalg::{sym_eigenvalues, Mat};
use crate::path::PiecewiseLinearPath;
use crate::tensor::{inner_product, TruncatedTensorSeries};
use crate::vsig::{diagonal_signature, node_vectors, KernelRows, QuadratureConfig};
use alloc::vec;
use alloc::vec::Vec;

/// The two-parameter field `kappa[i][j] ~ kappa_{s_i, t_j}`.
#[derive(Debug, Clone)]
pub struct GramField {
    s_times: Vec<f64>,
    t_times: Vec<f64>,
    values: Vec<f64>,
}

impl GramField {
    pub fn s_times(&self) -> &[f64] {
        &self.s_times
    }

    pub fn t_times(&self) -> &[f64] {
        &self.t_times
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.t_times.len() + j]
    }

    pub fn terminal(&self) -> f64 {
        self.at(self.s_times.len() - 1, self.t_times.len() - 1)
    }
}

/// Truncation-L oracle: the Hilbert-Schmidt inner product of two signatures.
pub fn gram_entry_truncated(
    a: &TruncatedTensorSeries,
    b: &TruncatedTensorSeries,
) -> Result<f64, Error> {
    inner_product(a, b)
}

/// Per-node integration weights `zhat_i[u]` such that
/// `int_0^{s_i} f(u) zdot_u^{s_i} du ~= sum_u f(t_u) . zhat_i[u]`.
fn outer_weights<K: Kernel + ?Sized>(
    path: &PiecewiseLinearPath,
    kernel: &K,
) -> Result<Vec<Vec<f64>>, Error> {
    let rule = QuadratureConfig::for_kernel(kernel).rule;
    let rows = KernelRows::new(kernel, path)?;
    let times = path.grid().times();
    let mut out = Vec::with_capacity(times.len());
    let mut scratch = Vec::new();
    for i in 0..times.len() {
        let mut w = Vec::new();
        node_vectors(&rows, path, rule, i, times[i], 0, i, &mut scratch, &mut w)?;
        out.push(w);
    }
    Ok(out)
}

/// Solves the two-parameter Volterra integral equation for the signature
/// kernel of `(z_path, z_kernel)` against `(y_path, y_kernel)`.
///
/// Forward node-by-node evaluation with per-axis trapezoid weights (product
/// weights for singular fractional kernels); the diagonal corner enters
/// implicitly and is solved per node.
pub fn gram_entry_integral<KZ, KY>(
    z_path: &PiecewiseLinearPath,
    z_kernel: &KZ,
    y_path: &PiecewiseLinearPath,
    y_kernel: &KY,
) -> Result<GramField, Error>
where
    KZ: Kernel + ?Sized,
    KY: Kernel + ?Sized,
{
    if z_kernel.output_dim() != y_kernel.output_dim() {
        return Err(Error::DimensionMismatch(alloc::format!(
            "kernel output dims differ: {} vs {}",
            z_kernel.output_dim(),
            y_kernel.output_dim()
        )));
    }
    if z_kernel.input_dim() != z_path.dim() || y_kernel.input_dim() != y_path.dim() {
        return Err(Error::DimensionMismatch(
            "kernel/path dimension mismatch".into(),
        ));
    }
    let m = z_kernel.output_dim();
    let zhat = outer_weights(z_path, z_kernel)?;
    let yhat = outer_weights(y_path, y_kernel)?;
    let np = z_path.node_count();
    let nq = y_path.node_count();
    let mut kappa = vec![0.0f64; np * nq];
    for j in 0..nq {
        kappa[j] = 1.0;
    }
    for i in 1..np {
        kappa[i * nq] = 1.0;
        for j in 1..nq {
            // S = sum_{u <= i, v <= j, (u,v) != (i,j)} kappa[u][v] (zhat_i[u] . yhat_j[v])
            let zi = &zhat[i];
            let yj = &yhat[j];
            let mut s_known = 0.0;
            for u in 0..i {
                // b = sum_{v <= j} kappa[u][v] yhat_j[v]
                let row = &kappa[u * nq..u * nq + j + 1];
                let mut dot = 0.0;
                for k in 0..m {
                    let zk = zi[u * m + k];
                    if zk == 0.0 {
                        continue;
                    }
                    let mut acc = 0.0;
                    for (v, &kv) in row.iter().enumerate() {
                        acc += kv * yj[v * m + k];
                    }
                    dot += zk * acc;
                }
                s_known += dot;
            }
            // u = i row: v < j known entries.
            {
                let row = &kappa[i * nq..i * nq + j];
                let mut dot = 0.0;
                for k in 0..m {
                    let zk = zi[i * m + k];
                    if zk == 0.0 {
                        continue;
                    }
                    let mut acc = 0.0;
                    for (v, &kv) in row.iter().enumerate() {
                        acc += kv * yj[v * m + k];
                    }
                    dot += zk * acc;
                }
                s_known += dot;
            }
            // Implicit corner coefficient.
            let mut corner = 0.0;
            for k in 0..m {
                corner += zi[i * m + k] * yj[j * m + k];
            }
            kappa[i * nq + j] = (1.0 + s_known) / (1.0 - corner);
        }
    }
    Ok(GramField {
        s_times: z_path.grid().times().to_vec(),
        t_times: y_path.grid().times().to_vec(),
        values: kappa,
    })
}

/// Goursat marching state for one node pair.
struct PdeFields {
    k: Vec<Mat>,
    psi: Vec<Mat>,
    phi: Vec<Mat>,
    eta: Vec<f64>,
    nq: usize,
}

impl PdeFields {
    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.nq + j
    }
}

/// Signature kernel for a shared state-space kernel via the Goursat system
///
/// ```text
/// d2K/dsdt = (1+eta) gamma(s,t) + Lambda K Lambda^T
///            - Lambda Psi beta(t)^T - alpha(s) Phi Lambda^T
/// dPsi/ds  = -Lambda Psi + (1+eta) alpha(s)
/// dPhi/dt  = -Phi Lambda^T + (1+eta) beta(t)^T
/// ```
///
/// with `eta = 1^T K 1`, `gamma(s,t) = alpha(s) beta(t)^T`, zero boundary
/// data, and `kappa = 1 + eta`. Marching is first-order upwind per
/// direction with one Heun corrector pass per cell.
pub fn gram_entry_pde_exp(
    x_path: &PiecewiseLinearPath,
    w_path: &PiecewiseLinearPath,
    kernel: &KernelSpec,
) -> Result<GramField, Error> {
    let ss = kernel
        .to_state_space()
        .map_err(|_| Error::UnsupportedKernel("PDE route needs a state-space kernel".into()))?;
    let (lambda, terms) = match &ss {
        KernelSpec::StateSpace { lambda, terms } => (lambda, terms),
        _ => unreachable!(),
    };
    let r = lambda.rows();
    let m = terms[0].a.rows();
    let d = terms[0].a.cols();
    if x_path.dim() != d || w_path.dim() != d {
        return Err(Error::DimensionMismatch(
            "kernel/path dimension mismatch".into(),
        ));
    }
    // Loadings M_l = sum_r b_r[l] A_r; alpha/beta are piecewise constant,
    // one R x m matrix per segment.
    let mut loadings: Vec<Mat> = Vec::with_capacity(r);
    for l in 0..r {
        let mut ml = Mat::zeros(m, d);
        for term in terms {
            let w = term.b[l];
            for rr in 0..m {
                for cc in 0..d {
                    ml[(rr, cc)] += w * term.a[(rr, cc)];
                }
            }
        }
        loadings.push(ml);
    }
    let seg_loading = |path: &PiecewiseLinearPath, seg: usize| -> Mat {
        let v = path.derivative(seg);
        let mut out = Mat::zeros(r, m);
        for l in 0..r {
            let mv = loadings[l].matvec(v);
            for k in 0..m {
                out[(l, k)] = mv[k];
            }
        }
        out
    };
    let alphas: Vec<Mat> = (0..x_path.grid().segments())
        .map(|i| seg_loading(x_path, i))
        .collect();
    let betas: Vec<Mat> = (0..w_path.grid().segments())
        .map(|j| seg_loading(w_path, j))
        .collect();

    let np = x_path.node_count();
    let nq = w_path.node_count();
    let mut f = PdeFields {
        k: vec![Mat::zeros(r, r); np * nq],
        psi: vec![Mat::zeros(r, m); np * nq],
        phi: vec![Mat::zeros(m, r); np * nq],
        eta: vec![0.0; np * nq],
        nq,
    };
    let lambda_t = lambda.transpose();
    let sum_all = |mat: &Mat| -> f64 { mat.data().iter().sum() };

    let rhs_k = |k: &Mat, eta: f64, psi: &Mat, phi: &Mat, alpha: &Mat, beta: &Mat| -> Mat {
        let gamma = alpha.matmul(&beta.transpose());
        let mut out = gamma.scale(1.0 + eta);
        out = out.add(&lambda.matmul(k).matmul(&lambda_t));
        out = out.add(&lambda.matmul(psi).matmul(&beta.transpose()).scale(-1.0));
        out = out.add(&alpha.matmul(phi).matmul(&lambda_t).scale(-1.0));
        out
    };
    let rhs_psi = |psi: &Mat, eta: f64, alpha: &Mat| -> Mat {
        lambda.matmul(psi).scale(-1.0).add(&alpha.scale(1.0 + eta))
    };
    let rhs_phi = |phi: &Mat, eta: f64, beta: &Mat| -> Mat {
        phi.matmul(&lambda_t)
            .scale(-1.0)
            .add(&beta.transpose().scale(1.0 + eta))
    };

    let sx = x_path.grid().times();
    let tw = w_path.grid().times();
    for i in 1..np {
        let ds = sx[i] - sx[i - 1];
        let alpha = &alphas[i - 1];
        for j in 1..nq {
            let dt = tw[j] - tw[j - 1];
            let beta = &betas[j - 1];
            let (i00, i01, i10, ij) = (
                f.idx(i - 1, j - 1),
                f.idx(i - 1, j),
                f.idx(i, j - 1),
                f.idx(i, j),
            );

            // Predictor pass from the three known corners.
            let rhs00 = rhs_k(&f.k[i00], f.eta[i00], &f.psi[i00], &f.phi[i00], alpha, beta);
            let k_pred = f.k[i01]
                .add(&f.k[i10])
                .add(&f.k[i00].scale(-1.0))
                .add(&rhs00.scale(ds * dt));
            let eta_pred = sum_all(&k_pred);
            let psi_rhs_base = rhs_psi(&f.psi[i01], f.eta[i01], alpha);
            let psi_pred = f.psi[i01].add(&psi_rhs_base.scale(ds));
            let phi_rhs_base = rhs_phi(&f.phi[i10], f.eta[i10], beta);
            let phi_pred = f.phi[i10].add(&phi_rhs_base.scale(dt));

            // Heun corrector: average the cell source over its corners.
            let rhs01 = rhs_k(&f.k[i01], f.eta[i01], &f.psi[i01], &f.phi[i01], alpha, beta);
            let rhs10 = rhs_k(&f.k[i10], f.eta[i10], &f.psi[i10], &f.phi[i10], alpha, beta);
            let rhs11 = rhs_k(&k_pred, eta_pred, &psi_pred, &phi_pred, alpha, beta);
            let rhs_avg = rhs00.add(&rhs01).add(&rhs10).add(&rhs11).scale(0.25);
            let k_new = f.k[i01]
                .add(&f.k[i10])
                .add(&f.k[i00].scale(-1.0))
                .add(&rhs_avg.scale(ds * dt));
            let eta_new = sum_all(&k_new);
            let psi_rhs_pred = rhs_psi(&psi_pred, eta_pred, alpha);
            let psi_new = f.psi[i01].add(&psi_rhs_base.add(&psi_rhs_pred).scale(0.5 * ds));
            let phi_rhs_pred = rhs_phi(&phi_pred, eta_pred, beta);
            let phi_new = f.phi[i10].add(&phi_rhs_base.add(&phi_rhs_pred).scale(0.5 * dt));

            f.k[ij] = k_new;
            f.psi[ij] = psi_new;
            f.phi[ij] = phi_new;
            f.eta[ij] = eta_new;
        }
    }
    let values = f.eta.iter().map(|e| 1.0 + e).collect();
    Ok(GramField {
        s_times: sx.to_vec(),
        t_times: tw.to_vec(),
        values,
    })
}

/// Engine selection for [`gram_matrix`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GramEngine {
    /// Inner products of truncated signatures at the given level.
    Truncated(usize),
    /// Two-parameter integral-equation solver.
    Integral,
    /// Goursat PDE system (state-space kernels only).
    Pde,
}

/// Pairwise signature-kernel values at the terminal nodes.
pub fn gram_matrix<K>(
    paths: &[PiecewiseLinearPath],
    kernel: &K,
    engine: GramEngine,
) -> Result<Mat, Error>
where
    K: Kernel + ?Sized,
{
    if paths.is_empty() {
        return Err(Error::InvalidInput("need at least one path".into()));
    }
    let dim = paths[0].dim();
    if paths.iter().any(|p| p.dim() != dim) {
        return Err(Error::DimensionMismatch(
            "paths must share one dimension".into(),
        ));
    }
    let n = paths.len();
    let mut out = Mat::zeros(n, n);
    match engine {
        GramEngine::Truncated(level) => {
            let quad = QuadratureConfig::for_kernel(kernel);
            let sigs: Vec<TruncatedTensorSeries> = paths
                .iter()
                .map(|p| diagonal_signature(p, kernel, level, &quad).map(|f| f.terminal().clone()))
                .collect::<Result<_, _>>()?;
            for i in 0..n {
                for j in i..n {
                    let v = inner_product(&sigs[i], &sigs[j])?;
                    out[(i, j)] = v;
                    out[(j, i)] = v;
                }
            }
        }
        GramEngine::Integral => {
            for i in 0..n {
                for j in i..n {
                    let v = gram_entry_integral(&paths[i], kernel, &paths[j], kernel)?.terminal();
                    out[(i, j)] = v;
                    out[(j, i)] = v;
                }
            }
        }
        GramEngine::Pde => {
            return Err(Error::UnsupportedKernel(
                "gram_matrix with the PDE engine needs a KernelSpec; use gram_matrix_pde".into(),
            ));
        }
    }
    Ok(out)
}

/// PDE-engine variant of [`gram_matrix`] (state-space kernels).
pub fn gram_matrix_pde(paths: &[PiecewiseLinearPath], kernel: &KernelSpec) -> Result<Mat, Error> {
    if paths.is_empty() {
        return Err(Error::InvalidInput("need at least one path".into()));
    }
    let n = paths.len();
    let mut out = Mat::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = gram_entry_pde_exp(&paths[i], &paths[j], kernel)?.terminal();
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    Ok(out)
}

/// Smallest eigenvalue, for positive-semidefiniteness checks.
pub fn min_eigenvalue(gram: &Mat) -> f64 {
    sym_eigenvalues(gram)[0]
}
