//! Small dense linear algebra: matrices, least squares, eigenvalues, expm.
//!
//! Everything here operates on modest sizes (feature counts, state-space
//! dimensions), so plain row-major storage and textbook algorithms are the
//! right tool. The least-squares path streams rows through a Householder QR
//! so regression never materializes the full observation matrix twice.

use crate::error::Error;
use crate::math::{fabs, sqrt};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, Error> {
        if rows.is_empty() {
            return Err(Error::InvalidInput("matrix needs at least one row".into()));
        }
        let cols = rows[0].len();
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            data.extend_from_slice(r);
        }
        Ok(Mat {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, Error> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "expected {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Mat { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Mat {
        let mut out = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
    }

    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    /// `self * v` for a column vector `v`.
    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "matvec shape mismatch");
        let mut out = vec![0.0; self.rows];
        for i in 0..self.rows {
            let row = self.row(i);
            let mut acc = 0.0;
            for (a, b) in row.iter().zip(v.iter()) {
                acc += a * b;
            }
            out[i] = acc;
        }
        out
    }

    pub fn scale(&self, c: f64) -> Mat {
        let mut out = self.clone();
        for x in &mut out.data {
            *x *= c;
        }
        out
    }

    pub fn add(&self, other: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (x, y) in out.data.iter_mut().zip(other.data.iter()) {
            *x += y;
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        sqrt(self.data.iter().map(|x| x * x).sum())
    }

    /// Maximum absolute column sum.
    pub fn norm_1(&self) -> f64 {
        let mut best = 0.0f64;
        for j in 0..self.cols {
            let mut s = 0.0;
            for i in 0..self.rows {
                s += fabs(self[(i, j)]);
            }
            if s > best {
                best = s;
            }
        }
        best
    }
}

impl core::ops::Index<(usize, usize)> for Mat {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl core::ops::IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Streaming least-squares accumulator for `min ||A x - b||`.
///
/// Rows of `[A | b]` are pushed in chunks; whenever the buffer doubles the
/// working set it is re-triangularized with Householder reflections, so the
/// memory footprint stays at O(cols^2) regardless of the number of rows.
/// `solve` returns the minimum-norm solution (rank decided by SVD of the
/// final triangle), which covers both regularized and rank-deficient fits.
pub struct LstsqAccumulator {
    ncols: usize,
    width: usize,
    buf: Vec<f64>,
    nrows: usize,
    pushed: usize,
}

impl LstsqAccumulator {
    pub fn new(ncols: usize) -> Self {
        let width = ncols + 1;
        LstsqAccumulator {
            ncols,
            width,
            buf: Vec::new(),
            nrows: 0,
            pushed: 0,
        }
    }

    /// Push one observation row `a` with target `b`.
    pub fn push_row(&mut self, a: &[f64], b: f64) {
        assert_eq!(a.len(), self.ncols, "row width mismatch");
        self.buf.extend_from_slice(a);
        self.buf.push(b);
        self.nrows += 1;
        self.pushed += 1;
        if self.nrows >= 3 * self.width {
            self.compress();
        }
    }

    /// Number of observation rows pushed so far.
    pub fn observations(&self) -> usize {
        self.pushed
    }

    fn compress(&mut self) {
        householder_triangularize(&mut self.buf, self.nrows, self.width);
        let keep = self.nrows.min(self.width);
        self.buf.truncate(keep * self.width);
        self.nrows = keep;
    }

    /// Minimum-norm least-squares solution.
    pub fn solve(&mut self) -> Result<Vec<f64>, Error> {
        if self.pushed == 0 {
            return Err(Error::InvalidInput("no observation rows".into()));
        }
        self.compress();
        // Working triangle is [R | z]; solve min ||R x - z|| in the min-norm sense.
        let n = self.ncols;
        let m = self.nrows.min(self.width);
        let mut r = Mat::zeros(m.max(n), n);
        let mut z = vec![0.0; m.max(n)];
        for i in 0..m {
            for j in 0..n {
                r[(i, j)] = self.buf[i * self.width + j];
            }
            z[i] = self.buf[i * self.width + n];
        }
        min_norm_lstsq_small(&r, &z)
    }
}

/// In-place Householder triangularization of an `nrows x width` buffer.
fn householder_triangularize(buf: &mut [f64], nrows: usize, width: usize) {
    let steps = nrows.min(width);
    for k in 0..steps {
        // Build the reflector for column k over rows k..nrows.
        let mut norm2 = 0.0;
        for i in k..nrows {
            let v = buf[i * width + k];
            norm2 += v * v;
        }
        if norm2 == 0.0 {
            continue;
        }
        let alpha = sqrt(norm2);
        let akk = buf[k * width + k];
        let alpha = if akk > 0.0 { -alpha } else { alpha };
        // v = x - alpha e1, applied implicitly: store v in the column.
        buf[k * width + k] = akk - alpha;
        let mut vnorm2 = 0.0;
        for i in k..nrows {
            let v = buf[i * width + k];
            vnorm2 += v * v;
        }
        if vnorm2 == 0.0 {
            buf[k * width + k] = alpha;
            continue;
        }
        for j in (k + 1)..width {
            let mut dot = 0.0;
            for i in k..nrows {
                dot += buf[i * width + k] * buf[i * width + j];
            }
            let c = 2.0 * dot / vnorm2;
            for i in k..nrows {
                buf[i * width + j] -= c * buf[i * width + k];
            }
        }
        buf[k * width + k] = alpha;
        for i in (k + 1)..nrows {
            buf[i * width + k] = 0.0;
        }
    }
}

/// Minimum-norm solution of a small dense least-squares problem via Jacobi SVD.
pub fn min_norm_lstsq_small(a: &Mat, b: &[f64]) -> Result<Vec<f64>, Error> {
    let (u, sigma, v) = svd_jacobi(a);
    let smax = sigma.iter().cloned().fold(0.0f64, f64::max);
    let tol = smax * (a.rows().max(a.cols()) as f64) * f64::EPSILON * 8.0;
    let n = a.cols();
    let mut x = vec![0.0; n];
    for (k, &s) in sigma.iter().enumerate() {
        if s <= tol {
            continue;
        }
        let mut ub = 0.0;
        for i in 0..a.rows() {
            ub += u[(i, k)] * b[i];
        }
        let c = ub / s;
        for j in 0..n {
            x[j] += c * v[(j, k)];
        }
    }
    Ok(x)
}

/// One-sided Jacobi SVD of a rows >= cols matrix: `a = U diag(sigma) V^T`.
///
/// Returns thin `U` (rows x cols), singular values, and `V` (cols x cols).
pub fn svd_jacobi(a: &Mat) -> (Mat, Vec<f64>, Mat) {
    let tall = a.rows() >= a.cols();
    let work = if tall { a.clone() } else { a.transpose() };
    let (m, n) = (work.rows(), work.cols());
    let mut g = work;
    let mut v = Mat::identity(n);
    let eps = 1e-14;
    for _sweep in 0..60 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                let mut app = 0.0;
                let mut aqq = 0.0;
                let mut apq = 0.0;
                for i in 0..m {
                    let gp = g[(i, p)];
                    let gq = g[(i, q)];
                    app += gp * gp;
                    aqq += gq * gq;
                    apq += gp * gq;
                }
                if fabs(apq) <= eps * sqrt(app * aqq) || apq == 0.0 {
                    continue;
                }
                off = off.max(fabs(apq) / sqrt(app * aqq));
                let tau = (aqq - app) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + sqrt(1.0 + tau * tau))
                } else {
                    -1.0 / (-tau + sqrt(1.0 + tau * tau))
                };
                let c = 1.0 / sqrt(1.0 + t * t);
                let s = c * t;
                for i in 0..m {
                    let gp = g[(i, p)];
                    let gq = g[(i, q)];
                    g[(i, p)] = c * gp - s * gq;
                    g[(i, q)] = s * gp + c * gq;
                }
                for i in 0..n {
                    let vp = v[(i, p)];
                    let vq = v[(i, q)];
                    v[(i, p)] = c * vp - s * vq;
                    v[(i, q)] = s * vp + c * vq;
                }
            }
        }
        if off < eps {
            break;
        }
    }
    let mut sigma = vec![0.0; n];
    let mut u = Mat::zeros(m, n);
    for j in 0..n {
        let mut norm2 = 0.0;
        for i in 0..m {
            norm2 += g[(i, j)] * g[(i, j)];
        }
        let s = sqrt(norm2);
        sigma[j] = s;
        if s > 0.0 {
            for i in 0..m {
                u[(i, j)] = g[(i, j)] / s;
            }
        }
    }
    if tall {
        (u, sigma, v)
    } else {
        // a = (work)^T = V diag U^T
        (v, sigma, u)
    }
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn sym_eigenvalues(a: &Mat) -> Vec<f64> {
    assert_eq!(
        a.rows(),
        a.cols(),
        "symmetric eigensolver needs a square matrix"
    );
    let n = a.rows();
    let mut m = a.clone();
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[(p, q)] * m[(p, q)];
            }
        }
        if off < 1e-26 * (1.0 + m.frobenius_norm()) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if fabs(apq) < 1e-300 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + sqrt(1.0 + theta * theta))
                } else {
                    -1.0 / (-theta + sqrt(1.0 + theta * theta))
                };
                let c = 1.0 / sqrt(1.0 + t * t);
                let s = c * t;
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
    eig.sort_by(|a, b| a.partial_cmp(b).unwrap());
    eig
}

/// Matrix exponential by scaling and squaring with a Pade(13,13) approximant.
pub fn expm(a: &Mat) -> Mat {
    assert_eq!(a.rows(), a.cols(), "expm needs a square matrix");
    let n = a.rows();
    if n == 0 {
        return Mat::zeros(0, 0);
    }
    if n == 1 {
        let mut out = Mat::zeros(1, 1);
        out[(0, 0)] = crate::math::exp(a[(0, 0)]);
        return out;
    }
    const THETA_13: f64 = 5.371920351148152;
    let norm = a.norm_1();
    let mut squarings = 0u32;
    let mut scaled = a.clone();
    if norm > THETA_13 {
        squarings = libm::ceil(libm::log2(norm / THETA_13)) as u32;
        scaled = a.scale(libm::exp2(-(squarings as f64)));
    }
    let mut result = pade13(&scaled);
    for _ in 0..squarings {
        result = result.matmul(&result);
    }
    result
}

fn pade13(a: &Mat) -> Mat {
    const B: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];
    let n = a.rows();
    let id = Mat::identity(n);
    let a2 = a.matmul(a);
    let a4 = a2.matmul(&a2);
    let a6 = a4.matmul(&a2);
    // U = A (A6 (b13 A6 + b11 A4 + b9 A2) + b7 A6 + b5 A4 + b3 A2 + b1 I)
    let inner_u = a6.scale(B[13]).add(&a4.scale(B[11])).add(&a2.scale(B[9]));
    let u = a.matmul(
        &a6.matmul(&inner_u)
            .add(&a6.scale(B[7]))
            .add(&a4.scale(B[5]))
            .add(&a2.scale(B[3]))
            .add(&id.scale(B[1])),
    );
    let inner_v = a6.scale(B[12]).add(&a4.scale(B[10])).add(&a2.scale(B[8]));
    let v = a6
        .matmul(&inner_v)
        .add(&a6.scale(B[6]))
        .add(&a4.scale(B[4]))
        .add(&a2.scale(B[2]))
        .add(&id.scale(B[0]));
    // Solve (V - U) X = (V + U)
    let lhs = v.add(&u.scale(-1.0));
    let rhs = v.add(&u);
    solve_dense(&lhs, &rhs)
}

/// phi1(A) = A^{-1} (e^A - I), computed via the exponential of the
/// augmented block matrix so singular `A` (e.g. zero rows) needs no
/// special casing.
pub fn phi1(a: &Mat) -> Mat {
    let n = a.rows();
    let mut aug = Mat::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            aug[(i, j)] = a[(i, j)];
        }
        aug[(i, n + i)] = 1.0;
    }
    let e = expm(&aug);
    let mut out = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            out[(i, j)] = e[(i, n + j)];
        }
    }
    out
}

/// Gaussian elimination with partial pivoting: solves `A X = B`.
fn solve_dense(a: &Mat, b: &Mat) -> Mat {
    let n = a.rows();
    let m = b.cols();
    let mut lu = a.clone();
    let mut x = b.clone();
    for k in 0..n {
        let mut piv = k;
        let mut best = fabs(lu[(k, k)]);
        for i in (k + 1)..n {
            let v = fabs(lu[(i, k)]);
            if v > best {
                best = v;
                piv = i;
            }
        }
        if piv != k {
            for j in 0..n {
                let tmp = lu[(k, j)];
                lu[(k, j)] = lu[(piv, j)];
                lu[(piv, j)] = tmp;
            }
            for j in 0..m {
                let tmp = x[(k, j)];
                x[(k, j)] = x[(piv, j)];
                x[(piv, j)] = tmp;
            }
        }
        let d = lu[(k, k)];
        for i in (k + 1)..n {
            let f = lu[(i, k)] / d;
            if f == 0.0 {
                continue;
            }
            for j in k..n {
                lu[(i, j)] -= f * lu[(k, j)];
            }
            for j in 0..m {
                x[(i, j)] -= f * x[(k, j)];
            }
        }
    }
    for k in (0..n).rev() {
        for j in 0..m {
            let mut acc = x[(k, j)];
            for i in (k + 1)..n {
                acc -= lu[(k, i)] * x[(i, j)];
            }
            x[(k, j)] = acc / lu[(k, k)];
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn lstsq_exact_square_system() {
        let mut acc = LstsqAccumulator::new(2);
        acc.push_row(&[1.0, 0.0], 3.0);
        acc.push_row(&[1.0, 1.0], 5.0);
        let x = acc.solve().unwrap();
        assert_relative_eq!(x[0], 3.0, epsilon = 1e-12);
        assert_relative_eq!(x[1], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn lstsq_overdetermined_matches_normal_equations() {
        // y = 1 + 2 t fitted through noisy-free samples.
        let mut acc = LstsqAccumulator::new(2);
        for i in 0..500 {
            let t = i as f64 * 0.01;
            acc.push_row(&[1.0, t], 1.0 + 2.0 * t);
        }
        let x = acc.solve().unwrap();
        assert_relative_eq!(x[0], 1.0, epsilon = 1e-10);
        assert_relative_eq!(x[1], 2.0, epsilon = 1e-10);
    }

    #[test]
    fn lstsq_rank_deficient_min_norm() {
        // Columns identical: solution should split the weight evenly.
        let mut acc = LstsqAccumulator::new(2);
        for _ in 0..10 {
            acc.push_row(&[1.0, 1.0], 2.0);
        }
        let x = acc.solve().unwrap();
        assert_relative_eq!(x[0], 1.0, epsilon = 1e-10);
        assert_relative_eq!(x[1], 1.0, epsilon = 1e-10);
    }

    #[test]
    fn svd_recovers_diagonal() {
        let a = Mat::from_rows(&[vec![3.0, 0.0], vec![0.0, -2.0], vec![0.0, 0.0]]).unwrap();
        let (_u, s, _v) = svd_jacobi(&a);
        let mut s = s;
        s.sort_by(|a, b| b.partial_cmp(a).unwrap());
        assert_relative_eq!(s[0], 3.0, epsilon = 1e-12);
        assert_relative_eq!(s[1], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn sym_eigenvalues_2x2() {
        let a = Mat::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let eig = sym_eigenvalues(&a);
        assert_relative_eq!(eig[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(eig[1], 3.0, epsilon = 1e-12);
    }

    #[test]
    fn expm_matches_reference() {
        // Reference values from a converged Taylor series.
        let a = Mat::from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]]).unwrap();
        let e = expm(&a);
        // exp of a rotation generator is a rotation matrix.
        assert_relative_eq!(e[(0, 0)], libm::cos(1.0), epsilon = 1e-13);
        assert_relative_eq!(e[(0, 1)], libm::sin(1.0), epsilon = 1e-13);
        assert_relative_eq!(e[(1, 0)], -libm::sin(1.0), epsilon = 1e-13);

        // Stiff diagonal case relies on scaling/squaring.
        let d = Mat::from_rows(&[vec![-40.0, 0.0], vec![0.0, -0.1]]).unwrap();
        let ed = expm(&d);
        assert_relative_eq!(ed[(0, 0)], crate::math::exp(-40.0), max_relative = 1e-11);
        assert_relative_eq!(ed[(1, 1)], crate::math::exp(-0.1), max_relative = 1e-13);
    }

    #[test]
    fn phi1_zero_matrix_is_identity() {
        let z = Mat::zeros(2, 2);
        let p = phi1(&z);
        assert_relative_eq!(p[(0, 0)], 1.0, epsilon = 1e-13);
        assert_relative_eq!(p[(0, 1)], 0.0, epsilon = 1e-13);
    }

    #[test]
    fn phi1_scalar_value() {
        let mut a = Mat::zeros(1, 1);
        a[(0, 0)] = -2.0;
        let p = phi1(&a);
        // (e^{-2} - 1)/(-2)
        assert_relative_eq!(
            p[(0, 0)],
            (crate::math::exp(-2.0) - 1.0) / -2.0,
            epsilon = 1e-13
        );
    }
}
