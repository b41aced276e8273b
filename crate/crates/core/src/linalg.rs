//! Small dense linear algebra for dimensions up to [`MAX_DIM`].
//!
//! Everything here works on stack-allocated matrices. The centerpiece is
//! [`graded_svd`], a one-sided Jacobi SVD of `B · diag(exp(s))` that never
//! forms the exponentials, so products of thousands of Jacobians can be
//! re-factored without overflow.

use std::fmt;
use std::ops::{Index, IndexMut, Mul};

pub const MAX_DIM: usize = 4;

const JACOBI_TOL: f64 = 1e-15;
const JACOBI_MAX_SWEEPS: usize = 60;

/// Row-major matrix with at most `MAX_DIM` rows and columns.
#[derive(Clone, Copy, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: [f64; MAX_DIM * MAX_DIM],
}

impl fmt::Debug for Mat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<Vec<f64>> = (0..self.rows).map(|i| self.row(i)).collect();
        f.debug_struct("Mat").field("rows", &rows).finish()
    }
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(
            rows <= MAX_DIM && cols <= MAX_DIM,
            "matrix {rows}x{cols} exceeds {MAX_DIM}x{MAX_DIM}"
        );
        Mat {
            rows,
            cols,
            data: [0.0; MAX_DIM * MAX_DIM],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut m = Mat::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    /// Builds a matrix from equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let n = rows.len();
        let c = rows.first().map_or(0, |r| r.as_ref().len());
        let mut m = Mat::zeros(n, c);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            assert_eq!(r.len(), c, "ragged rows");
            for (j, v) in r.iter().enumerate() {
                m[(i, j)] = *v;
            }
        }
        m
    }

    /// Builds a `d × k` matrix whose columns are the given vectors.
    pub fn from_columns<C: AsRef<[f64]>>(cols: &[C]) -> Self {
        let k = cols.len();
        let d = cols.first().map_or(0, |c| c.as_ref().len());
        let mut m = Mat::zeros(d, k);
        for (j, c) in cols.iter().enumerate() {
            m.set_col(j, c.as_ref());
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.cols).map(|j| self[(i, j)]).collect()
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_col(&mut self, j: usize, v: &[f64]) {
        assert_eq!(v.len(), self.rows);
        for (i, x) in v.iter().enumerate() {
            self[(i, j)] = *x;
        }
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i)).collect()
    }

    pub fn transpose(&self) -> Mat {
        Mat::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self[(i, j)] * v[j]).sum())
            .collect()
    }

    /// Selects a contiguous range of columns.
    pub fn columns(&self, start: usize, count: usize) -> Mat {
        Mat::from_fn(self.rows, count, |i, j| self[(i, start + j)])
    }

    /// Horizontal concatenation.
    pub fn hcat(&self, other: &Mat) -> Mat {
        assert_eq!(self.rows, other.rows);
        Mat::from_fn(self.rows, self.cols + other.cols, |i, j| {
            if j < self.cols {
                self[(i, j)]
            } else {
                other[(i, j - self.cols)]
            }
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.data[..]
            .iter()
            .take(MAX_DIM * self.rows)
            .fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        (0..self.rows).all(|i| (0..self.cols).all(|j| self[(i, j)].is_finite()))
    }

    /// `max |MᵀM − I|` over entries.
    pub fn orthonormality_defect(&self) -> f64 {
        let g = self.transpose() * *self;
        let mut worst: f64 = 0.0;
        for i in 0..g.rows {
            for j in 0..g.cols {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g[(i, j)] - target).abs());
            }
        }
        worst
    }

    pub fn determinant(&self) -> f64 {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut a = *self;
        let mut det = 1.0;
        for k in 0..n {
            let p = (k..n)
                .max_by(|&x, &y| a[(x, k)].abs().total_cmp(&a[(y, k)].abs()))
                .unwrap_or(k);
            if a[(p, k)] == 0.0 {
                return 0.0;
            }
            if p != k {
                a.swap_rows(p, k);
                det = -det;
            }
            det *= a[(k, k)];
            for i in k + 1..n {
                let f = a[(i, k)] / a[(k, k)];
                for j in k..n {
                    a[(i, j)] -= f * a[(k, j)];
                }
            }
        }
        det
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        for j in 0..self.cols {
            self.data.swap(a * MAX_DIM + j, b * MAX_DIM + j);
        }
    }

    /// Gauss-Jordan inverse with partial pivoting; `None` when singular.
    pub fn inverse(&self) -> Option<Mat> {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut a = *self;
        let mut inv = Mat::identity(n);
        for k in 0..n {
            let p = (k..n).max_by(|&x, &y| a[(x, k)].abs().total_cmp(&a[(y, k)].abs()))?;
            if a[(p, k)] == 0.0 || !a[(p, k)].is_finite() {
                return None;
            }
            a.swap_rows(p, k);
            inv.swap_rows(p, k);
            let piv = a[(k, k)];
            for j in 0..n {
                a[(k, j)] /= piv;
                inv[(k, j)] /= piv;
            }
            for i in 0..n {
                if i != k {
                    let f = a[(i, k)];
                    if f != 0.0 {
                        for j in 0..n {
                            a[(i, j)] -= f * a[(k, j)];
                            inv[(i, j)] -= f * inv[(k, j)];
                        }
                    }
                }
            }
        }
        Some(inv)
    }

    /// Solves `self · x = b` for square `self`.
    pub fn solve(&self, b: &[f64]) -> Option<Vec<f64>> {
        Some(self.inverse()?.mul_vec(b))
    }
}

impl Index<(usize, usize)> for Mat {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * MAX_DIM + j]
    }
}

impl IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * MAX_DIM + j]
    }
}

impl Mul for Mat {
    type Output = Mat;
    fn mul(self, rhs: Mat) -> Mat {
        assert_eq!(self.cols, rhs.rows, "shape mismatch");
        let mut out = Mat::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..rhs.cols {
                    out[(i, j)] += a * rhs[(k, j)];
                }
            }
        }
        out
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    // scaled to avoid overflow for very long vectors
    let scale = a.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    scale
        * a.iter()
            .map(|x| (x / scale) * (x / scale))
            .sum::<f64>()
            .sqrt()
}

/// Thin QR of the columns of `m` by Gram-Schmidt with one
/// re-orthogonalization pass.
///
/// Returns the orthonormal factor and `log |R_jj|` per column. A column that
/// vanishes after projection gets `-inf` and a zero column in `Q`.
pub fn qr_log_diag(m: &Mat) -> (Mat, [f64; MAX_DIM]) {
    let (d, k) = (m.rows(), m.cols());
    let mut q = Mat::zeros(d, k);
    let mut logs = [0.0; MAX_DIM];
    for j in 0..k {
        let mut v = m.col(j);
        let initial = norm(&v);
        for _pass in 0..2 {
            for p in 0..j {
                let qp = q.col(p);
                let c = dot(&qp, &v);
                for (vi, qi) in v.iter_mut().zip(&qp) {
                    *vi -= c * qi;
                }
            }
        }
        let r = norm(&v);
        if r == 0.0 || r <= initial * 1e-300 {
            logs[j] = f64::NEG_INFINITY;
            continue;
        }
        logs[j] = r.ln();
        for vi in v.iter_mut() {
            *vi /= r;
        }
        q.set_col(j, &v);
    }
    (q, logs)
}

/// Orthonormal basis for the column span of `m` (same column count).
pub fn orthonormalize(m: &Mat) -> Mat {
    qr_log_diag(m).0
}

/// Factorization `B · diag(exp(s)) = U · diag(exp(σ)) · Vᵀ` with `σ` sorted
/// descending.
#[derive(Debug, Clone, Copy)]
pub struct GradedSvd {
    /// `d × k`, orthonormal columns.
    pub u: Mat,
    pub log_sigma: [f64; MAX_DIM],
    /// `k × k` orthogonal.
    pub v: Mat,
    pub k: usize,
}

impl GradedSvd {
    pub fn log_singular(&self) -> &[f64] {
        &self.log_sigma[..self.k]
    }
}

/// One-sided (Hestenes) Jacobi SVD of `b · diag(exp(log_scale))`.
///
/// Columns are carried as (unit vector, log length). A rotation between a
/// long column `p` and a short column `q` is parametrized by the length
/// ratio `ρ = exp(c_q − c_p) ≤ 1`, so the short column receives its
/// Gram-Schmidt correction `τ = t/ρ` even when `ρ` underflows. Returns
/// `None` if a column of `b` is zero or non-finite.
pub fn graded_svd(b: &Mat, log_scale: &[f64]) -> Option<GradedSvd> {
    let (d, k) = (b.rows(), b.cols());
    assert_eq!(log_scale.len(), k);
    let mut cols: [[f64; MAX_DIM]; MAX_DIM] = [[0.0; MAX_DIM]; MAX_DIM];
    let mut logs = [0.0; MAX_DIM];
    for j in 0..k {
        let c = b.col(j);
        let n = norm(&c);
        if n == 0.0 || !n.is_finite() || !log_scale[j].is_finite() {
            return None;
        }
        for i in 0..d {
            cols[j][i] = c[i] / n;
        }
        logs[j] = log_scale[j] + n.ln();
    }
    let mut v = Mat::identity(k);

    for _sweep in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..k {
            for j in i + 1..k {
                let (p, q) = if logs[i] >= logs[j] { (i, j) } else { (j, i) };
                let g = dot(&cols[p][..d], &cols[q][..d]);
                if g.abs() <= JACOBI_TOL {
                    continue;
                }
                rotated = true;
                let rho = (logs[q] - logs[p]).exp();
                // both columns are unit length here
                let eta = (rho * rho - 1.0) / (2.0 * g);
                let sign = if eta >= 0.0 { 1.0 } else { -1.0 };
                let tau = 1.0 / (eta + sign * (rho * rho + eta * eta).sqrt());
                let t = rho * tau;
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let mut np = [0.0; MAX_DIM];
                let mut nq = [0.0; MAX_DIM];
                for r in 0..d {
                    np[r] = c * cols[p][r] - s * rho * cols[q][r];
                    nq[r] = c * tau * cols[p][r] + c * cols[q][r];
                }
                let lp = norm(&np[..d]);
                let lq = norm(&nq[..d]);
                if lp == 0.0 || lq == 0.0 {
                    return None;
                }
                for r in 0..d {
                    cols[p][r] = np[r] / lp;
                    cols[q][r] = nq[r] / lq;
                }
                logs[p] += lp.ln();
                logs[q] += lq.ln();
                for r in 0..k {
                    let vp = v[(r, p)];
                    let vq = v[(r, q)];
                    v[(r, p)] = c * vp - s * vq;
                    v[(r, q)] = s * vp + c * vq;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| logs[b].total_cmp(&logs[a]));
    let mut u = Mat::zeros(d, k);
    let mut vs = Mat::zeros(k, k);
    let mut log_sigma = [0.0; MAX_DIM];
    for (dst, &src) in order.iter().enumerate() {
        u.set_col(dst, &cols[src][..d]);
        vs.set_col(dst, &v.col(src));
        log_sigma[dst] = logs[src];
    }
    Some(GradedSvd {
        u,
        log_sigma,
        v: vs,
        k,
    })
}

/// Log singular values of a plain matrix (descending).
pub fn log_singular_values(m: &Mat) -> Option<Vec<f64>> {
    let zeros = [0.0; MAX_DIM];
    graded_svd(m, &zeros[..m.cols()]).map(|s| s.log_singular().to_vec())
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Eigenvalues come back descending with matching eigenvector columns.
pub fn sym_eigen(m: &Mat) -> ([f64; MAX_DIM], Mat) {
    let n = m.rows();
    assert_eq!(n, m.cols());
    let mut a = *m;
    let mut v = Mat::identity(n);
    for _sweep in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        if off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                let t = sign / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a[(y, y)].total_cmp(&a[(x, x)]));
    let mut vals = [0.0; MAX_DIM];
    let mut vecs = Mat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vals[dst] = a[(src, src)];
        vecs.set_col(dst, &v.col(src));
    }
    (vals, vecs)
}

/// Sine of the largest principal angle between the spans of two
/// orthonormal frames of equal width.
pub fn subspace_sin_angle(p: &Mat, q: &Mat) -> f64 {
    assert_eq!(p.cols(), q.cols());
    if p.cols() == 0 {
        return 0.0;
    }
    // residual of q after projecting onto span(p)
    let r = *q + (*p * (p.transpose() * *q)) * -1.0;
    let (vals, _) = sym_eigen(&(r.transpose() * r));
    vals[0].max(0.0).sqrt()
}

impl std::ops::Add for Mat {
    type Output = Mat;
    fn add(self, rhs: Mat) -> Mat {
        assert!(self.rows == rhs.rows && self.cols == rhs.cols);
        Mat::from_fn(self.rows, self.cols, |i, j| self[(i, j)] + rhs[(i, j)])
    }
}

impl Mul<f64> for Mat {
    type Output = Mat;
    fn mul(self, rhs: f64) -> Mat {
        Mat::from_fn(self.rows, self.cols, |i, j| self[(i, j)] * rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reconstruct(svd: &GradedSvd) -> Mat {
        let d = svd.u.rows();
        let sig = Mat::from_fn(svd.k, svd.k, |i, j| {
            if i == j {
                svd.log_sigma[i].exp()
            } else {
                0.0
            }
        });
        let _ = d;
        svd.u * sig * svd.v.transpose()
    }

    #[test]
    fn diagonal_matrix_singular_values() {
        let m = Mat::from_rows(&[[3.0, 0.0], [0.0, 0.5]]);
        let ls = log_singular_values(&m).unwrap();
        assert!((ls[0] - 3.0f64.ln()).abs() < 1e-15);
        assert!((ls[1] - 0.5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn svd_reconstructs_dense_matrix() {
        let m = Mat::from_rows(&[[1.0, 2.0, -0.5], [0.3, -1.0, 4.0], [2.0, 0.1, 0.7]]);
        let svd = graded_svd(&m, &[0.0, 0.0, 0.0]).unwrap();
        let r = reconstruct(&svd);
        for i in 0..3 {
            for j in 0..3 {
                assert!((r[(i, j)] - m[(i, j)]).abs() < 1e-13);
            }
        }
        assert!(svd.u.orthonormality_defect() < 1e-14);
        assert!(svd.v.orthonormality_defect() < 1e-14);
        let sum: f64 = svd.log_singular().iter().sum();
        assert!((sum - m.determinant().abs().ln()).abs() < 1e-13);
    }

    #[test]
    fn graded_svd_survives_huge_scales() {
        // [[2,1],[1,1]] with column scales e^5000 and e^-5000: the small
        // singular value must be recovered through the determinant identity.
        let b = Mat::from_rows(&[[2.0, 1.0], [1.0, 1.0]]);
        let svd = graded_svd(&b, &[5000.0, -5000.0]).unwrap();
        let ls = svd.log_singular();
        let top = 5000.0 + 5f64.sqrt().ln();
        assert!((ls[0] - top).abs() < 1e-12, "{ls:?}");
        assert!((ls[0] + ls[1] - 0.0).abs() < 1e-12, "{ls:?}");
    }

    #[test]
    fn rectangular_frame_singular_values() {
        let m = Mat::from_rows(&[[1.0, 0.0], [0.0, 2.0], [0.0, 0.0]]);
        let ls = log_singular_values(&m).unwrap();
        assert_eq!(ls.len(), 2);
        assert!((ls[0] - 2f64.ln()).abs() < 1e-15);
        assert!(ls[1].abs() < 1e-15);
    }

    #[test]
    fn qr_log_diag_matches_determinant() {
        let m = Mat::from_rows(&[[2.0, 1.0], [1.0, 1.0]]);
        let (q, logs) = qr_log_diag(&m);
        assert!(q.orthonormality_defect() < 1e-15);
        assert!((logs[0] + logs[1]).abs() < 1e-15);
    }

    #[test]
    fn symmetric_eigen_and_angles() {
        let m = Mat::from_rows(&[[2.0, 1.0], [1.0, 2.0]]);
        let (vals, vecs) = sym_eigen(&m);
        assert!((vals[0] - 3.0).abs() < 1e-14 && (vals[1] - 1.0).abs() < 1e-14);
        assert!((vecs[(0, 0)].abs() - 0.5f64.sqrt()).abs() < 1e-14);
        let e1 = Mat::from_columns(&[[1.0, 0.0, 0.0]]);
        let tilted = Mat::from_columns(&[[0.6, 0.8, 0.0]]);
        assert!((subspace_sin_angle(&e1, &tilted) - 0.8).abs() < 1e-14);
        assert_eq!(subspace_sin_angle(&e1, &e1), 0.0);
    }

    #[test]
    fn inverse_and_determinant() {
        let m = Mat::from_rows(&[[2.0, 1.0], [1.0, 1.0]]);
        let inv = m.inverse().unwrap();
        assert_eq!(inv.to_rows(), vec![vec![1.0, -1.0], vec![-1.0, 2.0]]);
        assert!((m.determinant() - 1.0).abs() < 1e-15);
        assert!(Mat::from_rows(&[[1.0, 2.0], [2.0, 4.0]])
            .inverse()
            .is_none());
    }
}
