//! Dense real matrix utilities.
//!
//! Everything downstream works with full (square) orthogonal SVD factors:
//! an `m x n` matrix with `m <= n` decomposes as `R * tdiag(sigma) * P^T`
//! with `R` an `m x m` and `P` an `n x n` orthogonal matrix. Thin factors
//! are never exposed. The other primitives here are diagonal embeddings,
//! norms, Haar-random orthogonal sampling, and a simultaneous block SVD of
//! two matrices whose ranks fit a common `k x k` block.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative threshold below which a singular value is treated as zero.
pub const RANK_REL_TOL: f64 = 1e-9;
/// Absolute fallback threshold used when the leading singular value is zero.
pub const RANK_ABS_TOL: f64 = 1e-12;

/// Dense row-major matrix of `f64` with at least one row and one column.
///
/// All entries are finite; the validated constructors enforce this, and the
/// arithmetic below cannot produce non-finite values from finite desk-scale
/// inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatRepr", into = "MatRepr")]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

/// Wire representation: `{rows, cols, data}` with row-major data.
#[derive(Serialize, Deserialize)]
struct MatRepr {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl From<Mat> for MatRepr {
    fn from(m: Mat) -> Self {
        MatRepr { rows: m.rows, cols: m.cols, data: m.data }
    }
}

impl TryFrom<MatRepr> for Mat {
    type Error = String;
    fn try_from(r: MatRepr) -> std::result::Result<Self, String> {
        Mat::new(r.rows, r.cols, r.data).map_err(|e| e.to_string())
    }
}

impl Mat {
    /// Validated constructor: positive dimensions, matching length, finite entries.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidInput(format!(
                "matrix dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::InvalidInput(format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                data.len()
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput("matrix entries must be finite".into()));
        }
        Ok(Mat { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "zero-dimensional matrix");
        Mat { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Mat::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    /// Rectangular diagonal embedding: `x` along the main diagonal, zeros elsewhere.
    /// Panics unless `x.len() == min(rows, cols)`; the validated public entry
    /// point is [`tilde_diag_embed`].
    pub fn tilde_diag(x: &[f64], rows: usize, cols: usize) -> Self {
        assert_eq!(x.len(), rows.min(cols), "diagonal length mismatch");
        let mut m = Mat::zeros(rows, cols);
        for (i, &v) in x.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Mat {
        Mat::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// Frobenius inner product.
    pub fn dot(&self, other: &Mat) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn norm_fro(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn scale(&self, c: f64) -> Mat {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| c * v).collect() }
    }

    /// Copy of the sub-block with rows `r0..r1` and columns `c0..c1` (half-open).
    pub fn block(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> Mat {
        assert!(r0 < r1 && r1 <= self.rows && c0 < c1 && c1 <= self.cols, "empty or out-of-range block");
        Mat::from_fn(r1 - r0, c1 - c0, |i, j| self[(r0 + i, c0 + j)])
    }

    pub fn set_block(&mut self, r0: usize, c0: usize, b: &Mat) {
        assert!(r0 + b.rows <= self.rows && c0 + b.cols <= self.cols);
        for i in 0..b.rows {
            for j in 0..b.cols {
                self[(r0 + i, c0 + j)] = b[(i, j)];
            }
        }
    }

    pub fn hcat(&self, other: &Mat) -> Mat {
        assert_eq!(self.rows, other.rows);
        let mut m = Mat::zeros(self.rows, self.cols + other.cols);
        m.set_block(0, 0, self);
        m.set_block(0, self.cols, other);
        m
    }

    pub fn vcat(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.cols);
        let mut m = Mat::zeros(self.rows + other.rows, self.cols);
        m.set_block(0, 0, self);
        m.set_block(self.rows, 0, other);
        m
    }

    /// Frobenius norm of the sub-block without materializing it; the range may be empty.
    pub fn block_norm_fro(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> f64 {
        let mut acc = 0.0;
        for i in r0..r1 {
            for j in c0..c1 {
                acc += self[(i, j)] * self[(i, j)];
            }
        }
        acc.sqrt()
    }

    pub(crate) fn to_na(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub(crate) fn from_na(m: &DMatrix<f64>) -> Mat {
        Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }
}

impl std::ops::Index<(usize, usize)> for Mat {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

impl std::ops::Add for &Mat {
    type Output = Mat;
    fn add(self, rhs: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl std::ops::Sub for &Mat {
    type Output = Mat;
    fn sub(self, rhs: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl std::ops::Mul for &Mat {
    type Output = Mat;
    fn mul(self, rhs: &Mat) -> Mat {
        assert_eq!(self.cols, rhs.rows, "matmul dimension mismatch");
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

/// Full singular value decomposition `X = R * tdiag(sigma) * P^T` with
/// square orthogonal `R` (`m x m`) and `P` (`n x n`) and `sigma` descending.
#[derive(Clone, Debug)]
pub struct FullSvd {
    pub r: Mat,
    pub sigma: Vec<f64>,
    pub p: Mat,
}

/// The three matrix norms used throughout: nuclear (sum of singular values),
/// spectral (largest), Frobenius (root of sum of squares).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Norms {
    pub nuclear: f64,
    pub spectral: f64,
    pub frobenius: f64,
}

/// Full SVD of an `m x n` matrix with `m <= n`.
pub fn full_svd(x: &Mat) -> Result<FullSvd> {
    if x.rows() > x.cols() {
        return Err(Error::InvalidInput(format!(
            "full_svd expects rows <= cols, got {}x{}",
            x.rows(),
            x.cols()
        )));
    }
    if !x.as_slice().iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidInput("non-finite entries".into()));
    }
    Ok(svd_any(x))
}

/// SVD of a matrix of any shape; left factor is `rows x rows`, right factor
/// `cols x cols`, `sigma` has `min(rows, cols)` descending entries.
///
/// One-sided Jacobi: slower than bidiagonalization but accurate to high
/// relative precision, which the certification tolerances rely on. All
/// matrices factored here are desk-scale.
pub(crate) fn svd_any(x: &Mat) -> FullSvd {
    if x.rows() >= x.cols() {
        let (u, sigma, v) = jacobi_svd_tall(x);
        FullSvd { r: u, sigma, p: v }
    } else {
        let (u, sigma, v) = jacobi_svd_tall(&x.transpose());
        FullSvd { r: v, sigma, p: u }
    }
}

/// One-sided Jacobi SVD of a matrix with `rows >= cols`: plane rotations on
/// column pairs until all columns are mutually orthogonal. Returns full
/// square frames and descending singular values.
fn jacobi_svd_tall(a: &Mat) -> (Mat, Vec<f64>, Mat) {
    let (m, n) = (a.rows(), a.cols());
    assert!(m >= n);
    let mut b = a.clone();
    let mut v = Mat::identity(n);

    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let mut app = 0.0;
                let mut aqq = 0.0;
                let mut apq = 0.0;
                for i in 0..m {
                    let (bp, bq) = (b[(i, p)], b[(i, q)]);
                    app += bp * bp;
                    aqq += bq * bq;
                    apq += bp * bq;
                }
                if apq.abs() <= 1e-15 * (app * aqq).sqrt() || apq == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (aqq - app) / (2.0 * apq);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                for i in 0..m {
                    let (bp, bq) = (b[(i, p)], b[(i, q)]);
                    b[(i, p)] = cs * bp - sn * bq;
                    b[(i, q)] = sn * bp + cs * bq;
                }
                for i in 0..n {
                    let (vp, vq) = (v[(i, p)], v[(i, q)]);
                    v[(i, p)] = cs * vp - sn * vq;
                    v[(i, q)] = sn * vp + cs * vq;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<f64> = (0..n)
        .map(|j| (0..m).map(|i| b[(i, j)] * b[(i, j)]).sum::<f64>().sqrt())
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap());
    let sigma: Vec<f64> = order.iter().map(|&j| norms[j]).collect();

    let lead = sigma.first().copied().unwrap_or(0.0);
    let col_tol = 1e-14 * lead;
    let u_lead: Vec<Vec<f64>> = order
        .iter()
        .filter(|&&j| norms[j] > col_tol && norms[j] > 0.0)
        .map(|&j| (0..m).map(|i| b[(i, j)] / norms[j]).collect())
        .collect();
    let u = complete_orthonormal_columns(u_lead, m);
    let v_sorted = Mat::from_fn(n, n, |i, j| v[(i, order[j])]);
    (u, sigma, v_sorted)
}

/// Extend a (possibly empty) list of orthonormal columns to a square
/// orthogonal matrix by twice-iterated Gram-Schmidt against the standard
/// basis.
pub(crate) fn complete_orthonormal_columns(mut basis: Vec<Vec<f64>>, dim: usize) -> Mat {
    assert!(basis.len() <= dim);
    let mut e = 0;
    while basis.len() < dim {
        assert!(e < dim, "failed to complete orthonormal basis");
        let mut w = vec![0.0; dim];
        w[e] = 1.0;
        for _ in 0..2 {
            for b in &basis {
                let proj: f64 = w.iter().zip(b).map(|(a, c)| a * c).sum();
                for (wi, bi) in w.iter_mut().zip(b) {
                    *wi -= proj * bi;
                }
            }
        }
        let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1e-8 {
            for wi in &mut w {
                *wi /= norm;
            }
            basis.push(w);
        }
        e += 1;
    }
    Mat::from_fn(dim, dim, |i, j| basis[j][i])
}

/// Index where singular values drop below the rank threshold
/// (`RANK_REL_TOL` relative to the leading value, `RANK_ABS_TOL` absolute
/// when the leading value vanishes).
pub fn numerical_rank(sigma: &[f64]) -> usize {
    let lead = sigma.first().copied().unwrap_or(0.0);
    let tol = if lead > 0.0 { RANK_REL_TOL * lead } else { RANK_ABS_TOL };
    let tol = tol.max(RANK_ABS_TOL);
    sigma.iter().take_while(|&&s| s > tol).count()
}

/// Rectangular diagonal embedding of `x` into an `m x n` matrix.
pub fn tilde_diag_embed(x: &[f64], m: usize, n: usize) -> Result<Mat> {
    if m == 0 || n == 0 {
        return Err(Error::InvalidInput("dimensions must be positive".into()));
    }
    if x.len() != m.min(n) {
        return Err(Error::InvalidInput(format!(
            "diagonal length {} does not match min({m},{n})",
            x.len()
        )));
    }
    if !x.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidInput("non-finite entries".into()));
    }
    Ok(Mat::tilde_diag(x, m, n))
}

/// Main-diagonal of the leading square block, the adjoint of [`tilde_diag_embed`].
pub fn tilde_diag_extract(x: &Mat) -> Vec<f64> {
    (0..x.rows().min(x.cols())).map(|i| x[(i, i)]).collect()
}

/// Haar-distributed random orthogonal `k x k` matrix: QR of a standard
/// Gaussian matrix with the sign of each diagonal entry of `R` folded into
/// the corresponding column of `Q`. Deterministic in `(k, seed)`.
pub fn random_orthogonal(k: usize, seed: u64) -> Result<Mat> {
    if k < 1 {
        return Err(Error::InvalidInput("order must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::from_fn(k, k, |_, _| standard_normal(&mut rng));
    let qr = g.qr();
    let q = qr.q();
    let r = qr.r();
    let mut out = Mat::from_na(&q);
    for j in 0..k {
        if r[(j, j)] < 0.0 {
            for i in 0..k {
                out[(i, j)] = -out[(i, j)];
            }
        }
    }
    Ok(out)
}

pub(crate) fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; rejects u1 == 0.
    loop {
        let u1: f64 = rng.random();
        if u1 > 1e-300 {
            let u2: f64 = rng.random();
            return (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
        }
    }
}

/// Gaussian matrix with iid standard normal entries, deterministic in the rng.
pub(crate) fn gaussian_mat(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Mat {
    Mat::from_fn(rows, cols, |_, _| standard_normal(rng))
}

/// Nuclear, spectral and Frobenius norms of `x`, computed from one SVD.
pub fn norms(x: &Mat) -> Norms {
    let sigma = svd_any(x).sigma;
    Norms {
        nuclear: sigma.iter().sum(),
        spectral: sigma.first().copied().unwrap_or(0.0),
        frobenius: sigma.iter().map(|s| s * s).sum::<f64>().sqrt(),
    }
}

/// Spectral norm without the full factorization paraphernalia.
pub fn spectral_norm(x: &Mat) -> f64 {
    norms(x).spectral
}

/// Simultaneous block SVD: orthogonal `U` (`m x m`) and `V` (`n x n`) such
/// that `U^T A V = tdiag(sigma(A))` while `U^T B V` is supported on its
/// leading `k x k` block, returned as `B1`.
///
/// Requires `rank(A) + rank(B) <= k <= min(m, n)` (ranks at the module's
/// singular-value threshold).
pub fn simultaneous_block_svd(a: &Mat, b: &Mat, k: usize) -> Result<(Mat, Mat, Mat)> {
    let (m, n) = (a.rows(), a.cols());
    if (b.rows(), b.cols()) != (m, n) {
        return Err(Error::InvalidInput("A and B must have equal dimensions".into()));
    }
    let rank_a = numerical_rank(&svd_any(a).sigma);
    let rank_b = numerical_rank(&svd_any(b).sigma);
    if rank_a + rank_b > k || k > m.min(n) || k == 0 {
        return Err(Error::RankBudgetExceeded(format!(
            "need rank(A)+rank(B) <= k <= min(m,n); got ranks {rank_a}+{rank_b}, k={k}, min={}",
            m.min(n)
        )));
    }

    // Left frame from the row space of [A B], right frame from the column
    // space of [A; B]; both confine A and B to a leading k x k block.
    let u1 = svd_any(&a.hcat(b)).r;
    let v2 = svd_any(&a.vcat(b)).p;

    let a_rot = &(&u1.transpose() * a) * &v2;
    let a1 = a_rot.block(0, k, 0, k);
    let inner = svd_any(&a1);

    let mut u3 = Mat::identity(m);
    u3.set_block(0, 0, &inner.r);
    let mut v3 = Mat::identity(n);
    v3.set_block(0, 0, &inner.p);

    let u = &u1 * &u3;
    let v = &v2 * &v3;
    let b_rot = &(&u.transpose() * b) * &v;
    let b1 = b_rot.block(0, k, 0, k);
    Ok((u, v, b1))
}

/// Symmetric eigendecomposition of a square symmetric matrix; eigenvalues
/// ascending, columns of the second component are the matching eigenvectors.
///
/// Uses the library tridiagonalization path, verifies the residual
/// `A Q - Q diag(vals)`, and falls back to a Jacobi sweep solver when the
/// fast path is off.
pub(crate) fn symmetric_eigen(a: &Mat) -> (Vec<f64>, Mat) {
    assert_eq!(a.rows(), a.cols());
    let n = a.rows();
    let eig = nalgebra::SymmetricEigen::new(a.to_na());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap());
    let vals: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = Mat::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);

    let scale = 1.0 + a.max_abs();
    let residual = {
        let av = a * &vecs;
        let mut worst: f64 = 0.0;
        for j in 0..n {
            for i in 0..n {
                worst = worst.max((av[(i, j)] - vals[j] * vecs[(i, j)]).abs());
            }
        }
        worst
    };
    let orth = (&(&vecs.transpose() * &vecs) - &Mat::identity(n)).max_abs();
    if residual <= 1e-10 * scale && orth <= 1e-10 {
        (vals, vecs)
    } else {
        jacobi_symmetric_eigen(a)
    }
}

/// Cyclic Jacobi eigensolver for symmetric matrices; eigenvalues ascending.
fn jacobi_symmetric_eigen(a: &Mat) -> (Vec<f64>, Mat) {
    let n = a.rows();
    let mut m = (a + &a.transpose()).scale(0.5);
    let mut q = Mat::identity(n);
    let scale = 1.0 + m.max_abs();
    for _sweep in 0..100 {
        let mut rotated = false;
        for p in 0..n {
            for r_idx in (p + 1)..n {
                let apq = m[(p, r_idx)];
                if apq.abs() <= 1e-15 * scale {
                    continue;
                }
                rotated = true;
                let theta = (m[(r_idx, r_idx)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..n {
                    let (mip, miq) = (m[(i, p)], m[(i, r_idx)]);
                    m[(i, p)] = c * mip - s * miq;
                    m[(i, r_idx)] = s * mip + c * miq;
                }
                for j in 0..n {
                    let (mpj, mqj) = (m[(p, j)], m[(r_idx, j)]);
                    m[(p, j)] = c * mpj - s * mqj;
                    m[(r_idx, j)] = s * mpj + c * mqj;
                }
                for i in 0..n {
                    let (qip, qiq) = (q[(i, p)], q[(i, r_idx)]);
                    q[(i, p)] = c * qip - s * qiq;
                    q[(i, r_idx)] = s * qip + c * qiq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].partial_cmp(&m[(j, j)]).unwrap());
    let vals: Vec<f64> = order.iter().map(|&i| m[(i, i)]).collect();
    let vecs = Mat::from_fn(n, n, |i, j| q[(i, order[j])]);
    (vals, vecs)
}

/// Smallest eigenvalue and a matching unit eigenvector of a symmetric matrix.
pub(crate) fn min_eigenpair(a: &Mat) -> (f64, Vec<f64>) {
    let (vals, vecs) = symmetric_eigen(a);
    let v = (0..a.rows()).map(|i| vecs[(i, 0)]).collect();
    (vals[0], v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn orthogonality_residual(q: &Mat) -> f64 {
        let n = q.cols();
        (&(&q.transpose() * q) - &Mat::identity(n)).max_abs()
    }

    fn reconstruction_error(x: &Mat, f: &FullSvd) -> f64 {
        let rebuilt = &(&f.r * &Mat::tilde_diag(&f.sigma, x.rows(), x.cols())) * &f.p.transpose();
        (&rebuilt - x).norm_fro()
    }

    #[test]
    fn full_svd_of_diagonal_matrix() {
        let x = Mat::new(2, 2, vec![3.0, 0.0, 0.0, 1.0]).unwrap();
        let f = full_svd(&x).unwrap();
        assert!((f.sigma[0] - 3.0).abs() < 1e-12 && (f.sigma[1] - 1.0).abs() < 1e-12);
        // Frames are identity up to signs.
        for i in 0..2 {
            assert!((f.r[(i, i)].abs() - 1.0).abs() < 1e-12);
            assert!((f.p[(i, i)].abs() - 1.0).abs() < 1e-12);
        }
        assert!(reconstruction_error(&x, &f) < 1e-12);
    }

    #[test]
    fn full_svd_of_zero_matrix() {
        let x = Mat::zeros(2, 3);
        let f = full_svd(&x).unwrap();
        assert_eq!(f.sigma, vec![0.0, 0.0]);
        assert!(orthogonality_residual(&f.r) < 1e-10);
        assert!(orthogonality_residual(&f.p) < 1e-10);
    }

    #[test]
    fn full_svd_reconstructs_random_rectangular() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = gaussian_mat(3, 4, &mut rng);
        let f = full_svd(&x).unwrap();
        assert!(reconstruction_error(&x, &f) < 1e-9 * (1.0 + x.norm_fro()));
        assert!(orthogonality_residual(&f.r) < 1e-10);
        assert!(orthogonality_residual(&f.p) < 1e-10);
    }

    #[test]
    fn full_svd_rejects_tall_and_nonfinite() {
        let tall = Mat::zeros(3, 2);
        assert!(matches!(full_svd(&tall), Err(Error::InvalidInput(_))));
        assert!(Mat::new(1, 1, vec![f64::NAN]).is_err());
    }

    #[test]
    fn full_svd_handles_degenerate_spectra() {
        // Rank-deficient and repeated-singular-value inputs, conjugated by
        // random frames.
        for seed in 0..40u64 {
            let (m, n) = (4, 5);
            let spectra: [&[f64]; 4] = [
                &[2.0, 2.0, 2.0, 2.0],
                &[3.0, 3.0, 1e-9, 0.0],
                &[1.0, 0.0, 0.0, 0.0],
                &[5.0, 5.0, 5.0, 1e-14],
            ];
            let sigma = spectra[seed as usize % spectra.len()];
            let r = random_orthogonal(m, 3 * seed + 1).unwrap();
            let p = random_orthogonal(n, 3 * seed + 2).unwrap();
            let x = &(&r * &Mat::tilde_diag(sigma, m, n)) * &p.transpose();
            let f = full_svd(&x).unwrap();
            assert!(reconstruction_error(&x, &f) < 1e-12 * (1.0 + x.norm_fro()));
            assert!(orthogonality_residual(&f.r) < 1e-12);
            assert!(orthogonality_residual(&f.p) < 1e-12);
            for (got, want) in f.sigma.iter().zip(sigma) {
                assert!((got - want).abs() < 1e-12 * (1.0 + want));
            }
        }
    }

    #[test]
    fn full_svd_invariants_over_many_seeds() {
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = 1 + (seed as usize % 5);
            let n = m + (seed as usize % 3);
            let x = gaussian_mat(m, n, &mut rng);
            let f = full_svd(&x).unwrap();
            assert!(reconstruction_error(&x, &f) < 1e-9 * (1.0 + x.norm_fro()));
            for w in f.sigma.windows(2) {
                assert!(w[0] >= w[1]);
            }
        }
    }

    #[test]
    fn tilde_diag_embed_basics() {
        let m = tilde_diag_embed(&[1.0, 2.0], 2, 3).unwrap();
        assert_eq!(m.as_slice(), &[1.0, 0.0, 0.0, 0.0, 2.0, 0.0]);
        assert!(matches!(tilde_diag_embed(&[], 0, 3), Err(Error::InvalidInput(_))));
        let s = tilde_diag_embed(&[5.0], 1, 1).unwrap();
        assert_eq!(s.as_slice(), &[5.0]);
        assert!(tilde_diag_embed(&[1.0], 2, 3).is_err());
    }

    #[test]
    fn random_orthogonal_is_orthogonal_and_deterministic() {
        let q1 = random_orthogonal(1, 3).unwrap();
        assert!((q1[(0, 0)].abs() - 1.0).abs() < 1e-15);

        let q = random_orthogonal(3, 0).unwrap();
        assert!(orthogonality_residual(&q) < 1e-12);

        let a = random_orthogonal(4, 42).unwrap();
        let b = random_orthogonal(4, 42).unwrap();
        assert_eq!(a, b);
        assert!(matches!(random_orthogonal(0, 1), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn random_orthogonal_seeds_differ() {
        let a = random_orthogonal(3, 1).unwrap();
        let b = random_orthogonal(3, 2).unwrap();
        assert!((&a - &b).norm_fro() > 1e-6);
    }

    #[test]
    fn norms_match_hand_values() {
        let x = Mat::new(2, 2, vec![3.0, 0.0, 0.0, 4.0]).unwrap();
        let n = norms(&x);
        assert!((n.nuclear - 7.0).abs() < 1e-12);
        assert!((n.spectral - 4.0).abs() < 1e-12);
        assert!((n.frobenius - 5.0).abs() < 1e-12);

        let i = Mat::identity(2);
        let ni = norms(&i);
        assert!((ni.nuclear - 2.0).abs() < 1e-12);
        assert!((ni.spectral - 1.0).abs() < 1e-12);
        assert!((ni.frobenius - 2.0_f64.sqrt()).abs() < 1e-12);

        let z = norms(&Mat::zeros(2, 3));
        assert_eq!((z.nuclear, z.spectral, z.frobenius), (0.0, 0.0, 0.0));
    }

    #[test]
    fn norm_ordering_on_random_matrices() {
        for seed in 0..50 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = gaussian_mat(3, 5, &mut rng);
            let n = norms(&x);
            assert!(n.nuclear >= n.frobenius - 1e-12);
            assert!(n.frobenius >= n.spectral - 1e-12);
        }
    }

    #[test]
    fn simultaneous_block_svd_on_disjoint_diagonals() {
        let a = Mat::tilde_diag(&[2.0, 0.0, 0.0], 3, 3);
        let b = Mat::tilde_diag(&[0.0, 3.0, 0.0], 3, 3);
        let (u, v, b1) = simultaneous_block_svd(&a, &b, 2).unwrap();
        let a_rot = &(&u.transpose() * &a) * &v;
        let b_rot = &(&u.transpose() * &b) * &v;
        let diag = Mat::tilde_diag(&[2.0, 0.0, 0.0], 3, 3);
        assert!((&a_rot - &diag).norm_fro() < 1e-9);
        assert!(b_rot.block_norm_fro(2, 3, 0, 3) < 1e-9);
        assert!(b_rot.block_norm_fro(0, 3, 2, 3) < 1e-9);
        assert!((b1.norm_fro() - 3.0).abs() < 1e-9);
    }

    #[test]
    fn simultaneous_block_svd_zero_b() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = gaussian_mat(3, 4, &mut rng);
        let b = Mat::zeros(3, 4);
        let (u, v, b1) = simultaneous_block_svd(&a, &b, 3).unwrap();
        let f = svd_any(&a);
        let a_rot = &(&u.transpose() * &a) * &v;
        let diag = Mat::tilde_diag(&f.sigma, 3, 4);
        assert!((&a_rot - &diag).norm_fro() < 1e-9 * (1.0 + a.norm_fro()));
        assert!(b1.norm_fro() < 1e-12);
    }

    #[test]
    fn simultaneous_block_svd_rank_one_b_zero_a() {
        let a = Mat::zeros(3, 3);
        let mut b = Mat::zeros(3, 3);
        b[(1, 2)] = 4.0;
        let (u, v, b1) = simultaneous_block_svd(&a, &b, 1).unwrap();
        let b_rot = &(&u.transpose() * &b) * &v;
        assert!((b_rot[(0, 0)].abs() - 4.0).abs() < 1e-9);
        assert!(b_rot.block_norm_fro(1, 3, 0, 3) < 1e-9);
        assert!(b_rot.block_norm_fro(0, 3, 1, 3) < 1e-9);
        assert!((b1[(0, 0)].abs() - 4.0).abs() < 1e-9);
    }

    #[test]
    fn simultaneous_block_svd_random_rank_pairs() {
        for seed in 0..30 {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let (m, n) = (4, 5);
            let ra = 1 + (seed as usize) % 2;
            let rb = 1 + (seed as usize) % 2;
            let k = (ra + rb).min(m);
            let low_rank = |rank: usize, rng: &mut ChaCha8Rng| {
                let l = gaussian_mat(m, rank, rng);
                let r = gaussian_mat(rank, n, rng);
                &l * &r
            };
            let a = low_rank(ra, &mut rng);
            let b = low_rank(rb, &mut rng);
            let (u, v, _) = simultaneous_block_svd(&a, &b, k).unwrap();
            let a_rot = &(&u.transpose() * &a) * &v;
            let b_rot = &(&u.transpose() * &b) * &v;
            let off_a = {
                let f = svd_any(&a);
                (&a_rot - &Mat::tilde_diag(&f.sigma, m, n)).norm_fro()
            };
            assert!(off_a < 1e-9 * (1.0 + a.norm_fro()));
            let outside = (b_rot.block_norm_fro(k, m, 0, n).powi(2)
                + b_rot.block_norm_fro(0, k, k, n).powi(2))
            .sqrt();
            assert!(outside < 1e-9 * (1.0 + b.norm_fro()));
        }
    }

    #[test]
    fn simultaneous_block_svd_rejects_rank_overflow() {
        let a = Mat::identity(3);
        let b = Mat::zeros(3, 3);
        assert!(matches!(
            simultaneous_block_svd(&a, &b, 2),
            Err(Error::RankBudgetExceeded(_))
        ));
    }

    #[test]
    fn symmetric_eigen_sorted() {
        let a = Mat::new(2, 2, vec![3.0, 1.0, 1.0, 3.0]).unwrap();
        let (vals, vecs) = symmetric_eigen(&a);
        assert!((vals[0] - 2.0).abs() < 1e-12);
        assert!((vals[1] - 4.0).abs() < 1e-12);
        assert!(orthogonality_residual(&vecs) < 1e-12);
    }
}
