//! Certification of stationarity.
//!
//! A first-order stationary pair of the factorized objective is balanced
//! (`U^T U = V^T V`) and admits frames `(R, P, Q)` aligning the SVDs of `U`,
//! `V` and `-grad_h(UV^T)`: the negated gradient is `R tdiag(d) P^T` with the
//! leading `rank` entries of `d` equal to `lambda`. The same diagonal
//! structure without a factor pair is pseudo-stationarity of a matrix `X`.
//! Membership of `-G` in `lambda` times the nuclear-norm subdifferential is
//! the stricter condition that additionally caps the trailing block of `d` at
//! `lambda`. Second-order stationarity is certified through the smallest
//! eigenvalue of the dense factorized Hessian.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::objective::{self, FactorPair, QuadraticObjective};

/// Frames and singular-value data certifying (pseudo-)stationarity.
///
/// `x = r * tdiag(sigma) * p^T` and `-grad_h(x) = r * tdiag(d) * p^T`, with
/// `d[0..s] = lambda` and the trailing entries of `d` descending. `q` is the
/// shared right factor frame when the certificate came from a factor pair.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StationaryDecomposition {
    pub r: Mat,
    pub p: Mat,
    pub q: Option<Mat>,
    pub sigma: Vec<f64>,
    pub d: Vec<f64>,
    pub s: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StationarityVerdict {
    NotStationary,
    FirstOrderOnly,
    SecondOrder,
}

/// Outcome of a second-order certification run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SecondOrderReport {
    pub grad_residual: f64,
    pub min_hessian_eig: f64,
    pub verdict: StationarityVerdict,
    pub decomposition: Option<StationaryDecomposition>,
}

/// Default tolerance policy; every threshold can be overridden by passing
/// explicit values to the certification entry points.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Tolerances {
    /// Relative gradient tolerance; effective bound `grad_rel * (1 + ||grad_h||_F)`.
    pub grad_rel: f64,
    /// Relative Hessian eigenvalue tolerance; effective bound `hess_rel * (1 + L)`.
    pub hess_rel: f64,
    /// Absolute tolerance for subdifferential membership tests.
    pub subdiff: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { grad_rel: 1e-8, hess_rel: 1e-8, subdiff: 1e-9 }
    }
}

impl Tolerances {
    pub fn grad_tol(&self, grad_norm: f64) -> f64 {
        self.grad_rel * (1.0 + grad_norm)
    }

    pub fn hess_tol(&self, l: f64) -> f64 {
        self.hess_rel * (1.0 + l)
    }
}

/// Relative scale of the frame-alignment residual accepted when extracting
/// the diagonal gradient structure.
const ALIGN_REL_TOL: f64 = 1e-7;

/// Decompose a balanced pair: frames `R`, `P`, `Q` and shared singular
/// values with `U = R tdiag(sigma) Q^T` and `V = P tdiag(sigma) Q^T`.
///
/// Fails with `NotBalanced` when `||U^T U - V^T V||_F > tol * (1 + ||U^T U||_F)`.
pub fn balanced_decompose(u: &Mat, v: &Mat, tol: f64) -> Result<(Mat, Mat, Mat, Vec<f64>)> {
    let r_width = u.cols();
    if v.cols() != r_width || r_width > u.rows() || r_width > v.rows() {
        return Err(Error::InvalidInput(
            "factors must share a width no larger than either height".into(),
        ));
    }
    let utu = &u.transpose() * u;
    let vtv = &v.transpose() * v;
    let imbalance = (&utu - &vtv).norm_fro();
    if imbalance > tol * (1.0 + utu.norm_fro()) {
        return Err(Error::NotBalanced(format!(
            "||U^T U - V^T V||_F = {imbalance:.3e} exceeds tolerance"
        )));
    }

    let fv = linalg::svd_any(v);
    let (p, q, sigma) = (fv.r, fv.p, fv.sigma);
    let s = linalg::numerical_rank(&sigma);

    // Columns of U Q scaled by 1/sigma_i are the leading left frame columns.
    let uq = u * &q;
    let lead: Vec<Vec<f64>> = (0..s)
        .map(|i| (0..u.rows()).map(|row| uq[(row, i)] / sigma[i]).collect())
        .collect();
    let r = linalg::complete_orthonormal_columns(lead, u.rows());

    let rebuilt_u = &(&r * &Mat::tilde_diag(&sigma, u.rows(), r_width)) * &q.transpose();
    if (&rebuilt_u - u).norm_fro() > 1e-8 * (1.0 + u.norm_fro()) {
        return Err(Error::CertificationFailed(
            "balanced reconstruction residual exceeds tolerance".into(),
        ));
    }
    Ok((r, p, q, sigma))
}

/// Rotate the trailing block of `M = R0^T (-G) P0` to diagonal form and check
/// the leading block equals `lambda I` with vanishing cross blocks. Returns
/// the adjusted frames and the full vector `d`.
fn align_gradient_frames(
    r0: &Mat,
    p0: &Mat,
    neg_g: &Mat,
    s: usize,
    lambda: f64,
    tol: f64,
) -> std::result::Result<(Mat, Mat, Vec<f64>), f64> {
    let (m, n) = (neg_g.rows(), neg_g.cols());
    let mm = &(&r0.transpose() * neg_g) * p0;

    let mut residual: f64 = 0.0;
    for i in 0..s {
        for j in 0..s {
            let want = if i == j { lambda } else { 0.0 };
            residual = residual.max((mm[(i, j)] - want).abs());
        }
    }
    residual = residual.max(mm.block_norm_fro(0, s, s, n));
    residual = residual.max(mm.block_norm_fro(s, m, 0, s));
    if residual > tol {
        return Err(residual);
    }

    let mut d = vec![lambda; s];
    let (mut r, mut p) = (r0.clone(), p0.clone());
    if s < m {
        let trail = mm.block(s, m, s, n);
        let ft = linalg::svd_any(&trail);
        d.extend_from_slice(&ft.sigma);
        let mut r_ext = Mat::identity(m);
        r_ext.set_block(s, s, &ft.r);
        let mut p_ext = Mat::identity(n);
        p_ext.set_block(s, s, &ft.p);
        r = &r * &r_ext;
        p = &p * &p_ext;
    }
    Ok((r, p, d))
}

/// Certify first-order stationarity of a factor pair for `F_r`.
///
/// `tol` bounds the Frobenius norm of the stacked gradient blocks. On
/// success the decomposition carries `sigma(UV^T) = sigma(U)^2` and the
/// gradient diagonal `d` in certificate order: leading `s` entries `lambda`,
/// trailing entries descending.
pub fn certify_first_order(
    h: &QuadraticObjective,
    lambda: f64,
    pair: &FactorPair,
    tol: f64,
) -> Result<StationaryDecomposition> {
    let (gu, gv) = objective::grad_fr(h, lambda, pair)?;
    let res = (gu.norm_fro().powi(2) + gv.norm_fro().powi(2)).sqrt();
    if res > tol {
        return Err(Error::NotStationary(format!(
            "gradient residual {res:.3e} exceeds tolerance {tol:.3e}"
        )));
    }

    // Stationarity forces lambda*(U^T U - V^T V) = U^T gu - gv^T V, so the
    // imbalance inherits the gradient residual scale.
    let scale = 1.0 + pair.u.norm_fro() + pair.v.norm_fro();
    let bal_tol = (tol + 2.0 * res * scale / lambda).max(1e-12);
    let (r0, p0, q, sigma_u) = balanced_decompose(&pair.u, &pair.v, bal_tol)?;

    let m = pair.u.rows();
    let s = linalg::numerical_rank(&sigma_u);
    let mut sigma: Vec<f64> = sigma_u.iter().map(|x| x * x).collect();
    sigma.resize(m, 0.0);

    let x = pair.product();
    let g = h.grad(&x)?;
    let neg_g = g.scale(-1.0);
    let align_tol = ALIGN_REL_TOL * (1.0 + g.norm_fro());
    let (r, p, d) = align_gradient_frames(&r0, &p0, &neg_g, s, lambda, align_tol).map_err(|res| {
        Error::CertificationFailed(format!(
            "frame alignment residual {res:.3e} exceeds {align_tol:.3e}"
        ))
    })?;

    let rebuilt = &(&r * &Mat::tilde_diag(&d, m, x.cols())) * &p.transpose();
    if (&rebuilt - &neg_g).norm_fro() > align_tol {
        return Err(Error::CertificationFailed("gradient reconstruction residual".into()));
    }
    Ok(StationaryDecomposition { r, p, q: Some(q), sigma, d, s })
}

/// Certify pseudo-stationarity of a matrix `X`: simultaneous frames for `X`
/// and `-grad_h(X)` with the leading `rank(X)` gradient values equal to
/// `lambda`. `tol` bounds the frame-alignment residual.
pub fn certify_pseudo_stationary(
    h: &QuadraticObjective,
    lambda: f64,
    x: &Mat,
    tol: f64,
) -> Result<StationaryDecomposition> {
    let f = linalg::full_svd(x)?;
    let g = h.grad(x)?;
    let s = linalg::numerical_rank(&f.sigma);
    let neg_g = g.scale(-1.0);
    let (r, p, d) = align_gradient_frames(&f.r, &f.p, &neg_g, s, lambda, tol).map_err(|res| {
        Error::NotPseudoStationary(format!(
            "no simultaneous alignment: residual {res:.3e} exceeds {tol:.3e}"
        ))
    })?;
    Ok(StationaryDecomposition { r, p, q: None, sigma: f.sigma, d, s })
}

/// Watson membership test: `-G` lies in `lambda` times the nuclear-norm
/// subdifferential at `X` iff, in SVD frames of `X`, the leading block of
/// `-R^T G P` is `lambda I`, the cross blocks vanish, and the trailing block
/// has spectral norm at most `lambda`.
///
/// All three checks use rotation-invariant norms, so the answer does not
/// depend on the SVD frame choice.
pub fn nuclear_subdiff_member(x: &Mat, g: &Mat, lambda: f64, tol: f64) -> bool {
    assert_eq!((x.rows(), x.cols()), (g.rows(), g.cols()), "dimension mismatch");
    let (m, n) = (x.rows(), x.cols());
    let f = linalg::svd_any(x);
    let s = linalg::numerical_rank(&f.sigma);
    let mm = &(&f.r.transpose() * &g.scale(-1.0)) * &f.p;

    let abs_tol = tol * (1.0 + lambda);
    let mut lead_dev = 0.0;
    for i in 0..s {
        for j in 0..s {
            let want = if i == j { lambda } else { 0.0 };
            let dev = mm[(i, j)] - want;
            lead_dev += dev * dev;
        }
    }
    if lead_dev.sqrt() > abs_tol {
        return false;
    }
    if mm.block_norm_fro(0, s, s, n) > abs_tol || mm.block_norm_fro(s, m, 0, s) > abs_tol {
        return false;
    }
    if s < m {
        let trail = mm.block(s, m, s, n);
        if linalg::spectral_norm(&trail) > lambda * (1.0 + tol) {
            return false;
        }
    }
    true
}

/// Whether `X` is a stationary point of `f = h + lambda*||.||_*`.
pub fn is_stationary_f(h: &QuadraticObjective, lambda: f64, x: &Mat, tol: f64) -> Result<bool> {
    let g = h.grad(x)?;
    Ok(nuclear_subdiff_member(x, &g, lambda, tol))
}

/// Certify second-order stationarity of a factor pair through the smallest
/// eigenvalue of the dense factorized Hessian.
pub fn certify_second_order(
    h: &QuadraticObjective,
    lambda: f64,
    pair: &FactorPair,
    tol_g: f64,
    tol_h: f64,
) -> Result<SecondOrderReport> {
    let (gu, gv) = objective::grad_fr(h, lambda, pair)?;
    let grad_residual = (gu.norm_fro().powi(2) + gv.norm_fro().powi(2)).sqrt();
    let hm = objective::hess_matrix_fr(h, lambda, pair)?;
    let (min_hessian_eig, _) = linalg::min_eigenpair(&hm);
    let verdict = if grad_residual > tol_g {
        StationarityVerdict::NotStationary
    } else if min_hessian_eig >= -tol_h {
        StationarityVerdict::SecondOrder
    } else {
        StationarityVerdict::FirstOrderOnly
    };
    let decomposition = if verdict == StationarityVerdict::NotStationary {
        None
    } else {
        certify_first_order(h, lambda, pair, tol_g).ok()
    };
    Ok(SecondOrderReport { grad_residual, min_hessian_eig, verdict, decomposition })
}

/// Check the trailing gradient values of a certified second-order point
/// against `lambda + L_bound * sigma_r`: every value of `d` beyond the rank
/// must stay below the bound. For rank-deficient pairs (`s < r`) the bound
/// degenerates to `lambda` since `sigma_r = 0`.
pub fn spectral_norm_bound_check(dec: &StationaryDecomposition, lambda: f64, l_bound: f64) -> bool {
    let r_width = dec.q.as_ref().map(|q| q.rows()).unwrap_or(dec.s);
    let sigma_r = if r_width >= 1 && r_width <= dec.sigma.len() {
        dec.sigma[r_width - 1]
    } else {
        0.0
    };
    let max_trailing = dec.d[dec.s..].iter().cloned().fold(0.0, f64::max);
    let bound = lambda + l_bound * sigma_r;
    max_trailing <= bound + 1e-9 * (1.0 + bound)
}
