//! Objective representations and calculus.
//!
//! Two quadratic families share one calculus interface:
//!
//! * `EntrywiseWeighted` — off-diagonal entries weighted by `L`, diagonal
//!   deviations from an anchor weighted by `mu`, a linear term, and an
//!   optional rank-one quadratic term. This is the family the counterexample
//!   factory produces.
//! * `GeneralPsd` — an arbitrary positive definite Hessian given by an
//!   orthonormal eigenbasis of matrix space, for solver experiments.
//!
//! On top of the plain calculus this module evaluates the regularized
//! objective `f = h + lambda*||.||_*` and the factorized objective
//! `F_r(U, V) = h(U V^T) + lambda*(||U||_F^2 + ||V||_F^2)/2` together with
//! its gradient, Hessian quadratic form, and dense Hessian matrix.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat};

/// Guard for dense factorized-Hessian assembly.
pub const DENSE_HESSIAN_MAX_DIM: usize = 2000;

/// The tuple parameterizing a factorizability question.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RegimeRepr", into = "RegimeRepr")]
pub struct RegimeParams {
    pub m: usize,
    pub n: usize,
    pub r: usize,
    pub r_star: usize,
    pub l: f64,
    pub mu: f64,
    pub lambda: f64,
}

#[derive(Serialize, Deserialize)]
struct RegimeRepr {
    m: usize,
    n: usize,
    r: usize,
    r_star: usize,
    #[serde(rename = "L")]
    l: f64,
    mu: f64,
    lambda: f64,
}

impl From<RegimeParams> for RegimeRepr {
    fn from(p: RegimeParams) -> Self {
        RegimeRepr { m: p.m, n: p.n, r: p.r, r_star: p.r_star, l: p.l, mu: p.mu, lambda: p.lambda }
    }
}

impl TryFrom<RegimeRepr> for RegimeParams {
    type Error = String;
    fn try_from(r: RegimeRepr) -> std::result::Result<Self, String> {
        RegimeParams::new(r.m, r.n, r.r, r.r_star, r.l, r.mu, r.lambda).map_err(|e| e.to_string())
    }
}

impl RegimeParams {
    pub fn new(
        m: usize,
        n: usize,
        r: usize,
        r_star: usize,
        l: f64,
        mu: f64,
        lambda: f64,
    ) -> Result<Self> {
        if !(1 <= r && r <= m && m <= n) {
            return Err(Error::InvalidInput(format!(
                "need 1 <= r <= m <= n, got r={r}, m={m}, n={n}"
            )));
        }
        if r_star > m {
            return Err(Error::InvalidInput(format!("need r_star <= m, got r_star={r_star}, m={m}")));
        }
        if !(l.is_finite() && mu.is_finite() && lambda.is_finite() && l >= mu && mu > 0.0) {
            return Err(Error::InvalidInput(format!("need L >= mu > 0, got L={l}, mu={mu}")));
        }
        if lambda <= 0.0 {
            return Err(Error::InvalidInput(format!("need lambda > 0, got {lambda}")));
        }
        Ok(RegimeParams { m, n, r, r_star, l, mu, lambda })
    }

    /// Condition number `L / mu`, always at least one.
    pub fn kappa(&self) -> f64 {
        self.l / self.mu
    }
}

/// Factor pair `(U, V)` with `U` of size `m x r` and `V` of size `n x r`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FactorPairRepr")]
pub struct FactorPair {
    pub u: Mat,
    pub v: Mat,
}

#[derive(Deserialize)]
struct FactorPairRepr {
    u: Mat,
    v: Mat,
}

impl TryFrom<FactorPairRepr> for FactorPair {
    type Error = String;
    fn try_from(r: FactorPairRepr) -> std::result::Result<Self, String> {
        FactorPair::new(r.u, r.v).map_err(|e| e.to_string())
    }
}

impl FactorPair {
    pub fn new(u: Mat, v: Mat) -> Result<Self> {
        if u.cols() != v.cols() {
            return Err(Error::InvalidInput(format!(
                "factor widths differ: {} vs {}",
                u.cols(),
                v.cols()
            )));
        }
        Ok(FactorPair { u, v })
    }

    pub fn product(&self) -> Mat {
        &self.u * &self.v.transpose()
    }

    pub fn width(&self) -> usize {
        self.u.cols()
    }
}

/// Rank-one quadratic term `<X - anchor, numerator>^2 / denominator`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankOneTerm {
    pub numerator: Mat,
    pub denominator: f64,
}

/// The Hessian family behind a [`QuadraticObjective`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HForm {
    EntrywiseWeighted {
        /// Weight `L` on squared off-diagonal entries.
        offdiag_weight: f64,
        /// Weight `mu` on squared diagonal deviations from the anchor.
        diag_weight: f64,
        anchor: Mat,
        /// Matrix of the linear term `<linear, X>`.
        linear: Mat,
        rank_one: Option<RankOneTerm>,
    },
    GeneralPsd {
        /// Orthonormal basis of matrix space, one matrix per eigenvalue.
        basis: Vec<Mat>,
        eigenvalues: Vec<f64>,
        linear: Mat,
        constant: f64,
    },
}

/// An immutable `C^2` quadratic objective `h` on `m x n` matrices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ObjectiveRepr", into = "ObjectiveRepr")]
pub struct QuadraticObjective {
    m: usize,
    n: usize,
    form: HForm,
}

#[derive(Serialize, Deserialize)]
struct ObjectiveRepr {
    m: usize,
    n: usize,
    form: HForm,
}

impl From<QuadraticObjective> for ObjectiveRepr {
    fn from(h: QuadraticObjective) -> Self {
        ObjectiveRepr { m: h.m, n: h.n, form: h.form }
    }
}

impl TryFrom<ObjectiveRepr> for QuadraticObjective {
    type Error = String;
    fn try_from(r: ObjectiveRepr) -> std::result::Result<Self, String> {
        let built = match r.form {
            HForm::EntrywiseWeighted { offdiag_weight, diag_weight, anchor, linear, rank_one } => {
                QuadraticObjective::entrywise_weighted(offdiag_weight, diag_weight, anchor, linear, rank_one)
            }
            HForm::GeneralPsd { basis, eigenvalues, linear, constant } => {
                QuadraticObjective::general_psd(basis, eigenvalues, linear, constant)
            }
        }
        .map_err(|e| e.to_string())?;
        if (built.m, built.n) != (r.m, r.n) {
            return Err("declared dimensions disagree with payload".into());
        }
        Ok(built)
    }
}

impl QuadraticObjective {
    pub fn entrywise_weighted(
        offdiag_weight: f64,
        diag_weight: f64,
        anchor: Mat,
        linear: Mat,
        rank_one: Option<RankOneTerm>,
    ) -> Result<Self> {
        let (m, n) = (anchor.rows(), anchor.cols());
        if (linear.rows(), linear.cols()) != (m, n) {
            return Err(Error::InvalidInput("anchor and linear dimensions differ".into()));
        }
        if !(diag_weight > 0.0 && offdiag_weight >= diag_weight) {
            return Err(Error::InvalidInput(format!(
                "weights must give L >= mu > 0, got L={offdiag_weight}, mu={diag_weight}"
            )));
        }
        if let Some(t) = &rank_one {
            if (t.numerator.rows(), t.numerator.cols()) != (m, n) {
                return Err(Error::InvalidInput("rank-one numerator dimensions differ".into()));
            }
            if !(t.denominator > 0.0 && t.denominator.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "rank-one denominator must be positive, got {}",
                    t.denominator
                )));
            }
        }
        Ok(QuadraticObjective {
            m,
            n,
            form: HForm::EntrywiseWeighted { offdiag_weight, diag_weight, anchor, linear, rank_one },
        })
    }

    pub fn general_psd(
        basis: Vec<Mat>,
        eigenvalues: Vec<f64>,
        linear: Mat,
        constant: f64,
    ) -> Result<Self> {
        let (m, n) = (linear.rows(), linear.cols());
        if basis.len() != m * n || eigenvalues.len() != m * n {
            return Err(Error::InvalidInput(format!(
                "need a complete eigenbasis of {}-dimensional matrix space",
                m * n
            )));
        }
        for b in &basis {
            if (b.rows(), b.cols()) != (m, n) {
                return Err(Error::InvalidInput("basis element dimensions differ".into()));
            }
        }
        for (i, bi) in basis.iter().enumerate() {
            for (j, bj) in basis.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                if (bi.dot(bj) - want).abs() > 1e-8 {
                    return Err(Error::InvalidInput("basis is not orthonormal".into()));
                }
            }
        }
        if eigenvalues.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
            return Err(Error::InvalidInput("eigenvalues must be positive".into()));
        }
        if !constant.is_finite() {
            return Err(Error::InvalidInput("constant must be finite".into()));
        }
        Ok(QuadraticObjective { m, n, form: HForm::GeneralPsd { basis, eigenvalues, linear, constant } })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.m, self.n)
    }

    pub fn form(&self) -> &HForm {
        &self.form
    }

    fn check_dims(&self, x: &Mat) -> Result<()> {
        if (x.rows(), x.cols()) != (self.m, self.n) {
            return Err(Error::InvalidInput(format!(
                "expected a {}x{} matrix, got {}x{}",
                self.m,
                self.n,
                x.rows(),
                x.cols()
            )));
        }
        Ok(())
    }

    /// Exact value `h(X)`.
    pub fn eval(&self, x: &Mat) -> Result<f64> {
        self.check_dims(x)?;
        Ok(match &self.form {
            HForm::EntrywiseWeighted { offdiag_weight, diag_weight, anchor, linear, rank_one } => {
                let mut off = 0.0;
                let mut diag = 0.0;
                for i in 0..self.m {
                    for j in 0..self.n {
                        if i == j {
                            let d = x[(i, i)] - anchor[(i, i)];
                            diag += d * d;
                        } else {
                            off += x[(i, j)] * x[(i, j)];
                        }
                    }
                }
                let mut val = 0.5 * offdiag_weight * off + 0.5 * diag_weight * diag + linear.dot(x);
                if let Some(t) = rank_one {
                    let inner = (x - anchor).dot(&t.numerator);
                    val += inner * inner / t.denominator;
                }
                val
            }
            HForm::GeneralPsd { basis, eigenvalues, linear, constant } => {
                let quad: f64 = basis
                    .iter()
                    .zip(eigenvalues)
                    .map(|(b, &e)| {
                        let c = b.dot(x);
                        e * c * c
                    })
                    .sum();
                0.5 * quad + linear.dot(x) + constant
            }
        })
    }

    /// Exact gradient of `h` at `X`.
    pub fn grad(&self, x: &Mat) -> Result<Mat> {
        self.check_dims(x)?;
        Ok(match &self.form {
            HForm::EntrywiseWeighted { offdiag_weight, diag_weight, anchor, linear, rank_one } => {
                let mut g = Mat::from_fn(self.m, self.n, |i, j| {
                    if i == j {
                        diag_weight * (x[(i, i)] - anchor[(i, i)]) + linear[(i, j)]
                    } else {
                        offdiag_weight * x[(i, j)] + linear[(i, j)]
                    }
                });
                if let Some(t) = rank_one {
                    let coeff = 2.0 * (x - anchor).dot(&t.numerator) / t.denominator;
                    g = &g + &t.numerator.scale(coeff);
                }
                g
            }
            HForm::GeneralPsd { basis, eigenvalues, linear, .. } => {
                let mut g = linear.clone();
                for (b, &e) in basis.iter().zip(eigenvalues) {
                    g = &g + &b.scale(e * b.dot(x));
                }
                g
            }
        })
    }

    /// Hessian quadratic form `hess(X)[Y, Y]`; independent of `X` for these
    /// quadratic families, the argument is kept for interface symmetry.
    pub fn hess_quadform(&self, x: &Mat, y: &Mat) -> Result<f64> {
        self.check_dims(x)?;
        self.check_dims(y)?;
        Ok(self.hess_quadform_unchecked(y))
    }

    fn hess_quadform_unchecked(&self, y: &Mat) -> f64 {
        match &self.form {
            HForm::EntrywiseWeighted { offdiag_weight, diag_weight, rank_one, .. } => {
                let mut off = 0.0;
                let mut diag = 0.0;
                for i in 0..self.m {
                    for j in 0..self.n {
                        if i == j {
                            diag += y[(i, i)] * y[(i, i)];
                        } else {
                            off += y[(i, j)] * y[(i, j)];
                        }
                    }
                }
                let mut val = offdiag_weight * off + diag_weight * diag;
                if let Some(t) = rank_one {
                    let inner = y.dot(&t.numerator);
                    val += 2.0 * inner * inner / t.denominator;
                }
                val
            }
            HForm::GeneralPsd { basis, eigenvalues, .. } => basis
                .iter()
                .zip(eigenvalues)
                .map(|(b, &e)| {
                    let c = b.dot(y);
                    e * c * c
                })
                .sum(),
        }
    }

    /// Hessian operator applied to a direction, `Y -> hess(X) Y`.
    pub(crate) fn hess_apply(&self, y: &Mat) -> Mat {
        match &self.form {
            HForm::EntrywiseWeighted { offdiag_weight, diag_weight, rank_one, .. } => {
                let mut out = Mat::from_fn(self.m, self.n, |i, j| {
                    if i == j {
                        diag_weight * y[(i, i)]
                    } else {
                        offdiag_weight * y[(i, j)]
                    }
                });
                if let Some(t) = rank_one {
                    let coeff = 2.0 * y.dot(&t.numerator) / t.denominator;
                    out = &out + &t.numerator.scale(coeff);
                }
                out
            }
            HForm::GeneralPsd { basis, eigenvalues, .. } => {
                let mut out = Mat::zeros(self.m, self.n);
                for (b, &e) in basis.iter().zip(eigenvalues) {
                    out = &out + &b.scale(e * b.dot(y));
                }
                out
            }
        }
    }

    /// Certified curvature sandwich `(mu, L)` with
    /// `mu*||Y||_F^2 <= hess[Y,Y] <= L*||Y||_F^2` for every direction.
    ///
    /// For the entrywise family the upper bound requires the rank-one term
    /// to be dominated by the weight split; if the certificate fails the
    /// objective is rejected as outside the class.
    pub fn certified_bounds(&self) -> Result<(f64, f64)> {
        match &self.form {
            HForm::EntrywiseWeighted { offdiag_weight, diag_weight, rank_one, .. } => {
                let (mu, l) = (*diag_weight, *offdiag_weight);
                if let Some(t) = rank_one {
                    // The rank-one numerator only meets diagonal directions,
                    // so Cauchy-Schwarz gives the margin it must fit into.
                    let ratio = 2.0 * t.numerator.norm_fro().powi(2) / t.denominator;
                    if ratio > (l - mu) + 1e-9 * (1.0 + l) {
                        return Err(Error::NotInClass(format!(
                            "rank-one mass {ratio:.6e} exceeds L - mu = {:.6e}",
                            l - mu
                        )));
                    }
                }
                Ok((mu, l))
            }
            HForm::GeneralPsd { eigenvalues, .. } => {
                let mu = eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
                let l = eigenvalues.iter().cloned().fold(0.0, f64::max);
                Ok((mu, l))
            }
        }
    }

    /// Restriction of `h` to the subspace `Uframe [K 0; 0 0] Vframe^T` of
    /// `k x k` matrices embedded through orthogonal frames, returned as a
    /// `GeneralPsd` objective over `k x k` matrices.
    pub fn restrict_to_block(&self, uframe: &Mat, vframe: &Mat, k: usize) -> Result<QuadraticObjective> {
        if (uframe.rows(), uframe.cols()) != (self.m, self.m)
            || (vframe.rows(), vframe.cols()) != (self.n, self.n)
        {
            return Err(Error::InvalidInput("frames must be m x m and n x n".into()));
        }
        if k == 0 || k > self.m {
            return Err(Error::InvalidInput(format!("need 1 <= k <= m, got k={k}")));
        }
        for (name, f) in [("U", uframe), ("V", vframe)] {
            let dim = f.rows();
            let res = (&(&f.transpose() * f) - &Mat::identity(dim)).max_abs();
            if res > 1e-8 {
                return Err(Error::InvalidFrame(format!(
                    "{name} frame orthogonality residual {res:.3e}"
                )));
            }
        }
        let u_k = uframe.block(0, self.m, 0, k);
        let v_k = vframe.block(0, self.n, 0, k);
        let embed = |kmat: &Mat| -> Mat { &(&u_k * kmat) * &v_k.transpose() };
        let restrict = |w: &Mat| -> Mat { &(&u_k.transpose() * w) * &v_k };

        // Hessian of the restriction in the standard basis of k x k space.
        let dim = k * k;
        let mut hm = Mat::zeros(dim, dim);
        for a in 0..k {
            for b in 0..k {
                let mut e = Mat::zeros(k, k);
                e[(a, b)] = 1.0;
                let col = restrict(&self.hess_apply(&embed(&e)));
                for i in 0..k {
                    for j in 0..k {
                        hm[(i * k + j, a * k + b)] = col[(i, j)];
                    }
                }
            }
        }
        let hm = (&hm + &hm.transpose()).scale(0.5);
        let (eigs, vecs) = linalg::symmetric_eigen(&hm);
        let basis: Vec<Mat> = (0..dim)
            .map(|c| Mat::from_fn(k, k, |i, j| vecs[(i * k + j, c)]))
            .collect();
        let linear = restrict(&self.grad(&Mat::zeros(self.m, self.n))?);
        let constant = self.eval(&Mat::zeros(self.m, self.n))?;
        QuadraticObjective::general_psd(basis, eigs, linear, constant)
    }
}

/// Regularized objective `f(X) = h(X) + lambda*||X||_*`.
pub fn eval_f(h: &QuadraticObjective, lambda: f64, x: &Mat) -> Result<f64> {
    Ok(h.eval(x)? + lambda * linalg::norms(x).nuclear)
}

/// Factorized objective `F_r(U, V) = h(UV^T) + lambda*(||U||_F^2 + ||V||_F^2)/2`.
pub fn eval_fr(h: &QuadraticObjective, lambda: f64, pair: &FactorPair) -> Result<f64> {
    let x = pair.product();
    Ok(h.eval(&x)? + 0.5 * lambda * (pair.u.norm_fro().powi(2) + pair.v.norm_fro().powi(2)))
}

/// Gradient blocks of `F_r`: `(grad_h(UV^T) V + lambda U, grad_h(UV^T)^T U + lambda V)`.
pub fn grad_fr(h: &QuadraticObjective, lambda: f64, pair: &FactorPair) -> Result<(Mat, Mat)> {
    let x = pair.product();
    let g = h.grad(&x)?;
    let gu = &(&g * &pair.v) + &pair.u.scale(lambda);
    let gv = &(&g.transpose() * &pair.u) + &pair.v.scale(lambda);
    Ok((gu, gv))
}

/// Hessian quadratic form of `F_r` at `pair` in direction `(dU, dV)`.
pub fn hess_quadform_fr(
    h: &QuadraticObjective,
    lambda: f64,
    pair: &FactorPair,
    du: &Mat,
    dv: &Mat,
) -> Result<f64> {
    if (du.rows(), du.cols()) != (pair.u.rows(), pair.u.cols())
        || (dv.rows(), dv.cols()) != (pair.v.rows(), pair.v.cols())
    {
        return Err(Error::InvalidInput("direction dimensions differ from the pair".into()));
    }
    let x = pair.product();
    let g = h.grad(&x)?;
    let w = &(du * &pair.v.transpose()) + &(&pair.u * &dv.transpose());
    let quad = h.hess_quadform(&x, &w)?;
    let cross = 2.0 * g.dot(&(du * &dv.transpose()));
    Ok(quad + cross + lambda * (du.norm_fro().powi(2) + dv.norm_fro().powi(2)))
}

/// Dense symmetric Hessian of `F_r` at `pair`, of order `(m + n) * r`:
/// coordinates are `U` row-major followed by `V` row-major.
pub fn hess_matrix_fr(h: &QuadraticObjective, lambda: f64, pair: &FactorPair) -> Result<Mat> {
    let (m, n) = h.dims();
    let r = pair.width();
    if pair.u.rows() != m || pair.v.rows() != n {
        return Err(Error::InvalidInput("pair dimensions differ from the objective".into()));
    }
    let dim = (m + n) * r;
    if dim > DENSE_HESSIAN_MAX_DIM {
        return Err(Error::TooLarge(format!(
            "dense Hessian of order {dim} exceeds the guard {DENSE_HESSIAN_MAX_DIM}"
        )));
    }
    let x = pair.product();
    let g = h.grad(&x)?;
    let mut hm = Mat::zeros(dim, dim);
    let write_col = |col: usize, au: &Mat, av: &Mat, hm: &mut Mat| {
        for i in 0..m {
            for j in 0..r {
                hm[(i * r + j, col)] = au[(i, j)];
            }
        }
        for i in 0..n {
            for j in 0..r {
                hm[(m * r + i * r + j, col)] = av[(i, j)];
            }
        }
    };
    for col in 0..dim {
        let mut du = Mat::zeros(m, r);
        let mut dv = Mat::zeros(n, r);
        if col < m * r {
            du[(col / r, col % r)] = 1.0;
        } else {
            let c = col - m * r;
            dv[(c / r, c % r)] = 1.0;
        }
        let w = &(&du * &pair.v.transpose()) + &(&pair.u * &dv.transpose());
        let hw = h.hess_apply(&w);
        let au = &(&(&hw * &pair.v) + &(&g * &dv)) + &du.scale(lambda);
        let av = &(&(&hw.transpose() * &pair.u) + &(&g.transpose() * &du)) + &dv.scale(lambda);
        write_col(col, &au, &av, &mut hm);
    }
    Ok((&hm + &hm.transpose()).scale(0.5))
}
