//! The counterexample factory.
//!
//! For a regime the oracle rejects, this module assembles the optimal
//! witness of the reduced problem, sorts it into singular-value order,
//! embeds it as diagonal matrices, constructs the quadratic objective whose
//! gradients pin those diagonals, builds the factor pair from the square
//! roots of the leading diagonal, and numerically verifies every property
//! the bundle is supposed to have: the pair is second-order stationary, its
//! product is not a stationary point of the regularized objective, while
//! the designated competitor is, and strictly better.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factorizability::{self, IndexSets, QpWitness};
use crate::linalg::{self, Mat};
use crate::objective::{self, FactorPair, QuadraticObjective, RankOneTerm, RegimeParams};
use crate::stationarity::{self};
use crate::trace;

/// Which quadratic construction the bundle uses: the rank-one correction is
/// present exactly when the two gradient-plus-curvature diagonals differ.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    RankOneBranch,
    PlainBranch,
}

/// A forged counterexample bundle.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CounterexampleInstance {
    pub params: RegimeParams,
    pub witness: QpWitness,
    pub xbar: Mat,
    pub xstar: Mat,
    pub gbar: Mat,
    pub gstar: Mat,
    pub h: QuadraticObjective,
    pub pair: FactorPair,
    pub branch: Branch,
}

/// Thresholds used by [`verify_counterexample`]; the defaults match the
/// verification contract of the factory.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct VerifyOptions {
    /// Gradient residual bound, relative to `1 + ||grad_h(Xbar)||_F`.
    pub grad_rel_tol: f64,
    /// Lower bound `-tol` on the smallest factorized-Hessian eigenvalue.
    pub hess_eig_tol: f64,
    /// Required objective gap, relative to `lambda^2`.
    pub f_gap_rel_tol: f64,
    /// Required spectral excess of `grad_h(Xbar)` over `lambda`, relative to `lambda`.
    pub spectral_excess_rel_tol: f64,
    /// Lower bound `-tol` on the pairing-gap value, scaled by `max(1, lambda^2)`.
    pub gap_ineq_tol: f64,
    /// Subdifferential membership tolerance.
    pub stationarity_tol: f64,
    /// Random Rayleigh quotients drawn when checking the certified bounds.
    pub rayleigh_samples: usize,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            grad_rel_tol: 1e-9,
            hess_eig_tol: 1e-8,
            f_gap_rel_tol: 1e-9,
            spectral_excess_rel_tol: 1e-9,
            gap_ineq_tol: 1e-9,
            stationarity_tol: 1e-9,
            rayleigh_samples: 200,
            seed: 0,
        }
    }
}

/// Verification outcome; `all_pass` aggregates, `failures` names the checks
/// that missed their thresholds.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VerificationReport {
    pub grad_fr_residual: f64,
    pub min_hessian_eig: f64,
    pub f_gap: f64,
    pub xstar_is_stationary: bool,
    pub xbar_spectral_excess: f64,
    pub bounds_ok: bool,
    pub gap_ineq_value: f64,
    pub all_pass: bool,
    pub failures: Vec<String>,
}

/// Lexicographically smallest permutation of `[m]` mapping exactly `target`
/// of the first `r` positions into `[r*]`.
fn lexmin_permutation(m: usize, r: usize, r_star: usize, target: usize) -> Vec<usize> {
    let mut tau = vec![usize::MAX; m];
    let mut used = vec![false; m];
    let mut matched = 0usize;
    for (i, slot) in tau.iter_mut().enumerate() {
        let mut placed = false;
        for val in 0..m {
            if used[val] {
                continue;
            }
            let matched_new = matched + usize::from(i < r && val < r_star);
            let positions_left = r.saturating_sub(i + 1);
            let values_left = (0..r_star).filter(|&x| !used[x] && x != val).count();
            let reachable = matched_new + positions_left.min(values_left);
            if matched_new <= target && reachable >= target {
                *slot = val;
                used[val] = true;
                matched = matched_new;
                placed = true;
                break;
            }
        }
        assert!(placed, "no permutation with the requested overlap exists");
    }
    tau
}

/// Assemble the optimal witness at scale `w` (in `lambda = 1` units) for a
/// non-factorizable regime. The permutation is the lexicographically
/// smallest one realizing the scenario-2 mismatch count.
pub fn build_witness_with_scale(params: &RegimeParams, w: f64) -> Result<QpWitness> {
    if !(w > 0.0 && w.is_finite()) {
        return Err(Error::InvalidInput(format!("need w > 0, got {w}")));
    }
    let verdict = factorizability::oracle(params);
    if verdict.factorizable {
        return Err(Error::FactorizableRegime(format!(
            "oracle accepts this regime ({})",
            verdict.reason
        )));
    }
    let d_star = verdict.witness.expect("non-factorizable verdict carries a witness").d;
    let (m, r, rs, lambda) = (params.m, params.r, params.r_star, params.lambda);
    let tau = lexmin_permutation(m, r, rs, r - d_star.min(r));

    let sets = IndexSets::for_permutation(&tau, r, rs);
    let mut x = vec![0.0; m];
    let mut g = vec![0.0; m];
    let mut y = vec![0.0; m];
    let mut v = vec![0.0; m];
    for i in 0..m {
        let case = sets.subcase_of(i);
        let opt = factorizability::subproblem_optimum(case, params, w);
        x[i] = lambda * opt.x;
        g[i] = lambda * opt.g;
        y[tau[i]] = lambda * opt.y;
        v[tau[i]] = lambda * opt.v;
    }
    let wit = QpWitness { x, g, y, v, tau, w: lambda * w, index_sets: sets };

    let max_g = wit.g.iter().cloned().fold(0.0, f64::max);
    assert!(max_g > lambda, "scenario-2 witness must exceed lambda in g");
    let value = factorizability::qp_objective(&wit, params)?;
    assert!(
        value >= -1e-9 * (1.0 + lambda * lambda * params.l * params.l),
        "scenario-2 witness must have nonnegative value, got {value}"
    );
    Ok(wit)
}

pub fn build_witness(params: &RegimeParams) -> Result<QpWitness> {
    build_witness_with_scale(params, 1.0)
}

fn argsort_descending(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| {
        values[b].partial_cmp(&values[a]).unwrap().then(a.cmp(&b))
    });
    idx
}

/// Reorder a feasible witness so that `x` and `y` are descending, replacing
/// the pairing permutation accordingly. Feasibility and the objective value
/// are preserved.
pub fn sort_and_permute(wit: &QpWitness, params: &RegimeParams) -> Result<QpWitness> {
    factorizability::qp_objective(wit, params)?;
    let m = wit.m();
    let tau1 = argsort_descending(&wit.x);
    let tau2 = argsort_descending(&wit.y);
    let mut tau2_inv = vec![0usize; m];
    for (slot, &orig) in tau2.iter().enumerate() {
        tau2_inv[orig] = slot;
    }
    let pick = |v: &[f64], order: &[usize]| order.iter().map(|&i| v[i]).collect::<Vec<_>>();
    let rho: Vec<usize> = (0..m).map(|i| tau2_inv[wit.tau[tau1[i]]]).collect();
    let sorted = QpWitness {
        x: pick(&wit.x, &tau1),
        g: pick(&wit.g, &tau1),
        y: pick(&wit.y, &tau2),
        v: pick(&wit.v, &tau2),
        index_sets: IndexSets::for_permutation(&rho, params.r, params.r_star),
        tau: rho,
        w: wit.w,
    };
    debug_assert!({
        let before = factorizability::qp_objective(wit, params).unwrap();
        let after = factorizability::qp_objective(&sorted, params).unwrap();
        (before - after).abs() <= 1e-12 * (1.0 + before.abs())
    });
    Ok(sorted)
}

/// Diagonal embeddings `(Xbar, Xstar, Gbar, Gstar)` of a sorted witness
/// into `m x n` matrices: `Xbar = tdiag(x)`, `Xstar = tdiag(tau(y))`,
/// `Gbar = tdiag(g)`, `Gstar = tdiag(tau(v))`.
pub fn embed_diagonals(wit: &QpWitness, n: usize) -> Result<(Mat, Mat, Mat, Mat)> {
    let m = wit.m();
    if n < m {
        return Err(Error::InvalidInput(format!("need n >= m, got n={n}, m={m}")));
    }
    let permuted = |v: &[f64]| -> Vec<f64> { wit.tau.iter().map(|&t| v[t]).collect() };
    let xbar = linalg::tilde_diag_embed(&wit.x, m, n)?;
    let xstar = linalg::tilde_diag_embed(&permuted(&wit.y), m, n)?;
    let gbar = linalg::tilde_diag_embed(&wit.g, m, n)?;
    let gstar = linalg::tilde_diag_embed(&permuted(&wit.v), m, n)?;
    Ok((xbar, xstar, gbar, gstar))
}

/// Construct the quadratic objective anchored at `Xbar` whose gradient
/// satisfies `grad_h(Xbar) = -Gbar` and `grad_h(Xstar) = -Gstar`: weight `L`
/// on off-diagonal entries, `mu` on diagonal deviations, plus a rank-one
/// correction whenever `Gbar + mu Xbar != Gstar + mu Xstar`.
pub fn build_h(
    xbar: &Mat,
    xstar: &Mat,
    gbar: &Mat,
    gstar: &Mat,
    l: f64,
    mu: f64,
) -> Result<QuadraticObjective> {
    let numerator = &(gbar + &xbar.scale(mu)) - &(gstar + &xstar.scale(mu));
    let rank_one = if numerator.norm_fro() > 1e-12 {
        let den_half = (xstar - xbar).dot(&numerator);
        if den_half <= 0.0 {
            return Err(Error::ConstructionFailed(format!(
                "rank-one denominator {den_half:.6e} is not positive"
            )));
        }
        Some(RankOneTerm { numerator, denominator: 2.0 * den_half })
    } else {
        None
    };
    let h = QuadraticObjective::entrywise_weighted(
        l,
        mu,
        xbar.clone(),
        gbar.scale(-1.0),
        rank_one,
    )?;
    h.certified_bounds().map_err(|e| {
        Error::ConstructionFailed(format!("curvature certificate failed: {e}"))
    })?;
    Ok(h)
}

/// Factor pair from the square roots of the leading `r` diagonal entries of
/// a diagonal `Xbar` of rank exactly `r`; the product reconstructs `Xbar`.
pub fn build_factor_pair(xbar: &Mat, r: usize) -> Result<FactorPair> {
    let (m, n) = (xbar.rows(), xbar.cols());
    if r == 0 || r > m {
        return Err(Error::InvalidInput(format!("need 1 <= r <= m, got r={r}")));
    }
    let scale = 1.0 + xbar.max_abs();
    for i in 0..m {
        for j in 0..n {
            if i != j && xbar[(i, j)].abs() > 1e-12 * scale {
                return Err(Error::InvalidInput("Xbar must be diagonal".into()));
            }
        }
    }
    let diag = linalg::tilde_diag_extract(xbar);
    for (i, &xi) in diag.iter().enumerate() {
        if i < r && xi <= 1e-12 * scale {
            return Err(Error::InvalidInput(format!(
                "Xbar is rank deficient: diagonal entry {i} is {xi:.3e}"
            )));
        }
        if i >= r && xi.abs() > 1e-12 * scale {
            return Err(Error::InvalidInput(format!("rank of Xbar exceeds r = {r}")));
        }
    }
    let roots: Vec<f64> = diag[..r].iter().map(|x| x.sqrt()).collect();
    let u = Mat::tilde_diag(&roots, m, r);
    let v = Mat::tilde_diag(&roots, n, r);
    FactorPair::new(u, v)
}

/// Run the full factory at witness scale `w`.
pub fn forge_with_scale(params: &RegimeParams, w: f64) -> Result<CounterexampleInstance> {
    let wit = build_witness_with_scale(params, w)?;
    let wit = sort_and_permute(&wit, params)?;
    let (xbar, xstar, gbar, gstar) = embed_diagonals(&wit, params.n)?;
    let h = build_h(&xbar, &xstar, &gbar, &gstar, params.l, params.mu)?;
    let branch = match h.form() {
        objective::HForm::EntrywiseWeighted { rank_one: Some(_), .. } => Branch::RankOneBranch,
        _ => Branch::PlainBranch,
    };
    let pair = build_factor_pair(&xbar, params.r)?;
    Ok(CounterexampleInstance {
        params: params.clone(),
        witness: wit,
        xbar,
        xstar,
        gbar,
        gstar,
        h,
        pair,
        branch,
    })
}

/// Run the full factory at the canonical scale `w = 1`.
pub fn forge(params: &RegimeParams) -> Result<CounterexampleInstance> {
    forge_with_scale(params, 1.0)
}

/// Numerically verify every claimed property of a bundle. Always produces a
/// report; failed checks are recorded by name rather than returned as errors.
pub fn verify_counterexample(inst: &CounterexampleInstance, opts: &VerifyOptions) -> VerificationReport {
    let params = &inst.params;
    let lambda = params.lambda;
    let mut failures: Vec<String> = Vec::new();

    let grad_at_xbar = inst.h.grad(&inst.xbar).ok();
    let grad_norm = grad_at_xbar.as_ref().map(|g| g.norm_fro()).unwrap_or(f64::INFINITY);
    let tol_g = opts.grad_rel_tol * (1.0 + grad_norm);

    // The stored diagonals must be the gradients of the stored objective.
    let id_tol = 1e-12 * (1.0 + inst.gbar.norm_fro() + inst.gstar.norm_fro());
    let xbar_identity = grad_at_xbar
        .as_ref()
        .map(|g| (g + &inst.gbar).norm_fro() <= id_tol)
        .unwrap_or(false);
    let xstar_identity = inst
        .h
        .grad(&inst.xstar)
        .map(|g| (&g + &inst.gstar).norm_fro() <= id_tol)
        .unwrap_or(false);
    if !xbar_identity {
        failures.push("gradient_identity_xbar".into());
    }
    if !xstar_identity {
        failures.push("gradient_identity_xstar".into());
    }

    // Second-order stationarity of the forged pair.
    let (grad_fr_residual, min_hessian_eig) =
        match stationarity::certify_second_order(&inst.h, lambda, &inst.pair, tol_g, opts.hess_eig_tol) {
            Ok(rep) => (rep.grad_residual, rep.min_hessian_eig),
            Err(e) => {
                failures.push(format!("second_order_certification: {e}"));
                (f64::INFINITY, f64::NEG_INFINITY)
            }
        };
    if grad_fr_residual > tol_g {
        failures.push("grad_residual".into());
    }
    if min_hessian_eig < -opts.hess_eig_tol {
        failures.push("min_hessian_eig".into());
    }

    // The competitor is stationary for f.
    let xstar_is_stationary =
        stationarity::is_stationary_f(&inst.h, lambda, &inst.xstar, opts.stationarity_tol)
            .unwrap_or(false);
    if !xstar_is_stationary {
        failures.push("xstar_stationarity".into());
    }

    // Strict objective gap.
    let f_gap = match (
        objective::eval_f(&inst.h, lambda, &inst.xbar),
        objective::eval_f(&inst.h, lambda, &inst.xstar),
    ) {
        (Ok(a), Ok(b)) => a - b,
        _ => f64::NAN,
    };
    if f_gap.is_nan() || f_gap < opts.f_gap_rel_tol * lambda * lambda {
        failures.push("f_gap".into());
    }

    // The forged point itself is not stationary for f.
    let xbar_spectral_excess = grad_at_xbar
        .as_ref()
        .map(|g| linalg::spectral_norm(g) - lambda)
        .unwrap_or(f64::NAN);
    if xbar_spectral_excess.is_nan()
        || xbar_spectral_excess < opts.spectral_excess_rel_tol * lambda
    {
        failures.push("spectral_excess".into());
    }

    // Pairing-gap inequality between the two pseudo-stationary certificates.
    let align_tol = 1e-8 * (1.0 + grad_norm);
    let gap_ineq_value = match (
        stationarity::certify_pseudo_stationary(&inst.h, lambda, &inst.xbar, align_tol),
        stationarity::certify_pseudo_stationary(&inst.h, lambda, &inst.xstar, align_tol),
    ) {
        (Ok(c1), Ok(c2)) => {
            trace::pseudo_stationary_gap(&c1, &c2, params.l, params.mu).unwrap_or(f64::NAN)
        }
        _ => f64::NAN,
    };
    if gap_ineq_value.is_nan() || gap_ineq_value < -opts.gap_ineq_tol * lambda.powi(2).max(1.0) {
        failures.push("gap_inequality".into());
    }

    // Certified curvature bounds, cross-checked by random Rayleigh quotients.
    let bounds_ok = match inst.h.certified_bounds() {
        Ok((mu_c, l_c)) => {
            let tol = 1e-9 * (1.0 + params.l);
            let mut ok = (mu_c - params.mu).abs() <= tol && (l_c - params.l).abs() <= tol;
            if ok {
                let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
                let (m, n) = inst.h.dims();
                let zero = Mat::zeros(m, n);
                for _ in 0..opts.rayleigh_samples {
                    let y = linalg::gaussian_mat(m, n, &mut rng);
                    let q = inst.h.hess_quadform(&zero, &y).unwrap();
                    let nf = y.norm_fro().powi(2);
                    if q < (mu_c - tol) * nf || q > (l_c + tol) * nf {
                        ok = false;
                        break;
                    }
                }
            }
            ok
        }
        Err(_) => false,
    };
    if !bounds_ok {
        failures.push("certified_bounds".into());
    }

    VerificationReport {
        grad_fr_residual,
        min_hessian_eig,
        f_gap,
        xstar_is_stationary,
        xbar_spectral_excess,
        bounds_ok,
        gap_ineq_value,
        all_pass: failures.is_empty(),
        failures,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn canonical_params() -> RegimeParams {
        RegimeParams::new(3, 3, 1, 1, 4.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn canonical_witness_values() {
        let wit = build_witness(&canonical_params()).unwrap();
        assert_eq!(wit.tau, vec![1, 0, 2]);
        assert_eq!(wit.x, vec![1.0, 0.0, 0.0]);
        assert_eq!(wit.g, vec![1.0, 5.0, 0.0]);
        assert_eq!(wit.y, vec![2.5, 0.0, 0.0]);
        assert_eq!(wit.v, vec![1.0, 1.0, 0.0]);
        assert!(wit.index_sets.j1.is_empty());
        assert_eq!(wit.index_sets.j2, vec![0]);
        assert_eq!(wit.index_sets.j3, vec![1]);
        assert_eq!(wit.index_sets.j4, vec![2]);
    }

    #[test]
    fn witness_scales_linearly_in_lambda() {
        let base = build_witness(&canonical_params()).unwrap();
        let p2 = RegimeParams::new(3, 3, 1, 1, 4.0, 1.0, 2.0).unwrap();
        let doubled = build_witness(&p2).unwrap();
        for (a, b) in base.x.iter().zip(&doubled.x) {
            assert!((2.0 * a - b).abs() < 1e-12);
        }
        for (a, b) in base.g.iter().zip(&doubled.g) {
            assert!((2.0 * a - b).abs() < 1e-12);
        }
        assert_eq!(doubled.tau, base.tau);
    }

    #[test]
    fn boundary_kappa_three_witness() {
        let p = RegimeParams::new(3, 3, 1, 1, 3.0, 1.0, 1.0).unwrap();
        let wit = build_witness(&p).unwrap();
        let value = factorizability::qp_objective(&wit, &p).unwrap();
        assert!(value.abs() <= 1e-12);
        assert!(wit.g.iter().cloned().fold(0.0, f64::max) > 1.0);
    }

    #[test]
    fn witness_refused_on_factorizable_regime() {
        let p = RegimeParams::new(3, 3, 2, 1, 3.0, 1.0, 1.0).unwrap();
        assert!(matches!(build_witness(&p), Err(Error::FactorizableRegime(_))));
    }

    #[test]
    fn sorting_preserves_objective_and_is_idempotent() {
        let p = canonical_params();
        let wit = build_witness(&p).unwrap();
        let sorted = sort_and_permute(&wit, &p).unwrap();
        // Canonical witness is already sorted.
        assert_eq!(sorted, wit);

        // A witness with shuffled positive y entries.
        let p2 = RegimeParams::new(4, 4, 2, 2, 5.0, 1.0, 1.0).unwrap();
        let wit = build_witness(&p2).unwrap();
        let before = factorizability::qp_objective(&wit, &p2).unwrap();
        let sorted = sort_and_permute(&wit, &p2).unwrap();
        let after = factorizability::qp_objective(&sorted, &p2).unwrap();
        assert!((before - after).abs() < 1e-12 * (1.0 + before.abs()));
        for w in sorted.x.windows(2) {
            assert!(w[0] >= w[1]);
        }
        for w in sorted.y.windows(2) {
            assert!(w[0] >= w[1]);
        }
    }

    #[test]
    fn sorting_rejects_infeasible_witnesses() {
        let p = canonical_params();
        let mut wit = build_witness(&p).unwrap();
        // x must vanish off [r].
        wit.x = vec![0.0, 1.0, 0.0];
        assert!(matches!(sort_and_permute(&wit, &p), Err(Error::Infeasible(_))));
    }

    #[test]
    fn canonical_embedding() {
        let p = canonical_params();
        let wit = sort_and_permute(&build_witness(&p).unwrap(), &p).unwrap();
        let (xbar, xstar, gbar, gstar) = embed_diagonals(&wit, p.n).unwrap();
        assert_eq!(linalg::tilde_diag_extract(&xbar), vec![1.0, 0.0, 0.0]);
        assert_eq!(linalg::tilde_diag_extract(&xstar), vec![0.0, 2.5, 0.0]);
        assert_eq!(linalg::tilde_diag_extract(&gbar), vec![1.0, 5.0, 0.0]);
        assert_eq!(linalg::tilde_diag_extract(&gstar), vec![1.0, 1.0, 0.0]);

        // Matrix form of the witness value.
        let nsum = &(&gstar + &xstar.scale(p.mu)) - &(&gbar + &xbar.scale(p.mu));
        let lhs = (p.l - p.mu) * nsum.dot(&(&xbar - &xstar)) - nsum.norm_fro().powi(2);
        assert!((lhs - 5.0).abs() < 1e-12);
    }

    #[test]
    fn canonical_quadratic_construction() {
        let p = canonical_params();
        let inst = forge(&p).unwrap();
        assert_eq!(inst.branch, Branch::RankOneBranch);
        match inst.h.form() {
            objective::HForm::EntrywiseWeighted { rank_one: Some(t), .. } => {
                assert!((t.denominator - 5.5).abs() < 1e-12);
                let ratio = 2.0 * t.numerator.norm_fro().powi(2) / t.denominator;
                assert!((ratio - 3.25 / 2.75).abs() < 1e-12);
                assert!(ratio <= p.l - p.mu);
            }
            other => panic!("expected a rank-one entrywise form, got {other:?}"),
        }
        let g_xbar = inst.h.grad(&inst.xbar).unwrap();
        assert!((&g_xbar + &inst.gbar).norm_fro() < 1e-12);
        let g_xstar = inst.h.grad(&inst.xstar).unwrap();
        assert!((&g_xstar + &inst.gstar).norm_fro() < 1e-12);
    }

    #[test]
    fn plain_branch_when_diagonals_coincide() {
        // Gbar + mu*Xbar == Gstar + mu*Xstar forces the plain construction.
        let xbar = Mat::tilde_diag(&[1.0, 0.0], 2, 2);
        let xstar = Mat::tilde_diag(&[0.0, 1.0], 2, 2);
        let gbar = Mat::tilde_diag(&[1.0, 2.0], 2, 2);
        let gstar = Mat::tilde_diag(&[2.0, 1.0], 2, 2);
        let h = build_h(&xbar, &xstar, &gbar, &gstar, 2.0, 1.0).unwrap();
        assert!(matches!(h.form(), objective::HForm::EntrywiseWeighted { rank_one: None, .. }));
    }

    #[test]
    fn rank_one_with_equal_weights_fails() {
        let xbar = Mat::tilde_diag(&[1.0, 0.0], 2, 2);
        let xstar = Mat::tilde_diag(&[0.0, 2.0], 2, 2);
        let gbar = Mat::tilde_diag(&[1.0, 3.0], 2, 2);
        let gstar = Mat::tilde_diag(&[1.0, 1.0], 2, 2);
        assert!(matches!(
            build_h(&xbar, &xstar, &gbar, &gstar, 1.0, 1.0),
            Err(Error::ConstructionFailed(_))
        ));
    }

    #[test]
    fn factor_pair_construction() {
        let p = canonical_params();
        let inst = forge(&p).unwrap();
        assert_eq!(inst.pair.u.as_slice(), &[1.0, 0.0, 0.0]);
        assert_eq!(inst.pair.v.as_slice(), &[1.0, 0.0, 0.0]);
        assert_eq!(&inst.pair.product(), &inst.xbar);

        let x2 = Mat::tilde_diag(&[4.0, 1.0], 2, 2);
        let pair = build_factor_pair(&x2, 2).unwrap();
        assert_eq!(pair.u.as_slice(), &[2.0, 0.0, 0.0, 1.0]);
        assert_eq!(&pair.product(), &x2);

        let deficient = Mat::tilde_diag(&[1.0, 0.0], 2, 2);
        assert!(matches!(build_factor_pair(&deficient, 2), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn canonical_instance_verifies() {
        let inst = forge(&canonical_params()).unwrap();
        let report = verify_counterexample(&inst, &VerifyOptions::default());
        assert!(report.all_pass, "failures: {:?}", report.failures);
        assert!(report.grad_fr_residual <= 1e-10);
        assert!(report.min_hessian_eig >= -1e-8);
        assert!(report.f_gap > 0.0);
        assert!((report.xbar_spectral_excess - 4.0).abs() < 1e-12);
    }

    #[test]
    fn boundary_instance_verifies() {
        let p = RegimeParams::new(3, 3, 1, 1, 3.0, 1.0, 1.0).unwrap();
        let inst = forge(&p).unwrap();
        let report = verify_counterexample(&inst, &VerifyOptions::default());
        assert!(report.all_pass, "failures: {:?}", report.failures);
        assert!(report.min_hessian_eig >= -1e-8);
    }

    #[test]
    fn forge_refuses_factorizable_regime() {
        let p = RegimeParams::new(3, 3, 2, 1, 3.0, 1.0, 1.0).unwrap();
        assert!(matches!(forge(&p), Err(Error::FactorizableRegime(_))));
    }

    #[test]
    fn corrupted_instance_fails_verification_with_named_check() {
        let mut inst = forge(&canonical_params()).unwrap();
        inst.gbar[(1, 1)] += 0.1;
        let report = verify_counterexample(&inst, &VerifyOptions::default());
        assert!(!report.all_pass);
        assert!(!report.failures.is_empty());
    }

    #[test]
    fn competitor_beats_random_points() {
        let inst = forge(&canonical_params()).unwrap();
        let f_star = objective::eval_f(&inst.h, inst.params.lambda, &inst.xstar).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let x = linalg::gaussian_mat(3, 3, &mut rng).scale(2.0);
            let f_x = objective::eval_f(&inst.h, inst.params.lambda, &x).unwrap();
            assert!(f_x >= f_star - 1e-9);
        }
    }

    #[test]
    fn tightness_of_the_trailing_gradient_bound() {
        let inst = forge(&canonical_params()).unwrap();
        let tol_g = 1e-9 * (1.0 + inst.h.grad(&inst.xbar).unwrap().norm_fro());
        let dec = stationarity::certify_first_order(&inst.h, 1.0, &inst.pair, tol_g).unwrap();
        // d_2 = lambda + L * sigma_1(Xbar) exactly on the canonical instance.
        assert!((dec.d[1] - 5.0).abs() < 1e-12);
        assert!(stationarity::spectral_norm_bound_check(&dec, 1.0, 4.0));
    }
}
