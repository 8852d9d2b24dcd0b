//! Perturbed gradient descent on the factorized objective with dense
//! negative-curvature escape, plus a sweep harness that tabulates empirical
//! outcomes against the oracle's prediction per regime cell.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factorizability::{self};
use crate::forge;
use crate::linalg::{self, Mat};
use crate::objective::{self, FactorPair, QuadraticObjective, RegimeParams};
use crate::stationarity::{self, SecondOrderReport, StationarityVerdict};

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub enum StepRule {
    /// Constant step capped by `1 / (2*(L*B^2 + lambda))` where `B` bounds
    /// the current iterate norms; the cap refreshes as iterates grow.
    FixedStep { eta: f64 },
    /// Backtracking with contraction `beta` and sufficient-decrease slope `c`.
    ArmijoBacktracking { beta: f64, c: f64 },
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SolverOptions {
    pub max_iters: usize,
    pub step_rule: StepRule,
    pub grad_tol: f64,
    pub eig_tol: f64,
    pub perturb_radius: f64,
    pub escape_budget: usize,
    /// Tolerance for the final stationarity-of-`f` classification.
    pub stationarity_tol: f64,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iters: 5000,
            // c = 0.3 rejects the near-stationary zigzag steps that a loose
            // sufficient-decrease constant would accept.
            step_rule: StepRule::ArmijoBacktracking { beta: 0.5, c: 0.3 },
            // Below ~1e-8 the sufficient-decrease test drowns in rounding
            // noise at unit objective scale; 1e-7 keeps a comfortable margin.
            grad_tol: 1e-7,
            eig_tol: 1e-8,
            perturb_radius: 1e-3,
            escape_budget: 20,
            stationarity_tol: 1e-6,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    /// Certified second-order and the product is a stationary point of `f`;
    /// with strongly convex `h` this is the global minimizer.
    GlobalByCertificate,
    /// Certified second-order but the product is not stationary for `f`.
    SpuriousSecondOrder,
    /// Budgets exhausted before certification.
    Undetermined,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct IterStat {
    pub objective: f64,
    pub grad_norm: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveTrace {
    pub iterates: Vec<IterStat>,
    pub final_pair: FactorPair,
    pub report: SecondOrderReport,
    pub classification: Classification,
}

fn grad_pair(h: &QuadraticObjective, lambda: f64, pair: &FactorPair) -> Result<(Mat, Mat, f64)> {
    let (gu, gv) = objective::grad_fr(h, lambda, pair)?;
    let norm = (gu.norm_fro().powi(2) + gv.norm_fro().powi(2)).sqrt();
    Ok((gu, gv, norm))
}

fn split_direction(z: &[f64], m: usize, n: usize, r: usize) -> (Mat, Mat) {
    let du = Mat::from_fn(m, r, |i, j| z[i * r + j]);
    let dv = Mat::from_fn(n, r, |i, j| z[m * r + i * r + j]);
    (du, dv)
}

/// Minimize `F_r` from `init` until the gradient is below `grad_tol` and the
/// smallest Hessian eigenvalue is above `-eig_tol`, escaping along negative
/// curvature while the budget lasts. Ending with exhausted budgets is the
/// `Undetermined` outcome, not an error.
pub fn solve(
    h: &QuadraticObjective,
    lambda: f64,
    r: usize,
    init: &FactorPair,
    opts: &SolverOptions,
) -> Result<SolveTrace> {
    let (m, n) = h.dims();
    if init.u.rows() != m || init.v.rows() != n || init.width() != r {
        return Err(Error::InvalidInput("initial pair dimensions differ from the objective".into()));
    }
    let l_bound = h.certified_bounds().map(|b| b.1).unwrap_or(f64::NAN);

    let mut pair = init.clone();
    let mut iterates = Vec::new();
    let mut escapes = 0usize;
    let mut iter = 0usize;
    while iter < opts.max_iters {
        iter += 1;
        let objective_value = objective::eval_fr(h, lambda, &pair)?;
        let (gu, gv, gnorm) = grad_pair(h, lambda, &pair)?;
        iterates.push(IterStat { objective: objective_value, grad_norm: gnorm });

        if gnorm <= opts.grad_tol {
            let hm = objective::hess_matrix_fr(h, lambda, &pair)?;
            let (min_eig, eigvec) = linalg::min_eigenpair(&hm);
            if min_eig >= -opts.eig_tol {
                break;
            }
            if escapes >= opts.escape_budget {
                break;
            }
            escapes += 1;
            let (du, dv) = split_direction(&eigvec, m, n, r);
            let step = opts.perturb_radius;
            let forward = FactorPair::new(&pair.u + &du.scale(step), &pair.v + &dv.scale(step))?;
            let backward = FactorPair::new(&pair.u - &du.scale(step), &pair.v - &dv.scale(step))?;
            pair = if objective::eval_fr(h, lambda, &forward)?
                <= objective::eval_fr(h, lambda, &backward)?
            {
                forward
            } else {
                backward
            };
            continue;
        }

        match opts.step_rule {
            StepRule::FixedStep { eta } => {
                if !l_bound.is_finite() {
                    return Err(Error::NotInClass(
                        "fixed-step rule needs a certified curvature bound".into(),
                    ));
                }
                let b = pair.u.norm_fro().max(pair.v.norm_fro()).max(1.0);
                let safe = 1.0 / (2.0 * (l_bound * b * b + lambda));
                let step = eta.min(safe);
                pair = FactorPair::new(&pair.u - &gu.scale(step), &pair.v - &gv.scale(step))?;
            }
            StepRule::ArmijoBacktracking { beta, c } => {
                let mut t = 1.0;
                let mut accepted = false;
                for _ in 0..60 {
                    let cand =
                        FactorPair::new(&pair.u - &gu.scale(t), &pair.v - &gv.scale(t))?;
                    let cand_val = objective::eval_fr(h, lambda, &cand)?;
                    if cand_val <= objective_value - c * t * gnorm * gnorm {
                        pair = cand;
                        accepted = true;
                        break;
                    }
                    t *= beta;
                }
                if !accepted {
                    // Step length underflow: no further progress possible.
                    break;
                }
            }
        }
    }

    let report = stationarity::certify_second_order(h, lambda, &pair, opts.grad_tol, opts.eig_tol)?;
    let classification = if report.verdict == StationarityVerdict::SecondOrder {
        let x = pair.product();
        if stationarity::is_stationary_f(h, lambda, &x, opts.stationarity_tol)? {
            Classification::GlobalByCertificate
        } else {
            Classification::SpuriousSecondOrder
        }
    } else {
        Classification::Undetermined
    };
    Ok(SolveTrace { iterates, final_pair: pair, report, classification })
}

/// One row of the empirical phase diagram.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PhaseCell {
    pub params: RegimeParams,
    pub oracle_factorizable: bool,
    pub n_global: usize,
    pub n_spurious: usize,
    pub n_undetermined: usize,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct PhaseTable {
    pub cells: Vec<PhaseCell>,
}

impl PhaseTable {
    /// CSV with one row per cell:
    /// `m,n,r,r_star,L,mu,lambda,oracle,n_global,n_spurious,n_undetermined`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "m",
            "n",
            "r",
            "r_star",
            "L",
            "mu",
            "lambda",
            "oracle",
            "n_global",
            "n_spurious",
            "n_undetermined",
        ])
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
        for cell in &self.cells {
            let p = &cell.params;
            w.write_record([
                p.m.to_string(),
                p.n.to_string(),
                p.r.to_string(),
                p.r_star.to_string(),
                format!("{}", p.l),
                format!("{}", p.mu),
                format!("{}", p.lambda),
                cell.oracle_factorizable.to_string(),
                cell.n_global.to_string(),
                cell.n_spurious.to_string(),
                cell.n_undetermined.to_string(),
            ])
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Random positive definite instance with spectrum inside `[mu, L]` and a
/// designated rank-`r*` matrix pinned as a stationary point of `f` (hence
/// the unique global minimizer, by strong convexity): the linear term is
/// chosen so the gradient at the target lies in `-lambda` times the
/// nuclear-norm subdifferential.
pub fn random_psd_instance(params: &RegimeParams, seed: u64) -> Result<(QuadraticObjective, Mat)> {
    let (m, n, rs, lambda) = (params.m, params.n, params.r_star, params.lambda);
    let dim = m * n;
    let q = linalg::random_orthogonal(dim, seed)?;
    let basis: Vec<Mat> = (0..dim).map(|c| Mat::from_fn(m, n, |i, j| q[(i * n + j, c)])).collect();
    let eigenvalues: Vec<f64> = (0..dim)
        .map(|k| {
            if dim == 1 {
                params.mu
            } else {
                params.mu + (params.l - params.mu) * k as f64 / (dim - 1) as f64
            }
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7a11);
    let rframe = linalg::random_orthogonal(m, seed.wrapping_add(1))?;
    let pframe = linalg::random_orthogonal(n, seed.wrapping_add(2))?;
    let mut sigma = vec![0.0; m];
    for s in sigma.iter_mut().take(rs) {
        *s = 0.5 + rand::Rng::random::<f64>(&mut rng);
    }
    sigma.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let xstar = &(&rframe * &Mat::tilde_diag(&sigma, m, n)) * &pframe.transpose();

    // Gradient target: lambda on the leading block, lambda/2 beyond.
    let mut d = vec![0.5 * lambda; m];
    for di in d.iter_mut().take(rs) {
        *di = lambda;
    }
    let gstar = &(&rframe * &Mat::tilde_diag(&d, m, n)) * &pframe.transpose();

    // linear = -G* - A(X*), so that grad_h(X*) = -G*.
    let mut ax = Mat::zeros(m, n);
    for (b, &e) in basis.iter().zip(&eigenvalues) {
        ax = &ax + &b.scale(e * b.dot(&xstar));
    }
    let linear = &gstar.scale(-1.0) - &ax;
    let h = QuadraticObjective::general_psd(basis, eigenvalues, linear, 0.0)?;
    Ok((h, xstar))
}

fn random_init(m: usize, n: usize, r: usize, scale: f64, rng: &mut ChaCha8Rng) -> FactorPair {
    FactorPair::new(
        linalg::gaussian_mat(m, r, rng).scale(scale),
        linalg::gaussian_mat(n, r, rng).scale(scale),
    )
    .expect("widths match")
}

/// Run `trials_per_cell` solves per regime cell and tabulate outcomes.
///
/// Non-factorizable cells use the forged instance: the first trial starts at
/// the forged pair, the rest at random points. Factorizable cells use a
/// random positive definite instance with a pinned minimizer. Cells are
/// independent and run in parallel; aggregation order follows the grid.
pub fn sweep(grid: &[RegimeParams], trials_per_cell: usize, opts: &SolverOptions) -> Result<PhaseTable> {
    let cells: Result<Vec<PhaseCell>> = grid
        .par_iter()
        .enumerate()
        .map(|(cell_idx, params)| {
            let verdict = factorizability::oracle(params);
            let mut counts = (0usize, 0usize, 0usize);
            let cell_seed = opts.seed.wrapping_add(1_000_003 * cell_idx as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(cell_seed);
            let record = |c: Classification, counts: &mut (usize, usize, usize)| match c {
                Classification::GlobalByCertificate => counts.0 += 1,
                Classification::SpuriousSecondOrder => counts.1 += 1,
                Classification::Undetermined => counts.2 += 1,
            };
            if !verdict.factorizable {
                let inst = forge::forge(params)?;
                for trial in 0..trials_per_cell {
                    let init = if trial == 0 {
                        inst.pair.clone()
                    } else {
                        random_init(params.m, params.n, params.r, 0.5, &mut rng)
                    };
                    let trace = solve(&inst.h, params.lambda, params.r, &init, opts)?;
                    record(trace.classification, &mut counts);
                }
            } else {
                let (h, _xstar) = random_psd_instance(params, cell_seed)?;
                for _ in 0..trials_per_cell {
                    let init = random_init(params.m, params.n, params.r, 0.5, &mut rng);
                    let trace = solve(&h, params.lambda, params.r, &init, opts)?;
                    record(trace.classification, &mut counts);
                }
            }
            Ok(PhaseCell {
                params: params.clone(),
                oracle_factorizable: verdict.factorizable,
                n_global: counts.0,
                n_spurious: counts.1,
                n_undetermined: counts.2,
            })
        })
        .collect();
    Ok(PhaseTable { cells: cells? })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_anchor3() -> QuadraticObjective {
        QuadraticObjective::entrywise_weighted(
            1.0,
            1.0,
            Mat::new(1, 1, vec![3.0]).unwrap(),
            Mat::zeros(1, 1),
            None,
        )
        .unwrap()
    }

    #[test]
    fn scalar_instance_converges_to_the_global_pair() {
        let h = scalar_anchor3();
        let opts = SolverOptions::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let init = random_init(1, 1, 1, 1.0, &mut rng);
            let trace = solve(&h, 1.0, 1, &init, &opts).unwrap();
            assert_eq!(trace.classification, Classification::GlobalByCertificate);
            let uv = trace.final_pair.u[(0, 0)] * trace.final_pair.v[(0, 0)];
            assert!((uv - 2.0).abs() < 1e-6, "uv = {uv}");
        }
    }

    #[test]
    fn forged_spurious_point_is_detected_immediately() {
        let params = RegimeParams::new(3, 3, 1, 1, 4.0, 1.0, 1.0).unwrap();
        let inst = forge::forge(&params).unwrap();
        let trace = solve(&inst.h, 1.0, 1, &inst.pair, &SolverOptions::default()).unwrap();
        assert_eq!(trace.classification, Classification::SpuriousSecondOrder);
        assert_eq!(trace.iterates.len(), 1);
    }

    #[test]
    fn armijo_descent_is_monotone() {
        let h = scalar_anchor3();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let init = random_init(1, 1, 1, 2.0, &mut rng);
        let trace = solve(&h, 1.0, 1, &init, &SolverOptions::default()).unwrap();
        for w in trace.iterates.windows(2) {
            assert!(w[1].objective <= w[0].objective + 1e-12 * (1.0 + w[0].objective.abs()));
        }
    }

    #[test]
    fn fixed_step_also_converges() {
        let h = scalar_anchor3();
        let opts = SolverOptions {
            step_rule: StepRule::FixedStep { eta: 0.2 },
            max_iters: 20000,
            ..SolverOptions::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let init = random_init(1, 1, 1, 1.0, &mut rng);
        let trace = solve(&h, 1.0, 1, &init, &opts).unwrap();
        assert_eq!(trace.classification, Classification::GlobalByCertificate);
    }

    #[test]
    fn pinned_minimizer_is_stationary() {
        let params = RegimeParams::new(3, 4, 2, 1, 3.0, 1.0, 1.0).unwrap();
        let (h, xstar) = random_psd_instance(&params, 5).unwrap();
        assert!(stationarity::is_stationary_f(&h, 1.0, &xstar, 1e-8).unwrap());
        let (mu, l) = h.certified_bounds().unwrap();
        assert!(mu >= params.mu - 1e-12 && l <= params.l + 1e-12);
    }

    #[test]
    fn sweep_counts_spurious_on_sharp_cells_only() {
        let grid = vec![
            RegimeParams::new(3, 3, 1, 1, 2.0, 1.0, 1.0).unwrap(),
            RegimeParams::new(3, 3, 1, 1, 4.0, 1.0, 1.0).unwrap(),
        ];
        let table = sweep(&grid, 3, &SolverOptions::default()).unwrap();
        assert_eq!(table.cells.len(), 2);
        let benign = &table.cells[0];
        assert!(benign.oracle_factorizable);
        assert_eq!(benign.n_spurious, 0);
        let sharp = &table.cells[1];
        assert!(!sharp.oracle_factorizable);
        // Trial 0 starts at the forged pair and must stay there.
        assert!(sharp.n_spurious >= 1);
    }

    #[test]
    fn empty_grid_gives_empty_table() {
        let table = sweep(&[], 5, &SolverOptions::default()).unwrap();
        assert!(table.cells.is_empty());
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("m,n,r,r_star,L,mu,lambda,oracle"));
    }

    #[test]
    fn csv_has_one_row_per_cell() {
        let grid = vec![RegimeParams::new(2, 2, 1, 1, 2.0, 1.0, 1.0).unwrap()];
        let table = sweep(&grid, 2, &SolverOptions::default()).unwrap();
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.lines().nth(1).unwrap().starts_with("2,2,1,1,2,1,1,true,"));
    }
}
