//! Factorizability analysis for nuclear-norm-regularized low-rank
//! optimization.
//!
//! The regularized problem minimizes `f(X) = h(X) + lambda*||X||_*` over
//! `m x n` matrices; its Burer-Monteiro factorization minimizes
//! `F_r(U, V) = h(UV^T) + lambda*(||U||_F^2 + ||V||_F^2)/2` over factor
//! pairs of width `r`. The objective `f` is *r-factorizable* when every
//! second-order stationary pair of `F_r` maps to a global minimizer of `f`
//! through `(U, V) -> UV^T`.
//!
//! For `mu`-strongly convex `h` with `L`-Lipschitz gradient (condition
//! number `kappa = L/mu`) and solution rank `r*`, this crate
//!
//! * decides factorizability by the tight threshold — factorizable iff
//!   `r = m` or `r >= r*` and `min{r, m-r*} > ((kappa-1)^2/4) min{r*, m-r}`
//!   ([`factorizability`]),
//! * explicitly constructs and numerically certifies counterexamples in
//!   every regime below the threshold ([`mod@forge`]),
//! * certifies first- and second-order stationarity of factorized iterates
//!   and pseudo-stationarity of matrices ([`stationarity`]),
//! * runs an empirical second-order solver and sweep harness against the
//!   oracle's phase diagram ([`solver`]).
//!
//! [`trace`] carries the combinatorial machinery (doubly stochastic
//! completion and a paired variant of von Neumann's trace inequality) that
//! links matrix frames to permutations; [`linalg`] provides the dense
//! kernels; [`io`] the file formats used by the command-line tool.

pub mod error;
pub mod factorizability;
pub mod forge;
pub mod io;
pub mod linalg;
pub mod objective;
pub mod solver;
pub mod stationarity;
pub mod trace;

pub use error::{Error, Result};
pub use factorizability::{
    brute_force_qp, oracle, qp_objective, reduced_qp_value, solve_reduced_qp, subproblem_optimum,
    CaseLabel, GridSpec, IndexSets, QpWitness, ReducedWitness, Scenario, SubCase, Verdict,
};
pub use forge::{
    build_factor_pair, build_h, build_witness, embed_diagonals, forge, forge_with_scale,
    sort_and_permute, verify_counterexample, Branch, CounterexampleInstance, VerificationReport,
    VerifyOptions,
};
pub use linalg::{
    full_svd, norms, random_orthogonal, simultaneous_block_svd, tilde_diag_embed, FullSvd, Mat,
    Norms,
};
pub use objective::{
    eval_f, eval_fr, grad_fr, hess_matrix_fr, hess_quadform_fr, FactorPair, HForm,
    QuadraticObjective, RankOneTerm, RegimeParams,
};
pub use solver::{
    random_psd_instance, solve, sweep, Classification, PhaseCell, PhaseTable, SolveTrace,
    SolverOptions, StepRule,
};
pub use stationarity::{
    balanced_decompose, certify_first_order, certify_pseudo_stationary, certify_second_order,
    is_stationary_f, nuclear_subdiff_member, spectral_norm_bound_check, SecondOrderReport,
    StationarityVerdict, StationaryDecomposition, Tolerances,
};
pub use trace::{
    complete_to_doubly_stochastic, lhs_trace_form, max_permutation_pairing,
    pseudo_stationary_gap, witness_orthogonal_pair, AssignmentResult,
};
