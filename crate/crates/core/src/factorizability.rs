//! The factorizability decision layer.
//!
//! Two independent routes classify a regime:
//!
//! * [`oracle`] evaluates the closed threshold: factorizable iff `r = m` or
//!   `r >= r*` and `min{r, m-r*} > ((kappa-1)^2/4) * min{r*, m-r}`.
//! * [`solve_reduced_qp`] replays the case analysis of the reduced problem
//!   `sup H(d, w)` over the feasible mismatch counts `d`, emitting scenario
//!   S1 (no qualifying witness) or S2 (a nonnegative-value witness with a
//!   gradient entry exceeding `lambda` exists) together with the witness.
//!
//! The two must agree everywhere; the acceptance suite sweeps the grid.
//! A gridded brute-force evaluation of the full witness program backs the
//! closed forms as an approximation oracle for small `m`.

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::RegimeParams;

/// Relative tolerance for detecting the exact `kappa = 1` and `kappa = 3` cases.
pub const KAPPA_SNAP_REL_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scenario {
    S1,
    S2,
}

/// Case label naming the clause that fired during classification.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CaseLabel {
    #[serde(rename = "r=m")]
    RIsM,
    #[serde(rename = "rstar=0")]
    RStarZero,
    #[serde(rename = "threshold")]
    Threshold,
    #[serde(rename = "threshold-failed")]
    ThresholdFailed,
    #[serde(rename = "r<rstar")]
    RLtRStar,
    #[serde(rename = "kappa=1")]
    KappaOne,
    #[serde(rename = "kappa<3")]
    KappaLtThree,
    #[serde(rename = "kappa=3,r>rstar")]
    KappaThreeRGtRStar,
    #[serde(rename = "kappa=3,r=rstar")]
    KappaThreeREqRStar,
    #[serde(rename = "alpha>min")]
    AlphaGtMin,
    #[serde(rename = "alpha<=min")]
    AlphaLeMin,
}

impl std::fmt::Display for CaseLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            CaseLabel::RIsM => "r=m",
            CaseLabel::RStarZero => "rstar=0",
            CaseLabel::Threshold => "threshold",
            CaseLabel::ThresholdFailed => "threshold-failed",
            CaseLabel::RLtRStar => "r<rstar",
            CaseLabel::KappaOne => "kappa=1",
            CaseLabel::KappaLtThree => "kappa<3",
            CaseLabel::KappaThreeRGtRStar => "kappa=3,r>rstar",
            CaseLabel::KappaThreeREqRStar => "kappa=3,r=rstar",
            CaseLabel::AlphaGtMin => "alpha>min",
            CaseLabel::AlphaLeMin => "alpha<=min",
        };
        f.write_str(s)
    }
}

/// Witness of the reduced problem: mismatch count `d` and scale `w`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReducedWitness {
    pub d: usize,
    pub w: f64,
}

/// Classification outcome. `factorizable` iff `scenario == S1`; a reduced
/// witness is present iff `scenario == S2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub factorizable: bool,
    pub scenario: Scenario,
    pub witness: Option<ReducedWitness>,
    pub alpha: Option<f64>,
    pub reason: CaseLabel,
}

/// Condition number with the exact `kappa = 1` and `kappa = 3` cases snapped
/// to their integer values, so that both classification routes split on the
/// same branch for inputs within rounding distance of the boundaries.
fn effective_kappa(params: &RegimeParams) -> f64 {
    let kappa = params.kappa();
    for exact in [1.0, 3.0] {
        if (kappa - exact).abs() <= KAPPA_SNAP_REL_TOL * exact {
            return exact;
        }
    }
    kappa
}

fn s2_witness(params: &RegimeParams) -> ReducedWitness {
    let d = if params.r >= params.r_star {
        params.r.min(params.m - params.r_star)
    } else {
        0
    };
    ReducedWitness { d, w: 1.0 }
}

/// Closed-threshold factorizability test.
pub fn oracle(params: &RegimeParams) -> Verdict {
    let kappa = effective_kappa(params);
    let (m, r, rs) = (params.m, params.r, params.r_star);
    if r == m {
        return Verdict {
            factorizable: true,
            scenario: Scenario::S1,
            witness: None,
            alpha: None,
            reason: CaseLabel::RIsM,
        };
    }
    let lhs = r.min(m - rs) as f64;
    let rhs = (kappa - 1.0).powi(2) / 4.0 * rs.min(m - r) as f64;
    if r >= rs && lhs > rhs {
        return Verdict {
            factorizable: true,
            scenario: Scenario::S1,
            witness: None,
            alpha: None,
            reason: CaseLabel::Threshold,
        };
    }
    Verdict {
        factorizable: false,
        scenario: Scenario::S2,
        witness: Some(s2_witness(params)),
        alpha: None,
        reason: if r < rs { CaseLabel::RLtRStar } else { CaseLabel::ThresholdFailed },
    }
}

/// Closed-form optimal value of the reduced problem at mismatch count `d`
/// and scale `w`:
/// `H(d, w) = (-L*mu*d + (r* - r + d) * L*(L-mu)^2/(4*mu)) * w^2`.
pub fn reduced_qp_value(d: usize, w: f64, params: &RegimeParams) -> Result<f64> {
    if !(w > 0.0 && w.is_finite()) {
        return Err(Error::InvalidInput(format!("need w > 0, got {w}")));
    }
    let lower = (params.r as i64 - params.r_star as i64).max(0);
    let upper = params.r.min(params.m - params.r_star) as i64;
    if (d as i64) < lower || (d as i64) > upper {
        return Err(Error::InfeasibleD(format!(
            "d = {d} outside [{lower}, {upper}] for r={}, r*={}, m={}",
            params.r, params.r_star, params.m
        )));
    }
    let (l, mu) = (params.l, params.mu);
    let gain = (params.r_star as f64 - params.r as f64 + d as f64) * l * (l - mu).powi(2) / (4.0 * mu);
    Ok((-l * mu * d as f64 + gain) * w * w)
}

/// Replay the full case analysis of the reduced problem.
pub fn solve_reduced_qp(params: &RegimeParams) -> Verdict {
    let kappa = effective_kappa(params);
    let (m, r, rs) = (params.m, params.r, params.r_star);

    let s1 = |reason: CaseLabel, alpha: Option<f64>| Verdict {
        factorizable: true,
        scenario: Scenario::S1,
        witness: None,
        alpha,
        reason,
    };
    let s2 = |reason: CaseLabel, alpha: Option<f64>| {
        let wit = s2_witness(params);
        let h = reduced_qp_value(wit.d, wit.w, params)
            .expect("scenario-2 witness must be feasible");
        assert!(
            h >= -1e-12 * (1.0 + params.l * params.l),
            "scenario-2 witness value {h} must be nonnegative"
        );
        assert!(rs + wit.d > r, "scenario-2 witness must have a strict gradient excess");
        Verdict {
            factorizable: false,
            scenario: Scenario::S2,
            witness: Some(wit),
            alpha,
            reason,
        }
    };

    if r == m {
        return s1(CaseLabel::RIsM, None);
    }
    if rs == 0 {
        return s1(CaseLabel::RStarZero, None);
    }
    if r < rs {
        return s2(CaseLabel::RLtRStar, None);
    }
    // From here on m > r >= rs > 0.
    if kappa == 1.0 {
        return s1(CaseLabel::KappaOne, None);
    }
    if kappa == 3.0 {
        return if r > rs {
            s1(CaseLabel::KappaThreeRGtRStar, None)
        } else {
            s2(CaseLabel::KappaThreeREqRStar, None)
        };
    }
    let alpha = (r as f64 - rs as f64) / (1.0 - 4.0 / (kappa - 1.0).powi(2));
    if kappa < 3.0 {
        return s1(CaseLabel::KappaLtThree, Some(alpha));
    }
    if alpha > r.min(m - rs) as f64 {
        s1(CaseLabel::AlphaGtMin, Some(alpha))
    } else {
        s2(CaseLabel::AlphaLeMin, Some(alpha))
    }
}

/// Index case of the per-coordinate subproblem, determined by whether the
/// row index lies in `[r]` and its image under `tau` lies in `[r*]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SubCase {
    J1,
    J2,
    J3,
    J4,
}

/// Closed-form optimum of one per-index subproblem, in units normalized to
/// `lambda = 1`. The coordinate values are the canonical argmax choices;
/// `description` names the full argmax set where it is not a single point.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SubproblemOptimum {
    pub value: f64,
    pub x: f64,
    pub g: f64,
    pub y: f64,
    pub v: f64,
    pub description: String,
}

/// Closed-form subproblem optimum for one index case at scale `w`.
pub fn subproblem_optimum(case: SubCase, params: &RegimeParams, w: f64) -> SubproblemOptimum {
    assert!(w > 0.0, "scale must be positive");
    let (l, mu) = (params.l, params.mu);
    match case {
        SubCase::J1 => SubproblemOptimum {
            value: 0.0,
            x: w,
            g: 1.0,
            y: w,
            v: 1.0,
            description: "x = y >= w free; canonical x = y = w".into(),
        },
        SubCase::J2 => SubproblemOptimum {
            value: -l * mu * w * w,
            x: w,
            g: 1.0,
            y: 0.0,
            v: 1.0,
            description: "unique: x = w, v = 1".into(),
        },
        SubCase::J3 => SubproblemOptimum {
            value: l * (l - mu).powi(2) * w * w / (4.0 * mu),
            x: 0.0,
            g: 1.0 + l * w,
            y: (l + mu) * w / (2.0 * mu),
            v: 1.0,
            description: if l == mu {
                "g in (1, 1+Lw] free with y = (L+mu)(g-1)/(2Lmu); canonical g = 1+Lw".into()
            } else {
                "unique: g = 1+Lw, y = (L+mu)w/(2mu)".into()
            },
        },
        SubCase::J4 => SubproblemOptimum {
            value: 0.0,
            x: 0.0,
            g: 0.0,
            y: 0.0,
            v: 0.0,
            description: "g = v in [0,1] free; canonical g = v = 0".into(),
        },
    }
}

/// The index-set partition of `[m]` induced by a permutation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexSets {
    pub j1: Vec<usize>,
    pub j2: Vec<usize>,
    pub j3: Vec<usize>,
    pub j4: Vec<usize>,
}

impl IndexSets {
    /// `J1 = [r] ∩ tau^{-1}[r*]`, `J2 = [r] \ J1`,
    /// `J3 = ([m] \ [r]) ∩ tau^{-1}[r*]`, `J4` the rest.
    pub fn for_permutation(tau: &[usize], r: usize, r_star: usize) -> IndexSets {
        let mut sets = IndexSets { j1: vec![], j2: vec![], j3: vec![], j4: vec![] };
        for (i, &ti) in tau.iter().enumerate() {
            match (i < r, ti < r_star) {
                (true, true) => sets.j1.push(i),
                (true, false) => sets.j2.push(i),
                (false, true) => sets.j3.push(i),
                (false, false) => sets.j4.push(i),
            }
        }
        sets
    }

    pub fn subcase_of(&self, i: usize) -> SubCase {
        if self.j1.contains(&i) {
            SubCase::J1
        } else if self.j2.contains(&i) {
            SubCase::J2
        } else if self.j3.contains(&i) {
            SubCase::J3
        } else {
            SubCase::J4
        }
    }
}

/// A feasible point of the witness program: vectors in actual `lambda`
/// units, the pairing permutation, the common scale `w`, and the induced
/// index sets (the mismatch count is `|J2|`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QpWitness {
    pub x: Vec<f64>,
    pub g: Vec<f64>,
    pub y: Vec<f64>,
    pub v: Vec<f64>,
    pub tau: Vec<usize>,
    pub w: f64,
    pub index_sets: IndexSets,
}

impl QpWitness {
    pub fn d_tau(&self) -> usize {
        self.index_sets.j2.len()
    }

    pub fn m(&self) -> usize {
        self.x.len()
    }
}

fn is_permutation(tau: &[usize], m: usize) -> bool {
    if tau.len() != m {
        return false;
    }
    let mut seen = vec![false; m];
    for &t in tau {
        if t >= m || seen[t] {
            return false;
        }
        seen[t] = true;
    }
    true
}

fn check_feasible(wit: &QpWitness, params: &RegimeParams) -> Result<()> {
    let (m, r, rs, lambda, l) = (params.m, params.r, params.r_star, params.lambda, params.l);
    if wit.m() != m || wit.g.len() != m || wit.y.len() != m || wit.v.len() != m {
        return Err(Error::Infeasible("vector lengths must equal m".into()));
    }
    if !is_permutation(&wit.tau, m) {
        return Err(Error::Infeasible("tau is not a permutation of [m]".into()));
    }
    if wit.w.is_nan() || wit.w <= 0.0 {
        return Err(Error::Infeasible("scale w must be positive".into()));
    }
    let tol = 1e-9 * (1.0 + lambda);
    let min_x = wit.x[..r].iter().cloned().fold(f64::INFINITY, f64::min);
    for i in 0..m {
        if i < r {
            if wit.x[i].is_nan() || wit.x[i] <= 0.0 {
                return Err(Error::Infeasible(format!("x[{i}] must be positive")));
            }
            if wit.x[i] < wit.w - tol {
                return Err(Error::Infeasible(format!("x[{i}] below the scale w")));
            }
            if (wit.g[i] - lambda).abs() > tol {
                return Err(Error::Infeasible(format!("g[{i}] must equal lambda")));
            }
        } else {
            if wit.x[i].abs() > tol {
                return Err(Error::Infeasible(format!("x[{i}] must vanish off [r]")));
            }
            if wit.g[i] < -tol || wit.g[i] > lambda + l * min_x + tol {
                return Err(Error::Infeasible(format!("g[{i}] outside [0, lambda + L*min x]")));
            }
        }
        if i < rs {
            if wit.y[i].is_nan() || wit.y[i] <= 0.0 {
                return Err(Error::Infeasible(format!("y[{i}] must be positive")));
            }
            if (wit.v[i] - lambda).abs() > tol {
                return Err(Error::Infeasible(format!("v[{i}] must equal lambda")));
            }
        } else {
            if wit.y[i].abs() > tol {
                return Err(Error::Infeasible(format!("y[{i}] must vanish off [r*]")));
            }
            if wit.v[i] < -tol || wit.v[i] > lambda + tol {
                return Err(Error::Infeasible(format!("v[{i}] outside [0, lambda]")));
            }
        }
    }
    if wit.index_sets != IndexSets::for_permutation(&wit.tau, r, rs) {
        return Err(Error::Infeasible("index sets disagree with tau".into()));
    }
    Ok(())
}

/// Objective of the witness program, evaluated exactly as the four sums.
pub fn qp_objective(wit: &QpWitness, params: &RegimeParams) -> Result<f64> {
    check_feasible(wit, params)?;
    let (l, mu) = (params.l, params.mu);
    let m = wit.m();
    let mut value = 0.0;
    for i in 0..m {
        let t = wit.tau[i];
        value += (l * wit.x[i] + wit.g[i]) * (mu * wit.y[t] + wit.v[t]);
        value += (mu * wit.x[i] + wit.g[i]) * (l * wit.y[t] + wit.v[t]);
        value -= (l * wit.x[i] + wit.g[i]) * (mu * wit.x[i] + wit.g[i]);
        value -= (l * wit.y[i] + wit.v[i]) * (mu * wit.y[i] + wit.v[i]);
    }
    Ok(value)
}

/// Per-index objective term; shared by the gridded brute force and tests.
pub(crate) fn pair_term(l: f64, mu: f64, x: f64, g: f64, yt: f64, vt: f64) -> f64 {
    (l * x + g) * (mu * yt + vt) + (mu * x + g) * (l * yt + vt)
        - (l * x + g) * (mu * x + g)
        - (l * yt + vt) * (mu * yt + vt)
}

/// Grid specification for the brute-force evaluation.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GridSpec {
    /// Points per continuous coordinate over its feasible box.
    pub points_per_coord: usize,
    /// Scales to try.
    pub w_values: Vec<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { points_per_coord: 9, w_values: vec![0.5, 1.0, 2.0] }
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 || hi <= lo {
        return vec![lo];
    }
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

/// Gridded brute force over the witness program: enumerates every
/// permutation, discretizes the free coordinates on their boxes, and
/// evaluates the objective exactly. An approximation oracle, not exact;
/// its supremum converges to the closed form as the grid refines.
///
/// The objective separates across indices once the permutation is fixed, so
/// the per-index grids are searched independently and summed.
pub fn brute_force_qp(params: &RegimeParams, grid: &GridSpec) -> Result<(f64, QpWitness)> {
    let (m, r, rs) = (params.m, params.r, params.r_star);
    if m > 5 {
        return Err(Error::TooLarge(format!("brute force is guarded to m <= 5, got m = {m}")));
    }
    if grid.points_per_coord == 0 || grid.w_values.iter().any(|&w| w.is_nan() || w <= 0.0) {
        return Err(Error::InvalidInput("grid must have points and positive scales".into()));
    }
    let (l, mu) = (params.l, params.mu);
    let npts = grid.points_per_coord;

    let mut best: Option<(f64, QpWitness)> = None;
    for &w in &grid.w_values {
        let reach = (l + mu) * w / (2.0 * mu);
        let xgrid = linspace(w, reach.max(w), npts);
        let ygrid: Vec<f64> = (1..=npts).map(|k| reach * k as f64 / npts as f64).collect();
        let ggrid = linspace(0.0, 1.0 + l * w, npts);
        let vgrid = linspace(0.0, 1.0, npts);

        for tau in (0..m).permutations(m) {
            let mut total = 0.0;
            let mut xs = vec![0.0; m];
            let mut gs = vec![0.0; m];
            let mut ys = vec![0.0; m];
            let mut vs = vec![0.0; m];
            for i in 0..m {
                let t = tau[i];
                let (x_opts, g_opts): (&[f64], &[f64]) =
                    if i < r { (&xgrid, &[1.0]) } else { (&[0.0], &ggrid) };
                let (y_opts, v_opts): (&[f64], &[f64]) =
                    if t < rs { (&ygrid, &[1.0]) } else { (&[0.0], &vgrid) };
                let mut sub_best = f64::NEG_INFINITY;
                let mut arg = (0.0, 0.0, 0.0, 0.0);
                for &x in x_opts {
                    for &g in g_opts {
                        for &y in y_opts {
                            for &v in v_opts {
                                let val = pair_term(l, mu, x, g, y, v);
                                if val > sub_best {
                                    sub_best = val;
                                    arg = (x, g, y, v);
                                }
                            }
                        }
                    }
                }
                total += sub_best;
                xs[i] = arg.0;
                gs[i] = arg.1;
                ys[t] = arg.2;
                vs[t] = arg.3;
            }
            if best.as_ref().is_none_or(|(b, _)| total > *b) {
                let lambda = params.lambda;
                let scale = |v: &[f64]| v.iter().map(|x| x * lambda).collect::<Vec<_>>();
                let wit = QpWitness {
                    x: scale(&xs),
                    g: scale(&gs),
                    y: scale(&ys),
                    v: scale(&vs),
                    tau: tau.clone(),
                    w: lambda * w,
                    index_sets: IndexSets::for_permutation(&tau, r, rs),
                };
                best = Some((total * lambda * lambda, wit));
            }
        }
    }
    Ok(best.expect("at least one scale and permutation"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn regime(m: usize, r: usize, rs: usize, l: f64, mu: f64) -> RegimeParams {
        RegimeParams::new(m, m, r, rs, l, mu, 1.0).unwrap()
    }

    #[test]
    fn oracle_examples() {
        let v = oracle(&regime(5, 5, 3, 10.0, 1.0));
        assert!(v.factorizable);
        assert_eq!(v.reason, CaseLabel::RIsM);

        let v = oracle(&regime(3, 1, 1, 4.0, 1.0));
        assert!(!v.factorizable);
        assert_eq!(v.scenario, Scenario::S2);
        assert_eq!(v.witness.unwrap().d, 1);

        let v = oracle(&regime(3, 2, 1, 3.0, 1.0));
        assert!(v.factorizable);
        assert_eq!(v.reason, CaseLabel::Threshold);
    }

    #[test]
    fn reduced_value_examples() {
        let p3 = regime(3, 1, 1, 3.0, 1.0);
        assert_eq!(reduced_qp_value(1, 1.0, &p3).unwrap(), 0.0);

        let p4 = regime(3, 1, 1, 4.0, 1.0);
        assert_eq!(reduced_qp_value(1, 1.0, &p4).unwrap(), 5.0);

        let flat = regime(4, 2, 2, 2.0, 2.0);
        assert_eq!(reduced_qp_value(2, 0.5, &flat).unwrap(), -2.0 * 2.0 * 2.0 * 0.25);

        assert!(matches!(reduced_qp_value(3, 1.0, &p4), Err(Error::InfeasibleD(_))));
        assert!(matches!(reduced_qp_value(1, 0.0, &p4), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn case_analysis_examples() {
        let v = solve_reduced_qp(&regime(4, 2, 1, 1.0, 1.0));
        assert_eq!(v.scenario, Scenario::S1);
        assert_eq!(v.reason, CaseLabel::KappaOne);

        let v = solve_reduced_qp(&regime(3, 1, 1, 3.0, 1.0));
        assert_eq!(v.scenario, Scenario::S2);
        assert_eq!(v.reason, CaseLabel::KappaThreeREqRStar);
        let wit = v.witness.unwrap();
        assert_eq!(reduced_qp_value(wit.d, wit.w, &regime(3, 1, 1, 3.0, 1.0)).unwrap(), 0.0);

        let v = solve_reduced_qp(&regime(3, 1, 1, 4.0, 1.0));
        assert_eq!(v.scenario, Scenario::S2);
        assert_eq!(v.witness.unwrap().d, 1);

        let v = solve_reduced_qp(&regime(4, 1, 2, 5.0, 1.0));
        assert_eq!(v.scenario, Scenario::S2);
        assert_eq!(v.reason, CaseLabel::RLtRStar);
        assert_eq!(v.witness.unwrap().d, 0);
    }

    #[test]
    fn oracle_and_case_analysis_agree_on_a_small_grid() {
        for m in 1..=5 {
            for r in 1..=m {
                for rs in 0..=m {
                    for kappa in [1.0, 1.5, 2.0, 3.0, 4.0, 10.0] {
                        let p = regime(m, r, rs, kappa, 1.0);
                        let a = oracle(&p);
                        let b = solve_reduced_qp(&p);
                        assert_eq!(
                            a.factorizable,
                            b.scenario == Scenario::S1,
                            "mismatch at m={m} r={r} rs={rs} kappa={kappa}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn minmax_identity() {
        for m in 1..=12_i64 {
            for r in 1..=m {
                for rs in 0..=m {
                    assert_eq!(r.min(m - rs) - rs.min(m - r), r - rs);
                }
            }
        }
    }

    #[test]
    fn subproblem_closed_forms() {
        let p = regime(3, 1, 1, 4.0, 1.0);
        let j2 = subproblem_optimum(SubCase::J2, &p, 1.0);
        assert_eq!(j2.value, -4.0);
        assert_eq!((j2.x, j2.v), (1.0, 1.0));

        let j3 = subproblem_optimum(SubCase::J3, &p, 1.0);
        assert_eq!(j3.value, 9.0);
        assert_eq!((j3.g, j3.y), (5.0, 2.5));

        let j1 = subproblem_optimum(SubCase::J1, &p, 1.0);
        assert_eq!(j1.value, 0.0);

        let j4 = subproblem_optimum(SubCase::J4, &p, 1.0);
        assert_eq!(j4.value, 0.0);
    }

    fn canonical_witness() -> QpWitness {
        let tau = vec![1, 0, 2];
        QpWitness {
            x: vec![1.0, 0.0, 0.0],
            g: vec![1.0, 5.0, 0.0],
            y: vec![2.5, 0.0, 0.0],
            v: vec![1.0, 1.0, 0.0],
            tau: tau.clone(),
            w: 1.0,
            index_sets: IndexSets::for_permutation(&tau, 1, 1),
        }
    }

    #[test]
    fn qp_objective_canonical_is_five() {
        let p = regime(3, 1, 1, 4.0, 1.0);
        assert_eq!(qp_objective(&canonical_witness(), &p).unwrap(), 5.0);
    }

    #[test]
    fn qp_objective_degenerate_identity_cancels() {
        let p = regime(2, 2, 2, 3.0, 1.0);
        let tau = vec![0, 1];
        let wit = QpWitness {
            x: vec![1.0, 0.5],
            g: vec![1.0, 1.0],
            y: vec![1.0, 0.5],
            v: vec![1.0, 1.0],
            tau: tau.clone(),
            w: 0.5,
            index_sets: IndexSets::for_permutation(&tau, 2, 2),
        };
        assert!(qp_objective(&wit, &p).unwrap().abs() < 1e-12);
    }

    #[test]
    fn qp_objective_rejects_oversized_gradient() {
        let p = regime(3, 1, 1, 4.0, 1.0);
        let mut wit = canonical_witness();
        wit.g[1] = 5.3; // above lambda + L*min x = 5
        assert!(matches!(qp_objective(&wit, &p), Err(Error::Infeasible(_))));
    }

    #[test]
    fn brute_force_single_index_is_negative() {
        let p = RegimeParams::new(1, 1, 1, 0, 4.0, 1.0, 1.0).unwrap();
        let (sup, wit) = brute_force_qp(&p, &GridSpec::default()).unwrap();
        assert!(sup < 0.0);
        // Only subcase J2 exists; the best scale is the smallest one.
        assert_eq!(wit.index_sets.j2, vec![0]);
        assert!((sup - (-4.0 * 0.25)).abs() < 1e-12);
    }

    #[test]
    fn brute_force_reaches_the_closed_form_witness() {
        let p = regime(3, 1, 1, 4.0, 1.0);
        let grid = GridSpec { points_per_coord: 9, w_values: vec![1.0] };
        let (sup, wit) = brute_force_qp(&p, &grid).unwrap();
        assert!(sup >= 5.0 - 1e-9, "grid contains the exact witness");
        assert!((qp_objective(&wit, &p).unwrap() - sup).abs() < 1e-9);
    }

    #[test]
    fn brute_force_matches_joint_enumeration_for_tiny_instances() {
        // Full joint grid over all coordinates at once; validates the
        // separable search path on an instance small enough to afford it.
        let p = regime(2, 1, 1, 3.0, 1.0);
        let grid = GridSpec { points_per_coord: 4, w_values: vec![1.0] };
        let (sup, _) = brute_force_qp(&p, &grid).unwrap();

        let w = 1.0;
        let (l, mu) = (p.l, p.mu);
        let reach = (l + mu) * w / (2.0 * mu);
        let xg = linspace(w, reach, 4);
        let yg: Vec<f64> = (1..=4).map(|k| reach * k as f64 / 4.0).collect();
        let gg = linspace(0.0, 1.0 + l * w, 4);
        let vg = linspace(0.0, 1.0, 4);
        let mut joint_best = f64::NEG_INFINITY;
        for tau in [[0usize, 1], [1, 0]] {
            for &x0 in &xg {
                for &g1 in &gg {
                    for &y0 in &yg {
                        for &v1 in &vg {
                            let x = [x0, 0.0];
                            let g = [1.0, g1];
                            let y = [y0, 0.0];
                            let v = [1.0, v1];
                            let mut val = 0.0;
                            for i in 0..2 {
                                let t = tau[i];
                                val += (l * x[i] + g[i]) * (mu * y[t] + v[t]);
                                val += (mu * x[i] + g[i]) * (l * y[t] + v[t]);
                                val -= (l * x[i] + g[i]) * (mu * x[i] + g[i]);
                                val -= (l * y[i] + v[i]) * (mu * y[i] + v[i]);
                            }
                            joint_best = joint_best.max(val);
                        }
                    }
                }
            }
        }
        assert!((sup - joint_best).abs() < 1e-12);
    }

    #[test]
    fn brute_force_guard() {
        let p = regime(6, 1, 1, 4.0, 1.0);
        assert!(matches!(brute_force_qp(&p, &GridSpec::default()), Err(Error::TooLarge(_))));
    }
}
