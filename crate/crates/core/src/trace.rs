//! Doubly stochastic completion, a paired variant of von Neumann's trace
//! inequality, and the singular-value gap expression it bounds.
//!
//! The central object is the linear assignment problem with cost
//! `c[i][j] = dA_i*dB_j + dC_i*dD_j` over permutations of `[m]`: its exact
//! maximum equals the supremum of the paired trace form over orthogonal
//! frame pairs `(R, P)`, and the maximizing permutation yields an orthogonal
//! pair attaining it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::stationarity::StationaryDecomposition;

/// Outcome of the paired assignment problem.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AssignmentResult {
    /// Maximum of `sum_i dA_i*dB_perm(i) + dC_i*dD_perm(i)`.
    pub value: f64,
    /// `perm[i]` is the column matched to row `i`; a bijection on `[m]`.
    pub perm: Vec<usize>,
}

/// Complete a nonnegative square matrix with row and column sums at most one
/// to a doubly stochastic matrix that dominates it entrywise.
///
/// Deficient rows and columns are paired smallest-index-first and the entry
/// at their intersection is enlarged until one of the two sums saturates.
pub fn complete_to_doubly_stochastic(a: &Mat) -> Result<Mat> {
    let m = a.rows();
    if a.cols() != m {
        return Err(Error::InvalidInput(format!(
            "completion needs a square matrix, got {}x{}",
            m,
            a.cols()
        )));
    }
    if a.as_slice().iter().any(|&v| v < -1e-14) {
        return Err(Error::InvalidInput("matrix must be nonnegative".into()));
    }
    let mut b = a.clone();
    let mut row: Vec<f64> = (0..m).map(|i| (0..m).map(|j| b[(i, j)]).sum()).collect();
    let mut col: Vec<f64> = (0..m).map(|j| (0..m).map(|i| b[(i, j)]).sum()).collect();
    if row.iter().chain(col.iter()).any(|&s| s > 1.0 + 1e-12) {
        return Err(Error::InfeasibleInput(
            "a row or column sum exceeds 1".into(),
        ));
    }

    const SAT: f64 = 1e-13;
    while let Some(i) = row.iter().position(|&s| s < 1.0 - SAT) {
        let j = match col.iter().position(|&s| s < 1.0 - SAT) {
            Some(j) => j,
            None => break,
        };
        let delta = (1.0 - row[i]).min(1.0 - col[j]);
        b[(i, j)] += delta;
        row[i] += delta;
        col[j] += delta;
    }
    Ok(b)
}

/// Exact maximum of the paired assignment problem with cost
/// `c[i][j] = dA_i*dB_j + dC_i*dD_j` over all permutations, solved by the
/// Hungarian algorithm in `O(m^3)`.
pub fn max_permutation_pairing(
    da: &[f64],
    db: &[f64],
    dc: &[f64],
    dd: &[f64],
) -> Result<AssignmentResult> {
    let m = da.len();
    if db.len() != m || dc.len() != m || dd.len() != m || m == 0 {
        return Err(Error::InvalidInput(
            "the four vectors must share a positive common length".into(),
        ));
    }
    for v in [da, db, dc, dd] {
        if v.iter().any(|&x| x.is_nan() || x < 0.0) {
            return Err(Error::InvalidInput("entries must be nonnegative".into()));
        }
    }
    let cost = Mat::from_fn(m, m, |i, j| da[i] * db[j] + dc[i] * dd[j]);
    let perm = min_cost_assignment(&Mat::from_fn(m, m, |i, j| -cost[(i, j)]));
    let value = (0..m).map(|i| cost[(i, perm[i])]).sum();
    Ok(AssignmentResult { value, perm })
}

/// Hungarian algorithm with potentials; returns the row-to-column matching
/// of minimum total cost for a square cost matrix.
fn min_cost_assignment(cost: &Mat) -> Vec<usize> {
    let n = cost.rows();
    let inf = f64::INFINITY;
    // 1-indexed with a sentinel column 0.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[(i0 - 1, j - 1)] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = vec![0usize; n];
    for j in 1..=n {
        if p[j] != 0 {
            row_to_col[p[j] - 1] = j - 1;
        }
    }
    row_to_col
}

/// Orthogonal pair `(R, P)` built from a permutation so that substituting it
/// into the paired trace form attains the assignment value: `R` is the
/// transposed permutation matrix, `P` extends the permutation by an identity
/// block to size `n`.
pub fn witness_orthogonal_pair(perm: &[usize], m: usize, n: usize) -> Result<(Mat, Mat)> {
    validate_permutation(perm, m)?;
    if n < m || m == 0 {
        return Err(Error::InvalidInput(format!("need n >= m >= 1, got m={m}, n={n}")));
    }
    let mut r = Mat::zeros(m, m);
    let mut p = Mat::zeros(n, n);
    for (i, &pi) in perm.iter().enumerate() {
        r[(pi, i)] = 1.0;
        p[(i, pi)] = 1.0;
    }
    for i in m..n {
        p[(i, i)] = 1.0;
    }
    Ok((r, p))
}

fn validate_permutation(perm: &[usize], m: usize) -> Result<()> {
    if perm.len() != m {
        return Err(Error::InvalidInput("permutation length mismatch".into()));
    }
    let mut seen = vec![false; m];
    for &j in perm {
        if j >= m || seen[j] {
            return Err(Error::InvalidInput("not a bijection".into()));
        }
        seen[j] = true;
    }
    Ok(())
}

/// The two-trace sum `tr(R [A 0] P [B; 0]) + tr(R [C 0] P [D; 0])` for
/// `m x m` diagonal `A..D`, `R` in `O(m)` and `P` in `O(n)`.
pub fn lhs_trace_form(r: &Mat, p: &Mat, a: &Mat, b: &Mat, c: &Mat, d: &Mat) -> Result<f64> {
    let m = r.rows();
    let n = p.rows();
    if r.cols() != m || p.cols() != n || n < m {
        return Err(Error::InvalidInput("frame dimensions inconsistent".into()));
    }
    for blk in [a, b, c, d] {
        if blk.rows() != m || blk.cols() != m {
            return Err(Error::InvalidInput("diagonal blocks must be m x m".into()));
        }
    }
    let term = |x: &Mat, y: &Mat| -> f64 {
        let mut wide = Mat::zeros(m, n);
        wide.set_block(0, 0, x);
        let mut tall = Mat::zeros(n, m);
        tall.set_block(0, 0, y);
        trace(&(&(&(r * &wide) * p) * &tall))
    };
    Ok(term(a, b) + term(c, d))
}

fn trace(x: &Mat) -> f64 {
    (0..x.rows().min(x.cols())).map(|i| x[(i, i)]).sum()
}

/// Evaluate the singular-value gap between two pseudo-stationary
/// certificates: the exact permutation maximum of the paired cross terms
/// minus the two diagonal self-products. Nonnegative whenever both points
/// are pseudo-stationary for a common `mu`-strongly convex objective with
/// `L`-Lipschitz gradient.
pub fn pseudo_stationary_gap(
    cert1: &StationaryDecomposition,
    cert2: &StationaryDecomposition,
    l: f64,
    mu: f64,
) -> Result<f64> {
    if !(l >= mu && mu > 0.0) {
        return Err(Error::InvalidInput("need L >= mu > 0".into()));
    }
    let m = cert1.sigma.len();
    if cert1.d.len() != m || cert2.sigma.len() != m || cert2.d.len() != m {
        return Err(Error::InvalidInput("certificate vectors must share length m".into()));
    }
    let comb = |s: &[f64], d: &[f64], w: f64| -> Vec<f64> {
        s.iter().zip(d).map(|(si, di)| w * si + di).collect()
    };
    let da = comb(&cert1.sigma, &cert1.d, l);
    let db = comb(&cert2.sigma, &cert2.d, mu);
    let dc = comb(&cert1.sigma, &cert1.d, mu);
    let dd = comb(&cert2.sigma, &cert2.d, l);
    let best = max_permutation_pairing(&da, &db, &dc, &dd)?;
    let self1: f64 = dc.iter().zip(&da).map(|(x, y)| x * y).sum();
    let self2: f64 = db.iter().zip(&dd).map(|(x, y)| x * y).sum();
    Ok(best.value - self1 - self2)
}
