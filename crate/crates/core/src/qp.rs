//! Dense dual active-set solver (Goldfarb-Idnani) for small strictly convex
//! quadratic programs
//!
//! ```text
//!     minimize    x' Q x + q' x
//!     subject to  A x <= c,  lo <= x <= hi
//! ```
//!
//! The solver starts from the unconstrained minimizer and adds violated
//! constraints one at a time, dropping constraints whose multipliers would
//! turn negative. Problem sizes here are tiny, so the projected directions
//! are recomputed from scratch each step instead of updating a factorization.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QpError {
    #[error("quadratic term is not symmetric positive definite")]
    NotPositiveDefinite,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("infeasible: constraint rows {rows:?} cannot hold simultaneously")]
    Infeasible { rows: Vec<usize> },
    #[error("no convergence after {0} iterations")]
    MaxIterations(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub x: DVector<f64>,
    pub objective: f64,
    /// One multiplier per constraint row: the rows of `A`, then the lower
    /// bounds, then the upper bounds. Zero for inactive rows.
    pub multipliers: DVector<f64>,
    pub active: Vec<usize>,
    pub iterations: usize,
}

/// Constraint rows in "normal . x >= rhs" form.
struct Rows {
    normals: Vec<DVector<f64>>,
    rhs: Vec<f64>,
}

impl Rows {
    fn slack(&self, i: usize, x: &DVector<f64>) -> f64 {
        self.normals[i].dot(x) - self.rhs[i]
    }
}

fn build_rows(
    a: &DMatrix<f64>,
    c: &DVector<f64>,
    lo: &DVector<f64>,
    hi: &DVector<f64>,
) -> Rows {
    let n = a.ncols();
    let mut normals = Vec::with_capacity(a.nrows() + 2 * n);
    let mut rhs = Vec::with_capacity(a.nrows() + 2 * n);
    for i in 0..a.nrows() {
        normals.push(-a.row(i).transpose());
        rhs.push(-c[i]);
    }
    for j in 0..n {
        normals.push(DVector::from_fn(n, |k, _| if k == j { 1.0 } else { 0.0 }));
        rhs.push(lo[j]);
    }
    for j in 0..n {
        normals.push(DVector::from_fn(n, |k, _| if k == j { -1.0 } else { 0.0 }));
        rhs.push(-hi[j]);
    }
    Rows { normals, rhs }
}

/// Primal step `z` and dual step `r` for adding `normal` to the active set.
fn directions(
    g_inv: &DMatrix<f64>,
    active: &[usize],
    rows: &Rows,
    normal: &DVector<f64>,
) -> Option<(DVector<f64>, DVector<f64>)> {
    if active.is_empty() {
        return Some((g_inv * normal, DVector::zeros(0)));
    }
    let n = g_inv.nrows();
    let mut big_n = DMatrix::zeros(n, active.len());
    for (col, &i) in active.iter().enumerate() {
        big_n.set_column(col, &rows.normals[i]);
    }
    let gn = g_inv * &big_n;
    let m = big_n.transpose() * &gn;
    let m_inv = m.try_inverse()?;
    // N* = (N' G^-1 N)^-1 N' G^-1
    let n_star = &m_inv * gn.transpose();
    let h = g_inv - &gn * &n_star;
    Some((h * normal, n_star * normal))
}

pub fn solve_qp(
    q: &DMatrix<f64>,
    lin: &DVector<f64>,
    a: &DMatrix<f64>,
    c: &DVector<f64>,
    lo: &DVector<f64>,
    hi: &DVector<f64>,
) -> Result<QpSolution, QpError> {
    let n = q.nrows();
    if q.ncols() != n || lin.len() != n || a.ncols() != n || lo.len() != n || hi.len() != n {
        return Err(QpError::Dimension(format!(
            "Q {}x{}, q {}, A {}x{}, lo {}, hi {}",
            q.nrows(),
            q.ncols(),
            lin.len(),
            a.nrows(),
            a.ncols(),
            lo.len(),
            hi.len()
        )));
    }
    if a.nrows() != c.len() {
        return Err(QpError::Dimension(format!(
            "A has {} rows but c has {}",
            a.nrows(),
            c.len()
        )));
    }
    if (q - q.transpose()).amax() > 1e-12 * q.amax().max(1.0) {
        return Err(QpError::NotPositiveDefinite);
    }
    let m_a = a.nrows();
    for j in 0..n {
        if lo[j] > hi[j] {
            return Err(QpError::Infeasible {
                rows: vec![m_a + j, m_a + n + j],
            });
        }
    }
    let g = q * 2.0;
    let g_inv = g
        .clone()
        .cholesky()
        .ok_or(QpError::NotPositiveDefinite)?
        .inverse();
    let rows = build_rows(a, c, lo, hi);
    let total = rows.rhs.len();

    let mut x = -(&g_inv * lin);
    let mut active: Vec<usize> = Vec::new();
    let mut u: Vec<f64> = Vec::new();
    let max_iter = 50 * (total + n);
    let mut iterations = 0;

    loop {
        // most violated inactive row
        let mut pick: Option<(usize, f64)> = None;
        for i in 0..total {
            if active.contains(&i) {
                continue;
            }
            let s = rows.slack(i, &x);
            let tol = 1e-12 * (1.0 + rows.rhs[i].abs() + rows.normals[i].norm() * x.norm());
            if s < -tol && pick.is_none_or(|(_, best)| s < best) {
                pick = Some((i, s));
            }
        }
        let Some((p, _)) = pick else { break };
        let np = rows.normals[p].clone();
        let mut u_p = 0.0;

        loop {
            iterations += 1;
            if iterations > max_iter {
                return Err(QpError::MaxIterations(max_iter));
            }
            let (z, r) = directions(&g_inv, &active, &rows, &np).ok_or_else(|| {
                QpError::Infeasible {
                    rows: active.iter().copied().chain([p]).collect(),
                }
            })?;
            // partial (dual) step limit
            let mut t1 = f64::INFINITY;
            let mut drop = None;
            for (j, &rj) in r.iter().enumerate() {
                if rj > 1e-14 {
                    let ratio = u[j] / rj;
                    if ratio < t1 {
                        t1 = ratio;
                        drop = Some(j);
                    }
                }
            }
            // full (primal) step
            let curvature = z.dot(&np);
            let scale = np.dot(&(&g_inv * &np));
            let t2 = if curvature > 1e-13 * scale {
                -rows.slack(p, &x) / curvature
            } else {
                f64::INFINITY
            };
            let t = t1.min(t2);
            if !t.is_finite() {
                return Err(QpError::Infeasible {
                    rows: active.iter().copied().chain([p]).collect(),
                });
            }
            for (uj, rj) in u.iter_mut().zip(r.iter()) {
                *uj -= t * rj;
            }
            u_p += t;
            if t2.is_finite() {
                x += &z * t;
            }
            if t2.is_finite() && t2 <= t1 {
                active.push(p);
                u.push(u_p);
                break;
            }
            let l = drop.expect("finite partial step has a blocking row");
            active.remove(l);
            u.remove(l);
        }
    }

    let mut multipliers = DVector::zeros(total);
    for (&i, &ui) in active.iter().zip(&u) {
        multipliers[i] = ui.max(0.0);
    }
    let objective = x.dot(&(q * &x)) + lin.dot(&x);
    Ok(QpSolution {
        x,
        objective,
        multipliers,
        active,
        iterations,
    })
}

/// Largest constraint violation and stationarity residual of a candidate
/// primal-dual pair. Multipliers are laid out as in [`QpSolution`].
pub fn kkt_residuals(
    q: &DMatrix<f64>,
    lin: &DVector<f64>,
    a: &DMatrix<f64>,
    c: &DVector<f64>,
    lo: &DVector<f64>,
    hi: &DVector<f64>,
    sol: &QpSolution,
) -> (f64, f64) {
    let x = &sol.x;
    let n = x.len();
    let m = a.nrows();
    let mut infeas: f64 = 0.0;
    let ax = a * x;
    for i in 0..m {
        infeas = infeas.max(ax[i] - c[i]);
    }
    for j in 0..n {
        infeas = infeas.max(lo[j] - x[j]).max(x[j] - hi[j]);
    }
    // grad f + A' lambda - mu_lo + mu_hi = 0
    let mut grad = q * x * 2.0 + lin;
    for i in 0..m {
        grad += a.row(i).transpose() * sol.multipliers[i];
    }
    for j in 0..n {
        grad[j] -= sol.multipliers[m + j];
        grad[j] += sol.multipliers[m + n + j];
    }
    (infeas.max(0.0), grad.amax())
}
