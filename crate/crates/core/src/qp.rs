//! Mahalanobis projection onto a polyhedron.
//!
//! Solves
//!
//! ```text
//!     minimize    (x - m)' S^{-1} (x - m) / 2
//!     subject to  w_i' x >= b_i
//! ```
//!
//! for `S = L L'`. With `x = m + L z` this is the Euclidean projection of the
//! origin onto `{z : g_i' z >= h_i}`, `g_i = L' w_i`, `h_i = b_i - w_i' m`,
//! which is solved by a dual active-set iteration (Goldfarb-Idnani with
//! identity Hessian): start from the unconstrained minimiser, repeatedly add
//! the most violated constraint, and drop constraints whose multipliers would
//! turn negative. Every iterate is dual feasible, so the first iterate that is
//! primal feasible is optimal.
//!
//! When a violated constraint is linearly dependent on the active set and no
//! multiplier can absorb it, the multipliers form a Farkas certificate. That
//! certificate lower-bounds the smallest achievable maximum violation over
//! all `x` (the phase-1 value). If the bound is below [`TOL_FEAS`] the solve
//! is repeated with all rows relaxed by [`TOL_FEAS`]; infeasible is reported
//! only when the phase-1 value is shown to exceed the tolerance.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, QpTraceStep, Result};
use crate::linalg::{axpy, dot, norm, Cholesky};

/// Feasibility threshold on normalised rows.
pub const TOL_FEAS: f64 = 1e-8;
/// KKT residual threshold.
pub const TOL_KKT: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpResult {
    pub status: QpStatus,
    /// Minimiser (empty when infeasible).
    pub x_star: Vec<f64>,
    /// `(x* - m)' S^{-1} (x* - m) / 2`; `+inf` when infeasible.
    pub objective: f64,
    /// Row indices active at the optimum.
    pub active_rows: Vec<usize>,
    /// Multipliers of `active_rows` in the normalised metric.
    pub multipliers: Vec<f64>,
    /// Stationarity residual `||z - sum u_i g_i||`.
    pub kkt_residual: f64,
    /// Optimal: largest row violation at `x*` (<= 0 means satisfied).
    /// Infeasible: certified lower bound on the phase-1 minimum violation.
    pub violation: f64,
    pub iterations: usize,
}

impl QpResult {
    pub fn is_optimal(&self) -> bool {
        self.status == QpStatus::Optimal
    }
}

/// A row `w' x >= b`; rows with `b = -inf` are vacuous and ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub w: Vec<f64>,
    pub b: f64,
}

impl Row {
    pub fn new(w: Vec<f64>, b: f64) -> Self {
        Row { w, b }
    }
}

/// Minimise the Mahalanobis distance to `mean` under `chol` over the rows.
pub fn solve(mean: &[f64], chol: &Cholesky, rows: &[Row]) -> Result<QpResult> {
    let r = solve_unchecked(mean, chol, rows)?;
    if r.is_optimal() {
        let scale = 1.0 + libm::sqrt(2.0 * r.objective) + r.multipliers.iter().sum::<f64>();
        if r.kkt_residual > TOL_KKT * scale || r.violation > 2.0 * TOL_FEAS || r.multipliers.iter().any(|u| *u < -TOL_KKT) {
            return Err(Error::QpInaccurate { kkt_residual: r.kkt_residual, violation: r.violation });
        }
    }
    Ok(r)
}

fn solve_unchecked(mean: &[f64], chol: &Cholesky, rows: &[Row]) -> Result<QpResult> {
    match solve_shifted(mean, chol, rows, 0.0)? {
        Outcome::Done(r) => Ok(r),
        Outcome::Inconsistent { bound, steps } if bound > TOL_FEAS => Ok(infeasible(bound, steps)),
        // The certificate is too weak to decide; retry with every row relaxed by
        // the tolerance. Failing again means the phase-1 value exceeds it.
        Outcome::Inconsistent { steps, .. } => match solve_shifted(mean, chol, rows, TOL_FEAS)? {
            Outcome::Done(mut r) => {
                r.iterations += steps;
                Ok(r)
            }
            Outcome::Inconsistent { bound, steps: more } => Ok(infeasible(TOL_FEAS + bound, steps + more)),
        },
    }
}

enum Outcome {
    Done(QpResult),
    /// The rows are inconsistent; `bound` lower-bounds the phase-1 value.
    Inconsistent { bound: f64, steps: usize },
}

fn solve_shifted(mean: &[f64], chol: &Cholesky, rows: &[Row], relax: f64) -> Result<Outcome> {
    let d = mean.len();
    if chol.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: chol.dim() });
    }
    let mut g = Vec::with_capacity(rows.len());
    let mut h = Vec::with_capacity(rows.len());
    let mut zscale = Vec::with_capacity(rows.len());
    for row in rows {
        if row.w.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: row.w.len() });
        }
        let gi = chol.mul_upper(&row.w);
        let ng = norm(&gi);
        let hi = row.b - relax * norm(&row.w) - dot(&row.w, mean);
        zscale.push(ng);
        if row.b == f64::NEG_INFINITY || ng == 0.0 {
            // Vacuous or constant row; a zero row with positive right-hand side is
            // handled below as an immediate infeasibility.
            g.push(None);
            h.push(hi);
            continue;
        }
        g.push(Some(gi.iter().map(|v| v / ng).collect::<Vec<f64>>()));
        h.push(hi / ng);
    }
    for (i, row) in rows.iter().enumerate() {
        if g[i].is_none() && row.b != f64::NEG_INFINITY && row.b > TOL_FEAS {
            return Ok(Outcome::Done(infeasible(row.b, 0)));
        }
    }

    let n_rows = rows.len();
    let mut z = vec![0.0; d];
    let mut active: Vec<usize> = Vec::new();
    let mut u: Vec<f64> = Vec::new();
    let mut trace: Vec<QpTraceStep> = Vec::new();
    let max_steps = 20 * (n_rows + d) + 100;
    let mut steps = 0usize;

    let slack = |z: &[f64], i: usize, g: &[Option<Vec<f64>>], h: &[f64]| -> f64 {
        match &g[i] {
            Some(gi) => dot(gi, z) - h[i],
            None => f64::INFINITY,
        }
    };

    'outer: loop {
        // Most violated inactive constraint.
        let zn = norm(&z);
        let mut pick: Option<(usize, f64)> = None;
        for i in 0..n_rows {
            if g[i].is_none() || active.contains(&i) {
                continue;
            }
            let s = slack(&z, i, &g, &h);
            let tol = 1e-12 * (1.0 + zn + h[i].abs());
            if s < -tol && pick.map_or(true, |(_, best)| s < best) {
                pick = Some((i, s));
            }
        }
        let Some((p, _)) = pick else { break 'outer };
        let gp = g[p].clone().expect("picked rows are proper");
        let mut up = 0.0_f64;

        loop {
            steps += 1;
            trace.push(QpTraceStep { active: active.len(), objective: 0.5 * dot(&z, &z), worst_slack: slack(&z, p, &g, &h) });
            if steps > max_steps {
                return Err(Error::QpIterationLimit { trace });
            }
            // Dual direction r = (N N')^{-1} N g_p and primal direction dz = g_p - N' r.
            let (r, dz) = project_out(&active, &g, &gp)?;
            let dz_norm = norm(&dz);

            // Largest dual step before some active multiplier hits zero.
            let mut t1 = f64::INFINITY;
            let mut block = None;
            for (a, &ra) in r.iter().enumerate() {
                if ra > 1e-14 {
                    let t = u[a] / ra;
                    if t < t1 {
                        t1 = t;
                        block = Some(a);
                    }
                }
            }

            let sp = slack(&z, p, &g, &h);
            if dz_norm <= 1e-10 {
                // g_p lies in the span of the active rows.
                if block.is_none() {
                    // Farkas certificate y_p = 1, y_j = -r_j >= 0, mapped back to the
                    // x metric as y_i / ||L' w_i||.
                    let nwp = norm(&rows[p].w);
                    let mut num = (rows[p].b - relax * nwp) / zscale[p];
                    let mut den = nwp / zscale[p];
                    for (a, &j) in active.iter().enumerate() {
                        let yj = -r[a] / zscale[j];
                        let nwj = norm(&rows[j].w);
                        num += yj * (rows[j].b - relax * nwj);
                        den += yj * nwj;
                    }
                    // The active rows force g_p' z <= sum r_j h_j < h_p, so the
                    // rows are inconsistent; the certificate only sizes the gap.
                    let bound = if den > 0.0 { num / den } else { f64::INFINITY };
                    return Ok(Outcome::Inconsistent { bound: bound.max(0.0), steps });
                }
                let t = t1;
                let a = block.unwrap();
                for (ua, ra) in u.iter_mut().zip(&r) {
                    *ua -= t * ra;
                }
                up += t;
                active.remove(a);
                u.remove(a);
                continue;
            }

            let t2 = -sp / dot(&gp, &dz);
            if t2 <= t1 {
                axpy(t2, &dz, &mut z);
                for (ua, ra) in u.iter_mut().zip(&r) {
                    *ua -= t2 * ra;
                }
                up += t2;
                active.push(p);
                u.push(up);
                for ua in u.iter_mut() {
                    if *ua < 0.0 {
                        *ua = 0.0;
                    }
                }
                break;
            }
            let a = block.unwrap();
            axpy(t1, &dz, &mut z);
            for (ua, ra) in u.iter_mut().zip(&r) {
                *ua -= t1 * ra;
            }
            up += t1;
            active.remove(a);
            u.remove(a);
        }
    }

    // Recover x and check the optimality conditions.
    let lz = chol.mul_lower(&z);
    let x: Vec<f64> = mean.iter().zip(&lz).map(|(m, v)| m + v).collect();
    let mut stat = z.clone();
    for (a, &j) in active.iter().enumerate() {
        axpy(-u[a], g[j].as_ref().unwrap(), &mut stat);
    }
    let kkt_residual = norm(&stat);
    let violation = rows
        .iter()
        .filter(|r| r.b != f64::NEG_INFINITY)
        .map(|r| {
            let nw = norm(&r.w);
            if nw == 0.0 { r.b } else { (r.b - dot(&r.w, &x)) / nw }
        })
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(Outcome::Done(QpResult {
        status: QpStatus::Optimal,
        objective: 0.5 * dot(&z, &z),
        x_star: x,
        active_rows: active,
        multipliers: u,
        kkt_residual,
        violation,
        iterations: steps,
    }))
}

/// Coefficients `r` of `g_p` on the active rows and the residual
/// `g_p - N' r`, via Gram-Schmidt with reorthogonalisation (the Gram-matrix
/// route squares the condition number of nearly parallel rows).
fn project_out(active: &[usize], g: &[Option<Vec<f64>>], gp: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let k = active.len();
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut rmat = vec![0.0; k * k];
    for (j, &aj) in active.iter().enumerate() {
        let mut v = g[aj].clone().expect("active rows are proper");
        for _ in 0..2 {
            for (i, qi) in q.iter().enumerate() {
                let c = dot(qi, &v);
                rmat[i * k + j] += c;
                axpy(-c, qi, &mut v);
            }
        }
        let nv = norm(&v);
        if !(nv > 1e-14) {
            return Err(Error::Numerical("degenerate active set in QP"));
        }
        rmat[j * k + j] = nv;
        v.iter_mut().for_each(|x| *x /= nv);
        q.push(v);
    }
    let mut c = vec![0.0; k];
    let mut dz = gp.to_vec();
    for _ in 0..2 {
        for (i, qi) in q.iter().enumerate() {
            let ci = dot(qi, &dz);
            c[i] += ci;
            axpy(-ci, qi, &mut dz);
        }
    }
    let mut r = c;
    for i in (0..k).rev() {
        let mut acc = r[i];
        for j in i + 1..k {
            acc -= rmat[i * k + j] * r[j];
        }
        r[i] = acc / rmat[i * k + i];
    }
    Ok((r, dz))
}

fn infeasible(bound: f64, iterations: usize) -> QpResult {
    QpResult {
        status: QpStatus::Infeasible,
        x_star: Vec::new(),
        objective: f64::INFINITY,
        active_rows: Vec::new(),
        multipliers: Vec::new(),
        kkt_residual: 0.0,
        violation: bound,
        iterations,
    }
}

/// Euclidean projection of `point` onto the rows.
pub fn project_euclidean(point: &[f64], rows: &[Row]) -> Result<QpResult> {
    let d = point.len();
    let mut id = vec![0.0; d * d];
    for i in 0..d {
        id[i * d + i] = 1.0;
    }
    let chol = Cholesky::new(&id, d)?;
    solve(point, &chol, rows)
}
