//! Entropic optimal transport solved with log-domain Sinkhorn-Knopp iterations.
//!
//! The plan is `P_ij = exp((f_i + g_j - C_ij) / eps)`; the dual potentials
//! `f`, `g` are updated alternately so that rows, then columns, match their
//! marginals. Working with potentials instead of scaling vectors keeps
//! large costs (the out-of-region penalty) and small `eps` from
//! underflowing.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Stopping tolerance on the max absolute marginal violation.
pub const DEFAULT_SINKHORN_TOL: f64 = 1e-9;

const BALANCE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransportPlan {
    pub plan: Matrix,
    pub iterations: usize,
    /// Max absolute deviation of the plan's row and column sums from the marginals.
    pub marginal_error: f64,
    pub converged: bool,
}

/// Solves the entropic OT problem between `supply` (rows) and `demand` (columns).
pub fn sinkhorn(
    cost: &Matrix,
    supply: &[f64],
    demand: &[f64],
    eps: f64,
    max_iter: usize,
) -> Result<TransportPlan> {
    sinkhorn_with_tolerance(cost, supply, demand, eps, max_iter, DEFAULT_SINKHORN_TOL)
}

pub fn sinkhorn_with_tolerance(
    cost: &Matrix,
    supply: &[f64],
    demand: &[f64],
    eps: f64,
    max_iter: usize,
    tol: f64,
) -> Result<TransportPlan> {
    let (rows, cols) = (cost.rows(), cost.cols());
    if supply.len() != rows {
        return Err(Error::LengthMismatch {
            what: "supply",
            expected: rows,
            actual: supply.len(),
        });
    }
    if demand.len() != cols {
        return Err(Error::LengthMismatch {
            what: "demand",
            expected: cols,
            actual: demand.len(),
        });
    }
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::OutOfRange {
            what: "sinkhorn eps",
            value: eps,
        });
    }
    if cost.as_slice().iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("transport cost"));
    }
    if let Some(&m) = supply
        .iter()
        .chain(demand)
        .find(|m| !(m.is_finite() && **m > 0.0))
    {
        return Err(Error::OutOfRange {
            what: "marginal entry",
            value: m,
        });
    }
    let total_supply: f64 = supply.iter().sum();
    let total_demand: f64 = demand.iter().sum();
    if (total_supply - total_demand).abs() > BALANCE_TOL * total_supply.max(total_demand).max(1.0) {
        return Err(Error::UnbalancedMarginals {
            supply: total_supply,
            demand: total_demand,
        });
    }
    if rows == 0 || cols == 0 {
        return Ok(TransportPlan {
            plan: Matrix::zeros(rows, cols),
            iterations: 0,
            marginal_error: 0.0,
            converged: true,
        });
    }

    let cost_t = cost.transpose();
    let log_supply: Vec<f64> = supply.iter().map(|s| eps * s.ln()).collect();
    let log_demand: Vec<f64> = demand.iter().map(|d| eps * d.ln()).collect();

    let mut f = vec![0.0; rows];
    let mut g = vec![0.0; cols];
    let mut f_next = vec![0.0; rows];
    potential_update(cost, &g, &log_supply, eps, &mut f);

    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        potential_update(&cost_t, &f, &log_demand, eps, &mut g);
        iterations += 1;
        // Columns of (f, g) are now exact; the next row update tells how far
        // the rows are off: row_sum_i = a_i * exp((f_i - f_next_i) / eps).
        potential_update(cost, &g, &log_supply, eps, &mut f_next);
        let row_err = supply
            .iter()
            .zip(f.iter().zip(&f_next))
            .map(|(a, (fo, fn_))| (a * (((fo - fn_) / eps).exp() - 1.0)).abs())
            .fold(0.0, f64::max);
        if row_err <= tol {
            converged = true;
            break;
        }
        std::mem::swap(&mut f, &mut f_next);
    }

    let mut plan = Matrix::zeros(rows, cols);
    for (i, fi) in f.iter().enumerate() {
        let crow = cost.row(i);
        for j in 0..cols {
            plan.set(i, j, ((fi + g[j] - crow[j]) / eps).exp());
        }
    }
    let row_err = plan
        .row_sums()
        .iter()
        .zip(supply)
        .map(|(s, a)| (s - a).abs())
        .fold(0.0, f64::max);
    let col_err = plan
        .col_sums()
        .iter()
        .zip(demand)
        .map(|(s, b)| (s - b).abs())
        .fold(0.0, f64::max);

    Ok(TransportPlan {
        plan,
        iterations,
        marginal_error: row_err.max(col_err),
        converged,
    })
}

/// `out_i = log_marginal_i - eps * logsumexp_j((other_j - C_ij) / eps)`,
/// where `C` rows index `out`.
fn potential_update(cost: &Matrix, other: &[f64], log_marginal: &[f64], eps: f64, out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate() {
        let crow = cost.row(i);
        let mut m = f64::NEG_INFINITY;
        for (c, v) in crow.iter().zip(other) {
            m = m.max(v - c);
        }
        let s: f64 = crow
            .iter()
            .zip(other)
            .map(|(c, v)| ((v - c - m) / eps).exp())
            .sum();
        *o = log_marginal[i] - (m + eps * s.ln());
    }
}
