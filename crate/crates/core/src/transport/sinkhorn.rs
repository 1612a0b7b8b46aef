//! Entropic transport: log-domain Sinkhorn followed by rounding onto the
//! set of exact couplings, so the reported cost is an upper bound on `d̄ₙ`.

use crate::error::{Error, Result};
use crate::gibbs::log_sum_exp;
use crate::space::{same_space, Measure};

use super::{cost_matrix, support_of};

pub const DEFAULT_MAX_ITER: usize = 100_000;

/// Marginal violation (L1) at which the iteration is declared converged.
pub const CONVERGENCE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct EntropicEstimate {
    /// Cost of the rounded, exactly feasible coupling (≥ the exact value).
    pub cost: f64,
    pub reg: f64,
    pub iterations: usize,
    /// L1 marginal violation of the Sinkhorn plan before rounding.
    pub violation: f64,
}

/// Entropic estimate with `reg = 1e-2 · median nonzero cost`.
pub fn dbar_entropic_default<A, B>(mu: &A, nu: &B) -> Result<EntropicEstimate>
where
    A: Measure + ?Sized,
    B: Measure + ?Sized,
{
    let (rows, _) = support_of(mu);
    let (cols, _) = support_of(nu);
    let mut costs: Vec<f64> = cost_matrix(mu.space(), &rows, &cols).into_iter().filter(|c| *c > 0.0).collect();
    if costs.is_empty() {
        return dbar_entropic(mu, nu, 1e-2, DEFAULT_MAX_ITER);
    }
    costs.sort_by(f64::total_cmp);
    let median = costs[costs.len() / 2];
    dbar_entropic(mu, nu, 1e-2 * median, DEFAULT_MAX_ITER)
}

pub fn dbar_entropic<A, B>(mu: &A, nu: &B, reg: f64, max_iter: usize) -> Result<EntropicEstimate>
where
    A: Measure + ?Sized,
    B: Measure + ?Sized,
{
    if !(reg > 0.0 && reg.is_finite()) {
        return Err(Error::param("reg", "must be positive"));
    }
    if !same_space(mu.space(), nu.space()) {
        return Err(Error::SpaceMismatch);
    }
    let (rows, a) = support_of(mu);
    let (cols, b) = support_of(nu);
    let (m, k) = (rows.len(), cols.len());
    let cost = cost_matrix(mu.space(), &rows, &cols);
    let log_a: Vec<f64> = a.iter().map(|v| v.ln()).collect();
    let log_b: Vec<f64> = b.iter().map(|v| v.ln()).collect();

    // Dual potentials scaled by 1/reg.
    let mut u = vec![0.0; m];
    let mut v = vec![0.0; k];
    let mut scratch = vec![0.0; m.max(k)];
    let log_plan = |u: &[f64], v: &[f64], i: usize, j: usize| u[i] + v[j] - cost[i * k + j] / reg;

    let mut iterations = 0;
    let mut violation = f64::INFINITY;
    while iterations < max_iter {
        iterations += 1;
        for i in 0..m {
            for j in 0..k {
                scratch[j] = v[j] - cost[i * k + j] / reg;
            }
            u[i] = log_a[i] - log_sum_exp(&scratch[..k]);
        }
        for j in 0..k {
            for i in 0..m {
                scratch[i] = u[i] - cost[i * k + j] / reg;
            }
            v[j] = log_b[j] - log_sum_exp(&scratch[..m]);
        }
        // Columns are exact after the v-update; measure the row violation.
        if iterations % 10 == 0 || iterations == max_iter {
            violation = (0..m)
                .map(|i| {
                    let row: f64 = (0..k).map(|j| log_plan(&u, &v, i, j).exp()).sum();
                    (row - a[i]).abs()
                })
                .sum();
            if violation < CONVERGENCE_TOL {
                break;
            }
        }
    }
    if violation >= CONVERGENCE_TOL {
        return Err(Error::SinkhornNotConverged { iterations, violation });
    }

    let mut plan: Vec<f64> = (0..m * k).map(|e| log_plan(&u, &v, e / k, e % k).exp()).collect();
    round_to_coupling(&mut plan, &a, &b);
    let cost_value = plan.iter().zip(&cost).map(|(p, c)| p * c).sum();
    Ok(EntropicEstimate {
        cost: cost_value,
        reg,
        iterations,
        violation,
    })
}

/// Projects a nonnegative matrix onto the couplings of `(a, b)`: scale
/// rows down, scale columns down, then distribute the remaining mass as a
/// rank-one correction.
fn round_to_coupling(plan: &mut [f64], a: &[f64], b: &[f64]) {
    let (m, k) = (a.len(), b.len());
    for i in 0..m {
        let row: f64 = plan[i * k..(i + 1) * k].iter().sum();
        if row > a[i] {
            let s = a[i] / row;
            plan[i * k..(i + 1) * k].iter_mut().for_each(|p| *p *= s);
        }
    }
    for j in 0..k {
        let col: f64 = (0..m).map(|i| plan[i * k + j]).sum();
        if col > b[j] {
            let s = b[j] / col;
            (0..m).for_each(|i| plan[i * k + j] *= s);
        }
    }
    let err_a: Vec<f64> = (0..m)
        .map(|i| (a[i] - plan[i * k..(i + 1) * k].iter().sum::<f64>()).max(0.0))
        .collect();
    let err_b: Vec<f64> = (0..k)
        .map(|j| (b[j] - (0..m).map(|i| plan[i * k + j]).sum::<f64>()).max(0.0))
        .collect();
    let total: f64 = err_a.iter().sum();
    if total > 0.0 {
        for i in 0..m {
            for j in 0..k {
                plan[i * k + j] += err_a[i] * err_b[j] / total;
            }
        }
    }
}
