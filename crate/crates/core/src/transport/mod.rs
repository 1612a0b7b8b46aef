//! The transportation distance `d̄ₙ` over the normalized Hamming metric.

mod simplex;
mod sinkhorn;

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gibbs::ProductMeasure;
use crate::infotheory::kl;
use crate::space::{same_space, Measure, ProductSpace};

pub use sinkhorn::{dbar_entropic, dbar_entropic_default, EntropicEstimate, DEFAULT_MAX_ITER};

/// Default cap on support points per side for the exact solver.
pub const DEFAULT_TRANSPORT_BUDGET: usize = 4096;

/// Costs are rounded to integer multiples of `1 / COST_SCALE`.
pub const COST_SCALE: f64 = 1e9;

/// Tolerance of the dual optimality certificate.
pub const CERTIFICATE_TOL: f64 = 1e-9;

/// An optimal coupling stored sparsely.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    /// `(source configuration, target configuration, mass)` with mass > 0.
    pub entries: Vec<(usize, usize, f64)>,
    /// `Σ mass · dₙ(source, target)`.
    pub cost: f64,
    /// Primal value minus dual value, both measured with unrounded costs.
    pub duality_gap: f64,
    /// Most negative reduced cost over all arcs, with unrounded costs.
    pub min_reduced_cost: f64,
}

impl TransportPlan {
    /// Writes `source,target,mass` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["source", "target", "mass"])?;
        for &(s, t, m) in &self.entries {
            w.write_record([s.to_string(), t.to_string(), format!("{m:.11e}")])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn source_marginal(&self, state_count: usize) -> Vec<f64> {
        let mut out = vec![0.0; state_count];
        for &(s, _, m) in &self.entries {
            out[s] += m;
        }
        out
    }

    pub fn target_marginal(&self, state_count: usize) -> Vec<f64> {
        let mut out = vec![0.0; state_count];
        for &(_, t, m) in &self.entries {
            out[t] += m;
        }
        out
    }
}

/// Weighted support of a measure.
pub(crate) fn support_of<M: Measure + ?Sized>(mu: &M) -> (Vec<usize>, Vec<f64>) {
    let w = mu.to_weights();
    w.iter().enumerate().filter(|(_, p)| **p > 0.0).map(|(x, p)| (x, *p)).unzip()
}

/// Dense `dₙ` cost matrix between two index lists, assembled in parallel.
pub(crate) fn cost_matrix(space: &ProductSpace, rows: &[usize], cols: &[usize]) -> Vec<f64> {
    let mut cost = vec![0.0; rows.len() * cols.len()];
    if cols.is_empty() {
        return cost;
    }
    cost.par_chunks_mut(cols.len()).zip(rows.par_iter()).for_each(|(row, &x)| {
        for (c, &y) in row.iter_mut().zip(cols) {
            *c = space.hamming_distance(x, y);
        }
    });
    cost
}

/// Exact `d̄ₙ(μ, ν)` with the default support budget.
pub fn dbar_exact<A, B>(mu: &A, nu: &B) -> Result<(f64, TransportPlan)>
where
    A: Measure + ?Sized,
    B: Measure + ?Sized,
{
    dbar_exact_with_budget(mu, nu, DEFAULT_TRANSPORT_BUDGET)
}

/// Exact `d̄ₙ(μ, ν)` by network simplex on the support-restricted
/// bipartite graph, with a dual optimality certificate.
pub fn dbar_exact_with_budget<A, B>(mu: &A, nu: &B, budget: usize) -> Result<(f64, TransportPlan)>
where
    A: Measure + ?Sized,
    B: Measure + ?Sized,
{
    if !same_space(mu.space(), nu.space()) {
        return Err(Error::SpaceMismatch);
    }
    let space = mu.space();
    let (rows, a) = support_of(mu);
    let (cols, b) = support_of(nu);
    let largest = rows.len().max(cols.len());
    if largest > budget {
        return Err(Error::BudgetExceeded {
            what: "transport support points (use the entropic estimate)",
            count: largest as u128,
            budget: budget as u128,
        });
    }
    let cost = cost_matrix(space, &rows, &cols);

    // A one-point side admits a single coupling.
    if rows.len() == 1 || cols.len() == 1 {
        let entries: Vec<(usize, usize, f64)> = if rows.len() == 1 {
            cols.iter().zip(&b).map(|(&t, &m)| (rows[0], t, m)).collect()
        } else {
            rows.iter().zip(&a).map(|(&s, &m)| (s, cols[0], m)).collect()
        };
        let value: f64 = entries.iter().zip(&cost).map(|((_, _, m), c)| m * c).sum();
        let plan = TransportPlan {
            entries,
            cost: value,
            duality_gap: 0.0,
            min_reduced_cost: 0.0,
        };
        return Ok((value, plan));
    }

    let scaled: Vec<i64> = cost.iter().map(|c| (c * COST_SCALE).round() as i64).collect();
    let solution = simplex::solve(&a, &b, &scaled)?;
    let (m, k) = (rows.len(), cols.len());

    let mut entries = Vec::new();
    let mut primal = 0.0;
    for i in 0..m {
        for j in 0..k {
            let f = solution.flow[i * k + j];
            if f > 0.0 {
                entries.push((rows[i], cols[j], f));
                primal += f * cost[i * k + j];
            }
        }
    }

    // Dual certificate in unrounded units: π[t] − π[s] ≤ c(s,t) everywhere,
    // and Σ b π − Σ a π matches the primal value.
    let pi: Vec<f64> = solution.potentials.iter().map(|&p| p as f64 / COST_SCALE).collect();
    // Shift so that potentials stay small and the dual sum is well conditioned.
    let shift = pi[0];
    let pi: Vec<f64> = pi.iter().map(|p| p - shift).collect();
    let mut min_rc = f64::INFINITY;
    for i in 0..m {
        for j in 0..k {
            let rc = cost[i * k + j] + pi[i] - pi[m + j];
            min_rc = min_rc.min(rc);
        }
    }
    let dual: f64 = (0..k).map(|j| b[j] * pi[m + j]).sum::<f64>() - (0..m).map(|i| a[i] * pi[i]).sum::<f64>();
    let gap = primal - dual;
    if min_rc < -CERTIFICATE_TOL || gap.abs() > CERTIFICATE_TOL {
        return Err(Error::Solver(format!(
            "optimality certificate failed: min reduced cost {min_rc:e}, duality gap {gap:e}"
        )));
    }
    let plan = TransportPlan {
        entries,
        cost: primal,
        duality_gap: gap,
        min_reduced_cost: min_rc.min(0.0),
    };
    Ok((primal, plan))
}

/// Marton's bound `√(D(μ‖ξ) / 2n)`.
pub fn marton_bound<A: Measure + ?Sized>(mu: &A, xi: &ProductMeasure) -> f64 {
    let n = mu.space().n().max(1) as f64;
    (kl(mu, xi) / (2.0 * n)).sqrt()
}
