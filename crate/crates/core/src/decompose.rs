//! Conditioned measures `μ|P` versus the product measures `ξ_{∇f(y,·)}`:
//! every term of the decomposition theorem, its exact pivot identity, and
//! the selection of one representative product measure per part.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::cover::{covering_exponent, verify_with_table, GradientCover, DEFAULT_PAIR_BUDGET};
use crate::error::Result;
use crate::gibbs::{gibbs, product_gibbs_flat, GibbsMeasure};
use crate::infotheory::{dtc_definitional, dtc_gibbs, entropy_of, PartitionOfSpace};
use crate::potential::{GradientTable, Potential};
use crate::space::{Distribution, ProductSpace};
use crate::transport::dbar_exact_with_budget;

/// Slack used when checking the strict inequalities in floating point.
pub const INEQUALITY_SLACK: f64 = 1e-9;

/// Exact transport is used when the state count is at most this.
pub const DEFAULT_EXACT_TRANSPORT_STATES: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecomposeOptions {
    /// Largest state count for which `d̄ₙ` is solved exactly; above it the
    /// Marton bound stands in for every transport term.
    pub transport_budget: usize,
    /// Pair budget for the exact intra-part diameter.
    pub pair_budget: u128,
}

impl Default for DecomposeOptions {
    fn default() -> Self {
        DecomposeOptions {
            transport_budget: DEFAULT_EXACT_TRANSPORT_STATES,
            pair_budget: DEFAULT_PAIR_BUDGET,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Inequality {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

impl Inequality {
    pub fn new(lhs: f64, rhs: f64) -> Self {
        Inequality {
            lhs,
            rhs,
            holds: lhs <= rhs + INEQUALITY_SLACK,
        }
    }

    pub fn slack(&self) -> f64 {
        self.rhs - self.lhs
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartRecord {
    pub part: usize,
    pub size: usize,
    pub mass: f64,
    /// `∫ D(μ|P ‖ ξ_{∇f(y,·)}) μ|P(dy)`.
    pub kl_term: f64,
    /// `∫ d̄ₙ(μ|P, ξ_{∇f(y,·)}) μ|P(dy)`.
    pub transport_term: f64,
    /// `∬ (∇f(y,y) − ∇f(x,y)) μ|P(dy) μ|P(dx)`.
    pub double_integral: f64,
    /// The chosen `y_P` (minimizing the transport distance, lowest index on ties).
    pub selected: usize,
    pub selected_label: String,
    /// `g_P = ∇f(y_P, ·)`, one vector per coordinate.
    pub selected_gradient: Vec<Vec<f64>>,
    pub selected_kl: f64,
    pub selected_transport: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoremA {
    /// `DTC(μ) ≤ H_μ(P) + δn`.
    pub a: Inequality,
    /// Averaged KL to the gradient product measures.
    pub b: Inequality,
    /// Averaged transport distance.
    pub c: Inequality,
    /// `DTC + averaged KL ≤ H_μ(P) + δn`, from which (a) and (b) follow.
    pub combined: Inequality,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorollaryA {
    pub kl: Inequality,
    pub transport: Inequality,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverSummary {
    pub requested_delta: f64,
    pub centers: Vec<usize>,
    pub radius_check: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecompositionReport {
    pub n: usize,
    pub state_count: usize,
    pub part_count: usize,
    pub log_z: f64,
    pub partition_entropy: f64,
    pub dtc: f64,
    pub dtc_gibbs: f64,
    pub epsilon: f64,
    pub effective_delta: f64,
    pub max_diameter: f64,
    /// False when the diameter is the center-doubling upper bound.
    pub diameter_exact: bool,
    /// False when transport terms are Marton upper bounds.
    pub transport_exact: bool,
    pub transport_budget: usize,
    pub theorem_a: TheoremA,
    pub corollary: CorollaryA,
    /// `|LHS − RHS|` of the pivot identity.
    pub identity_residual: f64,
    /// `Σ_P μ(P) ∬ (∇f(y,y) − ∇f(x,y)) μ|P(dy) μ|P(dx)`; with the partition
    /// entropy this is the right-hand side of the pivot identity.
    pub double_integral: f64,
    pub integrals_equal_residual: f64,
    pub cover: Option<CoverSummary>,
    pub parts: Vec<PartRecord>,
}

impl DecompositionReport {
    /// Every inequality of the theorem and of the corollary holds.
    pub fn all_hold(&self) -> bool {
        let t = &self.theorem_a;
        t.a.holds && t.b.holds && t.c.holds && t.combined.holds && self.corollary.kl.holds && self.corollary.transport.holds
    }

    /// Writes the per-part table as CSV.
    pub fn write_parts_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "part",
            "size",
            "mass",
            "kl_term",
            "transport_term",
            "double_integral",
            "selected",
            "selected_label",
            "selected_kl",
            "selected_transport",
        ])?;
        for p in &self.parts {
            w.write_record([
                p.part.to_string(),
                p.size.to_string(),
                format!("{:.11e}", p.mass),
                format!("{:.11e}", p.kl_term),
                format!("{:.11e}", p.transport_term),
                format!("{:.11e}", p.double_integral),
                p.selected.to_string(),
                p.selected_label.clone(),
                format!("{:.11e}", p.selected_kl),
                format!("{:.11e}", p.selected_transport),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Everything computed once per potential.
pub struct Prepared {
    pub f: Potential,
    pub mu: GibbsMeasure,
    pub table: GradientTable,
}

impl Prepared {
    pub fn new(f: &Potential) -> Self {
        Prepared {
            f: f.clone(),
            mu: gibbs(f),
            table: GradientTable::new(f),
        }
    }

    pub fn space(&self) -> &Arc<ProductSpace> {
        self.f.space()
    }
}

/// Decomposition terms for an arbitrary partition.
pub fn theorem_a_terms(f: &Potential, partition: &PartitionOfSpace) -> Result<DecompositionReport> {
    decompose(&Prepared::new(f), partition, DecomposeOptions::default())
}

/// Decomposition along the pullback of a gradient cover.
pub fn corollary_a_select(f: &Potential, cover: &GradientCover) -> Result<DecompositionReport> {
    decompose_cover(&Prepared::new(f), cover, DecomposeOptions::default())
}

pub fn decompose_cover(prep: &Prepared, cover: &GradientCover, options: DecomposeOptions) -> Result<DecompositionReport> {
    let mut report = decompose(prep, &cover.partition(), options)?;
    debug_assert_eq!(report.epsilon, covering_exponent(cover));
    report.cover = Some(CoverSummary {
        requested_delta: cover.delta,
        centers: cover.centers.clone(),
        radius_check: cover.radius_check,
    });
    Ok(report)
}

struct PerY {
    kl: f64,
    transport: f64,
}

/// The engine: one pass over parts, one `ξ_{∇f(y,·)}` per `y`, reused for
/// the averaged terms and for the selection of `y_P`.
pub fn decompose(
    prep: &Prepared,
    partition: &PartitionOfSpace,
    options: DecomposeOptions,
) -> Result<DecompositionReport> {
    let space = prep.space();
    let n = space.n();
    let nf = n as f64;
    let mu = &prep.mu.dist;
    let table = &prep.table;
    let exact_transport = space.state_count() <= options.transport_budget;

    let check = verify_with_table(table, partition, options.pair_budget);
    let delta = check.effective_delta;
    let masses: Vec<f64> = partition.parts().iter().map(|p| mu.mass(p)).collect();
    let h = entropy_of(&masses);
    let dtc = dtc_definitional(mu);

    let mut parts = Vec::with_capacity(partition.len());
    for (id, part) in partition.parts().iter().enumerate() {
        let mass = masses[id];
        if mass <= 0.0 {
            continue;
        }
        parts.push(part_record(prep, id, part, mass, exact_transport)?);
    }

    let avg = |g: fn(&PartRecord) -> f64| parts.iter().map(|p| p.mass * g(p)).sum::<f64>();
    let kl_avg = avg(|p| p.kl_term);
    let transport_avg = avg(|p| p.transport_term);
    let double_avg = avg(|p| p.double_integral);
    let selected_kl = avg(|p| p.selected_kl);
    let selected_transport = avg(|p| p.selected_transport);
    let epsilon = (partition.len() as f64).ln() / nf.max(1.0);

    let lhs = dtc + kl_avg;
    let rhs = h + double_avg;
    let theorem_a = TheoremA {
        a: Inequality::new(dtc, h + delta * nf),
        b: Inequality::new(kl_avg, h + delta * nf),
        c: Inequality::new(transport_avg, (0.5 * (h / nf + delta)).max(0.0).sqrt()),
        combined: Inequality::new(lhs, h + delta * nf),
    };
    let corollary = CorollaryA {
        kl: Inequality::new(selected_kl, (epsilon + delta) * nf),
        transport: Inequality::new(selected_transport, ((epsilon + delta) / 2.0).sqrt()),
    };

    Ok(DecompositionReport {
        n,
        state_count: space.state_count(),
        part_count: partition.len(),
        log_z: prep.mu.log_z,
        partition_entropy: h,
        dtc,
        dtc_gibbs: dtc_gibbs(&prep.f),
        epsilon,
        effective_delta: delta,
        max_diameter: check.max_diameter,
        diameter_exact: check.exact,
        transport_exact: exact_transport,
        transport_budget: options.transport_budget,
        theorem_a,
        corollary,
        identity_residual: (lhs - rhs).abs(),
        double_integral: double_avg,
        integrals_equal_residual: {
            let (a, b) = tower_sides_with(prep);
            (a - b).abs()
        },
        cover: None,
        parts,
    })
}

fn part_record(prep: &Prepared, id: usize, part: &[usize], mass: f64, exact_transport: bool) -> Result<PartRecord> {
    let space = prep.space();
    let n = space.n();
    let o = space.offsets();
    let table = &prep.table;
    let conditioned = prep.mu.dist.condition(part)?;
    let local: Vec<f64> = part.iter().map(|&x| conditioned.weights()[x]).collect();
    let neg_entropy: f64 = local.iter().filter(|w| **w > 0.0).map(|w| w * w.ln()).sum();

    let per_y: Vec<PerY> = part
        .par_iter()
        .map(|&y| -> Result<PerY> {
            let xi = product_gibbs_flat(space, table.row(y));
            let log_xi: Vec<f64> = xi.flat().iter().map(|p| p.ln()).collect();
            let cross: f64 = part
                .iter()
                .zip(&local)
                .filter(|(_, w)| **w > 0.0)
                .map(|(&x, w)| w * (0..n).map(|i| log_xi[o[i] + space.symbol_at(x, i)]).sum::<f64>())
                .sum();
            let kl = (neg_entropy - cross).max(0.0);
            let transport = if exact_transport {
                dbar_exact_with_budget(&conditioned, &xi, usize::MAX)?.0
            } else {
                (kl / (2.0 * n.max(1) as f64)).sqrt()
            };
            Ok(PerY { kl, transport })
        })
        .collect::<Result<_>>()?;

    let kl_term = per_y.iter().zip(&local).map(|(r, w)| w * r.kl).sum();
    let transport_term = per_y.iter().zip(&local).map(|(r, w)| w * r.transport).sum();

    // ḡ = ∫ ∇f(x,·) μ|P(dx); the double integral is ∫ (∇f(y,y) − ḡ(y)) μ|P(dy).
    let mut mean_row = vec![0.0; table.width()];
    for (&x, w) in part.iter().zip(&local) {
        for (m, v) in mean_row.iter_mut().zip(table.row(x)) {
            *m += w * v;
        }
    }
    let double_integral = part
        .iter()
        .zip(&local)
        .map(|(&y, w)| {
            let mean: f64 = (0..n).map(|i| mean_row[o[i] + space.symbol_at(y, i)]).sum();
            w * (table.eval(y, y) - mean)
        })
        .sum();

    let mut best = 0;
    for (k, r) in per_y.iter().enumerate() {
        if r.transport < per_y[best].transport {
            best = k;
        }
    }
    let selected = part[best];
    let row = table.row(selected);
    Ok(PartRecord {
        part: id,
        size: part.len(),
        mass,
        kl_term,
        transport_term,
        double_integral,
        selected,
        selected_label: space.label(selected),
        selected_gradient: (0..n).map(|i| row[o[i]..o[i + 1]].to_vec()).collect(),
        selected_kl: per_y[best].kl,
        selected_transport: per_y[best].transport,
    })
}

/// `|∫∇f(x,x)μ(dx) − ∬∇f(x,y) ξ_{∇f(x,·)}(dy) μ(dx)|`.
pub fn integrals_equal_residual(f: &Potential) -> f64 {
    let (a, b) = tower_sides(f);
    (a - b).abs()
}

/// The two sides of the tower identity, computed separately.
pub fn tower_sides(f: &Potential) -> (f64, f64) {
    tower_sides_with(&Prepared::new(f))
}

pub fn tower_sides_with(prep: &Prepared) -> (f64, f64) {
    let space = prep.space();
    let table = &prep.table;
    let mu = prep.mu.dist.weights();
    let terms: Vec<(f64, f64)> = (0..space.state_count())
        .into_par_iter()
        .map(|x| {
            let row = table.row(x);
            let xi = product_gibbs_flat(space, row);
            // the ξ-expectation of a separable function splits by coordinate
            let inner: f64 = xi.flat().iter().zip(row).map(|(p, g)| p * g).sum();
            (mu[x] * table.eval(x, x), mu[x] * inner)
        })
        .collect();
    // summed in order so the result does not depend on the thread count
    terms.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1))
}

/// `|LHS − RHS|` of the pivot identity for the given partition.
pub fn dem_identity_residual(f: &Potential, partition: &PartitionOfSpace) -> Result<f64> {
    Ok(theorem_a_terms(f, partition)?.identity_residual)
}

/// `μ|P` for each part of positive mass.
pub fn conditioned_parts(mu: &Distribution, partition: &PartitionOfSpace) -> Result<Vec<Distribution>> {
    partition
        .parts()
        .iter()
        .filter(|p| mu.mass(p) > 0.0)
        .map(|p| mu.condition(p))
        .collect()
}
