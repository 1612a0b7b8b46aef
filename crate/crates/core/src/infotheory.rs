//! Entropy, KL divergence, the modified chain rule, the Gibbs variational
//! gap and dual total correlation. All logarithms are natural.

use crate::error::{Error, Result};
use crate::gibbs::{gibbs, product_gibbs_flat};
use crate::potential::{GradientTable, Potential};
use crate::space::{Distribution, Measure};

/// A partition of the configuration space into nonempty parts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionOfSpace {
    parts: Vec<Vec<usize>>,
    labels: Vec<usize>,
}

impl PartitionOfSpace {
    /// Builds a partition from per-configuration labels. Labels are
    /// renumbered to `0..k` in increasing order; unused labels vanish.
    pub fn from_labels(labels: &[usize]) -> Self {
        let mut ids: Vec<usize> = labels.to_vec();
        ids.sort_unstable();
        ids.dedup();
        let mut parts = vec![Vec::new(); ids.len()];
        let labels = labels
            .iter()
            .enumerate()
            .map(|(x, l)| {
                let p = ids.binary_search(l).expect("label present");
                parts[p].push(x);
                p
            })
            .collect();
        PartitionOfSpace { parts, labels }
    }

    /// Builds a partition from explicit parts over `0..state_count`.
    pub fn from_parts(state_count: usize, parts: Vec<Vec<usize>>) -> Result<Self> {
        let mut labels = vec![usize::MAX; state_count];
        let mut kept = Vec::with_capacity(parts.len());
        for mut part in parts {
            if part.is_empty() {
                continue;
            }
            part.sort_unstable();
            for &x in &part {
                if x >= state_count {
                    return Err(Error::param("parts", format!("index {x} out of range")));
                }
                if labels[x] != usize::MAX {
                    return Err(Error::param("parts", format!("configuration {x} appears twice")));
                }
                labels[x] = kept.len();
            }
            kept.push(part);
        }
        if let Some(x) = labels.iter().position(|&l| l == usize::MAX) {
            return Err(Error::param("parts", format!("configuration {x} is not covered")));
        }
        Ok(PartitionOfSpace { parts: kept, labels })
    }

    pub fn trivial(state_count: usize) -> Self {
        Self::from_labels(&vec![0; state_count])
    }

    pub fn singletons(state_count: usize) -> Self {
        Self::from_labels(&(0..state_count).collect::<Vec<_>>())
    }

    pub fn parts(&self) -> &[Vec<usize>] {
        &self.parts
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn state_count(&self) -> usize {
        self.labels.len()
    }
}

/// `D(μ ‖ ν)` in nats; `+∞` when μ charges a ν-null configuration.
///
/// # Panics
/// If the two measures live on spaces with different state counts.
pub fn kl<A: Measure + ?Sized, B: Measure + ?Sized>(mu: &A, nu: &B) -> f64 {
    let s = mu.space().state_count();
    assert_eq!(s, nu.space().state_count(), "kl: measures on different spaces");
    let mut total = 0.0;
    for x in 0..s {
        let p = mu.weight(x);
        if p <= 0.0 {
            continue;
        }
        let lq = nu.log_weight(x);
        if lq == f64::NEG_INFINITY {
            return f64::INFINITY;
        }
        total += p * (mu.log_weight(x) - lq);
    }
    total.max(0.0)
}

/// Shannon entropy of a probability vector.
pub fn entropy_of(weights: &[f64]) -> f64 {
    // a lone atom of mass 1 + ulp would otherwise give −0 or −1e-16
    (-weights.iter().filter(|w| **w > 0.0).map(|w| w * w.ln()).sum::<f64>()).max(0.0)
}

pub fn entropy(mu: &Distribution) -> f64 {
    entropy_of(mu.weights())
}

/// `H_μ(P) = −Σ μ(P) log μ(P)`.
pub fn partition_entropy(mu: &Distribution, partition: &PartitionOfSpace) -> f64 {
    let masses: Vec<f64> = partition.parts().iter().map(|p| mu.mass(p)).collect();
    entropy_of(&masses)
}

fn finite(value: f64, what: &'static str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::InfiniteDivergence(what))
    }
}

/// `|D(μ‖γ) − (−H_μ(P) + Σ μ(P) D(μ|P ‖ γ))|`.
pub fn modified_chain_rule_residual(mu: &Distribution, gamma: &Distribution, partition: &PartitionOfSpace) -> Result<f64> {
    let (lhs, rhs) = modified_chain_rule_sides(mu, gamma, partition)?;
    Ok((lhs - rhs).abs())
}

/// Both sides of the modified chain rule, computed independently.
pub fn modified_chain_rule_sides(mu: &Distribution, gamma: &Distribution, partition: &PartitionOfSpace) -> Result<(f64, f64)> {
    let lhs = finite(kl(mu, gamma), "D(mu || gamma)")?;
    let mut rhs = -partition_entropy(mu, partition);
    for part in partition.parts() {
        let mass = mu.mass(part);
        if mass <= 0.0 {
            continue;
        }
        rhs += mass * finite(kl(&mu.condition(part)?, gamma), "D(mu|P || gamma)")?;
    }
    Ok((lhs, rhs))
}

/// `[D(ν‖λ) − ∫f dν] − [D(μ‖λ) − ∫f dμ]` for the Gibbs measure μ of `f`.
pub fn variational_gap(nu: &Distribution, f: &Potential) -> Result<f64> {
    let lam = Distribution::reference(f.space().clone());
    let mu = gibbs(f);
    let free_nu = finite(kl(nu, &lam), "D(nu || lambda)")? - nu.expectation(f.values());
    let free_mu = kl(&mu.dist, &lam) - mu.dist.expectation(f.values());
    Ok(free_nu - free_mu)
}

/// `H(X) − Σᵢ H(Xᵢ | X_{[n]∖i})`, written as `Σᵢ H(X_{[n]∖i}) − (n−1) H(X)`.
pub fn dtc_definitional(mu: &Distribution) -> f64 {
    let n = mu.space().n();
    let joint = entropy(mu);
    if n <= 1 {
        return 0.0;
    }
    let others: f64 = (0..n)
        .map(|i| {
            let rest: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            entropy(&mu.marginal(&rest).expect("nonempty coordinate set"))
        })
        .sum();
    others - (n as f64 - 1.0) * joint
}

/// `∫ D(ξ_{∇f(x,·)} ‖ λ) μ(dx) − D(μ ‖ λ)` for the Gibbs measure of `f`.
pub fn dtc_gibbs(f: &Potential) -> f64 {
    let space = f.space();
    let mu = gibbs(f);
    let table = GradientTable::new(f);
    let lam = Distribution::reference(space.clone());
    let averaged: f64 = (0..space.state_count())
        .filter(|&x| mu.dist.weight(x) > 0.0)
        .map(|x| mu.dist.weight(x) * product_gibbs_flat(space, table.row(x)).kl_to_reference())
        .sum();
    averaged - kl(&mu.dist, &lam)
}
