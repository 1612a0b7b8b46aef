//! Gibbs measures `μ(dx) ∝ e^{f(x)} λ(dx)` and product measures `ξ_g`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::potential::{Potential, SeparableFunction};
use crate::space::{Distribution, Measure, ProductSpace};

/// The Gibbs measure of a potential together with `log ∫ e^f dλ`.
#[derive(Debug, Clone)]
pub struct GibbsMeasure {
    pub dist: Distribution,
    pub log_z: f64,
    log_weights: Vec<f64>,
}

impl GibbsMeasure {
    /// `log μ(x)`, computed without passing through the (possibly
    /// underflowing) weight.
    pub fn log_weight(&self, x: usize) -> f64 {
        self.log_weights[x]
    }
}

impl Measure for GibbsMeasure {
    fn space(&self) -> &Arc<ProductSpace> {
        self.dist.space()
    }

    fn weight(&self, index: usize) -> f64 {
        self.dist.weight(index)
    }

    fn log_weight(&self, index: usize) -> f64 {
        self.log_weights[index]
    }

    fn to_weights(&self) -> Vec<f64> {
        self.dist.weights().to_vec()
    }
}

/// `log Σ exp(vᵢ)` with max subtraction.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

pub fn gibbs(f: &Potential) -> GibbsMeasure {
    let space = f.space();
    let unnormalized: Vec<f64> = (0..space.state_count())
        .map(|x| {
            let log_ref: f64 = (0..space.n())
                .map(|i| space.reference_measure(i)[space.symbol_at(x, i)].ln())
                .sum();
            f.eval(x) + log_ref
        })
        .collect();
    let log_z = log_sum_exp(&unnormalized);
    let log_weights: Vec<f64> = unnormalized.iter().map(|v| v - log_z).collect();
    let weights = log_weights.iter().map(|v| v.exp()).collect();
    let dist = Distribution::from_unnormalized(space.clone(), weights).expect("Gibbs weights are positive and finite");
    GibbsMeasure { dist, log_z, log_weights }
}

/// A product measure stored factor by factor.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductMeasure {
    space: Arc<ProductSpace>,
    factors: Vec<f64>,
    log_factors: Vec<f64>,
}

impl ProductMeasure {
    pub fn new(space: Arc<ProductSpace>, factors: Vec<Vec<f64>>) -> Result<Self> {
        if factors.len() != space.n() {
            return Err(Error::param("factors", format!("expected {} factors, got {}", space.n(), factors.len())));
        }
        let mut flat = Vec::with_capacity(space.total_symbols());
        for (i, factor) in factors.iter().enumerate() {
            if factor.len() != space.alphabet_size(i) {
                return Err(Error::space(i, "factors", format!("expected {} entries", space.alphabet_size(i))));
            }
            if factor.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                return Err(Error::space(i, "factors", "entries must be nonnegative"));
            }
            let total: f64 = factor.iter().sum();
            if (total - 1.0).abs() > 1e-12 {
                return Err(Error::space(i, "factors", format!("entries sum to {total}")));
            }
            flat.extend_from_slice(factor);
        }
        Ok(Self::from_flat(space, flat))
    }

    pub(crate) fn from_flat(space: Arc<ProductSpace>, factors: Vec<f64>) -> Self {
        let log_factors = factors.iter().map(|p| p.ln()).collect();
        ProductMeasure {
            space,
            factors,
            log_factors,
        }
    }

    /// λ₁ × ⋯ × λₙ.
    pub fn reference(space: Arc<ProductSpace>) -> Self {
        let flat = (0..space.n()).flat_map(|i| space.reference_measure(i).to_vec()).collect();
        Self::from_flat(space, flat)
    }

    pub fn factor(&self, i: usize) -> &[f64] {
        let o = self.space.offsets();
        &self.factors[o[i]..o[i + 1]]
    }

    pub fn flat(&self) -> &[f64] {
        &self.factors
    }

    /// Joint weights in canonical order, built as an outer product.
    pub fn joint_weights(&self) -> Vec<f64> {
        let mut w = vec![1.0];
        for i in 0..self.space.n() {
            let f = self.factor(i);
            w = w.iter().flat_map(|&a| f.iter().map(move |&b| a * b)).collect();
        }
        w
    }

    pub fn to_distribution(&self) -> Distribution {
        Distribution::from_unnormalized(self.space.clone(), self.joint_weights()).expect("product weights are a probability vector")
    }

    /// `D(ξ ‖ λ)` by additivity over coordinates.
    pub fn kl_to_reference(&self) -> f64 {
        (0..self.space.n())
            .map(|i| {
                self.factor(i)
                    .iter()
                    .zip(self.space.reference_measure(i))
                    .filter(|(p, _)| **p > 0.0)
                    .map(|(p, l)| p * (p / l).ln())
                    .sum::<f64>()
            })
            .sum()
    }

    /// `∫ v dξ` for a dense table `v`.
    pub fn expectation(&self, values: &[f64]) -> f64 {
        self.joint_weights().iter().zip(values).map(|(w, v)| w * v).sum()
    }
}

impl Measure for ProductMeasure {
    fn space(&self) -> &Arc<ProductSpace> {
        &self.space
    }

    fn weight(&self, index: usize) -> f64 {
        let o = self.space.offsets();
        (0..self.space.n())
            .map(|i| self.factors[o[i] + self.space.symbol_at(index, i)])
            .product()
    }

    fn log_weight(&self, index: usize) -> f64 {
        let o = self.space.offsets();
        (0..self.space.n())
            .map(|i| self.log_factors[o[i] + self.space.symbol_at(index, i)])
            .sum()
    }

    fn to_weights(&self) -> Vec<f64> {
        self.joint_weights()
    }
}

/// `ξ_g`: factor `i` proportional to `e^{gᵢ(s)} λᵢ(s)`.
pub fn product_gibbs(g: &SeparableFunction) -> ProductMeasure {
    product_gibbs_flat(g.space(), g.flat())
}

pub(crate) fn product_gibbs_flat(space: &Arc<ProductSpace>, g: &[f64]) -> ProductMeasure {
    let o = space.offsets();
    let mut flat = Vec::with_capacity(g.len());
    for i in 0..space.n() {
        let lam = space.reference_measure(i);
        let logs: Vec<f64> = (o[i]..o[i + 1]).zip(lam).map(|(s, l)| g[s] + l.ln()).collect();
        let lse = log_sum_exp(&logs);
        flat.extend(logs.iter().map(|v| (v - lse).exp()));
    }
    ProductMeasure::from_flat(space.clone(), flat)
}

/// `μ(xᵢ = · | x_{[n]∖i} = rest)` where `rest` lists the other coordinates'
/// symbols in order.
pub fn conditional(mu: &Distribution, i: usize, rest: &[usize]) -> Result<Vec<f64>> {
    let space = mu.space();
    if i >= space.n() {
        return Err(Error::param("i", format!("coordinate {i} out of range")));
    }
    if rest.len() + 1 != space.n() {
        return Err(Error::param("rest", format!("expected {} symbols", space.n() - 1)));
    }
    let mut symbols: Vec<usize> = rest.to_vec();
    symbols.insert(i, space.reference_point(i));
    let base = space.encode(&symbols)?;
    conditional_at(mu, i, base)
}

/// Conditional law of coordinate `i` given the other coordinates of the
/// configuration ranked `x`.
pub fn conditional_at(mu: &Distribution, i: usize, x: usize) -> Result<Vec<f64>> {
    let space = mu.space();
    let weights: Vec<f64> = (0..space.alphabet_size(i))
        .map(|s| mu.weight(space.with_symbol(x, i, s)))
        .collect();
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::ZeroMass);
    }
    Ok(weights.iter().map(|w| w / total).collect())
}
