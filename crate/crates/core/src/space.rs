//! Finite product spaces, configuration enumeration and exact distributions.
//!
//! Configurations are ranked in mixed-radix order with the last coordinate
//! varying fastest. Every table in the crate (potentials, distributions,
//! gradient tables) is indexed by this rank.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on the number of configurations a space may have.
pub const DEFAULT_STATE_BUDGET: usize = 1 << 20;

const MEASURE_TOL: f64 = 1e-12;

/// A product of finite alphabets, each carrying a metric bounded by one,
/// a strictly positive reference measure and a reference symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductSpace {
    alphabets: Vec<Vec<String>>,
    /// Row-major `k × k` distance tables.
    metrics: Vec<Vec<f64>>,
    reference_measures: Vec<Vec<f64>>,
    reference_points: Vec<usize>,
    strides: Vec<usize>,
    offsets: Vec<usize>,
    state_count: usize,
}

/// A point of the product space: one symbol index per coordinate plus its
/// rank in the canonical enumeration.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Config {
    pub symbols: Vec<usize>,
    pub index: usize,
}

pub struct SpaceBuilder {
    alphabets: Vec<Vec<String>>,
    metrics: Option<Vec<Vec<Vec<f64>>>>,
    reference_measures: Option<Vec<Vec<f64>>>,
    reference_points: Option<Vec<usize>>,
    state_budget: usize,
}

impl SpaceBuilder {
    pub fn metrics(mut self, metrics: Vec<Vec<Vec<f64>>>) -> Self {
        self.metrics = Some(metrics);
        self
    }

    pub fn reference_measures(mut self, measures: Vec<Vec<f64>>) -> Self {
        self.reference_measures = Some(measures);
        self
    }

    pub fn reference_points(mut self, points: Vec<usize>) -> Self {
        self.reference_points = Some(points);
        self
    }

    pub fn state_budget(mut self, budget: usize) -> Self {
        self.state_budget = budget;
        self
    }

    pub fn build(self) -> Result<Arc<ProductSpace>> {
        let n = self.alphabets.len();
        if n == 0 {
            return Err(Error::param("alphabets", "at least one coordinate is required"));
        }

        let mut state_count: u128 = 1;
        for (i, alphabet) in self.alphabets.iter().enumerate() {
            if alphabet.is_empty() {
                return Err(Error::space(i, "alphabets", "alphabet is empty"));
            }
            for (a, name) in alphabet.iter().enumerate() {
                if alphabet[..a].contains(name) {
                    return Err(Error::space(i, "alphabets", format!("duplicate symbol `{name}`")));
                }
            }
            state_count = state_count.saturating_mul(alphabet.len() as u128);
        }
        if state_count > self.state_budget as u128 {
            return Err(Error::BudgetExceeded {
                what: "state count",
                count: state_count,
                budget: self.state_budget as u128,
            });
        }
        let state_count = state_count as usize;

        let metrics = match self.metrics {
            None => self
                .alphabets
                .iter()
                .map(|a| discrete_metric(a.len()))
                .collect(),
            Some(tables) => {
                if tables.len() != n {
                    return Err(Error::space(
                        tables.len().min(n),
                        "metrics",
                        format!("expected {n} tables, got {}", tables.len()),
                    ));
                }
                let mut flat = Vec::with_capacity(n);
                for (i, table) in tables.iter().enumerate() {
                    flat.push(validate_metric(i, self.alphabets[i].len(), table)?);
                }
                flat
            }
        };

        let reference_measures = match self.reference_measures {
            None => self
                .alphabets
                .iter()
                .map(|a| vec![1.0 / a.len() as f64; a.len()])
                .collect(),
            Some(measures) => {
                if measures.len() != n {
                    return Err(Error::space(
                        measures.len().min(n),
                        "reference_measures",
                        format!("expected {n} vectors, got {}", measures.len()),
                    ));
                }
                for (i, m) in measures.iter().enumerate() {
                    validate_measure(i, self.alphabets[i].len(), m)?;
                }
                measures
            }
        };

        let reference_points = match self.reference_points {
            None => vec![0; n],
            Some(points) => {
                if points.len() != n {
                    return Err(Error::space(
                        points.len().min(n),
                        "reference_points",
                        format!("expected {n} symbols, got {}", points.len()),
                    ));
                }
                for (i, &p) in points.iter().enumerate() {
                    if p >= self.alphabets[i].len() {
                        return Err(Error::space(i, "reference_points", format!("symbol index {p} out of range")));
                    }
                }
                points
            }
        };

        let mut strides = vec![1usize; n];
        for i in (0..n.saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * self.alphabets[i + 1].len();
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut acc = 0;
        for a in &self.alphabets {
            offsets.push(acc);
            acc += a.len();
        }
        offsets.push(acc);

        Ok(Arc::new(ProductSpace {
            alphabets: self.alphabets,
            metrics,
            reference_measures,
            reference_points,
            strides,
            offsets,
            state_count,
        }))
    }
}

fn discrete_metric(k: usize) -> Vec<f64> {
    let mut table = vec![1.0; k * k];
    for a in 0..k {
        table[a * k + a] = 0.0;
    }
    table
}

fn validate_metric(coord: usize, k: usize, table: &[Vec<f64>]) -> Result<Vec<f64>> {
    if table.len() != k || table.iter().any(|row| row.len() != k) {
        return Err(Error::space(coord, "metrics", format!("table must be {k}x{k}")));
    }
    for a in 0..k {
        for b in 0..k {
            let d = table[a][b];
            if !(0.0..=1.0).contains(&d) {
                return Err(Error::space(coord, "metrics", format!("d({a},{b}) = {d} outside [0, 1]")));
            }
            if a == b && d != 0.0 {
                return Err(Error::space(coord, "metrics", format!("nonzero diagonal at {a}")));
            }
            if (d - table[b][a]).abs() > 1e-12 {
                return Err(Error::space(coord, "metrics", format!("asymmetric at ({a},{b})")));
            }
        }
    }
    Ok(table.iter().flatten().copied().collect())
}

fn validate_measure(coord: usize, k: usize, m: &[f64]) -> Result<()> {
    if m.len() != k {
        return Err(Error::space(coord, "reference_measures", format!("expected {k} entries, got {}", m.len())));
    }
    if let Some(p) = m.iter().find(|p| !(p.is_finite() && **p > 0.0)) {
        return Err(Error::space(coord, "reference_measures", format!("entry {p} is not strictly positive")));
    }
    let total: f64 = m.iter().sum();
    if (total - 1.0).abs() > MEASURE_TOL {
        return Err(Error::space(coord, "reference_measures", format!("entries sum to {total}")));
    }
    Ok(())
}

impl ProductSpace {
    pub fn builder(alphabets: Vec<Vec<String>>) -> SpaceBuilder {
        SpaceBuilder {
            alphabets,
            metrics: None,
            reference_measures: None,
            reference_points: None,
            state_budget: DEFAULT_STATE_BUDGET,
        }
    }

    /// Alphabets `{0, …, k-1}` with discrete metrics and uniform reference measures.
    pub fn uniform(sizes: &[usize]) -> Result<Arc<ProductSpace>> {
        Self::builder(numbered_alphabets(sizes)).build()
    }

    /// `{-1, +1}^n` with the discrete metric, uniform reference measures and
    /// reference point `-1` everywhere.
    pub fn spins(n: usize) -> Result<Arc<ProductSpace>> {
        Self::builder(spin_alphabets(n)).build()
    }

    pub fn n(&self) -> usize {
        self.alphabets.len()
    }

    pub fn state_count(&self) -> usize {
        self.state_count
    }

    pub fn alphabet_size(&self, i: usize) -> usize {
        self.alphabets[i].len()
    }

    pub fn alphabet(&self, i: usize) -> &[String] {
        &self.alphabets[i]
    }

    pub fn alphabets(&self) -> &[Vec<String>] {
        &self.alphabets
    }

    pub fn metric(&self, i: usize, a: usize, b: usize) -> f64 {
        self.metrics[i][a * self.alphabets[i].len() + b]
    }

    pub fn reference_measure(&self, i: usize) -> &[f64] {
        &self.reference_measures[i]
    }

    pub fn reference_point(&self, i: usize) -> usize {
        self.reference_points[i]
    }

    pub fn reference_points(&self) -> &[usize] {
        &self.reference_points
    }

    /// Start of coordinate `i` in flat per-symbol tables; `offsets()[n]` is
    /// the total symbol count.
    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn total_symbols(&self) -> usize {
        self.offsets[self.n()]
    }

    pub fn stride(&self, i: usize) -> usize {
        self.strides[i]
    }

    /// Symbol of coordinate `i` in the configuration ranked `index`.
    #[inline]
    pub fn symbol_at(&self, index: usize, i: usize) -> usize {
        (index / self.strides[i]) % self.alphabets[i].len()
    }

    /// Rank of the configuration obtained from `index` by setting coordinate `i` to `s`.
    #[inline]
    pub fn with_symbol(&self, index: usize, i: usize, s: usize) -> usize {
        let cur = self.symbol_at(index, i);
        index + s * self.strides[i] - cur * self.strides[i]
    }

    pub fn decode(&self, index: usize) -> Config {
        let symbols = (0..self.n()).map(|i| self.symbol_at(index, i)).collect();
        Config { symbols, index }
    }

    pub fn encode(&self, symbols: &[usize]) -> Result<usize> {
        if symbols.len() != self.n() {
            return Err(Error::param("symbols", format!("expected {} symbols, got {}", self.n(), symbols.len())));
        }
        let mut index = 0;
        for (i, &s) in symbols.iter().enumerate() {
            if s >= self.alphabets[i].len() {
                return Err(Error::space(i, "symbols", format!("symbol index {s} out of range")));
            }
            index += s * self.strides[i];
        }
        Ok(index)
    }

    pub fn config(&self, symbols: &[usize]) -> Result<Config> {
        let index = self.encode(symbols)?;
        Ok(Config {
            symbols: symbols.to_vec(),
            index,
        })
    }

    /// Symbol names of a configuration, joined for display.
    pub fn label(&self, index: usize) -> String {
        (0..self.n())
            .map(|i| self.alphabets[i][self.symbol_at(index, i)].as_str())
            .collect::<Vec<_>>()
            .join(",")
    }

    /// Normalized Hamming average of the coordinate metrics.
    pub fn hamming_distance(&self, x: usize, y: usize) -> f64 {
        let mut total = 0.0;
        for i in 0..self.n() {
            let (a, b) = (self.symbol_at(x, i), self.symbol_at(y, i));
            if a != b {
                total += self.metric(i, a, b);
            }
        }
        total / self.n() as f64
    }

    pub fn configs(&self) -> impl Iterator<Item = Config> + '_ {
        (0..self.state_count).map(move |index| self.decode(index))
    }

    /// Reference measure of a configuration under the product of the λᵢ.
    pub fn reference_weight(&self, index: usize) -> f64 {
        (0..self.n())
            .map(|i| self.reference_measures[i][self.symbol_at(index, i)])
            .product()
    }

    pub fn has_uniform_reference(&self) -> bool {
        self.first_nonuniform_coordinate().is_none()
    }

    pub(crate) fn first_nonuniform_coordinate(&self) -> Option<usize> {
        self.reference_measures.iter().position(|m| {
            let u = 1.0 / m.len() as f64;
            m.iter().any(|p| (p - u).abs() > MEASURE_TOL)
        })
    }

    /// Whether every coordinate metric satisfies the triangle inequality, in
    /// which case the normalized Hamming metric is the path metric of the
    /// single-coordinate-change graph.
    pub fn metrics_are_metric(&self) -> bool {
        (0..self.n()).all(|i| {
            let k = self.alphabet_size(i);
            (0..k).all(|a| {
                (0..k).all(|b| {
                    (0..k).all(|c| self.metric(i, a, c) <= self.metric(i, a, b) + self.metric(i, b, c) + 1e-12)
                })
            })
        })
    }

    /// The same space with different reference points.
    pub fn with_reference_points(&self, points: Vec<usize>) -> Result<Arc<ProductSpace>> {
        if points.len() != self.n() {
            return Err(Error::space(
                points.len().min(self.n()),
                "reference_points",
                format!("expected {} symbols, got {}", self.n(), points.len()),
            ));
        }
        for (i, &p) in points.iter().enumerate() {
            if p >= self.alphabet_size(i) {
                return Err(Error::space(i, "reference_points", format!("symbol index {p} out of range")));
            }
        }
        let mut space = self.clone();
        space.reference_points = points;
        Ok(Arc::new(space))
    }

    /// The same space with different reference measures.
    pub fn with_reference_measures(&self, measures: Vec<Vec<f64>>) -> Result<Arc<ProductSpace>> {
        if measures.len() != self.n() {
            return Err(Error::space(
                measures.len().min(self.n()),
                "reference_measures",
                format!("expected {} vectors, got {}", self.n(), measures.len()),
            ));
        }
        for (i, m) in measures.iter().enumerate() {
            validate_measure(i, self.alphabet_size(i), m)?;
        }
        let mut space = self.clone();
        space.reference_measures = measures;
        Ok(Arc::new(space))
    }

    /// The product of the listed coordinates, keeping their metrics,
    /// reference measures and reference points.
    pub fn subspace(&self, coords: &[usize]) -> Result<Arc<ProductSpace>> {
        validate_coords(self.n(), coords)?;
        let alphabets = coords.iter().map(|&i| self.alphabets[i].clone()).collect();
        let metrics = coords
            .iter()
            .map(|&i| {
                let k = self.alphabet_size(i);
                (0..k)
                    .map(|a| (0..k).map(|b| self.metric(i, a, b)).collect())
                    .collect()
            })
            .collect();
        let measures = coords.iter().map(|&i| self.reference_measures[i].clone()).collect();
        let points = coords.iter().map(|&i| self.reference_points[i]).collect();
        ProductSpace::builder(alphabets)
            .metrics(metrics)
            .reference_measures(measures)
            .reference_points(points)
            .state_budget(self.state_count.max(1))
            .build()
    }
}

pub(crate) fn numbered_alphabets(sizes: &[usize]) -> Vec<Vec<String>> {
    sizes
        .iter()
        .map(|&k| (0..k).map(|s| s.to_string()).collect())
        .collect()
}

pub(crate) fn spin_alphabets(n: usize) -> Vec<Vec<String>> {
    (0..n).map(|_| vec!["-1".to_string(), "+1".to_string()]).collect()
}

fn validate_coords(n: usize, coords: &[usize]) -> Result<()> {
    if coords.is_empty() {
        return Err(Error::param("coords", "coordinate subset must be nonempty"));
    }
    for (k, &c) in coords.iter().enumerate() {
        if c >= n {
            return Err(Error::param("coords", format!("coordinate {c} out of range for n = {n}")));
        }
        if coords[..k].contains(&c) {
            return Err(Error::param("coords", format!("coordinate {c} repeated")));
        }
    }
    Ok(())
}

/// All configurations in canonical order, checked against a state budget.
pub fn enumerate_configs(space: &ProductSpace, budget: usize) -> Result<Vec<Config>> {
    if space.state_count() > budget {
        return Err(Error::BudgetExceeded {
            what: "state count",
            count: space.state_count() as u128,
            budget: budget as u128,
        });
    }
    Ok(space.configs().collect())
}

pub(crate) fn same_space(a: &Arc<ProductSpace>, b: &Arc<ProductSpace>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

/// Anything that assigns a probability to each configuration of a space.
pub trait Measure {
    fn space(&self) -> &Arc<ProductSpace>;

    fn weight(&self, index: usize) -> f64;

    fn log_weight(&self, index: usize) -> f64 {
        self.weight(index).ln()
    }

    /// Dense probability vector in canonical order.
    fn to_weights(&self) -> Vec<f64> {
        (0..self.space().state_count()).map(|x| self.weight(x)).collect()
    }
}

/// An exact probability vector over the configurations of a space.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    space: Arc<ProductSpace>,
    weights: Vec<f64>,
}

impl Distribution {
    /// Wraps an already normalized weight vector.
    pub fn new(space: Arc<ProductSpace>, weights: Vec<f64>) -> Result<Self> {
        check_weights(&space, &weights)?;
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > MEASURE_TOL {
            return Err(Error::param("weights", format!("weights sum to {total}, not 1")));
        }
        Ok(Distribution { space, weights })
    }

    /// Normalizes nonnegative weights with positive total.
    pub fn from_unnormalized(space: Arc<ProductSpace>, mut weights: Vec<f64>) -> Result<Self> {
        check_weights(&space, &weights)?;
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::ZeroMass);
        }
        weights.iter_mut().for_each(|w| *w /= total);
        Ok(Distribution { space, weights })
    }

    pub fn point_mass(space: Arc<ProductSpace>, index: usize) -> Result<Self> {
        if index >= space.state_count() {
            return Err(Error::param("index", format!("{index} out of range")));
        }
        let mut weights = vec![0.0; space.state_count()];
        weights[index] = 1.0;
        Ok(Distribution { space, weights })
    }

    pub fn uniform(space: Arc<ProductSpace>) -> Self {
        let s = space.state_count();
        Distribution {
            space,
            weights: vec![1.0 / s as f64; s],
        }
    }

    /// The reference product measure λ₁ × ⋯ × λₙ.
    pub fn reference(space: Arc<ProductSpace>) -> Self {
        let weights = (0..space.state_count()).map(|x| space.reference_weight(x)).collect();
        Distribution { space, weights }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Indices with positive weight, ascending.
    pub fn support(&self) -> Vec<usize> {
        (0..self.weights.len()).filter(|&x| self.weights[x] > 0.0).collect()
    }

    pub fn mass(&self, part: &[usize]) -> f64 {
        part.iter().map(|&x| self.weights[x]).sum()
    }

    pub fn expectation(&self, values: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(values)
            .filter(|(w, _)| **w > 0.0)
            .map(|(w, v)| w * v)
            .sum()
    }

    /// Exact marginal on the listed coordinates, as a distribution on the
    /// corresponding sub-product (coordinates in the listed order).
    pub fn marginal(&self, coords: &[usize]) -> Result<Distribution> {
        let sub = self.space.subspace(coords)?;
        let mut weights = vec![0.0; sub.state_count()];
        for (x, &w) in self.weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let mut y = 0;
            for (k, &c) in coords.iter().enumerate() {
                y += self.space.symbol_at(x, c) * sub.stride(k);
            }
            weights[y] += w;
        }
        Ok(Distribution { space: sub, weights })
    }

    /// μ(· | part). Fails on a null event.
    pub fn condition(&self, part: &[usize]) -> Result<Distribution> {
        let s = self.space.state_count();
        if let Some(&x) = part.iter().find(|&&x| x >= s) {
            return Err(Error::param("part", format!("index {x} out of range")));
        }
        let total = self.mass(part);
        if total <= 0.0 {
            return Err(Error::ZeroMass);
        }
        let mut weights = vec![0.0; s];
        for &x in part {
            weights[x] = self.weights[x] / total;
        }
        Ok(Distribution {
            space: self.space.clone(),
            weights,
        })
    }
}

fn check_weights(space: &ProductSpace, weights: &[f64]) -> Result<()> {
    if weights.len() != space.state_count() {
        return Err(Error::param(
            "weights",
            format!("expected {} weights, got {}", space.state_count(), weights.len()),
        ));
    }
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
        return Err(Error::param("weights", format!("invalid weight {w}")));
    }
    Ok(())
}

impl Measure for Distribution {
    fn space(&self) -> &Arc<ProductSpace> {
        &self.space
    }

    fn weight(&self, index: usize) -> f64 {
        self.weights[index]
    }

    fn to_weights(&self) -> Vec<f64> {
        self.weights.clone()
    }
}

/// Serialized form of a product space.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SpaceSpec {
    pub alphabets: Vec<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<Vec<Vec<Vec<f64>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_measures: Option<Vec<Vec<f64>>>,
    /// Symbol names; defaults to the first symbol of each alphabet.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_points: Option<Vec<String>>,
}

impl SpaceSpec {
    pub fn build(&self, state_budget: usize) -> Result<Arc<ProductSpace>> {
        let mut builder = ProductSpace::builder(self.alphabets.clone()).state_budget(state_budget);
        if let Some(m) = &self.metrics {
            builder = builder.metrics(m.clone());
        }
        if let Some(m) = &self.reference_measures {
            builder = builder.reference_measures(m.clone());
        }
        if let Some(points) = &self.reference_points {
            if points.len() != self.alphabets.len() {
                return Err(Error::space(
                    points.len().min(self.alphabets.len()),
                    "reference_points",
                    format!("expected {} symbols, got {}", self.alphabets.len(), points.len()),
                ));
            }
            let mut idx = Vec::with_capacity(points.len());
            for (i, name) in points.iter().enumerate() {
                let pos = self.alphabets[i]
                    .iter()
                    .position(|s| s == name)
                    .ok_or_else(|| Error::space(i, "reference_points", format!("unknown symbol `{name}`")))?;
                idx.push(pos);
            }
            builder = builder.reference_points(idx);
        }
        builder.build()
    }

    pub fn from_space(space: &ProductSpace) -> Self {
        let n = space.n();
        SpaceSpec {
            alphabets: space.alphabets.clone(),
            metrics: Some(
                (0..n)
                    .map(|i| {
                        let k = space.alphabet_size(i);
                        (0..k).map(|a| (0..k).map(|b| space.metric(i, a, b)).collect()).collect()
                    })
                    .collect(),
            ),
            reference_measures: Some(space.reference_measures.clone()),
            reference_points: Some(
                (0..n)
                    .map(|i| space.alphabets[i][space.reference_points[i]].clone())
                    .collect(),
            ),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn singleton_space_has_one_config() {
        let space = ProductSpace::builder(vec![vec!["a".into()]]).build().unwrap();
        let configs = enumerate_configs(&space, DEFAULT_STATE_BUDGET).unwrap();
        assert_eq!(configs, vec![Config { symbols: vec![0], index: 0 }]);
    }

    #[test]
    fn last_coordinate_varies_fastest() {
        let space = ProductSpace::uniform(&[2, 2]).unwrap();
        let symbols: Vec<_> = space.configs().map(|c| c.symbols).collect();
        assert_eq!(symbols, vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
        let cube = ProductSpace::uniform(&[2, 2, 2]).unwrap();
        assert_eq!(cube.state_count(), 8);
        assert_eq!(cube.encode(&[1, 0, 1]).unwrap(), 5);
    }

    #[test]
    fn budget_is_enforced() {
        let space = ProductSpace::uniform(&[2; 4]).unwrap();
        let err = enumerate_configs(&space, 8).unwrap_err();
        assert!(matches!(err, Error::BudgetExceeded { count: 16, .. }));
        let err = ProductSpace::builder(numbered_alphabets(&[2; 10]))
            .state_budget(512)
            .build()
            .unwrap_err();
        assert!(err.to_string().contains("1024"));
    }

    #[test]
    fn hamming_examples() {
        let s2 = ProductSpace::uniform(&[2, 2]).unwrap();
        assert_eq!(s2.hamming_distance(1, 1), 0.0);
        assert_eq!(s2.hamming_distance(0b00, 0b01), 0.5);
        let s4 = ProductSpace::uniform(&[2; 4]).unwrap();
        assert_eq!(s4.hamming_distance(0, 15), 1.0);
    }

    #[test]
    fn marginal_examples() {
        let space = ProductSpace::uniform(&[2, 2]).unwrap();
        let mu = Distribution::new(space, vec![0.5, 0.0, 0.0, 0.5]).unwrap();
        let m = mu.marginal(&[0]).unwrap();
        assert_eq!(m.weights(), &[0.5, 0.5]);

        let cube = ProductSpace::uniform(&[2, 2, 2]).unwrap();
        let m = Distribution::uniform(cube).marginal(&[0, 2]).unwrap();
        assert_eq!(m.weights(), &[0.25; 4]);

        let space = ProductSpace::uniform(&[2, 3]).unwrap();
        let a = [0.3, 0.7];
        let b = [0.2, 0.5, 0.3];
        let w = (0..6).map(|x| a[x / 3] * b[x % 3]).collect();
        let mu = Distribution::new(space, w).unwrap();
        let m = mu.marginal(&[1]).unwrap();
        for (got, want) in m.weights().iter().zip(b) {
            assert!((got - want).abs() < 1e-15);
        }
        assert!(mu.marginal(&[]).is_err());
    }

    #[test]
    fn condition_examples() {
        let space = ProductSpace::uniform(&[4]).unwrap();
        let mu = Distribution::uniform(space.clone());
        assert_eq!(mu.condition(&[0, 1, 2, 3]).unwrap(), mu);
        assert_eq!(mu.condition(&[0, 1]).unwrap().weights(), &[0.5, 0.5, 0.0, 0.0]);

        let mu = Distribution::new(space, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let c = mu.condition(&[2, 3]).unwrap();
        assert!((c.weight(2) - 3.0 / 7.0).abs() < 1e-15);
        assert!((c.weight(3) - 4.0 / 7.0).abs() < 1e-15);
        assert_eq!(c.weight(0), 0.0);

        let mu = Distribution::point_mass(mu.space().clone(), 0).unwrap();
        assert!(matches!(mu.condition(&[1, 2]), Err(Error::ZeroMass)));
    }

    #[test]
    fn validation_names_coordinate_and_field() {
        let err = ProductSpace::builder(numbered_alphabets(&[2, 2]))
            .reference_measures(vec![vec![0.5, 0.5], vec![1.0, 0.0]])
            .build()
            .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("coordinate 1") && msg.contains("reference_measures"), "{msg}");

        let err = ProductSpace::builder(numbered_alphabets(&[2]))
            .metrics(vec![vec![vec![0.0, 1.5], vec![1.5, 0.0]]])
            .build()
            .unwrap_err();
        assert!(err.to_string().contains("metrics"));

        let spec: SpaceSpec = serde_json::from_str(r#"{"alphabets": [["a","b"],["c"]], "reference_points": ["a","x"]}"#).unwrap();
        let err = spec.build(DEFAULT_STATE_BUDGET).unwrap_err();
        assert!(err.to_string().contains("coordinate 1"));
    }

    #[test]
    fn space_spec_roundtrip() {
        let spec: SpaceSpec = serde_json::from_str(
            r#"{"alphabets": [["a","b","c"],["x","y"]],
                "metrics": [[[0,0.5,1],[0.5,0,0.5],[1,0.5,0]], [[0,1],[1,0]]],
                "reference_measures": [[0.2,0.3,0.5],[0.5,0.5]],
                "reference_points": ["b","y"]}"#,
        )
        .unwrap();
        let space = spec.build(DEFAULT_STATE_BUDGET).unwrap();
        assert_eq!(space.reference_points(), &[1, 1]);
        assert_eq!(space.metric(0, 0, 1), 0.5);
        assert_eq!(SpaceSpec::from_space(&space).build(DEFAULT_STATE_BUDGET).unwrap(), space);
    }

    fn shapes() -> impl Strategy<Value = Vec<usize>> {
        prop::collection::vec(1usize..5, 1..6)
    }

    proptest! {
        #[test]
        fn encode_decode_bijection(sizes in shapes()) {
            let space = ProductSpace::uniform(&sizes).unwrap();
            for (pos, c) in space.configs().enumerate() {
                prop_assert_eq!(c.index, pos);
                prop_assert_eq!(space.encode(&c.symbols).unwrap(), pos);
            }
        }

        #[test]
        fn total_probability(seed in any::<u64>(), parts in 1usize..6) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let space = ProductSpace::uniform(&[2, 3, 2]).unwrap();
            let w: Vec<f64> = (0..12).map(|_| rng.gen::<f64>() + 0.01).collect();
            let mu = Distribution::from_unnormalized(space, w).unwrap();
            let labels: Vec<usize> = (0..12).map(|_| rng.gen_range(0..parts)).collect();
            let event: Vec<usize> = (0..12).filter(|_| rng.gen_bool(0.5)).collect();
            let mut total = 0.0;
            for p in 0..parts {
                let part: Vec<usize> = (0..12).filter(|&x| labels[x] == p).collect();
                let mass = mu.mass(&part);
                if mass == 0.0 { continue; }
                let cond = mu.condition(&part).unwrap();
                let sub = cond.marginal(&[2, 0]).unwrap();
                prop_assert!((sub.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
                total += mass * cond.mass(&event);
            }
            prop_assert!((total - mu.mass(&event)).abs() < 1e-12);
        }

        #[test]
        fn hamming_is_a_metric(seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            // random metric on 3 points: perturbations of a path metric keep the triangle inequality
            let a = rng.gen_range(0.2..0.5);
            let b = rng.gen_range(0.2..0.5);
            let table = vec![vec![0.0, a, a + b], vec![a, 0.0, b], vec![a + b, b, 0.0]];
            let space = ProductSpace::builder(numbered_alphabets(&[3, 3, 2]))
                .metrics(vec![table.clone(), table, vec![vec![0.0, 1.0], vec![1.0, 0.0]]])
                .build()
                .unwrap();
            let s = space.state_count();
            for _ in 0..50 {
                let (x, y, z) = (rng.gen_range(0..s), rng.gen_range(0..s), rng.gen_range(0..s));
                prop_assert_eq!(space.hamming_distance(x, y), space.hamming_distance(y, x));
                prop_assert!(space.hamming_distance(x, z) <= space.hamming_distance(x, y) + space.hamming_distance(y, z) + 1e-12);
            }
        }
    }
}
