//! Potentials, discrete partial gradients and additively separable functions.
//!
//! For a potential `f` and reference symbols `∗ᵢ`, the partial gradient is
//! `∂ᵢf(x, y) = f(x with xᵢ := y) − f(x with xᵢ := ∗ᵢ)` and the discrete
//! gradient at `x` is the separable function `y ↦ Σᵢ ∂ᵢf(x, yᵢ)`.

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::space::{same_space, ProductSpace};

/// A real function on the product space stored as a dense table in
/// canonical order.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    space: Arc<ProductSpace>,
    values: Vec<f64>,
}

impl Potential {
    pub fn new(space: Arc<ProductSpace>, values: Vec<f64>) -> Result<Self> {
        if values.len() != space.state_count() {
            return Err(Error::param(
                "table",
                format!("expected {} values, got {}", space.state_count(), values.len()),
            ));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::param("table", format!("value at index {pos} is not finite")));
        }
        Ok(Potential { space, values })
    }

    pub fn from_fn(space: Arc<ProductSpace>, mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let values = space.configs().map(|c| f(&c.symbols)).collect();
        Self::new(space, values)
    }

    pub fn zero(space: Arc<ProductSpace>) -> Self {
        let values = vec![0.0; space.state_count()];
        Potential { space, values }
    }

    pub fn space(&self) -> &Arc<ProductSpace> {
        &self.space
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn eval(&self, x: usize) -> f64 {
        self.values[x]
    }

    /// The same table over a space with different reference points or
    /// reference measures.
    pub fn on_space(&self, space: Arc<ProductSpace>) -> Result<Self> {
        if space.alphabets() != self.space.alphabets() {
            return Err(Error::SpaceMismatch);
        }
        Ok(Potential {
            space,
            values: self.values.clone(),
        })
    }

    pub fn is_separable(&self, tol: f64) -> bool {
        let grads = GradientTable::new(self);
        let first = grads.row(0);
        (1..self.space.state_count()).all(|x| {
            grads
                .row(x)
                .iter()
                .zip(first)
                .all(|(a, b)| (a - b).abs() <= tol)
        })
    }
}

/// `∂ᵢf(x, y)` for a configuration rank `x`, coordinate `i` and symbol `y`.
pub fn partial_gradient(f: &Potential, x: usize, i: usize, y: usize) -> f64 {
    let space = &f.space;
    f.eval(space.with_symbol(x, i, y)) - f.eval(space.with_symbol(x, i, space.reference_point(i)))
}

/// An additively separable function `y ↦ Σᵢ gᵢ(yᵢ)`, normalized so that
/// `gᵢ(∗ᵢ) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparableFunction {
    space: Arc<ProductSpace>,
    values: Vec<f64>,
}

impl SeparableFunction {
    /// Builds from per-coordinate tables, subtracting each `gᵢ(∗ᵢ)`.
    pub fn new(space: Arc<ProductSpace>, parts: Vec<Vec<f64>>) -> Result<Self> {
        if parts.len() != space.n() {
            return Err(Error::param("parts", format!("expected {} parts, got {}", space.n(), parts.len())));
        }
        let mut values = Vec::with_capacity(space.total_symbols());
        for (i, part) in parts.iter().enumerate() {
            if part.len() != space.alphabet_size(i) {
                return Err(Error::space(i, "parts", format!("expected {} values", space.alphabet_size(i))));
            }
            if part.iter().any(|v| !v.is_finite()) {
                return Err(Error::space(i, "parts", "values must be finite"));
            }
            let pin = part[space.reference_point(i)];
            values.extend(part.iter().map(|v| v - pin));
        }
        Ok(SeparableFunction { space, values })
    }

    pub fn zero(space: Arc<ProductSpace>) -> Self {
        let values = vec![0.0; space.total_symbols()];
        SeparableFunction { space, values }
    }

    /// Wraps a flat table laid out by `space.offsets()`; the caller
    /// guarantees the normalization.
    pub(crate) fn from_flat(space: Arc<ProductSpace>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), space.total_symbols());
        SeparableFunction { space, values }
    }

    pub fn space(&self) -> &Arc<ProductSpace> {
        &self.space
    }

    pub fn part(&self, i: usize) -> &[f64] {
        let o = self.space.offsets();
        &self.values[o[i]..o[i + 1]]
    }

    pub fn flat(&self) -> &[f64] {
        &self.values
    }

    pub fn eval(&self, x: usize) -> f64 {
        let o = self.space.offsets();
        (0..self.space.n())
            .map(|i| self.values[o[i] + self.space.symbol_at(x, i)])
            .sum()
    }

    pub fn as_potential(&self) -> Potential {
        let values = (0..self.space.state_count()).map(|x| self.eval(x)).collect();
        Potential {
            space: self.space.clone(),
            values,
        }
    }
}

/// The discrete gradient of `f` at `x`.
pub fn gradient(f: &Potential, x: usize) -> SeparableFunction {
    let space = f.space();
    let mut values = Vec::with_capacity(space.total_symbols());
    gradient_into(f, x, &mut values);
    SeparableFunction::from_flat(space.clone(), values)
}

fn gradient_into(f: &Potential, x: usize, out: &mut Vec<f64>) {
    let space = f.space();
    for i in 0..space.n() {
        let base = f.eval(space.with_symbol(x, i, space.reference_point(i)));
        for s in 0..space.alphabet_size(i) {
            out.push(f.eval(space.with_symbol(x, i, s)) - base);
        }
    }
}

/// `sup_z |Σᵢ (aᵢ − bᵢ)(zᵢ)|` via coordinate-wise extrema.
pub fn sep_sup_norm(a: &SeparableFunction, b: &SeparableFunction) -> Result<f64> {
    if !same_space(&a.space, &b.space) {
        return Err(Error::SpaceMismatch);
    }
    Ok(sup_norm_flat(a.space.offsets(), &a.values, &b.values))
}

/// Closed-form uniform norm of the difference of two flat separable tables.
pub(crate) fn sup_norm_flat(offsets: &[usize], a: &[f64], b: &[f64]) -> f64 {
    let mut hi = 0.0;
    let mut lo = 0.0;
    for w in offsets.windows(2) {
        let mut mx = f64::NEG_INFINITY;
        let mut mn = f64::INFINITY;
        for s in w[0]..w[1] {
            let h = a[s] - b[s];
            mx = mx.max(h);
            mn = mn.min(h);
        }
        hi += mx;
        lo += mn;
    }
    f64::max(hi, -lo)
}

/// Discrete gradients at every configuration, one flat row per
/// configuration.
#[derive(Debug, Clone)]
pub struct GradientTable {
    space: Arc<ProductSpace>,
    width: usize,
    values: Vec<f64>,
}

impl GradientTable {
    pub fn new(f: &Potential) -> Self {
        let space = f.space().clone();
        let width = space.total_symbols();
        let mut values = vec![0.0; width * space.state_count()];
        values.par_chunks_mut(width).enumerate().for_each(|(x, row)| {
            let mut buf = Vec::with_capacity(width);
            gradient_into(f, x, &mut buf);
            row.copy_from_slice(&buf);
        });
        GradientTable { space, width, values }
    }

    pub fn space(&self) -> &Arc<ProductSpace> {
        &self.space
    }

    #[inline]
    pub fn row(&self, x: usize) -> &[f64] {
        &self.values[x * self.width..(x + 1) * self.width]
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn gradient(&self, x: usize) -> SeparableFunction {
        SeparableFunction::from_flat(self.space.clone(), self.row(x).to_vec())
    }

    /// `‖∇f(x,·) − ∇f(y,·)‖`.
    #[inline]
    pub fn distance(&self, x: usize, y: usize) -> f64 {
        sup_norm_flat(self.space.offsets(), self.row(x), self.row(y))
    }

    /// `∇f(x, y) = Σᵢ ∂ᵢf(x, yᵢ)`.
    #[inline]
    pub fn eval(&self, x: usize, y: usize) -> f64 {
        let o = self.space.offsets();
        let row = self.row(x);
        (0..self.space.n()).map(|i| row[o[i] + self.space.symbol_at(y, i)]).sum()
    }

    /// Largest pairwise gradient distance.
    pub fn diameter(&self) -> f64 {
        let s = self.space.state_count();
        (0..s)
            .into_par_iter()
            .map(|x| (x + 1..s).map(|y| self.distance(x, y)).fold(0.0, f64::max))
            .reduce(|| 0.0, f64::max)
    }

    /// Number of distinct gradient rows (bitwise comparison).
    pub fn distinct_count(&self) -> usize {
        let mut rows: Vec<Vec<u64>> = (0..self.space.state_count())
            .map(|x| self.row(x).iter().map(|v| v.to_bits()).collect())
            .collect();
        rows.sort_unstable();
        rows.dedup();
        rows.len()
    }

    /// CSV dump: one row per (configuration, coordinate, symbol).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["config", "label", "coord", "symbol", "value"])?;
        let o = self.space.offsets();
        for x in 0..self.space.state_count() {
            let label = self.space.label(x);
            let row = self.row(x);
            for i in 0..self.space.n() {
                for s in 0..self.space.alphabet_size(i) {
                    w.write_record([
                        x.to_string(),
                        label.clone(),
                        i.to_string(),
                        self.space.alphabet(i)[s].clone(),
                        format!("{:.11e}", row[o[i] + s]),
                    ])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}
