//! Covering the gradient set `{∇f(x,·)}` by sup-norm balls and pulling the
//! covering back to a partition of configuration space.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::infotheory::PartitionOfSpace;
use crate::potential::{GradientTable, Potential};

/// Above this many intra-part pairs the diameter check switches to the
/// center-doubling bound.
pub const DEFAULT_PAIR_BUDGET: u128 = 1 << 26;

#[derive(Debug, Clone, PartialEq)]
pub struct GradientCover {
    /// Configurations whose gradients are the ball centers, in the order
    /// the traversal picked them.
    pub centers: Vec<usize>,
    /// Center id (position in `centers`) of each configuration.
    pub assignment: Vec<usize>,
    pub delta: f64,
    /// Largest distance from a gradient to its assigned center.
    pub radius_check: f64,
    n: usize,
}

impl GradientCover {
    pub fn part_count(&self) -> usize {
        self.centers.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn partition(&self) -> PartitionOfSpace {
        PartitionOfSpace::from_labels(&self.assignment)
    }
}

pub fn greedy_cover(f: &Potential, delta: f64) -> Result<GradientCover> {
    greedy_cover_with_table(&GradientTable::new(f), delta)
}

/// Farthest-point traversal seeded at configuration 0 (ties to the lowest
/// index), stopped once every gradient lies within `δn/2` of a center.
/// The traversal order does not depend on `δ`, so larger `δ` only
/// truncates it earlier.
pub fn greedy_cover_with_table(table: &GradientTable, delta: f64) -> Result<GradientCover> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::param("delta", format!("must be positive, got {delta}")));
    }
    let space = table.space();
    let n = space.n();
    let s = space.state_count();
    let radius = delta * n as f64 / 2.0;

    let mut centers = vec![0usize];
    let mut nearest: Vec<f64> = (0..s).into_par_iter().map(|x| table.distance(0, x)).collect();
    let mut owner = vec![0usize; s];
    loop {
        let (far, dist) = nearest
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (x, &d)| if d > best.1 { (x, d) } else { best });
        if dist <= radius {
            break;
        }
        let id = centers.len();
        centers.push(far);
        nearest.par_iter_mut().zip(owner.par_iter_mut()).enumerate().for_each(|(x, (d, o))| {
            let e = table.distance(far, x);
            // strict: equidistant configurations stay with the lower center
            if e < *d {
                *d = e;
                *o = id;
            }
        });
    }
    let radius_check = nearest.iter().copied().fold(0.0, f64::max);
    Ok(GradientCover {
        centers,
        assignment: owner,
        delta,
        radius_check,
        n,
    })
}

/// `ε = log(part count) / n`.
pub fn covering_exponent(cover: &GradientCover) -> f64 {
    (cover.part_count() as f64).ln() / cover.n().max(1) as f64
}

/// Largest sup-norm diameter of the gradient set over a part.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HypothesisCheck {
    pub max_diameter: f64,
    /// `max_diameter / n`.
    pub effective_delta: f64,
    /// False when the pair budget forced the center-doubling bound.
    pub exact: bool,
}

pub fn verify_partition_hypothesis(f: &Potential, partition: &PartitionOfSpace) -> HypothesisCheck {
    verify_with_table(&GradientTable::new(f), partition, DEFAULT_PAIR_BUDGET)
}

pub fn verify_with_table(table: &GradientTable, partition: &PartitionOfSpace, pair_budget: u128) -> HypothesisCheck {
    let pairs: u128 = partition
        .parts()
        .iter()
        .map(|p| (p.len() as u128) * (p.len() as u128 - 1) / 2)
        .sum();
    let exact = pairs <= pair_budget;
    let max_diameter = partition
        .parts()
        .par_iter()
        .map(|part| {
            if exact {
                (0..part.len())
                    .into_par_iter()
                    .map(|a| {
                        part[a + 1..]
                            .iter()
                            .map(|&y| table.distance(part[a], y))
                            .fold(0.0, f64::max)
                    })
                    .reduce(|| 0.0, f64::max)
            } else {
                let c = part[0];
                2.0 * part.par_iter().map(|&y| table.distance(c, y)).reduce(|| 0.0, f64::max)
            }
        })
        .reduce(|| 0.0, f64::max);
    let n = table.space().n().max(1) as f64;
    HypothesisCheck {
        max_diameter,
        effective_delta: max_diameter / n,
        exact,
    }
}
