//! Lipschitz constants, the approximate fixed-point equation for the
//! mixture terms, the tanh form on `{−1,1}ⁿ`, and the mean-field upper
//! bound on the partition function.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::decompose::{DecompositionReport, INEQUALITY_SLACK};
use crate::error::{Error, Result};
use crate::gibbs::{gibbs, log_sum_exp, product_gibbs_flat, ProductMeasure};
use crate::potential::{sup_norm_flat, GradientTable, Potential};
use crate::space::ProductSpace;

/// Pairs examined by the all-pairs Lipschitz search before switching to
/// single-coordinate pairs.
pub const DEFAULT_LIPSCHITZ_PAIRS: u128 = 1 << 24;

/// Largest state count for which every gradient product measure is scored
/// as a mean-field starting point.
pub const GRADIENT_SCAN_STATES: usize = 4096;

pub const DEFAULT_RESTARTS: usize = 16;

/// Stationarity threshold of the coordinate ascent (largest L1 change of
/// a factor during a sweep).
pub const ASCENT_TOL: f64 = 1e-9;

const MAX_SWEEPS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LipschitzRegime {
    AllPairs,
    /// Pairs differing in one coordinate. Since `dₙ` is a sum over
    /// coordinates, changing one coordinate at a time walks from `x` to `y`
    /// with total length `dₙ(x, y)`, so these pairs already attain the sup.
    SingleCoordinate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LipschitzEstimate {
    pub value: f64,
    pub regime: LipschitzRegime,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else if num > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

fn lipschitz_by(space: &ProductSpace, budget: u128, diff: impl Fn(usize, usize) -> f64 + Sync) -> LipschitzEstimate {
    let s = space.state_count();
    let pairs = (s as u128) * (s as u128).saturating_sub(1) / 2;
    if pairs <= budget {
        let value = (0..s)
            .into_par_iter()
            .map(|x| {
                (x + 1..s)
                    .map(|y| ratio(diff(x, y), space.hamming_distance(x, y)))
                    .fold(0.0, f64::max)
            })
            .reduce(|| 0.0, f64::max);
        return LipschitzEstimate {
            value,
            regime: LipschitzRegime::AllPairs,
        };
    }
    let value = (0..s)
        .into_par_iter()
        .map(|x| {
            let mut best: f64 = 0.0;
            for i in 0..space.n() {
                let xi = space.symbol_at(x, i);
                for t in xi + 1..space.alphabet_size(i) {
                    let y = space.with_symbol(x, i, t);
                    best = best.max(ratio(diff(x, y), space.hamming_distance(x, y)));
                }
            }
            best
        })
        .reduce(|| 0.0, f64::max);
    LipschitzEstimate {
        value,
        regime: LipschitzRegime::SingleCoordinate,
    }
}

/// `L = sup ‖∇f(x,·) − ∇f(y,·)‖ / dₙ(x,y)` over distinct pairs.
pub fn gradient_lipschitz(f: &Potential) -> LipschitzEstimate {
    gradient_lipschitz_with(&GradientTable::new(f), DEFAULT_LIPSCHITZ_PAIRS)
}

pub fn gradient_lipschitz_with(table: &GradientTable, pair_budget: u128) -> LipschitzEstimate {
    lipschitz_by(table.space(), pair_budget, |x, y| table.distance(x, y))
}

/// Lipschitz constant of `f` itself with respect to `dₙ`.
pub fn lipschitz_f(f: &Potential) -> LipschitzEstimate {
    lipschitz_f_with(f, DEFAULT_LIPSCHITZ_PAIRS)
}

pub fn lipschitz_f_with(f: &Potential, pair_budget: u128) -> LipschitzEstimate {
    lipschitz_by(f.space(), pair_budget, |x, y| (f.eval(x) - f.eval(y)).abs())
}

/// Contracts a dense table against one weight vector per coordinate,
/// leaving coordinate `keep` (if any) free.
fn contract(space: &ProductSpace, values: &[f64], factors: &[f64], keep: Option<usize>) -> Vec<f64> {
    let o = space.offsets();
    let mut table = values.to_vec();
    // dims of the remaining table, last coordinate fastest
    let mut dims: Vec<usize> = (0..space.n()).map(|i| space.alphabet_size(i)).collect();
    for i in (0..space.n()).rev() {
        if Some(i) == keep {
            continue;
        }
        let k = dims[i];
        let inner: usize = dims[i + 1..].iter().product();
        let outer = table.len() / (k * inner);
        let w = &factors[o[i]..o[i + 1]];
        let mut out = vec![0.0; outer * inner];
        for a in 0..outer {
            for (s, ws) in w.iter().enumerate() {
                if *ws == 0.0 {
                    continue;
                }
                let src = &table[(a * k + s) * inner..(a * k + s + 1) * inner];
                for (dst, v) in out[a * inner..(a + 1) * inner].iter_mut().zip(src) {
                    *dst += ws * v;
                }
            }
        }
        dims[i] = 1;
        table = out;
    }
    table
}

/// `∫ f dξ − D(ξ ‖ λ)`.
pub fn mean_field_objective(f: &Potential, xi: &ProductMeasure) -> f64 {
    contract(f.space(), f.values(), xi.flat(), None)[0] - xi.kl_to_reference()
}

/// Per-part residuals of `g_P ≈ ∫ ∇f(x,·) ξ_{g_P}(dx)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedPointPart {
    pub part: usize,
    pub mass: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedPointRecord {
    pub parts: Vec<FixedPointPart>,
    pub weighted_sum: f64,
    /// `δn + L √(½(H/n + δ))`.
    pub bound: f64,
    pub lipschitz: LipschitzEstimate,
    pub holds: bool,
}

pub fn fixed_point_residuals(f: &Potential, report: &DecompositionReport) -> Result<FixedPointRecord> {
    let table = GradientTable::new(f);
    fixed_point_residuals_with(&table, report)
}

pub fn fixed_point_residuals_with(table: &GradientTable, report: &DecompositionReport) -> Result<FixedPointRecord> {
    let space = table.space();
    if report.state_count != space.state_count() || report.n != space.n() {
        return Err(Error::SpaceMismatch);
    }
    let s = space.state_count();
    let width = table.width();
    let parts: Vec<FixedPointPart> = report
        .parts
        .par_iter()
        .map(|p| {
            let g: Vec<f64> = p.selected_gradient.concat();
            let xi = product_gibbs_flat(space, &g);
            let weights = xi.joint_weights();
            let mut mean = vec![0.0; width];
            for (x, w) in weights.iter().enumerate().take(s) {
                if *w == 0.0 {
                    continue;
                }
                for (m, v) in mean.iter_mut().zip(table.row(x)) {
                    *m += w * v;
                }
            }
            FixedPointPart {
                part: p.part,
                mass: p.mass,
                residual: sup_norm_flat(space.offsets(), &g, &mean),
            }
        })
        .collect();
    let weighted_sum = parts.iter().map(|p| p.mass * p.residual).sum();
    let lipschitz = gradient_lipschitz_with(table, DEFAULT_LIPSCHITZ_PAIRS);
    let n = space.n() as f64;
    let delta = report.effective_delta;
    let bound = delta * n + lipschitz.value * (0.5 * (report.partition_entropy / n + delta)).max(0.0).sqrt();
    Ok(FixedPointRecord {
        holds: weighted_sum <= bound + 1e-8,
        parts,
        weighted_sum,
        bound,
        lipschitz,
    })
}

/// Damped iteration for `m = tanh(E_{ξ(m)} ∇f)` on `{−1,1}ⁿ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TanhResult {
    pub m: Vec<f64>,
    pub iterations: usize,
    /// `‖m − tanh(E_{ξ(m)} ∇f)‖∞` at return.
    pub residual: f64,
    pub trajectory: Vec<Vec<f64>>,
}

pub const DEFAULT_DAMPING: f64 = 0.5;

fn require_spin_space(space: &ProductSpace) -> Result<()> {
    for i in 0..space.n() {
        if space.alphabet_size(i) != 2 {
            return Err(Error::NotBinary {
                coord: i,
                size: space.alphabet_size(i),
            });
        }
    }
    if let Some(coord) = space.first_nonuniform_coordinate() {
        return Err(Error::NonUniformReference { coord });
    }
    Ok(())
}

/// `E_{ξ(m)}[½(f(x|ᵢ+) − f(x|ᵢ−))]` for each `i`, where symbol 0 is `−1`
/// and symbol 1 is `+1`.
pub fn mean_gradient_vector(f: &Potential, m: &[f64]) -> Vec<f64> {
    let space = f.space();
    let factors: Vec<f64> = m.iter().flat_map(|&mi| [(1.0 - mi) / 2.0, (1.0 + mi) / 2.0]).collect();
    (0..space.n())
        .map(|i| {
            let pair = contract(space, f.values(), &factors, Some(i));
            0.5 * (pair[1] - pair[0])
        })
        .collect()
}

pub fn tanh_fixed_point(f: &Potential, m0: &[f64], tol: f64, max_iter: usize) -> Result<TanhResult> {
    tanh_fixed_point_damped(f, m0, tol, max_iter, DEFAULT_DAMPING)
}

pub fn tanh_fixed_point_damped(f: &Potential, m0: &[f64], tol: f64, max_iter: usize, alpha: f64) -> Result<TanhResult> {
    let space = f.space();
    require_spin_space(space)?;
    if m0.len() != space.n() {
        return Err(Error::param("m0", format!("expected {} entries, got {}", space.n(), m0.len())));
    }
    if m0.iter().any(|v| !(-1.0..=1.0).contains(v)) {
        return Err(Error::param("m0", "entries must lie in [-1, 1]"));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::param("tol", "must be positive"));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::param("alpha", "must lie in (0, 1]"));
    }
    let mut m = m0.to_vec();
    let mut trajectory = vec![m.clone()];
    let mut residual = f64::INFINITY;
    for iteration in 0..=max_iter {
        let target: Vec<f64> = mean_gradient_vector(f, &m).iter().map(|e| e.tanh()).collect();
        residual = m.iter().zip(&target).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if residual < tol {
            return Ok(TanhResult {
                m,
                iterations: iteration,
                residual,
                trajectory,
            });
        }
        if iteration == max_iter {
            break;
        }
        for (mi, ti) in m.iter_mut().zip(&target) {
            *mi = (1.0 - alpha) * *mi + alpha * ti;
        }
        trajectory.push(m.clone());
    }
    Err(Error::TanhNotConverged {
        iterations: max_iter,
        residual,
        trajectory,
    })
}

/// One run of coordinate ascent over product measures.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AscentRun {
    pub start: String,
    pub objective: f64,
    pub sweeps: usize,
    pub converged: bool,
    /// Objective after each sweep; never decreases.
    pub history: Vec<f64>,
    #[serde(skip)]
    pub xi: Vec<f64>,
}

/// Maximizes `∫ f dξ − D(ξ‖λ)` one coordinate at a time: each update sets
/// `ξᵢ ∝ λᵢ · exp(E_{ξ₋ᵢ} f(x|ᵢ = ·))`, the exact optimum in that coordinate.
pub fn coordinate_ascent(f: &Potential, start: ProductMeasure, label: impl Into<String>) -> AscentRun {
    let space = f.space();
    let o = space.offsets();
    let mut xi = start.flat().to_vec();
    let mut history = vec![mean_field_objective(f, &start)];
    let mut converged = false;
    let mut sweeps = 0;
    while sweeps < MAX_SWEEPS {
        sweeps += 1;
        let mut change: f64 = 0.0;
        for i in 0..space.n() {
            let field = contract(space, f.values(), &xi, Some(i));
            let logs: Vec<f64> = field
                .iter()
                .zip(space.reference_measure(i))
                .map(|(a, l)| a + l.ln())
                .collect();
            let lse = log_sum_exp(&logs);
            for (s, lv) in logs.iter().enumerate() {
                let new = (lv - lse).exp();
                change = change.max((new - xi[o[i] + s]).abs());
                xi[o[i] + s] = new;
            }
        }
        history.push(mean_field_objective(f, &ProductMeasure::from_flat(space.clone(), xi.clone())));
        if change < ASCENT_TOL {
            converged = true;
            break;
        }
    }
    AscentRun {
        start: label.into(),
        objective: *history.last().expect("nonempty history"),
        sweeps,
        converged,
        history,
        xi,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartitionBoundRecord {
    pub log_z_exact: f64,
    /// Best objective found: a lower bound on the sup over product measures.
    pub mean_field_sup_estimate: f64,
    pub best_start: String,
    pub best_factors: Vec<Vec<f64>>,
    pub restarts: Vec<AscentRun>,
    /// Objective spread among converged runs.
    pub restart_spread: f64,
    pub non_concave: bool,
    /// `Σ_y μ(y) [∫ f dξ_{∇f(y,·)} − D(ξ_{∇f(y,·)} ‖ λ)]`, when scanned.
    pub gradient_average: Option<f64>,
    /// True when the estimate is known to dominate `gradient_average`,
    /// which is all the bound needs.
    pub certified: bool,
    pub epsilon: f64,
    pub effective_delta: f64,
    pub lipschitz_f: LipschitzEstimate,
    pub bound_rhs: f64,
    pub slack: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundOptions {
    pub restarts: usize,
    pub seed: u64,
}

impl Default for BoundOptions {
    fn default() -> Self {
        BoundOptions {
            restarts: DEFAULT_RESTARTS,
            seed: 0,
        }
    }
}

/// `log ∫e^f dλ ≤ sup_ξ [∫f dξ − D(ξ‖λ)] + (ε+δ)n + √((ε+δ)/2)·L_f`.
pub fn partition_function_bound(
    f: &Potential,
    epsilon: f64,
    effective_delta: f64,
    options: BoundOptions,
) -> PartitionBoundRecord {
    let space = f.space();
    let mu = gibbs(f);
    let table = GradientTable::new(f);
    let s = space.state_count();

    let mut starts: Vec<(String, ProductMeasure)> = (0..options.restarts)
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(options.seed.wrapping_add(r as u64));
            let factors = (0..space.n())
                .map(|i| {
                    let raw: Vec<f64> = (0..space.alphabet_size(i)).map(|_| rng.gen_range(0.05..1.0)).collect();
                    let total: f64 = raw.iter().sum();
                    raw.iter().map(|v| v / total).collect::<Vec<f64>>()
                })
                .collect::<Vec<_>>()
                .concat();
            (format!("random-{r}"), ProductMeasure::from_flat(space.clone(), factors))
        })
        .collect();

    let weights = mu.dist.weights();
    let mode = (0..s).fold(0, |best, x| if weights[x] > weights[best] { x } else { best });
    starts.push((format!("mode-gradient-{mode}"), product_gibbs_flat(space, table.row(mode))));

    let mut gradient_average = None;
    if s <= GRADIENT_SCAN_STATES {
        let scores: Vec<f64> = (0..s)
            .into_par_iter()
            .map(|y| mean_field_objective(f, &product_gibbs_flat(space, table.row(y))))
            .collect();
        gradient_average = Some(scores.iter().zip(weights).map(|(v, w)| v * w).sum());
        let best = (0..s).fold(0, |b, y| if scores[y] > scores[b] { y } else { b });
        starts.push((format!("best-gradient-{best}"), product_gibbs_flat(space, table.row(best))));
    }

    let runs: Vec<AscentRun> = starts
        .into_par_iter()
        .map(|(label, start)| coordinate_ascent(f, start, label))
        .collect();
    let best = (0..runs.len()).fold(0, |b, r| if runs[r].objective > runs[b].objective { r } else { b });
    let converged: Vec<f64> = runs.iter().filter(|r| r.converged).map(|r| r.objective).collect();
    let spread = if converged.is_empty() {
        0.0
    } else {
        converged.iter().copied().fold(f64::NEG_INFINITY, f64::max) - converged.iter().copied().fold(f64::INFINITY, f64::min)
    };
    let estimate = runs[best].objective;
    let lipschitz_f = lipschitz_f(f);
    let ed = epsilon + effective_delta;
    let n = space.n() as f64;
    let bound_rhs = estimate + ed * n + (ed / 2.0).max(0.0).sqrt() * lipschitz_f.value;
    let slack = bound_rhs - mu.log_z;
    let o = space.offsets();
    PartitionBoundRecord {
        log_z_exact: mu.log_z,
        mean_field_sup_estimate: estimate,
        best_start: runs[best].start.clone(),
        best_factors: (0..space.n()).map(|i| runs[best].xi[o[i]..o[i + 1]].to_vec()).collect(),
        certified: gradient_average.is_some_and(|avg| estimate >= avg),
        restart_spread: spread,
        non_concave: spread > 1e-6,
        gradient_average,
        restarts: runs,
        epsilon,
        effective_delta,
        lipschitz_f,
        bound_rhs,
        slack,
        holds: slack >= -1e-8,
    }
}

/// The same bound written with counting measure, for uniform `λ`:
/// `log Σ e^f ≤ sup_ξ [H(ξ) + ∫ f dξ] + …`; both sides shift by `Σ log|Kᵢ|`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FiniteUniformRecord {
    pub log_sum_exp: f64,
    pub entropy_sup_estimate: f64,
    pub bound_rhs: f64,
    pub slack: f64,
    pub shift: f64,
    /// Disagreement between the directly computed counting-measure values
    /// and the shifted reference-measure values.
    pub residual: f64,
}

pub fn finite_uniform_form(f: &Potential, record: &PartitionBoundRecord) -> Result<FiniteUniformRecord> {
    let space = f.space();
    if let Some(coord) = space.first_nonuniform_coordinate() {
        return Err(Error::NonUniformReference { coord });
    }
    let shift: f64 = (0..space.n()).map(|i| (space.alphabet_size(i) as f64).ln()).sum();
    let lse = log_sum_exp(f.values());
    let xi = ProductMeasure::from_flat(space.clone(), record.best_factors.concat());
    let entropy: f64 = xi.flat().iter().filter(|p| **p > 0.0).map(|p| -p * p.ln()).sum();
    let ent_form = entropy + contract(space, f.values(), xi.flat(), None)[0];
    let residual = ((lse - record.log_z_exact) - shift)
        .abs()
        .max(((ent_form - record.mean_field_sup_estimate) - shift).abs());
    let bound_rhs = record.bound_rhs + shift;
    Ok(FiniteUniformRecord {
        log_sum_exp: lse,
        entropy_sup_estimate: ent_form,
        bound_rhs,
        slack: bound_rhs - lse,
        shift,
        residual,
    })
}

/// Whether a bound record passes with the shared inequality slack.
pub fn bound_holds(record: &PartitionBoundRecord) -> bool {
    record.bound_rhs + INEQUALITY_SLACK >= record.log_z_exact
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cover::{covering_exponent, greedy_cover};
    use crate::decompose::corollary_a_select;
    use crate::gibbs::product_gibbs;
    use crate::infotheory::kl;
    use crate::models;
    use crate::potential::gradient;
    use crate::space::{Distribution, Measure};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn bisect(g: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if (g(lo) > 0.0) == (g(mid) > 0.0) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn lipschitz_regimes_agree() {
        for seed in 0..4 {
            let f = models::random_potential(&[2, 3, 2, 2], seed, 1.0).unwrap();
            let table = GradientTable::new(&f);
            let all = gradient_lipschitz_with(&table, u128::MAX);
            let adj = gradient_lipschitz_with(&table, 0);
            assert_eq!(all.regime, LipschitzRegime::AllPairs);
            assert_eq!(adj.regime, LipschitzRegime::SingleCoordinate);
            assert_abs_diff_eq!(all.value, adj.value, epsilon = 1e-9);
            let all = lipschitz_f_with(&f, u128::MAX);
            let adj = lipschitz_f_with(&f, 0);
            assert_abs_diff_eq!(all.value, adj.value, epsilon = 1e-9);
        }
    }

    #[test]
    fn lipschitz_examples() {
        let sep = models::separable(&[2, 3], 1, 1.0).unwrap();
        assert!(gradient_lipschitz(&sep).value < 1e-12);
        let zero = Potential::zero(ProductSpace::uniform(&[2, 2]).unwrap());
        assert_eq!(gradient_lipschitz(&zero).value, 0.0);
        assert_eq!(lipschitz_f(&zero).value, 0.0);

        // exhaustive oracle at n = 6
        let f = models::curie_weiss(6, 1.0, 0.2).unwrap();
        let table = GradientTable::new(&f);
        let space = f.space();
        let mut oracle: f64 = 0.0;
        for x in 0..64 {
            for y in 0..64 {
                if x != y {
                    oracle = oracle.max(table.distance(x, y) / space.hamming_distance(x, y));
                }
            }
        }
        assert_abs_diff_eq!(gradient_lipschitz(&f).value, oracle, epsilon = 1e-12);
    }

    #[test]
    fn contraction_matches_joint_sum() {
        let f = models::random_potential(&[2, 3, 2], 7, 1.0).unwrap();
        let xi = ProductMeasure::new(f.space().clone(), vec![vec![0.3, 0.7], vec![0.2, 0.5, 0.3], vec![0.6, 0.4]]).unwrap();
        let full = contract(f.space(), f.values(), xi.flat(), None);
        assert_abs_diff_eq!(full[0], xi.expectation(f.values()), epsilon = 1e-12);
        let space = f.space();
        let kept = contract(space, f.values(), xi.flat(), Some(1));
        for s in 0..3 {
            let direct: f64 = (0..12)
                .filter(|&x| space.symbol_at(x, 1) == s)
                .map(|x| xi.weight(x) / xi.factor(1)[s] * f.eval(x))
                .sum();
            assert_abs_diff_eq!(kept[s], direct, epsilon = 1e-12);
        }
    }

    #[test]
    fn variational_lower_bound_for_products() {
        let f = models::random_potential(&[2, 2, 3], 3, 1.5).unwrap();
        let log_z = gibbs(&f).log_z;
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..50 {
            let factors = (0..3)
                .map(|i| {
                    let raw: Vec<f64> = (0..f.space().alphabet_size(i)).map(|_| rand::Rng::gen_range(&mut rng, 0.01..1.0)).collect();
                    let t: f64 = raw.iter().sum();
                    raw.iter().map(|v| v / t).collect()
                })
                .collect();
            let xi = ProductMeasure::new(f.space().clone(), factors).unwrap();
            assert!(mean_field_objective(&f, &xi) <= log_z + 1e-9);
        }
        // equality when μ is a product
        let sep = models::separable(&[2, 3], 4, 1.0).unwrap();
        let xi = product_gibbs(&gradient(&sep, 0));
        assert_abs_diff_eq!(mean_field_objective(&sep, &xi), gibbs(&sep).log_z, epsilon = 1e-12);
    }

    #[test]
    fn ascent_is_monotone_and_stationary() {
        let f = models::curie_weiss(6, 2.0, 0.1).unwrap();
        let start = ProductMeasure::reference(f.space().clone());
        let run = coordinate_ascent(&f, start, "ref");
        assert!(run.converged);
        for w in run.history.windows(2) {
            assert!(w[1] >= w[0] - 1e-12);
        }
    }

    #[test]
    fn tanh_examples() {
        // β < 1, h = 0: unique root 0
        let f = models::curie_weiss(6, 0.5, 0.0).unwrap();
        let r = tanh_fixed_point(&f, &[0.3; 6], 1e-12, 10_000).unwrap();
        assert!(r.m.iter().all(|m| m.abs() < 1e-10));
        // f ≡ 0
        let zero = Potential::zero(ProductSpace::spins(3).unwrap());
        let r = tanh_fixed_point(&zero, &[0.9, -0.4, 0.1], 1e-12, 10_000).unwrap();
        assert!(r.m.iter().all(|m| m.abs() < 1e-10));
        assert!(r.residual < 1e-12);
    }

    #[test]
    fn tanh_matches_finite_n_scalar_root() {
        let n = 8;
        for (beta, h) in [(0.5, 0.0), (2.0, 0.0), (0.5, 0.2), (2.0, 0.2)] {
            let f = models::curie_weiss(n, beta, h).unwrap();
            let r = tanh_fixed_point(&f, &[0.5; 8], 1e-12, 100_000).unwrap();
            let c = beta * (n as f64 - 1.0) / n as f64;
            let root = if beta <= 1.0 && h == 0.0 {
                0.0
            } else {
                bisect(|m| m - (c * m + h).tanh(), 1e-9, 1.0)
            };
            for m in &r.m {
                assert!((m - root).abs() < 1e-6, "β={beta} h={h}: {m} vs {root}");
            }
        }
    }

    #[test]
    fn tanh_rejects_bad_input() {
        let f = models::random_potential(&[3, 2], 0, 1.0).unwrap();
        assert!(matches!(tanh_fixed_point(&f, &[0.0, 0.0], 1e-9, 10), Err(Error::NotBinary { coord: 0, size: 3 })));
        let biased = models::curie_weiss_biased(3, 1.0, 0.0, 0.1).unwrap();
        assert!(matches!(tanh_fixed_point(&biased, &[0.0; 3], 1e-9, 10), Err(Error::NonUniformReference { .. })));
        let cw = models::curie_weiss(3, 1.0, 0.0).unwrap();
        assert!(tanh_fixed_point(&cw, &[2.0, 0.0, 0.0], 1e-9, 10).is_err());
        let err = tanh_fixed_point_damped(&models::curie_weiss(4, 2.0, 0.0).unwrap(), &[0.5; 4], 1e-15, 2, 0.5).unwrap_err();
        match err {
            Error::TanhNotConverged { trajectory, .. } => assert_eq!(trajectory.len(), 3),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn fixed_point_inequality() {
        for delta in [0.05, 0.5, 2.0] {
            let f = models::curie_weiss(6, 1.0, 0.0).unwrap();
            let cover = greedy_cover(&f, delta).unwrap();
            let report = corollary_a_select(&f, &cover).unwrap();
            let rec = fixed_point_residuals(&f, &report).unwrap();
            assert!(rec.holds, "{rec:?}");
        }
        let sep = models::separable(&[2, 2, 3], 1, 1.0).unwrap();
        let report = corollary_a_select(&sep, &greedy_cover(&sep, 0.1).unwrap()).unwrap();
        let rec = fixed_point_residuals(&sep, &report).unwrap();
        assert!(rec.weighted_sum < 1e-12);
        assert!(rec.bound >= 0.0, "{rec:?}");
    }

    #[test]
    fn bound_examples() {
        let zero = Potential::zero(ProductSpace::uniform(&[2, 2, 2]).unwrap());
        let rec = partition_function_bound(&zero, 0.0, 0.0, BoundOptions::default());
        assert_abs_diff_eq!(rec.log_z_exact, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(rec.mean_field_sup_estimate, 0.0, epsilon = 1e-12);
        assert!(rec.holds);

        let sep = models::separable(&[2, 3, 2], 2, 1.0).unwrap();
        let rec = partition_function_bound(&sep, 0.0, 0.0, BoundOptions::default());
        assert_abs_diff_eq!(rec.mean_field_sup_estimate, rec.log_z_exact, epsilon = 1e-9);
        assert!(rec.slack.abs() < 1e-9);
    }

    #[test]
    fn curie_weiss_mean_field_matches_scalar_oracle() {
        let (n, beta) = (8usize, 0.5);
        let f = models::curie_weiss(n, beta, 0.0).unwrap();
        let cover = greedy_cover(&f, 0.5).unwrap();
        let report = corollary_a_select(&f, &cover).unwrap();
        let rec = partition_function_bound(&f, covering_exponent(&cover), report.effective_delta, BoundOptions::default());
        assert!(rec.holds && rec.certified);
        let nf = n as f64;
        let h2 = |p: f64| if p <= 0.0 || p >= 1.0 { 0.0 } else { -p * p.ln() - (1.0 - p) * (1.0 - p).ln() };
        let objective = |m: f64| nf * (beta * m * m / 2.0 + h2((1.0 + m) / 2.0) - 2f64.ln()) + beta * (1.0 - m * m) / 2.0;
        let grid = (0..=200_000).map(|k| -1.0 + 2.0 * k as f64 / 200_000.0).map(objective).fold(f64::NEG_INFINITY, f64::max);
        assert!((rec.mean_field_sup_estimate - grid).abs() < 1e-4);
    }

    #[test]
    fn finite_uniform_form_examples() {
        let zero = Potential::zero(ProductSpace::uniform(&[2; 4]).unwrap());
        let rec = partition_function_bound(&zero, 0.0, 0.0, BoundOptions::default());
        let fu = finite_uniform_form(&zero, &rec).unwrap();
        assert_abs_diff_eq!(fu.log_sum_exp, 4.0 * 2f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(fu.entropy_sup_estimate, 4.0 * 2f64.ln(), epsilon = 1e-9);

        let f = models::random_potential(&[2; 5], 3, 1.0).unwrap();
        let rec = partition_function_bound(&f, 0.1, 0.1, BoundOptions::default());
        assert!(finite_uniform_form(&f, &rec).unwrap().residual < 1e-10);

        let single = ProductSpace::uniform(&[1, 1]).unwrap();
        let f = Potential::new(single, vec![0.7]).unwrap();
        let rec = partition_function_bound(&f, 0.0, 0.0, BoundOptions::default());
        let fu = finite_uniform_form(&f, &rec).unwrap();
        assert_abs_diff_eq!(fu.log_sum_exp, 0.7, epsilon = 1e-15);
        assert_abs_diff_eq!(fu.entropy_sup_estimate, 0.7, epsilon = 1e-15);

        let biased = models::curie_weiss_biased(3, 1.0, 0.0, 0.2).unwrap();
        let rec = partition_function_bound(&biased, 0.0, 0.0, BoundOptions::default());
        assert!(finite_uniform_form(&biased, &rec).is_err());
    }

    #[test]
    fn restarts_are_deterministic() {
        let f = models::random_potential(&[2, 2, 2, 3], 1, 2.0).unwrap();
        let a = partition_function_bound(&f, 0.1, 0.1, BoundOptions { restarts: 4, seed: 9 });
        let b = partition_function_bound(&f, 0.1, 0.1, BoundOptions { restarts: 4, seed: 9 });
        assert_eq!(a, b);
        assert_eq!(a.restarts.len(), 6);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn product_measures_never_beat_log_z(seed in any::<u64>()) {
            let f = models::random_potential(&[2, 3, 2], seed, 1.0).unwrap();
            let mu = gibbs(&f);
            let xi = product_gibbs(&gradient(&f, (seed % 12) as usize));
            let obj = mean_field_objective(&f, &xi);
            prop_assert!(obj <= mu.log_z + 1e-9);
            // the gap is exactly D(ξ ‖ μ)
            let gap = mu.log_z - obj;
            let d = kl(&xi.to_distribution(), &mu.dist);
            prop_assert!((gap - d).abs() < 1e-9);
            let _ = Distribution::reference(f.space().clone());
        }
    }
}
