//! The identity and inequality suite run against one potential.
//!
//! Identities are checked as `|lhs − rhs| < tolerance`; inequalities as
//! `lhs ≤ rhs + tolerance`. Every check records both sides so a failure
//! can be reported without recomputation.

use serde::Serialize;

use crate::cover::{greedy_cover_with_table, GradientCover};
use crate::decompose::{decompose_cover, tower_sides_with, DecomposeOptions, Inequality, Prepared, INEQUALITY_SLACK};
use crate::error::Result;
use crate::gibbs::product_gibbs_flat;
use crate::infotheory::{dtc_definitional, dtc_gibbs, kl, modified_chain_rule_sides, variational_gap};
use crate::meanfield::{
    finite_uniform_form, fixed_point_residuals_with, partition_function_bound, BoundOptions, LipschitzRegime,
};
use crate::potential::Potential;
use crate::space::{Distribution, Measure};
use crate::transport::{dbar_exact_with_budget, marton_bound};

pub const IDENTITY_TOL: f64 = 1e-8;
pub const DTC_FLOOR: f64 = 1e-10;
pub const BOUND_SLACK: f64 = 1e-8;
pub const UNIFORM_FORM_TOL: f64 = 1e-10;

/// Requested widths used when none are configured; the last one is replaced
/// by `2·diam/n` (or 1 when every gradient coincides).
pub const DEFAULT_DELTAS: [f64; 3] = [0.05, 0.2, 0.5];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Relation {
    Equal,
    AtMost,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    pub relation: Relation,
    pub lhs: f64,
    pub rhs: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    pub fn equal(name: impl Into<String>, delta: Option<f64>, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            delta,
            relation: Relation::Equal,
            passed: (lhs - rhs).abs() < tolerance,
            lhs,
            rhs,
            tolerance,
        }
    }

    pub fn at_most(name: impl Into<String>, delta: Option<f64>, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            delta,
            relation: Relation::AtMost,
            passed: lhs <= rhs + tolerance,
            lhs,
            rhs,
            tolerance,
        }
    }

    fn inequality(name: &str, delta: f64, q: &Inequality) -> Self {
        Check::at_most(name, Some(delta), q.lhs, q.rhs, INEQUALITY_SLACK)
    }

    pub fn describe(&self) -> String {
        let op = match self.relation {
            Relation::Equal => "==",
            Relation::AtMost => "<=",
        };
        let at = self.delta.map(|d| format!(" (delta={d})")).unwrap_or_default();
        format!(
            "{}{at}: {:.11e} {op} {:.11e} (tolerance {:e})",
            self.name, self.lhs, self.rhs, self.tolerance
        )
    }
}

/// What was measured at one requested `δ`, and which values are bounds
/// rather than exact.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaSummary {
    pub requested: f64,
    pub effective: f64,
    pub epsilon: f64,
    pub part_count: usize,
    pub diameter_exact: bool,
    pub transport_exact: bool,
    pub mean_field_certified: bool,
    pub non_concave: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub n: usize,
    pub state_count: usize,
    pub log_z: f64,
    pub transport_budget: usize,
    pub lipschitz_gradient_regime: LipschitzRegime,
    pub lipschitz_f_regime: LipschitzRegime,
    pub deltas: Vec<DeltaSummary>,
    pub checks: Vec<Check>,
    pub failures: Vec<String>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VerifyConfig {
    /// Requested widths; `None` means [`default_deltas`].
    pub deltas: Option<Vec<f64>>,
    pub decompose: DecomposeOptions,
    pub bound: BoundOptions,
}

pub fn default_deltas(prep: &Prepared) -> Vec<f64> {
    let n = prep.space().n().max(1) as f64;
    let diam = prep.table.diameter();
    let coarse = if diam > 0.0 { 2.0 * diam / n } else { 1.0 };
    let mut out = DEFAULT_DELTAS.to_vec();
    out.push(coarse);
    out
}

pub fn verify(f: &Potential, config: &VerifyConfig) -> Result<VerifyReport> {
    let prep = Prepared::new(f);
    let space = prep.space();
    let mu = &prep.mu.dist;
    let lam = Distribution::reference(space.clone());
    let mode = (0..space.state_count()).fold(0, |b, x| if mu.weight(x) > mu.weight(b) { x } else { b });
    let mode_product = product_gibbs_flat(space, prep.table.row(mode));
    let mode_dist = mode_product.to_distribution();
    let mut checks = Vec::new();

    for (label, nu) in [("reference", &lam), ("mode-product", &mode_dist)] {
        checks.push(Check::equal(
            format!("variational-gap/{label}"),
            None,
            variational_gap(nu, f)?,
            kl(nu, mu),
            IDENTITY_TOL,
        ));
    }
    let (diag, averaged) = tower_sides_with(&prep);
    checks.push(Check::equal("tower-property", None, diag, averaged, IDENTITY_TOL));
    let dtc = dtc_definitional(mu);
    checks.push(Check::equal("dtc-cross-formula", None, dtc_gibbs(f), dtc, IDENTITY_TOL));
    checks.push(Check::at_most("dtc-nonnegative", None, 0.0, dtc, DTC_FLOOR));

    let deltas = match &config.deltas {
        Some(d) => d.clone(),
        None => default_deltas(&prep),
    };
    let mut summaries = Vec::new();
    let mut lipschitz_regimes = None;
    let mut first_cover: Option<GradientCover> = None;
    for &delta in &deltas {
        let cover = greedy_cover_with_table(&prep.table, delta)?;
        let report = decompose_cover(&prep, &cover, config.decompose)?;
        let d = Some(delta);
        let partition = cover.partition();
        checks.push(Check::at_most(
            "cover-hypothesis",
            d,
            report.effective_delta,
            delta,
            1e-12,
        ));
        for (label, gamma) in [("reference", &lam), ("mode-product", &mode_dist)] {
            let (lhs, rhs) = modified_chain_rule_sides(mu, gamma, &partition)?;
            checks.push(Check::equal(format!("modified-chain-rule/{label}"), d, lhs, rhs, IDENTITY_TOL));
        }
        let pivot_lhs = report.theorem_a.combined.lhs;
        checks.push(Check::equal(
            "pivot-identity",
            d,
            pivot_lhs,
            report.partition_entropy + report.double_integral,
            IDENTITY_TOL * pivot_lhs.abs().max(1.0),
        ));
        let t = &report.theorem_a;
        checks.push(Check::inequality("theorem-a/dtc", delta, &t.a));
        checks.push(Check::inequality("theorem-a/kl", delta, &t.b));
        checks.push(Check::inequality("theorem-a/transport", delta, &t.c));
        checks.push(Check::inequality("theorem-a/combined", delta, &t.combined));
        checks.push(Check::inequality("corollary/kl", delta, &report.corollary.kl));
        checks.push(Check::inequality("corollary/transport", delta, &report.corollary.transport));

        let fixed = fixed_point_residuals_with(&prep.table, &report)?;
        checks.push(Check::at_most("fixed-point", d, fixed.weighted_sum, fixed.bound, BOUND_SLACK));
        let bound = partition_function_bound(f, report.epsilon, report.effective_delta, config.bound);
        checks.push(Check::at_most(
            "partition-function-bound",
            d,
            bound.log_z_exact,
            bound.bound_rhs,
            BOUND_SLACK,
        ));
        if space.has_uniform_reference() {
            let fu = finite_uniform_form(f, &bound)?;
            checks.push(Check::equal("uniform-form", d, fu.residual, 0.0, UNIFORM_FORM_TOL));
        }
        lipschitz_regimes.get_or_insert((fixed.lipschitz.regime, bound.lipschitz_f.regime));
        summaries.push(DeltaSummary {
            requested: delta,
            effective: report.effective_delta,
            epsilon: report.epsilon,
            part_count: report.part_count,
            diameter_exact: report.diameter_exact,
            transport_exact: report.transport_exact,
            mean_field_certified: bound.certified,
            non_concave: bound.non_concave,
        });
        first_cover.get_or_insert(cover);
    }

    if space.state_count() <= config.decompose.transport_budget {
        let mut ys = vec![mode];
        if let Some(cover) = &first_cover {
            ys.extend(cover.centers.iter().copied().filter(|&y| y != mode));
        }
        for y in ys {
            let xi = product_gibbs_flat(space, prep.table.row(y));
            let (dbar, _) = dbar_exact_with_budget(mu, &xi, usize::MAX)?;
            checks.push(Check::at_most(
                format!("marton/{}", space.label(y)),
                None,
                dbar,
                marton_bound(mu, &xi),
                INEQUALITY_SLACK,
            ));
        }
    }

    let failures: Vec<String> = checks.iter().filter(|c| !c.passed).map(Check::describe).collect();
    let (grad_regime, f_regime) = lipschitz_regimes.unwrap_or((LipschitzRegime::AllPairs, LipschitzRegime::AllPairs));
    Ok(VerifyReport {
        n: space.n(),
        state_count: space.state_count(),
        log_z: prep.mu.log_z,
        transport_budget: config.decompose.transport_budget,
        lipschitz_gradient_regime: grad_regime,
        lipschitz_f_regime: f_regime,
        deltas: summaries,
        passed: failures.is_empty(),
        checks,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;
    use crate::report::to_canonical_json;
    use crate::space::ProductSpace;

    #[test]
    fn separable_passes_with_tiny_residuals() {
        let f = models::separable(&[2, 3, 2], 5, 1.0).unwrap();
        let r = verify(&f, &VerifyConfig::default()).unwrap();
        assert!(r.passed, "{:#?}", r.failures);
        for c in r.checks.iter().filter(|c| c.relation == Relation::Equal) {
            assert!((c.lhs - c.rhs).abs() < 1e-8, "{}", c.describe());
        }
        assert!(r.deltas.iter().all(|d| d.part_count == 1));
    }

    #[test]
    fn curie_weiss_and_biased_pass() {
        for f in [
            models::curie_weiss(4, 2.0, 0.2).unwrap(),
            models::curie_weiss_biased(4, 1.0, 0.0, 0.1).unwrap(),
            models::random_potential(&[3, 3, 3], 2, 1.0).unwrap(),
        ] {
            let r = verify(&f, &VerifyConfig::default()).unwrap();
            assert!(r.passed, "{:#?}", r.failures);
            assert_eq!(r.deltas.len(), 4);
        }
    }

    #[test]
    fn default_deltas_fall_back_for_constant_gradients() {
        let zero = Potential::zero(ProductSpace::uniform(&[2, 2]).unwrap());
        assert_eq!(default_deltas(&Prepared::new(&zero)), vec![0.05, 0.2, 0.5, 1.0]);
        let r = verify(&zero, &VerifyConfig::default()).unwrap();
        assert!(r.passed);
    }

    #[test]
    fn reports_are_byte_identical() {
        let f = models::curie_weiss(5, 1.0, 0.2).unwrap();
        let config = VerifyConfig {
            deltas: Some(vec![0.3]),
            ..Default::default()
        };
        let a = to_canonical_json(&verify(&f, &config).unwrap()).unwrap();
        let b = to_canonical_json(&verify(&f, &config).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn failing_checks_are_described() {
        let c = Check::at_most("x", Some(0.5), 2.0, 1.0, 1e-9);
        assert!(!c.passed);
        assert!(c.describe().starts_with("x (delta=0.5): 2.00000000000e0 <= 1.00000000000e0"));
        assert!(!Check::equal("nan", None, f64::NAN, 0.0, 1.0).passed);
    }
}
