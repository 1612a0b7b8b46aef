//! Public-API walkthroughs and the file formats.

use gibbs_decomp::cover::{covering_exponent, greedy_cover, verify_partition_hypothesis};
use gibbs_decomp::decompose::{corollary_a_select, dem_identity_residual, theorem_a_terms};
use gibbs_decomp::infotheory::{dtc_definitional, dtc_gibbs, modified_chain_rule_residual, variational_gap};
use gibbs_decomp::meanfield::{fixed_point_residuals, partition_function_bound, BoundOptions};
use gibbs_decomp::models::{self, load_potential, ModelSpec};
use gibbs_decomp::transport::{dbar_entropic_default, dbar_exact, marton_bound};
use gibbs_decomp::{gibbs, kl, product_gibbs, Distribution, Error, GradientTable, PartitionOfSpace, ProductSpace};
use proptest::prelude::*;

#[test]
fn full_pipeline_on_curie_weiss() {
    let f = models::curie_weiss(6, 1.0, 0.2).unwrap();
    let cover = greedy_cover(&f, 0.5).unwrap();
    let report = corollary_a_select(&f, &cover).unwrap();
    assert!(report.all_hold());
    assert_eq!(report.part_count, cover.part_count());
    assert!((report.epsilon - covering_exponent(&cover)).abs() < 1e-15);
    assert!(report.identity_residual < 1e-10);
    let masses: f64 = report.parts.iter().map(|p| p.mass).sum();
    assert!((masses - 1.0).abs() < 1e-12);

    let hyp = verify_partition_hypothesis(&f, &cover.partition());
    assert_eq!(hyp.effective_delta, report.effective_delta);
    assert!(hyp.effective_delta <= 0.5);

    let fixed = fixed_point_residuals(&f, &report).unwrap();
    assert!(fixed.holds);
    let bound = partition_function_bound(&f, report.epsilon, report.effective_delta, BoundOptions::default());
    assert!(bound.holds && bound.certified);
    assert!(bound.mean_field_sup_estimate <= bound.log_z_exact + 1e-12);
}

#[test]
fn singleton_partition_reduces_to_pointwise_terms() {
    let f = models::random_potential(&[2, 3, 2], 11, 1.0).unwrap();
    let mu = gibbs(&f);
    let table = GradientTable::new(&f);
    let r = theorem_a_terms(&f, &PartitionOfSpace::singletons(12)).unwrap();
    // μ|{y} = δ_y, so the inner KL is −log ξ_{∇f(y,·)}(y)
    let expected: f64 = (0..12)
        .map(|y| {
            let xi = product_gibbs(&gibbs_decomp::gradient(&f, y));
            -mu.dist.weights()[y] * xi.to_distribution().weights()[y].ln()
        })
        .sum();
    assert!((r.theorem_a.b.lhs - expected).abs() < 1e-10);
    assert_eq!(r.effective_delta, 0.0);
    assert!(r.identity_residual < 1e-10);
    assert!(table.diameter() > 0.0);
}

#[test]
fn model_documents() {
    let f = load_potential(r#"{"model": {"name": "curie-weiss", "n": 4, "beta": 1.5, "h": 0.1}}"#).unwrap();
    let g = models::curie_weiss(4, 1.5, 0.1).unwrap();
    assert_eq!(f.values(), g.values());

    let spec: ModelSpec = "random:n=3,k=2,seed=9".parse().unwrap();
    assert_eq!(spec.label().parse::<ModelSpec>().unwrap(), spec);

    let doc = r#"{
        "space": {
            "alphabets": [["lo", "hi"], ["a", "b", "c"]],
            "metrics": [[[0, 1], [1, 0]], [[0, 0.5, 1], [0.5, 0, 0.5], [1, 0.5, 0]]],
            "reference_measures": [[0.25, 0.75], [0.2, 0.3, 0.5]],
            "reference_points": ["hi", "b"]
        },
        "table": [0, 1, 2, 3, 4, 5]
    }"#;
    let f = load_potential(doc).unwrap();
    assert_eq!(f.space().reference_points(), &[1, 1]);
    assert_eq!(f.space().metric(1, 0, 1), 0.5);

    let err = load_potential(r#"{"space": {"alphabets": [["a"], ["b", "c"]], "reference_points": ["a", "z"]}, "table": [0, 0]}"#)
        .unwrap_err();
    assert!(matches!(err, Error::InvalidSpace { coord: 1, field: "reference_points", .. }), "{err}");
    let err = load_potential(r#"{"space": {"alphabets": [["a", "b"]], "reference_measures": [[0.5, -0.5]]}, "table": [0, 0]}"#)
        .unwrap_err();
    assert!(matches!(err, Error::InvalidSpace { coord: 0, field: "reference_measures", .. }), "{err}");
    let err = load_potential(r#"{"space": {"alphabets": [["a", "b"]]}, "table": [0]}"#).unwrap_err();
    assert!(err.to_string().contains("table"), "{err}");
}

#[test]
fn csv_outputs() {
    let f = models::curie_weiss(2, 1.0, 0.0).unwrap();
    let mut buf = Vec::new();
    GradientTable::new(&f).write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "config,label,coord,symbol,value");
    assert_eq!(lines.len(), 1 + 4 * 4);

    let space = ProductSpace::uniform(&[2]).unwrap();
    let mu = Distribution::new(space.clone(), vec![1.0, 0.0]).unwrap();
    let nu = Distribution::new(space, vec![0.5, 0.5]).unwrap();
    let (value, plan) = dbar_exact(&mu, &nu).unwrap();
    assert_eq!(value, 0.5);
    let mut buf = Vec::new();
    plan.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text, "source,target,mass\n0,0,5.00000000000e-1\n0,1,5.00000000000e-1\n");

    let report = theorem_a_terms(&f, &PartitionOfSpace::trivial(4)).unwrap();
    let mut buf = Vec::new();
    report.write_parts_csv(&mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 2);
}

fn model_strategy() -> impl Strategy<Value = gibbs_decomp::Potential> {
    (0u64..1000, 2usize..=4, 2usize..=3, prop::bool::ANY).prop_map(|(seed, n, k, biased)| {
        let f = models::random_potential(&vec![k; n], seed, 1.5).unwrap();
        if biased {
            let refs = (0..n).map(|i| {
                let raw: Vec<f64> = (0..k).map(|s| 1.0 + ((seed as usize + i + s) % 3) as f64).collect();
                let t: f64 = raw.iter().sum();
                raw.iter().map(|v| v / t).collect()
            });
            let space = f.space().with_reference_measures(refs.collect()).unwrap();
            gibbs_decomp::Potential::new(space, f.values().to_vec()).unwrap()
        } else {
            f
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn identities_hold_on_random_models(f in model_strategy(), delta in 0.05f64..2.0) {
        let mu = gibbs(&f);
        let cover = greedy_cover(&f, delta).unwrap();
        let p = cover.partition();
        let lam = Distribution::reference(f.space().clone());
        prop_assert!(modified_chain_rule_residual(&mu.dist, &lam, &p).unwrap() < 1e-9);
        prop_assert!(dem_identity_residual(&f, &p).unwrap() < 1e-8);
        prop_assert!((dtc_gibbs(&f) - dtc_definitional(&mu.dist)).abs() < 1e-9);
        let gap = variational_gap(&lam, &f).unwrap();
        prop_assert!((gap - kl(&lam, &mu.dist)).abs() < 1e-9);
        let report = corollary_a_select(&f, &cover).unwrap();
        prop_assert!(report.all_hold());
    }

    #[test]
    fn transport_bounds_sandwich(f in model_strategy(), y in 0usize..8) {
        let mu = gibbs(&f);
        let y = y % f.space().state_count();
        let xi = product_gibbs(&gibbs_decomp::gradient(&f, y));
        let (exact, plan) = dbar_exact(&mu.dist, &xi).unwrap();
        prop_assert!(plan.duality_gap.abs() <= 1e-9);
        prop_assert!(exact <= marton_bound(&mu.dist, &xi) + 1e-9);
        let entropic = dbar_entropic_default(&mu.dist, &xi).unwrap();
        prop_assert!(entropic.cost >= exact - 1e-9);
    }
}
