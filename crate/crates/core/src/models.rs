//! Model zoo and the JSON/string forms used to name a potential.

use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::Potential;
use crate::space::{numbered_alphabets, spin_alphabets, ProductSpace, SpaceSpec, DEFAULT_STATE_BUDGET};

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::param("n", "must be at least 1"));
    }
    Ok(())
}

fn check_finite(name: &'static str, v: f64) -> Result<()> {
    if !v.is_finite() {
        return Err(Error::param(name, "must be finite"));
    }
    Ok(())
}

/// Curie–Weiss on `{−1,+1}ⁿ`: `f(x) = β/(2n)·(Σxᵢ)² + h·Σxᵢ`, uniform
/// reference measures, reference point `−1`.
pub fn curie_weiss(n: usize, beta: f64, h: f64) -> Result<Potential> {
    check_n(n)?;
    check_finite("beta", beta)?;
    check_finite("h", h)?;
    let space = ProductSpace::spins(n)?;
    curie_weiss_on(space, beta, h)
}

/// Curie–Weiss with biased reference measures `λᵢ(+1) = p`.
pub fn curie_weiss_biased(n: usize, beta: f64, h: f64, p: f64) -> Result<Potential> {
    check_n(n)?;
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::param("bias", "must lie strictly between 0 and 1"));
    }
    let space = ProductSpace::builder(spin_alphabets(n))
        .reference_measures(vec![vec![1.0 - p, p]; n])
        .build()?;
    curie_weiss_on(space, beta, h)
}

fn curie_weiss_on(space: std::sync::Arc<ProductSpace>, beta: f64, h: f64) -> Result<Potential> {
    let n = space.n() as f64;
    Potential::from_fn(space, |x| {
        let m: f64 = x.iter().map(|&s| if s == 1 { 1.0 } else { -1.0 }).sum();
        beta / (2.0 * n) * m * m + h * m
    })
}

/// I.i.d. table entries uniform in `[−amplitude, amplitude]`.
pub fn random_potential(sizes: &[usize], seed: u64, amplitude: f64) -> Result<Potential> {
    check_n(sizes.len())?;
    check_finite("amplitude", amplitude)?;
    let space = ProductSpace::uniform(sizes)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..space.state_count())
        .map(|_| amplitude * (2.0 * rng.gen::<f64>() - 1.0))
        .collect();
    Potential::new(space, values)
}

/// `f(x) = Σᵢ gᵢ(xᵢ)` with i.i.d. entries uniform in `[−amplitude, amplitude]`.
pub fn separable(sizes: &[usize], seed: u64, amplitude: f64) -> Result<Potential> {
    check_n(sizes.len())?;
    check_finite("amplitude", amplitude)?;
    let space = ProductSpace::uniform(sizes)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let parts: Vec<Vec<f64>> = sizes
        .iter()
        .map(|&k| (0..k).map(|_| amplitude * (2.0 * rng.gen::<f64>() - 1.0)).collect())
        .collect();
    Potential::from_fn(space, |x| x.iter().enumerate().map(|(i, &s)| parts[i][s]).sum())
}

/// Symbol `s` of a `k`-letter alphabet placed evenly in `[−1, 1]`.
fn symbol_value(s: usize, k: usize) -> f64 {
    if k == 1 {
        0.0
    } else {
        2.0 * s as f64 / (k - 1) as f64 - 1.0
    }
}

/// `f(x) = n·Σⱼ (⟨uʲ, v(x)⟩/n)²` with seeded features `uʲ ∈ [−1,1]ⁿ` and
/// `v(x)ᵢ` the symbol of `xᵢ` placed in `[−1, 1]`.
pub fn low_rank(sizes: &[usize], rank: usize, seed: u64) -> Result<Potential> {
    check_n(sizes.len())?;
    if rank == 0 {
        return Err(Error::param("rank", "must be at least 1"));
    }
    let space = ProductSpace::uniform(sizes)?;
    let n = sizes.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let features: Vec<Vec<f64>> = (0..rank)
        .map(|_| (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect())
        .collect();
    let nf = n as f64;
    Potential::from_fn(space, |x| {
        features
            .iter()
            .map(|u| {
                let t: f64 = x.iter().enumerate().map(|(i, &s)| u[i] * symbol_value(s, sizes[i])).sum::<f64>() / nf;
                t * t
            })
            .sum::<f64>()
            * nf
    })
}

/// A named model with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelSpec {
    CurieWeiss {
        n: usize,
        beta: f64,
        #[serde(default)]
        h: f64,
        /// `λᵢ(+1)`; uniform when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bias: Option<f64>,
    },
    Random {
        n: usize,
        k: usize,
        seed: u64,
        #[serde(default = "one")]
        amplitude: f64,
    },
    Separable {
        n: usize,
        k: usize,
        seed: u64,
        #[serde(default = "one")]
        amplitude: f64,
    },
    LowRank {
        n: usize,
        k: usize,
        rank: usize,
        seed: u64,
    },
    Zero {
        n: usize,
        k: usize,
    },
}

fn one() -> f64 {
    1.0
}

impl ModelSpec {
    pub fn build(&self) -> Result<Potential> {
        match *self {
            ModelSpec::CurieWeiss { n, beta, h, bias } => match bias {
                Some(p) => curie_weiss_biased(n, beta, h, p),
                None => curie_weiss(n, beta, h),
            },
            ModelSpec::Random { n, k, seed, amplitude } => random_potential(&vec![k; n], seed, amplitude),
            ModelSpec::Separable { n, k, seed, amplitude } => separable(&vec![k; n], seed, amplitude),
            ModelSpec::LowRank { n, k, rank, seed } => low_rank(&vec![k; n], rank, seed),
            ModelSpec::Zero { n, k } => {
                check_n(n)?;
                Ok(Potential::zero(ProductSpace::builder(numbered_alphabets(&vec![k; n])).build()?))
            }
        }
    }

    /// Number of configurations, saturating at `u128::MAX`.
    pub fn state_count(&self) -> u128 {
        let (n, k) = match *self {
            ModelSpec::CurieWeiss { n, .. } => (n, 2),
            ModelSpec::Random { n, k, .. }
            | ModelSpec::Separable { n, k, .. }
            | ModelSpec::LowRank { n, k, .. }
            | ModelSpec::Zero { n, k } => (n, k),
        };
        (k as u128).checked_pow(n.min(u32::MAX as usize) as u32).unwrap_or(u128::MAX)
    }

    /// Compact `name:key=value,...` rendering, the inverse of `FromStr`.
    pub fn label(&self) -> String {
        let value = serde_json::to_value(self).expect("model specs serialize");
        let map = value.as_object().expect("model specs are objects");
        let name = map["name"].as_str().unwrap_or_default();
        let params: Vec<String> = map
            .iter()
            .filter(|(k, _)| *k != "name")
            .map(|(k, v)| format!("{k}={v}"))
            .collect();
        format!("{name}:{}", params.join(","))
    }
}

/// Parses `curie-weiss:n=6,beta=1,h=0`.
impl FromStr for ModelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, rest) = s.split_once(':').unwrap_or((s, ""));
        let mut map = serde_json::Map::new();
        map.insert("name".into(), serde_json::Value::String(name.trim().to_string()));
        for kv in rest.split(',').map(str::trim).filter(|kv| !kv.is_empty()) {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::param("model", format!("expected key=value, got `{kv}`")))?;
            let value: serde_json::Value = serde_json::from_str(v.trim())
                .map_err(|_| Error::param("model", format!("`{k}` must be numeric, got `{v}`")))?;
            map.insert(k.trim().to_string(), value);
        }
        serde_json::from_value(serde_json::Value::Object(map)).map_err(|e| Error::param("model", e.to_string()))
    }
}

/// JSON document describing a potential: either a named `model` or an
/// explicit `space` plus dense `table` in canonical order.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub space: Option<SpaceSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<f64>>,
}

impl PotentialFile {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn build(&self, state_budget: usize) -> Result<Potential> {
        match (&self.model, &self.space, &self.table) {
            (Some(model), None, None) => {
                let count = model.state_count();
                if count > state_budget as u128 {
                    return Err(Error::BudgetExceeded {
                        what: "state count",
                        count,
                        budget: state_budget as u128,
                    });
                }
                model.build()
            }
            (None, Some(space), Some(table)) => Potential::new(space.build(state_budget)?, table.clone()),
            (None, Some(_), None) => Err(Error::param("table", "missing; required together with `space`")),
            (None, None, Some(_)) => Err(Error::param("space", "missing; required together with `table`")),
            (None, None, None) => Err(Error::param("model", "document needs `model` or `space` + `table`")),
            _ => Err(Error::param("model", "`model` cannot be combined with `space`/`table`")),
        }
    }
}

/// Convenience for callers that only need the default budget.
pub fn load_potential(text: &str) -> Result<Potential> {
    PotentialFile::parse(text)?.build(DEFAULT_STATE_BUDGET)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curie_weiss_table_and_degenerate_case() {
        let f = curie_weiss(2, 1.0, 0.0).unwrap();
        assert_eq!(f.values(), &[1.0, 0.0, 0.0, 1.0]);
        let zero = curie_weiss(5, 0.0, 0.0).unwrap();
        assert!(zero.values().iter().all(|&v| v == 0.0));
        assert!(curie_weiss(0, 1.0, 0.0).is_err());
        assert!(curie_weiss(3, f64::NAN, 0.0).is_err());
    }

    #[test]
    fn seeded_models_are_reproducible() {
        assert_eq!(random_potential(&[2, 3], 9, 2.0).unwrap(), random_potential(&[2, 3], 9, 2.0).unwrap());
        assert_ne!(random_potential(&[2, 3], 9, 2.0).unwrap(), random_potential(&[2, 3], 10, 2.0).unwrap());
        assert_eq!(low_rank(&[2; 4], 2, 1).unwrap(), low_rank(&[2; 4], 2, 1).unwrap());
        let f = random_potential(&[2, 2, 2], 1, 0.5).unwrap();
        assert!(f.values().iter().all(|v| v.abs() <= 0.5));
    }

    #[test]
    fn low_rank_has_few_distinct_gradients_relative_to_random() {
        use crate::potential::GradientTable;
        let lr = GradientTable::new(&low_rank(&[2; 6], 1, 3).unwrap());
        let rnd = GradientTable::new(&random_potential(&[2; 6], 3, 1.0).unwrap());
        assert!(lr.diameter() < rnd.diameter());
    }

    #[test]
    fn biased_reference_measure() {
        let f = curie_weiss_biased(3, 1.0, 0.0, 0.1).unwrap();
        assert_eq!(f.space().reference_measure(0), &[0.9, 0.1]);
        assert!(curie_weiss_biased(3, 1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn model_strings_parse_and_roundtrip() {
        let m: ModelSpec = "curie-weiss:n=6,beta=1,h=0.2".parse().unwrap();
        assert_eq!(m, ModelSpec::CurieWeiss { n: 6, beta: 1.0, h: 0.2, bias: None });
        assert_eq!(m.label().parse::<ModelSpec>().unwrap(), m);
        let m: ModelSpec = "random:n=3,k=2,seed=4".parse().unwrap();
        assert_eq!(m, ModelSpec::Random { n: 3, k: 2, seed: 4, amplitude: 1.0 });
        assert!("curie-weiss:n=6,beta=x".parse::<ModelSpec>().is_err());
        assert!("curie-weiss:n=6,beta=1,gamma=2".parse::<ModelSpec>().is_err());
        assert!("nonsense".parse::<ModelSpec>().is_err());
    }

    #[test]
    fn potential_files() {
        let f = load_potential(r#"{"model": {"name": "curie-weiss", "n": 2, "beta": 1.0}}"#).unwrap();
        assert_eq!(f.values(), &[1.0, 0.0, 0.0, 1.0]);
        let f = load_potential(r#"{"space": {"alphabets": [["a","b"]]}, "table": [0.5, -1]}"#).unwrap();
        assert_eq!(f.values(), &[0.5, -1.0]);
        let err = load_potential(r#"{"space": {"alphabets": [["a","b"]]}, "table": [0.5]}"#).unwrap_err();
        assert!(err.to_string().contains("table"));
        let err = load_potential(r#"{"model": {"name": "curie-weiss", "n": 2}}"#).unwrap_err();
        assert!(err.to_string().contains("beta"), "{err}");
        let err = load_potential(r#"{"tabel": []}"#).unwrap_err();
        assert!(err.to_string().contains("tabel"));
    }
}
