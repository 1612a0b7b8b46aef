use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gibbs_decomp::cover::{covering_exponent, greedy_cover_with_table, verify_with_table, DEFAULT_PAIR_BUDGET};
use gibbs_decomp::decompose::{decompose_cover, DecomposeOptions, Prepared, DEFAULT_EXACT_TRANSPORT_STATES};
use gibbs_decomp::meanfield::{
    finite_uniform_form, fixed_point_residuals_with, partition_function_bound, tanh_fixed_point, BoundOptions,
    DEFAULT_RESTARTS,
};
use gibbs_decomp::models::{ModelSpec, PotentialFile};
use gibbs_decomp::report::to_canonical_json;
use gibbs_decomp::space::DEFAULT_STATE_BUDGET;
use gibbs_decomp::verify::{verify, VerifyConfig};
use gibbs_decomp::{Error, Potential};
use serde_json::{json, Value};

const THREADS_ENV: &str = "GIBBS_DECOMP_THREADS";
const TANH_TOL: f64 = 1e-10;
const TANH_MAX_ITER: usize = 100_000;

/// Exact Gibbs-measure decompositions into near-product pieces.
#[derive(Parser)]
#[command(name = "gibbs-decomp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cover the gradients, decompose μ, and check every inequality.
    Decompose(Common),
    /// Mean-field upper bound on the log partition function.
    Bound(Common),
    /// Fixed-point residuals per part and the tanh iteration.
    Fixpoint {
        #[command(flatten)]
        common: Common,
        /// Starting magnetizations: one value per coordinate, or a single
        /// value used for all of them.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        m0: Option<Vec<f64>>,
    },
    /// Run the full identity and inequality suite.
    Verify(Common),
    /// Describe the model: size, log Z, gradient statistics.
    ModelInfo(Common),
}

#[derive(Args, Clone)]
struct Common {
    /// Named model, e.g. `curie-weiss:n=6,beta=1,h=0`.
    #[arg(long, conflicts_with = "model_file", required_unless_present = "model_file")]
    model: Option<String>,
    /// JSON document with `model`, or `space` plus `table`.
    #[arg(long)]
    model_file: Option<PathBuf>,
    /// Requested covering width δ.
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_RESTARTS)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Largest admissible state count.
    #[arg(long, default_value_t = DEFAULT_STATE_BUDGET)]
    budget_states: usize,
    /// Largest state count solved with exact transport; above it the
    /// Marton bound is reported instead.
    #[arg(long, default_value_t = DEFAULT_EXACT_TRANSPORT_STATES)]
    budget_transport: usize,
    /// Write here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

enum Failure {
    Config(String),
    Budget(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_budget() {
            Failure::Budget(e.to_string())
        } else {
            Failure::Config(e.to_string())
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Config(e.to_string())
    }
}

/// Rendered output plus whether every check passed.
struct Outcome {
    body: Vec<u8>,
    passed: bool,
    failures: Vec<String>,
}

impl Common {
    fn load(&self) -> Result<(String, Potential), Failure> {
        if self.budget_states == 0 || self.budget_transport == 0 {
            return Err(Failure::Config("budgets must be positive".into()));
        }
        let (label, file) = match (&self.model, &self.model_file) {
            (Some(spec), _) => {
                let spec: ModelSpec = spec.parse()?;
                (
                    spec.label(),
                    PotentialFile {
                        model: Some(spec),
                        ..Default::default()
                    },
                )
            }
            (None, Some(path)) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
                let file = PotentialFile::parse(&text)
                    .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
                (path.display().to_string(), file)
            }
            (None, None) => return Err(Failure::Config("one of --model or --model-file is required".into())),
        };
        Ok((label, file.build(self.budget_states)?))
    }

    fn delta(&self) -> Result<f64, Failure> {
        match self.delta {
            Some(d) if d > 0.0 && d.is_finite() => Ok(d),
            Some(d) => Err(Failure::Config(format!("--delta must be positive, got {d}"))),
            None => Err(Failure::Config("--delta is required for this command".into())),
        }
    }

    fn options(&self) -> DecomposeOptions {
        DecomposeOptions {
            transport_budget: self.budget_transport,
            pair_budget: DEFAULT_PAIR_BUDGET,
        }
    }

    fn bound_options(&self) -> BoundOptions {
        BoundOptions {
            restarts: self.restarts,
            seed: self.seed,
        }
    }

    fn envelope(&self, command: &str, model: &str, report: Value) -> Value {
        json!({
            "command": command,
            "model": model,
            "config": {
                "delta": self.delta,
                "restarts": self.restarts,
                "seed": self.seed,
                "budget_states": self.budget_states,
                "budget_transport": self.budget_transport,
            },
            "report": report,
        })
    }
}

fn json_body(value: &Value) -> Result<Vec<u8>, Failure> {
    Ok(to_canonical_json(value)?.into_bytes())
}

fn csv_rows(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Vec<u8> {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out.into_bytes()
}

fn decompose_cmd(c: &Common) -> Result<Outcome, Failure> {
    let (label, f) = c.load()?;
    let delta = c.delta()?;
    let prep = Prepared::new(&f);
    let cover = greedy_cover_with_table(&prep.table, delta)?;
    let report = decompose_cover(&prep, &cover, c.options())?;
    let passed = report.all_hold();
    let body = match c.format {
        Format::Json => json_body(&c.envelope("decompose", &label, serde_json::to_value(&report).map_err(Error::from)?))?,
        Format::Csv => {
            let mut buf = Vec::new();
            report.write_parts_csv(&mut buf)?;
            buf
        }
    };
    let t = &report.theorem_a;
    let named = [
        ("theorem-a/dtc", &t.a),
        ("theorem-a/kl", &t.b),
        ("theorem-a/transport", &t.c),
        ("theorem-a/combined", &t.combined),
        ("corollary/kl", &report.corollary.kl),
        ("corollary/transport", &report.corollary.transport),
    ];
    let failures = named
        .iter()
        .filter(|(_, q)| !q.holds)
        .map(|(name, q)| format!("{name}: {:e} <= {:e}", q.lhs, q.rhs))
        .collect();
    Ok(Outcome { body, passed, failures })
}

fn bound_cmd(c: &Common) -> Result<Outcome, Failure> {
    let (label, f) = c.load()?;
    let delta = c.delta()?;
    let prep = Prepared::new(&f);
    let cover = greedy_cover_with_table(&prep.table, delta)?;
    let check = verify_with_table(&prep.table, &cover.partition(), DEFAULT_PAIR_BUDGET);
    let record = partition_function_bound(&f, covering_exponent(&cover), check.effective_delta, c.bound_options());
    let uniform = if f.space().has_uniform_reference() {
        Some(finite_uniform_form(&f, &record)?)
    } else {
        None
    };
    let body = match c.format {
        Format::Json => json_body(&c.envelope(
            "bound",
            &label,
            json!({
                "part_count": cover.part_count(),
                "diameter_exact": check.exact,
                "bound": record,
                "uniform_form": uniform,
            }),
        ))?,
        Format::Csv => csv_rows(
            &["start", "objective", "sweeps", "converged"],
            record.restarts.iter().map(|r| {
                vec![
                    r.start.clone(),
                    format!("{:.11e}", r.objective),
                    r.sweeps.to_string(),
                    r.converged.to_string(),
                ]
            }),
        ),
    };
    let failures = if record.holds {
        Vec::new()
    } else {
        vec![format!("partition-function-bound: log Z {:e} <= {:e}", record.log_z_exact, record.bound_rhs)]
    };
    Ok(Outcome {
        body,
        passed: record.holds,
        failures,
    })
}

fn fixpoint_cmd(c: &Common, m0: Option<&[f64]>) -> Result<Outcome, Failure> {
    let (label, f) = c.load()?;
    let delta = c.delta()?;
    let prep = Prepared::new(&f);
    let cover = greedy_cover_with_table(&prep.table, delta)?;
    let report = decompose_cover(&prep, &cover, c.options())?;
    let record = fixed_point_residuals_with(&prep.table, &report)?;
    let n = f.space().n();
    let m0: Vec<f64> = match m0 {
        None => vec![0.5; n],
        Some([v]) => vec![*v; n],
        Some(list) => list.to_vec(),
    };
    let mut failures = Vec::new();
    if !record.holds {
        failures.push(format!("fixed-point: {:e} <= {:e}", record.weighted_sum, record.bound));
    }
    let (tanh, trajectory) = match tanh_fixed_point(&f, &m0, TANH_TOL, TANH_MAX_ITER) {
        Ok(r) => {
            let t = r.trajectory.clone();
            (json!({ "converged": true, "result": r }), t)
        }
        Err(Error::TanhNotConverged {
            iterations,
            residual,
            trajectory,
        }) => {
            failures.push(format!("tanh: no convergence after {iterations} iterations (residual {residual:e})"));
            (
                json!({ "converged": false, "iterations": iterations, "residual": residual, "trajectory": trajectory }),
                trajectory,
            )
        }
        // not a spin model: the tanh form does not apply
        Err(e @ (Error::NotBinary { .. } | Error::NonUniformReference { .. })) => {
            (json!({ "skipped": e.to_string() }), Vec::new())
        }
        Err(e) => return Err(e.into()),
    };
    let body = match c.format {
        Format::Json => json_body(&c.envelope("fixpoint", &label, json!({ "fixed_point": record, "tanh": tanh })))?,
        Format::Csv => {
            let mut header = vec!["iteration".to_string()];
            header.extend((0..n).map(|i| format!("m{i}")));
            let header: Vec<&str> = header.iter().map(String::as_str).collect();
            csv_rows(
                &header,
                trajectory.iter().enumerate().map(|(k, m)| {
                    std::iter::once(k.to_string())
                        .chain(m.iter().map(|v| format!("{v:.11e}")))
                        .collect()
                }),
            )
        }
    };
    Ok(Outcome {
        body,
        passed: failures.is_empty(),
        failures,
    })
}

fn verify_cmd(c: &Common) -> Result<Outcome, Failure> {
    let (label, f) = c.load()?;
    let config = VerifyConfig {
        deltas: c.delta.map(|_| c.delta()).transpose()?.map(|d| vec![d]),
        decompose: c.options(),
        bound: c.bound_options(),
    };
    let report = verify(&f, &config)?;
    let body = match c.format {
        Format::Json => json_body(&c.envelope("verify", &label, serde_json::to_value(&report).map_err(Error::from)?))?,
        Format::Csv => csv_rows(
            &["name", "delta", "relation", "lhs", "rhs", "tolerance", "passed"],
            report.checks.iter().map(|ch| {
                vec![
                    ch.name.clone(),
                    ch.delta.map(|d| d.to_string()).unwrap_or_default(),
                    format!("{:?}", ch.relation).to_lowercase(),
                    format!("{:.11e}", ch.lhs),
                    format!("{:.11e}", ch.rhs),
                    format!("{:e}", ch.tolerance),
                    ch.passed.to_string(),
                ]
            }),
        ),
    };
    Ok(Outcome {
        body,
        passed: report.passed,
        failures: report.failures,
    })
}

fn model_info_cmd(c: &Common) -> Result<Outcome, Failure> {
    let (label, f) = c.load()?;
    let prep = Prepared::new(&f);
    let space = f.space();
    let body = match c.format {
        Format::Json => json_body(&c.envelope(
            "model-info",
            &label,
            json!({
                "n": space.n(),
                "state_count": space.state_count(),
                "alphabets": space.alphabets(),
                "uniform_reference": space.has_uniform_reference(),
                "log_z": prep.mu.log_z,
                "gradient_diameter": prep.table.diameter(),
                "distinct_gradients": prep.table.distinct_count(),
            }),
        ))?,
        Format::Csv => {
            let mut buf = Vec::new();
            prep.table.write_csv(&mut buf)?;
            buf
        }
    };
    Ok(Outcome {
        body,
        passed: true,
        failures: Vec::new(),
    })
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|t| *t > 0)
        .ok_or_else(|| Failure::Config(format!("{THREADS_ENV} must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure::Config(e.to_string()))
}

fn run(cli: &Cli) -> Result<Outcome, Failure> {
    configure_threads()?;
    let (outcome, common) = match &cli.command {
        Command::Decompose(c) => (decompose_cmd(c)?, c),
        Command::Bound(c) => (bound_cmd(c)?, c),
        Command::Fixpoint { common, m0 } => (fixpoint_cmd(common, m0.as_deref())?, common),
        Command::Verify(c) => (verify_cmd(c)?, c),
        Command::ModelInfo(c) => (model_info_cmd(c)?, c),
    };
    match &common.out {
        Some(path) => fs::write(path, &outcome.body).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?,
        None => io::stdout().write_all(&outcome.body)?,
    }
    Ok(outcome)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(outcome) if outcome.passed => ExitCode::SUCCESS,
        Ok(outcome) => {
            eprintln!("{} check(s) failed:", outcome.failures.len());
            for f in &outcome.failures {
                eprintln!("  {f}");
            }
            ExitCode::from(1)
        }
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Budget(msg)) => {
            eprintln!("budget exceeded: {msg}");
            ExitCode::from(3)
        }
    }
}
