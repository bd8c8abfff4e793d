//! Runs (scenario, policy) jobs and writes one CSV plus a JSON sidecar each.
//!
//! CSV layout: header `run_id,checkpoint_t,pseudo_regret`, then one row per
//! run and checkpoint, then `mean` and `std` rows per checkpoint.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::env::{EnvSpec, RatioTable};
use crate::error::Error;
use crate::experiments::scenarios::{scenario, ScenarioSpec};
use crate::policies::PolicySpec;
use crate::simulator::{parse_checkpoints, run_many, AggregateResult, GameConfig};

pub const GIT_DESCRIBE: &str = env!("F2A_GIT_DESCRIBE");

#[derive(Debug, thiserror::Error)]
pub enum SuiteError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl SuiteError {
    pub fn exit_code(&self) -> i32 {
        match self {
            SuiteError::Usage(_) => 2,
            SuiteError::Io(_) => 1,
        }
    }
}

impl From<Error> for SuiteError {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(_) | Error::Csv(_) => SuiteError::Io(e.to_string()),
            other => SuiteError::Usage(other.to_string()),
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> SuiteError {
    SuiteError::Io(format!("{}: {e}", path.display()))
}

/// Overrides applied on top of each scenario's defaults.
#[derive(Debug, Clone, Default)]
pub struct SuiteOptions {
    pub scenarios: Vec<String>,
    pub policies: Option<Vec<PolicySpec>>,
    pub budget: Option<u64>,
    pub runs: Option<u64>,
    pub seed: u64,
    /// `log`, `lin:N` or a comma list; defaults to log spacing.
    pub checkpoints: Option<String>,
    /// Replaces the environment of every selected scenario.
    pub env_override: Option<EnvSpec>,
    pub output: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub scenario: String,
    pub policy: String,
    pub budget: u64,
    pub runs: u64,
    pub final_mean: f64,
    pub final_std: f64,
    pub csv: PathBuf,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SuiteSummary {
    pub rows: Vec<SummaryRow>,
}

impl SuiteSummary {
    pub fn render(&self) -> String {
        let mut out = format!(
            "{:<16} {:<16} {:>10} {:>6} {:>14} {:>12}\n",
            "scenario", "policy", "budget", "runs", "mean_regret", "std"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<16} {:<16} {:>10} {:>6} {:>14.3} {:>12.3}",
                r.scenario, r.policy, r.budget, r.runs, r.final_mean, r.final_std
            );
        }
        out
    }
}

#[derive(Serialize)]
struct Sidecar<'a> {
    scenario: &'a str,
    family: &'a str,
    policy: String,
    budget: u64,
    runs: u64,
    seed: u64,
    checkpoints: &'a [u64],
    intended_gap: Option<f64>,
    git_describe: &'static str,
    env: &'a EnvSpec,
    ratio_table: &'a RatioTable,
}

/// Resolves scenario names, then plays every (scenario, policy) job.
pub fn run_suite(opts: &SuiteOptions) -> Result<SuiteSummary, SuiteError> {
    if opts.scenarios.is_empty() {
        return Err(SuiteError::Usage("no scenario selected".into()));
    }
    if opts.runs == Some(0) {
        return Err(SuiteError::Usage("runs must be >= 1".into()));
    }
    let mut specs = Vec::with_capacity(opts.scenarios.len());
    for name in &opts.scenarios {
        let mut spec = scenario(name)?;
        apply_overrides(&mut spec, opts)?;
        specs.push(spec);
    }
    fs::create_dir_all(&opts.output).map_err(|e| io_err(&opts.output, e))?;

    let mut summary = SuiteSummary::default();
    for spec in &specs {
        let table = spec.table();
        for &policy in &spec.policies {
            let cfg = GameConfig::new(spec.env.clone(), policy, spec.budget, opts.seed)?
                .with_checkpoints(spec.checkpoints.clone())?;
            let agg = run_many(&cfg, spec.runs);
            let stem = format!("{}__{}", spec.name, policy.label());
            let csv_path = opts.output.join(format!("{stem}.csv"));
            write_file(&csv_path, &render_csv(&agg))?;
            let sidecar = Sidecar {
                scenario: &spec.name,
                family: &spec.family,
                policy: policy.label(),
                budget: spec.budget,
                runs: spec.runs,
                seed: opts.seed,
                checkpoints: &spec.checkpoints,
                intended_gap: spec.intended_gap,
                git_describe: GIT_DESCRIBE,
                env: &spec.env,
                ratio_table: &table,
            };
            let json = serde_json::to_string_pretty(&sidecar)
                .map_err(|e| SuiteError::Io(e.to_string()))?;
            write_file(&opts.output.join(format!("{stem}.json")), &(json + "\n"))?;
            summary.rows.push(SummaryRow {
                scenario: spec.name.clone(),
                policy: policy.label(),
                budget: spec.budget,
                runs: spec.runs,
                final_mean: agg.final_mean(),
                final_std: agg.final_std(),
                csv: csv_path,
            });
        }
    }
    Ok(summary)
}

fn apply_overrides(spec: &mut ScenarioSpec, opts: &SuiteOptions) -> Result<(), SuiteError> {
    if let Some(env) = &opts.env_override {
        spec.env = env.clone();
        // the target belonged to the replaced environment
        spec.intended_gap = None;
        spec.family = "loaded from config file".into();
    }
    if let Some(p) = &opts.policies {
        spec.policies = p.clone();
    }
    for p in &spec.policies {
        if let PolicySpec::Constant(pair) = p {
            spec.env.check_pair(*pair)?;
        }
    }
    if let Some(t) = opts.budget {
        if t == 0 {
            return Err(SuiteError::Usage("budget must be >= 1".into()));
        }
        spec.budget = t;
    }
    if let Some(r) = opts.runs {
        spec.runs = r;
    }
    spec.checkpoints =
        parse_checkpoints(opts.checkpoints.as_deref().unwrap_or("log"), spec.budget)?;
    Ok(())
}

fn write_file(path: &Path, contents: &str) -> Result<(), SuiteError> {
    fs::write(path, contents).map_err(|e| io_err(path, e))
}

/// Serialises an aggregate with the `run_id,checkpoint_t,pseudo_regret` layout.
pub fn render_csv(agg: &AggregateResult) -> String {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    let mut rows: Vec<[String; 3]> = Vec::new();
    for (run, traj) in agg.trajectories.iter().enumerate() {
        for p in &traj.points {
            rows.push([
                run.to_string(),
                p.t.to_string(),
                p.pseudo_regret.to_string(),
            ]);
        }
    }
    for (label, values) in [("mean", &agg.mean), ("std", &agg.std)] {
        for (t, v) in agg.checkpoints.iter().zip(values.iter()) {
            rows.push([label.to_string(), t.to_string(), v.to_string()]);
        }
    }
    wtr.write_record(["run_id", "checkpoint_t", "pseudo_regret"])
        .expect("writing to memory");
    for r in &rows {
        wtr.write_record(r).expect("writing to memory");
    }
    String::from_utf8(wtr.into_inner().expect("flush to memory")).expect("csv output is utf-8")
}
