//! `f2a`: command-line harness for the budgeted waiting-time bandit simulator.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use f2a_core::coverage::{
    random_settings, run_coverage, write_coverage_csv, DEFAULT_RESAMPLES, DEFAULT_SETTINGS,
};
use f2a_core::experiments::scenarios::{retune, scenario, FrozenParams, SCENARIO_NAMES};
use f2a_core::experiments::{run_suite, SuiteError, SuiteOptions};
use f2a_core::{audit_constant_policy, ArmPair, EnvSpec, PolicySpec, RatioTable};

#[derive(Parser)]
#[command(
    name = "f2a",
    version,
    about = "Budgeted bandits with arm-and-wait decisions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate policies on scenarios and write CSV + JSON result files.
    Run {
        /// Scenario name(s), comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        scenario: Vec<String>,
        /// Policies, e.g. `wait-ucb,budget-ucb,constant:1,3,oracle`.
        #[arg(long)]
        policy: Option<String>,
        #[arg(long)]
        budget: Option<u64>,
        #[arg(long)]
        runs: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "results")]
        output: PathBuf,
        /// `log`, `lin:N` or a comma list ending at the budget.
        #[arg(long)]
        checkpoints: Option<String>,
        /// Environment JSON replacing the scenario's environment.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Play constant policies and compare totals with their exact bands.
    Audit {
        #[arg(long)]
        scenario: String,
        /// Pair `k,j`; defaults to the best pair.
        #[arg(long)]
        pair: Option<ArmPair>,
        #[arg(long, default_value_t = 100_000)]
        budget: u64,
        #[arg(long, default_value_t = 200)]
        runs: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Monte-Carlo coverage of the ratio and relative-mean bounds.
    Coverage {
        #[arg(long, default_value_t = DEFAULT_SETTINGS)]
        settings: usize,
        #[arg(long, default_value_t = DEFAULT_RESAMPLES)]
        resamples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "coverage.csv")]
        output: PathBuf,
    },
    /// Print a scenario's exact ratio table.
    ShowTable {
        #[arg(long)]
        scenario: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Re-run the scenario tuning searches and print parameters to freeze.
    Tune,
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn load_env(config: Option<&PathBuf>) -> Result<Option<EnvSpec>, SuiteError> {
    config.map(EnvSpec::load).transpose().map_err(|e| match e {
        f2a_core::Error::Io(_) => SuiteError::Io(e.to_string()),
        other => SuiteError::Usage(other.to_string()),
    })
}

fn scenario_env(name: Option<&str>, config: Option<&PathBuf>) -> Result<EnvSpec, SuiteError> {
    if let Some(env) = load_env(config)? {
        return Ok(env);
    }
    let name = name.ok_or_else(|| SuiteError::Usage("pass --scenario or --config".into()))?;
    Ok(scenario(name).map_err(unknown_scenario)?.env)
}

fn unknown_scenario(e: f2a_core::Error) -> SuiteError {
    SuiteError::Usage(format!(
        "{e}; known scenarios: {}",
        SCENARIO_NAMES.join(", ")
    ))
}

fn dispatch(cmd: Command) -> Result<(), SuiteError> {
    match cmd {
        Command::Run {
            scenario: scenarios,
            policy,
            budget,
            runs,
            seed,
            output,
            checkpoints,
            config,
        } => {
            for name in &scenarios {
                scenario(name).map_err(unknown_scenario)?;
            }
            let policies = policy
                .as_deref()
                .map(PolicySpec::parse_list)
                .transpose()
                .map_err(|e| SuiteError::Usage(e.to_string()))?;
            let opts = SuiteOptions {
                scenarios,
                policies,
                budget,
                runs,
                seed,
                checkpoints,
                env_override: load_env(config.as_ref())?,
                output,
            };
            let summary = run_suite(&opts)?;
            print!("{}", summary.render());
        }
        Command::Audit {
            scenario: name,
            pair,
            budget,
            runs,
            seed,
            config,
        } => {
            let env = scenario_env(Some(&name), config.as_ref())?;
            let pair = pair.unwrap_or_else(|| RatioTable::build(&env).best);
            let rep = audit_constant_policy(&env, pair, budget, runs, seed)?;
            println!("pair {} budget {} runs {}", rep.pair, rep.budget, rep.runs);
            println!(
                "g = {:.6}  mu_r = {:.6}  mu_c = {:.6}",
                rep.g, rep.mu_r, rep.mu_c
            );
            println!(
                "reward  mean {:.3} ± {:.3} (SE)  band [{:.3}, {:.3}]  residual {:.3}  {}",
                rep.mean_reward,
                rep.se_reward,
                rep.reward_band.0,
                rep.reward_band.1,
                rep.residual,
                verdict(rep.reward_ok)
            );
            println!(
                "epochs  mean {:.3} ± {:.3} (SE)  band ({:.3}, {:.3}]  {}",
                rep.mean_epochs,
                rep.se_epochs,
                rep.epoch_band.0,
                rep.epoch_band.1,
                verdict(rep.epochs_ok)
            );
            println!(
                "wald    gap {:.3} ± {:.3} (SE)  {}",
                rep.wald_gap,
                rep.wald_se,
                verdict(rep.wald_ok)
            );
        }
        Command::Coverage {
            settings,
            resamples,
            seed,
            output,
        } => {
            if settings == 0 || resamples == 0 {
                return Err(SuiteError::Usage(
                    "settings and resamples must be >= 1".into(),
                ));
            }
            let rows = run_coverage(&random_settings(seed, settings), resamples, seed)?;
            write_coverage_csv(&rows, &output)?;
            println!(
                "{:>7} {:<14} {:>3} {:>5} {:>6} {:>9} {:>9} {:>9}",
                "setting", "bound", "B", "n", "delta", "bound", "coverage", "required"
            );
            for r in &rows {
                println!(
                    "{:>7} {:<14} {:>3} {:>5} {:>6} {:>9.4} {:>9.4} {:>9.4} {}",
                    r.setting,
                    r.bound_kind.name(),
                    r.b,
                    r.n,
                    r.delta,
                    r.bound,
                    r.coverage,
                    r.required,
                    verdict(r.pass)
                );
            }
        }
        Command::ShowTable { scenario, config } => {
            let env = scenario_env(scenario.as_deref(), config.as_ref())?;
            print!("{}", RatioTable::build(&env).render());
        }
        Command::Tune => {
            let p = retune(&FrozenParams::load_embedded())?;
            let json =
                serde_json::to_string_pretty(&p).map_err(|e| SuiteError::Io(e.to_string()))?;
            println!("{json}");
        }
    }
    Ok(())
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "OUTSIDE"
    }
}
