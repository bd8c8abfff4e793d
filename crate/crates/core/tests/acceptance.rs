//! Exit criteria. Prints one `PASS`/`FAIL` line per criterion and exits
//! non-zero when any criterion fails.

use std::fs;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use f2a_core::coverage::{random_settings, run_coverage, BoundKind};
use f2a_core::estimators::{
    deviation_radius_at_log, pull_count_ceiling, ratio_tail_probability, regret_log_coefficient,
};
use f2a_core::experiments::scenarios::{scenario_ads_case2, scenario_doubling, scenario_mid_best};
use f2a_core::experiments::{run_suite, SuiteOptions};
use f2a_core::simulator::{fit_log_envelope, run_many_results};
use f2a_core::*;

const SEED: u64 = 20_240_101;

const AUDIT_BUDGET: u64 = 100_000;
const AUDIT_RUNS: u64 = 200;
const AUDIT_TIME_LIMIT: Duration = Duration::from_secs(60);

const COVERAGE_SETTINGS: usize = 12;
const COVERAGE_RESAMPLES: u64 = 10_000;
const COVERAGE_TIME_LIMIT: Duration = Duration::from_secs(120);

const IDENTITY_REL_TOL: f64 = 1e-9;

const UCB1_HISTORIES: u64 = 100;
const UCB1_STEPS: u64 = 2_000;

const CEILING_RUNS: u64 = 50;
const CEILING_SLACK: f64 = 1.2;

const LOG_FIT_RUNS: u64 = 50;
const LOG_FIT_MAX_RESIDUAL: f64 = 0.10;

const ORDERING_BUDGET: u64 = 100_000;
const ORDERING_RUNS: u64 = 10;

type Check = fn() -> (bool, String);

struct Outcome {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn main() -> ExitCode {
    let mut outcomes = audit_bands();
    let criteria: [(&'static str, Check); 7] = [
        ("confidence-bound coverage", coverage),
        (
            "tail probability at the deviation radius equals 4 s^-4",
            tail_identity,
        ),
        ("unit-delay reduction to UCB1", ucb1_reduction),
        ("suboptimal pull ceilings on mid_best", pull_ceiling),
        ("logarithmic regret growth on mid_best", log_growth),
        ("regret ordering on doubling and mid_best", ordering),
        ("byte-identical output for a fixed seed", determinism),
    ];
    for (name, check) in criteria {
        let t0 = Instant::now();
        let (pass, detail) = check();
        outcomes.push(Outcome {
            name,
            pass,
            detail: format!("{detail} [{:.1?}]", t0.elapsed()),
        });
    }
    let failed = outcomes.iter().filter(|o| !o.pass).count();
    println!();
    for o in &outcomes {
        println!(
            "{} {}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.name,
            o.detail
        );
    }
    println!(
        "\n{} of {} acceptance criteria passed",
        outcomes.len() - failed,
        outcomes.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn audit_settings() -> Vec<(&'static str, EnvSpec, ArmPair)> {
    let uniform_12 = EnvSpec::new(vec![JointArmDistribution::new(
        vec![Atom::new(1.0, 1, 0.5), Atom::new(1.0, 2, 0.5)],
        2,
    )
    .unwrap()])
    .unwrap();
    let uniform_13 = EnvSpec::new(vec![JointArmDistribution::bernoulli_with_delays(
        0.5,
        &[(1, 0.5), (3, 0.5)],
        3,
    )
    .unwrap()])
    .unwrap();
    let dependent = EnvSpec::new(vec![JointArmDistribution::new(
        vec![
            Atom::new(1.0, 1, 0.3),
            Atom::new(0.5, 2, 0.3),
            Atom::new(0.2, 4, 0.4),
        ],
        4,
    )
    .unwrap()])
    .unwrap();
    vec![
        ("uniform{1,2} V=1 j=2", uniform_12, ArmPair::new(1, 2)),
        ("{1,3} Bernoulli(1/2) j=3", uniform_13, ArmPair::new(1, 3)),
        (
            "doubling j=10",
            scenario_doubling().unwrap().env,
            ArmPair::new(1, 10),
        ),
        ("dependent V,tau j=2", dependent, ArmPair::new(1, 2)),
        (
            "ads_case2 (3,4)",
            scenario_ads_case2().unwrap().env,
            ArmPair::new(3, 4),
        ),
    ]
}

/// Runs the five audits once; the reward and stopping-time criteria read
/// the same reports.
fn audit_bands() -> Vec<Outcome> {
    let t0 = Instant::now();
    let (mut reward_lines, mut epoch_lines) = (Vec::new(), Vec::new());
    let (mut reward_ok, mut epochs_ok) = (true, true);
    for (i, (label, env, pair)) in audit_settings().into_iter().enumerate() {
        let rep =
            audit_constant_policy(&env, pair, AUDIT_BUDGET, AUDIT_RUNS, SEED + i as u64).unwrap();
        reward_ok &= rep.reward_ok;
        epochs_ok &= rep.epochs_ok;
        reward_lines.push(format!(
            "\n    {label}: mean {:.2} ± {:.2} (SE), band [{:.2}, {:.2}] {}",
            rep.mean_reward,
            rep.se_reward,
            rep.reward_band.0,
            rep.reward_band.1,
            ok(rep.reward_ok),
        ));
        epoch_lines.push(format!(
            "\n    {label}: mean {:.2} ± {:.2} (SE), band ({:.2}, {:.2}] {}",
            rep.mean_epochs,
            rep.se_epochs,
            rep.epoch_band.0,
            rep.epoch_band.1,
            ok(rep.epochs_ok),
        ));
    }
    let elapsed = t0.elapsed();
    let fast = elapsed < AUDIT_TIME_LIMIT;
    let timing =
        format!("T={AUDIT_BUDGET}, runs={AUDIT_RUNS}, {elapsed:.1?} < {AUDIT_TIME_LIMIT:?}");
    vec![
        Outcome {
            name: "constant-policy reward band",
            pass: reward_ok && fast,
            detail: format!("{timing}{}", reward_lines.concat()),
        },
        Outcome {
            name: "constant-policy stopping-time band",
            pass: epochs_ok && fast,
            detail: format!("{timing}{}", epoch_lines.concat()),
        },
    ]
}

fn coverage() -> (bool, String) {
    let t0 = Instant::now();
    let rows = run_coverage(
        &random_settings(SEED, COVERAGE_SETTINGS),
        COVERAGE_RESAMPLES,
        SEED,
    )
    .unwrap();
    let elapsed = t0.elapsed();
    let worst = |kind| {
        rows.iter()
            .filter(|r| r.bound_kind == kind)
            .map(|r| r.coverage - r.required)
            .fold(f64::INFINITY, f64::min)
    };
    let all = rows.iter().all(|r| r.pass);
    (
        all && elapsed < COVERAGE_TIME_LIMIT,
        format!(
            "{} settings x {} resamples, smallest margin over required: ratio {:.4}, relative mean {:.4}; {:.1?} < {:?}",
            COVERAGE_SETTINGS,
            COVERAGE_RESAMPLES,
            worst(BoundKind::Ratio),
            worst(BoundKind::RelativeMean),
            elapsed,
            COVERAGE_TIME_LIMIT
        ),
    )
}

fn tail_identity() -> (bool, String) {
    let mut worst: f64 = 0.0;
    for j in 2..=10usize {
        for n in 1..=100u64 {
            for log_s in [0.5, 1.0, 2.0, 2f64.ln(), 1000f64.ln()] {
                let eps = deviation_radius_at_log(j, log_s, n);
                let p = ratio_tail_probability(j as f64, n, eps).unwrap();
                let want = 4.0 * (-4.0 * log_s).exp();
                worst = worst.max((p - want).abs() / want);
            }
        }
    }
    (
        worst <= IDENTITY_REL_TOL,
        format!("max relative error {worst:.2e} <= {IDENTITY_REL_TOL:e}"),
    )
}

/// Classic UCB1 on pre-drawn reward tables: pull each arm once, then
/// maximise `mean + sqrt(2 ln n / n_k)` with `n` the plays so far.
fn ucb1_sequence(table: &[Vec<f64>], steps: u64) -> Vec<usize> {
    let k = table.len();
    let mut sums = vec![0.0; k];
    let mut counts = vec![0usize; k];
    let mut seq = Vec::with_capacity(steps as usize);
    for n in 0..steps as usize {
        let arm = if n < k {
            n
        } else {
            let mut best = 0;
            let mut best_v = f64::NEG_INFINITY;
            for a in 0..k {
                let v =
                    sums[a] / counts[a] as f64 + (2.0 * (n as f64).ln() / counts[a] as f64).sqrt();
                if v > best_v {
                    best_v = v;
                    best = a;
                }
            }
            best
        };
        sums[arm] += table[arm][counts[arm]];
        counts[arm] += 1;
        seq.push(arm);
    }
    seq
}

fn ucb1_reduction() -> (bool, String) {
    let mut mismatched = 0;
    for h in 0..UCB1_HISTORIES {
        let mut rng = SimRng::stream(SEED, h);
        let k = 2 + (rng.next_u64() % 5) as usize;
        let means: Vec<f64> = (0..k).map(|_| rng.uniform()).collect();
        let table: Vec<Vec<f64>> = means
            .iter()
            .map(|&m| {
                (0..UCB1_STEPS)
                    .map(|_| if rng.uniform() < m { 1.0 } else { 0.0 })
                    .collect()
            })
            .collect();
        let expected = ucb1_sequence(&table, UCB1_STEPS);

        let env = EnvSpec::new(
            means
                .iter()
                .map(|&m| JointArmDistribution::bernoulli_with_delays(m, &[(1, 1.0)], 1).unwrap())
                .collect(),
        )
        .unwrap();
        let policy = PolicySpec::WaitUcb.resolve(&RatioTable::build(&env));
        let mut state = PolicyState::for_env(&env);
        let mut pulls = vec![0usize; k];
        let mut got = Vec::with_capacity(UCB1_STEPS as usize);
        for s in 1..=UCB1_STEPS {
            let pair = policy.choose(&state);
            let arm = pair.arm - 1;
            let v = table[arm][pulls[arm]];
            pulls[arm] += 1;
            state.update(&EpochOutcome::resolve(s, pair, v, 1)).unwrap();
            got.push(arm);
        }
        if got != expected {
            mismatched += 1;
        }
    }
    (
        mismatched == 0,
        format!("{mismatched} of {UCB1_HISTORIES} histories diverge over {UCB1_STEPS} decisions"),
    )
}

fn pull_ceiling() -> (bool, String) {
    let s = scenario_mid_best().unwrap();
    let table = s.table();
    let mut pass = true;
    let mut lines = Vec::new();
    for budget in [10_000u64, 100_000] {
        let cfg = GameConfig::new(s.env.clone(), PolicySpec::WaitUcb, budget, SEED)
            .unwrap()
            .with_checkpoints(vec![budget])
            .unwrap();
        let results = run_many_results(&cfg, CEILING_RUNS);
        for pair in table.suboptimal_pairs() {
            let mean = results
                .iter()
                .map(|r| r.final_state.stats(pair).pulls as f64)
                .sum::<f64>()
                / CEILING_RUNS as f64;
            let ceiling = pull_count_ceiling(pair.wait, table.gap(pair), budget);
            let within = mean <= CEILING_SLACK * ceiling;
            pass &= within;
            lines.push(format!(
                "\n    T={budget} {pair}: mean pulls {mean:.1} vs ceiling {ceiling:.1} {}",
                ok(within)
            ));
        }
    }
    (pass, format!("slack x{CEILING_SLACK}{}", lines.concat()))
}

fn log_growth() -> (bool, String) {
    let s = scenario_mid_best().unwrap();
    let table = s.table();
    let ts = [1_000u64, 10_000, 100_000];
    let cfg = GameConfig::new(s.env, PolicySpec::WaitUcb, 100_000, SEED)
        .unwrap()
        .with_checkpoints(ts.to_vec())
        .unwrap();
    let agg = run_many(&cfg, LOG_FIT_RUNS);
    let pts: Vec<(u64, f64)> = ts.iter().map(|&t| (t, agg.mean_at(t).unwrap())).collect();
    let fit = fit_log_envelope(&pts);
    let r_final = pts[2].1;
    let coefficient: f64 = table
        .suboptimal_pairs()
        .map(|p| regret_log_coefficient(p.wait, table.mu_c(p), table.gap(p)))
        .sum();
    let pass = fit.max_residual <= LOG_FIT_MAX_RESIDUAL * r_final;
    (
        pass,
        format!(
            "mean regret {:.1} / {:.1} / {:.1} at T = 1e3 / 1e4 / 1e5; envelope C1 = {:.1}, C2 = {:.1}, \
             max residual {:.1} vs allowed {:.1}; bound log coefficient {:.1}",
            pts[0].1,
            pts[1].1,
            r_final,
            fit.c1,
            fit.c2,
            fit.max_residual,
            LOG_FIT_MAX_RESIDUAL * r_final,
            coefficient
        ),
    )
}

fn ordering() -> (bool, String) {
    let mut pass = true;
    let mut lines = Vec::new();
    for s in [scenario_doubling().unwrap(), scenario_mid_best().unwrap()] {
        let final_mean = |p: PolicySpec| {
            let cfg = GameConfig::new(s.env.clone(), p, ORDERING_BUDGET, SEED)
                .unwrap()
                .with_checkpoints(vec![ORDERING_BUDGET])
                .unwrap();
            run_many(&cfg, ORDERING_RUNS).final_mean()
        };
        let w = final_mean(PolicySpec::WaitUcb);
        let simplex = final_mean(PolicySpec::Baseline(BaselineKind::UcbSimplex));
        let budget = final_mean(PolicySpec::Baseline(BaselineKind::BudgetUcb));
        let ordered = w < simplex && w < budget;
        pass &= ordered;
        lines.push(format!(
            "\n    {}: wait-ucb {w:.1}, ucb-simplex {simplex:.1}, budget-ucb {budget:.1} {}",
            s.name,
            ok(ordered)
        ));
    }
    (
        pass,
        format!(
            "T={ORDERING_BUDGET}, runs={ORDERING_RUNS}{}",
            lines.concat()
        ),
    )
}

fn determinism() -> (bool, String) {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        run_suite(&SuiteOptions {
            scenarios: vec!["unit_delay_mab".into(), "mid_best".into()],
            budget: Some(20_000),
            runs: Some(5),
            seed: SEED,
            output: d.path().to_path_buf(),
            ..Default::default()
        })
        .unwrap();
    }
    let mut names: Vec<_> = fs::read_dir(dirs[0].path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    let identical = names
        .iter()
        .filter(|n| {
            fs::read(dirs[0].path().join(n)).unwrap() == fs::read(dirs[1].path().join(n)).unwrap()
        })
        .count();
    let csvs = names
        .iter()
        .filter(|n| n.to_string_lossy().ends_with(".csv"))
        .count();
    (
        identical == names.len() && csvs == 8,
        format!(
            "{identical} of {} files identical ({csvs} CSVs)",
            names.len()
        ),
    )
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "MISS"
    }
}
