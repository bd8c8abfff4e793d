//! The budgeted game loop, regret trajectories and multi-run aggregation.

use rayon::prelude::*;
use serde::Serialize;

use crate::env::{ArmPair, EnvSpec, RatioTable};
use crate::error::{invalid_arg, Result};
use crate::policies::{Policy, PolicySpec, PolicyState};
use crate::rng::SimRng;

/// Log-spaced checkpoints `1, 2, 5, 10, 20, 50, …` below `budget`, then `budget`.
pub fn log_checkpoints(budget: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut decade = 1u64;
    'outer: loop {
        for m in [1, 2, 5] {
            let t = decade.saturating_mul(m);
            if t >= budget {
                break 'outer;
            }
            out.push(t);
        }
        decade = decade.saturating_mul(10);
    }
    out.push(budget);
    out
}

/// `n` evenly spaced checkpoints ending at `budget`.
pub fn linear_checkpoints(budget: u64, n: u64) -> Vec<u64> {
    let n = n.clamp(1, budget);
    let mut out: Vec<u64> = (1..=n).map(|i| budget * i / n).collect();
    out.dedup();
    out
}

/// Parses `log`, `lin:N` or an explicit comma list (which must end at `budget`).
pub fn parse_checkpoints(spec: &str, budget: u64) -> Result<Vec<u64>> {
    let spec = spec.trim();
    let cps = if spec == "log" {
        log_checkpoints(budget)
    } else if let Some(n) = spec.strip_prefix("lin:") {
        let n = n
            .parse()
            .map_err(|_| invalid_arg(format!("bad checkpoint count in `{spec}`")))?;
        linear_checkpoints(budget, n)
    } else {
        spec.split(',')
            .map(|t| {
                t.trim()
                    .parse::<u64>()
                    .map_err(|_| invalid_arg(format!("bad checkpoint `{t}`")))
            })
            .collect::<Result<Vec<_>>>()?
    };
    validate_checkpoints(&cps, budget)?;
    Ok(cps)
}

fn validate_checkpoints(cps: &[u64], budget: u64) -> Result<()> {
    if budget == 0 {
        return Err(invalid_arg("budget must be >= 1"));
    }
    if cps.first().is_none_or(|&t| t == 0) {
        return Err(invalid_arg("checkpoints must be non-empty and positive"));
    }
    if cps.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid_arg("checkpoints must be strictly increasing"));
    }
    if cps.last() != Some(&budget) {
        return Err(invalid_arg(format!(
            "last checkpoint must equal the budget {budget}"
        )));
    }
    Ok(())
}

/// One game: environment, policy, budget, seed and regret checkpoints.
#[derive(Debug, Clone)]
pub struct GameConfig {
    pub env: EnvSpec,
    pub policy: PolicySpec,
    pub budget: u64,
    pub seed: u64,
    checkpoints: Vec<u64>,
}

impl GameConfig {
    pub fn new(env: EnvSpec, policy: PolicySpec, budget: u64, seed: u64) -> Result<Self> {
        if budget == 0 {
            return Err(invalid_arg("budget must be >= 1"));
        }
        if let PolicySpec::Constant(p) = policy {
            env.check_pair(p)?;
        }
        Ok(Self {
            env,
            policy,
            budget,
            seed,
            checkpoints: log_checkpoints(budget),
        })
    }

    pub fn with_checkpoints(mut self, checkpoints: Vec<u64>) -> Result<Self> {
        validate_checkpoints(&checkpoints, self.budget)?;
        self.checkpoints = checkpoints;
        Ok(self)
    }

    pub fn checkpoints(&self) -> &[u64] {
        &self.checkpoints
    }
}

/// State of a run at budget checkpoint `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryPoint {
    pub t: u64,
    /// Epochs whose cumulative consumption is at most `t`.
    pub epochs: u64,
    /// Reward collected by those epochs.
    pub reward: f64,
    /// `t g* - reward`.
    pub pseudo_regret: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegretTrajectory {
    pub points: Vec<TrajectoryPoint>,
}

impl RegretTrajectory {
    pub fn at(&self, t: u64) -> Option<&TrajectoryPoint> {
        self.points.iter().find(|p| p.t == t)
    }

    pub fn last(&self) -> &TrajectoryPoint {
        self.points.last().expect("trajectories are never empty")
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    /// Epochs started before the budget ran out, including a final epoch
    /// that overshoots the budget.
    pub epochs_played: u64,
    /// Reward of all played epochs, the overshooting one included.
    pub total_reward: f64,
    /// Rounds consumed by all played epochs; in `[T, T + D)`.
    pub consumed: u64,
    /// Consumption of the final epoch.
    pub last_consumption: u64,
    pub trajectory: RegretTrajectory,
    pub final_state: PolicyState,
}

impl RunResult {
    /// Last epoch that fits in the budget: `max{n : S_n <= T}`.
    pub fn epochs_within_budget(&self) -> u64 {
        self.trajectory.last().epochs
    }

    pub fn reward_within_budget(&self) -> f64 {
        self.trajectory.last().reward
    }
}

/// Plays one game on stream 0 of `cfg.seed`.
pub fn run_game(cfg: &GameConfig) -> RunResult {
    let table = RatioTable::build(&cfg.env);
    play(cfg, &table, 0)
}

fn play(cfg: &GameConfig, table: &RatioTable, stream: u64) -> RunResult {
    let policy: Policy = cfg.policy.resolve(table);
    let env = &cfg.env;
    let g_star = table.best_value;
    let cps = &cfg.checkpoints;
    let mut rng = SimRng::stream(cfg.seed, stream);
    let mut state = PolicyState::for_env(env);
    let mut points = Vec::with_capacity(cps.len());
    let mut next_cp = 0;
    let mut consumed = 0u64;
    let mut reward = 0.0;
    let mut last_consumption = 0;

    let record = |t: u64, epochs: u64, reward: f64| TrajectoryPoint {
        t,
        epochs,
        reward,
        pseudo_regret: t as f64 * g_star - reward,
    };

    while consumed < cfg.budget {
        let pair = policy.choose(&state);
        let outcome = env.sample_epoch(pair, state.epochs() + 1, &mut rng);
        let after = consumed + outcome.consumed;
        while next_cp < cps.len() && cps[next_cp] < after {
            points.push(record(cps[next_cp], state.epochs(), reward));
            next_cp += 1;
        }
        consumed = after;
        reward += outcome.reward;
        last_consumption = outcome.consumed;
        state
            .update(&outcome)
            .expect("policies only select pairs of their own environment");
    }
    for &t in &cps[next_cp..] {
        points.push(record(t, state.epochs(), reward));
    }

    RunResult {
        epochs_played: state.epochs(),
        total_reward: reward,
        consumed,
        last_consumption,
        trajectory: RegretTrajectory { points },
        final_state: state,
    }
}

/// Plays `runs` independent games; run `r` uses stream `r` of `cfg.seed`.
/// Runs execute in parallel and are returned in run order.
pub fn run_many_results(cfg: &GameConfig, runs: u64) -> Vec<RunResult> {
    let table = RatioTable::build(&cfg.env);
    (0..runs)
        .into_par_iter()
        .map(|r| play(cfg, &table, r))
        .collect()
}

/// Per-checkpoint regret statistics over runs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateResult {
    pub checkpoints: Vec<u64>,
    pub mean: Vec<f64>,
    /// Population standard deviation over runs.
    pub std: Vec<f64>,
    pub run_count: u64,
    pub trajectories: Vec<RegretTrajectory>,
}

impl AggregateResult {
    pub fn from_runs(results: &[RunResult]) -> Self {
        assert!(!results.is_empty(), "aggregating zero runs");
        let checkpoints: Vec<u64> = results[0].trajectory.points.iter().map(|p| p.t).collect();
        let n = results.len() as f64;
        let mut mean = vec![0.0; checkpoints.len()];
        let mut std = vec![0.0; checkpoints.len()];
        for (i, m) in mean.iter_mut().enumerate() {
            *m = results
                .iter()
                .map(|r| r.trajectory.points[i].pseudo_regret)
                .sum::<f64>()
                / n;
        }
        for (i, s) in std.iter_mut().enumerate() {
            let var = results
                .iter()
                .map(|r| (r.trajectory.points[i].pseudo_regret - mean[i]).powi(2))
                .sum::<f64>()
                / n;
            *s = var.sqrt();
        }
        Self {
            checkpoints,
            mean,
            std,
            run_count: results.len() as u64,
            trajectories: results.iter().map(|r| r.trajectory.clone()).collect(),
        }
    }

    pub fn mean_at(&self, t: u64) -> Option<f64> {
        self.checkpoints
            .iter()
            .position(|&c| c == t)
            .map(|i| self.mean[i])
    }

    pub fn final_mean(&self) -> f64 {
        *self.mean.last().expect("non-empty")
    }

    pub fn final_std(&self) -> f64 {
        *self.std.last().expect("non-empty")
    }
}

pub fn run_many(cfg: &GameConfig, runs: u64) -> AggregateResult {
    assert!(runs >= 1, "runs must be >= 1");
    AggregateResult::from_runs(&run_many_results(cfg, runs))
}

/// Mean and standard error (sample deviation over `sqrt(n)`).
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Constant-pair audit: empirical totals versus their exact bands.
#[derive(Debug, Clone, Serialize)]
pub struct AuditReport {
    pub pair: ArmPair,
    pub budget: u64,
    pub runs: u64,
    pub g: f64,
    pub mu_r: f64,
    pub mu_c: f64,
    /// Mean reward of the epochs that fit in the budget.
    pub mean_reward: f64,
    pub se_reward: f64,
    /// `[T g, T g + j]`.
    pub reward_band: (f64, f64),
    /// Mean of `max{n : S_n <= T}`.
    pub mean_epochs: f64,
    pub se_epochs: f64,
    /// `((T - j) / mu_c, T / mu_c]`.
    pub epoch_band: (f64, f64),
    /// `mean_reward - T g`, the empirical residual constant.
    pub residual: f64,
    /// Mean of `total_reward - epochs_played * mu_r` over runs, with its
    /// standard error. `epochs_played` is a stopping time, so this is zero in
    /// expectation.
    pub wald_gap: f64,
    pub wald_se: f64,
    pub reward_ok: bool,
    pub epochs_ok: bool,
    pub wald_ok: bool,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.reward_ok && self.epochs_ok && self.wald_ok
    }
}

/// Plays the constant policy on `pair` for `runs` runs and compares the
/// reward and stopping-time averages with their bands, allowing 3 standard
/// errors of slack on each side.
pub fn audit_constant_policy(
    env: &EnvSpec,
    pair: ArmPair,
    budget: u64,
    runs: u64,
    seed: u64,
) -> Result<AuditReport> {
    env.check_pair(pair)?;
    if budget < env.max_delay() as u64 {
        return Err(invalid_arg(format!(
            "audit budget {budget} below maximum delay {}",
            env.max_delay()
        )));
    }
    if runs == 0 {
        return Err(invalid_arg("runs must be >= 1"));
    }
    let cfg = GameConfig::new(env.clone(), PolicySpec::Constant(pair), budget, seed)?
        .with_checkpoints(vec![budget])?;
    let table = RatioTable::build(env);
    let (g, mu_r, mu_c) = (table.g(pair), table.mu_r(pair), table.mu_c(pair));
    let results = run_many_results(&cfg, runs);

    let rewards: Vec<f64> = results
        .iter()
        .map(RunResult::reward_within_budget)
        .collect();
    let epochs: Vec<f64> = results
        .iter()
        .map(|r| r.epochs_within_budget() as f64)
        .collect();
    let wald: Vec<f64> = results
        .iter()
        .map(|r| r.total_reward - r.epochs_played as f64 * mu_r)
        .collect();
    let (mean_reward, se_reward) = mean_and_se(&rewards);
    let (mean_epochs, se_epochs) = mean_and_se(&epochs);
    let (wald_gap, wald_se) = mean_and_se(&wald);

    let t = budget as f64;
    let j = pair.wait as f64;
    let reward_band = (t * g, t * g + j);
    let epoch_band = ((t - j) / mu_c, t / mu_c);
    // slack absorbs floating-point noise on deterministic settings
    let tol = 1e-9 * t;
    let reward_ok = mean_reward >= reward_band.0 - 3.0 * se_reward - tol
        && mean_reward <= reward_band.1 + 3.0 * se_reward + tol;
    let epochs_ok = mean_epochs > epoch_band.0 - 3.0 * se_epochs - tol
        && mean_epochs <= epoch_band.1 + 3.0 * se_epochs + tol;
    let wald_ok = wald_gap.abs() <= 3.0 * wald_se + tol;

    Ok(AuditReport {
        pair,
        budget,
        runs,
        g,
        mu_r,
        mu_c,
        mean_reward,
        se_reward,
        reward_band,
        mean_epochs,
        se_epochs,
        epoch_band,
        residual: mean_reward - t * g,
        wald_gap,
        wald_se,
        reward_ok,
        epochs_ok,
        wald_ok,
    })
}

/// Tightest line `c1 ln T + c2` lying on or above every `(T, R)` point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogRegretFit {
    pub c1: f64,
    pub c2: f64,
    /// Largest vertical distance between the line and a point.
    pub max_residual: f64,
}

/// Minimises the largest residual `c1 ln T + c2 - R >= 0` over `c1 >= 0`.
/// The optimum sits at slope zero or at the slope through two of the points.
pub fn fit_log_envelope(points: &[(u64, f64)]) -> LogRegretFit {
    assert!(!points.is_empty(), "nothing to fit");
    let xs: Vec<(f64, f64)> = points.iter().map(|&(t, r)| ((t as f64).ln(), r)).collect();
    let mut slopes = vec![0.0];
    for (i, a) in xs.iter().enumerate() {
        for b in &xs[i + 1..] {
            if b.0 != a.0 {
                let m = (b.1 - a.1) / (b.0 - a.0);
                if m > 0.0 {
                    slopes.push(m);
                }
            }
        }
    }
    slopes
        .into_iter()
        .map(|m| {
            let shifted = xs.iter().map(|&(x, r)| r - m * x);
            let hi = shifted.clone().fold(f64::NEG_INFINITY, f64::max);
            let lo = shifted.fold(f64::INFINITY, f64::min);
            LogRegretFit {
                c1: m,
                c2: hi,
                max_residual: hi - lo,
            }
        })
        .min_by(|a, b| a.max_residual.total_cmp(&b.max_residual))
        .expect("slope zero is always a candidate")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{Atom, JointArmDistribution};

    fn det_env(v: f64, tau: usize, d: usize) -> EnvSpec {
        EnvSpec::new(vec![JointArmDistribution::point(v, tau, d).unwrap()]).unwrap()
    }

    #[test]
    fn log_checkpoints_shape() {
        assert_eq!(log_checkpoints(1), vec![1]);
        assert_eq!(log_checkpoints(100), vec![1, 2, 5, 10, 20, 50, 100]);
        assert_eq!(log_checkpoints(150), vec![1, 2, 5, 10, 20, 50, 100, 150]);
    }

    #[test]
    fn checkpoint_parsing() {
        assert_eq!(
            parse_checkpoints("lin:4", 100).unwrap(),
            vec![25, 50, 75, 100]
        );
        assert_eq!(parse_checkpoints("10, 100", 100).unwrap(), vec![10, 100]);
        assert!(parse_checkpoints("10,5,100", 100).is_err());
        assert!(parse_checkpoints("10,50", 100).is_err());
        assert!(parse_checkpoints("0,100", 100).is_err());
        assert!(parse_checkpoints("x", 100).is_err());
    }

    #[test]
    fn deterministic_constant_trace() {
        let env = det_env(1.0, 2, 2);
        let cfg = GameConfig::new(env, PolicySpec::Constant(ArmPair::new(1, 2)), 10, 0).unwrap();
        let r = run_game(&cfg);
        assert_eq!(r.epochs_played, 5);
        assert_eq!(r.total_reward, 5.0);
        assert_eq!(r.trajectory.last().pseudo_regret, 0.0);
        // t = 5: two epochs (S = 2, 4) fit
        let p = r.trajectory.at(5).unwrap();
        assert_eq!((p.epochs, p.reward), (2, 2.0));
        assert_eq!(p.pseudo_regret, 0.5);
    }

    #[test]
    fn overshooting_epoch_completes() {
        let env = det_env(1.0, 2, 2);
        let cfg = GameConfig::new(env, PolicySpec::Constant(ArmPair::new(1, 2)), 11, 0).unwrap();
        let r = run_game(&cfg);
        assert_eq!(r.epochs_played, 6);
        assert_eq!(r.consumed, 12);
        assert_eq!(r.total_reward, 6.0);
        assert_eq!(r.epochs_within_budget(), 5);
        assert_eq!(r.reward_within_budget(), 5.0);
    }

    #[test]
    fn all_optimal_env_has_zero_regret() {
        let env = EnvSpec::new(vec![
            JointArmDistribution::point(1.0, 1, 3).unwrap(),
            JointArmDistribution::point(1.0, 1, 3).unwrap(),
        ])
        .unwrap();
        for policy in ["wait-ucb", "ucb-simplex", "budget-ucb", "ucb-bv1", "oracle"] {
            let cfg = GameConfig::new(env.clone(), policy.parse().unwrap(), 500, 1).unwrap();
            let r = run_game(&cfg);
            assert!(r.trajectory.points.iter().all(|p| p.pseudo_regret == 0.0));
        }
    }

    #[test]
    fn unit_budget_plays_one_epoch() {
        let env = EnvSpec::new(vec![JointArmDistribution::new(
            vec![Atom::new(1.0, 1, 0.5), Atom::new(0.5, 4, 0.5)],
            4,
        )
        .unwrap()])
        .unwrap();
        for seed in 0..20 {
            let cfg = GameConfig::new(env.clone(), PolicySpec::WaitUcb, 1, seed).unwrap();
            assert_eq!(run_game(&cfg).epochs_played, 1);
        }
    }

    #[test]
    fn run_many_single_run_matches_run_game() {
        let env = EnvSpec::new(vec![JointArmDistribution::new(
            vec![Atom::new(1.0, 1, 0.3), Atom::new(1.0, 3, 0.7)],
            3,
        )
        .unwrap()])
        .unwrap();
        let cfg = GameConfig::new(env, PolicySpec::WaitUcb, 2_000, 9).unwrap();
        let single = run_game(&cfg);
        let agg = run_many(&cfg, 1);
        let means: Vec<f64> = single
            .trajectory
            .points
            .iter()
            .map(|p| p.pseudo_regret)
            .collect();
        assert_eq!(agg.mean, means);
        assert!(agg.std.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn deterministic_env_has_zero_spread() {
        let cfg = GameConfig::new(det_env(0.5, 2, 3), PolicySpec::WaitUcb, 300, 4).unwrap();
        let agg = run_many(&cfg, 6);
        assert!(agg.std.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn audit_deterministic_trace() {
        let rep =
            audit_constant_policy(&det_env(1.0, 2, 2), ArmPair::new(1, 2), 100, 3, 0).unwrap();
        assert_eq!(rep.mean_reward, 50.0);
        assert_eq!(rep.reward_band, (50.0, 52.0));
        assert_eq!(rep.mean_epochs, 50.0);
        assert_eq!(rep.epoch_band, (49.0, 50.0));
        assert!(rep.passed());
    }

    #[test]
    fn audit_rejects_bad_inputs() {
        let env = det_env(1.0, 2, 4);
        assert!(audit_constant_policy(&env, ArmPair::new(1, 5), 100, 3, 0).is_err());
        assert!(audit_constant_policy(&env, ArmPair::new(1, 2), 3, 3, 0).is_err());
        assert!(audit_constant_policy(&env, ArmPair::new(1, 2), 100, 0, 0).is_err());
    }

    #[test]
    fn log_fit_exact_on_log_curve() {
        let pts: Vec<(u64, f64)> = [1_000u64, 10_000, 100_000]
            .iter()
            .map(|&t| (t, 3.0 * (t as f64).ln() + 7.0))
            .collect();
        let fit = fit_log_envelope(&pts);
        assert!((fit.c1 - 3.0).abs() < 1e-9 && (fit.c2 - 7.0).abs() < 1e-9);
        assert!(fit.max_residual < 1e-9);
    }

    #[test]
    fn log_fit_linear_growth_has_large_residual() {
        let pts = [(1_000u64, 1.0), (10_000, 10.0), (100_000, 100.0)];
        let fit = fit_log_envelope(&pts);
        // Chebyshev residual of three equally spaced points: |R1 - 2R2 + R3| / 2
        assert!((fit.max_residual - 40.5).abs() < 1e-9, "{fit:?}");
        for &(t, r) in &pts {
            assert!(fit.c1 * (t as f64).ln() + fit.c2 - r >= -1e-9);
        }
    }
}
