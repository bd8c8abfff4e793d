//! The six scenario families: delay laws, tuning searches and frozen parameters.
//!
//! Scenario constructors never re-tune. They read the parameters frozen in
//! `configs/scenarios.json` and verify the realised minimal gap against the
//! target; the `tune_*` searches exist to regenerate (and test) those files.

use serde::{Deserialize, Serialize};

use crate::env::{Atom, EnvSpec, JointArmDistribution, RatioTable};
use crate::error::{Error, Result};
use crate::policies::{BaselineKind, PolicySpec};
use crate::simulator::log_checkpoints;

/// Allowed distance between a realised minimal gap and its target.
pub const GAP_MATCH_TOLERANCE: f64 = 1e-3;

pub const DEFAULT_BUDGET: u64 = 100_000;
pub const DEFAULT_RUNS: u64 = 10;

pub const SCENARIO_NAMES: [&str; 6] = [
    "doubling",
    "mid_best",
    "one_best",
    "unit_delay_mab",
    "ads_case1",
    "ads_case2",
];

const FROZEN_JSON: &str = include_str!("../../configs/scenarios.json");

/// Tuned family parameters, versioned alongside the code.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrozenParams {
    pub version: u32,
    pub doubling: DoublingParams,
    pub mid_best: MidBestParams,
    pub one_best: OneBestParams,
    pub ads: AdsParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoublingParams {
    pub target_gap: f64,
    /// `P(tau = d) ∝ rho^d` on `1..=D`.
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MidBestParams {
    pub target_gap: f64,
    /// Delays live on `1..=support`, `P(tau = d) ∝ exp(-(d - center)^2 / 2 sigma^2)`.
    pub support: usize,
    pub sigma: f64,
    pub center: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneBestParams {
    pub target_gap: f64,
    /// `P(tau = 1)`; the remaining mass sits at `D`.
    pub head_mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdsParams {
    /// Per-category `P(tau = d) ∝ rho_k^d` on `1..=D`.
    pub rho: [f64; 3],
    pub case1_success: [f64; 3],
    pub case2_success: [f64; 3],
}

impl FrozenParams {
    pub fn load_embedded() -> Self {
        serde_json::from_str(FROZEN_JSON).expect("embedded scenario parameters are valid JSON")
    }
}

/// A named environment plus its default experiment settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub name: String,
    /// Human-readable delay-family description with its parameters.
    pub family: String,
    pub env: EnvSpec,
    pub intended_gap: Option<f64>,
    pub budget: u64,
    pub runs: u64,
    pub checkpoints: Vec<u64>,
    pub policies: Vec<PolicySpec>,
}

impl ScenarioSpec {
    fn new(name: &str, family: String, env: EnvSpec, intended_gap: Option<f64>) -> Result<Self> {
        if let Some(target) = intended_gap {
            let realised = RatioTable::build(&env).min_positive_gap();
            match realised {
                Some(gap) if (gap - target).abs() <= GAP_MATCH_TOLERANCE => {}
                _ => {
                    return Err(Error::Config(format!(
                        "scenario {name}: realised minimal gap {realised:?} misses target {target}"
                    )))
                }
            }
        }
        Ok(Self {
            name: name.to_string(),
            family,
            env,
            intended_gap,
            budget: DEFAULT_BUDGET,
            runs: DEFAULT_RUNS,
            checkpoints: log_checkpoints(DEFAULT_BUDGET),
            policies: default_policies(),
        })
    }

    pub fn table(&self) -> RatioTable {
        RatioTable::build(&self.env)
    }
}

pub fn default_policies() -> Vec<PolicySpec> {
    vec![
        PolicySpec::WaitUcb,
        PolicySpec::Baseline(BaselineKind::UcbSimplex),
        PolicySpec::Baseline(BaselineKind::BudgetUcb),
        PolicySpec::Baseline(BaselineKind::UcbBv1),
    ]
}

pub fn scenario(name: &str) -> Result<ScenarioSpec> {
    match name {
        "doubling" => scenario_doubling(),
        "mid_best" => scenario_mid_best(),
        "one_best" => scenario_one_best(),
        "unit_delay_mab" => scenario_unit_delay_mab(),
        "ads_case1" => scenario_ads_case1(),
        "ads_case2" => scenario_ads_case2(),
        _ => Err(Error::Unknown {
            kind: "scenario",
            name: name.to_string(),
        }),
    }
}

// ---- delay families -------------------------------------------------------

/// `P(tau = d) ∝ rho^d` on `1..=n`.
pub fn geometric_law(rho: f64, n: usize) -> Vec<(usize, f64)> {
    normalise((1..=n).map(|d| (d, rho.powi(d as i32))).collect())
}

/// Discretised Gaussian on `1..=n`.
pub fn gaussian_law(center: f64, sigma: f64, n: usize) -> Vec<(usize, f64)> {
    normalise(
        (1..=n)
            .map(|d| {
                (
                    d,
                    (-(d as f64 - center).powi(2) / (2.0 * sigma * sigma)).exp(),
                )
            })
            .collect(),
    )
}

fn normalise(mut w: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    let total: f64 = w.iter().map(|x| x.1).sum();
    for x in &mut w {
        x.1 /= total;
    }
    w
}

fn reward_one_env(law: &[(usize, f64)], d: usize) -> Result<EnvSpec> {
    let atoms = law
        .iter()
        .filter(|x| x.1 > 0.0)
        .map(|&(delay, p)| Atom::new(1.0, delay, p))
        .collect();
    EnvSpec::new(vec![JointArmDistribution::new(atoms, d)?])
}

const SINGLE_ARM_D: usize = 10;

pub fn doubling_env(rho: f64) -> Result<EnvSpec> {
    reward_one_env(&geometric_law(rho, SINGLE_ARM_D), SINGLE_ARM_D)
}

pub fn mid_best_env(center: f64, sigma: f64, support: usize) -> Result<EnvSpec> {
    reward_one_env(&gaussian_law(center, sigma, support), SINGLE_ARM_D)
}

pub fn one_best_env(head_mass: f64) -> Result<EnvSpec> {
    reward_one_env(
        &[(1, head_mass), (SINGLE_ARM_D, 1.0 - head_mass)],
        SINGLE_ARM_D,
    )
}

const ADS_D: usize = 5;

pub fn ads_env(success: [f64; 3], rho: [f64; 3]) -> Result<EnvSpec> {
    let arms = success
        .iter()
        .zip(rho)
        .map(|(&p, r)| {
            JointArmDistribution::bernoulli_with_delays(p, &geometric_law(r, ADS_D), ADS_D)
        })
        .collect::<Result<Vec<_>>>()?;
    EnvSpec::new(arms)
}

// ---- tuning ---------------------------------------------------------------

fn min_gap(env: &EnvSpec) -> f64 {
    RatioTable::build(env).min_positive_gap().unwrap_or(0.0)
}

/// Bisection for `f(x) = target` with `f` increasing on `[lo, hi]`.
fn bisect_increasing(
    what: &str,
    f: impl Fn(f64) -> Result<f64>,
    (mut lo, mut hi): (f64, f64),
    target: f64,
) -> Result<f64> {
    let (f_lo, f_hi) = (f(lo)?, f(hi)?);
    if !(f_lo <= target && target <= f_hi) {
        return Err(Error::Config(format!(
            "{what}: target gap {target} outside the family's reachable range \
             [{f_lo:.6}, {f_hi:.6}] over parameter interval [{lo}, {hi}]"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn require_best_wait(what: &str, env: &EnvSpec, ok: impl Fn(usize) -> bool) -> Result<()> {
    let best = RatioTable::build(env).best;
    if ok(best.wait) {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "{what}: tuned optimum {best} has the wrong waiting time"
        )))
    }
}

/// Searches `rho` so the doubling family has minimal gap `target`.
/// Larger `rho` pushes mass towards long delays and widens the gap.
pub fn tune_doubling(target: f64) -> Result<f64> {
    let rho = bisect_increasing(
        "doubling",
        |r| doubling_env(r).map(|e| min_gap(&e)),
        (1.05, 3.0),
        target,
    )?;
    require_best_wait("doubling", &doubling_env(rho)?, |j| j > SINGLE_ARM_D / 2)?;
    Ok(rho)
}

/// Searches the Gaussian centre so the mid-best family has minimal gap
/// `target`. Delays stop at `support`, so every wait `j >= support` is
/// optimal and the first optimal wait is `support`.
pub fn tune_mid_best(target: f64, sigma: f64, support: usize) -> Result<f64> {
    let center = bisect_increasing(
        "mid_best",
        |c| mid_best_env(c, sigma, support).map(|e| min_gap(&e)),
        (3.0, 6.5),
        target,
    )?;
    require_best_wait("mid_best", &mid_best_env(center, sigma, support)?, |j| {
        (4..=6).contains(&j)
    })?;
    Ok(center)
}

/// Searches `P(tau = 1)` so the one-best family has minimal gap `target`.
/// The gap `q (1 - q) / (2 - q)` increases up to `q = 2 - sqrt 2`.
pub fn tune_one_best(target: f64) -> Result<f64> {
    let q = bisect_increasing(
        "one_best",
        |q| one_best_env(q).map(|e| min_gap(&e)),
        (0.05, 2.0 - std::f64::consts::SQRT_2),
        target,
    )?;
    require_best_wait("one_best", &one_best_env(q)?, |j| j == 1)?;
    Ok(q)
}

/// Re-runs every tuning search from the targets and fixed shape parameters
/// of `base`, returning parameters ready to be frozen.
pub fn retune(base: &FrozenParams) -> Result<FrozenParams> {
    let mut out = base.clone();
    out.doubling.rho = tune_doubling(base.doubling.target_gap)?;
    out.mid_best.center = tune_mid_best(
        base.mid_best.target_gap,
        base.mid_best.sigma,
        base.mid_best.support,
    )?;
    out.one_best.head_mass = tune_one_best(base.one_best.target_gap)?;
    Ok(out)
}

// ---- constructors ---------------------------------------------------------

pub fn scenario_doubling() -> Result<ScenarioSpec> {
    let p = FrozenParams::load_embedded().doubling;
    ScenarioSpec::new(
        "doubling",
        format!("V = 1; P(tau = d) ∝ rho^d on 1..=10, rho = {}", p.rho),
        doubling_env(p.rho)?,
        Some(p.target_gap),
    )
}

pub fn scenario_mid_best() -> Result<ScenarioSpec> {
    let p = FrozenParams::load_embedded().mid_best;
    ScenarioSpec::new(
        "mid_best",
        format!(
            "V = 1; P(tau = d) ∝ exp(-(d - {})^2 / (2 * {}^2)) on 1..={}, D = 10",
            p.center, p.sigma, p.support
        ),
        mid_best_env(p.center, p.sigma, p.support)?,
        Some(p.target_gap),
    )
}

pub fn scenario_one_best() -> Result<ScenarioSpec> {
    let p = FrozenParams::load_embedded().one_best;
    ScenarioSpec::new(
        "one_best",
        format!(
            "V = 1; P(tau = 1) = {}, remaining mass at tau = 10",
            p.head_mass
        ),
        one_best_env(p.head_mass)?,
        Some(p.target_gap),
    )
}

pub fn scenario_unit_delay_mab() -> Result<ScenarioSpec> {
    let arms = [0.5, 0.7, 1.0]
        .iter()
        .map(|&p| JointArmDistribution::bernoulli_with_delays(p, &[(1, 1.0)], ADS_D))
        .collect::<Result<Vec<_>>>()?;
    ScenarioSpec::new(
        "unit_delay_mab",
        "tau = 1; V ~ Bernoulli(0.5, 0.7, 1.0)".into(),
        EnvSpec::new(arms)?,
        None,
    )
}

fn ads(name: &str, success: [f64; 3], rho: [f64; 3]) -> Result<ScenarioSpec> {
    ScenarioSpec::new(
        name,
        format!(
            "V ~ Bernoulli({success:?}) independent of tau; P(tau = d) ∝ rho_k^d on 1..=5, rho = {rho:?}"
        ),
        ads_env(success, rho)?,
        None,
    )
}

pub fn scenario_ads_case1() -> Result<ScenarioSpec> {
    let p = FrozenParams::load_embedded().ads;
    ads("ads_case1", p.case1_success, p.rho)
}

pub fn scenario_ads_case2() -> Result<ScenarioSpec> {
    let p = FrozenParams::load_embedded().ads;
    ads("ads_case2", p.case2_success, p.rho)
}
