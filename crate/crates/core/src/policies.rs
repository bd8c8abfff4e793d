//! Decision rules: Wait-UCB, the constant-pair policy and three budgeted-bandit
//! baselines. Every policy is a deterministic function of [`PolicyState`].

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::env::{ArmPair, EnvSpec, EpochOutcome, RatioTable};
use crate::error::{invalid_arg, Error, Result};
use crate::estimators::{DeviationParams, PairStats};

/// Per-pair statistics and the number of completed epochs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolicyState {
    num_arms: usize,
    max_delay: usize,
    stats: Vec<PairStats>,
    epochs: u64,
    #[serde(skip)]
    params: Vec<DeviationParams>,
}

impl PolicyState {
    pub fn new(num_arms: usize, max_delay: usize) -> Self {
        assert!(num_arms >= 1 && max_delay >= 1, "empty arm set");
        Self {
            num_arms,
            max_delay,
            stats: vec![PairStats::default(); num_arms * max_delay],
            epochs: 0,
            params: DeviationParams::table(max_delay),
        }
    }

    pub fn for_env(env: &EnvSpec) -> Self {
        Self::new(env.num_arms(), env.max_delay())
    }

    pub fn num_arms(&self) -> usize {
        self.num_arms
    }

    pub fn max_delay(&self) -> usize {
        self.max_delay
    }

    /// Completed epochs `s`.
    pub fn epochs(&self) -> u64 {
        self.epochs
    }

    pub fn params(&self, wait: usize) -> DeviationParams {
        self.params[wait - 1]
    }

    #[inline]
    fn slot(&self, pair: ArmPair) -> usize {
        (pair.arm - 1) * self.max_delay + (pair.wait - 1)
    }

    #[inline]
    fn pair_at(&self, slot: usize) -> ArmPair {
        ArmPair::new(slot / self.max_delay + 1, slot % self.max_delay + 1)
    }

    pub fn stats(&self, pair: ArmPair) -> &PairStats {
        &self.stats[self.slot(pair)]
    }

    /// Pull counts indexed `[k-1][j-1]`.
    pub fn pull_counts(&self) -> Vec<Vec<u64>> {
        self.stats
            .chunks(self.max_delay)
            .map(|row| row.iter().map(|s| s.pulls).collect())
            .collect()
    }

    pub fn total_pulls(&self) -> u64 {
        self.stats.iter().map(|s| s.pulls).sum()
    }

    /// Folds one epoch's outcome into the statistics of its pair.
    pub fn update(&mut self, outcome: &EpochOutcome) -> Result<()> {
        let pair = ArmPair::checked(
            outcome.pair.arm,
            outcome.pair.wait,
            self.num_arms,
            self.max_delay,
        )?;
        let slot = self.slot(pair);
        self.stats[slot].record(outcome.reward, outcome.consumed);
        self.epochs += 1;
        Ok(())
    }
}

/// A selected pair plus the index of every pair at decision time,
/// indexed `[k-1][j-1]`. Constant policies leave the snapshot empty.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyDecision {
    pub pair: ArmPair,
    pub index_values: Vec<Vec<f64>>,
}

/// Budgeted-bandit baselines run on consumptions rescaled to `{1/D, …, 1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum BaselineKind {
    UcbSimplex,
    BudgetUcb,
    UcbBv1,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 3] = [Self::UcbSimplex, Self::BudgetUcb, Self::UcbBv1];

    pub fn name(self) -> &'static str {
        match self {
            Self::UcbSimplex => "ucb-simplex",
            Self::BudgetUcb => "budget-ucb",
            Self::UcbBv1 => "ucb-bv1",
        }
    }
}

impl FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s.trim())
            .ok_or_else(|| invalid_arg(format!("unknown baseline `{s}`")))
    }
}

/// A policy ready to play.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Policy {
    WaitUcb,
    Baseline(BaselineKind),
    Constant(ArmPair),
}

/// A policy as named on the command line. `Oracle` becomes the constant
/// policy on the environment's best pair once a [`RatioTable`] is known.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum PolicySpec {
    WaitUcb,
    Baseline(BaselineKind),
    Constant(ArmPair),
    Oracle,
}

impl PolicySpec {
    pub fn resolve(self, table: &RatioTable) -> Policy {
        match self {
            Self::WaitUcb => Policy::WaitUcb,
            Self::Baseline(b) => Policy::Baseline(b),
            Self::Constant(p) => Policy::Constant(p),
            Self::Oracle => Policy::Constant(table.best),
        }
    }

    /// Label used in file names and summaries.
    pub fn label(self) -> String {
        match self {
            Self::WaitUcb => "wait-ucb".into(),
            Self::Baseline(b) => b.name().into(),
            Self::Constant(p) => format!("constant-{}-{}", p.arm, p.wait),
            Self::Oracle => "oracle".into(),
        }
    }

    /// Parses a comma-separated list such as `wait-ucb,budget-ucb,constant:1,3`.
    /// The two indices of `constant:k,j` keep their comma.
    pub fn parse_list(s: &str) -> Result<Vec<Self>> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let mut out = Vec::new();
        let mut i = 0;
        while i < parts.len() {
            let part = parts[i];
            if let Some(rest) = part.strip_prefix("constant:") {
                let j = parts
                    .get(i + 1)
                    .ok_or_else(|| invalid_arg("`constant:` needs `k,j`"))?;
                out.push(format!("constant:{rest},{j}").parse()?);
                i += 2;
            } else {
                out.push(part.parse()?);
                i += 1;
            }
        }
        if out.is_empty() {
            return Err(invalid_arg("empty policy list"));
        }
        Ok(out)
    }
}

impl fmt::Display for PolicySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for PolicySpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "wait-ucb" => Ok(Self::WaitUcb),
            "oracle" => Ok(Self::Oracle),
            _ => {
                if let Some(pair) = s.strip_prefix("constant:") {
                    return Ok(Self::Constant(pair.parse()?));
                }
                s.parse::<BaselineKind>()
                    .map(Self::Baseline)
                    .map_err(|_| Error::Unknown {
                        kind: "policy",
                        name: s.to_string(),
                    })
            }
        }
    }
}

/// Per-decision quantities shared by all pairs.
struct IndexContext {
    /// `log s`, `s` = completed epochs.
    log_s: f64,
    /// `log(s + 1)`: the current epoch's index.
    log_next: f64,
    max_delay: f64,
    lambda: f64,
}

impl IndexContext {
    fn new(state: &PolicyState) -> Self {
        let s = state.epochs as f64;
        let max_delay = state.max_delay as f64;
        Self {
            log_s: if s >= 1.0 { s.ln() } else { 0.0 },
            log_next: (s + 1.0).ln(),
            max_delay,
            lambda: 1.0 / max_delay,
        }
    }
}

impl Policy {
    /// Pair to play next.
    #[inline]
    pub fn choose(&self, state: &PolicyState) -> ArmPair {
        match *self {
            Policy::Constant(p) => p,
            _ => {
                let ctx = IndexContext::new(state);
                let mut best = 0;
                let mut best_val = f64::NEG_INFINITY;
                for slot in 0..state.stats.len() {
                    // unpulled pairs are tried first, in order, even when a
                    // baseline already gives a pulled pair an infinite index
                    if state.stats[slot].pulls == 0 {
                        return state.pair_at(slot);
                    }
                    let v = self.index(state, &ctx, slot);
                    if v > best_val {
                        best_val = v;
                        best = slot;
                    }
                }
                state.pair_at(best)
            }
        }
    }

    /// Pair to play next together with every pair's index.
    pub fn select(&self, state: &PolicyState) -> PolicyDecision {
        if let Policy::Constant(p) = *self {
            return PolicyDecision {
                pair: p,
                index_values: Vec::new(),
            };
        }
        let ctx = IndexContext::new(state);
        let flat: Vec<f64> = (0..state.stats.len())
            .map(|slot| self.index(state, &ctx, slot))
            .collect();
        let best = state
            .stats
            .iter()
            .position(|st| st.pulls == 0)
            .unwrap_or_else(|| argmax_first(&flat));
        PolicyDecision {
            pair: state.pair_at(best),
            index_values: flat.chunks(state.max_delay).map(<[f64]>::to_vec).collect(),
        }
    }

    #[inline]
    fn index(&self, state: &PolicyState, ctx: &IndexContext, slot: usize) -> f64 {
        let st = &state.stats[slot];
        if st.pulls == 0 {
            return f64::INFINITY;
        }
        match *self {
            Policy::WaitUcb => {
                let wait = slot % state.max_delay;
                let ratio = st.reward_sum / st.time_sum as f64;
                ratio + state.params[wait].radius_at_log(ctx.log_s, st.pulls)
            }
            Policy::Baseline(kind) => baseline_index(kind, st, ctx),
            Policy::Constant(_) => unreachable!("constant policies have no index"),
        }
    }
}

/// Index of a pulled pair under a baseline. Rewards are used as observed,
/// consumptions are divided by `D`; `n` is the pair's pull count.
///
/// * UCB-Simplex (single resource): `min(r + e, 1) / (c - e)`, `+inf` when
///   `c <= e`, with `e = sqrt(2 log(s+1) / n)`.
/// * Budget-UCB: `r/c + (e/c) (1 + min(r + e, 1) / max(c - e, lambda))`,
///   with `e = sqrt(log s / n)`.
/// * UCB-BV1: `r/c + (1 + 1/lambda) e / (lambda - e)`, `+inf` when
///   `e >= lambda`, with `e = sqrt(log s / n)`.
///
/// `lambda = 1/D` lower-bounds every rescaled mean consumption.
#[inline]
fn baseline_index(kind: BaselineKind, st: &PairStats, ctx: &IndexContext) -> f64 {
    let n = st.pulls as f64;
    let r = st.reward_sum / n;
    let c = st.time_sum as f64 / (n * ctx.max_delay);
    match kind {
        BaselineKind::UcbSimplex => {
            let e = (2.0 * ctx.log_next / n).sqrt();
            let denom = c - e;
            if denom <= 0.0 {
                f64::INFINITY
            } else {
                (r + e).min(1.0) / denom
            }
        }
        BaselineKind::BudgetUcb => {
            let e = (ctx.log_s / n).sqrt();
            r / c + (e / c) * (1.0 + (r + e).min(1.0) / (c - e).max(ctx.lambda))
        }
        BaselineKind::UcbBv1 => {
            let e = (ctx.log_s / n).sqrt();
            if e >= ctx.lambda {
                f64::INFINITY
            } else {
                r / c + (1.0 + 1.0 / ctx.lambda) * e / (ctx.lambda - e)
            }
        }
    }
}

/// Position of the first maximum.
pub fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}
