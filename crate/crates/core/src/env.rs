//! Environment model: arm pairs, finite-support joint reward/delay laws,
//! exact per-pair moments and epoch sampling.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, Error, Result};
use crate::rng::SimRng;

/// Probabilities of a distribution must sum to one within this tolerance.
pub const PROB_SUM_TOLERANCE: f64 = 1e-12;

/// Gaps at or below this value are treated as ties.
pub const GAP_TIE_TOLERANCE: f64 = 1e-12;

/// A macro-arm / micro-arm pair `(k, j)`, both 1-based.
///
/// `arm` selects the macro-arm, `wait` is the committed waiting time in rounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ArmPair {
    pub arm: usize,
    pub wait: usize,
}

impl ArmPair {
    pub const fn new(arm: usize, wait: usize) -> Self {
        Self { arm, wait }
    }

    /// Checked constructor against an arm count `k` and maximum delay `d`.
    pub fn checked(arm: usize, wait: usize, k: usize, d: usize) -> Result<Self> {
        if arm == 0 || arm > k {
            return Err(invalid_arg(format!("macro-arm {arm} outside [1, {k}]")));
        }
        if wait == 0 || wait > d {
            return Err(invalid_arg(format!("waiting time {wait} outside [1, {d}]")));
        }
        Ok(Self { arm, wait })
    }
}

impl fmt::Display for ArmPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.arm, self.wait)
    }
}

impl FromStr for ArmPair {
    type Err = Error;

    /// Parses `k,j` (parentheses optional).
    fn from_str(s: &str) -> Result<Self> {
        let trimmed = s.trim().trim_start_matches('(').trim_end_matches(')');
        let (a, b) = trimmed
            .split_once(',')
            .ok_or_else(|| invalid_arg(format!("expected `k,j`, got `{s}`")))?;
        let arm = a
            .trim()
            .parse()
            .map_err(|_| invalid_arg(format!("bad macro-arm index in `{s}`")))?;
        let wait = b
            .trim()
            .parse()
            .map_err(|_| invalid_arg(format!("bad waiting time in `{s}`")))?;
        if arm == 0 || wait == 0 {
            return Err(invalid_arg(format!("indices are 1-based, got `{s}`")));
        }
        Ok(Self { arm, wait })
    }
}

/// One support point of a joint law: potential reward `v`, delay `d`, mass `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    #[serde(rename = "v")]
    pub value: f64,
    #[serde(rename = "d")]
    pub delay: usize,
    #[serde(rename = "p")]
    pub prob: f64,
}

impl Atom {
    pub const fn new(value: f64, delay: usize, prob: f64) -> Self {
        Self { value, delay, prob }
    }
}

/// Finite-support joint law of (potential reward, delay) for one macro-arm.
#[derive(Debug, Clone, PartialEq)]
pub struct JointArmDistribution {
    atoms: Vec<Atom>,
    max_delay: usize,
    cumulative: Vec<f64>,
}

impl JointArmDistribution {
    /// Validates and canonicalises `atoms`: atoms with identical `(v, d)` are
    /// merged and the support is sorted by delay, then reward.
    pub fn new(atoms: Vec<Atom>, max_delay: usize) -> Result<Self> {
        if max_delay == 0 {
            return Err(Error::InvalidDistribution(
                "maximum delay must be >= 1".into(),
            ));
        }
        if atoms.is_empty() {
            return Err(Error::InvalidDistribution("empty support".into()));
        }
        for a in &atoms {
            if !(0.0..=1.0).contains(&a.value) {
                return Err(Error::InvalidDistribution(format!(
                    "reward {} outside [0, 1]",
                    a.value
                )));
            }
            if a.delay == 0 || a.delay > max_delay {
                return Err(Error::InvalidDistribution(format!(
                    "delay {} outside [1, {max_delay}]",
                    a.delay
                )));
            }
            if !(a.prob > 0.0 && a.prob <= 1.0) {
                return Err(Error::InvalidDistribution(format!(
                    "probability {} outside (0, 1]",
                    a.prob
                )));
            }
        }
        let total: f64 = atoms.iter().map(|a| a.prob).sum();
        if (total - 1.0).abs() > PROB_SUM_TOLERANCE {
            return Err(Error::InvalidDistribution(format!(
                "probabilities sum to {total}, expected 1"
            )));
        }

        let mut sorted = atoms;
        sorted.sort_by(|a, b| a.delay.cmp(&b.delay).then(a.value.total_cmp(&b.value)));
        let mut merged: Vec<Atom> = Vec::with_capacity(sorted.len());
        for a in sorted {
            match merged.last_mut() {
                Some(last) if last.delay == a.delay && last.value == a.value => last.prob += a.prob,
                _ => merged.push(a),
            }
        }
        let cumulative = merged
            .iter()
            .scan(0.0, |acc, a| {
                *acc += a.prob;
                Some(*acc)
            })
            .collect();
        Ok(Self {
            atoms: merged,
            max_delay,
            cumulative,
        })
    }

    /// Deterministic reward `v` arriving after exactly `d` rounds.
    pub fn point(value: f64, delay: usize, max_delay: usize) -> Result<Self> {
        Self::new(vec![Atom::new(value, delay, 1.0)], max_delay)
    }

    /// Independent product of a Bernoulli(`success`) reward and a delay law
    /// given as `(delay, mass)` pairs.
    pub fn bernoulli_with_delays(
        success: f64,
        delays: &[(usize, f64)],
        max_delay: usize,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&success) {
            return Err(invalid_arg(format!(
                "success probability {success} outside [0, 1]"
            )));
        }
        let mut atoms = Vec::with_capacity(2 * delays.len());
        for &(d, p) in delays {
            if p <= 0.0 {
                continue;
            }
            if success > 0.0 {
                atoms.push(Atom::new(1.0, d, success * p));
            }
            if success < 1.0 {
                atoms.push(Atom::new(0.0, d, (1.0 - success) * p));
            }
        }
        Self::new(atoms, max_delay)
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn max_delay(&self) -> usize {
        self.max_delay
    }

    /// Marginal law of the delay, indexed `d - 1`.
    pub fn delay_marginal(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.max_delay];
        for a in &self.atoms {
            out[a.delay - 1] += a.prob;
        }
        out
    }

    /// Exact `(mu_r, mu_c)` for waiting time `wait`: the mean one-pull reward
    /// `E[V 1{tau <= j}]` and the mean consumption `E[min(tau, j)]`.
    pub fn exact_moments(&self, wait: usize) -> Result<(f64, f64)> {
        if wait == 0 || wait > self.max_delay {
            return Err(invalid_arg(format!(
                "waiting time {wait} outside [1, {}]",
                self.max_delay
            )));
        }
        let (mut mu_r, mut mu_c) = (0.0, 0.0);
        for a in &self.atoms {
            if a.delay <= wait {
                mu_r += a.prob * a.value;
            }
            mu_c += a.prob * a.delay.min(wait) as f64;
        }
        Ok((mu_r, mu_c))
    }

    /// Draws `(V, tau)` with one uniform variate.
    #[inline]
    pub fn draw(&self, rng: &mut SimRng) -> (f64, usize) {
        let u = rng.uniform();
        let idx = self
            .cumulative
            .partition_point(|&c| c <= u)
            .min(self.atoms.len() - 1);
        let a = &self.atoms[idx];
        (a.value, a.delay)
    }

    /// Plays `pair` for one epoch. The draw does not depend on `pair.wait`.
    #[inline]
    pub fn sample_epoch(&self, pair: ArmPair, epoch: u64, rng: &mut SimRng) -> EpochOutcome {
        let (v, tau) = self.draw(rng);
        EpochOutcome::resolve(epoch, pair, v, tau)
    }
}

/// One epoch's draw and its realised reward and consumption.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochOutcome {
    pub epoch: u64,
    pub pair: ArmPair,
    pub potential_reward: f64,
    pub delay: usize,
    pub reward: f64,
    pub consumed: u64,
}

impl EpochOutcome {
    /// `r = V 1{tau <= j}`, `c = min(tau, j)`.
    #[inline]
    pub fn resolve(epoch: u64, pair: ArmPair, potential_reward: f64, delay: usize) -> Self {
        let reward = if delay <= pair.wait {
            potential_reward
        } else {
            0.0
        };
        Self {
            epoch,
            pair,
            potential_reward,
            delay,
            reward,
            consumed: delay.min(pair.wait) as u64,
        }
    }
}

/// `K` macro-arms sharing a maximum delay `D`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvSpec {
    arms: Vec<JointArmDistribution>,
    max_delay: usize,
}

#[derive(Serialize, Deserialize)]
struct EnvSpecFile {
    #[serde(rename = "K")]
    k: usize,
    #[serde(rename = "D")]
    d: usize,
    arms: Vec<Vec<Atom>>,
}

impl EnvSpec {
    pub fn new(arms: Vec<JointArmDistribution>) -> Result<Self> {
        let first = arms
            .first()
            .ok_or_else(|| invalid_arg("an environment needs at least one macro-arm"))?;
        let max_delay = first.max_delay();
        if let Some(bad) = arms.iter().position(|a| a.max_delay() != max_delay) {
            return Err(invalid_arg(format!(
                "macro-arm {} declares D={}, expected {max_delay}",
                bad + 1,
                arms[bad].max_delay()
            )));
        }
        Ok(Self { arms, max_delay })
    }

    /// Macro-arm count `K`.
    pub fn num_arms(&self) -> usize {
        self.arms.len()
    }

    /// Micro-arm count `D`.
    pub fn max_delay(&self) -> usize {
        self.max_delay
    }

    pub fn num_pairs(&self) -> usize {
        self.arms.len() * self.max_delay
    }

    pub fn arms(&self) -> &[JointArmDistribution] {
        &self.arms
    }

    pub fn arm(&self, k: usize) -> &JointArmDistribution {
        &self.arms[k - 1]
    }

    /// All pairs in lexicographic order `(1,1), (1,2), …, (K,D)`.
    pub fn pairs(&self) -> impl Iterator<Item = ArmPair> + '_ {
        let d = self.max_delay;
        (1..=self.arms.len()).flat_map(move |k| (1..=d).map(move |j| ArmPair::new(k, j)))
    }

    pub fn check_pair(&self, pair: ArmPair) -> Result<ArmPair> {
        ArmPair::checked(pair.arm, pair.wait, self.num_arms(), self.max_delay)
    }

    #[inline]
    pub fn sample_epoch(&self, pair: ArmPair, epoch: u64, rng: &mut SimRng) -> EpochOutcome {
        self.arms[pair.arm - 1].sample_epoch(pair, epoch, rng)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: EnvSpecFile = serde_json::from_str(text)?;
        if file.arms.len() != file.k {
            return Err(Error::Config(format!(
                "K = {} but {} arm lists given",
                file.k,
                file.arms.len()
            )));
        }
        let arms = file
            .arms
            .into_iter()
            .enumerate()
            .map(|(i, atoms)| {
                JointArmDistribution::new(atoms, file.d)
                    .map_err(|e| Error::Config(format!("macro-arm {}: {e}", i + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(arms)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        let file = EnvSpecFile {
            k: self.num_arms(),
            d: self.max_delay,
            arms: self.arms.iter().map(|a| a.atoms.clone()).collect(),
        };
        serde_json::to_string_pretty(&file).expect("environment serialises")
    }
}

impl Serialize for EnvSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        EnvSpecFile {
            k: self.num_arms(),
            d: self.max_delay,
            arms: self.arms.iter().map(|a| a.atoms.clone()).collect(),
        }
        .serialize(s)
    }
}

/// Exact per-pair quantities of an environment, indexed `[k-1][j-1]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioTable {
    /// Expected per-round reward `mu_r / mu_c`.
    pub g: Vec<Vec<f64>>,
    pub mu_c: Vec<Vec<f64>>,
    pub mu_r: Vec<Vec<f64>>,
    pub gap: Vec<Vec<f64>>,
    pub best: ArmPair,
    pub best_value: f64,
}

impl RatioTable {
    /// Computes every pair's moments; the best pair is the lexicographically
    /// first maximiser of `g`.
    pub fn build(env: &EnvSpec) -> Self {
        let (k, d) = (env.num_arms(), env.max_delay());
        let mut g = vec![vec![0.0; d]; k];
        let mut mu_c = vec![vec![0.0; d]; k];
        let mut mu_r = vec![vec![0.0; d]; k];
        let mut best = ArmPair::new(1, 1);
        let mut best_value = f64::NEG_INFINITY;
        for pair in env.pairs() {
            let (r, c) = env
                .arm(pair.arm)
                .exact_moments(pair.wait)
                .expect("pair drawn from the environment's own range");
            let ratio = r / c;
            let (ki, ji) = (pair.arm - 1, pair.wait - 1);
            mu_r[ki][ji] = r;
            mu_c[ki][ji] = c;
            g[ki][ji] = ratio;
            if ratio > best_value {
                best_value = ratio;
                best = pair;
            }
        }
        let gap = g
            .iter()
            .map(|row| row.iter().map(|&x| best_value - x).collect())
            .collect();
        Self {
            g,
            mu_c,
            mu_r,
            gap,
            best,
            best_value,
        }
    }

    pub fn num_arms(&self) -> usize {
        self.g.len()
    }

    pub fn max_delay(&self) -> usize {
        self.g.first().map_or(0, Vec::len)
    }

    pub fn g(&self, p: ArmPair) -> f64 {
        self.g[p.arm - 1][p.wait - 1]
    }

    pub fn mu_c(&self, p: ArmPair) -> f64 {
        self.mu_c[p.arm - 1][p.wait - 1]
    }

    pub fn mu_r(&self, p: ArmPair) -> f64 {
        self.mu_r[p.arm - 1][p.wait - 1]
    }

    pub fn gap(&self, p: ArmPair) -> f64 {
        self.gap[p.arm - 1][p.wait - 1]
    }

    pub fn pairs(&self) -> impl Iterator<Item = ArmPair> + '_ {
        let d = self.max_delay();
        (1..=self.num_arms()).flat_map(move |k| (1..=d).map(move |j| ArmPair::new(k, j)))
    }

    /// Pairs whose gap exceeds the tie tolerance.
    pub fn suboptimal_pairs(&self) -> impl Iterator<Item = ArmPair> + '_ {
        self.pairs().filter(|&p| self.gap(p) > GAP_TIE_TOLERANCE)
    }

    /// Smallest strictly positive gap, if any pair is suboptimal.
    pub fn min_positive_gap(&self) -> Option<f64> {
        self.suboptimal_pairs()
            .map(|p| self.gap(p))
            .min_by(f64::total_cmp)
    }

    /// Human-readable table, one macro-arm per block.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "best pair {}  g* = {:.6}\n",
            self.best, self.best_value
        ));
        for p in self.pairs() {
            out.push_str(&format!(
                "{:>8}  mu_r={:.6}  mu_c={:.6}  g={:.6}  gap={:.6}\n",
                p.to_string(),
                self.mu_r(p),
                self.mu_c(p),
                self.g(p),
                self.gap(p)
            ));
        }
        out
    }
}
