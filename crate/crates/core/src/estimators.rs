//! Ratio-of-means estimation and the concentration bounds behind Wait-UCB.
//!
//! All logarithms are natural. `B` is the upper end of the consumption
//! support; for pair `(k, j)` consumptions lie in `[1, j]`, so callers pass
//! `B = j`.

use serde::Serialize;

use crate::error::{invalid_arg, Result};

/// Sufficient statistics of one arm pair.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct PairStats {
    pub pulls: u64,
    pub reward_sum: f64,
    pub time_sum: u64,
}

impl PairStats {
    #[inline]
    pub fn record(&mut self, reward: f64, consumed: u64) {
        self.pulls += 1;
        self.reward_sum += reward;
        self.time_sum += consumed;
    }

    /// Total reward divided by total rounds spent; `None` before the first pull.
    #[inline]
    pub fn ratio_estimate(&self) -> Option<f64> {
        (self.pulls > 0).then(|| self.reward_sum / self.time_sum as f64)
    }

    pub fn mean_reward(&self) -> Option<f64> {
        (self.pulls > 0).then(|| self.reward_sum / self.pulls as f64)
    }

    pub fn mean_consumption(&self) -> Option<f64> {
        (self.pulls > 0).then(|| self.time_sum as f64 / self.pulls as f64)
    }
}

/// Weights of the optimism bonus for waiting time `j`:
/// `alpha = 8(j-1)/3`, `beta = sqrt(2) (sqrt(j-1) + 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeviationParams {
    pub alpha: f64,
    pub beta: f64,
}

impl DeviationParams {
    pub fn for_wait(wait: usize) -> Self {
        assert!(wait >= 1, "waiting times are 1-based");
        let m = (wait - 1) as f64;
        Self {
            alpha: 8.0 * m / 3.0,
            beta: std::f64::consts::SQRT_2 * (m.sqrt() + 1.0),
        }
    }

    /// Table for `j = 1..=d`, indexed `j - 1`.
    pub fn table(d: usize) -> Vec<Self> {
        (1..=d).map(Self::for_wait).collect()
    }

    /// `alpha * log_s / n + beta * sqrt(log_s / n)`, `+inf` when `n = 0`.
    #[inline]
    pub fn radius_at_log(&self, log_s: f64, pulls: u64) -> f64 {
        if pulls == 0 {
            return f64::INFINITY;
        }
        let x = log_s / pulls as f64;
        self.alpha * x + self.beta * x.sqrt()
    }
}

/// Optimism bonus of pair `(k, j)` after `s` epochs with `pulls` pulls.
pub fn deviation_radius(wait: usize, s: u64, pulls: u64) -> f64 {
    assert!(s >= 1, "epoch counter must be >= 1");
    DeviationParams::for_wait(wait).radius_at_log((s as f64).ln(), pulls)
}

/// [`deviation_radius`] with `log s` supplied directly.
pub fn deviation_radius_at_log(wait: usize, log_s: f64, pulls: u64) -> f64 {
    DeviationParams::for_wait(wait).radius_at_log(log_s, pulls)
}

fn check_bound_args(b: f64, mu_y: f64, n: u64, delta: f64) -> Result<()> {
    if !(b >= 1.0 && b.is_finite()) {
        return Err(invalid_arg(format!(
            "consumption bound B = {b} must be finite and >= 1"
        )));
    }
    if !(mu_y >= 1.0 && mu_y <= b) {
        return Err(invalid_arg(format!(
            "mean consumption {mu_y} outside [1, {b}]"
        )));
    }
    if n == 0 {
        return Err(invalid_arg("sample size must be positive"));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(invalid_arg(format!(
            "confidence level delta = {delta} outside (0, 1]"
        )));
    }
    Ok(())
}

/// Bernstein-type relative deviation of a mean of `[1, B]`-valued samples:
/// with probability at least `1 - delta`,
/// `|Y_hat - mu_Y| / mu_Y <= sqrt((B-1) L / 2n) + 2 (B-1) L / (3 mu_Y n)`,
/// `L = log(2/delta)`.
pub fn relative_mean_deviation_bound(b: f64, mu_y: f64, n: u64, delta: f64) -> Result<f64> {
    check_bound_args(b, mu_y, n, delta)?;
    Ok(relative_terms(b, mu_y, n as f64, (2.0 / delta).ln())
        .iter()
        .sum())
}

fn relative_terms(b: f64, mu_y: f64, n: f64, log_term: f64) -> [f64; 2] {
    [
        ((b - 1.0) * log_term / (2.0 * n)).sqrt(),
        2.0 * (b - 1.0) * log_term / (3.0 * mu_y * n),
    ]
}

/// The three additive pieces of [`ratio_deviation_bound`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioBoundTerms {
    /// Square-root Bernstein term of the consumption mean.
    pub consumption_sqrt: f64,
    /// Linear Bernstein term of the consumption mean.
    pub consumption_linear: f64,
    /// Hoeffding term of the reward mean.
    pub reward: f64,
}

impl RatioBoundTerms {
    pub fn total(&self) -> f64 {
        self.consumption_sqrt + self.consumption_linear + self.reward
    }
}

/// Pieces of the ratio bound with `L = log(4/delta)`.
pub fn ratio_deviation_terms(b: f64, mu_y: f64, n: u64, delta: f64) -> Result<RatioBoundTerms> {
    check_bound_args(b, mu_y, n, delta)?;
    let log_term = (4.0 / delta).ln();
    let nf = n as f64;
    let [consumption_sqrt, consumption_linear] = relative_terms(b, mu_y, nf, log_term);
    Ok(RatioBoundTerms {
        consumption_sqrt,
        consumption_linear,
        reward: (log_term / (2.0 * nf)).sqrt(),
    })
}

/// Confidence radius for `X_hat / Y_hat` with `X` in `[0, 1]`, `Y` in `[1, B]`:
/// with probability at least `1 - delta`,
/// `|X_hat/Y_hat - EX/EY| <= sqrt((B-1) L / 2n) + 2 (B-1) L / (3 mu_Y n) + sqrt(L / 2n)`,
/// `L = log(4/delta)`.
pub fn ratio_deviation_bound(b: f64, mu_y: f64, n: u64, delta: f64) -> Result<f64> {
    ratio_deviation_terms(b, mu_y, n, delta).map(|t| t.total())
}

/// Tail probability obtained by inverting the ratio bound at `mu_Y = 1`:
/// an upper bound on `P(|X_hat/Y_hat - EX/EY| >= eps)`.
///
/// For `B > 1` the value is `4 exp(-x^2)` where `x` is the positive root of
/// `(2(B-1)/3n) x^2 + ((sqrt(B-1)+1)/sqrt(2n)) x = eps`. At `B = 1` the
/// consumption is constant and the two-sided Hoeffding tail `2 exp(-2 n eps^2)`
/// is returned instead.
pub fn ratio_tail_probability(b: f64, n: u64, eps: f64) -> Result<f64> {
    if !(b >= 1.0 && b.is_finite()) {
        return Err(invalid_arg(format!(
            "consumption bound B = {b} must be finite and >= 1"
        )));
    }
    if n == 0 {
        return Err(invalid_arg("sample size must be positive"));
    }
    if eps.is_nan() || eps <= 0.0 {
        return Err(invalid_arg(format!(
            "deviation eps = {eps} must be positive"
        )));
    }
    let nf = n as f64;
    if b == 1.0 {
        return Ok(2.0 * (-2.0 * nf * eps * eps).exp());
    }
    let quad = 2.0 * (b - 1.0) / (3.0 * nf);
    let lin = ((b - 1.0).sqrt() + 1.0) / (2.0 * nf).sqrt();
    // x = (-lin + sqrt(lin^2 + 4 quad eps)) / (2 quad), rationalised
    let x = 2.0 * eps / (lin + (lin * lin + 4.0 * quad * eps).sqrt());
    Ok(4.0 * (-x * x).exp())
}

/// Expected-pull ceiling for a suboptimal pair with gap `gap` under budget `t`:
/// `log(T) ((beta + sqrt(beta^2 + 2 alpha gap)) / gap)^2 + 4 pi^2 / 3`.
pub fn pull_count_ceiling(wait: usize, gap: f64, budget: u64) -> f64 {
    assert!(gap > 0.0, "ceiling is only defined for positive gaps");
    let p = DeviationParams::for_wait(wait);
    let root = (p.beta + (p.beta * p.beta + 2.0 * p.alpha * gap).sqrt()) / gap;
    (budget as f64).ln() * root * root + 4.0 * std::f64::consts::PI.powi(2) / 3.0
}

/// Leading `log T` coefficient of the Wait-UCB regret bound contributed by a
/// pair with mean consumption `mu_c` and gap `gap`:
/// `mu_c (beta + sqrt(beta^2 + 2 gap alpha))^2 / gap`.
pub fn regret_log_coefficient(wait: usize, mu_c: f64, gap: f64) -> f64 {
    assert!(gap > 0.0, "coefficient is only defined for positive gaps");
    let p = DeviationParams::for_wait(wait);
    let s = p.beta + (p.beta * p.beta + 2.0 * gap * p.alpha).sqrt();
    mu_c * s * s / gap
}
