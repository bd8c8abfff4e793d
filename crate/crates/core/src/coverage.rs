//! Monte-Carlo coverage of the ratio and relative-mean confidence bounds.
//!
//! Each setting is a joint law of `(X, Y)` with `X` in `[0, 1]` and `Y` in
//! `{1, …, B}`, a sample size `n` and a level `delta`. A resample draws `n`
//! pairs and checks whether the empirical deviation stays inside the bound.

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::env::{Atom, JointArmDistribution};
use crate::error::Result;
use crate::estimators::{ratio_deviation_bound, relative_mean_deviation_bound};
use crate::rng::SimRng;

pub const DEFAULT_SETTINGS: usize = 12;
pub const DEFAULT_RESAMPLES: u64 = 10_000;

const DELTAS: [f64; 4] = [0.01, 0.05, 0.1, 0.2];

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageSetting {
    pub id: usize,
    /// Joint law of `(X, Y)`; the atom value is `X` and the delay is `Y`.
    pub law: JointArmDistribution,
    pub b: f64,
    pub n: u64,
    pub delta: f64,
}

impl CoverageSetting {
    pub fn new(id: usize, law: JointArmDistribution, n: u64, delta: f64) -> Self {
        let b = law.max_delay() as f64;
        Self {
            id,
            law,
            b,
            n,
            delta,
        }
    }

    /// `(E X, E Y)`.
    pub fn means(&self) -> (f64, f64) {
        let (x, y) = self.law.atoms().iter().fold((0.0, 0.0), |(x, y), a| {
            (x + a.prob * a.value, y + a.prob * a.delay as f64)
        });
        // summation rounding can leave y a hair outside [1, B]
        (x, y.clamp(1.0, self.b))
    }
}

/// The reference setting: `Y` uniform on `{1, 3}`, `X` Bernoulli(1/2)
/// independent of `Y`, `n = 200`, `delta = 0.1`.
pub fn reference_setting() -> CoverageSetting {
    let law = JointArmDistribution::bernoulli_with_delays(0.5, &[(1, 0.5), (3, 0.5)], 3)
        .expect("valid reference law");
    CoverageSetting::new(0, law, 200, 0.1)
}

/// The reference setting followed by `count - 1` random ones drawn from `seed`.
/// Random laws put mass on every `Y` value in `{1, …, B}` with `X` values
/// drawn per atom, so `X` and `Y` are generally dependent.
pub fn random_settings(seed: u64, count: usize) -> Vec<CoverageSetting> {
    let mut rng = SimRng::stream(seed, u64::MAX);
    let mut out = vec![reference_setting()];
    for id in 1..count {
        let b = 1 + (rng.next_u64() % 10) as usize;
        let mut atoms = Vec::new();
        let mut weights = Vec::new();
        for d in 1..=b {
            for _ in 0..2 {
                let v = (rng.uniform() * 100.0).round() / 100.0;
                atoms.push((v, d));
                weights.push(0.05 + rng.uniform());
            }
        }
        let total: f64 = weights.iter().sum();
        let law = JointArmDistribution::new(
            atoms
                .iter()
                .zip(&weights)
                .map(|(&(v, d), &w)| Atom::new(v, d, w / total))
                .collect(),
            b,
        )
        .expect("random law is valid by construction");
        let n = 10 + rng.next_u64() % 491;
        let delta = DELTAS[(rng.next_u64() % DELTAS.len() as u64) as usize];
        out.push(CoverageSetting::new(id, law, n, delta));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    /// `|X_hat/Y_hat - EX/EY| <= bound`.
    Ratio,
    /// `|Y_hat - EY| / EY <= bound`.
    RelativeMean,
}

impl BoundKind {
    pub fn name(self) -> &'static str {
        match self {
            BoundKind::Ratio => "ratio",
            BoundKind::RelativeMean => "relative_mean",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageRow {
    pub setting: usize,
    pub bound_kind: BoundKind,
    pub b: f64,
    pub n: u64,
    pub delta: f64,
    pub resamples: u64,
    pub bound: f64,
    pub coverage: f64,
    /// `1 - delta - 3 sqrt(delta (1 - delta) / resamples)`.
    pub required: f64,
    pub pass: bool,
}

/// Runs `resamples` draws per setting; setting `i` uses stream `i` of `seed`.
pub fn run_coverage(
    settings: &[CoverageSetting],
    resamples: u64,
    seed: u64,
) -> Result<Vec<CoverageRow>> {
    let rows: Vec<Result<[CoverageRow; 2]>> = settings
        .par_iter()
        .map(|s| cover_one(s, resamples, seed))
        .collect();
    let mut out = Vec::with_capacity(2 * rows.len());
    for r in rows {
        out.extend(r?);
    }
    Ok(out)
}

fn cover_one(s: &CoverageSetting, resamples: u64, seed: u64) -> Result<[CoverageRow; 2]> {
    let (mu_x, mu_y) = s.means();
    let ratio_bound = ratio_deviation_bound(s.b, mu_y, s.n, s.delta)?;
    let rel_bound = relative_mean_deviation_bound(s.b, mu_y, s.n, s.delta)?;
    let truth = mu_x / mu_y;
    let mut rng = SimRng::stream(seed, s.id as u64);
    let (mut ratio_hits, mut rel_hits) = (0u64, 0u64);
    for _ in 0..resamples {
        let (mut sx, mut sy) = (0.0, 0.0);
        for _ in 0..s.n {
            let (x, y) = s.law.draw(&mut rng);
            sx += x;
            sy += y as f64;
        }
        if (sx / sy - truth).abs() <= ratio_bound {
            ratio_hits += 1;
        }
        if (sy / s.n as f64 - mu_y).abs() / mu_y <= rel_bound {
            rel_hits += 1;
        }
    }
    let required = 1.0 - s.delta - 3.0 * (s.delta * (1.0 - s.delta) / resamples as f64).sqrt();
    let row = |kind, bound, hits: u64| {
        let coverage = hits as f64 / resamples as f64;
        CoverageRow {
            setting: s.id,
            bound_kind: kind,
            b: s.b,
            n: s.n,
            delta: s.delta,
            resamples,
            bound,
            coverage,
            required,
            pass: coverage >= required,
        }
    };
    Ok([
        row(BoundKind::Ratio, ratio_bound, ratio_hits),
        row(BoundKind::RelativeMean, rel_bound, rel_hits),
    ])
}

/// Writes `setting,bound_kind,B,n,delta,resamples,bound,coverage,required,pass`.
pub fn write_coverage_csv(rows: &[CoverageRow], path: impl AsRef<Path>) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path)?;
    wtr.write_record([
        "setting",
        "bound_kind",
        "B",
        "n",
        "delta",
        "resamples",
        "bound",
        "coverage",
        "required",
        "pass",
    ])?;
    for r in rows {
        wtr.write_record([
            r.setting.to_string(),
            r.bound_kind.name().to_string(),
            r.b.to_string(),
            r.n.to_string(),
            r.delta.to_string(),
            r.resamples.to_string(),
            r.bound.to_string(),
            r.coverage.to_string(),
            r.required.to_string(),
            r.pass.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}
