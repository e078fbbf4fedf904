//! Branching random walks killed below the line `-eps * j`.
//!
//! The direct simulation runs the BRW once per replica and gives every
//! particle the smallest slope `eps_req` for which its ancestral path stays
//! above the line, `eps_req(u) = max_j -V(u_j) / j`. Particles are only
//! discarded once `eps_req` exceeds the largest slope of interest, so one
//! replica answers "does generation `n` survive at slope `eps`" for every
//! `eps` up to that slope and every `n` up to the horizon. The answers are
//! nonincreasing in `n` and nondecreasing in `eps` path by path.

mod ode;
mod scaling;

pub use ode::{solve_g_theta, theoretical_bracket};
pub use scaling::{rho_scaling_experiment, scaling_trend, RhoRow, TrendCheck};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laws::PointProcessLaw;
use crate::rng::{chunked, Seeder};
use crate::stats::{pairwise_sum, MeanSe};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarrierSpec {
    /// `eps >= 0`; may be infinite (no killing).
    pub slope: f64,
    /// Generation `n` at which survival is read off; `0` is trivially alive.
    pub horizon: usize,
    /// Largest population kept per generation; the rightmost are retained.
    pub cap: usize,
}

impl BarrierSpec {
    pub fn new(slope: f64, horizon: usize, cap: usize) -> Result<Self> {
        let s = Self { slope, horizon, cap };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.slope.is_nan() || self.slope < 0.0 {
            return Err(Error::ParamOutOfRange(format!("slope {} must be >= 0", self.slope)));
        }
        if self.cap == 0 {
            return Err(Error::ParamOutOfRange("population cap must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurvivalMethod {
    Direct,
    SpineMoment,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurvivalEstimate {
    pub rho_hat: f64,
    pub se: f64,
    pub n: usize,
    pub epsilon: f64,
    pub method: SurvivalMethod,
    /// Replicas in which the population cap truncated a generation.
    pub cap_hits: usize,
}

impl SurvivalEstimate {
    /// `log(rho_hat) / a_n`; `-inf` when no replica survived.
    pub fn log_scaled(&self, a_n: f64) -> f64 {
        self.rho_hat.ln() / a_n
    }
}

/// One killed-BRW replica: for each generation `1..=horizon`, the smallest
/// `eps_req` present and the number of particles alive at `eps_kill`.
#[derive(Debug, Clone, PartialEq)]
pub struct KilledRun {
    pub min_eps: Vec<f64>,
    pub alive: Vec<usize>,
    pub cap_hit: bool,
}

impl KilledRun {
    /// Survival of generation `n` at slope `eps <= eps_kill`.
    pub fn survives(&self, n: usize, eps: f64) -> bool {
        n == 0 || self.min_eps[n - 1] <= eps
    }
}

pub fn simulate_killed<R: Rng + ?Sized>(
    law: &PointProcessLaw,
    eps_kill: f64,
    horizon: usize,
    cap: usize,
    rng: &mut R,
) -> KilledRun {
    // (position, eps_req)
    let mut pop: Vec<(f64, f64)> = vec![(0.0, 0.0)];
    let mut next = Vec::new();
    let mut pts = Vec::new();
    let mut run = KilledRun { min_eps: Vec::with_capacity(horizon), alive: Vec::with_capacity(horizon), cap_hit: false };
    for j in 1..=horizon {
        if pop.is_empty() {
            run.min_eps.push(f64::INFINITY);
            run.alive.push(0);
            continue;
        }
        next.clear();
        let jf = j as f64;
        for &(x, req) in &pop {
            law.sample_into(rng, &mut pts);
            for &l in &pts {
                let y = x + l;
                let r = req.max(-y / jf);
                if r <= eps_kill {
                    next.push((y, r));
                }
            }
        }
        if next.len() > cap {
            next.select_nth_unstable_by(cap - 1, |a, b| b.0.total_cmp(&a.0));
            next.truncate(cap);
            run.cap_hit = true;
        }
        run.min_eps.push(next.iter().map(|p| p.1).fold(f64::INFINITY, f64::min));
        run.alive.push(next.len());
        std::mem::swap(&mut pop, &mut next);
    }
    run
}

/// Replica `r` on stream `r`; order of the result is replica order.
pub fn killed_runs(
    law: &PointProcessLaw,
    eps_kill: f64,
    horizon: usize,
    cap: usize,
    n_reps: usize,
    seeder: &Seeder,
) -> Vec<KilledRun> {
    (0..n_reps as u32)
        .into_par_iter()
        .map(|r| simulate_killed(law, eps_kill, horizon, cap, &mut seeder.stream(r)))
        .collect()
}

pub fn estimate_rho_direct(
    law: &PointProcessLaw,
    spec: &BarrierSpec,
    n_reps: usize,
    seeder: &Seeder,
) -> Result<SurvivalEstimate> {
    spec.validate()?;
    if n_reps < 100 {
        return Err(Error::Precondition(format!("n_reps = {n_reps} must be at least 100")));
    }
    law.validate()?;
    let runs = killed_runs(law, spec.slope, spec.horizon, spec.cap, n_reps, seeder);
    let hits: Vec<f64> = runs.iter().map(|r| r.survives(spec.horizon, spec.slope) as u8 as f64).collect();
    let m = MeanSe::of(&hits);
    Ok(SurvivalEstimate {
        rho_hat: m.mean,
        se: m.se,
        n: spec.horizon,
        epsilon: spec.slope,
        method: SurvivalMethod::Direct,
        cap_hits: runs.iter().filter(|r| r.cap_hit).count(),
    })
}

/// Direct Monte Carlo of the expected number of generation-`n` particles
/// whose path stays above the line. Returns the estimate and the number of
/// replicas where the cap truncated (which biases the count downwards).
pub fn expected_survivors_direct(
    law: &PointProcessLaw,
    spec: &BarrierSpec,
    n_reps: usize,
    seeder: &Seeder,
) -> Result<(MeanSe, usize)> {
    spec.validate()?;
    law.validate()?;
    if spec.horizon == 0 {
        return Ok((MeanSe { mean: 1.0, se: 0.0, n: n_reps }, 0));
    }
    let runs = killed_runs(law, spec.slope, spec.horizon, spec.cap, n_reps, seeder);
    let counts: Vec<f64> = runs.iter().map(|r| r.alive[spec.horizon - 1] as f64).collect();
    Ok((MeanSe::of(&counts), runs.iter().filter(|r| r.cap_hit).count()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurvivorCount {
    pub mean: f64,
    pub se: f64,
    /// Effective sample size `(sum w)^2 / sum w^2` of the weights.
    pub ess: f64,
}

/// `E[exp(-S_n) 1{S_j >= -eps j, j <= n}]` over spine walks: the expected
/// number of survivors, an upper bound on `rho`. Weights are handled in log
/// space; fails with `WeightOverflow` if fewer than 10 effective samples carry
/// the mean.
pub fn expected_survivors_spine(
    law: &PointProcessLaw,
    spec: &BarrierSpec,
    n_reps: usize,
    seeder: &Seeder,
) -> Result<SurvivorCount> {
    spec.validate()?;
    law.check_size_biasable()?;
    if n_reps < 100 {
        return Err(Error::Precondition(format!("n_reps = {n_reps} must be at least 100")));
    }
    let n = spec.horizon;
    let log_w: Vec<f64> = chunked(n_reps, seeder, |rng, m| {
        (0..m)
            .map(|_| {
                let mut s = 0.0;
                let mut alive = true;
                for j in 1..=n {
                    s += law.spine_step(rng).0;
                    alive &= s >= -spec.slope * j as f64;
                }
                if alive { -s } else { f64::NEG_INFINITY }
            })
            .collect::<Vec<f64>>()
    })
    .concat();
    let top = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return Err(Error::WeightOverflow { ess: 0.0 });
    }
    let w: Vec<f64> = log_w.iter().map(|l| (l - top).exp()).collect();
    let sum = pairwise_sum(&w);
    let sq = pairwise_sum(&w.iter().map(|x| x * x).collect::<Vec<_>>());
    let ess = sum * sum / sq;
    if ess < 10.0 {
        return Err(Error::WeightOverflow { ess });
    }
    let m = MeanSe::of(&w);
    let scale = top.exp();
    Ok(SurvivorCount { mean: m.mean * scale, se: m.se * scale, ess })
}
