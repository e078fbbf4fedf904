//! Estimation of the confinement rate
//! `C* = lim -(1/t) log P(|Y_s| <= 1/2, s <= t)` of a stable Lévy process.
//!
//! Confinement probabilities decay like `exp(-C* t)`, far below what plain
//! path counting can resolve at `t >= 10`. Paths are therefore run as a
//! fixed-size population: after every skeleton step the paths that left the
//! interval are replaced by copies of uniformly chosen survivors, and the
//! log-probability accumulates the log of each step's survival fraction.
//! The product of survival fractions is an unbiased estimate of the
//! confinement probability of the skeleton.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::variates::StableLaw;
use crate::error::{Error, Result};
use crate::stats::ols;

/// Number of time points on the log-probability grid.
pub const CSTAR_GRID: usize = 40;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CstarEstimate {
    pub cstar: f64,
    pub se: f64,
    pub times: Vec<f64>,
    pub log_confinement: Vec<f64>,
}

/// Unit-rate Lévy skeleton increments. At `alpha = 2` the process is the
/// standard Brownian motion (variance `t`), otherwise the stable process
/// whose time-one marginal is [`StableLaw`] with unit scale.
fn increment<R: Rng + ?Sized>(law: &StableLaw, dt: f64, rng: &mut R) -> f64 {
    if law.alpha() == 2.0 {
        law.sample_increment(dt, rng) * std::f64::consts::FRAC_1_SQRT_2
    } else {
        law.sample_increment(dt, rng)
    }
}

pub fn estimate_cstar<R: Rng + ?Sized>(
    alpha: f64,
    skew: f64,
    t_max: f64,
    dt: f64,
    n_paths: usize,
    rng: &mut R,
) -> Result<CstarEstimate> {
    if dt > 1e-2 || dt <= 0.0 {
        return Err(Error::Precondition(format!("dt = {dt} must lie in (0, 0.01]")));
    }
    if t_max < 10.0 {
        return Err(Error::Precondition(format!("t_max = {t_max} must be at least 10")));
    }
    if n_paths < 10_000 {
        return Err(Error::Precondition(format!("n_paths = {n_paths} must be at least 1e4")));
    }
    let law = StableLaw::new(alpha, skew)?;
    let steps = (t_max / dt).round() as usize;
    let grid_steps: Vec<usize> =
        (1..=CSTAR_GRID).map(|k| (k * steps).div_ceil(CSTAR_GRID)).collect();

    let mut pos = vec![0.0f64; n_paths];
    let mut alive = Vec::with_capacity(n_paths);
    let mut log_p = 0.0;
    let mut times = Vec::new();
    let mut log_conf = Vec::new();
    let mut next = 0;
    for step in 1..=steps {
        alive.clear();
        for (i, x) in pos.iter_mut().enumerate() {
            *x += increment(&law, dt, rng);
            if x.abs() <= 0.5 {
                alive.push(i);
            }
        }
        if alive.is_empty() {
            let t = step as f64 * dt;
            if t < t_max / 2.0 {
                return Err(Error::Extinction(format!(
                    "all {n_paths} paths exited at t = {t:.3}; raise n_paths or shorten t_max"
                )));
            }
            break;
        }
        log_p += (alive.len() as f64 / n_paths as f64).ln();
        if alive.len() < n_paths {
            let survivors: Vec<f64> = alive.iter().map(|&i| pos[i]).collect();
            for x in pos.iter_mut() {
                if x.abs() > 0.5 {
                    *x = survivors[rng.random_range(0..survivors.len())];
                }
            }
        }
        if next < grid_steps.len() && step == grid_steps[next] {
            times.push(step as f64 * dt);
            log_conf.push(log_p);
            next += 1;
        }
    }

    let tail: Vec<usize> = (0..times.len()).filter(|&k| times[k] >= t_max / 2.0).collect();
    if tail.len() < 3 {
        return Err(Error::Extinction("too few surviving grid points in the tail half".into()));
    }
    let x: Vec<f64> = tail.iter().map(|&k| times[k]).collect();
    let y: Vec<f64> = tail.iter().map(|&k| log_conf[k]).collect();
    let (_, slope, se) = ols(&x, &y);
    Ok(CstarEstimate { cstar: -slope, se, times, log_confinement: log_conf })
}
