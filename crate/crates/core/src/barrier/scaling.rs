use serde::{Deserialize, Serialize};

use super::{killed_runs, solve_g_theta, theoretical_bracket};
use crate::error::{Error, Result};
use crate::laws::PointProcessLaw;
use crate::rng::Seeder;
use crate::stable::ScalingBundle;
use crate::stats::{spearman, spearman_p_lower, MeanSe};

/// One `(theta, n)` cell of the survival scaling experiment, with
/// `epsilon = theta a_n / n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RhoRow {
    pub theta: f64,
    pub n: usize,
    pub a_n: f64,
    pub epsilon: f64,
    pub rho_hat: f64,
    pub se: f64,
    pub log_scaled: f64,
    pub lower: f64,
    pub upper: f64,
    pub g0: f64,
    pub cap_hits: usize,
}

/// For each `n`, one batch of killed-BRW replicas (common to all `theta`)
/// is read off at every slope. Rows are ordered by `theta`, then `n`.
pub fn rho_scaling_experiment(
    law: &PointProcessLaw,
    bundle: &ScalingBundle,
    theta_grid: &[f64],
    n_grid: &[usize],
    reps: usize,
    cap: usize,
    seeder: &Seeder,
) -> Result<Vec<RhoRow>> {
    if theta_grid.is_empty() || n_grid.is_empty() {
        return Err(Error::Precondition("theta and n grids must be nonempty".into()));
    }
    if n_grid.contains(&0) {
        return Err(Error::Precondition("n must be >= 1".into()));
    }
    if reps < 100 || cap == 0 {
        return Err(Error::Precondition(format!("reps = {reps} must be >= 100 and cap >= 1")));
    }
    bundle.validate()?;
    law.validate()?;
    let mut thetas = theta_grid.to_vec();
    thetas.sort_by(f64::total_cmp);
    thetas.dedup();
    let mut ns = n_grid.to_vec();
    ns.sort_unstable();
    ns.dedup();

    let mut fixed = Vec::with_capacity(thetas.len());
    for &theta in &thetas {
        let (lower, upper) = theoretical_bracket(theta, bundle.alpha, bundle.cstar)?;
        fixed.push((lower, upper, solve_g_theta(theta, bundle.alpha, bundle.cstar, 64)?));
    }

    let mut cells = vec![Vec::with_capacity(ns.len()); thetas.len()];
    for &n in &ns {
        let a_n = bundle.a(n as u64);
        let eps: Vec<f64> = thetas.iter().map(|t| t * a_n / n as f64).collect();
        let eps_kill = eps.iter().copied().fold(0.0, f64::max);
        let runs = killed_runs(law, eps_kill, n, cap, reps, seeder);
        let cap_hits = runs.iter().filter(|r| r.cap_hit).count();
        for (k, &e) in eps.iter().enumerate() {
            let hits: Vec<f64> = runs.iter().map(|r| r.survives(n, e) as u8 as f64).collect();
            let m = MeanSe::of(&hits);
            let (lower, upper, g0) = fixed[k];
            cells[k].push(RhoRow {
                theta: thetas[k],
                n,
                a_n,
                epsilon: e,
                rho_hat: m.mean,
                se: m.se,
                log_scaled: m.mean.ln() / a_n,
                lower,
                upper,
                g0,
                cap_hits,
            });
        }
    }
    Ok(cells.concat())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrendCheck {
    pub theta: f64,
    pub points: usize,
    pub spearman: f64,
    /// One-sided p-value against "no decrease".
    pub p_value: f64,
    pub decreasing: bool,
}

/// Spearman trend of `log_scaled` against `n` for each `theta`, over rows
/// with a finite `log_scaled`; `decreasing` at the 5% level.
pub fn scaling_trend(rows: &[RhoRow]) -> Vec<TrendCheck> {
    let mut thetas: Vec<f64> = rows.iter().map(|r| r.theta).collect();
    thetas.dedup();
    thetas
        .into_iter()
        .filter_map(|theta| {
            let pts: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| r.theta == theta && r.log_scaled.is_finite())
                .map(|r| (r.n as f64, r.log_scaled))
                .collect();
            if pts.len() < 3 {
                return None;
            }
            let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
            let r = spearman(&x, &y);
            let p = spearman_p_lower(r, x.len());
            Some(TrendCheck { theta, points: x.len(), spearman: r, p_value: p, decreasing: r < 0.0 && p < 0.05 })
        })
        .collect()
}
