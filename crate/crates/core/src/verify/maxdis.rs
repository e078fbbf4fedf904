use rand::Rng;
use rayon::prelude::*;
use statrs::function::erf::erfc;
use std::collections::BTreeMap;

use super::CheckReport;
use crate::error::{Error, Result};
use crate::laws::{Family, PointProcessLaw};
use crate::rng::Seeder;

/// A child is dropped once its expected number of descendants reaching the
/// lowest level, summed over the remaining target generations, is below this.
const PRUNE: f64 = 1e-8;
const MAX_LIVE: usize = 1 << 20;

/// Upper bound on `E[#{|u| = k : V(u) >= z}]`, the expected number of
/// generation-`k` descendants that gain at least `z`. Exact for binary
/// Gaussian and single-atom laws; otherwise `exp(-z)`, valid for calibrated
/// laws by the many-to-one formula.
fn descendants_above(law: &PointProcessLaw, k: usize, z: f64) -> f64 {
    if k == 0 {
        return if z <= 0.0 { 1.0 } else { 0.0 };
    }
    let kf = k as f64;
    match &law.family {
        Family::BinaryGaussian { mean, var } => {
            let mu = law.scale * mean + law.shift;
            let sd = law.scale * var.sqrt();
            2f64.powi(k as i32) * 0.5 * erfc((z - kf * mu) / (sd * (2.0 * kf).sqrt()))
        }
        Family::Dirac { point } => {
            if kf * (law.scale * point + law.shift) >= z {
                1.0
            } else {
                0.0
            }
        }
        _ => (-z).exp(),
    }
}

/// For each target generation, the largest position reached by the kept
/// particles and the dropped first-moment mass toward level `y_min`.
fn one_tree<R: Rng + ?Sized>(
    law: &PointProcessLaw,
    targets: &[usize],
    y_min: f64,
    rng: &mut R,
) -> Result<Vec<(f64, f64)>> {
    let depth = *targets.last().expect("nonempty");
    let mut out = vec![(f64::NEG_INFINITY, 0.0); targets.len()];
    let mut gen = vec![0.0f64];
    let mut next = Vec::new();
    let mut pts = Vec::new();
    for j in 1..=depth {
        next.clear();
        let here = targets.iter().position(|&t| t == j);
        for &x in &gen {
            law.sample_into(rng, &mut pts);
            for l in &pts {
                let y = x + l;
                if let Some(i) = here {
                    out[i].0 = out[i].0.max(y);
                }
                let ahead: Vec<f64> = targets
                    .iter()
                    .map(|&t| if t > j { descendants_above(law, t - j, y_min - y) } else { 0.0 })
                    .collect();
                if ahead.iter().sum::<f64>() >= PRUNE {
                    next.push(y);
                } else {
                    for (o, a) in out.iter_mut().zip(&ahead) {
                        o.1 += a;
                    }
                }
            }
        }
        if next.len() > MAX_LIVE {
            return Err(Error::TreeTooLarge { expected: next.len() as f64, budget: MAX_LIVE });
        }
        std::mem::swap(&mut gen, &mut next);
    }
    Ok(out)
}

/// `P(M_n >= y) <= exp(-y)` for the maximum `M_n` of generation `n`, on a
/// grid of `(n, y)`, each with `reps` trees (shared across `n`).
///
/// Trees are pruned: a child whose expected number of descendants at or
/// above the lowest `y` is negligible is dropped, and that expected number
/// is kept as a Markov upper bound on what the dropped subtree could add.
/// The frequency tested is the upper one, `mean(min(1, 1{M_n >= y} + dropped))`.
/// The statistic is the largest ratio of that frequency to
/// `exp(-y) (1 + 3 relative SE)`.
pub fn check_max_displacement(
    law: &PointProcessLaw,
    n_list: &[usize],
    y_list: &[f64],
    reps: usize,
    seeder: &Seeder,
) -> Result<CheckReport> {
    if n_list.is_empty() || y_list.is_empty() || n_list.contains(&0) {
        return Err(Error::Precondition("need nonempty grids with n >= 1".into()));
    }
    if reps < 100 {
        return Err(Error::Precondition(format!("reps = {reps} must be at least 100")));
    }
    let mut targets = n_list.to_vec();
    targets.sort_unstable();
    targets.dedup();
    let y_min = y_list.iter().copied().fold(f64::INFINITY, f64::min);
    let trees: Vec<Vec<(f64, f64)>> = (0..reps as u32)
        .into_par_iter()
        .map(|r| one_tree(law, &targets, y_min, &mut seeder.stream(r)))
        .collect::<Result<_>>()?;

    let mut details = BTreeMap::new();
    details.insert("reps".to_string(), reps as f64);
    let mut worst: f64 = 0.0;
    for (i, &n) in targets.iter().enumerate() {
        for &y in y_list {
            let hits = trees.iter().filter(|t| t[i].0 >= y).count();
            let upper = trees
                .iter()
                .map(|t| (((t[i].0 >= y) as u8 as f64) + t[i].1).min(1.0))
                .sum::<f64>()
                / reps as f64;
            let p = hits as f64 / reps as f64;
            let rel_se = if hits > 0 { ((1.0 - p) / (p * reps as f64)).sqrt() } else { f64::INFINITY };
            let bound = (-y).exp();
            let ratio = if upper == 0.0 { 0.0 } else { upper / (bound * (1.0 + 3.0 * rel_se)) };
            worst = worst.max(ratio);
            let key = format!("n{n}_y{y}");
            details.insert(format!("{key}_freq"), p);
            details.insert(format!("{key}_freq_upper"), upper);
            details.insert(format!("{key}_bound"), bound);
        }
    }
    Ok(CheckReport::new("maximal displacement P(M_n >= y) <= exp(-y)", worst, 1.0, details))
}
