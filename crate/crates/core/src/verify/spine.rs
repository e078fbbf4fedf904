use statrs::distribution::{ContinuousCDF, Normal};
use std::collections::BTreeMap;

use super::CheckReport;
use crate::error::{Error, Result};
use crate::laws::PointProcessLaw;
use crate::rng::{chunked, Seeder};
use crate::stats::{quantile, spearman, MeanSe};

/// Ordinary reproductions per walk in the reference estimate.
const REFERENCE_FACTOR: usize = 4;
const LEVELS: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

/// Spine increments from `reps` size-biased walks of `n >= 2` steps,
/// against the many-to-one prediction `P(X <= t) = E[sum exp(l) 1{l <= t}]`
/// estimated from ordinary reproductions, at the deciles `t` of the
/// increments. Each term of the reference is bounded by `exp(t)` times the
/// number of points, so the estimate has finite variance even when
/// `sum exp(l)` does not. Passes when every decile agrees within the
/// Bonferroni 1% two-sided critical value and the rank correlation of
/// consecutive increments stays within `3/sqrt(reps)`.
pub fn check_spine_distribution(law: &PointProcessLaw, n: usize, reps: usize, seeder: &Seeder) -> Result<CheckReport> {
    if n < 2 || reps < 100 {
        return Err(Error::Precondition(format!("need n >= 2 and reps >= 100 (n {n}, reps {reps})")));
    }
    law.check_size_biasable()?;
    let walks: Vec<(f64, f64)> = chunked(reps, &seeder.derive(1), |rng, m| {
        let mut pts = Vec::new();
        (0..m)
            .map(|_| {
                let mut last = (0.0, 0.0);
                for _ in 0..n {
                    let i = law.sample_size_biased_into(rng, &mut pts);
                    last = (last.1, pts[i]);
                }
                last
            })
            .collect::<Vec<_>>()
    })
    .concat();
    let tail: Vec<f64> = walks.iter().map(|w| w.1).collect();
    let prev: Vec<f64> = walks.iter().map(|w| w.0).collect();

    let mut levels: Vec<f64> = LEVELS.iter().map(|&q| quantile(&tail, q)).collect();
    levels.dedup();
    let reference = reference_cdf(law, &levels, REFERENCE_FACTOR * reps, &seeder.derive(2));
    let z_crit = Normal::standard().inverse_cdf(1.0 - 0.01 / (2.0 * levels.len() as f64));

    let mut details = BTreeMap::new();
    let mut worst_z: f64 = 0.0;
    for (k, (&t, r)) in levels.iter().zip(&reference).enumerate() {
        let p = tail.iter().filter(|&&x| x <= t).count() as f64 / reps as f64;
        let se = (p * (1.0 - p) / reps as f64 + r.se * r.se).sqrt();
        let diff = p - r.mean;
        let z = if diff.abs() < 1e-12 { 0.0 } else if se > 0.0 { diff.abs() / se } else { f64::INFINITY };
        worst_z = worst_z.max(z);
        details.insert(format!("level{k}_t"), t);
        details.insert(format!("level{k}_walk"), p);
        details.insert(format!("level{k}_reference"), r.mean);
    }
    let mut rho = spearman(&prev, &tail);
    if rho.is_nan() {
        // constant samples carry no dependence
        rho = 0.0;
    }
    let band = 3.0 / (reps as f64).sqrt();
    for (k, v) in [
        ("n", n as f64),
        ("reps", reps as f64),
        ("max_z", worst_z),
        ("z_critical", z_crit),
        ("lag1_rank_correlation", rho),
        ("lag1_band", band),
    ] {
        details.insert(k.to_string(), v);
    }
    Ok(CheckReport::new(
        format!("spine increments follow the spine step law, n = {n}"),
        (worst_z / z_crit).max(rho.abs() / band),
        1.0,
        details,
    ))
}

/// `E[sum exp(l) 1{l <= t}]` for each `t`, from `draws` ordinary reproductions.
fn reference_cdf(law: &PointProcessLaw, ts: &[f64], draws: usize, seeder: &Seeder) -> Vec<MeanSe> {
    let rows: Vec<Vec<f64>> = chunked(draws, seeder, |rng, m| {
        let mut buf = Vec::new();
        let mut out = Vec::with_capacity(m * ts.len());
        for _ in 0..m {
            law.sample_into(rng, &mut buf);
            out.extend(ts.iter().map(|&t| buf.iter().filter(|&&l| l <= t).map(|l| l.exp()).sum::<f64>()));
        }
        out
    });
    let flat = rows.concat();
    (0..ts.len())
        .map(|k| MeanSe::of(&flat.iter().skip(k).step_by(ts.len()).copied().collect::<Vec<_>>()))
        .collect()
}
