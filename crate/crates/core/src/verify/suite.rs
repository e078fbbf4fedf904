use serde::{Deserialize, Serialize};

use super::{
    check_many_to_one, check_many_to_one_exact, check_martingale, check_max_displacement,
    check_spine_distribution, CheckReport, Estimator, TestFn,
};
use crate::error::Result;
use crate::laws::{Family, PointProcessLaw};
use crate::rng::Seeder;

/// Sample sizes of the verify suite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuiteSize {
    /// Upper limit on trees per tree-based check.
    pub reps: usize,
    /// Upper limit on simulated particles per tree-based check; bushy laws
    /// get fewer trees.
    pub particles: usize,
    pub spine_reps: usize,
}

impl Default for SuiteSize {
    fn default() -> Self {
        Self { reps: 20_000, particles: 20_000_000, spine_reps: 10_000 }
    }
}

impl SuiteSize {
    fn trees(&self, law: &PointProcessLaw, depth: usize) -> usize {
        let per_tree = law.mean_offspring().powi(depth as i32 + 1);
        ((self.particles as f64 / per_tree) as usize).clamp(100, self.reps)
    }
}

/// All checks for each law, in a fixed order. Check `k` of law `i` runs on
/// experiment `seeder.experiment + 64 i + k`.
pub fn run_suite(laws: &[(String, PointProcessLaw)], size: &SuiteSize, seeder: &Seeder) -> Result<Vec<CheckReport>> {
    let mut reports = Vec::new();
    for (i, (name, law)) in laws.iter().enumerate() {
        let mut k = 0u32;
        let mut next = || {
            k += 1;
            seeder.experiment(seeder.experiment.wrapping_add(64 * i as u32 + k))
        };
        let mut push = |mut r: CheckReport| {
            r.name = format!("{name}: {}", r.name);
            reports.push(r);
        };
        let estimator = Estimator::for_law(law);
        for n in [1usize, 4, 8] {
            if law.mean_offspring().powi(n as i32) > super::TREE_BUDGET as f64 {
                continue;
            }
            push(check_martingale(law, n, size.trees(law, n), estimator, &next())?);
        }
        let depth = if law.mean_offspring() > 2.5 { 2 } else { 3 };
        // exp(-S_n) is lognormal-like for g = 1, so that one stays shallow
        for (g, n) in [
            (TestFn::Constant, 1),
            (TestFn::PrefixesAbove { c: 1.0 }, depth),
            (TestFn::StepsAbove { c: 1.0 }, depth),
        ] {
            push(check_many_to_one(law, g, n, size.trees(law, n), &next())?);
        }
        if matches!(law.family, Family::Finite { .. }) {
            for n in [1, 2] {
                push(check_many_to_one_exact(law, TestFn::EndAbove { c: 0.0 }, n)?);
            }
        }
        let n_list: Vec<usize> = [5usize, 10]
            .into_iter()
            .filter(|&n| law.mean_offspring().powi(n as i32) <= 1e4)
            .collect();
        let deepest = *n_list.last().unwrap_or(&5);
        let n_list = if n_list.is_empty() { vec![3] } else { n_list };
        push(check_max_displacement(law, &n_list, &[1.0, 2.0, 3.0], size.trees(law, deepest.min(8)), &next())?);
        push(check_spine_distribution(law, 3, size.spine_reps, &next())?);
    }
    Ok(reports)
}
