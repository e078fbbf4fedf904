//! Executable checks of the exact identities behind the model: the additive
//! martingale, the many-to-one formula, the maximal-displacement bound and
//! the law of the spine. Each check returns a [`CheckReport`] whose verdict
//! is `statistic <= threshold`.

mod maxdis;
mod spine;
mod suite;

pub use maxdis::check_max_displacement;
pub use spine::check_spine_distribution;
pub use suite::{run_suite, SuiteSize};

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laws::{Family, PointProcessLaw};
use crate::rng::Seeder;
use crate::stats::MeanSe;

/// Largest expected generation size simulated as a full tree.
pub const TREE_BUDGET: usize = 1 << 17;
/// Deepest full tree simulated.
pub const MAX_TREE_DEPTH: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub statistic: f64,
    pub threshold: f64,
    pub pass: bool,
    pub details: BTreeMap<String, f64>,
}

impl CheckReport {
    pub fn new(name: impl Into<String>, statistic: f64, threshold: f64, details: BTreeMap<String, f64>) -> Self {
        Self { name: name.into(), statistic, threshold, pass: statistic <= threshold, details }
    }
}

fn details<const K: usize>(pairs: [(&str, f64); K]) -> BTreeMap<String, f64> {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

/// How a tree expectation is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    /// Plain averages over trees drawn from the law.
    Direct,
    /// Trees drawn under the spine measure `W_n dP`, where
    /// `E[W_n] = 1 / E_spine[1 / W_n]`. In the boundary case `W_n -> 0`
    /// almost surely and its mean rests on rare trees, so plain averages
    /// run low with an understated SE; `1 / W_n` under the spine measure is
    /// far better behaved.
    SizeBiased,
}

impl Estimator {
    /// [`SizeBiased`](Self::SizeBiased) whenever the law admits it.
    pub fn for_law(law: &PointProcessLaw) -> Self {
        if law.check_size_biasable().is_ok() {
            Estimator::SizeBiased
        } else {
            Estimator::Direct
        }
    }
}

fn check_tree_size(law: &PointProcessLaw, n: usize) -> Result<()> {
    if n > MAX_TREE_DEPTH {
        return Err(Error::Precondition(format!("full trees are limited to {MAX_TREE_DEPTH} generations, got {n}")));
    }
    let expected = law.mean_offspring().powi(n as i32);
    if expected > TREE_BUDGET as f64 {
        return Err(Error::TreeTooLarge { expected, budget: TREE_BUDGET });
    }
    Ok(())
}

/// `W_n = sum_{|u| = n} exp(V(u))` of one tree; with `spine`, the tree is
/// drawn under the spine measure.
fn tree_w<R: Rng + ?Sized>(law: &PointProcessLaw, n: usize, spine: bool, rng: &mut R) -> Result<f64> {
    let mut gen = vec![0.0f64];
    let mut next = Vec::new();
    let mut pts = Vec::new();
    let mut spine_at = 0usize;
    for _ in 0..n {
        next.clear();
        let mut new_spine = 0;
        for (i, &x) in gen.iter().enumerate() {
            if spine && i == spine_at {
                let k = law.sample_size_biased_into(rng, &mut pts);
                new_spine = next.len() + k;
            } else {
                law.sample_into(rng, &mut pts);
            }
            next.extend(pts.iter().map(|l| x + l));
        }
        if next.len() > 16 * TREE_BUDGET {
            return Err(Error::TreeTooLarge { expected: next.len() as f64, budget: TREE_BUDGET });
        }
        spine_at = new_spine;
        std::mem::swap(&mut gen, &mut next);
    }
    Ok(gen.iter().map(|v| v.exp()).sum())
}

/// `|mean(W_n) - 1| <= 3 SE` over `reps` trees, and `W_n >= 0` throughout.
pub fn check_martingale(
    law: &PointProcessLaw,
    n: usize,
    reps: usize,
    estimator: Estimator,
    seeder: &Seeder,
) -> Result<CheckReport> {
    check_tree_size(law, n)?;
    if reps < 2 {
        return Err(Error::Precondition("need at least two trees".into()));
    }
    let spine = estimator == Estimator::SizeBiased;
    if spine {
        law.check_size_biasable()?;
    }
    let ws: Vec<f64> = (0..reps as u32)
        .into_par_iter()
        .map(|r| tree_w(law, n, spine, &mut seeder.stream(r)))
        .collect::<Result<_>>()?;
    let negative = ws.iter().filter(|w| !(**w >= 0.0)).count();
    let (mean, se) = if spine {
        let inv: Vec<f64> = ws.iter().map(|w| 1.0 / w).collect();
        let m = MeanSe::of(&inv);
        (1.0 / m.mean, m.se / (m.mean * m.mean))
    } else {
        let m = MeanSe::of(&ws);
        (m.mean, m.se)
    };
    let statistic = if negative > 0 { f64::INFINITY } else { (mean - 1.0).abs() };
    Ok(CheckReport::new(
        format!("martingale W_{n} has mean 1"),
        statistic,
        3.0 * se,
        details([
            ("n", n as f64),
            ("reps", reps as f64),
            ("mean", mean),
            ("se", se),
            ("negative", negative as f64),
            ("size_biased", spine as u8 as f64),
        ]),
    ))
}

/// Test functions `g(S_1, ..., S_n)` of an ancestral path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFn {
    Constant,
    /// `1{S_j >= -c for all j <= n}`.
    PrefixesAbove { c: f64 },
    /// `prod_j 1{S_j - S_{j-1} >= -c}`.
    StepsAbove { c: f64 },
    /// `1{S_n >= -c}`.
    EndAbove { c: f64 },
}

impl TestFn {
    pub fn eval(&self, path: &[f64]) -> f64 {
        let ok = match *self {
            TestFn::Constant => true,
            TestFn::PrefixesAbove { c } => path.iter().all(|&s| s >= -c),
            TestFn::StepsAbove { c } => {
                let mut prev = 0.0;
                path.iter().all(|&s| {
                    let step = s - prev;
                    prev = s;
                    step >= -c
                })
            }
            TestFn::EndAbove { c } => path.last().is_none_or(|&s| s >= -c),
        };
        ok as u8 as f64
    }

    pub fn label(&self) -> String {
        match *self {
            TestFn::Constant => "g = 1".into(),
            TestFn::PrefixesAbove { c } => format!("g = 1{{S_j >= -{c}}}"),
            TestFn::StepsAbove { c } => format!("g = prod 1{{X_j >= -{c}}}"),
            TestFn::EndAbove { c } => format!("g = 1{{S_n >= -{c}}}"),
        }
    }
}

const MANY_TO_ONE_MAX_N: usize = 6;

/// Tree side `E[sum_{|u|=n} g(V(u_1), ..., V(u_n))]` against the spine side
/// `E[exp(-S_n) g(S_1, ..., S_n)]`, both by Monte Carlo on independent
/// streams; passes within 3 combined SE.
pub fn check_many_to_one(
    law: &PointProcessLaw,
    g: TestFn,
    n: usize,
    reps: usize,
    seeder: &Seeder,
) -> Result<CheckReport> {
    if n > MANY_TO_ONE_MAX_N {
        return Err(Error::Precondition(format!("many-to-one check needs n <= {MANY_TO_ONE_MAX_N}")));
    }
    check_tree_size(law, n)?;
    law.check_size_biasable()?;
    let tree_side: Vec<f64> = (0..reps as u32)
        .into_par_iter()
        .map(|r| {
            let mut rng = seeder.derive(1).stream(r);
            let mut paths: Vec<Vec<f64>> = vec![Vec::new()];
            let mut pts = Vec::new();
            for _ in 0..n {
                let mut next = Vec::new();
                for p in &paths {
                    law.sample_into(&mut rng, &mut pts);
                    let x = p.last().copied().unwrap_or(0.0);
                    for l in &pts {
                        let mut q = p.clone();
                        q.push(x + l);
                        next.push(q);
                    }
                }
                paths = next;
            }
            paths.iter().map(|p| g.eval(p)).sum::<f64>()
        })
        .collect();
    let spine_side: Vec<f64> = (0..reps as u32)
        .into_par_iter()
        .map(|r| {
            let mut rng = seeder.derive(2).stream(r);
            let mut path = Vec::with_capacity(n);
            let mut s = 0.0;
            for _ in 0..n {
                s += law.spine_step(&mut rng).0;
                path.push(s);
            }
            (-s).exp() * g.eval(&path)
        })
        .collect();
    let (lhs, rhs) = (MeanSe::of(&tree_side), MeanSe::of(&spine_side));
    let se = lhs.combined_se(&rhs);
    Ok(CheckReport::new(
        format!("many-to-one, {}, n = {n}", g.label()),
        (lhs.mean - rhs.mean).abs(),
        3.0 * se,
        details([
            ("n", n as f64),
            ("reps", reps as f64),
            ("tree_mean", lhs.mean),
            ("tree_se", lhs.se),
            ("spine_mean", rhs.mean),
            ("spine_se", rhs.se),
        ]),
    ))
}

/// Exact many-to-one on a finite-support law by enumerating every tree of
/// depth `n` (tree side) and every spine path (spine side, with atom
/// weights `p exp(l)`). Agreement to `1e-12`.
pub fn check_many_to_one_exact(law: &PointProcessLaw, g: TestFn, n: usize) -> Result<CheckReport> {
    let Family::Finite { outcomes } = &law.family else {
        return Err(Error::Precondition("exact enumeration needs a finite-support law".into()));
    };
    if n > 4 {
        return Err(Error::Precondition("exact enumeration is limited to n <= 4".into()));
    }
    let atoms: Vec<(f64, f64)> = outcomes
        .iter()
        .flat_map(|o| o.points.iter().map(move |&p| (o.prob, law.scale * p + law.shift)))
        .collect();
    fn tree(atoms: &[(f64, f64)], g: &TestFn, n: usize, path: &mut Vec<f64>) -> f64 {
        if path.len() == n {
            return g.eval(path);
        }
        let x = path.last().copied().unwrap_or(0.0);
        let mut total = 0.0;
        for &(p, l) in atoms {
            path.push(x + l);
            total += p * tree(atoms, g, n, path);
            path.pop();
        }
        total
    }
    fn spine(atoms: &[(f64, f64)], g: &TestFn, n: usize, path: &mut Vec<f64>, weight: f64) -> f64 {
        let x = path.last().copied().unwrap_or(0.0);
        if path.len() == n {
            return weight * (-x).exp() * g.eval(path);
        }
        let mut total = 0.0;
        for &(p, l) in atoms {
            path.push(x + l);
            total += spine(atoms, g, n, path, weight * p * l.exp());
            path.pop();
        }
        total
    }
    let lhs = tree(&atoms, &g, n, &mut Vec::new());
    let rhs = spine(&atoms, &g, n, &mut Vec::new(), 1.0);
    Ok(CheckReport::new(
        format!("many-to-one by enumeration, {}, n = {n}", g.label()),
        (lhs - rhs).abs(),
        1e-12,
        details([("n", n as f64), ("tree", lhs), ("spine", rhs)]),
    ))
}
