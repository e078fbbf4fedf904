//! Small-deviation (corridor) probabilities of random walks.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Seeder;
use crate::stats::MeanSe;

/// A source of i.i.d. `(X, xi)` pairs: a walk step and its decoration.
pub trait StepSampler: Sync {
    fn step<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64);
}

/// The lazy simple walk: `-1, 0, +1` with probabilities `1/4, 1/2, 1/4`,
/// decoration identically zero.
#[derive(Debug, Clone, Copy, Default)]
pub struct LazyWalk;

impl StepSampler for LazyWalk {
    fn step<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        let u: u32 = rng.random_range(0..4);
        let x = match u {
            0 => -1.0,
            3 => 1.0,
            _ => 0.0,
        };
        (x, 0.0)
    }
}

/// Piecewise-linear corridor `(t, f(t), g(t))` on `[0, 1]`. Serialized as a
/// JSON array of `[t, f, g]` triples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 3]>", into = "Vec<[f64; 3]>")]
pub struct Corridor {
    points: Vec<[f64; 3]>,
}

impl TryFrom<Vec<[f64; 3]>> for Corridor {
    type Error = Error;
    fn try_from(points: Vec<[f64; 3]>) -> Result<Self> {
        Corridor::new(points)
    }
}

impl From<Corridor> for Vec<[f64; 3]> {
    fn from(c: Corridor) -> Self {
        c.points
    }
}

impl Corridor {
    pub fn new(points: Vec<[f64; 3]>) -> Result<Self> {
        let bad = |m: &str| Err(Error::Precondition(format!("corridor: {m}")));
        if points.len() < 2 {
            return bad("needs at least two breakpoints");
        }
        if points[0][0] != 0.0 || points[points.len() - 1][0] != 1.0 {
            return bad("breakpoints must span t = 0 to t = 1");
        }
        if points.windows(2).any(|w| w[1][0] <= w[0][0]) {
            return bad("breakpoint times must increase");
        }
        if points.iter().any(|p| p.iter().any(|v| !v.is_finite()) || p[1] >= p[2]) {
            return bad("need f < g at every breakpoint");
        }
        if !(points[0][1] < 0.0 && 0.0 < points[0][2]) {
            return bad("need f(0) < 0 < g(0)");
        }
        Ok(Corridor { points })
    }

    /// Constant corridor `[lower, upper]`.
    pub fn flat(lower: f64, upper: f64) -> Result<Self> {
        Corridor::new(vec![[0.0, lower, upper], [1.0, lower, upper]])
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    /// `(f(t), g(t))` by linear interpolation.
    pub fn bounds(&self, t: f64) -> (f64, f64) {
        let p = &self.points;
        let k = p.partition_point(|q| q[0] <= t).clamp(1, p.len() - 1) - 1;
        let w = ((t - p[k][0]) / (p[k + 1][0] - p[k][0])).clamp(0.0, 1.0);
        (p[k][1] + w * (p[k + 1][1] - p[k][1]), p[k][2] + w * (p[k + 1][2] - p[k][2]))
    }

    /// `int_0^1 ds / (g(s) - f(s))^alpha`, exact on each linear segment.
    pub fn width_integral(&self, alpha: f64) -> f64 {
        self.points
            .windows(2)
            .map(|w| {
                let h = w[1][0] - w[0][0];
                let (w0, w1) = (w[0][2] - w[0][1], w[1][2] - w[1][1]);
                if (w1 - w0).abs() <= 1e-14 * w0.max(w1) {
                    h / w0.powf(alpha)
                } else if alpha == 1.0 {
                    h * (w1 / w0).ln() / (w1 - w0)
                } else {
                    h * (w1.powf(1.0 - alpha) - w0.powf(1.0 - alpha)) / ((1.0 - alpha) * (w1 - w0))
                }
            })
            .sum()
    }
}

/// A corridor at horizon `n` and space scale `a_n`, optionally requiring
/// every decoration to stay at or below a threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorridorSpec {
    pub corridor: Corridor,
    pub a_n: f64,
    pub n: usize,
    #[serde(default)]
    pub decoration_threshold: Option<f64>,
}

impl CorridorSpec {
    pub fn new(corridor: Corridor, a_n: f64, n: usize) -> Result<Self> {
        if !(a_n > 0.0) || n == 0 {
            return Err(Error::Precondition(format!("need a_n > 0 and n >= 1, got {a_n}, {n}")));
        }
        Ok(CorridorSpec { corridor, a_n, n, decoration_threshold: None })
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.decoration_threshold = Some(threshold);
        self
    }

    /// Precomputed `[a_n f(j/n), a_n g(j/n)]` for `j = 0..=n`.
    fn windows(&self) -> Vec<(f64, f64)> {
        (0..=self.n)
            .map(|j| {
                let (f, g) = self.corridor.bounds(j as f64 / self.n as f64);
                (self.a_n * f, self.a_n * g)
            })
            .collect()
    }

    fn admits(&self, window: (f64, f64), s: f64, xi: f64) -> bool {
        s >= window.0 && s <= window.1 && self.decoration_threshold.is_none_or(|t| xi <= t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorridorEstimate {
    pub p_hat: f64,
    pub se: f64,
    pub reps: usize,
}

/// One path of the walk; true if it stays in the corridor up to `n`.
fn stays<S: StepSampler, R: Rng + ?Sized>(
    spec: &CorridorSpec,
    windows: &[(f64, f64)],
    step: &S,
    rng: &mut R,
) -> bool {
    let mut s = 0.0;
    for w in &windows[1..] {
        let (x, xi) = step.step(rng);
        s += x;
        if !spec.admits(*w, s, xi) {
            return false;
        }
    }
    true
}

/// Per-replica indicators; replica `r` always uses stream `r`, so two
/// corridors evaluated with the same seeder see the same step sequences.
pub fn corridor_indicators<S: StepSampler>(
    spec: &CorridorSpec,
    step: &S,
    n_reps: usize,
    seeder: &Seeder,
) -> Vec<bool> {
    let windows = spec.windows();
    (0..n_reps as u32)
        .into_par_iter()
        .map(|r| stays(spec, &windows, step, &mut seeder.stream(r)))
        .collect()
}

/// Plain Monte Carlo estimate of `P(S_j / a_n in [f(j/n), g(j/n)], j <= n)`.
pub fn corridor_probability<S: StepSampler>(
    spec: &CorridorSpec,
    step: &S,
    n_reps: usize,
    seeder: &Seeder,
) -> Result<CorridorEstimate> {
    let hits = corridor_indicators(spec, step, n_reps, seeder);
    let xs: Vec<f64> = hits.iter().map(|&h| f64::from(u8::from(h))).collect();
    let m = MeanSe::of(&xs);
    if m.mean == 0.0 {
        // exact binomial 95% bound: (1 - p)^n = 0.05
        let upper = 1.0 - 0.05f64.powf(1.0 / n_reps as f64);
        return Err(Error::ZeroHits { reps: n_reps, upper });
    }
    Ok(CorridorEstimate { p_hat: m.mean, se: m.se, reps: n_reps })
}

/// Corridor probability for rare events: `ensembles` independent
/// populations of `population` walkers, each resampled after every step
/// (dead walkers replaced by copies of uniform survivors). Each ensemble
/// yields the unbiased product of survival fractions; the estimate is
/// their mean, returned together with `log(p_hat)`.
pub fn corridor_probability_resampled<S: StepSampler>(
    spec: &CorridorSpec,
    step: &S,
    population: usize,
    ensembles: usize,
    seeder: &Seeder,
) -> Result<(CorridorEstimate, f64)> {
    if population < 2 || ensembles < 2 {
        return Err(Error::Precondition("need population >= 2 and ensembles >= 2".into()));
    }
    let windows = spec.windows();
    let logs: Vec<f64> = (0..ensembles as u32)
        .into_par_iter()
        .map(|e| {
            let mut rng = seeder.stream(e);
            let mut pos = vec![0.0f64; population];
            let mut ok = vec![true; population];
            let mut survivors = Vec::with_capacity(population);
            let mut log_p = 0.0;
            for w in &windows[1..] {
                survivors.clear();
                for (x, flag) in pos.iter_mut().zip(ok.iter_mut()) {
                    let (dx, xi) = step.step(&mut rng);
                    *x += dx;
                    *flag = spec.admits(*w, *x, xi);
                    if *flag {
                        survivors.push(*x);
                    }
                }
                if survivors.is_empty() {
                    return f64::NEG_INFINITY;
                }
                log_p += (survivors.len() as f64 / population as f64).ln();
                for (x, flag) in pos.iter_mut().zip(&ok) {
                    if !flag {
                        *x = survivors[rng.random_range(0..survivors.len())];
                    }
                }
            }
            log_p
        })
        .collect();
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::ZeroHits { reps: ensembles * population, upper: f64::NAN });
    }
    let scaled: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let m = MeanSe::of(&scaled);
    let log_p = max + m.mean.ln();
    let est = CorridorEstimate { p_hat: log_p.exp(), se: m.se * max.exp(), reps: ensembles };
    Ok((est, log_p))
}

/// Limit of `a_n^alpha / (n L*(a_n)) log P(corridor)`:
/// `-C* int_0^1 ds / (g(s) - f(s))^alpha`.
pub fn mogulskii_prediction(corridor: &Corridor, alpha: f64, cstar: f64) -> f64 {
    -cstar * corridor.width_integral(alpha)
}
