use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Engine, Population};
use crate::error::{Error, Result};
use crate::laws::PointProcessLaw;
use crate::rng::Seeder;
use crate::stats::{quantile, MeanSe};

/// Front positions of one replica at one checkpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckpointRow {
    pub n: usize,
    pub x1: f64,
    pub x_last: f64,
    pub diameter: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicaTrace {
    pub replica: u32,
    pub rows: Vec<CheckpointRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedEstimate {
    /// Mean of `x_steps(1) / steps` over replicas.
    pub v_hat: f64,
    pub se: f64,
    /// Minimum over checkpoints of `mean x_n(1) / n`.
    pub bracket_hi: f64,
    pub bracket_hi_se: f64,
    /// Maximum over checkpoints of `mean x_n(N) / n`.
    pub bracket_lo: f64,
    pub bracket_lo_se: f64,
    pub n: usize,
    pub steps: usize,
    pub replicas: usize,
}

impl SpeedEstimate {
    pub fn brackets_consistent(&self) -> bool {
        let se = self.bracket_lo_se.hypot(self.bracket_hi_se);
        self.bracket_lo <= self.bracket_hi + 3.0 * se
            && self.v_hat >= self.bracket_lo - 3.0 * self.se.hypot(self.bracket_lo_se)
            && self.v_hat <= self.bracket_hi + 3.0 * self.se.hypot(self.bracket_hi_se)
    }
}

/// Diameter summary at one checkpoint, across replicas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CloudRow {
    pub n: usize,
    pub q10: f64,
    pub median: f64,
    pub q90: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CloudStats {
    pub rows: Vec<CloudRow>,
}

/// Powers of two below `steps`, then `steps` itself.
pub fn default_checkpoints(steps: usize) -> Vec<usize> {
    let mut v: Vec<usize> = (0..).map(|k| 1usize << k).take_while(|&c| c < steps).collect();
    v.push(steps);
    v
}

fn normalize(checkpoints: &[usize], steps: usize) -> Vec<usize> {
    let mut v: Vec<usize> = checkpoints.iter().copied().filter(|&c| c >= 1 && c <= steps).collect();
    v.push(steps);
    v.sort_unstable();
    v.dedup();
    v
}

/// Runs `replicas` independent `n`-BRWs from `n` particles at the origin,
/// replica `r` on stream `r` of `seeder`. Checkpoints outside `1..=steps`
/// are ignored; `steps` is always recorded.
pub fn speed_traces(
    law: &PointProcessLaw,
    n: usize,
    steps: usize,
    replicas: usize,
    checkpoints: &[usize],
    seeder: &Seeder,
) -> Result<Vec<ReplicaTrace>> {
    if steps < 100 {
        return Err(Error::Precondition(format!("steps = {steps} must be at least 100")));
    }
    if n == 0 || replicas == 0 {
        return Err(Error::Precondition("N and replicas must be positive".into()));
    }
    law.validate()?;
    let marks = normalize(checkpoints, steps);
    Ok((0..replicas as u32)
        .into_par_iter()
        .map(|replica| {
            let mut rng = seeder.stream(replica);
            let mut engine = Engine::new(law, n);
            let mut pop = Population::at(n, 0.0);
            let mut rows = Vec::with_capacity(marks.len());
            let mut next = marks.iter().peekable();
            for step in 1..=steps {
                engine.step(&mut pop, &mut rng);
                if next.peek() == Some(&&step) {
                    next.next();
                    rows.push(CheckpointRow {
                        n: step,
                        x1: pop.leader(),
                        x_last: pop.last(),
                        diameter: pop.diameter(),
                    });
                }
            }
            ReplicaTrace { replica, rows }
        })
        .collect())
}

pub fn summarize_traces(traces: &[ReplicaTrace], n: usize) -> (SpeedEstimate, CloudStats) {
    assert!(!traces.is_empty());
    let marks: Vec<usize> = traces[0].rows.iter().map(|r| r.n).collect();
    let column = |k: usize, f: &dyn Fn(&CheckpointRow) -> f64| -> Vec<f64> {
        traces.iter().map(|t| f(&t.rows[k])).collect()
    };
    let mut hi = (f64::INFINITY, 0.0);
    let mut lo = (f64::NEG_INFINITY, 0.0);
    let mut rows = Vec::with_capacity(marks.len());
    for (k, &m) in marks.iter().enumerate() {
        let top = MeanSe::of(&column(k, &|r| r.x1 / m as f64));
        let bottom = MeanSe::of(&column(k, &|r| r.x_last / m as f64));
        if top.mean < hi.0 {
            hi = (top.mean, top.se);
        }
        if bottom.mean > lo.0 {
            lo = (bottom.mean, bottom.se);
        }
        let d = column(k, &|r| r.diameter);
        rows.push(CloudRow {
            n: m,
            q10: quantile(&d, 0.1),
            median: quantile(&d, 0.5),
            q90: quantile(&d, 0.9),
            max: d.iter().copied().fold(0.0, f64::max),
        });
    }
    let last = marks.len() - 1;
    let steps = marks[last];
    let v = MeanSe::of(&column(last, &|r| r.x1 / steps as f64));
    (
        SpeedEstimate {
            v_hat: v.mean,
            se: v.se,
            bracket_hi: hi.0,
            bracket_hi_se: hi.1,
            bracket_lo: lo.0,
            bracket_lo_se: lo.1,
            n,
            steps,
            replicas: traces.len(),
        },
        CloudStats { rows },
    )
}

pub fn estimate_speed(
    law: &PointProcessLaw,
    n: usize,
    steps: usize,
    replicas: usize,
    checkpoints: &[usize],
    seeder: &Seeder,
) -> Result<(SpeedEstimate, CloudStats)> {
    let traces = speed_traces(law, n, steps, replicas, checkpoints, seeder)?;
    Ok(summarize_traces(&traces, n))
}
