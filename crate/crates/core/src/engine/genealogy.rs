use rand::Rng;

use crate::error::{Error, Result};
use crate::laws::PointProcessLaw;

/// Budget on stored genealogy nodes (`N * steps`).
const MAX_NODES: usize = 50_000_000;

/// Runs an `n`-BRW from `n` particles at the origin while recording every
/// selected particle's parent, and returns the positions of the ancestors of
/// the final leader at generations `0..=steps`.
///
/// Draws are consumed exactly as in [`super::Engine`], so the last entry
/// equals the leader of a production run on the same stream.
pub fn leader_ancestry<R: Rng + ?Sized>(
    law: &PointProcessLaw,
    n: usize,
    steps: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::Precondition("N must be positive".into()));
    }
    if n.saturating_mul(steps + 1) > MAX_NODES {
        return Err(Error::Precondition(format!(
            "genealogy of {n} x {steps} nodes exceeds the budget of {MAX_NODES}"
        )));
    }
    // node = (parent node, position)
    let mut nodes: Vec<(u32, f64)> = vec![(u32::MAX, 0.0); n];
    let mut current: Vec<u32> = (0..n as u32).collect();
    let mut children: Vec<(f64, u32)> = Vec::new();
    let mut pts = Vec::new();
    for _ in 0..steps {
        children.clear();
        for &id in &current {
            let x = nodes[id as usize].1;
            law.sample_into(rng, &mut pts);
            children.extend(pts.iter().map(|l| (x + l, id)));
        }
        children.sort_by(|a, b| b.0.total_cmp(&a.0));
        current.clear();
        for &(x, parent) in &children[..n] {
            current.push(nodes.len() as u32);
            nodes.push((parent, x));
        }
    }
    let mut path = Vec::with_capacity(steps + 1);
    let mut id = current[0];
    while id != u32::MAX {
        let (parent, x) = nodes[id as usize];
        path.push(x);
        id = parent;
    }
    path.reverse();
    debug_assert_eq!(path.len(), steps + 1);
    Ok(path)
}

/// Scans `x_0..x_n` for the first `i <= n - m` with `x_{i+j} - x_i >= v j`
/// for all `j <= m`. Such a window is guaranteed whenever
/// `x_n > (n - m) v + K m`, given increments bounded by `K > v`.
pub fn find_ascending_window(x: &[f64], v: f64, k: f64, m: usize) -> Result<Option<usize>> {
    if x.is_empty() {
        return Err(Error::Precondition("empty sequence".into()));
    }
    let n = x.len() - 1;
    if m > n || v >= k {
        return Err(Error::Precondition(format!("need m <= n and v < K (m {m}, n {n}, v {v}, K {k})")));
    }
    if let Some(index) = (0..n).find(|&i| x[i + 1] - x[i] > k) {
        return Err(Error::StepBoundViolated { index, increment: x[index + 1] - x[index], bound: k });
    }
    Ok((0..=n - m).find(|&i| (1..=m).all(|j| x[i + j] - x[i] >= v * j as f64)))
}
