use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::PointProcessLaw;
use crate::error::{Error, Result};
use crate::rng::{chunked, Seeder, Stream, CHUNK};
use crate::stats::pairwise_sum;

/// Largest `l` with `l^2 exp(l)` finite.
const LOG_MAX: f64 = 700.0;

/// How [`boundary_moments`] estimates the three moments.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentMethod {
    /// Through the spine: with `X` the spine child's position,
    /// `E[sum g(l) exp(l)] = E[sum exp(l)] E[g(X)]` and
    /// `E[sum exp(l)] = E[#L] / E[exp(-X)]`. For the heavy-tailed shipped
    /// laws every variable involved has a finite variance, while
    /// `sum l exp(l)` under `L` does not.
    #[default]
    Spine,
    /// Plain averages of `sum exp(l)`, `sum l exp(l)`, `sum l^2 exp(l)`
    /// over draws of `L`.
    Direct,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryDiagnostics {
    /// `E[sum exp(l)]`.
    pub m_exp: f64,
    /// `E[sum l exp(l)]`.
    pub m_lin: f64,
    /// `E[sum l^2 exp(l)]`.
    pub m_quad: f64,
    pub se_exp: f64,
    pub se_lin: f64,
    pub se_quad: f64,
    pub n_samples: usize,
    pub method: MomentMethod,
    /// Empty Poisson draws discarded while sampling (direct method only).
    pub empty_redraws: u64,
}

impl BoundaryDiagnostics {
    /// Both constraints hold within `max(tol, 3 se)`.
    pub fn passes(&self, tol: f64) -> bool {
        (self.m_exp - 1.0).abs() <= tol.max(3.0 * self.se_exp) && self.m_lin.abs() <= tol.max(3.0 * self.se_lin)
    }
}

/// Runs `f` once per sample in fixed-size chunks, chunk `c` on stream `c`,
/// and returns per-chunk results in chunk order.
/// Column sums of per-sample rows, pairwise within each chunk.
fn sums<const K: usize>(rows: &[[f64; K]]) -> [f64; K] {
    std::array::from_fn(|k| pairwise_sum(&rows.iter().map(|r| r[k]).collect::<Vec<_>>()))
}

fn total<const K: usize>(chunks: &[[f64; K]]) -> [f64; K] {
    sums(chunks)
}

fn direct(law: &PointProcessLaw, n: usize, seeder: &Seeder) -> Result<BoundaryDiagnostics> {
    let row = |rng: &mut Stream, buf: &mut Vec<f64>| -> Result<([f64; 3], u64)> {
        let redraws = law.sample_into(rng, buf);
        let max = buf.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if max > LOG_MAX {
            return Err(Error::MomentOverflow(format!("point {max} exceeds {LOG_MAX}; exp(l) is not representable")));
        }
        // shift by the sample maximum, rescale once
        let (mut e, mut l, mut q) = (0.0, 0.0, 0.0);
        for &x in buf.iter() {
            let w = (x - max).exp();
            e += w;
            l += x * w;
            q += x * x * w;
        }
        let scale = max.exp();
        Ok(([e * scale, l * scale, q * scale], redraws))
    };
    let first = chunked(n, seeder, |rng, m| -> Result<([f64; 3], u64)> {
        let mut buf = Vec::new();
        let mut rows = Vec::with_capacity(m);
        let mut redraws = 0;
        for _ in 0..m {
            let (r, k) = row(rng, &mut buf)?;
            rows.push(r);
            redraws += k;
        }
        Ok((sums(&rows), redraws))
    });
    let first: Vec<([f64; 3], u64)> = first.into_iter().collect::<Result<_>>()?;
    let nf = n as f64;
    let mean = total(&first.iter().map(|c| c.0).collect::<Vec<_>>()).map(|v| v / nf);
    // second pass over the same streams for centred squares
    let second = chunked(n, seeder, |rng, m| {
        let mut buf = Vec::new();
        let rows: Vec<[f64; 3]> = (0..m)
            .map(|_| {
                let (r, _) = row(rng, &mut buf).expect("checked on the first pass");
                std::array::from_fn(|k| (r[k] - mean[k]).powi(2))
            })
            .collect();
        sums(&rows)
    });
    let sq = total(&second);
    let se = sq.map(|v| (v / (nf - 1.0) / nf).sqrt());
    Ok(BoundaryDiagnostics {
        m_exp: mean[0],
        m_lin: mean[1],
        m_quad: mean[2],
        se_exp: se[0],
        se_lin: se[1],
        se_quad: se[2],
        n_samples: n,
        method: MomentMethod::Direct,
        empty_redraws: first.iter().map(|c| c.1).sum(),
    })
}

fn spine(law: &PointProcessLaw, n: usize, seeder: &Seeder) -> Result<BoundaryDiagnostics> {
    law.check_size_biasable()?;
    let (count_seeder, spine_seeder) = (seeder.derive(1), seeder.derive(2));
    let nf = n as f64;
    let counts = total(&chunked(n, &count_seeder, |rng, m| {
        let rows: Vec<[f64; 2]> = (0..m)
            .map(|_| {
                let c = law.sample_count(rng) as f64;
                [c, c * c]
            })
            .collect();
        sums(&rows)
    }));
    let c_mean = counts[0] / nf;
    let var_c = ((counts[1] - nf * c_mean * c_mean) / (nf - 1.0)).max(0.0) / nf;

    let row = |rng: &mut Stream| {
        let x = law.spine_point(rng);
        [(-x).exp(), x, x * x]
    };
    let first = total(&chunked(n, &spine_seeder, |rng, m| sums(&(0..m).map(|_| row(rng)).collect::<Vec<_>>())));
    let [e, a, q] = first.map(|v| v / nf);
    let second = total(&chunked(n, &spine_seeder, |rng, m| {
        let rows: Vec<[f64; 3]> = (0..m)
            .map(|_| {
                let r = row(rng);
                [(r[0] - e).powi(2), (r[1] - a * r[0] / e).powi(2), (r[2] - q * r[0] / e).powi(2)]
            })
            .collect();
        sums(&rows)
    }));
    let [var_e, var_a, var_q] = second.map(|v| v / (nf - 1.0) / nf);
    let ratio = c_mean / e;
    let d = BoundaryDiagnostics {
        m_exp: ratio,
        m_lin: ratio * a,
        m_quad: ratio * q,
        se_exp: (var_c / (e * e) + ratio * ratio * var_e / (e * e)).sqrt(),
        se_lin: ((a / e).powi(2) * var_c + ratio * ratio * var_a).sqrt(),
        se_quad: ((q / e).powi(2) * var_c + ratio * ratio * var_q).sqrt(),
        n_samples: n,
        method: MomentMethod::Spine,
        empty_redraws: 0,
    };
    Ok(d)
}

/// Monte Carlo estimates of `E[sum exp(l)]`, `E[sum l exp(l)]` and
/// `E[sum l^2 exp(l)]` with i.i.d. standard errors (delta method for the
/// spine ratios). Samples are drawn in fixed chunks on derived streams,
/// so the result depends only on the seeder and `n_samples`.
pub fn boundary_moments(law: &PointProcessLaw, n_samples: usize, seeder: &Seeder) -> Result<BoundaryDiagnostics> {
    boundary_moments_with(law, n_samples, seeder, MomentMethod::Spine)
}

pub fn boundary_moments_with(
    law: &PointProcessLaw,
    n_samples: usize,
    seeder: &Seeder,
    method: MomentMethod,
) -> Result<BoundaryDiagnostics> {
    if n_samples < 1000 {
        return Err(Error::Precondition(format!("n_samples = {n_samples} below 1000")));
    }
    let d = match method {
        MomentMethod::Direct => direct(law, n_samples, seeder)?,
        MomentMethod::Spine => spine(law, n_samples, seeder)?,
    };
    if ![d.m_exp, d.m_lin, d.m_quad, d.se_exp, d.se_lin, d.se_quad].iter().all(|v| v.is_finite()) {
        return Err(Error::MomentOverflow(format!("non-finite moment estimate {d:?}")));
    }
    Ok(d)
}

/// Result of [`calibrate_boundary_case`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub law: PointProcessLaw,
    /// Root of `psi` in units of the input law's points.
    pub theta_star: f64,
    /// `-phi(theta_star)`, the shift applied after scaling.
    pub shift: f64,
    /// Standard error of `theta_star` (zero when pinned at the edge).
    pub se_theta: f64,
    /// True when `theta_star` sits on the exponential-moment edge.
    pub at_edge: bool,
    pub diagnostics: BoundaryDiagnostics,
}

/// Common-random-number sample of point lists, stored flat.
struct Pool {
    points: Vec<f64>,
    ends: Vec<usize>,
}

struct PsiEval {
    phi: f64,
    psi: f64,
    se_psi: f64,
    /// `d psi / d theta = theta phi''`.
    slope: f64,
}

impl Pool {
    fn draw(law: &PointProcessLaw, n: usize, seeder: &Seeder) -> Pool {
        let sizes: Vec<usize> = (0..n.div_ceil(CHUNK)).map(|c| CHUNK.min(n - c * CHUNK)).collect();
        let parts: Vec<(Vec<f64>, Vec<usize>)> = sizes
            .par_iter()
            .enumerate()
            .map(|(c, &m)| {
                let mut rng = seeder.stream(c as u32);
                let mut buf = Vec::new();
                let (mut pts, mut lens) = (Vec::with_capacity(2 * m), Vec::with_capacity(m));
                for _ in 0..m {
                    law.sample_into(&mut rng, &mut buf);
                    pts.extend_from_slice(&buf);
                    lens.push(buf.len());
                }
                (pts, lens)
            })
            .collect();
        let mut points = Vec::new();
        let mut ends = Vec::with_capacity(n);
        for (pts, lens) in parts {
            for len in lens {
                let last = ends.last().copied().unwrap_or(0);
                ends.push(last + len);
            }
            points.extend_from_slice(&pts);
        }
        Pool { points, ends }
    }

    fn eval(&self, theta: f64) -> PsiEval {
        let m = self.points.iter().map(|x| theta * x).fold(f64::NEG_INFINITY, f64::max);
        let n = self.ends.len();
        let per: Vec<[f64; 3]> = (0..n)
            .into_par_iter()
            .map(|i| {
                let start = if i == 0 { 0 } else { self.ends[i - 1] };
                let mut s = [0.0; 3];
                for &x in &self.points[start..self.ends[i]] {
                    let w = (theta * x - m).exp();
                    s[0] += w;
                    s[1] += x * w;
                    s[2] += x * x * w;
                }
                s
            })
            .collect();
        let col = |k: usize| pairwise_sum(&per.iter().map(|s| s[k]).collect::<Vec<_>>()) / n as f64;
        let (b, a, c) = (col(0), col(1), col(2));
        let d1 = a / b;
        let d2 = c / b - d1 * d1;
        let phi = m + b.ln();
        let psi = theta * d1 - phi;
        // delta-method influence of each sample on psi
        let infl: Vec<f64> = per.iter().map(|s| (theta * (s[1] - d1 * s[0]) - (s[0] - b)) / b).collect();
        let mean_i = pairwise_sum(&infl) / n as f64;
        let var = pairwise_sum(&infl.iter().map(|v| (v - mean_i).powi(2)).collect::<Vec<_>>()) / (n - 1) as f64;
        PsiEval { phi, psi, se_psi: (var / n as f64).sqrt(), slope: theta * d2 }
    }
}

/// Solves `psi(theta) = theta phi'(theta) - phi(theta) = 0` on Monte Carlo
/// estimates of `phi(theta) = log E[sum exp(theta l)]` and maps every point
/// to `theta* l - phi(theta*)`.
///
/// All `theta` are evaluated on one pool of samples, so the estimated `psi`
/// is a smooth increasing function and bisection is exact on it. If the
/// family's exponential moments end at a finite edge and `psi` there is
/// zero within noise, the root is pinned to the edge. A fresh sample then
/// checks the calibrated moments.
pub fn calibrate_boundary_case(
    raw: &PointProcessLaw,
    tol: f64,
    n_samples: usize,
    seeder: &Seeder,
) -> Result<Calibration> {
    if !(tol > 0.0) {
        return Err(Error::Precondition(format!("tol = {tol} must be positive")));
    }
    if n_samples < 1000 {
        return Err(Error::Precondition(format!("n_samples = {n_samples} below 1000")));
    }
    raw.validate()?;
    let pool = Pool::draw(raw, n_samples, &seeder.derive(4));
    let edge = raw.tilt_edge();
    let band = |e: &PsiEval| (3.0 * e.se_psi).max(f64::EPSILON);

    let mut lo = edge.map_or(1e-3, |e| (0.5 * e).min(1e-3));
    let at_lo = pool.eval(lo);
    if !(at_lo.psi < -band(&at_lo)) {
        return Err(Error::NoRoot(format!(
            "psi({lo}) = {} is not below zero beyond noise (se {})",
            at_lo.psi, at_lo.se_psi
        )));
    }
    let mut hi = edge.map_or(1.0, |e| e.min(1.0));
    let mut pinned = None;
    loop {
        if edge == Some(hi) {
            // The pool cannot see the tail that carries phi' at the edge;
            // evaluate psi there through the spine of the edge-tilted law.
            let tilted = raw.compose(hi, 0.0);
            let m = boundary_moments(&tilted, n_samples, &seeder.derive(3))?;
            let psi = m.m_lin / m.m_exp - m.m_exp.ln();
            let se = m.se_lin.hypot(m.se_exp) / m.m_exp;
            if psi.abs() <= (3.0 * se).max(tol) {
                pinned = Some(m.m_exp.ln());
                break;
            }
            if psi < 0.0 {
                return Err(Error::NoRoot(format!(
                    "psi stays negative up to the moment edge {hi}: psi = {psi} (se {se})"
                )));
            }
            break;
        }
        let at_hi = pool.eval(hi);
        if at_hi.psi > band(&at_hi) {
            break;
        }
        lo = hi;
        hi *= 2.0;
        if let Some(e) = edge {
            hi = hi.min(e);
        }
        if hi > 1e6 {
            return Err(Error::NoRoot("psi has no sign change on (0, 1e6]".into()));
        }
    }

    let (theta, se_theta, phi) = if let Some(phi) = pinned {
        (hi, 0.0, phi)
    } else {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi || hi - lo <= 1e-6 * tol * hi {
                break;
            }
            if pool.eval(mid).psi < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let theta = 0.5 * (lo + hi);
        let e = pool.eval(theta);
        let se_theta = e.se_psi / e.slope;
        if !(se_theta <= tol) {
            return Err(Error::NoisyEstimate(format!(
                "theta* = {theta} has standard error {se_theta} above tolerance {tol}; raise n_samples"
            )));
        }
        (theta, se_theta, e.phi)
    };
    let law = raw.compose(theta, -phi);
    law.check_size_biasable()?;
    let diagnostics = boundary_moments(&law, n_samples, &seeder.derive(5))?;
    if !diagnostics.passes(tol) {
        return Err(Error::NoisyEstimate(format!("calibrated law fails the moment check: {diagnostics:?}")));
    }
    Ok(Calibration { law, theta_star: theta, shift: -phi, se_theta, at_edge: pinned.is_some(), diagnostics })
}
