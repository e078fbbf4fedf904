//! Reproduction laws.
//!
//! A law is a parametric family of finite point processes followed by an
//! affine map `x -> scale * x + shift` applied to every point. Families
//! sample *raw* points; calibration only ever touches the affine map.
//!
//! Every family knows how to sample its size-biased version exactly, which
//! is what the spine of the tree and all importance-sampling estimators
//! run on.

mod calibrate;

pub use calibrate::{
    boundary_moments, boundary_moments_with, calibrate_boundary_case, BoundaryDiagnostics, Calibration, MomentMethod,
};

use std::f64::consts::LN_2;

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stable::{StableLaw, StepSampler};
use crate::stats::{integrate, log_sum_exp};

/// One realization of the reproduction point process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSample {
    pub points: Vec<f64>,
}

/// One outcome of a finite-support law: probability and point list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub prob: f64,
    pub points: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    /// A single point.
    Dirac { point: f64 },
    /// Finitely many outcomes, for exhaustive-enumeration tests.
    Finite { outcomes: Vec<Outcome> },
    /// Two i.i.d. `N(mean, var)` points.
    BinaryGaussian { mean: f64, var: f64 },
    /// Two i.i.d. points on `[1, inf)` with density proportional to
    /// `exp(-rate z) z^(-alpha-1)`.
    BinaryTiltedHeavyTail { alpha: f64, rate: f64 },
    /// Poisson process with intensity `intensity * exp(-x) nu(dx)` on the
    /// window `[lo, hi]`, `nu` the totally right-skewed `alpha`-stable law,
    /// conditioned to have at least one point.
    PoissonStableIntensity { alpha: f64, skew: f64, intensity: f64, lo: f64, hi: f64 },
}

impl Family {
    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::ParamOutOfRange(m));
        match self {
            Family::Dirac { point } if !point.is_finite() => bad(format!("dirac at {point}")),
            Family::Finite { outcomes } => {
                let total: f64 = outcomes.iter().map(|o| o.prob).sum();
                if outcomes.is_empty()
                    || (total - 1.0).abs() > 1e-12
                    || outcomes.iter().any(|o| {
                        !(o.prob > 0.0) || o.points.is_empty() || o.points.iter().any(|x| !x.is_finite())
                    })
                {
                    return bad("finite law needs positive probabilities summing to 1 and nonempty outcomes".into());
                }
                Ok(())
            }
            Family::BinaryGaussian { mean, var } if !(mean.is_finite() && *var > 0.0) => {
                bad(format!("binary gaussian with mean {mean}, var {var}"))
            }
            Family::BinaryTiltedHeavyTail { alpha, rate } if !(*alpha > 1.0 && *alpha < 2.0 && *rate > 0.0) => {
                bad(format!("heavy tail needs alpha in (1, 2) and rate > 0, got {alpha}, {rate}"))
            }
            Family::PoissonStableIntensity { alpha, skew, intensity, lo, hi } => {
                if !(*alpha > 1.0 && *alpha < 2.0) || *skew != 1.0 {
                    return bad(format!(
                        "poisson intensity needs a right-skewed law with alpha in (1, 2), got {alpha}, {skew}"
                    ));
                }
                if !(*intensity > 0.0 && lo < hi && lo.is_finite() && hi.is_finite()) {
                    return bad(format!("poisson intensity {intensity} on [{lo}, {hi}]"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Largest raw tilt `t` with `E[sum exp(t x)] < inf`, if finite.
    fn tilt_edge(&self) -> Option<f64> {
        match self {
            Family::BinaryTiltedHeavyTail { rate, .. } => Some(*rate),
            Family::PoissonStableIntensity { .. } => Some(1.0),
            _ => None,
        }
    }
}

/// A reproduction law: a raw family and the affine calibration map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointProcessLaw {
    #[serde(flatten)]
    pub family: Family,
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default)]
    pub shift: f64,
}

fn one() -> f64 {
    1.0
}

/// `Z` on `[1, inf)` with density proportional to `exp(-t z) z^(-alpha-1)`.
fn tempered_pareto<R: Rng + ?Sized>(alpha: f64, t: f64, rng: &mut R) -> f64 {
    if t <= 1e-12 {
        // exact Pareto at the moment edge
        let u: f64 = 1.0 - rng.random::<f64>();
        return u.powf(-1.0 / alpha);
    }
    let exp = Exp::new(t).expect("positive rate");
    loop {
        let z = 1.0 + exp.sample(rng);
        if rng.random::<f64>() < z.powf(-alpha - 1.0) {
            return z;
        }
    }
}

/// `int_1^inf exp(-t z) z^(-alpha-1) dz`, via `z = 1/u`.
fn tempered_normalizer(alpha: f64, t: f64) -> f64 {
    integrate(&|u: f64| if u == 0.0 { 0.0 } else { (-t / u).exp() * u.powf(alpha - 1.0) }, 0.0, 1.0, 1e-14)
}

/// `psi` of the raw heavy-tail family at its edge `t = rate`.
fn heavy_tail_psi_at_edge(alpha: f64, rate: f64) -> f64 {
    rate * alpha / (alpha - 1.0) - LN_2 + (alpha * tempered_normalizer(alpha, rate)).ln()
}

impl PointProcessLaw {
    pub fn new(family: Family) -> Result<Self> {
        let law = PointProcessLaw { family, scale: 1.0, shift: 0.0 };
        law.validate()?;
        Ok(law)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0 && self.scale.is_finite() && self.shift.is_finite()) {
            return Err(Error::ParamOutOfRange(format!(
                "affine map needs scale > 0, got scale {}, shift {}",
                self.scale, self.shift
            )));
        }
        self.family.validate()
    }

    /// The size-biased law exists: `E[sum exp(l)]` is finite.
    pub fn check_size_biasable(&self) -> Result<()> {
        match self.family.tilt_edge() {
            Some(edge) if self.scale > edge * (1.0 + 1e-12) => Err(Error::ParamOutOfRange(format!(
                "scale {} beyond the exponential-moment edge {edge}",
                self.scale
            ))),
            _ => Ok(()),
        }
    }

    /// Same family under a further affine map `x -> theta x + b`.
    pub fn compose(&self, theta: f64, b: f64) -> Self {
        PointProcessLaw { family: self.family.clone(), scale: theta * self.scale, shift: theta * self.shift + b }
    }

    /// The canonical stable-boundary law: two i.i.d. Gaussian points with
    /// mean `-2 log 2` and variance `2 log 2`. Spine steps are centred
    /// Gaussian with variance `2 log 2`, so `alpha = 2`.
    pub fn canonical() -> Self {
        PointProcessLaw { family: Family::BinaryGaussian { mean: -2.0 * LN_2, var: 2.0 * LN_2 }, scale: 1.0, shift: 0.0 }
    }

    pub fn dirac(point: f64) -> Result<Self> {
        PointProcessLaw::new(Family::Dirac { point })
    }

    pub fn binary_gaussian(mean: f64, var: f64) -> Result<Self> {
        PointProcessLaw::new(Family::BinaryGaussian { mean, var })
    }

    pub fn finite(outcomes: Vec<Outcome>) -> Result<Self> {
        PointProcessLaw::new(Family::Finite { outcomes })
    }

    /// A three-outcome law shifted so that `E[sum exp(l)] = 1` exactly.
    pub fn finite_test_law() -> Self {
        let outcomes = vec![
            Outcome { prob: 0.5, points: vec![0.3, -0.8] },
            Outcome { prob: 0.3, points: vec![0.1] },
            Outcome { prob: 0.2, points: vec![-0.4, -0.2, 0.7] },
        ];
        let m: f64 = outcomes.iter().map(|o| o.prob * o.points.iter().map(|x| x.exp()).sum::<f64>()).sum();
        PointProcessLaw { family: Family::Finite { outcomes }, scale: 1.0, shift: -m.ln() }
    }

    /// Raw two-point tempered-Pareto law with the tempering rate chosen so
    /// that the boundary-case root sits exactly on the exponential-moment
    /// edge. Calibrating it gives spine steps with a Pareto(`alpha`) right
    /// tail, i.e. in the domain of attraction of a right-skewed
    /// `alpha`-stable law.
    pub fn heavy_tail_raw(alpha: f64) -> Result<Self> {
        if !(alpha > 1.0 && alpha < 2.0) {
            return Err(Error::ParamOutOfRange(format!("alpha = {alpha} not in (1, 2)")));
        }
        let (mut lo, mut hi) = (1e-9, 1.0);
        while heavy_tail_psi_at_edge(alpha, hi) < 0.0 {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if heavy_tail_psi_at_edge(alpha, mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        PointProcessLaw::new(Family::BinaryTiltedHeavyTail { alpha, rate: 0.5 * (lo + hi) })
    }

    /// [`heavy_tail_raw`](Self::heavy_tail_raw) with the calibration map
    /// computed by quadrature instead of Monte Carlo.
    pub fn heavy_tail(alpha: f64) -> Result<Self> {
        let raw = PointProcessLaw::heavy_tail_raw(alpha)?;
        let Family::BinaryTiltedHeavyTail { rate, .. } = raw.family else { unreachable!() };
        // phi(rate) = log(2 E[exp(rate Z)]) = log(2 / (alpha Zc(rate)))
        let phi = (2.0 / (alpha * tempered_normalizer(alpha, rate))).ln();
        Ok(raw.compose(rate, -phi))
    }

    /// Poisson law with intensity `c exp(-x) nu_alpha(dx)`, conditioned on
    /// being nonempty. `c` solves `c = 1 - exp(-c E[exp(-Y)])`, which keeps
    /// `E[sum exp(l)] = 1` after conditioning; `E[sum l exp(l)] = E[Y] = 0`
    /// up to the window truncation. Spine steps are distributed as `Y`
    /// itself (restricted to the window).
    pub fn poisson_stable(alpha: f64) -> Result<Self> {
        let stable = StableLaw::new(alpha, 1.0)?;
        let k = stable
            .laplace_at_one()
            .ok_or_else(|| Error::ParamOutOfRange(format!("alpha = {alpha} not in (1, 2)")))?;
        let mut c = 1.0;
        for _ in 0..10_000 {
            let next = 1.0 - (-c * k).exp();
            if (next - c).abs() < 1e-16 {
                break;
            }
            c = next;
        }
        // Right tail: P(Y > x) <= (2/pi) x^-alpha, so past `hi` both the
        // discarded mass and the lost part of E[Y] are below 1e-6. Left
        // tail: P(Y < -5.5) is about 5e-7 at alpha = 1.5.
        let hi = ((2.0 / std::f64::consts::PI) * alpha / (alpha - 1.0) / 1e-6).powf(1.0 / (alpha - 1.0)).min(1e300);
        PointProcessLaw::new(Family::PoissonStableIntensity { alpha, skew: 1.0, intensity: c, lo: -5.5, hi })
    }

    /// The laws with a complete closed-form or quadrature calibration.
    pub fn shipped() -> Vec<(&'static str, PointProcessLaw)> {
        vec![
            ("binary_gaussian", PointProcessLaw::canonical()),
            ("binary_tilted_heavy_tail", PointProcessLaw::heavy_tail(1.5).expect("valid alpha")),
            ("poisson_stable_intensity", PointProcessLaw::poisson_stable(1.5).expect("valid alpha")),
        ]
    }

    /// Stability index of the spine-step domain of attraction.
    pub fn alpha(&self) -> Option<f64> {
        match &self.family {
            Family::BinaryGaussian { .. } => Some(2.0),
            Family::BinaryTiltedHeavyTail { alpha, .. } | Family::PoissonStableIntensity { alpha, .. } => Some(*alpha),
            _ => None,
        }
    }

    /// Truncation window of the raw points, if any.
    pub fn window(&self) -> Option<(f64, f64)> {
        match &self.family {
            Family::PoissonStableIntensity { lo, hi, .. } => Some((*lo, *hi)),
            _ => None,
        }
    }

    /// Largest `theta` for which `E[sum exp(theta l)]` is finite, in units
    /// of the calibrated points.
    pub fn tilt_edge(&self) -> Option<f64> {
        self.family.tilt_edge().map(|e| e / self.scale)
    }

    /// `E[#L]`.
    pub fn mean_offspring(&self) -> f64 {
        match &self.family {
            Family::Dirac { .. } => 1.0,
            Family::Finite { outcomes } => outcomes.iter().map(|o| o.prob * o.points.len() as f64).sum(),
            Family::BinaryGaussian { .. } | Family::BinaryTiltedHeavyTail { .. } => 2.0,
            Family::PoissonStableIntensity { .. } => {
                let lambda = self.poisson_mass();
                lambda / (1.0 - (-lambda).exp())
            }
        }
    }

    /// Unconditioned expected number of Poisson points.
    fn poisson_mass(&self) -> f64 {
        match &self.family {
            Family::PoissonStableIntensity { alpha, intensity, .. } => {
                let k = StableLaw::new(*alpha, 1.0).ok().and_then(|s| s.laplace_at_one()).expect("validated");
                intensity * k
            }
            _ => 0.0,
        }
    }

    /// Raw point from `exp(t x) exp(-x) nu(dx)` on the window, `t <= 1`.
    fn stable_window_point<R: Rng + ?Sized>(stable: &StableLaw, lo: f64, hi: f64, t: f64, rng: &mut R) -> f64 {
        loop {
            let y = stable.sample(rng);
            if y < lo || y > hi {
                continue;
            }
            if t >= 1.0 || rng.random::<f64>() < (-(1.0 - t) * (y - lo)).exp() {
                return y;
            }
        }
    }

    /// Fills `out` with one realization of `L`; returns the number of
    /// empty Poisson draws that were discarded.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut Vec<f64>) -> u64 {
        out.clear();
        let mut redraws = 0;
        match &self.family {
            Family::Dirac { point } => out.push(*point),
            Family::Finite { outcomes } => {
                let mut u: f64 = rng.random();
                let last = outcomes.len() - 1;
                for (k, o) in outcomes.iter().enumerate() {
                    if u < o.prob || k == last {
                        out.extend_from_slice(&o.points);
                        break;
                    }
                    u -= o.prob;
                }
            }
            Family::BinaryGaussian { mean, var } => {
                let normal = Normal::new(*mean, var.sqrt()).expect("validated");
                out.push(normal.sample(rng));
                out.push(normal.sample(rng));
            }
            Family::BinaryTiltedHeavyTail { alpha, rate } => {
                out.push(tempered_pareto(*alpha, *rate, rng));
                out.push(tempered_pareto(*alpha, *rate, rng));
            }
            Family::PoissonStableIntensity { alpha, lo, hi, .. } => {
                let stable = StableLaw::new(*alpha, 1.0).expect("validated");
                let poisson = Poisson::new(self.poisson_mass()).expect("positive mass");
                let count = loop {
                    let k: f64 = poisson.sample(rng);
                    if k >= 1.0 {
                        break k as usize;
                    }
                    redraws += 1;
                };
                for _ in 0..count {
                    out.push(Self::stable_window_point(&stable, *lo, *hi, 0.0, rng));
                }
            }
        }
        for x in out.iter_mut() {
            *x = self.scale * *x + self.shift;
        }
        redraws
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> PointSample {
        let mut points = Vec::with_capacity(4);
        self.sample_into(rng, &mut points);
        PointSample { points }
    }

    /// Fills `out` with a draw of the size-biased law (density
    /// `sum exp(l)` against `L`) and returns the index of the spine child,
    /// chosen with probability proportional to `exp(l_i)`.
    ///
    /// Panics if the scale lies beyond the family's exponential-moment edge
    /// (see [`check_size_biasable`](Self::check_size_biasable)).
    pub fn sample_size_biased_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut Vec<f64>) -> usize {
        if let Some(edge) = self.family.tilt_edge() {
            assert!(self.scale <= edge * (1.0 + 1e-12), "size-biased law undefined beyond the moment edge");
        }
        out.clear();
        let t = self.scale;
        let spine = match &self.family {
            Family::Dirac { point } => {
                out.push(*point);
                0
            }
            Family::Finite { outcomes } => {
                let weights: Vec<f64> = outcomes
                    .iter()
                    .map(|o| o.prob * o.points.iter().map(|x| (t * x).exp()).sum::<f64>())
                    .collect();
                let k = pick(&weights, rng);
                out.extend_from_slice(&outcomes[k].points);
                let w: Vec<f64> = out.iter().map(|x| (t * x).exp()).collect();
                pick(&w, rng)
            }
            Family::BinaryGaussian { mean, var } => {
                let sd = var.sqrt();
                let tilted = Normal::new(mean + t * var, sd).expect("validated");
                let base = Normal::new(*mean, sd).expect("validated");
                let i = rng.random_range(0..2);
                let (a, b) = (tilted.sample(rng), base.sample(rng));
                if i == 0 {
                    out.extend([a, b]);
                } else {
                    out.extend([b, a]);
                }
                i
            }
            Family::BinaryTiltedHeavyTail { alpha, rate } => {
                let i = rng.random_range(0..2);
                let a = tempered_pareto(*alpha, rate - t, rng);
                let b = tempered_pareto(*alpha, *rate, rng);
                if i == 0 {
                    out.extend([a, b]);
                } else {
                    out.extend([b, a]);
                }
                i
            }
            Family::PoissonStableIntensity { alpha, lo, hi, .. } => {
                // size-biasing a Poisson process adds one independent Palm
                // point; the conditioning on a nonempty draw drops out
                let stable = StableLaw::new(*alpha, 1.0).expect("validated");
                let poisson = Poisson::new(self.poisson_mass()).expect("positive mass");
                let count: f64 = poisson.sample(rng);
                for _ in 0..count as usize {
                    out.push(Self::stable_window_point(&stable, *lo, *hi, 0.0, rng));
                }
                out.push(Self::stable_window_point(&stable, *lo, *hi, t, rng));
                out.len() - 1
            }
        };
        for x in out.iter_mut() {
            *x = self.scale * *x + self.shift;
        }
        spine
    }

    /// `#L` alone, without drawing positions where the family allows it.
    pub fn sample_count<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        match &self.family {
            Family::Dirac { .. } => 1,
            Family::BinaryGaussian { .. } | Family::BinaryTiltedHeavyTail { .. } => 2,
            Family::Finite { .. } => {
                let mut buf = Vec::new();
                self.sample_into(rng, &mut buf);
                buf.len()
            }
            Family::PoissonStableIntensity { .. } => {
                let poisson = Poisson::new(self.poisson_mass()).expect("positive mass");
                loop {
                    let k: f64 = poisson.sample(rng);
                    if k >= 1.0 {
                        break k as usize;
                    }
                }
            }
        }
    }

    /// The spine child's position alone, distributed as the spine step:
    /// `P(X <= x) = E[sum 1{l <= x} exp(l)] / E[sum exp(l)]`.
    pub fn spine_point<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.check_size_biasable().expect("size-biased law undefined beyond the moment edge");
        let t = self.scale;
        let raw = match &self.family {
            Family::BinaryGaussian { mean, var } => {
                Normal::new(mean + t * var, var.sqrt()).expect("validated").sample(rng)
            }
            Family::BinaryTiltedHeavyTail { alpha, rate } => tempered_pareto(*alpha, rate - t, rng),
            Family::PoissonStableIntensity { alpha, lo, hi, .. } => {
                let stable = StableLaw::new(*alpha, 1.0).expect("validated");
                Self::stable_window_point(&stable, *lo, *hi, t, rng)
            }
            Family::Dirac { .. } | Family::Finite { .. } => {
                let mut buf = Vec::new();
                let i = self.sample_size_biased_into(rng, &mut buf);
                return buf[i];
            }
        };
        t * raw + self.shift
    }

    pub fn sample_size_biased<R: Rng + ?Sized>(&self, rng: &mut R) -> (PointSample, usize) {
        let mut points = Vec::with_capacity(4);
        let i = self.sample_size_biased_into(rng, &mut points);
        (PointSample { points }, i)
    }

    /// A spine step `X = l_spine` and its decoration
    /// `xi = log sum_{j != spine} exp(l_j - l_spine)` (`-inf` without siblings).
    pub fn spine_step<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        let mut buf = Vec::with_capacity(4);
        let i = self.sample_size_biased_into(rng, &mut buf);
        spine_decoration(&buf, i)
    }
}

/// `(l_i, log sum_{j != i} exp(l_j - l_i))`.
pub fn spine_decoration(points: &[f64], i: usize) -> (f64, f64) {
    let x = points[i];
    let xi = log_sum_exp(points.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, l)| l - x));
    (x, xi)
}

fn pick<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (k, w) in weights.iter().enumerate() {
        if u < *w {
            return k;
        }
        u -= w;
    }
    weights.len() - 1
}

impl StepSampler for PointProcessLaw {
    fn step<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        match &self.family {
            Family::BinaryGaussian { mean, var } => {
                let sd = var.sqrt();
                let x = mean + self.scale * var + sd * rng.sample::<f64, _>(rand_distr::StandardNormal);
                let y = mean + sd * rng.sample::<f64, _>(rand_distr::StandardNormal);
                (self.scale * x + self.shift, self.scale * (y - x))
            }
            _ => self.spine_step(rng),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Seeder;
    use crate::stats::MeanSe;
    use proptest::prelude::*;

    #[test]
    fn canonical_parameters_satisfy_both_constraints_in_closed_form() {
        // l ~ N(m, s): E[e^l] = e^{m + s/2}, E[l e^l] = (m + s) e^{m + s/2}
        let (m, s) = (-2.0 * LN_2, 2.0 * LN_2);
        assert!((2.0 * (m + s / 2.0).exp() - 1.0).abs() < 1e-15);
        assert_eq!(m + s, 0.0);
    }

    #[test]
    fn dirac_is_deterministic() {
        let law = PointProcessLaw::dirac(-1.0).unwrap();
        let mut rng = Seeder::new(0).stream(0);
        for _ in 0..10 {
            assert_eq!(law.sample(&mut rng).points, vec![-1.0]);
        }
        let zero = PointProcessLaw::dirac(0.0).unwrap();
        assert_eq!(zero.sample_size_biased(&mut rng), (PointSample { points: vec![0.0] }, 0));
    }

    #[test]
    fn finite_test_law_is_normalized() {
        let law = PointProcessLaw::finite_test_law();
        let Family::Finite { outcomes } = &law.family else { panic!() };
        let m: f64 = outcomes.iter().map(|o| o.prob * o.points.iter().map(|x| (x + law.shift).exp()).sum::<f64>()).sum();
        assert!((m - 1.0).abs() < 1e-15);
    }

    #[test]
    fn heavy_tail_edge_root_and_exact_constraints() {
        let raw = PointProcessLaw::heavy_tail_raw(1.5).unwrap();
        let Family::BinaryTiltedHeavyTail { rate, .. } = raw.family else { panic!() };
        assert!(heavy_tail_psi_at_edge(1.5, rate).abs() < 1e-10);
        // E[sum e^l] = 2 e^b E[e^{rate Z}] with E[e^{rate Z}] = (1/alpha) / Zc(rate)
        let law = PointProcessLaw::heavy_tail(1.5).unwrap();
        let zc = tempered_normalizer(1.5, rate);
        assert!((2.0 * law.shift.exp() / (1.5 * zc) - 1.0).abs() < 1e-12);
        // tilted marginal is Pareto(1.5), mean 3
        assert!((law.scale * 3.0 + law.shift).abs() < 1e-9);
        assert_eq!(law.tilt_edge(), Some(1.0));
    }

    #[test]
    fn tempered_normalizer_matches_pareto_limit() {
        assert!((tempered_normalizer(1.5, 0.0) - 1.0 / 1.5).abs() < 1e-12);
        // closed form at alpha = 1.5 is not elementary; compare with a
        // direct truncated integral in z
        let direct = integrate(&|z: f64| (-0.4 * z).exp() * z.powf(-2.5), 1.0, 200.0, 1e-13);
        assert!((tempered_normalizer(1.5, 0.4) - direct).abs() < 1e-10);
    }

    #[test]
    fn poisson_point_count_matches_intensity() {
        let law = PointProcessLaw::poisson_stable(1.5).unwrap();
        let lambda = law.poisson_mass();
        let Family::PoissonStableIntensity { intensity, .. } = law.family else { panic!() };
        assert!((intensity - (1.0 - (-lambda).exp())).abs() < 1e-15);
        let mut rng = Seeder::new(3).stream(0);
        let mut buf = Vec::new();
        let n = 100_000;
        let (mut counts, mut redraws) = (Vec::with_capacity(n), 0u64);
        for _ in 0..n {
            redraws += law.sample_into(&mut rng, &mut buf);
            assert!(!buf.is_empty());
            counts.push(buf.len() as f64);
        }
        let m = MeanSe::of(&counts);
        assert!((m.mean - law.mean_offspring()).abs() < 3.0 * m.se, "{m:?} vs {}", law.mean_offspring());
        // empty draws occur at rate e^-lambda / (1 - e^-lambda) per accepted draw
        let expect = n as f64 * (-lambda).exp() / (1.0 - (-lambda).exp());
        assert!((redraws as f64 - expect).abs() < 4.0 * expect.sqrt() + 3.0, "{redraws} vs {expect}");
    }

    #[test]
    fn size_biased_mean_of_w_equals_second_moment() {
        let law = PointProcessLaw::canonical();
        let n = 400_000;
        let s = Seeder::new(21);
        let (mut rng_a, mut rng_b) = (s.stream(0), s.stream(1));
        let mut buf = Vec::new();
        let biased: Vec<f64> = (0..n)
            .map(|_| {
                law.sample_size_biased_into(&mut rng_a, &mut buf);
                buf.iter().map(|x| x.exp()).sum()
            })
            .collect();
        let base: Vec<f64> = (0..n)
            .map(|_| {
                law.sample_into(&mut rng_b, &mut buf);
                buf.iter().map(|x| x.exp()).sum::<f64>().powi(2)
            })
            .collect();
        let (a, b) = (MeanSe::of(&biased), MeanSe::of(&base));
        assert!((a.mean - b.mean).abs() < 3.0 * a.combined_se(&b), "{a:?} {b:?}");
        // closed form: 2 e^{2m+2s} + 2 e^{2m+s} = 2 + 1/2
        assert!((a.mean - 2.5).abs() < 3.0 * a.se);
    }

    const FS: [fn(&[f64]) -> f64; 2] =
        [|p| p.len() as f64, |p| p.iter().cloned().fold(f64::NEG_INFINITY, f64::max).clamp(-5.0, 5.0)];

    /// `E_hat[f] = E[f W]`, `W = sum e^l`, for the point count and the
    /// capped maximum.
    fn size_biased_consistency(law: &PointProcessLaw, seed: u64, n: usize) {
        let s = Seeder::new(seed);
        let (mut rng_a, mut rng_b) = (s.stream(0), s.stream(1));
        let mut buf = Vec::new();
        for f in FS {
            let biased: Vec<f64> = (0..n)
                .map(|_| {
                    law.sample_size_biased_into(&mut rng_a, &mut buf);
                    f(&buf)
                })
                .collect();
            let base: Vec<f64> = (0..n)
                .map(|_| {
                    law.sample_into(&mut rng_b, &mut buf);
                    f(&buf) * buf.iter().map(|x| x.exp()).sum::<f64>()
                })
                .collect();
            let (a, b) = (MeanSe::of(&biased), MeanSe::of(&base));
            assert!((a.mean - b.mean).abs() <= 3.0 * a.combined_se(&b), "{law:?}: {a:?} vs {b:?}");
        }
    }

    /// The same change of measure read backwards, `E[f] = E_hat[f / W]`.
    /// `W` has an infinite variance under the heavy-tailed laws, `1 / W`
    /// is bounded under the size-biased one.
    fn size_biased_consistency_inverse(law: &PointProcessLaw, seed: u64, n: usize) {
        let s = Seeder::new(seed);
        let (mut rng_a, mut rng_b) = (s.stream(0), s.stream(1));
        let mut buf = Vec::new();
        for f in FS {
            let biased: Vec<f64> = (0..n)
                .map(|_| {
                    law.sample_size_biased_into(&mut rng_a, &mut buf);
                    f(&buf) / buf.iter().map(|x| x.exp()).sum::<f64>()
                })
                .collect();
            let base: Vec<f64> = (0..n)
                .map(|_| {
                    law.sample_into(&mut rng_b, &mut buf);
                    f(&buf)
                })
                .collect();
            let (a, b) = (MeanSe::of(&biased), MeanSe::of(&base));
            assert!((a.mean - b.mean).abs() <= 3.0 * a.combined_se(&b), "{law:?}: {a:?} vs {b:?}");
        }
    }

    #[test]
    fn size_biased_consistency_light_tailed_laws() {
        size_biased_consistency(&PointProcessLaw::canonical(), 100, 200_000);
        size_biased_consistency(&PointProcessLaw::finite_test_law(), 99, 200_000);
    }

    #[test]
    fn size_biased_consistency_heavy_tailed_laws() {
        size_biased_consistency_inverse(&PointProcessLaw::heavy_tail(1.5).unwrap(), 101, 200_000);
        size_biased_consistency_inverse(&PointProcessLaw::poisson_stable(1.5).unwrap(), 102, 50_000);
    }

    #[test]
    fn spine_point_matches_full_size_biased_draw() {
        for (name, law) in PointProcessLaw::shipped() {
            let (mut a, mut b) = (Seeder::new(8).stream(0), Seeder::new(8).stream(1));
            let n = 20_000;
            let x1: Vec<f64> = (0..n).map(|_| law.spine_point(&mut a)).collect();
            let x2: Vec<f64> = (0..n).map(|_| law.spine_step(&mut b).0).collect();
            let ks = crate::stats::ks_two_sample(&x1, &x2);
            assert!(ks.statistic < ks.critical_01, "{name}: {ks:?}");
        }
    }

    #[test]
    fn spine_step_exponential_moment_is_mean_offspring() {
        let mut laws = PointProcessLaw::shipped();
        laws.push(("finite", PointProcessLaw::finite_test_law()));
        for (name, law) in laws {
            let mut rng = Seeder::new(7).stream(0);
            let xs: Vec<f64> = (0..200_000).map(|_| (-law.step(&mut rng).0).exp()).collect();
            let m = MeanSe::of(&xs);
            assert!((m.mean - law.mean_offspring()).abs() < 3.0 * m.se, "{name}: {m:?}");
        }
    }

    #[test]
    fn fast_gaussian_step_matches_generic_spine_step() {
        let law = PointProcessLaw::canonical().compose(1.3, 0.2);
        let (mut a, mut b) = (Seeder::new(1).stream(0), Seeder::new(1).stream(1));
        let n = 100_000;
        let x1: Vec<f64> = (0..n).map(|_| law.step(&mut a).1).collect();
        let x2: Vec<f64> = (0..n).map(|_| law.spine_step(&mut b).1).collect();
        let ks = crate::stats::ks_two_sample(&x1, &x2);
        assert!(ks.statistic < ks.critical_01, "{ks:?}");
    }

    #[test]
    fn invalid_laws_are_rejected() {
        assert!(PointProcessLaw::binary_gaussian(0.0, 0.0).is_err());
        assert!(PointProcessLaw::dirac(f64::NAN).is_err());
        assert!(PointProcessLaw::heavy_tail_raw(2.5).is_err());
        assert!(PointProcessLaw::finite(vec![Outcome { prob: 0.5, points: vec![0.0] }]).is_err());
        assert!(PointProcessLaw::heavy_tail(1.5).unwrap().compose(1.5, 0.0).check_size_biasable().is_err());
    }

    #[test]
    fn json_round_trip_of_shipped_laws() {
        for (_, law) in PointProcessLaw::shipped() {
            let s = serde_json::to_string(&law).unwrap();
            assert_eq!(serde_json::from_str::<PointProcessLaw>(&s).unwrap(), law);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn samples_are_nonempty_finite_and_reproducible(seed in any::<u64>(), which in 0usize..4) {
            let mut laws = PointProcessLaw::shipped();
            laws.push(("finite", PointProcessLaw::finite_test_law()));
            let law = &laws[which].1;
            let s = Seeder::new(seed);
            let (mut a, mut b) = (s.stream(0), s.stream(0));
            for _ in 0..20 {
                let x = law.sample(&mut a);
                prop_assert!(!x.points.is_empty());
                prop_assert!(x.points.iter().all(|v| v.is_finite()));
                prop_assert_eq!(&x, &law.sample(&mut b));
                let (y, i) = law.sample_size_biased(&mut a);
                prop_assert!(i < y.points.len());
                prop_assert_eq!((y, i), law.sample_size_biased(&mut b));
            }
        }

        #[test]
        fn binary_laws_emit_two_points(seed in any::<u64>(), mean in -3.0f64..3.0, var in 0.01f64..4.0) {
            let law = PointProcessLaw::binary_gaussian(mean, var).unwrap();
            let mut rng = Seeder::new(seed).stream(0);
            prop_assert_eq!(law.sample(&mut rng).points.len(), 2);
            prop_assert_eq!(PointProcessLaw::heavy_tail(1.5).unwrap().sample(&mut rng).points.len(), 2);
        }
    }
}
