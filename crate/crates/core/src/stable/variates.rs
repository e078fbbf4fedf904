//! Chambers-Mallows-Stuck sampling of strictly two-sided stable variables.
//!
//! The parameterization is the usual `S(alpha, beta, 1, 0)` one, with
//! characteristic function `exp(-|t|^a (1 - i b sgn(t) tan(pi a / 2)))` for
//! `a != 1` and `exp(-|t| (1 + i b (2/pi) sgn(t) log|t|))` for `a = 1`.
//! At `alpha = 2` this is a centred Gaussian with variance 2.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A validated stable law with `P(Y >= 0)` strictly inside `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawStable")]
pub struct StableLaw {
    alpha: f64,
    skew: f64,
    #[serde(skip)]
    b: f64,
    #[serde(skip)]
    s: f64,
}

#[derive(Deserialize)]
struct RawStable {
    alpha: f64,
    skew: f64,
}

impl TryFrom<RawStable> for StableLaw {
    type Error = Error;
    fn try_from(r: RawStable) -> Result<Self> {
        StableLaw::new(r.alpha, r.skew)
    }
}

impl StableLaw {
    pub fn new(alpha: f64, skew: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 2.0) {
            return Err(Error::ParamOutOfRange(format!("alpha = {alpha} not in (0, 2]")));
        }
        if !(-1.0..=1.0).contains(&skew) {
            return Err(Error::ParamOutOfRange(format!("skew = {skew} not in [-1, 1]")));
        }
        if alpha < 1.0 && skew.abs() == 1.0 {
            return Err(Error::ParamOutOfRange(format!(
                "alpha = {alpha} with skew = {skew} is one-sided: P(Y >= 0) is 0 or 1"
            )));
        }
        let (b, s) = if alpha == 1.0 || alpha == 2.0 {
            (0.0, 1.0)
        } else {
            let t = skew * (PI * alpha / 2.0).tan();
            (t.atan() / alpha, (1.0 + t * t).powf(1.0 / (2.0 * alpha)))
        };
        Ok(StableLaw { alpha, skew, b, s })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn skew(&self) -> f64 {
        self.skew
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.alpha == 2.0 {
            let z: f64 = StandardNormal.sample(rng);
            return std::f64::consts::SQRT_2 * z;
        }
        // V uniform on the open interval (-pi/2, pi/2), W standard exponential.
        let v = loop {
            let u: f64 = rng.random();
            if u > 0.0 {
                break PI * (u - 0.5);
            }
        };
        let w: f64 = Exp1.sample(rng);
        if self.alpha == 1.0 {
            let beta = self.skew;
            let core = FRAC_PI_2 + beta * v;
            (core * v.tan() - beta * ((FRAC_PI_2 * w * v.cos()) / core).ln()) / FRAC_PI_2
        } else {
            let a = self.alpha;
            let av = a * (v + self.b);
            self.s * av.sin() / v.cos().powf(1.0 / a)
                * ((v - av).cos() / w).powf((1.0 - a) / a)
        }
    }

    /// Draw of the Lévy process increment over a time span `dt`, with the
    /// same scale convention as [`StableLaw::sample`].
    pub fn sample_increment<R: Rng + ?Sized>(&self, dt: f64, rng: &mut R) -> f64 {
        let y = self.sample(rng);
        if self.alpha == 1.0 {
            dt * y + 2.0 / PI * self.skew * dt * dt.ln()
        } else {
            dt.powf(1.0 / self.alpha) * y
        }
    }

    /// `E[exp(-Y)]` for a totally right-skewed law with `alpha` in `(1, 2]`.
    pub fn laplace_at_one(&self) -> Option<f64> {
        if self.alpha > 1.0 && (self.skew == 1.0 || self.alpha == 2.0) {
            Some((-1.0 / (PI * self.alpha / 2.0).cos()).exp())
        } else {
            None
        }
    }
}

/// One stable draw; validates the parameters on every call.
pub fn sample_stable<R: Rng + ?Sized>(alpha: f64, skew: f64, rng: &mut R) -> Result<f64> {
    Ok(StableLaw::new(alpha, skew)?.sample(rng))
}
