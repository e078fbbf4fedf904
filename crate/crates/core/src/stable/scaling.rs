use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The slowly varying normalization `L*`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SlowlyVarying {
    /// `L*(x) = c`.
    Constant { c: f64 },
    /// `L*(x) = c * ln(x + e)`.
    LogShift { c: f64 },
    /// Log-linear interpolation through `(x, L*(x))` pairs, flat outside.
    Tabulated { xs: Vec<f64>, values: Vec<f64> },
}

impl SlowlyVarying {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            SlowlyVarying::Constant { c } => *c,
            SlowlyVarying::LogShift { c } => c * (x + std::f64::consts::E).ln(),
            SlowlyVarying::Tabulated { xs, values } => {
                if x <= xs[0] {
                    return values[0];
                }
                let last = xs.len() - 1;
                if x >= xs[last] {
                    return values[last];
                }
                let k = xs.partition_point(|&t| t <= x) - 1;
                let w = (x.ln() - xs[k].ln()) / (xs[k + 1].ln() - xs[k].ln());
                values[k] + w * (values[k + 1] - values[k])
            }
        }
    }

    /// Empirical `L*(x) = x^(alpha-2) E[Y^2 1{|Y| <= x}]` on a grid of
    /// positive, increasing abscissae.
    pub fn from_samples(alpha: f64, samples: &[f64], grid: &[f64]) -> Result<Self> {
        if samples.is_empty() || grid.is_empty() {
            return Err(Error::Precondition("empty samples or grid".into()));
        }
        if grid[0] <= 0.0 || grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Precondition("grid must be positive and increasing".into()));
        }
        let mut sq: Vec<(f64, f64)> = samples.iter().map(|y| (y.abs(), y * y)).collect();
        sq.sort_by(|a, b| a.0.total_cmp(&b.0));
        let n = samples.len() as f64;
        let mut values = Vec::with_capacity(grid.len());
        let mut acc = 0.0;
        let mut k = 0;
        for &x in grid {
            while k < sq.len() && sq[k].0 <= x {
                acc += sq[k].1;
                k += 1;
            }
            values.push(x.powf(alpha - 2.0) * acc / n);
        }
        if values.iter().any(|v| *v <= 0.0) {
            return Err(Error::Precondition("grid starts below the sample support".into()));
        }
        Ok(SlowlyVarying::Tabulated { xs: grid.to_vec(), values })
    }

    fn validate(&self) -> Result<()> {
        match self {
            SlowlyVarying::Constant { c } | SlowlyVarying::LogShift { c } if *c > 0.0 => Ok(()),
            SlowlyVarying::Tabulated { xs, values }
                if !xs.is_empty()
                    && xs.len() == values.len()
                    && xs[0] > 0.0
                    && xs.windows(2).all(|w| w[1] > w[0])
                    && values.iter().all(|v| *v > 0.0) =>
            {
                Ok(())
            }
            _ => Err(Error::ParamOutOfRange(format!("invalid slowly varying function {self:?}"))),
        }
    }
}

/// Which scaling sequence to invert.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sequence {
    /// `b_n`: `x^alpha / L*(x) = n`, the stable-limit normalization.
    B,
    /// `a_n`: `x^(alpha+1) / L*(x) = n`, the barrier-problem space scale.
    A,
}

/// `alpha`, `C*` and `L*`, with the scaling sequences derived from them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingBundle {
    pub alpha: f64,
    pub cstar: f64,
    pub lstar: SlowlyVarying,
}

impl ScalingBundle {
    pub fn new(alpha: f64, cstar: f64, lstar: SlowlyVarying) -> Result<Self> {
        let b = ScalingBundle { alpha, cstar, lstar };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 2.0) {
            return Err(Error::ParamOutOfRange(format!("alpha = {} not in (0, 2]", self.alpha)));
        }
        if !(self.cstar > 0.0 && self.cstar.is_finite()) {
            return Err(Error::ParamOutOfRange(format!("C* = {} must be positive", self.cstar)));
        }
        self.lstar.validate()
    }

    pub fn b(&self, n: u64) -> f64 {
        invert_scaling(self, n, Sequence::B)
    }

    pub fn a(&self, n: u64) -> f64 {
        invert_scaling(self, n, Sequence::A)
    }

    /// `nu_N = C* L*(log N) / (log N)^alpha`; undefined for `N <= 1`.
    pub fn nu(&self, big_n: f64) -> Result<f64> {
        if !(big_n > 1.0) {
            return Err(Error::Domain(format!("nu_N needs N > 1, got {big_n}")));
        }
        let l = big_n.ln();
        Ok(self.cstar * self.lstar.eval(l) / l.powf(self.alpha))
    }

    /// The time scale `(log N)^(alpha+1) / L*(log N)`.
    pub fn time_scale(&self, big_n: f64) -> Result<f64> {
        if !(big_n > 1.0) {
            return Err(Error::Domain(format!("time scale needs N > 1, got {big_n}")));
        }
        let l = big_n.ln();
        Ok(l.powf(self.alpha + 1.0) / self.lstar.eval(l))
    }
}

/// Root of `x^p / L*(x) = n` (`p = alpha` for `b_n`, `alpha + 1` for `a_n`)
/// by geometric bracketing and bisection.
pub fn invert_scaling(bundle: &ScalingBundle, n: u64, which: Sequence) -> f64 {
    assert!(n >= 1, "scaling sequences start at n = 1");
    let p = match which {
        Sequence::B => bundle.alpha,
        Sequence::A => bundle.alpha + 1.0,
    };
    let target = n as f64;
    let h = |x: f64| x.powf(p) / bundle.lstar.eval(x);
    let (mut lo, mut hi) = (0.5, 1.0);
    while h(hi) < target {
        lo = hi;
        hi *= 2.0;
    }
    while h(lo) >= target {
        hi = lo;
        lo /= 2.0;
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if h(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // pick the endpoint with the smaller residual
    if (h(lo) - target).abs() < (h(hi) - target).abs() {
        lo
    } else {
        hi
    }
}
