use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::barrier::{solve_g_theta, theoretical_bracket};
use crate::error::Result;
use crate::laws::{Family, PointProcessLaw};
use crate::stable::ScalingBundle;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedPrediction {
    #[serde(rename = "N")]
    pub big_n: u64,
    pub log_n: f64,
    /// Predicted magnitude of the speed; `v_N` is close to `-nu_N`.
    pub nu_n: f64,
    pub time_scale: f64,
    /// `(pi^2 / 2) E[sum l^2 exp(l)] / (log N)^2`, for `alpha = 2` when the
    /// second boundary moment is known.
    pub second_order_speed: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarrierPrediction {
    pub theta: f64,
    pub n: usize,
    pub a_n: f64,
    pub epsilon: f64,
    pub lower: f64,
    pub upper: f64,
    pub g0: f64,
    /// `-g0 a_n`, the leading-order `log rho`.
    pub log_rho: f64,
}

/// `E[sum l^2 exp(l)]` in closed form, for calibrated binary Gaussian laws.
pub fn gaussian_second_moment(law: &PointProcessLaw) -> Option<f64> {
    match law.family {
        Family::BinaryGaussian { mean, var } => {
            let mu = law.scale * mean + law.shift;
            let s2 = law.scale * law.scale * var;
            // two points, each N(mu, s2); E[l^2 e^l] = e^(mu + s2/2) ((mu + s2)^2 + s2)
            Some(2.0 * (mu + s2 / 2.0).exp() * ((mu + s2).powi(2) + s2))
        }
        _ => None,
    }
}

/// The constant `C = (pi^2 / 2) E[sum l^2 exp(l)]` of the binary-branching
/// `alpha = 2` speed asymptotics.
pub fn second_order_constant(bundle: &ScalingBundle, second_moment: Option<f64>) -> Option<f64> {
    (bundle.alpha == 2.0).then_some(())?;
    second_moment.map(|m| PI * PI / 2.0 * m)
}

/// `nu_N` and the time scale for each population size. Fails with a domain
/// error at `N = 1`.
pub fn predict_speed(bundle: &ScalingBundle, big_ns: &[u64], second_moment: Option<f64>) -> Result<Vec<SpeedPrediction>> {
    bundle.validate()?;
    let c = second_order_constant(bundle, second_moment);
    big_ns
        .iter()
        .map(|&big_n| {
            let nf = big_n as f64;
            let nu_n = bundle.nu(nf)?;
            let log_n = nf.ln();
            Ok(SpeedPrediction {
                big_n,
                log_n,
                nu_n,
                time_scale: bundle.time_scale(nf)?,
                second_order_speed: c.map(|c| c / (log_n * log_n)),
            })
        })
        .collect()
}

/// Leading-order survival predictions on a `(theta, n)` grid, ordered by
/// `theta` then `n`.
pub fn predict_barrier(bundle: &ScalingBundle, thetas: &[f64], ns: &[usize]) -> Result<Vec<BarrierPrediction>> {
    bundle.validate()?;
    let mut thetas = thetas.to_vec();
    thetas.sort_by(f64::total_cmp);
    thetas.dedup();
    let mut ns = ns.to_vec();
    ns.sort_unstable();
    ns.dedup();
    let mut rows = Vec::with_capacity(thetas.len() * ns.len());
    for &theta in &thetas {
        let (lower, upper) = theoretical_bracket(theta, bundle.alpha, bundle.cstar)?;
        let g0 = solve_g_theta(theta, bundle.alpha, bundle.cstar, 64)?;
        for &n in &ns {
            let a_n = bundle.a(n as u64);
            rows.push(BarrierPrediction {
                theta,
                n,
                a_n,
                epsilon: theta * a_n / n as f64,
                lower,
                upper,
                g0,
                log_rho: -g0 * a_n,
            });
        }
    }
    Ok(rows)
}
