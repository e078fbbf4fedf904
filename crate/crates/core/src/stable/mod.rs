//! Stable-law numerics: variates, scaling sequences, the rate function
//! `Phi`, the confinement constant `C*` and corridor probabilities.

pub mod corridor;
pub mod cstar;
pub mod rate;
pub mod scaling;
pub mod variates;

pub use corridor::{
    corridor_indicators, corridor_probability, corridor_probability_resampled,
    mogulskii_prediction, Corridor, CorridorEstimate, CorridorSpec, LazyWalk, StepSampler,
};
pub use cstar::{estimate_cstar, CstarEstimate};
pub use rate::{phi, phi_inverse};
pub use scaling::{invert_scaling, ScalingBundle, Sequence, SlowlyVarying};
pub use variates::{sample_stable, StableLaw};

use std::f64::consts::{LN_2, PI};

/// The bundle of the canonical binary Gaussian law: `alpha = 2`,
/// `C* = pi^2 / 2`, `L* = 2 log 2`.
pub fn canonical_bundle() -> ScalingBundle {
    ScalingBundle { alpha: 2.0, cstar: PI * PI / 2.0, lstar: SlowlyVarying::Constant { c: 2.0 * LN_2 } }
}
