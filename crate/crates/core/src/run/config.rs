use serde::{Deserialize, Serialize};
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::laws::{Family, PointProcessLaw};
use crate::stable::{Corridor, SlowlyVarying};
use crate::verify::SuiteSize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Calibrate,
    SpeedSweep,
    RhoScaling,
    Corridor,
    Verify,
    Predict,
}

impl Experiment {
    /// Experiment index used for seed derivation. Grid point `k` of kind
    /// `e` runs on experiment `(e << 16) | k`; law calibration always runs
    /// on experiment `1 << 16`.
    pub fn index(self) -> u32 {
        match self {
            Experiment::Calibrate => 1,
            Experiment::SpeedSweep => 2,
            Experiment::RhoScaling => 3,
            Experiment::Corridor => 4,
            Experiment::Verify => 5,
            Experiment::Predict => 6,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Calibrate => "calibrate",
            Experiment::SpeedSweep => "speed-sweep",
            Experiment::RhoScaling => "rho-scaling",
            Experiment::Corridor => "corridor",
            Experiment::Verify => "verify",
            Experiment::Predict => "predict",
        }
    }
}

/// Which law to run. Exactly one of the three fields must be set:
/// a shipped law by name, a raw family to calibrate, or an already
/// calibrated law.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LawBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw: Option<Family>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibrated: Option<PointProcessLaw>,
    /// Calibration tolerance for `raw`.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// Samples per boundary-moment evaluation.
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_tolerance() -> f64 {
    1e-2
}

fn default_samples() -> usize {
    1_000_000
}

/// Names accepted in `law.name`.
pub fn named_laws() -> Vec<(&'static str, PointProcessLaw)> {
    let mut laws = PointProcessLaw::shipped();
    laws.push(("finite_test", PointProcessLaw::finite_test_law()));
    laws
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum CstarSource {
    Fixed {
        value: f64,
    },
    /// Run the confinement estimator for the stable process of index
    /// `alpha` and the given skewness.
    Estimate {
        #[serde(default = "default_t_max")]
        t_max: f64,
        #[serde(default = "default_dt")]
        dt: f64,
        #[serde(default = "default_paths")]
        n_paths: usize,
        #[serde(default = "default_skew")]
        skew: f64,
    },
}

fn default_t_max() -> f64 {
    10.0
}
fn default_dt() -> f64 {
    1e-2
}
fn default_paths() -> usize {
    20_000
}
fn default_skew() -> f64 {
    1.0
}

/// `alpha` defaults to the law's stability index. `lstar` may be omitted
/// only for binary Gaussian laws, where it is the spine step's second moment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    pub cstar: CstarSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lstar: Option<SlowlyVarying>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grids {
    /// Population sizes for speed sweeps and predictions.
    #[serde(rename = "N", default, skip_serializing_if = "Vec::is_empty")]
    pub big_n: Vec<u64>,
    /// Horizons for barrier and corridor experiments.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub n: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub theta: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WalkKind {
    /// The spine step of the configured law.
    Spine,
    Lazy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorridorBlock {
    #[serde(default = "default_corridor")]
    pub corridor: Corridor,
    #[serde(default = "default_walk")]
    pub walk: WalkKind,
    /// Space scale `a_n = n^exponent`; the bundle's `a_n` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponent: Option<f64>,
    #[serde(default = "default_population")]
    pub population: usize,
}

impl Default for CorridorBlock {
    fn default() -> Self {
        CorridorBlock {
            corridor: default_corridor(),
            walk: default_walk(),
            exponent: None,
            population: default_population(),
        }
    }
}

fn default_corridor() -> Corridor {
    Corridor::flat(-0.5, 0.5).expect("valid corridor")
}
fn default_walk() -> WalkKind {
    WalkKind::Spine
}
fn default_population() -> usize {
    10_000
}

/// One batch run. `reps` means replicas for speed sweeps, killed trees for
/// rho scaling and resampled ensembles for corridors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Experiment,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub law: Option<LawBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bundle: Option<BundleBlock>,
    #[serde(default)]
    pub grids: Grids,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoints: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corridor: Option<CorridorBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suite: Option<SuiteSize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

fn invalid(field: &str, msg: impl std::fmt::Display) -> Error {
    Error::ConfigInvalid(format!("{field}: {msg}"))
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::ConfigInvalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn reps_or(&self, default: usize) -> usize {
        self.reps.unwrap_or(default)
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == Some(0) {
            return Err(invalid("reps", "must be >= 1"));
        }
        if let Some(law) = &self.law {
            law.validate()?;
        }
        if let Some(b) = &self.bundle {
            b.validate()?;
        }
        let needs_law = !matches!(self.experiment, Experiment::Verify | Experiment::Predict);
        if needs_law && self.law.is_none() {
            return Err(invalid("law", format!("required for {}", self.experiment.name())));
        }
        let g = &self.grids;
        match self.experiment {
            Experiment::SpeedSweep => {
                nonempty("grids.N", &g.big_n)?;
                if g.big_n.contains(&0) {
                    return Err(invalid("grids.N", "population sizes must be >= 1"));
                }
                if self.steps.is_some_and(|s| s < 100) {
                    return Err(invalid("steps", "must be >= 100"));
                }
                if let Some(c) = &self.checkpoints {
                    if c.contains(&0) {
                        return Err(invalid("checkpoints", "must be >= 1"));
                    }
                }
            }
            Experiment::RhoScaling => {
                nonempty("grids.theta", &g.theta)?;
                nonempty("grids.n", &g.n)?;
                if g.theta.iter().any(|t| !(*t >= 0.0)) {
                    return Err(invalid("grids.theta", "slopes must be >= 0"));
                }
                if g.n.contains(&0) {
                    return Err(invalid("grids.n", "horizons must be >= 1"));
                }
                if self.reps.is_some_and(|r| r < 100) {
                    return Err(invalid("reps", "rho-scaling needs >= 100"));
                }
                if self.cap == Some(0) {
                    return Err(invalid("cap", "must be >= 1"));
                }
            }
            Experiment::Corridor => {
                nonempty("grids.n", &g.n)?;
                if g.n.contains(&0) {
                    return Err(invalid("grids.n", "horizons must be >= 1"));
                }
                if self.reps == Some(1) {
                    return Err(invalid("reps", "corridor ensembles need >= 2"));
                }
                if let Some(c) = &self.corridor {
                    if c.population < 2 {
                        return Err(invalid("corridor.population", "must be >= 2"));
                    }
                    if c.exponent.is_some_and(|e| !(e > 0.0)) {
                        return Err(invalid("corridor.exponent", "must be positive"));
                    }
                }
            }
            Experiment::Predict => {
                if g.big_n.is_empty() && (g.n.is_empty() || g.theta.is_empty()) {
                    return Err(invalid("grids", "predict needs N, or both n and theta"));
                }
            }
            Experiment::Calibrate | Experiment::Verify => {}
        }
        Ok(())
    }
}

fn nonempty<T>(field: &str, xs: &[T]) -> Result<()> {
    if xs.is_empty() {
        return Err(invalid(field, "must be nonempty"));
    }
    Ok(())
}

impl LawBlock {
    pub fn named(name: &str) -> Self {
        LawBlock { name: Some(name.into()), tolerance: default_tolerance(), samples: default_samples(), ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let set = [self.name.is_some(), self.raw.is_some(), self.calibrated.is_some()];
        if set.iter().filter(|&&s| s).count() != 1 {
            return Err(invalid("law", "set exactly one of name, raw, calibrated"));
        }
        if let Some(name) = &self.name {
            if !named_laws().iter().any(|(n, _)| n == name) {
                let known: Vec<&str> = named_laws().iter().map(|(n, _)| *n).collect();
                return Err(invalid("law.name", format!("unknown law '{name}' (known: {})", known.join(", "))));
            }
        }
        if let Some(raw) = &self.raw {
            PointProcessLaw::new(raw.clone()).map_err(|e| invalid("law.raw", e))?;
        }
        if let Some(law) = &self.calibrated {
            law.validate().map_err(|e| invalid("law.calibrated", e))?;
        }
        if !(self.tolerance > 0.0) {
            return Err(invalid("law.tolerance", "must be positive"));
        }
        if self.samples < 1000 {
            return Err(invalid("law.samples", "must be >= 1000"));
        }
        Ok(())
    }
}

impl BundleBlock {
    pub fn validate(&self) -> Result<()> {
        if let Some(a) = self.alpha {
            if !(a > 0.0 && a <= 2.0) {
                return Err(invalid("bundle.alpha", format!("{a} not in (0, 2]")));
            }
        }
        match &self.cstar {
            CstarSource::Fixed { value } if !(*value > 0.0 && value.is_finite()) => {
                Err(invalid("bundle.cstar.value", "must be positive"))
            }
            CstarSource::Estimate { t_max, dt, n_paths, .. }
                if *t_max < 10.0 || !(*dt > 0.0 && *dt <= 1e-2) || *n_paths < 10_000 =>
            {
                Err(invalid("bundle.cstar", "estimate needs t_max >= 10, dt in (0, 0.01], n_paths >= 1e4"))
            }
            _ => Ok(()),
        }
    }
}
