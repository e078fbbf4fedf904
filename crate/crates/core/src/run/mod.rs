//! Batch runs: a JSON [`RunConfig`] in, CSV tables and a manifest out.
//!
//! Every random quantity of a run is drawn from streams derived from the
//! master seed, the experiment kind and the grid index (see
//! [`Experiment::index`]), so a config and seed fully determine the CSV
//! contents, whatever the thread count.

pub mod config;
pub mod output;
pub mod predict;

pub use config::{
    named_laws, BundleBlock, CorridorBlock, CstarSource, Experiment, Grids, LawBlock, RunConfig, WalkKind,
};
pub use output::OutputDir;
pub use predict::{
    gaussian_second_moment, predict_barrier, predict_speed, second_order_constant, BarrierPrediction,
    SpeedPrediction,
};

use serde::Serialize;
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::PathBuf;
use std::time::Instant;

use crate::barrier::{rho_scaling_experiment, scaling_trend};
use crate::engine::{default_checkpoints, speed_traces, summarize_traces};
use crate::error::{Error, Result};
use crate::laws::{boundary_moments, calibrate_boundary_case, Calibration, Family, PointProcessLaw};
use crate::rng::Seeder;
use crate::stable::{
    corridor_probability_resampled, estimate_cstar, mogulskii_prediction, CorridorSpec, CstarEstimate, LazyWalk,
    ScalingBundle, SlowlyVarying, StepSampler,
};
use crate::stats::ols;
use crate::verify::run_suite;

/// Experiment index of law calibration and of the `C*` estimate.
const CALIBRATION_EXPERIMENT: u32 = 1 << 16;
const CSTAR_EXPERIMENT: u32 = 7 << 16;

pub const DEFAULT_STEPS: usize = 1000;
pub const DEFAULT_SPEED_REPS: usize = 8;
pub const DEFAULT_RHO_REPS: usize = 2000;
pub const DEFAULT_CAP: usize = 10_000;
pub const DEFAULT_ENSEMBLES: usize = 8;

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub experiment: Experiment,
    /// False only when a verify check fails.
    pub passed: bool,
    pub files: Vec<PathBuf>,
    pub summary: Value,
}

struct ResolvedLaw {
    name: String,
    law: PointProcessLaw,
    calibration: Option<Calibration>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    config: &'a RunConfig,
    experiment: &'static str,
    seed: u64,
    law: Option<&'a PointProcessLaw>,
    law_name: Option<&'a str>,
    truncation_window: Option<(f64, f64)>,
    calibration: Option<&'a Calibration>,
    bundle: Option<&'a ScalingBundle>,
    cstar_estimate: Option<&'a CstarEstimate>,
    passed: bool,
    summary: &'a Value,
    outputs: Vec<String>,
    versions: BTreeMap<&'static str, &'static str>,
    wall_time_seconds: f64,
}

fn grid_seeder(seed: u64, kind: Experiment, k: usize) -> Seeder {
    Seeder::new(seed).experiment((kind.index() << 16) | k as u32)
}

fn resolve_law(block: &LawBlock, seed: u64) -> Result<ResolvedLaw> {
    if let Some(name) = &block.name {
        let (n, law) = config::named_laws()
            .into_iter()
            .find(|(n, _)| n == name)
            .ok_or_else(|| Error::ConfigInvalid(format!("law.name: unknown law '{name}'")))?;
        return Ok(ResolvedLaw { name: n.to_string(), law, calibration: None });
    }
    if let Some(raw) = &block.raw {
        let raw = PointProcessLaw::new(raw.clone())?;
        let seeder = Seeder::new(seed).experiment(CALIBRATION_EXPERIMENT);
        let cal = calibrate_boundary_case(&raw, block.tolerance, block.samples, &seeder)?;
        return Ok(ResolvedLaw { name: "raw".into(), law: cal.law.clone(), calibration: Some(cal) });
    }
    let law = block.calibrated.clone().ok_or_else(|| Error::ConfigInvalid("law: no source given".into()))?;
    Ok(ResolvedLaw { name: "calibrated".into(), law, calibration: None })
}

fn resolve_bundle(
    block: Option<&BundleBlock>,
    law: &PointProcessLaw,
    seed: u64,
) -> Result<(ScalingBundle, Option<CstarEstimate>)> {
    let gaussian = matches!(law.family, Family::BinaryGaussian { .. });
    let Some(block) = block else {
        if !gaussian {
            return Err(Error::ConfigInvalid("bundle: required for laws other than binary_gaussian".into()));
        }
        let lstar = SlowlyVarying::Constant { c: gaussian_second_moment(law).expect("gaussian") };
        return Ok((ScalingBundle::new(2.0, PI * PI / 2.0, lstar)?, None));
    };
    let alpha = block
        .alpha
        .or_else(|| law.alpha())
        .ok_or_else(|| Error::ConfigInvalid("bundle.alpha: the law has no stability index; set it".into()))?;
    let lstar = match (&block.lstar, gaussian) {
        (Some(l), _) => l.clone(),
        (None, true) => SlowlyVarying::Constant { c: gaussian_second_moment(law).expect("gaussian") },
        (None, false) => return Err(Error::ConfigInvalid("bundle.lstar: required for this law".into())),
    };
    let (cstar, estimate) = match &block.cstar {
        CstarSource::Fixed { value } => (*value, None),
        CstarSource::Estimate { t_max, dt, n_paths, skew } => {
            let mut rng = Seeder::new(seed).experiment(CSTAR_EXPERIMENT).stream(0);
            let e = estimate_cstar(alpha, *skew, *t_max, *dt, *n_paths, &mut rng)?;
            (e.cstar, Some(e))
        }
    };
    let bundle = ScalingBundle::new(alpha, cstar, lstar).map_err(|e| Error::ConfigInvalid(format!("bundle: {e}")))?;
    Ok((bundle, estimate))
}

/// Validates `config`, runs it and writes its outputs to `config.output`.
/// On error nothing is left behind in the output directory.
pub fn run(config: &RunConfig) -> Result<RunOutcome> {
    config.validate()?;
    let root = config
        .output
        .clone()
        .ok_or_else(|| Error::ConfigInvalid("output: no output directory given".into()))?;
    let started = Instant::now();
    let mut out = OutputDir::create(&root)?;
    let seed = config.seed;

    let law_block = match (&config.law, config.experiment) {
        (Some(b), _) => Some(b.clone()),
        (None, Experiment::Predict) => Some(LawBlock::named("binary_gaussian")),
        (None, _) => None,
    };
    let resolved = law_block.as_ref().map(|b| resolve_law(b, seed)).transpose()?;
    let needs_bundle =
        matches!(config.experiment, Experiment::SpeedSweep | Experiment::RhoScaling | Experiment::Corridor | Experiment::Predict);
    let (bundle, cstar_estimate) = match (&resolved, needs_bundle) {
        (Some(r), true) => {
            let (b, e) = resolve_bundle(config.bundle.as_ref(), &r.law, seed)?;
            (Some(b), e)
        }
        _ => (None, None),
    };

    let mut passed = true;
    let summary = match config.experiment {
        Experiment::Calibrate => calibrate(config, resolved.as_ref().expect("validated"), &mut out)?,
        Experiment::SpeedSweep => {
            speed_sweep(config, &resolved.as_ref().expect("validated").law, bundle.as_ref().expect("resolved"), &mut out)?
        }
        Experiment::RhoScaling => {
            rho_scaling(config, &resolved.as_ref().expect("validated").law, bundle.as_ref().expect("resolved"), &mut out)?
        }
        Experiment::Corridor => {
            corridor(config, &resolved.as_ref().expect("validated").law, bundle.as_ref().expect("resolved"), &mut out)?
        }
        Experiment::Verify => {
            let (s, ok) = verify(config, resolved.as_ref(), &mut out)?;
            passed = ok;
            s
        }
        Experiment::Predict => {
            predict(config, &resolved.as_ref().expect("defaulted").law, bundle.as_ref().expect("resolved"), &mut out)?
        }
    };

    let mut outputs = out.files().to_vec();
    outputs.push("manifest.json".into());
    let manifest = Manifest {
        config,
        experiment: config.experiment.name(),
        seed,
        law: resolved.as_ref().map(|r| &r.law),
        law_name: resolved.as_ref().map(|r| r.name.as_str()),
        truncation_window: resolved.as_ref().and_then(|r| r.law.window()),
        calibration: resolved.as_ref().and_then(|r| r.calibration.as_ref()),
        bundle: bundle.as_ref(),
        cstar_estimate: cstar_estimate.as_ref(),
        passed,
        summary: &summary,
        outputs,
        versions: BTreeMap::from([("nbrw", env!("CARGO_PKG_VERSION")), ("manifest", "1")]),
        wall_time_seconds: started.elapsed().as_secs_f64(),
    };
    out.write_json("manifest.json", &manifest)?;
    let files = out.commit()?;
    Ok(RunOutcome { experiment: config.experiment, passed, files, summary })
}

#[derive(Serialize)]
struct CalibrationRow {
    theta_star: f64,
    shift: f64,
    se_theta: f64,
    at_edge: bool,
    m_exp: f64,
    se_exp: f64,
    m_lin: f64,
    se_lin: f64,
    m_quad: f64,
    se_quad: f64,
    n_samples: usize,
}

fn calibrate(config: &RunConfig, r: &ResolvedLaw, out: &mut OutputDir) -> Result<Value> {
    let block = config.law.as_ref().expect("validated");
    let (theta_star, shift, se_theta, at_edge, d) = match &r.calibration {
        Some(c) => (c.theta_star, c.shift, c.se_theta, c.at_edge, c.diagnostics.clone()),
        None => {
            // already calibrated: report the identity map and fresh moments
            let seeder = Seeder::new(config.seed).experiment(CALIBRATION_EXPERIMENT | 1);
            (1.0, 0.0, 0.0, false, boundary_moments(&r.law, block.samples, &seeder)?)
        }
    };
    let row = CalibrationRow {
        theta_star,
        shift,
        se_theta,
        at_edge,
        m_exp: d.m_exp,
        se_exp: d.se_exp,
        m_lin: d.m_lin,
        se_lin: d.se_lin,
        m_quad: d.m_quad,
        se_quad: d.se_quad,
        n_samples: d.n_samples,
    };
    out.write_csv("calibration.csv", &[row])?;
    Ok(json!({ "boundary_conditions_hold": d.passes(block.tolerance), "diagnostics": d }))
}

#[derive(Serialize)]
struct SweepRow {
    #[serde(rename = "N")]
    big_n: u64,
    v_hat: f64,
    se: f64,
    bracket_lo: f64,
    bracket_hi: f64,
    #[serde(rename = "nu_N_prediction")]
    nu_n_prediction: f64,
}

#[derive(Serialize)]
struct TrajectoryRow {
    #[serde(rename = "N")]
    big_n: u64,
    replica: u32,
    n: usize,
    x1: f64,
    #[serde(rename = "xN")]
    x_last: f64,
    diameter: f64,
}

#[derive(Serialize)]
struct CloudOut {
    #[serde(rename = "N")]
    big_n: u64,
    n: usize,
    q10: f64,
    median: f64,
    q90: f64,
    max: f64,
}

fn speed_sweep(config: &RunConfig, law: &PointProcessLaw, bundle: &ScalingBundle, out: &mut OutputDir) -> Result<Value> {
    let steps = config.steps.unwrap_or(DEFAULT_STEPS);
    let reps = config.reps_or(DEFAULT_SPEED_REPS);
    let checkpoints = config.checkpoints.clone().unwrap_or_else(|| default_checkpoints(steps));
    let mut ns = config.grids.big_n.clone();
    ns.sort_unstable();
    ns.dedup();
    let (mut sweep, mut traj, mut cloud) = (Vec::new(), Vec::new(), Vec::new());
    let mut details = Vec::new();
    for (k, &big_n) in ns.iter().enumerate() {
        let traces = speed_traces(law, big_n as usize, steps, reps, &checkpoints, &grid_seeder(config.seed, Experiment::SpeedSweep, k))?;
        let (est, stats) = summarize_traces(&traces, big_n as usize);
        sweep.push(SweepRow {
            big_n,
            v_hat: est.v_hat,
            se: est.se,
            bracket_lo: est.bracket_lo,
            bracket_hi: est.bracket_hi,
            nu_n_prediction: bundle.nu(big_n as f64).unwrap_or(f64::NAN),
        });
        for t in &traces {
            for row in &t.rows {
                traj.push(TrajectoryRow {
                    big_n,
                    replica: t.replica,
                    n: row.n,
                    x1: row.x1,
                    x_last: row.x_last,
                    diameter: row.diameter,
                });
            }
        }
        for c in &stats.rows {
            cloud.push(CloudOut { big_n, n: c.n, q10: c.q10, median: c.median, q90: c.q90, max: c.max });
        }
        details.push(json!({
            "N": big_n,
            "bracket_lo_se": est.bracket_lo_se,
            "bracket_hi_se": est.bracket_hi_se,
            "brackets_consistent": est.brackets_consistent(),
        }));
    }
    out.write_csv("speed_sweep.csv", &sweep)?;
    out.write_csv("trajectory.csv", &traj)?;
    out.write_csv("cloud.csv", &cloud)?;
    Ok(json!({ "steps": steps, "replicas": reps, "checkpoints": checkpoints, "per_N": details }))
}

fn rho_scaling(config: &RunConfig, law: &PointProcessLaw, bundle: &ScalingBundle, out: &mut OutputDir) -> Result<Value> {
    let reps = config.reps_or(DEFAULT_RHO_REPS);
    let cap = config.cap.unwrap_or(DEFAULT_CAP);
    let seeder = grid_seeder(config.seed, Experiment::RhoScaling, 0);
    let rows = rho_scaling_experiment(law, bundle, &config.grids.theta, &config.grids.n, reps, cap, &seeder)?;
    out.write_csv("rho_scaling.csv", &rows)?;
    let cap_hits: usize = rows.iter().map(|r| r.cap_hits).max().unwrap_or(0);
    Ok(json!({ "reps": reps, "cap": cap, "max_cap_hits": cap_hits, "trend": scaling_trend(&rows) }))
}

#[derive(Serialize)]
struct CorridorRow {
    n: usize,
    a_n: f64,
    p_hat: f64,
    se: f64,
    log_p: f64,
    /// `n L*(a_n) / a_n^alpha`.
    scale: f64,
    scaled_log_p: f64,
    prediction: f64,
}

fn corridor(config: &RunConfig, law: &PointProcessLaw, bundle: &ScalingBundle, out: &mut OutputDir) -> Result<Value> {
    let block = config.corridor.clone().unwrap_or_default();
    match block.walk {
        WalkKind::Spine => corridor_with(config, &block, law, bundle, out),
        WalkKind::Lazy => corridor_with(config, &block, &LazyWalk, bundle, out),
    }
}

fn corridor_with<S: StepSampler>(
    config: &RunConfig,
    block: &CorridorBlock,
    step: &S,
    bundle: &ScalingBundle,
    out: &mut OutputDir,
) -> Result<Value> {
    let ensembles = config.reps_or(DEFAULT_ENSEMBLES);
    let prediction = mogulskii_prediction(&block.corridor, bundle.alpha, bundle.cstar);
    let mut ns = config.grids.n.clone();
    ns.sort_unstable();
    ns.dedup();
    let mut rows = Vec::with_capacity(ns.len());
    for (k, &n) in ns.iter().enumerate() {
        let a_n = match block.exponent {
            Some(p) => (n as f64).powf(p),
            None => bundle.a(n as u64),
        };
        let spec = CorridorSpec::new(block.corridor.clone(), a_n, n)?;
        let seeder = grid_seeder(config.seed, Experiment::Corridor, k);
        let (est, log_p) = corridor_probability_resampled(&spec, step, block.population, ensembles, &seeder)?;
        let scale = n as f64 * bundle.lstar.eval(a_n) / a_n.powf(bundle.alpha);
        rows.push(CorridorRow {
            n,
            a_n,
            p_hat: est.p_hat,
            se: est.se,
            log_p,
            scale,
            scaled_log_p: log_p / scale,
            prediction,
        });
    }
    out.write_csv("corridor.csv", &rows)?;
    let mut summary = json!({ "ensembles": ensembles, "population": block.population, "prediction": prediction });
    if rows.len() >= 3 {
        let x: Vec<f64> = rows.iter().map(|r| r.scale).collect();
        let y: Vec<f64> = rows.iter().map(|r| r.log_p).collect();
        let (intercept, slope, se) = ols(&x, &y);
        summary["slope"] = json!(slope);
        summary["slope_se"] = json!(se);
        summary["intercept"] = json!(intercept);
        summary["slope_relative_error"] = json!((slope - prediction).abs() / prediction.abs());
    }
    Ok(summary)
}

fn verify(config: &RunConfig, resolved: Option<&ResolvedLaw>, out: &mut OutputDir) -> Result<(Value, bool)> {
    let laws: Vec<(String, PointProcessLaw)> = match resolved {
        Some(r) => vec![(r.name.clone(), r.law.clone())],
        None => PointProcessLaw::shipped().into_iter().map(|(n, l)| (n.to_string(), l)).collect(),
    };
    let size = config.suite.unwrap_or_default();
    let reports = run_suite(&laws, &size, &grid_seeder(config.seed, Experiment::Verify, 0))?;
    out.write_json("verify.json", &reports)?;
    let failed: Vec<&str> = reports.iter().filter(|r| !r.pass).map(|r| r.name.as_str()).collect();
    let ok = failed.is_empty();
    Ok((json!({ "checks": reports.len(), "failed": failed, "suite": size }), ok))
}

fn predict(config: &RunConfig, law: &PointProcessLaw, bundle: &ScalingBundle, out: &mut OutputDir) -> Result<Value> {
    let g = &config.grids;
    let mut summary = json!({});
    if !g.big_n.is_empty() {
        let mut ns = g.big_n.clone();
        ns.sort_unstable();
        ns.dedup();
        let second = gaussian_second_moment(law);
        let rows = predict_speed(bundle, &ns, second)?;
        out.write_csv("predict_speed.csv", &rows)?;
        summary["second_order_constant"] = json!(second_order_constant(bundle, second));
    }
    if !g.n.is_empty() && !g.theta.is_empty() {
        let rows = predict_barrier(bundle, &g.theta, &g.n)?;
        out.write_csv("predict_barrier.csv", &rows)?;
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn tmp(tag: &str) -> PathBuf {
        std::env::temp_dir().join(format!("nbrw-run-{tag}-{}", std::process::id()))
    }

    fn config(json: &str, out: &std::path::Path) -> RunConfig {
        let mut c = RunConfig::from_json(json).unwrap();
        c.output = Some(out.to_path_buf());
        c
    }

    #[test]
    fn speed_sweep_writes_tables_and_is_reproducible() {
        let text = r#"{"experiment": "speed-sweep", "law": {"name": "binary_gaussian"},
            "grids": {"N": [100, 10]}, "steps": 200, "reps": 3, "seed": 11}"#;
        let (a, b) = (tmp("sweep-a"), tmp("sweep-b"));
        let ra = run(&config(text, &a)).unwrap();
        run(&config(text, &b)).unwrap();
        assert!(ra.passed);
        for f in ["speed_sweep.csv", "trajectory.csv", "cloud.csv"] {
            assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
        }
        let sweep = fs::read_to_string(a.join("speed_sweep.csv")).unwrap();
        let mut lines = sweep.lines();
        assert_eq!(lines.next().unwrap(), "N,v_hat,se,bracket_lo,bracket_hi,nu_N_prediction");
        assert!(lines.next().unwrap().starts_with("10,"));
        let manifest: Value = serde_json::from_str(&fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
        assert_eq!(manifest["seed"], 11);
        assert!(manifest["wall_time_seconds"].as_f64().unwrap() >= 0.0);
        fs::remove_dir_all(&a).unwrap();
        fs::remove_dir_all(&b).unwrap();
    }

    #[test]
    fn failure_leaves_no_output() {
        // at j = 1 the window [1.2, 1.4] holds no lattice point, so every walker dies
        let dir = tmp("fail");
        let mut c = config(
            r#"{"experiment": "corridor", "law": {"name": "binary_gaussian"}, "grids": {"n": [4]},
                "corridor": {"corridor": [[0, -1, 1], [0.25, 0.3, 0.35], [1, 0.3, 0.35]], "walk": "lazy", "exponent": 1, "population": 2}}"#,
            &dir,
        );
        c.reps = Some(2);
        assert!(run(&c).is_err());
        assert!(!dir.exists());
    }

    #[test]
    fn predict_defaults_to_the_canonical_law() {
        let dir = tmp("predict");
        let c = config(r#"{"experiment": "predict", "grids": {"N": [1000], "n": [8], "theta": [1]}}"#, &dir);
        let r = run(&c).unwrap();
        assert_eq!(r.files.len(), 3);
        let text = fs::read_to_string(dir.join("predict_speed.csv")).unwrap();
        assert!(text.starts_with("N,log_n,nu_n,time_scale,second_order_speed\n1000,"));
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn predict_rejects_n_equal_one() {
        let dir = tmp("predict-one");
        let c = config(r#"{"experiment": "predict", "grids": {"N": [1]}}"#, &dir);
        assert!(matches!(run(&c), Err(Error::Domain(_))));
        assert!(!dir.exists());
    }

    #[test]
    fn calibrate_raw_gaussian() {
        let dir = tmp("calibrate");
        let c = config(
            r#"{"experiment": "calibrate", "law": {"raw": {"family": "binary_gaussian", "mean": 0, "var": 1},
                "tolerance": 0.01, "samples": 200000}, "seed": 3}"#,
            &dir,
        );
        let r = run(&c).unwrap();
        assert_eq!(r.summary["boundary_conditions_hold"], true);
        let manifest: Value = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
        assert!(manifest["calibration"]["theta_star"].as_f64().unwrap() > 0.0);
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn non_gaussian_law_needs_a_bundle() {
        let dir = tmp("bundle");
        let c = config(
            r#"{"experiment": "speed-sweep", "law": {"name": "binary_tilted_heavy_tail"}, "grids": {"N": [10]}}"#,
            &dir,
        );
        assert!(matches!(run(&c), Err(Error::ConfigInvalid(m)) if m.starts_with("bundle")));
        assert!(!dir.exists());
    }
}
