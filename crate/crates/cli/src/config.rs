//! TOML run configuration.
//!
//! Every key is optional; omitted keys take the reference-scene defaults.
//! Unknown keys are rejected. See `README.md` for the full grammar.

use std::path::PathBuf;

use num_complex::Complex64;
use ris_locate_core::geometry::{distance, Position2, Position3, ScenarioGeometry, SPEED_OF_LIGHT};
use ris_locate_core::harness::{default_trajectory, ExperimentConfig, NoiseReference};
use ris_locate_core::scene::{AngleMode, ArrayAxes, Scene};
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{key}: {message}")]
pub struct ConfigError {
    /// Dotted path of the offending key, e.g. `scene.mu`.
    pub key: String,
    pub message: String,
}

impl ConfigError {
    fn new(key: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            key: key.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment: Option<RawExperiment>,
    scene: Option<RawScene>,
    trajectory: Option<RawTrajectory>,
    output: Option<RawOutput>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExperiment {
    snr_db: Option<Vec<f64>>,
    n_ris: Option<Vec<i64>>,
    elements_snr_db: Option<f64>,
    trials: Option<i64>,
    seed: Option<u64>,
    sweep_points_per_element: Option<i64>,
    repeats: Option<i64>,
    baseline: Option<bool>,
    noise_reference: Option<String>,
    parallel: Option<bool>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum PerRis<T> {
    Shared(T),
    Each([T; 3]),
}

impl<T: Copy> PerRis<T> {
    fn expand(&self) -> [T; 3] {
        match self {
            PerRis::Shared(v) => [*v; 3],
            PerRis::Each(v) => *v,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScene {
    bs: Option<[f64; 3]>,
    ris: Option<[[f64; 3]; 3]>,
    ms: Option<[f64; 3]>,
    carrier_hz: Option<f64>,
    bs_spacing_m: Option<f64>,
    ris_spacing_m: Option<PerRis<f64>>,
    mu: Option<f64>,
    n_bs: Option<i64>,
    n_ris: Option<PerRis<i64>>,
    pilot: Option<[f64; 2]>,
    los_blocked: Option<bool>,
    angles: Option<RawAngles>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAngles {
    mode: Option<String>,
    phi_br: Option<[f64; 3]>,
    theta_br: Option<[f64; 3]>,
    theta_rm: Option<[f64; 3]>,
    theta_bm: Option<f64>,
    bs_axis: Option<[f64; 3]>,
    ris_axes: Option<[[f64; 3]; 3]>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTrajectory {
    points: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<PathBuf>,
}

/// Fully validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: ExperimentConfig,
    /// MS locations of the noiseless trajectory run.
    pub trajectory: Vec<Position3>,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        parse_config("").expect("defaults are valid")
    }
}

fn p3(v: [f64; 3]) -> Position3 {
    Position3::new(v[0], v[1], v[2])
}

fn positive_count(key: &str, v: i64) -> Result<usize, ConfigError> {
    if v < 1 {
        return Err(ConfigError::new(
            key,
            format!("must be at least 1, got {v}"),
        ));
    }
    Ok(v as usize)
}

fn positive(key: &str, v: f64) -> Result<f64, ConfigError> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(ConfigError::new(
            key,
            format!("must be positive and finite, got {v}"),
        ));
    }
    Ok(v)
}

fn finite_all<'a>(key: &str, vs: impl IntoIterator<Item = &'a f64>) -> Result<(), ConfigError> {
    for v in vs {
        if !v.is_finite() {
            return Err(ConfigError::new(key, format!("must be finite, got {v}")));
        }
    }
    Ok(())
}

fn angles_in_range(key: &str, vs: &[f64]) -> Result<(), ConfigError> {
    for v in vs {
        if !(0.0..=std::f64::consts::PI).contains(v) {
            return Err(ConfigError::new(key, format!("angle {v} outside [0, π]")));
        }
    }
    Ok(())
}

fn nonzero_axis(key: &str, v: &[f64; 3]) -> Result<(), ConfigError> {
    finite_all(key, v)?;
    if v.iter().all(|c| *c == 0.0) {
        return Err(ConfigError::new(key, "axis must be non-zero"));
    }
    Ok(())
}

fn build_scene(raw: RawScene) -> Result<Scene, ConfigError> {
    let mut scene = Scene::reference();

    if let Some(v) = raw.bs {
        finite_all("scene.bs", &v)?;
        scene.geometry.bs = p3(v);
    }
    if let Some(v) = raw.ris {
        finite_all("scene.ris", v.iter().flatten())?;
        scene.geometry.ris = v.map(p3);
    }
    if let Some(v) = raw.ms {
        finite_all("scene.ms", &v)?;
        scene.geometry.ms = p3(v);
    }
    if let Some(f) = raw.carrier_hz {
        scene.geometry.carrier_freq = positive("scene.carrier_hz", f)?;
    }
    let quarter_wave = SPEED_OF_LIGHT / scene.geometry.carrier_freq / 4.0;
    scene.geometry.bs_spacing = match raw.bs_spacing_m {
        Some(d) => positive("scene.bs_spacing_m", d)?,
        None => quarter_wave,
    };
    scene.geometry.ris_spacing = match raw.ris_spacing_m {
        Some(d) => {
            let d = d.expand();
            for v in d {
                positive("scene.ris_spacing_m", v)?;
            }
            d
        }
        None => [scene.geometry.bs_spacing; 3],
    };
    if let Some(mu) = raw.mu {
        scene.geometry.mu = positive("scene.mu", mu)?;
    }
    if let Some(n) = raw.n_bs {
        scene.n_bs = positive_count("scene.n_bs", n)?;
    }
    if let Some(n) = raw.n_ris {
        let n = n.expand();
        scene.n_ris = [
            positive_count("scene.n_ris", n[0])?,
            positive_count("scene.n_ris", n[1])?,
            positive_count("scene.n_ris", n[2])?,
        ];
    }
    if let Some([re, im]) = raw.pilot {
        finite_all("scene.pilot", &[re, im])?;
        if re == 0.0 && im == 0.0 {
            return Err(ConfigError::new("scene.pilot", "pilot must be non-zero"));
        }
        scene.pilot = Complex64::new(re, im);
    }
    if let Some(b) = raw.los_blocked {
        scene.los_blocked = b;
    }
    if let Some(a) = raw.angles {
        scene.angles = build_angles(a, &scene.angles)?;
    }

    check_geometry(&scene.geometry)?;
    scene
        .validate()
        .map_err(|e| ConfigError::new("scene", e.to_string()))?;
    Ok(scene)
}

fn build_angles(raw: RawAngles, current: &AngleMode) -> Result<AngleMode, ConfigError> {
    let mode = raw.mode.as_deref().unwrap_or("explicit");
    match mode {
        "explicit" => {
            if raw.bs_axis.is_some() || raw.ris_axes.is_some() {
                return Err(ConfigError::new(
                    "scene.angles.mode",
                    "array axes are only used with mode = \"derived\"",
                ));
            }
            let mut a = match current {
                AngleMode::Explicit(a) => *a,
                AngleMode::Derived(_) => unreachable!("defaults are explicit"),
            };
            if let Some(v) = raw.phi_br {
                angles_in_range("scene.angles.phi_br", &v)?;
                a.phi_br = v;
            }
            if let Some(v) = raw.theta_br {
                angles_in_range("scene.angles.theta_br", &v)?;
                a.theta_br = v;
            }
            if let Some(v) = raw.theta_rm {
                angles_in_range("scene.angles.theta_rm", &v)?;
                a.theta_rm = v;
            }
            if let Some(v) = raw.theta_bm {
                angles_in_range("scene.angles.theta_bm", &[v])?;
                a.theta_bm = v;
            }
            Ok(AngleMode::Explicit(a))
        }
        "derived" => {
            if raw.phi_br.is_some()
                || raw.theta_br.is_some()
                || raw.theta_rm.is_some()
                || raw.theta_bm.is_some()
            {
                return Err(ConfigError::new(
                    "scene.angles.mode",
                    "explicit angles cannot be combined with mode = \"derived\"",
                ));
            }
            let bs = raw.bs_axis.unwrap_or([1.0, 0.0, 0.0]);
            nonzero_axis("scene.angles.bs_axis", &bs)?;
            let ris = raw.ris_axes.unwrap_or([[1.0, 0.0, 0.0]; 3]);
            for axis in &ris {
                nonzero_axis("scene.angles.ris_axes", axis)?;
            }
            Ok(AngleMode::Derived(ArrayAxes { bs, ris }))
        }
        other => Err(ConfigError::new(
            "scene.angles.mode",
            format!("expected \"explicit\" or \"derived\", got \"{other}\""),
        )),
    }
}

fn check_geometry(g: &ScenarioGeometry) -> Result<(), ConfigError> {
    for i in 0..3 {
        for j in (i + 1)..3 {
            if distance(&g.ris[i], &g.ris[j]) == 0.0 {
                return Err(ConfigError::new(
                    "scene.ris",
                    format!("RIS {} and RIS {} share a position", i + 1, j + 1),
                ));
            }
        }
        if distance(&g.ris[i], &g.bs) == 0.0 {
            return Err(ConfigError::new(
                "scene.ris",
                format!("RIS {} coincides with the BS", i + 1),
            ));
        }
        if distance(&g.ris[i], &g.ms) == 0.0 {
            return Err(ConfigError::new(
                "scene.ms",
                format!("MS coincides with RIS {}", i + 1),
            ));
        }
    }
    if distance(&g.bs, &g.ms) == 0.0 {
        return Err(ConfigError::new("scene.ms", "MS coincides with the BS"));
    }
    Ok(())
}

fn build_experiment(raw: RawExperiment, scene: Scene) -> Result<ExperimentConfig, ConfigError> {
    let mut cfg = ExperimentConfig {
        scene,
        ..ExperimentConfig::default()
    };
    if let Some(v) = raw.snr_db {
        if v.is_empty() {
            return Err(ConfigError::new("experiment.snr_db", "must be non-empty"));
        }
        if v.iter().any(|s| s.is_nan() || *s == f64::NEG_INFINITY) {
            return Err(ConfigError::new(
                "experiment.snr_db",
                "values must be numbers",
            ));
        }
        cfg.snr_grid = v;
    }
    if let Some(v) = raw.n_ris {
        if v.is_empty() {
            return Err(ConfigError::new("experiment.n_ris", "must be non-empty"));
        }
        cfg.n_ris_grid = v
            .into_iter()
            .map(|n| positive_count("experiment.n_ris", n))
            .collect::<Result<_, _>>()?;
    }
    if let Some(v) = raw.elements_snr_db {
        if v.is_nan() {
            return Err(ConfigError::new(
                "experiment.elements_snr_db",
                "must be a number",
            ));
        }
        cfg.elements_snr_db = v;
    }
    if let Some(v) = raw.trials {
        cfg.trials = positive_count("experiment.trials", v)?;
    }
    if let Some(v) = raw.seed {
        cfg.master_seed = v;
    }
    if let Some(v) = raw.sweep_points_per_element {
        cfg.sweep_points_per_element = positive_count("experiment.sweep_points_per_element", v)?;
    }
    if let Some(v) = raw.repeats {
        cfg.repeats = positive_count("experiment.repeats", v)?;
    }
    if let Some(v) = raw.baseline {
        cfg.baseline_mode = v;
    }
    if let Some(v) = raw.noise_reference {
        cfg.noise_reference = match v.as_str() {
            "template" => NoiseReference::Template,
            "per-scene" => NoiseReference::PerScene,
            other => {
                return Err(ConfigError::new(
                    "experiment.noise_reference",
                    format!("expected \"template\" or \"per-scene\", got \"{other}\""),
                ))
            }
        };
    }
    if let Some(v) = raw.parallel {
        cfg.parallel = v;
    }
    // Sweep points must support a three-point peak fit on every RIS.
    let min_elems = cfg
        .scene
        .n_ris
        .iter()
        .chain(&cfg.n_ris_grid)
        .min()
        .copied()
        .unwrap_or(1);
    if cfg.sweep_points_per_element * min_elems < 3 {
        return Err(ConfigError::new(
            "experiment.sweep_points_per_element",
            "sweeps need at least 3 points per RIS",
        ));
    }
    cfg.validate()
        .map_err(|e| ConfigError::new("experiment", e.to_string()))?;
    Ok(cfg)
}

/// Parses and validates a TOML configuration.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let de = toml::de::Deserializer::parse(text)
        .map_err(|e| ConfigError::new("<document>", e.to_string().trim_end().to_string()))?;
    let raw: RawConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let key = e.path().to_string();
        ConfigError::new(key, e.inner().message().to_string())
    })?;

    let scene = build_scene(raw.scene.unwrap_or_default())?;
    let ms_height = scene.geometry.ms.z;
    let experiment = build_experiment(raw.experiment.unwrap_or_default(), scene)?;

    let trajectory = match raw.trajectory.and_then(|t| t.points) {
        Some(points) => {
            if points.is_empty() {
                return Err(ConfigError::new("trajectory.points", "must be non-empty"));
            }
            finite_all("trajectory.points", points.iter().flatten())?;
            points
                .iter()
                .map(|p| Position2::new(p[0], p[1]).at_height(ms_height))
                .collect()
        }
        None => default_trajectory(ms_height),
    };
    for p in &trajectory {
        let g = &experiment.scene.geometry;
        if g.ris
            .iter()
            .chain(std::iter::once(&g.bs))
            .any(|n| distance(n, p) == 0.0)
        {
            return Err(ConfigError::new(
                "trajectory.points",
                format!("point ({}, {}) coincides with a BS or RIS", p.x, p.y),
            ));
        }
    }

    let output_dir = raw
        .output
        .and_then(|o| o.dir)
        .unwrap_or_else(|| PathBuf::from("results"));

    Ok(RunConfig {
        experiment,
        trajectory,
        output_dir,
    })
}
