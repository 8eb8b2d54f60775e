//! Monte Carlo experiment runner.
//!
//! Each trial seeds its own noise stream from `(master_seed, group, trial)`,
//! so results do not depend on execution order and serial and parallel runs
//! are bit-identical.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::channel::{ChannelError, ComplexSample, PhaseProfile};
use crate::geometry::{Position2, Position3};
use crate::localizer::{
    full_schedule, localize, EstimatorKnowledge, LocalizeError, SlotConfig, Warnings,
};
use crate::scene::{Scene, SceneError};
use crate::sim::{noisy_log, LinkSimulator};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error("invalid experiment configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Localize(#[from] LocalizeError),
}

/// Which scene fixes the receiver noise floor of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseReference {
    /// σ is computed once from the template scene and held fixed while the
    /// swept parameter changes the received power.
    #[default]
    Template,
    /// σ is recomputed from each swept scene.
    PerScene,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scene: Scene,
    pub snr_grid: Vec<f64>,
    pub n_ris_grid: Vec<usize>,
    /// SNR of the element-count sweep, dB.
    pub elements_snr_db: f64,
    pub trials: usize,
    pub master_seed: u64,
    pub sweep_points_per_element: usize,
    pub repeats: usize,
    /// Run the single-antenna system (N_B = 1) instead of the scene's array.
    pub baseline_mode: bool,
    pub noise_reference: NoiseReference,
    pub parallel: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scene: Scene::reference(),
            snr_grid: vec![0.0, 6.0, 12.0, 18.0, 24.0],
            n_ris_grid: vec![25, 50, 100, 200],
            elements_snr_db: 12.0,
            trials: 500,
            master_seed: 1,
            sweep_points_per_element: 16,
            repeats: 1,
            baseline_mode: false,
            noise_reference: NoiseReference::Template,
            parallel: true,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        self.scene.validate()?;
        if self.trials == 0 {
            return Err(HarnessError::Config("trials must be at least 1".into()));
        }
        if self.snr_grid.is_empty() || self.n_ris_grid.is_empty() {
            return Err(HarnessError::Config("grids must be non-empty".into()));
        }
        if self.snr_grid.iter().any(|s| s.is_nan()) || self.elements_snr_db.is_nan() {
            return Err(HarnessError::Config("SNR values must be numbers".into()));
        }
        if self.n_ris_grid.contains(&0) {
            return Err(HarnessError::Config(
                "element counts must be positive".into(),
            ));
        }
        if self.sweep_points_per_element == 0 {
            return Err(HarnessError::Config(
                "sweep_points_per_element must be positive".into(),
            ));
        }
        if self.repeats == 0 {
            return Err(HarnessError::Config("repeats must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub trial: usize,
    pub snr_db: f64,
    pub n_ris: usize,
    pub true_position: Position2,
    pub estimate: Option<Position2>,
    /// `|estimated − true|` per RIS range; infinite when the trial failed.
    pub distance_errors: [f64; 3],
    /// Planar position error; infinite when the trial failed.
    pub position_error: f64,
    pub warnings: Warnings,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryRow {
    /// SNR in dB or element count, depending on the sweep.
    pub key: f64,
    pub mean: f64,
    pub median: f64,
    pub p90: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub summary: Vec<SummaryRow>,
    pub trials: Vec<TrialResult>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryPoint {
    pub actual: Position2,
    pub estimate: Option<Position2>,
    pub error: f64,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub snr_db: f64,
    pub proposed: SummaryRow,
    pub baseline: SummaryRow,
    /// Paired trials where the proposed error is strictly below the baseline's.
    pub proposed_wins: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonOutput {
    pub rows: Vec<ComparisonRow>,
    pub proposed: Vec<TrialResult>,
    pub baseline: Vec<TrialResult>,
}

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-trial noise seed from the master seed, group index and trial index.
pub fn derive_seed(master: u64, group: u64, trial: u64) -> u64 {
    mix64(mix64(mix64(master) ^ group) ^ trial.rotate_left(32))
}

/// Noise standard deviation giving `snr_db` against the noiseless power of
/// the all-zero-phase slot.
pub fn snr_to_sigma(scene: &Scene, snr_db: f64) -> Result<f64, HarnessError> {
    if snr_db.is_nan() {
        return Err(HarnessError::Config("SNR must be a number".into()));
    }
    let sim = LinkSimulator::from_scene(scene)?;
    let zero = [
        PhaseProfile::zero(),
        PhaseProfile::zero(),
        PhaseProfile::zero(),
    ];
    let power = sim.noiseless(&zero)?.norm_sqr();
    if snr_db == f64::INFINITY {
        return Ok(0.0);
    }
    Ok((power / 10f64.powf(snr_db / 10.0)).sqrt())
}

/// Precomputed noiseless responses for one scene.
struct Prepared {
    scene: Scene,
    knowledge: EstimatorKnowledge,
    schedule: Vec<SlotConfig>,
    clean: Vec<ComplexSample>,
}

impl Prepared {
    fn new(scene: Scene, points_per_element: usize, repeats: usize) -> Result<Self, HarnessError> {
        let sim = LinkSimulator::from_scene(&scene)?;
        let schedule = full_schedule(&scene.n_ris, points_per_element, repeats)?;
        let clean = sim.noiseless_schedule(&schedule)?;
        let knowledge = EstimatorKnowledge::from_scene(&scene)?;
        Ok(Self {
            scene,
            knowledge,
            schedule,
            clean,
        })
    }

    fn run(&self, sigma: f64, seed: u64) -> Outcome {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let log = noisy_log(&self.schedule, &self.clean, sigma, &mut rng);
        let truth = self.scene.geometry.ms;
        match localize(&log, &self.knowledge) {
            Ok(r) => {
                let distance_errors = std::array::from_fn(|i| {
                    (r.distances[i]
                        - crate::geometry::distance(&self.scene.geometry.ris[i], &truth))
                    .abs()
                });
                Outcome {
                    estimate: Some(r.position),
                    distance_errors,
                    position_error: r.position.distance(&truth.planar()),
                    warnings: r.warnings,
                    failure: None,
                }
            }
            Err(e) => Outcome {
                estimate: None,
                distance_errors: [f64::INFINITY; 3],
                position_error: f64::INFINITY,
                warnings: Warnings::default(),
                failure: Some(e.to_string()),
            },
        }
    }
}

struct Outcome {
    estimate: Option<Position2>,
    distance_errors: [f64; 3],
    position_error: f64,
    warnings: Warnings,
    failure: Option<String>,
}

fn map_indices<T: Send>(n: usize, parallel: bool, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    if parallel {
        (0..n).into_par_iter().map(f).collect()
    } else {
        (0..n).map(f).collect()
    }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let (a, b) = (sorted[lo], sorted[hi]);
    if lo == hi || a == b {
        a
    } else {
        a + (b - a) * (pos - lo as f64)
    }
}

/// Mean, median and 90th percentile (linear interpolation between order
/// statistics) of `errors`.
pub fn summarize(key: f64, errors: &[f64]) -> SummaryRow {
    let mut sorted = errors.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mean = sorted.iter().sum::<f64>() / sorted.len() as f64;
    SummaryRow {
        key,
        mean,
        median: quantile(&sorted, 0.5),
        p90: quantile(&sorted, 0.9),
        trials: sorted.len(),
    }
}

fn trial_record(
    trial: usize,
    snr_db: f64,
    n_ris: usize,
    truth: Position2,
    o: Outcome,
) -> TrialResult {
    TrialResult {
        trial,
        snr_db,
        n_ris,
        true_position: truth,
        estimate: o.estimate,
        distance_errors: o.distance_errors,
        position_error: o.position_error,
        warnings: o.warnings,
        failure: o.failure,
    }
}

fn system_scene(config: &ExperimentConfig, scene: &Scene) -> Scene {
    if config.baseline_mode {
        scene.single_antenna()
    } else {
        scene.clone()
    }
}

/// Noiseless pipeline at every MS location of `path`.
pub fn run_noiseless(
    scene: &Scene,
    path: &[Position3],
    points_per_element: usize,
) -> Result<Vec<TrajectoryPoint>, HarnessError> {
    if path.is_empty() {
        return Err(HarnessError::Config("trajectory must be non-empty".into()));
    }
    path.iter()
        .map(|ms| {
            let prepared = Prepared::new(scene.with_ms(*ms), points_per_element, 1)?;
            let o = prepared.run(0.0, 0);
            Ok(TrajectoryPoint {
                actual: ms.planar(),
                estimate: o.estimate,
                error: o.position_error,
                failure: o.failure,
            })
        })
        .collect()
}

/// The default noiseless trajectory: 20 points on a circle of radius 10 m
/// around (60, 20), at the scene's MS height.
pub fn default_trajectory(ms_height: f64) -> Vec<Position3> {
    (0..20)
        .map(|i| {
            let a = std::f64::consts::TAU * i as f64 / 20.0;
            Position3::new(60.0 + 10.0 * a.cos(), 20.0 + 10.0 * a.sin(), ms_height)
        })
        .collect()
}

fn run_group(
    config: &ExperimentConfig,
    prepared: &Prepared,
    sigma: f64,
    group: u64,
    snr_db: f64,
) -> Vec<TrialResult> {
    let truth = prepared.scene.geometry.ms.planar();
    let n_ris = prepared.scene.n_ris[0];
    map_indices(config.trials, config.parallel, |t| {
        let seed = derive_seed(config.master_seed, group, t as u64);
        trial_record(t, snr_db, n_ris, truth, prepared.run(sigma, seed))
    })
}

/// Position error versus SNR on the configured scene.
pub fn run_snr_sweep(config: &ExperimentConfig) -> Result<SweepOutput, HarnessError> {
    config.validate()?;
    let prepared = Prepared::new(
        system_scene(config, &config.scene),
        config.sweep_points_per_element,
        config.repeats,
    )?;
    let mut summary = Vec::with_capacity(config.snr_grid.len());
    let mut trials = Vec::with_capacity(config.snr_grid.len() * config.trials);
    for (g, snr) in config.snr_grid.iter().enumerate() {
        // The noise floor is that of the configured (array) system.
        let sigma = snr_to_sigma(&config.scene, *snr)?;
        let rows = run_group(config, &prepared, sigma, g as u64, *snr);
        let errors: Vec<f64> = rows.iter().map(|r| r.position_error).collect();
        summary.push(summarize(*snr, &errors));
        trials.extend(rows);
    }
    Ok(SweepOutput { summary, trials })
}

/// Position error versus elements per RIS at `elements_snr_db`.
pub fn run_elements_sweep(config: &ExperimentConfig) -> Result<SweepOutput, HarnessError> {
    config.validate()?;
    let template_sigma = snr_to_sigma(&config.scene, config.elements_snr_db)?;
    let mut summary = Vec::with_capacity(config.n_ris_grid.len());
    let mut trials = Vec::new();
    for (g, n) in config.n_ris_grid.iter().enumerate() {
        let scene = config.scene.with_n_ris(*n);
        let sigma = match config.noise_reference {
            NoiseReference::Template => template_sigma,
            NoiseReference::PerScene => snr_to_sigma(&scene, config.elements_snr_db)?,
        };
        let prepared = Prepared::new(
            system_scene(config, &scene),
            config.sweep_points_per_element,
            config.repeats,
        )?;
        let rows = run_group(config, &prepared, sigma, g as u64, config.elements_snr_db);
        let errors: Vec<f64> = rows.iter().map(|r| r.position_error).collect();
        summary.push(summarize(*n as f64, &errors));
        trials.extend(rows);
    }
    Ok(SweepOutput { summary, trials })
}

/// Proposed array system against the single-antenna system without
/// departure correction. Both share the noise floor of the array system
/// and the same per-trial noise seed.
pub fn run_baseline_comparison(
    config: &ExperimentConfig,
) -> Result<ComparisonOutput, HarnessError> {
    config.validate()?;
    let proposed = Prepared::new(
        config.scene.clone(),
        config.sweep_points_per_element,
        config.repeats,
    )?;
    let baseline = Prepared::new(
        config.scene.single_antenna(),
        config.sweep_points_per_element,
        config.repeats,
    )?;
    let mut out = ComparisonOutput {
        rows: Vec::new(),
        proposed: Vec::new(),
        baseline: Vec::new(),
    };
    for (g, snr) in config.snr_grid.iter().enumerate() {
        let sigma = snr_to_sigma(&config.scene, *snr)?;
        let p = run_group(config, &proposed, sigma, g as u64, *snr);
        let b = run_group(config, &baseline, sigma, g as u64, *snr);
        let pe: Vec<f64> = p.iter().map(|r| r.position_error).collect();
        let be: Vec<f64> = b.iter().map(|r| r.position_error).collect();
        out.rows.push(ComparisonRow {
            snr_db: *snr,
            proposed: summarize(*snr, &pe),
            baseline: summarize(*snr, &be),
            proposed_wins: pe.iter().zip(&be).filter(|(a, b)| a < b).count(),
        });
        out.proposed.extend(p);
        out.baseline.extend(b);
    }
    Ok(out)
}
