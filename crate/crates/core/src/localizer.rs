//! Phase-switching estimator.
//!
//! A localization run consists of a four-slot calibration block, where each
//! RIS is flipped between phase 0 and π to isolate the direct path and the
//! three cascades, followed by one sweep block per RIS. During RIS Γ's sweep
//! a linear phase ramp `ϱ` is scanned over `[0, 2π)` while the other two
//! surfaces sit at phase 0. Subtracting the calibrated components leaves
//! `y_Γ(ϱ)`, whose magnitude peaks at `ρ_BR ρ_RM N_R |x Ξ|` when the ramp
//! cancels the unknown RIS → MS departure angle. Inverting the path-loss law
//! at that peak gives the RIS → MS distance.

use std::f64::consts::TAU;

use num_complex::Complex64;
use thiserror::Error;

use crate::channel::{xi, ComplexSample, PhaseProfile};
use crate::geometry::{distance, path_loss, trilaterate, GeometryError, Position2, Position3};
use crate::scene::{Scene, SceneError};

const GRID_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LocalizeError {
    #[error("malformed measurement log: {0}")]
    MalformedLog(String),
    #[error("sweep of RIS {ris} is flat; no peak to locate")]
    FlatSweep { ris: usize },
    #[error("degenerate departure geometry for RIS {ris}: |Ξ| = {xi_norm}")]
    DegenerateDeparture { ris: usize, xi_norm: f64 },
    #[error("invalid peak measurement {0}")]
    InvalidMeasurement(f64),
    #[error("sweep needs at least {min} points, got {got}")]
    TooFewPoints { min: usize, got: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Scene(#[from] SceneError),
}

/// RIS phase state of one transmission, repeated `repeats` times.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotConfig {
    pub profiles: [PhaseProfile; 3],
    pub repeats: usize,
}

impl SlotConfig {
    pub fn new(profiles: [PhaseProfile; 3]) -> Self {
        Self {
            profiles,
            repeats: 1,
        }
    }

    pub fn with_repeats(mut self, repeats: usize) -> Self {
        self.repeats = repeats.max(1);
        self
    }

    /// Index of the RIS carrying a linear ramp while the other two sit at
    /// phase 0.
    fn swept_ris(&self) -> Option<(usize, f64)> {
        let mut found = None;
        for (i, p) in self.profiles.iter().enumerate() {
            match p {
                PhaseProfile::LinearRamp(step) if found.is_none() => found = Some((i, *step)),
                PhaseProfile::Uniform(v) if *v == 0.0 => {}
                _ => return None,
            }
        }
        found
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogEntry {
    pub config: SlotConfig,
    /// Coherent average over `config.repeats` transmissions.
    pub sample: ComplexSample,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MeasurementLog {
    pub entries: Vec<LogEntry>,
}

impl MeasurementLog {
    pub fn push(&mut self, config: SlotConfig, sample: ComplexSample) {
        self.entries.push(LogEntry { config, sample });
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Physical transmissions behind the log, counting repeats.
    pub fn transmissions(&self) -> usize {
        self.entries.iter().map(|e| e.config.repeats).sum()
    }
}

/// Everything the estimator may use. Built only from BS and RIS side
/// quantities; nothing here depends on the MS beyond its known height.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorKnowledge {
    pub bs: Position3,
    pub ris: [Position3; 3],
    pub rho_br: [f64; 3],
    pub theta_br: [f64; 3],
    pub n_bs: usize,
    pub n_ris: [usize; 3],
    pub k_bs: f64,
    pub k_ris: [f64; 3],
    pub mu: f64,
    pub pilot: Complex64,
    pub ms_height: f64,
}

impl EstimatorKnowledge {
    pub fn from_scene(scene: &Scene) -> Result<Self, LocalizeError> {
        scene.validate()?;
        let g = &scene.geometry;
        let mut rho_br = [0.0; 3];
        for (rho, r) in rho_br.iter_mut().zip(&g.ris) {
            *rho = path_loss(distance(&g.bs, r), g.mu)?;
        }
        Ok(Self {
            bs: g.bs,
            ris: g.ris,
            rho_br,
            theta_br: scene.bs_departure_angles(),
            n_bs: scene.n_bs,
            n_ris: scene.n_ris,
            k_bs: g.k_bs(),
            k_ris: [g.k_ris(0), g.k_ris(1), g.k_ris(2)],
            mu: g.mu,
            pilot: scene.pilot,
            ms_height: g.ms.z,
        })
    }

    pub fn xi(&self, ris: usize) -> Complex64 {
        xi(self.n_bs, self.k_bs, self.theta_br[ris])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Warnings {
    /// Range shorter than the anchor's height offset; horizontal range set to 0.
    pub clamped_range: [bool; 3],
}

impl Warnings {
    pub fn any(&self) -> bool {
        self.clamped_range.iter().any(|c| *c)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalizationResult {
    pub distances: [f64; 3],
    /// Ramp steps at the fitted peaks, radians in `[0, 2π)`.
    pub rho_star: [f64; 3],
    pub peak_magnitudes: [f64; 3],
    pub position: Position2,
    pub residual: f64,
    pub warnings: Warnings,
}

/// The four phase-flip slots: (0,0,0), (0,π,0), (π,π,0), (0,0,π).
pub fn calibration_schedule() -> [SlotConfig; 4] {
    use PhaseProfile as P;
    [
        SlotConfig::new([P::zero(), P::zero(), P::zero()]),
        SlotConfig::new([P::zero(), P::flipped(), P::zero()]),
        SlotConfig::new([P::flipped(), P::flipped(), P::zero()]),
        SlotConfig::new([P::zero(), P::zero(), P::flipped()]),
    ]
}

/// Components recovered from the calibration block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Separated {
    /// Direct path `H_BM x`.
    pub direct: ComplexSample,
    /// `H_Γ(0) x` per RIS.
    pub ris: [ComplexSample; 3],
}

pub fn separate_components(samples: &[ComplexSample; 4]) -> Separated {
    let [y1, y2, y3, y4] = *samples;
    Separated {
        direct: (y3 + y4) / 2.0,
        ris: [(y2 - y3) / 2.0, (y1 - y2) / 2.0, (y1 - y4) / 2.0],
    }
}

/// Ramp steps `2πs/S`, `s = 0..S`.
pub fn sweep_grid(points: usize) -> Vec<f64> {
    (0..points)
        .map(|s| TAU * s as f64 / points as f64)
        .collect()
}

/// RIS `ris` scans `LinearRamp(2πs/S)`; the others stay at phase 0.
pub fn sweep_schedule(ris: usize, points: usize) -> Result<Vec<SlotConfig>, LocalizeError> {
    if points < 2 {
        return Err(LocalizeError::TooFewPoints {
            min: 2,
            got: points,
        });
    }
    if ris > 2 {
        return Err(LocalizeError::MalformedLog(format!(
            "no RIS with index {ris}"
        )));
    }
    Ok(sweep_grid(points)
        .into_iter()
        .map(|step| {
            let mut profiles = [
                PhaseProfile::zero(),
                PhaseProfile::zero(),
                PhaseProfile::zero(),
            ];
            profiles[ris] = PhaseProfile::LinearRamp(step);
            SlotConfig::new(profiles)
        })
        .collect())
}

/// Calibration followed by the three sweeps, `points_per_element · N_RΓ`
/// points for RIS Γ.
pub fn full_schedule(
    n_ris: &[usize; 3],
    points_per_element: usize,
    repeats: usize,
) -> Result<Vec<SlotConfig>, LocalizeError> {
    let mut schedule: Vec<SlotConfig> = calibration_schedule().into();
    for (ris, n) in n_ris.iter().enumerate() {
        schedule.extend(sweep_schedule(ris, points_per_element * n)?);
    }
    Ok(schedule
        .into_iter()
        .map(|c| c.with_repeats(repeats))
        .collect())
}

/// `y_Γ = ỹ − y0 − y_a − y_b`.
pub fn residual(
    sweep: ComplexSample,
    direct: ComplexSample,
    other_a: ComplexSample,
    other_b: ComplexSample,
) -> ComplexSample {
    sweep - direct - other_a - other_b
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub rho_star: f64,
    pub magnitude: f64,
    /// Every magnitude was equal; `rho_star` is the first grid point.
    pub flat: bool,
}

/// Locates the sweep maximum on a uniform `[0, 2π)` grid and refines it with
/// a parabola through the peak and its two cyclic neighbours.
pub fn peak_search(magnitudes: &[f64], grid: &[f64]) -> Result<Peak, LocalizeError> {
    let n = magnitudes.len();
    if n < 3 {
        return Err(LocalizeError::TooFewPoints { min: 3, got: n });
    }
    if grid.len() != n {
        return Err(LocalizeError::MalformedLog(format!(
            "{} magnitudes for a {}-point grid",
            n,
            grid.len()
        )));
    }
    if magnitudes.iter().any(|m| !m.is_finite()) {
        return Err(LocalizeError::InvalidMeasurement(f64::NAN));
    }

    // Strict comparison keeps the smallest index on ties.
    let mut best = 0;
    for (i, m) in magnitudes.iter().enumerate() {
        if *m > magnitudes[best] {
            best = i;
        }
    }
    let peak = magnitudes[best];
    if magnitudes.iter().all(|m| *m == peak) {
        return Ok(Peak {
            rho_star: grid[0],
            magnitude: peak,
            flat: true,
        });
    }

    let left = magnitudes[(best + n - 1) % n];
    let right = magnitudes[(best + 1) % n];
    let curvature = left - 2.0 * peak + right;
    let (offset, vertex) = if curvature < 0.0 {
        let p = (0.5 * (left - right) / curvature).clamp(-0.5, 0.5);
        (p, peak - 0.25 * (left - right) * p)
    } else {
        (0.0, peak)
    };
    let step = TAU / n as f64;
    Ok(Peak {
        rho_star: (grid[best] + offset * step).rem_euclid(TAU),
        magnitude: vertex.max(peak),
        flat: false,
    })
}

/// Inverts `|y_Γ(ϱ*)| = ρ_BR Δ^(-μ/2) N_R |x Ξ|` for the RIS → MS distance `Δ`.
pub fn estimate_distance(
    peak_mag: f64,
    ris: usize,
    knowledge: &EstimatorKnowledge,
) -> Result<f64, LocalizeError> {
    if peak_mag.is_nan() || peak_mag <= 0.0 || !peak_mag.is_finite() {
        return Err(LocalizeError::InvalidMeasurement(peak_mag));
    }
    let xi_norm = knowledge.xi(ris).norm();
    if xi_norm <= 1e-6 * knowledge.n_bs as f64 {
        return Err(LocalizeError::DegenerateDeparture { ris, xi_norm });
    }
    let gain =
        knowledge.rho_br[ris] * knowledge.n_ris[ris] as f64 * knowledge.pilot.norm() * xi_norm;
    Ok((peak_mag / gain).powf(-2.0 / knowledge.mu))
}

pub fn coherent_average(samples: &[ComplexSample]) -> ComplexSample {
    assert!(
        !samples.is_empty(),
        "coherent_average needs at least one sample"
    );
    if samples.len() == 1 {
        return samples[0];
    }
    samples.iter().sum::<Complex64>() / samples.len() as f64
}

fn is_uniform(p: &PhaseProfile, value: f64) -> bool {
    matches!(p, PhaseProfile::Uniform(v) if *v == value)
}

fn check_calibration(entries: &[LogEntry]) -> Result<[ComplexSample; 4], LocalizeError> {
    if entries.len() < 4 {
        return Err(LocalizeError::MalformedLog(
            "missing calibration block".into(),
        ));
    }
    for (slot, (entry, want)) in entries.iter().zip(calibration_schedule()).enumerate() {
        let matches = entry
            .config
            .profiles
            .iter()
            .zip(&want.profiles)
            .all(|(got, w)| match w {
                PhaseProfile::Uniform(v) => is_uniform(got, *v),
                _ => false,
            });
        if !matches {
            return Err(LocalizeError::MalformedLog(format!(
                "calibration slot {} has an unexpected phase configuration",
                slot + 1
            )));
        }
    }
    Ok([
        entries[0].sample,
        entries[1].sample,
        entries[2].sample,
        entries[3].sample,
    ])
}

struct SweepBlock {
    grid: Vec<f64>,
    samples: Vec<ComplexSample>,
}

fn split_sweeps(entries: &[LogEntry]) -> Result<[SweepBlock; 3], LocalizeError> {
    let mut blocks: [Option<SweepBlock>; 3] = [None, None, None];
    let mut current: Option<usize> = None;
    for (offset, entry) in entries.iter().enumerate() {
        let (ris, step) = entry.config.swept_ris().ok_or_else(|| {
            LocalizeError::MalformedLog(format!(
                "entry {} is not a single-RIS ramp configuration",
                offset + 4
            ))
        })?;
        if current != Some(ris) {
            if blocks[ris].is_some() {
                return Err(LocalizeError::MalformedLog(format!(
                    "sweep block for RIS {} is not contiguous",
                    ris + 1
                )));
            }
            blocks[ris] = Some(SweepBlock {
                grid: Vec::new(),
                samples: Vec::new(),
            });
            current = Some(ris);
        }
        let block = blocks[ris].as_mut().expect("block opened above");
        block.grid.push(step);
        block.samples.push(entry.sample);
    }

    let mut out = Vec::with_capacity(3);
    for (ris, block) in blocks.into_iter().enumerate() {
        let block = block.ok_or_else(|| {
            LocalizeError::MalformedLog(format!("missing sweep block for RIS {}", ris + 1))
        })?;
        let n = block.grid.len();
        if n < 3 {
            return Err(LocalizeError::TooFewPoints { min: 3, got: n });
        }
        let uniform = block
            .grid
            .iter()
            .zip(sweep_grid(n))
            .all(|(g, want)| (g - want).abs() <= GRID_TOLERANCE);
        if !uniform {
            return Err(LocalizeError::MalformedLog(format!(
                "sweep of RIS {} is not a uniform grid over [0, 2π)",
                ris + 1
            )));
        }
        out.push(block);
    }
    let mut it = out.into_iter();
    Ok([
        it.next().expect("three blocks"),
        it.next().expect("three blocks"),
        it.next().expect("three blocks"),
    ])
}

/// Peak search over one RIS sweep, returning the fitted peak.
pub fn analyze_sweep(
    ris: usize,
    samples: &[ComplexSample],
    grid: &[f64],
    separated: &Separated,
) -> Result<Peak, LocalizeError> {
    let (a, b) = match ris {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    let magnitudes: Vec<f64> = samples
        .iter()
        .map(|y| residual(*y, separated.direct, separated.ris[a], separated.ris[b]).norm())
        .collect();
    let peak = peak_search(&magnitudes, grid)?;
    if peak.flat {
        return Err(LocalizeError::FlatSweep { ris: ris + 1 });
    }
    Ok(peak)
}

/// Full estimator: separation, per-RIS sweep peak, distance inversion and
/// trilateration.
pub fn localize(
    log: &MeasurementLog,
    knowledge: &EstimatorKnowledge,
) -> Result<LocalizationResult, LocalizeError> {
    let calibration = check_calibration(&log.entries)?;
    let separated = separate_components(&calibration);
    let sweeps = split_sweeps(&log.entries[4..])?;

    let mut distances = [0.0; 3];
    let mut rho_star = [0.0; 3];
    let mut peak_magnitudes = [0.0; 3];
    for (ris, block) in sweeps.iter().enumerate() {
        let peak = analyze_sweep(ris, &block.samples, &block.grid, &separated)?;
        rho_star[ris] = peak.rho_star;
        peak_magnitudes[ris] = peak.magnitude;
        distances[ris] = estimate_distance(peak.magnitude, ris, knowledge)?;
    }

    let fix = trilaterate(&distances, &knowledge.ris, knowledge.ms_height)?;
    Ok(LocalizationResult {
        distances,
        rho_star,
        peak_magnitudes,
        position: fix.position,
        residual: fix.residual,
        warnings: Warnings {
            clamped_range: fix.clamped,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn calibration_slots() {
        let s = calibration_schedule();
        assert!(s[0].profiles.iter().all(|p| is_uniform(p, 0.0)));
        assert!(is_uniform(&s[2].profiles[0], PI));
        assert!(is_uniform(&s[2].profiles[1], PI));
        assert!(is_uniform(&s[2].profiles[2], 0.0));
        assert!(is_uniform(&s[3].profiles[0], 0.0));
        assert!(is_uniform(&s[3].profiles[1], 0.0));
        assert!(is_uniform(&s[3].profiles[2], PI));
    }

    #[test]
    fn separation_hand_example() {
        // Components: direct 1, RIS1 j, RIS2 2, RIS3 -1.
        let y = [c(2.0, 1.0), c(-2.0, 1.0), c(-2.0, -1.0), c(4.0, 1.0)];
        let s = separate_components(&y);
        assert_eq!(s.direct, c(1.0, 0.0));
        assert_eq!(s.ris, [c(0.0, 1.0), c(2.0, 0.0), c(-1.0, 0.0)]);

        let z = separate_components(&[c(0.0, 0.0); 4]);
        assert_eq!(z.direct, c(0.0, 0.0));
        assert!(z.ris.iter().all(|v| *v == c(0.0, 0.0)));
    }

    #[test]
    fn sweep_schedule_grid() {
        let s = sweep_schedule(2, 4).unwrap();
        let steps: Vec<f64> = s
            .iter()
            .map(|c| match c.profiles[2] {
                PhaseProfile::LinearRamp(v) => v,
                _ => panic!("expected ramp"),
            })
            .collect();
        assert_eq!(steps, vec![0.0, PI / 2.0, PI, 3.0 * PI / 2.0]);
        assert!(s
            .iter()
            .all(|c| is_uniform(&c.profiles[0], 0.0) && is_uniform(&c.profiles[1], 0.0)));
        assert!(sweep_schedule(0, 1).is_err());
        let big = sweep_schedule(0, 16 * 100).unwrap();
        assert_eq!(big.len(), 1600);
        assert_eq!(big[0].profiles[0], PhaseProfile::LinearRamp(0.0));
        match big[1].profiles[0] {
            PhaseProfile::LinearRamp(v) => assert_relative_eq!(v, TAU / 1600.0),
            _ => unreachable!(),
        }
    }

    #[test]
    fn residual_identity() {
        let (y0, ya, yb, t) = (c(0.3, 0.1), c(-1.0, 2.0), c(0.5, 0.5), c(7.0, -3.0));
        let got = residual(y0 + ya + yb + t, y0, ya, yb);
        assert!((got - t).norm() < 1e-14);
    }

    #[test]
    fn peak_search_symmetric() {
        let grid = sweep_grid(3);
        let p = peak_search(&[1.0, 3.0, 1.0], &grid).unwrap();
        assert_eq!(p.rho_star, grid[1]);
        assert_eq!(p.magnitude, 3.0);
        assert!(!p.flat);
    }

    #[test]
    fn peak_search_ties_and_flat() {
        let grid = sweep_grid(6);
        let p = peak_search(&[0.0, 2.0, 1.0, 0.0, 2.0, 1.0], &grid).unwrap();
        // Index 1 wins the tie; its neighbours (0, 1) shift the vertex right.
        assert!(p.rho_star > grid[1] && p.rho_star < grid[2]);
        let flat = peak_search(&[1.5; 5], &sweep_grid(5)).unwrap();
        assert!(flat.flat);
        assert_eq!(flat.rho_star, 0.0);
        assert!(peak_search(&[1.0, 2.0], &sweep_grid(2)).is_err());
    }

    #[test]
    fn peak_search_wraps_cyclically() {
        let grid = sweep_grid(8);
        let p = peak_search(&[5.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 4.0], &grid).unwrap();
        // Vertex lies between the last grid point and 2π.
        assert!(p.rho_star > grid[7], "{}", p.rho_star);
        assert!(p.magnitude >= 5.0);
    }

    #[test]
    fn coherent_average_examples() {
        assert_eq!(coherent_average(&[c(1.0, -2.0)]), c(1.0, -2.0));
        assert_eq!(coherent_average(&[c(0.25, 0.5); 7]), c(0.25, 0.5));
    }
}
