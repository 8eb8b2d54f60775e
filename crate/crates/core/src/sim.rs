//! Measurement synthesis: turns a scene and a transmission schedule into a
//! [`MeasurementLog`].
//!
//! For a fixed scene each cascade reduces to `y_Γ(ω) = Σ_t g_t e^{jω_t}` with
//! `g = H_RM ⊙ (H_BR x)`, so per-transmission cost is `O(N_R)` rather than a
//! full matrix product.

use num_complex::Complex64;
use rand::Rng;

use crate::channel::{
    channel_bs_ris, channel_ris_ms, complex_noise, ChannelError, ComplexSample, PhaseProfile,
    SceneLinks,
};
use crate::localizer::{coherent_average, MeasurementLog, SlotConfig};
use crate::scene::{Scene, SceneError};

#[derive(Debug, Clone, PartialEq)]
pub struct LinkSimulator {
    direct: Complex64,
    ris_weights: [Vec<Complex64>; 3],
}

impl LinkSimulator {
    pub fn from_links(links: &SceneLinks, pilot: &[Complex64]) -> Result<Self, ChannelError> {
        if pilot.len() != links.n_bs {
            return Err(ChannelError::DimensionMismatch {
                context: "pilot length",
                expected: links.n_bs,
                found: pilot.len(),
            });
        }
        let direct = links
            .direct_channel()
            .iter()
            .zip(pilot)
            .map(|(h, x)| h * x)
            .sum();
        let weights = |i: usize| -> Result<Vec<Complex64>, ChannelError> {
            let n = links.n_ris[i];
            let arrival = channel_bs_ris(&links.bs_ris[i], n, links.n_bs).mul_vec(pilot)?;
            let departure = channel_ris_ms(&links.ris_ms[i], n);
            Ok(departure.iter().zip(&arrival).map(|(d, a)| d * a).collect())
        };
        Ok(Self {
            direct,
            ris_weights: [weights(0)?, weights(1)?, weights(2)?],
        })
    }

    pub fn from_scene(scene: &Scene) -> Result<Self, SceneError> {
        let links = scene.links()?;
        Self::from_links(&links, &scene.pilot_vector())
            .map_err(|e| SceneError::Invalid(e.to_string()))
    }

    /// `H_BM x`.
    pub fn direct(&self) -> ComplexSample {
        self.direct
    }

    /// `H_Γ(ω) x` for RIS `index`.
    pub fn ris_response(
        &self,
        index: usize,
        profile: &PhaseProfile,
    ) -> Result<ComplexSample, ChannelError> {
        let w = &self.ris_weights[index];
        Ok(match profile {
            PhaseProfile::Uniform(_) => {
                let sum: Complex64 = w.iter().sum();
                sum * profile.phasors(1)?[0]
            }
            _ => w
                .iter()
                .zip(profile.phasors(w.len())?)
                .map(|(g, p)| g * p)
                .sum(),
        })
    }

    /// Noiseless `H(ω1, ω2, ω3) x`.
    pub fn noiseless(&self, profiles: &[PhaseProfile; 3]) -> Result<ComplexSample, ChannelError> {
        let mut y = self.direct;
        for (i, p) in profiles.iter().enumerate() {
            y += self.ris_response(i, p)?;
        }
        Ok(y)
    }

    pub fn noiseless_schedule(
        &self,
        schedule: &[SlotConfig],
    ) -> Result<Vec<ComplexSample>, ChannelError> {
        schedule
            .iter()
            .map(|c| self.noiseless(&c.profiles))
            .collect()
    }

    /// Runs `schedule`, drawing `repeats` noisy receptions per slot from
    /// `rng` in schedule order and logging their coherent average.
    pub fn measure<R: Rng + ?Sized>(
        &self,
        schedule: &[SlotConfig],
        sigma: f64,
        rng: &mut R,
    ) -> Result<MeasurementLog, ChannelError> {
        let clean = self.noiseless_schedule(schedule)?;
        Ok(noisy_log(schedule, &clean, sigma, rng))
    }
}

/// Adds receiver noise to precomputed noiseless responses.
pub fn noisy_log<R: Rng + ?Sized>(
    schedule: &[SlotConfig],
    clean: &[ComplexSample],
    sigma: f64,
    rng: &mut R,
) -> MeasurementLog {
    debug_assert_eq!(schedule.len(), clean.len());
    let mut log = MeasurementLog {
        entries: Vec::with_capacity(schedule.len()),
    };
    let mut buf = Vec::new();
    for (config, y) in schedule.iter().zip(clean) {
        let sample = if sigma == 0.0 {
            *y
        } else {
            buf.clear();
            buf.extend((0..config.repeats.max(1)).map(|_| y + complex_noise(sigma, rng)));
            coherent_average(&buf)
        };
        log.push(config.clone(), sample);
    }
    log
}
