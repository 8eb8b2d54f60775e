//! Scenario description: geometry, array sizes, link angles and pilot.

use std::f64::consts::PI;

use num_complex::Complex64;
use thiserror::Error;

use crate::channel::{LinkParams, SceneLinks};
use crate::geometry::{
    distance, path_loss, propagation_delay, GeometryError, Position3, ScenarioGeometry,
    SPEED_OF_LIGHT,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SceneError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("invalid scene: {0}")]
    Invalid(String),
}

/// Link angles given directly, in radians within `[0, π]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExplicitAngles {
    /// AoA at each RIS from the BS.
    pub phi_br: [f64; 3],
    /// AoD at the BS toward each RIS.
    pub theta_br: [f64; 3],
    /// AoD at each RIS toward the MS.
    pub theta_rm: [f64; 3],
    /// AoD at the BS toward the MS.
    pub theta_bm: f64,
}

/// Array orientations used to derive angles from node positions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrayAxes {
    pub bs: [f64; 3],
    pub ris: [[f64; 3]; 3],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AngleMode {
    Explicit(ExplicitAngles),
    /// `cos(angle)` is the projection of the unit direction onto the array
    /// axis: toward the far node for departures, toward the source for
    /// arrivals.
    Derived(ArrayAxes),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub geometry: ScenarioGeometry,
    pub n_bs: usize,
    pub n_ris: [usize; 3],
    pub angles: AngleMode,
    /// Pilot symbol repeated on every BS antenna.
    pub pilot: Complex64,
    /// Removes the direct BS → MS path.
    pub los_blocked: bool,
}

fn wavelength_at(f: f64) -> f64 {
    SPEED_OF_LIGHT / f
}

impl Scene {
    /// The reference layout: BS at (0, 0, 10), RIS panels at (30, 20, 20),
    /// (20, 40, 20), (40, 40, 20), MS at (60, 20, 0), 2 GHz, λ/4 spacing,
    /// 20 BS antennas, 100 elements per RIS.
    pub fn reference() -> Self {
        let f = 2e9;
        let d = wavelength_at(f) / 4.0;
        Scene {
            geometry: ScenarioGeometry {
                bs: Position3::new(0.0, 0.0, 10.0),
                ris: [
                    Position3::new(30.0, 20.0, 20.0),
                    Position3::new(20.0, 40.0, 20.0),
                    Position3::new(40.0, 40.0, 20.0),
                ],
                ms: Position3::new(60.0, 20.0, 0.0),
                carrier_freq: f,
                bs_spacing: d,
                ris_spacing: [d; 3],
                mu: 2.0,
            },
            n_bs: 20,
            n_ris: [100; 3],
            angles: AngleMode::Explicit(ExplicitAngles {
                phi_br: [PI / 6.0, PI / 3.0, PI / 4.0],
                theta_br: [PI / 6.0, PI / 3.0, PI / 4.0],
                theta_rm: [PI / 6.0, PI / 3.0, PI / 4.0],
                theta_bm: PI / 5.0,
            }),
            pilot: Complex64::new(1.0, 0.0),
            los_blocked: false,
        }
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        self.geometry.validate()?;
        if self.n_bs == 0 || self.n_ris.contains(&0) {
            return Err(SceneError::Invalid("array sizes must be at least 1".into()));
        }
        if !(self.pilot.re.is_finite() && self.pilot.im.is_finite()) || self.pilot.norm() == 0.0 {
            return Err(SceneError::Invalid(
                "pilot must be finite and non-zero".into(),
            ));
        }
        match &self.angles {
            AngleMode::Explicit(a) => {
                let all = a
                    .phi_br
                    .iter()
                    .chain(&a.theta_br)
                    .chain(&a.theta_rm)
                    .chain(std::iter::once(&a.theta_bm));
                for v in all {
                    if !(0.0..=PI).contains(v) {
                        return Err(SceneError::Invalid(format!("angle {v} outside [0, π]")));
                    }
                }
            }
            AngleMode::Derived(axes) => {
                for axis in std::iter::once(&axes.bs).chain(&axes.ris) {
                    let n = norm(axis);
                    if !(n > 0.0 && n.is_finite()) {
                        return Err(SceneError::Invalid("array axis must be non-zero".into()));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn with_ms(&self, ms: Position3) -> Scene {
        let mut s = self.clone();
        s.geometry.ms = ms;
        s
    }

    pub fn with_n_ris(&self, n: usize) -> Scene {
        let mut s = self.clone();
        s.n_ris = [n; 3];
        s
    }

    /// Same scene with a single-antenna BS.
    pub fn single_antenna(&self) -> Scene {
        let mut s = self.clone();
        s.n_bs = 1;
        s
    }

    pub fn pilot_vector(&self) -> Vec<Complex64> {
        vec![self.pilot; self.n_bs]
    }

    /// BS-side departure angles toward each RIS. Independent of the MS.
    pub fn bs_departure_angles(&self) -> [f64; 3] {
        match &self.angles {
            AngleMode::Explicit(a) => a.theta_br,
            AngleMode::Derived(axes) => {
                let g = &self.geometry;
                std::array::from_fn(|i| axis_angle(&axes.bs, &g.bs, &g.ris[i]))
            }
        }
    }

    /// All link angles, resolving derived mode against the current geometry.
    pub fn resolved_angles(&self) -> ExplicitAngles {
        match &self.angles {
            AngleMode::Explicit(a) => *a,
            AngleMode::Derived(axes) => {
                let g = &self.geometry;
                ExplicitAngles {
                    phi_br: std::array::from_fn(|i| axis_angle(&axes.ris[i], &g.ris[i], &g.bs)),
                    theta_br: self.bs_departure_angles(),
                    theta_rm: std::array::from_fn(|i| axis_angle(&axes.ris[i], &g.ris[i], &g.ms)),
                    theta_bm: axis_angle(&axes.bs, &g.bs, &g.ms),
                }
            }
        }
    }

    pub fn links(&self) -> Result<SceneLinks, SceneError> {
        self.validate()?;
        let g = &self.geometry;
        let a = self.resolved_angles();
        let f = g.carrier_freq;
        let k_bs = g.k_bs();
        let mk = |from: &Position3, to: &Position3, phi, theta, k_tx, k_rx| {
            let d = distance(from, to);
            Ok::<_, GeometryError>(LinkParams {
                rho: path_loss(d, g.mu)?,
                tau: propagation_delay(d),
                carrier_freq: f,
                aoa_phi: phi,
                aod_theta: theta,
                k_tx,
                k_rx,
            })
        };
        let mut bs_ris = Vec::with_capacity(3);
        let mut ris_ms = Vec::with_capacity(3);
        for i in 0..3 {
            let k_r = g.k_ris(i);
            bs_ris.push(mk(&g.bs, &g.ris[i], a.phi_br[i], a.theta_br[i], k_bs, k_r)?);
            ris_ms.push(mk(&g.ris[i], &g.ms, 0.0, a.theta_rm[i], k_r, 0.0)?);
        }
        let mut bs_ms = mk(&g.bs, &g.ms, 0.0, a.theta_bm, k_bs, 0.0)?;
        if self.los_blocked {
            bs_ms.rho = 0.0;
        }
        Ok(SceneLinks {
            bs_ris: [bs_ris[0], bs_ris[1], bs_ris[2]],
            ris_ms: [ris_ms[0], ris_ms[1], ris_ms[2]],
            bs_ms,
            n_bs: self.n_bs,
            n_ris: self.n_ris,
        })
    }
}

fn norm(v: &[f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// Angle between `axis` and the direction `from → to`.
fn axis_angle(axis: &[f64; 3], from: &Position3, to: &Position3) -> f64 {
    let dir = to.sub(from);
    let c = (axis[0] * dir[0] + axis[1] * dir[1] + axis[2] * dir[2]) / (norm(axis) * norm(&dir));
    c.clamp(-1.0, 1.0).acos()
}
