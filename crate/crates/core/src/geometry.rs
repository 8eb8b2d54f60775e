//! Node positions, free-space link primitives and planar trilateration.
//!
//! Positions are in meters in a right-handed Cartesian frame. The mobile
//! station is assumed to sit on a known horizontal plane (`ms_height`), so
//! trilateration only solves for `(x, y)`.

use std::fmt;

use thiserror::Error;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

const GN_MAX_ITERATIONS: usize = 50;
const GN_STEP_TOLERANCE: f64 = 1e-9;
const GN_MAX_HALVINGS: usize = 40;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("degenerate geometry: distance {0} must be positive")]
    DegenerateDistance(f64),
    #[error("singular anchor configuration: projected anchors are collinear")]
    SingularConfiguration,
    #[error("non-finite coordinate in {0}")]
    NonFinite(&'static str),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Position3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Position3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn planar(&self) -> Position2 {
        Position2::new(self.x, self.y)
    }

    pub(crate) fn sub(&self, other: &Position3) -> [f64; 3] {
        [self.x - other.x, self.y - other.y, self.z - other.z]
    }
}

impl fmt::Display for Position3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Position2 {
    pub x: f64,
    pub y: f64,
}

impl Position2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Position2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Lifts the point onto the horizontal plane at height `z`.
    pub fn at_height(&self, z: f64) -> Position3 {
        Position3::new(self.x, self.y, z)
    }
}

/// Euclidean distance between two nodes.
pub fn distance(a: &Position3, b: &Position3) -> f64 {
    let [dx, dy, dz] = a.sub(b);
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Free-space amplitude attenuation `dist^(-mu/2)`.
pub fn path_loss(dist: f64, mu: f64) -> Result<f64, GeometryError> {
    if dist.is_nan() || dist <= 0.0 || !dist.is_finite() {
        return Err(GeometryError::DegenerateDistance(dist));
    }
    Ok(dist.powf(-mu / 2.0))
}

/// One-way propagation delay in seconds.
pub fn propagation_delay(dist: f64) -> f64 {
    dist / SPEED_OF_LIGHT
}

/// Ground-truth geometry of a scenario: one multi-antenna BS, three RIS
/// panels and a single-antenna MS.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioGeometry {
    pub bs: Position3,
    pub ris: [Position3; 3],
    pub ms: Position3,
    /// Carrier frequency in Hz.
    pub carrier_freq: f64,
    /// Element separation of the BS array, meters.
    pub bs_spacing: f64,
    /// Element separation of each RIS, meters.
    pub ris_spacing: [f64; 3],
    /// Path-loss exponent.
    pub mu: f64,
}

impl ScenarioGeometry {
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_freq
    }

    /// `k = 2πd/λ` for the BS array.
    pub fn k_bs(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.bs_spacing / self.wavelength()
    }

    /// `k = 2πd/λ` for RIS `index` (0-based).
    pub fn k_ris(&self, index: usize) -> f64 {
        2.0 * std::f64::consts::PI * self.ris_spacing[index] / self.wavelength()
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let nodes = [
            ("bs", self.bs),
            ("ris[0]", self.ris[0]),
            ("ris[1]", self.ris[1]),
            ("ris[2]", self.ris[2]),
            ("ms", self.ms),
        ];
        for (name, p) in &nodes {
            if !p.is_finite() {
                return Err(GeometryError::NonFinite(name));
            }
        }
        if !(self.carrier_freq > 0.0 && self.carrier_freq.is_finite()) {
            return Err(GeometryError::InvalidScenario(
                "carrier frequency must be positive".into(),
            ));
        }
        if std::iter::once(&self.bs_spacing)
            .chain(&self.ris_spacing)
            .any(|s| s.is_nan() || *s <= 0.0)
        {
            return Err(GeometryError::InvalidScenario(
                "element spacings must be positive".into(),
            ));
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(GeometryError::InvalidScenario(
                "path-loss exponent must be positive".into(),
            ));
        }
        for i in 0..nodes.len() {
            for j in (i + 1)..nodes.len() {
                if distance(&nodes[i].1, &nodes[j].1) <= 0.0 {
                    return Err(GeometryError::InvalidScenario(format!(
                        "{} and {} coincide",
                        nodes[i].0, nodes[j].0
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Outcome of a planar trilateration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trilateration {
    pub position: Position2,
    /// Norm of the planar range residuals at `position`, meters.
    pub residual: f64,
    /// Residual norm of the linear initialization, before refinement.
    pub initial_residual: f64,
    /// Set for every anchor whose 3-D range was shorter than its height
    /// offset; the horizontal range was clamped to zero.
    pub clamped: [bool; 3],
}

impl Trilateration {
    pub fn any_clamped(&self) -> bool {
        self.clamped.iter().any(|c| *c)
    }
}

fn residual_norm(p: Position2, anchors: &[Position2; 3], ranges: &[f64; 3]) -> f64 {
    anchors
        .iter()
        .zip(ranges)
        .map(|(a, r)| {
            let e = p.distance(a) - r;
            e * e
        })
        .sum::<f64>()
        .sqrt()
}

/// Recovers the MS `(x, y)` from three anchor ranges, given the MS height.
///
/// Ranges are first projected onto the MS plane. A linear solve of the
/// pairwise differenced circle equations seeds a damped Gauss-Newton
/// refinement on the planar range residuals.
pub fn trilaterate(
    distances: &[f64; 3],
    anchors: &[Position3; 3],
    ms_height: f64,
) -> Result<Trilateration, GeometryError> {
    if anchors.iter().any(|a| !a.is_finite()) {
        return Err(GeometryError::NonFinite("anchors"));
    }
    if distances.iter().any(|d| !d.is_finite()) || !ms_height.is_finite() {
        return Err(GeometryError::NonFinite("distances"));
    }

    let mut clamped = [false; 3];
    let mut ranges = [0.0; 3];
    for i in 0..3 {
        let dz = anchors[i].z - ms_height;
        let d = distances[i].max(0.0);
        let h2 = d * d - dz * dz;
        if h2 < 0.0 {
            clamped[i] = true;
        } else {
            ranges[i] = h2.sqrt();
        }
    }
    let planar = [
        anchors[0].planar(),
        anchors[1].planar(),
        anchors[2].planar(),
    ];

    // 2(a_i - a_0)·p = |a_i|² - |a_0|² - r_i² + r_0²
    let a = [
        [
            2.0 * (planar[1].x - planar[0].x),
            2.0 * (planar[1].y - planar[0].y),
        ],
        [
            2.0 * (planar[2].x - planar[0].x),
            2.0 * (planar[2].y - planar[0].y),
        ],
    ];
    let norm0 = planar[0].x.powi(2) + planar[0].y.powi(2);
    let b = [
        planar[1].x.powi(2) + planar[1].y.powi(2) - norm0 - ranges[1].powi(2) + ranges[0].powi(2),
        planar[2].x.powi(2) + planar[2].y.powi(2) - norm0 - ranges[2].powi(2) + ranges[0].powi(2),
    ];
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    let scale = a[0][0].hypot(a[0][1]) * a[1][0].hypot(a[1][1]);
    if scale == 0.0 || det.abs() <= 1e-12 * scale {
        return Err(GeometryError::SingularConfiguration);
    }
    let mut p = Position2::new(
        (b[0] * a[1][1] - a[0][1] * b[1]) / det,
        (a[0][0] * b[1] - b[0] * a[1][0]) / det,
    );
    let initial_residual = residual_norm(p, &planar, &ranges);
    let mut residual = initial_residual;

    for _ in 0..GN_MAX_ITERATIONS {
        if residual == 0.0 {
            break;
        }
        // Normal equations JᵀJ δ = -Jᵀr, J rows are unit vectors anchor → p.
        let mut jtj = [[0.0; 2]; 2];
        let mut jtr = [0.0; 2];
        for (anchor, r) in planar.iter().zip(&ranges) {
            let dx = p.x - anchor.x;
            let dy = p.y - anchor.y;
            let dist = dx.hypot(dy);
            if dist == 0.0 {
                continue;
            }
            let (ux, uy) = (dx / dist, dy / dist);
            let e = dist - r;
            jtj[0][0] += ux * ux;
            jtj[0][1] += ux * uy;
            jtj[1][1] += uy * uy;
            jtr[0] += ux * e;
            jtr[1] += uy * e;
        }
        jtj[1][0] = jtj[0][1];
        let det = jtj[0][0] * jtj[1][1] - jtj[0][1] * jtj[1][0];
        if det.abs() <= f64::EPSILON {
            break;
        }
        let step = [
            -(jtr[0] * jtj[1][1] - jtj[0][1] * jtr[1]) / det,
            -(jtj[0][0] * jtr[1] - jtr[0] * jtj[1][0]) / det,
        ];

        let mut damping = 1.0;
        let mut accepted = None;
        for _ in 0..GN_MAX_HALVINGS {
            let candidate = Position2::new(p.x + damping * step[0], p.y + damping * step[1]);
            let r = residual_norm(candidate, &planar, &ranges);
            if r < residual {
                accepted = Some((candidate, r));
                break;
            }
            damping *= 0.5;
        }
        let Some((next, r)) = accepted else { break };
        let moved = next.distance(&p);
        p = next;
        residual = r;
        if moved < GN_STEP_TOLERANCE {
            break;
        }
    }

    Ok(Trilateration {
        position: p,
        residual,
        initial_residual,
        clamped,
    })
}
