//! Narrowband complex-baseband channel synthesis for the BS → RIS → MS
//! cascade and the direct BS → MS link.
//!
//! Steering phases follow `e^{j(i-1)k cos(angle)}` with `k = 2πd/λ`; transmit
//! sides enter conjugated. Every link carries the prefactor `ρ e^{-j2πfτ}`.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

/// Received complex baseband amplitude.
pub type ComplexSample = Complex64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("array must have at least one element")]
    EmptyArray,
}

/// Physical parameters of one link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkParams {
    /// Amplitude attenuation.
    pub rho: f64,
    /// Propagation delay, seconds.
    pub tau: f64,
    /// Carrier frequency, Hz.
    pub carrier_freq: f64,
    /// Angle of arrival at the receive array. Unused when the receiver is the
    /// single-antenna MS.
    pub aoa_phi: f64,
    /// Angle of departure at the transmit array.
    pub aod_theta: f64,
    /// `2πd/λ` of the transmit array.
    pub k_tx: f64,
    /// `2πd/λ` of the receive array.
    pub k_rx: f64,
}

impl LinkParams {
    /// `ρ e^{-j2πfτ}`.
    pub fn prefactor(&self) -> Complex64 {
        Complex64::from_polar(self.rho, -TAU * self.carrier_freq * self.tau)
    }
}

/// Phase state of one RIS for one transmission.
#[derive(Debug, Clone, PartialEq)]
pub enum PhaseProfile {
    /// Every element at the same phase.
    Uniform(f64),
    /// Element `t` (0-based) at phase `t·step`.
    LinearRamp(f64),
    Explicit(Vec<f64>),
}

impl PhaseProfile {
    pub fn zero() -> Self {
        PhaseProfile::Uniform(0.0)
    }

    pub fn flipped() -> Self {
        PhaseProfile::Uniform(PI)
    }

    /// Per-element phases for an `n`-element surface.
    pub fn phases(&self, n: usize) -> Result<Vec<f64>, ChannelError> {
        match self {
            PhaseProfile::Uniform(v) => Ok(vec![*v; n]),
            PhaseProfile::LinearRamp(step) => Ok((0..n).map(|t| t as f64 * step).collect()),
            PhaseProfile::Explicit(v) if v.len() == n => Ok(v.clone()),
            PhaseProfile::Explicit(v) => Err(ChannelError::DimensionMismatch {
                context: "phase profile",
                expected: n,
                found: v.len(),
            }),
        }
    }

    /// Unit phasors `e^{jω_t}` for an `n`-element surface.
    pub fn phasors(&self, n: usize) -> Result<Vec<Complex64>, ChannelError> {
        match self {
            // Exact ±1 for the calibration flips instead of cis(π) ≈ -1 + 1.2e-16j.
            PhaseProfile::Uniform(v) if *v == 0.0 => Ok(vec![Complex64::new(1.0, 0.0); n]),
            PhaseProfile::Uniform(v) if *v == PI => Ok(vec![Complex64::new(-1.0, 0.0); n]),
            _ => Ok(self.phases(n)?.into_iter().map(Complex64::cis).collect()),
        }
    }
}

/// Dense row-major complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[Complex64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// `self · v`.
    pub fn mul_vec(&self, v: &[Complex64]) -> Result<Vec<Complex64>, ChannelError> {
        if v.len() != self.cols {
            return Err(ChannelError::DimensionMismatch {
                context: "matrix-vector product",
                expected: self.cols,
                found: v.len(),
            });
        }
        Ok((0..self.rows).map(|r| dot(self.row(r), v)).collect())
    }
}

/// Diagonal RIS phase-control matrix, stored by its diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagMatrix(pub Vec<Complex64>);

impl DiagMatrix {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn to_dense(&self) -> CMatrix {
        let n = self.0.len();
        CMatrix::from_fn(n, n, |r, c| {
            if r == c {
                self.0[r]
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// ULA steering vector, entry `i` (0-based) is `e^{j i k cos(angle)}`.
pub fn steering(n_elems: usize, k: f64, angle: f64) -> Vec<Complex64> {
    let kc = k * angle.cos();
    (0..n_elems)
        .map(|i| Complex64::cis(i as f64 * kc))
        .collect()
}

/// BS → RIS channel, `N_R × N_B`.
pub fn channel_bs_ris(params: &LinkParams, n_ris: usize, n_bs: usize) -> CMatrix {
    let pre = params.prefactor();
    let rx = params.k_rx * params.aoa_phi.cos();
    let tx = params.k_tx * params.aod_theta.cos();
    CMatrix::from_fn(n_ris, n_bs, |m, n| {
        pre * Complex64::cis(m as f64 * rx - n as f64 * tx)
    })
}

/// Transmit-array row `ρ e^{-j2πfτ} e^{-j t k cos θ}` toward the single-antenna MS.
fn row_to_ms(params: &LinkParams, n: usize) -> Vec<Complex64> {
    let pre = params.prefactor();
    let tx = params.k_tx * params.aod_theta.cos();
    (0..n)
        .map(|t| pre * Complex64::cis(-(t as f64) * tx))
        .collect()
}

/// RIS → MS channel, `1 × N_R`.
pub fn channel_ris_ms(params: &LinkParams, n_ris: usize) -> Vec<Complex64> {
    row_to_ms(params, n_ris)
}

/// Direct BS → MS channel, `1 × N_B`.
pub fn channel_bs_ms(params: &LinkParams, n_bs: usize) -> Vec<Complex64> {
    row_to_ms(params, n_bs)
}

pub fn omega_matrix(profile: &PhaseProfile, n_ris: usize) -> Result<DiagMatrix, ChannelError> {
    profile.phasors(n_ris).map(DiagMatrix)
}

/// `H_RM · Ω · H_BR`, a `1 × N_B` row.
pub fn cascade(
    h_rm: &[Complex64],
    omega: &DiagMatrix,
    h_br: &CMatrix,
) -> Result<Vec<Complex64>, ChannelError> {
    if omega.len() != h_rm.len() {
        return Err(ChannelError::DimensionMismatch {
            context: "cascade phase matrix",
            expected: h_rm.len(),
            found: omega.len(),
        });
    }
    if h_br.rows() != h_rm.len() {
        return Err(ChannelError::DimensionMismatch {
            context: "cascade BS-RIS rows",
            expected: h_rm.len(),
            found: h_br.rows(),
        });
    }
    let weights: Vec<Complex64> = h_rm.iter().zip(&omega.0).map(|(h, w)| h * w).collect();
    Ok((0..h_br.cols())
        .map(|c| {
            weights
                .iter()
                .enumerate()
                .map(|(r, w)| w * h_br.get(r, c))
                .sum()
        })
        .collect())
}

/// Reduces a phase to `(-π, π]`.
pub fn wrap_phase(phase: f64) -> f64 {
    let r = phase.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// `Σ_{t=0}^{n-1} e^{j t u}` via the Dirichlet form
/// `e^{j(n-1)u/2} sin(nu/2) / sin(u/2)`; the removable singularity at
/// `u ≡ 0 (mod 2π)` evaluates to exactly `n`.
fn phasor_series(n: usize, u: f64) -> Complex64 {
    let n_f = n as f64;
    let u = wrap_phase(u);
    if u == 0.0 {
        return Complex64::new(n_f, 0.0);
    }
    let ratio = (n_f * u / 2.0).sin() / (u / 2.0).sin();
    Complex64::from_polar(ratio, (n_f - 1.0) * u / 2.0)
}

/// RIS array gain `Λ = Σ_t e^{j t [k(cos φ − cos θ) + ϱ]}` for a linear
/// phase ramp of step `rho_step`.
pub fn lambda_closed_form(
    rho_step: f64,
    k: f64,
    phi_br: f64,
    theta_rm: f64,
    n_ris: usize,
) -> Complex64 {
    phasor_series(n_ris, k * (phi_br.cos() - theta_rm.cos()) + rho_step)
}

/// Ramp step that aligns the RIS gain, `k(cos θ_rm − cos φ_br)` in `[0, 2π)`.
pub fn optimal_ramp(k: f64, phi_br: f64, theta_rm: f64) -> f64 {
    (k * (theta_rm.cos() - phi_br.cos())).rem_euclid(TAU)
}

/// Departure sum `Ξ = Σ_t e^{-j t k cos θ}` over the BS array.
pub fn xi(n_bs: usize, k: f64, theta_br: f64) -> Complex64 {
    phasor_series(n_bs, -k * theta_br.cos())
}

/// Resolved links of a scene, indexed by RIS (0-based).
#[derive(Debug, Clone, PartialEq)]
pub struct SceneLinks {
    pub bs_ris: [LinkParams; 3],
    pub ris_ms: [LinkParams; 3],
    pub bs_ms: LinkParams,
    pub n_bs: usize,
    pub n_ris: [usize; 3],
}

impl SceneLinks {
    /// Cascade row of RIS `index` under `profile`.
    pub fn ris_channel(
        &self,
        index: usize,
        profile: &PhaseProfile,
    ) -> Result<Vec<Complex64>, ChannelError> {
        let n = self.n_ris[index];
        let h_br = channel_bs_ris(&self.bs_ris[index], n, self.n_bs);
        let h_rm = channel_ris_ms(&self.ris_ms[index], n);
        cascade(&h_rm, &omega_matrix(profile, n)?, &h_br)
    }

    pub fn direct_channel(&self) -> Vec<Complex64> {
        channel_bs_ms(&self.bs_ms, self.n_bs)
    }
}

/// `H = H_BM + H_1 + H_2 + H_3`; RIS-to-RIS cross links are not modeled.
pub fn total_channel(
    links: &SceneLinks,
    profiles: &[PhaseProfile; 3],
) -> Result<Vec<Complex64>, ChannelError> {
    let mut h = links.direct_channel();
    for (i, profile) in profiles.iter().enumerate() {
        for (acc, v) in h.iter_mut().zip(links.ris_channel(i, profile)?) {
            *acc += v;
        }
    }
    Ok(h)
}

/// Circularly-symmetric complex Gaussian draw with total variance `sigma²`.
pub fn complex_noise<R: Rng + ?Sized>(sigma: f64, rng: &mut R) -> Complex64 {
    let s = sigma / std::f64::consts::SQRT_2;
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// `ỹ = H·x + n`. With `sigma == 0` no randomness is consumed.
pub fn receive<R: Rng + ?Sized>(
    h: &[Complex64],
    pilot: &[Complex64],
    sigma: f64,
    rng: &mut R,
) -> Result<ComplexSample, ChannelError> {
    if h.len() != pilot.len() {
        return Err(ChannelError::DimensionMismatch {
            context: "pilot length",
            expected: h.len(),
            found: pilot.len(),
        });
    }
    let clean = dot(h, pilot);
    if sigma == 0.0 {
        return Ok(clean);
    }
    Ok(clean + complex_noise(sigma, rng))
}
