//! Uniform linear array, Rayleigh communication link and Swerling-1 radar
//! returns.
//!
//! Angles are radians throughout; conversion from degrees happens at the
//! configuration boundary.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use rand::Rng;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{invalid, shape, Result};
use crate::numerics::{cnormal, db_to_linear, ComplexMatrix, ComplexVector};

/// `|kappa|` below this marks a deep-fade communication sample.
pub const DEEP_FADE_THRESHOLD: f64 = 1e-15;

/// Geometry of the transmit and radar receive array.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrayConfig {
    pub antennas: usize,
    /// Element spacing in wavelengths.
    pub spacing: f64,
}

impl Default for ArrayConfig {
    fn default() -> Self {
        Self {
            antennas: 16,
            spacing: 0.5,
        }
    }
}

impl ArrayConfig {
    pub fn new(antennas: usize, spacing: f64) -> Result<Self> {
        if antennas < 2 {
            return Err(invalid(format!("array needs at least 2 antennas, got {antennas}")));
        }
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(invalid(format!("antenna spacing must be positive, got {spacing}")));
        }
        Ok(Self { antennas, spacing })
    }
}

/// Steering vector, entry `i` is `exp(j 2 pi spacing i sin(theta))`.
pub fn steering(theta: f64, cfg: &ArrayConfig) -> ComplexVector {
    let mut v = vec![Complex64::new(0.0, 0.0); cfg.antennas];
    steering_into(theta, cfg, &mut v);
    v
}

pub fn steering_into(theta: f64, cfg: &ArrayConfig, out: &mut [Complex64]) {
    let phase = 2.0 * PI * cfg.spacing * theta.sin();
    for (i, z) in out.iter_mut().enumerate() {
        *z = Complex64::cis(phase * i as f64);
    }
}

/// `a(theta)^T v` without conjugation.
pub fn project(steer: &[Complex64], v: &[Complex64]) -> Complex64 {
    steer.iter().zip(v).map(|(a, b)| a * b).sum()
}

/// Closed interval of azimuth angles in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleRegion {
    pub min: f64,
    pub max: f64,
}

impl AngleRegion {
    pub fn new(min: f64, max: f64) -> Result<Self> {
        if !(min <= max) || min < -FRAC_PI_2 || max > FRAC_PI_2 {
            return Err(invalid(format!("angle region [{min}, {max}] must be ordered and inside +-pi/2")));
        }
        Ok(Self { min, max })
    }

    pub fn from_degrees(min: f64, max: f64) -> Result<Self> {
        Self::new(min.to_radians(), max.to_radians())
    }

    pub fn width(&self) -> f64 {
        self.max - self.min
    }

    pub fn contains(&self, theta: f64) -> bool {
        theta >= self.min && theta <= self.max
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        (self.min + u * self.width()).min(self.max)
    }
}

/// Fading, RCS and noise variances on a linear scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseConfig {
    pub comm_fading_var: f64,
    pub target_rcs_var: f64,
    pub noise_var: f64,
}

impl NoiseConfig {
    /// Unit noise variance with fading and RCS variances set from SNRs in dB.
    pub fn from_snr_db(comm_snr_db: f64, radar_snr_db: f64) -> Self {
        Self {
            comm_fading_var: db_to_linear(comm_snr_db),
            target_rcs_var: db_to_linear(radar_snr_db),
            noise_var: 1.0,
        }
    }

    pub fn comm_snr(&self) -> f64 {
        self.comm_fading_var / self.noise_var
    }

    pub fn radar_snr(&self) -> f64 {
        self.target_rcs_var / self.noise_var
    }
}

/// Ground truth of one transmission.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneTruth {
    /// Message index `0..M`, i.e. `m - 1` for messages numbered from one.
    pub message: usize,
    pub comm_angle: f64,
    pub comm_fade: Complex64,
    pub target_angles: Vec<f64>,
    pub target_gains: Vec<Complex64>,
}

impl SceneTruth {
    pub fn target_count(&self) -> usize {
        self.target_angles.len()
    }
}

/// How the number of targets per scene is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetCountRule {
    Fixed(usize),
    /// Uniform on `0..=max`.
    Uniform { max: usize },
    /// Training rule: minibatch `j` uses `(j mod max) + 1` targets, and each
    /// sample is independently replaced by an empty scene with probability
    /// `1 / (max + 1)`.
    Cycling { minibatch: usize, max: usize },
}

impl TargetCountRule {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        match *self {
            TargetCountRule::Fixed(t) => t,
            TargetCountRule::Uniform { max } => rng.random_range(0..=max),
            TargetCountRule::Cycling { minibatch, max } => {
                let empty: f64 = rng.random();
                if empty < 1.0 / (max as f64 + 1.0) {
                    0
                } else {
                    minibatch % max + 1
                }
            }
        }
    }
}

/// Static scene parameters shared by all draws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneSpec {
    pub messages: usize,
    pub max_targets: usize,
    pub comm_region: AngleRegion,
    pub sensing_region: AngleRegion,
}

pub fn draw_scene<R: Rng + ?Sized>(
    spec: &SceneSpec,
    rule: TargetCountRule,
    noise: &NoiseConfig,
    rng: &mut R,
) -> SceneTruth {
    let message = rng.random_range(0..spec.messages);
    let comm_angle = spec.comm_region.sample(rng);
    let comm_fade = cnormal(noise.comm_fading_var, rng);
    let count = rule.sample(rng).min(spec.max_targets);
    let target_angles: Vec<f64> = (0..count).map(|_| spec.sensing_region.sample(rng)).collect();
    let target_gains: Vec<Complex64> = (0..count).map(|_| cnormal(noise.target_rcs_var, rng)).collect();
    SceneTruth {
        message,
        comm_angle,
        comm_fade,
        target_angles,
        target_gains,
    }
}

/// Output of the communication link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CommSample {
    /// `z_c = beta a(phi)^T y + n`.
    pub received: Complex64,
    /// Perfect channel state `kappa = beta a(phi)^T nu`.
    pub csi: Complex64,
}

impl CommSample {
    /// Receiver input `z_c / kappa`.
    pub fn equalized(&self) -> Complex64 {
        self.received / self.csi
    }

    pub fn is_deep_fade(&self, threshold: f64) -> bool {
        self.csi.norm() < threshold
    }

    pub fn deep_fade(&self) -> bool {
        self.is_deep_fade(DEEP_FADE_THRESHOLD)
    }
}

/// Rayleigh link toward the communication user for `y = beam * symbol`.
pub fn comm_channel<R: Rng + ?Sized>(
    beam: &[Complex64],
    symbol: Complex64,
    scene: &SceneTruth,
    noise: &NoiseConfig,
    cfg: &ArrayConfig,
    rng: &mut R,
) -> Result<CommSample> {
    if beam.len() != cfg.antennas {
        return Err(shape(format!("{} beam weights", cfg.antennas), format!("{}", beam.len())));
    }
    let a = steering(scene.comm_angle, cfg);
    let csi = scene.comm_fade * project(&a, beam);
    let n = cnormal(noise.noise_var, rng);
    Ok(CommSample {
        received: csi * symbol + n,
        csi,
    })
}

/// Noise-free radar echo `sum_k alpha_k a(theta_k) a(theta_k)^T y`.
pub fn radar_echo(y: &[Complex64], angles: &[f64], gains: &[Complex64], cfg: &ArrayConfig) -> ComplexVector {
    let mut z = vec![Complex64::new(0.0, 0.0); cfg.antennas];
    let mut a = vec![Complex64::new(0.0, 0.0); cfg.antennas];
    for (&theta, &alpha) in angles.iter().zip(gains) {
        steering_into(theta, cfg, &mut a);
        let s = alpha * project(&a, y);
        for (zi, ai) in z.iter_mut().zip(&a) {
            *zi += ai * s;
        }
    }
    z
}

/// Monostatic radar return of the scene's targets plus receiver noise.
pub fn radar_channel<R: Rng + ?Sized>(
    y: &[Complex64],
    scene: &SceneTruth,
    noise: &NoiseConfig,
    cfg: &ArrayConfig,
    rng: &mut R,
) -> Result<ComplexVector> {
    if y.len() != cfg.antennas {
        return Err(shape(format!("{} transmit samples", cfg.antennas), format!("{}", y.len())));
    }
    let mut z = radar_echo(y, &scene.target_angles, &scene.target_gains, cfg);
    for zi in z.iter_mut() {
        *zi += cnormal(noise.noise_var, rng);
    }
    Ok(z)
}

/// Target reflectivity behaviour across the snapshots of one scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AmplitudeModel {
    /// `alpha_k` is held for the whole scan.
    PerScan,
    /// `alpha_k` is redrawn independently for every snapshot.
    #[default]
    PerSnapshot,
}

impl AmplitudeModel {
    pub fn tag(self) -> &'static str {
        match self {
            AmplitudeModel::PerScan => "per-scan",
            AmplitudeModel::PerSnapshot => "per-snapshot",
        }
    }
}

/// `u` radar snapshots of one scene as the columns of a `K x u` matrix.
///
/// Target angles are fixed for the scan, `transmit(t)` supplies the transmit
/// vector of snapshot `t`, and noise is independent per snapshot. The first
/// snapshot uses the scene's own amplitudes, so `u = 1` reproduces
/// [`radar_channel`] for the same generator state.
pub fn snapshot_stack<R: Rng + ?Sized>(
    scene: &SceneTruth,
    u: usize,
    amplitudes: AmplitudeModel,
    noise: &NoiseConfig,
    cfg: &ArrayConfig,
    mut transmit: impl FnMut(usize) -> ComplexVector,
    rng: &mut R,
) -> Result<ComplexMatrix> {
    if u == 0 {
        return Err(invalid("a scan needs at least one snapshot"));
    }
    let mut columns = Vec::with_capacity(u);
    let mut current = scene.clone();
    for t in 0..u {
        if t > 0 && amplitudes == AmplitudeModel::PerSnapshot {
            for g in current.target_gains.iter_mut() {
                *g = cnormal(noise.target_rcs_var, rng);
            }
        }
        let y = transmit(t);
        columns.push(radar_channel(&y, &current, noise, cfg, rng)?);
    }
    ComplexMatrix::from_columns(&columns)
}
