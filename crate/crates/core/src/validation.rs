//! Monte-Carlo evaluation of a trained model over multi-snapshot scans.
//!
//! Scans are simulated in fixed-size chunks, each with its own random
//! stream, so results do not depend on how chunks are scheduled.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use rand::Rng;

#[allow(unused_imports)]
use num_traits::Float;

use crate::channel::{
    comm_channel, draw_scene, project, snapshot_stack, steering_into, AmplitudeModel, AngleRegion, ArrayConfig,
    NoiseConfig, SceneSpec, SceneTruth, TargetCountRule,
};
use crate::detection::{count_targets, onehot_decision, DetectionCounts, DetectionEncoding};
use crate::error::{invalid, Result};
use crate::esprit::esprit_scan;
use crate::model::{posteriors_to_llrs, BeamRegions, BmiAccumulator, JcasModel};
use crate::numerics::{cnormal, linear_to_db, ComplexMatrix, ComplexVector, Matrix, SimRng, Stream};
use crate::set_methods::{best_permutation, match_subset, SetMethod};

/// Settings of a validation run.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationConfig {
    pub u_list: Vec<usize>,
    /// Scans simulated per upsampling factor.
    pub scans: usize,
    pub chunk_size: usize,
    pub seed: u64,
    pub amplitudes: AmplitudeModel,
    pub noise: NoiseConfig,
    pub regions: BeamRegions,
    pub with_esprit: bool,
    /// Grid points for the beam gain averages.
    pub beam_grid: usize,
}

impl ValidationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.u_list.is_empty() || self.u_list[0] == 0 || self.u_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("u list must be non-empty, positive and strictly increasing"));
        }
        if self.scans == 0 || self.chunk_size == 0 || self.beam_grid == 0 {
            return Err(invalid("scan count, chunk size and beam grid must be positive"));
        }
        Ok(())
    }

    /// Scan counts of the chunks, in order.
    pub fn chunk_sizes(&self) -> Vec<usize> {
        let full = self.scans / self.chunk_size;
        let mut v = vec![self.chunk_size; full];
        if self.scans % self.chunk_size != 0 {
            v.push(self.scans % self.chunk_size);
        }
        v
    }
}

/// Metrics of one upsampling factor.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub u: usize,
    pub scans: usize,
    pub bmi: Option<f64>,
    pub pd: Option<f64>,
    pub pf: Option<f64>,
    /// RMSE over targets both present and detected, matched by permutation.
    pub rmse_nn: Option<f64>,
    /// RMSE of the first `T` angle slots over all present targets.
    pub rmse_nn_all: Option<f64>,
    pub rmse_esprit: Option<f64>,
    pub nn_pairs: usize,
    pub esprit_pairs: usize,
    pub esprit_clamped: usize,
    pub gain_comm_db: f64,
    pub gain_radar_db: f64,
}

/// Mergeable sums behind a [`MetricsRecord`].
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsAccumulator {
    pub scans: usize,
    pub bmi: BmiAccumulator,
    pub detection: DetectionCounts,
    pub nn_sq: f64,
    pub nn_pairs: usize,
    pub nn_all_sq: f64,
    pub nn_all_targets: usize,
    pub esprit_sq: f64,
    pub esprit_pairs: usize,
    pub esprit_clamped: usize,
}

impl MetricsAccumulator {
    pub fn new(bits: usize) -> Self {
        Self {
            scans: 0,
            bmi: BmiAccumulator::new(bits),
            detection: DetectionCounts::default(),
            nn_sq: 0.0,
            nn_pairs: 0,
            nn_all_sq: 0.0,
            nn_all_targets: 0,
            esprit_sq: 0.0,
            esprit_pairs: 0,
            esprit_clamped: 0,
        }
    }

    pub fn merge(&mut self, o: &Self) {
        self.scans += o.scans;
        self.bmi.merge(&o.bmi);
        self.detection.merge(&o.detection);
        self.nn_sq += o.nn_sq;
        self.nn_pairs += o.nn_pairs;
        self.nn_all_sq += o.nn_all_sq;
        self.nn_all_targets += o.nn_all_targets;
        self.esprit_sq += o.esprit_sq;
        self.esprit_pairs += o.esprit_pairs;
        self.esprit_clamped += o.esprit_clamped;
    }

    pub fn finish(&self, u: usize, gain_comm_db: f64, gain_radar_db: f64) -> MetricsRecord {
        let rmse = |sq: f64, n: usize| (n > 0).then(|| (sq / n as f64).sqrt());
        MetricsRecord {
            u,
            scans: self.scans,
            bmi: self.bmi.value(),
            pd: self.detection.pd(),
            pf: self.detection.pf(),
            rmse_nn: rmse(self.nn_sq, self.nn_pairs),
            rmse_nn_all: rmse(self.nn_all_sq, self.nn_all_targets),
            rmse_esprit: rmse(self.esprit_sq, self.esprit_pairs),
            nn_pairs: self.nn_pairs,
            esprit_pairs: self.esprit_pairs,
            esprit_clamped: self.esprit_clamped,
            gain_comm_db,
            gain_radar_db,
        }
    }
}

/// Mean of `|a(phi)^T nu|^2` over `n_grid` uniformly spaced angles, in dB.
pub fn beam_gain(nu: &[Complex64], region: &AngleRegion, n_grid: usize, array: &ArrayConfig) -> f64 {
    let mut a = vec![Complex64::new(0.0, 0.0); nu.len()];
    let n = n_grid.max(1);
    let mut sum = 0.0;
    for i in 0..n {
        let phi = if n == 1 {
            region.min
        } else {
            region.min + region.width() * i as f64 / (n - 1) as f64
        };
        steering_into(phi, array, &mut a);
        sum += project(&a, nu).norm_sqr();
    }
    linear_to_db(sum / n as f64)
}

fn scene_spec(model: &JcasModel, regions: &BeamRegions) -> SceneSpec {
    SceneSpec {
        messages: model.shape.messages,
        max_targets: model.shape.max_targets,
        comm_region: regions.comm,
        sensing_region: regions.sensing,
    }
}

struct ScanDraw {
    scene: SceneTruth,
    messages: Vec<usize>,
    radar: ComplexMatrix,
}

/// Simulates `scans` scans of `u` snapshots with the stream of
/// `(round, chunk)` and accumulates their metrics.
pub fn validate_chunk(
    model: &JcasModel,
    cfg: &ValidationConfig,
    u: usize,
    round: u32,
    chunk: u32,
    scans: usize,
) -> Result<MetricsAccumulator> {
    let mut rng = SimRng::new(cfg.seed, Stream::Validation { round, chunk });
    let spec = scene_spec(model, &cfg.regions);
    let t_max = model.shape.max_targets;
    let k = model.shape.antennas;
    let nu = model.beamform(&cfg.regions)?;
    let constellation = model.constellation()?;

    let mut draws = Vec::with_capacity(scans);
    let mut comm_inputs = Vec::with_capacity(scans * u);
    let mut snapshots: Vec<ComplexVector> = Vec::with_capacity(scans * u);
    for _ in 0..scans {
        let scene = draw_scene(&spec, TargetCountRule::Uniform { max: t_max }, &cfg.noise, &mut rng);
        let mut messages = vec![scene.message];
        for _ in 1..u {
            messages.push(rng.random_range(0..model.shape.messages));
        }
        let mut link = scene.clone();
        for (t, &m) in messages.iter().enumerate() {
            if t > 0 {
                link.comm_fade = cnormal(cfg.noise.comm_fading_var, &mut rng);
            }
            let s = comm_channel(&nu, constellation[m], &link, &cfg.noise, &model.array, &mut rng)?;
            comm_inputs.push(s.equalized());
        }
        let tx: Vec<ComplexVector> = messages
            .iter()
            .map(|&m| nu.iter().map(|v| v * constellation[m]).collect())
            .collect();
        let radar = snapshot_stack(&scene, u, cfg.amplitudes, &cfg.noise, &model.array, |t| tx[t].clone(), &mut rng)?;
        for t in 0..u {
            snapshots.push(radar.column(t));
        }
        draws.push(ScanDraw { scene, messages, radar });
    }

    let mut acc = MetricsAccumulator::new(model.labeling.bits());
    acc.scans = scans;
    let post = model.decode(&comm_inputs)?;
    for (s, d) in draws.iter().enumerate() {
        for (t, &m) in d.messages.iter().enumerate() {
            let llr = posteriors_to_llrs(post.row(s * u + t), &model.labeling)?;
            acc.bmi.add(&llr, &model.labeling.word(m));
        }
    }

    let features = model.radar_features(&snapshots)?;
    let probs = model.detection_probs(&model.detect(&features)?)?;
    let angles = model.estimate_angles(&features)?;
    let pw = probs.cols();
    for (s, d) in draws.iter().enumerate() {
        let rows: Vec<usize> = (s * u..(s + 1) * u).collect();
        let p_scan = probs.select_rows(&rows);
        let a_scan = angles.select_rows(&rows);
        let mut p_bar = vec![0.0; pw];
        for t in 0..u {
            for (a, &p) in p_bar.iter_mut().zip(p_scan.row(t)) {
                *a += p / u as f64;
            }
        }
        let declared = match model.shape.encoding {
            DetectionEncoding::Counting => count_targets(&p_bar),
            DetectionEncoding::OneHot => onehot_decision(&p_bar),
        };
        let truth = &d.scene.target_angles;
        acc.detection.merge(&DetectionCounts::from_decision(truth.len(), declared, t_max));
        let (_, theta_bar) = crate::model::scan_decision(&p_scan, &a_scan, SetMethod::Permute, declared)?;

        for (i, j) in match_subset(truth, &theta_bar[..declared]) {
            let e = truth[i] - theta_bar[j];
            acc.nn_sq += e * e;
            acc.nn_pairs += 1;
        }
        if !truth.is_empty() {
            let est = &theta_bar[..truth.len()];
            let perm = best_permutation(truth, est);
            for (i, &j) in perm.iter().enumerate() {
                let e = truth[i] - est[j];
                acc.nn_all_sq += e * e;
            }
            acc.nn_all_targets += truth.len();
        }

        if cfg.with_esprit && declared > 0 {
            let est = esprit_scan(&d.radar, declared.min(k - 1), &model.array)?;
            acc.esprit_clamped += est.clamped.iter().filter(|&&c| c).count();
            for (i, j) in match_subset(truth, &est.angles) {
                let e = truth[i] - est.angles[j];
                acc.esprit_sq += e * e;
                acc.esprit_pairs += 1;
            }
        }
    }
    Ok(acc)
}

/// Beam gains toward the communication and sensing sectors, in dB.
pub fn beam_gains(model: &JcasModel, cfg: &ValidationConfig) -> Result<(f64, f64)> {
    let nu = model.beamform(&cfg.regions)?;
    Ok((
        beam_gain(&nu, &cfg.regions.comm, cfg.beam_grid, &model.array),
        beam_gain(&nu, &cfg.regions.sensing, cfg.beam_grid, &model.array),
    ))
}

/// Sequential validation over all upsampling factors.
pub fn validate(model: &JcasModel, cfg: &ValidationConfig) -> Result<Vec<MetricsRecord>> {
    cfg.validate()?;
    let (gc, gr) = beam_gains(model, cfg)?;
    let mut out = Vec::with_capacity(cfg.u_list.len());
    for (round, &u) in cfg.u_list.iter().enumerate() {
        let mut acc = MetricsAccumulator::new(model.labeling.bits());
        for (chunk, &n) in cfg.chunk_sizes().iter().enumerate() {
            acc.merge(&validate_chunk(model, cfg, u, round as u32, chunk as u32, n)?);
        }
        out.push(acc.finish(u, gc, gr));
    }
    Ok(out)
}

/// Detector outputs of noise-only snapshots with the model's stored offset,
/// one row per snapshot.
pub fn noise_only_probs(model: &JcasModel, cfg: &ValidationConfig, n: usize, seed_chunk: u32) -> Result<Matrix> {
    let mut rng = SimRng::new(cfg.seed, Stream::Validation { round: u32::MAX, chunk: seed_chunk });
    let k = model.shape.antennas;
    let snaps: Vec<ComplexVector> = (0..n)
        .map(|_| (0..k).map(|_| cnormal(cfg.noise.noise_var, &mut rng)).collect())
        .collect();
    model.detection_probs(&model.detect(&model.radar_features(&snaps)?)?)
}
