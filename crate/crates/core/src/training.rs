//! Three-stage end-to-end training.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::channel::{AngleRegion, ArrayConfig, NoiseConfig, SceneSpec, TargetCountRule};
use crate::detection::{DetectionCounts, DetectionEncoding};
use crate::error::{invalid, Result};
use crate::model::{radar_gain_for, BeamRegions, BmiAccumulator, JcasModel, ModelShape, NetKind};
use crate::nn::AdamState;
use crate::numerics::{SimRng, Stream};
use crate::pipeline::{minibatch_step, BatchSettings, CalibrationData, LossWeights, ScanBatch};
use crate::set_methods::SetMethod;

/// Hyperparameters of one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub messages: usize,
    pub antennas: usize,
    pub max_targets: usize,
    /// Element spacing in wavelengths.
    pub spacing: f64,
    pub comm_snr_db: f64,
    pub radar_snr_db: f64,
    pub pf_target: f64,
    pub w_r: f64,
    pub w_a: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub minibatches_per_epoch: usize,
    pub minibatch_size: usize,
    pub encoding: DetectionEncoding,
    pub set_method: SetMethod,
    pub regions: BeamRegions,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            messages: 8,
            antennas: 16,
            max_targets: 3,
            spacing: 0.5,
            comm_snr_db: 20.0,
            radar_snr_db: 20.0,
            pf_target: 1e-2,
            w_r: 0.9,
            w_a: 20.0,
            learning_rate: 1e-3,
            epochs: 30,
            minibatches_per_epoch: 60,
            minibatch_size: 2000,
            encoding: DetectionEncoding::Counting,
            set_method: SetMethod::Permute,
            regions: BeamRegions {
                comm: AngleRegion {
                    min: 30f64.to_radians(),
                    max: 50f64.to_radians(),
                },
                sensing: AngleRegion {
                    min: -20f64.to_radians(),
                    max: 20f64.to_radians(),
                },
            },
            seed: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.shape().validate()?;
        ArrayConfig::new(self.antennas, self.spacing)?;
        AngleRegion::new(self.regions.comm.min, self.regions.comm.max)?;
        AngleRegion::new(self.regions.sensing.min, self.regions.sensing.max)?;
        if !(self.w_r > 0.0 && self.w_r < 1.0) {
            return Err(invalid(format!("w_r must lie in (0, 1), got {}", self.w_r)));
        }
        if !(self.w_a > 0.0) {
            return Err(invalid(format!("w_a must be positive, got {}", self.w_a)));
        }
        if !(self.pf_target > 0.0 && self.pf_target < 1.0) {
            return Err(invalid(format!("false alarm target must lie in (0, 1), got {}", self.pf_target)));
        }
        if !(self.learning_rate > 0.0) {
            return Err(invalid(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        if self.epochs == 0 || self.minibatches_per_epoch == 0 || self.minibatch_size == 0 {
            return Err(invalid("epochs, minibatches per epoch and minibatch size must be positive"));
        }
        if !self.comm_snr_db.is_finite() || !self.radar_snr_db.is_finite() {
            return Err(invalid("SNRs must be finite"));
        }
        Ok(())
    }

    pub fn shape(&self) -> ModelShape {
        ModelShape {
            messages: self.messages,
            antennas: self.antennas,
            max_targets: self.max_targets,
            encoding: self.encoding,
        }
    }

    pub fn array(&self) -> ArrayConfig {
        ArrayConfig {
            antennas: self.antennas,
            spacing: self.spacing,
        }
    }

    pub fn noise(&self) -> NoiseConfig {
        NoiseConfig::from_snr_db(self.comm_snr_db, self.radar_snr_db)
    }

    pub fn scene_spec(&self) -> SceneSpec {
        SceneSpec {
            messages: self.messages,
            max_targets: self.max_targets,
            comm_region: self.regions.comm,
            sensing_region: self.regions.sensing,
        }
    }

    /// First epochs of stages 2 and 3.
    pub fn stage_boundaries(&self) -> (usize, usize) {
        stage_boundaries(self.epochs)
    }
}

/// First epochs of stages 2 and 3: `ceil(epochs / 3)` and `ceil(2 epochs / 3)`.
pub fn stage_boundaries(total_epochs: usize) -> (usize, usize) {
    (total_epochs.div_ceil(3), (2 * total_epochs).div_ceil(3))
}

/// Loss stage (1, 2 or 3) of a zero-based epoch.
pub fn stage_of(epoch: usize, total_epochs: usize) -> u8 {
    let (b2, b3) = stage_boundaries(total_epochs);
    if epoch < b2 {
        1
    } else if epoch < b3 {
        2
    } else {
        3
    }
}

/// Term coefficients of the stage's loss.
///
/// Stage 1 trains communication and angle estimation, stage 2
/// communication and detection, stage 3 all three.
pub fn loss_weights(stage: u8, w_r: f64, w_a: f64) -> LossWeights {
    LossWeights {
        comm: 1.0 - w_r,
        detect: if stage >= 2 { w_r } else { 0.0 },
        angle: if stage == 2 { 0.0 } else { w_r * w_a },
    }
}

pub fn combined_loss(stage: u8, loss_comm: f64, loss_detect: f64, loss_angle: f64, w_r: f64, w_a: f64) -> f64 {
    loss_weights(stage, w_r, w_a).total(loss_comm, loss_detect, loss_angle)
}

/// Aggregated training metrics of one epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub stage: u8,
    pub loss_comm: f64,
    pub loss_detect: f64,
    pub loss_angle: f64,
    pub loss_total: f64,
    pub pd: Option<f64>,
    pub pf: Option<f64>,
    /// Largest per-minibatch false alarm rate in the epoch.
    pub pf_max_minibatch: Option<f64>,
    pub bmi: Option<f64>,
    pub angle_rmse: Option<f64>,
    pub offset: f64,
    pub deep_fades: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
}

/// Owns the model, the optimizer state and the training random streams.
#[derive(Debug, Clone)]
pub struct Trainer {
    cfg: TrainConfig,
    model: JcasModel,
    adam: [AdamState; 5],
    scene_rng: SimRng,
    noise_rng: SimRng,
    epoch: usize,
    history: TrainHistory,
    /// Radar features of the last `max_targets` minibatches.
    recent: VecDeque<CalibrationData>,
}

impl Trainer {
    pub fn new(cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let mut init = SimRng::new(cfg.seed, Stream::Init);
        let mut model = JcasModel::new(cfg.shape(), cfg.array(), &mut init)?;
        model.radar_gain = radar_gain_for(&cfg.noise());
        let adam = NetKind::ALL.map(|k| AdamState::new(model.net(k).param_count(), cfg.learning_rate));
        Ok(Self {
            scene_rng: SimRng::new(cfg.seed, Stream::TargetDraw),
            noise_rng: SimRng::new(cfg.seed, Stream::ChannelNoise),
            cfg,
            model,
            adam,
            epoch: 0,
            history: TrainHistory::default(),
            recent: VecDeque::new(),
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn model(&self) -> &JcasModel {
        &self.model
    }

    pub fn history(&self) -> &TrainHistory {
        &self.history
    }

    /// Number of completed epochs.
    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn is_finished(&self) -> bool {
        self.epoch >= self.cfg.epochs
    }

    /// Runs the next epoch and returns its record.
    pub fn run_epoch(&mut self) -> Result<&EpochRecord> {
        if self.is_finished() {
            return Err(crate::Error::State(format!("all {} epochs already ran", self.cfg.epochs)));
        }
        let cfg = &self.cfg;
        let stage = stage_of(self.epoch, cfg.epochs);
        let settings = BatchSettings {
            weights: loss_weights(stage, cfg.w_r, cfg.w_a),
            set_method: cfg.set_method,
            pf_target: cfg.pf_target,
            calibrate: true,
        };
        let spec = cfg.scene_spec();
        let noise = cfg.noise();
        let mut sums = [0.0; 4];
        let mut det = DetectionCounts::default();
        let mut bmi = BmiAccumulator::new(self.model.labeling.bits());
        let (mut sq, mut targets) = (0.0, 0usize);
        let mut pf_max: Option<f64> = None;
        let mut deep_fades = 0;
        for j in 0..cfg.minibatches_per_epoch {
            let rule = TargetCountRule::Cycling {
                minibatch: j,
                max: cfg.max_targets,
            };
            let batch = ScanBatch::draw(
                cfg.minibatch_size,
                &spec,
                rule,
                &noise,
                cfg.antennas,
                &mut self.scene_rng,
                &mut self.noise_rng,
            );
            let (out, grads) = minibatch_step(&self.model, &cfg.regions, &batch, &settings)?;
            if !out.is_finite() {
                return Err(out.diverged(self.epoch, j));
            }
            for kind in NetKind::ALL {
                let frozen = (kind == NetKind::Detector && settings.weights.detect == 0.0)
                    || (kind == NetKind::Angle && settings.weights.angle == 0.0);
                if !frozen {
                    self.adam[kind as usize].step(self.model.net_mut(kind).params_mut(), grads.get(kind))?;
                }
            }
            if self.recent.len() == cfg.max_targets {
                self.recent.pop_front();
            }
            self.recent.push_back(out.calibration.clone());
            self.model.offset = out.offset;
            self.model.onehot_shift = out.onehot_shift.clone();
            sums[0] += out.loss_comm;
            sums[1] += out.loss_detect;
            sums[2] += out.loss_angle;
            sums[3] += out.loss_total;
            det.merge(&out.detection);
            bmi.merge(&out.bmi);
            sq += out.angle_sq_err;
            targets += out.angle_targets;
            deep_fades += out.deep_fades;
            if let Some(pf) = out.detection.pf() {
                pf_max = Some(pf_max.map_or(pf, |m: f64| m.max(pf)));
            }
        }
        // The stored threshold covers one full cycle of target counts.
        let mut pooled = CalibrationData::default();
        for c in &self.recent {
            pooled.merge(c)?;
        }
        pooled.calibrate(&mut self.model, cfg.pf_target)?;
        let nb = cfg.minibatches_per_epoch as f64;
        self.history.records.push(EpochRecord {
            epoch: self.epoch,
            stage,
            loss_comm: sums[0] / nb,
            loss_detect: sums[1] / nb,
            loss_angle: sums[2] / nb,
            loss_total: sums[3] / nb,
            pd: det.pd(),
            pf: det.pf(),
            pf_max_minibatch: pf_max,
            bmi: bmi.value(),
            angle_rmse: (targets > 0).then(|| (sq / targets as f64).sqrt()),
            offset: self.model.offset.0,
            deep_fades,
        });
        self.epoch += 1;
        Ok(self.history.records.last().expect("record just pushed"))
    }

    pub fn into_parts(self) -> (JcasModel, TrainHistory) {
        (self.model, self.history)
    }
}

/// Runs every epoch of `cfg`.
pub fn train(cfg: &TrainConfig) -> Result<(JcasModel, TrainHistory)> {
    let mut trainer = Trainer::new(cfg.clone())?;
    while !trainer.is_finished() {
        trainer.run_epoch()?;
    }
    Ok(trainer.into_parts())
}
