//! JSON experiment configuration.
//!
//! Angles are given in degrees in the file and converted to radians once in
//! [`ExperimentConfig::train_config`] and [`ExperimentConfig::validation_config`].

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use jcas_core::channel::{AmplitudeModel, AngleRegion, NoiseConfig};
use jcas_core::detection::DetectionEncoding;
use jcas_core::model::BeamRegions;
use jcas_core::set_methods::SetMethod;
use jcas_core::training::TrainConfig;
use jcas_core::validation::ValidationConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Everything one experiment needs: the training hyperparameters, the
/// evaluation protocol and the output location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub messages: usize,
    pub antennas: usize,
    pub max_targets: usize,
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
    pub encoding: String,
    pub set_method: String,
    /// `[min, max]` in degrees.
    pub comm_region_deg: [f64; 2],
    /// `[min, max]` in degrees.
    pub sensing_region_deg: [f64; 2],
    pub seed: u64,
    pub u_list: Vec<usize>,
    pub validation_scans: usize,
    pub validation_chunk: usize,
    pub amplitude_model: String,
    pub beam_grid: usize,
    /// Scenes per (target count, u) cell of the ESPRIT benchmark.
    pub esprit_scenes: usize,
    pub out_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            messages: t.messages,
            antennas: t.antennas,
            max_targets: t.max_targets,
            spacing: t.spacing,
            comm_snr_db: t.comm_snr_db,
            radar_snr_db: t.radar_snr_db,
            pf_target: t.pf_target,
            w_r: t.w_r,
            w_a: t.w_a,
            learning_rate: t.learning_rate,
            epochs: t.epochs,
            minibatches_per_epoch: t.minibatches_per_epoch,
            minibatch_size: t.minibatch_size,
            encoding: t.encoding.name().into(),
            set_method: t.set_method.name().into(),
            comm_region_deg: [30.0, 50.0],
            sensing_region_deg: [-20.0, 20.0],
            seed: t.seed,
            u_list: vec![1, 2, 3, 4, 6, 8, 16, 32, 64],
            validation_scans: 100_000,
            validation_chunk: 1000,
            amplitude_model: AmplitudeModel::PerSnapshot.tag().into(),
            beam_grid: 361,
            esprit_scenes: 2000,
            out_dir: None,
        }
    }
}

/// Keys accepted in a configuration file.
const KEYS: &[&str] = &[
    "messages",
    "antennas",
    "max_targets",
    "spacing",
    "comm_snr_db",
    "radar_snr_db",
    "pf_target",
    "w_r",
    "w_a",
    "learning_rate",
    "epochs",
    "minibatches_per_epoch",
    "minibatch_size",
    "encoding",
    "set_method",
    "comm_region_deg",
    "sensing_region_deg",
    "seed",
    "u_list",
    "validation_scans",
    "validation_chunk",
    "amplitude_model",
    "beam_grid",
    "esprit_scenes",
    "out_dir",
];

impl ExperimentConfig {
    /// Parses and validates a JSON document.
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        let obj = value
            .as_object()
            .ok_or_else(|| CliError::Config("configuration must be a JSON object".into()))?;
        let known: BTreeSet<&str> = KEYS.iter().copied().collect();
        let unknown: Vec<&str> = obj.keys().map(String::as_str).filter(|k| !known.contains(k)).collect();
        if !unknown.is_empty() {
            return Err(CliError::Config(format!("unknown keys: {}", unknown.join(", "))));
        }
        let cfg: Self = serde_json::from_value(value).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the compact JSON form, first 16 hex digits.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(serde_json::to_vec(self).expect("config serializes"));
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    fn check(&self) -> Result<(), CliError> {
        if !self.messages.is_power_of_two() || self.messages < 2 {
            return Err(CliError::Config(format!("messages must be a power of two, got {}", self.messages)));
        }
        self.encoding()?;
        self.set_method()?;
        self.amplitudes()?;
        if self.u_list.is_empty() || self.u_list[0] == 0 || self.u_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CliError::Config("u_list must be non-empty, positive and strictly increasing".into()));
        }
        if self.validation_scans == 0 || self.validation_chunk == 0 || self.beam_grid == 0 {
            return Err(CliError::Config("validation_scans, validation_chunk and beam_grid must be positive".into()));
        }
        self.train_config()?.validate()?;
        Ok(())
    }

    pub fn encoding(&self) -> Result<DetectionEncoding, CliError> {
        DetectionEncoding::parse(&self.encoding)
            .ok_or_else(|| CliError::Config(format!("unknown encoding {:?} (counting, onehot)", self.encoding)))
    }

    pub fn set_method(&self) -> Result<SetMethod, CliError> {
        SetMethod::parse(&self.set_method).ok_or_else(|| {
            CliError::Config(format!(
                "unknown set method {:?} (none, sortinput, sortall, permute)",
                self.set_method
            ))
        })
    }

    pub fn amplitudes(&self) -> Result<AmplitudeModel, CliError> {
        [AmplitudeModel::PerSnapshot, AmplitudeModel::PerScan]
            .into_iter()
            .find(|a| a.tag() == self.amplitude_model)
            .ok_or_else(|| {
                CliError::Config(format!(
                    "unknown amplitude model {:?} (per-snapshot, per-scan)",
                    self.amplitude_model
                ))
            })
    }

    pub fn regions(&self) -> Result<BeamRegions, CliError> {
        let [c0, c1] = self.comm_region_deg;
        let [s0, s1] = self.sensing_region_deg;
        Ok(BeamRegions {
            comm: AngleRegion::from_degrees(c0, c1)?,
            sensing: AngleRegion::from_degrees(s0, s1)?,
        })
    }

    pub fn train_config(&self) -> Result<TrainConfig, CliError> {
        Ok(TrainConfig {
            messages: self.messages,
            antennas: self.antennas,
            max_targets: self.max_targets,
            spacing: self.spacing,
            comm_snr_db: self.comm_snr_db,
            radar_snr_db: self.radar_snr_db,
            pf_target: self.pf_target,
            w_r: self.w_r,
            w_a: self.w_a,
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            minibatches_per_epoch: self.minibatches_per_epoch,
            minibatch_size: self.minibatch_size,
            encoding: self.encoding()?,
            set_method: self.set_method()?,
            regions: self.regions()?,
            seed: self.seed,
        })
    }

    pub fn validation_config(&self) -> Result<ValidationConfig, CliError> {
        Ok(ValidationConfig {
            u_list: self.u_list.clone(),
            scans: self.validation_scans,
            chunk_size: self.validation_chunk,
            seed: self.seed,
            amplitudes: self.amplitudes()?,
            noise: NoiseConfig::from_snr_db(self.comm_snr_db, self.radar_snr_db),
            regions: self.regions()?,
            with_esprit: true,
            beam_grid: self.beam_grid,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_gives_defaults() {
        let cfg = ExperimentConfig::from_json("{}").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        let t = cfg.train_config().unwrap();
        assert!((t.regions.comm.min - 30f64.to_radians()).abs() < 1e-15);
        assert!((t.regions.sensing.max - 20f64.to_radians()).abs() < 1e-15);
    }

    #[test]
    fn round_trip_is_identity() {
        let mut cfg = ExperimentConfig::default();
        cfg.epochs = 7;
        cfg.encoding = "onehot".into();
        cfg.out_dir = Some("runs/a".into());
        let back = ExperimentConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
    }

    #[test]
    fn unknown_keys_are_all_listed() {
        let err = ExperimentConfig::from_json(r#"{"epochs": 3, "epoch": 3, "lr": 0.1}"#).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("unknown keys: epoch, lr"), "{msg}");
    }

    #[test]
    fn non_power_of_two_messages_rejected() {
        let err = ExperimentConfig::from_json(r#"{"messages": 6}"#).unwrap_err();
        assert!(err.to_string().contains("power of two"));
    }

    #[test]
    fn bad_enums_and_u_lists_rejected() {
        assert!(ExperimentConfig::from_json(r#"{"encoding": "binary"}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"set_method": "greedy"}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"u_list": [1, 1]}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"u_list": [0, 2]}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"comm_region_deg": [50, 30]}"#).is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        b.seed += 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 16);
    }
}
