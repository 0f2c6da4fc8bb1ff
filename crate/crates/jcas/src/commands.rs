//! The experiment subcommands as library functions.

use std::path::{Path, PathBuf};

use jcas_core::channel::{draw_scene, snapshot_stack, ArrayConfig, NoiseConfig, TargetCountRule};
use jcas_core::detection::DetectionEncoding;
use jcas_core::esprit::esprit_scan;
use jcas_core::model::JcasModel;
use jcas_core::numerics::{SimRng, Stream};
use jcas_core::set_methods::best_permutation;
use jcas_core::training::{EpochRecord, TrainHistory, Trainer};
use jcas_core::Complex64;

use crate::checkpoint;
use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::parallel::{map_indexed, validate_parallel};
use crate::table::{history_row, metrics_row, num, opt, Table, HISTORY_HEADER, METRICS_HEADER};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "JCAS_OUT_DIR";

/// Output directory: explicit flag, then the config, then
/// [`OUT_DIR_ENV`], then `./out`.
pub fn resolve_out_dir(flag: Option<&Path>, cfg: &ExperimentConfig) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| cfg.out_dir.clone())
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn history_table(cfg: &ExperimentConfig, history: &TrainHistory) -> Table {
    let mut t = Table::new(HISTORY_HEADER).with_provenance(&cfg.hash(), cfg.seed);
    for r in &history.records {
        t.push(history_row(r, &cfg.encoding, &cfg.set_method));
    }
    t
}

/// Files written by [`train`].
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutputs {
    pub history: PathBuf,
    pub checkpoint: PathBuf,
    pub stage_checkpoints: Vec<PathBuf>,
}

/// Trains a model, writing `history.csv`, `config.json`, a checkpoint after
/// stages 1 and 2 and `model.ckpt` at the end. On divergence the last good
/// model is saved as `diverged.ckpt` next to the partial history.
pub fn train(
    cfg: &ExperimentConfig,
    out: &Path,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<(JcasModel, TrainHistory, TrainOutputs), CliError> {
    ensure_dir(out)?;
    let config_path = out.join("config.json");
    std::fs::write(&config_path, cfg.to_json()).map_err(|e| CliError::io(&config_path, e))?;
    let mut trainer = Trainer::new(cfg.train_config()?)?;
    let (b2, b3) = trainer.config().stage_boundaries();
    let history_path = out.join("history.csv");
    let mut stage_checkpoints = Vec::new();
    while !trainer.is_finished() {
        match trainer.run_epoch() {
            Ok(r) => on_epoch(r),
            Err(e @ jcas_core::Error::Diverged { .. }) => {
                checkpoint::save(trainer.model(), &out.join("diverged.ckpt"))?;
                history_table(cfg, trainer.history()).write(&history_path)?;
                return Err(e.into());
            }
            Err(e) => return Err(e.into()),
        }
        let done = trainer.epoch();
        for (stage, boundary) in [(1, b2), (2, b3)] {
            if done == boundary && done < cfg.epochs {
                let p = out.join(format!("model_stage{stage}.ckpt"));
                checkpoint::save(trainer.model(), &p)?;
                stage_checkpoints.push(p);
            }
        }
    }
    let (model, history) = trainer.into_parts();
    history_table(cfg, &history).write(&history_path)?;
    let ckpt = out.join("model.ckpt");
    checkpoint::save(&model, &ckpt)?;
    Ok((
        model,
        history,
        TrainOutputs {
            history: history_path,
            checkpoint: ckpt,
            stage_checkpoints,
        },
    ))
}

/// Rejects a checkpoint whose dimensions disagree with the configuration.
pub fn check_compatible(model: &JcasModel, cfg: &ExperimentConfig) -> Result<(), CliError> {
    let s = &model.shape;
    let mut diffs = Vec::new();
    for (name, have, want) in [
        ("messages", s.messages, cfg.messages),
        ("antennas", s.antennas, cfg.antennas),
        ("max_targets", s.max_targets, cfg.max_targets),
    ] {
        if have != want {
            diffs.push(format!("{name}: checkpoint {have}, config {want}"));
        }
    }
    if s.encoding != cfg.encoding()? {
        diffs.push(format!("encoding: checkpoint {}, config {}", s.encoding.name(), cfg.encoding));
    }
    if diffs.is_empty() {
        Ok(())
    } else {
        Err(CliError::Config(format!("checkpoint does not match config ({})", diffs.join("; "))))
    }
}

pub fn metrics_table(cfg: &ExperimentConfig, model: &JcasModel, threads: usize) -> Result<Table, CliError> {
    check_compatible(model, cfg)?;
    let records = validate_parallel(model, &cfg.validation_config()?, threads)?;
    let mut t = Table::new(METRICS_HEADER).with_provenance(&cfg.hash(), cfg.seed);
    for r in &records {
        t.push(metrics_row(r));
    }
    Ok(t)
}

/// Evaluates a checkpoint and writes `metrics.csv`.
pub fn validate(cfg: &ExperimentConfig, checkpoint_path: &Path, out: &Path, threads: usize) -> Result<PathBuf, CliError> {
    let model = checkpoint::load(checkpoint_path)?;
    let table = metrics_table(cfg, &model, threads)?;
    ensure_dir(out)?;
    let p = out.join("metrics.csv");
    table.write(&p)?;
    Ok(p)
}

pub const COMPARE_HEADER: &[&str] = &[
    "epoch",
    "stage",
    "pd_counting",
    "pf_counting",
    "pf_max_counting",
    "pd_onehot",
    "pf_onehot",
    "pf_max_onehot",
];

/// Trains a counting and a one-hot model that differ only in the encoding
/// and writes their paired per-epoch detection metrics.
pub fn encoding_compare(cfg: &ExperimentConfig, out: &Path, threads: usize) -> Result<PathBuf, CliError> {
    ensure_dir(out)?;
    let runs: Vec<ExperimentConfig> = [DetectionEncoding::Counting, DetectionEncoding::OneHot]
        .iter()
        .map(|e| ExperimentConfig {
            encoding: e.name().into(),
            ..cfg.clone()
        })
        .collect();
    let results = map_indexed(2, threads, |i| {
        let dir = out.join(format!("train_{}", runs[i].encoding));
        train(&runs[i], &dir, |_| {}).map(|(_, h, _)| h)
    });
    let mut histories = Vec::new();
    for r in results {
        histories.push(r?);
    }
    let mut t = Table::new(COMPARE_HEADER).with_provenance(&cfg.hash(), cfg.seed);
    for (c, o) in histories[0].records.iter().zip(&histories[1].records) {
        t.push(vec![
            c.epoch.to_string(),
            c.stage.to_string(),
            opt(c.pd),
            opt(c.pf),
            opt(c.pf_max_minibatch),
            opt(o.pd),
            opt(o.pf),
            opt(o.pf_max_minibatch),
        ]);
    }
    let p = out.join("encoding_compare.csv");
    t.write(&p)?;
    Ok(p)
}

pub const ESPRIT_HEADER: &[&str] = &["targets", "u", "scenes", "rmse_esprit", "clamped", "ill_conditioned"];

/// One cell of the ESPRIT benchmark.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EspritCell {
    pub targets: usize,
    pub u: usize,
    pub scenes: usize,
    pub rmse: f64,
    pub clamped: usize,
    pub ill_conditioned: usize,
}

/// ESPRIT RMSE on synthetic scans for every target count and `u`.
///
/// Every snapshot is lit by a single isotropic element, so all targets have
/// unit array gain, and the true target count is supplied to ESPRIT.
pub fn esprit_cells(cfg: &ExperimentConfig, threads: usize) -> Result<Vec<EspritCell>, CliError> {
    let array = ArrayConfig::new(cfg.antennas, cfg.spacing)?;
    let noise = NoiseConfig::from_snr_db(cfg.comm_snr_db, cfg.radar_snr_db);
    let amplitudes = cfg.amplitudes()?;
    let spec = cfg.train_config()?.scene_spec();
    let jobs: Vec<(usize, usize)> = (1..=cfg.max_targets)
        .flat_map(|t| (0..cfg.u_list.len()).map(move |i| (t, i)))
        .collect();
    let results = map_indexed(jobs.len(), threads, |j| -> Result<EspritCell, CliError> {
        let (t, i) = jobs[j];
        let u = cfg.u_list[i];
        let mut rng = SimRng::new(cfg.seed, Stream::Custom(((t as u32) << 16) | i as u32));
        let mut tx = vec![Complex64::new(0.0, 0.0); cfg.antennas];
        tx[0] = Complex64::new(1.0, 0.0);
        let (mut sq, mut clamped, mut ill) = (0.0, 0, 0);
        for _ in 0..cfg.esprit_scenes {
            let scene = draw_scene(&spec, TargetCountRule::Fixed(t), &noise, &mut rng);
            let z = snapshot_stack(&scene, u, amplitudes, &noise, &array, |_| tx.clone(), &mut rng)?;
            let est = esprit_scan(&z, t, &array)?;
            clamped += est.clamped.iter().filter(|&&c| c).count();
            ill += usize::from(est.ill_conditioned);
            let perm = best_permutation(&scene.target_angles, &est.angles);
            for (k, &p) in perm.iter().enumerate() {
                let e = scene.target_angles[k] - est.angles[p];
                sq += e * e;
            }
        }
        Ok(EspritCell {
            targets: t,
            u,
            scenes: cfg.esprit_scenes,
            rmse: (sq / (cfg.esprit_scenes * t) as f64).sqrt(),
            clamped,
            ill_conditioned: ill,
        })
    });
    results.into_iter().collect()
}

/// Writes `esprit_bench.csv`.
pub fn esprit_bench(cfg: &ExperimentConfig, out: &Path, threads: usize) -> Result<PathBuf, CliError> {
    let cells = esprit_cells(cfg, threads)?;
    let mut t = Table::new(ESPRIT_HEADER).with_provenance(&cfg.hash(), cfg.seed);
    for c in &cells {
        t.push(vec![
            c.targets.to_string(),
            c.u.to_string(),
            c.scenes.to_string(),
            num(c.rmse),
            c.clamped.to_string(),
            c.ill_conditioned.to_string(),
        ]);
    }
    ensure_dir(out)?;
    let p = out.join("esprit_bench.csv");
    t.write(&p)?;
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ExperimentConfig {
        ExperimentConfig {
            messages: 4,
            antennas: 8,
            max_targets: 2,
            epochs: 3,
            minibatches_per_epoch: 2,
            minibatch_size: 64,
            u_list: vec![1, 4],
            validation_scans: 40,
            validation_chunk: 16,
            esprit_scenes: 30,
            beam_grid: 31,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn train_writes_history_and_checkpoints() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny();
        let mut seen = 0;
        let (model, history, outs) = train(&cfg, dir.path(), |_| seen += 1).unwrap();
        assert_eq!(seen, 3);
        assert_eq!(history.records.len(), 3);
        assert_eq!(outs.stage_checkpoints.len(), 2);
        assert_eq!(checkpoint::load(&outs.checkpoint).unwrap(), model);
        let t = Table::read(&outs.history).unwrap();
        assert_eq!(t.rows.len(), 3);
        assert_eq!(t.meta("config_hash"), Some(cfg.hash().as_str()));
        let written = ExperimentConfig::load(&dir.path().join("config.json")).unwrap();
        assert_eq!(written, cfg);
    }

    #[test]
    fn validate_rejects_mismatched_checkpoint() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny();
        let (_, _, outs) = train(&cfg, dir.path(), |_| {}).unwrap();
        let p = validate(&cfg, &outs.checkpoint, dir.path(), 2).unwrap();
        let t = Table::read(&p).unwrap();
        assert_eq!(t.rows.len(), 2);
        let other = ExperimentConfig { max_targets: 3, ..cfg };
        let err = validate(&other, &outs.checkpoint, dir.path(), 1).unwrap_err().to_string();
        assert!(err.contains("max_targets"), "{err}");
    }

    #[test]
    fn esprit_benchmark_improves_with_snapshots() {
        let cfg = ExperimentConfig {
            u_list: vec![2, 32],
            esprit_scenes: 200,
            ..tiny()
        };
        let cells = esprit_cells(&cfg, 2).unwrap();
        assert_eq!(cells.len(), 4);
        for pair in cells.chunks(2) {
            assert!(pair[1].rmse < pair[0].rmse, "{pair:?}");
        }
        assert_eq!(cells, esprit_cells(&cfg, 1).unwrap());
    }

    #[test]
    fn out_dir_precedence() {
        let mut cfg = ExperimentConfig::default();
        assert_eq!(resolve_out_dir(Some(Path::new("a")), &cfg), PathBuf::from("a"));
        cfg.out_dir = Some("b".into());
        assert_eq!(resolve_out_dir(None, &cfg), PathBuf::from("b"));
    }
}
