//! Deterministic work sharing over scoped threads.
//!
//! Jobs are pulled from a shared counter, and results are returned in job
//! order, so the output does not depend on the thread count.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use jcas_core::model::JcasModel;
use jcas_core::validation::{beam_gains, validate_chunk, MetricsAccumulator, MetricsRecord, ValidationConfig};

/// Worker count for `requested` threads; 0 means all available cores.
pub fn resolve_threads(requested: usize) -> usize {
    if requested > 0 {
        requested
    } else {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    }
}

/// `f(0), ..., f(jobs - 1)` evaluated on up to `threads` workers.
pub fn map_indexed<T, F>(jobs: usize, threads: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let workers = threads.max(1).min(jobs);
    if workers <= 1 {
        return (0..jobs).map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<T>>> = Mutex::new((0..jobs).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= jobs {
                    break;
                }
                let v = f(i);
                slots.lock().expect("no worker panicked")[i] = Some(v);
            });
        }
    });
    slots
        .into_inner()
        .expect("no worker panicked")
        .into_iter()
        .map(|v| v.expect("every job ran"))
        .collect()
}

/// Parallel equivalent of [`jcas_core::validation::validate`] with
/// identical results for any thread count.
pub fn validate_parallel(
    model: &JcasModel,
    cfg: &ValidationConfig,
    threads: usize,
) -> jcas_core::Result<Vec<MetricsRecord>> {
    cfg.validate()?;
    let (gc, gr) = beam_gains(model, cfg)?;
    let chunks = cfg.chunk_sizes();
    let jobs: Vec<(usize, usize)> = (0..cfg.u_list.len())
        .flat_map(|r| (0..chunks.len()).map(move |c| (r, c)))
        .collect();
    let results = map_indexed(jobs.len(), threads, |i| {
        let (round, chunk) = jobs[i];
        validate_chunk(model, cfg, cfg.u_list[round], round as u32, chunk as u32, chunks[chunk])
    });
    let mut results = results.into_iter();
    let mut out = Vec::with_capacity(cfg.u_list.len());
    for &u in &cfg.u_list {
        let mut acc = MetricsAccumulator::new(model.labeling.bits());
        for _ in 0..chunks.len() {
            acc.merge(&results.next().expect("one result per job")?);
        }
        out.push(acc.finish(u, gc, gr));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use jcas_core::channel::{AmplitudeModel, ArrayConfig, NoiseConfig};
    use jcas_core::detection::DetectionEncoding;
    use jcas_core::model::ModelShape;
    use jcas_core::numerics::{SimRng, Stream};
    use jcas_core::training::TrainConfig;
    use jcas_core::validation::validate;

    #[test]
    fn results_keep_job_order() {
        for threads in [1, 2, 5] {
            assert_eq!(map_indexed(7, threads, |i| i * i), vec![0, 1, 4, 9, 16, 25, 36]);
        }
        assert!(map_indexed(0, 3, |i| i).is_empty());
    }

    #[test]
    fn parallel_validation_matches_sequential() {
        let shape = ModelShape {
            messages: 4,
            antennas: 8,
            max_targets: 2,
            encoding: DetectionEncoding::Counting,
        };
        let model = JcasModel::new(shape, ArrayConfig::new(8, 0.5).unwrap(), &mut SimRng::new(1, Stream::Init)).unwrap();
        let cfg = ValidationConfig {
            u_list: vec![1, 3],
            scans: 45,
            chunk_size: 10,
            seed: 4,
            amplitudes: AmplitudeModel::PerSnapshot,
            noise: NoiseConfig::from_snr_db(20.0, 20.0),
            regions: TrainConfig::default().regions,
            with_esprit: true,
            beam_grid: 31,
        };
        let seq = validate(&model, &cfg).unwrap();
        for threads in [1, 3] {
            assert_eq!(validate_parallel(&model, &cfg, threads).unwrap(), seq);
        }
    }
}
