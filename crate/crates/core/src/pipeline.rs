//! One differentiable pass of a training minibatch through transmitter,
//! channels and receivers.
//!
//! Channel coefficients and noise are drawn up front and held in a
//! [`ScanBatch`], so the simulated signals are deterministic functions of the
//! network parameters and gradients flow through the linear channel algebra.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use rand::Rng;

#[allow(unused_imports)]
use num_traits::Float;

use crate::channel::{draw_scene, project, steering_into, NoiseConfig, SceneSpec, TargetCountRule};
use crate::detection::{
    calibrate_offset, calibration_index, onehot_offset_vector, pd_pf_counting, pd_pf_onehot, shift_onehot, soft_pf_parts,
    DetectionCounts, DetectionEncoding, LogitOffset,
};
use crate::error::{shape, Error, Result};
use crate::model::{complex_to_features, BeamRegions, BmiAccumulator, JcasModel, NetKind};
use crate::nn::loss::PROB_CLAMP;
use crate::nn::{sigmoid, Tape};
use crate::numerics::{cnormal, ComplexVector, Matrix};
use crate::set_methods::{slot_targets, SetMethod};

/// Ground truth and channel draws of one minibatch.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScanBatch {
    pub messages: Vec<usize>,
    pub comm_angles: Vec<f64>,
    pub comm_fades: Vec<Complex64>,
    pub comm_noise: Vec<Complex64>,
    pub target_angles: Vec<Vec<f64>>,
    pub target_gains: Vec<Vec<Complex64>>,
    pub radar_noise: Vec<ComplexVector>,
}

impl ScanBatch {
    /// Draws `n` scenes from `scene_rng` and the receiver noise from
    /// `noise_rng`.
    pub fn draw<R1: Rng + ?Sized, R2: Rng + ?Sized>(
        n: usize,
        spec: &SceneSpec,
        rule: TargetCountRule,
        noise: &NoiseConfig,
        antennas: usize,
        scene_rng: &mut R1,
        noise_rng: &mut R2,
    ) -> Self {
        let mut b = ScanBatch::default();
        for _ in 0..n {
            let s = draw_scene(spec, rule, noise, scene_rng);
            b.messages.push(s.message);
            b.comm_angles.push(s.comm_angle);
            b.comm_fades.push(s.comm_fade);
            b.target_angles.push(s.target_angles);
            b.target_gains.push(s.target_gains);
            b.comm_noise.push(cnormal(noise.noise_var, noise_rng));
            b.radar_noise.push((0..antennas).map(|_| cnormal(noise.noise_var, noise_rng)).collect());
        }
        b
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    pub fn counts(&self) -> Vec<usize> {
        self.target_angles.iter().map(Vec::len).collect()
    }
}

/// Coefficients of the three loss terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub comm: f64,
    pub detect: f64,
    pub angle: f64,
}

impl LossWeights {
    pub fn total(&self, comm: f64, detect: f64, angle: f64) -> f64 {
        self.comm * comm + self.detect * detect + self.angle * angle
    }
}

/// How the detection and angle losses are formed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchSettings {
    pub weights: LossWeights,
    pub set_method: SetMethod,
    pub pf_target: f64,
    /// Recalibrate the detection offset on this minibatch; otherwise the
    /// model's stored offset is used.
    pub calibrate: bool,
}

/// Losses and metrics of one minibatch.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchOutcome {
    pub loss_comm: f64,
    pub loss_detect: f64,
    pub loss_angle: f64,
    pub loss_total: f64,
    pub detection: DetectionCounts,
    pub bmi: BmiAccumulator,
    /// Sum of squared angle errors after the set method, and the number of
    /// present targets it covers.
    pub angle_sq_err: f64,
    pub angle_targets: usize,
    /// Offset used for the detection probabilities of this minibatch.
    pub offset: LogitOffset,
    pub onehot_shift: Vec<f64>,
    pub deep_fades: usize,
    pub calibration: CalibrationData,
}

/// Radar features and target counts of recent minibatches, pooled for
/// detection calibration.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationData {
    pub features: Matrix,
    pub counts: Vec<usize>,
}

impl Default for CalibrationData {
    fn default() -> Self {
        Self {
            features: Matrix::zeros(0, 0),
            counts: Vec::new(),
        }
    }
}

impl CalibrationData {
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Appends the rows of `other`.
    pub fn merge(&mut self, other: &Self) -> Result<()> {
        if other.is_empty() {
            return Ok(());
        }
        if self.is_empty() {
            *self = other.clone();
            return Ok(());
        }
        if self.features.cols() != other.features.cols() {
            return Err(shape(
                format!("{} feature columns", self.features.cols()),
                format!("{}", other.features.cols()),
            ));
        }
        let mut data = self.features.as_slice().to_vec();
        data.extend_from_slice(other.features.as_slice());
        self.features = Matrix::from_vec(self.len() + other.len(), self.features.cols(), data)?;
        self.counts.extend_from_slice(&other.counts);
        Ok(())
    }

    /// Offset or one-hot shift that meets `pf` on these rows under the
    /// current detector, stored into `model`. Rows without absent slots
    /// leave the model unchanged.
    pub fn calibrate(&self, model: &mut JcasModel, pf: f64) -> Result<()> {
        if self.is_empty() {
            return Ok(());
        }
        let t_max = model.shape.max_targets;
        match model.shape.encoding {
            DetectionEncoding::Counting => {
                let logits = model.detect(&self.features)?;
                let mut zero = Vec::new();
                for (s, &tn) in self.counts.iter().enumerate() {
                    zero.extend_from_slice(&logits.row(s)[tn..]);
                }
                if let Some(offset) = calibrate_offset(&zero, pf)? {
                    model.offset = offset;
                }
            }
            DetectionEncoding::OneHot => {
                let soft = model.detector.predict(&self.features)?;
                let (num, den) = soft_pf_parts(&self.counts, &soft)?;
                if den > 0.0 {
                    model.onehot_shift = onehot_offset_vector(num / den, pf, t_max);
                }
            }
        }
        Ok(())
    }
}

impl BatchOutcome {
    pub fn is_finite(&self) -> bool {
        self.loss_comm.is_finite() && self.loss_detect.is_finite() && self.loss_angle.is_finite()
    }

    pub fn diverged(&self, epoch: usize, minibatch: usize) -> Error {
        Error::Diverged {
            epoch,
            minibatch,
            loss_comm: self.loss_comm,
            loss_detect: self.loss_detect,
            loss_angle: self.loss_angle,
        }
    }
}

/// Parameter gradients of all five networks.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGrads {
    pub nets: [Vec<f64>; 5],
}

impl ModelGrads {
    pub fn zeros(model: &JcasModel) -> Self {
        Self {
            nets: NetKind::ALL.map(|k| vec![0.0; model.net(k).param_count()]),
        }
    }

    pub fn get(&self, kind: NetKind) -> &[f64] {
        &self.nets[kind as usize]
    }

    fn get_mut(&mut self, kind: NetKind) -> &mut Vec<f64> {
        &mut self.nets[kind as usize]
    }
}

/// `log(1 + exp(x))` without overflow.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Forward and reverse pass of one minibatch.
pub fn minibatch_step(
    model: &JcasModel,
    regions: &BeamRegions,
    batch: &ScanBatch,
    settings: &BatchSettings,
) -> Result<(BatchOutcome, ModelGrads)> {
    let n = batch.len();
    let k = model.shape.antennas;
    let m_count = model.shape.messages;
    let t_max = model.shape.max_targets;
    let labeling = model.labeling;
    let nbits = labeling.bits();
    let w = settings.weights;
    let mut grads = ModelGrads::zeros(model);
    let counts = batch.counts();

    // Transmitter.
    let mut enc_tape = Tape::new();
    let constellation = model.encoder.forward(&Matrix::identity(m_count), &mut enc_tape)?;
    let symbol = |m: usize| Complex64::new(constellation.row(m)[0], constellation.row(m)[1]);
    let mut bf_tape = Tape::new();
    let bf_out = model
        .beamformer
        .forward(&Matrix::from_vec(1, 5, regions.features().to_vec())?, &mut bf_tape)?;
    let nu: ComplexVector = (0..k).map(|i| Complex64::new(bf_out.row(0)[i], bf_out.row(0)[k + i])).collect();

    // Communication link.
    let mut comm_steer = vec![Complex64::new(0.0, 0.0); n * k];
    let mut kappa = vec![Complex64::new(0.0, 0.0); n];
    let mut dec_in = Matrix::zeros(n, 2);
    let mut deep_fades = 0;
    for s in 0..n {
        let a = &mut comm_steer[s * k..(s + 1) * k];
        steering_into(batch.comm_angles[s], &model.array, a);
        kappa[s] = batch.comm_fades[s] * project(a, &nu);
        if kappa[s].norm() < crate::channel::DEEP_FADE_THRESHOLD {
            deep_fades += 1;
        }
        let r = symbol(batch.messages[s]) + batch.comm_noise[s] / kappa[s];
        dec_in.row_mut(s).copy_from_slice(&[r.re, r.im]);
    }
    let mut dec_tape = Tape::new();
    let post = model.decoder.forward(&dec_in, &mut dec_tape)?;

    let mut loss_comm = 0.0;
    let mut bmi = BmiAccumulator::new(nbits);
    let mut d_post = Matrix::zeros(n, m_count);
    let denom = (n * nbits) as f64;
    let mut q = vec![0.0; nbits];
    let mut llr = vec![0.0; nbits];
    for s in 0..n {
        let p = post.row(s);
        q.iter_mut().for_each(|v| *v = 0.0);
        for (m, &pm) in p.iter().enumerate() {
            for (kb, qv) in q.iter_mut().enumerate() {
                if labeling.bit(m, kb) == 1 {
                    *qv += pm;
                }
            }
        }
        let sent = labeling.word(batch.messages[s]);
        for kb in 0..nbits {
            let b = sent[kb] as f64;
            let qc = q[kb].clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
            loss_comm -= b * qc.ln() + (1.0 - b) * (1.0 - qc).ln();
            let g = if qc == q[kb] {
                (-b / qc + (1.0 - b) / (1.0 - qc)) / denom * w.comm
            } else {
                0.0
            };
            let row = d_post.row_mut(s);
            for (m, dv) in row.iter_mut().enumerate() {
                if labeling.bit(m, kb) == 1 {
                    *dv += g;
                }
            }
            llr[kb] = ((1.0 - q[kb]).max(f64::MIN_POSITIVE).ln() - q[kb].max(f64::MIN_POSITIVE).ln())
                .clamp(-crate::model::LLR_CLAMP, crate::model::LLR_CLAMP);
        }
        bmi.add(&llr, &sent);
    }
    loss_comm /= denom;
    let g_dec_in = model
        .decoder
        .backward_into(&mut dec_tape, &d_post, grads.get_mut(NetKind::Decoder))?;

    // Radar link.
    let mut radar_steer: Vec<Vec<Complex64>> = Vec::with_capacity(n);
    let mut proj: Vec<Vec<Complex64>> = Vec::with_capacity(n);
    let mut features = Matrix::zeros(n, 2 * k);
    let mut z = vec![Complex64::new(0.0, 0.0); k];
    for s in 0..n {
        let x = symbol(batch.messages[s]);
        let tn = counts[s];
        let mut steer = vec![Complex64::new(0.0, 0.0); tn * k];
        let mut p = vec![Complex64::new(0.0, 0.0); tn];
        z.copy_from_slice(&batch.radar_noise[s]);
        for t in 0..tn {
            let a = &mut steer[t * k..(t + 1) * k];
            steering_into(batch.target_angles[s][t], &model.array, a);
            p[t] = project(a, &nu);
            let amp = batch.target_gains[s][t] * p[t] * x;
            for (zi, ai) in z.iter_mut().zip(a.iter()) {
                *zi += ai * amp;
            }
        }
        complex_to_features(&z, features.row_mut(s));
        features.row_mut(s).iter_mut().for_each(|f| *f *= model.radar_gain);
        radar_steer.push(steer);
        proj.push(p);
    }

    // Detection.
    let mut det_tape = Tape::new();
    let mut d_det = Matrix::zeros(n, model.detector.output_width());
    let (loss_detect, detection, offset, onehot_shift) = match model.shape.encoding {
        DetectionEncoding::Counting => {
            let logits = model.detector.forward_logits(&features, &mut det_tape)?;
            // The offset is the selected zero-labeled logit itself, so the
            // loss gradient also reaches the network through that entry.
            let mut zero = Vec::new();
            let mut slots = Vec::new();
            for (s, &tn) in counts.iter().enumerate() {
                for j in tn..t_max {
                    zero.push(logits.row(s)[j]);
                    slots.push((s, j));
                }
            }
            let pick = if settings.calibrate {
                calibration_index(&zero, settings.pf_target)?
            } else {
                None
            };
            let offset = pick.map_or(model.offset, |i| LogitOffset(zero[i]));
            let mut probs = Matrix::zeros(n, t_max);
            let mut loss = 0.0;
            let scale = 1.0 / (n * t_max) as f64;
            for s in 0..n {
                for j in 0..t_max {
                    let x = logits.row(s)[j] - offset.0;
                    let c = if j < counts[s] { 1.0 } else { 0.0 };
                    let p = sigmoid(x);
                    probs.row_mut(s)[j] = p;
                    loss += softplus(x) - c * x;
                    d_det.row_mut(s)[j] = (p - c) * scale * w.detect;
                }
            }
            if let Some(i) = pick {
                let total: f64 = d_det.as_slice().iter().sum();
                let (s, j) = slots[i];
                d_det.row_mut(s)[j] -= total;
            }
            let det = pd_pf_counting(&counts, &probs, false)?;
            (loss * scale, det, offset, model.onehot_shift.clone())
        }
        DetectionEncoding::OneHot => {
            let soft = model.detector.forward(&features, &mut det_tape)?;
            let (num, den) = soft_pf_parts(&counts, &soft)?;
            let measured = (settings.calibrate && den > 0.0).then(|| num / den);
            let shift = match measured {
                Some(pf) => onehot_offset_vector(pf, settings.pf_target, t_max),
                None => model.onehot_shift.clone(),
            };
            let adj = shift_onehot(&soft, &shift)?;
            let mut loss = 0.0;
            let cols = t_max + 1;
            for s in 0..n {
                let idx = s * cols + counts[s];
                let p = adj.probs.row(s)[counts[s]];
                let pc = p.max(PROB_CLAMP);
                loss -= pc.ln();
                if !adj.clipped[idx] && pc == p {
                    d_det.row_mut(s)[counts[s]] = -w.detect / (n as f64 * p);
                }
            }
            // The shift depends on the measured soft false alarm rate.
            if measured.is_some() {
                let d_shift = onehot_offset_vector(1.0, 0.0, t_max);
                let mut d_measured = 0.0;
                for s in 0..n {
                    d_measured += d_det.row(s).iter().zip(&d_shift).map(|(g, u)| g * u).sum::<f64>();
                }
                let per_unit = d_measured / den;
                for (s, &tn) in counts.iter().enumerate() {
                    for (k, g) in d_det.row_mut(s).iter_mut().enumerate().skip(tn + 1) {
                        *g += per_unit * (k - tn) as f64;
                    }
                }
            }
            let det = pd_pf_onehot(&counts, &adj.probs)?;
            (loss / n as f64, det, model.offset, shift)
        }
    };
    let g_det_in = if w.detect != 0.0 {
        Some(
            model
                .detector
                .backward_into(&mut det_tape, &d_det, grads.get_mut(NetKind::Detector))?,
        )
    } else {
        None
    };
    let calibration = CalibrationData {
        features: features.clone(),
        counts: counts.clone(),
    };

    // Angle estimation.
    let mut ang_tape = Tape::new();
    let theta = model.angle.forward(&features, &mut ang_tape)?;
    let present: usize = counts.iter().sum();
    let mut d_ang = Matrix::zeros(n, t_max);
    let mut angle_sq_err = 0.0;
    for s in 0..n {
        let tn = counts[s];
        if tn == 0 {
            continue;
        }
        let est = &theta.row(s)[..tn];
        let targets = slot_targets(settings.set_method, &batch.target_angles[s], est)?;
        let row = d_ang.row_mut(s);
        for j in 0..tn {
            let e = est[j] - targets[j];
            angle_sq_err += e * e;
            row[j] = 2.0 * e / present as f64 * w.angle;
        }
    }
    let loss_angle = if present > 0 { angle_sq_err / present as f64 } else { 0.0 };
    let g_ang_in = if w.angle != 0.0 && present > 0 {
        Some(model.angle.backward_into(&mut ang_tape, &d_ang, grads.get_mut(NetKind::Angle))?)
    } else {
        None
    };

    // Back through the channels to the transmit symbols and beam weights.
    let mut g_const = Matrix::zeros(m_count, 2);
    let mut g_nu = vec![Complex64::new(0.0, 0.0); k];
    let mut g_z = vec![Complex64::new(0.0, 0.0); k];
    for s in 0..n {
        let m = batch.messages[s];
        let x = symbol(m);
        let gd = g_dec_in.row(s);
        let g_r = Complex64::new(gd[0], gd[1]);
        let mut g_x = g_r;
        let dr_dkappa = -batch.comm_noise[s] / (kappa[s] * kappa[s]);
        let g_gain = batch.comm_fades[s].conj() * dr_dkappa.conj() * g_r;
        for (gn, a) in g_nu.iter_mut().zip(&comm_steer[s * k..(s + 1) * k]) {
            *gn += a.conj() * g_gain;
        }

        let tn = counts[s];
        if tn > 0 && (g_det_in.is_some() || g_ang_in.is_some()) {
            g_z.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
            for g_in in [&g_det_in, &g_ang_in].into_iter().flatten() {
                let row = g_in.row(s);
                for (i, gz) in g_z.iter_mut().enumerate() {
                    *gz += Complex64::new(row[i], row[k + i]) * model.radar_gain;
                }
            }
            for t in 0..tn {
                let a = &radar_steer[s][t * k..(t + 1) * k];
                let g_amp: Complex64 = a.iter().zip(&g_z).map(|(ai, gz)| ai.conj() * gz).sum();
                let alpha = batch.target_gains[s][t];
                g_x += (alpha * proj[s][t]).conj() * g_amp;
                let g_p = (alpha * x).conj() * g_amp;
                for (gn, ai) in g_nu.iter_mut().zip(a) {
                    *gn += ai.conj() * g_p;
                }
            }
        }
        let row = g_const.row_mut(m);
        row[0] += g_x.re;
        row[1] += g_x.im;
    }
    model
        .encoder
        .backward_into(&mut enc_tape, &g_const, grads.get_mut(NetKind::Encoder))?;
    let mut g_bf = Matrix::zeros(1, 2 * k);
    complex_to_features(&g_nu, g_bf.row_mut(0));
    model
        .beamformer
        .backward_into(&mut bf_tape, &g_bf, grads.get_mut(NetKind::Beamformer))?;

    let outcome = BatchOutcome {
        loss_comm,
        loss_detect,
        loss_angle,
        loss_total: w.total(loss_comm, loss_detect, loss_angle),
        detection,
        bmi,
        angle_sq_err,
        angle_targets: present,
        offset,
        onehot_shift,
        deep_fades,
        calibration,
    };
    Ok((outcome, grads))
}

/// Losses only, with the offset taken from `model` and no recalibration.
pub fn minibatch_loss(
    model: &JcasModel,
    regions: &BeamRegions,
    batch: &ScanBatch,
    settings: &BatchSettings,
) -> Result<BatchOutcome> {
    let frozen = BatchSettings {
        calibrate: false,
        ..*settings
    };
    Ok(minibatch_step(model, regions, batch, &frozen)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{AngleRegion, ArrayConfig};
    use crate::model::ModelShape;
    use crate::numerics::{SimRng, Stream};

    fn setup(encoding: DetectionEncoding) -> (JcasModel, BeamRegions, ScanBatch) {
        setup_seeded(encoding, 1)
    }

    fn setup_seeded(encoding: DetectionEncoding, seed: u64) -> (JcasModel, BeamRegions, ScanBatch) {
        let shape = ModelShape {
            messages: 4,
            antennas: 4,
            max_targets: 2,
            encoding,
        };
        let model = JcasModel::new(shape, ArrayConfig::new(4, 0.5).unwrap(), &mut SimRng::new(1, Stream::Init)).unwrap();
        let regions = BeamRegions {
            comm: AngleRegion::from_degrees(30.0, 50.0).unwrap(),
            sensing: AngleRegion::from_degrees(-20.0, 20.0).unwrap(),
        };
        let spec = SceneSpec {
            messages: 4,
            max_targets: 2,
            comm_region: regions.comm,
            sensing_region: regions.sensing,
        };
        let noise = NoiseConfig::from_snr_db(10.0, 5.0);
        let batch = ScanBatch::draw(
            12,
            &spec,
            TargetCountRule::Uniform { max: 2 },
            &noise,
            4,
            &mut SimRng::new(seed, Stream::TargetDraw),
            &mut SimRng::new(seed, Stream::ChannelNoise),
        );
        (model, regions, batch)
    }

    fn settings(detect: f64, angle: f64) -> BatchSettings {
        BatchSettings {
            weights: LossWeights {
                comm: 0.1,
                detect,
                angle,
            },
            set_method: SetMethod::Permute,
            pf_target: 0.1,
            calibrate: false,
        }
    }

    #[test]
    fn batch_draw_is_reproducible() {
        let (_, _, a) = setup(DetectionEncoding::Counting);
        let (_, _, b) = setup(DetectionEncoding::Counting);
        assert_eq!(a, b);
        assert_eq!(a.len(), 12);
        assert!(a.counts().iter().all(|&t| t <= 2));
    }

    #[test]
    fn absent_terms_give_zero_gradients() {
        let (model, regions, batch) = setup(DetectionEncoding::Counting);
        let (_, g) = minibatch_step(&model, &regions, &batch, &settings(0.0, 1.0)).unwrap();
        assert!(g.get(NetKind::Detector).iter().all(|&v| v == 0.0));
        assert!(g.get(NetKind::Angle).iter().any(|&v| v != 0.0));
        let (_, g) = minibatch_step(&model, &regions, &batch, &settings(1.0, 0.0)).unwrap();
        assert!(g.get(NetKind::Angle).iter().all(|&v| v == 0.0));
        assert!(g.get(NetKind::Detector).iter().any(|&v| v != 0.0));
    }

    fn fd_check(encoding: DetectionEncoding, calibrate: bool) {
        let (mut model, regions, batch) = setup(encoding);
        model.offset = LogitOffset(0.2);
        model.radar_gain = 0.5;
        let st = BatchSettings {
            calibrate,
            ..settings(0.9, 1.8)
        };
        let (_, grads) = minibatch_step(&model, &regions, &batch, &st).unwrap();
        let h = 1e-6;
        for kind in NetKind::ALL {
            let len = model.net(kind).param_count();
            for idx in (0..len).step_by((len / 7).max(1)) {
                let orig = model.net(kind).params()[idx];
                model.net_mut(kind).params_mut()[idx] = orig + h;
                let up = minibatch_step(&model, &regions, &batch, &st).unwrap().0.loss_total;
                model.net_mut(kind).params_mut()[idx] = orig - h;
                let down = minibatch_step(&model, &regions, &batch, &st).unwrap().0.loss_total;
                model.net_mut(kind).params_mut()[idx] = orig;
                let fd = (up - down) / (2.0 * h);
                let an = grads.get(kind)[idx];
                let err = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-6);
                assert!(err < 1e-4, "{kind:?}[{idx}]: fd {fd} vs analytic {an}");
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences_counting() {
        fd_check(DetectionEncoding::Counting, false);
    }

    #[test]
    fn gradients_match_finite_differences_counting_calibrated() {
        fd_check(DetectionEncoding::Counting, true);
    }

    #[test]
    fn gradients_match_finite_differences_onehot() {
        fd_check(DetectionEncoding::OneHot, false);
    }

    #[test]
    fn gradients_match_finite_differences_onehot_calibrated() {
        fd_check(DetectionEncoding::OneHot, true);
    }

    #[test]
    fn pooled_calibration_matches_batch_calibration() {
        let (mut model, regions, batch) = setup(DetectionEncoding::Counting);
        let st = BatchSettings {
            calibrate: true,
            ..settings(0.9, 1.8)
        };
        let (out, _) = minibatch_step(&model, &regions, &batch, &st).unwrap();
        out.calibration.calibrate(&mut model, 0.1).unwrap();
        assert_eq!(model.offset, out.offset);

        let (mut model, regions, batch) = setup(DetectionEncoding::OneHot);
        let (out, _) = minibatch_step(&model, &regions, &batch, &st).unwrap();
        out.calibration.calibrate(&mut model, 0.1).unwrap();
        for (a, b) in model.onehot_shift.iter().zip(&out.onehot_shift) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
