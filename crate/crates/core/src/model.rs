//! The five trainable networks of the transmitter and the two receivers,
//! plus the soft demapper and the achievable-rate metric.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use rand::Rng;

#[allow(unused_imports)]
use num_traits::Float;

use crate::channel::{AngleRegion, ArrayConfig, NoiseConfig};
use crate::detection::{shift_onehot, DetectionEncoding, LogitOffset};
use crate::error::{invalid, shape, Result};
use crate::nn::{sigmoid, Activation, MlpNet, OutputTransform};
use crate::numerics::{ComplexVector, Matrix};
use crate::set_methods::{best_permutation, SetMethod};

/// Magnitude limit of the bit LLRs.
pub const LLR_CLAMP: f64 = 40.0;

/// Mapping between message indices and bit words.
///
/// Message `m` (zero-based) carries the binary digits of `m`, most
/// significant bit first.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BitLabeling {
    messages: usize,
    bits: usize,
}

impl BitLabeling {
    /// Natural binary labeling; `messages` must be a power of two, at least 2.
    pub fn natural(messages: usize) -> Result<Self> {
        if messages < 2 || !messages.is_power_of_two() {
            return Err(invalid(format!("message count must be a power of two >= 2, got {messages}")));
        }
        Ok(Self {
            messages,
            bits: messages.trailing_zeros() as usize,
        })
    }

    pub fn messages(&self) -> usize {
        self.messages
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    /// Bit `k` of message `m`, `k = 0` being the most significant.
    pub fn bit(&self, m: usize, k: usize) -> u8 {
        ((m >> (self.bits - 1 - k)) & 1) as u8
    }

    pub fn word(&self, m: usize) -> Vec<u8> {
        (0..self.bits).map(|k| self.bit(m, k)).collect()
    }

    /// Tag stored in checkpoints.
    pub fn tag(&self) -> u8 {
        0
    }
}

/// Bit LLRs `ln(P(b_k = 0) / P(b_k = 1))` from a symbol posterior.
pub fn posteriors_to_llrs(posterior: &[f64], labeling: &BitLabeling) -> Result<Vec<f64>> {
    if posterior.len() != labeling.messages() {
        return Err(shape(format!("{} posteriors", labeling.messages()), format!("{}", posterior.len())));
    }
    let tiny = f64::MIN_POSITIVE;
    Ok((0..labeling.bits())
        .map(|k| {
            let (mut p0, mut p1) = (0.0, 0.0);
            for (m, &p) in posterior.iter().enumerate() {
                if labeling.bit(m, k) == 0 {
                    p0 += p;
                } else {
                    p1 += p;
                }
            }
            (p0.max(tiny).ln() - p1.max(tiny).ln()).clamp(-LLR_CLAMP, LLR_CLAMP)
        })
        .collect())
}

/// `log2(1 + exp(x))` without overflow.
fn log2_1p_exp(x: f64) -> f64 {
    (x.max(0.0) + (-x.abs()).exp().ln_1p()) / core::f64::consts::LN_2
}

/// Running sum behind the bit-wise mutual information estimate.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BmiAccumulator {
    penalty: f64,
    symbols: usize,
    bits: usize,
}

impl BmiAccumulator {
    pub fn new(bits: usize) -> Self {
        Self {
            penalty: 0.0,
            symbols: 0,
            bits,
        }
    }

    pub fn add(&mut self, llrs: &[f64], sent: &[u8]) {
        for (&l, &b) in llrs.iter().zip(sent) {
            let sign = 1.0 - 2.0 * b as f64;
            self.penalty += log2_1p_exp(-sign * l);
        }
        self.symbols += 1;
    }

    pub fn merge(&mut self, other: &Self) {
        self.penalty += other.penalty;
        self.symbols += other.symbols;
    }

    pub fn symbols(&self) -> usize {
        self.symbols
    }

    /// Bits per symbol, `None` before any symbol was added.
    pub fn value(&self) -> Option<f64> {
        (self.symbols > 0).then(|| self.bits as f64 - self.penalty / self.symbols as f64)
    }
}

/// BMI of a batch of LLR rows against the transmitted bit words.
pub fn bmi(llrs: &[Vec<f64>], sent: &[Vec<u8>]) -> Result<f64> {
    if llrs.len() != sent.len() || llrs.is_empty() {
        return Err(shape(format!("{} non-empty LLR rows", sent.len()), format!("{}", llrs.len())));
    }
    let mut acc = BmiAccumulator::new(llrs[0].len());
    for (l, s) in llrs.iter().zip(sent) {
        acc.add(l, s);
    }
    Ok(acc.value().unwrap_or(0.0))
}

/// Angular sectors of the communication user and of the sensing area.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamRegions {
    pub comm: AngleRegion,
    pub sensing: AngleRegion,
}

impl BeamRegions {
    /// Beamformer input `[phi_min, phi_max, theta_min, theta_max, 1]`.
    pub fn features(&self) -> [f64; 5] {
        [self.comm.min, self.comm.max, self.sensing.min, self.sensing.max, 1.0]
    }
}

/// Sizes that fix every network shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelShape {
    pub messages: usize,
    pub antennas: usize,
    pub max_targets: usize,
    pub encoding: DetectionEncoding,
}

impl ModelShape {
    pub fn validate(&self) -> Result<()> {
        BitLabeling::natural(self.messages)?;
        if self.antennas < 2 {
            return Err(invalid(format!("need at least 2 antennas, got {}", self.antennas)));
        }
        if self.max_targets == 0 {
            return Err(invalid("maximum target count must be positive"));
        }
        Ok(())
    }

    pub fn encoder_widths(&self) -> Vec<usize> {
        let m = self.messages;
        vec![m, 2 * m, 2 * m, 2 * m, 2]
    }

    pub fn beamformer_widths(&self) -> Vec<usize> {
        let k = self.antennas;
        vec![5, k, k, 2 * k, 2 * k]
    }

    pub fn decoder_widths(&self) -> Vec<usize> {
        let m = self.messages;
        vec![2, 2 * m, 2 * m, 2 * m, m]
    }

    pub fn detector_widths(&self) -> Vec<usize> {
        let k = self.antennas;
        vec![2 * k, 2 * k, 2 * k, k, self.encoding.width(self.max_targets)]
    }

    pub fn angle_widths(&self) -> Vec<usize> {
        let k = self.antennas;
        vec![2 * k, 2 * k, 2 * k, k, self.max_targets]
    }

    pub fn detector_output(&self) -> OutputTransform {
        match self.encoding {
            DetectionEncoding::Counting => OutputTransform::Sigmoid,
            DetectionEncoding::OneHot => OutputTransform::Softmax,
        }
    }
}

/// Identifies one of the five networks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NetKind {
    Encoder,
    Beamformer,
    Decoder,
    Detector,
    Angle,
}

impl NetKind {
    pub const ALL: [NetKind; 5] = [
        NetKind::Encoder,
        NetKind::Beamformer,
        NetKind::Decoder,
        NetKind::Detector,
        NetKind::Angle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            NetKind::Encoder => "encoder",
            NetKind::Beamformer => "beamformer",
            NetKind::Decoder => "decoder",
            NetKind::Detector => "detector",
            NetKind::Angle => "angle",
        }
    }

    pub fn tag(self) -> u8 {
        self as u8
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        NetKind::ALL.get(tag as usize).copied()
    }
}

/// Complex vector as `[re..., im...]`.
pub fn complex_to_features(z: &[Complex64], out: &mut [f64]) {
    let k = z.len();
    for (i, v) in z.iter().enumerate() {
        out[i] = v.re;
        out[k + i] = v.im;
    }
}

/// Inverse of [`complex_to_features`].
pub fn features_to_complex(f: &[f64]) -> ComplexVector {
    let k = f.len() / 2;
    (0..k).map(|i| Complex64::new(f[i], f[k + i])).collect()
}

/// Learned transmitter and receivers.
#[derive(Debug, Clone, PartialEq)]
pub struct JcasModel {
    pub shape: ModelShape,
    pub array: ArrayConfig,
    pub labeling: BitLabeling,
    pub encoder: MlpNet,
    pub beamformer: MlpNet,
    pub decoder: MlpNet,
    pub detector: MlpNet,
    pub angle: MlpNet,
    /// Counting encoding: logit threshold from the last training minibatch.
    pub offset: LogitOffset,
    /// One-hot encoding: probability shift from the last training minibatch.
    pub onehot_shift: Vec<f64>,
    /// Fixed gain applied to radar samples before the detector and angle nets.
    pub radar_gain: f64,
}

/// Receiver gain that brings radar samples of one unit-gain target to unit
/// scale: `1 / sqrt(noise_var + target_rcs_var)`.
pub fn radar_gain_for(noise: &NoiseConfig) -> f64 {
    1.0 / (noise.noise_var + noise.target_rcs_var).sqrt()
}

impl JcasModel {
    /// Glorot-initialized model.
    pub fn new<R: Rng + ?Sized>(shape: ModelShape, array: ArrayConfig, rng: &mut R) -> Result<Self> {
        shape.validate()?;
        if array.antennas != shape.antennas {
            return Err(invalid(format!(
                "array has {} antennas but the model expects {}",
                array.antennas, shape.antennas
            )));
        }
        let elu = Activation::Elu;
        let encoder = MlpNet::glorot(&shape.encoder_widths(), elu, OutputTransform::MeanPowerNorm, rng)?;
        let beamformer = MlpNet::glorot(&shape.beamformer_widths(), elu, OutputTransform::PowerNorm, rng)?;
        let decoder = MlpNet::glorot(&shape.decoder_widths(), elu, OutputTransform::Softmax, rng)?;
        let detector = MlpNet::glorot(&shape.detector_widths(), elu, shape.detector_output(), rng)?;
        let angle = MlpNet::glorot(&shape.angle_widths(), elu, OutputTransform::ScaledTanh, rng)?;
        Self::from_nets(shape, array, [encoder, beamformer, decoder, detector, angle])
    }

    /// Assembles a model from networks in [`NetKind::ALL`] order, checking
    /// their shapes.
    pub fn from_nets(shape: ModelShape, array: ArrayConfig, nets: [MlpNet; 5]) -> Result<Self> {
        shape.validate()?;
        let expected = [
            (shape.encoder_widths(), OutputTransform::MeanPowerNorm),
            (shape.beamformer_widths(), OutputTransform::PowerNorm),
            (shape.decoder_widths(), OutputTransform::Softmax),
            (shape.detector_widths(), shape.detector_output()),
            (shape.angle_widths(), OutputTransform::ScaledTanh),
        ];
        for ((net, (widths, output)), kind) in nets.iter().zip(&expected).zip(NetKind::ALL) {
            if net.widths() != widths.as_slice() || net.output_transform() != *output {
                return Err(shape_err(kind, widths, net));
            }
        }
        let [encoder, beamformer, decoder, detector, angle] = nets;
        Ok(Self {
            shape,
            array,
            labeling: BitLabeling::natural(shape.messages)?,
            encoder,
            beamformer,
            decoder,
            detector,
            angle,
            offset: LogitOffset::default(),
            onehot_shift: vec![0.0; shape.max_targets + 1],
            radar_gain: 1.0,
        })
    }

    pub fn net(&self, kind: NetKind) -> &MlpNet {
        match kind {
            NetKind::Encoder => &self.encoder,
            NetKind::Beamformer => &self.beamformer,
            NetKind::Decoder => &self.decoder,
            NetKind::Detector => &self.detector,
            NetKind::Angle => &self.angle,
        }
    }

    pub fn net_mut(&mut self, kind: NetKind) -> &mut MlpNet {
        match kind {
            NetKind::Encoder => &mut self.encoder,
            NetKind::Beamformer => &mut self.beamformer,
            NetKind::Decoder => &mut self.decoder,
            NetKind::Detector => &mut self.detector,
            NetKind::Angle => &mut self.angle,
        }
    }

    /// All `M` symbols, normalized to unit mean power.
    pub fn constellation(&self) -> Result<ComplexVector> {
        let out = self.encoder.predict(&Matrix::identity(self.shape.messages))?;
        Ok((0..out.rows()).map(|m| Complex64::new(out.row(m)[0], out.row(m)[1])).collect())
    }

    /// Symbol of message `m` (zero-based).
    pub fn encode(&self, m: usize) -> Result<Complex64> {
        if m >= self.shape.messages {
            return Err(invalid(format!("message {m} outside 0..{}", self.shape.messages)));
        }
        Ok(self.constellation()?[m])
    }

    /// Unit-norm beamforming vector for the given sectors.
    pub fn beamform(&self, regions: &BeamRegions) -> Result<ComplexVector> {
        let input = Matrix::from_vec(1, 5, regions.features().to_vec())?;
        Ok(features_to_complex(self.beamformer.predict(&input)?.row(0)))
    }

    /// Symbol posteriors for equalized samples, one row per sample.
    pub fn decode(&self, z_norm: &[Complex64]) -> Result<Matrix> {
        let data: Vec<f64> = z_norm.iter().flat_map(|z| [z.re, z.im]).collect();
        self.decoder.predict(&Matrix::from_vec(z_norm.len(), 2, data)?)
    }

    /// Radar feature matrix, one `[re..., im...]` row per snapshot.
    pub fn radar_features(&self, snapshots: &[ComplexVector]) -> Result<Matrix> {
        let k = self.shape.antennas;
        let mut f = Matrix::zeros(snapshots.len(), 2 * k);
        for (n, z) in snapshots.iter().enumerate() {
            if z.len() != k {
                return Err(shape(format!("{k} radar samples"), format!("{}", z.len())));
            }
            let row = f.row_mut(n);
            complex_to_features(z, row);
            row.iter_mut().for_each(|v| *v *= self.radar_gain);
        }
        Ok(f)
    }

    /// Raw detector outputs before the offset, one row per snapshot.
    pub fn detect(&self, features: &Matrix) -> Result<Matrix> {
        self.detector.predict_logits(features)
    }

    /// Detection probabilities with the stored offset applied.
    ///
    /// Counting: `sigmoid(logit - offset)`. One-hot: softmax plus the stored
    /// probability shift, clipped to `[0, 1]`.
    pub fn detection_probs(&self, logits: &Matrix) -> Result<Matrix> {
        match self.shape.encoding {
            DetectionEncoding::Counting => Ok(logits.map(|l| sigmoid(l - self.offset.0))),
            DetectionEncoding::OneHot => {
                let soft = OutputTransform::Softmax.forward(logits);
                Ok(shift_onehot(&soft, &self.onehot_shift)?.probs)
            }
        }
    }

    /// Angle estimates in `(-pi/2, pi/2)`, one row per snapshot.
    pub fn estimate_angles(&self, features: &Matrix) -> Result<Matrix> {
        self.angle.predict(features)
    }
}

fn shape_err(kind: NetKind, widths: &[usize], net: &MlpNet) -> crate::Error {
    shape(
        format!("{} widths {:?}", kind.name(), widths),
        format!("{:?} with {:?} output", net.widths(), net.output_transform()),
    )
}

/// Combines the `u` snapshot outputs of one scan.
///
/// Detection probabilities are averaged per column. Angle rows are aligned
/// on their first `slots` entries against the first row according to
/// `method`, then averaged.
pub fn scan_decision(probs: &Matrix, angles: &Matrix, method: SetMethod, slots: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let u = probs.rows();
    if u == 0 || angles.rows() != u {
        return Err(shape(format!("{u} angle rows, at least one"), format!("{}", angles.rows())));
    }
    let slots = slots.min(angles.cols());
    let mut p_bar = vec![0.0; probs.cols()];
    for t in 0..u {
        for (a, &p) in p_bar.iter_mut().zip(probs.row(t)) {
            *a += p;
        }
    }
    p_bar.iter_mut().for_each(|p| *p /= u as f64);

    let reference: Vec<f64> = align(method, &angles.row(0)[..slots], &angles.row(0)[..slots]);
    let mut theta_bar = vec![0.0; angles.cols()];
    for t in 0..u {
        let row = angles.row(t);
        let aligned = align(method, &reference, &row[..slots]);
        for (j, v) in aligned.iter().chain(&row[slots..]).enumerate() {
            theta_bar[j] += v;
        }
    }
    theta_bar.iter_mut().for_each(|v| *v /= u as f64);
    Ok((p_bar, theta_bar))
}

fn align(method: SetMethod, reference: &[f64], row: &[f64]) -> Vec<f64> {
    match method {
        SetMethod::None | SetMethod::SortInput => row.to_vec(),
        SetMethod::SortAll => {
            let mut s = row.to_vec();
            s.sort_by(|a, b| a.total_cmp(b));
            s
        }
        SetMethod::Permute => best_permutation(reference, row).iter().map(|&j| row[j]).collect(),
    }
}
