//! Counting and one-hot target-count encodings, detection metrics and
//! fixed false alarm rate calibration.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, shape, Result};
use crate::nn::sigmoid;
use crate::numerics::Matrix;

/// Representation of the number of targets at the detector output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DetectionEncoding {
    /// `T_max` outputs, the first `T` of which are one.
    #[default]
    Counting,
    /// `T_max + 1` outputs with a single one at position `T`.
    OneHot,
}

impl DetectionEncoding {
    pub fn name(self) -> &'static str {
        match self {
            DetectionEncoding::Counting => "counting",
            DetectionEncoding::OneHot => "onehot",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "counting" => Some(DetectionEncoding::Counting),
            "onehot" | "one-hot" => Some(DetectionEncoding::OneHot),
            _ => None,
        }
    }

    pub fn tag(self) -> u8 {
        match self {
            DetectionEncoding::Counting => 0,
            DetectionEncoding::OneHot => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(DetectionEncoding::Counting),
            1 => Some(DetectionEncoding::OneHot),
            _ => None,
        }
    }

    /// Detector output width for `max_targets`.
    pub fn width(self, max_targets: usize) -> usize {
        match self {
            DetectionEncoding::Counting => max_targets,
            DetectionEncoding::OneHot => max_targets + 1,
        }
    }
}

fn check_count(t: usize, t_max: usize) -> Result<()> {
    if t > t_max {
        return Err(invalid(format!("target count {t} exceeds maximum {t_max}")));
    }
    Ok(())
}

/// Counting label: first `t` entries one, the rest zero.
pub fn counting_encode(t: usize, t_max: usize) -> Result<Vec<f64>> {
    check_count(t, t_max)?;
    Ok((0..t_max).map(|j| if j < t { 1.0 } else { 0.0 }).collect())
}

/// One-hot label with the one at position `t`.
pub fn onehot_encode(t: usize, t_max: usize) -> Result<Vec<f64>> {
    check_count(t, t_max)?;
    Ok((0..=t_max).map(|j| if j == t { 1.0 } else { 0.0 }).collect())
}

/// Counting label matrix, one row per sample.
pub fn counting_labels(counts: &[usize], t_max: usize) -> Result<Matrix> {
    let mut data = Vec::with_capacity(counts.len() * t_max);
    for &t in counts {
        data.extend(counting_encode(t, t_max)?);
    }
    Matrix::from_vec(counts.len(), t_max, data)
}

/// One-hot label matrix, one row per sample.
pub fn onehot_labels(counts: &[usize], t_max: usize) -> Result<Matrix> {
    let mut data = Vec::with_capacity(counts.len() * (t_max + 1));
    for &t in counts {
        data.extend(onehot_encode(t, t_max)?);
    }
    Matrix::from_vec(counts.len(), t_max + 1, data)
}

pub fn sort_descending(row: &mut [f64]) {
    row.sort_by(|a, b| b.total_cmp(a));
}

/// One-hot probabilities from counting probabilities.
///
/// The input is sorted descending first, so every result entry is
/// non-negative.
pub fn counting_to_onehot(c_est: &[f64]) -> Vec<f64> {
    let mut c = c_est.to_vec();
    sort_descending(&mut c);
    let t_max = c.len();
    let mut o = vec![0.0; t_max + 1];
    if t_max == 0 {
        o[0] = 1.0;
        return o;
    }
    o[0] = 1.0 - c[0];
    for k in 1..t_max {
        o[k] = c[k - 1] - c[k];
    }
    o[t_max] = c[t_max - 1];
    o
}

/// Counting probabilities as suffix sums of one-hot probabilities.
pub fn onehot_to_counting(o_est: &[f64]) -> Vec<f64> {
    let t_max = o_est.len().saturating_sub(1);
    let mut c = vec![0.0; t_max];
    let mut acc = 0.0;
    for k in (1..=t_max).rev() {
        acc += o_est[k];
        c[k - 1] = acc;
    }
    c
}

/// Hard decision with ties at one half counted as detections.
pub fn round_half_up(p: f64) -> f64 {
    if p >= 0.5 {
        1.0
    } else {
        0.0
    }
}

/// Number of targets declared by a counting probability vector.
pub fn count_targets(probs: &[f64]) -> usize {
    let mut p = probs.to_vec();
    sort_descending(&mut p);
    p.iter().map(|&x| round_half_up(x)).sum::<f64>() as usize
}

/// Hard decision of a one-hot probability vector, first maximum wins.
pub fn onehot_decision(probs: &[f64]) -> usize {
    let mut best = 0;
    for (k, &p) in probs.iter().enumerate() {
        if p > probs[best] {
            best = k;
        }
    }
    best
}

/// Sufficient statistics for detection and weighted false alarm rates.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DetectionCounts {
    pub detected: f64,
    pub present: f64,
    pub false_alarms: f64,
    pub absent: f64,
}

impl DetectionCounts {
    /// Contribution of one sample with `truth` targets and `declared` detections.
    pub fn from_decision(truth: usize, declared: usize, t_max: usize) -> Self {
        Self {
            detected: truth.min(declared) as f64,
            present: truth as f64,
            false_alarms: (truth.max(declared) - truth) as f64,
            absent: (t_max - truth.min(t_max)) as f64,
        }
    }

    pub fn merge(&mut self, other: &Self) {
        self.detected += other.detected;
        self.present += other.present;
        self.false_alarms += other.false_alarms;
        self.absent += other.absent;
    }

    /// Detection rate, `None` when no target was present.
    pub fn pd(&self) -> Option<f64> {
        (self.present > 0.0).then(|| self.detected / self.present)
    }

    /// Weighted false alarm rate, `None` when no slot was empty.
    pub fn pf(&self) -> Option<f64> {
        (self.absent > 0.0).then(|| self.false_alarms / self.absent)
    }
}

fn check_rows(counts: &[usize], est: &Matrix, width: usize) -> Result<()> {
    if est.rows() != counts.len() || est.cols() != width {
        return Err(shape(
            format!("{}x{}", counts.len(), width),
            format!("{}x{}", est.rows(), est.cols()),
        ));
    }
    Ok(())
}

/// Detection and false alarm counts for counting estimates.
///
/// With `sort_rows` each estimate row is sorted descending before rounding.
pub fn pd_pf_counting(counts: &[usize], c_est: &Matrix, sort_rows: bool) -> Result<DetectionCounts> {
    let t_max = c_est.cols();
    check_rows(counts, c_est, t_max)?;
    let mut acc = DetectionCounts::default();
    let mut row = vec![0.0; t_max];
    for (n, &t) in counts.iter().enumerate() {
        check_count(t, t_max)?;
        row.copy_from_slice(c_est.row(n));
        if sort_rows {
            sort_descending(&mut row);
        }
        for (j, &p) in row.iter().enumerate() {
            let hit = round_half_up(p);
            if j < t {
                acc.detected += hit;
            } else {
                acc.false_alarms += hit;
            }
        }
        acc.present += t as f64;
        acc.absent += (t_max - t) as f64;
    }
    Ok(acc)
}

/// Detection and weighted false alarm counts for one-hot estimates.
pub fn pd_pf_onehot(counts: &[usize], o_est: &Matrix) -> Result<DetectionCounts> {
    let t_max = o_est.cols().checked_sub(1).ok_or_else(|| invalid("one-hot estimates need at least one column"))?;
    check_rows(counts, o_est, t_max + 1)?;
    let mut acc = DetectionCounts::default();
    for (n, &t) in counts.iter().enumerate() {
        check_count(t, t_max)?;
        let h = onehot_decision(o_est.row(n));
        acc.merge(&DetectionCounts::from_decision(t, h, t_max));
    }
    Ok(acc)
}

/// Shared threshold subtracted from all detector logits.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LogitOffset(pub f64);

impl LogitOffset {
    pub fn value(self) -> f64 {
        self.0
    }
}

fn check_rate(pf: f64) -> Result<()> {
    if !(pf > 0.0 && pf < 1.0) {
        return Err(invalid(format!("false alarm target must lie in (0, 1), got {pf}")));
    }
    Ok(())
}

/// Offset placing the target false alarm rate on the zero-labeled logits.
///
/// With the logits sorted ascending and `X` of them, the offset is the entry
/// at zero-based index `floor((1 - pf) X)`. Returns `None` for an empty set,
/// in which case the caller keeps its previous offset.
pub fn calibrate_offset(zero_logits: &[f64], pf: f64) -> Result<Option<LogitOffset>> {
    Ok(calibration_index(zero_logits, pf)?.map(|i| LogitOffset(zero_logits[i])))
}

/// Position in `zero_logits` of the logit that [`calibrate_offset`] selects.
pub fn calibration_index(zero_logits: &[f64], pf: f64) -> Result<Option<usize>> {
    check_rate(pf)?;
    if zero_logits.is_empty() {
        return Ok(None);
    }
    if let Some(v) = zero_logits.iter().find(|v| !v.is_finite()) {
        return Err(invalid(format!("non-finite logit {v} in calibration set")));
    }
    let x = zero_logits.len();
    let rank = (((1.0 - pf) * x as f64) as usize).min(x - 1);
    let mut order: Vec<usize> = (0..x).collect();
    order.select_nth_unstable_by(rank, |&a, &b| zero_logits[a].total_cmp(&zero_logits[b]).then(a.cmp(&b)));
    Ok(Some(order[rank]))
}

/// Whether probabilities feed the training loss or a frozen evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OffsetMode {
    Train,
    /// Rows are additionally sorted descending.
    Validate,
}

/// `sigmoid(logit - offset)` element-wise.
pub fn apply_offset(logits: &Matrix, offset: LogitOffset, mode: OffsetMode) -> Matrix {
    let mut p = logits.map(|l| sigmoid(l - offset.0));
    if mode == OffsetMode::Validate {
        for n in 0..p.rows() {
            sort_descending(p.row_mut(n));
        }
    }
    p
}

/// Soft weighted false alarm rate of one-hot probabilities, without hard
/// decisions. `None` when no slot was empty.
pub fn soft_pf_onehot(counts: &[usize], o_est: &Matrix) -> Result<Option<f64>> {
    let (num, den) = soft_pf_parts(counts, o_est)?;
    Ok((den > 0.0).then(|| num / den))
}

/// Numerator and denominator of [`soft_pf_onehot`], for pooling batches.
pub fn soft_pf_parts(counts: &[usize], o_est: &Matrix) -> Result<(f64, f64)> {
    let t_max = o_est.cols().checked_sub(1).ok_or_else(|| invalid("one-hot estimates need at least one column"))?;
    check_rows(counts, o_est, t_max + 1)?;
    let mut num = 0.0;
    let mut den = 0.0;
    for (n, &t) in counts.iter().enumerate() {
        check_count(t, t_max)?;
        let row = o_est.row(n);
        for (k, &p) in row.iter().enumerate().skip(t + 1) {
            num += p * (k - t) as f64;
        }
        den += (t_max - t) as f64;
    }
    Ok((num, den))
}

/// Additive probability shift `(target - measured) [1, -1/T_max, ...]`.
pub fn onehot_offset_vector(measured_pf: f64, target_pf: f64, t_max: usize) -> Vec<f64> {
    let d = target_pf - measured_pf;
    let mut v = vec![-d / t_max.max(1) as f64; t_max + 1];
    v[0] = d;
    v
}

/// One-hot probabilities after the false alarm offset and clipping.
#[derive(Debug, Clone, PartialEq)]
pub struct OneHotAdjusted {
    pub probs: Matrix,
    /// Entries that were clipped to 0 or 1 and therefore pass no gradient.
    pub clipped: Vec<bool>,
}

/// Adds `shift` to every row of `o_est` and clips the result to `[0, 1]`.
pub fn shift_onehot(o_est: &Matrix, shift: &[f64]) -> Result<OneHotAdjusted> {
    if shift.len() != o_est.cols() {
        return Err(shape(format!("{} shift entries", o_est.cols()), format!("{}", shift.len())));
    }
    let mut probs = o_est.clone();
    let mut clipped = vec![false; probs.as_slice().len()];
    let cols = o_est.cols();
    for (i, p) in probs.as_mut_slice().iter_mut().enumerate() {
        let v = *p + shift[i % cols];
        if v < 0.0 {
            *p = 0.0;
            clipped[i] = true;
        } else if v > 1.0 {
            *p = 1.0;
            clipped[i] = true;
        } else {
            *p = v;
        }
    }
    Ok(OneHotAdjusted { probs, clipped })
}

/// Moves one-hot probabilities by the offset derived from the measured soft
/// false alarm rate. Returns the adjusted rows and the applied shift.
pub fn onehot_pf_offset(
    counts: &[usize],
    o_est: &Matrix,
    target_pf: f64,
) -> Result<(OneHotAdjusted, Vec<f64>)> {
    check_rate(target_pf)?;
    let t_max = o_est.cols().saturating_sub(1);
    let shift = match soft_pf_onehot(counts, o_est)? {
        Some(measured) => onehot_offset_vector(measured, target_pf, t_max),
        None => vec![0.0; t_max + 1],
    };
    let adjusted = shift_onehot(o_est, &shift)?;
    Ok((adjusted, shift))
}
