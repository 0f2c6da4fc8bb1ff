//! Pairing of true and estimated target angles.
//!
//! The estimator returns an unordered set of angles, so the loss and the
//! error metrics first decide which estimate belongs to which target.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{shape, Result};

/// Rule that resolves the ordering ambiguity between truth and estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SetMethod {
    /// Identity pairing.
    None,
    /// Truth sorted ascending, estimate untouched.
    SortInput,
    /// Both vectors sorted ascending.
    SortAll,
    /// Estimate reordered to minimize the squared error.
    #[default]
    Permute,
}

impl SetMethod {
    pub const ALL: [SetMethod; 4] = [SetMethod::None, SetMethod::SortInput, SetMethod::SortAll, SetMethod::Permute];

    pub fn name(self) -> &'static str {
        match self {
            SetMethod::None => "none",
            SetMethod::SortInput => "sortinput",
            SetMethod::SortAll => "sortall",
            SetMethod::Permute => "permute",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        SetMethod::ALL.into_iter().find(|m| m.name() == s)
    }

    pub fn apply(self, pair: &AnglePair) -> AnglePair {
        match self {
            SetMethod::None => pair.clone(),
            SetMethod::SortInput => sortinput(pair),
            SetMethod::SortAll => sortall(pair),
            SetMethod::Permute => permute_match(pair),
        }
    }
}

/// True and estimated angles of the targets present in one sample.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AnglePair {
    pub truth: Vec<f64>,
    pub estimate: Vec<f64>,
}

impl AnglePair {
    pub fn new(truth: Vec<f64>, estimate: Vec<f64>) -> Result<Self> {
        if truth.len() != estimate.len() {
            return Err(shape(format!("{} estimates", truth.len()), format!("{}", estimate.len())));
        }
        Ok(Self { truth, estimate })
    }

    pub fn len(&self) -> usize {
        self.truth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.truth.is_empty()
    }
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    s
}

pub fn sortinput(pair: &AnglePair) -> AnglePair {
    AnglePair {
        truth: sorted(&pair.truth),
        estimate: pair.estimate.clone(),
    }
}

pub fn sortall(pair: &AnglePair) -> AnglePair {
    AnglePair {
        truth: sorted(&pair.truth),
        estimate: sorted(&pair.estimate),
    }
}

pub fn permute_match(pair: &AnglePair) -> AnglePair {
    let perm = best_permutation(&pair.truth, &pair.estimate);
    AnglePair {
        truth: pair.truth.clone(),
        estimate: perm.iter().map(|&j| pair.estimate[j]).collect(),
    }
}

/// Sum of squared differences over the common prefix.
fn sse(truth: &[f64], estimate: &[f64]) -> f64 {
    truth.iter().zip(estimate).map(|(t, e)| (t - e) * (t - e)).sum()
}

/// Mean squared difference, `None` for an empty pair.
pub fn pair_mse(pair: &AnglePair) -> Option<f64> {
    (!pair.is_empty()).then(|| sse(&pair.truth, &pair.estimate) / pair.len() as f64)
}

/// Advances `p` to the next permutation in lexicographic order.
fn next_permutation(p: &mut [usize]) -> bool {
    if p.len() < 2 {
        return false;
    }
    let mut i = p.len() - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = p.len() - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// Permutation `perm` minimizing `sum (truth[i] - estimate[perm[i]])^2`.
///
/// Enumerates all `T!` orderings; ties go to the lexicographically smallest.
pub fn best_permutation(truth: &[f64], estimate: &[f64]) -> Vec<usize> {
    let n = truth.len().min(estimate.len());
    let mut p: Vec<usize> = (0..n).collect();
    let mut best = p.clone();
    let mut best_cost = f64::INFINITY;
    loop {
        let cost: f64 = p.iter().enumerate().map(|(i, &j)| (truth[i] - estimate[j]) * (truth[i] - estimate[j])).sum();
        if cost < best_cost {
            best_cost = cost;
            best.copy_from_slice(&p);
        }
        if !next_permutation(&mut p) {
            break;
        }
    }
    best
}

/// Target value for each estimate slot after applying `method`.
///
/// The returned vector has the length of `truth`; slot `i` of the estimate is
/// compared against entry `i` of the result, which keeps gradients attached
/// to the original estimator outputs.
pub fn slot_targets(method: SetMethod, truth: &[f64], estimate: &[f64]) -> Result<Vec<f64>> {
    if truth.len() != estimate.len() {
        return Err(shape(format!("{} estimates", truth.len()), format!("{}", estimate.len())));
    }
    Ok(match method {
        SetMethod::None => truth.to_vec(),
        SetMethod::SortInput => sorted(truth),
        SetMethod::SortAll => {
            let st = sorted(truth);
            let mut order: Vec<usize> = (0..estimate.len()).collect();
            order.sort_by(|&a, &b| estimate[a].total_cmp(&estimate[b]));
            let mut out = alloc::vec![0.0; truth.len()];
            for (rank, &slot) in order.iter().enumerate() {
                out[slot] = st[rank];
            }
            out
        }
        SetMethod::Permute => {
            let perm = best_permutation(truth, estimate);
            let mut out = alloc::vec![0.0; truth.len()];
            for (i, &slot) in perm.iter().enumerate() {
                out[slot] = truth[i];
            }
            out
        }
    })
}

/// Minimum squared-error pairing between sets of possibly different size.
///
/// Returns `min(truth.len(), estimate.len())` pairs `(truth index, estimate
/// index)` with every index used at most once.
pub fn match_subset(truth: &[f64], estimate: &[f64]) -> Vec<(usize, usize)> {
    let (small, large, swapped) = if truth.len() <= estimate.len() {
        (truth, estimate, false)
    } else {
        (estimate, truth, true)
    };
    let k = small.len();
    if k == 0 {
        return Vec::new();
    }
    let mut best: Vec<usize> = Vec::new();
    let mut best_cost = f64::INFINITY;
    let mut current: Vec<usize> = Vec::with_capacity(k);
    let mut used = alloc::vec![false; large.len()];
    search(small, large, &mut current, &mut used, 0.0, &mut best, &mut best_cost);
    best.iter()
        .enumerate()
        .map(|(i, &j)| if swapped { (j, i) } else { (i, j) })
        .collect()
}

fn search(
    small: &[f64],
    large: &[f64],
    current: &mut Vec<usize>,
    used: &mut [bool],
    cost: f64,
    best: &mut Vec<usize>,
    best_cost: &mut f64,
) {
    let i = current.len();
    if i == small.len() {
        if cost < *best_cost {
            *best_cost = cost;
            best.clone_from(current);
        }
        return;
    }
    for j in 0..large.len() {
        if used[j] {
            continue;
        }
        let d = small[i] - large[j];
        used[j] = true;
        current.push(j);
        search(small, large, current, used, cost + d * d, best, best_cost);
        current.pop();
        used[j] = false;
    }
}
