//! Fully connected networks.
//!
//! Parameters live in one flat buffer. Layer `l` maps `widths[l]` inputs to
//! `widths[l + 1]` outputs and stores its weight matrix row-major as
//! `fan_in x fan_out`, followed by `fan_out` biases. Hidden layers apply the
//! hidden activation, the last layer applies the output transform.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::FRAC_PI_2;

use rand::Rng;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{invalid, shape, Error, Result};
use crate::numerics::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    /// `x` for `x >= 0`, `exp(x) - 1` otherwise.
    Elu,
    Identity,
}

impl Activation {
    pub fn tag(self) -> u8 {
        match self {
            Activation::Elu => 0,
            Activation::Identity => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Activation::Elu),
            1 => Some(Activation::Identity),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputTransform {
    Identity,
    /// Divides the whole batch by `sqrt(mean over rows of ||row||^2)`.
    MeanPowerNorm,
    /// Scales every row to unit Euclidean norm.
    PowerNorm,
    Softmax,
    Sigmoid,
    /// `(pi / 2) * tanh(x)`.
    ScaledTanh,
}

impl OutputTransform {
    pub fn tag(self) -> u8 {
        match self {
            OutputTransform::Identity => 0,
            OutputTransform::MeanPowerNorm => 1,
            OutputTransform::PowerNorm => 2,
            OutputTransform::Softmax => 3,
            OutputTransform::Sigmoid => 4,
            OutputTransform::ScaledTanh => 5,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Some(match tag {
            0 => OutputTransform::Identity,
            1 => OutputTransform::MeanPowerNorm,
            2 => OutputTransform::PowerNorm,
            3 => OutputTransform::Softmax,
            4 => OutputTransform::Sigmoid,
            5 => OutputTransform::ScaledTanh,
            _ => return None,
        })
    }

    pub fn forward(self, x: &Matrix) -> Matrix {
        match self {
            OutputTransform::Identity => x.clone(),
            OutputTransform::Sigmoid => x.map(sigmoid),
            OutputTransform::ScaledTanh => x.map(scaled_tanh),
            OutputTransform::Softmax => {
                let mut y = x.clone();
                for r in 0..y.rows() {
                    softmax_in_place(y.row_mut(r));
                }
                y
            }
            OutputTransform::PowerNorm => {
                let mut y = x.clone();
                for r in 0..y.rows() {
                    let row = y.row_mut(r);
                    let n = row.iter().map(|v| v * v).sum::<f64>().sqrt();
                    if n > 0.0 {
                        row.iter_mut().for_each(|v| *v /= n);
                    }
                }
                y
            }
            OutputTransform::MeanPowerNorm => {
                let s = mean_power_scale(x);
                if s > 0.0 {
                    x.map(|v| v / s)
                } else {
                    x.clone()
                }
            }
        }
    }

    pub fn backward(self, x: &Matrix, y: &Matrix, g: &Matrix) -> Matrix {
        match self {
            OutputTransform::Identity => g.clone(),
            OutputTransform::Sigmoid => {
                let mut d = g.clone();
                for (dv, yv) in d.as_mut_slice().iter_mut().zip(y.as_slice()) {
                    *dv *= yv * (1.0 - yv);
                }
                d
            }
            OutputTransform::ScaledTanh => {
                let mut d = g.clone();
                for (dv, yv) in d.as_mut_slice().iter_mut().zip(y.as_slice()) {
                    let t = yv / FRAC_PI_2;
                    *dv *= FRAC_PI_2 * (1.0 - t * t);
                }
                d
            }
            OutputTransform::Softmax => {
                let mut d = g.clone();
                for r in 0..d.rows() {
                    let p = y.row(r);
                    let dot: f64 = g.row(r).iter().zip(p).map(|(a, b)| a * b).sum();
                    for (dv, pv) in d.row_mut(r).iter_mut().zip(p) {
                        *dv = pv * (*dv - dot);
                    }
                }
                d
            }
            OutputTransform::PowerNorm => {
                let mut d = g.clone();
                for r in 0..d.rows() {
                    let xr = x.row(r);
                    let n2: f64 = xr.iter().map(|v| v * v).sum();
                    if n2 == 0.0 {
                        continue;
                    }
                    let n = n2.sqrt();
                    let dot: f64 = g.row(r).iter().zip(xr).map(|(a, b)| a * b).sum();
                    for (dv, xv) in d.row_mut(r).iter_mut().zip(xr) {
                        *dv = *dv / n - xv * dot / (n2 * n);
                    }
                }
                d
            }
            OutputTransform::MeanPowerNorm => {
                let s = mean_power_scale(x);
                if s == 0.0 {
                    return g.clone();
                }
                let rows = x.rows() as f64;
                let dot: f64 = g.as_slice().iter().zip(x.as_slice()).map(|(a, b)| a * b).sum();
                let mut d = g.clone();
                for (dv, xv) in d.as_mut_slice().iter_mut().zip(x.as_slice()) {
                    *dv = *dv / s - xv * dot / (rows * s * s * s);
                }
                d
            }
        }
    }
}

fn mean_power_scale(x: &Matrix) -> f64 {
    if x.rows() == 0 {
        return 0.0;
    }
    (x.as_slice().iter().map(|v| v * v).sum::<f64>() / x.rows() as f64).sqrt()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// Largest `|tanh|` kept so that angle outputs stay strictly inside `+-pi/2`.
const TANH_LIMIT: f64 = 1.0 - 1e-15;

fn scaled_tanh(x: f64) -> f64 {
    FRAC_PI_2 * x.tanh().clamp(-TANH_LIMIT, TANH_LIMIT)
}

fn elu(x: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        x.exp_m1()
    }
}

#[derive(Debug, Clone)]
enum Node {
    Affine { layer: usize, input: Matrix },
    Activation { output: Matrix },
    Output { transform: OutputTransform, input: Matrix, output: Matrix },
}

/// Record of one forward pass, consumed by [`MlpNet::backward`].
#[derive(Debug, Clone, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn clear(&mut self) {
        self.nodes.clear();
    }
}

/// Dense network with one hidden activation and an output transform.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpNet {
    widths: Vec<usize>,
    hidden: Activation,
    output: OutputTransform,
    params: Vec<f64>,
}

impl MlpNet {
    /// Network with all parameters zero.
    pub fn new(widths: &[usize], hidden: Activation, output: OutputTransform) -> Result<Self> {
        if widths.len() < 2 {
            return Err(invalid("a network needs at least an input and an output width"));
        }
        if widths.iter().any(|&w| w == 0) {
            return Err(invalid(format!("layer widths must be positive: {widths:?}")));
        }
        let count = param_count(widths);
        Ok(Self {
            widths: widths.to_vec(),
            hidden,
            output,
            params: vec![0.0; count],
        })
    }

    /// Glorot-uniform weights in `+-sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn glorot<R: Rng + ?Sized>(
        widths: &[usize],
        hidden: Activation,
        output: OutputTransform,
        rng: &mut R,
    ) -> Result<Self> {
        let mut net = Self::new(widths, hidden, output)?;
        for l in 0..net.layer_count() {
            let (w_off, _, fan_in, fan_out) = net.layer_layout(l);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for w in &mut net.params[w_off..w_off + fan_in * fan_out] {
                *w = limit * (2.0 * rng.random::<f64>() - 1.0);
            }
        }
        Ok(net)
    }

    pub fn from_params(widths: &[usize], hidden: Activation, output: OutputTransform, params: Vec<f64>) -> Result<Self> {
        let mut net = Self::new(widths, hidden, output)?;
        if params.len() != net.params.len() {
            return Err(shape(format!("{} parameters", net.params.len()), format!("{}", params.len())));
        }
        net.params = params;
        Ok(net)
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden
    }

    pub fn output_transform(&self) -> OutputTransform {
        self.output
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn input_width(&self) -> usize {
        self.widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.widths.last().unwrap_or(&0)
    }

    pub fn layer_count(&self) -> usize {
        self.widths.len() - 1
    }

    /// `(weight offset, bias offset, fan_in, fan_out)` of layer `l`.
    pub fn layer_layout(&self, l: usize) -> (usize, usize, usize, usize) {
        let off: usize = (0..l).map(|i| self.widths[i] * self.widths[i + 1] + self.widths[i + 1]).sum();
        let (fi, fo) = (self.widths[l], self.widths[l + 1]);
        (off, off + fi * fo, fi, fo)
    }

    /// Forward pass including the output transform, recorded on `tape`.
    pub fn forward(&self, input: &Matrix, tape: &mut Tape) -> Result<Matrix> {
        self.run(input, Some(tape), true)
    }

    /// Forward pass that stops before the output transform.
    pub fn forward_logits(&self, input: &Matrix, tape: &mut Tape) -> Result<Matrix> {
        self.run(input, Some(tape), false)
    }

    /// Forward pass without recording.
    pub fn predict(&self, input: &Matrix) -> Result<Matrix> {
        self.run(input, None, true)
    }

    pub fn predict_logits(&self, input: &Matrix) -> Result<Matrix> {
        self.run(input, None, false)
    }

    fn run(&self, input: &Matrix, mut tape: Option<&mut Tape>, transform: bool) -> Result<Matrix> {
        if input.cols() != self.input_width() {
            return Err(shape(
                format!("input width {}", self.input_width()),
                format!("{}", input.cols()),
            ));
        }
        if let Some(t) = tape.as_deref_mut() {
            t.clear();
        }
        let last = self.layer_count() - 1;
        let mut x = input.clone();
        for l in 0..self.layer_count() {
            let y = self.affine(l, &x);
            let y = if l < last && self.hidden == Activation::Elu {
                let a = y.map(elu);
                if let Some(t) = tape.as_deref_mut() {
                    t.nodes.push(Node::Affine { layer: l, input: x });
                    t.nodes.push(Node::Activation { output: a.clone() });
                }
                a
            } else {
                if let Some(t) = tape.as_deref_mut() {
                    t.nodes.push(Node::Affine { layer: l, input: x });
                }
                y
            };
            x = y;
        }
        if transform && self.output != OutputTransform::Identity {
            let y = self.output.forward(&x);
            if let Some(t) = tape.as_deref_mut() {
                t.nodes.push(Node::Output {
                    transform: self.output,
                    input: x,
                    output: y.clone(),
                });
            }
            x = y;
        }
        Ok(x)
    }

    fn affine(&self, l: usize, x: &Matrix) -> Matrix {
        let (w_off, b_off, fi, fo) = self.layer_layout(l);
        let w = &self.params[w_off..w_off + fi * fo];
        let b = &self.params[b_off..b_off + fo];
        let mut y = Matrix::zeros(x.rows(), fo);
        for r in 0..x.rows() {
            let out = y.row_mut(r);
            out.copy_from_slice(b);
            for (i, &xi) in x.row(r).iter().enumerate() {
                if xi == 0.0 {
                    continue;
                }
                for (o, wv) in out.iter_mut().zip(&w[i * fo..(i + 1) * fo]) {
                    *o += xi * wv;
                }
            }
        }
        y
    }

    /// Reverse pass over `tape`. Parameter gradients are added to `grads`;
    /// the gradient with respect to the network input is returned.
    pub fn backward_into(&self, tape: &mut Tape, grad_output: &Matrix, grads: &mut [f64]) -> Result<Matrix> {
        if tape.is_empty() {
            return Err(Error::State("backward called without a recorded forward pass".into()));
        }
        if grads.len() != self.params.len() {
            return Err(shape(format!("{} gradient slots", self.params.len()), format!("{}", grads.len())));
        }
        let nodes = core::mem::take(&mut tape.nodes);
        let mut g = grad_output.clone();
        for node in nodes.into_iter().rev() {
            g = match node {
                Node::Output { transform, input, output } => {
                    if g.rows() != output.rows() || g.cols() != output.cols() {
                        return Err(shape(
                            format!("{}x{} output gradient", output.rows(), output.cols()),
                            format!("{}x{}", g.rows(), g.cols()),
                        ));
                    }
                    transform.backward(&input, &output, &g)
                }
                Node::Activation { output } => {
                    if g.rows() != output.rows() || g.cols() != output.cols() {
                        return Err(shape(
                            format!("{}x{} gradient", output.rows(), output.cols()),
                            format!("{}x{}", g.rows(), g.cols()),
                        ));
                    }
                    for (gv, yv) in g.as_mut_slice().iter_mut().zip(output.as_slice()) {
                        if *yv < 0.0 {
                            *gv *= yv + 1.0;
                        }
                    }
                    g
                }
                Node::Affine { layer, input } => self.affine_backward(layer, &input, &g, grads)?,
            };
        }
        Ok(g)
    }

    /// Like [`MlpNet::backward_into`] but returns fresh parameter gradients.
    pub fn backward(&self, tape: &mut Tape, grad_output: &Matrix) -> Result<(Vec<f64>, Matrix)> {
        let mut grads = vec![0.0; self.params.len()];
        let gi = self.backward_into(tape, grad_output, &mut grads)?;
        Ok((grads, gi))
    }

    fn affine_backward(&self, l: usize, x: &Matrix, g: &Matrix, grads: &mut [f64]) -> Result<Matrix> {
        let (w_off, b_off, fi, fo) = self.layer_layout(l);
        if g.cols() != fo || g.rows() != x.rows() {
            return Err(shape(format!("{}x{fo} gradient", x.rows()), format!("{}x{}", g.rows(), g.cols())));
        }
        let w = &self.params[w_off..w_off + fi * fo];
        let mut dx = Matrix::zeros(x.rows(), fi);
        let (dw, rest) = grads[w_off..].split_at_mut(fi * fo);
        let db = &mut rest[..fo];
        for r in 0..x.rows() {
            let gr = g.row(r);
            for (d, gv) in db.iter_mut().zip(gr) {
                *d += gv;
            }
            let xr = x.row(r);
            let dxr = dx.row_mut(r);
            for i in 0..fi {
                let wi = &w[i * fo..(i + 1) * fo];
                dxr[i] = gr.iter().zip(wi).map(|(a, b)| a * b).sum();
                let xi = xr[i];
                if xi != 0.0 {
                    for (d, gv) in dw[i * fo..(i + 1) * fo].iter_mut().zip(gr) {
                        *d += xi * gv;
                    }
                }
            }
        }
        debug_assert_eq!(b_off, w_off + fi * fo);
        Ok(dx)
    }
}

/// `sum_i (w_i * w_{i+1} + w_{i+1})`.
pub fn param_count(widths: &[usize]) -> usize {
    widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}
