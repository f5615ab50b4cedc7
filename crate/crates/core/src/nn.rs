//! A small feed-forward network: dense layers with ReLU and inverted dropout
//! on every hidden layer, a linear output with a regression or softmax
//! head, Adam, and Monte-Carlo dropout prediction.

use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::codec::{Reader, Writer};
use crate::error::{Error, Result};

/// Hidden widths used by the environment model and the forecaster.
pub const DEFAULT_HIDDEN: [usize; 2] = [128, 64];
pub const DEFAULT_LEARNING_RATE: f64 = 0.001;
pub const DEFAULT_MC_SAMPLES: usize = 10;

const MAGIC: &[u8; 4] = b"PDNN";
const FORMAT_VERSION: u32 = 1;

/// Output transform and the loss it is trained with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Head {
    /// Identity output, mean squared error.
    Regression,
    /// Softmax output, cross-entropy against a target distribution.
    Softmax,
    /// Softmax output, mean squared error against a one-hot target.
    SoftmaxMse,
}

impl Head {
    fn tag(self) -> u8 {
        match self {
            Head::Regression => 0,
            Head::Softmax => 1,
            Head::SoftmaxMse => 2,
        }
    }

    fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(Head::Regression),
            1 => Ok(Head::Softmax),
            2 => Ok(Head::SoftmaxMse),
            t => Err(Error::Format(format!("unknown head tag {t}"))),
        }
    }

    pub fn is_categorical(self) -> bool {
        !matches!(self, Head::Regression)
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Dense {
    inputs: usize,
    outputs: usize,
    /// Row-major `[outputs × inputs]`.
    weights: Vec<f64>,
    biases: Vec<f64>,
}

impl Dense {
    fn glorot<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        let weights = (0..inputs * outputs)
            .map(|_| rng.gen_range(-limit..=limit))
            .collect();
        Self {
            inputs,
            outputs,
            weights,
            biases: vec![0.0; outputs],
        }
    }

    fn forward_into(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            self.weights
                .chunks_exact(self.inputs)
                .zip(&self.biases)
                .map(|(row, b)| row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>() + b),
        );
    }

    fn param_count(&self) -> usize {
        self.weights.len() + self.biases.len()
    }
}

/// Gradients laid out like the network's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    layers: Vec<(Vec<f64>, Vec<f64>)>,
}

impl Gradients {
    fn zeros_like(net: &Network) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| (vec![0.0; l.weights.len()], vec![0.0; l.biases.len()]))
                .collect(),
        }
    }

    /// Flattened in the same order as [`Network::param`].
    pub fn flatten(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|(w, b)| w.iter().chain(b.iter()).copied())
            .collect()
    }
}

/// Per-output mean and variance over Monte-Carlo dropout passes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<Dense>,
    dropout: f64,
    head: Head,
}

/// Activations kept for backpropagation.
struct Trace {
    /// Input to each layer (post-dropout for hidden layers).
    inputs: Vec<Vec<f64>>,
    /// Pre-activation of each hidden layer.
    hidden_pre: Vec<Vec<f64>>,
    /// Dropout scale per hidden unit (0 or 1/keep), empty when inactive.
    masks: Vec<Vec<f64>>,
    output: Vec<f64>,
}

impl Network {
    /// `sizes` lists every layer width from input to output; all layers
    /// but the last are hidden.
    pub fn new<R: Rng + ?Sized>(
        sizes: &[usize],
        dropout: f64,
        head: Head,
        rng: &mut R,
    ) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::Config(format!("invalid layer sizes {sizes:?}")));
        }
        if !(0.0..1.0).contains(&dropout) {
            return Err(Error::Config(format!(
                "dropout must lie in [0, 1), got {dropout}"
            )));
        }
        let layers = sizes
            .windows(2)
            .map(|w| Dense::glorot(w[0], w[1], rng))
            .collect();
        Ok(Self {
            layers,
            dropout,
            head,
        })
    }

    /// Input → 128 → 64 → output.
    pub fn standard<R: Rng + ?Sized>(
        inputs: usize,
        outputs: usize,
        dropout: f64,
        head: Head,
        rng: &mut R,
    ) -> Result<Self> {
        Self::new(
            &[inputs, DEFAULT_HIDDEN[0], DEFAULT_HIDDEN[1], outputs],
            dropout,
            head,
            rng,
        )
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.outputs)
    }

    pub fn sizes(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(|l| l.outputs))
            .collect()
    }

    pub fn dropout(&self) -> f64 {
        self.dropout
    }

    pub fn head(&self) -> Head {
        self.head
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Dense::param_count).sum()
    }

    fn locate(&self, mut index: usize) -> (usize, bool, usize) {
        for (l, layer) in self.layers.iter().enumerate() {
            if index < layer.weights.len() {
                return (l, true, index);
            }
            index -= layer.weights.len();
            if index < layer.biases.len() {
                return (l, false, index);
            }
            index -= layer.biases.len();
        }
        panic!("parameter index out of range");
    }

    /// Parameter by flat index: each layer's weights then its biases.
    pub fn param(&self, index: usize) -> f64 {
        match self.locate(index) {
            (l, true, i) => self.layers[l].weights[i],
            (l, false, i) => self.layers[l].biases[i],
        }
    }

    pub fn set_param(&mut self, index: usize, value: f64) {
        match self.locate(index) {
            (l, true, i) => self.layers[l].weights[i] = value,
            (l, false, i) => self.layers[l].biases[i] = value,
        }
    }

    /// Flat index range of layer `layer`'s parameters.
    pub fn layer_param_range(&self, layer: usize) -> std::ops::Range<usize> {
        let start: usize = self.layers[..layer].iter().map(Dense::param_count).sum();
        start..start + self.layers[layer].param_count()
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.biases).all(|v| v.is_finite()))
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.input_dim() {
            return Err(Error::Dimension {
                expected: self.input_dim(),
                actual: input.len(),
            });
        }
        Ok(())
    }

    fn trace<R: Rng + ?Sized>(&self, input: &[f64], dropout_rng: Option<&mut R>) -> Trace {
        let hidden = self.layers.len() - 1;
        let mut trace = Trace {
            inputs: Vec::with_capacity(self.layers.len()),
            hidden_pre: Vec::with_capacity(hidden),
            masks: Vec::with_capacity(hidden),
            output: Vec::new(),
        };
        let keep = 1.0 - self.dropout;
        let mut rng = dropout_rng.filter(|_| self.dropout > 0.0);
        let mut current = input.to_vec();
        for layer in &self.layers[..hidden] {
            let mut pre = Vec::with_capacity(layer.outputs);
            layer.forward_into(&current, &mut pre);
            let mut act: Vec<f64> = pre.iter().map(|z| z.max(0.0)).collect();
            let mask: Vec<f64> = match rng.as_deref_mut() {
                Some(r) => (0..layer.outputs)
                    .map(|_| {
                        if r.gen::<f64>() < keep {
                            1.0 / keep
                        } else {
                            0.0
                        }
                    })
                    .collect(),
                None => Vec::new(),
            };
            if !mask.is_empty() {
                act.iter_mut().zip(&mask).for_each(|(a, m)| *a *= m);
            }
            trace.inputs.push(std::mem::replace(&mut current, act));
            trace.hidden_pre.push(pre);
            trace.masks.push(mask);
        }
        let last = &self.layers[hidden];
        let mut out = Vec::with_capacity(last.outputs);
        last.forward_into(&current, &mut out);
        trace.inputs.push(current);
        if self.head.is_categorical() {
            softmax_in_place(&mut out);
        }
        trace.output = out;
        trace
    }

    /// Forward pass. With `training` set and a positive dropout rate, fresh
    /// dropout masks are drawn from `rng`; otherwise `rng` is untouched.
    pub fn forward<R: Rng + ?Sized>(
        &self,
        input: &[f64],
        training: bool,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        self.check_input(input)?;
        let rng = if training { Some(rng) } else { None };
        Ok(self.trace(input, rng).output)
    }

    /// Deterministic pass without dropout.
    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input)?;
        Ok(self.trace::<rand::rngs::mock::StepRng>(input, None).output)
    }

    /// Output before the head transform (logits for softmax heads).
    pub fn forward_logits(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input)?;
        let mut current = input.to_vec();
        let mut next = Vec::new();
        let hidden = self.layers.len() - 1;
        for layer in &self.layers[..hidden] {
            layer.forward_into(&current, &mut next);
            next.iter_mut().for_each(|z| *z = z.max(0.0));
            std::mem::swap(&mut current, &mut next);
        }
        self.layers[hidden].forward_into(&current, &mut next);
        Ok(next)
    }

    /// Mean and per-output variance of `samples` dropout passes. Without
    /// dropout, or with one sample, this is the plain forward output with
    /// zero variance.
    pub fn mc_predict<R: Rng + ?Sized>(
        &self,
        input: &[f64],
        samples: usize,
        rng: &mut R,
    ) -> Result<Prediction> {
        self.check_input(input)?;
        if samples == 0 {
            return Err(Error::domain("mc_predict needs at least one sample"));
        }
        let k = self.output_dim();
        let mut mean = vec![0.0; k];
        let mut m2 = vec![0.0; k];
        for n in 1..=samples {
            let y = self.trace(input, Some(&mut *rng)).output;
            // Welford keeps identical passes exactly at zero variance.
            for j in 0..k {
                let delta = y[j] - mean[j];
                mean[j] += delta / n as f64;
                m2[j] += delta * (y[j] - mean[j]);
            }
        }
        let variance = m2
            .into_iter()
            .map(|v| (v / samples as f64).max(0.0))
            .collect();
        Ok(Prediction { mean, variance })
    }

    fn check_batch(&self, inputs: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<()> {
        if inputs.is_empty() {
            return Err(Error::domain("empty batch"));
        }
        if inputs.len() != targets.len() {
            return Err(Error::Dimension {
                expected: inputs.len(),
                actual: targets.len(),
            });
        }
        for (x, t) in inputs.iter().zip(targets) {
            self.check_input(x)?;
            if t.len() != self.output_dim() {
                return Err(Error::Dimension {
                    expected: self.output_dim(),
                    actual: t.len(),
                });
            }
        }
        Ok(())
    }

    fn sample_loss(&self, output: &[f64], target: &[f64], batch: usize) -> f64 {
        let k = output.len() as f64;
        let b = batch as f64;
        match self.head {
            Head::Regression | Head::SoftmaxMse => {
                output
                    .iter()
                    .zip(target)
                    .map(|(y, t)| (y - t).powi(2))
                    .sum::<f64>()
                    / (k * b)
            }
            Head::Softmax => {
                -output
                    .iter()
                    .zip(target)
                    .filter(|(_, t)| **t != 0.0)
                    .map(|(p, t)| t * p.max(f64::MIN_POSITIVE).ln())
                    .sum::<f64>()
                    / b
            }
        }
    }

    /// Batch loss with dropout masks drawn from `rng` when the network has
    /// dropout. Drawing order matches [`loss_and_gradient`](Self::loss_and_gradient),
    /// so equal rng states give equal masks.
    pub fn loss<R: Rng + ?Sized>(
        &self,
        inputs: &[Vec<f64>],
        targets: &[Vec<f64>],
        rng: &mut R,
    ) -> Result<f64> {
        self.check_batch(inputs, targets)?;
        Ok(inputs
            .iter()
            .zip(targets)
            .map(|(x, t)| {
                let tr = self.trace(x, Some(&mut *rng));
                self.sample_loss(&tr.output, t, inputs.len())
            })
            .sum())
    }

    /// Batch loss and its gradient with respect to every parameter.
    pub fn loss_and_gradient<R: Rng + ?Sized>(
        &self,
        inputs: &[Vec<f64>],
        targets: &[Vec<f64>],
        rng: &mut R,
    ) -> Result<(f64, Gradients)> {
        self.check_batch(inputs, targets)?;
        let batch = inputs.len();
        let mut grads = Gradients::zeros_like(self);
        let mut loss = 0.0;
        for (x, t) in inputs.iter().zip(targets) {
            let tr = self.trace(x, Some(&mut *rng));
            loss += self.sample_loss(&tr.output, t, batch);
            let mut delta = self.output_delta(&tr.output, t, batch);
            for l in (0..self.layers.len()).rev() {
                let layer = &self.layers[l];
                let input = &tr.inputs[l];
                let (gw, gb) = &mut grads.layers[l];
                for (j, d) in delta.iter().enumerate() {
                    gb[j] += d;
                    let row = &mut gw[j * layer.inputs..(j + 1) * layer.inputs];
                    row.iter_mut().zip(input).for_each(|(g, a)| *g += d * a);
                }
                if l == 0 {
                    break;
                }
                // Back through the previous hidden layer's dropout and ReLU.
                let mut upstream = vec![0.0; layer.inputs];
                for (j, d) in delta.iter().enumerate() {
                    let row = &layer.weights[j * layer.inputs..(j + 1) * layer.inputs];
                    upstream.iter_mut().zip(row).for_each(|(u, w)| *u += d * w);
                }
                let pre = &tr.hidden_pre[l - 1];
                let mask = &tr.masks[l - 1];
                for (i, u) in upstream.iter_mut().enumerate() {
                    let m = if mask.is_empty() { 1.0 } else { mask[i] };
                    *u *= if pre[i] > 0.0 { m } else { 0.0 };
                }
                delta = upstream;
            }
        }
        Ok((loss, grads))
    }

    fn output_delta(&self, output: &[f64], target: &[f64], batch: usize) -> Vec<f64> {
        let k = output.len() as f64;
        let b = batch as f64;
        match self.head {
            Head::Regression => output
                .iter()
                .zip(target)
                .map(|(y, t)| 2.0 * (y - t) / (k * b))
                .collect(),
            Head::Softmax => {
                let mass: f64 = target.iter().sum();
                output
                    .iter()
                    .zip(target)
                    .map(|(p, t)| (mass * p - t) / b)
                    .collect()
            }
            Head::SoftmaxMse => {
                let dp: Vec<f64> = output
                    .iter()
                    .zip(target)
                    .map(|(p, t)| 2.0 * (p - t) / (k * b))
                    .collect();
                let dot: f64 = output.iter().zip(&dp).map(|(p, d)| p * d).sum();
                output.iter().zip(&dp).map(|(p, d)| p * (d - dot)).collect()
            }
        }
    }

    /// One Adam step on the batch loss. Returns the loss before the step.
    pub fn train_step<R: Rng + ?Sized>(
        &mut self,
        adam: &mut Adam,
        inputs: &[Vec<f64>],
        targets: &[Vec<f64>],
        rng: &mut R,
    ) -> Result<f64> {
        let (loss, grads) = self.loss_and_gradient(inputs, targets, rng)?;
        if !loss.is_finite() {
            let worst = grads
                .flatten()
                .iter()
                .copied()
                .map(f64::abs)
                .fold(0.0, f64::max);
            return Err(Error::NonFinite(format!(
                "training loss {loss} on a batch of {} (largest |gradient| {worst}, parameters finite: {})",
                inputs.len(),
                self.is_finite()
            )));
        }
        adam.step(self, &grads)?;
        Ok(loss)
    }

    pub(crate) fn write_to<W: Write>(&self, w: &mut Writer<W>) -> Result<()> {
        w.bytes(MAGIC)?;
        w.u32(FORMAT_VERSION)?;
        w.u8(self.head.tag())?;
        w.f64(self.dropout)?;
        let sizes = self.sizes();
        w.u32(sizes.len() as u32)?;
        for s in sizes {
            w.u32(s as u32)?;
        }
        for layer in &self.layers {
            w.f64s(&layer.weights)?;
            w.f64s(&layer.biases)?;
        }
        Ok(())
    }

    pub(crate) fn read_from<R: Read>(r: &mut Reader<R>) -> Result<Self> {
        r.expect(MAGIC)?;
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported network format version {version}"
            )));
        }
        let head = Head::from_tag(r.u8()?)?;
        let dropout = r.f64()?;
        if !(0.0..1.0).contains(&dropout) {
            return Err(Error::Format(format!("dropout {dropout} out of range")));
        }
        let n = r.u32()? as usize;
        if !(2..=64).contains(&n) {
            return Err(Error::Format(format!("{n} layer sizes")));
        }
        let sizes = (0..n)
            .map(|_| r.u32().map(|s| s as usize))
            .collect::<Result<Vec<_>>>()?;
        let mut layers = Vec::with_capacity(n - 1);
        for w in sizes.windows(2) {
            let (inputs, outputs) = (w[0], w[1]);
            let weights = r.f64s(inputs * outputs)?;
            let biases = r.f64s(outputs)?;
            if weights.len() != inputs * outputs || biases.len() != outputs {
                return Err(Error::Format(format!(
                    "layer {inputs}→{outputs} has the wrong parameter count"
                )));
            }
            layers.push(Dense {
                inputs,
                outputs,
                weights,
                biases,
            });
        }
        Ok(Self {
            layers,
            dropout,
            head,
        })
    }

    /// Binary file: magic, version, head, dropout, layer sizes, then each
    /// layer's weights and biases as little-endian `f64`.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = Writer::new(Vec::new());
        self.write_to(&mut w)?;
        std::fs::write(path, w.into_inner()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(&mut Reader::new(bytes.as_slice()))
    }
}

fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    z.iter_mut().for_each(|v| *v /= sum);
}

/// Adam moments for one network.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    first: Vec<f64>,
    second: Vec<f64>,
}

impl Adam {
    pub fn new(net: &Network, learning_rate: f64) -> Self {
        let n = net.param_count();
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            first: vec![0.0; n],
            second: vec![0.0; n],
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, net: &mut Network, grads: &Gradients) -> Result<()> {
        if net.param_count() != self.first.len() {
            return Err(Error::Dimension {
                expected: self.first.len(),
                actual: net.param_count(),
            });
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let mut k = 0;
        for (layer, (gw, gb)) in net.layers.iter_mut().zip(&grads.layers) {
            for (p, g) in layer
                .weights
                .iter_mut()
                .chain(layer.biases.iter_mut())
                .zip(gw.iter().chain(gb))
            {
                let m = &mut self.first[k];
                let v = &mut self.second[k];
                *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                *p -= self.learning_rate * (*m / c1) / ((*v / c2).sqrt() + self.epsilon);
                k += 1;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn zero_network_outputs_zero() {
        let mut net = Network::new(&[3, 4, 2], 0.0, Head::Regression, &mut rng(0)).unwrap();
        for i in 0..net.param_count() {
            net.set_param(i, 0.0);
        }
        assert_eq!(net.predict(&[1.0, -2.0, 3.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(
            net.forward_logits(&[1.0, -2.0, 3.0]).unwrap(),
            vec![0.0, 0.0]
        );
    }

    #[test]
    fn hand_arithmetic() {
        // 1 → 1 hidden (w=2, b=1) → 1 output (w=1, b=0).
        let mut net = Network::new(&[1, 1, 1], 0.0, Head::Regression, &mut rng(0)).unwrap();
        net.set_param(0, 2.0);
        net.set_param(1, 1.0);
        net.set_param(2, 1.0);
        net.set_param(3, 0.0);
        assert_eq!(net.predict(&[3.0]).unwrap(), vec![7.0]);
    }

    #[test]
    fn dimension_mismatch() {
        let net = Network::new(&[3, 4, 2], 0.0, Head::Regression, &mut rng(0)).unwrap();
        assert!(matches!(
            net.predict(&[1.0]),
            Err(Error::Dimension {
                expected: 3,
                actual: 1
            })
        ));
    }

    #[test]
    fn seeded_dropout_is_reproducible() {
        let net = Network::new(&[3, 16, 8, 2], 0.5, Head::Regression, &mut rng(1)).unwrap();
        let x = [0.3, -0.2, 0.9];
        let a = net.forward(&x, true, &mut rng(5)).unwrap();
        let b = net.forward(&x, true, &mut rng(5)).unwrap();
        assert_eq!(a, b);
        let c = net.forward(&x, true, &mut rng(6)).unwrap();
        assert_ne!(a, c);
        // Inference ignores dropout.
        assert_eq!(
            net.forward(&x, false, &mut rng(5)).unwrap(),
            net.predict(&x).unwrap()
        );
    }

    #[test]
    fn softmax_outputs_are_distributions() {
        for head in [Head::Softmax, Head::SoftmaxMse] {
            let net = Network::new(&[4, 8, 11], 0.5, head, &mut rng(2)).unwrap();
            let mut r = rng(3);
            for _ in 0..20 {
                let x: Vec<f64> = (0..4).map(|_| r.gen_range(-3.0..3.0)).collect();
                let p = net.forward(&x, true, &mut r).unwrap();
                assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                assert!(p.iter().all(|&v| v > 0.0));
            }
        }
    }

    #[test]
    fn zero_gradient_step_keeps_parameters() {
        let mut net = Network::new(&[2, 5, 1], 0.0, Head::Regression, &mut rng(4)).unwrap();
        let before = net.clone();
        let mut adam = Adam::new(&net, 0.001);
        let zeros = Gradients::zeros_like(&net);
        adam.step(&mut net, &zeros).unwrap();
        assert_eq!(net, before);
    }

    #[test]
    fn target_at_output_gives_zero_gradient() {
        let mut net = Network::new(&[2, 5, 1], 0.0, Head::Regression, &mut rng(4)).unwrap();
        let x = vec![vec![0.5, -0.5]];
        let t = vec![net.predict(&x[0]).unwrap()];
        let before = net.clone();
        let mut adam = Adam::new(&net, 0.001);
        let loss = net.train_step(&mut adam, &x, &t, &mut rng(0)).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(net, before);
    }

    #[test]
    fn fits_a_line() {
        // A network with no hidden layer is the linear model y = w·x + b.
        let mut net = Network::new(&[1, 1], 0.0, Head::Regression, &mut rng(0)).unwrap();
        net.set_param(0, 0.0);
        let mut adam = Adam::new(&net, 0.05);
        let xs: Vec<Vec<f64>> = (1..=8).map(|i| vec![i as f64 / 8.0]).collect();
        let ys: Vec<Vec<f64>> = xs.iter().map(|x| vec![2.0 * x[0]]).collect();
        for _ in 0..500 {
            net.train_step(&mut adam, &xs, &ys, &mut rng(0)).unwrap();
        }
        assert!((net.param(0) - 2.0).abs() < 0.05, "weight {}", net.param(0));
    }

    #[test]
    fn non_finite_loss_is_reported() {
        let mut net = Network::new(&[1, 2, 1], 0.0, Head::Regression, &mut rng(0)).unwrap();
        let mut adam = Adam::new(&net, 0.001);
        let err = net
            .train_step(&mut adam, &[vec![1.0]], &[vec![f64::NAN]], &mut rng(0))
            .unwrap_err();
        assert!(matches!(err, Error::NonFinite(_)));
    }

    #[test]
    fn mc_predict_without_dropout_has_zero_variance() {
        let net = Network::new(&[3, 8, 2], 0.0, Head::Regression, &mut rng(1)).unwrap();
        let x = [0.1, 0.2, 0.3];
        let p = net.mc_predict(&x, 10, &mut rng(0)).unwrap();
        assert_eq!(p.mean, net.predict(&x).unwrap());
        assert!(p.variance.iter().all(|&v| v == 0.0));

        let dropout = Network::new(&[3, 8, 2], 0.5, Head::Regression, &mut rng(1)).unwrap();
        let one = dropout.mc_predict(&x, 1, &mut rng(0)).unwrap();
        assert!(one.variance.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn mc_predict_is_seeded() {
        let net = Network::new(&[3, 32, 16, 2], 0.5, Head::Regression, &mut rng(1)).unwrap();
        let x = [0.4, -0.1, 0.7];
        let a = net.mc_predict(&x, 10, &mut rng(8)).unwrap();
        let b = net.mc_predict(&x, 10, &mut rng(8)).unwrap();
        assert_eq!(a, b);
        assert!(a.variance.iter().any(|&v| v > 0.0));
        assert!(net.mc_predict(&x, 0, &mut rng(8)).is_err());
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.bin");
        let net = Network::standard(4, 11, 0.5, Head::Softmax, &mut rng(9)).unwrap();
        net.save(&path).unwrap();
        assert_eq!(Network::load(&path).unwrap(), net);

        std::fs::write(&path, b"nope").unwrap();
        assert!(matches!(Network::load(&path), Err(Error::Format(_))));
    }
}
