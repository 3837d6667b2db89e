//! Multilayer perceptron with softmax output, sparse categorical
//! cross-entropy, backpropagation and Adam, written from scratch.

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{features_of, DatasetSplit, Sample, Standardizer};
use crate::error::{Error, Result};
use crate::noise::NoiseClass;
use crate::seed::child_seed;

/// Smallest probability passed to the logarithm in the loss.
pub const LOG_CLAMP: f64 = 1e-12;
pub const CHECKPOINT_FORMAT: &str = "noisesense-mlp-checkpoint-v1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    Relu,
    LeakyRelu,
    Softmax,
}

pub fn leaky_relu(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        slope * x
    }
}

/// Softmax with max subtraction.
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|&v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpArchitecture {
    pub layer_sizes: Vec<usize>,
    /// One per non-input layer; only the last may be softmax.
    pub activations: Vec<Activation>,
    pub leak_slope: f64,
}

impl Default for MlpArchitecture {
    fn default() -> Self {
        Self::with_hidden(&[64, 32, 32, 32])
    }
}

impl MlpArchitecture {
    /// Three inputs, six softmax outputs; the first hidden layer uses ReLU
    /// and the rest LeakyReLU.
    pub fn with_hidden(hidden: &[usize]) -> Self {
        let mut layer_sizes = vec![3];
        layer_sizes.extend_from_slice(hidden);
        layer_sizes.push(NoiseClass::COUNT);
        let activations = (0..hidden.len())
            .map(|i| {
                if i == 0 {
                    Activation::Relu
                } else {
                    Activation::LeakyRelu
                }
            })
            .chain(std::iter::once(Activation::Softmax))
            .collect();
        Self {
            layer_sizes,
            activations,
            leak_slope: 0.01,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.layer_sizes.len();
        if n < 2 || self.activations.len() != n - 1 || self.layer_sizes.contains(&0) {
            return Err(Error::Config(format!("inconsistent architecture {self:?}")));
        }
        if self.activations[n - 2] != Activation::Softmax
            || self.activations[..n - 2].contains(&Activation::Softmax)
        {
            return Err(Error::Config(
                "softmax must be the output activation and only there".into(),
            ));
        }
        Ok(())
    }

    pub fn inputs(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn outputs(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }
}

/// Dense layer `z = W x + b`, `W` stored row-major as `outputs x inputs`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Layer {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            biases: vec![0.0; outputs],
        }
    }

    fn affine(&self, x: &[f64]) -> Vec<f64> {
        (0..self.outputs)
            .map(|o| {
                let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
                self.biases[o] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub arch: MlpArchitecture,
    pub layers: Vec<Layer>,
}

/// Activations kept for backpropagation: `inputs[l]` feeds layer `l`,
/// `pre[l]` is its affine output.
struct Trace {
    inputs: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
    output: Vec<f64>,
}

impl Mlp {
    /// Glorot-uniform weights, zero biases.
    pub fn new(arch: MlpArchitecture, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = arch
            .layer_sizes
            .windows(2)
            .map(|w| {
                let mut layer = Layer::zeros(w[0], w[1]);
                let limit = (6.0 / (w[0] + w[1]) as f64).sqrt();
                layer
                    .weights
                    .iter_mut()
                    .for_each(|x| *x = rng.gen_range(-limit..limit));
                layer
            })
            .collect();
        Ok(Self { arch, layers })
    }

    pub fn zeros(arch: MlpArchitecture) -> Result<Self> {
        arch.validate()?;
        let layers = arch
            .layer_sizes
            .windows(2)
            .map(|w| Layer::zeros(w[0], w[1]))
            .collect();
        Ok(Self { arch, layers })
    }

    fn activate(&self, a: Activation, z: &[f64]) -> Vec<f64> {
        match a {
            Activation::Relu => z.iter().map(|&v| v.max(0.0)).collect(),
            Activation::LeakyRelu => z
                .iter()
                .map(|&v| leaky_relu(v, self.arch.leak_slope))
                .collect(),
            Activation::Softmax => softmax(z),
        }
    }

    fn trace(&self, x: &[f64]) -> Trace {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut y = x.to_vec();
        for (layer, &a) in self.layers.iter().zip(&self.arch.activations) {
            let z = layer.affine(&y);
            inputs.push(std::mem::replace(&mut y, self.activate(a, &z)));
            pre.push(z);
        }
        Trace {
            inputs,
            pre,
            output: y,
        }
    }

    /// Class probabilities for one (already standardized) input.
    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.trace(x).output
    }

    pub fn forward_batch(&self, xs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        xs.iter().map(|x| self.forward(x)).collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    /// Parameters flattened layer by layer (weights, then biases).
    pub fn parameters(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.biases).copied())
            .collect()
    }

    pub fn set_parameters(&mut self, flat: &[f64]) {
        let mut it = flat.iter().copied();
        for l in &mut self.layers {
            l.weights
                .iter_mut()
                .chain(l.biases.iter_mut())
                .for_each(|p| *p = it.next().unwrap());
        }
    }

    /// Mean cross-entropy of the batch and its exact gradient, flattened in
    /// the order of [`Mlp::parameters`].
    pub fn gradients(&self, xs: &[Vec<f64>], labels: &[usize]) -> (f64, Vec<f64>) {
        let n = xs.len() as f64;
        let mut grads: Vec<Layer> = self
            .layers
            .iter()
            .map(|l| Layer::zeros(l.inputs, l.outputs))
            .collect();
        let mut total = 0.0;
        for (x, &label) in xs.iter().zip(labels) {
            let t = self.trace(x);
            total -= t.output[label].max(LOG_CLAMP).ln();
            // d loss / d z at the softmax layer
            let mut delta: Vec<f64> = t.output.clone();
            delta[label] -= 1.0;
            delta.iter_mut().for_each(|d| *d /= n);
            for l in (0..self.layers.len()).rev() {
                let layer = &self.layers[l];
                let g = &mut grads[l];
                let input = &t.inputs[l];
                for o in 0..layer.outputs {
                    g.biases[o] += delta[o];
                    let row = &mut g.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    for (gw, &v) in row.iter_mut().zip(input) {
                        *gw += delta[o] * v;
                    }
                }
                if l == 0 {
                    break;
                }
                let below = &t.pre[l - 1];
                let act = self.arch.activations[l - 1];
                delta = (0..layer.inputs)
                    .map(|i| {
                        let back: f64 = (0..layer.outputs)
                            .map(|o| layer.weights[o * layer.inputs + i] * delta[o])
                            .sum();
                        let slope = match act {
                            Activation::Relu => (below[i] > 0.0) as u8 as f64,
                            Activation::LeakyRelu => {
                                if below[i] > 0.0 {
                                    1.0
                                } else {
                                    self.arch.leak_slope
                                }
                            }
                            Activation::Softmax => unreachable!("softmax only on the output layer"),
                        };
                        back * slope
                    })
                    .collect();
            }
        }
        let flat = grads
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.biases).copied())
            .collect();
        (total / n, flat)
    }
}

/// `-(1/N) sum log y[i][label_i]`, with the probability clamped at
/// [`LOG_CLAMP`].
pub fn loss(outputs: &[Vec<f64>], labels: &[usize]) -> f64 {
    let n = outputs.len() as f64;
    -outputs
        .iter()
        .zip(labels)
        .map(|(y, &l)| y[l].max(LOG_CLAMP).ln())
        .sum::<f64>()
        / n
}

/// Index of the largest component; ties go to the lowest index.
pub fn argmax(y: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in y.iter().enumerate() {
        if v > y[best] {
            best = i;
        }
    }
    best
}

pub fn accuracy(outputs: &[Vec<f64>], labels: &[usize]) -> f64 {
    let hits = outputs
        .iter()
        .zip(labels)
        .filter(|(y, &l)| argmax(y) == l)
        .count();
    hits as f64 / outputs.len() as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    /// Number of updates applied so far.
    pub t: u64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }
}

/// One bias-corrected Adam update of `params` in place.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState, cfg: &AdamConfig) {
    state.t += 1;
    let t = state.t as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        params[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    /// Seeds weight initialization (child 0) and batch shuffling (child 1).
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 120,
            batch_size: 32,
            adam: AdamConfig::default(),
            seed: 0,
        }
    }
}

/// Full-set loss and accuracy after each epoch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub train_accuracy: f64,
    pub val_accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelCheckpoint {
    pub format: String,
    pub model: Mlp,
    pub standardizer: Option<Standardizer>,
    /// `labels[k]` names output `k`.
    pub labels: Vec<String>,
    pub history: Vec<EpochRecord>,
    pub train_config: TrainConfig,
}

impl ModelCheckpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let ckpt: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if ckpt.format != CHECKPOINT_FORMAT {
            return Err(Error::Config(format!(
                "{}: unsupported checkpoint format '{}'",
                path.display(),
                ckpt.format
            )));
        }
        ckpt.model.arch.validate()?;
        Ok(ckpt)
    }

    fn standardizer(&self) -> Result<&Standardizer> {
        self.standardizer.as_ref().ok_or(Error::MissingStats)
    }

    /// Standardized inputs for raw samples.
    pub fn inputs(&self, samples: &[Sample]) -> Result<Vec<Vec<f64>>> {
        let st = self.standardizer()?;
        Ok(samples
            .iter()
            .map(|s| st.transform(&features_of(s)))
            .collect())
    }

    /// Label and class probabilities for raw (unstandardized) features.
    pub fn predict(&self, raw: &[f64]) -> Result<(usize, Vec<f64>)> {
        let x = self.standardizer()?.transform(raw);
        let y = self.model.forward(&x);
        Ok((argmax(&y), y))
    }
}

pub fn write_history<W: Write>(mut out: W, history: &[EpochRecord]) -> std::io::Result<()> {
    writeln!(out, "# epoch train_loss val_loss train_acc val_acc")?;
    for r in history {
        writeln!(
            out,
            "{} {} {} {} {}",
            r.epoch, r.train_loss, r.val_loss, r.train_accuracy, r.val_accuracy
        )?;
    }
    Ok(())
}

const DIVERGENCE_LOSS: f64 = 1e3;

/// Mini-batch Adam training with per-epoch reshuffling. Features are
/// standardized with statistics fitted on the training split.
pub fn train(
    split: &DatasetSplit,
    cfg: &TrainConfig,
    arch: &MlpArchitecture,
) -> Result<ModelCheckpoint> {
    if cfg.epochs == 0 || cfg.batch_size == 0 {
        return Err(Error::Config(
            "epochs and batch_size must be at least 1".into(),
        ));
    }
    if split.train.is_empty() {
        return Err(Error::Config("training split is empty".into()));
    }
    let standardizer = Standardizer::fit_samples(&split.train)?;
    let prepare = |s: &[Sample]| -> (Vec<Vec<f64>>, Vec<usize>) {
        (
            s.iter()
                .map(|x| standardizer.transform(&features_of(x)))
                .collect(),
            s.iter().map(|x| x.label).collect(),
        )
    };
    let (train_x, train_y) = prepare(&split.train);
    let (val_x, val_y) = prepare(&split.validation);

    let mut model = Mlp::new(arch.clone(), child_seed(cfg.seed, &[0]))?;
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(child_seed(cfg.seed, &[1]));
    let mut params = model.parameters();
    let mut adam = AdamState::new(params.len());
    let mut order: Vec<usize> = (0..train_x.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        for batch in order.chunks(cfg.batch_size) {
            let bx: Vec<Vec<f64>> = batch.iter().map(|&i| train_x[i].clone()).collect();
            let by: Vec<usize> = batch.iter().map(|&i| train_y[i]).collect();
            let (batch_loss, grads) = model.gradients(&bx, &by);
            if !batch_loss.is_finite() || batch_loss > DIVERGENCE_LOSS {
                return Err(Error::Divergence {
                    epoch,
                    loss: batch_loss,
                });
            }
            adam_step(&mut params, &grads, &mut adam, &cfg.adam);
            model.set_parameters(&params);
        }
        let train_out = model.forward_batch(&train_x);
        let train_loss = loss(&train_out, &train_y);
        if !train_loss.is_finite() || train_loss > DIVERGENCE_LOSS {
            return Err(Error::Divergence {
                epoch,
                loss: train_loss,
            });
        }
        let (val_loss, val_accuracy) = if val_x.is_empty() {
            (f64::NAN, f64::NAN)
        } else {
            let out = model.forward_batch(&val_x);
            (loss(&out, &val_y), accuracy(&out, &val_y))
        };
        let record = EpochRecord {
            epoch,
            train_loss,
            val_loss,
            train_accuracy: accuracy(&train_out, &train_y),
            val_accuracy,
        };
        log::debug!("{record:?}");
        history.push(record);
    }

    Ok(ModelCheckpoint {
        format: CHECKPOINT_FORMAT.into(),
        model,
        standardizer: Some(standardizer),
        labels: NoiseClass::ALL
            .iter()
            .map(|c| c.as_str().to_string())
            .collect(),
        history,
        train_config: *cfg,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    /// `counts[true][predicted]`.
    pub counts: Vec<Vec<usize>>,
    /// Row-normalized percentages (zero rows stay zero).
    pub percentages: Vec<Vec<f64>>,
    pub recall: Vec<f64>,
    /// Fraction whose predicted class lies in the true class's
    /// Markovian/non-Markovian group.
    pub markovian_accuracy: f64,
    /// Exact-class accuracy among true non-Markovian samples.
    pub non_markovian_within: f64,
    /// Exact-class accuracy among true Markovian samples.
    pub markovian_within: f64,
}

/// Confusion statistics from true and predicted labels.
pub fn confusion(truth: &[usize], predicted: &[usize]) -> Evaluation {
    let k = NoiseClass::COUNT;
    let mut counts = vec![vec![0usize; k]; k];
    for (&t, &p) in truth.iter().zip(predicted) {
        counts[t][p] += 1;
    }
    let percentages: Vec<Vec<f64>> = counts
        .iter()
        .map(|row| {
            let n: usize = row.iter().sum();
            row.iter()
                .map(|&c| {
                    if n == 0 {
                        0.0
                    } else {
                        100.0 * c as f64 / n as f64
                    }
                })
                .collect()
        })
        .collect();
    let recall = (0..k).map(|i| percentages[i][i] / 100.0).collect();
    let frac = |num: usize, den: usize| {
        if den == 0 {
            f64::NAN
        } else {
            num as f64 / den as f64
        }
    };
    let group = |l: usize| NoiseClass::from_label(l).map(NoiseClass::is_markovian);
    let pairs: Vec<(usize, usize)> = truth
        .iter()
        .copied()
        .zip(predicted.iter().copied())
        .collect();
    let correct = pairs.iter().filter(|(t, p)| t == p).count();
    let same_group = pairs.iter().filter(|(t, p)| group(*t) == group(*p)).count();
    let within = |markov: bool| {
        let members: Vec<_> = pairs
            .iter()
            .filter(|(t, _)| group(*t) == Some(markov))
            .collect();
        frac(
            members.iter().filter(|(t, p)| t == p).count(),
            members.len(),
        )
    };
    Evaluation {
        accuracy: frac(correct, pairs.len()),
        counts,
        percentages,
        recall,
        markovian_accuracy: frac(same_group, pairs.len()),
        non_markovian_within: within(false),
        markovian_within: within(true),
    }
}

pub fn evaluate(ckpt: &ModelCheckpoint, samples: &[Sample]) -> Result<Evaluation> {
    let inputs = ckpt.inputs(samples)?;
    let predicted: Vec<usize> = inputs
        .iter()
        .map(|x| argmax(&ckpt.model.forward(x)))
        .collect();
    let truth: Vec<usize> = samples.iter().map(|s| s.label).collect();
    Ok(confusion(&truth, &predicted))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_network_is_uniform() {
        let m = Mlp::zeros(MlpArchitecture::default()).unwrap();
        for p in m.forward(&[0.3, -1.0, 2.0]) {
            assert_abs_diff_eq!(p, 1.0 / 6.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn leaky_relu_values() {
        assert_eq!(leaky_relu(-1.0, 0.01), -0.01);
        assert_eq!(leaky_relu(2.0, 0.01), 2.0);
    }

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax(&[0.2, 0.4, 0.4]), 1);
        assert_eq!(argmax(&[0.5, 0.5]), 0);
    }

    #[test]
    fn adam_first_step_is_learning_rate() {
        let cfg = AdamConfig::default();
        let mut p = vec![0.0];
        let mut st = AdamState::new(1);
        adam_step(&mut p, &[1.0], &mut st, &cfg);
        assert_abs_diff_eq!(p[0], -1e-3 / (1.0 + 1e-8), epsilon = 1e-15);
        let mut q = vec![1.5];
        adam_step(&mut q, &[0.0], &mut AdamState::new(1), &cfg);
        assert_eq!(q[0], 1.5);
    }

    #[test]
    fn bad_architecture_rejected() {
        let mut a = MlpArchitecture::default();
        a.activations[0] = Activation::Softmax;
        assert!(a.validate().is_err());
        a = MlpArchitecture::default();
        a.activations.pop();
        assert!(a.validate().is_err());
    }
}
