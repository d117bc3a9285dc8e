//! Small victims and white-box baselines.
//!
//! Softmax regression and a dense ReLU network with cross-entropy loss and
//! input gradients by backpropagation, an SGD trainer, FGSM and PGD, and a
//! Gaussian-blob data generator.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::blocks::ImageSpec;
use crate::oracle::{AttackMode, LossReport, Victim};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("invalid configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Identity => "identity",
            Activation::Relu => "relu",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "identity" => Some(Activation::Identity),
            "relu" => Some(Activation::Relu),
            _ => None,
        }
    }
}

/// `y = act(W x + b)` with `W` stored row-major as `outputs × inputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Dense {
    pub fn new(
        inputs: usize,
        outputs: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
        activation: Activation,
    ) -> Result<Self, ModelError> {
        if inputs == 0 || outputs == 0 {
            return Err(ModelError::Config("layer dimensions must be positive".into()));
        }
        if weights.len() != inputs * outputs || bias.len() != outputs {
            return Err(ModelError::Shape(format!(
                "{outputs}x{inputs} layer given {} weights and {} biases",
                weights.len(),
                bias.len()
            )));
        }
        if weights.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite("layer parameters"));
        }
        Ok(Self {
            inputs,
            outputs,
            weights,
            bias,
            activation,
        })
    }

    pub fn zeros(inputs: usize, outputs: usize, activation: Activation) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
            activation,
        }
    }

    fn affine(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.inputs)
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b)
            .collect()
    }
}

/// Loss, prediction and input gradient from one forward/backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardLoss {
    pub loss: f64,
    pub predicted: usize,
    pub gradient: Vec<f64>,
}

fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    logits.iter().map(|z| z - lse).collect()
}

fn argmax(v: &[f64]) -> usize {
    // First maximum wins.
    v.iter()
        .enumerate()
        .fold(
            (0, f64::NEG_INFINITY),
            |(bi, bv), (i, &x)| if x > bv { (i, x) } else { (bi, bv) },
        )
        .0
}

fn check_layers(layers: &[Dense]) -> Result<(), ModelError> {
    if layers.is_empty() {
        return Err(ModelError::Config("a network needs at least one layer".into()));
    }
    for pair in layers.windows(2) {
        if pair[0].outputs != pair[1].inputs {
            return Err(ModelError::Shape(format!(
                "layer emits {} values but the next expects {}",
                pair[0].outputs, pair[1].inputs
            )));
        }
    }
    Ok(())
}

// Pre-activation and post-activation values of each layer.
fn forward(layers: &[Dense], x: &[f64]) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut acts = Vec::with_capacity(layers.len());
    let mut input = x.to_vec();
    for layer in layers {
        let pre = layer.affine(&input);
        let post = match layer.activation {
            Activation::Identity => pre.clone(),
            Activation::Relu => pre.iter().map(|v| v.max(0.0)).collect(),
        };
        input = post.clone();
        acts.push((pre, post));
    }
    acts
}

/// Gradients of the cross-entropy with respect to every layer's parameters
/// and to the input.
struct Backward {
    weights: Vec<Vec<f64>>,
    bias: Vec<Vec<f64>>,
    input: Vec<f64>,
}

fn backward(layers: &[Dense], x: &[f64], acts: &[(Vec<f64>, Vec<f64>)], label: usize, want_params: bool) -> Backward {
    let logits = &acts.last().expect("non-empty").1;
    let logp = log_softmax(logits);
    // d loss / d logits = softmax - onehot
    let mut delta: Vec<f64> = logp.iter().map(|l| l.exp()).collect();
    delta[label] -= 1.0;
    let mut gw = Vec::new();
    let mut gb = Vec::new();
    for (i, layer) in layers.iter().enumerate().rev() {
        if layer.activation == Activation::Relu {
            for (d, pre) in delta.iter_mut().zip(&acts[i].0) {
                if *pre <= 0.0 {
                    *d = 0.0;
                }
            }
        }
        let input: &[f64] = if i == 0 { x } else { &acts[i - 1].1 };
        if want_params {
            let mut w = vec![0.0; layer.weights.len()];
            for (o, d) in delta.iter().enumerate() {
                for (j, v) in input.iter().enumerate() {
                    w[o * layer.inputs + j] = d * v;
                }
            }
            gw.push(w);
            gb.push(delta.clone());
        }
        let mut prev = vec![0.0; layer.inputs];
        for (row, d) in layer.weights.chunks_exact(layer.inputs).zip(&delta) {
            for (p, w) in prev.iter_mut().zip(row) {
                *p += w * d;
            }
        }
        delta = prev;
    }
    gw.reverse();
    gb.reverse();
    Backward {
        weights: gw,
        bias: gb,
        input: delta,
    }
}

/// Dense classifier ending in softmax cross-entropy.
pub trait Classifier {
    fn layers(&self) -> &[Dense];

    fn layers_mut(&mut self) -> &mut [Dense];

    fn input_dim(&self) -> usize {
        self.layers()[0].inputs
    }

    fn num_classes(&self) -> usize {
        self.layers().last().expect("non-empty").outputs
    }

    fn logits(&self, x: &[f64]) -> Vec<f64> {
        forward(self.layers(), x).pop().expect("non-empty").1
    }

    fn predict(&self, x: &[f64]) -> usize {
        argmax(&self.logits(x))
    }

    /// Cross-entropy, argmax class and `∇_x ℓ(x, y)`.
    fn forward_loss(&self, x: &[f64], label: usize) -> Result<ForwardLoss, ModelError> {
        if x.len() != self.input_dim() {
            return Err(ModelError::Shape(format!(
                "input has {} values, expected {}",
                x.len(),
                self.input_dim()
            )));
        }
        if label >= self.num_classes() {
            return Err(ModelError::Shape(format!(
                "label {label} with {} classes",
                self.num_classes()
            )));
        }
        let acts = forward(self.layers(), x);
        let logits = &acts.last().expect("non-empty").1;
        if logits.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite("logits"));
        }
        let loss = -log_softmax(logits)[label];
        let predicted = argmax(logits);
        let gradient = backward(self.layers(), x, &acts, label, false).input;
        Ok(ForwardLoss {
            loss,
            predicted,
            gradient,
        })
    }
}

impl<C: Classifier> Victim for C {
    fn num_classes(&self) -> usize {
        Classifier::num_classes(self)
    }

    fn input_dim(&self) -> usize {
        Classifier::input_dim(self)
    }

    fn loss_report(&self, x: &[f64], label: usize) -> LossReport {
        let logits = self.logits(x);
        LossReport {
            loss: -log_softmax(&logits)[label],
            predicted: argmax(&logits),
        }
    }
}

/// Multinomial logistic regression: a single identity layer.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxRegression {
    layer: [Dense; 1],
}

impl SoftmaxRegression {
    pub fn new(classes: usize, features: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self, ModelError> {
        Ok(Self {
            layer: [Dense::new(features, classes, weights, bias, Activation::Identity)?],
        })
    }

    pub fn zeros(classes: usize, features: usize) -> Self {
        Self {
            layer: [Dense::zeros(features, classes, Activation::Identity)],
        }
    }

    /// Two-class model with `p(class 1) = σ(w·x)`.
    pub fn binary_logistic(w: &[f64]) -> Self {
        let mut weights = vec![0.0; w.len()];
        weights.extend_from_slice(w);
        Self::new(2, w.len(), weights, vec![0.0, 0.0]).expect("consistent shapes")
    }

    pub fn weights(&self) -> &[f64] {
        &self.layer[0].weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.layer[0].bias
    }
}

impl Classifier for SoftmaxRegression {
    fn layers(&self) -> &[Dense] {
        &self.layer
    }

    fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layer
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Dense>,
}

impl Mlp {
    pub fn new(layers: Vec<Dense>) -> Result<Self, ModelError> {
        check_layers(&layers)?;
        Ok(Self { layers })
    }

    /// `inputs → hidden (relu) → classes` with scaled Gaussian weights.
    pub fn random(inputs: usize, hidden: usize, classes: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layer = |i: usize, o: usize, act| {
            let normal = Normal::new(0.0, (2.0 / i as f64).sqrt()).expect("positive scale");
            let weights = (0..i * o).map(|_| normal.sample(&mut rng)).collect();
            let bias = (0..o).map(|_| 0.1 * normal.sample(&mut rng)).collect();
            Dense::new(i, o, weights, bias, act).expect("consistent shapes")
        };
        let first = layer(inputs, hidden, Activation::Relu);
        let second = layer(hidden, classes, Activation::Identity);
        Self {
            layers: vec![first, second],
        }
    }
}

impl Classifier for Mlp {
    fn layers(&self) -> &[Dense] {
        &self.layers
    }

    fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }
}

/// Either victim family, as stored in model files.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Softmax(SoftmaxRegression),
    Mlp(Mlp),
}

impl Model {
    pub fn kind(&self) -> &'static str {
        match self {
            Model::Softmax(_) => "softmax",
            Model::Mlp(_) => "mlp",
        }
    }

    pub fn from_layers(kind: &str, layers: Vec<Dense>) -> Result<Self, ModelError> {
        match kind {
            "softmax" => {
                let [layer]: [Dense; 1] = layers
                    .try_into()
                    .map_err(|_| ModelError::Config("softmax model must have exactly one layer".into()))?;
                if layer.activation != Activation::Identity {
                    return Err(ModelError::Config("softmax layer must be identity".into()));
                }
                Ok(Model::Softmax(SoftmaxRegression { layer: [layer] }))
            }
            "mlp" => Ok(Model::Mlp(Mlp::new(layers)?)),
            other => Err(ModelError::Config(format!("unknown model kind {other:?}"))),
        }
    }
}

impl Classifier for Model {
    fn layers(&self) -> &[Dense] {
        match self {
            Model::Softmax(m) => m.layers(),
            Model::Mlp(m) => m.layers(),
        }
    }

    fn layers_mut(&mut self) -> &mut [Dense] {
        match self {
            Model::Softmax(m) => m.layers_mut(),
            Model::Mlp(m) => m.layers_mut(),
        }
    }
}

fn sign(v: f64) -> f64 {
    if v < 0.0 {
        -1.0
    } else {
        1.0
    }
}

// Gradient of the attack objective: +∇ℓ(·, y) untargeted, −∇ℓ(·, t) targeted.
fn objective_gradient<C: Classifier + ?Sized>(model: &C, x: &[f64], mode: AttackMode) -> Result<Vec<f64>, ModelError> {
    Ok(match mode {
        AttackMode::Untargeted { label } => model.forward_loss(x, label)?.gradient,
        AttackMode::Targeted { target } => model.forward_loss(x, target)?.gradient.iter().map(|g| -g).collect(),
    })
}

/// `x + ε · sign(∇f(x))`, with `sign(0) = +1`, clamped to `range` if given.
pub fn fgsm<C: Classifier + ?Sized>(
    model: &C,
    x: &[f64],
    mode: AttackMode,
    epsilon: f64,
    range: Option<(f64, f64)>,
) -> Result<Vec<f64>, ModelError> {
    let g = objective_gradient(model, x, mode)?;
    Ok(x.iter()
        .zip(&g)
        .map(|(v, g)| {
            let out = v + epsilon * sign(*g);
            range.map_or(out, |(lo, hi)| out.clamp(lo, hi))
        })
        .collect())
}

/// Signed-gradient ascent from `x`, projected onto the ε-ball around `x` (and
/// `range`) after every step.
pub fn pgd<C: Classifier + ?Sized>(
    model: &C,
    x: &[f64],
    mode: AttackMode,
    epsilon: f64,
    steps: usize,
    step_size: f64,
    range: Option<(f64, f64)>,
) -> Result<Vec<f64>, ModelError> {
    if steps == 0 {
        return Err(ModelError::Config("pgd needs at least one step".into()));
    }
    let mut cur = x.to_vec();
    for _ in 0..steps {
        let g = objective_gradient(model, &cur, mode)?;
        for ((c, x0), g) in cur.iter_mut().zip(x).zip(&g) {
            let mut v = (*c + step_size * sign(*g)).clamp(x0 - epsilon, x0 + epsilon);
            if let Some((lo, hi)) = range {
                v = v.clamp(lo, hi);
            }
            *c = v;
        }
    }
    Ok(cur)
}

/// Fraction of coordinates whose perturbation magnitude is within `tol` of ε.
pub fn vertex_fraction(x_adv: &[f64], x: &[f64], epsilon: f64, tol: f64) -> f64 {
    assert_eq!(x_adv.len(), x.len());
    if x.is_empty() {
        return 0.0;
    }
    let hits = x_adv
        .iter()
        .zip(x)
        .filter(|(a, b)| ((*a - *b).abs() - epsilon).abs() <= tol)
        .count();
    hits as f64 / x.len() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub spec: ImageSpec,
    pub classes: usize,
    pub images: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

impl LabeledDataset {
    pub fn new(spec: ImageSpec, classes: usize, images: Vec<Vec<f64>>, labels: Vec<usize>) -> Result<Self, ModelError> {
        if images.len() != labels.len() {
            return Err(ModelError::Shape(format!(
                "{} images but {} labels",
                images.len(),
                labels.len()
            )));
        }
        if let Some(bad) = images.iter().find(|im| im.len() != spec.len()) {
            return Err(ModelError::Shape(format!(
                "image with {} values, expected {}",
                bad.len(),
                spec.len()
            )));
        }
        if let Some(&l) = labels.iter().find(|&&l| l >= classes) {
            return Err(ModelError::Shape(format!("label {l} with {classes} classes")));
        }
        Ok(Self {
            spec,
            classes,
            images,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn accuracy<C: Classifier + ?Sized>(&self, model: &C) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        let hits = self
            .images
            .iter()
            .zip(&self.labels)
            .filter(|(x, &y)| model.predict(x) == y)
            .count();
        hits as f64 / self.len() as f64
    }
}

/// Gaussian-blob generator parameters. Every class gets a prototype image
/// (shared base plus a class offset); samples add pixel noise and are
/// quantised to multiples of 1/255.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlobParams {
    pub base_lo: f64,
    pub base_hi: f64,
    /// Std of each class's per-pixel offset from the shared base.
    pub class_spread: f64,
    /// Std of per-sample pixel noise.
    pub noise: f64,
}

impl Default for BlobParams {
    fn default() -> Self {
        Self {
            base_lo: 0.3,
            base_hi: 0.7,
            class_spread: 0.08,
            noise: 0.15,
        }
    }
}

/// Synthetic blobs: `n` samples with round-robin labels. The class
/// prototypes depend only on `seed`, so several draws sharing a seed but using
/// different `sample_seed`s form train/test splits of one distribution.
pub fn gen_synthetic(
    classes: usize,
    spec: ImageSpec,
    n: usize,
    seed: u64,
    sample_seed: u64,
    params: BlobParams,
) -> Result<LabeledDataset, ModelError> {
    if classes < 2 {
        return Err(ModelError::Config(format!("need at least two classes, got {classes}")));
    }
    let dim = spec.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base: Vec<f64> = (0..dim)
        .map(|_| rng.gen_range(params.base_lo..params.base_hi))
        .collect();
    let spread = Normal::new(0.0, params.class_spread).map_err(|e| ModelError::Config(e.to_string()))?;
    let prototypes: Vec<Vec<f64>> = (0..classes)
        .map(|_| base.iter().map(|b| b + spread.sample(&mut rng)).collect())
        .collect();

    let noise = Normal::new(0.0, params.noise).map_err(|e| ModelError::Config(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(sample_seed);
    let mut images = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let label = i % classes;
        let img = prototypes[label]
            .iter()
            .map(|p| {
                let v = (p + noise.sample(&mut rng)).clamp(0.0, 1.0);
                (v * 255.0).round() / 255.0
            })
            .collect();
        images.push(img);
        labels.push(label);
    }
    LabeledDataset::new(spec, classes, images, labels)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgdConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            lr: 0.1,
            batch_size: 32,
            seed: 0,
        }
    }
}

/// Mini-batch SGD on mean cross-entropy; deterministic given `cfg.seed`.
pub fn train_sgd<C: Classifier>(model: &mut C, data: &LabeledDataset, cfg: SgdConfig) -> Result<(), ModelError> {
    if cfg.lr.is_nan() || cfg.lr <= 0.0 {
        return Err(ModelError::Config(format!(
            "learning rate must be positive, got {}",
            cfg.lr
        )));
    }
    if cfg.batch_size == 0 {
        return Err(ModelError::Config("batch size must be positive".into()));
    }
    if data.spec.len() != model.input_dim() || data.classes > model.num_classes() {
        return Err(ModelError::Shape("dataset does not match the model".into()));
    }
    let first = data.labels.first().copied();
    if first.is_none() || data.labels.iter().all(|&l| Some(l) == first) {
        return Err(ModelError::Config(
            "training data must contain at least two classes".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let layers = model.layers();
            let mut gw: Vec<Vec<f64>> = layers.iter().map(|l| vec![0.0; l.weights.len()]).collect();
            let mut gb: Vec<Vec<f64>> = layers.iter().map(|l| vec![0.0; l.bias.len()]).collect();
            for &i in batch {
                let x = &data.images[i];
                let acts = forward(layers, x);
                let g = backward(layers, x, &acts, data.labels[i], true);
                for (acc, g) in gw.iter_mut().zip(&g.weights) {
                    acc.iter_mut().zip(g).for_each(|(a, v)| *a += v);
                }
                for (acc, g) in gb.iter_mut().zip(&g.bias) {
                    acc.iter_mut().zip(g).for_each(|(a, v)| *a += v);
                }
            }
            let scale = cfg.lr / batch.len() as f64;
            for ((layer, gw), gb) in model.layers_mut().iter_mut().zip(&gw).zip(&gb) {
                layer.weights.iter_mut().zip(gw).for_each(|(w, g)| *w -= scale * g);
                layer.bias.iter_mut().zip(gb).for_each(|(b, g)| *b -= scale * g);
            }
        }
        if model.layers().iter().any(|l| l.weights.iter().any(|w| !w.is_finite())) {
            return Err(ModelError::NonFinite("weights after an epoch"));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn binary_logistic_counterexample_loss() {
        let m = SoftmaxRegression::binary_logistic(&[-1.0, -1.0]);
        let out = m.forward_loss(&[-1.0, -1.0], 1).unwrap();
        assert!(close(out.loss, (-2f64).exp().ln_1p(), 1e-12));
        assert!(close(out.loss, 0.1269, 1e-4));
        assert_eq!(out.predicted, 1);
    }

    #[test]
    fn zero_model_is_uniform() {
        let m = SoftmaxRegression::zeros(5, 3);
        let out = m.forward_loss(&[0.2, 0.4, 0.9], 2).unwrap();
        assert!(close(out.loss, 5f64.ln(), 1e-12));
        assert!(out.gradient.iter().all(|g| *g == 0.0));
    }

    #[test]
    fn shape_errors() {
        let m = SoftmaxRegression::zeros(2, 3);
        assert!(matches!(m.forward_loss(&[0.0; 2], 0), Err(ModelError::Shape(_))));
        assert!(matches!(m.forward_loss(&[0.0; 3], 2), Err(ModelError::Shape(_))));
        let a = Dense::zeros(3, 4, Activation::Relu);
        let b = Dense::zeros(5, 2, Activation::Identity);
        assert!(Mlp::new(vec![a, b]).is_err());
        assert!(Mlp::new(vec![]).is_err());
        let huge = SoftmaxRegression::new(2, 1, vec![0.0, 1e308], vec![0.0, 0.0]).unwrap();
        assert_eq!(huge.forward_loss(&[1e10], 0), Err(ModelError::NonFinite("logits")));
    }

    #[test]
    fn fgsm_linear_signs() {
        // Loss of class 1 under w = (2, -3) has gradient -σ(-z) w: signs (-, +).
        let m = SoftmaxRegression::binary_logistic(&[2.0, -3.0]);
        let adv = fgsm(&m, &[0.0, 0.0], AttackMode::Untargeted { label: 1 }, 0.1, None).unwrap();
        assert_eq!(adv, vec![-0.1, 0.1]);
        let zero = SoftmaxRegression::zeros(3, 2);
        let adv = fgsm(&zero, &[0.5, 0.5], AttackMode::Untargeted { label: 0 }, 0.1, None).unwrap();
        assert_eq!(adv, vec![0.6, 0.6]);
        assert_eq!(vertex_fraction(&adv, &[0.5, 0.5], 0.1, 1e-9), 1.0);
    }

    #[test]
    fn pgd_matches_fgsm_on_linear() {
        let m = SoftmaxRegression::binary_logistic(&[0.7, -0.2, 1.5, -2.0]);
        let x = [0.3, 0.1, 0.9, 0.5];
        let mode = AttackMode::Untargeted { label: 1 };
        let f = fgsm(&m, &x, mode, 0.25, None).unwrap();
        assert_eq!(pgd(&m, &x, mode, 0.25, 1, 0.25, None).unwrap(), f);
        let p = pgd(&m, &x, mode, 0.25, 20, 0.05, None).unwrap();
        for (a, b) in p.iter().zip(&f) {
            assert!(close(*a, *b, 1e-12));
        }
        assert_eq!(vertex_fraction(&p, &x, 0.25, 1e-9), 1.0);
        assert_eq!(vertex_fraction(&x, &x, 0.25, 1e-9), 0.0);

        let mut prev = m.forward_loss(&x, 1).unwrap().loss;
        for steps in 1..8 {
            let l = m
                .forward_loss(&pgd(&m, &x, mode, 0.25, steps, 0.05, None).unwrap(), 1)
                .unwrap()
                .loss;
            assert!(l >= prev);
            prev = l;
        }
        assert!(pgd(&m, &x, mode, 0.25, 0, 0.05, None).is_err());
    }

    #[test]
    fn targeted_pgd_descends() {
        let m = Mlp::random(6, 5, 3, 4);
        let x = [0.5; 6];
        let mode = AttackMode::Targeted { target: 2 };
        let before = m.forward_loss(&x, 2).unwrap().loss;
        let adv = pgd(&m, &x, mode, 0.2, 10, 0.02, Some((0.0, 1.0))).unwrap();
        assert!(m.forward_loss(&adv, 2).unwrap().loss < before);
        assert!(adv.iter().zip(&x).all(|(a, b)| (a - b).abs() <= 0.2 + 1e-12));
    }

    #[test]
    fn synthetic_blobs_are_deterministic_and_quantised() {
        let spec = ImageSpec::new(4, 4, 1).unwrap();
        let a = gen_synthetic(3, spec, 30, 9, 1, BlobParams::default()).unwrap();
        let b = gen_synthetic(3, spec, 30, 9, 1, BlobParams::default()).unwrap();
        assert_eq!(a, b);
        assert!(a
            .images
            .iter()
            .flatten()
            .all(|v| (v * 255.0).fract() == 0.0 && (0.0..=1.0).contains(v)));
        assert_eq!(&a.labels[..4], &[0, 1, 2, 0]);
        assert!(gen_synthetic(1, spec, 30, 9, 1, BlobParams::default()).is_err());
    }

    #[test]
    fn sgd_separates_two_blobs() {
        let spec = ImageSpec::new(4, 4, 1).unwrap();
        let params = BlobParams {
            class_spread: 0.2,
            noise: 0.05,
            ..BlobParams::default()
        };
        let data = gen_synthetic(2, spec, 200, 3, 4, params).unwrap();
        let mut m = SoftmaxRegression::zeros(2, 16);
        let untouched = m.clone();
        train_sgd(
            &mut m,
            &data,
            SgdConfig {
                epochs: 0,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(m, untouched);

        let cfg = SgdConfig {
            epochs: 20,
            lr: 0.5,
            batch_size: 16,
            seed: 11,
        };
        train_sgd(&mut m, &data, cfg).unwrap();
        assert!(data.accuracy(&m) >= 0.99, "{}", data.accuracy(&m));
        let mut again = SoftmaxRegression::zeros(2, 16);
        train_sgd(&mut again, &data, cfg).unwrap();
        assert_eq!(m, again);
    }

    #[test]
    fn sgd_rejects_single_class() {
        let spec = ImageSpec::new(1, 2, 1).unwrap();
        let data = LabeledDataset::new(spec, 2, vec![vec![0.0, 1.0]; 3], vec![1; 3]).unwrap();
        let mut m = SoftmaxRegression::zeros(2, 2);
        assert!(matches!(
            train_sgd(&mut m, &data, SgdConfig::default()),
            Err(ModelError::Config(_))
        ));
        assert!(matches!(
            train_sgd(
                &mut m,
                &data,
                SgdConfig {
                    lr: 0.0,
                    ..Default::default()
                }
            ),
            Err(ModelError::Config(_))
        ));
    }
}
