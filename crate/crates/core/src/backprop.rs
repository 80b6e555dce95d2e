//! Backprop-trained classification head over extracted features.
//!
//! The head is a stack of dense bipolar-sigmoid layers trained by SGD with
//! momentum on the per-sample mean squared error against bipolar one-hot
//! targets, the same error the fitness function measures.

use std::fmt::Write as _;

use rand::Rng;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cppn::bipolar_sigmoid;
use crate::metrics::{Scores, argmax, bipolar_target};
use crate::mnist::NUM_CLASSES;
use crate::network::dot;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrainError {
    #[error("feature of length {found}, head expects {expected}")]
    Shape { expected: usize, found: usize },
    #[error("{features} feature vectors for {labels} labels")]
    Length { features: usize, labels: usize },
    #[error("label {0} out of range")]
    Label(usize),
    #[error("non-finite loss at epoch {epoch}, sample {sample} (last finite loss {last_loss})")]
    NonFinite {
        epoch: usize,
        sample: usize,
        last_loss: f64,
    },
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("line {0}: {1}")]
    Parse(usize, String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BatchMode {
    /// Update after every sample.
    #[default]
    PerSample,
    /// One update per epoch with the gradient averaged over the data.
    FullBatch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch: BatchMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 250,
            learning_rate: 0.05,
            momentum: 0.9,
            batch: BatchMode::PerSample,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.epochs == 0 {
            return Err(TrainError::Config("epochs must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(TrainError::Config("learning rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(TrainError::Config("momentum must be in [0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub n_in: usize,
    pub n_out: usize,
    /// Row-major `n_out × n_in`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    fn zeros(n_in: usize, n_out: usize) -> Self {
        Self {
            n_in,
            n_out,
            weights: vec![0.0; n_in * n_out],
            bias: vec![0.0; n_out],
        }
    }

    fn forward_into(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            self.weights
                .chunks_exact(self.n_in)
                .zip(&self.bias)
                .map(|(row, b)| bipolar_sigmoid(b + dot(row, input))),
        );
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeadNetwork {
    pub layers: Vec<DenseLayer>,
}

/// Parameter gradients with the same shape as a head.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<DenseLayer>,
}

impl Gradients {
    fn zeros_like(head: &HeadNetwork) -> Self {
        Self {
            layers: head
                .layers
                .iter()
                .map(|l| DenseLayer::zeros(l.n_in, l.n_out))
                .collect(),
        }
    }

    fn clear(&mut self) {
        for l in &mut self.layers {
            l.weights.fill(0.0);
            l.bias.fill(0.0);
        }
    }

    fn flat(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
            .collect()
    }
}

impl HeadNetwork {
    /// All-zero head with the given layer sizes (`[n_in, hidden.., 10]`).
    pub fn zeros(sizes: &[usize]) -> Self {
        Self {
            layers: sizes.windows(2).map(|w| DenseLayer::zeros(w[0], w[1])).collect(),
        }
    }

    /// Weights and biases uniform in `±1/sqrt(fan_in)`.
    pub fn random<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Self {
        let mut head = Self::zeros(sizes);
        for l in &mut head.layers {
            let r = 1.0 / (l.n_in as f64).sqrt();
            for w in l.weights.iter_mut().chain(l.bias.iter_mut()) {
                *w = rng.random_range(-r..=r);
            }
        }
        head
    }

    pub fn input_len(&self) -> usize {
        self.layers.first().map_or(0, |l| l.n_in)
    }

    pub fn output_len(&self) -> usize {
        self.layers.last().map_or(0, |l| l.n_out)
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.input_len()];
        s.extend(self.layers.iter().map(|l| l.n_out));
        s
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    fn check(&self, feature: &[f64]) -> Result<(), TrainError> {
        if feature.len() != self.input_len() {
            return Err(TrainError::Shape {
                expected: self.input_len(),
                found: feature.len(),
            });
        }
        Ok(())
    }

    /// Activations of every layer, input first.
    fn activations(&self, feature: &[f64], acts: &mut Vec<Vec<f64>>) {
        acts.resize(self.layers.len() + 1, Vec::new());
        acts[0].clear();
        acts[0].extend_from_slice(feature);
        for (i, l) in self.layers.iter().enumerate() {
            let (before, after) = acts.split_at_mut(i + 1);
            l.forward_into(&before[i], &mut after[0]);
        }
    }

    pub fn output(&self, feature: &[f64]) -> Result<Vec<f64>, TrainError> {
        self.check(feature)?;
        let mut acts = Vec::new();
        self.activations(feature, &mut acts);
        Ok(acts.pop().unwrap())
    }

    /// Per-sample loss: mean over outputs of `(y - t)^2`.
    pub fn loss(&self, feature: &[f64], label: usize) -> Result<f64, TrainError> {
        let y = self.output(feature)?;
        let t = bipolar_target(label);
        Ok(y.iter().zip(&t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / y.len() as f64)
    }

    /// Accumulates `d loss / d params` for one sample into `grads`; returns the loss.
    fn backprop(
        &self,
        feature: &[f64],
        label: usize,
        acts: &mut Vec<Vec<f64>>,
        grads: &mut Gradients,
        scale: f64,
    ) -> f64 {
        self.activations(feature, acts);
        let out = acts.last().unwrap();
        let t = bipolar_target(label);
        let n = out.len() as f64;
        let loss = out.iter().zip(&t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n;
        // delta = d loss / d pre-activation
        let mut delta: Vec<f64> = out
            .iter()
            .zip(&t)
            .map(|(y, t)| 2.0 * (y - t) / n * 0.5 * (1.0 - y * y))
            .collect();
        for li in (0..self.layers.len()).rev() {
            let layer = &self.layers[li];
            let input = &acts[li];
            let g = &mut grads.layers[li];
            for (o, d) in delta.iter().enumerate() {
                let d = d * scale;
                g.bias[o] += d;
                for (gw, x) in g.weights[o * layer.n_in..(o + 1) * layer.n_in].iter_mut().zip(input) {
                    *gw += d * x;
                }
            }
            if li > 0 {
                let mut prev = vec![0.0; layer.n_in];
                for (o, d) in delta.iter().enumerate() {
                    for (p, w) in prev.iter_mut().zip(&layer.weights[o * layer.n_in..(o + 1) * layer.n_in]) {
                        *p += d * w;
                    }
                }
                for (p, a) in prev.iter_mut().zip(input) {
                    *p *= 0.5 * (1.0 - a * a);
                }
                delta = prev;
            }
        }
        loss
    }

    /// One per-sample SGD step fused with backprop. Returns the loss before
    /// the update; non-finite losses leave the head untouched.
    fn sgd_step(
        &mut self,
        feature: &[f64],
        label: usize,
        acts: &mut Vec<Vec<f64>>,
        velocity: &mut Gradients,
        cfg: &TrainConfig,
    ) -> f64 {
        self.activations(feature, acts);
        let out = acts.last().unwrap();
        let t = bipolar_target(label);
        let n = out.len() as f64;
        let loss = out.iter().zip(&t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n;
        if !loss.is_finite() {
            return loss;
        }
        let mut delta: Vec<f64> = out
            .iter()
            .zip(&t)
            .map(|(y, t)| 2.0 * (y - t) / n * 0.5 * (1.0 - y * y))
            .collect();
        let (mu, lr) = (cfg.momentum, cfg.learning_rate);
        for li in (0..self.layers.len()).rev() {
            let layer = &mut self.layers[li];
            let input = &acts[li];
            let n_in = layer.n_in;
            // propagate through the old weights before touching them
            let prev = (li > 0).then(|| {
                let mut prev = vec![0.0; n_in];
                for (d, row) in delta.iter().zip(layer.weights.chunks_exact(n_in)) {
                    for (p, w) in prev.iter_mut().zip(row) {
                        *p += d * w;
                    }
                }
                for (p, a) in prev.iter_mut().zip(input) {
                    *p *= 0.5 * (1.0 - a * a);
                }
                prev
            });
            let v = &mut velocity.layers[li];
            for (o, &d) in delta.iter().enumerate() {
                let vb = &mut v.bias[o];
                *vb = mu * *vb - lr * d;
                layer.bias[o] += *vb;
                let rows = o * n_in..(o + 1) * n_in;
                for ((w, vw), x) in layer.weights[rows.clone()].iter_mut().zip(&mut v.weights[rows]).zip(input) {
                    *vw = mu * *vw - lr * d * x;
                    *w += *vw;
                }
            }
            if let Some(p) = prev {
                delta = p;
            }
        }
        loss
    }

    /// Analytic gradient of the per-sample loss.
    pub fn gradient(&self, feature: &[f64], label: usize) -> Result<Gradients, TrainError> {
        self.check(feature)?;
        let mut grads = Gradients::zeros_like(self);
        self.backprop(feature, label, &mut Vec::new(), &mut grads, 1.0);
        Ok(grads)
    }

    /// Parameter `i` in [`Gradients`] flat order (per layer: weights, then biases).
    fn param_mut(&mut self, mut i: usize) -> &mut f64 {
        for l in &mut self.layers {
            if i < l.weights.len() {
                return &mut l.weights[i];
            }
            i -= l.weights.len();
            if i < l.bias.len() {
                return &mut l.bias[i];
            }
            i -= l.bias.len();
        }
        panic!("parameter index out of range")
    }

    fn apply(&mut self, grads: &Gradients, velocity: &mut Gradients, cfg: &TrainConfig) {
        for ((l, g), v) in self.layers.iter_mut().zip(&grads.layers).zip(&mut velocity.layers) {
            for ((w, g), v) in l
                .weights
                .iter_mut()
                .chain(l.bias.iter_mut())
                .zip(g.weights.iter().chain(&g.bias))
                .zip(v.weights.iter_mut().chain(v.bias.iter_mut()))
            {
                *v = cfg.momentum * *v - cfg.learning_rate * g;
                *w += *v;
            }
        }
    }

    /// Text encoding: `head 1`, then per layer a `layer n_in n_out` line,
    /// one line per weight row and a `bias` line.
    pub fn to_text(&self) -> String {
        let mut s = String::from("head 1\n");
        for l in &self.layers {
            let _ = writeln!(s, "layer {} {}", l.n_in, l.n_out);
            for row in l.weights.chunks(l.n_in) {
                let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                let _ = writeln!(s, "{}", line.join(" "));
            }
            let line: Vec<String> = l.bias.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(s, "bias {}", line.join(" "));
        }
        s.push_str("end\n");
        s
    }

    pub fn from_text(text: &str) -> Result<Self, TrainError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let bad = |n: usize, m: &str| TrainError::Parse(n + 1, m.to_string());
        let nums = |n: usize, s: &str| -> Result<Vec<f64>, TrainError> {
            s.split_whitespace()
                .map(|v| v.parse().map_err(|_| bad(n, "bad number")))
                .collect()
        };
        match lines.next() {
            Some((_, "head 1")) => {}
            Some((n, _)) => return Err(bad(n, "expected `head 1`")),
            None => return Err(bad(0, "empty input")),
        }
        let mut layers = Vec::new();
        loop {
            let (n, line) = lines.next().ok_or_else(|| bad(0, "missing `end`"))?;
            if line.trim() == "end" {
                break;
            }
            let dims = line
                .strip_prefix("layer ")
                .map(|d| nums(n, d))
                .transpose()?
                .filter(|d| d.len() == 2)
                .ok_or_else(|| bad(n, "expected `layer n_in n_out`"))?;
            let (n_in, n_out) = (dims[0] as usize, dims[1] as usize);
            let mut weights = Vec::with_capacity(n_in * n_out);
            for _ in 0..n_out {
                let (n, row) = lines.next().ok_or_else(|| bad(n, "truncated layer"))?;
                let row = nums(n, row)?;
                if row.len() != n_in {
                    return Err(bad(n, "weight row length"));
                }
                weights.extend(row);
            }
            let (n, bias) = lines.next().ok_or_else(|| bad(n, "missing bias"))?;
            let bias = bias
                .strip_prefix("bias")
                .map(|b| nums(n, b))
                .transpose()?
                .filter(|b| b.len() == n_out)
                .ok_or_else(|| bad(n, "bad bias line"))?;
            layers.push(DenseLayer { n_in, n_out, weights, bias });
        }
        if layers.windows(2).any(|w| w[0].n_out != w[1].n_in) {
            return Err(bad(0, "layer sizes do not chain"));
        }
        Ok(Self { layers })
    }
}

/// Scores and argmax class (lowest index wins ties).
pub fn predict(head: &HeadNetwork, feature: &[f64]) -> Result<(Scores, usize), TrainError> {
    let out = head.output(feature)?;
    let scores: Scores = out.try_into().map_err(|v: Vec<f64>| TrainError::Shape {
        expected: NUM_CLASSES,
        found: v.len(),
    })?;
    Ok((scores, argmax(&scores)))
}

fn check_data(head: &HeadNetwork, features: &[Vec<f64>], labels: &[usize]) -> Result<(), TrainError> {
    if features.len() != labels.len() {
        return Err(TrainError::Length {
            features: features.len(),
            labels: labels.len(),
        });
    }
    if let Some(&l) = labels.iter().find(|&&l| l >= head.output_len()) {
        return Err(TrainError::Label(l));
    }
    features.iter().try_for_each(|f| head.check(f))
}

/// Trains `head` in place; returns the mean training loss of each epoch.
pub fn train<R: Rng + ?Sized>(
    head: &mut HeadNetwork,
    features: &[Vec<f64>],
    labels: &[usize],
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<Vec<f64>, TrainError> {
    cfg.validate()?;
    check_data(head, features, labels)?;
    let mut order: Vec<usize> = (0..features.len()).collect();
    let mut grads = Gradients::zeros_like(head);
    let mut velocity = Gradients::zeros_like(head);
    let mut acts = Vec::new();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut last_loss = f64::NAN;
    for epoch in 0..cfg.epochs {
        let mut total = 0.0;
        match cfg.batch {
            BatchMode::PerSample => {
                order.shuffle(rng);
                for &i in &order {
                    let loss = head.sgd_step(&features[i], labels[i], &mut acts, &mut velocity, cfg);
                    if !loss.is_finite() {
                        return Err(TrainError::NonFinite { epoch, sample: i, last_loss });
                    }
                    last_loss = loss;
                    total += loss;
                }
            }
            BatchMode::FullBatch => {
                grads.clear();
                let scale = 1.0 / features.len().max(1) as f64;
                for (i, (f, &l)) in features.iter().zip(labels).enumerate() {
                    let loss = head.backprop(f, l, &mut acts, &mut grads, scale);
                    if !loss.is_finite() {
                        return Err(TrainError::NonFinite { epoch, sample: i, last_loss });
                    }
                    last_loss = loss;
                    total += loss;
                }
                head.apply(&grads, &mut velocity, cfg);
            }
        }
        history.push(total / features.len().max(1) as f64);
    }
    Ok(history)
}

/// Fresh head with `sizes`, randomly initialized from `rng`, then trained.
pub fn train_head<R: Rng + ?Sized>(
    features: &[Vec<f64>],
    labels: &[usize],
    sizes: &[usize],
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<HeadNetwork, TrainError> {
    let mut head = HeadNetwork::random(sizes, rng);
    train(&mut head, features, labels, cfg, rng)?;
    Ok(head)
}

/// Largest relative difference between the analytic gradient and central
/// finite differences over every parameter. Differences are taken relative
/// to `max(|analytic|, |numeric|, 1e-6)`.
pub fn gradient_check(head: &HeadNetwork, feature: &[f64], label: usize, epsilon: f64) -> Result<f64, TrainError> {
    if !(1e-7..=1e-3).contains(&epsilon) {
        return Err(TrainError::Config("epsilon must be in [1e-7, 1e-3]".into()));
    }
    let analytic = head.gradient(feature, label)?.flat();
    let mut probe = head.clone();
    let mut worst: f64 = 0.0;
    for (i, a) in analytic.iter().enumerate() {
        let original = *probe.param_mut(i);
        *probe.param_mut(i) = original + epsilon;
        let up = probe.loss(feature, label)?;
        *probe.param_mut(i) = original - epsilon;
        let down = probe.loss(feature, label)?;
        *probe.param_mut(i) = original;
        let numeric = (up - down) / (2.0 * epsilon);
        let denom = a.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max((a - numeric).abs() / denom);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(s: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(s)
    }

    fn random_feature(n: usize, r: &mut ChaCha8Rng) -> Vec<f64> {
        (0..n).map(|_| r.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn zero_epochs_rejected() {
        let cfg = TrainConfig { epochs: 0, ..Default::default() };
        let err = train_head(&[vec![0.0; 4]], &[1], &[4, 3, 10], &cfg, &mut rng(0)).unwrap_err();
        assert!(matches!(err, TrainError::Config(_)));
    }

    #[test]
    fn one_step_reduces_sample_error() {
        let mut r = rng(1);
        let f = random_feature(12, &mut r);
        let mut head = HeadNetwork::random(&[12, 6, 10], &mut r);
        let before = head.loss(&f, 4).unwrap();
        let cfg = TrainConfig { epochs: 1, learning_rate: 0.01, momentum: 0.0, ..Default::default() };
        train(&mut head, std::slice::from_ref(&f), &[4], &cfg, &mut r).unwrap();
        assert!(head.loss(&f, 4).unwrap() < before);
    }

    #[test]
    fn fused_step_matches_explicit_gradient() {
        let mut r = rng(11);
        let f = random_feature(9, &mut r);
        let head = HeadNetwork::random(&[9, 5, 10], &mut r);
        let cfg = TrainConfig { epochs: 1, momentum: 0.0, learning_rate: 0.1, ..Default::default() };
        let mut fused = head.clone();
        train(&mut fused, std::slice::from_ref(&f), &[6], &cfg, &mut r).unwrap();
        let g = head.gradient(&f, 6).unwrap();
        let mut manual = head.clone();
        for (l, gl) in manual.layers.iter_mut().zip(&g.layers) {
            for (w, d) in l.weights.iter_mut().chain(l.bias.iter_mut()).zip(gl.weights.iter().chain(&gl.bias)) {
                *w -= 0.1 * d;
            }
        }
        for (a, b) in fused.layers.iter().zip(&manual.layers) {
            for (x, y) in a.weights.iter().chain(&a.bias).zip(b.weights.iter().chain(&b.bias)) {
                assert!((x - y).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn full_batch_loss_decreases() {
        let mut r = rng(12);
        let feats: Vec<Vec<f64>> = (0..30).map(|_| random_feature(6, &mut r)).collect();
        let labels: Vec<usize> = (0..30).map(|i| i % 3).collect();
        let mut head = HeadNetwork::random(&[6, 4, 10], &mut r);
        let cfg = TrainConfig { epochs: 40, learning_rate: 0.05, momentum: 0.0, batch: BatchMode::FullBatch };
        let losses = train(&mut head, &feats, &labels, &cfg, &mut r).unwrap();
        assert!(losses.windows(2).all(|w| w[1] <= w[0]), "{losses:?}");
    }

    #[test]
    fn separable_two_class_toy() {
        // class 3 iff the first coordinate is positive, margin 0.2
        let mut r = rng(13);
        let mut feats = Vec::new();
        let mut labels = Vec::new();
        while feats.len() < 200 {
            let f = random_feature(10, &mut r);
            if f[0].abs() < 0.2 {
                continue;
            }
            labels.push(if f[0] > 0.0 { 3 } else { 8 });
            feats.push(f);
        }
        let head = train_head(&feats, &labels, &[10, 6, 10], &TrainConfig::default(), &mut r).unwrap();
        let correct = feats
            .iter()
            .zip(&labels)
            .filter(|(f, l)| predict(&head, f).unwrap().1 == **l)
            .count();
        assert!(correct as f64 / 200.0 >= 0.95, "{correct}/200");
    }

    #[test]
    fn same_seed_same_head() {
        let mut r = rng(2);
        let feats: Vec<Vec<f64>> = (0..20).map(|_| random_feature(8, &mut r)).collect();
        let labels: Vec<usize> = (0..20).map(|i| i % 10).collect();
        let cfg = TrainConfig { epochs: 5, ..Default::default() };
        let a = train_head(&feats, &labels, &[8, 5, 10], &cfg, &mut rng(3)).unwrap();
        let b = train_head(&feats, &labels, &[8, 5, 10], &cfg, &mut rng(3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_head_predicts_zero() {
        let head = HeadNetwork::zeros(&[5, 3, 10]);
        let (scores, class) = predict(&head, &[0.3; 5]).unwrap();
        assert_eq!(class, 0);
        assert_eq!(scores, [0.0; 10]);
    }

    #[test]
    fn repeated_sample_is_learned() {
        let mut r = rng(4);
        let f = random_feature(16, &mut r);
        let feats = vec![f.clone(); 5];
        let labels = vec![7; 5];
        let cfg = TrainConfig { epochs: 20, ..Default::default() };
        let head = train_head(&feats, &labels, &[16, 8, 10], &cfg, &mut r).unwrap();
        let (scores, class) = predict(&head, &f).unwrap();
        assert_eq!(class, 7);
        assert!(scores.iter().all(|s| s.abs() < 1.0));
    }

    #[test]
    fn zero_input_gives_zero_first_layer_weight_gradient() {
        let head = HeadNetwork::random(&[6, 4, 10], &mut rng(5));
        let g = head.gradient(&[0.0; 6], 2).unwrap();
        assert!(g.layers[0].weights.iter().all(|&w| w == 0.0));
        assert!(g.layers[0].bias.iter().any(|&b| b != 0.0));
    }

    #[test]
    fn gradient_check_small_head() {
        let mut r = rng(6);
        let head = HeadNetwork::random(&[10, 7, 10], &mut r);
        let f = random_feature(10, &mut r);
        let e1 = gradient_check(&head, &f, 3, 1e-5).unwrap();
        let e2 = gradient_check(&head, &f, 3, 2e-5).unwrap();
        assert!(e1 < 1e-4, "{e1}");
        assert!(e2 < 1e-4, "{e2}");
        assert!(gradient_check(&head, &f, 3, 1e-2).is_err());
    }

    #[test]
    fn shape_errors() {
        let head = HeadNetwork::zeros(&[5, 3, 10]);
        assert!(matches!(predict(&head, &[0.0; 4]), Err(TrainError::Shape { expected: 5, found: 4 })));
        let cfg = TrainConfig::default();
        assert!(matches!(
            train_head(&[vec![0.0; 5]], &[11], &[5, 3, 10], &cfg, &mut rng(0)),
            Err(TrainError::Label(11))
        ));
    }

    #[test]
    fn non_finite_loss_aborts() {
        let mut head = HeadNetwork::zeros(&[2, 2, 10]);
        let cfg = TrainConfig { epochs: 1, ..Default::default() };
        let err = train(&mut head, &[vec![f64::NAN, 0.0]], &[0], &cfg, &mut rng(0)).unwrap_err();
        assert!(matches!(err, TrainError::NonFinite { epoch: 0, sample: 0, .. }));
    }

    #[test]
    fn text_round_trip() {
        let head = HeadNetwork::random(&[4, 3, 10], &mut rng(7));
        assert_eq!(HeadNetwork::from_text(&head.to_text()).unwrap(), head);
        assert!(HeadNetwork::from_text("head 1\nlayer 2 1\n0.5\nbias 0\n").is_err());
    }
}
