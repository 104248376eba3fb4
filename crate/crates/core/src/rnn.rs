//! Elman recurrent classifier trained with backpropagation through time.
//!
//! Each embedding of width `dim` is read as a sequence of `seq_len`
//! contiguous slices of width `dim / seq_len`. The final hidden state feeds a
//! softmax output layer:
//!
//! ```text
//! h_t = tanh(W_xh·x_t + W_hh·h_{t−1} + b_h),  h_0 = 0
//! p   = softmax(W_hy·h_T + b_y)
//! ```

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::classifiers::{accuracy, argmax, softmax, Model, ModelMetadata, TrainedModel};
use crate::embedding::EmbeddedDataset;
use crate::error::{Error, Result};
use crate::metrics::EpochTrace;
use crate::seed::keyed_rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RnnParams {
    pub seq_len: usize,
    pub hidden_dim: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    /// Cap on the global L2 norm of each example's gradient.
    pub grad_clip: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for RnnParams {
    fn default() -> Self {
        Self {
            seq_len: 8,
            hidden_dim: 64,
            learning_rate: 0.01,
            epochs: 30,
            grad_clip: 5.0,
            batch_size: 32,
            seed: 0,
        }
    }
}

impl RnnParams {
    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.seq_len == 0 || !dim.is_multiple_of(self.seq_len) {
            return Err(Error::Config(format!(
                "sequence length {} does not divide embedding dim {dim}",
                self.seq_len
            )));
        }
        if self.hidden_dim == 0 {
            return Err(Error::Config("hidden_dim must be at least 1".into()));
        }
        if !(self.grad_clip > 0.0) {
            return Err(Error::Config("grad_clip must be positive".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("RNN learning_rate must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        Ok(())
    }
}

/// Weights of the network. The same shape doubles as a gradient container.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RnnWeights {
    /// `H × step_width`
    pub w_xh: Array2<f64>,
    /// `H × H`
    pub w_hh: Array2<f64>,
    pub b_h: Array1<f64>,
    /// `C × H`
    pub w_hy: Array2<f64>,
    pub b_y: Array1<f64>,
}

impl RnnWeights {
    pub fn zeros(step_width: usize, hidden: usize, n_classes: usize) -> Self {
        Self {
            w_xh: Array2::zeros((hidden, step_width)),
            w_hh: Array2::zeros((hidden, hidden)),
            b_h: Array1::zeros(hidden),
            w_hy: Array2::zeros((n_classes, hidden)),
            b_y: Array1::zeros(n_classes),
        }
    }

    /// Uniform in `[−scale, scale]` from `seed`.
    pub fn uniform(step_width: usize, hidden: usize, n_classes: usize, scale: f64, seed: u64) -> Self {
        let mut rng = keyed_rng(seed, 0x696e_6974, 0);
        let mut w = Self::zeros(step_width, hidden, n_classes);
        w.for_each_mut(|v| *v = rng.gen_range(-scale..=scale));
        w
    }

    pub fn step_width(&self) -> usize {
        self.w_xh.ncols()
    }

    pub fn hidden(&self) -> usize {
        self.w_hh.nrows()
    }

    pub fn n_classes(&self) -> usize {
        self.w_hy.nrows()
    }

    fn for_each_mut(&mut self, mut f: impl FnMut(&mut f64)) {
        self.w_xh.iter_mut().for_each(&mut f);
        self.w_hh.iter_mut().for_each(&mut f);
        self.b_h.iter_mut().for_each(&mut f);
        self.w_hy.iter_mut().for_each(&mut f);
        self.b_y.iter_mut().for_each(&mut f);
    }

    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.w_xh
            .iter()
            .chain(self.w_hh.iter())
            .chain(self.b_h.iter())
            .chain(self.w_hy.iter())
            .chain(self.b_y.iter())
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.w_xh
            .iter_mut()
            .chain(self.w_hh.iter_mut())
            .chain(self.b_h.iter_mut())
            .chain(self.w_hy.iter_mut())
            .chain(self.b_y.iter_mut())
    }

    pub fn l2_norm(&self) -> f64 {
        self.values().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `self += scale · other`
    pub fn add_scaled(&mut self, scale: f64, other: &RnnWeights) {
        self.w_xh.scaled_add(scale, &other.w_xh);
        self.w_hh.scaled_add(scale, &other.w_hh);
        self.b_h.scaled_add(scale, &other.b_h);
        self.w_hy.scaled_add(scale, &other.w_hy);
        self.b_y.scaled_add(scale, &other.b_y);
    }

    fn scale(&mut self, factor: f64) {
        self.for_each_mut(|v| *v *= factor);
    }
}

/// Rescales `grads` so their global L2 norm is at most `cap`. Returns the
/// norm before clipping.
pub fn clip_global_norm(grads: &mut RnnWeights, cap: f64) -> f64 {
    let norm = grads.l2_norm();
    if norm > cap {
        grads.scale(cap / norm);
    }
    norm
}

/// Views an embedding as `steps` rows of width `dim / steps`.
pub fn reshape_to_sequence(embedding: ArrayView1<'_, f64>, steps: usize) -> Result<Array2<f64>> {
    let dim = embedding.len();
    if steps == 0 || !dim.is_multiple_of(steps) {
        return Err(Error::Input(format!(
            "sequence length {steps} does not divide embedding dim {dim}"
        )));
    }
    Ok(embedding
        .to_owned()
        .into_shape_with_order((steps, dim / steps))
        .expect("divisibility checked"))
}

#[derive(Clone, Debug)]
pub struct ForwardPass {
    /// `h_1 … h_T`
    pub hidden: Vec<Array1<f64>>,
    pub logits: Array1<f64>,
    pub probabilities: Array1<f64>,
}

pub fn rnn_forward(weights: &RnnWeights, sequence: ArrayView2<'_, f64>) -> Result<ForwardPass> {
    if sequence.ncols() != weights.step_width() {
        return Err(Error::DimensionMismatch {
            expected: weights.step_width(),
            actual: sequence.ncols(),
        });
    }
    let mut h = Array1::zeros(weights.hidden());
    let mut hidden = Vec::with_capacity(sequence.nrows());
    for (t, x_t) in sequence.axis_iter(Axis(0)).enumerate() {
        h = (weights.w_xh.dot(&x_t) + weights.w_hh.dot(&h) + &weights.b_h).mapv(f64::tanh);
        if h.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite hidden state at step {}", t + 1)));
        }
        hidden.push(h.clone());
    }
    let logits = weights.w_hy.dot(&h) + &weights.b_y;
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite output logits".into()));
    }
    let probabilities = softmax(logits.view());
    Ok(ForwardPass {
        hidden,
        logits,
        probabilities,
    })
}

/// Exact cross-entropy gradients by reverse accumulation through the
/// unrolled sequence, clipped to a global norm of `grad_clip`. Also returns
/// the loss `−ln p_target`.
pub fn bptt_gradients(
    weights: &RnnWeights,
    sequence: ArrayView2<'_, f64>,
    target: u8,
    grad_clip: f64,
) -> Result<(RnnWeights, f64)> {
    let fwd = rnn_forward(weights, sequence)?;
    let target = target as usize;
    let mut grads = RnnWeights::zeros(weights.step_width(), weights.hidden(), weights.n_classes());

    let mut d_logits = fwd.probabilities.clone();
    d_logits[target] -= 1.0;
    let h_last = fwd.hidden.last().expect("at least one step");
    grads.w_hy = outer(&d_logits, h_last);
    grads.b_y = d_logits.clone();

    let mut d_h = weights.w_hy.t().dot(&d_logits);
    let zero = Array1::zeros(weights.hidden());
    for t in (0..sequence.nrows()).rev() {
        let h_t = &fwd.hidden[t];
        let h_prev = if t == 0 { &zero } else { &fwd.hidden[t - 1] };
        let d_pre = &d_h * &h_t.mapv(|v| 1.0 - v * v);
        grads.w_xh += &outer(&d_pre, &sequence.row(t).to_owned());
        grads.w_hh += &outer(&d_pre, h_prev);
        grads.b_h += &d_pre;
        d_h = weights.w_hh.t().dot(&d_pre);
    }
    clip_global_norm(&mut grads, grad_clip);

    let max = fwd.logits.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let log_norm = max + fwd.logits.mapv(|v| (v - max).exp()).sum().ln();
    Ok((grads, log_norm - fwd.logits[target]))
}

fn outer(a: &Array1<f64>, b: &Array1<f64>) -> Array2<f64> {
    let a2 = a.view().insert_axis(Axis(1));
    let b2 = b.view().insert_axis(Axis(0));
    a2.dot(&b2)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RnnModel {
    pub seq_len: usize,
    pub weights: RnnWeights,
}

impl RnnModel {
    pub fn probabilities(&self, embedding: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        let seq = reshape_to_sequence(embedding, self.seq_len)?;
        Ok(rnn_forward(&self.weights, seq.view())?.probabilities)
    }

    fn predict_dataset(&self, ds: &EmbeddedDataset) -> Result<Vec<u8>> {
        ds.features()
            .axis_iter(Axis(0))
            .map(|row| Ok(argmax(self.probabilities(row)?.view()) as u8))
            .collect()
    }
}

/// Mini-batch gradient descent; one trace entry per epoch with the mean
/// training loss seen during the epoch and post-epoch accuracies.
pub fn fit_rnn(
    train: &EmbeddedDataset,
    test: Option<&EmbeddedDataset>,
    params: &RnnParams,
) -> Result<(TrainedModel, Vec<EpochTrace>)> {
    params.validate(train.dim())?;
    let y = train.require_labels()?;
    if train.is_empty() {
        return Err(Error::EmptyInput("RNN: training set is empty".into()));
    }
    let metadata = ModelMetadata::for_dataset(train, params);
    let step_width = train.dim() / params.seq_len;
    let mut model = RnnModel {
        seq_len: params.seq_len,
        weights: RnnWeights::uniform(step_width, params.hidden_dim, metadata.n_classes(), 0.1, params.seed),
    };
    let sequences: Vec<Array2<f64>> = train
        .features()
        .axis_iter(Axis(0))
        .map(|row| reshape_to_sequence(row, params.seq_len))
        .collect::<Result<_>>()?;

    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut traces = Vec::with_capacity(params.epochs);
    for epoch in 0..params.epochs {
        order.shuffle(&mut keyed_rng(params.seed, 1, epoch as u64));
        let mut loss_sum = 0.0;
        for batch in order.chunks(params.batch_size) {
            let mut acc = RnnWeights::zeros(step_width, params.hidden_dim, metadata.n_classes());
            for &i in batch {
                let (g, loss) = bptt_gradients(&model.weights, sequences[i].view(), y[i], params.grad_clip)?;
                acc.add_scaled(1.0, &g);
                loss_sum += loss;
            }
            model.weights.add_scaled(-params.learning_rate, &acc);
        }
        let mean_loss = loss_sum / train.len() as f64;
        if !mean_loss.is_finite() || model.weights.values().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("RNN training diverged at epoch {}", epoch + 1)));
        }
        traces.push(EpochTrace {
            epoch: epoch + 1,
            loss: mean_loss,
            train_accuracy: accuracy(&model.predict_dataset(train)?, y),
            test_accuracy: match test.and_then(|t| t.labels().map(|l| (t, l))) {
                Some((t, l)) => accuracy(&model.predict_dataset(t)?, l),
                None => f64::NAN,
            },
        });
    }

    Ok((
        TrainedModel {
            metadata,
            model: Model::Rnn(model),
        },
        traces,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn reshape_examples() {
        let v = Array1::from_iter((0..768).map(|i| i as f64));
        let s = reshape_to_sequence(v.view(), 8).unwrap();
        assert_eq!(s.dim(), (8, 96));
        assert_eq!(s[[1, 0]], 96.0);
        assert_eq!(Array1::from_iter(s.iter().copied()), v);

        let one = reshape_to_sequence(v.view(), 1).unwrap();
        assert_eq!(one.row(0), v);

        let err = reshape_to_sequence(Array1::zeros(10).view(), 3).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains('3') && msg.contains("10"), "{msg}");
    }

    #[test]
    fn zero_weights_give_uniform_output() {
        let w = RnnWeights::zeros(2, 4, 3);
        let f = rnn_forward(&w, array![[1.0, 2.0], [3.0, 4.0]].view()).unwrap();
        assert!(f.probabilities.iter().all(|&p| (p - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn hand_sized_forward() {
        // dim 2, T = 2, H = 1, every weight 0.5
        let mut w = RnnWeights::zeros(1, 1, 3);
        w.for_each_mut(|v| *v = 0.5);
        let (x1, x2) = (0.4, -1.2);
        let f = rnn_forward(&w, array![[x1], [x2]].view()).unwrap();
        let h1 = (0.5f64 * x1 + 0.5).tanh();
        let h2 = (0.5 * x2 + 0.5 * h1 + 0.5).tanh();
        // h1 = tanh(0.7), h2 = tanh(0.5·tanh(0.7) − 0.1)
        assert!((h1 - 0.604_367_777_117_163_6).abs() < 1e-12);
        assert!((h2 - 0.199_473_223_372_346_9).abs() < 1e-12, "{h2}");
        assert!((f.hidden[0][0] - h1).abs() < 1e-15);
        assert!((f.hidden[1][0] - h2).abs() < 1e-15);
        // All logits equal, so the output is uniform.
        assert!(f.probabilities.iter().all(|&p| (p - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn single_step_is_a_feedforward_net() {
        let w = RnnWeights::uniform(4, 3, 3, 0.8, 5);
        let x = array![0.3, -0.1, 0.9, 0.2];
        let seq = reshape_to_sequence(x.view(), 1).unwrap();
        let f = rnn_forward(&w, seq.view()).unwrap();
        let h = (w.w_xh.dot(&x) + &w.b_h).mapv(f64::tanh);
        let p = softmax((w.w_hy.dot(&h) + &w.b_y).view());
        for (a, b) in f.probabilities.iter().zip(p.iter()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn output_gradient_vanishes_at_one_hot() {
        let mut w = RnnWeights::zeros(2, 2, 3);
        w.b_y = array![0.0, 800.0, 0.0];
        let (g, loss) = bptt_gradients(&w, array![[1.0, -1.0]].view(), 1, f64::INFINITY).unwrap();
        assert!(g.w_hy.iter().all(|&v| v == 0.0));
        assert!(g.b_y.iter().all(|&v| v == 0.0));
        assert!(loss >= 0.0 && loss < 1e-12);
    }

    #[test]
    fn clipping_scales_to_cap() {
        let mut g = RnnWeights::zeros(1, 1, 1);
        g.w_xh[[0, 0]] = 6.0;
        g.b_y[0] = 8.0;
        let before = clip_global_norm(&mut g, 5.0);
        assert_eq!(before, 10.0);
        assert!((g.l2_norm() - 5.0).abs() < 1e-9);
        let mut small = g.clone();
        clip_global_norm(&mut small, 50.0);
        assert_eq!(small, g);
    }

    #[test]
    fn zero_epochs_returns_initial_model() {
        let ids = vec!["a".into(), "b".into()];
        let ds = EmbeddedDataset::new(ids, array![[1.0, 0.0], [0.0, 1.0]], Some(vec![0, 2]), "t").unwrap();
        let params = RnnParams {
            seq_len: 2,
            hidden_dim: 3,
            epochs: 0,
            ..RnnParams::default()
        };
        let (m, trace) = fit_rnn(&ds, None, &params).unwrap();
        assert!(trace.is_empty());
        let Model::Rnn(r) = &m.model else { unreachable!() };
        assert_eq!(r.weights, RnnWeights::uniform(1, 3, 3, 0.1, params.seed));
    }

    #[test]
    fn indivisible_dim_is_config_error() {
        let ds = EmbeddedDataset::new(vec!["a".into()], array![[1.0, 0.0, 2.0]], Some(vec![0]), "t").unwrap();
        assert!(matches!(fit_rnn(&ds, None, &RnnParams::default()), Err(Error::Config(_))));
    }
}
