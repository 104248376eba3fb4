//! Multinomial logistic regression: softmax + mean cross-entropy, fitted by
//! full-batch gradient descent from zero weights.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::{accuracy, argmax, require_classes, softmax, Model, ModelMetadata, TrainedModel};
use crate::embedding::EmbeddedDataset;
use crate::error::{Error, Result};
use crate::metrics::EpochTrace;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogRegParams {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
}

impl Default for LogRegParams {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            epochs: 200,
            l2: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticRegression {
    /// `C × d`
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl LogisticRegression {
    pub fn zeros(n_classes: usize, dim: usize) -> Self {
        Self {
            weights: Array2::zeros((n_classes, dim)),
            bias: Array1::zeros(n_classes),
        }
    }

    pub fn probabilities(&self, x: ArrayView1<'_, f64>) -> Array1<f64> {
        softmax((self.weights.dot(&x) + &self.bias).view())
    }
}

/// Mean cross-entropy plus `(l2/2)‖W‖²`, and its gradient with respect to
/// the weights and the bias.
pub fn logreg_loss_and_gradient(
    model: &LogisticRegression,
    x: ArrayView2<'_, f64>,
    y: &[u8],
    l2: f64,
) -> (f64, Array2<f64>, Array1<f64>) {
    let n = x.nrows() as f64;
    let logits = x.dot(&model.weights.t()) + &model.bias;
    let mut residual = Array2::zeros(logits.raw_dim());
    let mut loss = 0.0;
    for (i, (row, mut r)) in logits.axis_iter(Axis(0)).zip(residual.axis_iter_mut(Axis(0))).enumerate() {
        let p = softmax(row);
        let target = y[i] as usize;
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let log_norm = max + row.mapv(|v| (v - max).exp()).sum().ln();
        loss += log_norm - row[target];
        r.assign(&p);
        r[target] -= 1.0;
    }
    loss = loss / n + 0.5 * l2 * model.weights.iter().map(|w| w * w).sum::<f64>();
    let grad_w = residual.t().dot(&x) / n + &model.weights * l2;
    let grad_b = residual.sum_axis(Axis(0)) / n;
    (loss, grad_w, grad_b)
}

pub fn fit_logreg(train: &EmbeddedDataset, params: &LogRegParams) -> Result<TrainedModel> {
    fit_logreg_traced(train, None, params).map(|(m, _)| m)
}

pub fn fit_logreg_traced(
    train: &EmbeddedDataset,
    test: Option<&EmbeddedDataset>,
    params: &LogRegParams,
) -> Result<(TrainedModel, Vec<EpochTrace>)> {
    if !(params.learning_rate > 0.0) {
        return Err(Error::Config("logreg learning_rate must be positive".into()));
    }
    if params.l2 < 0.0 {
        return Err(Error::Config("logreg l2 must be non-negative".into()));
    }
    let y = train.require_labels()?;
    require_classes(y, "logistic regression")?;
    let metadata = ModelMetadata::for_dataset(train, params);
    let x = train.features().view();
    let mut model = LogisticRegression::zeros(metadata.n_classes(), train.dim());
    let predict = |m: &LogisticRegression, ds: &EmbeddedDataset| -> Vec<u8> {
        ds.features()
            .axis_iter(Axis(0))
            .map(|r| argmax((m.weights.dot(&r) + &m.bias).view()) as u8)
            .collect()
    };

    let mut traces = Vec::with_capacity(params.epochs);
    for epoch in 0..params.epochs {
        let (_, grad_w, grad_b) = logreg_loss_and_gradient(&model, x, y, params.l2);
        model.weights.scaled_add(-params.learning_rate, &grad_w);
        model.bias.scaled_add(-params.learning_rate, &grad_b);
        let (loss, _, _) = logreg_loss_and_gradient(&model, x, y, params.l2);
        if !loss.is_finite() {
            return Err(Error::Numerical(format!(
                "logistic regression loss became non-finite at epoch {} (learning rate {})",
                epoch + 1,
                params.learning_rate
            )));
        }
        traces.push(EpochTrace {
            epoch: epoch + 1,
            loss,
            train_accuracy: accuracy(&predict(&model, train), y),
            test_accuracy: test
                .and_then(|t| t.labels().map(|l| accuracy(&predict(&model, t), l)))
                .unwrap_or(f64::NAN),
        });
    }

    Ok((
        TrainedModel {
            metadata,
            model: Model::LogReg(model),
        },
        traces,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::Rng;

    fn ds(x: Array2<f64>, y: Vec<u8>) -> EmbeddedDataset {
        let ids = (0..y.len()).map(|i| format!("r{i}")).collect();
        EmbeddedDataset::new(ids, x, Some(y), "t").unwrap()
    }

    #[test]
    fn zero_weights_are_uniform() {
        let m = LogisticRegression::zeros(3, 4);
        let p = m.probabilities(array![1.0, -2.0, 3.0, 0.5].view());
        assert!(p.iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = crate::seed::rng(8);
        let x = Array2::from_shape_fn((5, 3), |_| rng.gen_range(-1.0..1.0));
        let y = [0u8, 2, 1, 1, 0];
        let mut m = LogisticRegression::zeros(3, 3);
        m.weights.mapv_inplace(|_| rng.gen_range(-0.5..0.5));
        m.bias.mapv_inplace(|_| rng.gen_range(-0.5..0.5));
        let l2 = 0.3;
        let (_, gw, gb) = logreg_loss_and_gradient(&m, x.view(), &y, l2);
        let h = 1e-5;
        let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1e-8);
        for idx in ndarray::indices(gw.raw_dim()) {
            let mut plus = m.clone();
            plus.weights[idx] += h;
            let mut minus = m.clone();
            minus.weights[idx] -= h;
            let fd = (logreg_loss_and_gradient(&plus, x.view(), &y, l2).0
                - logreg_loss_and_gradient(&minus, x.view(), &y, l2).0)
                / (2.0 * h);
            assert!(rel(fd, gw[idx]) < 1e-6, "{idx:?}: {fd} vs {}", gw[idx]);
        }
        for c in 0..3 {
            let mut plus = m.clone();
            plus.bias[c] += h;
            let mut minus = m.clone();
            minus.bias[c] -= h;
            let fd = (logreg_loss_and_gradient(&plus, x.view(), &y, l2).0
                - logreg_loss_and_gradient(&minus, x.view(), &y, l2).0)
                / (2.0 * h);
            assert!(rel(fd, gb[c]) < 1e-6);
        }
    }

    #[test]
    fn symmetric_data_splits_at_zero() {
        let x = array![[-2.0], [-1.0], [1.0], [2.0]];
        let m = fit_logreg(&ds(x, vec![0, 0, 2, 2]), &LogRegParams::default()).unwrap();
        let eps = 1e-3;
        let p = m.predict(array![[-eps], [eps]].view()).unwrap();
        assert_ne!(p[0], p[1]);
    }

    #[test]
    fn probabilities_sum_to_one() {
        let mut rng = crate::seed::rng(9);
        let x = Array2::from_shape_fn((30, 4), |_| rng.gen_range(-3.0..3.0));
        let y = (0..30).map(|i| (i % 3) as u8).collect();
        let m = fit_logreg(&ds(x.clone(), y), &LogRegParams { epochs: 20, ..Default::default() }).unwrap();
        for row in m.predict_scores(x.view()).unwrap().axis_iter(Axis(0)) {
            assert!((row.sum() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn diverging_learning_rate_aborts() {
        let x = array![[1e200], [-1e200]];
        let r = fit_logreg(&ds(x, vec![0, 1]), &LogRegParams { learning_rate: 1e200, epochs: 5, l2: 0.0 });
        assert!(matches!(r, Err(Error::Numerical(_))), "{r:?}");
    }
}
