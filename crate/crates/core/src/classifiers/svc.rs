//! One-vs-rest linear SVM trained by per-example subgradient descent on the
//! regularized hinge loss, with step size `1 / (λ·t)`. The bias is
//! regularized like a weight on a constant feature.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{accuracy, argmax, require_classes, Model, ModelMetadata, TrainedModel};
use crate::embedding::EmbeddedDataset;
use crate::error::{Error, Result};
use crate::metrics::EpochTrace;
use crate::seed::keyed_rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinearSvcParams {
    pub lambda: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for LinearSvcParams {
    fn default() -> Self {
        Self {
            lambda: 1e-4,
            epochs: 20,
            seed: 0,
        }
    }
}

/// One weight row and one bias per class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearSvc {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl LinearSvc {
    /// Signed margins `⟨w_c, x⟩ + b_c`.
    pub fn scores(&self, x: ArrayView1<'_, f64>) -> Array1<f64> {
        self.weights.dot(&x) + &self.bias
    }
}

/// `(λ/2)(‖w‖² + b²) + mean hinge` of one binary problem.
pub fn svc_objective(
    w: ArrayView1<'_, f64>,
    b: f64,
    x: &Array2<f64>,
    signs: &[f64],
    lambda: f64,
) -> f64 {
    let hinge: f64 = x
        .axis_iter(Axis(0))
        .zip(signs)
        .map(|(row, &s)| (1.0 - s * (w.dot(&row) + b)).max(0.0))
        .sum();
    0.5 * lambda * (w.dot(&w) + b * b) + hinge / signs.len() as f64
}

pub fn fit_linear_svc(train: &EmbeddedDataset, params: &LinearSvcParams) -> Result<TrainedModel> {
    fit_linear_svc_traced(train, None, params).map(|(m, _)| m)
}

/// Fits and records, per epoch, the objective averaged over the one-vs-rest
/// problems plus train/test accuracy.
pub fn fit_linear_svc_traced(
    train: &EmbeddedDataset,
    test: Option<&EmbeddedDataset>,
    params: &LinearSvcParams,
) -> Result<(TrainedModel, Vec<EpochTrace>)> {
    if !(params.lambda > 0.0) {
        return Err(Error::Config("SVC lambda must be positive".into()));
    }
    if params.epochs == 0 {
        return Err(Error::Config("SVC epochs must be at least 1".into()));
    }
    let y = train.require_labels()?;
    require_classes(y, "linear SVC")?;
    let metadata = ModelMetadata::for_dataset(train, params);
    let n_classes = metadata.n_classes();
    let x = train.features();
    let (n, d) = x.dim();

    let signs: Vec<Vec<f64>> = (0..n_classes)
        .map(|c| y.iter().map(|&l| if l as usize == c { 1.0 } else { -1.0 }).collect())
        .collect();
    let mut svc = LinearSvc {
        weights: Array2::zeros((n_classes, d)),
        bias: Array1::zeros(n_classes),
    };
    let mut order: Vec<usize> = (0..n).collect();
    let mut step = 0usize;
    let mut traces = Vec::with_capacity(params.epochs);

    for epoch in 0..params.epochs {
        order.shuffle(&mut keyed_rng(params.seed, 0, epoch as u64));
        for &i in &order {
            step += 1;
            let eta = 1.0 / (params.lambda * step as f64);
            let row = x.row(i);
            for c in 0..n_classes {
                let s = signs[c][i];
                let mut w = svc.weights.row_mut(c);
                let margin = s * (w.dot(&row) + svc.bias[c]);
                w *= 1.0 - eta * params.lambda;
                svc.bias[c] *= 1.0 - eta * params.lambda;
                if margin < 1.0 {
                    w.scaled_add(eta * s, &row);
                    svc.bias[c] += eta * s;
                }
            }
        }
        let objective = (0..n_classes)
            .map(|c| svc_objective(svc.weights.row(c), svc.bias[c], x, &signs[c], params.lambda))
            .sum::<f64>()
            / n_classes as f64;
        if !objective.is_finite() {
            return Err(Error::Numerical(format!(
                "linear SVC objective became non-finite at epoch {}",
                epoch + 1
            )));
        }
        let predict = |ds: &EmbeddedDataset| -> Vec<u8> {
            ds.features()
                .axis_iter(Axis(0))
                .map(|r| argmax(svc.scores(r).view()) as u8)
                .collect()
        };
        traces.push(EpochTrace {
            epoch: epoch + 1,
            loss: objective,
            train_accuracy: accuracy(&predict(train), y),
            test_accuracy: test
                .and_then(|t| t.labels().map(|l| accuracy(&predict(t), l)))
                .unwrap_or(f64::NAN),
        });
    }

    Ok((
        TrainedModel {
            metadata,
            model: Model::LinearSvc(svc),
        },
        traces,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn ds(x: Array2<f64>, y: Vec<u8>) -> EmbeddedDataset {
        let ids = (0..y.len()).map(|i| format!("r{i}")).collect();
        EmbeddedDataset::new(ids, x, Some(y), "t").unwrap()
    }

    #[test]
    fn separable_two_class_fits_exactly() {
        let x = array![[0., 0.], [2., 2.], [0., 1.], [2., 3.]];
        let y = vec![0, 1, 0, 1];
        let m = fit_linear_svc(&ds(x.clone(), y.clone()), &LinearSvcParams::default()).unwrap();
        assert_eq!(m.predict(x.view()).unwrap(), y);
    }

    #[test]
    fn satisfied_margin_only_shrinks_weights() {
        // Hinge term is zero when the margin is at least 1.
        let w = array![2.0, 0.0];
        let x = array![[1.0, 0.0]];
        let obj = svc_objective(w.view(), 0.0, &x, &[1.0], 0.1);
        assert!((obj - 0.5 * 0.1 * 4.0).abs() < 1e-15);
        let obj = svc_objective(w.view(), 0.0, &x, &[-1.0], 0.1);
        assert!((obj - (0.2 + 3.0)).abs() < 1e-15);
    }

    #[test]
    fn single_class_is_rejected() {
        let d = ds(array![[0.0], [1.0]], vec![1, 1]);
        assert!(fit_linear_svc(&d, &LinearSvcParams::default()).is_err());
    }

    #[test]
    fn traces_are_finite_and_deterministic() {
        let x = array![[0., 0.], [2., 2.], [0., 1.], [2., 3.], [5., 0.], [6., 1.]];
        let y = vec![0, 1, 0, 1, 2, 2];
        let d = ds(x, y);
        let p = LinearSvcParams { epochs: 7, seed: 3, ..Default::default() };
        let (m1, t1) = fit_linear_svc_traced(&d, Some(&d), &p).unwrap();
        let (m2, t2) = fit_linear_svc_traced(&d, Some(&d), &p).unwrap();
        assert_eq!(m1, m2);
        assert_eq!(t1, t2);
        assert_eq!(t1.len(), 7);
        assert!(t1.iter().all(|t| t.loss.is_finite()));
    }
}
