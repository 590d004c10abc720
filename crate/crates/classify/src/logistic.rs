use dlp2c_core::rng::Rng;
use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::model::Standardizer;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LrSpec {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
    /// Scale of the random initial weights; 0 starts from zero.
    pub init_scale: f64,
    pub seed: u64,
}

impl Default for LrSpec {
    fn default() -> Self {
        LrSpec {
            learning_rate: 0.5,
            epochs: 300,
            l2: 1e-4,
            init_scale: 0.0,
            seed: 0,
        }
    }
}

/// One-vs-rest logistic regression on standardised inputs, trained by
/// full-batch gradient descent on the mean log loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub scaler: Standardizer,
    /// `dim x classes`.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl LogisticModel {
    pub fn fit(x: ArrayView2<f64>, y: &[usize], classes: usize, spec: &LrSpec) -> LogisticModel {
        let scaler = Standardizer::fit(x);
        let xs = scaler.apply(x);
        let (n, d) = xs.dim();
        let mut rng = Rng::seed_from_u64(spec.seed);
        let mut w = Array2::from_shape_fn((d, classes), |_| spec.init_scale * rng.normal());
        let mut b = Array1::zeros(classes);
        let mut target = Array2::zeros((n, classes));
        for (i, &c) in y.iter().enumerate() {
            target[[i, c]] = 1.0;
        }
        for _ in 0..spec.epochs {
            let mut p = xs.dot(&w) + &b;
            p.mapv_inplace(sigmoid);
            let err = (p - &target) / n as f64;
            let gw = xs.t().dot(&err) + &(&w * spec.l2);
            let gb = err.sum_axis(Axis(0));
            w.scaled_add(-spec.learning_rate, &gw);
            b.scaled_add(-spec.learning_rate, &gb);
        }
        LogisticModel { scaler, weights: w, bias: b }
    }

    /// Per-class one-vs-rest probabilities, normalised over classes.
    pub fn predict_proba(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut p = self.scaler.apply(x).dot(&self.weights) + &self.bias;
        p.mapv_inplace(sigmoid);
        for mut row in p.outer_iter_mut() {
            let s = row.sum();
            if s > 0.0 {
                row.mapv_inplace(|v| v / s);
            }
        }
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn separates_a_line() {
        let x = array![[0.0], [1.0], [2.0], [3.0], [7.0], [8.0], [9.0], [10.0]];
        let y = [0, 0, 0, 0, 1, 1, 1, 1];
        let m = LogisticModel::fit(x.view(), &y, 2, &LrSpec::default());
        let p = m.predict_proba(array![[1.5], [8.5]].view());
        assert!(p[[0, 0]] > 0.9 && p[[1, 1]] > 0.9);
    }

    #[test]
    fn loss_decreases() {
        let x = array![[0.0, 1.0], [1.0, 0.0], [2.0, 2.0], [3.0, 5.0]];
        let y = [0, 0, 1, 1];
        let loss = |m: &LogisticModel| -> f64 {
            let p = m.predict_proba(x.view());
            -y.iter().enumerate().map(|(i, &c)| p[[i, c]].ln()).sum::<f64>()
        };
        let a = LogisticModel::fit(x.view(), &y, 2, &LrSpec { epochs: 2, ..LrSpec::default() });
        let b = LogisticModel::fit(x.view(), &y, 2, &LrSpec { epochs: 50, ..LrSpec::default() });
        assert!(loss(&b) < loss(&a));
    }
}
