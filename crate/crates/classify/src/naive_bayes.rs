use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::ClassifyError;

/// Relative variance floor: every per-class variance is raised by this
/// fraction of the largest feature variance.
pub const VAR_SMOOTHING: f64 = 1e-9;

/// Gaussian naive Bayes with per-class diagonal variances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNb {
    pub log_priors: Array1<f64>,
    /// `classes x dim`.
    pub means: Array2<f64>,
    pub vars: Array2<f64>,
}

impl GaussianNb {
    pub fn fit(x: ArrayView2<f64>, y: &[usize], classes: usize) -> Result<GaussianNb, ClassifyError> {
        let d = x.ncols();
        let mut means = Array2::zeros((classes, d));
        let mut vars = Array2::zeros((classes, d));
        let mut counts = vec![0usize; classes];
        for (row, &c) in x.outer_iter().zip(y) {
            counts[c] += 1;
            let mut m = means.row_mut(c);
            m += &row;
        }
        for c in 0..classes {
            if counts[c] > 0 {
                means.row_mut(c).mapv_inplace(|v| v / counts[c] as f64);
            }
        }
        for (row, &c) in x.outer_iter().zip(y) {
            let diff = &row - &means.row(c);
            let mut v = vars.row_mut(c);
            v += &(&diff * &diff);
        }
        for c in 0..classes {
            if counts[c] > 0 {
                vars.row_mut(c).mapv_inplace(|v| v / counts[c] as f64);
            }
        }
        let overall = x.var_axis(Axis(0), 0.0);
        let floor = VAR_SMOOTHING * overall.iter().cloned().fold(0.0, f64::max);
        let floor = if floor > 0.0 { floor } else { VAR_SMOOTHING };
        vars.mapv_inplace(|v| v + floor);
        let n = y.len() as f64;
        let log_priors = counts
            .iter()
            .map(|&k| if k == 0 { f64::NEG_INFINITY } else { (k as f64 / n).ln() })
            .collect();
        Ok(GaussianNb { log_priors, means, vars })
    }

    /// Joint log-likelihood per row and class.
    pub fn log_joint(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let (k, n) = (self.means.nrows(), x.nrows());
        let mut out = Array2::zeros((n, k));
        for c in 0..k {
            let (m, v) = (self.means.row(c), self.vars.row(c));
            let norm: f64 = v.iter().map(|s| (std::f64::consts::TAU * s).ln()).sum::<f64>() * -0.5;
            let inv: Array1<f64> = v.mapv(|s| 0.5 / s);
            for (i, row) in x.outer_iter().enumerate() {
                let q: f64 = row.iter().zip(m).zip(&inv).map(|((a, b), w)| (a - b) * (a - b) * w).sum();
                out[[i, c]] = self.log_priors[c] + norm - q;
            }
        }
        out
    }

    pub fn predict_proba(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut lj = self.log_joint(x);
        for mut row in lj.outer_iter_mut() {
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            row.mapv_inplace(|v| (v - m).exp());
            let s = row.sum();
            row.mapv_inplace(|v| v / s);
        }
        lj
    }
}
