use std::path::Path;

use dlp2c_core::eval::ConfusionMatrix;
use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::dataset::FeatureDataset;
use crate::logistic::{LogisticModel, LrSpec};
use crate::mlp::{argmax, Mlp, MlpSpec};
use crate::naive_bayes::GaussianNb;
use crate::ClassifyError;

/// Per-feature shift and scale to zero mean and unit variance; constant
/// features are only centred.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Array1<f64>,
    pub inv_std: Array1<f64>,
}

impl Standardizer {
    pub fn identity(dim: usize) -> Standardizer {
        Standardizer {
            mean: Array1::zeros(dim),
            inv_std: Array1::ones(dim),
        }
    }

    pub fn fit(x: ArrayView2<f64>) -> Standardizer {
        if x.nrows() == 0 {
            return Standardizer::identity(x.ncols());
        }
        let mean = x.mean_axis(Axis(0)).expect("non-empty");
        let inv_std = x.std_axis(Axis(0), 0.0).mapv(|s| if s > 1e-12 { 1.0 / s } else { 1.0 });
        Standardizer { mean, inv_std }
    }

    pub fn apply(&self, x: ArrayView2<f64>) -> Array2<f64> {
        (&x - &self.mean) * &self.inv_std
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", content = "spec")]
pub enum Algorithm {
    NaiveBayes,
    LogisticRegression(LrSpec),
    Mlp(MlpSpec),
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::NaiveBayes => "naive_bayes",
            Algorithm::LogisticRegression(_) => "logistic_regression",
            Algorithm::Mlp(_) => "mlp",
        }
    }

    /// `nb`, `lr` or `mlp` with default settings.
    pub fn parse(name: &str) -> Option<Algorithm> {
        match name.to_ascii_lowercase().as_str() {
            "nb" | "naive_bayes" | "naivebayes" => Some(Algorithm::NaiveBayes),
            "lr" | "logistic" | "logistic_regression" => Some(Algorithm::LogisticRegression(LrSpec::default())),
            "mlp" | "nnet" => Some(Algorithm::Mlp(MlpSpec::default())),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", content = "parameters")]
pub enum Estimator {
    NaiveBayes(GaussianNb),
    LogisticRegression(LogisticModel),
    Mlp(Mlp),
}

/// A trained classifier with the class names it predicts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub label_names: Vec<String>,
    pub dim: usize,
    pub estimator: Estimator,
}

impl Model {
    pub fn classes(&self) -> usize {
        self.label_names.len()
    }

    fn check_dim(&self, found: usize) -> Result<(), ClassifyError> {
        if found != self.dim {
            return Err(ClassifyError::DimensionMismatch { expected: self.dim, found });
        }
        Ok(())
    }

    pub fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Array2<f64>, ClassifyError> {
        self.check_dim(x.ncols())?;
        Ok(match &self.estimator {
            Estimator::NaiveBayes(m) => m.predict_proba(x),
            Estimator::LogisticRegression(m) => m.predict_proba(x),
            Estimator::Mlp(m) => m.predict_proba(x),
        })
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Vec<usize>, ClassifyError> {
        let p = self.predict_proba(x)?;
        Ok(p.outer_iter().map(|r| argmax(r.iter().copied())).collect())
    }

    pub fn predict_one(&self, features: &[f64]) -> Result<usize, ClassifyError> {
        let x = ArrayView2::from_shape((1, features.len()), features).expect("one row");
        Ok(self.predict(x)?[0])
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serialises")
    }

    pub fn from_json(text: &str) -> Result<Model, ClassifyError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), ClassifyError> {
        std::fs::write(path, self.to_json()).map_err(|source| ClassifyError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Model, ClassifyError> {
        let text = std::fs::read_to_string(path).map_err(|source| ClassifyError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Model::from_json(&text)
    }
}

/// Fits on the training split; the MLP also watches the validation split.
pub fn train(ds: &FeatureDataset, algorithm: &Algorithm) -> Result<Model, ClassifyError> {
    let (x, y) = ds.subset(&ds.split.train);
    let mut present: Vec<usize> = y.clone();
    present.sort_unstable();
    present.dedup();
    if present.len() < 2 {
        return Err(ClassifyError::DegenerateData(format!(
            "training split has {} class(es); at least 2 are needed",
            present.len()
        )));
    }
    let k = ds.classes();
    let estimator = match algorithm {
        Algorithm::NaiveBayes => Estimator::NaiveBayes(GaussianNb::fit(x.view(), &y, k)?),
        Algorithm::LogisticRegression(spec) => Estimator::LogisticRegression(LogisticModel::fit(x.view(), &y, k, spec)),
        Algorithm::Mlp(spec) => {
            spec.check().map_err(ClassifyError::InvalidSpec)?;
            let (vx, vy) = ds.subset(&ds.split.val);
            let val = (!vy.is_empty()).then_some((vx.view(), vy.as_slice()));
            Estimator::Mlp(Mlp::fit(x.view(), &y, k, spec, val))
        }
    };
    Ok(Model {
        label_names: ds.label_names.clone(),
        dim: ds.dim(),
        estimator,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub train_accuracy: f64,
    pub val_accuracy: f64,
    pub test_accuracy: f64,
    /// Test split, rows are the truth.
    pub confusion: ConfusionMatrix,
}

pub fn confusion(model: &Model, ds: &FeatureDataset, rows: &[usize]) -> Result<ConfusionMatrix, ClassifyError> {
    model.check_dim(ds.dim())?;
    let mut labels = ds.label_names.clone();
    for name in model.label_names.iter().skip(labels.len()) {
        labels.push(name.clone());
    }
    let (x, y) = ds.subset(rows);
    let pred = model.predict(x.view())?;
    Ok(ConfusionMatrix::from_pairs(labels, y.into_iter().zip(pred)))
}

pub fn evaluate(model: &Model, ds: &FeatureDataset) -> Result<Evaluation, ClassifyError> {
    let acc = |rows: &[usize]| confusion(model, ds, rows).map(|m| m.accuracy());
    Ok(Evaluation {
        train_accuracy: acc(&ds.split.train)?,
        val_accuracy: acc(&ds.split.val)?,
        test_accuracy: acc(&ds.split.test)?,
        confusion: confusion(model, ds, &ds.split.test)?,
    })
}
