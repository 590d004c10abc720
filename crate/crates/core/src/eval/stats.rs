use serde::{Deserialize, Serialize};

use super::EvalError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxPlotStats {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
    pub n: usize,
}

/// Quantile of sorted data by linear interpolation between order
/// statistics at `h = (n - 1) p` (Hyndman–Fan type 7).
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn boxplot(values: &[f64]) -> Result<BoxPlotStats, EvalError> {
    if values.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(BoxPlotStats {
        min: v[0],
        q1: quantile(&v, 0.25),
        median: quantile(&v, 0.5),
        q3: quantile(&v, 0.75),
        max: v[v.len() - 1],
        mean: v.iter().sum::<f64>() / v.len() as f64,
        n: v.len(),
    })
}

/// Counts indexed `[truth][predicted]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(labels: Vec<String>) -> ConfusionMatrix {
        let k = labels.len();
        ConfusionMatrix {
            labels,
            counts: vec![vec![0; k]; k],
        }
    }

    pub fn from_pairs(labels: Vec<String>, pairs: impl IntoIterator<Item = (usize, usize)>) -> ConfusionMatrix {
        let mut m = ConfusionMatrix::new(labels);
        for (t, p) in pairs {
            m.add(t, p);
        }
        m
    }

    pub fn add(&mut self, truth: usize, predicted: usize) {
        self.counts[truth][predicted] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        let diag: u64 = (0..self.labels.len()).map(|i| self.counts[i][i]).sum();
        diag as f64 / total as f64
    }

    /// Recall of each truth class; `None` for classes without samples.
    pub fn recalls(&self) -> Vec<Option<f64>> {
        (0..self.labels.len())
            .map(|i| {
                let row: u64 = self.counts[i].iter().sum();
                (row > 0).then(|| self.counts[i][i] as f64 / row as f64)
            })
            .collect()
    }

    /// Header row of predicted labels, then one row per truth label.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut head = vec!["truth\\predicted".to_string()];
        head.extend(self.labels.iter().cloned());
        w.write_record(&head).expect("writing to memory");
        for (l, row) in self.labels.iter().zip(&self.counts) {
            let mut r = vec![l.clone()];
            r.extend(row.iter().map(u64::to_string));
            w.write_record(&r).expect("writing to memory");
        }
        String::from_utf8(w.into_inner().expect("writing to memory")).expect("utf-8")
    }
}
