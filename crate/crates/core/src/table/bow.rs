use std::collections::HashMap;
use std::sync::OnceLock;

use super::{CellGrid, TableConfig};
use crate::lexicon::Lexicon;

const DESIGN_CORPUS: &str = include_str!("../../data/corpus/design.json");
const RESULTS_CORPUS: &str = include_str!("../../data/corpus/results.json");

/// Bag-of-words prototypes separating architecture tables from results
/// tables.
#[derive(Debug, Clone)]
pub struct BowModel {
    pub vocabulary: Vec<String>,
    index: HashMap<String, usize>,
    pub design_prototype: Vec<f64>,
    pub results_prototype: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignScore {
    pub is_design: bool,
    pub design_cosine: f64,
    pub results_cosine: f64,
}

/// Lowercase runs of ASCII letters.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_ascii_alphabetic())
        .filter(|t| !t.is_empty())
        .map(str::to_ascii_lowercase)
}

pub fn design_corpus() -> Vec<CellGrid> {
    serde_json::from_str(DESIGN_CORPUS).expect("shipped corpus parses")
}

pub fn results_corpus() -> Vec<CellGrid> {
    serde_json::from_str(RESULTS_CORPUS).expect("shipped corpus parses")
}

fn normalized(mut v: Vec<f64>) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl BowModel {
    /// Vocabulary from the lexicon aliases and the configured keywords.
    pub fn default_vocabulary(lexicon: &Lexicon, config: &TableConfig) -> Vec<String> {
        let mut vocab: Vec<String> = Vec::new();
        let aliases = lexicon.entries().iter().flat_map(|(_, a)| a.iter().map(String::as_str));
        let keywords = config.vocabulary.design.iter().chain(&config.vocabulary.results);
        for text in aliases.chain(keywords.map(String::as_str)) {
            for t in tokenize(text).filter(|t| t.len() >= 2) {
                if !vocab.contains(&t) {
                    vocab.push(t);
                }
            }
        }
        vocab
    }

    /// Prototypes are the normalised sums of the normalised vectors of each
    /// corpus.
    pub fn train(vocabulary: Vec<String>, design: &[CellGrid], results: &[CellGrid]) -> BowModel {
        let index = vocabulary.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        let mut model = BowModel {
            design_prototype: vec![0.0; vocabulary.len()],
            results_prototype: vec![0.0; vocabulary.len()],
            vocabulary,
            index,
        };
        let centroid = |grids: &[CellGrid]| {
            let mut sum = vec![0.0; model.vocabulary.len()];
            for g in grids {
                for (s, x) in sum.iter_mut().zip(model.vector(g)) {
                    *s += x;
                }
            }
            normalized(sum)
        };
        let d = centroid(design);
        let r = centroid(results);
        model.design_prototype = d;
        model.results_prototype = r;
        model
    }

    /// The model trained on the shipped corpora.
    pub fn builtin() -> &'static BowModel {
        static MODEL: OnceLock<BowModel> = OnceLock::new();
        MODEL.get_or_init(|| {
            let vocab = BowModel::default_vocabulary(Lexicon::builtin(), TableConfig::builtin());
            BowModel::train(vocab, &design_corpus(), &results_corpus())
        })
    }

    /// L2-normalised term counts of caption and cells; zero when no term
    /// is in the vocabulary.
    pub fn vector(&self, grid: &CellGrid) -> Vec<f64> {
        let mut v = vec![0.0; self.vocabulary.len()];
        for t in tokenize(&grid.text()) {
            if let Some(&i) = self.index.get(&t) {
                v[i] += 1.0;
            }
        }
        normalized(v)
    }

    pub fn score(&self, grid: &CellGrid) -> DesignScore {
        let v = self.vector(grid);
        let design_cosine = dot(&v, &self.design_prototype);
        let results_cosine = dot(&v, &self.results_prototype);
        DesignScore {
            is_design: design_cosine > results_cosine,
            design_cosine,
            results_cosine,
        }
    }
}

pub fn bow_vector(grid: &CellGrid, model: &BowModel) -> Vec<f64> {
    model.vector(grid)
}

pub fn is_design_table(grid: &CellGrid, model: &BowModel) -> DesignScore {
    model.score(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn model() -> &'static BowModel {
        BowModel::builtin()
    }

    #[test]
    fn vocabulary_is_lowercase_and_unique() {
        let v = &model().vocabulary;
        for (i, t) in v.iter().enumerate() {
            assert_eq!(t, &t.to_ascii_lowercase());
            assert!(!v[..i].contains(t), "{t}");
        }
        for t in ["conv", "pool", "fc", "stride", "kernel", "relu", "softmax", "accuracy"] {
            assert!(v.contains(&t.to_string()), "{t}");
        }
    }

    #[test]
    fn counts_only_vocabulary_terms() {
        let g = CellGrid::from_strs("", &[&["conv conv pool"]]);
        let v = model().vector(&g);
        let idx = |t: &str| model().vocabulary.iter().position(|x| x == t).unwrap();
        let (c, p) = (v[idx("conv")], v[idx("pool")]);
        assert!((c - 2.0 / 5f64.sqrt()).abs() < 1e-12 && (p - 1.0 / 5f64.sqrt()).abs() < 1e-12);
        let rest: f64 = v.iter().map(|x| x * x).sum::<f64>() - c * c - p * p;
        assert!(rest.abs() < 1e-12);
    }

    #[test]
    fn empty_grid_is_not_a_design() {
        let g = CellGrid::default();
        assert!(model().vector(&g).iter().all(|x| *x == 0.0));
        assert!(!model().score(&g).is_design);
        let g = CellGrid::from_strs("", &[&["1", "2"], &["3", "4"]]);
        assert!(!model().score(&g).is_design);
    }

    #[test]
    fn prototypes_are_unit_vectors() {
        for p in [&model().design_prototype, &model().results_prototype] {
            assert!((dot(p, p) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn typical_tables() {
        let results = CellGrid::from_strs("Accuracy of the classifiers", &[&["", "train", "test"], &["NNet", "98.3%", "99.9%"]]);
        assert!(!model().score(&results).is_design);
        let arch = CellGrid::from_strs(
            "",
            &[
                &["layer", "kernel", "stride"],
                &["conv1", "3", "1"],
                &["pool1", "2", "2"],
                &["fc6", "", ""],
            ],
        );
        assert!(model().score(&arch).is_design);
        let s = model().score(&design_corpus()[1]);
        assert!(s.design_cosine > s.results_cosine);
    }

    #[test]
    fn shipped_corpora_are_separated() {
        for g in design_corpus() {
            assert!(model().score(&g).is_design, "{}", g.caption);
        }
        for g in results_corpus() {
            assert!(!model().score(&g).is_design, "{}", g.caption);
        }
    }

    #[test]
    fn leave_one_out() {
        let vocab = model().vocabulary.clone();
        let (design, results) = (design_corpus(), results_corpus());
        let mut errors = Vec::new();
        for (is_design, set) in [(true, &design), (false, &results)] {
            for i in 0..set.len() {
                let mut rest = set.clone();
                let held = rest.remove(i);
                let m = if is_design {
                    BowModel::train(vocab.clone(), &rest, &results)
                } else {
                    BowModel::train(vocab.clone(), &design, &rest)
                };
                if m.score(&held).is_design != is_design {
                    errors.push(held.caption);
                }
            }
        }
        assert!(errors.is_empty(), "{errors:?}");
    }

    proptest! {
        #[test]
        fn duplicating_rows_keeps_the_decision(idx in 0usize..40, times in 2usize..5) {
            let all: Vec<CellGrid> = design_corpus().into_iter().chain(results_corpus()).collect();
            let g = &all[idx];
            let mut rows = Vec::new();
            for r in &g.rows {
                for _ in 0..times {
                    rows.push(r.clone());
                }
            }
            let caption = vec![g.caption.as_str(); times].join(" ");
            let dup = CellGrid::new(caption, rows);
            let (a, b) = (model().score(g), model().score(&dup));
            prop_assert_eq!(a.is_design, b.is_design);
            prop_assert!((a.design_cosine - b.design_cosine).abs() < 1e-9);
        }
    }
}
