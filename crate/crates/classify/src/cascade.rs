use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use crate::model::Model;
use crate::ClassifyError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FigureCategory {
    NeuronsPlot,
    Box2D,
    Stacked2D,
    Box3D,
    Pipeline,
}

impl FigureCategory {
    pub const ALL: [FigureCategory; 5] = [
        FigureCategory::NeuronsPlot,
        FigureCategory::Box2D,
        FigureCategory::Stacked2D,
        FigureCategory::Box3D,
        FigureCategory::Pipeline,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FigureCategory::NeuronsPlot => "NeuronsPlot",
            FigureCategory::Box2D => "Box2D",
            FigureCategory::Stacked2D => "Stacked2D",
            FigureCategory::Box3D => "Box3D",
            FigureCategory::Pipeline => "Pipeline",
        }
    }

    pub fn parse(s: &str) -> Option<FigureCategory> {
        FigureCategory::ALL.into_iter().find(|c| c.name().eq_ignore_ascii_case(s.trim()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoarseLabel {
    DesignFlow,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CascadeOutput {
    pub coarse: CoarseLabel,
    pub category: Option<FigureCategory>,
}

/// Binary design-flow detector followed by a five-way figure classifier
/// that only sees coarse positives.
#[derive(Debug, Default)]
pub struct Cascade {
    pub coarse: Option<Model>,
    pub fine: Option<Model>,
    coarse_positives: AtomicUsize,
    fine_calls: AtomicUsize,
}

impl Cascade {
    pub fn new(coarse: Option<Model>, fine: Option<Model>) -> Cascade {
        Cascade {
            coarse,
            fine,
            ..Cascade::default()
        }
    }

    /// Class index that means "design flow": the class named
    /// `design_flow`, otherwise class 1.
    fn positive_class(model: &Model) -> usize {
        model
            .label_names
            .iter()
            .position(|n| n.eq_ignore_ascii_case("design_flow"))
            .unwrap_or(1)
    }

    pub fn coarse_classify(&self, features: &[f64]) -> Result<CoarseLabel, ClassifyError> {
        let m = self.coarse.as_ref().ok_or(ClassifyError::ModelNotLoaded("coarse"))?;
        if m.predict_one(features)? == Cascade::positive_class(m) {
            self.coarse_positives.fetch_add(1, Ordering::Relaxed);
            Ok(CoarseLabel::DesignFlow)
        } else {
            Ok(CoarseLabel::Other)
        }
    }

    /// Class names are matched to categories by name, otherwise by index.
    pub fn fine_classify(&self, features: &[f64]) -> Result<FigureCategory, ClassifyError> {
        let m = self.fine.as_ref().ok_or(ClassifyError::ModelNotLoaded("fine"))?;
        self.fine_calls.fetch_add(1, Ordering::Relaxed);
        let k = m.predict_one(features)?;
        Ok(FigureCategory::parse(&m.label_names[k]).unwrap_or(FigureCategory::ALL[k % FigureCategory::ALL.len()]))
    }

    pub fn classify(&self, features: &[f64]) -> Result<CascadeOutput, ClassifyError> {
        let coarse = self.coarse_classify(features)?;
        let category = match coarse {
            CoarseLabel::DesignFlow => Some(self.fine_classify(features)?),
            CoarseLabel::Other => None,
        };
        Ok(CascadeOutput { coarse, category })
    }

    pub fn fine_calls(&self) -> usize {
        self.fine_calls.load(Ordering::Relaxed)
    }

    pub fn coarse_positives(&self) -> usize {
        self.coarse_positives.load(Ordering::Relaxed)
    }
}
