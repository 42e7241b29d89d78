use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::uqhead::{Prediction, UqHead};

/// Label shown for samples the sliders filter out of their predicted class.
pub const OTHER_LABEL: &str = "OTHER";

/// Slider positions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub outlier_tolerance: f64,
    pub class_confidence_threshold: f64,
}

impl Thresholds {
    /// Fully permissive sliders: everything routes to U1.
    pub const PERMISSIVE: Self = Self {
        outlier_tolerance: 1.0,
        class_confidence_threshold: 0.0,
    };

    pub fn new(outlier_tolerance: f64, class_confidence_threshold: f64) -> Result<Self> {
        for (name, v) in [
            ("outlier_tolerance", outlier_tolerance),
            ("class_confidence_threshold", class_confidence_threshold),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        Ok(Self {
            outlier_tolerance,
            class_confidence_threshold,
        })
    }
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            outlier_tolerance: 0.95,
            class_confidence_threshold: 0.7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum UseCase {
    #[serde(rename = "U1_HighConfidence")]
    HighConfidence,
    #[serde(rename = "U2_ClassConfusion")]
    ClassConfusion,
    #[serde(rename = "U3_OOD")]
    OutOfDistribution,
}

impl UseCase {
    pub const ALL: [UseCase; 3] = [Self::HighConfidence, Self::ClassConfusion, Self::OutOfDistribution];

    pub fn code(self) -> &'static str {
        match self {
            Self::HighConfidence => "U1_HighConfidence",
            Self::ClassConfusion => "U2_ClassConfusion",
            Self::OutOfDistribution => "U3_OOD",
        }
    }

    /// How many classes of training examples a local plot shows.
    pub fn class_count(self) -> usize {
        match self {
            Self::ClassConfusion => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for UseCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// The OOD check runs first; a sample whose every confidence is below the
/// threshold is class confusion; the rest are high confidence.
pub fn route(pred: &Prediction, th: &Thresholds) -> UseCase {
    if pred.outlier_score > th.outlier_tolerance {
        UseCase::OutOfDistribution
    } else if pred.max_confidence() < th.class_confidence_threshold {
        UseCase::ClassConfusion
    } else {
        UseCase::HighConfidence
    }
}

pub fn display_label(pred: &Prediction, use_case: UseCase) -> String {
    match use_case {
        UseCase::HighConfidence => pred.predicted_label.clone(),
        _ => OTHER_LABEL.to_string(),
    }
}

/// Class ids whose training examples go into the local plot.
pub fn select_classes(pred: &Prediction, use_case: UseCase, head: &UqHead) -> Result<Vec<usize>> {
    if pred.class_confidence_scores.len() != head.num_classes() {
        return Err(Error::Shape {
            what: "prediction class count",
            expected: head.num_classes(),
            got: pred.class_confidence_scores.len(),
        });
    }
    Ok(match use_case {
        UseCase::HighConfidence => vec![pred.predicted_class()],
        UseCase::ClassConfusion => {
            if head.num_classes() < 2 {
                return Err(Error::invalid("class confusion needs at least two classes"));
            }
            pred.top_classes(2)
        }
        UseCase::OutOfDistribution => vec![head.closest_class(&pred.embedding)?.0],
    })
}
