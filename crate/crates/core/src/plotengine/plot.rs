use serde::{Deserialize, Serialize};

use super::contour::{contour_field, BoundingBox, IsoLines, GRID_SIZE, RELATIVE_LEVELS};
use super::routing::{display_label, route, select_classes, Thresholds, UseCase};
use crate::dimred::pca2;
use crate::drmetrics::DRQuality;
use crate::error::{Error, Result};
use crate::uqhead::{Prediction, TrainingExampleStore, UqHead};

/// Fraction of the point extent added on each side of the plot box.
pub const PLOT_PADDING: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestPoint {
    pub coords: [f64; 2],
    pub prediction: Prediction,
    pub display_label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainPoint {
    pub coords: [f64; 2],
    pub class_id: usize,
    pub class: String,
    pub prediction: Prediction,
    pub is_prototype: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contour {
    pub level: f64,
    pub class_id: usize,
    pub class: String,
    pub polylines: Vec<Vec<[f64; 2]>>,
}

/// Projection metrics plus the leading PCA eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlotQuality {
    #[serde(flatten)]
    pub metrics: DRQuality,
    pub scree: [f64; 5],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalPlot {
    pub test_point: TestPoint,
    pub train_points: Vec<TrainPoint>,
    pub contours: Vec<Contour>,
    pub quality: PlotQuality,
    pub scree: [f64; 5],
    pub use_case: UseCase,
    pub classes_shown: Vec<usize>,
    pub bbox: BoundingBox,
}

impl LocalPlot {
    /// Test point plus training points.
    pub fn point_count(&self) -> usize {
        1 + self.train_points.len()
    }
}

/// Embeddings of the local plot in plotting order: the test sample, then for
/// each class its stored examples followed by its prototype.
pub fn local_points(pred: &Prediction, classes: &[usize], store: &TrainingExampleStore) -> Result<Vec<Vec<f64>>> {
    let mut out = vec![pred.embedding.clone()];
    for &c in classes {
        let group = store
            .class(c)
            .ok_or_else(|| Error::invalid(format!("store has no examples for class {c}")))?;
        out.extend(group.points().map(|e| e.prediction.embedding.clone()));
    }
    Ok(out)
}

pub fn build_local_plot(
    pred: &Prediction,
    th: &Thresholds,
    store: &TrainingExampleStore,
    head: &UqHead,
) -> Result<LocalPlot> {
    build_local_plot_as(pred, route(pred, th), store, head)
}

/// Local plot for an explicitly chosen use case.
pub fn build_local_plot_as(
    pred: &Prediction,
    use_case: UseCase,
    store: &TrainingExampleStore,
    head: &UqHead,
) -> Result<LocalPlot> {
    let classes = select_classes(pred, use_case, head)?;
    let high = local_points(pred, &classes, store)?;
    let proj = pca2(&high)?;
    let metrics = DRQuality::compute(&high, &proj.rows())?;

    let mut coords = proj.coords.iter().copied();
    let test_point = TestPoint {
        coords: coords.next().expect("projection includes the test point"),
        prediction: pred.clone(),
        display_label: display_label(pred, use_case),
    };
    let mut train_points = Vec::new();
    for &c in &classes {
        let group = store.class(c).expect("checked by local_points");
        for (e, xy) in group.points().zip(coords.by_ref()) {
            train_points.push(TrainPoint {
                coords: xy,
                class_id: c,
                class: head.labels()[c].clone(),
                prediction: e.prediction.clone(),
                is_prototype: e.is_prototype,
            });
        }
    }

    let bbox = BoundingBox::around(&proj.coords, PLOT_PADDING);
    let mut contours = Vec::new();
    for &c in &classes {
        let examples: Vec<&TrainPoint> = train_points.iter().filter(|p| p.class_id == c && !p.is_prototype).collect();
        let xy: Vec<[f64; 2]> = examples.iter().map(|p| p.coords).collect();
        let weights: Vec<f64> = examples
            .iter()
            .map(|p| match use_case {
                UseCase::OutOfDistribution => 1.0 - p.prediction.outlier_score,
                _ => p.prediction.class_confidence_scores[c],
            })
            .collect();
        for IsoLines { level, polylines } in contour_field(&xy, &weights, bbox, GRID_SIZE, &RELATIVE_LEVELS)? {
            contours.push(Contour {
                level,
                class_id: c,
                class: head.labels()[c].clone(),
                polylines,
            });
        }
    }

    Ok(LocalPlot {
        test_point,
        train_points,
        contours,
        quality: PlotQuality {
            metrics,
            scree: proj.scree,
        },
        scree: proj.scree,
        use_case,
        classes_shown: classes,
        bbox,
    })
}
