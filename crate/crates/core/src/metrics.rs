//! Keypoint prediction metrics in image space: average keypoint distance
//! and the fraction of predictions within a pixel threshold.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Pixel thresholds reported by default.
pub const DEFAULT_THRESHOLDS: [f64; 3] = [15.0, 30.0, 45.0];

pub type Pixel = [f64; 2];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("annotation lengths differ: {ground_truth} ground truth vs {predictions} predictions")]
    LengthMismatch {
        ground_truth: usize,
        predictions: usize,
    },
    #[error("annotation set is empty")]
    Empty,
    #[error("non-finite coordinate at index {0}")]
    NonFinite(usize),
}

/// Ground truth and predicted keypoints, paired by index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeypointAnnotationSet {
    pub ground_truth: Vec<Pixel>,
    pub predictions: Vec<Pixel>,
}

impl KeypointAnnotationSet {
    pub fn new(ground_truth: Vec<Pixel>, predictions: Vec<Pixel>) -> Result<Self, MetricsError> {
        let set = KeypointAnnotationSet {
            ground_truth,
            predictions,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<(), MetricsError> {
        if self.ground_truth.len() != self.predictions.len() {
            return Err(MetricsError::LengthMismatch {
                ground_truth: self.ground_truth.len(),
                predictions: self.predictions.len(),
            });
        }
        if self.ground_truth.is_empty() {
            return Err(MetricsError::Empty);
        }
        let bad = self
            .ground_truth
            .iter()
            .zip(&self.predictions)
            .position(|(g, p)| !g.iter().chain(p).all(|c| c.is_finite()));
        match bad {
            Some(i) => Err(MetricsError::NonFinite(i)),
            None => Ok(()),
        }
    }

    pub fn len(&self) -> usize {
        self.ground_truth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ground_truth.is_empty()
    }

    /// Euclidean pixel distance of each pair.
    pub fn distances(&self) -> Result<Vec<f64>, MetricsError> {
        self.validate()?;
        Ok(self
            .ground_truth
            .iter()
            .zip(&self.predictions)
            .map(|(g, p)| (g[0] - p[0]).hypot(g[1] - p[1]))
            .collect())
    }
}

/// Mean pixel distance between paired points.
pub fn akd(ann: &KeypointAnnotationSet) -> Result<f64, MetricsError> {
    let d = ann.distances()?;
    Ok(d.iter().sum::<f64>() / d.len() as f64)
}

/// Fraction of predictions within `threshold` pixels (inclusive).
pub fn ap_at(ann: &KeypointAnnotationSet, threshold: f64) -> Result<f64, MetricsError> {
    let d = ann.distances()?;
    Ok(d.iter().filter(|x| **x <= threshold).count() as f64 / d.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRow {
    pub akd: f64,
    /// `(threshold, fraction)` pairs.
    pub ap: Vec<(f64, f64)>,
    pub count: usize,
}

pub fn evaluate(
    ann: &KeypointAnnotationSet,
    thresholds: &[f64],
) -> Result<MetricsRow, MetricsError> {
    Ok(MetricsRow {
        akd: akd(ann)?,
        ap: thresholds
            .iter()
            .map(|t| ap_at(ann, *t).map(|f| (*t, f)))
            .collect::<Result<_, _>>()?,
        count: ann.len(),
    })
}
