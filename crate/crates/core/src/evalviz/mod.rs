//! Evaluation metrics and distribution plots.

pub mod mollweide;

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grids::SO3Grid;
use crate::head::{softmax_distribution, PoseDistribution};
use crate::rotation::{geodesic_distance, Rotation};
use crate::symsol::{Dataset, ShapeModel, Split};
use crate::trainer::Model;

pub use mollweide::{mollweide, render_mollweide, rotation_to_plot, MollweideStyle};

/// Cells above this multiple of the uniform cell probability count as
/// support and are drawn in plots.
pub const SUPPORT_FACTOR: f64 = 4.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointMetrics {
    pub median_err_deg: f64,
    pub acc15: f64,
    pub acc30: f64,
}

/// Smallest geodesic distance from `pred` to any rotation in `set`, in
/// radians.
pub fn set_error(pred: &Rotation, set: &[Rotation]) -> f64 {
    set.iter()
        .map(|r| geodesic_distance(pred, r))
        .fold(f64::INFINITY, f64::min)
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn point_metrics_from_errors(errors_deg: &[f64]) -> Result<PointMetrics> {
    if errors_deg.is_empty() {
        return Err(Error::Empty("no predictions to score".into()));
    }
    let n = errors_deg.len() as f64;
    let within = |t: f64| errors_deg.iter().filter(|e| **e <= t + 1e-9).count() as f64 / n;
    Ok(PointMetrics {
        median_err_deg: median(&mut errors_deg.to_vec()),
        acc15: within(15.0),
        acc30: within(30.0),
    })
}

/// Median error and threshold accuracies where each sample's error is the
/// distance to the closest rotation of its label set.
pub fn point_metrics(predictions: &[Rotation], labels: &[Vec<Rotation>]) -> Result<PointMetrics> {
    if predictions.len() != labels.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} predictions for {} label sets",
            predictions.len(),
            labels.len()
        )));
    }
    if labels.iter().any(|s| s.is_empty()) {
        return Err(Error::Empty("a label set is empty".into()));
    }
    let errors: Vec<f64> = predictions
        .iter()
        .zip(labels)
        .map(|(p, s)| set_error(p, s).to_degrees())
        .collect();
    point_metrics_from_errors(&errors)
}

/// Mean over the set of the log density.
pub fn set_log_likelihood(dist: &PoseDistribution, set: &[Rotation]) -> f64 {
    set.iter().map(|r| dist.log_likelihood(r)).sum::<f64>() / set.len() as f64
}

/// Mean over samples of [`set_log_likelihood`].
pub fn avg_log_likelihood(dists: &[PoseDistribution], sets: &[Vec<Rotation>]) -> Result<f64> {
    if dists.is_empty() || dists.len() != sets.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} distributions for {} label sets",
            dists.len(),
            sets.len()
        )));
    }
    if sets.iter().any(|s| s.is_empty()) {
        return Err(Error::Empty("missing equivalent label set".into()));
    }
    Ok(dists
        .iter()
        .zip(sets)
        .map(|(d, s)| set_log_likelihood(d, s))
        .sum::<f64>()
        / dists.len() as f64)
}

/// Per-sample evaluation result.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleResult {
    pub argmax: Rotation,
    pub error_deg: f64,
    pub log_likelihood: f64,
    /// Cells above [`SUPPORT_FACTOR`] times uniform.
    pub support: usize,
    pub marker_visible: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub count: usize,
    pub median_err_deg: f64,
    pub acc15: f64,
    pub acc30: f64,
    pub avg_log_likelihood: f64,
    pub median_support: f64,
}

impl MetricSummary {
    pub fn from_samples<'a>(samples: impl IntoIterator<Item = &'a SampleResult>) -> Result<Self> {
        let samples: Vec<&SampleResult> = samples.into_iter().collect();
        let errors: Vec<f64> = samples.iter().map(|s| s.error_deg).collect();
        let pm = point_metrics_from_errors(&errors)?;
        let mut support: Vec<f64> = samples.iter().map(|s| s.support as f64).collect();
        Ok(MetricSummary {
            count: samples.len(),
            median_err_deg: pm.median_err_deg,
            acc15: pm.acc15,
            acc30: pm.acc30,
            avg_log_likelihood: samples.iter().map(|s| s.log_likelihood).sum::<f64>()
                / samples.len() as f64,
            median_support: median(&mut support),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeReport {
    pub shape: String,
    pub overall: MetricSummary,
    /// Marked shapes only: samples whose marker faces the camera.
    pub marker_visible: Option<MetricSummary>,
    pub marker_hidden: Option<MetricSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub grid_recursion: u32,
    pub grid_size: usize,
    pub shapes: Vec<ShapeReport>,
    pub aggregate: MetricSummary,
    /// Resolved configuration of the run that produced the report.
    pub config: serde_json::Value,
}

impl EvalReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

/// Samples evaluated concurrently; bounds memory on large grids.
const EVAL_CHUNK: usize = 16;

/// Distribution for one test image on `grid`.
pub fn predict(model: &Model, grid: &Arc<SO3Grid>, data: &Dataset, index: usize) -> Result<PoseDistribution> {
    if index >= data.len() {
        return Err(Error::InvalidArgument(format!(
            "sample index {index} out of range (dataset has {})",
            data.len()
        )));
    }
    let head = model.head_for(grid.clone());
    let prep = model.prepare();
    let (logits, _) = model.forward(&prep, &head, &data.image(index), model.eval_mask())?;
    softmax_distribution(&logits, grid)
}

/// Run the model on every sample of a test split.
pub fn evaluate(model: &Model, data: &Dataset, grid: &Arc<SO3Grid>) -> Result<Vec<SampleResult>> {
    if data.split != Split::Test || data.samples.iter().any(|s| s.equivalent.is_empty()) {
        return Err(Error::InvalidArgument(
            "evaluation needs a test split with equivalent label sets".into(),
        ));
    }
    let shape = ShapeModel::new(data.shape);
    let head = model.head_for(grid.clone());
    let prep = model.prepare();
    let mask = model.eval_mask();
    let threshold = SUPPORT_FACTOR / grid.len() as f64;
    let mut out = Vec::with_capacity(data.len());
    let indices: Vec<usize> = (0..data.len()).collect();
    for chunk in indices.chunks(EVAL_CHUNK) {
        let part: Vec<SampleResult> = chunk
            .par_iter()
            .map(|&i| {
                let (logits, _) = model.forward(&prep, &head, &data.image(i), mask.clone())?;
                let dist = softmax_distribution(&logits, grid)?;
                let sample = &data.samples[i];
                let argmax = dist.argmax_rotation();
                Ok(SampleResult {
                    argmax,
                    error_deg: set_error(&argmax, &sample.equivalent).to_degrees(),
                    log_likelihood: set_log_likelihood(&dist, &sample.equivalent),
                    support: dist.probs.iter().filter(|p| **p > threshold).count(),
                    marker_visible: shape.marker_visible(&sample.label),
                })
            })
            .collect::<Result<_>>()?;
        out.extend(part);
    }
    Ok(out)
}

/// Summaries for one shape, split by marker visibility where it applies.
pub fn shape_report(data: &Dataset, results: &[SampleResult]) -> Result<ShapeReport> {
    let overall = MetricSummary::from_samples(results)?;
    let part = |v: bool| {
        let sel: Vec<&SampleResult> = results.iter().filter(|r| r.marker_visible == Some(v)).collect();
        if sel.is_empty() {
            None
        } else {
            MetricSummary::from_samples(sel).ok()
        }
    };
    let marked = data.shape.is_marked();
    Ok(ShapeReport {
        shape: data.shape.name().to_string(),
        overall,
        marker_visible: if marked { part(true) } else { None },
        marker_hidden: if marked { part(false) } else { None },
    })
}
