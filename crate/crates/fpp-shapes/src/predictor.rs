//! Shape prediction by iterative x-stepping.
//!
//! A point model answers "how high is the boundary at x?" — this module
//! turns that into a whole limit shape. Starting from x = 0 (always inside
//! the domain), it queries at x = 0, step, 2*step, ... until the predicted
//! y falls below the diagonal y = x, interpolates the crossing so the arc
//! closes exactly on the diagonal, and unfolds the octant into the full
//! symmetric polygon.
//!
//! Queries are issued in the model's own space: for a mean-transformed
//! model both the step grid and the returned heights carry the factor
//! `mu_e`, and the finished arc is divided back into `B(t)/t` coordinates.

use crate::distributions::DistributionSpec;
use crate::error::{Error, Result};
use crate::evaluation::PointModel;
use crate::geometry::{convex_hull, fold_to_octant, unfold_to_full, OctantBoundary, Point};
use crate::dataset::Variant;

/// Default x-increment in model space.
pub const DEFAULT_STEP: f64 = 0.005;

/// How far past the starting height the scan may run before the model is
/// declared non-physical: x is capped at `10 * y(0)`.
pub const RUNAWAY_FACTOR: f64 = 10.0;

/// A predicted limit shape in `B(t)/t` coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictedShape {
    pub octant: OctantBoundary,
    pub full_polygon: Vec<Point>,
    pub spec: DistributionSpec,
    pub model_id: String,
    pub step: f64,
}

fn query(model: &dyn PointModel, features: &crate::distributions::FeatureVector, x: f64) -> Result<f64> {
    let y = model.predict_point(features, x)?;
    if !y.is_finite() {
        return Err(Error::numeric(format!(
            "model produced a non-finite prediction at x = {x}"
        )));
    }
    Ok(y)
}

/// Scans the model from x = 0 until the prediction crosses y = x, returning
/// the octant arc in `B(t)/t` coordinates. `convexify` replaces the arc
/// with its convex regularization (off by default in callers: convexity is
/// a learned property, not an enforced one).
pub fn predict_octant_with(
    model: &dyn PointModel,
    spec: &DistributionSpec,
    step: f64,
    convexify: bool,
) -> Result<OctantBoundary> {
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::usage(format!("step must be positive, got {step}")));
    }
    let features = spec.featurize()?;
    let scale = match model.variant() {
        Variant::Raw => 1.0,
        Variant::MeanTransformed => features.mu_e,
    };

    let y0 = query(model, &features, 0.0)?;
    if y0 <= 0.0 {
        return Err(Error::numeric(format!(
            "model predicts a non-positive boundary height {y0} at x = 0 for {spec}"
        )));
    }
    let cap = RUNAWAY_FACTOR * y0;

    let mut points: Vec<Point> = vec![(0.0, y0)];
    let mut i: u64 = 0;
    let (cx, cy) = loop {
        i += 1;
        let xn = i as f64 * step;
        if xn > cap {
            return Err(Error::numeric(format!(
                "prediction for {spec} never crossed y = x before x = {cap} \
                 (10x the starting height); the model is non-physical for this spec"
            )));
        }
        let yn = query(model, &features, xn)?;
        if yn < xn {
            let &(x, y) = points.last().expect("scan starts with one point");
            // Interpolate the y = x crossing between the last kept point
            // and the first point below the diagonal.
            let d0 = y - x;
            let d1 = yn - xn;
            let t = d0 / (d0 - d1);
            if t == 0.0 {
                // The previous point already sits on the diagonal.
                break (x, y);
            }
            let cx = x + t * (xn - x);
            break (cx, cx);
        }
        points.push((xn, yn));
    };
    if points.last() != Some(&(cx, cy)) {
        points.push((cx, cy));
    }

    if scale != 1.0 {
        for p in &mut points {
            p.0 /= scale;
            p.1 /= scale;
        }
    }
    let octant = OctantBoundary::new(points)?;
    if convexify {
        let full = unfold_to_full(&octant);
        let hull = convex_hull(&full)?;
        fold_to_octant(&hull)
    } else {
        Ok(octant)
    }
}

/// [`predict_octant_with`] without convex regularization.
pub fn predict_octant(
    model: &dyn PointModel,
    spec: &DistributionSpec,
    step: f64,
) -> Result<OctantBoundary> {
    predict_octant_with(model, spec, step, false)
}

/// Predicts the octant arc and unfolds it into the full symmetric polygon.
pub fn predict_shape_with(
    model: &dyn PointModel,
    spec: &DistributionSpec,
    step: f64,
    convexify: bool,
    model_id: impl Into<String>,
) -> Result<PredictedShape> {
    let octant = predict_octant_with(model, spec, step, convexify)?;
    let full_polygon = unfold_to_full(&octant);
    Ok(PredictedShape {
        octant,
        full_polygon,
        spec: spec.clone(),
        model_id: model_id.into(),
        step,
    })
}

/// [`predict_shape_with`] with convexification off.
pub fn predict_shape(
    model: &dyn PointModel,
    spec: &DistributionSpec,
    step: f64,
    model_id: impl Into<String>,
) -> Result<PredictedShape> {
    predict_shape_with(model, spec, step, false, model_id)
}
