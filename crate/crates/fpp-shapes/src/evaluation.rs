//! Metrics, cross-validation, and the model grid.
//!
//! Cross-validation partitions at the *simulation* level: all hull rows of
//! one simulation travel together, so a shape never helps predict itself.
//! The grid trains every (layers, units) cell — optionally the three OLS
//! formulas too — computes train/CV/test metrics for each, and sorts by CV
//! MAPE ascending.

use std::fmt;
use std::path::Path;

use rayon::prelude::*;

use crate::dataset::{ShapeDataset, Variant};
use crate::distributions::FeatureVector;
use crate::error::{Error, Result};
use crate::linreg::{Formula, LinearModel};
use crate::neuralnet::{train, EpochStats, LossKind, TrainConfig, TrainedModel};
use crate::rng::ShapeRng;
use rand::seq::SliceRandom;
use rand::SeedableRng;

/// Anything that predicts a boundary height y for a feature vector at x.
pub trait PointModel: Send + Sync {
    fn predict_point(&self, features: &FeatureVector, x: f64) -> Result<f64>;
    fn variant(&self) -> Variant;
}

impl PointModel for TrainedModel {
    fn predict_point(&self, features: &FeatureVector, x: f64) -> Result<f64> {
        self.predict(features, x)
    }

    fn variant(&self) -> Variant {
        self.variant
    }
}

impl PointModel for LinearModel {
    fn predict_point(&self, features: &FeatureVector, x: f64) -> Result<f64> {
        self.predict(features, x)
    }

    fn variant(&self) -> Variant {
        self.variant
    }
}

/// A trained model of either kind, with format-sniffing persistence.
#[derive(Debug, Clone, PartialEq)]
pub enum ShapeModel {
    Network(TrainedModel),
    Ols(LinearModel),
}

impl ShapeModel {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        match self {
            ShapeModel::Network(m) => m.save(path),
            ShapeModel::Ols(m) => m.save(path),
        }
    }

    /// Loads either model format, telling them apart by their leading bytes.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let head = text.trim_start();
        if head.starts_with('{') {
            Ok(ShapeModel::Network(TrainedModel::load(path)?))
        } else if head.starts_with("# fpp-ols") {
            Ok(ShapeModel::Ols(LinearModel::load(path)?))
        } else {
            Err(Error::format(
                path.display().to_string(),
                1,
                "neither a network model (JSON) nor a coefficient file",
            ))
        }
    }
}

impl PointModel for ShapeModel {
    fn predict_point(&self, features: &FeatureVector, x: f64) -> Result<f64> {
        match self {
            ShapeModel::Network(m) => m.predict_point(features, x),
            ShapeModel::Ols(m) => m.predict_point(features, x),
        }
    }

    fn variant(&self) -> Variant {
        match self {
            ShapeModel::Network(m) => m.variant(),
            ShapeModel::Ols(m) => m.variant(),
        }
    }
}

/// `(mae, mape)` with MAPE in percent. Rejects non-positive targets.
pub fn metrics(predictions: &[f64], targets: &[f64]) -> Result<(f64, f64)> {
    if predictions.is_empty() || predictions.len() != targets.len() {
        return Err(Error::usage(
            "metrics need equal-length, non-empty predictions and targets",
        ));
    }
    let mut abs_sum = 0.0;
    let mut pct_sum = 0.0;
    for (&p, &y) in predictions.iter().zip(targets) {
        if y <= 0.0 {
            return Err(Error::usage(format!(
                "MAPE requires positive targets, got {y}"
            )));
        }
        let a = (p - y).abs();
        abs_sum += a;
        pct_sum += a / y;
    }
    let n = predictions.len() as f64;
    Ok((abs_sum / n, 100.0 * pct_sum / n))
}

/// Runs a model over every row of a dataset and reports `(mae, mape)`.
pub fn evaluate_model(model: &dyn PointModel, dataset: &ShapeDataset) -> Result<(f64, f64)> {
    let mut preds = Vec::with_capacity(dataset.n_rows());
    let mut targets = Vec::with_capacity(dataset.n_rows());
    for row in dataset.rows() {
        preds.push(model.predict_point(row.features, row.x)?);
        targets.push(row.y);
    }
    metrics(&preds, &targets)
}

fn fold_assignment(n_sims: usize, k: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n_sims).collect();
    let mut rng = ShapeRng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut folds = vec![Vec::new(); k];
    for (pos, sim) in order.into_iter().enumerate() {
        folds[pos % k].push(sim);
    }
    folds
}

/// K-fold cross-validation at the simulation level: seeded folds of
/// near-equal simulation counts, `trainer` fitted on the complement of each
/// fold, MAPE measured on the held-out fold, and the k fold MAPEs averaged.
pub fn kfold_cv<M, F>(dataset: &ShapeDataset, k: usize, seed: u64, trainer: F) -> Result<f64>
where
    M: PointModel,
    F: Fn(&ShapeDataset) -> Result<M> + Sync,
{
    if k < 2 {
        return Err(Error::usage("cross-validation needs k >= 2"));
    }
    if dataset.sims.len() < k {
        return Err(Error::usage(format!(
            "cannot make {k} folds from {} simulations",
            dataset.sims.len()
        )));
    }
    let folds = fold_assignment(dataset.sims.len(), k, seed);
    let fold_mapes: Result<Vec<f64>> = folds
        .par_iter()
        .map(|held_out| {
            let mut in_fold = vec![false; dataset.sims.len()];
            for &i in held_out {
                in_fold[i] = true;
            }
            let train_set = ShapeDataset {
                variant: dataset.variant,
                sims: dataset
                    .sims
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| !in_fold[*i])
                    .map(|(_, s)| s.clone())
                    .collect(),
            };
            let eval_set = ShapeDataset {
                variant: dataset.variant,
                sims: held_out.iter().map(|&i| dataset.sims[i].clone()).collect(),
            };
            let model = trainer(&train_set)?;
            let (_, mape) = evaluate_model(&model, &eval_set)?;
            Ok(mape)
        })
        .collect();
    let fold_mapes = fold_mapes?;
    Ok(fold_mapes.iter().sum::<f64>() / fold_mapes.len() as f64)
}

/// Model identity inside a report row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Network { layers: usize, units: usize },
    Ols(Formula),
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelKind::Network { layers, units } => write!(f, "nn-{layers}x{units}"),
            ModelKind::Ols(formula) => write!(f, "ols-{formula}"),
        }
    }
}

/// One grid row: train/CV/test metrics for one model.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub kind: ModelKind,
    pub variant: Variant,
    pub mae_train: f64,
    pub mape_train: f64,
    pub mape_cv: f64,
    pub mape_test: f64,
}

/// Grid settings; defaults follow the experiment tables (4..10 layers,
/// 40..80 units, MAPE, 2 epochs in-grid, 5 at finalize, 10-fold CV).
#[derive(Debug, Clone)]
pub struct GridConfig {
    pub layer_grid: Vec<usize>,
    pub unit_grid: Vec<usize>,
    pub loss: LossKind,
    pub epochs: usize,
    pub final_epochs: usize,
    pub cv_folds: usize,
    pub seed: u64,
    pub include_ols: bool,
    pub normalize: bool,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            layer_grid: vec![4, 6, 8, 10],
            unit_grid: vec![40, 60, 80],
            loss: LossKind::Mape,
            epochs: 2,
            final_epochs: 5,
            cv_folds: 10,
            seed: 0,
            include_ols: false,
            normalize: false,
        }
    }
}

impl GridConfig {
    fn validate(&self) -> Result<()> {
        if self.layer_grid.is_empty() || self.unit_grid.is_empty() {
            return Err(Error::usage("grid needs at least one layer and unit count"));
        }
        if self.epochs == 0 || self.final_epochs == 0 {
            return Err(Error::usage("epochs must be at least 1"));
        }
        if self.cv_folds < 2 {
            return Err(Error::usage("cross-validation needs k >= 2"));
        }
        Ok(())
    }

    pub fn train_config(&self, layers: usize, units: usize, epochs: usize) -> TrainConfig {
        let mut cfg = TrainConfig::new(layers, units, self.loss, epochs, self.seed);
        cfg.normalize = self.normalize;
        cfg
    }
}

fn network_report(
    train_set: &ShapeDataset,
    test_set: &ShapeDataset,
    cfg: &GridConfig,
    layers: usize,
    units: usize,
) -> Result<MetricReport> {
    let tc = cfg.train_config(layers, units, cfg.epochs);
    let (model, _) = train(train_set, &tc)?;
    let (mae_train, mape_train) = evaluate_model(&model, train_set)?;
    let (_, mape_test) = evaluate_model(&model, test_set)?;
    let mape_cv = kfold_cv(train_set, cfg.cv_folds, cfg.seed, |fold| {
        train(fold, &tc).map(|(m, _)| m)
    })?;
    Ok(MetricReport {
        kind: ModelKind::Network { layers, units },
        variant: train_set.variant,
        mae_train,
        mape_train,
        mape_cv,
        mape_test,
    })
}

fn ols_report(
    train_set: &ShapeDataset,
    test_set: &ShapeDataset,
    cfg: &GridConfig,
    formula: Formula,
) -> Result<MetricReport> {
    let model = LinearModel::fit(train_set, formula)?;
    let (mae_train, mape_train) = evaluate_model(&model, train_set)?;
    let (_, mape_test) = evaluate_model(&model, test_set)?;
    let mape_cv = kfold_cv(train_set, cfg.cv_folds, cfg.seed, |fold| {
        LinearModel::fit(fold, formula)
    })?;
    Ok(MetricReport {
        kind: ModelKind::Ols(formula),
        variant: train_set.variant,
        mae_train,
        mape_train,
        mape_cv,
        mape_test,
    })
}

/// Trains and evaluates the whole grid, returning reports sorted by CV MAPE
/// ascending. Cells run in parallel; the result is deterministic.
pub fn run_grid(
    train_set: &ShapeDataset,
    test_set: &ShapeDataset,
    cfg: &GridConfig,
) -> Result<Vec<MetricReport>> {
    run_grid_with_progress(train_set, test_set, cfg, |_, _| {})
}

/// [`run_grid`] with a `(done, total)` progress callback, invoked from
/// worker threads as cells finish.
pub fn run_grid_with_progress(
    train_set: &ShapeDataset,
    test_set: &ShapeDataset,
    cfg: &GridConfig,
    progress: impl Fn(usize, usize) + Sync,
) -> Result<Vec<MetricReport>> {
    cfg.validate()?;
    if train_set.variant != test_set.variant {
        return Err(Error::usage(format!(
            "train variant {} does not match test variant {}",
            train_set.variant, test_set.variant
        )));
    }
    let mut cells: Vec<ModelKind> = Vec::new();
    for &layers in &cfg.layer_grid {
        for &units in &cfg.unit_grid {
            cells.push(ModelKind::Network { layers, units });
        }
    }
    if cfg.include_ols {
        for formula in [Formula::Simple, Formula::AllPlusX2, Formula::AllInteractions] {
            cells.push(ModelKind::Ols(formula));
        }
    }
    let total = cells.len();
    let done = std::sync::atomic::AtomicUsize::new(0);
    let mut reports: Vec<MetricReport> = cells
        .par_iter()
        .map(|kind| {
            let report = match *kind {
                ModelKind::Network { layers, units } => {
                    network_report(train_set, test_set, cfg, layers, units)
                }
                ModelKind::Ols(formula) => ols_report(train_set, test_set, cfg, formula),
            }?;
            progress(
                done.fetch_add(1, std::sync::atomic::Ordering::Relaxed) + 1,
                total,
            );
            Ok(report)
        })
        .collect::<Result<Vec<_>>>()?;
    reports.sort_by(|a, b| a.mape_cv.total_cmp(&b.mape_cv));
    Ok(reports)
}

/// The report row with the lowest CV MAPE.
pub fn best_by_cv(reports: &[MetricReport]) -> Option<&MetricReport> {
    reports
        .iter()
        .min_by(|a, b| a.mape_cv.total_cmp(&b.mape_cv))
}

/// Retrains the selected model on the full training set — networks get the
/// finalize epoch budget (5 by default).
pub fn finalize(
    train_set: &ShapeDataset,
    kind: &ModelKind,
    cfg: &GridConfig,
) -> Result<(ShapeModel, Vec<EpochStats>)> {
    cfg.validate()?;
    match *kind {
        ModelKind::Network { layers, units } => {
            let tc = cfg.train_config(layers, units, cfg.final_epochs);
            let (model, history) = train(train_set, &tc)?;
            Ok((ShapeModel::Network(model), history))
        }
        ModelKind::Ols(formula) => {
            let model = LinearModel::fit(train_set, formula)?;
            Ok((ShapeModel::Ols(model), Vec::new()))
        }
    }
}

/// Report CSV mirroring the experiment tables:
/// `model,variant,mae_train,mape_train,mape_cv,mape_test`.
pub fn report_csv(reports: &[MetricReport]) -> String {
    let mut out = String::from("model,variant,mae_train,mape_train,mape_cv,mape_test\n");
    for r in reports {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.kind, r.variant, r.mae_train, r.mape_train, r.mape_cv, r.mape_test
        ));
    }
    out
}

/// Fixed-width table for the terminal.
pub fn report_table(reports: &[MetricReport]) -> String {
    let mut out = format!(
        "{:<24} {:>10} {:>11} {:>10} {:>10}\n",
        "model", "mae_train", "mape_train", "mape_cv", "mape_test"
    );
    for r in reports {
        out.push_str(&format!(
            "{:<24} {:>10.4} {:>11.3} {:>10.3} {:>10.3}\n",
            r.kind.to_string(),
            r.mae_train,
            r.mape_train,
            r.mape_cv,
            r.mape_test
        ));
    }
    out
}
