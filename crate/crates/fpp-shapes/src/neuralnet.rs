//! From-scratch feed-forward regression networks.
//!
//! A network is a stack of fully connected layers: ReLU on every hidden
//! layer, a single linear output unit. Training is plain reverse-mode
//! backpropagation with the Adam optimizer on seeded mini-batches, so runs
//! are bit-reproducible. Inputs are the 102-vector `[x, mu, sigma, q01..q99]`
//! from [`FeatureVector::to_input`]; no normalization is applied unless the
//! config asks for z-scoring.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::dataset::{ShapeDataset, Variant};
use crate::distributions::FeatureVector;
use crate::error::{Error, Result};
use crate::rng::ShapeRng;

/// Width of the model input: x plus the feature vector.
pub const INPUT_WIDTH: usize = FeatureVector::DIM + 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Mape,
    Mae,
    Mse,
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossKind::Mape => "mape",
            LossKind::Mae => "mae",
            LossKind::Mse => "mse",
        })
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mape" => Ok(LossKind::Mape),
            "mae" => Ok(LossKind::Mae),
            "mse" => Ok(LossKind::Mse),
            _ => Err(Error::usage(format!(
                "unknown loss {s:?} (expected mape, mae, or mse)"
            ))),
        }
    }
}

/// Training hyperparameters. `layers` counts hidden layers, all of width
/// `hidden_units`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub layers: usize,
    pub hidden_units: usize,
    pub loss: LossKind,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon_hat: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub validation_split: f64,
    pub seed: u64,
    /// Z-score inputs using statistics of the training split. Off by
    /// default: percentile features already share a scale within a regime.
    pub normalize: bool,
}

impl TrainConfig {
    pub fn new(layers: usize, hidden_units: usize, loss: LossKind, epochs: usize, seed: u64) -> Self {
        TrainConfig {
            layers,
            hidden_units,
            loss,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon_hat: 1e-7,
            batch_size: 64,
            epochs,
            validation_split: 0.1,
            seed,
            normalize: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 || self.hidden_units == 0 {
            return Err(Error::usage("need at least one hidden layer and one unit"));
        }
        if self.epochs == 0 {
            return Err(Error::usage("epochs must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::usage("batch_size must be at least 1"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::usage("learning_rate must be positive"));
        }
        if !(0.0..1.0).contains(&self.validation_split) {
            return Err(Error::usage("validation_split must lie in [0, 1)"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::usage("beta1 and beta2 must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// Layer weights and biases; the last layer is the linear output unit.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    pub layers: Vec<(DMatrix<f64>, DVector<f64>)>,
}

/// Parameter-shaped gradient stack.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub layers: Vec<(DMatrix<f64>, DVector<f64>)>,
}

impl NetworkParams {
    /// He-uniform initialization: weights uniform on ±sqrt(6 / fan_in),
    /// biases zero, drawn in row-major order so a seed pins every value.
    pub fn init(dims: &[usize], rng: &mut ShapeRng) -> Result<Self> {
        if dims.len() < 2 || dims.iter().any(|&d| d == 0) {
            return Err(Error::usage("network needs positive input and output widths"));
        }
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for pair in dims.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let limit = (6.0 / fan_in as f64).sqrt();
            let data: Vec<f64> = (0..fan_out * fan_in)
                .map(|_| rng.random_range(-limit..limit))
                .collect();
            layers.push((
                DMatrix::from_row_slice(fan_out, fan_in, &data),
                DVector::zeros(fan_out),
            ));
        }
        Ok(NetworkParams { layers })
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].0.ncols()
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut dims = vec![self.input_width()];
        dims.extend(self.layers.iter().map(|(w, _)| w.nrows()));
        dims
    }

    /// Single-example forward pass to the scalar output.
    pub fn forward(&self, input: &[f64]) -> Result<f64> {
        if input.len() != self.input_width() {
            return Err(Error::usage(format!(
                "input width {} does not match network input width {}",
                input.len(),
                self.input_width()
            )));
        }
        let mut h = DVector::from_column_slice(input);
        let last = self.layers.len() - 1;
        for (i, (w, b)) in self.layers.iter().enumerate() {
            let mut z = w * h + b;
            if i != last {
                z.apply(|v| *v = v.max(0.0));
            }
            h = z;
        }
        Ok(h[0])
    }

    /// Batched forward pass; `inputs` holds one example per column.
    fn forward_batch(&self, inputs: &DMatrix<f64>) -> DVector<f64> {
        let mut h = inputs.clone();
        let last = self.layers.len() - 1;
        for (i, (w, b)) in self.layers.iter().enumerate() {
            let mut z = w * h;
            for mut col in z.column_iter_mut() {
                col += b;
            }
            if i != last {
                z.apply(|v| *v = v.max(0.0));
            }
            h = z;
        }
        h.row(0).transpose()
    }
}

fn subgradient_sign(r: f64) -> f64 {
    if r > 0.0 {
        1.0
    } else if r < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn per_example_loss(pred: f64, target: f64, kind: LossKind) -> Result<f64> {
    let r = pred - target;
    Ok(match kind {
        LossKind::Mse => r * r,
        LossKind::Mae => r.abs(),
        LossKind::Mape => {
            if target <= 0.0 {
                return Err(Error::usage(format!(
                    "MAPE requires positive targets, got {target}"
                )));
            }
            100.0 * r.abs() / target
        }
    })
}

/// Mean batch loss. MAPE is `(100/n) * sum |y - yhat| / y` and rejects
/// non-positive targets.
pub fn loss(predictions: &[f64], targets: &[f64], kind: LossKind) -> Result<f64> {
    if predictions.is_empty() || predictions.len() != targets.len() {
        return Err(Error::usage(
            "loss needs equal-length, non-empty predictions and targets",
        ));
    }
    let mut total = 0.0;
    for (&p, &y) in predictions.iter().zip(targets) {
        total += per_example_loss(p, y, kind)?;
    }
    Ok(total / predictions.len() as f64)
}

/// Batch loss and exact reverse-mode gradients. ReLU's subgradient at 0 is
/// taken as 0, and so is the absolute-value subgradient at residual 0.
pub fn batch_gradient(
    params: &NetworkParams,
    inputs: &DMatrix<f64>,
    targets: &DVector<f64>,
    kind: LossKind,
) -> Result<(f64, Gradients)> {
    let n = inputs.ncols();
    if n == 0 || targets.len() != n {
        return Err(Error::usage(
            "gradient needs a non-empty batch with matching targets",
        ));
    }
    if inputs.nrows() != params.input_width() {
        return Err(Error::usage(format!(
            "batch width {} does not match network input width {}",
            inputs.nrows(),
            params.input_width()
        )));
    }

    let l = params.layers.len();
    let mut hs: Vec<DMatrix<f64>> = Vec::with_capacity(l + 1);
    let mut zs: Vec<DMatrix<f64>> = Vec::with_capacity(l);
    hs.push(inputs.clone());
    for (i, (w, b)) in params.layers.iter().enumerate() {
        let mut z = w * &hs[i];
        for mut col in z.column_iter_mut() {
            col += b;
        }
        let h = if i + 1 == l {
            z.clone()
        } else {
            z.map(|v| v.max(0.0))
        };
        zs.push(z);
        hs.push(h);
    }

    let mut total = 0.0;
    let mut delta = DMatrix::zeros(1, n);
    let scale = 1.0 / n as f64;
    for j in 0..n {
        let y = targets[j];
        let p = hs[l][(0, j)];
        total += per_example_loss(p, y, kind)?;
        let r = p - y;
        delta[(0, j)] = match kind {
            LossKind::Mse => 2.0 * r * scale,
            LossKind::Mae => subgradient_sign(r) * scale,
            LossKind::Mape => 100.0 * subgradient_sign(r) / y * scale,
        };
    }
    let loss = total * scale;

    let mut grads: Vec<(DMatrix<f64>, DVector<f64>)> = Vec::with_capacity(l);
    for (w, b) in &params.layers {
        grads.push((
            DMatrix::zeros(w.nrows(), w.ncols()),
            DVector::zeros(b.len()),
        ));
    }
    for i in (0..l).rev() {
        grads[i].0 = &delta * hs[i].transpose();
        grads[i].1 = delta.column_sum();
        if i > 0 {
            let dh = params.layers[i].0.transpose() * &delta;
            delta = dh.zip_map(&zs[i - 1], |d, z| if z > 0.0 { d } else { 0.0 });
        }
    }
    Ok((loss, Gradients { layers: grads }))
}

/// First and second moment estimates, shaped like the parameters.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<(DMatrix<f64>, DVector<f64>)>,
    v: Vec<(DMatrix<f64>, DVector<f64>)>,
    tstep: u64,
}

impl AdamState {
    pub fn new(params: &NetworkParams) -> Self {
        let zeros: Vec<(DMatrix<f64>, DVector<f64>)> = params
            .layers
            .iter()
            .map(|(w, b)| {
                (
                    DMatrix::zeros(w.nrows(), w.ncols()),
                    DVector::zeros(b.len()),
                )
            })
            .collect();
        AdamState {
            m: zeros.clone(),
            v: zeros,
            tstep: 0,
        }
    }

    pub fn tstep(&self) -> u64 {
        self.tstep
    }
}

fn adam_update(theta: &mut f64, m: &mut f64, v: &mut f64, g: f64, lr: f64, cfg: &TrainConfig, bc1: f64, bc2: f64) {
    *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
    *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
    let m_hat = *m / bc1;
    let v_hat = *v / bc2;
    *theta -= lr * m_hat / (v_hat.sqrt() + cfg.epsilon_hat);
}

/// One bias-corrected Adam step:
/// `theta -= lr * m_hat / (sqrt(v_hat) + epsilon_hat)`.
pub fn adam_step(
    params: &mut NetworkParams,
    state: &mut AdamState,
    grads: &Gradients,
    cfg: &TrainConfig,
) {
    state.tstep += 1;
    let bc1 = 1.0 - cfg.beta1.powi(state.tstep as i32);
    let bc2 = 1.0 - cfg.beta2.powi(state.tstep as i32);
    for (i, (w, b)) in params.layers.iter_mut().enumerate() {
        let (gw, gb) = &grads.layers[i];
        let (mw, mb) = &mut state.m[i];
        let (vw, vb) = &mut state.v[i];
        for (((t, m), v), &g) in w.iter_mut().zip(mw.iter_mut()).zip(vw.iter_mut()).zip(gw.iter()) {
            adam_update(t, m, v, g, cfg.learning_rate, cfg, bc1, bc2);
        }
        for (((t, m), v), &g) in b.iter_mut().zip(mb.iter_mut()).zip(vb.iter_mut()).zip(gb.iter()) {
            adam_update(t, m, v, g, cfg.learning_rate, cfg, bc1, bc2);
        }
    }
}

/// Per-column z-scoring parameters fitted on the training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalization {
    fn fit(columns: &[DVector<f64>]) -> Self {
        let dim = columns[0].len();
        let n = columns.len() as f64;
        let mut mean = vec![0.0; dim];
        for col in columns {
            for (m, v) in mean.iter_mut().zip(col.iter()) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        let mut std = vec![0.0; dim];
        for col in columns {
            for ((s, v), m) in std.iter_mut().zip(col.iter()).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        for s in &mut std {
            *s = (*s / n).sqrt();
            if *s == 0.0 {
                *s = 1.0;
            }
        }
        Normalization { mean, std }
    }

    pub fn apply(&self, input: &mut [f64]) {
        for ((v, m), s) in input.iter_mut().zip(&self.mean).zip(&self.std) {
            *v = (*v - *m) / *s;
        }
    }

    fn apply_vec(&self, input: &mut DVector<f64>) {
        for ((v, m), s) in input.iter_mut().zip(&self.mean).zip(&self.std) {
            *v = (*v - *m) / *s;
        }
    }
}

/// A trained network plus everything needed to use it on new inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub params: NetworkParams,
    pub loss: LossKind,
    pub variant: Variant,
    pub normalization: Option<Normalization>,
    pub config: TrainConfig,
}

/// Train and validation loss after one epoch; validation is `None` when the
/// split is empty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
}

impl TrainedModel {
    /// Predicts y at `x` for a spec's features, in the model's own variant
    /// space.
    pub fn predict(&self, features: &FeatureVector, x: f64) -> Result<f64> {
        let mut input = features.to_input(x);
        if let Some(norm) = &self.normalization {
            norm.apply(&mut input);
        }
        self.params.forward(&input)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = ModelFile {
            format: MODEL_FORMAT.to_string(),
            variant: self.variant,
            loss: self.loss,
            dims: self.params.dims(),
            layers: self
                .params
                .layers
                .iter()
                .map(|(w, b)| LayerFile {
                    w: w.row_iter().flat_map(|r| r.iter().copied().collect::<Vec<_>>()).collect(),
                    b: b.iter().copied().collect(),
                })
                .collect(),
            normalization: self.normalization.clone(),
            config: self.config.clone(),
        };
        let json = serde_json::to_string_pretty(&file)
            .map_err(|e| Error::numeric(format!("model serialization failed: {e}")))?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let display = path.display().to_string();
        let text = std::fs::read_to_string(path)?;
        let file: ModelFile = serde_json::from_str(&text)
            .map_err(|e| Error::format(&display, e.line(), e.to_string()))?;
        if file.format != MODEL_FORMAT {
            return Err(Error::format(
                &display,
                1,
                format!("unsupported model format {:?}", file.format),
            ));
        }
        if file.dims.len() != file.layers.len() + 1 || file.dims.last() != Some(&1) {
            return Err(Error::format(&display, 1, "layer dimensions are inconsistent"));
        }
        let mut layers = Vec::with_capacity(file.layers.len());
        for (i, layer) in file.layers.iter().enumerate() {
            let (rows, cols) = (file.dims[i + 1], file.dims[i]);
            if layer.w.len() != rows * cols || layer.b.len() != rows {
                return Err(Error::format(
                    &display,
                    1,
                    format!("layer {i} does not match dims {rows}x{cols}"),
                ));
            }
            layers.push((
                DMatrix::from_row_slice(rows, cols, &layer.w),
                DVector::from_column_slice(&layer.b),
            ));
        }
        if let Some(norm) = &file.normalization {
            if norm.mean.len() != file.dims[0] || norm.std.len() != file.dims[0] {
                return Err(Error::format(&display, 1, "normalization width mismatch"));
            }
        }
        Ok(TrainedModel {
            params: NetworkParams { layers },
            loss: file.loss,
            variant: file.variant,
            normalization: file.normalization,
            config: file.config,
        })
    }
}

const MODEL_FORMAT: &str = "fpp-model v1";

#[derive(Serialize, Deserialize)]
struct LayerFile {
    w: Vec<f64>,
    b: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    variant: Variant,
    loss: LossKind,
    dims: Vec<usize>,
    layers: Vec<LayerFile>,
    normalization: Option<Normalization>,
    config: TrainConfig,
}

fn batch_matrix(inputs: &[DVector<f64>], idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(inputs[0].len(), idx.len(), |r, c| inputs[idx[c]][r])
}

fn split_loss(
    params: &NetworkParams,
    inputs: &[DVector<f64>],
    targets: &[f64],
    idx: &[usize],
    kind: LossKind,
) -> Result<f64> {
    let mut total = 0.0;
    for chunk in idx.chunks(512) {
        let batch = batch_matrix(inputs, chunk);
        let preds = params.forward_batch(&batch);
        for (row, &i) in chunk.iter().enumerate() {
            total += per_example_loss(preds[row], targets[i], kind)?;
        }
    }
    Ok(total / idx.len() as f64)
}

/// Trains a network on a dataset.
///
/// The row order is shuffled once with the config seed, the last
/// `validation_split` fraction is held out, and each epoch re-shuffles the
/// training rows before slicing mini-batches. Returns the model and the
/// per-epoch loss history.
pub fn train(dataset: &ShapeDataset, cfg: &TrainConfig) -> Result<(TrainedModel, Vec<EpochStats>)> {
    train_with_progress(dataset, cfg, |_| {})
}

/// [`train`] with a callback invoked as each epoch's losses are measured,
/// so long runs can report progress while they happen.
pub fn train_with_progress(
    dataset: &ShapeDataset,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<(TrainedModel, Vec<EpochStats>)> {
    cfg.validate()?;
    let mut inputs: Vec<DVector<f64>> = Vec::with_capacity(dataset.n_rows());
    let mut targets: Vec<f64> = Vec::with_capacity(dataset.n_rows());
    for row in dataset.rows() {
        inputs.push(DVector::from_vec(row.features.to_input(row.x)));
        targets.push(row.y);
    }
    if inputs.is_empty() {
        return Err(Error::usage("cannot train on an empty dataset"));
    }

    let mut rng = ShapeRng::seed_from_u64(cfg.seed);
    let dims: Vec<usize> = std::iter::once(INPUT_WIDTH)
        .chain(std::iter::repeat(cfg.hidden_units).take(cfg.layers))
        .chain(std::iter::once(1))
        .collect();
    let mut params = NetworkParams::init(&dims, &mut rng)?;

    let mut order: Vec<usize> = (0..inputs.len()).collect();
    order.shuffle(&mut rng);
    let n_val = (inputs.len() as f64 * cfg.validation_split).floor() as usize;
    let n_train = inputs.len() - n_val;
    if n_train == 0 {
        return Err(Error::usage(
            "validation split leaves no training rows",
        ));
    }
    let (train_idx, val_idx) = order.split_at(n_train);
    let mut train_idx = train_idx.to_vec();
    let val_idx = val_idx.to_vec();

    let normalization = if cfg.normalize {
        let cols: Vec<DVector<f64>> = train_idx.iter().map(|&i| inputs[i].clone()).collect();
        let norm = Normalization::fit(&cols);
        for input in &mut inputs {
            norm.apply_vec(input);
        }
        Some(norm)
    } else {
        None
    };

    let mut state = AdamState::new(&params);
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        train_idx.shuffle(&mut rng);
        for chunk in train_idx.chunks(cfg.batch_size) {
            let batch = batch_matrix(&inputs, chunk);
            let batch_targets =
                DVector::from_iterator(chunk.len(), chunk.iter().map(|&i| targets[i]));
            let (_, grads) = batch_gradient(&params, &batch, &batch_targets, cfg.loss)?;
            adam_step(&mut params, &mut state, &grads, cfg);
        }
        let train_loss = split_loss(&params, &inputs, &targets, &train_idx, cfg.loss)?;
        let val_loss = if val_idx.is_empty() {
            None
        } else {
            Some(split_loss(&params, &inputs, &targets, &val_idx, cfg.loss)?)
        };
        let stats = EpochStats {
            epoch,
            train_loss,
            val_loss,
        };
        on_epoch(&stats);
        history.push(stats);
    }

    Ok((
        TrainedModel {
            params,
            loss: cfg.loss,
            variant: dataset.variant,
            normalization,
            config: cfg.clone(),
        },
        history,
    ))
}
