//! `fpp` — the first-passage-percolation limit-shape pipeline on the
//! command line.
//!
//! Eight subcommands cover the pipeline end to end: `simulate` one spec,
//! `build-dataset` for a whole regime, `featurize` a spec, `train` a model,
//! sweep the model `grid`, cross-validate with `cv`, `evaluate` a saved
//! model, and `predict` a shape. Results (CSV, SVG, model files) go to
//! stdout or the requested paths; progress and human-readable summaries go
//! to stderr, so stdout stays pipeable.
//!
//! Exit codes: 0 success, 1 usage error, 2 data/format error (malformed or
//! unreadable files), 3 numeric failure (non-convergence, model runaway).
//!
//! A TOML config file (`--config`) may supply defaults for any tunable;
//! explicit flags always win.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand};
use fpp_shapes::dataset::{
    build_dataset_with_progress, BuildConfig, ShapeDataset, Variant, DEFAULT_EDGE_BUDGET,
    DESK_EDGE_BUDGET,
};
use fpp_shapes::distributions::{DistributionSpec, FeatureVector, Regime};
use fpp_shapes::error::{Error, Result};
use fpp_shapes::evaluation::{
    evaluate_model, kfold_cv, report_csv, report_table, run_grid_with_progress, GridConfig,
    PointModel, ShapeModel,
};
use fpp_shapes::geometry::{convex_hull, polygon_csv, polygons_svg};
use fpp_shapes::linreg::{Formula, LinearModel};
use fpp_shapes::neuralnet::{train_with_progress, EpochStats, LossKind, TrainConfig};
use fpp_shapes::predictor::{predict_shape_with, DEFAULT_STEP};
use fpp_shapes::simulator::run_fpp_recording;
use serde::Deserialize;

const CONFIG_HELP: &str = "\
Config file (--config) is TOML whose keys mirror the flags in kebab-case:\n\
  seed, jobs, edge-budget, variant, regime, n, step, layers, units,\n\
  layer-grid, unit-grid, loss, epochs, learning-rate, batch-size,\n\
  validation-split, normalize, folds, include-ols\n\
Explicit flags win over config values; built-in defaults fill the rest.\n\n\
Exit codes: 0 success, 1 usage error, 2 data/format error, 3 numeric failure.";

#[derive(Parser)]
#[command(name = "fpp", version, about = "First-passage-percolation limit-shape pipeline")]
#[command(after_long_help = CONFIG_HELP)]
struct Cli {
    /// TOML config file supplying defaults for any flag (flags win)
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Master seed for every stochastic stage [default: 0]
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for dataset building and grid evaluation
    /// [default: all logical cores]
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation; write the raw cloud, scaled hull, or an SVG
    Simulate(SimulateArgs),
    /// Simulate a whole regime into a dataset CSV
    BuildDataset(BuildDatasetArgs),
    /// Print the feature row of a distribution spec
    Featurize(FeaturizeArgs),
    /// Train a network (or fit an OLS baseline) on a dataset
    Train(TrainArgs),
    /// Sweep the model grid and report train/CV/test metrics
    Grid(GridArgs),
    /// K-fold cross-validate one model configuration
    Cv(CvArgs),
    /// Evaluate a saved model against a dataset
    Evaluate(EvaluateArgs),
    /// Predict the limit shape for a spec from a saved model
    Predict(PredictArgs),
}

/// Optional TOML defaults; every field mirrors a flag.
#[derive(Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct FileConfig {
    seed: Option<u64>,
    jobs: Option<usize>,
    edge_budget: Option<u64>,
    variant: Option<String>,
    regime: Option<String>,
    n: Option<u64>,
    step: Option<f64>,
    layers: Option<usize>,
    units: Option<usize>,
    layer_grid: Option<Vec<usize>>,
    unit_grid: Option<Vec<usize>>,
    loss: Option<String>,
    epochs: Option<usize>,
    learning_rate: Option<f64>,
    batch_size: Option<usize>,
    validation_split: Option<f64>,
    normalize: Option<bool>,
    folds: Option<usize>,
    include_ols: Option<bool>,
}

impl FileConfig {
    fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let display = path.display().to_string();
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start.min(text.len())].lines().count().max(1))
                .unwrap_or(1);
            Error::format(display, line, e.message().to_string())
        })
    }

    fn variant(&self) -> Result<Option<Variant>> {
        self.variant.as_deref().map(str::parse).transpose()
    }

    fn regime(&self) -> Result<Option<Regime>> {
        self.regime.as_deref().map(str::parse).transpose()
    }

    fn loss(&self) -> Result<Option<LossKind>> {
        self.loss.as_deref().map(str::parse).transpose()
    }
}

#[derive(Args)]
struct SimulateArgs {
    /// Distribution spec, `family:p1,p2[,p3]` (e.g. `gamma:3,0.5`)
    #[arg(long)]
    spec: DistributionSpec,

    /// Queue-pop budget [default: 300000; 50000 is the desk-scale choice]
    #[arg(long)]
    edge_budget: Option<u64>,

    /// Write raw infected sites as CSV `x,y,time` (lattice coordinates)
    #[arg(long, value_name = "PATH")]
    cloud: Option<PathBuf>,

    /// Write the scaled-hull vertices as CSV `x,y`
    #[arg(long, value_name = "PATH")]
    hull: Option<PathBuf>,

    /// Write the scaled hull as an SVG
    #[arg(long, value_name = "PATH")]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct BuildDatasetArgs {
    /// Sampling regime: train, test, or pareto-test [default: train]
    #[arg(long)]
    regime: Option<Regime>,

    /// Number of simulations [default: 100]
    #[arg(long)]
    n: Option<u64>,

    /// Queue-pop budget per simulation [default: 300000]
    #[arg(long)]
    edge_budget: Option<u64>,

    /// Dataset variant: raw or mean-transformed [default: mean-transformed]
    #[arg(long)]
    variant: Option<Variant>,

    /// Output CSV path; a `.gz` suffix compresses
    #[arg(long, value_name = "PATH")]
    out: PathBuf,
}

#[derive(Args)]
struct FeaturizeArgs {
    /// Distribution spec, `family:p1,p2[,p3]`
    #[arg(long)]
    spec: DistributionSpec,
}

#[derive(Args)]
struct TrainArgs {
    /// Training dataset CSV, `.gz` accepted
    #[arg(long, value_name = "PATH")]
    dataset: PathBuf,

    /// Where to write the trained model
    #[arg(long, value_name = "PATH")]
    model_out: PathBuf,

    /// Write per-epoch losses as CSV `epoch,train_loss,val_loss`
    #[arg(long, value_name = "PATH")]
    history: Option<PathBuf>,

    /// Hidden layers [default: 10, the full-scale configuration]
    #[arg(long)]
    layers: Option<usize>,

    /// Units per hidden layer [default: 60]
    #[arg(long)]
    units: Option<usize>,

    /// Loss: mape, mae, or mse [default: mape]
    #[arg(long)]
    loss: Option<LossKind>,

    /// Training epochs [default: 5]
    #[arg(long)]
    epochs: Option<usize>,

    /// Adam learning rate [default: 0.001]
    #[arg(long)]
    learning_rate: Option<f64>,

    /// Mini-batch size [default: 64]
    #[arg(long)]
    batch_size: Option<usize>,

    /// Fraction of rows held out for validation [default: 0.1]
    #[arg(long)]
    validation_split: Option<f64>,

    /// Z-score inputs with training-split statistics
    #[arg(long, action = ArgAction::SetTrue)]
    normalize: bool,

    /// Fit an OLS baseline instead: simple, all-plus-x2, or all-interactions
    #[arg(long)]
    formula: Option<Formula>,
}

#[derive(Args)]
struct GridArgs {
    /// Training dataset CSV, `.gz` accepted
    #[arg(long, value_name = "PATH")]
    train: PathBuf,

    /// Held-out test dataset of the same variant
    #[arg(long, value_name = "PATH")]
    test: PathBuf,

    /// Report CSV destination [default: stdout]
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Hidden-layer counts to sweep [default: 4,6,8,10]
    #[arg(long, value_delimiter = ',')]
    layers: Option<Vec<usize>>,

    /// Unit widths to sweep [default: 40,60,80]
    #[arg(long, value_delimiter = ',')]
    units: Option<Vec<usize>>,

    /// Loss: mape, mae, or mse [default: mape]
    #[arg(long)]
    loss: Option<LossKind>,

    /// In-grid training epochs [default: 2]
    #[arg(long)]
    epochs: Option<usize>,

    /// Cross-validation folds [default: 10]
    #[arg(long)]
    folds: Option<usize>,

    /// Also fit the three OLS baseline formulas
    #[arg(long, action = ArgAction::SetTrue)]
    include_ols: bool,

    /// Z-score inputs with training-split statistics
    #[arg(long, action = ArgAction::SetTrue)]
    normalize: bool,
}

#[derive(Args)]
struct CvArgs {
    /// Dataset CSV, `.gz` accepted
    #[arg(long, value_name = "PATH")]
    dataset: PathBuf,

    /// Cross-validation folds [default: 10]
    #[arg(long)]
    folds: Option<usize>,

    /// Hidden layers [default: 10]
    #[arg(long)]
    layers: Option<usize>,

    /// Units per hidden layer [default: 60]
    #[arg(long)]
    units: Option<usize>,

    /// Loss: mape, mae, or mse [default: mape]
    #[arg(long)]
    loss: Option<LossKind>,

    /// Training epochs per fold [default: 2]
    #[arg(long)]
    epochs: Option<usize>,

    /// Adam learning rate [default: 0.001]
    #[arg(long)]
    learning_rate: Option<f64>,

    /// Mini-batch size [default: 64]
    #[arg(long)]
    batch_size: Option<usize>,

    /// Fraction of rows held out for validation [default: 0.1]
    #[arg(long)]
    validation_split: Option<f64>,

    /// Z-score inputs with training-split statistics
    #[arg(long, action = ArgAction::SetTrue)]
    normalize: bool,

    /// Cross-validate an OLS formula instead of a network
    #[arg(long)]
    formula: Option<Formula>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Saved model (network JSON or OLS coefficient CSV)
    #[arg(long, value_name = "PATH")]
    model: PathBuf,

    /// Dataset CSV, `.gz` accepted
    #[arg(long, value_name = "PATH")]
    dataset: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    /// Distribution spec, `family:p1,p2[,p3]`
    #[arg(long)]
    spec: DistributionSpec,

    /// Saved model (network JSON or OLS coefficient CSV)
    #[arg(long, value_name = "PATH")]
    model: PathBuf,

    /// Scan step in model space [default: 0.005]
    #[arg(long)]
    step: Option<f64>,

    /// Write the full predicted polygon as an SVG
    #[arg(long, value_name = "PATH")]
    svg: Option<PathBuf>,

    /// Write the full predicted polygon as CSV `x,y`
    #[arg(long, value_name = "PATH")]
    csv: Option<PathBuf>,

    /// Replace the predicted arc with its convex regularization
    #[arg(long, action = ArgAction::SetTrue)]
    convex_hull: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are successes; everything else is
            // a usage error (clap's own default would be exit code 2).
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fpp: {e}");
            ExitCode::from(match e {
                Error::Usage(_) => 1,
                Error::Format { .. } | Error::Io(_) => 2,
                Error::Numeric(_) => 3,
            })
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let fc = FileConfig::load(cli.config.as_deref())?;
    let seed = cli.seed.or(fc.seed).unwrap_or(0);
    if let Some(jobs) = cli.jobs.or(fc.jobs) {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Error::usage(format!("cannot configure {jobs} worker threads: {e}")))?;
    }
    match cli.command {
        Command::Simulate(args) => cmd_simulate(args, &fc, seed),
        Command::BuildDataset(args) => cmd_build_dataset(args, &fc, seed),
        Command::Featurize(args) => cmd_featurize(args),
        Command::Train(args) => cmd_train(args, &fc, seed),
        Command::Grid(args) => cmd_grid(args, &fc, seed),
        Command::Cv(args) => cmd_cv(args, &fc, seed),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Predict(args) => cmd_predict(args, &fc),
    }
}

/// Writes to the path when given, otherwise to stdout.
fn write_output(path: Option<&Path>, content: &str) -> Result<()> {
    match path {
        Some(p) => Ok(std::fs::write(p, content)?),
        None => {
            std::io::stdout().lock().write_all(content.as_bytes())?;
            Ok(())
        }
    }
}

fn cmd_simulate(args: SimulateArgs, fc: &FileConfig, seed: u64) -> Result<()> {
    let budget = args.edge_budget.or(fc.edge_budget).unwrap_or(DEFAULT_EDGE_BUDGET);
    let (cloud, growth) = run_fpp_recording(&args.spec, budget, seed)?;
    eprintln!(
        "simulated {} sites in t = {:.3} ({} pops, budget {budget})",
        cloud.points.len(),
        cloud.final_time,
        cloud.edges_traversed
    );

    if let Some(path) = &args.cloud {
        let mut out = String::from("x,y,time\n");
        for &(site, time) in &growth.sites {
            out.push_str(&format!("{},{},{time}\n", site.x, site.y));
        }
        std::fs::write(path, out)?;
    }

    let hull = convex_hull(&cloud.points)?;
    if let Some(path) = &args.svg {
        std::fs::write(path, polygons_svg(&[(hull.as_slice(), "#1f77b4")]))?;
    }
    let wants_hull_csv = args.hull.is_some()
        || (args.cloud.is_none() && args.svg.is_none());
    if wants_hull_csv {
        write_output(args.hull.as_deref(), &polygon_csv(&hull))?;
    }
    Ok(())
}

fn cmd_build_dataset(args: BuildDatasetArgs, fc: &FileConfig, seed: u64) -> Result<()> {
    let cfg = BuildConfig {
        n_sims: args.n.or(fc.n).unwrap_or(100),
        regime: match args.regime {
            Some(r) => r,
            None => fc.regime()?.unwrap_or(Regime::Train),
        },
        edge_budget: args.edge_budget.or(fc.edge_budget).unwrap_or(DEFAULT_EDGE_BUDGET),
        variant: match args.variant {
            Some(v) => v,
            None => fc.variant()?.unwrap_or(Variant::MeanTransformed),
        },
        seed,
    };
    if cfg.edge_budget < DESK_EDGE_BUDGET {
        eprintln!(
            "note: edge budget {} is below the desk-scale default {DESK_EDGE_BUDGET}; \
             boundaries will be rough",
            cfg.edge_budget
        );
    }
    let tick = (cfg.n_sims / 20).max(1);
    let dataset = build_dataset_with_progress(&cfg, |done, total| {
        if done % tick == 0 || done == total {
            eprintln!("simulated {done}/{total}");
        }
    })?;
    dataset.save(&args.out)?;
    eprintln!(
        "wrote {} rows from {} simulations to {}",
        dataset.n_rows(),
        dataset.sims.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_featurize(args: FeaturizeArgs) -> Result<()> {
    let features = args.spec.featurize()?;
    let mut header = String::from("family,params,mu,sigma");
    for i in 1..=FeatureVector::N_PERCENTILES {
        header.push_str(&format!(",q{i:02}"));
    }
    let mut row = format!(
        "{},{},{},{}",
        args.spec.family_name(),
        args.spec.params_string(';'),
        features.mu_e,
        features.sigma_e
    );
    for q in &features.q {
        row.push_str(&format!(",{q}"));
    }
    write_output(None, &format!("{header}\n{row}\n"))
}

fn history_csv(history: &[EpochStats]) -> String {
    let mut out = String::from("epoch,train_loss,val_loss\n");
    for s in history {
        let val = s.val_loss.map(|v| v.to_string()).unwrap_or_default();
        out.push_str(&format!("{},{},{val}\n", s.epoch, s.train_loss));
    }
    out
}

fn cmd_train(args: TrainArgs, fc: &FileConfig, seed: u64) -> Result<()> {
    let dataset = ShapeDataset::load(&args.dataset)?;
    eprintln!(
        "loaded {} rows from {} simulations ({} variant)",
        dataset.n_rows(),
        dataset.sims.len(),
        dataset.variant
    );

    if let Some(formula) = args.formula {
        if args.history.is_some() {
            return Err(Error::usage(
                "--history records epochs; OLS fitting has none",
            ));
        }
        let model = LinearModel::fit(&dataset, formula)?;
        let dropped = model.dropped.len();
        model.save(&args.model_out)?;
        eprintln!(
            "fit ols-{formula} ({dropped} columns dropped); wrote {}",
            args.model_out.display()
        );
        return Ok(());
    }

    let loss = match args.loss {
        Some(l) => l,
        None => fc.loss()?.unwrap_or(LossKind::Mape),
    };
    let mut tc = TrainConfig::new(
        args.layers.or(fc.layers).unwrap_or(10),
        args.units.or(fc.units).unwrap_or(60),
        loss,
        args.epochs.or(fc.epochs).unwrap_or(5),
        seed,
    );
    if let Some(lr) = args.learning_rate.or(fc.learning_rate) {
        tc.learning_rate = lr;
    }
    if let Some(b) = args.batch_size.or(fc.batch_size) {
        tc.batch_size = b;
    }
    if let Some(v) = args.validation_split.or(fc.validation_split) {
        tc.validation_split = v;
    }
    tc.normalize = args.normalize || fc.normalize.unwrap_or(false);

    let epochs = tc.epochs;
    let (model, history) = train_with_progress(&dataset, &tc, |s| {
        match s.val_loss {
            Some(v) => eprintln!(
                "epoch {}/{epochs}: train {} {:.6}, val {v:.6}",
                s.epoch, tc.loss, s.train_loss
            ),
            None => eprintln!("epoch {}/{epochs}: train {} {:.6}", s.epoch, tc.loss, s.train_loss),
        }
    })?;
    model.save(&args.model_out)?;
    if let Some(path) = &args.history {
        std::fs::write(path, history_csv(&history))?;
    }
    eprintln!(
        "trained nn-{}x{} for {epochs} epochs; wrote {}",
        tc.layers,
        tc.hidden_units,
        args.model_out.display()
    );
    Ok(())
}

fn cmd_grid(args: GridArgs, fc: &FileConfig, seed: u64) -> Result<()> {
    let train_set = ShapeDataset::load(&args.train)?;
    let test_set = ShapeDataset::load(&args.test)?;
    let mut cfg = GridConfig {
        seed,
        ..GridConfig::default()
    };
    if let Some(v) = args.layers.or_else(|| fc.layer_grid.clone()) {
        cfg.layer_grid = v;
    }
    if let Some(v) = args.units.or_else(|| fc.unit_grid.clone()) {
        cfg.unit_grid = v;
    }
    if let Some(l) = args.loss {
        cfg.loss = l;
    } else if let Some(l) = fc.loss()? {
        cfg.loss = l;
    }
    if let Some(e) = args.epochs.or(fc.epochs) {
        cfg.epochs = e;
    }
    if let Some(k) = args.folds.or(fc.folds) {
        cfg.cv_folds = k;
    }
    cfg.include_ols = args.include_ols || fc.include_ols.unwrap_or(false);
    cfg.normalize = args.normalize || fc.normalize.unwrap_or(false);

    let reports = run_grid_with_progress(&train_set, &test_set, &cfg, |done, total| {
        eprintln!("grid cell {done}/{total}");
    })?;
    eprint!("{}", report_table(&reports));
    write_output(args.out.as_deref(), &report_csv(&reports))
}

fn cmd_cv(args: CvArgs, fc: &FileConfig, seed: u64) -> Result<()> {
    let dataset = ShapeDataset::load(&args.dataset)?;
    let k = args.folds.or(fc.folds).unwrap_or(10);

    let mape = if let Some(formula) = args.formula {
        kfold_cv(&dataset, k, seed, |fold| LinearModel::fit(fold, formula))?
    } else {
        let loss = match args.loss {
            Some(l) => l,
            None => fc.loss()?.unwrap_or(LossKind::Mape),
        };
        let mut tc = TrainConfig::new(
            args.layers.or(fc.layers).unwrap_or(10),
            args.units.or(fc.units).unwrap_or(60),
            loss,
            args.epochs.or(fc.epochs).unwrap_or(2),
            seed,
        );
        if let Some(lr) = args.learning_rate.or(fc.learning_rate) {
            tc.learning_rate = lr;
        }
        if let Some(b) = args.batch_size.or(fc.batch_size) {
            tc.batch_size = b;
        }
        if let Some(v) = args.validation_split.or(fc.validation_split) {
            tc.validation_split = v;
        }
        tc.normalize = args.normalize || fc.normalize.unwrap_or(false);
        kfold_cv(&dataset, k, seed, |fold| {
            fpp_shapes::neuralnet::train(fold, &tc).map(|(m, _)| m)
        })?
    };
    println!("{mape}");
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<()> {
    let model = ShapeModel::load(&args.model)?;
    let dataset = ShapeDataset::load(&args.dataset)?;
    if model.variant() != dataset.variant {
        return Err(Error::usage(format!(
            "model was trained on the {} variant but the dataset is {}",
            model.variant(),
            dataset.variant
        )));
    }
    let (mae, mape) = evaluate_model(&model, &dataset)?;
    println!("mae,mape");
    println!("{mae},{mape}");
    Ok(())
}

fn cmd_predict(args: PredictArgs, fc: &FileConfig) -> Result<()> {
    let model = ShapeModel::load(&args.model)?;
    let step = args.step.or(fc.step).unwrap_or(DEFAULT_STEP);
    let shape = predict_shape_with(
        &model,
        &args.spec,
        step,
        args.convex_hull,
        args.model.display().to_string(),
    )?;
    eprintln!(
        "predicted {} octant vertices ({} after unfolding) for {}",
        shape.octant.vertices().len(),
        shape.full_polygon.len(),
        args.spec
    );

    if let Some(path) = &args.svg {
        std::fs::write(
            path,
            polygons_svg(&[(shape.full_polygon.as_slice(), "#1f77b4")]),
        )?;
    }
    let wants_csv = args.csv.is_some() || args.svg.is_none();
    if wants_csv {
        write_output(args.csv.as_deref(), &polygon_csv(&shape.full_polygon))?;
    }
    Ok(())
}
