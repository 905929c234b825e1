//! First-passage percolation limit shapes: simulation, datasets, and
//! learned shape models.
//!
//! First-passage percolation puts i.i.d. positive random weights on the
//! edges of the Z^2 lattice and grows a cluster from the origin along
//! shortest weighted paths. Scaled by time, the wet region `B(t)/t`
//! converges to a deterministic convex limit shape (Cox–Durrett) that
//! depends on the weight distribution in a way with no known closed form.
//! This crate treats that dependence as a regression problem:
//!
//! 1. [`simulator`] grows clusters under an edge budget with lazily sampled
//!    weights and returns the scaled point cloud.
//! 2. [`geometry`] takes the convex hull and folds it into the first
//!    octant, where the dihedral symmetry of the limit shape concentrates
//!    all information into an arc from the y-axis to the diagonal.
//! 3. [`dataset`] runs many seeded simulations across parameter regimes,
//!    pairs each folded arc with the weight distribution's feature vector
//!    (mean, standard deviation, percentiles), and persists CSV datasets.
//! 4. [`neuralnet`] and [`linreg`] fit boundary-height models y = f(x,
//!    features) — from-scratch ReLU networks trained with Adam, and OLS
//!    baselines with interaction formulas.
//! 5. [`evaluation`] scores models with MAE/MAPE, simulation-level k-fold
//!    cross-validation, and a grid over network architectures.
//! 6. [`predictor`] walks a trained model from x = 0 to the diagonal to
//!    reconstruct a full predicted limit shape for an unseen distribution.
//!
//! Everything is deterministic given the seeds in play: simulations derive
//! per-run streams from a master seed, training shuffles with seeded RNGs,
//! and file formats round-trip bit-exactly.

pub mod dataset;
pub mod distributions;
pub mod error;
pub mod evaluation;
pub mod geometry;
pub mod linreg;
pub mod neuralnet;
pub mod predictor;
pub mod rng;
pub mod simulator;

pub use dataset::{build_dataset, BuildConfig, ShapeDataset, Simulation, Variant};
pub use distributions::{DistributionSpec, FeatureVector, Regime};
pub use error::{Error, Result};
pub use evaluation::{kfold_cv, metrics, run_grid, GridConfig, MetricReport, ShapeModel};
pub use geometry::{convex_hull, fold_to_octant, mean_transform, unfold_to_full, OctantBoundary};
pub use linreg::{fit_ols, Formula, LinearModel};
pub use neuralnet::{train, LossKind, TrainConfig, TrainedModel};
pub use predictor::{predict_shape, PredictedShape};
pub use rng::{derive_sim_seed, ShapeRng};
pub use simulator::{run_fpp, ScaledPointCloud};
