//! Dataset assembly and persistence.
//!
//! One simulation contributes one row per folded-hull vertex: the spec's
//! feature vector plus the vertex coordinates `(x, y)`. The `Raw` variant
//! stores the arc of `B(t)/t` as simulated; `MeanTransformed` scales both
//! coordinates by the spec's effective mean, which collapses shapes of very
//! different weight scales onto comparable radii.
//!
//! The CSV schema is one metadata comment, one header, then one line per row:
//!
//! ```text
//! # fpp-shape-dataset v1 variant=mean-transformed edge_budget=50000
//! family,params,seed,mu,sigma,q01,...,q99,x,y
//! gamma,3;0.5,8441484231711205925,6,3.4641016151377544,...,0,1.0312
//! ```
//!
//! `params` holds the family's parameter list separated by `;` so the line
//! stays free of quoting. The metadata line carries what the columns cannot
//! (variant and edge budget), making save/load lossless. Floats are written
//! with Rust's shortest round-trip formatting, so a rebuilt dataset is
//! byte-identical and a loaded one is bit-exact.

use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;

use crate::distributions::{DistributionSpec, FeatureVector, Regime};
use crate::error::{Error, Result};
use crate::geometry::{convex_hull, fold_to_octant, mean_transform, Point};
use crate::rng::{derive_sim_seed, sim_rng, STREAM_PARAMS};
use crate::simulator::run_fpp;

/// Default edge budget used by the full-scale experiments.
pub const DEFAULT_EDGE_BUDGET: u64 = 300_000;
/// Documented desk-scale edge budget.
pub const DESK_EDGE_BUDGET: u64 = 50_000;
/// Sanity ceiling on mean-transformed y values; far above anything a real
/// run produces, it only catches corrupted data.
pub const MT_SANITY_CEILING: f64 = 100.0;

const SCHEMA_TAG: &str = "# fpp-shape-dataset v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Raw,
    MeanTransformed,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Raw => "raw",
            Variant::MeanTransformed => "mean-transformed",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(Variant::Raw),
            "mean-transformed" => Ok(Variant::MeanTransformed),
            _ => Err(Error::usage(format!(
                "unknown variant {s:?} (expected raw or mean-transformed)"
            ))),
        }
    }
}

/// One simulation's contribution: provenance, features, and its folded arc.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub spec: DistributionSpec,
    pub seed: u64,
    pub edge_budget: u64,
    pub features: FeatureVector,
    /// Folded (and possibly mean-transformed) arc vertices in order.
    pub points: Vec<Point>,
}

/// A flat regression dataset grouped by simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeDataset {
    pub variant: Variant,
    pub sims: Vec<Simulation>,
}

/// A borrowed view of one regression row.
#[derive(Debug, Clone, Copy)]
pub struct RowRef<'a> {
    pub sim_index: usize,
    pub features: &'a FeatureVector,
    pub x: f64,
    pub y: f64,
}

/// Configuration for [`build_dataset`].
#[derive(Debug, Clone)]
pub struct BuildConfig {
    pub n_sims: u64,
    pub regime: Regime,
    pub edge_budget: u64,
    pub variant: Variant,
    pub seed: u64,
}

impl ShapeDataset {
    pub fn rows(&self) -> impl Iterator<Item = RowRef<'_>> {
        self.sims.iter().enumerate().flat_map(|(i, sim)| {
            sim.points.iter().map(move |&(x, y)| RowRef {
                sim_index: i,
                features: &sim.features,
                x,
                y,
            })
        })
    }

    pub fn n_rows(&self) -> usize {
        self.sims.iter().map(|s| s.points.len()).sum()
    }

    /// Checks the dataset invariants: per-row wedge membership, identical
    /// features within a simulation (structural here), and the
    /// mean-transformed sanity ceiling.
    pub fn validate(&self) -> Result<()> {
        for (i, sim) in self.sims.iter().enumerate() {
            sim.spec.validate()?;
            sim.features.validate()?;
            for &(x, y) in &sim.points {
                if !(y >= x && x >= 0.0 && y > 0.0) {
                    return Err(Error::usage(format!(
                        "simulation {i}: row ({x}, {y}) violates y >= x >= 0, y > 0"
                    )));
                }
                if self.variant == Variant::MeanTransformed && y > MT_SANITY_CEILING {
                    return Err(Error::usage(format!(
                        "simulation {i}: mean-transformed y = {y} exceeds sanity ceiling {MT_SANITY_CEILING}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Spec string of the family member whose effective mean is the family's
    /// median (lower median on even counts).
    pub fn median_representative(&self, family: &str) -> Result<String> {
        let mut members: Vec<&Simulation> = self
            .sims
            .iter()
            .filter(|s| s.spec.family_name() == family)
            .collect();
        if members.is_empty() {
            return Err(Error::usage(format!(
                "dataset contains no simulations of family {family:?}"
            )));
        }
        members.sort_by(|a, b| a.features.mu_e.total_cmp(&b.features.mu_e));
        Ok(members[(members.len() - 1) / 2].spec.to_string())
    }

    /// Saves the dataset, gzip-compressing when the path ends in `.gz`
    /// (mirroring [`ShapeDataset::load`]).
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let budget = match self.sims.first() {
            Some(s) => s.edge_budget,
            None => return Err(Error::usage("cannot save an empty dataset")),
        };
        if self.sims.iter().any(|s| s.edge_budget != budget) {
            return Err(Error::usage(
                "cannot save a dataset with mixed edge budgets in one file",
            ));
        }
        let file = std::fs::File::create(path)?;
        if path.extension().is_some_and(|e| e == "gz") {
            let enc = flate2::write::GzEncoder::new(file, flate2::Compression::default());
            let mut w = std::io::BufWriter::new(enc);
            self.write_csv(&mut w, budget)?;
            w.into_inner().map_err(|e| Error::Io(e.into_error()))?.finish()?;
        } else {
            let mut w = std::io::BufWriter::new(file);
            self.write_csv(&mut w, budget)?;
            w.flush()?;
        }
        Ok(())
    }

    fn write_csv(&self, w: &mut impl Write, budget: u64) -> Result<()> {
        writeln!(
            w,
            "{SCHEMA_TAG} variant={} edge_budget={budget}",
            self.variant
        )?;
        writeln!(w, "{}", csv_header())?;
        for sim in &self.sims {
            let prefix = format!(
                "{},{},{}",
                sim.spec.family_name(),
                sim.spec.params_string(';'),
                sim.seed
            );
            let mut features = String::new();
            features.push_str(&format!("{},{}", sim.features.mu_e, sim.features.sigma_e));
            for q in &sim.features.q {
                features.push_str(&format!(",{q}"));
            }
            for &(x, y) in &sim.points {
                writeln!(w, "{prefix},{features},{x},{y}")?;
            }
        }
        Ok(())
    }

    /// Loads a dataset, transparently decompressing `.gz` files, validating
    /// the schema and every invariant, and failing with the offending line
    /// number on malformed input.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let display = path.display().to_string();
        let file = std::fs::File::open(path)?;
        let reader: Box<dyn Read> = if path.extension().is_some_and(|e| e == "gz") {
            Box::new(flate2::read::GzDecoder::new(file))
        } else {
            Box::new(file)
        };
        let mut lines = BufReader::new(reader).lines();

        let meta = lines
            .next()
            .transpose()?
            .ok_or_else(|| Error::format(&display, 1, "empty file"))?;
        let (variant, edge_budget) = parse_metadata(&meta)
            .ok_or_else(|| Error::format(&display, 1, format!("bad metadata line {meta:?}")))?;

        let header = lines
            .next()
            .transpose()?
            .ok_or_else(|| Error::format(&display, 2, "missing header"))?;
        if header != csv_header() {
            return Err(Error::format(&display, 2, "header does not match the schema"));
        }

        let mut sims: Vec<Simulation> = Vec::new();
        let mut current_key: Option<(String, String, u64)> = None;
        for (i, line) in lines.enumerate() {
            let line_no = i + 3;
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 5 + FeatureVector::N_PERCENTILES + 2 {
                return Err(Error::format(
                    &display,
                    line_no,
                    format!(
                        "expected {} fields, found {}",
                        5 + FeatureVector::N_PERCENTILES + 2,
                        fields.len()
                    ),
                ));
            }
            let parse_f = |s: &str, what: &str| -> Result<f64> {
                s.parse::<f64>()
                    .map_err(|_| Error::format(&display, line_no, format!("bad {what}: {s:?}")))
            };
            let family = fields[0];
            let params = fields[1];
            let seed = fields[2].parse::<u64>().map_err(|_| {
                Error::format(&display, line_no, format!("bad seed: {:?}", fields[2]))
            })?;
            let mu_e = parse_f(fields[3], "mu")?;
            let sigma_e = parse_f(fields[4], "sigma")?;
            let mut q = Vec::with_capacity(FeatureVector::N_PERCENTILES);
            for (k, field) in fields[5..5 + FeatureVector::N_PERCENTILES].iter().enumerate() {
                q.push(parse_f(field, &format!("q{:02}", k + 1))?);
            }
            let x = parse_f(fields[104], "x")?;
            let y = parse_f(fields[105], "y")?;

            if !(y >= x && x >= 0.0 && y > 0.0) {
                return Err(Error::format(
                    &display,
                    line_no,
                    format!("row ({x}, {y}) violates y >= x >= 0, y > 0"),
                ));
            }

            let key = (family.to_string(), params.to_string(), seed);
            let features = FeatureVector { mu_e, sigma_e, q };
            if current_key.as_ref() == Some(&key) {
                let sim = sims.last_mut().expect("current_key implies a simulation");
                if sim.features != features {
                    return Err(Error::format(
                        &display,
                        line_no,
                        "features differ from earlier rows of the same simulation",
                    ));
                }
                sim.points.push((x, y));
            } else {
                let spec = DistributionSpec::from_family_params(family, params, ';')
                    .map_err(|e| Error::format(&display, line_no, e.to_string()))?;
                features
                    .validate()
                    .map_err(|e| Error::format(&display, line_no, e.to_string()))?;
                sims.push(Simulation {
                    spec,
                    seed,
                    edge_budget,
                    features,
                    points: vec![(x, y)],
                });
                current_key = Some(key);
            }
        }

        let dataset = ShapeDataset { variant, sims };
        dataset.validate().map_err(|e| match e {
            Error::Usage(m) => Error::format(&display, 0, m),
            other => other,
        })?;
        Ok(dataset)
    }
}

fn csv_header() -> String {
    let mut h = String::from("family,params,seed,mu,sigma");
    for k in 1..=FeatureVector::N_PERCENTILES {
        h.push_str(&format!(",q{k:02}"));
    }
    h.push_str(",x,y");
    h
}

fn parse_metadata(line: &str) -> Option<(Variant, u64)> {
    let rest = line.strip_prefix(SCHEMA_TAG)?.trim();
    let mut variant = None;
    let mut budget = None;
    for token in rest.split_whitespace() {
        if let Some(v) = token.strip_prefix("variant=") {
            variant = v.parse::<Variant>().ok();
        } else if let Some(b) = token.strip_prefix("edge_budget=") {
            budget = b.parse::<u64>().ok();
        }
    }
    Some((variant?, budget?))
}

/// Hull -> fold -> optional mean transform: the per-simulation point
/// pipeline, shared by the builder and by tests that inject their own
/// clouds.
pub fn octant_points(cloud_points: &[Point], variant: Variant, mu_e: f64) -> Result<Vec<Point>> {
    let hull = convex_hull(cloud_points)?;
    let arc = fold_to_octant(&hull)?;
    let arc = match variant {
        Variant::Raw => arc,
        Variant::MeanTransformed => mean_transform(&arc, mu_e)?,
    };
    Ok(arc.into_vertices())
}

fn build_one(cfg: &BuildConfig, sim_seed: u64) -> Result<Simulation> {
    let mut param_rng = sim_rng(sim_seed, STREAM_PARAMS);
    let spec = cfg.regime.draw_spec(&mut param_rng)?;
    let features = spec.featurize()?;
    let cloud = run_fpp(&spec, cfg.edge_budget, sim_seed)?;
    let points = octant_points(&cloud.points, cfg.variant, features.mu_e)?;
    Ok(Simulation {
        spec,
        seed: sim_seed,
        edge_budget: cfg.edge_budget,
        features,
        points,
    })
}

fn with_sim_context(e: Error, index: u64, seed: u64) -> Error {
    match e {
        Error::Numeric(m) => Error::Numeric(format!("simulation {index} (seed {seed}): {m}")),
        Error::Usage(m) => Error::Usage(format!("simulation {index} (seed {seed}): {m}")),
        other => other,
    }
}

/// Builds a dataset by running `cfg.n_sims` independent simulations in
/// parallel. Simulation `i` is seeded by `derive_sim_seed(cfg.seed, i)`, so
/// results are identical regardless of thread count, and the output order is
/// by simulation index.
pub fn build_dataset(cfg: &BuildConfig) -> Result<ShapeDataset> {
    build_dataset_with_progress(cfg, |_, _| {})
}

/// [`build_dataset`] with a progress callback `(done, total)`, called after
/// each completed simulation from worker threads.
pub fn build_dataset_with_progress(
    cfg: &BuildConfig,
    progress: impl Fn(u64, u64) + Sync,
) -> Result<ShapeDataset> {
    if cfg.n_sims == 0 {
        return Err(Error::usage("n_sims must be at least 1"));
    }
    let done = AtomicU64::new(0);
    let sims: Result<Vec<Simulation>> = (0..cfg.n_sims)
        .into_par_iter()
        .map(|i| {
            let sim_seed = derive_sim_seed(cfg.seed, i);
            let sim = build_one(cfg, sim_seed).map_err(|e| with_sim_context(e, i, sim_seed))?;
            progress(done.fetch_add(1, Ordering::Relaxed) + 1, cfg.n_sims);
            Ok(sim)
        })
        .collect();
    let dataset = ShapeDataset {
        variant: cfg.variant,
        sims: sims?,
    };
    dataset.validate()?;
    Ok(dataset)
}
