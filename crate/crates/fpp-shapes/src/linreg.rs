//! Ordinary-least-squares baselines.
//!
//! Three formulas over the variable set `all = {x, mu, sigma, q01..q99}`:
//!
//! * `Simple`          — `[1, mu, sigma, x, x^2]`
//! * `AllPlusX2`       — `[1, all, x^2]`
//! * `AllInteractions` — `[1, all, x*v for v in all\{x}, x^2*v for v in all\{x}]`
//!
//! Self-interactions `x:x` and `x^2:x` are excluded, so the widths are 5,
//! 104, and 305. Every column carries a label so the expansion is auditable.
//! Fitting uses a column-pivoted QR; columns the pivoting finds dependent
//! are pinned to zero and reported.

use std::fmt;
use std::io::Write as _;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::dataset::{ShapeDataset, Variant};
use crate::distributions::FeatureVector;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Formula {
    Simple,
    AllPlusX2,
    AllInteractions,
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Formula::Simple => "simple",
            Formula::AllPlusX2 => "all-plus-x2",
            Formula::AllInteractions => "all-interactions",
        })
    }
}

impl FromStr for Formula {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "simple" => Ok(Formula::Simple),
            "all-plus-x2" => Ok(Formula::AllPlusX2),
            "all-interactions" => Ok(Formula::AllInteractions),
            _ => Err(Error::usage(format!(
                "unknown formula {s:?} (expected simple, all-plus-x2, or all-interactions)"
            ))),
        }
    }
}

fn all_labels() -> Vec<String> {
    let mut labels = vec!["x".to_string(), "mu".to_string(), "sigma".to_string()];
    for k in 1..=FeatureVector::N_PERCENTILES {
        labels.push(format!("q{k:02}"));
    }
    labels
}

impl Formula {
    pub fn width(&self) -> usize {
        match self {
            Formula::Simple => 5,
            Formula::AllPlusX2 => 1 + (FeatureVector::DIM + 1) + 1,
            Formula::AllInteractions => 1 + (FeatureVector::DIM + 1) + 2 * FeatureVector::DIM,
        }
    }

    pub fn labels(&self) -> Vec<String> {
        let all = all_labels();
        let mut labels = vec!["intercept".to_string()];
        match self {
            Formula::Simple => {
                labels.extend(["mu", "sigma", "x", "x2"].map(String::from));
            }
            Formula::AllPlusX2 => {
                labels.extend(all.iter().cloned());
                labels.push("x2".to_string());
            }
            Formula::AllInteractions => {
                labels.extend(all.iter().cloned());
                for v in &all[1..] {
                    labels.push(format!("x:{v}"));
                }
                for v in &all[1..] {
                    labels.push(format!("x2:{v}"));
                }
            }
        }
        labels
    }

    /// One design-matrix row for a feature vector at position `x`.
    pub fn design_row(&self, features: &FeatureVector, x: f64) -> Vec<f64> {
        let mut row = Vec::with_capacity(self.width());
        row.push(1.0);
        match self {
            Formula::Simple => {
                row.extend([features.mu_e, features.sigma_e, x, x * x]);
            }
            Formula::AllPlusX2 => {
                row.extend(features.to_input(x));
                row.push(x * x);
            }
            Formula::AllInteractions => {
                let all = features.to_input(x);
                row.extend(&all);
                for &v in &all[1..] {
                    row.push(x * v);
                }
                let x2 = x * x;
                for &v in &all[1..] {
                    row.push(x2 * v);
                }
            }
        }
        row
    }
}

/// Builds the full design matrix, targets, and column labels for a dataset.
pub fn design_matrix(
    dataset: &ShapeDataset,
    formula: Formula,
) -> Result<(DMatrix<f64>, DVector<f64>, Vec<String>)> {
    let n = dataset.n_rows();
    if n == 0 {
        return Err(Error::usage("cannot build a design matrix from an empty dataset"));
    }
    let width = formula.width();
    let mut data = Vec::with_capacity(n * width);
    let mut y = Vec::with_capacity(n);
    for row in dataset.rows() {
        data.extend(formula.design_row(row.features, row.x));
        y.push(row.y);
    }
    Ok((
        DMatrix::from_row_slice(n, width, &data),
        DVector::from_vec(y),
        formula.labels(),
    ))
}

/// Least-squares coefficients plus the columns pivoting found dependent
/// (their coefficients are pinned to 0).
#[derive(Debug, Clone)]
pub struct OlsFit {
    pub coefficients: DVector<f64>,
    pub dropped: Vec<usize>,
}

/// Solves `min |X b - y|` by column-pivoted QR. Requires at least as many
/// rows as columns; rank-deficient columns are pinned to zero and reported
/// through [`OlsFit::dropped`].
pub fn fit_ols(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<OlsFit> {
    let (m, n) = x.shape();
    if m < n {
        return Err(Error::usage(format!(
            "least squares needs at least as many rows as columns ({m} < {n})"
        )));
    }
    if y.len() != m {
        return Err(Error::usage("target length does not match design rows"));
    }
    let qr = x.clone().col_piv_qr();
    let r = qr.r();
    let tol = f64::EPSILON * m.max(n) as f64 * r[(0, 0)].abs();
    let rank = (0..n).take_while(|&i| r[(i, i)].abs() > tol).count();

    // Solve the permuted triangular system on the leading rank x rank block.
    let mut qty = y.clone();
    qr.q_tr_mul(&mut qty);
    let mut z = DVector::zeros(n);
    for i in 0..rank {
        z[i] = qty[i];
    }
    for i in (0..rank).rev() {
        let mut acc = z[i];
        for j in i + 1..rank {
            acc -= r[(i, j)] * z[j];
        }
        z[i] = acc / r[(i, i)];
    }
    // Track which permuted slots were pinned, then undo the permutation on
    // both the solution and the markers.
    let mut pinned = DVector::from_fn(n, |i, _| if i >= rank { 1.0 } else { 0.0 });
    qr.p().inv_permute_rows(&mut z);
    qr.p().inv_permute_rows(&mut pinned);
    let dropped = (0..n).filter(|&i| pinned[i] == 1.0).collect();
    Ok(OlsFit {
        coefficients: z,
        dropped,
    })
}

/// A fitted formula bound to the dataset variant it was trained on.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub formula: Formula,
    pub variant: Variant,
    pub coefficients: Vec<f64>,
    pub dropped: Vec<usize>,
}

const OLS_TAG: &str = "# fpp-ols v1";

impl LinearModel {
    pub fn fit(dataset: &ShapeDataset, formula: Formula) -> Result<Self> {
        let (x, y, _) = design_matrix(dataset, formula)?;
        let fit = fit_ols(&x, &y)?;
        Ok(LinearModel {
            formula,
            variant: dataset.variant,
            coefficients: fit.coefficients.iter().copied().collect(),
            dropped: fit.dropped,
        })
    }

    pub fn predict(&self, features: &FeatureVector, x: f64) -> Result<f64> {
        if self.coefficients.len() != self.formula.width() {
            return Err(Error::usage(format!(
                "coefficient layout ({}) does not match formula {} (width {})",
                self.coefficients.len(),
                self.formula,
                self.formula.width()
            )));
        }
        let row = self.formula.design_row(features, x);
        Ok(row.iter().zip(&self.coefficients).map(|(a, b)| a * b).sum())
    }

    /// Labeled coefficient dump: a metadata comment, a header, one line per
    /// column. Dropped columns are flagged.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        writeln!(w, "{OLS_TAG} formula={} variant={}", self.formula, self.variant)?;
        writeln!(w, "label,coefficient,dropped")?;
        for (i, (label, c)) in self
            .formula
            .labels()
            .iter()
            .zip(&self.coefficients)
            .enumerate()
        {
            let flag = if self.dropped.contains(&i) { 1 } else { 0 };
            writeln!(w, "{label},{c},{flag}")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let display = path.display().to_string();
        let text = std::fs::read_to_string(path)?;
        let mut lines = text.lines().enumerate();

        let (_, meta) = lines
            .next()
            .ok_or_else(|| Error::format(&display, 1, "empty file"))?;
        let rest = meta
            .strip_prefix(OLS_TAG)
            .ok_or_else(|| Error::format(&display, 1, "not a coefficient file"))?;
        let mut formula = None;
        let mut variant = None;
        for token in rest.split_whitespace() {
            if let Some(f) = token.strip_prefix("formula=") {
                formula = f.parse::<Formula>().ok();
            } else if let Some(v) = token.strip_prefix("variant=") {
                variant = v.parse::<Variant>().ok();
            }
        }
        let formula = formula.ok_or_else(|| Error::format(&display, 1, "missing formula"))?;
        let variant = variant.ok_or_else(|| Error::format(&display, 1, "missing variant"))?;

        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::format(&display, 2, "missing header"))?;
        if header != "label,coefficient,dropped" {
            return Err(Error::format(&display, 2, "bad header"));
        }

        let labels = formula.labels();
        let mut coefficients = Vec::with_capacity(labels.len());
        let mut dropped = Vec::new();
        for (i, line) in lines {
            let line_no = i + 1;
            if line.is_empty() {
                continue;
            }
            let idx = coefficients.len();
            if idx >= labels.len() {
                return Err(Error::format(&display, line_no, "too many coefficient lines"));
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 3 || fields[0] != labels[idx] {
                return Err(Error::format(
                    &display,
                    line_no,
                    format!("expected label {:?}", labels[idx]),
                ));
            }
            let c: f64 = fields[1]
                .parse()
                .map_err(|_| Error::format(&display, line_no, "bad coefficient"))?;
            coefficients.push(c);
            match fields[2] {
                "0" => {}
                "1" => dropped.push(idx),
                _ => return Err(Error::format(&display, line_no, "bad dropped flag")),
            }
        }
        if coefficients.len() != labels.len() {
            return Err(Error::format(
                &display,
                2 + coefficients.len(),
                format!("expected {} coefficients, found {}", labels.len(), coefficients.len()),
            ));
        }
        Ok(LinearModel {
            formula,
            variant,
            coefficients,
            dropped,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Simulation;
    use crate::distributions::DistributionSpec;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};

    fn fake_features(mu: f64, sigma: f64) -> FeatureVector {
        let q = (1..=99).map(|k| k as f64 / 10.0).collect();
        FeatureVector {
            mu_e: mu,
            sigma_e: sigma,
            q,
        }
    }

    #[test]
    fn simple_row_matches_hand_expansion() {
        let f = fake_features(2.0, 1.0);
        assert_eq!(
            Formula::Simple.design_row(&f, 3.0),
            vec![1.0, 2.0, 1.0, 3.0, 9.0]
        );
    }

    #[test]
    fn widths_and_labels_are_fixed() {
        assert_eq!(Formula::Simple.width(), 5);
        assert_eq!(Formula::AllPlusX2.width(), 104);
        assert_eq!(Formula::AllInteractions.width(), 305);
        for formula in [Formula::Simple, Formula::AllPlusX2, Formula::AllInteractions] {
            let labels = formula.labels();
            assert_eq!(labels.len(), formula.width());
            assert_eq!(labels[0], "intercept");
            let f = fake_features(2.0, 1.0);
            assert_eq!(formula.design_row(&f, 0.4).len(), formula.width());
        }
        let inter = Formula::AllInteractions.labels();
        assert_eq!(inter[1], "x");
        assert_eq!(inter[103], "x:mu");
        assert_eq!(inter[204], "x2:mu");
        assert_eq!(inter[304], "x2:q99");
        // No self-interactions.
        assert!(!inter.iter().any(|l| l == "x:x" || l == "x2:x" || l == "x2"));
    }

    #[test]
    fn interaction_row_values_multiply_out() {
        let f = fake_features(2.0, 0.5);
        let x = 0.3;
        let row = Formula::AllInteractions.design_row(&f, x);
        let labels = Formula::AllInteractions.labels();
        for (label, value) in labels.iter().zip(&row) {
            if let Some(rest) = label.strip_prefix("x:") {
                let v = lookup(&f, rest);
                assert_relative_eq!(*value, x * v, max_relative = 1e-15);
            } else if let Some(rest) = label.strip_prefix("x2:") {
                let v = lookup(&f, rest);
                assert_relative_eq!(*value, x * x * v, max_relative = 1e-15);
            }
        }
    }

    fn lookup(f: &FeatureVector, name: &str) -> f64 {
        match name {
            "mu" => f.mu_e,
            "sigma" => f.sigma_e,
            _ => {
                let k: usize = name.strip_prefix('q').unwrap().parse().unwrap();
                f.q[k - 1]
            }
        }
    }

    #[test]
    fn exact_system_is_solved_exactly() {
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 2.0]);
        let y = DVector::from_column_slice(&[3.0, 5.0]);
        let fit = fit_ols(&x, &y).unwrap();
        assert_relative_eq!(fit.coefficients[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(fit.coefficients[1], 2.0, epsilon = 1e-12);
        assert!(fit.dropped.is_empty());
    }

    #[test]
    fn noiseless_targets_recover_beta() {
        let mut rng = crate::rng::ShapeRng::seed_from_u64(31);
        let x = DMatrix::from_fn(50, 8, |_, _| rng.random_range(-1.0..1.0));
        let beta = DVector::from_fn(8, |i, _| (i as f64) - 3.5);
        let y = &x * &beta;
        let fit = fit_ols(&x, &y).unwrap();
        for i in 0..8 {
            assert_relative_eq!(fit.coefficients[i], beta[i], epsilon = 1e-8);
        }
    }

    #[test]
    fn residual_is_orthogonal_to_columns() {
        let mut rng = crate::rng::ShapeRng::seed_from_u64(77);
        let x = DMatrix::from_fn(200, 10, |_, _| rng.random_range(-2.0..2.0));
        let y = DVector::from_fn(200, |_, _| rng.random_range(-5.0..5.0));
        let fit = fit_ols(&x, &y).unwrap();
        let r = &y - &x * &fit.coefficients;
        let xtr = x.transpose() * r;
        let scale = y.amax() * 200.0;
        assert!(
            xtr.amax() <= 1e-6 * scale,
            "|X^T r|_inf = {} vs scale {scale}",
            xtr.amax()
        );
    }

    #[test]
    fn duplicate_columns_are_pinned_to_zero() {
        let mut rng = crate::rng::ShapeRng::seed_from_u64(5);
        let base = DMatrix::from_fn(40, 3, |_, _| rng.random_range(-1.0..1.0));
        // Column 3 duplicates column 1.
        let x = DMatrix::from_fn(40, 4, |r, c| if c < 3 { base[(r, c)] } else { base[(r, 1)] });
        let beta = DVector::from_column_slice(&[2.0, -1.0, 0.5, 0.0]);
        let y = &x * &beta;
        let fit = fit_ols(&x, &y).unwrap();
        assert_eq!(fit.dropped.len(), 1);
        for &i in &fit.dropped {
            assert_eq!(fit.coefficients[i], 0.0);
        }
        // Predictions still reproduce the targets.
        let pred = &x * &fit.coefficients;
        for i in 0..40 {
            assert_relative_eq!(pred[i], y[i], epsilon = 1e-8);
        }
    }

    #[test]
    fn underdetermined_systems_are_usage_errors() {
        let x = DMatrix::from_row_slice(2, 3, &[1.0; 6]);
        let y = DVector::from_column_slice(&[1.0, 2.0]);
        assert!(matches!(fit_ols(&x, &y), Err(Error::Usage(_))));
    }

    /// Tiny dataset whose y is an exact linear function of mu and x.
    fn linear_dataset() -> ShapeDataset {
        let mut sims = Vec::new();
        for k in 0..12 {
            let s = (1.0 + 0.5 * k as f64) / 2.0;
            let spec: DistributionSpec = format!("gamma:2,{s}").parse().unwrap();
            let features = spec.featurize().unwrap();
            let points: Vec<(f64, f64)> = (0..10)
                .map(|j| {
                    let x = 0.05 * j as f64;
                    (x, 2.0 + 0.3 * features.mu_e - 0.8 * x)
                })
                .collect();
            sims.push(Simulation {
                spec,
                seed: k,
                edge_budget: 1,
                features,
                points,
            });
        }
        ShapeDataset {
            variant: Variant::Raw,
            sims,
        }
    }

    #[test]
    fn fitted_model_reproduces_noiseless_training_targets() {
        let ds = linear_dataset();
        let model = LinearModel::fit(&ds, Formula::Simple).unwrap();
        for row in ds.rows() {
            let pred = model.predict(row.features, row.x).unwrap();
            assert_relative_eq!(pred, row.y, epsilon = 1e-8);
        }
    }

    #[test]
    fn predict_edge_cases() {
        let f = fake_features(3.0, 1.0);
        let zero = LinearModel {
            formula: Formula::Simple,
            variant: Variant::Raw,
            coefficients: vec![0.0; 5],
            dropped: vec![],
        };
        assert_eq!(zero.predict(&f, 0.7).unwrap(), 0.0);

        let intercept = LinearModel {
            formula: Formula::Simple,
            variant: Variant::Raw,
            coefficients: vec![4.25, 0.0, 0.0, 0.0, 0.0],
            dropped: vec![],
        };
        assert_eq!(intercept.predict(&f, 0.1).unwrap(), 4.25);
        assert_eq!(intercept.predict(&f, 0.9).unwrap(), 4.25);

        let broken = LinearModel {
            formula: Formula::AllPlusX2,
            variant: Variant::Raw,
            coefficients: vec![1.0; 5],
            dropped: vec![],
        };
        assert!(matches!(broken.predict(&f, 0.1), Err(Error::Usage(_))));
    }

    #[test]
    fn coefficient_perturbations_do_not_beat_ols() {
        let ds = linear_dataset();
        let (x, y, _) = design_matrix(&ds, Formula::Simple).unwrap();
        let fit = fit_ols(&x, &y).unwrap();
        let mse = |beta: &DVector<f64>| {
            let r = &y - &x * beta;
            r.norm_squared() / y.len() as f64
        };
        let base = mse(&fit.coefficients);
        for i in 0..fit.coefficients.len() {
            for delta in [1e-3, -1e-3] {
                let mut b = fit.coefficients.clone();
                b[i] += delta;
                assert!(
                    mse(&b) >= base - 1e-15,
                    "perturbing coefficient {i} by {delta} reduced MSE"
                );
            }
        }
    }

    #[test]
    fn coefficient_files_round_trip() {
        let ds = linear_dataset();
        let model = LinearModel::fit(&ds, Formula::AllPlusX2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ols.csv");
        model.save(&path).unwrap();
        let loaded = LinearModel::load(&path).unwrap();
        assert_eq!(model, loaded);

        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# fpp-ols v1 formula=all-plus-x2 variant=raw\n"));

        let bad = dir.path().join("bad.csv");
        std::fs::write(&bad, text.replace("intercept", "interloper")).unwrap();
        assert!(matches!(
            LinearModel::load(&bad),
            Err(Error::Format { line: 3, .. })
        ));
    }
}
