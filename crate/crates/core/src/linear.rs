//! Ridge and LASSO regression over sparse feature vectors.
//!
//! Both fitters minimize `(1/N) sum_l (w . f_l + b - y_l)^2 + penalty(w)`.
//! Ridge uses `lambda |w|_2^2` and is solved in the dual,
//! `a = (K + N lambda I)^{-1} (y - b)`, `w = sum_l a_l f_l`, where `b` is the
//! label mean when centering is on and zero otherwise. LASSO uses
//! `mu |w|_1` with an unpenalized intercept and cyclic coordinate descent.

use std::collections::HashMap;

use nalgebra::{Cholesky, DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinearKind {
    Ridge,
    Lasso,
}

/// A fitted linear predictor `w . f + intercept`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub kind: LinearKind,
    pub dim: usize,
    /// Nonzero weights, sorted by index.
    pub weights: Vec<(usize, f64)>,
    pub intercept: f64,
    /// `lambda` for ridge, `mu` for LASSO.
    pub regularization: f64,
    pub l1_norm: f64,
    pub l2_norm: f64,
    /// Dual coefficients of a ridge fit, one per training row.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dual: Option<Vec<f64>>,
}

impl LinearModel {
    fn new(kind: LinearKind, dim: usize, mut weights: Vec<(usize, f64)>, intercept: f64, reg: f64) -> Self {
        weights.retain(|(_, v)| *v != 0.0);
        weights.sort_by_key(|e| e.0);
        let l1_norm = weights.iter().map(|(_, v)| v.abs()).sum();
        let l2_norm = weights.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
        LinearModel {
            kind,
            dim,
            weights,
            intercept,
            regularization: reg,
            l1_norm,
            l2_norm,
            dual: None,
        }
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights.binary_search_by_key(&i, |e| e.0).map(|k| self.weights[k].1).unwrap_or(0.0)
    }

    pub fn dense_weights(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.dim];
        for &(i, v) in &self.weights {
            w[i] = v;
        }
        w
    }

    pub fn predict(&self, f: &FeatureVector) -> Result<f64> {
        if f.dim != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                actual: f.dim,
            });
        }
        Ok(self.intercept + f.entries.iter().map(|&(i, v)| v * self.weight(i)).sum::<f64>())
    }

    /// Ridge prediction through the kernel, `b + sum_l a_l K(f_l, f)`.
    pub fn predict_dual(&self, train: &[FeatureVector], f: &FeatureVector) -> Result<f64> {
        let a = self.dual.as_ref().ok_or_else(|| Error::config("model has no dual coefficients"))?;
        if a.len() != train.len() {
            return Err(Error::Dimension {
                expected: a.len(),
                actual: train.len(),
            });
        }
        Ok(self.intercept + a.iter().zip(train).map(|(al, t)| al * t.dot_sparse(f)).sum::<f64>())
    }
}

fn check_data(features: &[FeatureVector], labels: &[f64]) -> Result<usize> {
    if features.is_empty() {
        return Err(Error::domain("no training rows"));
    }
    if features.len() != labels.len() {
        return Err(Error::Dimension {
            expected: features.len(),
            actual: labels.len(),
        });
    }
    let dim = features[0].dim;
    if let Some(f) = features.iter().find(|f| f.dim != dim) {
        return Err(Error::Dimension {
            expected: dim,
            actual: f.dim,
        });
    }
    Ok(dim)
}

/// Gram matrix `K_ij = f_i . f_j`.
pub fn gram_matrix(features: &[FeatureVector]) -> DMatrix<f64> {
    let n = features.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| (0..=i).map(|j| features[i].dot_sparse(&features[j])).collect())
        .collect();
    let mut k = DMatrix::zeros(n, n);
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RidgeOptions {
    /// Fit around the label mean instead of the origin.
    pub center_labels: bool,
}

impl Default for RidgeOptions {
    fn default() -> Self {
        RidgeOptions { center_labels: true }
    }
}

pub fn ridge_fit(features: &[FeatureVector], labels: &[f64], lambda: f64, opts: RidgeOptions) -> Result<LinearModel> {
    check_data(features, labels)?;
    let k = gram_matrix(features);
    ridge_fit_with_gram(features, labels, &k, lambda, opts)
}

/// Ridge fit reusing a precomputed Gram matrix of `features`.
pub fn ridge_fit_with_gram(features: &[FeatureVector], labels: &[f64], gram: &DMatrix<f64>, lambda: f64, opts: RidgeOptions) -> Result<LinearModel> {
    let dim = check_data(features, labels)?;
    if !(lambda > 0.0) {
        return Err(Error::config(format!("ridge lambda = {lambda} must be positive")));
    }
    let n = features.len();
    let b = if opts.center_labels {
        labels.iter().sum::<f64>() / n as f64
    } else {
        0.0
    };
    let mut a = gram.clone();
    for i in 0..n {
        a[(i, i)] += n as f64 * lambda;
    }
    let chol = Cholesky::new(a).ok_or_else(|| Error::Solver("K + N lambda I is not positive definite".into()))?;
    let y = DVector::from_iterator(n, labels.iter().map(|v| v - b));
    let alpha = chol.solve(&y);
    if alpha.iter().any(|v| !v.is_finite()) {
        return Err(Error::Solver("non-finite dual coefficients".into()));
    }
    let mut w: HashMap<usize, f64> = HashMap::new();
    for (al, f) in alpha.iter().zip(features) {
        for &(i, v) in &f.entries {
            *w.entry(i).or_default() += al * v;
        }
    }
    let mut model = LinearModel::new(LinearKind::Ridge, dim, w.into_iter().collect(), b, lambda);
    model.dual = Some(alpha.iter().copied().collect());
    Ok(model)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LassoOptions {
    pub fit_intercept: bool,
    /// Stop when no coordinate moves by more than this in a sweep.
    pub tol: f64,
    /// Also stop once the duality gap falls below this fraction of the
    /// labels' mean squared deviation; zero disables the check.
    pub gap_tol: f64,
    pub max_sweeps: usize,
}

impl Default for LassoOptions {
    fn default() -> Self {
        LassoOptions {
            fit_intercept: true,
            tol: 1e-8,
            gap_tol: 1e-4,
            max_sweeps: 100_000,
        }
    }
}

/// Training design stored by column, with identical columns merged.
///
/// Indicator features make many columns coincide (Paulis sharing the same
/// local coordinates, cells holding the same training points). The `l1`
/// objective only depends on the sum of weights over a group of equal
/// columns, so each group is fitted as one column and its weight assigned
/// to the group's first member.
pub struct LassoDesign {
    n_rows: usize,
    dim: usize,
    columns: Vec<Vec<(usize, f64)>>,
    members: Vec<Vec<usize>>,
    sq_norms: Vec<f64>,
}

impl LassoDesign {
    pub fn new(features: &[FeatureVector]) -> Result<Self> {
        let dim = features.first().map(|f| f.dim).ok_or_else(|| Error::domain("no training rows"))?;
        let mut by_index: HashMap<usize, Vec<(usize, f64)>> = HashMap::new();
        for (r, f) in features.iter().enumerate() {
            for &(i, v) in &f.entries {
                if v != 0.0 {
                    by_index.entry(i).or_default().push((r, v));
                }
            }
        }
        let mut indices: Vec<usize> = by_index.keys().copied().collect();
        indices.sort_unstable();
        let mut group_of: HashMap<Vec<(usize, u64)>, usize> = HashMap::new();
        let mut columns = Vec::new();
        let mut members: Vec<Vec<usize>> = Vec::new();
        for i in indices {
            let col = by_index.remove(&i).unwrap();
            let key: Vec<(usize, u64)> = col.iter().map(|&(r, v)| (r, v.to_bits())).collect();
            match group_of.get(&key) {
                Some(&g) => members[g].push(i),
                None => {
                    group_of.insert(key, columns.len());
                    columns.push(col);
                    members.push(vec![i]);
                }
            }
        }
        let sq_norms = columns
            .iter()
            .map(|c| c.iter().map(|(_, v)| v * v).sum::<f64>() / features.len() as f64)
            .collect();
        Ok(LassoDesign {
            n_rows: features.len(),
            dim,
            columns,
            members,
            sq_norms,
        })
    }

    /// Number of distinct nonzero columns.
    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }
}

/// Diagnostics of a converged LASSO fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LassoReport {
    pub sweeps: usize,
    pub objective: f64,
    pub duality_gap: f64,
}

pub fn lasso_fit(features: &[FeatureVector], labels: &[f64], mu: f64, opts: LassoOptions) -> Result<LinearModel> {
    check_data(features, labels)?;
    let design = LassoDesign::new(features)?;
    Ok(lasso_fit_design(&design, labels, mu, opts, None)?.0)
}

/// Coordinate descent on a prepared design; `warm` holds per-group
/// weights from a previous fit on the same design.
pub fn lasso_fit_design(
    design: &LassoDesign,
    labels: &[f64],
    mu: f64,
    opts: LassoOptions,
    warm: Option<&[f64]>,
) -> Result<(LinearModel, Vec<f64>, LassoReport)> {
    if labels.len() != design.n_rows {
        return Err(Error::Dimension {
            expected: design.n_rows,
            actual: labels.len(),
        });
    }
    if !(mu >= 0.0) {
        return Err(Error::config(format!("lasso mu = {mu} must be nonnegative")));
    }
    let n = design.n_rows as f64;
    let mut w = match warm {
        Some(v) if v.len() == design.n_columns() => v.to_vec(),
        _ => vec![0.0; design.n_columns()],
    };
    let mut resid: Vec<f64> = labels.to_vec();
    for (col, &wj) in design.columns.iter().zip(&w) {
        for &(r, v) in col {
            resid[r] -= v * wj;
        }
    }
    let mut b = 0.0;
    let update_intercept = |resid: &mut [f64], b: &mut f64| {
        let shift = resid.iter().sum::<f64>() / n;
        resid.iter_mut().for_each(|r| *r -= shift);
        *b += shift;
        shift.abs()
    };
    if opts.fit_intercept {
        update_intercept(&mut resid, &mut b);
    }
    let thresh = mu / 2.0;
    let mean = labels.iter().sum::<f64>() / n;
    let gap_target = opts.gap_tol * labels.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n;
    let mut sweeps = 0;
    loop {
        sweeps += 1;
        let mut max_delta: f64 = 0.0;
        for (j, col) in design.columns.iter().enumerate() {
            let z = design.sq_norms[j];
            let rho = col.iter().map(|&(r, v)| v * resid[r]).sum::<f64>() / n + z * w[j];
            let new = soft_threshold(rho, thresh) / z;
            let delta = new - w[j];
            if delta != 0.0 {
                for &(r, v) in col {
                    resid[r] -= v * delta;
                }
                w[j] = new;
                max_delta = max_delta.max(delta.abs());
            }
        }
        if opts.fit_intercept {
            max_delta = max_delta.max(update_intercept(&mut resid, &mut b));
        }
        if max_delta < opts.tol {
            break;
        }
        if gap_target > 0.0 && sweeps % 50 == 0 && duality_gap(design, labels, &w, &resid, mu) < gap_target {
            break;
        }
        if sweeps >= opts.max_sweeps {
            let gap = duality_gap(design, labels, &w, &resid, mu);
            return Err(Error::Convergence {
                method: "lasso coordinate descent",
                iterations: sweeps,
                detail: format!("last update {max_delta:.3e}, duality gap {gap:.3e}"),
            });
        }
    }
    let objective = resid.iter().map(|r| r * r).sum::<f64>() / n + mu * w.iter().map(|v| v.abs()).sum::<f64>();
    let report = LassoReport {
        sweeps,
        objective,
        duality_gap: duality_gap(design, labels, &w, &resid, mu),
    };
    let weights = design.members.iter().zip(&w).map(|(m, &v)| (m[0], v)).collect();
    let model = LinearModel::new(LinearKind::Lasso, design.dim, weights, b, mu);
    Ok((model, w, report))
}

pub fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// Primal minus dual objective at the rescaled residual.
fn duality_gap(design: &LassoDesign, labels: &[f64], w: &[f64], resid: &[f64], mu: f64) -> f64 {
    let n = design.n_rows as f64;
    let primal = resid.iter().map(|r| r * r).sum::<f64>() / n + mu * w.iter().map(|v| v.abs()).sum::<f64>();
    let corr = design
        .columns
        .iter()
        .map(|c| (2.0 / n * c.iter().map(|&(r, v)| v * resid[r]).sum::<f64>()).abs())
        .fold(0.0, f64::max);
    let s = if corr > mu && corr > 0.0 { mu / corr } else { 1.0 };
    // dual point nu = s * 2 r / N; D(nu) = nu . y - (N/4) |nu|^2
    let nu: Vec<f64> = resid.iter().map(|r| s * 2.0 * r / n).collect();
    let dual = nu.iter().zip(labels).map(|(a, y)| a * y).sum::<f64>() - n / 4.0 * nu.iter().map(|v| v * v).sum::<f64>();
    primal - dual
}

/// Largest violation of the LASSO optimality conditions over every
/// feature index, for the objective `(1/N)|Xw + b - y|^2 + mu |w|_1`.
pub fn lasso_kkt_residual(features: &[FeatureVector], labels: &[f64], model: &LinearModel) -> Result<f64> {
    let n = features.len() as f64;
    let mut grad: HashMap<usize, f64> = HashMap::new();
    for (f, y) in features.iter().zip(labels) {
        let r = model.predict(f)? - y;
        for &(i, v) in &f.entries {
            *grad.entry(i).or_default() += 2.0 / n * v * r;
        }
    }
    let mu = model.regularization;
    let mut worst: f64 = 0.0;
    for (i, g) in grad {
        let w = model.weight(i);
        let viol = if w != 0.0 {
            (g + mu * w.signum()).abs()
        } else {
            (g.abs() - mu).max(0.0)
        };
        worst = worst.max(viol);
    }
    Ok(worst)
}

/// `|grad|_2` of the ridge objective at the fitted weights.
pub fn ridge_gradient_norm(features: &[FeatureVector], labels: &[f64], model: &LinearModel) -> Result<f64> {
    let n = features.len() as f64;
    let mut grad = model.dense_weights().iter().map(|w| 2.0 * model.regularization * w).collect::<Vec<_>>();
    for (f, y) in features.iter().zip(labels) {
        let r = model.predict(f)? - y;
        for &(i, v) in &f.entries {
            grad[i] += 2.0 / n * v * r;
        }
    }
    Ok(grad.iter().map(|g| g * g).sum::<f64>().sqrt())
}

pub fn rmse(pred: &[f64], truth: &[f64]) -> f64 {
    let s: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t).powi(2)).sum();
    (s / pred.len().max(1) as f64).sqrt()
}

/// `n` logarithmically spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

/// Default regularization grid: eight decades from `1e-6` to `1e1`.
pub fn default_reg_grid() -> Vec<f64> {
    log_grid(1e-6, 1e1, 8)
}

/// Contiguous fold assignment: row `i` lands in fold `i * k / n`.
fn folds(n: usize, k: usize) -> Vec<usize> {
    (0..n).map(|i| i * k / n).collect()
}

/// Regularization value with the smallest k-fold validation RMSE, and the
/// per-value scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub best: f64,
    pub scores: Vec<(f64, f64)>,
}

pub fn ridge_cv(features: &[FeatureVector], labels: &[f64], grid: &[f64], k: usize, opts: RidgeOptions) -> Result<CvResult> {
    check_data(features, labels)?;
    let gram = gram_matrix(features);
    cv(features.len(), k, grid, |train, test, lambda| {
        let sub = |idx: &[usize]| -> Vec<FeatureVector> { idx.iter().map(|&i| features[i].clone()).collect() };
        let tf = sub(train);
        let ty: Vec<f64> = train.iter().map(|&i| labels[i]).collect();
        let g = DMatrix::from_fn(train.len(), train.len(), |a, b| gram[(train[a], train[b])]);
        let model = ridge_fit_with_gram(&tf, &ty, &g, lambda, opts)?;
        let pred: Vec<f64> = test.iter().map(|&i| model.predict(&features[i])).collect::<Result<_>>()?;
        let truth: Vec<f64> = test.iter().map(|&i| labels[i]).collect();
        Ok(rmse(&pred, &truth))
    })
}

pub fn lasso_cv(features: &[FeatureVector], labels: &[f64], grid: &[f64], k: usize, opts: LassoOptions) -> Result<CvResult> {
    check_data(features, labels)?;
    cv(features.len(), k, grid, |train, test, mu| {
        let tf: Vec<FeatureVector> = train.iter().map(|&i| features[i].clone()).collect();
        let ty: Vec<f64> = train.iter().map(|&i| labels[i]).collect();
        let model = lasso_fit(&tf, &ty, mu, opts)?;
        let pred: Vec<f64> = test.iter().map(|&i| model.predict(&features[i])).collect::<Result<_>>()?;
        let truth: Vec<f64> = test.iter().map(|&i| labels[i]).collect();
        Ok(rmse(&pred, &truth))
    })
}

fn cv<F>(n: usize, k: usize, grid: &[f64], score: F) -> Result<CvResult>
where
    F: Fn(&[usize], &[usize], f64) -> Result<f64> + Sync,
{
    if k < 2 || k > n {
        return Err(Error::config(format!("{k} folds for {n} rows")));
    }
    if grid.is_empty() {
        return Err(Error::config("empty regularization grid"));
    }
    let fold = folds(n, k);
    let scores: Vec<(f64, f64)> = grid
        .par_iter()
        .map(|&reg| {
            let mut sq = 0.0;
            for f in 0..k {
                let train: Vec<usize> = (0..n).filter(|&i| fold[i] != f).collect();
                let test: Vec<usize> = (0..n).filter(|&i| fold[i] == f).collect();
                let e = score(&train, &test, reg)?;
                sq += e * e * test.len() as f64;
            }
            Ok((reg, (sq / n as f64).sqrt()))
        })
        .collect::<Result<_>>()?;
    let best = scores.iter().min_by(|a, b| a.1.total_cmp(&b.1)).map(|s| s.0).unwrap();
    Ok(CvResult { best, scores })
}
