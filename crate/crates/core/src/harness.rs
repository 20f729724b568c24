//! Experiment orchestration: labelled datasets, model training and
//! evaluation, and sweeps over system size, training-set size and `delta1`.
//!
//! A dataset is a JSON-lines file. The first line is a [`DatasetHeader`];
//! every following line is one [`Record`], in index order. Generation is
//! resumable: rerunning with the same configuration appends the missing
//! records and leaves the existing ones untouched.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigen::{expectation, ground_state, SolverConfig};
use crate::error::{Error, Result};
use crate::features::{FeatureMap, FeatureVector, HyperParams};
use crate::hamiltonian::{build_heisenberg, build_heisenberg_allpairs, enumerate_geo_paulis, Observable, ParamHamiltonian};
use crate::linear::{default_reg_grid, lasso_cv, lasso_fit, ridge_cv, ridge_fit, rmse, CvResult, LassoOptions, LinearModel, RidgeOptions};
use crate::nn::{self, CombinedModel, EpochStats, TrainConfig};
use crate::pauli::PauliString;
use crate::qmc::{self, inverse_transform, sobol_points, uniform_points, PointSet, ProductDensity};
use crate::shadows::{estimate_observable, round_seed, sample_shadow_mixture};

pub const SCHEMA_VERSION: u32 = 1;

/// Records solved in parallel before each batch is written.
const WRITE_BATCH: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// One coupling per nearest-neighbour bond.
    Nearest,
    /// One coupling per pair of sites.
    AllPairs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemSpec {
    pub rows: usize,
    pub cols: usize,
    pub family: Family,
}

impl SystemSpec {
    pub fn new(rows: usize, cols: usize) -> Self {
        SystemSpec {
            rows,
            cols,
            family: Family::Nearest,
        }
    }

    pub fn n_sites(&self) -> usize {
        self.rows * self.cols
    }

    /// Hamiltonian and the nearest-neighbour correlator targets.
    pub fn build(&self) -> Result<(ParamHamiltonian, Vec<Observable>)> {
        match self.family {
            Family::Nearest => build_heisenberg(self.rows, self.cols),
            Family::AllPairs => build_heisenberg_allpairs(self.rows, self.cols),
        }
    }
}

/// How parameter vectors are drawn. Point `i` of a Sobol or density design
/// depends only on `i`, so prefixes of a design are designs themselves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Sampling {
    Sobol,
    Uniform {
        seed: u64,
    },
    /// Sobol points pushed through the inverse CDF of a product density.
    Density {
        density: ProductDensity,
    },
}

/// `n` parameter vectors in `[-1, 1)^m`.
pub fn sample_parameters(sampling: &Sampling, m: usize, n: usize) -> Result<Vec<Vec<f64>>> {
    let unit: PointSet = match sampling {
        Sampling::Sobol => sobol_points(n, m)?,
        Sampling::Uniform { seed } => uniform_points(n, m, *seed),
        Sampling::Density { density } => inverse_transform(&sobol_points(n, m)?, density)?,
    };
    Ok(unit.points.into_iter().map(|u| u.into_iter().map(|v| 2.0 * v - 1.0).collect()).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LabelSource {
    /// `tr(O rho)` from the exact ground space.
    Exact,
    /// Classical-shadow estimates from `rounds` randomized measurements,
    /// clipped to `[-|O|_1, |O|_1]`. With `keep`, the raw shadows are
    /// written next to the dataset.
    Shadow {
        rounds: usize,
        seed: u64,
        #[serde(default)]
        keep: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub system: SystemSpec,
    pub sampling: Sampling,
    pub n_records: usize,
    pub labels: LabelSource,
    #[serde(default)]
    pub solver: SolverConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub schema_version: u32,
    pub config: DatasetConfig,
    pub hamiltonian: ParamHamiltonian,
    pub observables: Vec<Observable>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub index: usize,
    pub x: Vec<f64>,
    pub labels: Vec<f64>,
    /// Exact values alongside shadow labels.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact_labels: Option<Vec<f64>>,
    pub energy: f64,
    pub gap: Option<f64>,
    pub degeneracy: usize,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub records: Vec<Record>,
}

impl Dataset {
    pub fn load(path: &Path) -> Result<Self> {
        let mut lines = BufReader::new(File::open(path)?).lines();
        let first = lines.next().ok_or_else(|| Error::config(format!("{} is empty", path.display())))??;
        let header = parse_header(&first)?;
        let mut records = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let r: Record = serde_json::from_str(&line)?;
            if r.index != records.len() {
                return Err(Error::config(format!("record {} out of order in {}", r.index, path.display())));
            }
            records.push(r);
        }
        Ok(Dataset { header, records })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn n_targets(&self) -> usize {
        self.header.observables.len()
    }

    pub fn inputs(&self, idx: &[usize]) -> Result<Vec<Vec<f64>>> {
        idx.iter().map(|&i| Ok(self.record(i)?.x.clone())).collect()
    }

    /// Labels for `idx`, one vector per target.
    pub fn targets(&self, idx: &[usize]) -> Result<Vec<Vec<f64>>> {
        let mut out = vec![Vec::with_capacity(idx.len()); self.n_targets()];
        for &i in idx {
            for (t, &y) in self.record(i)?.labels.iter().enumerate() {
                out[t].push(y);
            }
        }
        Ok(out)
    }

    fn record(&self, i: usize) -> Result<&Record> {
        self.records
            .get(i)
            .ok_or_else(|| Error::config(format!("index {i} beyond {} records", self.len())))
    }
}

fn parse_header(line: &str) -> Result<DatasetHeader> {
    let value: serde_json::Value = serde_json::from_str(line)?;
    let found = value.get("schema_version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
    if found != SCHEMA_VERSION {
        return Err(Error::Schema {
            found,
            expected: SCHEMA_VERSION,
        });
    }
    Ok(serde_json::from_value(value)?)
}

/// Status file written next to a dataset after every generation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub dataset: String,
    pub n_records: usize,
    pub completed: usize,
    pub complete: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failed_index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub fn manifest_path(dataset: &Path) -> PathBuf {
    dataset.with_extension("manifest.json")
}

fn shadow_dir(dataset: &Path) -> PathBuf {
    dataset.with_extension("shadows")
}

fn solve_record(
    h: &ParamHamiltonian,
    obs: &[Observable],
    cfg: &DatasetConfig,
    index: usize,
    x: Vec<f64>,
    shadow_out: Option<&Path>,
) -> Result<Record> {
    let gs = ground_state(h, &x, &cfg.solver)?;
    let exact: Vec<f64> = obs.iter().map(|o| expectation(o, &gs)).collect::<Result<_>>()?;
    let (labels, exact_labels) = match &cfg.labels {
        LabelSource::Exact => (exact, None),
        LabelSource::Shadow { rounds, seed, .. } => {
            let shadow = sample_shadow_mixture(&gs.ground_basis, *rounds, round_seed(*seed, index as u64))?;
            if let Some(dir) = shadow_out {
                shadow.write_binary(BufWriter::new(File::create(dir.join(format!("{index}.shdw")))?))?;
            }
            let est = obs
                .iter()
                .map(|o| Ok(estimate_observable(&shadow, o)?.clamp(-o.l1_norm(), o.l1_norm())))
                .collect::<Result<_>>()?;
            (est, Some(exact))
        }
    };
    Ok(Record {
        index,
        x,
        labels,
        exact_labels,
        energy: gs.energy,
        gap: gs.gap,
        degeneracy: gs.degeneracy(),
    })
}

/// Number of complete records at the head of an existing dataset file, and
/// the byte length they occupy including the header.
fn existing_prefix(path: &Path, header_line: &str) -> Result<(usize, u64)> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut line = String::new();
    reader.read_line(&mut line)?;
    if line.trim_end() != header_line {
        return Err(Error::config(format!(
            "{} was generated with a different configuration; remove it or choose another path",
            path.display()
        )));
    }
    let mut bytes = line.len() as u64;
    let mut count = 0;
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 || !line.ends_with('\n') {
            break;
        }
        match serde_json::from_str::<Record>(&line) {
            Ok(r) if r.index == count => {
                count += 1;
                bytes += line.len() as u64;
            }
            _ => break,
        }
    }
    Ok((count, bytes))
}

/// Summary of a generation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenSummary {
    pub resumed_from: usize,
    pub completed: usize,
}

/// Solves the ground state for every sampled parameter vector and writes
/// the labelled dataset to `path`. Records are solved in parallel and
/// written in index order by a single writer. On a failed record the
/// completed prefix stays on disk and the manifest names the failure.
pub fn gen_data(cfg: &DatasetConfig, path: &Path) -> Result<GenSummary> {
    if cfg.n_records == 0 {
        return Err(Error::config("n_records must be positive"));
    }
    let (h, obs) = cfg.system.build()?;
    if h.n_qubits() > cfg.solver.capacity {
        return Err(Error::Capacity {
            what: "qubits",
            actual: h.n_qubits(),
            limit: cfg.solver.capacity,
        });
    }
    let header = DatasetHeader {
        schema_version: SCHEMA_VERSION,
        config: cfg.clone(),
        hamiltonian: h.clone(),
        observables: obs.clone(),
    };
    let header_line = serde_json::to_string(&header)?;
    let start = if path.exists() {
        let (count, bytes) = existing_prefix(path, &header_line)?;
        OpenOptions::new().write(true).open(path)?.set_len(bytes)?;
        count.min(cfg.n_records)
    } else {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent)?;
        }
        let mut f = File::create(path)?;
        writeln!(f, "{header_line}")?;
        0
    };
    let shadow_out = match &cfg.labels {
        LabelSource::Shadow { keep: true, .. } => {
            let dir = shadow_dir(path);
            fs::create_dir_all(&dir)?;
            Some(dir)
        }
        _ => None,
    };
    let xs = sample_parameters(&cfg.sampling, h.n_params(), cfg.n_records)?;
    let mut out = BufWriter::new(OpenOptions::new().append(true).open(path)?);
    let mut manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        dataset: path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
        n_records: cfg.n_records,
        completed: start,
        complete: false,
        failed_index: None,
        error: None,
    };
    let mut failure = None;
    for lo in (start..cfg.n_records).step_by(WRITE_BATCH) {
        let hi = (lo + WRITE_BATCH).min(cfg.n_records);
        let solved: Vec<Result<Record>> = (lo..hi)
            .into_par_iter()
            .map(|i| solve_record(&h, &obs, cfg, i, xs[i].clone(), shadow_out.as_deref()))
            .collect();
        for (i, r) in (lo..hi).zip(solved) {
            match r {
                Ok(rec) => {
                    writeln!(out, "{}", serde_json::to_string(&rec)?)?;
                    manifest.completed += 1;
                }
                Err(e) => {
                    manifest.failed_index = Some(i);
                    manifest.error = Some(e.to_string());
                    failure = Some(e);
                    break;
                }
            }
        }
        out.flush()?;
        if failure.is_some() {
            break;
        }
    }
    manifest.complete = failure.is_none();
    fs::write(manifest_path(path), serde_json::to_string_pretty(&manifest)? + "\n")?;
    match failure {
        Some(e) => Err(e),
        None => Ok(GenSummary {
            resumed_from: start,
            completed: manifest.completed,
        }),
    }
}

/// Disjoint training and test indices into one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    pub fn new(train: Vec<usize>, test: Vec<usize>) -> Result<Self> {
        if train.is_empty() || test.is_empty() {
            return Err(Error::config("train and test sets must be non-empty"));
        }
        let mut seen = train.clone();
        seen.sort_unstable();
        if test.iter().any(|i| seen.binary_search(i).is_ok()) {
            return Err(Error::config("train and test indices overlap"));
        }
        Ok(Split { train, test })
    }

    /// First `n_train` records for training, the next `n_test` for testing.
    pub fn prefix(n_train: usize, n_test: usize) -> Result<Self> {
        Split::new((0..n_train).collect(), (n_train..n_train + n_test).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    /// Predicts the training mean of each target.
    Mean,
    /// Kernel ridge on the observable-scaled indicator features; `lambda`
    /// is chosen by cross-validation when absent.
    Ridge {
        #[serde(default = "one")]
        delta2: f64,
        #[serde(default)]
        lambda: Option<f64>,
    },
    /// LASSO on the plain indicator features; `mu` is chosen by
    /// cross-validation when absent.
    Lasso {
        #[serde(default = "half")]
        delta2: f64,
        #[serde(default)]
        mu: Option<f64>,
    },
    /// Per-target combined networks.
    Nn {
        #[serde(default)]
        train: TrainConfig,
        /// Train all targets with a shared batch order.
        #[serde(default = "yes")]
        joint: bool,
    },
}

fn one() -> f64 {
    1.0
}

fn half() -> f64 {
    0.5
}

fn yes() -> bool {
    true
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::Mean => "mean",
            ModelSpec::Ridge { .. } => "ridge",
            ModelSpec::Lasso { .. } => "lasso",
            ModelSpec::Nn { .. } => "nn",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSettings {
    pub model: ModelSpec,
    #[serde(default)]
    pub delta1: f64,
    #[serde(default = "one")]
    pub geo_radius: f64,
    #[serde(default = "two")]
    pub geo_max_weight: usize,
    #[serde(default = "five")]
    pub cv_folds: usize,
    #[serde(default)]
    pub seed: u64,
}

fn two() -> usize {
    2
}

fn five() -> usize {
    5
}

impl TrainSettings {
    pub fn new(model: ModelSpec, delta1: f64) -> Self {
        TrainSettings {
            model,
            delta1,
            geo_radius: 1.0,
            geo_max_weight: 2,
            cv_folds: 5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Artifact {
    Mean {
        means: Vec<f64>,
    },
    Linear {
        hyper: HyperParams,
        paulis: Vec<PauliString>,
        /// Features scaled by the target's Pauli coefficients.
        scaled: bool,
        models: Vec<LinearModel>,
        cv: Vec<Option<CvResult>>,
    },
    Nn {
        models: Vec<CombinedModel>,
        final_stats: Vec<EpochStats>,
        stopped_early: Vec<bool>,
    },
}

/// A trained predictor for every target of a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub settings: TrainSettings,
    pub n_params: usize,
    pub targets: Vec<String>,
    pub artifact: Artifact,
}

impl TrainedModel {
    /// Predictions for `xs`, indexed `[row][target]`.
    pub fn predict(&self, header: &DatasetHeader, xs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        if header.hamiltonian.n_params() != self.n_params || header.observables.len() != self.targets.len() {
            return Err(Error::config("model was trained on an incompatible dataset"));
        }
        match &self.artifact {
            Artifact::Mean { means } => Ok(vec![means.clone(); xs.len()]),
            Artifact::Linear {
                hyper,
                paulis,
                scaled,
                models,
                ..
            } => {
                let fm = FeatureMap::new(&header.hamiltonian, paulis.clone(), hyper)?;
                xs.par_iter()
                    .map(|x| {
                        let plain = fm.phi(x)?;
                        models
                            .iter()
                            .zip(&header.observables)
                            .map(|(m, o)| if *scaled { m.predict(&fm.phi_tilde(x, o)?) } else { m.predict(&plain) })
                            .collect()
                    })
                    .collect()
            }
            Artifact::Nn { models, .. } => xs.par_iter().map(|x| models.iter().map(|m| m.forward(x)).collect()).collect(),
        }
    }

    /// Mean last-layer `l1` norm over targets.
    pub fn w_l1(&self) -> Option<f64> {
        let norms: Vec<f64> = match &self.artifact {
            Artifact::Mean { .. } => return None,
            Artifact::Linear { models, .. } => models.iter().map(|m| m.l1_norm).collect(),
            Artifact::Nn { models, .. } => models.iter().map(|m| m.w_l1()).collect(),
        };
        Some(norms.iter().sum::<f64>() / norms.len() as f64)
    }

    /// Largest absolute network parameter over all targets.
    pub fn max_abs_theta(&self) -> Option<f64> {
        match &self.artifact {
            Artifact::Nn { models, .. } => Some(models.iter().map(|m| m.max_abs_theta()).fold(0.0, f64::max)),
            _ => None,
        }
    }
}

fn features_for(fm: &FeatureMap, xs: &[Vec<f64>], o: Option<&Observable>) -> Result<Vec<FeatureVector>> {
    xs.par_iter()
        .map(|x| match o {
            Some(o) => fm.phi_tilde(x, o),
            None => fm.phi(x),
        })
        .collect()
}

/// Fits one predictor per target on the records in `train`.
pub fn train_model(data: &Dataset, train: &[usize], settings: &TrainSettings) -> Result<TrainedModel> {
    let h = &data.header.hamiltonian;
    let obs = &data.header.observables;
    let xs = data.inputs(train)?;
    let ys = data.targets(train)?;
    if xs.is_empty() {
        return Err(Error::config("empty training set"));
    }
    let paulis = || enumerate_geo_paulis(h.lattice(), settings.geo_radius, settings.geo_max_weight);
    let artifact = match &settings.model {
        ModelSpec::Mean => Artifact::Mean {
            means: ys.iter().map(|y| y.iter().sum::<f64>() / y.len() as f64).collect(),
        },
        ModelSpec::Ridge { delta2, lambda } => {
            let hyper = HyperParams::new(settings.delta1, *delta2);
            let fm = FeatureMap::new(h, paulis(), &hyper)?;
            let mut models = Vec::new();
            let mut cvs = Vec::new();
            for (o, y) in obs.iter().zip(&ys) {
                let f = features_for(&fm, &xs, Some(o))?;
                let (lam, cv) = match lambda {
                    Some(l) => (*l, None),
                    None => {
                        let cv = ridge_cv(&f, y, &default_reg_grid(), settings.cv_folds, RidgeOptions::default())?;
                        (cv.best, Some(cv))
                    }
                };
                let mut m = ridge_fit(&f, y, lam, RidgeOptions::default())?;
                m.dual = None;
                models.push(m);
                cvs.push(cv);
            }
            Artifact::Linear {
                hyper,
                paulis: fm.paulis().to_vec(),
                scaled: true,
                models,
                cv: cvs,
            }
        }
        ModelSpec::Lasso { delta2, mu } => {
            let hyper = HyperParams::new(settings.delta1, *delta2);
            let fm = FeatureMap::new(h, paulis(), &hyper)?;
            let f = features_for(&fm, &xs, None)?;
            let mut models = Vec::new();
            let mut cvs = Vec::new();
            for y in &ys {
                let (m, cv) = match mu {
                    Some(m) => (*m, None),
                    None => {
                        let cv = lasso_cv(&f, y, &default_reg_grid(), settings.cv_folds, LassoOptions::default())?;
                        (cv.best, Some(cv))
                    }
                };
                models.push(lasso_fit(&f, y, m, LassoOptions::default())?);
                cvs.push(cv);
            }
            Artifact::Linear {
                hyper,
                paulis: fm.paulis().to_vec(),
                scaled: false,
                models,
                cv: cvs,
            }
        }
        ModelSpec::Nn { train: cfg, joint } => {
            let init = |t: usize| CombinedModel::init(h, paulis(), settings.delta1, cfg, round_seed(settings.seed, t as u64));
            let models: Vec<CombinedModel> = (0..ys.len()).map(init).collect::<Result<_>>()?;
            let trained = if *joint {
                let cfg = TrainConfig {
                    seed: settings.seed,
                    ..cfg.clone()
                };
                nn::train_joint(models, &xs, &ys, &cfg)?
            } else {
                models
                    .into_iter()
                    .zip(&ys)
                    .enumerate()
                    .map(|(t, (m, y))| {
                        let cfg = TrainConfig {
                            seed: round_seed(settings.seed, t as u64),
                            ..cfg.clone()
                        };
                        nn::train(m, &xs, y, &cfg)
                    })
                    .collect::<Result<_>>()?
            };
            Artifact::Nn {
                final_stats: trained.iter().map(|(_, tr)| tr.final_stats().clone()).collect(),
                stopped_early: trained.iter().map(|(_, tr)| tr.stopped_early).collect(),
                models: trained.into_iter().map(|(m, _)| m).collect(),
            }
        }
    };
    Ok(TrainedModel {
        settings: settings.clone(),
        n_params: h.n_params(),
        targets: obs.iter().map(|o| o.name.clone()).collect(),
        artifact,
    })
}

/// RMSE per target and over all (target, record) pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub n_records: usize,
    pub per_target: Vec<f64>,
    pub aggregate: f64,
}

pub fn evaluate(model: &TrainedModel, data: &Dataset, idx: &[usize]) -> Result<Evaluation> {
    let pred = model.predict(&data.header, &data.inputs(idx)?)?;
    let truth = data.targets(idx)?;
    let per_target: Vec<f64> = truth
        .iter()
        .enumerate()
        .map(|(t, y)| rmse(&pred.iter().map(|p| p[t]).collect::<Vec<_>>(), y))
        .collect();
    let aggregate = (per_target.iter().map(|r| r * r).sum::<f64>() / per_target.len() as f64).sqrt();
    Ok(Evaluation {
        n_records: idx.len(),
        per_target,
        aggregate,
    })
}

/// One line of the results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub system_size: usize,
    pub rows: usize,
    pub cols: usize,
    pub delta1: f64,
    pub n_train: usize,
    pub model: String,
    pub seed: u64,
    pub train_rmse: f64,
    pub test_rmse: f64,
    pub w_l1: Option<f64>,
    pub max_abs_theta: Option<f64>,
    pub wall_time_s: f64,
}

pub const RESULT_COLUMNS: [&str; 12] = [
    "system_size",
    "rows",
    "cols",
    "delta1",
    "n_train",
    "model",
    "seed",
    "train_rmse",
    "test_rmse",
    "w_l1",
    "max_abs_theta",
    "wall_time_s",
];

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

impl ResultRow {
    fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{:.3}",
            self.system_size,
            self.rows,
            self.cols,
            self.delta1,
            self.n_train,
            self.model,
            self.seed,
            self.train_rmse,
            self.test_rmse,
            opt(self.w_l1),
            opt(self.max_abs_theta),
            self.wall_time_s
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", RESULT_COLUMNS.join(","))?;
        for r in &self.rows {
            writeln!(w, "{}", r.csv())?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| Error::config("empty results file"))??;
        if header != RESULT_COLUMNS.join(",") {
            return Err(Error::config(format!("unexpected results header {header:?}")));
        }
        let bad = |what: &str| Error::config(format!("bad results field {what}"));
        let mut rows = Vec::new();
        for line in lines {
            let line = line?;
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != RESULT_COLUMNS.len() {
                return Err(bad(&line));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad(s));
            let int = |s: &str| s.parse::<usize>().map_err(|_| bad(s));
            let maybe = |s: &str| if s.is_empty() { Ok(None) } else { num(s).map(Some) };
            rows.push(ResultRow {
                system_size: int(f[0])?,
                rows: int(f[1])?,
                cols: int(f[2])?,
                delta1: num(f[3])?,
                n_train: int(f[4])?,
                model: f[5].to_string(),
                seed: f[6].parse().map_err(|_| bad(f[6]))?,
                train_rmse: num(f[7])?,
                test_rmse: num(f[8])?,
                w_l1: maybe(f[9])?,
                max_abs_theta: maybe(f[10])?,
                wall_time_s: num(f[11])?,
            });
        }
        Ok(ResultTable { rows })
    }
}

/// Trains on `split.train`, evaluates on both halves, and reports one row.
pub fn run_one(data: &Dataset, split: &Split, settings: &TrainSettings) -> Result<(TrainedModel, ResultRow)> {
    let start = Instant::now();
    let model = train_model(data, &split.train, settings)?;
    let train = evaluate(&model, data, &split.train)?;
    let test = evaluate(&model, data, &split.test)?;
    let sys = data.header.config.system;
    let row = ResultRow {
        system_size: sys.n_sites(),
        rows: sys.rows,
        cols: sys.cols,
        delta1: settings.delta1,
        n_train: split.train.len(),
        model: settings.model.name().to_string(),
        seed: settings.seed,
        train_rmse: train.aggregate,
        test_rmse: test.aggregate,
        w_l1: model.w_l1(),
        max_abs_theta: model.max_abs_theta(),
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    Ok((model, row))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingConfig {
    pub sizes: Vec<(usize, usize)>,
    #[serde(default = "nearest")]
    pub family: Family,
    #[serde(default = "sobol")]
    pub sampling: Sampling,
    pub n_train: Vec<usize>,
    pub n_test: usize,
    pub delta1: Vec<f64>,
    pub models: Vec<ModelSpec>,
    #[serde(default = "zero_seed")]
    pub seeds: Vec<u64>,
    #[serde(default = "exact")]
    pub labels: LabelSource,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default = "one")]
    pub geo_radius: f64,
    #[serde(default = "two")]
    pub geo_max_weight: usize,
    #[serde(default = "five")]
    pub cv_folds: usize,
}

fn nearest() -> Family {
    Family::Nearest
}

fn sobol() -> Sampling {
    Sampling::Sobol
}

fn zero_seed() -> Vec<u64> {
    vec![0]
}

fn exact() -> LabelSource {
    LabelSource::Exact
}

impl ScalingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() || self.n_train.is_empty() || self.delta1.is_empty() || self.models.is_empty() || self.seeds.is_empty() {
            return Err(Error::config("sizes, n_train, delta1, models and seeds must be non-empty"));
        }
        if self.n_test == 0 || self.n_train.contains(&0) {
            return Err(Error::config("n_train and n_test must be positive"));
        }
        Ok(())
    }

    fn max_train(&self) -> usize {
        self.n_train.iter().copied().max().unwrap_or(0)
    }
}

/// Runs the full sweep under `out_dir`: one dataset per size in `data/`,
/// `results.csv` rewritten after every row, and three panel tables at the
/// end. Training set `N` uses the first `N` records; the test set is the
/// `n_test` records following the largest training set.
pub fn scaling_experiment(cfg: &ScalingConfig, out_dir: &Path) -> Result<ResultTable> {
    cfg.validate()?;
    fs::create_dir_all(out_dir.join("data"))?;
    let max_n = cfg.max_train();
    let mut table = ResultTable::default();
    let flush = |t: &ResultTable| -> Result<()> { t.write_csv(BufWriter::new(File::create(out_dir.join("results.csv"))?)) };
    for &(rows, cols) in &cfg.sizes {
        let dcfg = DatasetConfig {
            system: SystemSpec {
                rows,
                cols,
                family: cfg.family,
            },
            sampling: cfg.sampling.clone(),
            n_records: max_n + cfg.n_test,
            labels: cfg.labels.clone(),
            solver: cfg.solver.clone(),
        };
        let path = out_dir.join("data").join(format!("{rows}x{cols}.jsonl"));
        gen_data(&dcfg, &path)?;
        let data = Dataset::load(&path)?;
        let test: Vec<usize> = (max_n..max_n + cfg.n_test).collect();
        for &delta1 in &cfg.delta1 {
            for &n in &cfg.n_train {
                let split = Split::new((0..n).collect(), test.clone())?;
                for model in &cfg.models {
                    for &seed in &cfg.seeds {
                        let settings = TrainSettings {
                            model: model.clone(),
                            delta1,
                            geo_radius: cfg.geo_radius,
                            geo_max_weight: cfg.geo_max_weight,
                            cv_folds: cfg.cv_folds,
                            seed,
                        };
                        let (_, row) = run_one(&data, &split, &settings)?;
                        table.rows.push(row);
                        flush(&table)?;
                    }
                }
            }
        }
    }
    write_panels(&table, max_n, out_dir)?;
    Ok(table)
}

/// Plot-ready projections of the results: test RMSE against system size
/// at the largest `N`, test RMSE against `N`, and the network's training
/// error and weight norms against system size.
pub fn write_panels(table: &ResultTable, max_n: usize, out_dir: &Path) -> Result<()> {
    let mut left = BufWriter::new(File::create(out_dir.join("panel_left.csv"))?);
    writeln!(left, "system_size,delta1,model,seed,test_rmse")?;
    for r in table.rows.iter().filter(|r| r.n_train == max_n) {
        writeln!(left, "{},{},{},{},{}", r.system_size, r.delta1, r.model, r.seed, r.test_rmse)?;
    }
    let mut center = BufWriter::new(File::create(out_dir.join("panel_center.csv"))?);
    writeln!(center, "system_size,delta1,n_train,model,seed,test_rmse")?;
    for r in &table.rows {
        writeln!(
            center,
            "{},{},{},{},{},{}",
            r.system_size, r.delta1, r.n_train, r.model, r.seed, r.test_rmse
        )?;
    }
    let mut right = BufWriter::new(File::create(out_dir.join("panel_right.csv"))?);
    writeln!(right, "system_size,delta1,n_train,seed,train_rmse,w_l1,max_abs_theta")?;
    for r in table.rows.iter().filter(|r| r.model == "nn") {
        writeln!(
            right,
            "{},{},{},{},{},{},{}",
            r.system_size,
            r.delta1,
            r.n_train,
            r.seed,
            r.train_rmse,
            opt(r.w_l1),
            opt(r.max_abs_theta)
        )?;
    }
    left.flush()?;
    center.flush()?;
    right.flush()?;
    Ok(())
}

/// Discrepancy of Sobol and uniform point sets next to their bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyRow {
    pub dim: usize,
    pub n: usize,
    pub sobol_lower: f64,
    pub sobol_upper: f64,
    pub sobol_bound: f64,
    pub uniform_lower: f64,
    pub uniform_upper: f64,
    pub uniform_bound: f64,
}

pub fn discrepancy_report(dim: usize, ns: &[usize], resolution: usize, seed: u64, delta: f64) -> Result<Vec<DiscrepancyRow>> {
    ns.iter()
        .map(|&n| {
            let s = qmc::star_discrepancy(&sobol_points(n, dim)?, resolution)?;
            let u = qmc::star_discrepancy(&uniform_points(n, dim, seed), resolution)?;
            let nf = n as f64;
            Ok(DiscrepancyRow {
                dim,
                n,
                sobol_lower: s.lower,
                sobol_upper: s.upper,
                sobol_bound: qmc::sobol_bound_constant(dim) * nf.ln().powi(dim as i32) / nf,
                uniform_lower: u.lower,
                uniform_upper: u.upper,
                uniform_bound: qmc::random_discrepancy_bound(n, dim, delta),
            })
        })
        .collect()
}

/// Maps an error to the process exit status: 2 for configuration problems,
/// 3 for capacity limits, 4 for solver or training failures, 1 otherwise.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Schema { .. } | Error::Density(_) | Error::Json(_) => 2,
        Error::Capacity { .. } | Error::Blowup { .. } => 3,
        Error::Convergence { .. } | Error::Diverged { .. } | Error::Solver(_) => 4,
        _ => 1,
    }
}
