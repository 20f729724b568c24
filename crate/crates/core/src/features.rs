//! Geometric discretization of parameter space and the cell-indicator
//! feature maps.
//!
//! For each local Pauli `P` the coordinates `I_P` are cut into cells of
//! width `delta2` centred on the grid `{0, +-delta2, ..., +-1}`. A point
//! belongs to the cell of `g` when `-delta2/2 < x_c - g delta2 <= delta2/2`
//! in every coordinate of `I_P`. Both feature maps put exactly one nonzero
//! entry in each Pauli block: `1` for `phi`, and `sign(a_P) sqrt|a_P|` for
//! `phi_tilde` so that `|phi_tilde(x)|^2 = sum_P |a_P|` for every `x`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{local_coordinates, Observable, ParamHamiltonian};
use crate::pauli::PauliString;

/// Default cap on the number of grid points per Pauli block.
pub const DEFAULT_CELL_CAP: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HyperParams {
    pub delta1: f64,
    /// Grid spacing; must be the reciprocal of a positive integer. When
    /// absent it is derived per Pauli from `eps1` and `cprime`.
    pub delta2: Option<f64>,
    pub eps1: Option<f64>,
    pub cprime: f64,
    pub cell_cap: u64,
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams {
            delta1: 0.0,
            delta2: Some(1.0),
            eps1: None,
            cprime: 1.0,
            cell_cap: DEFAULT_CELL_CAP,
        }
    }
}

impl HyperParams {
    pub fn new(delta1: f64, delta2: f64) -> Self {
        HyperParams {
            delta1,
            delta2: Some(delta2),
            ..Default::default()
        }
    }
}

/// `1 / ceil(2 sqrt(C' |I_P|) / eps1)`, with the ceiling clamped to at
/// least one so that an empty `I_P` gives spacing 1.
pub fn delta2_default(eps1: f64, ip_size: usize, cprime: f64) -> f64 {
    let k = (2.0 * (cprime * ip_size as f64).sqrt() / eps1).ceil().max(1.0);
    1.0 / k
}

/// Cells per unit: the integer `1/delta2`.
pub fn inverse_spacing(delta2: f64) -> Result<usize> {
    if !(delta2 > 0.0 && delta2 <= 1.0) {
        return Err(Error::config(format!("delta2 = {delta2} must lie in (0, 1]")));
    }
    let k = (1.0 / delta2).round();
    if ((1.0 / delta2) - k).abs() > 1e-9 * k {
        return Err(Error::config(format!("1/delta2 = {} is not an integer", 1.0 / delta2)));
    }
    Ok(k as usize)
}

/// Whether `x` lies in the cell of grid index `g` at `k` cells per unit.
pub fn in_cell(x: f64, g: i64, k: usize) -> bool {
    let d = x * k as f64 - g as f64;
    d > -0.5 && d <= 0.5
}

/// Grid index of the cell containing `x in [-1, 1]`.
pub fn cell_index(x: f64, k: usize) -> i64 {
    let t = x * k as f64;
    let mut g = (t - 0.5).ceil() as i64;
    // `t - 0.5` can round across an integer; settle on the exact predicate
    if t - g as f64 > 0.5 {
        g += 1;
    } else if t - g as f64 <= -0.5 {
        g -= 1;
    }
    g.clamp(-(k as i64), k as i64)
}

fn block_size(ip_len: usize, k: usize) -> Option<u128> {
    (2 * k as u128 + 1).checked_pow(ip_len as u32)
}

/// The grid `X_P` as full-length vectors (zeros outside `ip`), in the
/// order of the linear cell index.
pub fn lattice_points(ip: &[usize], m: usize, delta2: f64, cap: u64) -> Result<Vec<Vec<f64>>> {
    let k = inverse_spacing(delta2)?;
    let size = block_size(ip.len(), k).unwrap_or(u128::MAX);
    if size > cap as u128 {
        return Err(Error::Blowup {
            pauli: format!("|I_P| = {}", ip.len()),
            cells: size,
            cap,
        });
    }
    let base = 2 * k + 1;
    Ok((0..size as usize)
        .map(|mut idx| {
            let mut v = vec![0.0; m];
            for &c in ip {
                v[c] = ((idx % base) as i64 - k as i64) as f64 / k as f64;
                idx /= base;
            }
            v
        })
        .collect())
}

/// The grid point `x'` whose cell contains `x`, zeros outside `ip`.
pub fn locate_cell(x: &[f64], ip: &[usize], delta2: f64) -> Result<Vec<f64>> {
    let k = inverse_spacing(delta2)?;
    let mut v = vec![0.0; x.len()];
    for &c in ip {
        v[c] = cell_index(x[c], k) as f64 / k as f64;
    }
    Ok(v)
}

/// Sparse feature vector with entries sorted by index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub dim: usize,
    pub entries: Vec<(usize, f64)>,
}

impl FeatureVector {
    pub fn dot(&self, w: &[f64]) -> f64 {
        self.entries.iter().map(|&(i, v)| v * w[i]).sum()
    }

    /// Inner product with another vector of the same layout.
    pub fn dot_sparse(&self, other: &FeatureVector) -> f64 {
        let (mut i, mut j, mut acc) = (0, 0, 0.0);
        let (a, b) = (&self.entries, &other.entries);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += a[i].1 * b[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }

    pub fn norm_sq(&self) -> f64 {
        self.entries.iter().map(|(_, v)| v * v).sum()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.dim];
        for &(i, v) in &self.entries {
            d[i] += v;
        }
        d
    }
}

/// Block layout of the feature space for one Hamiltonian and Pauli set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureMap {
    paulis: Vec<PauliString>,
    local: Vec<Vec<usize>>,
    spacing: Vec<usize>,
    offsets: Vec<usize>,
    dim: usize,
    n_params: usize,
}

impl FeatureMap {
    pub fn new(h: &ParamHamiltonian, paulis: Vec<PauliString>, hp: &HyperParams) -> Result<Self> {
        if hp.delta1 < 0.0 || hp.delta1.is_nan() {
            return Err(Error::config(format!("delta1 = {} must be nonnegative", hp.delta1)));
        }
        let mut local = Vec::with_capacity(paulis.len());
        let mut spacing = Vec::with_capacity(paulis.len());
        let mut offsets = Vec::with_capacity(paulis.len() + 1);
        let mut dim = 0usize;
        for p in &paulis {
            let ip = local_coordinates(p, h, hp.delta1);
            let d2 = match (hp.delta2, hp.eps1) {
                (Some(d), _) => d,
                (None, Some(eps1)) => delta2_default(eps1, ip.len(), hp.cprime),
                (None, None) => return Err(Error::config("either delta2 or eps1 is required")),
            };
            let k = inverse_spacing(d2)?;
            let size = block_size(ip.len(), k).unwrap_or(u128::MAX);
            if size > hp.cell_cap as u128 {
                return Err(Error::Blowup {
                    pauli: p.to_string(),
                    cells: size,
                    cap: hp.cell_cap,
                });
            }
            offsets.push(dim);
            dim += size as usize;
            local.push(ip);
            spacing.push(k);
        }
        offsets.push(dim);
        Ok(FeatureMap {
            paulis,
            local,
            spacing,
            offsets,
            dim,
            n_params: h.n_params(),
        })
    }

    /// Total feature dimension `sum_P |X_P|`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn paulis(&self) -> &[PauliString] {
        &self.paulis
    }

    pub fn local_coords(&self, i: usize) -> &[usize] {
        &self.local[i]
    }

    pub fn block_range(&self, i: usize) -> std::ops::Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_params {
            return Err(Error::Dimension {
                expected: self.n_params,
                actual: x.len(),
            });
        }
        if let Some(v) = x.iter().find(|v| !(-1.0..=1.0).contains(*v)) {
            return Err(Error::domain(format!("coordinate {v} outside [-1, 1]")));
        }
        Ok(())
    }

    /// Global feature index of the cell containing `x`, one per Pauli.
    pub fn cells(&self, x: &[f64]) -> Result<Vec<usize>> {
        self.check(x)?;
        Ok((0..self.paulis.len())
            .map(|i| {
                let k = self.spacing[i];
                let base = 2 * k + 1;
                let mut idx = 0usize;
                let mut stride = 1usize;
                for &c in &self.local[i] {
                    idx += (cell_index(x[c], k) + k as i64) as usize * stride;
                    stride *= base;
                }
                self.offsets[i] + idx
            })
            .collect())
    }

    /// Indicator features: one entry of value 1 per Pauli.
    pub fn phi(&self, x: &[f64]) -> Result<FeatureVector> {
        Ok(FeatureVector {
            dim: self.dim,
            entries: self.cells(x)?.into_iter().map(|i| (i, 1.0)).collect(),
        })
    }

    /// Indicator features scaled by `sign(a_P) sqrt|a_P|`. Paulis absent
    /// from `o` keep their entry with value zero.
    pub fn phi_tilde(&self, x: &[f64], o: &Observable) -> Result<FeatureVector> {
        let scale = self.scales(o);
        Ok(FeatureVector {
            dim: self.dim,
            entries: self.cells(x)?.into_iter().zip(scale).collect(),
        })
    }

    /// Per-Pauli block values `sign(a_P) sqrt|a_P|`.
    pub fn scales(&self, o: &Observable) -> Vec<f64> {
        self.paulis
            .iter()
            .map(|p| {
                let a = o.alpha(p);
                a.signum() * a.abs().sqrt() * f64::from(a != 0.0)
            })
            .collect()
    }
}

/// Writes feature vectors as `row,index,value` CSV.
pub fn write_features_csv<W: Write>(rows: &[FeatureVector], mut w: W) -> Result<()> {
    writeln!(w, "row,index,value")?;
    for (r, f) in rows.iter().enumerate() {
        for &(i, v) in &f.entries {
            writeln!(w, "{r},{i},{v}")?;
        }
    }
    Ok(())
}
