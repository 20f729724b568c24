//! Parameterized geometrically-local Hamiltonians `H(x) = sum_j h_j(x_j)`,
//! target observables, and the geometric queries the learners rely on
//! (observable distance, local coordinate sets, the local Pauli set).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::Lattice;
use crate::pauli::{Pauli, PauliString};
use crate::sparse::SparseMatrix;

/// Largest qubit count the exact solvers accept unless configured otherwise.
pub const DEFAULT_CAPACITY: usize = 16;

/// Affine scalar coupling `s(x) = offset + sum_i weights[i] * x[params[i]]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    pub offset: f64,
    pub weights: Vec<f64>,
}

impl Coupling {
    /// Largest `|s(x)|` over the parameter cube.
    pub fn max_abs(&self) -> f64 {
        self.offset.abs() + self.weights.iter().map(|w| w.abs()).sum::<f64>()
    }
}

/// One local term `h_j(x_j) = s(x_j) * sum_k c_k P_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalTerm {
    pub paulis: Vec<(f64, PauliString)>,
    pub params: Vec<usize>,
    pub coupling: Coupling,
}

impl LocalTerm {
    pub fn scale(&self, x: &[f64]) -> f64 {
        self.coupling.offset + self.params.iter().zip(&self.coupling.weights).map(|(&c, w)| w * x[c]).sum::<f64>()
    }

    /// Sorted, deduplicated sites the term acts on.
    pub fn support(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self.paulis.iter().flat_map(|(_, p)| p.support()).collect();
        s.sort_unstable();
        s.dedup();
        s
    }

    /// Upper bound on the spectral norm of the term over `x in [-1,1]^m`.
    pub fn norm_bound(&self) -> f64 {
        self.coupling.max_abs() * self.paulis.iter().map(|(c, _)| c.abs()).sum::<f64>()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct HamiltonianDesc {
    lattice: Lattice,
    terms: Vec<LocalTerm>,
    n_params: usize,
}

/// The parameterized family. Parameter slices of distinct terms partition
/// `0..n_params`; every parameter belongs to exactly one term.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "HamiltonianDesc", into = "HamiltonianDesc")]
pub struct ParamHamiltonian {
    lattice: Lattice,
    terms: Vec<LocalTerm>,
    n_params: usize,
    owner: Vec<usize>,
}

impl TryFrom<HamiltonianDesc> for ParamHamiltonian {
    type Error = Error;

    fn try_from(d: HamiltonianDesc) -> Result<Self> {
        ParamHamiltonian::new(d.lattice, d.terms, d.n_params)
    }
}

impl From<ParamHamiltonian> for HamiltonianDesc {
    fn from(h: ParamHamiltonian) -> Self {
        HamiltonianDesc {
            lattice: h.lattice,
            terms: h.terms,
            n_params: h.n_params,
        }
    }
}

impl ParamHamiltonian {
    pub fn new(lattice: Lattice, terms: Vec<LocalTerm>, n_params: usize) -> Result<Self> {
        let mut owner = vec![usize::MAX; n_params];
        for (j, t) in terms.iter().enumerate() {
            if t.params.len() != t.coupling.weights.len() {
                return Err(Error::domain(format!("term {j}: params and weights differ in length")));
            }
            for &c in &t.params {
                if c >= n_params {
                    return Err(Error::domain(format!("term {j}: parameter {c} out of range")));
                }
                if owner[c] != usize::MAX {
                    return Err(Error::domain(format!("parameter {c} owned by terms {} and {j}", owner[c])));
                }
                owner[c] = j;
            }
            for (_, p) in &t.paulis {
                if p.max_site().is_some_and(|s| s >= lattice.n_sites()) {
                    return Err(Error::domain(format!("term {j}: {p} outside lattice")));
                }
            }
        }
        if let Some(c) = owner.iter().position(|&o| o == usize::MAX) {
            return Err(Error::domain(format!("parameter {c} not owned by any term")));
        }
        Ok(ParamHamiltonian {
            lattice,
            terms,
            n_params,
            owner,
        })
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn terms(&self) -> &[LocalTerm] {
        &self.terms
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn n_qubits(&self) -> usize {
        self.lattice.n_sites()
    }

    /// Index of the term that parameter `c` feeds.
    pub fn owner_of(&self, c: usize) -> usize {
        self.owner[c]
    }

    /// Largest per-term norm bound over the parameter cube.
    pub fn max_term_norm(&self) -> f64 {
        self.terms.iter().map(LocalTerm::norm_bound).fold(0.0, f64::max)
    }

    /// Factor that brings every term to norm at most one. Energies and
    /// matrices are reported unscaled; this is bookkeeping only.
    pub fn norm_scale(&self) -> f64 {
        let m = self.max_term_norm();
        if m > 0.0 {
            1.0 / m
        } else {
            1.0
        }
    }

    pub fn check_params(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_params {
            return Err(Error::Dimension {
                expected: self.n_params,
                actual: x.len(),
            });
        }
        if let Some((c, v)) = x.iter().enumerate().find(|(_, v)| !(-1.0..=1.0).contains(*v)) {
            return Err(Error::domain(format!("x[{c}] = {v} outside [-1, 1]")));
        }
        Ok(())
    }

    /// `sum_j h_j(x_j)` in the computational basis.
    pub fn assemble_matrix(&self, x: &[f64], capacity: usize) -> Result<SparseMatrix> {
        self.check_params(x)?;
        let n = self.n_qubits();
        if n > capacity {
            return Err(Error::Capacity {
                what: "qubits",
                actual: n,
                limit: capacity,
            });
        }
        let weighted: Vec<(f64, &PauliString)> = self
            .terms
            .iter()
            .flat_map(|t| {
                let s = t.scale(x);
                t.paulis.iter().map(move |(c, p)| (s * c, p))
            })
            .collect();
        Ok(SparseMatrix::from_pauli_sum(n, weighted))
    }
}

/// `O = sum_P alpha_P P`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observable {
    pub name: String,
    pub components: Vec<(f64, PauliString)>,
}

impl Observable {
    pub fn new(name: impl Into<String>, components: Vec<(f64, PauliString)>) -> Self {
        Observable {
            name: name.into(),
            components,
        }
    }

    /// `sum_P |alpha_P|`, an upper bound on the spectral norm.
    pub fn l1_norm(&self) -> f64 {
        self.components.iter().map(|(a, _)| a.abs()).sum()
    }

    /// Coefficient of `p`; zero when `p` does not appear.
    pub fn alpha(&self, p: &PauliString) -> f64 {
        self.components.iter().filter(|(_, q)| q == p).map(|(a, _)| a).sum()
    }

    /// Every component's support has diameter at most `radius`.
    pub fn is_local(&self, lattice: &Lattice, radius: f64) -> bool {
        self.components.iter().all(|(_, p)| support_diameter(lattice, p) <= radius)
    }
}

/// Two-body correlator `C_ij = (X_i X_j + Y_i Y_j + Z_i Z_j) / 3`.
pub fn correlator(i: usize, j: usize) -> Observable {
    Observable::new(
        format!("C_{i}_{j}"),
        Pauli::ALL.iter().map(|&p| (1.0 / 3.0, PauliString::pair(i, j, p))).collect(),
    )
}

fn heisenberg_term(a: usize, b: usize, param: usize) -> LocalTerm {
    LocalTerm {
        paulis: Pauli::ALL.iter().map(|&p| (1.0, PauliString::pair(a, b, p))).collect(),
        params: vec![param],
        // J = x + 1 maps x in [-1,1] to J in [0,2]
        coupling: Coupling {
            offset: 1.0,
            weights: vec![1.0],
        },
    }
}

/// Nearest-neighbour Heisenberg model on an open `rows x cols` grid: one
/// coupling per bond, plus `C_ij` for every bond.
pub fn build_heisenberg(rows: usize, cols: usize) -> Result<(ParamHamiltonian, Vec<Observable>)> {
    let lattice = Lattice::grid(rows, cols)?;
    let terms: Vec<_> = lattice.bonds().iter().enumerate().map(|(k, &(a, b))| heisenberg_term(a, b, k)).collect();
    let obs = lattice.bonds().iter().map(|&(a, b)| correlator(a, b)).collect();
    let m = terms.len();
    Ok((ParamHamiltonian::new(lattice, terms, m)?, obs))
}

/// Heisenberg couplings between every unordered pair of sites on the grid;
/// the targets stay the nearest-neighbour correlators.
pub fn build_heisenberg_allpairs(rows: usize, cols: usize) -> Result<(ParamHamiltonian, Vec<Observable>)> {
    let lattice = Lattice::grid(rows, cols)?;
    let n = lattice.n_sites();
    let mut terms = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            terms.push(heisenberg_term(a, b, terms.len()));
        }
    }
    let obs = lattice.bonds().iter().map(|&(a, b)| correlator(a, b)).collect();
    let m = terms.len();
    Ok((ParamHamiltonian::new(lattice, terms, m)?, obs))
}

/// Couplings `J in [0,2]^m` to parameters `x = J - 1`.
pub fn couplings_to_params(j: &[f64]) -> Result<Vec<f64>> {
    j.iter()
        .enumerate()
        .map(|(c, &v)| {
            if (0.0..=2.0).contains(&v) {
                Ok(v - 1.0)
            } else {
                Err(Error::domain(format!("J[{c}] = {v} outside [0, 2]")))
            }
        })
        .collect()
}

pub fn params_to_couplings(x: &[f64]) -> Result<Vec<f64>> {
    x.iter()
        .enumerate()
        .map(|(c, &v)| {
            if (-1.0..=1.0).contains(&v) {
                Ok(v + 1.0)
            } else {
                Err(Error::domain(format!("x[{c}] = {v} outside [-1, 1]")))
            }
        })
        .collect()
}

fn min_distance(lattice: &Lattice, a: &[usize], b: &[usize]) -> f64 {
    a.iter()
        .flat_map(|&i| b.iter().map(move |&j| lattice.distance(i, j)))
        .fold(f64::INFINITY, f64::min)
}

/// Minimum lattice distance between the supports of two Pauli strings.
pub fn obs_distance(p: &PauliString, q: &PauliString, lattice: &Lattice) -> Result<f64> {
    if p.is_identity() || q.is_identity() {
        return Err(Error::domain("distance to the identity is undefined"));
    }
    let ps: Vec<usize> = p.support().collect();
    let qs: Vec<usize> = q.support().collect();
    Ok(min_distance(lattice, &ps, &qs))
}

fn support_diameter(lattice: &Lattice, p: &PauliString) -> f64 {
    let s: Vec<usize> = p.support().collect();
    let mut d: f64 = 0.0;
    for &i in &s {
        for &j in &s {
            d = d.max(lattice.distance(i, j));
        }
    }
    d
}

/// Coordinates whose owning term lies within `delta1` of `p`, ascending.
pub fn local_coordinates(p: &PauliString, h: &ParamHamiltonian, delta1: f64) -> Vec<usize> {
    let ps: Vec<usize> = p.support().collect();
    let near: Vec<bool> = h.terms().iter().map(|t| min_distance(h.lattice(), &t.support(), &ps) <= delta1).collect();
    (0..h.n_params()).filter(|&c| near[h.owner_of(c)]).collect()
}

/// All non-identity Pauli strings with at most `max_weight` sites whose
/// support has diameter at most `radius`, sorted lexicographically.
pub fn enumerate_geo_paulis(lattice: &Lattice, radius: f64, max_weight: usize) -> Vec<PauliString> {
    let n = lattice.n_sites();
    let mut supports: Vec<Vec<usize>> = Vec::new();
    let mut stack: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    while let Some(s) = stack.pop() {
        if s.len() < max_weight {
            let last = *s.last().unwrap();
            for j in last + 1..n {
                if s.iter().all(|&i| lattice.distance(i, j) <= radius) {
                    let mut t = s.clone();
                    t.push(j);
                    stack.push(t);
                }
            }
        }
        supports.push(s);
    }
    let mut out = Vec::new();
    for s in supports.iter().filter(|s| s.len() <= max_weight) {
        let k = s.len();
        for code in 0..3usize.pow(k as u32) {
            let mut c = code;
            let factors = s
                .iter()
                .map(|&site| {
                    let p = Pauli::from_index((c % 3) as u8).unwrap();
                    c /= 3;
                    (site, p)
                })
                .collect();
            out.push(PauliString::new(factors).unwrap());
        }
    }
    out.sort();
    out
}
