//! Exact ground states of `H(x)` and expectation values in the uniform
//! mixture over the ground space.
//!
//! Small systems go through a dense Hermitian eigendecomposition; larger
//! ones through Lanczos with full reorthogonalization. Further eigenvectors
//! are obtained by deflation until the first level above the ground energy
//! appears, which yields both the degeneracy and the gap.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{Observable, ParamHamiltonian, DEFAULT_CAPACITY};
use crate::pauli::PauliString;
use crate::sparse::SparseMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Largest qubit count accepted at all.
    pub capacity: usize,
    /// Systems up to this many qubits use the dense eigendecomposition.
    pub dense_max_qubits: usize,
    /// Krylov subspace size per Lanczos restart.
    pub krylov_dim: usize,
    pub max_restarts: usize,
    /// Required `||H psi - E psi||` for every returned vector.
    pub residual_tol: f64,
    /// Seed of the Lanczos start vectors.
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            capacity: DEFAULT_CAPACITY,
            dense_max_qubits: 8,
            krylov_dim: 120,
            max_restarts: 50,
            residual_tol: 1e-8,
            seed: 0x5eed,
        }
    }
}

/// Lowest eigenvalue, its eigenspace, and the distance to the next level.
#[derive(Debug, Clone)]
pub struct GroundStateSolution {
    pub energy: f64,
    /// `E1 - E0`; `None` when the whole spectrum is degenerate.
    pub gap: Option<f64>,
    pub ground_basis: Vec<Vec<Complex64>>,
}

impl GroundStateSolution {
    pub fn degeneracy(&self) -> usize {
        self.ground_basis.len()
    }

    pub fn n_qubits(&self) -> usize {
        self.ground_basis[0].len().trailing_zeros() as usize
    }
}

/// Tolerance under which two eigenvalues count as the same level.
pub fn degeneracy_tol(e0: f64) -> f64 {
    1e-9f64.max(1e-9 * e0.abs())
}

pub fn ground_state(h: &ParamHamiltonian, x: &[f64], cfg: &SolverConfig) -> Result<GroundStateSolution> {
    let m = h.assemble_matrix(x, cfg.capacity)?;
    if h.n_qubits() <= cfg.dense_max_qubits {
        dense_ground_state(&m)
    } else {
        lanczos_ground_state(&m, cfg)
    }
}

/// Ground space from a full eigendecomposition.
pub fn dense_ground_state(m: &SparseMatrix) -> Result<GroundStateSolution> {
    let eig = SymmetricEigen::new(m.to_dense());
    let mut order: Vec<usize> = (0..m.dim()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let e0 = eig.eigenvalues[order[0]];
    let tol = degeneracy_tol(e0);
    let mut basis = Vec::new();
    let mut gap = None;
    for &k in &order {
        let e = eig.eigenvalues[k];
        if e - e0 > tol {
            gap = Some(e - e0);
            break;
        }
        basis.push(eig.eigenvectors.column(k).iter().copied().collect());
    }
    Ok(GroundStateSolution {
        energy: e0,
        gap,
        ground_basis: basis,
    })
}

/// Ground space from Lanczos runs, deflating each converged vector.
pub fn lanczos_ground_state(m: &SparseMatrix, cfg: &SolverConfig) -> Result<GroundStateSolution> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut locked: Vec<Vec<Complex64>> = Vec::new();
    let mut energies: Vec<f64> = Vec::new();
    loop {
        if locked.len() == m.dim() {
            break;
        }
        let (e, v) = lanczos_lowest(m, &locked, &mut rng, cfg)?;
        if let Some(&e0) = energies.first() {
            if e - e0 > degeneracy_tol(e0) {
                return Ok(GroundStateSolution {
                    energy: e0,
                    gap: Some(e - e0),
                    ground_basis: locked,
                });
            }
        }
        energies.push(e);
        locked.push(v);
    }
    let energy = energies.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(GroundStateSolution {
        energy,
        gap: None,
        ground_basis: locked,
    })
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn project_out(w: &mut [Complex64], basis: &[Vec<Complex64>]) {
    for v in basis {
        let c = dot(v, w);
        for (wi, vi) in w.iter_mut().zip(v) {
            *wi -= c * vi;
        }
    }
}

fn random_unit(dim: usize, locked: &[Vec<Complex64>], rng: &mut ChaCha8Rng) -> Vec<Complex64> {
    loop {
        let mut v: Vec<Complex64> = (0..dim)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        project_out(&mut v, locked);
        project_out(&mut v, locked);
        let n = norm(&v);
        if n > 1e-8 {
            v.iter_mut().for_each(|z| *z /= n);
            return v;
        }
    }
}

/// Lowest eigenpair of `m` restricted to the complement of `locked`.
fn lanczos_lowest(m: &SparseMatrix, locked: &[Vec<Complex64>], rng: &mut ChaCha8Rng, cfg: &SolverConfig) -> Result<(f64, Vec<Complex64>)> {
    let dim = m.dim();
    let kmax = cfg.krylov_dim.max(2).min(dim - locked.len());
    let mut start = random_unit(dim, locked, rng);
    let mut w = vec![Complex64::new(0.0, 0.0); dim];
    let mut last_residual = f64::NAN;
    for _ in 0..=cfg.max_restarts {
        let mut basis: Vec<Vec<Complex64>> = vec![start.clone()];
        let mut alpha: Vec<f64> = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        let ritz = loop {
            let j = basis.len() - 1;
            m.matvec(&basis[j], &mut w);
            let a = dot(&basis[j], &w).re;
            alpha.push(a);
            // two passes of classical Gram-Schmidt keep the basis orthogonal
            project_out(&mut w, locked);
            project_out(&mut w, &basis);
            project_out(&mut w, locked);
            project_out(&mut w, &basis);
            let b = norm(&w);
            let ritz = lowest_tridiagonal(&alpha, &beta);
            let estimate = b * ritz.1.last().unwrap().abs();
            if basis.len() >= kmax || b < 1e-12 || estimate < 0.1 * cfg.residual_tol {
                break ritz;
            }
            beta.push(b);
            basis.push(w.iter().map(|z| z / b).collect());
        };
        let mut y = vec![Complex64::new(0.0, 0.0); dim];
        for (s, v) in ritz.1.iter().zip(&basis) {
            for (yi, vi) in y.iter_mut().zip(v) {
                *yi += vi * *s;
            }
        }
        project_out(&mut y, locked);
        let n = norm(&y);
        y.iter_mut().for_each(|z| *z /= n);
        m.matvec(&y, &mut w);
        let e = dot(&y, &w).re;
        let r = w.iter().zip(&y).map(|(hy, yi)| (hy - yi * e).norm_sqr()).sum::<f64>().sqrt();
        if r <= cfg.residual_tol {
            return Ok((e, y));
        }
        last_residual = r;
        start = y;
    }
    Err(Error::Convergence {
        method: "lanczos",
        iterations: cfg.max_restarts + 1,
        detail: format!("residual {last_residual:.3e} after {} locked vectors", locked.len()),
    })
}

/// Lowest eigenpair of the real symmetric tridiagonal matrix.
fn lowest_tridiagonal(alpha: &[f64], beta: &[f64]) -> (f64, Vec<f64>) {
    let k = alpha.len();
    let t = DMatrix::from_fn(k, k, |i, j| {
        if i == j {
            alpha[i]
        } else if i + 1 == j {
            beta[i]
        } else if j + 1 == i {
            beta[j]
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(t);
    let i = eig.eigenvalues.argmin().0;
    (eig.eigenvalues[i], eig.eigenvectors.column(i).iter().copied().collect())
}

fn pauli_matrix_element(p: &PauliString, state: &[Complex64]) -> Complex64 {
    let a = p.action();
    state
        .iter()
        .enumerate()
        .map(|(b, &amp)| {
            let (b2, ph) = a.apply(b);
            state[b2].conj() * ph * amp
        })
        .sum()
}

/// `<psi|P|psi>`; the imaginary part vanishes for Hermitian `P`.
pub fn pauli_expectation(p: &PauliString, state: &[Complex64]) -> f64 {
    pauli_matrix_element(p, state).re
}

/// `tr(O rho)` for the uniform mixture over the ground space, clamped to
/// `[-sum|alpha|, sum|alpha|]`.
pub fn expectation(o: &Observable, gs: &GroundStateSolution) -> Result<f64> {
    let n = gs.n_qubits();
    for (_, p) in &o.components {
        if let Some(s) = p.max_site() {
            if s >= n {
                return Err(Error::Dimension { expected: n, actual: s + 1 });
            }
        }
    }
    let mut total = Complex64::new(0.0, 0.0);
    for psi in &gs.ground_basis {
        for (a, p) in &o.components {
            total += pauli_matrix_element(p, psi) * *a;
        }
    }
    total /= gs.degeneracy() as f64;
    let bound = o.l1_norm();
    if total.im.abs() > 1e-10 * bound.max(1.0) {
        return Err(Error::Solver(format!("expectation has imaginary part {:.3e}", total.im)));
    }
    Ok(total.re.clamp(-bound, bound))
}
