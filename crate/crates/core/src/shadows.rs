//! Classical shadows from randomized single-qubit Pauli measurements.
//!
//! Each round picks X, Y or Z uniformly for every qubit and samples the
//! outcomes from the exact Born distribution by measuring the qubits one at
//! a time: the marginal of `P_i` on the current state is `(1 +- <P_i>)/2`,
//! and the state is projected with `(I +- P_i)/2` and renormalized.

use std::io::{Read, Write};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigen::pauli_expectation;
use crate::error::{Error, Result};
use crate::hamiltonian::Observable;
use crate::pauli::{Pauli, PauliString};

const MAGIC: &[u8; 4] = b"SHDW";
const BINARY_VERSION: u8 = 1;

/// One measurement round: a basis and a `+1/-1` outcome per qubit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShadowRound {
    pub bases: Vec<Pauli>,
    pub outcomes: Vec<i8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShadowRecord {
    pub n_qubits: usize,
    pub rounds: Vec<ShadowRound>,
}

/// How per-round estimates are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Aggregate {
    #[default]
    Mean,
    /// Median over `groups` contiguous batches of rounds.
    MedianOfMeans { groups: usize },
}

/// Seed for round `round` of a record seeded with `seed` (splitmix64 mix).
pub fn round_seed(seed: u64, round: u64) -> u64 {
    let mut z = seed ^ round.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn check_state(state: &[Complex64]) -> Result<usize> {
    if !state.len().is_power_of_two() {
        return Err(Error::domain(format!("state length {} is not a power of two", state.len())));
    }
    let norm: f64 = state.iter().map(|z| z.norm_sqr()).sum();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::domain(format!("state has squared norm {norm}")));
    }
    Ok(state.len().trailing_zeros() as usize)
}

fn measure_round(state: &[Complex64], n: usize, rng: &mut ChaCha8Rng) -> ShadowRound {
    let bases: Vec<Pauli> = (0..n).map(|_| Pauli::ALL[rng.random_range(0..3)]).collect();
    let mut psi = state.to_vec();
    let mut outcomes = Vec::with_capacity(n);
    for (i, &b) in bases.iter().enumerate() {
        let p = PauliString::single(i, b);
        let mean = pauli_expectation(&p, &psi).clamp(-1.0, 1.0);
        let p_plus = 0.5 * (1.0 + mean);
        let s: i8 = if rng.random::<f64>() < p_plus { 1 } else { -1 };
        let prob = if s == 1 { p_plus } else { 1.0 - p_plus };
        // psi <- (I + s P_i) psi / (2 sqrt(prob))
        let a = p.action();
        let mut next = psi.clone();
        for (k, &amp) in psi.iter().enumerate() {
            let (k2, ph) = a.apply(k);
            next[k2] += ph * amp * f64::from(s);
        }
        let scale = 0.5 / prob.sqrt();
        psi = next.into_iter().map(|z| z * scale).collect();
        outcomes.push(s);
    }
    ShadowRound { bases, outcomes }
}

/// `rounds` randomized Pauli measurements of a pure state.
pub fn sample_shadow(state: &[Complex64], rounds: usize, seed: u64) -> Result<ShadowRecord> {
    let n = check_state(state)?;
    let rounds = (0..rounds as u64)
        .into_par_iter()
        .map(|t| measure_round(state, n, &mut ChaCha8Rng::seed_from_u64(round_seed(seed, t))))
        .collect();
    Ok(ShadowRecord { n_qubits: n, rounds })
}

/// Shadows of the uniform mixture over `basis`: every round measures a
/// basis vector drawn uniformly at random.
pub fn sample_shadow_mixture(basis: &[Vec<Complex64>], rounds: usize, seed: u64) -> Result<ShadowRecord> {
    let first = basis.first().ok_or_else(|| Error::domain("empty ground basis"))?;
    let n = check_state(first)?;
    for v in basis {
        if check_state(v)? != n {
            return Err(Error::domain("basis vectors differ in length"));
        }
    }
    let rounds = (0..rounds as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(round_seed(seed, t));
            let k = rng.random_range(0..basis.len());
            measure_round(&basis[k], n, &mut rng)
        })
        .collect();
    Ok(ShadowRecord { n_qubits: n, rounds })
}

/// Single-round estimate of `<P>`: `3^|P| prod outcomes` when the measured
/// bases agree with `P` on its support, zero otherwise.
pub fn round_estimate(round: &ShadowRound, p: &PauliString) -> f64 {
    let mut v = 1.0;
    for &(s, letter) in p.factors() {
        if round.bases[s] != letter {
            return 0.0;
        }
        v *= 3.0 * f64::from(round.outcomes[s]);
    }
    v
}

fn check_pauli(shadow: &ShadowRecord, p: &PauliString) -> Result<()> {
    if p.is_identity() {
        return Err(Error::domain("estimator needs a non-identity Pauli string"));
    }
    if p.max_site().unwrap() >= shadow.n_qubits {
        return Err(Error::Dimension {
            expected: shadow.n_qubits,
            actual: p.max_site().unwrap() + 1,
        });
    }
    if shadow.rounds.is_empty() {
        return Err(Error::domain("shadow has no rounds"));
    }
    Ok(())
}

pub fn estimate_pauli(shadow: &ShadowRecord, p: &PauliString) -> Result<f64> {
    estimate_pauli_with(shadow, p, Aggregate::Mean)
}

pub fn estimate_pauli_with(shadow: &ShadowRecord, p: &PauliString, agg: Aggregate) -> Result<f64> {
    check_pauli(shadow, p)?;
    let values: Vec<f64> = shadow.rounds.iter().map(|r| round_estimate(r, p)).collect();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    match agg {
        Aggregate::Mean => Ok(mean(&values)),
        Aggregate::MedianOfMeans { groups } => {
            if groups == 0 || groups > values.len() {
                return Err(Error::config(format!("{groups} groups for {} rounds", values.len())));
            }
            let size = values.len() / groups;
            let mut means: Vec<f64> = (0..groups).map(|g| mean(&values[g * size..(g + 1) * size])).collect();
            means.sort_by(f64::total_cmp);
            Ok(if groups % 2 == 1 {
                means[groups / 2]
            } else {
                0.5 * (means[groups / 2 - 1] + means[groups / 2])
            })
        }
    }
}

/// `sum_P alpha_P * estimate(P)`.
pub fn estimate_observable(shadow: &ShadowRecord, o: &Observable) -> Result<f64> {
    estimate_observable_with(shadow, o, Aggregate::Mean)
}

pub fn estimate_observable_with(shadow: &ShadowRecord, o: &Observable, agg: Aggregate) -> Result<f64> {
    o.components.iter().map(|(a, p)| Ok(a * estimate_pauli_with(shadow, p, agg)?)).sum()
}

impl ShadowRecord {
    /// Compact encoding: magic, version, `n`, `T`, one basis byte per
    /// qubit-round, then outcome bits packed LSB first (set bit = -1).
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&[BINARY_VERSION])?;
        w.write_all(&(self.n_qubits as u32).to_le_bytes())?;
        w.write_all(&(self.rounds.len() as u64).to_le_bytes())?;
        let bases: Vec<u8> = self.rounds.iter().flat_map(|r| r.bases.iter().map(|b| b.index())).collect();
        w.write_all(&bases)?;
        let mut bits = vec![0u8; (self.rounds.len() * self.n_qubits).div_ceil(8)];
        for (k, &o) in self.rounds.iter().flat_map(|r| r.outcomes.iter()).enumerate() {
            if o < 0 {
                bits[k / 8] |= 1 << (k % 8);
            }
        }
        w.write_all(&bits)?;
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut head = [0u8; 17];
        r.read_exact(&mut head)?;
        if &head[..4] != MAGIC {
            return Err(Error::domain("not a shadow record"));
        }
        if head[4] != BINARY_VERSION {
            return Err(Error::Schema {
                found: head[4] as u32,
                expected: BINARY_VERSION as u32,
            });
        }
        let n = u32::from_le_bytes(head[5..9].try_into().unwrap()) as usize;
        let t = u64::from_le_bytes(head[9..17].try_into().unwrap()) as usize;
        let mut bases = vec![0u8; n * t];
        r.read_exact(&mut bases)?;
        let mut bits = vec![0u8; (n * t).div_ceil(8)];
        r.read_exact(&mut bits)?;
        let mut rounds = Vec::with_capacity(t);
        for k in 0..t {
            let bases = bases[k * n..(k + 1) * n]
                .iter()
                .map(|&b| Pauli::from_index(b).ok_or_else(|| Error::domain(format!("bad basis byte {b}"))))
                .collect::<Result<_>>()?;
            let outcomes = (k * n..(k + 1) * n)
                .map(|i| if bits[i / 8] >> (i % 8) & 1 == 1 { -1 } else { 1 })
                .collect();
            rounds.push(ShadowRound { bases, outcomes });
        }
        Ok(ShadowRecord { n_qubits: n, rounds })
    }
}
