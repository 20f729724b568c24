//! Sparse Pauli strings over a register of qubits.
//!
//! Basis convention used everywhere: site `k` is bit `k` of the
//! computational-basis index, and `|0>` is the +1 eigenstate of Z.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::MAX_SITES;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Pauli {
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 3] = [Pauli::X, Pauli::Y, Pauli::Z];

    pub fn letter(self) -> char {
        match self {
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    pub fn index(self) -> u8 {
        self as u8
    }

    pub fn from_index(i: u8) -> Option<Pauli> {
        match i {
            0 => Some(Pauli::X),
            1 => Some(Pauli::Y),
            2 => Some(Pauli::Z),
            _ => None,
        }
    }
}

/// A tensor product of single-qubit Paulis; identity sites are omitted.
///
/// Factors are kept sorted by site, so the derived ordering is
/// lexicographic in `(site, letter)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<(usize, Pauli)>", into = "Vec<(usize, Pauli)>")]
pub struct PauliString {
    factors: Vec<(usize, Pauli)>,
}

impl TryFrom<Vec<(usize, Pauli)>> for PauliString {
    type Error = Error;

    fn try_from(v: Vec<(usize, Pauli)>) -> Result<Self> {
        PauliString::new(v)
    }
}

impl From<PauliString> for Vec<(usize, Pauli)> {
    fn from(p: PauliString) -> Self {
        p.factors
    }
}

impl PauliString {
    pub fn new(mut factors: Vec<(usize, Pauli)>) -> Result<Self> {
        factors.sort();
        for w in factors.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::domain(format!("site {} appears twice", w[0].0)));
            }
        }
        if let Some(&(s, _)) = factors.last() {
            if s >= MAX_SITES {
                return Err(Error::domain(format!("site {s} beyond {MAX_SITES}")));
            }
        }
        Ok(PauliString { factors })
    }

    pub fn identity() -> Self {
        PauliString { factors: Vec::new() }
    }

    pub fn single(site: usize, p: Pauli) -> Self {
        PauliString::new(vec![(site, p)]).expect("single-site string")
    }

    /// `p` on both `a` and `b` (`a != b`).
    pub fn pair(a: usize, b: usize, p: Pauli) -> Self {
        PauliString::new(vec![(a, p), (b, p)]).expect("distinct sites")
    }

    pub fn factors(&self) -> &[(usize, Pauli)] {
        &self.factors
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.factors.iter().map(|&(s, _)| s)
    }

    pub fn weight(&self) -> usize {
        self.factors.len()
    }

    pub fn is_identity(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn letter_at(&self, site: usize) -> Option<Pauli> {
        self.factors.binary_search_by_key(&site, |&(s, _)| s).ok().map(|i| self.factors[i].1)
    }

    pub fn max_site(&self) -> Option<usize> {
        self.factors.last().map(|&(s, _)| s)
    }

    /// Bits flipped by the string (sites carrying X or Y).
    pub fn x_mask(&self) -> u64 {
        self.factors
            .iter()
            .filter(|(_, p)| matches!(p, Pauli::X | Pauli::Y))
            .fold(0, |m, &(s, _)| m | (1 << s))
    }

    /// Sites that contribute a sign (Z or Y).
    pub fn z_mask(&self) -> u64 {
        self.factors
            .iter()
            .filter(|(_, p)| matches!(p, Pauli::Z | Pauli::Y))
            .fold(0, |m, &(s, _)| m | (1 << s))
    }

    pub fn y_count(&self) -> u32 {
        self.factors.iter().filter(|(_, p)| *p == Pauli::Y).count() as u32
    }

    /// Compiled form for repeated application to basis states.
    pub fn action(&self) -> PauliAction {
        let phase = match self.y_count() % 4 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        };
        PauliAction {
            x_mask: self.x_mask() as usize,
            z_mask: self.z_mask() as usize,
            phase,
        }
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.factors.is_empty() {
            return write!(f, "I");
        }
        for &(s, p) in &self.factors {
            write!(f, "{}{}", p.letter(), s)?;
        }
        Ok(())
    }
}

/// `P|b> = phase * (-1)^{popcount(b & z_mask)} |b ^ x_mask>`.
#[derive(Debug, Clone, Copy)]
pub struct PauliAction {
    pub x_mask: usize,
    pub z_mask: usize,
    pub phase: Complex64,
}

impl PauliAction {
    #[inline]
    pub fn apply(&self, b: usize) -> (usize, Complex64) {
        let sign = if (b & self.z_mask).count_ones().is_multiple_of(2) { 1.0 } else { -1.0 };
        (b ^ self.x_mask, self.phase * sign)
    }
}
