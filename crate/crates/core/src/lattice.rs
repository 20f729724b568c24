//! Lattice geometry: site coordinates, nearest-neighbour bonds and the
//! site-to-site distance used for every locality decision in the crate.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hard limit on the number of sites a lattice may describe. Pauli strings
/// pack their support into a `u64`.
pub const MAX_SITES: usize = 64;

/// How distances between sites are measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    /// Shortest-path length on the bond graph (integer valued).
    #[default]
    Graph,
    /// Euclidean distance between integer site coordinates.
    Euclidean,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LatticeDesc {
    positions: Vec<[i32; 2]>,
    bonds: Vec<(usize, usize)>,
    #[serde(default)]
    metric: Metric,
}

/// Sites embedded in Z^2 (1-D chains use row 0) with an explicit bond list.
///
/// Distances are precomputed at construction, so the type is immutable and
/// cheap to query from many threads.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "LatticeDesc", into = "LatticeDesc")]
pub struct Lattice {
    positions: Vec<[i32; 2]>,
    bonds: Vec<(usize, usize)>,
    metric: Metric,
    distances: Vec<f64>,
}

impl TryFrom<LatticeDesc> for Lattice {
    type Error = Error;

    fn try_from(d: LatticeDesc) -> Result<Self> {
        Lattice::new(d.positions, d.bonds, d.metric)
    }
}

impl From<Lattice> for LatticeDesc {
    fn from(l: Lattice) -> Self {
        LatticeDesc {
            positions: l.positions,
            bonds: l.bonds,
            metric: l.metric,
        }
    }
}

impl Lattice {
    pub fn new(positions: Vec<[i32; 2]>, bonds: Vec<(usize, usize)>, metric: Metric) -> Result<Self> {
        let n = positions.len();
        if n == 0 {
            return Err(Error::domain("lattice needs at least one site"));
        }
        if n > MAX_SITES {
            return Err(Error::Capacity {
                what: "lattice sites",
                actual: n,
                limit: MAX_SITES,
            });
        }
        for &(a, b) in &bonds {
            if a >= n || b >= n || a == b {
                return Err(Error::domain(format!("invalid bond ({a}, {b}) on {n} sites")));
            }
        }
        let distances = match metric {
            Metric::Graph => graph_distances(n, &bonds),
            Metric::Euclidean => {
                let mut d = vec![0.0; n * n];
                for i in 0..n {
                    for j in 0..n {
                        let dr = (positions[i][0] - positions[j][0]) as f64;
                        let dc = (positions[i][1] - positions[j][1]) as f64;
                        d[i * n + j] = (dr * dr + dc * dc).sqrt();
                    }
                }
                d
            }
        };
        Ok(Lattice {
            positions,
            bonds,
            metric,
            distances,
        })
    }

    /// Open-boundary `rows x cols` grid, sites numbered row-major. Bonds are
    /// listed site by site: right neighbour first, then the one below.
    pub fn grid(rows: usize, cols: usize) -> Result<Self> {
        Self::grid_with_metric(rows, cols, Metric::Graph)
    }

    pub fn grid_with_metric(rows: usize, cols: usize, metric: Metric) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::domain("grid dimensions must be at least 1"));
        }
        let n = rows.saturating_mul(cols);
        if n > MAX_SITES {
            return Err(Error::Capacity {
                what: "lattice sites",
                actual: n,
                limit: MAX_SITES,
            });
        }
        let mut positions = Vec::with_capacity(n);
        let mut bonds = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                positions.push([r as i32, c as i32]);
                let k = r * cols + c;
                if c + 1 < cols {
                    bonds.push((k, k + 1));
                }
                if r + 1 < rows {
                    bonds.push((k, k + cols));
                }
            }
        }
        Lattice::new(positions, bonds, metric)
    }

    pub fn n_sites(&self) -> usize {
        self.positions.len()
    }

    pub fn positions(&self) -> &[[i32; 2]] {
        &self.positions
    }

    pub fn bonds(&self) -> &[(usize, usize)] {
        &self.bonds
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    /// Distance between two sites; `f64::INFINITY` for disconnected sites
    /// under the graph metric.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.distances[i * self.n_sites() + j]
    }

    /// Largest finite site-to-site distance.
    pub fn diameter(&self) -> f64 {
        self.distances.iter().copied().filter(|d| d.is_finite()).fold(0.0, f64::max)
    }
}

fn graph_distances(n: usize, bonds: &[(usize, usize)]) -> Vec<f64> {
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in bonds {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut out = vec![f64::INFINITY; n * n];
    let mut queue = VecDeque::new();
    for src in 0..n {
        out[src * n + src] = 0.0;
        queue.push_back(src);
        while let Some(u) = queue.pop_front() {
            let du = out[src * n + u];
            for &v in &adj[u] {
                if out[src * n + v].is_infinite() {
                    out[src * n + v] = du + 1.0;
                    queue.push_back(v);
                }
            }
        }
    }
    out
}
