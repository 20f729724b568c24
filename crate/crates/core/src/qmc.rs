//! Quasi-Monte Carlo tools: Sobol points, star discrepancy, a
//! Hardy-Krause variation bound, Koksma-Hlawka diagnostics, and inverse
//! transform sampling for product densities.

use std::io::{BufRead, Write};
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::error::{Error, Result};

/// Highest dimension covered by the bundled direction numbers.
pub const SOBOL_MAX_DIM: usize = 64;
const BITS: u32 = 32;

static DIRECTION_TABLE: &str = include_str!("../data/sobol_directions.txt");

/// Per-dimension direction numbers `V_1..V_32`, scaled to 32-bit integers.
fn directions() -> &'static Vec<[u32; BITS as usize]> {
    static TABLE: OnceLock<Vec<[u32; BITS as usize]>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut out = Vec::with_capacity(SOBOL_MAX_DIM);
        let mut first = [0u32; BITS as usize];
        for (i, v) in first.iter_mut().enumerate() {
            *v = 1 << (BITS - 1 - i as u32);
        }
        out.push(first);
        for line in DIRECTION_TABLE.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let nums: Vec<u32> = line.split_whitespace().map(|t| t.parse().expect("direction table")).collect();
            let (s, a, m) = (nums[1] as usize, nums[2], &nums[3..]);
            let mut v = [0u32; BITS as usize];
            for i in 0..BITS as usize {
                v[i] = if i < s {
                    m[i] << (BITS - 1 - i as u32)
                } else {
                    let mut x = v[i - s] ^ (v[i - s] >> s);
                    for k in 1..s {
                        if (a >> (s - 1 - k)) & 1 == 1 {
                            x ^= v[i - k];
                        }
                    }
                    x
                };
            }
            out.push(v);
        }
        out
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Sobol { skip_zero: bool },
    Uniform { seed: u64 },
    Transformed,
    Imported,
}

/// `N` points in `[0,1)^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSet {
    pub dim: usize,
    pub points: Vec<Vec<f64>>,
    pub provenance: Provenance,
}

impl PointSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let header: Vec<String> = (0..self.dim).map(|j| format!("u{j}")).collect();
        writeln!(w, "{}", header.join(","))?;
        for p in &self.points {
            let row: Vec<String> = p.iter().map(|v| format!("{v:?}")).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| Error::domain("empty point file"))??;
        let dim = header.split(',').count();
        let mut points = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let p: Vec<f64> = line
                .split(',')
                .map(|t| t.trim().parse::<f64>().map_err(|e| Error::domain(format!("bad coordinate {t:?}: {e}"))))
                .collect::<Result<_>>()?;
            if p.len() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    actual: p.len(),
                });
            }
            if p.iter().any(|v| !(0.0..1.0).contains(v)) {
                return Err(Error::domain("coordinate outside [0, 1)"));
            }
            points.push(p);
        }
        Ok(PointSet {
            dim,
            points,
            provenance: Provenance::Imported,
        })
    }
}

/// First `n` base-2 Sobol points in Gray-code order, skipping the
/// all-zeros point.
pub fn sobol_points(n: usize, d: usize) -> Result<PointSet> {
    sobol_points_with(n, d, true)
}

pub fn sobol_points_with(n: usize, d: usize, skip_zero: bool) -> Result<PointSet> {
    if d == 0 || d > SOBOL_MAX_DIM {
        return Err(Error::Capacity {
            what: "sobol dimension",
            actual: d,
            limit: SOBOL_MAX_DIM,
        });
    }
    let total = n + usize::from(skip_zero);
    if total as u64 > u32::MAX as u64 {
        return Err(Error::Capacity {
            what: "sobol points",
            actual: n,
            limit: u32::MAX as usize - 1,
        });
    }
    let v = &directions()[..d];
    let scale = 1.0 / (1u64 << BITS) as f64;
    let mut x = vec![0u32; d];
    let mut points = Vec::with_capacity(n);
    for i in 0..total {
        if i > 0 {
            // flip the direction number of the lowest zero bit of i - 1
            let c = (!(i - 1)).trailing_zeros() as usize;
            for (xj, vj) in x.iter_mut().zip(v) {
                *xj ^= vj[c];
            }
        }
        if i > 0 || !skip_zero {
            points.push(x.iter().map(|&b| b as f64 * scale).collect());
        }
    }
    Ok(PointSet {
        dim: d,
        points,
        provenance: Provenance::Sobol { skip_zero },
    })
}

/// I.i.d. uniform points from a seeded generator.
pub fn uniform_points(n: usize, d: usize, seed: u64) -> PointSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    PointSet {
        dim: d,
        points: (0..n).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect(),
        provenance: Provenance::Uniform { seed },
    }
}

/// With probability at least `1 - delta`, `n` uniform points in dimension
/// `d` have star discrepancy below this value.
pub fn random_discrepancy_bound(n: usize, d: usize, delta: f64) -> f64 {
    5.7 * (4.9 + (1.0 / delta).ln()).sqrt() * (d as f64 / n as f64).sqrt()
}

/// Constant of the Sobol discrepancy bound `D* <= C(d) ln(N)^d / N`,
/// `C(d) = (1/d!) (d / ln(2d))`.
pub fn sobol_bound_constant(d: usize) -> f64 {
    let fact: f64 = (1..=d).map(|k| k as f64).product();
    d as f64 / (2.0 * d as f64).ln() / fact
}

/// Star discrepancy: exact value or a certified bracket.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Discrepancy {
    pub lower: f64,
    pub upper: f64,
}

impl Discrepancy {
    pub fn is_exact(&self) -> bool {
        self.lower == self.upper
    }
}

/// Exact for `d <= 2`, otherwise the bracket on a `resolution^d` grid.
pub fn star_discrepancy(points: &PointSet, resolution: usize) -> Result<Discrepancy> {
    match points.dim {
        1 => {
            let v = exact_1d(&points.points.iter().map(|p| p[0]).collect::<Vec<_>>());
            Ok(Discrepancy { lower: v, upper: v })
        }
        2 => {
            let v = exact_2d(points);
            Ok(Discrepancy { lower: v, upper: v })
        }
        _ => star_discrepancy_bracket(points, resolution),
    }
}

fn exact_1d(xs: &[f64]) -> f64 {
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| ((i + 1) as f64 / n - x).max(x - i as f64 / n))
        .fold(0.0, f64::max)
}

/// Sweep over boxes anchored at point coordinates (and 1), using open
/// counts for the volume-excess side and closed counts for the other.
fn exact_2d(ps: &PointSet) -> f64 {
    let n = ps.len();
    if n == 0 {
        return 0.0;
    }
    let uniq = |j: usize| {
        let mut v: Vec<f64> = ps.points.iter().map(|p| p[j]).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v.push(1.0);
        v
    };
    let (ux, uy) = (uniq(0), uniq(1));
    let rank = |u: &[f64], v: f64| u.partition_point(|&a| a < v);
    let (nx, ny) = (ux.len(), uy.len());
    // c[(i+1)*(ny+1) + j+1] = #points with x-rank <= i and y-rank <= j
    let mut c = vec![0u32; (nx + 1) * (ny + 1)];
    for p in &ps.points {
        c[(rank(&ux, p[0]) + 1) * (ny + 1) + rank(&uy, p[1]) + 1] += 1;
    }
    for i in 1..=nx {
        for j in 1..=ny {
            c[i * (ny + 1) + j] += c[(i - 1) * (ny + 1) + j] + c[i * (ny + 1) + j - 1] - c[(i - 1) * (ny + 1) + j - 1];
        }
    }
    let nf = n as f64;
    (0..nx)
        .into_par_iter()
        .map(|i| {
            let mut best: f64 = 0.0;
            for j in 0..ny {
                let vol = ux[i] * uy[j];
                let open = c[i * (ny + 1) + j] as f64 / nf;
                let closed = c[(i + 1) * (ny + 1) + j + 1] as f64 / nf;
                best = best.max(vol - open).max(closed - vol);
            }
            best
        })
        .reduce(|| 0.0, f64::max)
}

/// Bracket `lower <= D* <= upper` from cumulative counts on a grid with
/// `resolution` cells per axis.
pub fn star_discrepancy_bracket(points: &PointSet, resolution: usize) -> Result<Discrepancy> {
    let d = points.dim;
    let k = resolution.max(1);
    let side = k + 1;
    let size = side.checked_pow(d as u32).filter(|&s| s <= 50_000_000).ok_or(Error::Capacity {
        what: "discrepancy grid cells",
        actual: usize::MAX,
        limit: 50_000_000,
    })?;
    // cum[g] = #points with floor(x_j k) < g_j for every j
    let mut cum = vec![0u32; size];
    for p in &points.points {
        let mut idx = 0;
        let mut stride = 1;
        for &x in p {
            let cell = ((x * k as f64).floor() as usize).min(k - 1);
            idx += (cell + 1) * stride;
            stride *= side;
        }
        cum[idx] += 1;
    }
    let mut stride = 1;
    for _ in 0..d {
        for i in 0..size {
            if (i / stride) % side > 0 {
                cum[i] += cum[i - stride];
            }
        }
        stride *= side;
    }
    let n = points.len().max(1) as f64;
    let coords = |mut i: usize| -> Vec<usize> {
        (0..d)
            .map(|_| {
                let c = i % side;
                i /= side;
                c
            })
            .collect()
    };
    let vol = |g: &[usize]| g.iter().map(|&c| c as f64 / k as f64).product::<f64>();
    let strides: Vec<usize> = (0..d).map(|j| side.pow(j as u32)).collect();
    let (lower, upper) = (0..size)
        .into_par_iter()
        .map(|i| {
            let g = coords(i);
            let lo = (cum[i] as f64 / n - vol(&g)).abs();
            let up = if g.iter().all(|&c| c < k) {
                let hi: Vec<usize> = g.iter().map(|c| c + 1).collect();
                let ihi = i + strides.iter().sum::<usize>();
                (vol(&hi) - cum[i] as f64 / n).max(cum[ihi] as f64 / n - vol(&g))
            } else {
                0.0
            };
            (lo, up)
        })
        .reduce(|| (0.0, 0.0), |a, b| (a.0.max(b.0), a.1.max(b.1)));
    Ok(Discrepancy {
        lower,
        upper: upper.max(lower),
    })
}

/// Kolmogorov-Smirnov distance between the empirical CDF of `samples` and
/// the continuous CDF `cdf`.
pub fn ks_distance(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    exact_1d(&samples.iter().map(|&x| cdf(x)).collect::<Vec<_>>())
}

fn mixed_difference(f: &dyn Fn(&[f64]) -> f64, lo: &[f64], hi: &[f64], buf: &mut Vec<f64>) -> f64 {
    let d = lo.len();
    let mut total = 0.0;
    for mask in 0..1usize << d {
        buf.clear();
        let mut sign = 1.0;
        for j in 0..d {
            if mask >> j & 1 == 1 {
                buf.push(hi[j]);
            } else {
                buf.push(lo[j]);
                sign = -sign;
            }
        }
        total += sign * f(buf);
    }
    total
}

/// Recursive Hardy-Krause bound: the sum of absolute mixed differences of
/// `f` over a uniform grid with `resolution` cells per axis, plus the bound
/// of each restriction of `f` to a face `y_i = 1`.
pub fn hk_variation_upper(f: &dyn Fn(&[f64]) -> f64, d: usize, resolution: usize) -> Result<f64> {
    if d > 4 {
        return Err(Error::Capacity {
            what: "variation dimension",
            actual: d,
            limit: 4,
        });
    }
    if d == 0 {
        return Ok(0.0);
    }
    let m = resolution.max(1);
    let cells = m.pow(d as u32);
    let mut buf = Vec::with_capacity(d);
    let mut vitali = 0.0;
    for cell in 0..cells {
        let mut c = cell;
        let mut lo = Vec::with_capacity(d);
        let mut hi = Vec::with_capacity(d);
        for _ in 0..d {
            let k = c % m;
            c /= m;
            lo.push(k as f64 / m as f64);
            hi.push((k + 1) as f64 / m as f64);
        }
        vitali += mixed_difference(f, &lo, &hi, &mut buf).abs();
    }
    if !vitali.is_finite() {
        return Err(Error::domain("non-finite mixed differences"));
    }
    let mut total = vitali;
    for i in 0..d {
        let restricted = |y: &[f64]| {
            let mut full = Vec::with_capacity(d);
            full.extend_from_slice(&y[..i]);
            full.push(1.0);
            full.extend_from_slice(&y[i..]);
            f(&full)
        };
        total += hk_variation_upper(&restricted, d - 1, resolution)?;
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KhReport {
    pub qmc_error: f64,
    pub variation: f64,
    pub discrepancy: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Compares the quadrature error of `points` against `V_HK * D*`, using the
/// upper end of the discrepancy bracket.
pub fn koksma_hlawka_check(
    f: &dyn Fn(&[f64]) -> f64,
    points: &PointSet,
    true_integral: f64,
    hk_resolution: usize,
    disc_resolution: usize,
) -> Result<KhReport> {
    let mean = points.points.iter().map(|p| f(p)).sum::<f64>() / points.len() as f64;
    let qmc_error = (mean - true_integral).abs();
    let variation = hk_variation_upper(f, points.dim, hk_resolution)?;
    let discrepancy = star_discrepancy(points, disc_resolution)?.upper;
    let bound = variation * discrepancy;
    Ok(KhReport {
        qmc_error,
        variation,
        discrepancy,
        bound,
        holds: qmc_error <= bound * (1.0 + 1e-9),
    })
}

/// A density on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Density1D {
    Uniform,
    /// `g(x) = 1 + slope (x - 1/2)`, `|slope| <= 2`.
    Linear {
        slope: f64,
    },
    /// Normal density restricted to `[0, 1]` and renormalized.
    TruncatedGaussian {
        mean: f64,
        sd: f64,
    },
    /// Piecewise-linear density through `values` at equally spaced knots
    /// `0, 1/(k-1), ..., 1`.
    Tabulated {
        values: Vec<f64>,
    },
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + erf(z / std::f64::consts::SQRT_2))
}

impl Density1D {
    pub fn pdf(&self, x: f64) -> f64 {
        match self {
            Density1D::Uniform => 1.0,
            Density1D::Linear { slope } => 1.0 + slope * (x - 0.5),
            Density1D::TruncatedGaussian { mean, sd } => {
                let z = (x - mean) / sd;
                let mass = std_normal_cdf((1.0 - mean) / sd) - std_normal_cdf(-mean / sd);
                (-0.5 * z * z).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt() * mass)
            }
            Density1D::Tabulated { values } => {
                let k = values.len() - 1;
                let t = (x.clamp(0.0, 1.0) * k as f64).min(k as f64 - 1e-300);
                let i = (t.floor() as usize).min(k - 1);
                let f = t - i as f64;
                values[i] * (1.0 - f) + values[i + 1] * f
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        match self {
            Density1D::Uniform => x,
            Density1D::Linear { slope } => x + slope * (x * x - x) / 2.0,
            Density1D::TruncatedGaussian { mean, sd } => {
                let a = std_normal_cdf(-mean / sd);
                let b = std_normal_cdf((1.0 - mean) / sd);
                (std_normal_cdf((x - mean) / sd) - a) / (b - a)
            }
            Density1D::Tabulated { values } => {
                let k = values.len() - 1;
                let h = 1.0 / k as f64;
                let t = x * k as f64;
                let i = (t.floor() as usize).min(k - 1);
                let f = t - i as f64;
                let full: f64 = values.windows(2).take(i).map(|w| 0.5 * h * (w[0] + w[1])).sum();
                let (a, b) = (values[i], values[i + 1]);
                full + h * (a * f + 0.5 * (b - a) * f * f)
            }
        }
    }

    /// Checks normalization, positivity on interior points and a
    /// nondecreasing CDF.
    pub fn validate(&self) -> Result<()> {
        match self {
            Density1D::Uniform => {}
            Density1D::Linear { slope } => {
                if !(slope.abs() <= 2.0) {
                    return Err(Error::Density(format!("linear slope {slope} outside [-2, 2]")));
                }
            }
            Density1D::TruncatedGaussian { mean, sd } => {
                if !(*sd > 0.0) || !mean.is_finite() {
                    return Err(Error::Density(format!("gaussian with mean {mean}, sd {sd}")));
                }
            }
            Density1D::Tabulated { values } => {
                if values.len() < 2 {
                    return Err(Error::Density("tabulated density needs two knots".into()));
                }
                let h = 1.0 / (values.len() - 1) as f64;
                let total: f64 = values.windows(2).map(|w| 0.5 * h * (w[0] + w[1])).sum();
                if (total - 1.0).abs() > 1e-8 {
                    return Err(Error::Density(format!("tabulated density integrates to {total}")));
                }
            }
        }
        let grid = 1000;
        let mut last = 0.0;
        for i in 1..grid {
            let x = i as f64 / grid as f64;
            if !(self.pdf(x) > 0.0) {
                return Err(Error::Density(format!("density not positive at {x}")));
            }
            let c = self.cdf(x);
            if c < last {
                return Err(Error::Density(format!("cdf decreases at {x}")));
            }
            last = c;
        }
        if (self.cdf(1.0) - 1.0).abs() > 1e-8 {
            return Err(Error::Density(format!("cdf(1) = {}", self.cdf(1.0))));
        }
        Ok(())
    }

    /// `F^{-1}(u)` by bisection to `1e-12`.
    pub fn inverse_cdf(&self, u: f64) -> Result<f64> {
        if let Density1D::Uniform = self {
            return Ok(u);
        }
        if u <= 0.0 {
            return Ok(0.0);
        }
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..200 {
            if hi - lo <= 1e-12 {
                break;
            }
            let mid = 0.5 * (lo + hi);
            let c = self.cdf(mid);
            if !c.is_finite() {
                return Err(Error::Density(format!("cdf not finite at {mid}")));
            }
            if c < u {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

/// `g(x) = prod_j g_j(x_j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductDensity {
    pub coords: Vec<Density1D>,
}

impl ProductDensity {
    pub fn uniform(d: usize) -> Self {
        ProductDensity {
            coords: vec![Density1D::Uniform; d],
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.coords.iter().try_for_each(Density1D::validate)
    }
}

/// Coordinate-wise inverse CDF; for product densities this is the full
/// Rosenblatt inverse.
pub fn inverse_transform(points: &PointSet, density: &ProductDensity) -> Result<PointSet> {
    if density.coords.len() != points.dim {
        return Err(Error::Dimension {
            expected: points.dim,
            actual: density.coords.len(),
        });
    }
    density.validate()?;
    let out = points
        .points
        .iter()
        .map(|p| p.iter().zip(&density.coords).map(|(&u, g)| g.inverse_cdf(u)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    Ok(PointSet {
        dim: points.dim,
        points: out,
        provenance: Provenance::Transformed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(points: Vec<Vec<f64>>) -> PointSet {
        PointSet {
            dim: points[0].len(),
            points,
            provenance: Provenance::Imported,
        }
    }

    #[test]
    fn sobol_reference_points() {
        let p = sobol_points(8, 5).unwrap();
        let expect = [
            [0.5, 0.5, 0.5, 0.5, 0.5],
            [0.75, 0.25, 0.25, 0.25, 0.75],
            [0.25, 0.75, 0.75, 0.75, 0.25],
            [0.375, 0.375, 0.625, 0.875, 0.375],
            [0.875, 0.875, 0.125, 0.375, 0.875],
            [0.625, 0.125, 0.875, 0.625, 0.625],
            [0.125, 0.625, 0.375, 0.125, 0.125],
            [0.1875, 0.3125, 0.9375, 0.4375, 0.5625],
        ];
        for (a, b) in p.points.iter().zip(expect) {
            assert_eq!(a.as_slice(), b.as_slice());
        }
        let with_zero = sobol_points_with(2, 3, false).unwrap();
        assert_eq!(with_zero.points[0], vec![0.0; 3]);
        assert_eq!(with_zero.points[1], vec![0.5; 3]);
    }

    #[test]
    fn sobol_stratifies_dyadic_intervals() {
        for k in 1..=10 {
            // with the zero point the first 2^k points are a (0,k,1)-net
            let p = sobol_points_with(1 << k, 1, false).unwrap();
            let mut seen = vec![false; 1 << k];
            for x in &p.points {
                let c = (x[0] * (1 << k) as f64) as usize;
                assert!(!seen[c]);
                seen[c] = true;
            }
        }
    }

    #[test]
    fn sobol_limits() {
        assert!(sobol_points(4, 64).is_ok());
        assert!(matches!(sobol_points(4, 65), Err(Error::Capacity { .. })));
        let p = sobol_points(1000, 64).unwrap();
        assert!(p.points.iter().flatten().all(|v| (0.0..1.0).contains(v)));
    }

    #[test]
    fn one_dimensional_discrepancy() {
        assert_eq!(star_discrepancy(&set(vec![vec![0.5]]), 0).unwrap().upper, 0.5);
        assert_eq!(star_discrepancy(&set(vec![vec![0.25], vec![0.75]]), 0).unwrap().upper, 0.25);
        let n = 10;
        let mid: Vec<Vec<f64>> = (1..=n).map(|i| vec![(2 * i - 1) as f64 / (2 * n) as f64]).collect();
        assert!((star_discrepancy(&set(mid), 0).unwrap().upper - 0.05).abs() < 1e-15);
    }

    fn brute_force_2d(ps: &PointSet) -> f64 {
        // every box corner from point coordinates and 1, both count rules
        let mut xs: Vec<f64> = ps.points.iter().map(|p| p[0]).chain([1.0]).collect();
        let mut ys: Vec<f64> = ps.points.iter().map(|p| p[1]).chain([1.0]).collect();
        xs.sort_by(f64::total_cmp);
        ys.sort_by(f64::total_cmp);
        let n = ps.len() as f64;
        let mut best: f64 = 0.0;
        for &a in &xs {
            for &b in &ys {
                let open = ps.points.iter().filter(|p| p[0] < a && p[1] < b).count() as f64;
                let closed = ps.points.iter().filter(|p| p[0] <= a && p[1] <= b).count() as f64;
                best = best.max(a * b - open / n).max(closed / n - a * b);
            }
        }
        best
    }

    #[test]
    fn two_dimensional_exact_matches_brute_force() {
        for seed in 0..5 {
            let ps = uniform_points(40, 2, seed);
            let d = star_discrepancy(&ps, 0).unwrap();
            assert!(d.is_exact());
            assert!((d.upper - brute_force_2d(&ps)).abs() < 1e-15);
            let br = star_discrepancy_bracket(&ps, 64).unwrap();
            assert!(br.lower <= d.upper + 1e-15 && d.upper <= br.upper + 1e-15);
        }
        let s = sobol_points(64, 2).unwrap();
        assert!((star_discrepancy(&s, 0).unwrap().upper - brute_force_2d(&s)).abs() < 1e-15);
    }

    #[test]
    fn bracket_in_three_dimensions() {
        let ps = sobol_points(200, 3).unwrap();
        let coarse = star_discrepancy_bracket(&ps, 8).unwrap();
        let fine = star_discrepancy_bracket(&ps, 32).unwrap();
        assert!(coarse.lower <= coarse.upper && fine.lower <= fine.upper);
        assert!(fine.upper <= coarse.upper + 1e-12 || fine.lower >= coarse.lower - 1e-12);
        assert!(fine.lower <= coarse.upper && coarse.lower <= fine.upper);
    }

    #[test]
    fn variation_of_simple_functions() {
        let x = |p: &[f64]| p[0];
        assert!((hk_variation_upper(&x, 1, 64).unwrap() - 1.0).abs() < 1e-6);
        let xy = |p: &[f64]| p[0] * p[1];
        assert!((hk_variation_upper(&xy, 2, 64).unwrap() - 3.0).abs() < 1e-4);
        let c = |_: &[f64]| 2.5;
        assert_eq!(hk_variation_upper(&c, 3, 8).unwrap(), 0.0);
    }

    #[test]
    fn variation_converges_with_refinement() {
        // int |d/dx sin(3x)| over [0,1] = 1 + (1 - sin 3) with a turn at pi/6
        let f = |p: &[f64]| (3.0 * p[0]).sin();
        let exact = 1.0 + (1.0 - 3f64.sin());
        let mut last = f64::INFINITY;
        for m in [3, 6, 12, 24, 48] {
            let err = (hk_variation_upper(&f, 1, m).unwrap() - exact).abs();
            assert!(err <= last + 1e-12);
            last = err;
        }
        assert!(last < 1e-3);
    }

    #[test]
    fn koksma_hlawka_examples() {
        let c = |_: &[f64]| 1.0;
        let r = koksma_hlawka_check(&c, &sobol_points(64, 1).unwrap(), 1.0, 16, 0).unwrap();
        assert_eq!((r.qmc_error, r.bound), (0.0, 0.0));
        assert!(r.holds);
        let x = |p: &[f64]| p[0];
        assert!(koksma_hlawka_check(&x, &sobol_points(64, 1).unwrap(), 0.5, 64, 0).unwrap().holds);
        let xy = |p: &[f64]| p[0] * p[1];
        assert!(koksma_hlawka_check(&xy, &sobol_points(256, 2).unwrap(), 0.25, 64, 0).unwrap().holds);
    }

    #[test]
    fn inverse_transform_examples() {
        let lin = Density1D::Linear { slope: 2.0 };
        assert!((lin.inverse_cdf(0.25).unwrap() - 0.5).abs() < 1e-10);
        assert_eq!(lin.inverse_cdf(0.0).unwrap(), 0.0);
        assert!(lin.inverse_cdf(1.0 - 1e-12).unwrap() > 0.999_999);
        let ps = sobol_points(100, 2).unwrap();
        let same = inverse_transform(&ps, &ProductDensity::uniform(2)).unwrap();
        assert_eq!(same.points, ps.points);
        let bad = ProductDensity {
            coords: vec![
                Density1D::Tabulated {
                    values: vec![1.5, -0.5, 1.5],
                },
                Density1D::Uniform,
            ],
        };
        assert!(matches!(inverse_transform(&ps, &bad), Err(Error::Density(_))));
    }

    #[test]
    fn densities_are_normalized() {
        let ds = [
            Density1D::Uniform,
            Density1D::Linear { slope: -1.0 },
            Density1D::TruncatedGaussian { mean: 0.3, sd: 0.2 },
            Density1D::Tabulated { values: vec![0.5, 1.5, 0.5] },
        ];
        for d in &ds {
            d.validate().unwrap();
            // midpoint rule on the pdf agrees with the closed-form cdf
            let m = 20_000;
            let integral: f64 = (0..m).map(|i| d.pdf((i as f64 + 0.5) / m as f64)).sum::<f64>() / m as f64;
            assert!((integral - 1.0).abs() < 1e-6, "{d:?}");
            assert!((d.cdf(1.0) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn csv_round_trip() {
        let ps = sobol_points(10, 3).unwrap();
        let mut buf = Vec::new();
        ps.write_csv(&mut buf).unwrap();
        let back = PointSet::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.points, ps.points);
    }

    #[test]
    fn random_bound_constant() {
        let b = random_discrepancy_bound(10_000, 1, 0.01);
        let expect = 5.7 * (4.9 + 100f64.ln()).sqrt() * 0.01;
        assert!((b - expect).abs() < 1e-15);
        assert!((sobol_bound_constant(2) - 1.0 / 4f64.ln()).abs() < 1e-15);
    }
}
