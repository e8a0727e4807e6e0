//! Histogram distributions on the unit cube and the densities they approximate.
//!
//! Weights of a [`HistogramD`] are density values per tile, so a resolution
//! `n` histogram in dimension `d` has weights summing to `n^d`. Multi-indices
//! are flattened row-major with the first coordinate most significant: in two
//! dimensions `weights[i * n + j]` is the tile `[i/n, (i+1)/n] x [j/n, (j+1)/n]`
//! with `i` the x-cell and `j` the y-cell.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::numeric::{compensated_sum, prefix_sums, CompensatedSum};

/// Quadrature resolution per axis used for closed-form densities.
const QUADRATURE_BASE_1D: usize = 2048;
const QUADRATURE_BASE_2D: usize = 512;

/// Closed-form density families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Builtin {
    /// `p = 1` on `[0,1]^dim`.
    Uniform { dim: usize },
    /// `p(x) = x_1 + 1/2`, Lipschitz constant 1.
    Ramp { dim: usize },
    /// `p(x, y) = 1 + alpha cos(pi x) cos(pi y)` with `0 < alpha < 1`.
    CosineBump { alpha: f64 },
}

impl Builtin {
    pub fn from_name(name: &str, params: &Map<String, Value>) -> Result<Self> {
        let dim = |default: usize| -> Result<usize> {
            match params.get("dim") {
                None => Ok(default),
                Some(v) => v
                    .as_u64()
                    .filter(|&d| d == 1 || d == 2)
                    .map(|d| d as usize)
                    .ok_or_else(|| Error::InvalidDensity(format!("dim must be 1 or 2, got {v}"))),
            }
        };
        match name {
            "uniform" => Ok(Builtin::Uniform { dim: dim(2)? }),
            "ramp" => Ok(Builtin::Ramp { dim: dim(1)? }),
            "cosine_bump" => {
                let alpha = match params.get("alpha") {
                    None => 0.5,
                    Some(v) => v
                        .as_f64()
                        .ok_or_else(|| Error::InvalidDensity(format!("alpha must be a number, got {v}")))?,
                };
                if !(alpha > 0.0 && alpha < 1.0) {
                    return Err(Error::InvalidDensity(format!("alpha must lie in (0, 1), got {alpha}")));
                }
                Ok(Builtin::CosineBump { alpha })
            }
            other => Err(Error::InvalidDensity(format!("unknown builtin density {other:?}"))),
        }
    }

    pub fn dim(&self) -> usize {
        match *self {
            Builtin::Uniform { dim } | Builtin::Ramp { dim } => dim,
            Builtin::CosineBump { .. } => 2,
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match *self {
            Builtin::Uniform { .. } => 0.0,
            Builtin::Ramp { .. } => 1.0,
            // |grad p| = alpha pi sqrt(sin^2(pi x) cos^2(pi y) + cos^2(pi x) sin^2(pi y)) <= alpha pi
            Builtin::CosineBump { alpha } => alpha * PI,
        }
    }

    fn eval(&self, x: &[f64]) -> f64 {
        match *self {
            Builtin::Uniform { .. } => 1.0,
            Builtin::Ramp { .. } => x[0] + 0.5,
            Builtin::CosineBump { alpha } => 1.0 + alpha * (PI * x[0]).cos() * (PI * x[1]).cos(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum DensitySource {
    Grid { m: usize, values: Vec<f64> },
    Builtin(Builtin),
}

/// A strictly positive Lipschitz density on `[0,1]^d`, either sampled at the
/// cell centers of a resolution-`m` grid or given in closed form.
#[derive(Debug, Clone, PartialEq)]
pub struct DensitySpec {
    dim: usize,
    lipschitz: f64,
    source: DensitySource,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum DensityFile {
    Builtin {
        builtin: String,
        #[serde(default)]
        params: Map<String, Value>,
    },
    Grid {
        m: usize,
        values: Value,
        lipschitz: f64,
        #[serde(default)]
        dim: Option<usize>,
    },
}

impl DensitySpec {
    /// Grid-sampled density. Values are flattened row-major (x index first).
    pub fn from_grid(dim: usize, m: usize, values: Vec<f64>, lipschitz: f64) -> Result<Self> {
        if dim == 0 || dim > 3 {
            return Err(Error::InvalidDensity(format!("unsupported dimension {dim}")));
        }
        if m == 0 {
            return Err(Error::InvalidDensity("grid resolution must be positive".into()));
        }
        let cells = m.pow(dim as u32);
        if values.len() != cells {
            return Err(Error::InvalidDensity(format!(
                "expected {cells} grid values for m={m}, d={dim}, got {}",
                values.len()
            )));
        }
        if !(lipschitz.is_finite() && lipschitz >= 0.0) {
            return Err(Error::InvalidDensity(format!("invalid Lipschitz constant {lipschitz}")));
        }
        if let Some((k, v)) = values.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::InvalidDensity(format!("value {v} at flat index {k} is not strictly positive")));
        }
        let integral = compensated_sum(values.iter().copied()) / cells as f64;
        if (integral - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidDensity(format!("midpoint integral is {integral}, expected 1")));
        }
        Ok(Self { dim, lipschitz, source: DensitySource::Grid { m, values } })
    }

    pub fn from_builtin(builtin: Builtin) -> Self {
        Self { dim: builtin.dim(), lipschitz: builtin.lipschitz(), source: DensitySource::Builtin(builtin) }
    }

    pub fn builtin(name: &str, params: &Map<String, Value>) -> Result<Self> {
        Ok(Self::from_builtin(Builtin::from_name(name, params)?))
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        match serde_json::from_str::<DensityFile>(text)? {
            DensityFile::Builtin { builtin, params } => Self::builtin(&builtin, &params),
            DensityFile::Grid { m, values, lipschitz, dim } => {
                let (flat, inferred) = flatten_values(&values, m)?;
                let dim = dim.unwrap_or(inferred);
                Self::from_grid(dim, m, flat, lipschitz)
            }
        }
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn as_builtin(&self) -> Option<Builtin> {
        match self.source {
            DensitySource::Builtin(b) => Some(b),
            DensitySource::Grid { .. } => None,
        }
    }

    /// Pointwise value. Grid densities are read from the containing cell,
    /// with boundary points assigned to the left cell.
    pub fn eval(&self, x: &[f64]) -> f64 {
        match &self.source {
            DensitySource::Builtin(b) => b.eval(x),
            DensitySource::Grid { m, values } => {
                let mut flat = 0;
                for &xi in x.iter().take(self.dim) {
                    flat = flat * m + left_cell(xi, *m);
                }
                values[flat]
            }
        }
    }

    /// Per-axis quadrature resolution aligned with a histogram of resolution `n`.
    fn quadrature_resolution(&self, align: Option<usize>) -> usize {
        match &self.source {
            DensitySource::Grid { m, .. } => *m,
            DensitySource::Builtin(_) => {
                let base = if self.dim == 1 { QUADRATURE_BASE_1D } else { QUADRATURE_BASE_2D };
                match align {
                    Some(n) => n * base.div_ceil(n),
                    None => base,
                }
            }
        }
    }

    /// Midpoint quadrature nodes: calls `f(center, value)` for every node of
    /// a resolution-`q` grid.
    fn for_each_node(&self, q: usize, mut f: impl FnMut(&[f64], f64)) {
        let total = q.pow(self.dim as u32);
        let mut point = vec![0.0; self.dim];
        for flat in 0..total {
            let mut rest = flat;
            for axis in (0..self.dim).rev() {
                point[axis] = ((rest % q) as f64 + 0.5) / q as f64;
                rest /= q;
            }
            let value = match &self.source {
                DensitySource::Grid { values, .. } => values[flat],
                DensitySource::Builtin(b) => b.eval(&point),
            };
            f(&point, value);
        }
    }
}

fn flatten_values(values: &Value, m: usize) -> Result<(Vec<f64>, usize)> {
    let rows = values
        .as_array()
        .ok_or_else(|| Error::InvalidDensity("values must be an array".into()))?;
    let number = |v: &Value| v.as_f64().ok_or_else(|| Error::InvalidDensity(format!("non-numeric value {v}")));
    if rows.iter().all(Value::is_number) {
        let flat = rows.iter().map(number).collect::<Result<Vec<_>>>()?;
        let dim = if flat.len() == m { 1 } else { 2 };
        return Ok((flat, dim));
    }
    let mut flat = Vec::with_capacity(m * m);
    for row in rows {
        let row = row
            .as_array()
            .ok_or_else(|| Error::InvalidDensity("values must be an array of rows".into()))?;
        if row.len() != m {
            return Err(Error::InvalidDensity(format!("row of length {} in an m={m} grid", row.len())));
        }
        for v in row {
            flat.push(number(v)?);
        }
    }
    Ok((flat, 2))
}

/// Index of the cell of a resolution-`n` grid containing `x`, boundary points
/// going to the left cell.
fn left_cell(x: f64, n: usize) -> usize {
    if x <= 0.0 {
        return 0;
    }
    let k = (x * n as f64).ceil() as usize;
    k.saturating_sub(1).min(n - 1)
}

/// Histogram distribution with uniform tiles of side `1/n` on `[0,1]^dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramD {
    dim: usize,
    n: usize,
    weights: Vec<f64>,
}

impl HistogramD {
    pub fn new(dim: usize, n: usize, weights: Vec<f64>) -> Result<Self> {
        if dim == 0 || n == 0 {
            return Err(Error::InvalidHistogram(format!("dimension {dim} and resolution {n} must be positive")));
        }
        let tiles = n.pow(dim as u32);
        if weights.len() != tiles {
            return Err(Error::InvalidHistogram(format!("expected {tiles} weights, got {}", weights.len())));
        }
        if let Some((k, w)) = weights.iter().enumerate().find(|(_, w)| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::InvalidHistogram(format!("weight {w} at flat index {k} is not strictly positive")));
        }
        let total = compensated_sum(weights.iter().copied());
        if (total - tiles as f64).abs() > 1e-9 * (tiles as f64).max(1.0) {
            return Err(Error::InvalidHistogram(format!("weights sum to {total}, expected {tiles}")));
        }
        Ok(Self { dim, n, weights })
    }

    /// Rescales positive raw weights so that they sum to `n^dim`.
    pub fn from_unnormalized(dim: usize, n: usize, raw: Vec<f64>) -> Result<Self> {
        let total = compensated_sum(raw.iter().copied());
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::InvalidHistogram(format!("raw weights sum to {total}")));
        }
        let tiles = n.pow(dim as u32) as f64;
        Self::new(dim, n, raw.iter().map(|w| w * tiles / total).collect())
    }

    pub fn uniform(dim: usize, n: usize) -> Self {
        Self { dim, n, weights: vec![1.0; n.pow(dim as u32)] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn flat_index(&self, index: &[usize]) -> Result<usize> {
        if index.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: index.len() });
        }
        let mut flat = 0;
        for &i in index {
            if i >= self.n {
                return Err(Error::OutOfRange { index: index.to_vec(), n: self.n });
            }
            flat = flat * self.n + i;
        }
        Ok(flat)
    }

    pub fn weight(&self, index: &[usize]) -> Result<f64> {
        Ok(self.weights[self.flat_index(index)?])
    }

    /// Two-dimensional weight `w_{i,j}` (x-cell `i`, y-cell `j`).
    pub fn w2(&self, i: usize, j: usize) -> f64 {
        debug_assert_eq!(self.dim, 2);
        self.weights[i * self.n + j]
    }

    /// Density value at `x`; boundary points are assigned to the left tile.
    pub fn density(&self, x: &[f64]) -> f64 {
        if x.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return 0.0;
        }
        let mut flat = 0;
        for &xi in x.iter().take(self.dim) {
            flat = flat * self.n + left_cell(xi, self.n);
        }
        self.weights[flat]
    }

    /// Marginal along the first coordinate, `w_i = (1/n) sum_j w_{i,j}`.
    pub fn marginal_x(&self) -> Result<HistogramD> {
        self.require_dim(2)?;
        let n = self.n;
        let weights = (0..n)
            .map(|i| compensated_sum(self.weights[i * n..(i + 1) * n].iter().copied()) / n as f64)
            .collect();
        HistogramD::new(1, n, weights)
    }

    /// Marginal along the second coordinate, `v_j = (1/n) sum_i w_{i,j}`.
    pub fn marginal_y(&self) -> Result<HistogramD> {
        self.require_dim(2)?;
        let n = self.n;
        let weights = (0..n)
            .map(|j| compensated_sum((0..n).map(|i| self.weights[i * n + j])) / n as f64)
            .collect();
        HistogramD::new(1, n, weights)
    }

    /// Conditional law of the second coordinate given the x-cell `i`:
    /// `w^i_k = n w_{i,k} / sum_k' w_{i,k'}`.
    pub fn conditional_y(&self, i: usize) -> Result<HistogramD> {
        self.require_dim(2)?;
        let n = self.n;
        if i >= n {
            return Err(Error::OutOfRange { index: vec![i], n });
        }
        let row = &self.weights[i * n..(i + 1) * n];
        let total = compensated_sum(row.iter().copied());
        HistogramD::new(1, n, row.iter().map(|w| n as f64 * w / total).collect())
    }

    /// Exact probability of an axis-aligned box.
    pub fn cell_mass(&self, cell: &Cell) -> Result<f64> {
        if cell.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: cell.dim() });
        }
        let n = self.n as f64;
        // Per axis: (tile index, overlap length) for every intersected tile.
        let overlaps: Vec<Vec<(usize, f64)>> = (0..self.dim)
            .map(|axis| {
                let (lo, hi) = (cell.lo[axis], cell.hi[axis]);
                let first = ((lo * n).floor() as usize).min(self.n - 1);
                let last = ((hi * n).ceil() as usize).clamp(first + 1, self.n);
                (first..last)
                    .filter_map(|k| {
                        let a = lo.max(k as f64 / n);
                        let b = hi.min((k + 1) as f64 / n);
                        (b > a).then_some((k, b - a))
                    })
                    .collect()
            })
            .collect();
        let mut acc = CompensatedSum::default();
        let mut cursor = vec![0usize; self.dim];
        if overlaps.iter().any(Vec::is_empty) {
            return Ok(0.0);
        }
        loop {
            let mut flat = 0;
            let mut volume = 1.0;
            for axis in 0..self.dim {
                let (k, len) = overlaps[axis][cursor[axis]];
                flat = flat * self.n + k;
                volume *= len;
            }
            acc.add(self.weights[flat] * volume);
            // odometer increment
            let mut axis = self.dim;
            loop {
                if axis == 0 {
                    return Ok(acc.value());
                }
                axis -= 1;
                cursor[axis] += 1;
                if cursor[axis] < overlaps[axis].len() {
                    break;
                }
                cursor[axis] = 0;
            }
        }
    }

    /// The one-dimensional histogram viewed as a general histogram with
    /// breakpoints `k/n`.
    pub fn to_general(&self) -> Result<GeneralHistogram1D> {
        self.require_dim(1)?;
        let breakpoints = (0..=self.n).map(|k| k as f64 / self.n as f64).collect();
        GeneralHistogram1D::new(breakpoints, self.weights.clone())
    }

    fn require_dim(&self, dim: usize) -> Result<()> {
        if self.dim != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: self.dim });
        }
        Ok(())
    }
}

/// Histogram on `[0,1]` with arbitrary breakpoints `0 = t_0 < ... < t_n = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralHistogram1D {
    breakpoints: Vec<f64>,
    weights: Vec<f64>,
}

impl GeneralHistogram1D {
    pub fn new(breakpoints: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || breakpoints.len() != weights.len() + 1 {
            return Err(Error::InvalidHistogram(format!(
                "{} breakpoints for {} weights",
                breakpoints.len(),
                weights.len()
            )));
        }
        if breakpoints[0] != 0.0 || *breakpoints.last().unwrap() != 1.0 {
            return Err(Error::InvalidHistogram("breakpoints must start at 0 and end at 1".into()));
        }
        if breakpoints.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidHistogram("breakpoints must be strictly increasing".into()));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::InvalidHistogram(format!("weight {w} is not strictly positive")));
        }
        let total = compensated_sum(breakpoints.windows(2).zip(&weights).map(|(t, w)| (t[1] - t[0]) * w));
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidHistogram(format!("total mass is {total}, expected 1")));
        }
        Ok(Self { breakpoints, weights })
    }

    pub fn uniform_breakpoints(weights: Vec<f64>) -> Result<Self> {
        let n = weights.len();
        Self::new((0..=n).map(|k| k as f64 / n as f64).collect(), weights)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn density(&self, x: f64) -> f64 {
        if !(0.0..=1.0).contains(&x) {
            return 0.0;
        }
        let k = self.breakpoints.partition_point(|&t| t < x).saturating_sub(1);
        self.weights[k.min(self.weights.len() - 1)]
    }

    /// Cumulative masses at the breakpoints.
    pub fn cumulative(&self) -> Vec<f64> {
        let masses: Vec<f64> = self.breakpoints.windows(2).zip(&self.weights).map(|(t, w)| (t[1] - t[0]) * w).collect();
        prefix_sums(&masses)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return 1.0;
        }
        let cum = self.cumulative();
        let k = self.breakpoints.partition_point(|&t| t <= x) - 1;
        cum[k] + (x - self.breakpoints[k]) * self.weights[k]
    }
}

/// Axis-aligned closed box inside the unit cube.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Cell {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::InvalidCell(format!("{} lower and {} upper bounds", lo.len(), hi.len())));
        }
        for (axis, (&a, &b)) in lo.iter().zip(&hi).enumerate() {
            if !(a < b) {
                return Err(Error::InvalidCell(format!("axis {axis}: lower {a} is not below upper {b}")));
            }
            if a < 0.0 || b > 1.0 {
                return Err(Error::InvalidCell(format!("axis {axis}: [{a}, {b}] leaves the unit interval")));
            }
        }
        Ok(Self { lo, hi })
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo], vec![hi])
    }

    pub fn rect(x0: f64, x1: f64, y0: f64, y1: f64) -> Result<Self> {
        Self::new(vec![x0, y0], vec![x1, y1])
    }

    pub fn unit(dim: usize) -> Self {
        Self { lo: vec![0.0; dim], hi: vec![1.0; dim] }
    }

    /// The tile `c_k` of a resolution-`n` grid.
    pub fn tile(n: usize, index: &[usize]) -> Result<Self> {
        if index.iter().any(|&i| i >= n) {
            return Err(Error::OutOfRange { index: index.to_vec(), n });
        }
        let n = n as f64;
        Self::new(index.iter().map(|&i| i as f64 / n).collect(), index.iter().map(|&i| (i + 1) as f64 / n).collect())
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }
}

/// A probability law on the unit cube that TV distances can be taken between.
#[derive(Debug, Clone, Copy)]
pub enum Law<'a> {
    Density(&'a DensitySpec),
    Histogram(&'a HistogramD),
    General(&'a GeneralHistogram1D),
}

impl Law<'_> {
    pub fn dim(&self) -> usize {
        match self {
            Law::Density(d) => d.dim(),
            Law::Histogram(h) => h.dim(),
            Law::General(_) => 1,
        }
    }

    pub fn density(&self, x: &[f64]) -> f64 {
        match self {
            Law::Density(d) => d.eval(x),
            Law::Histogram(h) => h.density(x),
            Law::General(g) => g.density(x[0]),
        }
    }

    /// Breakpoints of the piecewise-constant law along `axis`, if it is one.
    fn axis_breaks(&self, _axis: usize) -> Option<Vec<f64>> {
        match self {
            Law::Density(_) => None,
            Law::Histogram(h) => Some((0..=h.n()).map(|k| k as f64 / h.n() as f64).collect()),
            Law::General(g) => Some(g.breakpoints().to_vec()),
        }
    }

    fn resolution(&self) -> Option<usize> {
        match self {
            Law::Histogram(h) => Some(h.n()),
            _ => None,
        }
    }
}

/// `w_k = n^d * integral of p over c_k` by composite midpoint quadrature,
/// renormalized so the weights sum to exactly `n^d`.
pub fn quantize_density(spec: &DensitySpec, n: usize) -> Result<HistogramD> {
    if n == 0 {
        return Err(Error::Precondition("histogram resolution must be at least 1".into()));
    }
    let dim = spec.dim();
    let q = match &spec.source {
        DensitySource::Grid { m, .. } => {
            if n > *m || m % n != 0 {
                return Err(Error::Precondition(format!(
                    "histogram resolution {n} must divide the density grid resolution {m}"
                )));
            }
            *m
        }
        DensitySource::Builtin(_) => spec.quadrature_resolution(Some(n)),
    };
    let ratio = q / n;
    let tiles = n.pow(dim as u32);
    let mut sums = vec![CompensatedSum::default(); tiles];
    spec.for_each_node(q, |point, value| {
        let mut flat = 0;
        for &x in point {
            flat = flat * n + ((x * q as f64) as usize / ratio);
        }
        sums[flat].add(value);
    });
    let per_tile = ratio.pow(dim as u32) as f64;
    let raw: Vec<f64> = sums.iter().map(|s| s.value() / per_tile).collect();
    if let Some((k, w)) = raw.iter().enumerate().find(|(_, w)| !(**w > 0.0)) {
        return Err(Error::InvalidDensity(format!("tile {k} has non-positive mass {w}")));
    }
    HistogramD::from_unnormalized(dim, n, raw)
}

/// Total variation distance `1/2 ||p_a - p_b||_1`.
///
/// Exact for pairs of piecewise-constant laws (common refinement of the
/// breakpoints); midpoint quadrature when a density is involved.
pub fn tv_distance(a: Law<'_>, b: Law<'_>) -> Result<f64> {
    let dim = a.dim();
    if b.dim() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: b.dim() });
    }
    let l1 = match (a, b) {
        (Law::Density(d), other) | (other, Law::Density(d)) => {
            let q = d.quadrature_resolution(other.resolution());
            let volume = (q as f64).powi(-(dim as i32));
            let mut acc = CompensatedSum::default();
            d.for_each_node(q, |point, value| acc.add((value - other.density(point)).abs() * volume));
            acc.value()
        }
        _ => {
            let axes: Vec<Vec<f64>> = (0..dim)
                .map(|axis| merge_breaks(&a.axis_breaks(axis).unwrap(), &b.axis_breaks(axis).unwrap()))
                .collect();
            l1_on_product_grid(&axes, |mid| (a.density(mid) - b.density(mid)).abs())
        }
    };
    Ok(0.5 * l1)
}

fn merge_breaks(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut all: Vec<f64> = a.iter().chain(b).copied().collect();
    all.sort_by(f64::total_cmp);
    all.dedup_by(|x, y| (*x - *y).abs() <= 1e-15);
    all
}

fn l1_on_product_grid(axes: &[Vec<f64>], integrand: impl Fn(&[f64]) -> f64) -> f64 {
    let dim = axes.len();
    let mut cursor = vec![0usize; dim];
    let mut mid = vec![0.0; dim];
    let mut acc = CompensatedSum::default();
    loop {
        let mut volume = 1.0;
        for axis in 0..dim {
            let (lo, hi) = (axes[axis][cursor[axis]], axes[axis][cursor[axis] + 1]);
            mid[axis] = 0.5 * (lo + hi);
            volume *= hi - lo;
        }
        acc.add(integrand(&mid) * volume);
        let mut axis = dim;
        loop {
            if axis == 0 {
                return acc.value();
            }
            axis -= 1;
            cursor[axis] += 1;
            if cursor[axis] + 1 < axes[axis].len() {
                break;
            }
            cursor[axis] = 0;
        }
    }
}

/// Exact probability of `cell` under `h`.
pub fn cell_mass_histogram(h: &HistogramD, cell: &Cell) -> Result<f64> {
    h.cell_mass(cell)
}
