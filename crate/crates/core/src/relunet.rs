//! Feed-forward ReLU networks `W_L o rho o W_{L-1} o ... o rho o W_1` with
//! dense affine layers, nonzero counting, and the composition calculus used to
//! assemble the generators.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pwl::PwlFunction;
use crate::transport::Method;

/// Affine map `x -> A x + b` with `A` stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LayerRepr", into = "LayerRepr")]
pub struct AffineLayer {
    rows: usize,
    cols: usize,
    matrix: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct LayerRepr {
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
}

impl TryFrom<LayerRepr> for AffineLayer {
    type Error = Error;

    fn try_from(r: LayerRepr) -> Result<Self> {
        AffineLayer::from_rows(r.a, r.b)
    }
}

impl From<AffineLayer> for LayerRepr {
    fn from(l: AffineLayer) -> Self {
        let a = (0..l.rows).map(|r| l.row(r).to_vec()).collect();
        LayerRepr { a, b: l.bias }
    }
}

impl AffineLayer {
    pub fn new(rows: usize, cols: usize, matrix: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidNetwork("layers need at least one row and one column".into()));
        }
        if matrix.len() != rows * cols || bias.len() != rows {
            return Err(Error::InvalidNetwork(format!(
                "{rows}x{cols} layer with {} matrix entries and {} offsets",
                matrix.len(),
                bias.len()
            )));
        }
        if matrix.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::InvalidNetwork("non-finite layer parameter".into()));
        }
        Ok(Self { rows, cols, matrix, bias })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>, bias: Vec<f64>) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidNetwork("ragged layer matrix".into()));
        }
        let n = rows.len();
        Self::new(n, cols, rows.into_iter().flatten().collect(), bias)
    }

    fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, matrix: vec![0.0; rows * cols], bias: vec![0.0; rows] }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.matrix[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.matrix[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.matrix[r * self.cols + c] = v;
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    pub fn nonzeros(&self) -> usize {
        self.matrix.iter().chain(&self.bias).filter(|v| **v != 0.0).count()
    }

    fn apply(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.bias.iter().enumerate().map(|(r, &b)| {
            self.row(r).iter().zip(x).fold(b, |acc, (&w, &xi)| if w == 0.0 { acc } else { acc + w * xi })
        }));
    }

    /// `[A; -A]`, `[b; -b]`.
    fn doubled_rows(&self) -> Self {
        let mut matrix = self.matrix.clone();
        matrix.extend(self.matrix.iter().map(|v| -v));
        let mut bias = self.bias.clone();
        bias.extend(self.bias.iter().map(|v| -v));
        Self { rows: 2 * self.rows, cols: self.cols, matrix, bias }
    }

    /// `[A, -A]`, `b`.
    fn doubled_cols(&self) -> Self {
        let mut out = Self::zeros(self.rows, 2 * self.cols);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.set(r, c, self.get(r, c));
                out.set(r, c + self.cols, -self.get(r, c));
            }
        }
        out.bias = self.bias.clone();
        out
    }

    /// `self o inner` as a single affine map.
    fn after(&self, inner: &AffineLayer) -> Self {
        let mut out = Self::zeros(self.rows, inner.cols);
        for r in 0..self.rows {
            let mut b = self.bias[r];
            for k in 0..self.cols {
                let w = self.get(r, k);
                if w == 0.0 {
                    continue;
                }
                b += w * inner.bias[k];
                for c in 0..inner.cols {
                    let v = out.get(r, c) + w * inner.get(k, c);
                    out.set(r, c, v);
                }
            }
            out.bias[r] = b;
        }
        out
    }
}

fn block_diagonal(blocks: &[&AffineLayer]) -> AffineLayer {
    let rows = blocks.iter().map(|l| l.rows).sum();
    let cols = blocks.iter().map(|l| l.cols).sum();
    let mut out = AffineLayer::zeros(rows, cols);
    let (mut r0, mut c0) = (0, 0);
    for l in blocks {
        for r in 0..l.rows {
            for c in 0..l.cols {
                out.set(r0 + r, c0 + c, l.get(r, c));
            }
            out.bias[r0 + r] = l.bias[r];
        }
        r0 += l.rows;
        c0 += l.cols;
    }
    out
}

/// Vertical stacking of layers sharing one input.
fn stacked(blocks: &[&AffineLayer]) -> AffineLayer {
    let cols = blocks[0].cols;
    let mut matrix = Vec::new();
    let mut bias = Vec::new();
    for l in blocks {
        matrix.extend_from_slice(&l.matrix);
        bias.extend_from_slice(&l.bias);
    }
    AffineLayer { rows: bias.len(), cols, matrix, bias }
}

/// Horizontal concatenation with summed offsets.
fn side_by_side(blocks: &[&AffineLayer]) -> AffineLayer {
    let rows = blocks[0].rows;
    let cols = blocks.iter().map(|l| l.cols).sum();
    let mut out = AffineLayer::zeros(rows, cols);
    let mut c0 = 0;
    for l in blocks {
        for r in 0..rows {
            for c in 0..l.cols {
                out.set(r, c0 + c, l.get(r, c));
            }
            out.bias[r] += l.bias[r];
        }
        c0 += l.cols;
    }
    out
}

fn diagonal(values: &[f64]) -> AffineLayer {
    let n = values.len();
    let mut out = AffineLayer::zeros(n, n);
    for (k, &v) in values.iter().enumerate() {
        out.set(k, k, v);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReluNetwork {
    layers: Vec<AffineLayer>,
}

impl ReluNetwork {
    pub fn new(layers: Vec<AffineLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidNetwork("a network needs at least one layer".into()));
        }
        for (k, w) in layers.windows(2).enumerate() {
            if w[1].cols != w[0].rows {
                return Err(Error::InvalidNetwork(format!(
                    "layer {} outputs {} values but layer {} takes {}",
                    k,
                    w[0].rows,
                    k + 1,
                    w[1].cols
                )));
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[AffineLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [AffineLayer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].cols
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().rows
    }

    /// Number of affine layers.
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// Total count of nonzero matrix entries and offsets.
    pub fn connectivity(&self) -> usize {
        self.layers.iter().map(AffineLayer::nonzeros).sum()
    }

    /// Largest layer dimension, input included.
    pub fn width(&self) -> usize {
        self.layers.iter().map(|l| l.rows).fold(self.input_dim(), usize::max)
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch { expected: self.input_dim(), got: x.len() });
        }
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            layer.apply(&cur, &mut next);
            if k < last {
                next.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(cur)
    }

    /// Scalar-input evaluation.
    pub fn eval1(&self, x: f64) -> Result<Vec<f64>> {
        self.eval(&[x])
    }

    /// Sparse concatenation: the inner network's last layer is split into
    /// `rho(y)` and `rho(-y)` channels which the outer network's first layer
    /// recombines. Exact, with depth equal to the sum of the two depths.
    pub fn compose(outer: &Self, inner: &Self) -> Result<Self> {
        check_io(outer, inner)?;
        let mut layers = inner.layers[..inner.depth() - 1].to_vec();
        layers.push(inner.layers.last().unwrap().doubled_rows());
        layers.push(outer.layers[0].doubled_cols());
        layers.extend_from_slice(&outer.layers[1..]);
        Self::new(layers)
    }

    /// Composition that multiplies the inner network's last affine map into
    /// the outer network's first one; depth is one less than the sum.
    pub fn compose_merged(outer: &Self, inner: &Self) -> Result<Self> {
        check_io(outer, inner)?;
        let mut layers = inner.layers[..inner.depth() - 1].to_vec();
        layers.push(outer.layers[0].after(inner.layers.last().unwrap()));
        layers.extend_from_slice(&outer.layers[1..]);
        Self::new(layers)
    }

    /// Same function, padded to `target` layers by carrying the output
    /// through `rho(y) - rho(-y)` identity channels.
    pub fn extend_depth(&self, target: usize) -> Result<Self> {
        let depth = self.depth();
        if target < depth {
            return Err(Error::Precondition(format!("cannot shrink a depth-{depth} network to {target}")));
        }
        if target == depth {
            return Ok(self.clone());
        }
        let out = self.output_dim();
        let mut layers = self.layers[..depth - 1].to_vec();
        layers.push(self.layers.last().unwrap().doubled_rows());
        for _ in 0..target - depth - 1 {
            layers.push(diagonal(&vec![1.0; 2 * out]));
        }
        layers.push(diagonal(&vec![1.0; out]).doubled_cols());
        Self::new(layers)
    }

    /// Networks of equal depth on a shared input, outputs concatenated.
    pub fn parallelize(nets: &[&Self]) -> Result<Self> {
        check_parallel(nets)?;
        let input = nets[0].input_dim();
        if nets.iter().any(|n| n.input_dim() != input) {
            return Err(Error::InvalidNetwork("parallelized networks must share the input dimension".into()));
        }
        let mut layers = vec![stacked(&nets.iter().map(|n| &n.layers[0]).collect::<Vec<_>>())];
        for k in 1..nets[0].depth() {
            layers.push(block_diagonal(&nets.iter().map(|n| &n.layers[k]).collect::<Vec<_>>()));
        }
        Self::new(layers)
    }

    /// Networks of equal depth on separate inputs: `(x_1, ..., x_m) -> (N_1(x_1), ..., N_m(x_m))`.
    pub fn stack_independent(nets: &[&Self]) -> Result<Self> {
        check_parallel(nets)?;
        let layers = (0..nets[0].depth())
            .map(|k| block_diagonal(&nets.iter().map(|n| &n.layers[k]).collect::<Vec<_>>()))
            .collect();
        Self::new(layers)
    }

    /// `x -> sum_k N_k(x)` for equal-depth networks on a shared input.
    pub fn sum_networks(nets: &[&Self]) -> Result<Self> {
        let mut par = Self::parallelize(nets)?;
        let out = nets[0].output_dim();
        if nets.iter().any(|n| n.output_dim() != out) {
            return Err(Error::InvalidNetwork("summed networks must share the output dimension".into()));
        }
        let last: Vec<&AffineLayer> = nets.iter().map(|n| n.layers.last().unwrap()).collect();
        *par.layers.last_mut().unwrap() = side_by_side(&last);
        Ok(par)
    }

    /// `x -> (sum_k N_k(x_k))` for equal-depth networks on separate inputs.
    pub fn sum_independent(nets: &[&Self]) -> Result<Self> {
        let mut st = Self::stack_independent(nets)?;
        let out = nets[0].output_dim();
        if nets.iter().any(|n| n.output_dim() != out) {
            return Err(Error::InvalidNetwork("summed networks must share the output dimension".into()));
        }
        let last: Vec<&AffineLayer> = nets.iter().map(|n| n.layers.last().unwrap()).collect();
        *st.layers.last_mut().unwrap() = side_by_side(&last);
        Ok(st)
    }

    /// Applies `y -> m y + c` to the output of a scalar-output network.
    pub fn affine_output(&self, m: f64, c: f64) -> Self {
        let mut out = self.clone();
        let last = out.layers.last_mut().unwrap();
        last.matrix.iter_mut().for_each(|v| *v *= m);
        last.bias.iter_mut().for_each(|v| *v = *v * m + c);
        out
    }

    /// Applies `x -> m x + c` to the input of a scalar-input network.
    pub fn affine_input(&self, m: f64, c: f64) -> Self {
        let mut out = self.clone();
        let first = &mut out.layers[0];
        for r in 0..first.rows {
            let w = first.get(r, 0);
            first.set(r, 0, w * m);
            first.bias[r] += w * c;
        }
        out
    }
}

fn check_io(outer: &ReluNetwork, inner: &ReluNetwork) -> Result<()> {
    if outer.input_dim() != inner.output_dim() {
        return Err(Error::DimensionMismatch { expected: outer.input_dim(), got: inner.output_dim() });
    }
    Ok(())
}

fn check_parallel(nets: &[&ReluNetwork]) -> Result<()> {
    let first = nets.first().ok_or_else(|| Error::InvalidNetwork("no networks given".into()))?;
    if let Some(bad) = nets.iter().find(|n| n.depth() != first.depth()) {
        return Err(Error::InvalidNetwork(format!(
            "depth mismatch: {} vs {} (extend the shallower network first)",
            first.depth(),
            bad.depth()
        )));
    }
    Ok(())
}

/// The tent map: `W_1 x = (x, x - 1/2, x - 1)`, `W_2 = (2, -4, 2)`.
pub fn make_g_network() -> ReluNetwork {
    ReluNetwork::new(vec![first_g_layer(), last_g_layer()]).unwrap()
}

/// `g_s` with `s - 1` hidden tent blocks in between.
pub fn make_gs_network(s: u32) -> Result<ReluNetwork> {
    if s == 0 {
        return Err(Error::Precondition("sawtooth order must be at least 1".into()));
    }
    let mut layers = vec![first_g_layer()];
    for _ in 1..s {
        layers.push(middle_g_layer());
    }
    layers.push(last_g_layer());
    ReluNetwork::new(layers)
}

fn first_g_layer() -> AffineLayer {
    AffineLayer::new(3, 1, vec![1.0, 1.0, 1.0], vec![0.0, -0.5, -1.0]).unwrap()
}

fn middle_g_layer() -> AffineLayer {
    let row = [2.0, -4.0, 2.0];
    AffineLayer::new(3, 3, row.repeat(3), vec![0.0, -0.5, -1.0]).unwrap()
}

fn last_g_layer() -> AffineLayer {
    AffineLayer::new(1, 3, vec![2.0, -4.0, 2.0], vec![0.0]).unwrap()
}

/// `rho(x) - rho(-x)`.
pub fn make_identity_network() -> ReluNetwork {
    ReluNetwork::new(vec![
        AffineLayer::new(2, 1, vec![1.0, -1.0], vec![0.0, 0.0]).unwrap(),
        AffineLayer::new(1, 2, vec![1.0, -1.0], vec![0.0]).unwrap(),
    ])
    .unwrap()
}

/// `x -> c + sum_i a_i rho(x - b_i)` as a two-layer network; terms with
/// `a_i = 0` are dropped.
pub fn make_pwl_network(f: &PwlFunction) -> ReluNetwork {
    let mut terms: Vec<(f64, f64)> =
        f.coeffs().iter().zip(f.offsets()).filter(|(a, _)| **a != 0.0).map(|(&a, &b)| (a, b)).collect();
    if terms.is_empty() {
        terms.push((0.0, 0.0));
    }
    let k = terms.len();
    let hidden = AffineLayer::new(k, 1, vec![1.0; k], terms.iter().map(|t| -t.1).collect()).unwrap();
    let out = AffineLayer::new(1, k, terms.iter().map(|t| t.0).collect(), vec![f.constant()]).unwrap();
    ReluNetwork::new(vec![hidden, out]).unwrap()
}

/// Provenance and claimed sizes stored next to the layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkMeta {
    pub n: usize,
    pub s: u32,
    pub method: Method,
    pub claimed_connectivity_bound: f64,
    pub claimed_depth: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkFile {
    pub layers: Vec<AffineLayer>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<NetworkMeta>,
}

impl NetworkFile {
    pub fn new(net: &ReluNetwork, meta: Option<NetworkMeta>) -> Self {
        Self { layers: net.layers.clone(), meta }
    }

    pub fn network(&self) -> Result<ReluNetwork> {
        ReluNetwork::new(self.layers.clone())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
