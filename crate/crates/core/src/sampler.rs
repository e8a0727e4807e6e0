//! Seeded uniform noise and pushforward sampling.
//!
//! Draw `i` of a [`NoiseSource`] is a pure function of `(seed, i)`: the
//! SplitMix64 finalizer applied to `seed + (i + 1) * 0x9E3779B97F4A7C15`,
//! keeping the top 53 bits. Streams are therefore reproducible across
//! platforms and can be split across threads by index.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::histogram::HistogramD;
use crate::numeric::prefix_sums;
use crate::pwl::PwlFunction;
use crate::relunet::ReluNetwork;
use crate::transport::TransportMap1to2;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoiseSource {
    seed: u64,
}

impl NoiseSource {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// The `i`-th uniform draw on `[0, 1)`.
    pub fn draw(&self, i: u64) -> f64 {
        let z = mix64(self.seed.wrapping_add(i.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)));
        (z >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// An independent stream keyed off this one.
    pub fn derive(&self, stream: u64) -> Self {
        Self { seed: mix64(self.seed ^ mix64(stream.wrapping_add(GOLDEN_GAMMA))) }
    }
}

/// Points in `R^dim` stored row-major.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Samples {
    dim: usize,
    data: Vec<f64>,
}

impl Samples {
    pub fn new(dim: usize) -> Self {
        Self { dim, data: Vec::new() }
    }

    pub fn from_flat(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || !data.len().is_multiple_of(dim) {
            return Err(Error::Precondition(format!("{} values do not split into {dim}-vectors", data.len())));
        }
        Ok(Self { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.data.len() / self.dim
        }
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn push(&mut self, p: &[f64]) {
        debug_assert_eq!(p.len(), self.dim);
        self.data.extend_from_slice(p);
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim.max(1))
    }

    /// CSV with header `x` or `x,y`; values carry 17 significant digits.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let header: Vec<&str> = ["x", "y", "z"].into_iter().take(self.dim).collect();
        w.write_record(&header)?;
        for p in self.iter() {
            w.write_record(p.iter().map(|v| format!("{v:.16e}")))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let dim = r.headers()?.len();
        if dim == 0 {
            return Err(Error::Precondition("sample file has an empty header".into()));
        }
        let mut data = Vec::new();
        for (line, record) in r.records().enumerate() {
            let record = record?;
            for field in record.iter() {
                let v: f64 = field.trim().parse().map_err(|_| {
                    Error::Precondition(format!("row {}: cannot parse {field:?} as a number", line + 1))
                })?;
                data.push(v);
            }
        }
        Self::from_flat(dim, data)
    }

    pub fn write_csv_path(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::io::BufWriter::new(std::fs::File::create(path)?))
    }

    pub fn read_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

/// A map from scalar noise to points.
pub trait Pushforward {
    fn output_dim(&self) -> usize;
    fn apply(&self, u: f64, out: &mut Vec<f64>) -> Result<()>;
}

impl Pushforward for PwlFunction {
    fn output_dim(&self) -> usize {
        1
    }

    fn apply(&self, u: f64, out: &mut Vec<f64>) -> Result<()> {
        out.push(self.eval(u));
        Ok(())
    }
}

impl Pushforward for TransportMap1to2 {
    fn output_dim(&self) -> usize {
        2
    }

    fn apply(&self, u: f64, out: &mut Vec<f64>) -> Result<()> {
        let (x, y) = self.eval(u);
        out.extend([x, y]);
        Ok(())
    }
}

impl Pushforward for ReluNetwork {
    fn output_dim(&self) -> usize {
        ReluNetwork::output_dim(self)
    }

    fn apply(&self, u: f64, out: &mut Vec<f64>) -> Result<()> {
        out.extend(self.eval(&[u])?);
        Ok(())
    }
}

/// `f(U_0), ..., f(U_{count-1})` for the draws `U_i` of `source`.
pub fn sample_pushforward<F: Pushforward + ?Sized>(source: &NoiseSource, f: &F, count: usize) -> Result<Samples> {
    let mut data = Vec::with_capacity(count * f.output_dim());
    for i in 0..count {
        f.apply(source.draw(i as u64), &mut data)?;
    }
    Samples::from_flat(f.output_dim(), data)
}

/// Direct samples of a histogram: draw `(d + 1) i` picks the tile by inverse
/// CDF over tile masses, draws `(d + 1) i + 1 ..` place the point inside it.
pub fn sample_histogram(source: &NoiseSource, h: &HistogramD, count: usize) -> Samples {
    let d = h.dim();
    let n = h.n();
    let tile_volume = (n as f64).powi(-(d as i32));
    let masses: Vec<f64> = h.weights().iter().map(|w| w * tile_volume).collect();
    let cum = prefix_sums(&masses);
    let total = *cum.last().unwrap();
    let stride = (d + 1) as u64;
    let mut out = Samples::new(d);
    let mut point = vec![0.0; d];
    for i in 0..count as u64 {
        let u = source.draw(stride * i) * total;
        let tile = (cum.partition_point(|&c| c <= u) - 1).min(masses.len() - 1);
        let mut rest = tile;
        for axis in (0..d).rev() {
            let k = rest % n;
            rest /= n;
            point[axis] = (k as f64 + source.draw(stride * i + 1 + axis as u64)) / n as f64;
        }
        out.push(&point);
    }
    out
}
