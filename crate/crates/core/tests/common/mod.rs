//! Shared helpers for integration tests: a small independent RNG, random
//! instance generators and brute-force oracles.
#![allow(dead_code)]

use relugen_core::{GeneralHistogram1D, HistogramD};

/// xorshift64*; deliberately unrelated to the library's noise source.
pub struct TestRng(u64);

impl TestRng {
    pub fn new(seed: u64) -> Self {
        Self(seed.wrapping_mul(0x2545_F491_4F6C_DD1D) | 1)
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.0;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.0 = x;
        x.wrapping_mul(0x2545_F491_4F6C_DD1D)
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }
}

/// Random 2-D histogram with raw weights in `[0.2, 2)` before normalization.
pub fn random_histogram_2d(rng: &mut TestRng, n: usize) -> HistogramD {
    let raw = (0..n * n).map(|_| rng.range(0.2, 2.0)).collect();
    HistogramD::from_unnormalized(2, n, raw).unwrap()
}

pub fn random_histogram_1d(rng: &mut TestRng, n: usize) -> HistogramD {
    let raw = (0..n).map(|_| rng.range(0.2, 2.0)).collect();
    HistogramD::from_unnormalized(1, n, raw).unwrap()
}

/// Random general histogram with `pieces` intervals of width at least
/// `0.2 / pieces` and raw weights in `[0.1, 3)`.
pub fn random_general(rng: &mut TestRng, pieces: usize) -> GeneralHistogram1D {
    let widths: Vec<f64> = (0..pieces).map(|_| rng.range(0.2, 1.0)).collect();
    let total: f64 = widths.iter().sum();
    let mut breaks = vec![0.0];
    let mut acc = 0.0;
    for w in &widths[..pieces - 1] {
        acc += w / total;
        breaks.push(acc);
    }
    breaks.push(1.0);
    let raw: Vec<f64> = (0..pieces).map(|_| rng.range(0.1, 3.0)).collect();
    let mass: f64 = raw.iter().zip(breaks.windows(2)).map(|(w, t)| w * (t[1] - t[0])).sum();
    GeneralHistogram1D::new(breaks, raw.iter().map(|w| w / mass).collect()).unwrap()
}

/// Random atoms in `[0,1]^dim` with masses normalized to 1.
pub fn random_atoms(rng: &mut TestRng, count: usize, dim: usize) -> (Vec<f64>, Vec<f64>) {
    let points = (0..count * dim).map(|_| rng.uniform()).collect();
    let raw: Vec<f64> = (0..count).map(|_| rng.range(0.1, 1.0)).collect();
    let total: f64 = raw.iter().sum();
    (points, raw.iter().map(|m| m / total).collect())
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Minimum transport cost by enumerating every basic solution of the
/// transportation LP. Bases are the spanning trees of the complete bipartite
/// graph; each one fixes the flows, and the feasible ones are the vertices.
pub fn brute_force_ot(dim: usize, xs: &[f64], a: &[f64], ys: &[f64], b: &[f64]) -> f64 {
    let (m, n) = (a.len(), b.len());
    let edges: Vec<(usize, usize)> = (0..m).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
    let cost: Vec<f64> = edges.iter().map(|&(i, j)| dist(&xs[i * dim..(i + 1) * dim], &ys[j * dim..(j + 1) * dim])).collect();
    let mut best = f64::INFINITY;
    let mut chosen = Vec::with_capacity(m + n - 1);
    let parent: Vec<usize> = (0..m + n).collect();
    enumerate(&edges, 0, m, n, parent, &mut chosen, &mut |tree| {
        if let Some(flows) = tree_flows(tree, &edges, a, b) {
            let c: f64 = tree.iter().zip(&flows).map(|(&e, f)| f * cost[e]).sum();
            best = best.min(c);
        }
    });
    best
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

fn enumerate(
    edges: &[(usize, usize)],
    start: usize,
    m: usize,
    n: usize,
    parent: Vec<usize>,
    chosen: &mut Vec<usize>,
    visit: &mut dyn FnMut(&[usize]),
) {
    let need = m + n - 1;
    if chosen.len() == need {
        visit(chosen);
        return;
    }
    let remaining = need - chosen.len();
    for e in start..edges.len() {
        if edges.len() - e < remaining {
            break;
        }
        let (i, j) = edges[e];
        let mut p = parent.clone();
        let (ri, rj) = (find(&mut p, i), find(&mut p, m + j));
        if ri == rj {
            continue;
        }
        p[ri] = rj;
        chosen.push(e);
        enumerate(edges, e + 1, m, n, p, chosen, visit);
        chosen.pop();
    }
}

/// Flows on a spanning tree by peeling leaves; `None` if any is negative.
fn tree_flows(tree: &[usize], edges: &[(usize, usize)], a: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    let m = a.len();
    let nodes = m + b.len();
    let mut residual: Vec<f64> = a.iter().chain(b).copied().collect();
    let mut degree = vec![0usize; nodes];
    for &e in tree {
        let (i, j) = edges[e];
        degree[i] += 1;
        degree[m + j] += 1;
    }
    let mut flows = vec![f64::NAN; tree.len()];
    let mut done = vec![false; tree.len()];
    for _ in 0..tree.len() {
        let (slot, leaf) = tree
            .iter()
            .enumerate()
            .filter(|(k, _)| !done[*k])
            .find_map(|(k, &e)| {
                let (i, j) = edges[e];
                if degree[i] == 1 {
                    Some((k, i))
                } else if degree[m + j] == 1 {
                    Some((k, m + j))
                } else {
                    None
                }
            })?;
        let (i, j) = edges[tree[slot]];
        let other = if leaf == i { m + j } else { i };
        let f = residual[leaf];
        if f < -1e-12 {
            return None;
        }
        flows[slot] = f;
        residual[other] -= f;
        residual[leaf] = 0.0;
        degree[i] -= 1;
        degree[m + j] -= 1;
        done[slot] = true;
    }
    Some(flows)
}

/// `int_0^1 |F(x) - G(x)| dx` by a fine midpoint rule, for cross-checks.
pub fn l1_cdf_gap(f: impl Fn(f64) -> f64, g: impl Fn(f64) -> f64, nodes: usize) -> f64 {
    (0..nodes)
        .map(|k| {
            let x = (k as f64 + 0.5) / nodes as f64;
            (f(x) - g(x)).abs()
        })
        .sum::<f64>()
        / nodes as f64
}
