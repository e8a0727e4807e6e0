//! Exact discrete optimal transport with Euclidean ground cost.
//!
//! The transportation problem is solved by the primal network simplex method
//! on the complete bipartite graph between source and target atoms, started
//! from an all-artificial basis and priced in blocks of about `sqrt(mn)` arcs.

use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;

/// Largest atom count per side the exact solver accepts.
pub const OT_ATOM_BUDGET: usize = 4096;

const MASS_TOL: f64 = 1e-9;
const REDUCED_COST_TOL: f64 = 1e-11;

/// Finite weighted point set with total mass 1.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomicMeasure {
    dim: usize,
    points: Vec<f64>,
    masses: Vec<f64>,
}

impl AtomicMeasure {
    /// `points` is flattened row-major, `dim` coordinates per atom.
    pub fn new(dim: usize, points: Vec<f64>, masses: Vec<f64>) -> Result<Self> {
        if dim == 0 || points.len() != dim * masses.len() {
            return Err(Error::Precondition(format!(
                "{} coordinates for {} atoms in dimension {dim}",
                points.len(),
                masses.len()
            )));
        }
        if masses.is_empty() {
            return Err(Error::Precondition("a measure needs at least one atom".into()));
        }
        if let Some(m) = masses.iter().find(|m| !(m.is_finite() && **m > 0.0)) {
            return Err(Error::Precondition(format!("atom mass {m} is not strictly positive")));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::Precondition("non-finite atom coordinate".into()));
        }
        let total = total_mass(&masses);
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::Precondition(format!("atom masses sum to {total}, expected 1")));
        }
        Ok(Self { dim, points, masses })
    }

    /// Equal masses `1/len`.
    pub fn uniform(dim: usize, points: Vec<f64>) -> Result<Self> {
        let len = if dim == 0 { 0 } else { points.len() / dim };
        Self::new(dim, points, vec![1.0 / len.max(1) as f64; len])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn mass(&self, i: usize) -> f64 {
        self.masses[i]
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn total_mass(&self) -> f64 {
        total_mass(&self.masses)
    }
}

fn total_mass(masses: &[f64]) -> f64 {
    let mut acc = CompensatedSum::default();
    masses.iter().for_each(|&m| acc.add(m));
    acc.value()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanEntry {
    pub source: usize,
    pub target: usize,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OTResult {
    pub cost: f64,
    pub plan: Vec<PlanEntry>,
}

impl OTResult {
    /// Row and column sums of the plan.
    pub fn marginals(&self, m: usize, n: usize) -> (Vec<f64>, Vec<f64>) {
        let mut rows = vec![CompensatedSum::default(); m];
        let mut cols = vec![CompensatedSum::default(); n];
        for e in &self.plan {
            rows[e.source].add(e.mass);
            cols[e.target].add(e.mass);
        }
        (rows.iter().map(CompensatedSum::value).collect(), cols.iter().map(CompensatedSum::value).collect())
    }
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Minimum of `sum pi_ij |x_i - y_j|` over couplings of `mu` and `nu`.
pub fn solve_discrete_ot(mu: &AtomicMeasure, nu: &AtomicMeasure) -> Result<OTResult> {
    if mu.dim != nu.dim {
        return Err(Error::DimensionMismatch { expected: mu.dim, got: nu.dim });
    }
    let (left, right) = (mu.total_mass(), nu.total_mass());
    if (left - right).abs() > MASS_TOL {
        return Err(Error::MassMismatch { left, right });
    }
    let atoms = mu.len().max(nu.len());
    if atoms > OT_ATOM_BUDGET {
        return Err(Error::OverBudget { atoms, budget: OT_ATOM_BUDGET });
    }
    let mut solver = Simplex::new(mu, nu);
    solver.run();
    Ok(solver.result())
}

const NONE: usize = usize::MAX;

/// Network simplex on the transportation graph extended by an artificial root.
///
/// Nodes `0..m` are sources, `m..m+n` targets and `m+n` the root. Arc ids
/// `0..mn` are the real arcs `i -> j` (id `i n + j`), then one artificial arc
/// `i -> root` per source and `root -> j` per target. Artificial arcs cost
/// more than half the largest real cost, so any flow routed through the root
/// can be shortcut by a real arc and none survives at the optimum.
///
/// The tree is kept strongly feasible (Cunningham's leaving rule), which rules
/// out cycling without any fallback pricing.
struct Simplex<'a> {
    mu: &'a AtomicMeasure,
    nu: &'a AtomicMeasure,
    m: usize,
    n: usize,
    root: usize,
    art_cost: f64,
    parent: Vec<usize>,
    /// arc joining a node to its parent
    pred: Vec<usize>,
    /// `pred` points from the node to its parent
    up: Vec<bool>,
    /// flow on `pred`
    flow: Vec<f64>,
    depth: Vec<u32>,
    pi: Vec<f64>,
    children: Vec<Vec<usize>>,
    stack: Vec<usize>,
    path: Vec<usize>,
    next_price: usize,
    block: usize,
}

impl<'a> Simplex<'a> {
    fn new(mu: &'a AtomicMeasure, nu: &'a AtomicMeasure) -> Self {
        let (m, n) = (mu.len(), nu.len());
        let root = m + n;
        let mut max_cost: f64 = 0.0;
        for i in 0..m {
            for j in 0..n {
                max_cost = max_cost.max(euclidean(mu.point(i), nu.point(j)));
            }
        }
        let art_cost = max_cost + 1.0;
        let block = ((m * n) as f64).sqrt().ceil().max(10.0) as usize;
        let mut s = Self {
            mu,
            nu,
            m,
            n,
            root,
            art_cost,
            parent: vec![root; root + 1],
            pred: vec![NONE; root + 1],
            up: vec![false; root + 1],
            flow: vec![0.0; root + 1],
            depth: vec![1; root + 1],
            pi: vec![0.0; root + 1],
            children: vec![Vec::new(); root + 1],
            stack: Vec::with_capacity(root + 1),
            path: Vec::new(),
            next_price: 0,
            block,
        };
        s.parent[root] = NONE;
        s.depth[root] = 0;
        for i in 0..m {
            s.pred[i] = m * n + i;
            s.up[i] = true;
            s.flow[i] = mu.mass(i);
            s.pi[i] = -art_cost;
        }
        for j in 0..n {
            s.pred[m + j] = m * n + m + j;
            s.flow[m + j] = nu.mass(j);
            s.pi[m + j] = art_cost;
        }
        s.children[root] = (0..root).collect();
        s
    }

    fn arc_count(&self) -> usize {
        self.m * self.n + self.m + self.n
    }

    fn ends(&self, arc: usize) -> (usize, usize) {
        let mn = self.m * self.n;
        if arc < mn {
            (arc / self.n, self.m + arc % self.n)
        } else if arc < mn + self.m {
            (arc - mn, self.root)
        } else {
            (self.root, self.m + (arc - mn - self.m))
        }
    }

    fn cost(&self, arc: usize) -> f64 {
        if arc < self.m * self.n {
            euclidean(self.mu.point(arc / self.n), self.nu.point(arc % self.n))
        } else {
            self.art_cost
        }
    }

    fn reduced_cost(&self, arc: usize) -> f64 {
        let (t, h) = self.ends(arc);
        self.cost(arc) + self.pi[t] - self.pi[h]
    }

    /// Most negative reduced cost within the first block that has one; ties
    /// go to the arc scanned first.
    fn price(&mut self) -> Option<usize> {
        let total = self.arc_count();
        let mut scanned = 0;
        let mut pos = self.next_price;
        while scanned < total {
            let mut best = -REDUCED_COST_TOL;
            let mut found = None;
            let end = (scanned + self.block).min(total);
            while scanned < end {
                let r = self.reduced_cost(pos);
                if r < best {
                    best = r;
                    found = Some(pos);
                }
                pos += 1;
                if pos == total {
                    pos = 0;
                }
                scanned += 1;
            }
            if found.is_some() {
                self.next_price = pos;
                return found;
            }
        }
        None
    }

    fn pivot(&mut self, entering: usize) {
        let (first, second) = self.ends(entering);
        let join = {
            let (mut a, mut b) = (first, second);
            while a != b {
                if self.depth[a] > self.depth[b] {
                    a = self.parent[a];
                } else if self.depth[b] > self.depth[a] {
                    b = self.parent[b];
                } else {
                    a = self.parent[a];
                    b = self.parent[b];
                }
            }
            a
        };
        // Flow runs first -> second, up to the join, down back to first. The
        // leaving arc is the last blocking one met walking the cycle from the
        // join in that direction.
        let mut delta = f64::INFINITY;
        let (mut u_out, mut on_first) = (NONE, true);
        let mut u = first;
        while u != join {
            if self.up[u] && self.flow[u] < delta {
                delta = self.flow[u];
                u_out = u;
            }
            u = self.parent[u];
        }
        u = second;
        while u != join {
            if !self.up[u] && self.flow[u] <= delta {
                delta = self.flow[u];
                u_out = u;
                on_first = false;
            }
            u = self.parent[u];
        }
        debug_assert!(u_out != NONE, "transport problem cannot be unbounded");
        if delta > 0.0 {
            u = first;
            while u != join {
                self.flow[u] += if self.up[u] { -delta } else { delta };
                u = self.parent[u];
            }
            u = second;
            while u != join {
                self.flow[u] += if self.up[u] { delta } else { -delta };
                u = self.parent[u];
            }
        }
        let (u_in, v_in) = if on_first { (first, second) } else { (second, first) };
        self.reattach(u_in, v_in, u_out, entering, delta);
    }

    /// Cuts the subtree at `u_out`, re-roots it at `u_in` and hangs it below
    /// `v_in` through the entering arc.
    fn reattach(&mut self, u_in: usize, v_in: usize, u_out: usize, entering: usize, delta: f64) {
        self.path.clear();
        let mut x = u_in;
        loop {
            self.path.push(x);
            if x == u_out {
                break;
            }
            x = self.parent[x];
        }
        let old_parent = self.parent[u_out];
        detach(&mut self.children[old_parent], u_out);
        for t in (1..self.path.len()).rev() {
            let (lower, upper) = (self.path[t - 1], self.path[t]);
            self.parent[upper] = lower;
            self.pred[upper] = self.pred[lower];
            self.up[upper] = !self.up[lower];
            self.flow[upper] = self.flow[lower];
            detach(&mut self.children[upper], lower);
            self.children[lower].push(upper);
        }
        self.parent[u_in] = v_in;
        self.pred[u_in] = entering;
        self.up[u_in] = self.ends(entering).0 == u_in;
        self.flow[u_in] = delta;
        self.children[v_in].push(u_in);
        // depths and potentials of the moved subtree
        self.stack.clear();
        self.stack.push(u_in);
        while let Some(node) = self.stack.pop() {
            let p = self.parent[node];
            let c = self.cost(self.pred[node]);
            self.depth[node] = self.depth[p] + 1;
            self.pi[node] = if self.up[node] { self.pi[p] - c } else { self.pi[p] + c };
            self.stack.extend_from_slice(&self.children[node]);
        }
    }

    fn run(&mut self) {
        while let Some(arc) = self.price() {
            self.pivot(arc);
        }
    }

    fn result(&self) -> OTResult {
        let mn = self.m * self.n;
        let mut cost = CompensatedSum::default();
        let mut plan: Vec<PlanEntry> = (0..self.root)
            .filter(|&v| self.pred[v] < mn && self.flow[v] > 0.0)
            .map(|v| {
                let arc = self.pred[v];
                cost.add(self.flow[v] * self.cost(arc));
                PlanEntry { source: arc / self.n, target: arc % self.n, mass: self.flow[v] }
            })
            .collect();
        plan.sort_by_key(|e| (e.source, e.target));
        OTResult { cost: cost.value(), plan }
    }
}

fn detach(list: &mut Vec<usize>, node: usize) {
    if let Some(k) = list.iter().position(|&c| c == node) {
        list.swap_remove(k);
    }
}
