//! Transport maps `[0,1] -> [0,1]^2` pushing the uniform law onto a
//! two-dimensional histogram, their lowering to ReLU networks, and exact
//! cell-mass queries on their pushforwards.
//!
//! Three constructions are provided:
//!
//! * line-wise, `x -> (x, f(g_s(x)))`, for targets constant along x;
//! * standard, `x -> (f_marg(x), sum_i f_i(g_s(n f_marg(x) - i)))`, where
//!   `f_marg` inverts the x-marginal CDF and `f_i` the conditional CDF of the
//!   y-coordinate in column `i`;
//! * alt, which walks the tiles in snake order, spending an interval of
//!   `[0,1]` on each tile and drawing rescaled teeth over it.
//!
//! Every map keeps its symbolic definition next to a flattened
//! piecewise-linear form of each component. The flattened form answers
//! preimage queries exactly; the symbolic form is the oracle that both it and
//! the lowered network are checked against.

use std::f64::consts::SQRT_2;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::histogram::{Cell, HistogramD};
use crate::numeric::CompensatedSum;
use crate::pwl::{inverse_cdf_of, Interval, PwlFunction};
use crate::relunet::{make_gs_network, make_identity_network, make_pwl_network, AffineLayer, ReluNetwork};
use crate::sawtooth::{eval_g_delta, eval_gs, eval_h_delta, gs_pwl, h_breakpoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Standard,
    Linewise,
    Alt,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Standard => "standard",
            Method::Linewise => "linewise",
            Method::Alt => "alt",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(Method::Standard),
            "linewise" => Ok(Method::Linewise),
            "alt" => Ok(Method::Alt),
            other => Err(Error::Precondition(format!("unknown method {other:?}"))),
        }
    }
}

/// Grid index `(x1, x2)` together with its snake rank.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SnakeIndex {
    pub x1: usize,
    pub x2: usize,
    pub rank: usize,
}

impl SnakeIndex {
    pub fn new(n: usize, x1: usize, x2: usize) -> Result<Self> {
        Ok(Self { x1, x2, rank: snake_rank(n, x1, x2)? })
    }

    pub fn from_rank(n: usize, rank: usize) -> Result<Self> {
        let (x1, x2) = snake_unrank(n, rank)?;
        Ok(Self { x1, x2, rank })
    }
}

/// Rows (`x2`) bottom-up; even rows left to right, odd rows right to left.
pub fn snake_rank(n: usize, x1: usize, x2: usize) -> Result<usize> {
    if x1 >= n || x2 >= n {
        return Err(Error::OutOfRange { index: vec![x1, x2], n });
    }
    Ok(x2 * n + if x2.is_multiple_of(2) { x1 } else { n - 1 - x1 })
}

pub fn snake_unrank(n: usize, rank: usize) -> Result<(usize, usize)> {
    if rank >= n * n {
        return Err(Error::OutOfRange { index: vec![rank], n: n * n });
    }
    let x2 = rank / n;
    let pos = rank % n;
    Ok((if x2.is_multiple_of(2) { pos } else { n - 1 - pos }, x2))
}

/// One summand of the alt method's second component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AltTerm {
    pub cell: SnakeIndex,
    pub a: f64,
    pub b: f64,
    /// `h`-term (teeth followed by a ramp to the next row) rather than
    /// plain teeth.
    pub lifts: bool,
}

#[derive(Debug, Clone, PartialEq)]
enum Symbolic {
    Linewise { f: PwlFunction },
    Standard { f_marg: PwlFunction, conditionals: Vec<PwlFunction> },
    Alt { f_marg: PwlFunction, k: u32, terms: Vec<AltTerm> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransportMap1to2 {
    method: Method,
    n: usize,
    s: u32,
    first: PwlFunction,
    second: PwlFunction,
    symbolic: Symbolic,
}

impl TransportMap1to2 {
    pub fn method(&self) -> Method {
        self.method
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn s(&self) -> u32 {
        self.s
    }

    /// First component in flattened knot form.
    pub fn first(&self) -> &PwlFunction {
        &self.first
    }

    /// Second component in flattened knot form.
    pub fn second(&self) -> &PwlFunction {
        &self.second
    }

    /// Inverse marginal CDF (line-wise maps: the inverse CDF of the y-law).
    pub fn f_marg(&self) -> &PwlFunction {
        match &self.symbolic {
            Symbolic::Linewise { f } => f,
            Symbolic::Standard { f_marg, .. } | Symbolic::Alt { f_marg, .. } => f_marg,
        }
    }

    pub fn conditionals(&self) -> &[PwlFunction] {
        match &self.symbolic {
            Symbolic::Standard { conditionals, .. } => conditionals,
            _ => &[],
        }
    }

    pub fn alt_terms(&self) -> &[AltTerm] {
        match &self.symbolic {
            Symbolic::Alt { terms, .. } => terms,
            _ => &[],
        }
    }

    /// Evaluation of the flattened components.
    pub fn eval(&self, x: f64) -> (f64, f64) {
        (self.first.eval(x), self.second.eval(x))
    }

    /// Evaluation straight from the defining formula.
    pub fn eval_symbolic(&self, x: f64) -> (f64, f64) {
        match &self.symbolic {
            Symbolic::Linewise { f } => (x, f.eval(eval_gs(self.s, x))),
            Symbolic::Standard { f_marg, conditionals } => {
                let m = f_marg.eval(x);
                let n = self.n as f64;
                let mut acc = CompensatedSum::default();
                for (i, fi) in conditionals.iter().enumerate() {
                    acc.add(fi.eval(eval_gs(self.s, n * m - i as f64)));
                }
                (m, acc.value())
            }
            Symbolic::Alt { f_marg, k, terms } => {
                let first = f_marg.eval(eval_gs(*k, x));
                let mut acc = CompensatedSum::default();
                for t in terms {
                    acc.add(if t.lifts {
                        eval_h_delta(self.s, t.a, t.b, self.n, x)
                    } else {
                        eval_g_delta(self.s, t.a, t.b, self.n, x)
                    });
                }
                (first, acc.value())
            }
        }
    }
}

fn check_s(s: u32) -> Result<()> {
    if s == 0 {
        return Err(Error::Precondition("sawtooth order s must be at least 1".into()));
    }
    if s > 30 {
        return Err(Error::Precondition(format!("sawtooth order {s} is too large to tabulate")));
    }
    Ok(())
}

fn require_2d(h: &HistogramD) -> Result<()> {
    if h.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: h.dim() });
    }
    Ok(())
}

/// `x -> (x, f(g_s(x)))` with `f` the inverse CDF of the y-law.
pub fn build_linewise_map(h: &HistogramD, s: u32) -> Result<TransportMap1to2> {
    require_2d(h)?;
    check_s(s)?;
    let n = h.n();
    for i in 1..n {
        for j in 0..n {
            if (h.w2(i, j) - h.w2(0, j)).abs() > 1e-12 {
                return Err(Error::Precondition(format!(
                    "line-wise construction needs weights constant in x; w[{i},{j}] = {} differs from w[0,{j}] = {}",
                    h.w2(i, j),
                    h.w2(0, j)
                )));
            }
        }
    }
    let f = inverse_cdf_of(&h.marginal_y()?)?;
    let second = PwlFunction::compose(&f, &gs_pwl(s));
    Ok(TransportMap1to2 {
        method: Method::Linewise,
        n,
        s,
        first: PwlFunction::identity(),
        second,
        symbolic: Symbolic::Linewise { f },
    })
}

/// `x -> (f_marg(x), sum_i f_i(g_s(n f_marg(x) - i)))`.
///
/// On `P_r = f_marg^{-1}([r/n, (r+1)/n])` only the `i = r` summand is nonzero,
/// so the flattened second component is `f_r o g_s` laid out over each `P_r`.
pub fn build_2d_map(h: &HistogramD, s: u32) -> Result<TransportMap1to2> {
    require_2d(h)?;
    check_s(s)?;
    let n = h.n();
    let f_marg = inverse_cdf_of(&h.marginal_x()?)?;
    let conditionals = (0..n).map(|i| inverse_cdf_of(&h.conditional_y(i)?)).collect::<Result<Vec<_>>>()?;
    // knots of f_marg are exactly the P_r endpoints
    let beta = f_marg.knots();
    let gs = gs_pwl(s);
    let mut knots = vec![0.0];
    let mut values = vec![0.0];
    for (r, fr) in conditionals.iter().enumerate() {
        let tooth = PwlFunction::compose(fr, &gs);
        let (lo, hi) = (beta[r], beta[r + 1]);
        for (&u, &v) in tooth.knots().iter().zip(tooth.values()).skip(1) {
            knots.push(if u == 1.0 { hi } else { lo + u * (hi - lo) });
            values.push(v);
        }
    }
    let second = PwlFunction::from_breakpoints(knots, values)?;
    Ok(TransportMap1to2 {
        method: Method::Standard,
        n,
        s,
        first: f_marg.clone(),
        second,
        symbolic: Symbolic::Standard { f_marg, conditionals },
    })
}

/// Snake-ordered intervals `Delta_k` of widths `w_k / (n^2 w_{k1})`, where
/// `w_{k1}` is the x-marginal weight of the tile's column.
pub fn alt_intervals(h: &HistogramD) -> Result<Vec<(SnakeIndex, Interval)>> {
    require_2d(h)?;
    let n = h.n();
    let marg = h.marginal_x()?;
    let n2 = (n * n) as f64;
    let mut acc = CompensatedSum::default();
    let mut out = Vec::with_capacity(n * n);
    for rank in 0..n * n {
        let idx = SnakeIndex::from_rank(n, rank)?;
        let lo = acc.value();
        acc.add(h.w2(idx.x1, idx.x2) / marg.weights()[idx.x1] / n2);
        let hi = if rank + 1 == n * n { 1.0 } else { acc.value() };
        out.push((idx, Interval { lo, hi }));
    }
    Ok(out)
}

/// The tile-walking map `x -> (f_marg(g_k(x)), z(x))` for `n = 2^k`, with
/// `z` the sum of `g_s^Delta` teeth, one per tile, except that the last tile of
/// each snake row but the top one carries `h_s^Delta` to climb to the next row.
pub fn build_alt_2d_map(h: &HistogramD, s: u32) -> Result<TransportMap1to2> {
    require_2d(h)?;
    check_s(s)?;
    let n = h.n();
    if !n.is_power_of_two() {
        return Err(Error::Precondition(format!("the alt method needs n to be a power of two, got {n}")));
    }
    let k = n.trailing_zeros();
    let f_marg = inverse_cdf_of(&h.marginal_x()?)?;
    let first = PwlFunction::compose(&f_marg, &gs_pwl(k));
    let amp = 1.0 / n as f64;
    let mut terms = Vec::with_capacity(n * n);
    let mut knots = vec![0.0];
    let mut values = vec![0.0];
    for (idx, iv) in alt_intervals(h)? {
        let lifts = idx.rank % n == n - 1 && idx.x2 + 1 < n;
        terms.push(AltTerm { cell: idx, a: iv.lo, b: iv.hi, lifts });
        let level = idx.x2 as f64 * amp;
        let teeth_end = if lifts { h_breakpoint(s, iv.lo, iv.hi) } else { iv.hi };
        let pieces = 1u64 << s;
        for j in 1..=pieces {
            let t = if j == pieces { teeth_end } else { iv.lo + (teeth_end - iv.lo) * (j as f64 / pieces as f64) };
            knots.push(t);
            values.push(level + if j % 2 == 1 { amp } else { 0.0 });
        }
        if lifts {
            knots.push(iv.hi);
            values.push(level + amp);
        }
    }
    let second = PwlFunction::from_breakpoints(knots, values)?;
    Ok(TransportMap1to2 { method: Method::Alt, n, s, first, second, symbolic: Symbolic::Alt { f_marg, k, terms } })
}

pub fn build_map(h: &HistogramD, s: u32, method: Method) -> Result<TransportMap1to2> {
    match method {
        Method::Standard => build_2d_map(h, s),
        Method::Linewise => build_linewise_map(h, s),
        Method::Alt => build_alt_2d_map(h, s),
    }
}

/// Lebesgue measure of `{x in [0,1] : M(x) in cell}`.
pub fn map_cell_mass(map: &TransportMap1to2, cell: &Cell) -> Result<f64> {
    if cell.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: cell.dim() });
    }
    let xs = Interval { lo: cell.lo()[0], hi: cell.hi()[0] };
    let ys = Interval { lo: cell.lo()[1], hi: cell.hi()[1] };
    let mut acc = CompensatedSum::default();
    for dom in map.first.preimage(xs) {
        for iv in map.second.preimage_within(ys, dom) {
            acc.add(iv.len());
        }
    }
    Ok(acc.value())
}

/// The cell `c^{r,r1}_{k,k1}`: x-column `r` and y-row `k` of the histogram,
/// each split into `2^{s-1}` equal strips.
pub fn standard_cell(n: usize, s: u32, r: usize, r1: usize, k: usize, k1: usize) -> Result<Cell> {
    let m = 1usize << (s - 1);
    let side = (n * m) as f64;
    let (x, y) = (r * m + r1, k * m + k1);
    Cell::rect(x as f64 / side, (x + 1) as f64 / side, y as f64 / side, (y + 1) as f64 / side)
}

/// The line-wise cell: tooth `r` of `g_s` in x, strip `k1` of y-row `k`.
pub fn linewise_cell(n: usize, s: u32, r: usize, k: usize, k1: usize) -> Result<Cell> {
    let m = 1usize << (s - 1);
    let side = (n * m) as f64;
    let y = k * m + k1;
    Cell::rect(r as f64 / m as f64, (r + 1) as f64 / m as f64, y as f64 / side, (y + 1) as f64 / side)
}

/// The cells on which a construction is claimed to reproduce the histogram
/// mass exactly: fine cells for the standard and line-wise maps, tiles for alt.
pub fn verification_cells(method: Method, n: usize, s: u32) -> Result<Vec<Cell>> {
    let m = 1usize << (s - 1);
    let mut out = Vec::new();
    match method {
        Method::Standard => {
            for r in 0..n {
                for r1 in 0..m {
                    for k in 0..n {
                        for k1 in 0..m {
                            out.push(standard_cell(n, s, r, r1, k, k1)?);
                        }
                    }
                }
            }
        }
        Method::Linewise => {
            for r in 0..m {
                for k in 0..n {
                    for k1 in 0..m {
                        out.push(linewise_cell(n, s, r, k, k1)?);
                    }
                }
            }
        }
        Method::Alt => {
            for i in 0..n {
                for j in 0..n {
                    out.push(Cell::tile(n, &[i, j])?);
                }
            }
        }
    }
    Ok(out)
}

/// Wasserstein bound for the pushforward of a construction against its
/// histogram.
pub fn wasserstein_upper_bound(n: usize, s: u32, method: Method) -> f64 {
    let teeth = (s as f64).exp2();
    match method {
        Method::Standard => 2.0 * SQRT_2 / (n as f64 * teeth),
        Method::Linewise => 2.0 * SQRT_2 / teeth,
        Method::Alt => SQRT_2 / (n as f64 * teeth),
    }
}

/// Bound against the density itself: quantization error `L sqrt(2)/(2n)` plus
/// the standard construction's transport error.
pub fn end_to_end_bound(lipschitz: f64, n: usize, s: u32) -> f64 {
    lipschitz * SQRT_2 / (2.0 * n as f64) + wasserstein_upper_bound(n, s, Method::Standard)
}

pub fn claimed_connectivity_bound(method: Method, n: usize, s: u32) -> f64 {
    let (n, s) = (n as f64, s as f64);
    match method {
        Method::Linewise => 6.0 * n + 24.0 * s + 2.0,
        Method::Standard | Method::Alt => 88.0 * (n * n + n * s),
    }
}

pub fn claimed_depth(method: Method, n: usize, s: u32) -> usize {
    let s = s as usize;
    match method {
        Method::Linewise => s + 3,
        Method::Standard => s + 5,
        Method::Alt => (s + 5).max(n.trailing_zeros() as usize + 3),
    }
}

/// Lowers a map to a network in `N_{1,2}` computing the same function on `[0,1]`.
pub fn lower_to_network(map: &TransportMap1to2) -> Result<ReluNetwork> {
    match &map.symbolic {
        Symbolic::Linewise { f } => {
            let depth = claimed_depth(Method::Linewise, map.n, map.s);
            let first = make_identity_network().extend_depth(depth)?;
            let second = ReluNetwork::compose(&make_pwl_network(f), &make_gs_network(map.s)?)?;
            ReluNetwork::parallelize(&[&first, &second])
        }
        Symbolic::Standard { f_marg, conditionals } => lower_standard(map, f_marg, conditionals),
        Symbolic::Alt { f_marg, k, terms } => lower_alt(map, f_marg, *k, terms),
    }
}

fn lower_standard(map: &TransportMap1to2, f_marg: &PwlFunction, conditionals: &[PwlFunction]) -> Result<ReluNetwork> {
    let n = map.n;
    let depth = claimed_depth(Method::Standard, n, map.s);
    let marg_net = make_pwl_network(f_marg);
    let first = marg_net.extend_depth(depth)?;
    // x -> (n f_marg(x) - i)_i, sharing the hidden layer of f_marg
    let hidden = marg_net.layers()[0].clone();
    let out = &marg_net.layers()[1];
    let width = out.cols();
    let mut matrix = Vec::with_capacity(n * width);
    let mut bias = Vec::with_capacity(n);
    for i in 0..n {
        matrix.extend(out.row(0).iter().map(|a| n as f64 * a));
        bias.push(n as f64 * out.bias()[0] - i as f64);
    }
    let shifts = ReluNetwork::new(vec![hidden, AffineLayer::new(n, width, matrix, bias)?])?;
    let gs = make_gs_network(map.s)?;
    let teeth = ReluNetwork::stack_independent(&vec![&gs; n])?;
    let cond_nets: Vec<ReluNetwork> = conditionals.iter().map(make_pwl_network).collect();
    let finals = ReluNetwork::sum_independent(&cond_nets.iter().collect::<Vec<_>>())?;
    let second = ReluNetwork::compose(&finals, &ReluNetwork::compose(&teeth, &shifts)?)?;
    ReluNetwork::parallelize(&[&first, &second])
}

fn lower_alt(map: &TransportMap1to2, f_marg: &PwlFunction, k: u32, terms: &[AltTerm]) -> Result<ReluNetwork> {
    let (n, s) = (map.n, map.s);
    let depth = claimed_depth(Method::Alt, n, s);
    let marg_net = make_pwl_network(f_marg);
    let first = if k == 0 { marg_net } else { ReluNetwork::compose(&marg_net, &make_gs_network(k)?)? };
    let gs = make_gs_network(s)?;
    let amp = 1.0 / n as f64;
    let teeth_on = |a: f64, b: f64| gs.affine_input(1.0 / (b - a), -a / (b - a)).affine_output(amp, 0.0);
    let mut parts = Vec::with_capacity(terms.len() + 1);
    for t in terms {
        if t.lifts {
            let bt = h_breakpoint(s, t.a, t.b);
            parts.push(teeth_on(t.a, bt));
            let slope = amp / (t.b - bt);
            let ramp = ReluNetwork::new(vec![
                AffineLayer::new(2, 1, vec![1.0, 1.0], vec![-bt, -t.b])?,
                AffineLayer::new(1, 2, vec![slope, -slope], vec![0.0])?,
            ])?;
            parts.push(ramp.extend_depth(s as usize + 1)?);
        } else {
            parts.push(teeth_on(t.a, t.b));
        }
    }
    let second = ReluNetwork::sum_networks(&parts.iter().collect::<Vec<_>>())?;
    ReluNetwork::parallelize(&[&first.extend_depth(depth)?, &second.extend_depth(depth)?])
}
