//! Continuous piecewise-linear functions on `[0,1]`.
//!
//! A [`PwlFunction`] is held in two exactly-converted forms: the ReLU
//! combination `f(x) = c + sum_i a_i max(0, x - b_i)` that network lowering
//! consumes, and a knot list `0 = t_0 < ... < t_K = 1` with values `f(t_k)`
//! that inversion and pushforward queries consume. Outside `[0,1]` the function
//! follows its ReLU form: constant `c` to the left, the final slope to the right.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::histogram::{GeneralHistogram1D, HistogramD};
use crate::numeric::{prefix_sums, CompensatedSum};

/// Tolerance for merging knots that coincide up to rounding.
pub const KNOT_SNAP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo <= hi) {
            return Err(Error::Precondition(format!("interval [{lo}, {hi}] has lo > hi")));
        }
        Ok(Self { lo, hi })
    }

    pub fn unit() -> Self {
        Self { lo: 0.0, hi: 1.0 }
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_empty(&self) -> bool {
        self.hi <= self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

/// Total length of a list of intervals.
pub fn total_length(intervals: &[Interval]) -> f64 {
    let mut acc = CompensatedSum::default();
    for iv in intervals {
        acc.add(iv.len());
    }
    acc.value()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PwlRepr", into = "PwlRepr")]
pub struct PwlFunction {
    a: Vec<f64>,
    b: Vec<f64>,
    c: f64,
    knots: Vec<f64>,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct PwlRepr {
    a: Vec<f64>,
    b: Vec<f64>,
    #[serde(default, skip_serializing_if = "is_zero")]
    c: f64,
}

fn is_zero(c: &f64) -> bool {
    *c == 0.0
}

impl TryFrom<PwlRepr> for PwlFunction {
    type Error = Error;

    fn try_from(r: PwlRepr) -> Result<Self> {
        PwlFunction::from_relu(r.a, r.b, r.c)
    }
}

impl From<PwlFunction> for PwlRepr {
    fn from(f: PwlFunction) -> Self {
        PwlRepr { a: f.a, b: f.b, c: f.c }
    }
}

impl PwlFunction {
    /// `f(x) = c + sum_i a_i max(0, x - b_i)` with `0 = b_0 < b_1 < ... <= 1`.
    pub fn from_relu(a: Vec<f64>, b: Vec<f64>, c: f64) -> Result<Self> {
        if a.is_empty() || a.len() != b.len() {
            return Err(Error::InvalidPwl(format!("{} coefficients for {} offsets", a.len(), b.len())));
        }
        if b[0] != 0.0 {
            return Err(Error::InvalidPwl(format!("first offset must be 0, got {}", b[0])));
        }
        if b.windows(2).any(|w| !(w[1] > w[0])) || b.last().is_some_and(|&x| x > 1.0) {
            return Err(Error::InvalidPwl("offsets must be strictly increasing within [0, 1]".into()));
        }
        if a.iter().chain([&c]).any(|v| !v.is_finite()) {
            return Err(Error::InvalidPwl("non-finite coefficient".into()));
        }
        let mut knots = b.clone();
        if *knots.last().unwrap() < 1.0 {
            knots.push(1.0);
        }
        let values = knots.iter().map(|&t| relu_sum(&a, &b, c, t)).collect();
        Ok(Self { a, b, c, knots, values })
    }

    /// Linear interpolation of `(knots[k], values[k])` with `knots` running
    /// from 0 to 1.
    pub fn from_breakpoints(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        validate_knots(&knots, &values)?;
        let slopes: Vec<f64> = piece_slopes(&knots, &values);
        let mut a = Vec::with_capacity(slopes.len());
        a.push(slopes[0]);
        a.extend(slopes.windows(2).map(|w| w[1] - w[0]));
        let b = knots[..knots.len() - 1].to_vec();
        Ok(Self { a, b, c: values[0], knots, values })
    }

    pub fn identity() -> Self {
        Self::affine(1.0, 0.0)
    }

    /// `x -> m x + c`.
    pub fn affine(m: f64, c: f64) -> Self {
        Self { a: vec![m], b: vec![0.0], c, knots: vec![0.0, 1.0], values: vec![c, m + c] }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.a
    }

    pub fn offsets(&self) -> &[f64] {
        &self.b
    }

    pub fn constant(&self) -> f64 {
        self.c
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn pieces(&self) -> usize {
        self.knots.len() - 1
    }

    fn final_slope(&self) -> f64 {
        crate::numeric::compensated_sum(self.a.iter().copied())
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return self.c;
        }
        let last = self.knots.len() - 1;
        if x >= 1.0 {
            return self.values[last] + (x - 1.0) * self.final_slope();
        }
        // first knot strictly greater than x
        let k = self.knots.partition_point(|&t| t <= x);
        let (t0, t1) = (self.knots[k - 1], self.knots[k]);
        if x == t0 {
            return self.values[k - 1];
        }
        let (v0, v1) = (self.values[k - 1], self.values[k]);
        v0 + (x - t0) * ((v1 - v0) / (t1 - t0))
    }

    /// Evaluation by the ReLU sum itself, for cross-checking the knot form.
    pub fn eval_relu(&self, x: f64) -> f64 {
        relu_sum(&self.a, &self.b, self.c, x)
    }

    /// `(min, max)` of `f` over `[0,1]`.
    pub fn range(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            a: self.a.iter().map(|v| v * factor).collect(),
            b: self.b.clone(),
            c: self.c * factor,
            knots: self.knots.clone(),
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn shift(&self, offset: f64) -> Self {
        let mut out = self.clone();
        out.c += offset;
        out.values.iter_mut().for_each(|v| *v += offset);
        out
    }

    /// Pointwise sum on `[0,1]`.
    pub fn add(&self, other: &Self) -> Self {
        let knots = merge_knots(self.knots.iter().chain(&other.knots).copied().collect());
        let values = knots.iter().map(|&t| self.eval(t) + other.eval(t)).collect();
        Self::from_breakpoints(knots, values).expect("merged knots are valid")
    }

    /// `outer(inner(x))` on `[0,1]`; `outer` is evaluated with its ReLU
    /// extension wherever `inner` leaves `[0,1]`.
    pub fn compose(outer: &Self, inner: &Self) -> Self {
        let mut knots = inner.knots.clone();
        // Kinks of `outer`: all interior knots plus 0 (its ReLU form bends there).
        let kinks = &outer.knots[..outer.knots.len() - 1];
        for w in 0..inner.pieces() {
            let (t0, t1) = (inner.knots[w], inner.knots[w + 1]);
            let (v0, v1) = (inner.values[w], inner.values[w + 1]);
            if v0 == v1 {
                continue;
            }
            let (lo, hi) = (v0.min(v1), v0.max(v1));
            let start = kinks.partition_point(|&k| k <= lo);
            let end = kinks.partition_point(|&k| k < hi);
            for &k in &kinks[start..end] {
                knots.push(t0 + (k - v0) * ((t1 - t0) / (v1 - v0)));
            }
        }
        let knots = merge_knots(knots);
        let values = knots.iter().map(|&t| outer.eval(inner.eval(t))).collect();
        Self::from_breakpoints(knots, values).expect("composed knots are valid")
    }

    /// Sorted, disjoint, maximal intervals of `{x in [0,1] : f(x) in target}`.
    pub fn preimage(&self, target: Interval) -> Vec<Interval> {
        self.preimage_within(target, Interval::unit())
    }

    /// Preimage of `target` restricted to `domain`.
    pub fn preimage_within(&self, target: Interval, domain: Interval) -> Vec<Interval> {
        let mut out: Vec<Interval> = Vec::new();
        let lo_dom = domain.lo.max(0.0);
        let hi_dom = domain.hi.min(1.0);
        if !(lo_dom < hi_dom) {
            return out;
        }
        let first = self.knots.partition_point(|&t| t <= lo_dom).saturating_sub(1);
        let last = self.knots.partition_point(|&t| t < hi_dom).min(self.pieces());
        for w in first..last {
            let (t0, t1) = (self.knots[w], self.knots[w + 1]);
            let (v0, v1) = (self.values[w], self.values[w + 1]);
            let (x0, x1) = match piece_preimage(t0, t1, v0, v1, target) {
                Some(iv) => iv,
                None => continue,
            };
            let (x0, x1) = (x0.max(lo_dom), x1.min(hi_dom));
            if !(x1 > x0) {
                continue;
            }
            match out.last_mut() {
                Some(prev) if x0 <= prev.hi => prev.hi = prev.hi.max(x1),
                _ => out.push(Interval { lo: x0, hi: x1 }),
            }
        }
        out
    }
}

/// Subinterval of one linear piece mapped into `target`.
fn piece_preimage(t0: f64, t1: f64, v0: f64, v1: f64, target: Interval) -> Option<(f64, f64)> {
    if v0 == v1 {
        return target.contains(v0).then_some((t0, t1));
    }
    let at = |v: f64| {
        if v == v0 {
            t0
        } else if v == v1 {
            t1
        } else {
            t0 + (v - v0) * ((t1 - t0) / (v1 - v0))
        }
    };
    let (vmin, vmax) = (v0.min(v1), v0.max(v1));
    let lo = target.lo.max(vmin);
    let hi = target.hi.min(vmax);
    if lo > hi {
        return None;
    }
    let (xa, xb) = (at(lo), at(hi));
    Some((xa.min(xb).clamp(t0, t1), xa.max(xb).clamp(t0, t1)))
}

fn relu_sum(a: &[f64], b: &[f64], c: f64, x: f64) -> f64 {
    let mut acc = CompensatedSum::default();
    acc.add(c);
    for (&ai, &bi) in a.iter().zip(b) {
        if x > bi {
            acc.add(ai * (x - bi));
        }
    }
    acc.value()
}

fn validate_knots(knots: &[f64], values: &[f64]) -> Result<()> {
    if knots.len() < 2 || knots.len() != values.len() {
        return Err(Error::InvalidPwl(format!("{} knots for {} values", knots.len(), values.len())));
    }
    if knots[0] != 0.0 || *knots.last().unwrap() != 1.0 {
        return Err(Error::InvalidPwl("knots must run from 0 to 1".into()));
    }
    if knots.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidPwl("knots must be strictly increasing".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidPwl("non-finite knot value".into()));
    }
    Ok(())
}

fn piece_slopes(knots: &[f64], values: &[f64]) -> Vec<f64> {
    knots.windows(2).zip(values.windows(2)).map(|(t, v)| (v[1] - v[0]) / (t[1] - t[0])).collect()
}

/// Sorts knots, clamps them to `[0,1]` and merges those within `KNOT_SNAP`.
fn merge_knots(mut knots: Vec<f64>) -> Vec<f64> {
    knots.retain(|t| (0.0..=1.0).contains(t));
    knots.push(0.0);
    knots.push(1.0);
    knots.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::with_capacity(knots.len());
    for t in knots {
        match out.last() {
            Some(&p) if t - p <= KNOT_SNAP => {}
            _ => out.push(t),
        }
    }
    // the right end must be exactly 1
    if let Some(last) = out.last_mut() {
        *last = 1.0;
    }
    out
}

/// Inverse CDF of a general histogram as a ReLU combination:
/// `a_0 = 1/w_0`, `a_i = 1/w_i - 1/w_{i-1}`, `b_i = sum_{j<i} (t_{j+1} - t_j) w_j`.
/// The knot `b_i` is mapped exactly to the breakpoint `t_i`.
pub fn build_inverse_cdf_pwl(h: &GeneralHistogram1D) -> Result<PwlFunction> {
    let t = h.breakpoints();
    let w = h.weights();
    if let Some(bad) = w.iter().find(|w| !(**w > 0.0)) {
        return Err(Error::InvalidHistogram(format!("weight {bad} is not strictly positive")));
    }
    let mut a = Vec::with_capacity(w.len());
    a.push(1.0 / w[0]);
    a.extend(w.windows(2).map(|p| 1.0 / p[1] - 1.0 / p[0]));
    let masses: Vec<f64> = t.windows(2).zip(w).map(|(iv, wi)| (iv[1] - iv[0]) * wi).collect();
    let cumulative = prefix_sums(&masses);
    let b = cumulative[..w.len()].to_vec();
    if b.windows(2).any(|p| !(p[1] > p[0])) || b.last().is_some_and(|&x| x >= 1.0) {
        return Err(Error::InvalidHistogram("cumulative masses are not strictly increasing below 1".into()));
    }
    let mut knots = b.clone();
    knots.push(1.0);
    let values = t.to_vec();
    Ok(PwlFunction { a, b, c: 0.0, knots, values })
}

/// Inverse CDF of a one-dimensional uniform-tile histogram.
pub fn inverse_cdf_of(h: &HistogramD) -> Result<PwlFunction> {
    build_inverse_cdf_pwl(&h.to_general()?)
}

/// Image of `U(delta)` under `x -> m x + s`: the image interval and its
/// constant density.
pub fn affine_pushforward(m: f64, s: f64, delta: Interval) -> Result<(Interval, f64)> {
    if m == 0.0 {
        return Err(Error::ZeroSlope { lo: delta.lo, hi: delta.hi });
    }
    if !(delta.hi > delta.lo) {
        return Err(Error::Precondition(format!("degenerate interval [{}, {}]", delta.lo, delta.hi)));
    }
    let (p, q) = (m * delta.lo + s, m * delta.hi + s);
    let image = Interval { lo: p.min(q), hi: p.max(q) };
    Ok((image, 1.0 / (m.abs() * (delta.hi - delta.lo))))
}

/// The law of `f(U)` for `U` uniform on `[0,1]`, as a general histogram whose
/// breakpoints are the distinct image knots.
///
/// Requires `f([0,1]) = [0,1]` and no constant pieces.
pub fn pushforward_pwl(f: &PwlFunction) -> Result<GeneralHistogram1D> {
    let (lo, hi) = f.range();
    if lo < -KNOT_SNAP || hi > 1.0 + KNOT_SNAP {
        return Err(Error::Precondition(format!("range [{lo}, {hi}] leaves [0, 1]")));
    }
    if lo > KNOT_SNAP || hi < 1.0 - KNOT_SNAP {
        return Err(Error::Precondition(format!("range [{lo}, {hi}] does not cover [0, 1]")));
    }
    let mut breaks = merge_knots(f.values.clone());
    breaks[0] = 0.0;
    let snap = |v: f64| -> usize {
        let k = breaks.partition_point(|&b| b < v);
        if k < breaks.len() && breaks[k] - v <= KNOT_SNAP {
            k
        } else {
            k - 1
        }
    };
    let mut diff = vec![CompensatedSum::default(); breaks.len()];
    for w in 0..f.pieces() {
        let (t0, t1) = (f.knots[w], f.knots[w + 1]);
        let (v0, v1) = (f.values[w], f.values[w + 1]);
        let (i0, i1) = (snap(v0.min(v1)), snap(v0.max(v1)));
        if i0 == i1 {
            return Err(Error::ZeroSlope { lo: t0, hi: t1 });
        }
        let density = (t1 - t0) / (v1 - v0).abs();
        diff[i0].add(density);
        diff[i1].add(-density);
    }
    let mut running = CompensatedSum::default();
    let mut weights = Vec::with_capacity(breaks.len() - 1);
    for d in &diff[..breaks.len() - 1] {
        running.add(d.value());
        weights.push(running.value());
    }
    GeneralHistogram1D::new(breaks, weights)
}

/// Maximal intervals of `{x in [0,1] : f(x) in target}`.
pub fn preimage_intervals(f: &PwlFunction, target: Interval) -> Vec<Interval> {
    f.preimage(target)
}
