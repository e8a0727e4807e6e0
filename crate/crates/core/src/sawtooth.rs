//! The tent map `g`, its iterates `g_s`, and the rescaled teeth used by the
//! tile-by-tile construction.
//!
//! `g` is extended by zero outside `[0,1]`, which is also what its ReLU
//! realization computes.

use crate::error::{Error, Result};
use crate::pwl::PwlFunction;

/// `g(x) = 2x` on `[0, 1/2)`, `2(1 - x)` on `[1/2, 1]`, zero elsewhere.
pub fn eval_g(x: f64) -> f64 {
    if !(0.0..=1.0).contains(&x) {
        0.0
    } else if x < 0.5 {
        2.0 * x
    } else {
        2.0 * (1.0 - x)
    }
}

/// `g_s = g o ... o g` (`s` times) by iterated composition; `g_0` is the
/// identity.
pub fn eval_gs(s: u32, x: f64) -> f64 {
    (0..s).fold(x, |v, _| eval_g(v))
}

/// `g_s^[a,b](x) = (1/n) g_s((x - a)/(b - a))`.
pub fn eval_g_delta(s: u32, a: f64, b: f64, n: usize, x: f64) -> f64 {
    eval_gs(s, (x - a) / (b - a)) / n as f64
}

/// `a + 2^s (b - a)/(1 + 2^s)`: where the compressed teeth of `h_s^[a,b]` end
/// and its ramp begins. Each of the `2^s` tooth pieces and the ramp then has
/// width `(b - a)/(1 + 2^s)`.
pub fn h_breakpoint(s: u32, a: f64, b: f64) -> f64 {
    let p = (s as f64).exp2();
    a + p * (b - a) / (1.0 + p)
}

/// Teeth of amplitude `1/n` filling `[a, b~]`, a ramp from 0 up to `1/n` on
/// `[b~, b]` and the constant `1/n` beyond `b`.
pub fn eval_h_delta(s: u32, a: f64, b: f64, n: usize, x: f64) -> f64 {
    let bt = h_breakpoint(s, a, b);
    let ramp = (relu(x - bt) - relu(x - b)) / (n as f64 * (b - bt));
    eval_g_delta(s, a, bt, n, x) + ramp
}

/// `g(2^{s-1} x - k)`, the `k`-th tooth of `g_s`.
pub fn gs_decomposition_term(s: u32, k: u64, x: f64) -> f64 {
    eval_g(((s - 1) as f64).exp2() * x - k as f64)
}

fn relu(x: f64) -> f64 {
    x.max(0.0)
}

/// `g_s` restricted to `[0,1]` in knot form: knots `j/2^s`.
pub fn gs_pwl(s: u32) -> PwlFunction {
    if s == 0 {
        return PwlFunction::identity();
    }
    teeth_pwl(s, 0.0, 1.0, 1.0, 0.0)
}

/// `g_s^[a,b]` restricted to `[0,1]`.
pub fn g_delta_pwl(s: u32, a: f64, b: f64, n: usize) -> Result<PwlFunction> {
    check_delta(a, b, n)?;
    Ok(teeth_pwl(s, a, b, 1.0 / n as f64, 0.0))
}

/// `h_s^[a,b]` restricted to `[0,1]`.
pub fn h_delta_pwl(s: u32, a: f64, b: f64, n: usize) -> Result<PwlFunction> {
    check_delta(a, b, n)?;
    let amp = 1.0 / n as f64;
    let bt = h_breakpoint(s, a, b);
    let teeth = tooth_knots(s, a, bt, amp);
    let mut knots = Vec::with_capacity(teeth.len() + 3);
    let mut values = Vec::with_capacity(teeth.len() + 3);
    if a > 0.0 {
        knots.push(0.0);
        values.push(0.0);
    }
    for (t, v) in teeth {
        knots.push(t);
        values.push(v);
    }
    if b > bt {
        knots.push(b);
        values.push(amp);
    }
    if b < 1.0 {
        knots.push(1.0);
        values.push(amp);
    }
    PwlFunction::from_breakpoints(knots, values)
}

fn check_delta(a: f64, b: f64, n: usize) -> Result<()> {
    if !(0.0 <= a && a < b && b <= 1.0) || n == 0 {
        return Err(Error::Precondition(format!("need 0 <= a < b <= 1 and n >= 1, got [{a}, {b}], n={n}")));
    }
    Ok(())
}

/// Knots `a + j (b - a)/2^s` with alternating values `0, amp, 0, ...`.
fn tooth_knots(s: u32, a: f64, b: f64, amp: f64) -> Vec<(f64, f64)> {
    let pieces = 1u64 << s;
    (0..=pieces)
        .map(|j| {
            let t = if j == pieces { b } else { a + (b - a) * (j as f64 / pieces as f64) };
            (t, if j % 2 == 1 { amp } else { 0.0 })
        })
        .collect()
}

fn teeth_pwl(s: u32, a: f64, b: f64, amp: f64, after: f64) -> PwlFunction {
    let mut knots = Vec::new();
    let mut values = Vec::new();
    if a > 0.0 {
        knots.push(0.0);
        values.push(0.0);
    }
    for (t, v) in tooth_knots(s, a, b, amp) {
        knots.push(t);
        values.push(v);
    }
    if b < 1.0 {
        knots.push(1.0);
        values.push(after);
    }
    PwlFunction::from_breakpoints(knots, values).expect("tooth knots are increasing")
}

/// A sawtooth of order `s`, optionally rescaled onto `[a,b]` with amplitude `1/n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SawtoothSpec {
    pub s: u32,
    pub rescale: Option<Rescale>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rescale {
    pub a: f64,
    pub b: f64,
    pub n: usize,
}

impl SawtoothSpec {
    pub fn new(s: u32, rescale: Option<Rescale>) -> Result<Self> {
        if s == 0 {
            return Err(Error::Precondition("sawtooth order must be at least 1".into()));
        }
        if let Some(r) = rescale {
            if !(r.a < r.b) || r.n == 0 {
                return Err(Error::Precondition(format!("invalid rescaling [{}, {}], n={}", r.a, r.b, r.n)));
            }
        }
        Ok(Self { s, rescale })
    }

    /// `g_s` or `g_s^[a,b]`.
    pub fn eval(&self, x: f64) -> f64 {
        match self.rescale {
            None => eval_gs(self.s, x),
            Some(r) => eval_g_delta(self.s, r.a, r.b, r.n, x),
        }
    }

    /// `h_s^[a,b]`; for an unscaled spec this is `h_s^[0,1]` with `n = 1`.
    pub fn eval_h(&self, x: f64) -> f64 {
        let r = self.rescale.unwrap_or(Rescale { a: 0.0, b: 1.0, n: 1 });
        eval_h_delta(self.s, r.a, r.b, r.n, x)
    }
}
