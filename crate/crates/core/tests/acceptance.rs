//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::TestRng;
use relugen_core::histogram::{quantize_density, tv_distance, Builtin, Law};
use relugen_core::metrics::{empirical_wasserstein, gibbs_bound_check, solve_discrete_ot, wasserstein_1d, AtomicMeasure};
use relugen_core::pwl::{build_inverse_cdf_pwl, pushforward_pwl};
use relugen_core::relunet::{make_g_network, make_gs_network};
use relugen_core::sampler::{sample_histogram, sample_pushforward};
use relugen_core::sawtooth::{eval_g, eval_gs, gs_decomposition_term, h_breakpoint};
use relugen_core::transport::{
    build_2d_map, build_alt_2d_map, build_linewise_map, claimed_connectivity_bound, lower_to_network, map_cell_mass,
    standard_cell, wasserstein_upper_bound,
};
use relugen_core::{Cell, DensitySpec, HistogramD, Method, NoiseSource, ReluNetwork, TransportMap1to2};

type Outcome = Result<String, String>;

/// Tolerances and sizes, pinned.
const FUNCTIONAL_TOL: f64 = 1e-9;
const FUNCTIONAL_RANDOM_POINTS: usize = 10_000;
const MASS_TOL: f64 = 1e-10;
const MASS_HISTOGRAMS: usize = 20;
const W_SAMPLES: usize = 10_000;
const W_ATOMS: usize = 2000;
const W_SEEDS: [u64; 5] = [1, 2, 3, 4, 5];
const W_SLACK: f64 = 0.02;
const ROUND_TRIP_TOL: f64 = 1e-12;
const ROUND_TRIP_CASES: usize = 200;
const DECOMP_TOL: f64 = 1e-12;
const DECOMP_RANDOM_POINTS: usize = 100_000;
const GIBBS_PAIRS: usize = 50;
const ALT_RATIO: f64 = 0.6;
/// deviations this small count as already converged
const ALT_FLOOR: f64 = 1e-12;
const OT_CASES: usize = 50;
const OT_TOL: f64 = 1e-9;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err(e: relugen_core::Error) -> String {
    e.to_string()
}

fn random_histogram(rng: &mut TestRng, n: usize) -> HistogramD {
    common::random_histogram_2d(rng, n)
}

/// Weights depending on the row only.
fn random_row_histogram(rng: &mut TestRng, n: usize) -> HistogramD {
    let rows: Vec<f64> = (0..n).map(|_| rng.range(0.2, 2.0)).collect();
    let raw = (0..n).flat_map(|_| rows.iter().copied()).collect();
    HistogramD::from_unnormalized(2, n, raw).unwrap()
}

fn c1_network_sizes() -> Outcome {
    for s in 1..=12u32 {
        let net = make_gs_network(s).map_err(err)?;
        let want = 11 * s as usize - 3;
        ensure(net.connectivity() == want, || format!("s={s}: connectivity {} != {want}", net.connectivity()))?;
        ensure(net.depth() == s as usize + 1, || format!("s={s}: depth {} != {}", net.depth(), s + 1))?;
    }
    let g = make_g_network();
    ensure(g.connectivity() == 8, || format!("g: connectivity {} != 8", g.connectivity()))?;
    Ok("g_s: 11s-3 weights, depth s+1 for s = 1..12; g: 8 weights".into())
}

fn linewise_configs() -> Vec<(usize, u32)> {
    [2, 4, 8].into_iter().flat_map(|n| [3, 6].map(|s| (n, s))).collect()
}

fn standard_configs() -> Vec<(usize, u32)> {
    [2, 4, 8].into_iter().flat_map(|n| [4, 8].map(|s| (n, s))).collect()
}

fn c2_linewise_bounds() -> Outcome {
    let mut rng = TestRng::new(200);
    let mut worst = 0.0f64;
    for (n, s) in linewise_configs() {
        let net = lower_to_network(&build_linewise_map(&random_row_histogram(&mut rng, n), s).map_err(err)?).map_err(err)?;
        let bound = claimed_connectivity_bound(Method::Linewise, n, s);
        ensure(net.depth() == s as usize + 3, || format!("n={n} s={s}: depth {}", net.depth()))?;
        ensure(net.connectivity() as f64 <= bound, || format!("n={n} s={s}: connectivity {} > {bound}", net.connectivity()))?;
        worst = worst.max(net.connectivity() as f64 / bound);
    }
    Ok(format!("depth s+3 everywhere; max connectivity / bound = {worst:.3}"))
}

fn c3_standard_bounds() -> Outcome {
    let mut rng = TestRng::new(300);
    let mut worst = 0.0f64;
    for (n, s) in standard_configs() {
        let net = lower_to_network(&build_2d_map(&random_histogram(&mut rng, n), s).map_err(err)?).map_err(err)?;
        let bound = claimed_connectivity_bound(Method::Standard, n, s);
        ensure(net.depth() == s as usize + 5, || format!("n={n} s={s}: depth {}", net.depth()))?;
        ensure(net.connectivity() as f64 <= bound, || format!("n={n} s={s}: connectivity {} > {bound}", net.connectivity()))?;
        worst = worst.max(net.connectivity() as f64 / bound);
    }
    Ok(format!("depth s+5 everywhere; max connectivity / bound = {worst:.3}"))
}

fn max_functional_error(map: &TransportMap1to2, net: &ReluNetwork, rng: &mut TestRng) -> Result<f64, String> {
    let dyadic = 1usize << (map.s() + 2);
    let points = (0..=dyadic).map(|k| k as f64 / dyadic as f64).chain((0..FUNCTIONAL_RANDOM_POINTS).map(|_| rng.uniform()));
    let mut worst = 0.0f64;
    for x in points {
        let out = net.eval1(x).map_err(err)?;
        let (a, b) = map.eval_symbolic(x);
        worst = worst.max((out[0] - a).abs()).max((out[1] - b).abs());
    }
    Ok(worst)
}

fn c4_functional_equality() -> Outcome {
    let mut rng = TestRng::new(400);
    let mut worst = 0.0f64;
    let mut maps = Vec::new();
    for (n, s) in linewise_configs() {
        maps.push(build_linewise_map(&random_row_histogram(&mut rng, n), s).map_err(err)?);
    }
    for (n, s) in standard_configs() {
        maps.push(build_2d_map(&random_histogram(&mut rng, n), s).map_err(err)?);
    }
    for map in &maps {
        let net = lower_to_network(map).map_err(err)?;
        let e = max_functional_error(map, &net, &mut rng)?;
        ensure(e <= FUNCTIONAL_TOL, || format!("{} n={} s={}: error {e:e}", map.method(), map.n(), map.s()))?;
        worst = worst.max(e);
    }
    Ok(format!("{} maps, max |network - map| = {worst:.2e}", maps.len()))
}

fn c5_mass_matching() -> Outcome {
    let mut rng = TestRng::new(500);
    let mut worst = 0.0f64;
    let mut cells = 0usize;
    for n in [2, 4] {
        for s in [2u32, 4, 6] {
            let m = 1usize << (s - 1);
            let denom = (m * m * n * n) as f64;
            for _ in 0..MASS_HISTOGRAMS {
                let h = random_histogram(&mut rng, n);
                let map = build_2d_map(&h, s).map_err(err)?;
                for r in 0..n {
                    for r1 in 0..m {
                        for k in 0..n {
                            for k1 in 0..m {
                                let c = standard_cell(n, s, r, r1, k, k1).map_err(err)?;
                                let e = (map_cell_mass(&map, &c).map_err(err)? - h.w2(r, k) / denom).abs();
                                ensure(e <= MASS_TOL, || format!("n={n} s={s} cell ({r},{r1},{k},{k1}): error {e:e}"))?;
                                worst = worst.max(e);
                                cells += 1;
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(format!("{cells} cells, max error {worst:.2e}"))
}

fn c6_wasserstein() -> Outcome {
    let (n, s) = (4, 6);
    let bump = DensitySpec::from_builtin(Builtin::CosineBump { alpha: 0.5 });
    let h = quantize_density(&bump, n).map_err(err)?;
    let net = lower_to_network(&build_2d_map(&h, s).map_err(err)?).map_err(err)?;
    let limit = wasserstein_upper_bound(n, s, Method::Standard) + W_SLACK;
    let mut values = Vec::new();
    for seed in W_SEEDS {
        let base = NoiseSource::new(seed);
        let generated = sample_pushforward(&base.derive(0), &net, W_SAMPLES).map_err(err)?;
        let direct = sample_histogram(&base.derive(1), &h, W_SAMPLES);
        let w = empirical_wasserstein(&generated, &direct, W_ATOMS, seed).map_err(err)?;
        ensure(w <= limit, || format!("seed {seed}: W = {w:.5} > {limit:.5}"))?;
        values.push(w);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let max = values.iter().copied().fold(0.0, f64::max);
    Ok(format!("W mean {mean:.5}, max {max:.5} <= {limit:.5}"))
}

fn c7_quantization() -> Outcome {
    let cases = [
        ("ramp", DensitySpec::from_builtin(Builtin::Ramp { dim: 1 })),
        ("cosine_bump", DensitySpec::from_builtin(Builtin::CosineBump { alpha: 0.5 })),
    ];
    let mut summary = Vec::new();
    for (name, spec) in &cases {
        let d = spec.dim() as f64;
        let mut last = f64::INFINITY;
        for n in [4, 8, 16] {
            let q = quantize_density(spec, n).map_err(err)?;
            let tv = tv_distance(Law::Density(spec), Law::Histogram(&q)).map_err(err)?;
            let bound = spec.lipschitz() * d.sqrt() / (2.0 * n as f64);
            ensure(tv <= bound, || format!("{name} n={n}: TV {tv:.3e} > {bound:.3e}"))?;
            ensure(tv < last, || format!("{name} n={n}: TV {tv:.3e} not below {last:.3e}"))?;
            last = tv;
            summary.push(format!("{name}/{n}: {tv:.2e}"));
        }
    }
    Ok(summary.join(", "))
}

fn c8_round_trip() -> Outcome {
    let mut rng = TestRng::new(800);
    let (mut worst_w, mut worst_d) = (0.0f64, 0.0f64);
    for case in 0..ROUND_TRIP_CASES {
        let pieces = 1 + rng.below(16);
        let g = if case % 2 == 0 {
            common::random_general(&mut rng, pieces)
        } else {
            common::random_histogram_1d(&mut rng, pieces).to_general().map_err(err)?
        };
        let back = pushforward_pwl(&build_inverse_cdf_pwl(&g).map_err(err)?).map_err(err)?;
        ensure(back.breakpoints() == g.breakpoints(), || format!("case {case}: breakpoints differ"))?;
        for (a, b) in back.weights().iter().zip(g.weights()) {
            worst_w = worst_w.max((a - b).abs());
        }
        worst_d = worst_d.max(wasserstein_1d(&back, &g));
        ensure(worst_w <= ROUND_TRIP_TOL && worst_d <= ROUND_TRIP_TOL, || {
            format!("case {case}: weight error {worst_w:e}, W {worst_d:e}")
        })?;
    }
    Ok(format!("max weight error {worst_w:.2e}, max W {worst_d:.2e}"))
}

fn c9_decomposition() -> Outcome {
    let mut rng = TestRng::new(900);
    let mut worst = 0.0f64;
    for s in 1..=12u32 {
        let teeth = 1u64 << (s - 1);
        let check_support = |x: f64| -> Result<(), String> {
            for k in 0..teeth {
                let t = gs_decomposition_term(s, k, x);
                let inside = x > k as f64 / teeth as f64 && x < (k + 1) as f64 / teeth as f64;
                ensure(inside || t == 0.0, || format!("s={s} k={k}: term {t} at x={x} outside support"))?;
            }
            Ok(())
        };
        let sum = |x: f64| -> f64 {
            // only the tooth containing x and its neighbours can be nonzero
            let k0 = (x * teeth as f64) as u64;
            (k0.saturating_sub(1)..(k0 + 2).min(teeth)).map(|k| gs_decomposition_term(s, k, x)).sum()
        };
        let dyadic = 1u64 << (s + 2);
        for j in 0..=dyadic {
            let x = j as f64 / dyadic as f64;
            ensure(sum(x) == eval_gs(s, x), || format!("s={s}: inexact at dyadic {x}"))?;
            if s <= 8 {
                check_support(x)?;
            }
        }
        for _ in 0..DECOMP_RANDOM_POINTS {
            let x = rng.uniform();
            let e = (sum(x) - eval_gs(s, x)).abs();
            ensure(e <= DECOMP_TOL, || format!("s={s}: error {e:e} at {x}"))?;
            worst = worst.max(e);
        }
        for _ in 0..200 {
            check_support(rng.uniform())?;
        }
    }
    Ok(format!("exact at dyadics, max random error {worst:.2e}"))
}

fn c10_gibbs() -> Outcome {
    let mut rng = TestRng::new(1000);
    let mut slack = f64::INFINITY;
    for pair in 0..GIBBS_PAIRS {
        let (pa, pb) = (1 + rng.below(10), 1 + rng.below(10));
        let a = common::random_general(&mut rng, pa);
        let b = common::random_general(&mut rng, pb);
        let r = gibbs_bound_check(Law::General(&a), Law::General(&b), 1.0).map_err(err)?;
        ensure(r.exact && r.wasserstein <= r.bound, || {
            format!("pair {pair}: W {} > diam * TV {}", r.wasserstein, r.bound)
        })?;
        slack = slack.min(r.bound - r.wasserstein);
    }
    Ok(format!("0 violations in {GIBBS_PAIRS} pairs, smallest slack {slack:.2e}"))
}

/// Largest tile mass error of the alt map.
fn alt_deviation(h: &HistogramD, s: u32) -> Result<f64, String> {
    let n = h.n();
    let map = build_alt_2d_map(h, s).map_err(err)?;
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let c = Cell::tile(n, &[i, j]).map_err(err)?;
            let want = h.w2(i, j) / (n * n) as f64;
            worst = worst.max((map_cell_mass(&map, &c).map_err(err)? - want).abs());
        }
    }
    Ok(worst)
}

fn figure_shape() -> Result<(), String> {
    // n = 2, uniform, s = 2: z is two teeth of height 1/2 on each quarter,
    // compressed on [1/4, b~] and followed by a ramp on [b~, 1/2]
    let map = build_alt_2d_map(&HistogramD::uniform(2, 2), 2).map_err(err)?;
    let bt = 0.25 + 4.0 * 0.25 / 5.0;
    ensure((h_breakpoint(2, 0.25, 0.5) - bt).abs() <= 1e-15, || "wrong compressed breakpoint".into())?;
    let mut grid = Vec::new();
    let quarter = |lo: f64, hi: f64, level: f64, grid: &mut Vec<(f64, f64)>| {
        for j in 0..4 {
            grid.push((lo + (hi - lo) * j as f64 / 4.0, level + if j % 2 == 1 { 0.5 } else { 0.0 }));
        }
    };
    quarter(0.0, 0.25, 0.0, &mut grid);
    quarter(0.25, bt, 0.0, &mut grid);
    grid.push((bt, 0.0));
    quarter(0.5, 0.75, 0.5, &mut grid);
    quarter(0.75, 1.0, 0.5, &mut grid);
    grid.push((1.0, 0.5));
    let knots = map.second().knots();
    ensure(knots.len() == grid.len(), || format!("{} knots, expected {}", knots.len(), grid.len()))?;
    for (&(x, y), (&k, &v)) in grid.iter().zip(knots.iter().zip(map.second().values())) {
        ensure((k - x).abs() <= 1e-15 && v == y, || format!("knot ({k}, {v}) != ({x}, {y})"))?;
        let z = map.eval_symbolic(x).1;
        ensure((z - y).abs() <= 1e-15, || format!("defining formula gives z({x}) = {z}, expected {y}"))?;
        // first coordinate: f_marg is the identity, so f_marg(g(x)) = g(x)
        ensure(map.first().eval(x) == eval_g(x), || format!("first coordinate wrong at {x}"))?;
    }
    Ok(())
}

fn c11_alt_method() -> Outcome {
    figure_shape()?;
    let mut rng = TestRng::new(1100);
    let mut lines = Vec::new();
    let mut failures = Vec::new();
    for n in [2, 4] {
        for (label, h) in [("uniform", HistogramD::uniform(2, n)), ("random", random_histogram(&mut rng, n))] {
            let devs = (2..=8).map(|s| alt_deviation(&h, s)).collect::<Result<Vec<_>, _>>()?;
            let halving = devs.windows(2).all(|w| w[1] <= ALT_FLOOR || w[1] <= ALT_RATIO * w[0]);
            let shown: Vec<String> = devs.iter().map(|d| format!("{d:.2e}")).collect();
            lines.push(format!("n={n} {label}: [{}]", shown.join(" ")));
            if !halving {
                failures.push(format!("n={n} {label}"));
            }
        }
    }
    if failures.is_empty() {
        Ok(format!("figure shape exact; {}", lines.join("; ")))
    } else {
        Err(format!("deviation does not halve for {}; {}", failures.join(", "), lines.join("; ")))
    }
}

fn c12_ot_oracle() -> Outcome {
    let mut rng = TestRng::new(1200);
    let mut worst = 0.0f64;
    for case in 0..OT_CASES {
        let m = 1 + rng.below(5);
        let n = 1 + rng.below(5);
        let dim = 1 + rng.below(2);
        let (xs, a) = common::random_atoms(&mut rng, m, dim);
        let (ys, b) = common::random_atoms(&mut rng, n, dim);
        let want = common::brute_force_ot(dim, &xs, &a, &ys, &b);
        let mu = AtomicMeasure::new(dim, xs, a).map_err(err)?;
        let nu = AtomicMeasure::new(dim, ys, b).map_err(err)?;
        let got = solve_discrete_ot(&mu, &nu).map_err(err)?.cost;
        let e = (got - want).abs();
        ensure(e <= OT_TOL, || format!("case {case} ({m}x{n}, d={dim}): {got} vs {want}"))?;
        worst = worst.max(e);
    }
    Ok(format!("{OT_CASES} instances, max |solver - enumeration| = {worst:.2e}"))
}

fn main() -> ExitCode {
    let criteria: [(&str, u64, fn() -> Outcome); 12] = [
        ("network-size formulas", 1, c1_network_sizes),
        ("line-wise depth and connectivity", 1, c2_linewise_bounds),
        ("standard depth and connectivity", 5, c3_standard_bounds),
        ("network equals symbolic map", 30, c4_functional_equality),
        ("cell mass matching", 60, c5_mass_matching),
        ("empirical Wasserstein within bound", 120, c6_wasserstein),
        ("quantization TV bound", 10, c7_quantization),
        ("inverse-CDF round trip", 5, c8_round_trip),
        ("sawtooth decomposition identities", 5, c9_decomposition),
        ("W <= diam * TV", 5, c10_gibbs),
        ("alternative method convergence", 30, c11_alt_method),
        ("OT solver vs vertex enumeration", 10, c12_ot_oracle),
    ];
    let mut failed = 0;
    for (k, (name, limit, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if elapsed > Duration::from_secs(*limit) => {
                Err(format!("{detail}; took {:.2}s, limit {limit}s", elapsed.as_secs_f64()))
            }
            other => other,
        };
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        if outcome.is_err() {
            failed += 1;
        }
        println!("{tag} [{:>2}] {name} ({:.2}s): {detail}", k + 1, elapsed.as_secs_f64());
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
