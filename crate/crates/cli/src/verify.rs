use anyhow::{Context, Result};
use relugen_core::histogram::tv_distance;
use relugen_core::metrics::empirical_wasserstein;
use relugen_core::sampler::{sample_histogram, sample_pushforward};
use relugen_core::transport::{build_map, lower_to_network, map_cell_mass, verification_cells, wasserstein_upper_bound};
use relugen_core::{Law, NetworkFile, NoiseSource, ReluNetwork, TransportMap1to2};
use serde::Serialize;

use crate::VerifyArgs;

const CELL_MASS_TOL: f64 = 1e-10;
const NETWORK_TOL: f64 = 1e-9;
const RANDOM_POINTS: usize = 4096;
/// Margin over the measured sampling floor at 2000 atoms per side, scaled as
/// `1/sqrt(atoms)` below.
const W_MARGIN: f64 = 0.01;
const W_ATOMS: usize = 2000;
const W_REPS: u64 = 3;

#[derive(Debug, Serialize)]
struct Checks {
    cell_masses: bool,
    network_matches_map: bool,
    meta_matches: bool,
    connectivity: bool,
    depth: bool,
    tv_bound: bool,
    empirical_wasserstein: bool,
}

#[derive(Debug, Serialize)]
struct Report {
    max_cell_mass_error: f64,
    cells_checked: usize,
    connectivity: usize,
    connectivity_bound: f64,
    depth: usize,
    claimed_depth: usize,
    wasserstein_bound: f64,
    method: String,
    n: usize,
    s: u32,
    network_max_deviation: f64,
    points_checked: usize,
    tv: f64,
    tv_bound: f64,
    empirical_wasserstein: f64,
    empirical_wasserstein_baseline: f64,
    empirical_wasserstein_limit: f64,
    atoms: usize,
    repetitions: u64,
    checks: Checks,
    passed: bool,
}

fn max_deviation(map: &TransportMap1to2, net: &ReluNetwork, noise: &NoiseSource) -> Result<(f64, usize)> {
    let dyadic = 1usize << (map.s() + 2).min(20);
    let grid = (0..=dyadic).map(|k| k as f64 / dyadic as f64);
    let random = (0..RANDOM_POINTS as u64).map(|i| noise.draw(i));
    let mut worst = 0.0f64;
    let mut count = 0;
    for x in grid.chain(random) {
        let out = net.eval(&[x])?;
        let (a, b) = map.eval(x);
        let e = (out[0] - a).abs().max((out[1] - b).abs());
        // NaN must not slip through as a small error
        worst = if e.is_nan() { f64::INFINITY } else { worst.max(e) };
        count += 1;
    }
    Ok((worst, count))
}

pub fn run(args: &VerifyArgs) -> Result<bool> {
    let target = args.target.resolve()?;
    let meta = target.meta();
    let map = build_map(&target.hist, target.s, target.method)?;
    let (net, meta_matches) = match &args.network {
        Some(path) => {
            let file = NetworkFile::read(path).with_context(|| format!("reading {}", path.display()))?;
            let matches = file.meta.as_ref().is_none_or(|m| m == &meta);
            (file.network()?, matches)
        }
        None => (lower_to_network(&map)?, true),
    };
    if net.input_dim() != 1 || net.output_dim() != 2 {
        anyhow::bail!("network maps R^{} to R^{}; expected R to R^2", net.input_dim(), net.output_dim());
    }

    let cells = verification_cells(target.method, target.n, target.s)?;
    let mut max_cell_mass_error = 0.0f64;
    for cell in &cells {
        let e = (map_cell_mass(&map, cell)? - target.hist.cell_mass(cell)?).abs();
        max_cell_mass_error = max_cell_mass_error.max(e);
    }

    let noise = NoiseSource::new(args.seed);
    let (network_max_deviation, points_checked) = max_deviation(&map, &net, &noise.derive(2))?;

    let tv = tv_distance(Law::Density(&target.spec), Law::Histogram(&target.hist))?;
    let tv_bound = target.spec.lipschitz() * std::f64::consts::SQRT_2 / (2.0 * target.n as f64);

    // Two samples of the same law sit a floor apart in W, so the generated
    // sample is judged against a histogram-vs-histogram baseline.
    let count = args.count.max(1);
    let atoms = count.min(W_ATOMS);
    let (mut w, mut baseline) = (0.0, 0.0);
    for r in 0..W_REPS {
        let generated = sample_pushforward(&noise.derive(0).derive(r), &net, count)?;
        let direct = sample_histogram(&noise.derive(1).derive(r), &target.hist, count);
        let reference = sample_histogram(&noise.derive(3).derive(r), &target.hist, count);
        let sub = noise.derive(4).derive(r).seed();
        w += empirical_wasserstein(&generated, &direct, atoms, sub)? / W_REPS as f64;
        baseline += empirical_wasserstein(&reference, &direct, atoms, sub)? / W_REPS as f64;
    }
    let wasserstein_bound = wasserstein_upper_bound(target.n, target.s, target.method);
    let limit = wasserstein_bound + baseline + W_MARGIN * (W_ATOMS as f64 / atoms as f64).sqrt();

    let checks = Checks {
        cell_masses: max_cell_mass_error <= CELL_MASS_TOL,
        network_matches_map: network_max_deviation <= NETWORK_TOL,
        meta_matches,
        connectivity: net.connectivity() as f64 <= meta.claimed_connectivity_bound,
        depth: net.depth() == meta.claimed_depth,
        tv_bound: tv <= tv_bound + 1e-12,
        empirical_wasserstein: w <= limit,
    };
    let passed = checks.cell_masses
        && checks.network_matches_map
        && checks.meta_matches
        && checks.connectivity
        && checks.depth
        && checks.tv_bound
        && checks.empirical_wasserstein;
    let report = Report {
        max_cell_mass_error,
        cells_checked: cells.len(),
        connectivity: net.connectivity(),
        connectivity_bound: meta.claimed_connectivity_bound,
        depth: net.depth(),
        claimed_depth: meta.claimed_depth,
        wasserstein_bound,
        method: target.method.to_string(),
        n: target.n,
        s: target.s,
        network_max_deviation,
        points_checked,
        tv,
        tv_bound,
        empirical_wasserstein: w,
        empirical_wasserstein_baseline: baseline,
        empirical_wasserstein_limit: limit,
        atoms,
        repetitions: W_REPS,
        checks,
        passed,
    };
    let json = serde_json::to_string_pretty(&report)?;
    match &args.out {
        Some(path) => {
            std::fs::write(path, json + "\n").with_context(|| format!("writing {}", path.display()))?;
            summarize(&report);
        }
        None => println!("{json}"),
    }
    Ok(passed)
}

fn summarize(r: &Report) {
    let mark = |ok: bool| if ok { "ok  " } else { "FAIL" };
    let c = &r.checks;
    println!("{} cell masses      max error {:.2e} over {} cells", mark(c.cell_masses), r.max_cell_mass_error, r.cells_checked);
    println!("{} network vs map   max deviation {:.2e} at {} points", mark(c.network_matches_map), r.network_max_deviation, r.points_checked);
    println!("{} metadata", mark(c.meta_matches));
    println!("{} connectivity     {} <= {}", mark(c.connectivity), r.connectivity, r.connectivity_bound);
    println!("{} depth            {} == {}", mark(c.depth), r.depth, r.claimed_depth);
    println!("{} quantization TV  {:.3e} <= {:.3e}", mark(c.tv_bound), r.tv, r.tv_bound);
    println!(
        "{} empirical W      {:.4} <= {:.4} (bound {:.4} + baseline {:.4} + margin)",
        mark(c.empirical_wasserstein),
        r.empirical_wasserstein,
        r.empirical_wasserstein_limit,
        r.wasserstein_bound,
        r.empirical_wasserstein_baseline
    );
    println!("{}", if r.passed { "verification passed" } else { "verification FAILED" });
}
