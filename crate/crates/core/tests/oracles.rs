mod common;

use std::f64::consts::SQRT_2;

use approx::assert_abs_diff_eq;
use common::TestRng;
use relugen_core::metrics::{solve_discrete_ot, AtomicMeasure};
use relugen_core::relunet::{make_gs_network, NetworkFile};
use relugen_core::sawtooth::eval_gs;
use relugen_core::transport::{
    alt_intervals, build_2d_map, build_alt_2d_map, build_linewise_map, end_to_end_bound, linewise_cell,
    lower_to_network, map_cell_mass, verification_cells, wasserstein_upper_bound,
};
use relugen_core::{Cell, HistogramD, Method};

#[test]
fn ot_matches_vertex_enumeration() {
    let mut rng = TestRng::new(5);
    for _ in 0..30 {
        let (m, n) = (1 + rng.below(5), 1 + rng.below(5));
        let dim = 1 + rng.below(2);
        let (xs, a) = common::random_atoms(&mut rng, m, dim);
        let (ys, b) = common::random_atoms(&mut rng, n, dim);
        let want = common::brute_force_ot(dim, &xs, &a, &ys, &b);
        let got = solve_discrete_ot(&AtomicMeasure::new(dim, xs, a).unwrap(), &AtomicMeasure::new(dim, ys, b).unwrap())
            .unwrap()
            .cost;
        assert_abs_diff_eq!(got, want, epsilon = 1e-9);
    }
}

#[test]
fn ot_degenerate_instances() {
    // equal masses on a grid produce many ties
    let pts: Vec<f64> = (0..4).flat_map(|i| (0..4).flat_map(move |j| [i as f64 / 3.0, j as f64 / 3.0])).collect();
    let mu = AtomicMeasure::uniform(2, pts.clone()).unwrap();
    let shifted: Vec<f64> = pts.chunks(2).flat_map(|p| [p[0], 1.0 - p[1]]).collect();
    let nu = AtomicMeasure::uniform(2, shifted).unwrap();
    // reflecting y maps the grid onto itself, so nothing has to move
    let res = solve_discrete_ot(&mu, &nu).unwrap();
    assert_abs_diff_eq!(res.cost, 0.0, epsilon = 1e-12);
    let (a, b) = res.marginals(16, 16);
    for m in a.iter().chain(&b) {
        assert_abs_diff_eq!(*m, 1.0 / 16.0, epsilon = 1e-12);
    }
}

#[test]
fn linewise_cell_masses() {
    // y-weights (0.5, 1.5), n = 2, s = 4: tooth r has width 2^{-3}, each
    // y-strip of row k has height 1/16 and law density w_k, so the mass is
    // 2^{-3} * w_k / 16
    let h = HistogramD::new(2, 2, vec![0.5, 1.5, 0.5, 1.5]).unwrap();
    let s = 4;
    let map = build_linewise_map(&h, s).unwrap();
    let mut total = 0.0;
    for r in 0..8 {
        for k in 0..2 {
            for k1 in 0..8 {
                let c = linewise_cell(2, s, r, k, k1).unwrap();
                let got = map_cell_mass(&map, &c).unwrap();
                let want = 0.125 * [0.5, 1.5][k] / 16.0;
                assert_abs_diff_eq!(got, want, epsilon = 1e-12);
                total += got;
            }
        }
    }
    assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
    assert_eq!(verification_cells(Method::Linewise, 2, s).unwrap().len(), 128);
}

#[test]
fn linewise_rejects_x_dependence() {
    let h = HistogramD::new(2, 2, vec![0.5, 1.5, 1.5, 0.5]).unwrap();
    assert!(build_linewise_map(&h, 3).is_err());
}

#[test]
fn uniform_linewise_is_space_filling_curve() {
    let map = build_linewise_map(&HistogramD::uniform(2, 3), 5).unwrap();
    for k in 0..=256 {
        let x = k as f64 / 256.0;
        let (a, b) = map.eval(x);
        assert_eq!(a, x);
        assert_abs_diff_eq!(b, eval_gs(5, x), epsilon = 1e-14);
    }
}

#[test]
fn uniform_standard_map_is_tiled_sawtooth() {
    let n = 3;
    let s = 3;
    let map = build_2d_map(&HistogramD::uniform(2, n), s).unwrap();
    for k in 0..=300 {
        let x = k as f64 / 300.0;
        let (a, b) = map.eval(x);
        assert_abs_diff_eq!(a, x, epsilon = 1e-14);
        let i = ((n as f64 * x) as usize).min(n - 1);
        assert_abs_diff_eq!(b, eval_gs(s, n as f64 * x - i as f64), epsilon = 1e-12);
    }
    let m = 1u32 << (s - 1);
    let want = 1.0 / (n * n) as f64 / (m * m) as f64;
    for c in verification_cells(Method::Standard, n, s).unwrap() {
        assert_abs_diff_eq!(map_cell_mass(&map, &c).unwrap(), want, epsilon = 1e-12);
    }
}

#[test]
fn standard_map_checkerboard() {
    let h = HistogramD::new(2, 2, vec![0.5, 1.5, 1.5, 0.5]).unwrap();
    let s = 3;
    let map = build_2d_map(&h, s).unwrap();
    let cells = verification_cells(Method::Standard, 2, s).unwrap();
    assert_eq!(cells.len(), 64);
    for c in &cells {
        let got = map_cell_mass(&map, c).unwrap();
        let want = h.cell_mass(c).unwrap();
        assert_abs_diff_eq!(got, want, epsilon = 1e-12);
    }
    // n = 1 is the line-wise map of the single column
    let one = HistogramD::uniform(2, 1);
    let a = build_2d_map(&one, 4).unwrap();
    let b = build_linewise_map(&one, 4).unwrap();
    for k in 0..=64 {
        let x = k as f64 / 64.0;
        let (p, q) = (a.eval(x), b.eval(x));
        assert_abs_diff_eq!(p.0, q.0, epsilon = 1e-14);
        assert_abs_diff_eq!(p.1, q.1, epsilon = 1e-14);
    }
}

#[test]
fn identity_pair_cell_mass() {
    let h = HistogramD::uniform(2, 1);
    let map = build_linewise_map(&h, 1).unwrap();
    // s = 1: second component is the tent, first the identity
    let c = Cell::rect(0.0, 0.5, 0.0, 1.0).unwrap();
    assert_abs_diff_eq!(map_cell_mass(&map, &c).unwrap(), 0.5, epsilon = 1e-15);
    let c = Cell::rect(0.0, 0.5, 0.0, 0.5).unwrap();
    assert_abs_diff_eq!(map_cell_mass(&map, &c).unwrap(), 0.25, epsilon = 1e-15);
}

#[test]
fn alt_uniform_quarters_and_figure_shape() {
    let h = HistogramD::uniform(2, 2);
    let ivs = alt_intervals(&h).unwrap();
    for (k, (_, iv)) in ivs.iter().enumerate() {
        assert_abs_diff_eq!(iv.lo, k as f64 / 4.0, epsilon = 1e-15);
        assert_abs_diff_eq!(iv.hi, (k + 1) as f64 / 4.0, epsilon = 1e-15);
    }
    let s = 2;
    let map = build_alt_2d_map(&h, s).unwrap();
    // z = g_2 on [0,1/4], h_2 on [1/4,1/2], g_2 on [1/2,3/4] and [3/4,1],
    // each of height 1/2, with the ramp lifting everything after 1/2
    let b_tilde = 0.25 + 4.0 * 0.25 / 5.0;
    let teeth = |a: f64, b: f64, x: f64| {
        if (a..=b).contains(&x) {
            0.5 * eval_gs(s, (x - a) / (b - a))
        } else {
            0.0
        }
    };
    let ramp = |x: f64| ((x - b_tilde).max(0.0) - (x - 0.5).max(0.0)) / (2.0 * (0.5 - b_tilde));
    let z = |x: f64| teeth(0.0, 0.25, x) + teeth(0.25, b_tilde, x) + ramp(x) + teeth(0.5, 0.75, x) + teeth(0.75, 1.0, x);
    for k in 0..=640 {
        let x = k as f64 / 640.0;
        // tooth endpoints are shared by neighbouring terms; sample off them
        if (x * 4.0).fract() == 0.0 || x == b_tilde {
            continue;
        }
        assert_abs_diff_eq!(map.second().eval(x), z(x), epsilon = 1e-12);
        assert_abs_diff_eq!(map.eval_symbolic(x).1, z(x), epsilon = 1e-12);
    }
    for i in 0..2 {
        for j in 0..2 {
            let c = Cell::tile(2, &[i, j]).unwrap();
            assert_abs_diff_eq!(map_cell_mass(&map, &c).unwrap(), 0.25, epsilon = 1e-12);
        }
    }
    assert!(build_alt_2d_map(&HistogramD::uniform(2, 3), 2).is_err());
}

#[test]
fn alt_interval_widths_sum_to_one() {
    let mut rng = TestRng::new(17);
    for n in [1, 2, 4, 8] {
        let h = common::random_histogram_2d(&mut rng, n);
        let ivs = alt_intervals(&h).unwrap();
        assert_eq!(ivs.first().unwrap().1.lo, 0.0);
        assert_eq!(ivs.last().unwrap().1.hi, 1.0);
        let marg = h.marginal_x().unwrap();
        for (idx, iv) in &ivs {
            let want = h.w2(idx.x1, idx.x2) / ((n * n) as f64 * marg.weights()[idx.x1]);
            assert_abs_diff_eq!(iv.len(), want, epsilon = 1e-12);
        }
        let total: f64 = ivs.iter().map(|(_, iv)| iv.len()).sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
    }
}

#[test]
fn alt_network_matches_map() {
    let mut rng = TestRng::new(3);
    for n in [2, 4] {
        let h = common::random_histogram_2d(&mut rng, n);
        let map = build_alt_2d_map(&h, 3).unwrap();
        let net = lower_to_network(&map).unwrap();
        for k in 0..=512 {
            let x = k as f64 / 512.0;
            let out = net.eval1(x).unwrap();
            let (a, b) = map.eval(x);
            assert_abs_diff_eq!(out[0], a, epsilon = 1e-9);
            assert_abs_diff_eq!(out[1], b, epsilon = 1e-9);
        }
    }
}

#[test]
fn bound_formulas() {
    assert_abs_diff_eq!(wasserstein_upper_bound(4, 6, Method::Standard), 2.0 * SQRT_2 / 256.0, epsilon = 1e-15);
    assert_abs_diff_eq!(wasserstein_upper_bound(4, 6, Method::Standard), 0.011049, epsilon = 1e-6);
    assert_abs_diff_eq!(wasserstein_upper_bound(4, 6, Method::Linewise), 2.0 * SQRT_2 / 64.0, epsilon = 1e-15);
    assert_abs_diff_eq!(end_to_end_bound(1.0, 4, 6), SQRT_2 / 8.0 + 2.0 * SQRT_2 / 256.0, epsilon = 1e-15);
}

#[test]
fn lowered_network_sizes() {
    let col = HistogramD::from_unnormalized(2, 4, (0..16).map(|k| 1.0 + (k % 4) as f64).collect()).unwrap();
    let net = lower_to_network(&build_linewise_map(&col, 6).unwrap()).unwrap();
    assert_eq!(net.depth(), 9);
    assert!(net.connectivity() <= 170);
    let mut rng = TestRng::new(1);
    let h = common::random_histogram_2d(&mut rng, 4);
    let net = lower_to_network(&build_2d_map(&h, 6).unwrap()).unwrap();
    assert_eq!(net.depth(), 11);
    assert!(net.connectivity() <= 3520);
}

#[test]
fn network_file_round_trip_is_bit_exact() {
    let mut rng = TestRng::new(2);
    let h = common::random_histogram_2d(&mut rng, 3);
    let net = lower_to_network(&build_2d_map(&h, 4).unwrap()).unwrap();
    let text = NetworkFile::new(&net, None).to_json().unwrap();
    let back = NetworkFile::from_json(&text).unwrap().network().unwrap();
    assert_eq!(back, net);
    let gs = make_gs_network(3).unwrap();
    let back = NetworkFile::from_json(&NetworkFile::new(&gs, None).to_json().unwrap()).unwrap().network().unwrap();
    assert_eq!(back, gs);
}
