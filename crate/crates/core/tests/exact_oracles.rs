use approx::assert_relative_eq;
use z2higgs::exact::{
    centered_line, exact_z_ratio, exact_z_ratio_closed, exact_z_ratio_ising, wilson_line, ActionConvention,
    ExactOptions, ModelParams,
};
use z2higgs::lattice::{BoxSpec, Lattice};
use z2higgs::polymer::PathPolymer;

fn params(ext: &[(i32, i32)], beta: f64, kappa: f64) -> ModelParams {
    ModelParams::new(BoxSpec::new(ext.to_vec()).unwrap(), beta, kappa).unwrap()
}

/// Direct sum over all edge configurations with weight
/// `exp(-4 beta #frustrated - 4 kappa #negative)`.
fn brute_force(lat: &Lattice, beta: f64, kappa: f64, gamma: &[u32]) -> f64 {
    let ne = lat.n_edges();
    assert!(ne <= 20);
    let plaq: Vec<u32> =
        (0..lat.n_plaquettes()).map(|p| lat.plaquette_edges(p).fold(0u32, |m, e| m | 1 << e)).collect();
    let gmask = gamma.iter().fold(0u32, |m, &e| m | 1 << e);
    let (mut z0, mut zg) = (0.0, 0.0);
    for s in 0u32..1 << ne {
        let frustrated = plaq.iter().filter(|&&m| (s & m).count_ones() % 2 == 1).count();
        let w = (-4.0 * beta * frustrated as f64 - 4.0 * kappa * s.count_ones() as f64).exp();
        z0 += w;
        zg += if (s & gmask).count_ones() % 2 == 0 { w } else { -w };
    }
    zg / z0
}

fn opts() -> ExactOptions {
    ExactOptions::default()
}

#[test]
fn matches_direct_sum() {
    for ext in [vec![(0, 3), (0, 1)], vec![(0, 1), (0, 1), (0, 1)], vec![(0, 2), (0, 2)]] {
        let p0 = params(&ext, 0.0, 0.0);
        let lat = Lattice::new(&p0.bx);
        let m = lat.m();
        let mut lines = vec![centered_line(&lat, 1, 0).unwrap()];
        let origin = vec![0; m];
        lines.push(PathPolymer::straight_line(&lat, &origin, 0, 1).unwrap());
        lines.push(PathPolymer::straight_line(&lat, &origin, 1, 1).unwrap());
        let corner = [lat.edge_index(&origin, 0).unwrap(), lat.edge_index(&origin, 1).unwrap()];
        lines.push(PathPolymer::from_edges(&lat, corner).unwrap());
        if lat.box_spec().hi(0) >= 2 {
            lines.push(centered_line(&lat, 2, 0).unwrap());
        }
        for (beta, kappa) in [(0.3, 0.1), (1.0, 0.05), (0.2, 0.4), (0.0, 0.25)] {
            let p = params(&ext, beta, kappa);
            for g in &lines {
                let got = exact_z_ratio(&p, g, opts()).unwrap().ratio;
                let want = brute_force(&lat, beta, kappa, g.edges());
                assert!((got - want).abs() < 1e-12, "{ext:?} beta {beta} kappa {kappa}: {got} vs {want}");
            }
        }
    }
}

#[test]
fn chain_factorises() {
    // No plaquettes: edges are independent and each contributes tanh(2 kappa).
    for len in [3, 6] {
        let ext = [(0, len), (0, 0)];
        for kappa in [0.05, 0.3] {
            let p = params(&ext, 0.7, kappa);
            let lat = Lattice::new(&p.bx);
            for n in 1..=len as usize {
                let g = PathPolymer::straight_line(&lat, &[0, 0], 0, n).unwrap();
                let got = exact_z_ratio(&p, &g, opts()).unwrap().ratio;
                assert_relative_eq!(got, (2.0 * kappa).tanh().powi(n as i32), max_relative = 1e-12);
            }
        }
    }
}

#[test]
fn single_plaquette_loop_without_matter() {
    let p = params(&[(0, 1), (0, 1)], 0.4, 0.0);
    let lat = Lattice::new(&p.bx);
    let g = PathPolymer::from_edges(&lat, lat.plaquette_edges(0)).unwrap();
    assert_relative_eq!(exact_z_ratio(&p, &g, opts()).unwrap().ratio, (0.8f64).tanh(), max_relative = 1e-12);
    let q = p.clone().with_convention(ActionConvention::PositiveCells);
    assert_relative_eq!(exact_z_ratio(&q, &g, opts()).unwrap().ratio, (0.4f64).tanh(), max_relative = 1e-12);
}

#[test]
fn golden_value() {
    let p = params(&[(0, 3), (0, 1)], 0.5, 0.1);
    let lat = Lattice::new(&p.bx);
    let g = centered_line(&lat, 3, 0).unwrap();
    let r = exact_z_ratio(&p, &g, opts()).unwrap();
    let want = brute_force(&lat, 0.5, 0.1, g.edges());
    assert!((r.ratio - want).abs() < 1e-14);
    assert!((r.ratio - 0.008_828_892_588_553).abs() < 1e-12, "{}", r.ratio);
}

#[test]
fn zero_kappa_kills_open_lines() {
    for beta in [0.0, 0.5, 2.0] {
        let p = params(&[(0, 3), (0, 1)], beta, 0.0);
        let lat = Lattice::new(&p.bx);
        for n in 1..=3 {
            let r = exact_z_ratio(&p, &centered_line(&lat, n, 0).unwrap(), opts()).unwrap();
            assert_eq!(r.ratio, 0.0);
        }
    }
}

#[test]
fn reflection_symmetry() {
    let p = params(&[(0, 3), (0, 1)], 0.6, 0.15);
    let lat = Lattice::new(&p.bx);
    for (x, n) in [(0, 1), (1, 2), (0, 3)] {
        let bottom = PathPolymer::straight_line(&lat, &[x, 0], 0, n).unwrap();
        let top = PathPolymer::straight_line(&lat, &[x, 1], 0, n).unwrap();
        let mirror = PathPolymer::straight_line(&lat, &[3 - x - n as i32, 0], 0, n).unwrap();
        let r = |g: &PathPolymer| exact_z_ratio(&p, g, opts()).unwrap().ratio;
        assert_relative_eq!(r(&bottom), r(&top), max_relative = 1e-12);
        assert_relative_eq!(r(&bottom), r(&mirror), max_relative = 1e-12);
    }
}

#[test]
fn decreasing_in_length_and_bounded() {
    let p = params(&[(0, 5), (0, 1)], 0.8, 0.2);
    let w: Vec<f64> = (1..=4).map(|n| wilson_line(&p, n, opts()).unwrap()).collect();
    assert!(w.iter().all(|&x| x > 0.0 && x < 1.0));
    assert!(w.windows(2).all(|v| v[1] < v[0]), "{w:?}");
    assert_eq!(wilson_line(&p, 0, opts()).unwrap(), 1.0);
}

#[test]
fn infinite_beta_is_the_ising_model() {
    let bx = [(0, 2), (0, 1)];
    for kappa in [0.05, 0.2] {
        let p = params(&bx, f64::INFINITY, kappa);
        let lat = Lattice::new(&p.bx);
        let g = PathPolymer::straight_line(&lat, &[0, 0], 0, 2).unwrap();
        let closed = exact_z_ratio_closed(&p, &g, opts()).unwrap().ratio;
        let ising = exact_z_ratio_ising(&p, &[0, 0], &[2, 0], opts()).unwrap();
        assert_relative_eq!(closed, ising, max_relative = 1e-12);
        // Large finite beta approaches the same value.
        let near = exact_z_ratio(&params(&bx, 4.0, kappa), &g, opts()).unwrap().ratio;
        assert!((near - closed).abs() < 1e-5, "{near} vs {closed}");
        assert!(exact_z_ratio(&p, &g, opts()).is_err());
    }
}

#[test]
fn budget_is_enforced() {
    let p = params(&[(0, 4), (0, 4)], 0.5, 0.1);
    let lat = Lattice::new(&p.bx);
    let g = centered_line(&lat, 2, 0).unwrap();
    assert!(exact_z_ratio(&p, &g, opts()).is_err());
}
