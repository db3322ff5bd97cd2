use std::collections::BTreeSet;

use fixedbitset::FixedBitSet;
use z2higgs::lattice::{BoxSpec, Lattice};
use z2higgs::polymer::dump::{dump_paths, dump_vortices};
use z2higgs::polymer::{
    enumerate_closed_paths, enumerate_connecting_paths, enumerate_vortices, interaction_zeta, path_adjacent,
    surface_z2, vortex_adjacent, DirectSurfaces, EdgeFilter, EnumLimits, PathPolymer, Polymer, SurfaceConstruction,
    VortexPolymer, VortexQuery,
};

fn lattice(ext: &[(i32, i32)]) -> Lattice {
    Lattice::new(&BoxSpec::new(ext.to_vec()).unwrap())
}

/// Calls `f` on every subset of `0..n` with at most `max` elements.
fn subsets(n: usize, max: usize, f: &mut dyn FnMut(&[usize])) {
    fn go(start: usize, n: usize, left: usize, cur: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        if !cur.is_empty() {
            f(cur);
        }
        if left == 0 {
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, left - 1, cur, f);
            cur.pop();
        }
    }
    go(0, n, max, &mut Vec::new(), f);
}

/// Connectivity of `items` where `touch(a, b)` says two items are neighbours.
fn is_connected(items: &[usize], touch: impl Fn(usize, usize) -> bool) -> bool {
    let mut seen = vec![false; items.len()];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(i) = stack.pop() {
        for j in 0..items.len() {
            if !seen[j] && touch(items[i], items[j]) {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

fn share_vertex(lat: &Lattice, a: usize, b: usize) -> bool {
    let (a0, a1) = lat.endpoints(a);
    let (b0, b1) = lat.endpoints(b);
    a0 == b0 || a0 == b1 || a1 == b0 || a1 == b1
}

fn odd_vertices(lat: &Lattice, edges: impl Iterator<Item = usize>) -> Vec<usize> {
    let mut deg = vec![0u8; lat.n_vertices()];
    for e in edges {
        let (a, b) = lat.endpoints(e);
        deg[a] ^= 1;
        deg[b] ^= 1;
    }
    (0..deg.len()).filter(|&v| deg[v] == 1).collect()
}

fn edge_sets(paths: &[PathPolymer]) -> BTreeSet<Vec<u32>> {
    paths.iter().map(|p| p.edges().to_vec()).collect()
}

fn brute_closed(lat: &Lattice, max_len: usize) -> BTreeSet<Vec<u32>> {
    let mut out = BTreeSet::new();
    subsets(lat.n_edges(), max_len, &mut |s| {
        if odd_vertices(lat, s.iter().copied()).is_empty() && is_connected(s, |a, b| share_vertex(lat, a, b)) {
            out.insert(s.iter().map(|&e| e as u32).collect());
        }
    });
    out
}

#[test]
fn closed_paths_match_subset_scan() {
    for (ext, max_len) in [
        (vec![(0, 2), (0, 2)], 4),
        (vec![(0, 2), (0, 2)], 8),
        (vec![(0, 3), (0, 2)], 6),
        (vec![(0, 1), (0, 1), (0, 1)], 12),
        (vec![(0, 2), (0, 1), (0, 1)], 6),
    ] {
        let lat = lattice(&ext);
        let got = enumerate_closed_paths(&lat, max_len, &EdgeFilter::all(), EnumLimits::default()).unwrap();
        assert_eq!(edge_sets(&got), brute_closed(&lat, max_len), "{ext:?} up to {max_len}");
        assert!(got.windows(2).all(|w| (w[0].len(), w[0].edges()) < (w[1].len(), w[1].edges())));
        for p in &got {
            assert!(p.is_closed(&lat) && p.is_connected(&lat));
        }
    }
    let lat = lattice(&[(0, 2), (0, 2)]);
    assert_eq!(enumerate_closed_paths(&lat, 4, &EdgeFilter::all(), EnumLimits::default()).unwrap().len(), 4);
    assert!(enumerate_closed_paths(&lat, 3, &EdgeFilter::all(), EnumLimits::default()).unwrap().is_empty());
}

#[test]
fn connecting_paths_match_subset_scan() {
    let lat = lattice(&[(0, 3), (0, 2)]);
    let e = |x: [i32; 2], d| lat.edge_index(&x, d).unwrap();
    let lines = [
        PathPolymer::straight_line(&lat, &[0, 1], 0, 2).unwrap(),
        PathPolymer::straight_line(&lat, &[1, 0], 1, 1).unwrap(),
        PathPolymer::from_edges(&lat, [e([0, 0], 0), e([1, 0], 1)]).unwrap(),
    ];
    for gn in &lines {
        for max_len in [gn.len(), gn.len() + 2, 7] {
            let got = enumerate_connecting_paths(&lat, gn, max_len, &EdgeFilter::all(), EnumLimits::default()).unwrap();
            let target = gn.odd_vertices(&lat);
            let mut want = BTreeSet::new();
            subsets(lat.n_edges(), max_len, &mut |s| {
                if odd_vertices(&lat, s.iter().copied()) == target && is_connected(s, |a, b| share_vertex(&lat, a, b)) {
                    want.insert(s.iter().map(|&e| e as u32).collect::<Vec<_>>());
                }
            });
            assert_eq!(edge_sets(&got), want, "gamma_n {:?} up to {max_len}", gn.edges());
        }
        let short =
            enumerate_connecting_paths(&lat, gn, gn.len() - 1, &EdgeFilter::all(), EnumLimits::default()).unwrap();
        assert!(short.is_empty());
    }
}

fn brute_vortices(lat: &Lattice, max_support: usize) -> BTreeSet<Vec<u32>> {
    let np = lat.n_plaquettes();
    let mut out = BTreeSet::new();
    subsets(np, max_support, &mut |s| {
        let mut parity = vec![0u8; lat.n_cells(3)];
        for &p in s {
            for &(c, _) in lat.coboundary_of(2, p) {
                parity[c as usize] ^= 1;
            }
        }
        if parity.contains(&1) {
            return;
        }
        let on_common_cube = |a: usize, b: usize| {
            lat.coboundary_of(2, a).iter().any(|&(c, _)| lat.coboundary_of(2, b).iter().any(|&(d, _)| c == d))
        };
        if is_connected(s, on_common_cube) {
            out.insert(s.iter().map(|&p| p as u32).collect());
        }
    });
    out
}

#[test]
fn vortices_match_subset_scan() {
    let lat = lattice(&[(0, 2), (0, 1), (0, 1)]);
    for max_support in [1, 3, 4, 6] {
        let q = VortexQuery { max_support, interior_only: false };
        let got = enumerate_vortices(&lat, q, EnumLimits::default()).unwrap();
        let got: BTreeSet<Vec<u32>> = got.iter().map(|w| w.plaquettes().to_vec()).collect();
        assert_eq!(got, brute_vortices(&lat, max_support), "support up to {max_support}");
    }
}

#[test]
fn minimal_vortex_census() {
    let lat = lattice(&[(0, 3), (0, 3), (0, 3)]);
    let interior: Vec<usize> = (0..lat.n_edges()).filter(|&e| lat.is_interior_edge(e)).collect();
    assert_eq!(interior.len(), 36);
    let q = |s| VortexQuery { max_support: s, interior_only: true };
    let four = enumerate_vortices(&lat, q(4), EnumLimits::default()).unwrap();
    let mut want: BTreeSet<Vec<u32>> = BTreeSet::new();
    for &e in &interior {
        let mut p: Vec<u32> = lat.edge_plaquettes(e).map(|p| p as u32).collect();
        p.sort_unstable();
        want.insert(p);
    }
    let got: BTreeSet<Vec<u32>> = four.iter().map(|w| w.plaquettes().to_vec()).collect();
    assert_eq!(got, want);
    assert!(four.iter().all(|w| w.support_size() == 4 && w.is_minimal() && w.is_closed(&lat)));
    // Nothing of size 5; the next size up is 6.
    let five = enumerate_vortices(&lat, q(5), EnumLimits::default()).unwrap();
    assert_eq!(five.len(), four.len());
    let six = enumerate_vortices(&lat, q(6), EnumLimits::default()).unwrap();
    assert!(six.len() > four.len());
    assert!(six.iter().all(|w| w.support_size() == 4 || w.support_size() == 6));
    assert!(enumerate_vortices(&lat, q(3), EnumLimits::default()).unwrap().is_empty());
}

#[test]
fn surfaces_agree_on_closed_forms() {
    // Every closed 2-form against every closed path of length <= 8, for two
    // surface constructions.
    let lat = lattice(&[(0, 2), (0, 1), (0, 1)]);
    let np = lat.n_plaquettes();
    let closed_forms: Vec<FixedBitSet> = (0u32..1 << np)
        .filter_map(|mask| {
            let mut parity = vec![0u8; lat.n_cells(3)];
            let mut bits = FixedBitSet::with_capacity(np);
            for p in (0..np).filter(|&p| mask >> p & 1 == 1) {
                bits.insert(p);
                for &(c, _) in lat.coboundary_of(2, p) {
                    parity[c as usize] ^= 1;
                }
            }
            parity.iter().all(|&x| x == 0).then_some(bits)
        })
        .collect();
    assert_eq!(closed_forms.len(), 1 << (np - lat.n_cells(3)));
    let loops = enumerate_closed_paths(&lat, 8, &EdgeFilter::all(), EnumLimits::default()).unwrap();
    assert!(!loops.is_empty());
    for g in &loops {
        let a = surface_z2(&lat, g.edge_bits(), SurfaceConstruction::Staircase).unwrap();
        let b = surface_z2(&lat, g.edge_bits(), SurfaceConstruction::Reversed).unwrap();
        for w in &closed_forms {
            let eval = |q: &FixedBitSet| w.intersection(q).count() % 2;
            assert_eq!(eval(&a), eval(&b), "loop {:?}", g.edges());
        }
    }
}

#[test]
fn adjacency_is_symmetric_and_reflexive() {
    let lat = lattice(&[(0, 2), (0, 2), (0, 2)]);
    let paths = enumerate_closed_paths(&lat, 6, &EdgeFilter::all(), EnumLimits::default()).unwrap();
    let vortices =
        enumerate_vortices(&lat, VortexQuery { max_support: 4, interior_only: false }, EnumLimits::default()).unwrap();
    for a in &paths {
        assert!(path_adjacent(a, a));
        for b in &paths {
            assert_eq!(path_adjacent(a, b), path_adjacent(b, a));
        }
    }
    for a in &vortices {
        assert!(vortex_adjacent(a, a));
        for b in &vortices {
            assert_eq!(vortex_adjacent(a, b), vortex_adjacent(b, a));
        }
    }
}

#[test]
fn zeta_takes_the_expected_values() {
    let lat = lattice(&[(0, 2), (0, 2), (0, 2)]);
    let surf = DirectSurfaces { lattice: &lat, construction: SurfaceConstruction::Staircase };
    let paths: Vec<Polymer> = enumerate_closed_paths(&lat, 4, &EdgeFilter::all(), EnumLimits::default())
        .unwrap()
        .into_iter()
        .map(Polymer::Path)
        .collect();
    let vortices: Vec<Polymer> =
        enumerate_vortices(&lat, VortexQuery { max_support: 4, interior_only: true }, EnumLimits::default())
            .unwrap()
            .into_iter()
            .map(Polymer::Vortex)
            .collect();
    let mut seen_two = false;
    for a in paths.iter().chain(&vortices) {
        for b in paths.iter().chain(&vortices) {
            let z = interaction_zeta(a, b, &surf).unwrap();
            match (a.is_path(), b.is_path()) {
                (true, true) | (false, false) => assert!(z == 0 || z == 1),
                _ => {
                    assert!(z == 0 || z == 2);
                    seen_two |= z == 2;
                }
            }
        }
    }
    assert!(seen_two);
}

#[test]
fn vortex_around_a_plaquette_edge_in_two_dimensions() {
    // In m = 2 a single plaquette is a vortex; it interacts with the unit loop around it.
    let lat = lattice(&[(0, 2), (0, 2)]);
    let surf = DirectSurfaces { lattice: &lat, construction: SurfaceConstruction::Staircase };
    let p = lat.index_of(&z2higgs::lattice::Cell::plaquette(&[0, 0], 0, 1)).unwrap();
    let w = Polymer::Vortex(VortexPolymer::from_plaquettes(&lat, [p]).unwrap());
    let g = Polymer::Path(PathPolymer::from_edges(&lat, lat.plaquette_edges(p)).unwrap());
    assert_eq!(interaction_zeta(&w, &g, &surf).unwrap(), 2);
    let far = lat.index_of(&z2higgs::lattice::Cell::plaquette(&[1, 1], 0, 1)).unwrap();
    let h = Polymer::Path(PathPolymer::from_edges(&lat, lat.plaquette_edges(far)).unwrap());
    assert_eq!(interaction_zeta(&w, &h, &surf).unwrap(), 0);
}

fn check_golden(name: &str, got: &str) {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, got).unwrap();
    }
    let want = std::fs::read_to_string(&path).unwrap();
    assert_eq!(got, want, "{name}");
}

#[test]
fn golden_dumps() {
    let lat = lattice(&[(0, 3), (0, 2)]);
    let loops = enumerate_closed_paths(&lat, 6, &EdgeFilter::all(), EnumLimits::default()).unwrap();
    check_golden("closed_paths_3x2_len6.txt", &dump_paths(&lat, &loops));
    let lat3 = lattice(&[(0, 2), (0, 2), (0, 1)]);
    let vortices =
        enumerate_vortices(&lat3, VortexQuery { max_support: 6, interior_only: false }, EnumLimits::default()).unwrap();
    check_golden("vortices_2x2x1_s6.txt", &dump_vortices(&lat3, &vortices));
}
