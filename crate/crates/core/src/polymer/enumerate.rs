//! Enumeration of closed paths, connecting paths and vortices.
//!
//! All three use ESU-style growth of connected sets: a set is produced only from its
//! least element under a ranking, and every extension candidate must outrank the
//! root, which makes the output duplicate-free without hashing. Parity defects bound
//! how many more cells a partial set needs, which prunes hopeless branches.

use fixedbitset::FixedBitSet;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::Lattice;
use crate::polymer::{PathPolymer, VortexPolymer};

/// Hooks for the connected-set search.
pub(crate) trait EsuVisitor {
    fn push(&mut self, item: usize);
    fn pop(&mut self, item: usize);
    /// Called once per connected set containing the root. Returns whether the set
    /// should be grown further.
    fn visit(&mut self, set: &[usize]) -> bool;
}

/// Grows every connected set containing `root` whose other members `u` satisfy
/// `rank[u] > rank[root]` and `allowed(u)`, up to `max_size` members.
pub(crate) fn esu_from_root<V: EsuVisitor>(
    adj: &[Vec<u32>],
    rank: &[u32],
    root: usize,
    allowed: &dyn Fn(usize) -> bool,
    max_size: usize,
    visitor: &mut V,
) {
    let n = adj.len();
    let mut nb = vec![0u32; n];
    let mut set = vec![root];
    nb[root] += 1;
    for &u in &adj[root] {
        nb[u as usize] += 1;
    }
    let ext: Vec<usize> =
        adj[root].iter().map(|&u| u as usize).filter(|&u| u != root && rank[u] > rank[root] && allowed(u)).collect();
    visitor.push(root);
    if visitor.visit(&set) && max_size > 1 {
        extend(adj, rank, root, allowed, max_size, &mut set, ext, &mut nb, visitor);
    }
    visitor.pop(root);
}

#[allow(clippy::too_many_arguments)]
fn extend<V: EsuVisitor>(
    adj: &[Vec<u32>],
    rank: &[u32],
    root: usize,
    allowed: &dyn Fn(usize) -> bool,
    max_size: usize,
    set: &mut Vec<usize>,
    mut ext: Vec<usize>,
    nb: &mut [u32],
    visitor: &mut V,
) {
    while let Some(w) = ext.pop() {
        let mut next = ext.clone();
        for &u in &adj[w] {
            let u = u as usize;
            if nb[u] == 0 && u != w && rank[u] > rank[root] && allowed(u) {
                next.push(u);
            }
        }
        nb[w] += 1;
        for &u in &adj[w] {
            nb[u as usize] += 1;
        }
        set.push(w);
        visitor.push(w);
        if visitor.visit(set) && set.len() < max_size {
            extend(adj, rank, root, allowed, max_size, set, next, nb, visitor);
        }
        visitor.pop(w);
        set.pop();
        nb[w] -= 1;
        for &u in &adj[w] {
            nb[u as usize] -= 1;
        }
    }
}

/// Restricts enumeration to a subset of edges.
#[derive(Clone, Debug, Default)]
pub struct EdgeFilter {
    pub allowed: Option<FixedBitSet>,
}

impl EdgeFilter {
    pub fn all() -> Self {
        EdgeFilter { allowed: None }
    }

    /// Only edges that carry a bulk-like minimal vortex.
    pub fn interior(lat: &Lattice) -> Self {
        let mut b = FixedBitSet::with_capacity(lat.n_edges());
        for e in 0..lat.n_edges() {
            if lat.is_interior_edge(e) {
                b.insert(e);
            }
        }
        EdgeFilter { allowed: Some(b) }
    }

    pub fn allows(&self, e: usize) -> bool {
        self.allowed.as_ref().is_none_or(|b| b.contains(e))
    }
}

/// Output-size guard for enumerations.
#[derive(Clone, Copy, Debug)]
pub struct EnumLimits {
    pub max_results: usize,
}

impl Default for EnumLimits {
    fn default() -> Self {
        EnumLimits { max_results: 2_000_000 }
    }
}

fn edge_line_graph(lat: &Lattice) -> Vec<Vec<u32>> {
    (0..lat.n_edges())
        .map(|e| {
            let (a, b) = lat.endpoints(e);
            let mut nb: Vec<u32> =
                lat.vertex_edges(a).chain(lat.vertex_edges(b)).filter(|&f| f != e).map(|f| f as u32).collect();
            nb.sort_unstable();
            nb.dedup();
            nb
        })
        .collect()
}

fn plaquette_graph(lat: &Lattice) -> Vec<Vec<u32>> {
    (0..lat.n_plaquettes())
        .map(|p| {
            if lat.m() < 3 {
                return Vec::new();
            }
            let mut nb: Vec<u32> = lat
                .coboundary_of(2, p)
                .iter()
                .flat_map(|&(c, _)| lat.boundary_of(3, c as usize).iter().map(|&(q, _)| q))
                .filter(|&q| q as usize != p)
                .collect();
            nb.sort_unstable();
            nb.dedup();
            nb
        })
        .collect()
}

/// Collects edge sets whose odd-degree vertices equal a target set.
struct ParityVisitor<'a> {
    lat: &'a Lattice,
    parity: Vec<u8>,
    target: Vec<u8>,
    defects: usize,
    max_len: usize,
    out: Vec<Vec<u32>>,
    max_results: usize,
    overflow: bool,
}

impl<'a> ParityVisitor<'a> {
    fn new(lat: &'a Lattice, target: &[usize], max_len: usize, max_results: usize) -> Self {
        let mut t = vec![0u8; lat.n_vertices()];
        for &v in target {
            t[v] = 1;
        }
        ParityVisitor {
            lat,
            parity: vec![0; lat.n_vertices()],
            defects: target.len(),
            target: t,
            max_len,
            out: Vec::new(),
            max_results,
            overflow: false,
        }
    }

    fn flip(&mut self, v: usize) {
        let before = self.parity[v] != self.target[v];
        self.parity[v] ^= 1;
        if before {
            self.defects -= 1;
        } else {
            self.defects += 1;
        }
    }
}

impl EsuVisitor for ParityVisitor<'_> {
    fn push(&mut self, e: usize) {
        let (a, b) = self.lat.endpoints(e);
        self.flip(a);
        self.flip(b);
    }

    fn pop(&mut self, e: usize) {
        self.push(e);
    }

    fn visit(&mut self, set: &[usize]) -> bool {
        if self.overflow {
            return false;
        }
        if self.defects == 0 {
            let mut s: Vec<u32> = set.iter().map(|&e| e as u32).collect();
            s.sort_unstable();
            self.out.push(s);
            if self.out.len() > self.max_results {
                self.overflow = true;
                return false;
            }
        }
        set.len() + (self.defects / 2).max(1) <= self.max_len
    }
}

fn finish_paths(lat: &Lattice, mut sets: Vec<Vec<u32>>) -> Vec<PathPolymer> {
    sets.sort_unstable_by(|a, b| (a.len(), a).cmp(&(b.len(), b)));
    sets.into_iter()
        .map(|s| PathPolymer::from_edges(lat, s.into_iter().map(|e| e as usize)).expect("in range"))
        .collect()
}

/// Every vertex-connected closed path with at most `max_len` edges, sorted by
/// (length, edge list).
pub fn enumerate_closed_paths(
    lat: &Lattice,
    max_len: usize,
    filter: &EdgeFilter,
    limits: EnumLimits,
) -> Result<Vec<PathPolymer>> {
    if max_len < 4 {
        return Ok(Vec::new());
    }
    let adj = edge_line_graph(lat);
    let rank: Vec<u32> = (0..lat.n_edges() as u32).collect();
    let allowed = |e: usize| filter.allows(e);
    let shards: Vec<(Vec<Vec<u32>>, bool)> = (0..lat.n_edges())
        .into_par_iter()
        .filter(|&r| filter.allows(r))
        .map(|root| {
            let mut v = ParityVisitor::new(lat, &[], max_len, limits.max_results);
            esu_from_root(&adj, &rank, root, &allowed, max_len, &mut v);
            (v.out, v.overflow)
        })
        .collect();
    collect_shards(lat, shards, limits, "closed paths")
}

fn collect_shards(
    lat: &Lattice,
    shards: Vec<(Vec<Vec<u32>>, bool)>,
    limits: EnumLimits,
    what: &str,
) -> Result<Vec<PathPolymer>> {
    let total: usize = shards.iter().map(|s| s.0.len()).sum();
    if shards.iter().any(|s| s.1) || total > limits.max_results {
        return Err(Error::Resource(format!(
            "{what}: more than {} results (found {total} before stopping)",
            limits.max_results
        )));
    }
    Ok(finish_paths(lat, shards.into_iter().flat_map(|s| s.0).collect()))
}

/// Every vertex-connected path `gamma` with `gamma_n + gamma` closed and at most
/// `max_len` edges. Sorted by (length, edge list), so when `gamma_n` is a straight
/// line and `max_len >= |gamma_n|` the line itself comes first.
pub fn enumerate_connecting_paths(
    lat: &Lattice,
    gamma_n: &PathPolymer,
    max_len: usize,
    filter: &EdgeFilter,
    limits: EnumLimits,
) -> Result<Vec<PathPolymer>> {
    let odd = gamma_n.odd_vertices(lat);
    if odd.len() != 2 {
        return Err(Error::Precondition(format!(
            "connecting paths need exactly two boundary vertices, found {}",
            odd.len()
        )));
    }
    let x = odd[0];
    if max_len == 0 {
        return Ok(Vec::new());
    }
    let adj = edge_line_graph(lat);
    // Edges at x come first so the least edge at x is the canonical root.
    let at_x: Vec<usize> = lat.vertex_edges(x).filter(|&e| filter.allows(e)).collect();
    let mut rank = vec![0u32; lat.n_edges()];
    let mut next = 0u32;
    let mut sorted_x = at_x.clone();
    sorted_x.sort_unstable();
    for &e in &sorted_x {
        rank[e] = next;
        next += 1;
    }
    for (e, r) in rank.iter_mut().enumerate() {
        if !sorted_x.contains(&e) {
            *r = next;
            next += 1;
        }
    }
    let allowed = |e: usize| filter.allows(e);
    let shards: Vec<(Vec<Vec<u32>>, bool)> = sorted_x
        .par_iter()
        .map(|&root| {
            let mut v = ParityVisitor::new(lat, &odd, max_len, limits.max_results);
            esu_from_root(&adj, &rank, root, &allowed, max_len, &mut v);
            (v.out, v.overflow)
        })
        .collect();
    collect_shards(lat, shards, limits, "connecting paths")
}

/// Selects which vortices to enumerate.
#[derive(Clone, Copy, Debug)]
pub struct VortexQuery {
    pub max_support: usize,
    /// Only use plaquettes with the full set of cofaces, i.e. ignore vortices that
    /// exist only because of the free boundary.
    pub interior_only: bool,
}

struct CubeParityVisitor<'a> {
    lat: &'a Lattice,
    parity: Vec<u8>,
    defects: usize,
    max_support: usize,
    out: Vec<Vec<u32>>,
    max_results: usize,
    overflow: bool,
}

impl EsuVisitor for CubeParityVisitor<'_> {
    fn push(&mut self, p: usize) {
        if self.lat.m() < 3 {
            return;
        }
        for &(c, _) in self.lat.coboundary_of(2, p) {
            let c = c as usize;
            self.parity[c] ^= 1;
            if self.parity[c] == 1 {
                self.defects += 1;
            } else {
                self.defects -= 1;
            }
        }
    }

    fn pop(&mut self, p: usize) {
        self.push(p);
    }

    fn visit(&mut self, set: &[usize]) -> bool {
        if self.overflow {
            return false;
        }
        if self.defects == 0 {
            let mut s: Vec<u32> = set.iter().map(|&p| p as u32).collect();
            s.sort_unstable();
            self.out.push(s);
            if self.out.len() > self.max_results {
                self.overflow = true;
                return false;
            }
        }
        set.len() + self.defects.div_ceil(2).max(1) <= self.max_support
    }
}

/// Every closed 2-form with 𝒢₂-connected support of at most `max_support`
/// plaquettes, sorted by (support size, plaquette list).
pub fn enumerate_vortices(lat: &Lattice, query: VortexQuery, limits: EnumLimits) -> Result<Vec<VortexPolymer>> {
    if query.max_support == 0 {
        return Ok(Vec::new());
    }
    let adj = plaquette_graph(lat);
    let rank: Vec<u32> = (0..lat.n_plaquettes() as u32).collect();
    let allowed = |p: usize| !query.interior_only || lat.is_interior_plaquette(p);
    let shards: Vec<(Vec<Vec<u32>>, bool)> = (0..lat.n_plaquettes())
        .into_par_iter()
        .filter(|&p| allowed(p))
        .map(|root| {
            let mut v = CubeParityVisitor {
                lat,
                parity: vec![0; lat.n_cells(3)],
                defects: 0,
                max_support: query.max_support,
                out: Vec::new(),
                max_results: limits.max_results,
                overflow: false,
            };
            esu_from_root(&adj, &rank, root, &allowed, query.max_support, &mut v);
            (v.out, v.overflow)
        })
        .collect();
    let total: usize = shards.iter().map(|s| s.0.len()).sum();
    if shards.iter().any(|s| s.1) || total > limits.max_results {
        return Err(Error::Resource(format!(
            "vortices: more than {} results (found {total} before stopping)",
            limits.max_results
        )));
    }
    let mut sets: Vec<Vec<u32>> = shards.into_iter().flat_map(|s| s.0).collect();
    sets.sort_unstable_by(|a, b| (a.len(), a).cmp(&(b.len(), b)));
    Ok(sets
        .into_iter()
        .map(|s| {
            let mut bits = FixedBitSet::with_capacity(lat.n_plaquettes());
            for p in s {
                bits.insert(p as usize);
            }
            VortexPolymer::from_bits_unchecked(lat, bits)
        })
        .collect())
}
