//! Polymers of the expansion: connected paths and vortices, their adjacency and the
//! interaction functions iota and zeta.
//!
//! Paths are identified with their Z2 edge support. The integer chain attached to a
//! path is one orientation representative (an Euler circuit or trail), and nothing
//! downstream depends on which one is chosen.

pub mod dump;
pub mod enumerate;
pub mod surface;

use std::cmp::Ordering;
use std::hash::{Hash, Hasher};

use fixedbitset::FixedBitSet;

use crate::error::{Error, Result};
use crate::lattice::{Chain, Lattice};

pub use enumerate::{
    enumerate_closed_paths, enumerate_connecting_paths, enumerate_vortices, EdgeFilter, EnumLimits, VortexQuery,
};
pub use surface::{spanning_surface, surface_z2, SpanningSurface, SurfaceConstruction};

/// A path in the Z2 sense: a set of positive edges.
#[derive(Clone, Debug)]
pub struct PathPolymer {
    edges: Vec<u32>,
    edge_bits: FixedBitSet,
    vertex_bits: FixedBitSet,
}

impl PartialEq for PathPolymer {
    fn eq(&self, other: &Self) -> bool {
        self.edges == other.edges
    }
}
impl Eq for PathPolymer {}
impl Hash for PathPolymer {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.edges.hash(state)
    }
}
impl PartialOrd for PathPolymer {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for PathPolymer {
    /// Shorter first, then lexicographic in the edge index list.
    fn cmp(&self, other: &Self) -> Ordering {
        (self.edges.len(), &self.edges).cmp(&(other.edges.len(), &other.edges))
    }
}

impl PathPolymer {
    /// Builds a path from edge indices. Duplicates cancel (Z2 sum).
    pub fn from_edges(lat: &Lattice, edges: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut bits = FixedBitSet::with_capacity(lat.n_edges());
        for e in edges {
            if e >= lat.n_edges() {
                return Err(Error::Invalid(format!("edge index {e} out of range")));
            }
            bits.toggle(e);
        }
        Ok(Self::from_bits(lat, bits))
    }

    pub fn from_bits(lat: &Lattice, edge_bits: FixedBitSet) -> Self {
        let edges: Vec<u32> = edge_bits.ones().map(|e| e as u32).collect();
        let mut vertex_bits = FixedBitSet::with_capacity(lat.n_vertices());
        for &e in &edges {
            let (a, b) = lat.endpoints(e as usize);
            vertex_bits.insert(a);
            vertex_bits.insert(b);
        }
        PathPolymer { edges, edge_bits, vertex_bits }
    }

    /// Reads the support of a chain; fails unless every coefficient is +-1.
    pub fn from_chain(lat: &Lattice, chain: &Chain) -> Result<Self> {
        if chain.k() != 1 {
            return Err(Error::Dimension("a path is a 1-chain".into()));
        }
        let mut idx = Vec::new();
        for (c, v) in chain.iter() {
            if v.abs() != 1 {
                return Err(Error::Invalid(format!("path coefficient {v} on {c}")));
            }
            idx.push(lat.index_of(c).ok_or_else(|| Error::Invalid(format!("{c} outside box")))?);
        }
        PathPolymer::from_edges(lat, idx)
    }

    /// Straight axis-aligned line of `n` edges starting at `start`.
    pub fn straight_line(lat: &Lattice, start: &[i32], axis: usize, n: usize) -> Result<Self> {
        let mut x = start.to_vec();
        let mut idx = Vec::with_capacity(n);
        for _ in 0..n {
            idx.push(
                lat.edge_index(&x, axis)
                    .ok_or_else(|| Error::Invalid(format!("line from {start:?} along axis {axis} leaves the box")))?,
            );
            x[axis] += 1;
        }
        PathPolymer::from_edges(lat, idx)
    }

    pub fn empty(lat: &Lattice) -> Self {
        Self::from_bits(lat, FixedBitSet::with_capacity(lat.n_edges()))
    }

    /// `|gamma|`, the number of support edges.
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn edges(&self) -> &[u32] {
        &self.edges
    }

    pub fn edge_bits(&self) -> &FixedBitSet {
        &self.edge_bits
    }

    pub fn vertex_bits(&self) -> &FixedBitSet {
        &self.vertex_bits
    }

    pub fn contains_edge(&self, e: usize) -> bool {
        self.edge_bits.contains(e)
    }

    /// Vertices of odd degree, ascending.
    pub fn odd_vertices(&self, lat: &Lattice) -> Vec<usize> {
        let mut par = FixedBitSet::with_capacity(lat.n_vertices());
        for &e in &self.edges {
            let (a, b) = lat.endpoints(e as usize);
            par.toggle(a);
            par.toggle(b);
        }
        par.ones().collect()
    }

    pub fn is_closed(&self, lat: &Lattice) -> bool {
        self.odd_vertices(lat).is_empty()
    }

    /// Connectivity through shared vertices.
    pub fn is_connected(&self, lat: &Lattice) -> bool {
        if self.edges.len() <= 1 {
            return true;
        }
        let mut seen = FixedBitSet::with_capacity(lat.n_edges());
        let mut stack = vec![self.edges[0] as usize];
        seen.insert(self.edges[0] as usize);
        let mut count = 1;
        while let Some(e) = stack.pop() {
            let (a, b) = lat.endpoints(e);
            for v in [a, b] {
                for f in lat.vertex_edges(v) {
                    if self.edge_bits.contains(f) && !seen.contains(f) {
                        seen.insert(f);
                        count += 1;
                        stack.push(f);
                    }
                }
            }
        }
        count == self.edges.len()
    }

    /// Z2 sum (symmetric difference) of two paths.
    pub fn sum(&self, lat: &Lattice, other: &PathPolymer) -> PathPolymer {
        let mut bits = self.edge_bits.clone();
        bits.symmetric_difference_with(&other.edge_bits);
        PathPolymer::from_bits(lat, bits)
    }

    /// An orientation with +-1 coefficients. For a closed path every vertex gets
    /// equal in- and out-degree; for a path with odd vertices `{x, y}`, the chain
    /// satisfies `boundary = tail_target - head_source` with `from` as the start.
    pub fn chain(&self, lat: &Lattice) -> Result<Chain> {
        let odd = self.odd_vertices(lat);
        let start = match odd.len() {
            0 => None,
            2 => Some(odd[0]),
            _ => {
                return Err(Error::Precondition(
                    "path with more than two odd vertices has no +-1 orientation as a single trail".into(),
                ))
            }
        };
        self.chain_from(lat, start)
    }

    /// Orientation as a trail starting at `start` (must be an odd vertex) followed by
    /// circuits on the remaining edges.
    pub fn chain_from(&self, lat: &Lattice, start: Option<usize>) -> Result<Chain> {
        let mut unused = self.edge_bits.clone();
        let mut out = Chain::zero(1);
        let walk = |from: usize, unused: &mut FixedBitSet, out: &mut Chain| {
            // Hierholzer over the unused edges, recording orientation along the walk.
            let mut stack = vec![(from, usize::MAX)];
            let mut oriented: Vec<(usize, usize)> = Vec::new();
            while let Some(&(v, _)) = stack.last() {
                let next = lat.vertex_edges(v).find(|&f| unused.contains(f));
                match next {
                    Some(f) => {
                        unused.set(f, false);
                        let (a, b) = lat.endpoints(f);
                        let w = if a == v { b } else { a };
                        stack.push((w, f));
                    }
                    None => {
                        let (_, f) = stack.pop().unwrap();
                        if f != usize::MAX {
                            let to = v;
                            oriented.push((f, to));
                        }
                    }
                }
            }
            for (f, to) in oriented {
                let (_, head) = lat.endpoints(f);
                out.add_cell(lat.cell(1, f), if head == to { 1 } else { -1 });
            }
        };
        if let Some(s) = start {
            walk(s, &mut unused, &mut out);
        }
        while let Some(e) = unused.minimum() {
            let (a, _) = lat.endpoints(e);
            walk(a, &mut unused, &mut out);
        }
        Ok(out)
    }
}

/// A closed Z2 2-form with connected support.
#[derive(Clone, Debug)]
pub struct VortexPolymer {
    plaquettes: Vec<u32>,
    plaq_bits: FixedBitSet,
    cube_bits: FixedBitSet,
    minimal_edge: Option<u32>,
}

impl PartialEq for VortexPolymer {
    fn eq(&self, other: &Self) -> bool {
        self.plaquettes == other.plaquettes
    }
}
impl Eq for VortexPolymer {}
impl Hash for VortexPolymer {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.plaquettes.hash(state)
    }
}
impl PartialOrd for VortexPolymer {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for VortexPolymer {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.plaquettes.len(), &self.plaquettes).cmp(&(other.plaquettes.len(), &other.plaquettes))
    }
}

impl VortexPolymer {
    /// Builds a vortex from plaquette indices, checking closedness.
    pub fn from_plaquettes(lat: &Lattice, plaqs: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut bits = FixedBitSet::with_capacity(lat.n_plaquettes());
        for p in plaqs {
            if p >= lat.n_plaquettes() {
                return Err(Error::Invalid(format!("plaquette index {p} out of range")));
            }
            bits.toggle(p);
        }
        if bits.is_clear() {
            return Err(Error::Invalid("empty vortex".into()));
        }
        let v = Self::from_bits_unchecked(lat, bits);
        if !v.is_closed(lat) {
            return Err(Error::Precondition("vortex form is not closed".into()));
        }
        Ok(v)
    }

    pub(crate) fn from_bits_unchecked(lat: &Lattice, plaq_bits: FixedBitSet) -> Self {
        let plaquettes: Vec<u32> = plaq_bits.ones().map(|p| p as u32).collect();
        let mut cube_bits = FixedBitSet::with_capacity(lat.n_cells(3));
        if lat.m() >= 3 {
            for &p in &plaquettes {
                for &(c, _) in lat.coboundary_of(2, p as usize) {
                    cube_bits.insert(c as usize);
                }
            }
        }
        let minimal_edge = Self::detect_minimal(lat, &plaq_bits);
        VortexPolymer { plaquettes, plaq_bits, cube_bits, minimal_edge }
    }

    fn detect_minimal(lat: &Lattice, bits: &FixedBitSet) -> Option<u32> {
        let m = lat.m();
        if bits.count_ones(..) != 2 * (m - 1) {
            return None;
        }
        let p0 = bits.minimum()?;
        lat.plaquette_edges(p0).find_map(|e| {
            if !lat.is_interior_edge(e) {
                return None;
            }
            let all = lat.edge_plaquettes(e).all(|p| bits.contains(p));
            all.then_some(e as u32)
        })
    }

    pub fn plaquettes(&self) -> &[u32] {
        &self.plaquettes
    }

    pub fn plaq_bits(&self) -> &FixedBitSet {
        &self.plaq_bits
    }

    /// `|(support omega)^+|`.
    pub fn support_size(&self) -> usize {
        self.plaquettes.len()
    }

    /// The interior edge `e` with `omega = d sigma_e`, when the vortex is minimal.
    pub fn minimal_edge(&self) -> Option<usize> {
        self.minimal_edge.map(|e| e as usize)
    }

    pub fn is_minimal(&self) -> bool {
        self.minimal_edge.is_some()
    }

    pub fn is_closed(&self, lat: &Lattice) -> bool {
        if lat.m() < 3 {
            return true;
        }
        let mut par = FixedBitSet::with_capacity(lat.n_cells(3));
        for &p in &self.plaquettes {
            for &(c, _) in lat.coboundary_of(2, p as usize) {
                par.toggle(c as usize);
            }
        }
        par.is_clear()
    }

    /// `omega(q)` for a Z2 surface given as a plaquette bitset.
    pub fn eval_on(&self, surface: &FixedBitSet) -> u8 {
        (self.plaq_bits.intersection(surface).count() % 2) as u8
    }

    /// Edges lying in the boundary of some support plaquette.
    pub fn touches_edge(&self, lat: &Lattice, e: usize) -> bool {
        lat.edge_plaquettes(e).any(|p| self.plaq_bits.contains(p))
    }
}

/// `gamma ~ gamma'`: the two paths pass through a common vertex.
pub fn path_adjacent(a: &PathPolymer, b: &PathPolymer) -> bool {
    !a.vertex_bits.is_disjoint(&b.vertex_bits)
}

/// `omega ~ omega'`: the supports meet the boundary of a common 3-cell, or share a
/// plaquette. The second clause only matters where plaquettes have no cofaces (m = 2)
/// and keeps the relation reflexive there.
pub fn vortex_adjacent(a: &VortexPolymer, b: &VortexPolymer) -> bool {
    !a.cube_bits.is_disjoint(&b.cube_bits) || !a.plaq_bits.is_disjoint(&b.plaq_bits)
}

/// A polymer of either kind.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Polymer {
    Path(PathPolymer),
    Vortex(VortexPolymer),
}

impl Polymer {
    pub fn is_path(&self) -> bool {
        matches!(self, Polymer::Path(_))
    }
}

/// Supplies Z2 spanning surfaces for closed paths.
pub trait SurfaceProvider {
    fn surface(&self, path: &PathPolymer) -> Result<FixedBitSet>;
}

/// Computes surfaces on demand with a fixed construction.
pub struct DirectSurfaces<'a> {
    pub lattice: &'a Lattice,
    pub construction: SurfaceConstruction,
}

impl SurfaceProvider for DirectSurfaces<'_> {
    fn surface(&self, path: &PathPolymer) -> Result<FixedBitSet> {
        surface_z2(self.lattice, path.edge_bits(), self.construction)
    }
}

/// The interaction function iota.
pub fn interaction_iota(a: &Polymer, b: &Polymer, surfaces: &dyn SurfaceProvider) -> Result<i32> {
    Ok(match (a, b) {
        (Polymer::Path(x), Polymer::Path(y)) => (!path_adjacent(x, y)) as i32,
        (Polymer::Vortex(x), Polymer::Vortex(y)) => (!vortex_adjacent(x, y)) as i32,
        (Polymer::Vortex(w), Polymer::Path(g)) | (Polymer::Path(g), Polymer::Vortex(w)) => {
            crate::lattice::rho(w.eval_on(&surfaces.surface(g)?))
        }
    })
}

/// `zeta = 1 - iota`.
pub fn interaction_zeta(a: &Polymer, b: &Polymer, surfaces: &dyn SurfaceProvider) -> Result<i32> {
    Ok(1 - interaction_iota(a, b, surfaces)?)
}
