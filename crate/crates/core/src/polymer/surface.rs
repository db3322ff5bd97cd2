//! Spanning surfaces `q` with `boundary q = gamma` for closed 1-chains.
//!
//! Built from the straight-line homotopy that pushes a chain down to the lower face
//! of the box along one axis at a time. Each push sweeps every edge transverse to the
//! axis into a stack of plaquettes; after all axes but one the chain sits on a line,
//! where a closed chain is zero.

use std::collections::BTreeMap;

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Cell, Chain, Lattice};

/// Which homotopy sequence builds the surface.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurfaceConstruction {
    /// Push along axes `m-1, ..., 1`, ending on an axis-0 line.
    #[default]
    Staircase,
    /// Push along axes `0, ..., m-2`, ending on an axis-(m-1) line.
    Reversed,
}

impl SurfaceConstruction {
    fn axes(self, m: usize) -> Vec<usize> {
        match self {
            SurfaceConstruction::Staircase => (1..m).rev().collect(),
            SurfaceConstruction::Reversed => (0..m - 1).collect(),
        }
    }
}

/// A 2-chain together with the closed path it spans.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpanningSurface {
    pub chain: Chain,
    pub boundary_path: Chain,
}

/// One homotopy step along `axis` for a single edge: the plaquette stack with its
/// sign, and the projected edge.
fn sweep_edge(lat: &Lattice, e: usize, axis: usize) -> (Vec<usize>, i64, Option<usize>) {
    let cell = lat.cell(1, e);
    let d = cell.dirs[0] as usize;
    if d == axis {
        return (Vec::new(), 0, None);
    }
    let lo = lat.box_spec().lo(axis);
    let sign = if d < axis { -1 } else { 1 };
    let mut stack = Vec::new();
    let mut x = cell.base.clone();
    for t in lo..cell.base[axis] {
        x[axis] = t;
        let p = lat
            .index_of(&Cell::plaquette(&x, d, axis))
            .expect("stacked plaquette lies between the edge and the lower face");
        stack.push(p);
    }
    x[axis] = lo;
    let proj = lat.edge_index(&x, d).expect("projected edge lies on the lower face");
    (stack, sign, Some(proj))
}

/// Integer spanning surface of a closed 1-chain.
pub fn spanning_surface(lat: &Lattice, gamma: &Chain, construction: SurfaceConstruction) -> Result<SpanningSurface> {
    if gamma.k() != 1 {
        return Err(Error::Dimension(format!("spanning surface of a {}-chain", gamma.k())));
    }
    if !gamma.boundary()?.is_zero() {
        return Err(Error::Precondition("open path has no spanning surface".into()));
    }
    let mut cur: BTreeMap<usize, i64> = BTreeMap::new();
    for (c, v) in gamma.iter() {
        let e = lat.index_of(c).ok_or_else(|| Error::Invalid(format!("edge {c} lies outside the box")))?;
        cur.insert(e, v);
    }
    let mut q: BTreeMap<usize, i64> = BTreeMap::new();
    for axis in construction.axes(lat.m()) {
        let mut next: BTreeMap<usize, i64> = BTreeMap::new();
        for (&e, &v) in &cur {
            let (stack, sign, proj) = sweep_edge(lat, e, axis);
            for p in stack {
                *q.entry(p).or_insert(0) += sign * v;
            }
            if let Some(pe) = proj {
                *next.entry(pe).or_insert(0) += v;
            }
        }
        next.retain(|_, v| *v != 0);
        cur = next;
    }
    if !cur.is_empty() {
        return Err(Error::Numeric("homotopy left a nonzero remainder".into()));
    }
    let mut chain = Chain::zero(2);
    for (p, v) in q {
        chain.add_cell(lat.cell(2, p), v);
    }
    Ok(SpanningSurface { chain, boundary_path: gamma.clone() })
}

/// Z2 spanning surface of an edge set with every vertex of even degree.
pub fn surface_z2(lat: &Lattice, edges: &FixedBitSet, construction: SurfaceConstruction) -> Result<FixedBitSet> {
    let mut parity = FixedBitSet::with_capacity(lat.n_vertices());
    for e in edges.ones() {
        let (a, b) = lat.endpoints(e);
        parity.toggle(a);
        parity.toggle(b);
    }
    if !parity.is_clear() {
        return Err(Error::Precondition("open path has no spanning surface".into()));
    }
    let mut cur = edges.clone();
    let mut q = FixedBitSet::with_capacity(lat.n_plaquettes());
    for axis in construction.axes(lat.m()) {
        let mut next = FixedBitSet::with_capacity(lat.n_edges());
        for e in cur.ones() {
            let (stack, _, proj) = sweep_edge(lat, e, axis);
            for p in stack {
                q.toggle(p);
            }
            if let Some(pe) = proj {
                next.toggle(pe);
            }
        }
        cur = next;
    }
    if !cur.is_clear() {
        return Err(Error::Numeric("homotopy left a nonzero remainder".into()));
    }
    Ok(q)
}
