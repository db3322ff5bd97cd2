//! Discrete exterior calculus on a rectangular box of Z^m.
//!
//! Cells are stored as (base corner, ascending direction list, sign). A [`Lattice`]
//! indexes every positive cell of a box and caches boundary and coboundary incidence
//! so that forms can live in plain bitsets.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The group homomorphism Z2 -> {1,-1}.
#[inline]
pub fn rho(z: u8) -> i32 {
    if z & 1 == 0 {
        1
    } else {
        -1
    }
}

/// A box `[lo_1,hi_1] x ... x [lo_m,hi_m]` of lattice points.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<(i32, i32)>", into = "Vec<(i32, i32)>")]
pub struct BoxSpec {
    extents: Vec<(i32, i32)>,
}

impl TryFrom<Vec<(i32, i32)>> for BoxSpec {
    type Error = Error;

    fn try_from(extents: Vec<(i32, i32)>) -> Result<Self> {
        BoxSpec::new(extents)
    }
}

impl From<BoxSpec> for Vec<(i32, i32)> {
    fn from(b: BoxSpec) -> Self {
        b.extents
    }
}

impl BoxSpec {
    pub fn new(extents: Vec<(i32, i32)>) -> Result<Self> {
        if extents.len() < 2 {
            return Err(Error::Invalid(format!("box dimension must be at least 2, got {}", extents.len())));
        }
        if extents.len() > 9 {
            return Err(Error::Invalid("box dimension above 9 is not supported".into()));
        }
        if let Some((lo, hi)) = extents.iter().find(|(lo, hi)| lo > hi) {
            return Err(Error::Invalid(format!("empty interval [{lo},{hi}]")));
        }
        Ok(BoxSpec { extents })
    }

    /// `[-n, n]^m`.
    pub fn centered(m: usize, n: i32) -> Result<Self> {
        BoxSpec::new(vec![(-n, n); m])
    }

    pub fn m(&self) -> usize {
        self.extents.len()
    }

    pub fn extents(&self) -> &[(i32, i32)] {
        &self.extents
    }

    pub fn lo(&self, a: usize) -> i32 {
        self.extents[a].0
    }

    pub fn hi(&self, a: usize) -> i32 {
        self.extents[a].1
    }

    pub fn contains(&self, x: &[i32]) -> bool {
        x.len() == self.m() && x.iter().zip(&self.extents).all(|(v, (lo, hi))| lo <= v && v <= hi)
    }

    pub fn n_vertices(&self) -> usize {
        self.extents.iter().map(|(lo, hi)| (hi - lo + 1) as usize).product()
    }

    /// Number of positive k-cells.
    pub fn n_cells(&self, k: usize) -> usize {
        let m = self.m();
        let mut total = 0;
        for mask in 0u32..(1 << m) {
            if mask.count_ones() as usize != k {
                continue;
            }
            let mut count = 1usize;
            for (a, (lo, hi)) in self.extents.iter().enumerate() {
                let len = (hi - lo) as usize;
                count *= if mask >> a & 1 == 1 { len } else { len + 1 };
            }
            total += count;
        }
        total
    }

    pub fn n_positive_edges(&self) -> usize {
        self.n_cells(1)
    }
}

/// An oriented cubical cell `[base; dirs]` with a sign.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub base: Vec<i32>,
    pub dirs: Vec<u8>,
    pub sign: i8,
}

impl Cell {
    pub fn new(base: Vec<i32>, dirs: Vec<u8>, sign: i8) -> Result<Self> {
        if sign != 1 && sign != -1 {
            return Err(Error::Invalid(format!("cell sign must be +-1, got {sign}")));
        }
        if dirs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Invalid("cell directions must be strictly ascending".into()));
        }
        if dirs.iter().any(|&d| d as usize >= base.len()) {
            return Err(Error::Invalid("cell direction out of range".into()));
        }
        Ok(Cell { base, dirs, sign })
    }

    pub fn vertex(x: &[i32]) -> Self {
        Cell { base: x.to_vec(), dirs: vec![], sign: 1 }
    }

    pub fn edge(x: &[i32], d: usize) -> Self {
        Cell { base: x.to_vec(), dirs: vec![d as u8], sign: 1 }
    }

    pub fn plaquette(x: &[i32], d1: usize, d2: usize) -> Self {
        let (a, b) = if d1 < d2 { (d1, d2) } else { (d2, d1) };
        Cell { base: x.to_vec(), dirs: vec![a as u8, b as u8], sign: 1 }
    }

    pub fn k(&self) -> usize {
        self.dirs.len()
    }

    pub fn m(&self) -> usize {
        self.base.len()
    }

    pub fn neg(&self) -> Cell {
        Cell { sign: -self.sign, ..self.clone() }
    }

    pub fn positive(&self) -> Cell {
        Cell { sign: 1, ..self.clone() }
    }

    pub fn is_positive(&self) -> bool {
        self.sign == 1
    }

    pub fn fits(&self, bx: &BoxSpec) -> bool {
        if self.m() != bx.m() || !bx.contains(&self.base) {
            return false;
        }
        self.dirs.iter().all(|&d| self.base[d as usize] < bx.hi(d as usize))
    }

    /// Canonical text form `k:(x1,..,xm):d1d2..dk:+`.
    pub fn to_text(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let coords: Vec<String> = self.base.iter().map(|x| x.to_string()).collect();
        let dirs: String = self.dirs.iter().map(|d| char::from(b'0' + d)).collect();
        let s = if self.sign > 0 { '+' } else { '-' };
        write!(f, "{}:({}):{}:{}", self.k(), coords.join(","), dirs, s)
    }
}

impl FromStr for Cell {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("malformed cell text {s:?}"));
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 4 {
            return Err(bad());
        }
        let k: usize = parts[0].parse().map_err(|_| bad())?;
        let inner = parts[1].strip_prefix('(').and_then(|p| p.strip_suffix(')')).ok_or_else(bad)?;
        let base = inner.split(',').map(|t| t.trim().parse::<i32>().map_err(|_| bad())).collect::<Result<Vec<_>>>()?;
        let dirs =
            parts[2].chars().map(|c| c.to_digit(10).map(|d| d as u8).ok_or_else(bad)).collect::<Result<Vec<_>>>()?;
        let sign = match parts[3] {
            "+" => 1,
            "-" => -1,
            _ => return Err(bad()),
        };
        if dirs.len() != k {
            return Err(bad());
        }
        Cell::new(base, dirs, sign)
    }
}

/// A finitely supported integer k-chain, keyed by positive cells.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Chain {
    k: usize,
    coeffs: BTreeMap<Cell, i64>,
}

impl Chain {
    pub fn zero(k: usize) -> Self {
        Chain { k, coeffs: BTreeMap::new() }
    }

    pub fn from_cell(c: &Cell) -> Self {
        let mut ch = Chain::zero(c.k());
        ch.add_cell(c, 1);
        ch
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Adds `coef * c`. Panics if the dimension does not match.
    pub fn add_cell(&mut self, c: &Cell, coef: i64) {
        assert_eq!(c.k(), self.k, "chain dimension mismatch");
        if coef == 0 {
            return;
        }
        let key = c.positive();
        let v = coef * c.sign as i64;
        let entry = self.coeffs.entry(key).or_insert(0);
        *entry += v;
        if *entry == 0 {
            let key = c.positive();
            self.coeffs.remove(&key);
        }
    }

    pub fn add_chain(&mut self, other: &Chain, factor: i64) {
        assert_eq!(other.k, self.k, "chain dimension mismatch");
        for (c, v) in &other.coeffs {
            self.add_cell(c, v * factor);
        }
    }

    /// Coefficient of a signed cell: the stored value, negated for negative cells.
    pub fn coeff(&self, c: &Cell) -> i64 {
        self.coeffs.get(&c.positive()).copied().unwrap_or(0) * c.sign as i64
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Cell, i64)> {
        self.coeffs.iter().map(|(c, v)| (c, *v))
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn support_len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn neg(&self) -> Chain {
        let mut out = self.clone();
        for v in out.coeffs.values_mut() {
            *v = -*v;
        }
        out
    }

    /// Linear extension of the cell boundary.
    pub fn boundary(&self) -> Result<Chain> {
        if self.k == 0 {
            return Err(Error::Dimension("boundary of a 0-chain".into()));
        }
        let mut out = Chain::zero(self.k - 1);
        for (c, v) in &self.coeffs {
            out.add_chain(&boundary(c)?, *v);
        }
        Ok(out)
    }
}

/// Oriented boundary of a cell,
/// `sum_i (-1)^(i+1) ([b + e_{d_i}; D \ d_i] - [b; D \ d_i])`.
pub fn boundary(c: &Cell) -> Result<Chain> {
    let k = c.k();
    if k == 0 {
        return Err(Error::Dimension("boundary of a 0-cell".into()));
    }
    let mut out = Chain::zero(k - 1);
    for (i, &d) in c.dirs.iter().enumerate() {
        let s: i64 = if i % 2 == 0 { 1 } else { -1 };
        let rest: Vec<u8> = c.dirs.iter().copied().filter(|&x| x != d).collect();
        let mut up = c.base.clone();
        up[d as usize] += 1;
        let sgn = s * c.sign as i64;
        out.add_cell(&Cell { base: up, dirs: rest.clone(), sign: 1 }, sgn);
        out.add_cell(&Cell { base: c.base.clone(), dirs: rest, sign: 1 }, -sgn);
    }
    Ok(out)
}

/// A Z2-valued k-form, stored as the bitset of positive cells where it equals 1.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Z2Form {
    k: usize,
    support: FixedBitSet,
}

impl Z2Form {
    pub fn zero(lat: &Lattice, k: usize) -> Self {
        Z2Form { k, support: FixedBitSet::with_capacity(lat.n_cells(k)) }
    }

    pub fn from_indices(lat: &Lattice, k: usize, idx: impl IntoIterator<Item = usize>) -> Self {
        let mut w = Z2Form::zero(lat, k);
        for i in idx {
            w.support.toggle(i);
        }
        w
    }

    pub fn from_bits(k: usize, support: FixedBitSet) -> Self {
        Z2Form { k, support }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn bits(&self) -> &FixedBitSet {
        &self.support
    }

    /// Value on the positive cell with index `i` (and, by symmetry, on its negative).
    pub fn value(&self, i: usize) -> u8 {
        self.support.contains(i) as u8
    }

    pub fn toggle(&mut self, i: usize) {
        self.support.toggle(i);
    }

    pub fn support_len(&self) -> usize {
        self.support.count_ones(..)
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.support.ones()
    }

    pub fn is_zero(&self) -> bool {
        self.support.is_clear()
    }
}

type CellKey = (Vec<i32>, Vec<u8>);

/// All positive cells of a box with cached incidence.
#[derive(Clone, Debug)]
pub struct Lattice {
    bx: BoxSpec,
    cells: Vec<Vec<Cell>>,
    index: Vec<HashMap<CellKey, u32>>,
    bnd: Vec<Vec<Vec<(u32, i8)>>>,
    cobnd: Vec<Vec<Vec<(u32, i8)>>>,
}

impl Lattice {
    pub fn new(bx: &BoxSpec) -> Self {
        let m = bx.m();
        let mut cells: Vec<Vec<Cell>> = vec![Vec::new(); m + 1];
        for mask in 0u32..(1 << m) {
            let dirs: Vec<u8> = (0..m as u8).filter(|&a| mask >> a & 1 == 1).collect();
            let ranges: Vec<(i32, i32)> = (0..m)
                .map(|a| {
                    let (lo, hi) = bx.extents[a];
                    if mask >> a & 1 == 1 {
                        (lo, hi - 1)
                    } else {
                        (lo, hi)
                    }
                })
                .collect();
            if ranges.iter().any(|(lo, hi)| lo > hi) {
                continue;
            }
            let mut x: Vec<i32> = ranges.iter().map(|r| r.0).collect();
            'outer: loop {
                cells[dirs.len()].push(Cell { base: x.clone(), dirs: dirs.clone(), sign: 1 });
                for a in (0..m).rev() {
                    if x[a] < ranges[a].1 {
                        x[a] += 1;
                        for (b, xb) in x.iter_mut().enumerate().skip(a + 1) {
                            *xb = ranges[b].0;
                        }
                        continue 'outer;
                    }
                }
                break;
            }
        }
        for list in cells.iter_mut() {
            list.sort();
        }
        let index: Vec<HashMap<CellKey, u32>> = cells
            .iter()
            .map(|list| list.iter().enumerate().map(|(i, c)| ((c.base.clone(), c.dirs.clone()), i as u32)).collect())
            .collect();
        let mut bnd: Vec<Vec<Vec<(u32, i8)>>> = vec![Vec::new(); m + 1];
        for k in 1..=m {
            bnd[k] = cells[k]
                .iter()
                .map(|c| {
                    boundary(c)
                        .expect("k >= 1")
                        .iter()
                        .map(|(f, v)| (index[k - 1][&(f.base.clone(), f.dirs.clone())], v as i8))
                        .collect()
                })
                .collect();
        }
        let mut cobnd: Vec<Vec<Vec<(u32, i8)>>> = (0..=m).map(|k| vec![Vec::new(); cells[k].len()]).collect();
        for k in 1..=m {
            for (i, faces) in bnd[k].iter().enumerate() {
                for &(f, v) in faces {
                    cobnd[k - 1][f as usize].push((i as u32, v));
                }
            }
        }
        Lattice { bx: bx.clone(), cells, index, bnd, cobnd }
    }

    pub fn box_spec(&self) -> &BoxSpec {
        &self.bx
    }

    pub fn m(&self) -> usize {
        self.bx.m()
    }

    pub fn n_cells(&self, k: usize) -> usize {
        self.cells.get(k).map_or(0, Vec::len)
    }

    pub fn n_vertices(&self) -> usize {
        self.n_cells(0)
    }

    pub fn n_edges(&self) -> usize {
        self.n_cells(1)
    }

    pub fn n_plaquettes(&self) -> usize {
        self.n_cells(2)
    }

    pub fn cell(&self, k: usize, i: usize) -> &Cell {
        &self.cells[k][i]
    }

    pub fn cells(&self, k: usize) -> &[Cell] {
        &self.cells[k]
    }

    /// Index of the positive representative of `c`, if it lies in the box.
    pub fn index_of(&self, c: &Cell) -> Option<usize> {
        self.index.get(c.k())?.get(&(c.base.clone(), c.dirs.clone())).map(|&i| i as usize)
    }

    pub fn vertex_index(&self, x: &[i32]) -> Option<usize> {
        self.index_of(&Cell::vertex(x))
    }

    pub fn edge_index(&self, x: &[i32], d: usize) -> Option<usize> {
        self.index_of(&Cell::edge(x, d))
    }

    /// Faces of the positive cell `(k, i)` with incidence signs.
    pub fn boundary_of(&self, k: usize, i: usize) -> &[(u32, i8)] {
        &self.bnd[k][i]
    }

    /// Cofaces of the positive cell `(k, i)` inside the box with incidence signs.
    pub fn coboundary_of(&self, k: usize, i: usize) -> &[(u32, i8)] {
        &self.cobnd[k][i]
    }

    /// `(tail, head)` vertex indices of a positive edge.
    pub fn endpoints(&self, e: usize) -> (usize, usize) {
        let b = &self.bnd[1][e];
        let (mut tail, mut head) = (0, 0);
        for &(v, s) in b {
            if s > 0 {
                head = v as usize;
            } else {
                tail = v as usize;
            }
        }
        (tail, head)
    }

    pub fn edge_dir(&self, e: usize) -> usize {
        self.cells[1][e].dirs[0] as usize
    }

    /// Edges of the plaquette `p`.
    pub fn plaquette_edges(&self, p: usize) -> impl Iterator<Item = usize> + '_ {
        self.bnd[2][p].iter().map(|&(e, _)| e as usize)
    }

    /// Plaquettes containing edge `e`.
    pub fn edge_plaquettes(&self, e: usize) -> impl Iterator<Item = usize> + '_ {
        self.cobnd[1][e].iter().map(|&(p, _)| p as usize)
    }

    /// Edges incident to vertex `v`.
    pub fn vertex_edges(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.cobnd[0][v].iter().map(|&(e, _)| e as usize)
    }

    /// True when the edge has the full `2(m-1)` cofaces and each of them has
    /// the full `2(m-2)` cofaces, so its single-edge vortex looks like the bulk one.
    pub fn is_interior_edge(&self, e: usize) -> bool {
        let m = self.m();
        self.cobnd[1][e].len() == 2 * (m - 1) && self.edge_plaquettes(e).all(|p| self.is_interior_plaquette(p))
    }

    pub fn is_interior_plaquette(&self, p: usize) -> bool {
        let m = self.m();
        m < 3 || self.cobnd[2][p].len() == 2 * (m - 2)
    }

    fn check_cell(&self, c: &Cell) -> Result<usize> {
        if c.m() != self.m() {
            return Err(Error::Dimension(format!(
                "cell in dimension {} used on a box of dimension {}",
                c.m(),
                self.m()
            )));
        }
        self.index_of(c).ok_or_else(|| Error::Invalid(format!("cell {c} lies outside the box")))
    }

    /// Oriented coboundary, clipped to the box.
    pub fn coboundary(&self, c: &Cell) -> Result<Chain> {
        let k = c.k();
        if k >= self.m() {
            return Err(Error::Dimension(format!("coboundary of a {k}-cell in dimension {}", self.m())));
        }
        let i = self.check_cell(c)?;
        let mut out = Chain::zero(k + 1);
        for &(j, s) in &self.cobnd[k][i] {
            out.add_cell(&self.cells[k + 1][j as usize], s as i64 * c.sign as i64);
        }
        Ok(out)
    }

    /// `(d w)(c) = w(boundary c)` over Z2.
    pub fn differential(&self, w: &Z2Form) -> Result<Z2Form> {
        let k = w.k();
        if k >= self.m() {
            return Err(Error::Dimension(format!("d of a {k}-form in dimension {}", self.m())));
        }
        let mut out = Z2Form::zero(self, k + 1);
        for i in w.ones() {
            for &(j, _) in &self.cobnd[k][i] {
                out.toggle(j as usize);
            }
        }
        Ok(out)
    }

    /// `w(q) = sum_c q[c] w(c)` reduced mod 2.
    pub fn evaluate(&self, w: &Z2Form, q: &Chain) -> Result<u8> {
        if w.k() != q.k() {
            return Err(Error::Dimension(format!("evaluating a {}-form on a {}-chain", w.k(), q.k())));
        }
        let mut acc = 0i64;
        for (c, v) in q.iter() {
            let i = self.check_cell(c)?;
            acc += v * w.value(i) as i64;
        }
        Ok(acc.rem_euclid(2) as u8)
    }

    /// Turns a chain into a bitset over positive k-cells (support mod 2).
    pub fn chain_to_z2(&self, q: &Chain) -> Result<FixedBitSet> {
        let mut bits = FixedBitSet::with_capacity(self.n_cells(q.k()));
        for (c, v) in q.iter() {
            let i = self.check_cell(c)?;
            if v.rem_euclid(2) == 1 {
                bits.insert(i);
            }
        }
        Ok(bits)
    }
}
