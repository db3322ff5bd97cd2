//! Polymer cluster expansion of the high-temperature representation.
//!
//! A [`PolymerPool`] holds a truncated set of closed paths and vortices together
//! with their interaction matrix. Clusters are multisets of pool members whose
//! interaction graph is connected; they are produced by growing connected sets of
//! distinct members from a root and then distributing multiplicities within the
//! norm and size cutoffs.

pub mod bounds;
pub mod decomposition;
pub mod expansion;
pub mod ursell;

use fixedbitset::FixedBitSet;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{ActionConvention, ModelParams};
use crate::lattice::Lattice;
use crate::polymer::enumerate::{esu_from_root, EsuVisitor};
use crate::polymer::{
    enumerate_closed_paths, enumerate_vortices, path_adjacent, surface_z2, vortex_adjacent, EdgeFilter, EnumLimits,
    PathPolymer, Polymer, SurfaceConstruction, VortexPolymer, VortexQuery,
};

pub use bounds::{bound_diagnostics, power_series_tail, BoundOptions, BoundReport, LemmaCheck};
pub use decomposition::{minimal_vortex_decomposition, Decomposition};
pub use expansion::{Expansion, LogRatio, TailReport, VarthetaTotal};
pub use ursell::{ursell, ursell_matrix, ursell_minimal_factorization, DEFAULT_URSELL_LIMIT};

/// Polymer activities at `(beta, kappa)` in dimension `m`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Activities {
    pub beta: f64,
    pub kappa: f64,
    pub m: usize,
    #[serde(default)]
    pub convention: ActionConvention,
}

impl Activities {
    pub fn new(params: &ModelParams) -> Self {
        Activities { beta: params.beta, kappa: params.kappa, m: params.bx.m(), convention: params.convention }
    }

    /// `tanh(c kappa)`, i.e. `tanh 2 kappa` in the default convention.
    pub fn t(&self) -> f64 {
        (self.convention.factor() * self.kappa).tanh()
    }

    pub fn log_phi_path(&self, len: usize) -> f64 {
        if len == 0 {
            0.0
        } else {
            len as f64 * self.t().ln()
        }
    }

    pub fn log_phi_vortex(&self, support: usize) -> f64 {
        if self.beta.is_infinite() {
            f64::NEG_INFINITY
        } else {
            -2.0 * self.convention.factor() * self.beta * support as f64
        }
    }

    /// Activity of a minimal vortex, `exp(-8(m-1) beta)` in the default convention.
    pub fn xi(&self) -> f64 {
        self.log_phi_vortex(2 * (self.m - 1)).exp()
    }

    /// Activity of the smallest non-minimal vortex, whose support has
    /// `4(m-1) - 2` plaquettes.
    pub fn xi_hat(&self) -> f64 {
        self.log_phi_vortex(4 * (self.m - 1) - 2).exp()
    }
}

/// Which edges path polymers may use.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathRegion {
    #[default]
    All,
    /// Only edges carrying a bulk-like minimal vortex.
    Interior,
}

/// Expansion parameters and truncation cutoffs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct ExpansionConfig {
    pub alpha: f64,
    pub a: f64,
    /// Largest `||C||_1`.
    pub max_norm1: usize,
    /// Largest `||C||_2`.
    pub max_norm2: usize,
    /// Largest number of polymers in a cluster, counted with multiplicity.
    pub max_cluster_size: usize,
    #[serde(default = "default_ursell_limit")]
    pub ursell_limit: usize,
    #[serde(default)]
    pub path_region: PathRegion,
    #[serde(default)]
    pub construction: SurfaceConstruction,
    /// Guard on the number of clusters visited.
    #[serde(default = "default_max_clusters")]
    pub max_clusters: u64,
}

fn default_ursell_limit() -> usize {
    DEFAULT_URSELL_LIMIT
}

fn default_max_clusters() -> u64 {
    200_000_000
}

impl Default for ExpansionConfig {
    fn default() -> Self {
        ExpansionConfig {
            alpha: 0.5,
            a: 0.5,
            max_norm1: 8,
            max_norm2: 4,
            max_cluster_size: 4,
            ursell_limit: DEFAULT_URSELL_LIMIT,
            path_region: PathRegion::All,
            construction: SurfaceConstruction::Staircase,
            max_clusters: default_max_clusters(),
        }
    }
}

impl ExpansionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) || !(self.a > 0.0 && self.a < 1.0) {
            return Err(Error::Invalid("alpha and a must lie in (0, 1)".into()));
        }
        if self.max_cluster_size == 0 {
            return Err(Error::Invalid("maxClusterSize must be positive".into()));
        }
        if self.max_cluster_size > self.ursell_limit {
            return Err(Error::Invalid(format!(
                "maxClusterSize {} exceeds the Ursell limit {}",
                self.max_cluster_size, self.ursell_limit
            )));
        }
        if self.ursell_limit > ursell::MAX_URSELL_LIMIT {
            return Err(Error::Invalid(format!("Ursell limit above {}", ursell::MAX_URSELL_LIMIT)));
        }
        Ok(())
    }
}

/// Truncated polymer set with cached interactions.
pub struct PolymerPool {
    polymers: Vec<Polymer>,
    /// `|gamma|` or `|supp omega^+|`.
    size: Vec<u32>,
    log_phi: Vec<f64>,
    zeta: Vec<i8>,
    adj: Vec<Vec<u32>>,
    n_paths: usize,
}

impl PolymerPool {
    /// Pool of the given paths (all closed) followed by the given vortices.
    pub fn new(
        lat: &Lattice,
        paths: Vec<PathPolymer>,
        vortices: Vec<VortexPolymer>,
        act: &Activities,
        construction: SurfaceConstruction,
    ) -> Result<Self> {
        let n_paths = paths.len();
        let surfaces: Vec<FixedBitSet> =
            paths.par_iter().map(|p| surface_z2(lat, p.edge_bits(), construction)).collect::<Result<_>>()?;
        let n = n_paths + vortices.len();
        if n > 12_000 {
            return Err(Error::Resource(format!("polymer pool of {n} members is too large")));
        }
        let rows: Vec<Vec<i8>> = (0..n)
            .into_par_iter()
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let (a, b) = (i.min(j), i.max(j));
                        match (a < n_paths, b < n_paths) {
                            (true, true) => path_adjacent(&paths[a], &paths[b]) as i8,
                            (false, false) => vortex_adjacent(&vortices[a - n_paths], &vortices[b - n_paths]) as i8,
                            _ => 2 * vortices[b - n_paths].eval_on(&surfaces[a]) as i8,
                        }
                    })
                    .collect()
            })
            .collect();
        let zeta: Vec<i8> = rows.into_iter().flatten().collect();
        let adj =
            (0..n).map(|i| (0..n).filter(|&j| j != i && zeta[i * n + j] != 0).map(|j| j as u32).collect()).collect();
        let mut size = Vec::with_capacity(n);
        let mut log_phi = Vec::with_capacity(n);
        for p in &paths {
            size.push(p.len() as u32);
            log_phi.push(act.log_phi_path(p.len()));
        }
        for v in &vortices {
            size.push(v.support_size() as u32);
            log_phi.push(act.log_phi_vortex(v.support_size()));
        }
        let polymers = paths.into_iter().map(Polymer::Path).chain(vortices.into_iter().map(Polymer::Vortex)).collect();
        Ok(PolymerPool { polymers, size, log_phi, zeta, adj, n_paths })
    }

    /// Enumerates the polymers allowed by the cutoffs: closed paths up to
    /// `max_norm1` edges and vortices up to `max_norm2` plaquettes (none at
    /// `beta = infinity`).
    pub fn build(lat: &Lattice, act: &Activities, cfg: &ExpansionConfig, limits: EnumLimits) -> Result<Self> {
        cfg.validate()?;
        let filter = match cfg.path_region {
            PathRegion::All => EdgeFilter::all(),
            PathRegion::Interior => EdgeFilter::interior(lat),
        };
        let paths =
            if act.kappa > 0.0 { enumerate_closed_paths(lat, cfg.max_norm1, &filter, limits)? } else { Vec::new() };
        let vortices = if act.beta.is_finite() {
            enumerate_vortices(lat, VortexQuery { max_support: cfg.max_norm2, interior_only: false }, limits)?
        } else {
            Vec::new()
        };
        Self::new(lat, paths, vortices, act, cfg.construction)
    }

    pub fn len(&self) -> usize {
        self.polymers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.polymers.is_empty()
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn polymer(&self, i: usize) -> &Polymer {
        &self.polymers[i]
    }

    pub fn is_path(&self, i: usize) -> bool {
        i < self.n_paths
    }

    pub fn path(&self, i: usize) -> Option<&PathPolymer> {
        match &self.polymers[i] {
            Polymer::Path(p) => Some(p),
            Polymer::Vortex(_) => None,
        }
    }

    pub fn vortex(&self, i: usize) -> Option<&VortexPolymer> {
        match &self.polymers[i] {
            Polymer::Vortex(v) => Some(v),
            Polymer::Path(_) => None,
        }
    }

    pub fn size_of(&self, i: usize) -> usize {
        self.size[i] as usize
    }

    #[inline]
    pub fn zeta(&self, i: usize, j: usize) -> i32 {
        self.zeta[i * self.polymers.len() + j] as i32
    }

    /// Bitset of the path members.
    pub fn path_mask(&self) -> FixedBitSet {
        let mut b = FixedBitSet::with_capacity(self.len());
        b.insert_range(..self.n_paths);
        b
    }

    /// Members selected by a predicate.
    pub fn mask_where(&self, pred: impl Fn(&Polymer) -> bool) -> FixedBitSet {
        let mut b = FixedBitSet::with_capacity(self.len());
        for (i, p) in self.polymers.iter().enumerate() {
            if pred(p) {
                b.insert(i);
            }
        }
        b
    }

    /// Runs `f` on every cluster that contains at least one member flagged in
    /// `roots`, uses only members flagged in `allowed` (all when `None`) and respects
    /// the cutoffs. Each worker owns an accumulator of `width` numbers; partial
    /// results are added in root order, so sums are deterministic.
    pub fn fold_clusters<F>(
        &self,
        roots: &FixedBitSet,
        allowed: Option<&FixedBitSet>,
        cfg: &ExpansionConfig,
        width: usize,
        f: F,
    ) -> Result<Vec<f64>>
    where
        F: Fn(&ClusterView<'_>, &mut [f64]) + Sync,
    {
        cfg.validate()?;
        let n = self.len();
        let ok = |i: usize| allowed.is_none_or(|a| a.contains(i));
        let root_list: Vec<usize> = roots.ones().filter(|&r| r < n && ok(r)).collect();
        // Root-eligible members come first so every cluster meets one at its minimum.
        let mut rank = vec![0u32; n];
        let mut next = 0u32;
        for &r in &root_list {
            rank[r] = next;
            next += 1;
        }
        for (i, slot) in rank.iter_mut().enumerate() {
            if !roots.contains(i) {
                *slot = next;
                next += 1;
            }
        }
        let parts: Vec<(Vec<f64>, u64)> = root_list
            .par_iter()
            .map(|&root| {
                let mut v = Grower {
                    pool: self,
                    cfg,
                    norm1: 0,
                    norm2: 0,
                    acc: vec![0.0; width],
                    f: &f,
                    cache: ursell::UrsellCache::default(),
                    visited: 0,
                    mult: Vec::new(),
                    items: Vec::new(),
                };
                esu_from_root(&self.adj, &rank, root, &ok, cfg.max_cluster_size, &mut v);
                (v.acc, v.visited)
            })
            .collect();
        let visited: u64 = parts.iter().map(|p| p.1).sum();
        if visited > cfg.max_clusters {
            return Err(Error::Resource(format!(
                "cluster enumeration visited {visited} clusters, above the limit {}",
                cfg.max_clusters
            )));
        }
        let mut out = vec![0.0; width];
        for (acc, _) in parts {
            for (o, a) in out.iter_mut().zip(acc) {
                *o += a;
            }
        }
        Ok(out)
    }
}

/// A cluster as seen by a fold callback.
pub struct ClusterView<'a> {
    pub pool: &'a PolymerPool,
    /// Distinct pool members.
    pub members: &'a [usize],
    /// Multiplicity of each member.
    pub mult: &'a [u32],
    /// `Psi(C) = U(C) prod phi^n / prod n!`.
    pub weight: f64,
    pub ursell: i128,
    pub norm1: usize,
    pub norm2: usize,
}

impl ClusterView<'_> {
    /// Number of polymers counted with multiplicity.
    pub fn size(&self) -> usize {
        self.mult.iter().map(|&n| n as usize).sum()
    }

    pub fn is_path_only(&self) -> bool {
        self.norm2 == 0
    }

    /// Iterates `(member, multiplicity)`.
    pub fn items(&self) -> impl Iterator<Item = (usize, u32)> + '_ {
        self.members.iter().copied().zip(self.mult.iter().copied())
    }

    /// `deg_C e`: number of paths in the cluster, with multiplicity, using edge `e`.
    pub fn degree(&self, e: usize) -> usize {
        self.items().filter_map(|(i, n)| self.pool.path(i).filter(|p| p.contains_edge(e)).map(|_| n as usize)).sum()
    }

    /// Whether some path of the cluster shares a vertex with `gamma`.
    pub fn paths_touch(&self, gamma: &PathPolymer) -> bool {
        self.members.iter().any(|&i| self.pool.path(i).is_some_and(|p| path_adjacent(p, gamma)))
    }

    /// `rho(C^2(q))` for a Z2 surface `q`.
    pub fn vortex_sign(&self, q: &FixedBitSet) -> f64 {
        let mut odd = 0u32;
        for (i, n) in self.items() {
            if let Some(v) = self.pool.vortex(i) {
                odd += n * v.eval_on(q) as u32;
            }
        }
        if odd.is_multiple_of(2) {
            1.0
        } else {
            -1.0
        }
    }

    /// Edges in the support: path edges, and the boundary edges of vortex plaquettes.
    pub fn touches_edge(&self, lat: &Lattice, e: usize) -> bool {
        self.members.iter().any(|&i| match self.pool.polymer(i) {
            Polymer::Path(p) => p.contains_edge(e),
            Polymer::Vortex(v) => v.touches_edge(lat, e),
        })
    }
}

struct Grower<'a, F> {
    pool: &'a PolymerPool,
    cfg: &'a ExpansionConfig,
    norm1: usize,
    norm2: usize,
    acc: Vec<f64>,
    f: &'a F,
    cache: ursell::UrsellCache,
    visited: u64,
    mult: Vec<u32>,
    items: Vec<usize>,
}

impl<F> Grower<'_, F>
where
    F: Fn(&ClusterView<'_>, &mut [f64]),
{
    fn norms_of(&self, i: usize) -> (usize, usize) {
        if self.pool.is_path(i) {
            (self.pool.size_of(i), 0)
        } else {
            (0, self.pool.size_of(i))
        }
    }

    /// Distributes extra multiplicity over members `from..` and emits every result.
    fn spread(&mut self, set: &[usize], from: usize, n1: usize, n2: usize, count: usize) {
        self.emit(set, n1, n2);
        if self.visited > self.cfg.max_clusters {
            return;
        }
        for j in from..set.len() {
            let (a, b) = self.norms_of(set[j]);
            if count < self.cfg.max_cluster_size && n1 + a <= self.cfg.max_norm1 && n2 + b <= self.cfg.max_norm2 {
                self.mult[j] += 1;
                self.spread(set, j, n1 + a, n2 + b, count + 1);
                self.mult[j] -= 1;
            }
        }
    }

    fn emit(&mut self, set: &[usize], n1: usize, n2: usize) {
        self.visited += 1;
        self.items.clear();
        for (j, &i) in set.iter().enumerate() {
            for _ in 0..self.mult[j] {
                self.items.push(i);
            }
        }
        let k = self.items.len();
        let pool = self.pool;
        let items = &self.items;
        let u = self.cache.get(k, |a, b| pool.zeta(items[a], items[b]));
        if u == 0 {
            return;
        }
        let mut log_w = 0.0;
        let mut fact = 1.0;
        for (j, &i) in set.iter().enumerate() {
            let n = self.mult[j];
            log_w += n as f64 * pool.log_phi[i];
            for r in 2..=n {
                fact *= r as f64;
            }
        }
        let weight = u as f64 * log_w.exp() / fact;
        let view = ClusterView { pool, members: set, mult: &self.mult, weight, ursell: u, norm1: n1, norm2: n2 };
        (self.f)(&view, &mut self.acc);
    }
}

impl<F> EsuVisitor for Grower<'_, F>
where
    F: Fn(&ClusterView<'_>, &mut [f64]),
{
    fn push(&mut self, i: usize) {
        let (a, b) = self.norms_of(i);
        self.norm1 += a;
        self.norm2 += b;
    }

    fn pop(&mut self, i: usize) {
        let (a, b) = self.norms_of(i);
        self.norm1 -= a;
        self.norm2 -= b;
    }

    fn visit(&mut self, set: &[usize]) -> bool {
        if self.norm1 > self.cfg.max_norm1 || self.norm2 > self.cfg.max_norm2 || self.visited > self.cfg.max_clusters {
            return false;
        }
        self.mult.clear();
        self.mult.resize(set.len(), 1);
        let (n1, n2) = (self.norm1, self.norm2);
        self.spread(set, 0, n1, n2, set.len());
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::BoxSpec;

    fn setup(kappa: f64, beta: f64) -> (Lattice, Activities) {
        let p = ModelParams::new(BoxSpec::new(vec![(0, 3), (0, 2)]).unwrap(), beta, kappa).unwrap();
        (Lattice::new(&p.bx), Activities::new(&p))
    }

    #[test]
    fn activities() {
        let (_, act) = setup(0.05, 2.0);
        assert!((act.xi() - (-8.0f64 * 2.0).exp()).abs() < 1e-20);
        assert!((act.t() - 0.1f64.tanh()).abs() < 1e-15);
        let act3 = Activities { m: 3, ..act };
        assert_eq!(act3.xi(), (-16.0f64 * 2.0).exp());
        assert_eq!(act3.xi_hat(), (-4.0f64 * 2.0 * 6.0).exp());
    }

    #[test]
    fn singleton_and_pair_weights() {
        let (lat, act) = setup(0.05, 2.0);
        let cfg = ExpansionConfig { max_norm1: 8, max_norm2: 0, max_cluster_size: 2, ..Default::default() };
        let pool = PolymerPool::build(&lat, &act, &cfg, EnumLimits::default()).unwrap();
        let t4 = act.t().powi(4);
        let mut roots = FixedBitSet::with_capacity(pool.len());
        roots.insert(0);
        let w = pool
            .fold_clusters(&roots, None, &cfg, 3, |c, acc| {
                if c.members == [0] && c.mult == [1] {
                    acc[0] += c.weight;
                }
                if c.members == [0] && c.mult == [2] {
                    acc[1] += c.weight;
                }
                if c.members.len() == 2 && c.norm1 == 8 {
                    acc[2] += c.weight;
                }
            })
            .unwrap();
        assert!((w[0] - t4).abs() < 1e-18);
        // Two copies of one loop: U = -1, divided by 2!.
        assert!((w[1] + t4 * t4 / 2.0).abs() < 1e-20);
        // Pairs of distinct adjacent unit loops each weigh -t^8.
        assert!(w[2] < 0.0);
        assert!(((w[2] / (-t4 * t4)).round() - w[2] / (-t4 * t4)).abs() < 1e-9);
    }

    #[test]
    fn path_only_weights_ignore_beta() {
        let cfg = ExpansionConfig { max_norm1: 8, max_norm2: 2, max_cluster_size: 3, ..Default::default() };
        let mut sums = Vec::new();
        for beta in [0.5, 2.0, 7.0] {
            let (lat, act) = setup(0.1, beta);
            let pool = PolymerPool::build(&lat, &act, &cfg, EnumLimits::default()).unwrap();
            let mut roots = FixedBitSet::with_capacity(pool.len());
            roots.insert_range(..pool.len());
            let s = pool
                .fold_clusters(&roots, None, &cfg, 1, |c, acc| {
                    if c.is_path_only() {
                        acc[0] += c.weight;
                    }
                })
                .unwrap();
            sums.push(s[0]);
        }
        assert_eq!(sums[0], sums[1]);
        assert_eq!(sums[1], sums[2]);
    }

    #[test]
    fn zeta_ranges() {
        let p = ModelParams::new(BoxSpec::new(vec![(0, 2), (0, 2), (0, 2)]).unwrap(), 1.0, 0.1).unwrap();
        let lat = Lattice::new(&p.bx);
        let act = Activities::new(&p);
        let cfg = ExpansionConfig { max_norm1: 6, max_norm2: 6, max_cluster_size: 2, ..Default::default() };
        let pool = PolymerPool::build(&lat, &act, &cfg, EnumLimits::default()).unwrap();
        assert!(pool.n_paths() > 0 && pool.len() > pool.n_paths());
        for i in 0..pool.len() {
            assert_eq!(pool.zeta(i, i), 1);
            for j in 0..pool.len() {
                let z = pool.zeta(i, j);
                assert_eq!(z, pool.zeta(j, i));
                match (pool.is_path(i), pool.is_path(j)) {
                    (true, true) | (false, false) => assert!(z == 0 || z == 1),
                    _ => assert!(z == 0 || z == 2),
                }
            }
        }
    }
}
