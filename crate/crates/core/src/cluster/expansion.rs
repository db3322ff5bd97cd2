//! Truncated cluster sums: `log(Zcheck[gamma_n, gamma0] / Zcheck[0])` and the path
//! measure `vartheta`.

use fixedbitset::FixedBitSet;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Activities, ExpansionConfig, PathRegion, PolymerPool};
use crate::error::{Error, Result};
use crate::exact::ModelParams;
use crate::lattice::Lattice;
use crate::polymer::{
    enumerate_connecting_paths, path_adjacent, surface_z2, EdgeFilter, EnumLimits, PathPolymer, Polymer,
};

/// Truncation bookkeeping for a cluster sum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TailReport {
    pub max_norm1: usize,
    pub max_norm2: usize,
    pub max_cluster_size: usize,
    /// `sum |Psi f|` over the highest nonempty `||C||_1` shell.
    pub last_shell: f64,
    /// Geometric continuation of the last two nonempty shells; infinite if they grow.
    pub geometric_tail: f64,
    /// Bound on the omitted path clusters from the power-cluster inequality.
    pub lemma_bound: f64,
}

/// A truncated `log(Zcheck[gamma_n, gamma0] / Zcheck[0])`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LogRatio {
    pub value: f64,
    pub n_roots: usize,
    pub tail: TailReport,
}

/// `vartheta(Lambda^{gamma_n})` summed over connecting paths up to a length.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct VarthetaTotal {
    pub total: f64,
    pub n_paths: usize,
    pub max_len: usize,
    /// `(|gamma|, vartheta mass of paths of that length)`.
    pub by_length: Vec<(usize, f64)>,
}

impl VarthetaTotal {
    /// Mass of the paths longer than `k`.
    pub fn mass_above(&self, k: usize) -> f64 {
        self.by_length.iter().filter(|(l, _)| *l > k).map(|(_, w)| w).sum()
    }
}

/// A lattice, activities, cutoffs and the polymer pool they determine.
pub struct Expansion {
    lat: Lattice,
    act: Activities,
    cfg: ExpansionConfig,
    pool: PolymerPool,
}

impl Expansion {
    pub fn new(params: &ModelParams, cfg: ExpansionConfig) -> Result<Self> {
        Self::with_limits(params, cfg, EnumLimits::default())
    }

    pub fn with_limits(params: &ModelParams, cfg: ExpansionConfig, limits: EnumLimits) -> Result<Self> {
        params.validate()?;
        cfg.validate()?;
        let lat = Lattice::new(&params.bx);
        let act = Activities::new(params);
        let pool = PolymerPool::build(&lat, &act, &cfg, limits)?;
        Ok(Expansion { lat, act, cfg, pool })
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lat
    }

    pub fn activities(&self) -> &Activities {
        &self.act
    }

    pub fn config(&self) -> &ExpansionConfig {
        &self.cfg
    }

    pub fn pool(&self) -> &PolymerPool {
        &self.pool
    }

    pub(crate) fn edge_filter(&self) -> EdgeFilter {
        match self.cfg.path_region {
            PathRegion::All => EdgeFilter::all(),
            PathRegion::Interior => EdgeFilter::interior(&self.lat),
        }
    }

    /// Surface of `gamma_n + gamma0`, which must be closed.
    pub(crate) fn insertion_surface(&self, gamma_n: &PathPolymer, gamma0: &PathPolymer) -> Result<FixedBitSet> {
        let c = gamma_n.sum(&self.lat, gamma0);
        if !c.is_closed(&self.lat) {
            return Err(Error::Precondition("gamma_n + gamma0 is not closed".into()));
        }
        surface_z2(&self.lat, c.edge_bits(), self.cfg.construction)
    }

    /// Members whose presence can make `rho(C^2(q)) 1(C^1 !~ gamma0) - 1` nonzero.
    pub(crate) fn active_roots(&self, q: &FixedBitSet, gamma0: &PathPolymer) -> FixedBitSet {
        self.pool.mask_where(|p| match p {
            Polymer::Path(g) => path_adjacent(g, gamma0),
            Polymer::Vortex(w) => w.eval_on(q) == 1,
        })
    }

    /// `sum_C Psi(C) (rho(C^2(q_{gamma_n+gamma0})) 1(C^1 !~ gamma0) - 1)` over the
    /// truncated cluster set. Clusters touching neither `gamma0` nor the surface
    /// contribute zero and are skipped.
    pub fn truncated_log_ratio(&self, gamma_n: &PathPolymer, gamma0: &PathPolymer) -> Result<LogRatio> {
        let q = self.insertion_surface(gamma_n, gamma0)?;
        let roots = self.active_roots(&q, gamma0);
        let n1 = self.cfg.max_norm1;
        let acc = self.pool.fold_clusters(&roots, None, &self.cfg, n1 + 2, |c, acc| {
            let keep = if c.paths_touch(gamma0) { 0.0 } else { 1.0 };
            let term = c.weight * (c.vortex_sign(&q) * keep - 1.0);
            acc[0] += term;
            acc[1 + c.norm1.min(n1)] += term.abs();
        })?;
        let tail = self.tail_report(&acc[1..], gamma_n.len() + gamma0.len());
        Ok(LogRatio { value: acc[0], n_roots: roots.count_ones(..), tail })
    }

    pub(crate) fn tail_report(&self, shells: &[f64], touching_edges: usize) -> TailReport {
        let nonzero: Vec<(usize, f64)> =
            shells.iter().copied().enumerate().filter(|&(k, s)| k > 0 && s > 0.0).collect();
        let last_shell = nonzero.last().map_or(0.0, |s| s.1);
        let geometric_tail = match nonzero.as_slice() {
            [.., (ka, sa), (kb, sb)] => {
                let r = (sb / sa).powf(1.0 / (kb - ka) as f64);
                if r < 1.0 {
                    sb * r / (1.0 - r)
                } else {
                    f64::INFINITY
                }
            }
            _ => 0.0,
        };
        let t = self.act.t();
        let (a, alpha) = (self.cfg.a, self.cfg.alpha);
        let lemma_bound = if t == 0.0 {
            0.0
        } else {
            2.0 * touching_edges as f64
                * t.powf(a * (1.0 - alpha))
                * super::bounds::power_series_tail(t.powf(1.0 - a), 0.0, self.cfg.max_norm1 + 1)
        };
        TailReport {
            max_norm1: self.cfg.max_norm1,
            max_norm2: self.cfg.max_norm2,
            max_cluster_size: self.cfg.max_cluster_size,
            last_shell,
            geometric_tail,
            lemma_bound,
        }
    }

    /// `sum_{C in Xi^1, C ~ gamma} Psi_kappa(C)`: the path clusters that the
    /// `vartheta` exponent sees.
    pub fn path_cluster_sum(&self, gamma: &PathPolymer) -> Result<f64> {
        let paths = self.pool.path_mask();
        let roots = self.pool.mask_where(|p| match p {
            Polymer::Path(g) => path_adjacent(g, gamma),
            Polymer::Vortex(_) => false,
        });
        Ok(self.pool.fold_clusters(&roots, Some(&paths), &self.cfg, 1, |c, acc| acc[0] += c.weight)?[0])
    }

    /// `vartheta(gamma) = t^{|gamma|} exp(-sum_{C in Xi^1, C ~ gamma} Psi_kappa(C))`.
    pub fn vartheta_weight(&self, gamma: &PathPolymer) -> Result<f64> {
        let t = self.act.t();
        if gamma.is_empty() {
            return Ok(1.0);
        }
        if t == 0.0 {
            return Ok(0.0);
        }
        Ok((gamma.len() as f64 * t.ln() - self.path_cluster_sum(gamma)?).exp())
    }

    /// `vartheta` summed over the connecting paths of `gamma_n` with at most
    /// `max_len` edges.
    pub fn vartheta_total(&self, gamma_n: &PathPolymer, max_len: usize) -> Result<VarthetaTotal> {
        let max_len = max_len.min(self.lat.n_edges());
        let paths =
            enumerate_connecting_paths(&self.lat, gamma_n, max_len, &self.edge_filter(), EnumLimits::default())?;
        let weights: Vec<(usize, f64)> =
            paths.par_iter().map(|g| Ok((g.len(), self.vartheta_weight(g)?))).collect::<Result<_>>()?;
        let mut by_length: Vec<(usize, f64)> = Vec::new();
        for &(l, w) in &weights {
            match by_length.last_mut() {
                Some((k, s)) if *k == l => *s += w,
                _ => by_length.push((l, w)),
            }
        }
        Ok(VarthetaTotal { total: weights.iter().map(|w| w.1).sum(), n_paths: paths.len(), max_len, by_length })
    }
}
