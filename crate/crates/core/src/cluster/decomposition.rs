//! Splitting the cluster sum into the minimal-vortex main terms and error terms.
//!
//! For `gamma in Lambda^{gamma_n}` and `c = gamma_n + gamma`, clusters with
//! `||C||_2 <= 2(m-1)` fall into: (i) one minimal vortex alone, worth
//! `-2 xi 1(e in c)`; (ii) path clusters; (iii) path clusters plus one minimal
//! vortex `omega_e`, worth `-2 xi Psi(C^1) deg_{C^1} e` by the Ursell
//! factorization. Case (iii) is then regrouped into the `||C||`-weighted sum, the
//! degree sum over `gamma_n` and `E3`. Everything else with `||C||_2 > 2(m-1)` is
//! `E1`; small boundary vortices and repeated vortices form a residual.

use serde::{Deserialize, Serialize};

use super::expansion::Expansion;
use super::PathRegion;
use crate::error::{Error, Result};
use crate::polymer::{path_adjacent, PathPolymer, Polymer};

/// The pieces of the decomposition. Their sum reproduces the direct truncated sum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Decomposition {
    /// `-2 xi |gamma_n| - 2 xi |gamma|`.
    pub main_terms: f64,
    /// `4 xi |supp gamma_n cap supp gamma|`.
    pub e2: f64,
    /// `sum_{C in Xi^1} Psi (1(C !~ gamma) - 1)`.
    pub path_cluster_sum: f64,
    /// `-2 xi sum_{C in Xi^1} Psi ||C|| (1(C !~ gamma) - 1)`.
    pub norm_weighted_sum: f64,
    /// `4 xi sum_{C in Xi^1} sum_{e in gamma_n} Psi deg_C e`.
    pub degree_sum: f64,
    /// `-4 xi sum_{C in Xi^1, C ~ gamma} sum_{e in gamma_n} Psi deg_C e`.
    pub e3: f64,
    /// Truncated sum over clusters with `||C||_2 > 2(m-1)`.
    pub e1: f64,
    /// `2 (|gamma_n| + |gamma|) xi_hat^{1-a} t^{a(1-alpha)}`.
    pub e1_bound: f64,
    /// Clusters with `0 < ||C||_2 <= 2(m-1)` outside cases (i) and (iii).
    pub residual: f64,
    /// Sum of all pieces above except `e1_bound`.
    pub total: f64,
    /// The truncated log ratio computed directly.
    pub direct: f64,
}

/// Decomposes `log(Zcheck[gamma_n, gamma] / Zcheck[0])` over the truncated cluster
/// set of `ex`. Needs `m >= 3`, interior-only path polymers, minimal vortices in the
/// pool and every edge of `gamma_n` and `gamma` interior.
pub fn minimal_vortex_decomposition(
    ex: &Expansion,
    gamma_n: &PathPolymer,
    gamma: &PathPolymer,
) -> Result<Decomposition> {
    let lat = ex.lattice();
    let m = lat.m();
    let cfg = ex.config();
    let act = ex.activities();
    let min_support = 2 * (m - 1);
    if m < 3 {
        return Err(Error::Precondition("the minimal-vortex decomposition needs m >= 3".into()));
    }
    if cfg.path_region != PathRegion::Interior {
        return Err(Error::Precondition("path polymers must be restricted to interior edges".into()));
    }
    if cfg.max_norm2 < min_support {
        return Err(Error::Precondition(format!("maxNorm2 must be at least {min_support}")));
    }
    if !gamma_n.edges().iter().chain(gamma.edges()).all(|&e| lat.is_interior_edge(e as usize)) {
        return Err(Error::Precondition("gamma_n and gamma must use interior edges only".into()));
    }
    let xi = act.xi();
    let pool = ex.pool();
    let s_max = cfg.max_cluster_size;

    // Direct sum, with the clusters carrying vortices split into cases.
    let q = ex.insertion_surface(gamma_n, gamma)?;
    let roots = ex.active_roots(&q, gamma);
    let direct = pool.fold_clusters(&roots, None, cfg, 3, |c, acc| {
        let keep = if c.paths_touch(gamma) { 0.0 } else { 1.0 };
        let term = c.weight * (c.vortex_sign(&q) * keep - 1.0);
        acc[0] += term;
        if c.norm2 > min_support {
            acc[1] += term;
        } else if c.norm2 > 0 {
            let single_minimal = c.items().filter(|&(i, _)| !pool.is_path(i)).count() == 1
                && c.items().any(|(i, n)| n == 1 && pool.vortex(i).is_some_and(|v| v.is_minimal()));
            if !single_minimal {
                acc[2] += term;
            }
        }
    })?;

    // Path-only sums, over clusters touching gamma or using an edge of gamma_n.
    let paths = pool.path_mask();
    let path_roots = pool.mask_where(|p| match p {
        Polymer::Path(g) => path_adjacent(g, gamma) || gamma_n.edges().iter().any(|&e| g.contains_edge(e as usize)),
        Polymer::Vortex(_) => false,
    });
    let sums = pool.fold_clusters(&path_roots, Some(&paths), cfg, 4, |c, acc| {
        let touches = c.paths_touch(gamma);
        let f = if touches { -1.0 } else { 0.0 };
        acc[0] += c.weight * f;
        if c.size() < s_max {
            acc[1] += c.weight * c.norm1 as f64 * f;
            let deg: usize = gamma_n.edges().iter().map(|&e| c.degree(e as usize)).sum();
            acc[2] += c.weight * deg as f64;
            if touches {
                acc[3] += c.weight * deg as f64;
            }
        }
    })?;

    let overlap = gamma_n.edges().iter().filter(|&&e| gamma.contains_edge(e as usize)).count();
    let main_terms = -2.0 * xi * (gamma_n.len() + gamma.len()) as f64;
    let e2 = 4.0 * xi * overlap as f64;
    let path_cluster_sum = sums[0];
    let norm_weighted_sum = -2.0 * xi * sums[1];
    let degree_sum = 4.0 * xi * sums[2];
    let e3 = -4.0 * xi * sums[3];
    let (e1, residual) = (direct[1], direct[2]);
    let t = act.t();
    let e1_bound = 2.0
        * (gamma_n.len() + gamma.len()) as f64
        * act.xi_hat().powf(1.0 - cfg.a)
        * if t > 0.0 { t.powf(cfg.a * (1.0 - cfg.alpha)) } else { 1.0 };
    let total = main_terms + e2 + path_cluster_sum + norm_weighted_sum + degree_sum + e3 + e1 + residual;
    Ok(Decomposition {
        main_terms,
        e2,
        path_cluster_sum,
        norm_weighted_sum,
        degree_sum,
        e3,
        e1,
        e1_bound,
        residual,
        total,
        direct: direct[0],
    })
}
