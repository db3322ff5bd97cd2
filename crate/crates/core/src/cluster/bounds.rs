//! Numerical checks of the cluster bounds on truncated sums.
//!
//! Each check compares a truncated left-hand side, which can only underestimate the
//! full sum, with a closed-form right-hand side. Passing is necessary, not
//! sufficient, for the bound to hold.

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};

use super::expansion::Expansion;
use crate::error::{Error, Result};
use crate::polymer::{PathPolymer, Polymer};

/// `sum_{k >= k0} k^power x^k`, summed until the terms stop mattering.
pub fn power_series_tail(x: f64, power: f64, k0: usize) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return f64::INFINITY;
    }
    let mut sum = 0.0;
    let mut k = k0.max(1);
    if k0 == 0 && power == 0.0 {
        sum = 1.0;
    }
    loop {
        let term = (k as f64).powf(power) * x.powi(k as i32);
        sum += term;
        // Past the peak of k^power x^k the terms fall geometrically.
        let past_peak = (k as f64) > power / -x.ln();
        if past_peak && term <= sum * 1e-17 || k > 1_000_000 {
            break;
        }
        k += 1;
    }
    sum
}

/// One inequality `lhs <= rhs`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LemmaCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
    /// `rhs - lhs`.
    pub margin: f64,
}

impl LemmaCheck {
    fn new(name: &str, lhs: f64, rhs: f64) -> Self {
        LemmaCheck { name: name.into(), lhs, rhs, pass: lhs <= rhs, margin: rhs - lhs }
    }
}

/// Which bounds to evaluate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct BoundOptions {
    /// Lower cutoff `K` on `||C||_1` in the power-cluster bound.
    pub k: usize,
    /// Power of `||C||_1` in the power-cluster bound.
    pub power: f64,
    /// Powers `j` for which `D_j` is reported.
    pub dm_powers: Vec<u32>,
    /// Line for the `vartheta` checks, if any.
    #[serde(skip)]
    pub gamma_n: Option<PathPolymer>,
    /// Length threshold for the long-path bound.
    pub long_path_k: usize,
    /// Longest connecting path summed into `vartheta`.
    pub vartheta_max_len: usize,
}

impl Default for BoundOptions {
    fn default() -> Self {
        BoundOptions { k: 4, power: 2.0, dm_powers: vec![1, 2], gamma_n: None, long_path_k: 6, vartheta_max_len: 10 }
    }
}

/// Results of [`bound_diagnostics`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BoundReport {
    pub power_cluster: LemmaCheck,
    pub smallest_nonminimal: LemmaCheck,
    /// `(j, truncated D_j)`.
    pub d_m: Vec<(u32, f64)>,
    pub long_paths: Option<LemmaCheck>,
    pub vartheta_mass: Option<f64>,
    /// `vartheta(Lambda^{gamma_n})` lies in `(0, 1]`.
    pub vartheta_in_unit_interval: Option<bool>,
    pub all_pass: bool,
}

/// Evaluates the power-cluster and smallest-non-minimal bounds edge by edge (taking
/// the worst edge), the truncated `D_j`, and optionally the `vartheta` checks.
pub fn bound_diagnostics(ex: &Expansion, opts: &BoundOptions) -> Result<BoundReport> {
    let lat = ex.lattice();
    let act = ex.activities();
    let cfg = ex.config();
    let pool = ex.pool();
    let n_e = lat.n_edges();
    let min_support = 2 * (lat.m() - 1);
    let nd = opts.dm_powers.len();
    let width = n_e * (2 + nd);
    let mut all = FixedBitSet::with_capacity(pool.len());
    all.insert_range(..);
    // Edge supports of members, computed once.
    let supports: Vec<Vec<u32>> = (0..pool.len())
        .map(|i| match pool.polymer(i) {
            Polymer::Path(p) => p.edges().to_vec(),
            Polymer::Vortex(v) => (0..n_e).filter(|&e| v.touches_edge(lat, e)).map(|e| e as u32).collect(),
        })
        .collect();
    let acc = pool.fold_clusters(&all, None, cfg, width, |c, acc| {
        let mut edges: Vec<u32> = c.members.iter().flat_map(|&i| supports[i].iter().copied()).collect();
        edges.sort_unstable();
        edges.dedup();
        let w = c.weight.abs();
        if c.is_path_only() {
            let n1 = c.norm1 as f64;
            let pc = if c.norm1 >= opts.k { w * n1.powf(opts.power) } else { 0.0 };
            for &e in &edges {
                let e = e as usize;
                acc[e] += pc;
                for (j, &p) in opts.dm_powers.iter().enumerate() {
                    acc[(2 + j) * n_e + e] += w * n1.powi(p as i32);
                }
            }
        }
        if c.norm2 > min_support {
            for &e in &edges {
                acc[n_e + e as usize] += w;
            }
        }
    })?;
    let sup = |block: usize| acc[block * n_e..(block + 1) * n_e].iter().copied().fold(0.0, f64::max);

    let t = act.t();
    let (a, alpha) = (cfg.a, cfg.alpha);
    let t_a = if t > 0.0 { t.powf(a * (1.0 - alpha)) } else { 0.0 };
    let power_rhs = t_a * power_series_tail(t.powf(1.0 - a), opts.power, opts.k);
    let power_cluster = LemmaCheck::new("power_cluster", sup(0), power_rhs);
    let nonmin_rhs = act.xi_hat().powf(1.0 - a) * t_a;
    let smallest_nonminimal = LemmaCheck::new("smallest_nonminimal", sup(1), nonmin_rhs);
    let d_m = opts.dm_powers.iter().enumerate().map(|(j, &p)| (p, sup(2 + j))).collect();

    let (mut long_paths, mut vartheta_mass, mut unit) = (None, None, None);
    if let Some(gn) = &opts.gamma_n {
        if gn.odd_vertices(lat).len() != 2 {
            return Err(Error::Precondition("vartheta checks need an open line".into()));
        }
        let vt = ex.vartheta_total(gn, opts.vartheta_max_len)?;
        let m = lat.m() as f64;
        let x = 2.0 * m * t * (2.0 * t.powf(1.0 - alpha)).exp();
        let rhs = power_series_tail(x, 0.0, opts.long_path_k);
        long_paths = Some(LemmaCheck::new("long_paths", vt.mass_above(opts.long_path_k), rhs));
        unit = Some(vt.total > 0.0 && vt.total <= 1.0);
        vartheta_mass = Some(vt.total);
    }
    let all_pass = power_cluster.pass
        && smallest_nonminimal.pass
        && long_paths.as_ref().is_none_or(|c| c.pass)
        && unit.unwrap_or(true);
    Ok(BoundReport {
        power_cluster,
        smallest_nonminimal,
        d_m,
        long_paths,
        vartheta_mass,
        vartheta_in_unit_interval: unit,
        all_pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_tail_matches_closed_forms() {
        let x: f64 = 0.3;
        assert!((power_series_tail(x, 0.0, 0) - 1.0 / (1.0 - x)).abs() < 1e-14);
        assert!((power_series_tail(x, 0.0, 3) - x.powi(3) / (1.0 - x)).abs() < 1e-15);
        // sum_{k>=1} k x^k = x / (1-x)^2.
        assert!((power_series_tail(x, 1.0, 1) - x / (1.0 - x).powi(2)).abs() < 1e-14);
        assert_eq!(power_series_tail(1.0, 0.0, 0), f64::INFINITY);
        assert_eq!(power_series_tail(0.0, 2.0, 0), 0.0);
    }
}
