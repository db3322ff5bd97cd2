//! Exhaustive evaluation on boxes small enough to enumerate.
//!
//! The gauge sum over `2^E` configurations is reduced to a histogram of
//! (frustrated plaquettes, negative edges, parity of `sigma(gamma)`), filled by a
//! Gray-code walk in which each flip touches only the plaquettes around one edge.
//! Any `(beta, kappa)` is then evaluated from the histogram in log-sum-exp form.

use fixedbitset::FixedBitSet;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gf2::{gray_flip, walsh_hadamard, Gf2Basis};
use crate::lattice::{BoxSpec, Lattice};
use crate::polymer::{
    enumerate_connecting_paths, surface_z2, EdgeFilter, EnumLimits, PathPolymer, SurfaceConstruction,
};

/// How the action counts cells.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionConvention {
    /// Sum over all oriented cells, so each positive cell counts twice. The induced
    /// Ising coupling is `2 kappa` and the path activity is `tanh 2 kappa`.
    #[default]
    OrientedCells,
    /// Sum over positive cells only.
    PositiveCells,
}

impl ActionConvention {
    /// Multiplicity of each positive cell in the action.
    pub fn factor(self) -> f64 {
        match self {
            ActionConvention::OrientedCells => 2.0,
            ActionConvention::PositiveCells => 1.0,
        }
    }
}

/// `(box, beta, kappa)` plus the action convention.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    #[serde(rename = "box")]
    pub bx: BoxSpec,
    /// May be `f64::INFINITY`, written as `"inf"` in JSON and TOML.
    #[serde(with = "beta_serde")]
    pub beta: f64,
    pub kappa: f64,
    #[serde(default)]
    pub convention: ActionConvention,
}

pub(crate) mod beta_serde {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(b: &f64, s: S) -> Result<S::Ok, S::Error> {
        if b.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*b)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Raw::deserialize(d)? {
            Raw::Num(x) => Ok(x),
            Raw::Text(t) if matches!(t.as_str(), "inf" | "infinity" | "Infinity") => Ok(f64::INFINITY),
            Raw::Text(t) => Err(de::Error::custom(format!("beta must be a number or \"inf\", got {t:?}"))),
        }
    }
}

impl ModelParams {
    pub fn new(bx: BoxSpec, beta: f64, kappa: f64) -> Result<Self> {
        let p = ModelParams { bx, beta, kappa, convention: ActionConvention::OrientedCells };
        p.validate()?;
        Ok(p)
    }

    pub fn with_convention(mut self, c: ActionConvention) -> Self {
        self.convention = c;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.beta.is_nan() || self.beta < 0.0 {
            return Err(Error::Invalid(format!("beta must be >= 0, got {}", self.beta)));
        }
        if !self.kappa.is_finite() || self.kappa < 0.0 {
            return Err(Error::Invalid(format!("kappa must be finite and >= 0, got {}", self.kappa)));
        }
        Ok(())
    }

    /// Coupling of the Ising model reached at `beta = infinity`.
    pub fn ising_coupling(&self) -> f64 {
        self.convention.factor() * self.kappa
    }

    /// Path activity `tanh(c kappa)`.
    pub fn path_activity(&self) -> f64 {
        (self.convention.factor() * self.kappa).tanh()
    }

    /// Log weight per vortex plaquette, `-2 c beta`.
    pub fn vortex_log_weight(&self) -> f64 {
        -2.0 * self.convention.factor() * self.beta
    }
}

/// Output of the exact engine.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExactResult {
    #[serde(rename = "logZ0")]
    pub log_z0: f64,
    /// `log Z[gamma]`, absent when `Z[gamma] <= 0`.
    pub log_z_gamma: Option<f64>,
    pub ratio: f64,
    pub method: String,
}

/// Caps for exhaustive sums.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExactOptions {
    /// Maximum number of binary variables enumerated (edges, vertices or basis size).
    pub budget: usize,
}

impl Default for ExactOptions {
    fn default() -> Self {
        ExactOptions { budget: 26 }
    }
}

fn check_budget(what: &str, n: usize, budget: usize) -> Result<()> {
    if n > budget {
        return Err(Error::Resource(format!("{what}: {n} binary variables exceed the budget of {budget}")));
    }
    if n > 40 {
        return Err(Error::Resource(format!("{what}: {n} binary variables is beyond exhaustive reach")));
    }
    Ok(())
}

/// Counts of configurations by (frustrated plaquettes, negative edges, parity).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigHistogram {
    n_plaq: usize,
    n_edge: usize,
    counts: Vec<[u64; 2]>,
}

impl ConfigHistogram {
    fn new(n_plaq: usize, n_edge: usize) -> Self {
        ConfigHistogram { n_plaq, n_edge, counts: vec![[0, 0]; (n_plaq + 1) * (n_edge + 1)] }
    }

    #[inline]
    fn bump(&mut self, nfp: usize, nne: usize, par: usize) {
        self.counts[nfp * (self.n_edge + 1) + nne][par] += 1;
    }

    fn merge(mut self, other: &ConfigHistogram) -> Self {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            a[0] += b[0];
            a[1] += b[1];
        }
        self
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|c| c[0] + c[1]).sum()
    }

    /// `(log Z[0], Z[gamma]/Z[0], log Z[gamma])` for weights
    /// `exp(-a * nfp - b * nne)` relative to the all-satisfied state, whose log
    /// weight `offset` is added back.
    fn evaluate(&self, a: f64, b: f64, offset: f64) -> (f64, f64, Option<f64>) {
        let (mut z0, mut zg) = (0.0f64, 0.0f64);
        for nfp in 0..=self.n_plaq {
            let fa = if nfp == 0 { 0.0 } else { a * nfp as f64 };
            let (mut s0, mut sg) = (0.0f64, 0.0f64);
            for nne in 0..=self.n_edge {
                let c = self.counts[nfp * (self.n_edge + 1) + nne];
                if c[0] == 0 && c[1] == 0 {
                    continue;
                }
                // b = 0 keeps these sums integer-valued, so exact cancellations stay exact.
                let w = if b == 0.0 { 1.0 } else { (-b * nne as f64).exp() };
                s0 += (c[0] + c[1]) as f64 * w;
                sg += (c[0] as i64 - c[1] as i64) as f64 * w;
            }
            let w = (-fa).exp();
            z0 += s0 * w;
            zg += sg * w;
        }
        let log_z0 = offset + z0.ln();
        let log_zg = (zg > 0.0).then(|| offset + zg.ln());
        (log_z0, zg / z0, log_zg)
    }
}

/// Histogram of all `2^E` gauge configurations.
pub fn gauge_histogram(lat: &Lattice, gamma: &PathPolymer, opts: ExactOptions) -> Result<ConfigHistogram> {
    let e_count = lat.n_edges();
    let p_count = lat.n_plaquettes();
    check_budget("gauge enumeration", e_count, opts.budget)?;
    if p_count > 128 {
        return Err(Error::Resource("more than 128 plaquettes".into()));
    }
    let cob: Vec<u128> = (0..e_count).map(|e| lat.edge_plaquettes(e).fold(0u128, |m, p| m | 1u128 << p)).collect();
    let on_gamma: Vec<bool> = (0..e_count).map(|e| gamma.contains_edge(e)).collect();
    let hi = e_count.min(8);
    let lo = e_count - hi;
    let shards: Vec<ConfigHistogram> = (0u64..1 << hi)
        .into_par_iter()
        .map(|prefix| {
            let mut h = ConfigHistogram::new(p_count, e_count);
            let mut sigma = vec![false; e_count];
            let (mut mask, mut nne, mut par) = (0u128, 0usize, 0usize);
            for j in 0..hi {
                if prefix >> j & 1 == 1 {
                    let e = lo + j;
                    sigma[e] = true;
                    mask ^= cob[e];
                    nne += 1;
                    par ^= on_gamma[e] as usize;
                }
            }
            h.bump(mask.count_ones() as usize, nne, par);
            for i in 1u64..1 << lo {
                let e = gray_flip(i);
                mask ^= cob[e];
                if sigma[e] {
                    nne -= 1;
                } else {
                    nne += 1;
                }
                sigma[e] = !sigma[e];
                par ^= on_gamma[e] as usize;
                h.bump(mask.count_ones() as usize, nne, par);
            }
            h
        })
        .collect();
    let mut it = shards.into_iter();
    let first = it.next().expect("at least one shard");
    Ok(it.fold(first, |acc, h| acc.merge(&h)))
}

/// `Z[gamma]/Z[0]`, the expectation of `rho(sigma(gamma))`, by full enumeration.
pub fn exact_z_ratio(params: &ModelParams, gamma: &PathPolymer, opts: ExactOptions) -> Result<ExactResult> {
    params.validate()?;
    if params.beta.is_infinite() {
        return Err(Error::Invalid("beta = infinity: use the closed-form restriction or the Ising engine".into()));
    }
    let lat = Lattice::new(&params.bx);
    let h = gauge_histogram(&lat, gamma, opts)?;
    Ok(evaluate_gauge(&h, params))
}

/// Evaluates a precomputed gauge histogram at the parameters.
pub fn evaluate_gauge(h: &ConfigHistogram, params: &ModelParams) -> ExactResult {
    let c = params.convention.factor();
    let offset = c * params.beta * h.n_plaq as f64 + c * params.kappa * h.n_edge as f64;
    let (log_z0, ratio, log_zg) = h.evaluate(2.0 * c * params.beta, 2.0 * c * params.kappa, offset);
    ExactResult { log_z0, log_z_gamma: log_zg, ratio, method: "gauge-enumeration".into() }
}

/// The sum restricted to `d sigma = 0`, i.e. the `beta = infinity` limit, by
/// enumerating the closed 1-forms `d theta`.
pub fn exact_z_ratio_closed(params: &ModelParams, gamma: &PathPolymer, opts: ExactOptions) -> Result<ExactResult> {
    params.validate()?;
    let lat = Lattice::new(&params.bx);
    let v_count = lat.n_vertices();
    let e_count = lat.n_edges();
    check_budget("closed 1-form enumeration", v_count - 1, opts.budget)?;
    // Generators d theta_v for every vertex but the last.
    let gens: Vec<Vec<usize>> = (0..v_count - 1).map(|v| lat.vertex_edges(v).collect()).collect();
    let on_gamma: Vec<bool> = (0..e_count).map(|e| gamma.contains_edge(e)).collect();
    let mut h = ConfigHistogram::new(0, e_count);
    let mut sigma = vec![false; e_count];
    let (mut nne, mut par) = (0usize, 0usize);
    h.bump(0, 0, 0);
    for i in 1u64..1 << (v_count - 1) {
        for &e in &gens[gray_flip(i)] {
            if sigma[e] {
                nne -= 1;
            } else {
                nne += 1;
            }
            sigma[e] = !sigma[e];
            par ^= on_gamma[e] as usize;
        }
        h.bump(0, nne, par);
    }
    let c = params.convention.factor();
    let (log_z0, ratio, log_zg) = h.evaluate(0.0, 2.0 * c * params.kappa, c * params.kappa * e_count as f64);
    Ok(ExactResult { log_z0, log_z_gamma: log_zg, ratio, method: "closed-form-restriction".into() })
}

/// Ising spin-spin correlation `<eta_x eta_y>` with coupling `J` per positive edge,
/// by enumerating all `2^V` spin configurations.
pub fn ising_correlation(bx: &BoxSpec, coupling: f64, x: &[i32], y: &[i32], opts: ExactOptions) -> Result<f64> {
    let lat = Lattice::new(bx);
    let vx = lat.vertex_index(x).ok_or_else(|| Error::Invalid(format!("vertex {x:?} outside the box")))?;
    let vy = lat.vertex_index(y).ok_or_else(|| Error::Invalid(format!("vertex {y:?} outside the box")))?;
    if vx == vy {
        return Ok(1.0);
    }
    let v_count = lat.n_vertices();
    let e_count = lat.n_edges();
    check_budget("Ising enumeration", v_count, opts.budget)?;
    let incident: Vec<Vec<usize>> = (0..v_count).map(|v| lat.vertex_edges(v).collect()).collect();
    // The global flip symmetry fixes the last spin.
    let free = v_count - 1;
    let hi = free.min(8);
    let lo = free - hi;
    let shards: Vec<ConfigHistogram> = (0u64..1 << hi)
        .into_par_iter()
        .map(|prefix| {
            let mut h = ConfigHistogram::new(0, e_count);
            let mut spin = vec![false; v_count];
            let mut unsat = vec![false; e_count];
            for j in 0..hi {
                if prefix >> j & 1 == 1 {
                    spin[lo + j] = true;
                }
            }
            let mut n_unsat = 0usize;
            for (e, u) in unsat.iter_mut().enumerate() {
                let (a, b) = lat.endpoints(e);
                *u = spin[a] != spin[b];
                n_unsat += *u as usize;
            }
            let mut par = (spin[vx] != spin[vy]) as usize;
            h.bump(0, n_unsat, par);
            for i in 1u64..1 << lo {
                let v = gray_flip(i);
                spin[v] = !spin[v];
                for &e in &incident[v] {
                    unsat[e] = !unsat[e];
                    if unsat[e] {
                        n_unsat += 1;
                    } else {
                        n_unsat -= 1;
                    }
                }
                if v == vx || v == vy {
                    par ^= 1;
                }
                h.bump(0, n_unsat, par);
            }
            h
        })
        .collect();
    let h = shards.into_iter().reduce(|a, b| a.merge(&b)).expect("nonempty");
    let (_, ratio, _) = h.evaluate(0.0, 2.0 * coupling, 0.0);
    Ok(ratio)
}

/// Ising correlation under the coupling induced by `params` at `beta = infinity`.
pub fn exact_z_ratio_ising(params: &ModelParams, x: &[i32], y: &[i32], opts: ExactOptions) -> Result<f64> {
    params.validate()?;
    ising_correlation(&params.bx, params.ising_coupling(), x, y, opts)
}

/// A straight line of `n` edges along `axis`, centred in the box.
pub fn centered_line(lat: &Lattice, n: usize, axis: usize) -> Result<PathPolymer> {
    let bx = lat.box_spec();
    let side = (bx.hi(axis) - bx.lo(axis)) as usize;
    if n > side {
        return Err(Error::Invalid(format!("line of length {n} does not fit a side of length {side}")));
    }
    let start: Vec<i32> = (0..bx.m())
        .map(|a| {
            let len = bx.hi(a) - bx.lo(a);
            if a == axis {
                bx.lo(a) + (len - n as i32) / 2
            } else {
                bx.lo(a) + len / 2
            }
        })
        .collect();
    PathPolymer::straight_line(lat, &start, axis, n)
}

/// `<W_{gamma_n}>` for the centred straight line of length `n` along axis 0.
pub fn wilson_line(params: &ModelParams, n: usize, opts: ExactOptions) -> Result<f64> {
    if n == 0 {
        return Ok(1.0);
    }
    let lat = Lattice::new(&params.bx);
    let line = centered_line(&lat, n, 0)?;
    Ok(exact_z_ratio(params, &line, opts)?.ratio)
}

/// Exact evaluation of the high-temperature representation on a small box.
///
/// With `S(c) = sum_{closed omega} exp(-2 c beta |omega^+|) rho(omega(q_c))`, one has
/// `Zcheck[gamma, gamma0] = sum_{gamma' even, vertex-disjoint from gamma0}
/// t^{|gamma'|} S(gamma + gamma0 + gamma')`. Writing `omega = sum_i a_i b_i` over a
/// basis of closed 2-forms turns `S` into a Walsh-Hadamard transform evaluated at the
/// vector `v_i(c) = b_i(q_c)`.
pub struct HighTemperature {
    lat: Lattice,
    params: ModelParams,
    omega_basis: Vec<FixedBitSet>,
    spectrum: Vec<f64>,
    cycles: Vec<(u128, u64)>,
    construction: SurfaceConstruction,
}

/// Ratios from the high-temperature side, with truncation information.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CheckZResult {
    pub zcheck_gamma: f64,
    pub zcheck_0: f64,
    pub ratio: f64,
    pub n_gamma0: usize,
    pub max_len: usize,
    pub full_coverage: bool,
    /// Crude estimate of the omitted connecting paths; zero at full coverage.
    pub tail_estimate: f64,
}

impl HighTemperature {
    pub fn new(params: &ModelParams, opts: ExactOptions) -> Result<Self> {
        params.validate()?;
        if params.beta.is_infinite() {
            return Err(Error::Invalid("high-temperature side needs finite beta".into()));
        }
        let lat = Lattice::new(&params.bx);
        if lat.n_edges() > 128 {
            return Err(Error::Resource("more than 128 edges".into()));
        }
        let mut basis = Gf2Basis::new();
        for e in 0..lat.n_edges() {
            let mut b = FixedBitSet::with_capacity(lat.n_plaquettes());
            for p in lat.edge_plaquettes(e) {
                b.insert(p);
            }
            basis.insert(b);
        }
        let r = basis.dim();
        check_budget("closed 2-form enumeration", r, opts.budget)?;
        let omega_basis = basis.vectors().to_vec();
        // Weights of all closed forms, then their transform.
        let lw = params.vortex_log_weight();
        let mut w = vec![0.0; 1 << r];
        let mut cur = FixedBitSet::with_capacity(lat.n_plaquettes());
        w[0] = 1.0;
        let mut code = 0usize;
        for i in 1u64..1 << r {
            let j = gray_flip(i);
            cur.symmetric_difference_with(&omega_basis[j]);
            code ^= 1 << j;
            w[code] = (lw * cur.count_ones(..) as f64).exp();
        }
        walsh_hadamard(&mut w);

        let mut cyc = Gf2Basis::new();
        for p in 0..lat.n_plaquettes() {
            let mut b = FixedBitSet::with_capacity(lat.n_edges());
            for e in lat.plaquette_edges(p) {
                b.insert(e);
            }
            cyc.insert(b);
        }
        check_budget("cycle space enumeration", cyc.dim(), opts.budget)?;
        let mut ht = HighTemperature {
            lat,
            params: params.clone(),
            omega_basis,
            spectrum: w,
            cycles: Vec::new(),
            construction: SurfaceConstruction::Staircase,
        };
        ht.cycles =
            cyc.vectors().iter().map(|c| Ok((to_u128(c), ht.surface_vector(c)?))).collect::<Result<Vec<_>>>()?;
        Ok(ht)
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lat
    }

    /// Number of closed 2-forms, as a base-2 logarithm.
    pub fn closed_form_dim(&self) -> usize {
        self.omega_basis.len()
    }

    /// `v_i(c) = b_i(q_c)` for a closed edge set.
    fn surface_vector(&self, c: &FixedBitSet) -> Result<u64> {
        let q = surface_z2(&self.lat, c, self.construction)?;
        let mut v = 0u64;
        for (i, b) in self.omega_basis.iter().enumerate() {
            if b.intersection(&q).count() % 2 == 1 {
                v |= 1 << i;
            }
        }
        Ok(v)
    }

    /// `S(c)` for a closed edge set `c`.
    pub fn vortex_sum(&self, c: &FixedBitSet) -> Result<f64> {
        Ok(self.spectrum[self.surface_vector(c)? as usize])
    }

    /// `Zcheck[gamma, gamma0]`; `gamma + gamma0` must be closed.
    pub fn zcheck_pair(&self, gamma: &PathPolymer, gamma0: &PathPolymer) -> Result<f64> {
        let c0 = gamma.sum(&self.lat, gamma0);
        if !c0.is_closed(&self.lat) {
            return Err(Error::Precondition("gamma + gamma0 is not closed".into()));
        }
        let v0 = self.surface_vector(c0.edge_bits())?;
        let mut forbidden = 0u128;
        for v in gamma0.vertex_bits().ones() {
            for e in self.lat.vertex_edges(v) {
                forbidden |= 1u128 << e;
            }
        }
        let t = self.params.path_activity();
        let (mut edges, mut v) = (0u128, 0u64);
        let mut total = self.spectrum[v0 as usize];
        for i in 1u64..1 << self.cycles.len() {
            let (ce, cv) = self.cycles[gray_flip(i)];
            edges ^= ce;
            v ^= cv;
            if edges & forbidden == 0 {
                total += t.powi(edges.count_ones() as i32) * self.spectrum[(v0 ^ v) as usize];
            }
        }
        Ok(total)
    }

    /// `Zcheck[gamma]/Zcheck[0]`, summing `gamma0` over connecting paths of length at
    /// most `max_len` (all of them when `max_len >= E`).
    pub fn check_ratio(&self, gamma: &PathPolymer, max_len: usize) -> Result<CheckZResult> {
        let empty = PathPolymer::empty(&self.lat);
        let z00 = self.zcheck_pair(&empty, &empty)?;
        let t = self.params.path_activity();
        let full = max_len >= self.lat.n_edges();
        let (zg, n0) = if gamma.is_closed(&self.lat) {
            (self.zcheck_pair(gamma, &empty)?, 1)
        } else {
            let paths = enumerate_connecting_paths(
                &self.lat,
                gamma,
                max_len.min(self.lat.n_edges()),
                &EdgeFilter::all(),
                EnumLimits::default(),
            )?;
            let terms: Vec<f64> = paths
                .par_iter()
                .map(|g0| Ok(t.powi(g0.len() as i32) * self.zcheck_pair(gamma, g0)?))
                .collect::<Result<Vec<f64>>>()?;
            (terms.iter().sum(), paths.len())
        };
        let tail = if full || gamma.is_closed(&self.lat) {
            0.0
        } else {
            let growth = (2 * self.lat.m()) as f64 * t;
            let mut s = 0.0;
            for j in max_len + 1..=self.lat.n_edges() {
                s += growth.powi(j as i32);
            }
            s * self.spectrum[0] * (1.0 + t).powi(self.lat.n_edges() as i32) / z00
        };
        Ok(CheckZResult {
            zcheck_gamma: zg,
            zcheck_0: z00,
            ratio: zg / z00,
            n_gamma0: n0,
            max_len,
            full_coverage: full,
            tail_estimate: tail,
        })
    }
}

fn to_u128(b: &FixedBitSet) -> u128 {
    b.ones().fold(0u128, |m, i| m | 1u128 << i)
}

/// `Zcheck[gamma]/Zcheck[0]` with full coverage.
pub fn exact_check_z(params: &ModelParams, gamma: &PathPolymer, opts: ExactOptions) -> Result<CheckZResult> {
    let ht = HighTemperature::new(params, opts)?;
    ht.check_ratio(gamma, usize::MAX)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strip() -> BoxSpec {
        BoxSpec::new(vec![(0, 3), (0, 1)]).unwrap()
    }

    #[test]
    fn kappa_zero_kills_open_lines() {
        let p = ModelParams::new(strip(), 0.7, 0.0).unwrap();
        let lat = Lattice::new(&p.bx);
        let g = PathPolymer::straight_line(&lat, &[0, 0], 0, 2).unwrap();
        let r = exact_z_ratio(&p, &g, ExactOptions::default()).unwrap();
        assert_eq!(r.ratio, 0.0);
        assert!(r.log_z_gamma.is_none());
        let p0 = ModelParams::new(strip(), 0.0, 0.0).unwrap();
        assert_eq!(exact_z_ratio(&p0, &g, ExactOptions::default()).unwrap().ratio, 0.0);
    }

    #[test]
    fn partition_function_at_zero_coupling() {
        let p = ModelParams::new(strip(), 0.0, 0.0).unwrap();
        let lat = Lattice::new(&p.bx);
        let r = exact_z_ratio(&p, &PathPolymer::empty(&lat), ExactOptions::default()).unwrap();
        let want = lat.n_edges() as f64 * 2f64.ln();
        assert!((r.log_z0 - want).abs() < 1e-12);
        assert_eq!(r.ratio, 1.0);
    }

    #[test]
    fn budget_is_enforced() {
        let p = ModelParams::new(BoxSpec::new(vec![(0, 4), (0, 4)]).unwrap(), 1.0, 0.1).unwrap();
        let lat = Lattice::new(&p.bx);
        let g = PathPolymer::straight_line(&lat, &[0, 0], 0, 1).unwrap();
        assert!(matches!(exact_z_ratio(&p, &g, ExactOptions::default()), Err(Error::Resource(_))));
    }

    #[test]
    fn infinite_beta_is_redirected() {
        let p = ModelParams::new(strip(), f64::INFINITY, 0.1).unwrap();
        let lat = Lattice::new(&p.bx);
        let g = PathPolymer::straight_line(&lat, &[0, 0], 0, 1).unwrap();
        assert!(exact_z_ratio(&p, &g, ExactOptions::default()).is_err());
        assert!(exact_z_ratio_closed(&p, &g, ExactOptions::default()).is_ok());
    }

    #[test]
    fn ising_trivial_cases() {
        let bx = strip();
        assert_eq!(ising_correlation(&bx, 0.3, &[1, 1], &[1, 1], ExactOptions::default()).unwrap(), 1.0);
        let c = ising_correlation(&bx, 0.0, &[0, 0], &[3, 1], ExactOptions::default()).unwrap();
        assert!(c.abs() < 1e-15);
    }

    #[test]
    fn wilson_line_examples() {
        let p = ModelParams::new(strip(), 0.5, 0.1).unwrap();
        assert_eq!(wilson_line(&p, 0, ExactOptions::default()).unwrap(), 1.0);
        let p0 = ModelParams::new(strip(), 0.5, 0.0).unwrap();
        assert_eq!(wilson_line(&p0, 2, ExactOptions::default()).unwrap(), 0.0);
    }

    #[test]
    fn closed_gamma_uses_empty_gamma0() {
        let p = ModelParams::new(BoxSpec::new(vec![(0, 2), (0, 2)]).unwrap(), 0.4, 0.2).unwrap();
        let ht = HighTemperature::new(&p, ExactOptions::default()).unwrap();
        let lat = ht.lattice();
        let e = |x: [i32; 2], d| lat.edge_index(&x, d).unwrap();
        let sq = PathPolymer::from_edges(lat, [e([0, 0], 0), e([0, 1], 0), e([0, 0], 1), e([1, 0], 1)]).unwrap();
        let r = ht.check_ratio(&sq, usize::MAX).unwrap();
        let direct = ht.zcheck_pair(&sq, &PathPolymer::empty(lat)).unwrap() / r.zcheck_0;
        assert_eq!(r.ratio, direct);
        assert_eq!(r.n_gamma0, 1);
    }

    #[test]
    fn zero_kappa_check_side_vanishes_for_open_gamma() {
        let p = ModelParams::new(strip(), 1.0, 0.0).unwrap();
        let lat = Lattice::new(&p.bx);
        let g = PathPolymer::straight_line(&lat, &[0, 0], 0, 2).unwrap();
        let r = exact_check_z(&p, &g, ExactOptions::default()).unwrap();
        assert_eq!(r.ratio, 0.0);
    }
}
