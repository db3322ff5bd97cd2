//! Markov-chain Monte Carlo for Wilson lines and Ising spin correlations.
//!
//! Both samplers are single-site heat-bath: the conditional law of one variable
//! given the rest is a two-point law and is drawn exactly. Replicas run on
//! independent ChaCha streams and are pooled by a jackknife over blocks whose
//! length follows the measured integrated autocorrelation time.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::Activities;
use crate::error::{Error, Result};
use crate::exact::{centered_line, ActionConvention, ModelParams};
use crate::lattice::{BoxSpec, Lattice};
use crate::polymer::PathPolymer;

/// Sweeps always discarded before measuring when the plan leaves `therm` unset.
pub const DEFAULT_THERM: usize = 1000;

/// `(seed, stream)` of a counter-based generator. Replica `r` of a run uses stream
/// `stream_id + r`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RngSpec {
    pub seed: u64,
    #[serde(default)]
    pub stream_id: u64,
}

impl RngSpec {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        RngSpec { seed, stream_id }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.seed);
        r.set_stream(self.stream_id);
        r
    }

    fn replica(&self, r: usize) -> RngSpec {
        RngSpec { seed: self.seed, stream_id: self.stream_id.wrapping_add(r as u64) }
    }

    /// A seed for an independent sub-run labelled `tag`.
    pub fn derive(&self, tag: u64) -> RngSpec {
        // splitmix64 finaliser
        let mut z = self.seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        RngSpec { seed: z ^ (z >> 31), stream_id: self.stream_id }
    }
}

/// Sweeps, thermalization, blocking and replicas.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SamplingPlan {
    /// Measured sweeps per replica.
    pub sweeps: usize,
    /// Sweeps discarded before measuring. Unset means `max(1000, 20 tau)`.
    #[serde(default)]
    pub therm: Option<usize>,
    /// Block length for the jackknife. Unset means `ceil(5 tau)`.
    #[serde(default)]
    pub block_len: Option<usize>,
    #[serde(default = "one")]
    pub streams: usize,
    /// Replace each observable factor by its conditional mean given its neighbours.
    #[serde(default)]
    pub multi_hit: bool,
    /// Follow each edge sweep with heat-bath gauge flips at every vertex.
    #[serde(default = "yes")]
    pub vertex_moves: bool,
}

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

impl SamplingPlan {
    pub fn new(sweeps: usize) -> Self {
        SamplingPlan { sweeps, therm: None, block_len: None, streams: 1, multi_hit: false, vertex_moves: true }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sweeps == 0 || self.streams == 0 {
            return Err(Error::Invalid("sweeps and streams must be positive".into()));
        }
        if self.therm == Some(0) || self.block_len == Some(0) {
            return Err(Error::Invalid("thermalization and block length must be positive".into()));
        }
        Ok(())
    }
}

/// Which model a run sampled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum McMode {
    #[serde(rename = "finite-beta")]
    FiniteBeta,
    #[serde(rename = "ising-inf")]
    IsingInfinity,
}

/// Per-replica summary inside a [`WilsonEstimate`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ReplicaSummary {
    pub stream_id: u64,
    pub mean: f64,
    /// Jackknife error of this replica alone, if it has at least two blocks.
    pub stderr: Option<f64>,
    pub n_used: usize,
    pub n_therm: usize,
    pub tau_int: f64,
}

/// A Monte Carlo estimate of `<W_gamma>` or `<eta_x eta_y>`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct WilsonEstimate {
    pub mode: McMode,
    pub mean: f64,
    /// Jackknife over all blocks of all replicas.
    pub stderr: f64,
    /// Measurements used, summed over replicas.
    pub n_sweeps: usize,
    /// Largest number of sweeps discarded by a replica.
    pub n_therm: usize,
    pub block_len: usize,
    pub n_blocks: usize,
    /// Largest integrated autocorrelation time over replicas, in sweeps.
    pub tau_int: f64,
    pub multi_hit: bool,
    pub rng: RngSpec,
    pub params: ModelParams,
    pub replicas: Vec<ReplicaSummary>,
}

/// Integrated autocorrelation time `1/2 + sum_t rho(t)`, with Sokal's automatic
/// window `t < 6 tau`. A constant series has `tau = 1/2`.
pub fn integrated_autocorr_time(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 4 {
        return 0.5;
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let d: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let var = d.iter().map(|v| v * v).sum::<f64>() / n as f64;
    if var <= 0.0 {
        return 0.5;
    }
    let mut tau = 0.5;
    for t in 1..n / 2 {
        let c: f64 = d[..n - t].iter().zip(&d[t..]).map(|(a, b)| a * b).sum::<f64>() / (n - t) as f64;
        tau += c / var;
        if t as f64 >= 6.0 * tau {
            break;
        }
    }
    tau.max(0.5)
}

/// `(mean, stderr)` of the block means by a delete-one jackknife.
pub fn jackknife(blocks: &[f64]) -> Result<(f64, f64)> {
    let b = blocks.len();
    if b < 2 {
        return Err(Error::Numeric(format!("jackknife needs at least 2 blocks, got {b}")));
    }
    let total: f64 = blocks.iter().sum();
    let mean = total / b as f64;
    let loo: Vec<f64> = blocks.iter().map(|x| (total - x) / (b - 1) as f64).collect();
    let loo_mean = loo.iter().sum::<f64>() / b as f64;
    let var = (b - 1) as f64 / b as f64 * loo.iter().map(|v| (v - loo_mean).powi(2)).sum::<f64>();
    Ok((mean, var.sqrt()))
}

/// Edges and plaquettes of a gauge model, as plain incidence lists. Lattices and
/// small test graphs both fit.
///
/// Gauge moves are edge sets meeting every plaquette in an even number of edges;
/// flipping one leaves every plaquette parity unchanged.
#[derive(Clone, Debug)]
pub struct GaugeGraph {
    plaq_edges: Vec<Vec<u32>>,
    edge_plaqs: Vec<Vec<u32>>,
    gauge_moves: Vec<Vec<u32>>,
}

impl GaugeGraph {
    pub fn new(n_edges: usize, plaquettes: Vec<Vec<u32>>) -> Result<Self> {
        let mut edge_plaqs = vec![Vec::new(); n_edges];
        for (p, es) in plaquettes.iter().enumerate() {
            for &e in es {
                let list = edge_plaqs
                    .get_mut(e as usize)
                    .ok_or_else(|| Error::Invalid(format!("plaquette {p} names edge {e} of {n_edges}")))?;
                list.push(p as u32);
            }
        }
        Ok(GaugeGraph { plaq_edges: plaquettes, edge_plaqs, gauge_moves: Vec::new() })
    }

    pub fn with_gauge_moves(mut self, moves: Vec<Vec<u32>>) -> Result<Self> {
        for (i, mv) in moves.iter().enumerate() {
            let mut hits = vec![0u8; self.n_plaquettes()];
            for &e in mv {
                let ps = self
                    .edge_plaqs
                    .get(e as usize)
                    .ok_or_else(|| Error::Invalid(format!("gauge move {i} names edge {e}")))?;
                for &p in ps {
                    hits[p as usize] ^= 1;
                }
            }
            if hits.contains(&1) {
                return Err(Error::Invalid(format!("gauge move {i} changes a plaquette parity")));
            }
        }
        self.gauge_moves = moves;
        Ok(self)
    }

    /// Plaquettes of the lattice, with the edge stars of the vertices as gauge moves.
    pub fn from_lattice(lat: &Lattice) -> Self {
        let plaqs = (0..lat.n_plaquettes()).map(|p| lat.plaquette_edges(p).map(|e| e as u32).collect()).collect();
        let stars = (0..lat.n_vertices()).map(|v| lat.vertex_edges(v).map(|e| e as u32).collect()).collect();
        GaugeGraph::new(lat.n_edges(), plaqs)
            .and_then(|g| g.with_gauge_moves(stars))
            .expect("lattice incidences are consistent")
    }

    pub fn n_edges(&self) -> usize {
        self.edge_plaqs.len()
    }

    pub fn n_plaquettes(&self) -> usize {
        self.plaq_edges.len()
    }

    /// Log Gibbs weight relative to the all-zero state:
    /// `-2 c beta (frustrated plaquettes) - 2 c kappa (edges with sigma = 1)`.
    pub fn log_weight(&self, sigma: &[u8], beta: f64, kappa: f64, conv: ActionConvention) -> f64 {
        let c = conv.factor();
        let nfp = self.plaq_edges.iter().filter(|es| es.iter().fold(0, |a, &e| a ^ sigma[e as usize]) == 1).count();
        let nne = sigma.iter().filter(|&&s| s == 1).count();
        -2.0 * c * beta * nfp as f64 - 2.0 * c * kappa * nne as f64
    }

    fn max_degree(&self) -> usize {
        self.edge_plaqs.iter().map(Vec::len).max().unwrap_or(0)
    }

    fn max_move(&self) -> usize {
        self.gauge_moves.iter().map(Vec::len).max().unwrap_or(0)
    }
}

/// Heat-bath probabilities `P(x = 0)` and conditional means `E rho(x)` indexed by
/// `(k, n1)`, where the log-odds of `x = 0` against `x = 1` is `w (k - 2 n1) + h`.
struct TwoPointTable {
    stride: usize,
    /// Probability of 0 as a threshold on uniform 64-bit draws.
    thr: Vec<u64>,
    mean: Vec<f64>,
}

impl TwoPointTable {
    fn new(max_k: usize, w: f64, h: f64) -> Result<Self> {
        let stride = max_k + 1;
        let mut p0 = Vec::with_capacity(stride * stride);
        let mut mean = Vec::with_capacity(stride * stride);
        for k in 0..=max_k {
            for n1 in 0..=max_k {
                let d = w * (k as f64 - 2.0 * n1 as f64) + h;
                if d.is_nan() {
                    return Err(Error::Numeric("heat-bath log-odds is NaN".into()));
                }
                p0.push(1.0 / (1.0 + (-d).exp()));
                mean.push((0.5 * d).tanh());
            }
        }
        // The cast saturates, so p0 = 1 maps to u64::MAX.
        let thr = p0.iter().map(|&p| (p * 18_446_744_073_709_551_616.0) as u64).collect();
        Ok(TwoPointTable { stride, thr, mean })
    }

    #[inline]
    fn idx(&self, k: usize, n1: usize) -> usize {
        k * self.stride + n1
    }
}

/// Heat-bath chain for the gauge field `sigma` on a [`GaugeGraph`].
pub struct GaugeChain<'g> {
    g: &'g GaugeGraph,
    sigma: Vec<u8>,
    /// Parity of `sigma` summed over each plaquette.
    parity: Vec<u8>,
    table: TwoPointTable,
    /// Odds of keeping against flipping a gauge move, by (size, edges at 1).
    move_table: TwoPointTable,
    rng: ChaCha8Rng,
}

impl<'g> GaugeChain<'g> {
    /// Cold start at `sigma = 0`. Needs finite `beta`.
    pub fn new(g: &'g GaugeGraph, beta: f64, kappa: f64, conv: ActionConvention, rng: RngSpec) -> Result<Self> {
        if !beta.is_finite() || beta < 0.0 {
            return Err(Error::Precondition(format!("gauge sampler needs finite beta >= 0, got {beta}")));
        }
        if !kappa.is_finite() || kappa < 0.0 {
            return Err(Error::Invalid(format!("kappa must be finite and >= 0, got {kappa}")));
        }
        let c = conv.factor();
        let table = TwoPointTable::new(g.max_degree(), 2.0 * c * beta, 2.0 * c * kappa)?;
        let move_table = TwoPointTable::new(g.max_move(), 2.0 * c * kappa, 0.0)?;
        Ok(GaugeChain {
            g,
            sigma: vec![0; g.n_edges()],
            parity: vec![0; g.n_plaquettes()],
            table,
            move_table,
            rng: rng.rng(),
        })
    }

    pub fn state(&self) -> &[u8] {
        &self.sigma
    }

    /// Table index of edge `e`: its plaquette count and how many of them have odd
    /// parity on the other edges.
    #[inline]
    fn local(&self, e: usize) -> usize {
        let s = self.sigma[e];
        let ps = &self.g.edge_plaqs[e];
        let n1 = ps.iter().filter(|&&p| self.parity[p as usize] ^ s == 1).count();
        self.table.idx(ps.len(), n1)
    }

    pub fn update_edge(&mut self, e: usize) {
        let thr = self.table.thr[self.local(e)];
        let new = (self.rng.next_u64() >= thr) as u8;
        if new != self.sigma[e] {
            self.sigma[e] = new;
            for &p in &self.g.edge_plaqs[e] {
                self.parity[p as usize] ^= 1;
            }
        }
    }

    /// One pass over all edges in index order.
    pub fn sweep(&mut self) {
        for e in 0..self.sigma.len() {
            self.update_edge(e);
        }
    }

    /// Heat-bath on "flip gauge move `i` or not". Only the `kappa` term changes.
    pub fn update_gauge_move(&mut self, i: usize) {
        let mv = &self.g.gauge_moves[i];
        let n1 = mv.iter().filter(|&&e| self.sigma[e as usize] == 1).count();
        let keep = self.move_table.thr[self.move_table.idx(mv.len(), n1)];
        if self.rng.next_u64() >= keep {
            for &e in mv {
                self.sigma[e as usize] ^= 1;
            }
        }
    }

    /// One pass over all gauge moves.
    pub fn gauge_sweep(&mut self) {
        for i in 0..self.g.gauge_moves.len() {
            self.update_gauge_move(i);
        }
    }

    /// `E[rho(sigma(e)) | rest]`.
    pub fn conditional_mean(&self, e: usize) -> f64 {
        self.table.mean[self.local(e)]
    }

    /// `rho(sigma(gamma))`.
    pub fn wilson(&self, edges: &[u32]) -> f64 {
        let par = edges.iter().fold(0u8, |a, &e| a ^ self.sigma[e as usize]);
        if par == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// Product of conditional means over `edges`. Unbiased only when no two of the
    /// edges share a plaquette.
    pub fn wilson_multi_hit(&self, edges: &[u32]) -> f64 {
        edges.iter().map(|&e| self.conditional_mean(e as usize)).product()
    }
}

/// Heat-bath chain for Ising spins on the vertices of a box with coupling `J` per
/// edge, weight `exp(-2 J (unsatisfied edges))`.
pub struct IsingChain {
    /// Neighbours of each vertex, `stride` slots each, padded with the index of a
    /// spare spin that stays 0.
    nbrs: Vec<u32>,
    degree: Vec<u8>,
    stride: usize,
    /// Spins followed by the spare.
    spin: Vec<u8>,
    table: TwoPointTable,
    rng: ChaCha8Rng,
}

impl IsingChain {
    pub fn new(lat: &Lattice, coupling: f64, rng: RngSpec) -> Result<Self> {
        if !coupling.is_finite() || coupling < 0.0 {
            return Err(Error::Invalid(format!("coupling must be finite and >= 0, got {coupling}")));
        }
        let nv = lat.n_vertices();
        let lists: Vec<Vec<u32>> = (0..nv)
            .map(|v| {
                lat.vertex_edges(v)
                    .map(|e| {
                        let (a, b) = lat.endpoints(e);
                        (if a == v { b } else { a }) as u32
                    })
                    .collect()
            })
            .collect();
        let stride = lists.iter().map(Vec::len).max().unwrap_or(0);
        let mut nbrs = Vec::with_capacity(nv * stride);
        for l in &lists {
            nbrs.extend(l);
            nbrs.extend(std::iter::repeat_n(nv as u32, stride - l.len()));
        }
        let degree = lists.iter().map(|l| l.len() as u8).collect();
        let table = TwoPointTable::new(stride, 2.0 * coupling, 0.0)?;
        Ok(IsingChain { nbrs, degree, stride, spin: vec![0; nv + 1], table, rng: rng.rng() })
    }

    pub fn state(&self) -> &[u8] {
        &self.spin[..self.degree.len()]
    }

    #[inline]
    fn local(&self, v: usize) -> usize {
        let ns = &self.nbrs[v * self.stride..(v + 1) * self.stride];
        let n1: usize = ns.iter().map(|&u| self.spin[u as usize] as usize).sum();
        self.table.idx(self.degree[v] as usize, n1)
    }

    pub fn sweep(&mut self) {
        for v in 0..self.degree.len() {
            let thr = self.table.thr[self.local(v)];
            self.spin[v] = (self.rng.next_u64() >= thr) as u8;
        }
    }

    pub fn conditional_mean(&self, v: usize) -> f64 {
        self.table.mean[self.local(v)]
    }

    pub fn are_neighbours(&self, x: usize, y: usize) -> bool {
        self.nbrs[x * self.stride..x * self.stride + self.degree[x] as usize].contains(&(y as u32))
    }

    pub fn correlation(&self, x: usize, y: usize) -> f64 {
        if self.spin[x] == self.spin[y] {
            1.0
        } else {
            -1.0
        }
    }
}

struct Series {
    stream_id: u64,
    /// Means over consecutive bins of `bin` sweeps.
    values: Vec<f64>,
    bin: usize,
}

/// Longest series kept per observable; longer runs are stored as bin means.
const MAX_STORED: usize = 1 << 20;

/// A chain together with the observables it records after each sweep.
trait Sampler {
    fn sweep(&mut self);
    fn measure(&self, out: &mut [f64]);
}

fn run_replica(plan: &SamplingPlan, stream_id: u64, n_obs: usize, mut s: impl Sampler) -> Vec<Series> {
    for _ in 0..plan.therm.unwrap_or(DEFAULT_THERM) {
        s.sweep();
    }
    let bin = plan.sweeps.div_ceil(MAX_STORED);
    let mut values = vec![Vec::with_capacity(plan.sweeps / bin); n_obs];
    let mut acc = vec![0.0; n_obs];
    let mut cur = vec![0.0; n_obs];
    for i in 0..plan.sweeps {
        s.sweep();
        s.measure(&mut cur);
        for (a, c) in acc.iter_mut().zip(&cur) {
            *a += c;
        }
        if (i + 1) % bin == 0 {
            for (v, a) in values.iter_mut().zip(acc.iter_mut()) {
                v.push(*a / bin as f64);
                *a = 0.0;
            }
        }
    }
    values.into_iter().map(|values| Series { stream_id, values, bin }).collect()
}

struct WilsonRun<'a> {
    chain: GaugeChain<'a>,
    edges: &'a [u32],
    multi_hit: bool,
    vertex_moves: bool,
}

impl Sampler for WilsonRun<'_> {
    fn sweep(&mut self) {
        self.chain.sweep();
        if self.vertex_moves {
            self.chain.gauge_sweep();
        }
    }

    fn measure(&self, out: &mut [f64]) {
        out[0] = if self.multi_hit { self.chain.wilson_multi_hit(self.edges) } else { self.chain.wilson(self.edges) };
    }
}

struct CorrelationRun {
    chain: IsingChain,
    /// `(x, y, use conditional means)`.
    pairs: Vec<(usize, usize, bool)>,
}

impl Sampler for CorrelationRun {
    fn sweep(&mut self) {
        self.chain.sweep();
    }

    fn measure(&self, out: &mut [f64]) {
        for (o, &(x, y, hit)) in out.iter_mut().zip(&self.pairs) {
            *o = if x == y {
                1.0
            } else if hit {
                self.chain.conditional_mean(x) * self.chain.conditional_mean(y)
            } else {
                self.chain.correlation(x, y)
            };
        }
    }
}

fn pool(
    plan: &SamplingPlan,
    series: Vec<Series>,
    mode: McMode,
    rng: RngSpec,
    params: ModelParams,
) -> Result<WilsonEstimate> {
    let base_therm = plan.therm.unwrap_or(DEFAULT_THERM);
    let mut trimmed = Vec::with_capacity(series.len());
    let mut tau_max: f64 = 0.5;
    let bin = series.first().map_or(1, |s| s.bin);
    for s in series {
        let tau = integrated_autocorr_time(&s.values) * bin as f64;
        tau_max = tau_max.max(tau);
        let extra = if plan.therm.is_none() {
            ((20.0 * tau).ceil() as usize).saturating_sub(DEFAULT_THERM).div_ceil(bin).min(s.values.len())
        } else {
            0
        };
        trimmed.push((s.stream_id, tau, extra * bin, s.values[extra..].to_vec()));
    }
    let per_block = plan.block_len.unwrap_or_else(|| (5.0 * tau_max).ceil().max(1.0) as usize).div_ceil(bin);
    let block_len = per_block * bin;
    let mut all_blocks = Vec::new();
    let mut replicas = Vec::new();
    let mut n_used = 0;
    for (stream_id, tau, extra, values) in &trimmed {
        let blocks: Vec<f64> =
            values.chunks_exact(per_block).map(|b| b.iter().sum::<f64>() / per_block as f64).collect();
        let used = blocks.len() * block_len;
        n_used += used;
        let mean = if blocks.is_empty() { f64::NAN } else { blocks.iter().sum::<f64>() / blocks.len() as f64 };
        replicas.push(ReplicaSummary {
            stream_id: *stream_id,
            mean,
            stderr: jackknife(&blocks).ok().map(|r| r.1),
            n_used: used,
            n_therm: base_therm + extra,
            tau_int: *tau,
        });
        all_blocks.extend(blocks);
    }
    let (mean, stderr) = jackknife(&all_blocks).map_err(|_| {
        Error::Numeric(format!(
            "{} blocks of length {block_len} from {} measured sweeps: too few for an error estimate",
            all_blocks.len(),
            plan.sweeps * plan.streams
        ))
    })?;
    if !mean.is_finite() || !stderr.is_finite() {
        return Err(Error::Numeric("non-finite Monte Carlo estimate".into()));
    }
    Ok(WilsonEstimate {
        mode,
        mean,
        stderr,
        n_sweeps: n_used,
        n_therm: replicas.iter().map(|r| r.n_therm).max().unwrap_or(base_therm),
        block_len,
        n_blocks: all_blocks.len(),
        tau_int: tau_max,
        multi_hit: plan.multi_hit,
        rng,
        params,
        replicas,
    })
}

/// Estimates `<rho(sigma(gamma))>` at finite `beta` by heat-bath sweeps over the
/// positive edges.
pub fn mc_wilson(
    params: &ModelParams,
    gamma: &PathPolymer,
    plan: &SamplingPlan,
    rng: RngSpec,
) -> Result<WilsonEstimate> {
    params.validate()?;
    plan.validate()?;
    if params.beta.is_infinite() {
        return Err(Error::Precondition("mc_wilson needs finite beta; use the Ising sampler".into()));
    }
    let lat = Lattice::new(&params.bx);
    let g = GaugeGraph::from_lattice(&lat);
    let edges = gamma.edges().to_vec();
    if plan.multi_hit {
        for (i, &e) in edges.iter().enumerate() {
            if edges[i + 1..]
                .iter()
                .any(|&f| g.edge_plaqs[e as usize].iter().any(|p| g.edge_plaqs[f as usize].contains(p)))
            {
                return Err(Error::Precondition("multi-hit needs gamma edges that share no plaquette".into()));
            }
        }
    }
    let series = (0..plan.streams)
        .into_par_iter()
        .map(|r| {
            let spec = rng.replica(r);
            let chain = GaugeChain::new(&g, params.beta, params.kappa, params.convention, spec)?;
            let run = WilsonRun { chain, edges: &edges, multi_hit: plan.multi_hit, vertex_moves: plan.vertex_moves };
            Ok(run_replica(plan, spec.stream_id, 1, run))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    pool(plan, series, McMode::FiniteBeta, rng, params.clone())
}

/// Estimates `<rho(eta_x) rho(eta_y)>` in the Ising model reached at
/// `beta = infinity`, coupling `c kappa` per edge.
pub fn mc_ising_correlation(
    bx: &BoxSpec,
    kappa: f64,
    convention: ActionConvention,
    x: &[i32],
    y: &[i32],
    plan: &SamplingPlan,
    rng: RngSpec,
) -> Result<WilsonEstimate> {
    let pair = [(x.to_vec(), y.to_vec())];
    Ok(mc_ising_correlations(bx, kappa, convention, &pair, plan, rng)?.remove(0))
}

/// Like [`mc_ising_correlation`] for several vertex pairs, all measured on the same
/// chains. Estimates for different pairs are correlated.
pub fn mc_ising_correlations(
    bx: &BoxSpec,
    kappa: f64,
    convention: ActionConvention,
    pairs: &[(Vec<i32>, Vec<i32>)],
    plan: &SamplingPlan,
    rng: RngSpec,
) -> Result<Vec<WilsonEstimate>> {
    plan.validate()?;
    if pairs.is_empty() {
        return Err(Error::Invalid("no vertex pairs to measure".into()));
    }
    let params = ModelParams::new(bx.clone(), f64::INFINITY, kappa)?.with_convention(convention);
    let lat = Lattice::new(bx);
    let vertex = |x: &[i32]| lat.vertex_index(x).ok_or_else(|| Error::Invalid(format!("vertex {x:?} outside the box")));
    let idx = pairs.iter().map(|(x, y)| Ok((vertex(x)?, vertex(y)?))).collect::<Result<Vec<_>>>()?;
    let coupling = params.ising_coupling();
    let mut per_replica = (0..plan.streams)
        .into_par_iter()
        .map(|r| {
            let spec = rng.replica(r);
            let chain = IsingChain::new(&lat, coupling, spec)?;
            // Neighbouring spins are not conditionally independent.
            let pairs = idx.iter().map(|&(x, y)| (x, y, plan.multi_hit && !chain.are_neighbours(x, y))).collect();
            Ok(run_replica(plan, spec.stream_id, idx.len(), CorrelationRun { chain, pairs }))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::with_capacity(idx.len());
    for _ in 0..idx.len() {
        let series = per_replica.iter_mut().map(|r| r.remove(0)).collect();
        out.push(pool(plan, series, McMode::IsingInfinity, rng, params.clone())?);
    }
    Ok(out)
}

/// How `beta` depends on the line length `n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase", deny_unknown_fields)]
pub enum BetaSchedule {
    Fixed {
        beta: f64,
    },
    /// `beta_n = log(n / lambda) / (8 (m-1))`, holding `n exp(-8(m-1) beta_n) = lambda`.
    Scaling {
        lambda: f64,
    },
    /// The Ising model: correlations between the endpoints of the line.
    Infinite,
}

impl BetaSchedule {
    pub fn beta(&self, n: usize, m: usize) -> Result<f64> {
        match *self {
            BetaSchedule::Fixed { beta } if beta.is_finite() && beta >= 0.0 => Ok(beta),
            BetaSchedule::Fixed { beta } => {
                Err(Error::Invalid(format!("fixed beta must be finite and >= 0, got {beta}")))
            }
            BetaSchedule::Scaling { lambda } => {
                if !(lambda > 0.0) || (n as f64) < lambda {
                    return Err(Error::Invalid(format!(
                        "scaling schedule needs 0 < lambda <= n, got lambda {lambda}, n {n}"
                    )));
                }
                Ok((n as f64 / lambda).ln() / (8.0 * (m - 1) as f64))
            }
            BetaSchedule::Infinite => Ok(f64::INFINITY),
        }
    }
}

/// A family of runs over line lengths.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ScanSpec {
    #[serde(rename = "box")]
    pub bx: BoxSpec,
    pub kappa: f64,
    #[serde(default)]
    pub convention: ActionConvention,
    pub schedule: BetaSchedule,
    pub n_values: Vec<usize>,
}

/// One row of [`decay_scan`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScanRow {
    pub n: usize,
    #[serde(with = "crate::exact::beta_serde")]
    pub beta_n: f64,
    /// Realized `xi_{beta_n} n`; zero at `beta = infinity`.
    pub xi_n: f64,
    pub estimate: WilsonEstimate,
}

/// Measures `<W_{gamma_n}>` for the centred straight line of each length. Row `n`
/// uses the seed `rng.derive(n)`, so rows are independent and individually
/// reproducible. At `beta = infinity` the measured quantity is the correlation of the
/// line's endpoints; the Gibbs measure no longer depends on `n`, so one set of chains
/// seeded by `rng` measures every row.
pub fn decay_scan(spec: &ScanSpec, plan: &SamplingPlan, rng: RngSpec) -> Result<Vec<ScanRow>> {
    plan.validate()?;
    if spec.n_values.is_empty() {
        return Err(Error::Invalid("scan needs at least one n".into()));
    }
    let lat = Lattice::new(&spec.bx);
    let m = spec.bx.m();
    if matches!(spec.schedule, BetaSchedule::Infinite) {
        let pairs = spec
            .n_values
            .iter()
            .map(|&n| {
                let ends = centered_line(&lat, n, 0)?.odd_vertices(&lat);
                Ok((lat.cell(0, ends[0]).base.clone(), lat.cell(0, ends[1]).base.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        let est = mc_ising_correlations(&spec.bx, spec.kappa, spec.convention, &pairs, plan, rng)?;
        return Ok(spec
            .n_values
            .iter()
            .zip(est)
            .map(|(&n, estimate)| ScanRow { n, beta_n: f64::INFINITY, xi_n: 0.0, estimate })
            .collect());
    }
    spec.n_values
        .par_iter()
        .map(|&n| {
            let beta = spec.schedule.beta(n, m)?;
            let params = ModelParams::new(spec.bx.clone(), beta, spec.kappa)?.with_convention(spec.convention);
            let line = centered_line(&lat, n, 0)?;
            let xi = Activities::new(&params).xi();
            let estimate = mc_wilson(&params, &line, plan, rng.derive(n as u64))?;
            Ok(ScanRow { n, beta_n: beta, xi_n: xi * n as f64, estimate })
        })
        .collect()
}
