//! Run configurations, dispatch to the engines, and reproducible artifacts.
//!
//! A run writes its artifacts into one directory together with `manifest.json`,
//! which embeds the full configuration and its SHA-256. Feeding a manifest back as
//! the configuration replays the run. All files are written to a temporary file
//! and renamed into place.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::cluster::{bound_diagnostics, minimal_vortex_decomposition, BoundOptions, BoundReport, Decomposition};
use crate::cluster::{Expansion, ExpansionConfig, LogRatio};
use crate::error::{Error, Result};
use crate::exact::{
    centered_line, exact_check_z, exact_z_ratio, exact_z_ratio_closed, exact_z_ratio_ising, CheckZResult, ExactOptions,
    ExactResult, ModelParams,
};
use crate::fit::{compare_c, fit_decay_at, CompareReport, DecayPoint, FitModel, FitReport};
use crate::lattice::Lattice;
use crate::mc::{decay_scan, BetaSchedule, RngSpec, SamplingPlan, ScanRow, ScanSpec};

/// Header of the scan CSV files.
pub const CSV_HEADER: [&str; 7] = ["n", "beta_n", "kappa", "mean", "stderr", "sweeps", "seed"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Exact,
    Expand,
    Mc,
    Scan,
    Fit,
    Compare,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Exact => "exact",
            Mode::Expand => "expand",
            Mode::Mc => "mc",
            Mode::Scan => "scan",
            Mode::Fit => "fit",
            Mode::Compare => "compare",
        }
    }
}

/// Input of a `fit` run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct FitSpec {
    /// A scan CSV.
    pub input: PathBuf,
    #[serde(default)]
    pub range: Option<[f64; 2]>,
}

/// Input of a `compare` run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct CompareSpec {
    /// `fit.json` of the gauge run.
    pub gauge: PathBuf,
    /// `fit.json` of the `beta = infinity` run.
    pub ising: PathBuf,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    #[serde(default = "default_model")]
    pub model: FitModel,
}

fn default_rel_tol() -> f64 {
    0.1
}

fn default_model() -> FitModel {
    FitModel::PowerCorrected
}

fn default_output() -> PathBuf {
    PathBuf::from("run")
}

/// Everything a run needs. Sections not used by the mode may be omitted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    #[serde(default)]
    pub model: Option<ModelParams>,
    /// Lengths of the centred straight lines along axis 0.
    #[serde(default)]
    pub lengths: Vec<usize>,
    #[serde(default)]
    pub exact: ExactOptions,
    /// Also evaluate the high-temperature representation exactly.
    #[serde(default)]
    pub check_z: bool,
    #[serde(default)]
    pub expansion: ExpansionConfig,
    #[serde(default)]
    pub bounds: Option<BoundOptions>,
    #[serde(default)]
    pub decomposition: bool,
    #[serde(default)]
    pub sampling: Option<SamplingPlan>,
    #[serde(default)]
    pub scan: Option<ScanSpec>,
    #[serde(default)]
    pub fit: Option<FitSpec>,
    #[serde(default)]
    pub compare: Option<CompareSpec>,
    /// Run directory.
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub seed: u64,
}

impl RunConfig {
    /// Reads a TOML (`.toml`) or JSON file into a JSON value. A manifest yields the
    /// configuration it embeds.
    pub fn load_value(path: &Path) -> Result<Value> {
        let text =
            fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let v: Value = if path.extension().is_some_and(|e| e == "toml") {
            let t: toml::Value =
                toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            serde_json::to_value(t)?
        } else {
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        };
        match v {
            Value::Object(mut o) if o.contains_key("configHash") && o.contains_key("config") => {
                Ok(o.remove("config").expect("checked"))
            }
            v => Ok(v),
        }
    }

    pub fn from_value(v: Value) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_value(v).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_value(Self::load_value(path)?)
    }

    fn need<'a, T>(&self, x: &'a Option<T>, what: &str) -> Result<&'a T> {
        x.as_ref().ok_or_else(|| Error::Config(format!("mode {} needs a `{what}` section", self.mode.name())))
    }

    pub fn validate(&self) -> Result<()> {
        match self.mode {
            Mode::Exact | Mode::Expand | Mode::Mc => {
                self.need(&self.model, "model")?.validate()?;
                if self.lengths.is_empty() {
                    return Err(Error::Config(format!("mode {} needs `lengths`", self.mode.name())));
                }
                if self.mode == Mode::Mc {
                    self.need(&self.sampling, "sampling")?.validate()?;
                }
                if self.mode == Mode::Expand {
                    self.expansion.validate()?;
                }
            }
            Mode::Scan => {
                self.need(&self.scan, "scan")?;
                self.need(&self.sampling, "sampling")?.validate()?;
            }
            Mode::Fit => {
                self.need(&self.fit, "fit")?;
            }
            Mode::Compare => {
                let c = self.need(&self.compare, "compare")?;
                if !(c.rel_tol >= 0.0) {
                    return Err(Error::Config("relTol must be >= 0".into()));
                }
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("config serializes"))
    }
}

/// Sets `path` (dot-separated keys) in a JSON object to `value`, creating objects
/// on the way.
pub fn set_path(root: &mut Value, path: &str, value: Value) -> Result<()> {
    let mut cur = root;
    let keys: Vec<&str> = path.split('.').collect();
    for (i, k) in keys.iter().enumerate() {
        if !cur.is_object() {
            if cur.is_null() {
                *cur = Value::Object(Default::default());
            } else {
                return Err(Error::Config(format!("`{path}`: `{k}` is not inside an object")));
            }
        }
        let obj = cur.as_object_mut().expect("object");
        if i + 1 == keys.len() {
            obj.insert((*k).to_string(), value);
            return Ok(());
        }
        cur = obj.entry((*k).to_string()).or_insert(Value::Null);
    }
    Ok(())
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    use std::io::Write;
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// A file and its SHA-256.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FileRef {
    pub path: PathBuf,
    pub sha256: String,
}

impl FileRef {
    fn of(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Ok(FileRef { path: path.to_path_buf(), sha256: sha256_hex(&bytes) })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub mode: Mode,
    pub config_hash: String,
    pub config: RunConfig,
    pub seeds: Vec<u64>,
    /// Artifact names relative to the run directory.
    pub artifacts: Vec<FileRef>,
    pub inputs: Vec<FileRef>,
}

/// What a finished run produced.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub manifest: Manifest,
}

struct Writer {
    dir: PathBuf,
    artifacts: Vec<FileRef>,
}

impl Writer {
    fn put(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        write_atomic(&self.dir.join(name), bytes)?;
        self.artifacts.push(FileRef { path: PathBuf::from(name), sha256: sha256_hex(bytes) });
        Ok(())
    }

    fn put_json<T: Serialize>(&mut self, name: &str, v: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(v)?;
        bytes.push(b'\n');
        self.put(name, &bytes)
    }
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct ExactRow {
    n: usize,
    edges: Vec<u32>,
    wilson: ExactResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    ising_correlation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    check_z: Option<CheckZResult>,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct ExpandRow {
    n: usize,
    log_ratio: LogRatio,
    ratio: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    bounds: Option<BoundReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    decomposition: Option<Decomposition>,
}

/// One line of a scan CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub n: usize,
    pub beta_n: f64,
    pub kappa: f64,
    pub mean: f64,
    pub stderr: f64,
    pub sweeps: usize,
    pub seed: u64,
}

/// One line of a scan JSONL: one replica at one `n`.
#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct ReplicaRecord<'a> {
    n: usize,
    #[serde(with = "crate::exact::beta_serde")]
    beta_n: f64,
    kappa: f64,
    xi_n: f64,
    seed: u64,
    stream_id: u64,
    mean: f64,
    stderr: Option<f64>,
    n_used: usize,
    n_therm: usize,
    tau_int: f64,
    mode: &'a crate::mc::McMode,
}

pub fn write_scan_csv(rows: &[ScanRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(CsvRow {
            n: r.n,
            beta_n: r.beta_n,
            kappa: r.estimate.params.kappa,
            mean: r.estimate.mean,
            stderr: r.estimate.stderr,
            sweeps: r.estimate.n_sweeps,
            seed: r.estimate.rng.seed,
        })
        .map_err(|e| Error::Numeric(e.to_string()))?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

pub fn read_scan_csv(path: &Path) -> Result<Vec<CsvRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let header: Vec<String> =
        r.headers().map_err(|e| Error::Parse(e.to_string()))?.iter().map(str::to_string).collect();
    if header != CSV_HEADER {
        return Err(Error::Parse(format!("{}: expected columns {CSV_HEADER:?}, got {header:?}", path.display())));
    }
    r.deserialize().map(|row| row.map_err(|e| Error::Parse(format!("{}: {e}", path.display())))).collect()
}

fn run_exact(cfg: &RunConfig, out: &mut Writer) -> Result<()> {
    let params = cfg.model.as_ref().expect("validated");
    let lat = Lattice::new(&params.bx);
    let mut rows = Vec::new();
    for &n in &cfg.lengths {
        let line = centered_line(&lat, n, 0)?;
        let (wilson, ising) = if params.beta.is_infinite() {
            let ends = line.odd_vertices(&lat);
            let corr = match ends.as_slice() {
                [a, b] => Some(exact_z_ratio_ising(params, &lat.cell(0, *a).base, &lat.cell(0, *b).base, cfg.exact)?),
                _ => None,
            };
            (exact_z_ratio_closed(params, &line, cfg.exact)?, corr)
        } else {
            (exact_z_ratio(params, &line, cfg.exact)?, None)
        };
        let check_z = if cfg.check_z { Some(exact_check_z(params, &line, cfg.exact)?) } else { None };
        rows.push(ExactRow { n, edges: line.edges().to_vec(), wilson, ising_correlation: ising, check_z });
    }
    out.put_json("exact.json", &serde_json::json!({ "params": params, "rows": rows }))
}

fn run_expand(cfg: &RunConfig, out: &mut Writer) -> Result<()> {
    let params = cfg.model.as_ref().expect("validated");
    let ex = Expansion::new(params, cfg.expansion.clone())?;
    let lat = ex.lattice();
    let mut rows = Vec::new();
    for &n in &cfg.lengths {
        let line = centered_line(lat, n, 0)?;
        let log_ratio = ex.truncated_log_ratio(&line, &line)?;
        let bounds = match &cfg.bounds {
            Some(b) => {
                let mut b = b.clone();
                b.gamma_n = Some(line.clone());
                Some(bound_diagnostics(&ex, &b)?)
            }
            None => None,
        };
        let decomposition =
            if cfg.decomposition { Some(minimal_vortex_decomposition(&ex, &line, &line)?) } else { None };
        let ratio = log_ratio.value.exp();
        rows.push(ExpandRow { n, log_ratio, ratio, bounds, decomposition });
    }
    let summary = serde_json::json!({
        "params": params,
        "expansion": cfg.expansion,
        "poolSize": ex.pool().len(),
        "pathPolymers": ex.pool().n_paths(),
        "rows": rows,
    });
    out.put_json("expand.json", &summary)
}

fn run_scan(cfg: &RunConfig, spec: &ScanSpec, out: &mut Writer, seeds: &mut Vec<u64>) -> Result<()> {
    let plan = cfg.sampling.as_ref().expect("validated");
    let rng = RngSpec::new(cfg.seed, 0);
    let rows = decay_scan(spec, plan, rng)?;
    let name = cfg.mode.name();
    let mut jsonl = Vec::new();
    for r in &rows {
        seeds.push(r.estimate.rng.seed);
        for rep in &r.estimate.replicas {
            let rec = ReplicaRecord {
                n: r.n,
                beta_n: r.beta_n,
                kappa: r.estimate.params.kappa,
                xi_n: r.xi_n,
                seed: r.estimate.rng.seed,
                stream_id: rep.stream_id,
                mean: rep.mean,
                stderr: rep.stderr,
                n_used: rep.n_used,
                n_therm: rep.n_therm,
                tau_int: rep.tau_int,
                mode: &r.estimate.mode,
            };
            serde_json::to_writer(&mut jsonl, &rec)?;
            jsonl.push(b'\n');
        }
    }
    out.put(&format!("{name}.csv"), &write_scan_csv(&rows)?)?;
    out.put(&format!("{name}.jsonl"), &jsonl)?;
    out.put_json(&format!("{name}.json"), &serde_json::json!({ "scan": spec, "sampling": plan, "rows": rows }))
}

/// A fit written by a `fit` run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FitArtifact {
    pub source: FileRef,
    /// The manifest next to the source CSV, when there is one.
    pub source_manifest: Option<FileRef>,
    pub source_config_hash: Option<String>,
    pub report: FitReport,
}

fn run_fit(spec: &FitSpec, out: &mut Writer, inputs: &mut Vec<FileRef>) -> Result<()> {
    let rows = read_scan_csv(&spec.input)?;
    let source = FileRef::of(&spec.input)?;
    inputs.push(source.clone());
    let kappas: Vec<f64> = rows.iter().map(|r| r.kappa).collect();
    let kappa = match kappas.first() {
        Some(&k) if kappas.iter().all(|&x| x == k) => Some(k),
        _ => None,
    };
    let data: Vec<DecayPoint> = rows.iter().map(|r| DecayPoint::new(r.n as f64, r.mean, r.stderr)).collect();
    let report = fit_decay_at(&data, spec.range.map(|r| (r[0], r[1])), kappa)?;
    let manifest_path = spec.input.parent().unwrap_or(Path::new(".")).join("manifest.json");
    let (source_manifest, source_config_hash) = if manifest_path.exists() {
        let m: Manifest = serde_json::from_slice(&fs::read(&manifest_path)?)?;
        let r = FileRef::of(&manifest_path)?;
        inputs.push(r.clone());
        (Some(r), Some(m.config_hash))
    } else {
        (None, None)
    };
    out.put_json("fit.json", &FitArtifact { source, source_manifest, source_config_hash, report })
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct CompareArtifact {
    gauge: FileRef,
    ising: FileRef,
    model: FitModel,
    report: CompareReport,
}

fn run_compare(spec: &CompareSpec, out: &mut Writer, inputs: &mut Vec<FileRef>) -> Result<()> {
    let read = |p: &Path| -> Result<(FitArtifact, FileRef)> {
        let f = FileRef::of(p)?;
        let a: FitArtifact = serde_json::from_slice(&fs::read(p)?)
            .map_err(|e| Error::Config(format!("{}: not a fit artifact: {e}", p.display())))?;
        Ok((a, f))
    };
    let (g, gf) = read(&spec.gauge)?;
    let (i, if_) = read(&spec.ising)?;
    inputs.extend([gf.clone(), if_.clone()]);
    let pick = |a: &FitArtifact| match spec.model {
        FitModel::PowerCorrected => a.report.power.clone(),
        FitModel::PureExponential => a.report.pure_exponential.clone(),
    };
    let report = compare_c(&pick(&g), &pick(&i), spec.rel_tol)?;
    out.put_json("compare.json", &CompareArtifact { gauge: gf, ising: if_, model: spec.model, report })
}

/// Runs `cfg` and writes its artifacts and manifest under `cfg.output`.
pub fn run(cfg: &RunConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let dir = cfg.output.clone();
    fs::create_dir_all(&dir)?;
    let mut out = Writer { dir: dir.clone(), artifacts: Vec::new() };
    let mut seeds = Vec::new();
    let mut inputs = Vec::new();
    match cfg.mode {
        Mode::Exact => run_exact(cfg, &mut out)?,
        Mode::Expand => run_expand(cfg, &mut out)?,
        Mode::Mc => {
            let p = cfg.model.as_ref().expect("validated");
            let schedule =
                if p.beta.is_infinite() { BetaSchedule::Infinite } else { BetaSchedule::Fixed { beta: p.beta } };
            let spec = ScanSpec {
                bx: p.bx.clone(),
                kappa: p.kappa,
                convention: p.convention,
                schedule,
                n_values: cfg.lengths.clone(),
            };
            run_scan(cfg, &spec, &mut out, &mut seeds)?
        }
        Mode::Scan => run_scan(cfg, cfg.scan.as_ref().expect("validated"), &mut out, &mut seeds)?,
        Mode::Fit => run_fit(cfg.fit.as_ref().expect("validated"), &mut out, &mut inputs)?,
        Mode::Compare => run_compare(cfg.compare.as_ref().expect("validated"), &mut out, &mut inputs)?,
    }
    let manifest = Manifest {
        tool: "higgs".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        mode: cfg.mode,
        config_hash: cfg.hash(),
        config: cfg.clone(),
        seeds,
        artifacts: out.artifacts,
        inputs,
    };
    let mut bytes = serde_json::to_vec_pretty(&manifest)?;
    bytes.push(b'\n');
    write_atomic(&dir.join("manifest.json"), &bytes)?;
    Ok(RunOutcome { dir, manifest })
}
