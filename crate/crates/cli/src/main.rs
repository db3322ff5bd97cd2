use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{error, info};
use serde_json::{json, Value};
use z2higgs::experiment::{run, set_path, RunConfig};
use z2higgs::Error;

/// Exact, expansion and Monte Carlo runs for the Z2 lattice Higgs model.
#[derive(Parser)]
#[command(name = "higgs", version)]
struct Cli {
    #[command(subcommand)]
    mode: ModeCmd,
}

#[derive(Subcommand)]
enum ModeCmd {
    /// Exhaustive Wilson line expectations on small boxes.
    Exact(Opts),
    /// Truncated cluster expansion, bounds and decomposition.
    Expand(Opts),
    /// Monte Carlo at fixed beta (or beta = inf for the Ising model).
    Mc(Opts),
    /// Monte Carlo over line lengths with a beta schedule.
    Scan(Opts),
    /// Decay fit of a scan CSV.
    Fit(Opts),
    /// Compare decay rates of two fits.
    Compare(Opts),
}

#[derive(Args)]
struct Opts {
    /// Run configuration (TOML or JSON), or a manifest to replay.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Box extents, e.g. `0:24,0:16`.
    #[arg(long = "box")]
    bx: Option<String>,
    /// A number or `inf`.
    #[arg(long)]
    beta: Option<String>,
    #[arg(long)]
    kappa: Option<f64>,
    /// Line lengths: `6..16` or `6,8,10`.
    #[arg(long)]
    n: Option<String>,
    /// Scaling schedule `n exp(-8(m-1) beta_n) = lambda` (scan only).
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    sweeps: Option<usize>,
    #[arg(long)]
    therm: Option<usize>,
    /// Jackknife block length in sweeps.
    #[arg(long = "block-len")]
    block_len: Option<usize>,
    #[arg(long)]
    streams: Option<usize>,
    #[arg(long = "multi-hit")]
    multi_hit: bool,
    /// Fit input CSV.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Fit range `lo:hi`.
    #[arg(long)]
    range: Option<String>,
    /// Gauge and Ising fit files for `compare`.
    #[arg(long)]
    gauge: Option<PathBuf>,
    #[arg(long)]
    ising: Option<PathBuf>,
    /// Any other setting, as `dotted.key=json`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn parse_box(s: &str) -> Result<Value, Error> {
    let ext: Result<Vec<Value>, Error> = s
        .split(',')
        .map(|iv| {
            let (lo, hi) = iv.split_once(':').ok_or_else(|| Error::Config(format!("bad interval {iv:?}")))?;
            let lo: i32 = lo.trim().parse().map_err(|_| Error::Config(format!("bad bound {lo:?}")))?;
            let hi: i32 = hi.trim().parse().map_err(|_| Error::Config(format!("bad bound {hi:?}")))?;
            Ok(json!([lo, hi]))
        })
        .collect();
    Ok(Value::Array(ext?))
}

fn parse_lengths(s: &str) -> Result<Value, Error> {
    let bad = || Error::Config(format!("bad length list {s:?}"));
    let v: Vec<usize> = if let Some((a, b)) = s.split_once("..") {
        let a: usize = a.trim().parse().map_err(|_| bad())?;
        let b: usize = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
        (a..=b).collect()
    } else {
        s.split(',').map(|x| x.trim().parse().map_err(|_| bad())).collect::<Result<_, _>>()?
    };
    Ok(json!(v))
}

fn parse_beta(s: &str) -> Result<Value, Error> {
    match s {
        "inf" | "infinity" => Ok(json!("inf")),
        _ => s.parse::<f64>().map(|b| json!(b)).map_err(|_| Error::Config(format!("bad beta {s:?}"))),
    }
}

fn build_config(mode: &str, o: &Opts) -> Result<RunConfig, Error> {
    let mut v = match &o.config {
        Some(p) => RunConfig::load_value(p)?,
        None => json!({}),
    };
    set_path(&mut v, "mode", json!(mode))?;
    let scan = mode == "scan";
    let model = |k: &str| if scan { format!("scan.{k}") } else { format!("model.{k}") };
    if let Some(b) = &o.bx {
        set_path(&mut v, &model("box"), parse_box(b)?)?;
    }
    if let Some(k) = o.kappa {
        set_path(&mut v, &model("kappa"), json!(k))?;
    }
    if let Some(b) = &o.beta {
        if scan {
            let beta = parse_beta(b)?;
            let sched =
                if beta == json!("inf") { json!({"kind": "infinite"}) } else { json!({"kind": "fixed", "beta": beta}) };
            set_path(&mut v, "scan.schedule", sched)?;
        } else {
            set_path(&mut v, "model.beta", parse_beta(b)?)?;
        }
    }
    if let Some(l) = o.lambda {
        set_path(&mut v, "scan.schedule", json!({"kind": "scaling", "lambda": l}))?;
    }
    if let Some(n) = &o.n {
        let key = if scan { "scan.nValues" } else { "lengths" };
        set_path(&mut v, key, parse_lengths(n)?)?;
    }
    let plan = [
        ("sampling.sweeps", o.sweeps),
        ("sampling.therm", o.therm),
        ("sampling.blockLen", o.block_len),
        ("sampling.streams", o.streams),
    ];
    for (k, x) in plan {
        if let Some(x) = x {
            set_path(&mut v, k, json!(x))?;
        }
    }
    if o.multi_hit {
        set_path(&mut v, "sampling.multiHit", json!(true))?;
    }
    if let Some(s) = o.seed {
        set_path(&mut v, "seed", json!(s))?;
    }
    if let Some(p) = &o.out {
        set_path(&mut v, "output", json!(p))?;
    }
    if let Some(p) = &o.input {
        set_path(&mut v, "fit.input", json!(p))?;
    }
    if let Some(r) = &o.range {
        let (lo, hi) = r.split_once(':').ok_or_else(|| Error::Config(format!("bad range {r:?}")))?;
        let lo: f64 = lo.parse().map_err(|_| Error::Config(format!("bad range {r:?}")))?;
        let hi: f64 = hi.parse().map_err(|_| Error::Config(format!("bad range {r:?}")))?;
        set_path(&mut v, "fit.range", json!([lo, hi]))?;
    }
    if let Some(p) = &o.gauge {
        set_path(&mut v, "compare.gauge", json!(p))?;
    }
    if let Some(p) = &o.ising {
        set_path(&mut v, "compare.ising", json!(p))?;
    }
    for kv in &o.set {
        let (k, raw) = kv.split_once('=').ok_or_else(|| Error::Config(format!("--set needs KEY=VALUE, got {kv:?}")))?;
        let val = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        set_path(&mut v, k, val)?;
    }
    RunConfig::from_value(v)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (mode, opts) = match &cli.mode {
        ModeCmd::Exact(o) => ("exact", o),
        ModeCmd::Expand(o) => ("expand", o),
        ModeCmd::Mc(o) => ("mc", o),
        ModeCmd::Scan(o) => ("scan", o),
        ModeCmd::Fit(o) => ("fit", o),
        ModeCmd::Compare(o) => ("compare", o),
    };
    match build_config(mode, opts).and_then(|cfg| run(&cfg)) {
        Ok(out) => {
            info!("wrote {} artifacts to {}", out.manifest.artifacts.len(), out.dir.display());
            let summary = json!({
                "dir": out.dir,
                "configHash": out.manifest.config_hash,
                "artifacts": out.manifest.artifacts,
            });
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            error!("{e}");
            let rec = json!({"error": {"kind": e.kind(), "message": e.to_string(), "exitCode": e.exit_code()}});
            eprintln!("{rec}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
