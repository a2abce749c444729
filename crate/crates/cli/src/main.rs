//! `cylwalk`: graph generation, spectral and capacity reports, trial
//! ensembles, auxiliary checks and the full reproduction pipeline.
//!
//! Exit codes: 0 ok, 2 configuration error, 3 stage failure, 4 a check failed.

mod config;
mod pipeline;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use cylwalk::experiments::{write_pairs_csv, write_records_jsonl, run_theorem_experiment, summarize, EnsembleConfig, SiteKind, SiteSpec, Verdict};
use cylwalk::potential::WindowShape;
use cylwalk::spectral::{spectral_report, DEFAULT_DENSE_LIMIT};

use config::{ConfigError, ExperimentConfig};
use pipeline::{artifact, auxiliary_checks, capacities, graph_info, write_json, StageError};

#[derive(Parser)]
#[command(name = "cylwalk", version, about = "Random walks on discrete cylinders and their local picture")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build a base graph and write it as JSON.
    GenGraph(Common),
    /// Spectral gap, relaxation time and the A2 verdict of a base graph.
    Spectral(Common),
    /// Capacity bracket of a window in the limit model of a site.
    Capacity(Common),
    /// Run the trial ensemble and write records, (U, vacancy) pairs and summaries.
    Simulate(Common),
    /// Run the dedicated auxiliary checks.
    Verify(Common),
    /// Every stage in order, with a stage cache, ending in one summary report.
    ReproduceTheorem(Common),
}

#[derive(Args, Clone, Default)]
struct Common {
    /// TOML configuration; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    d: Option<usize>,
    /// Single size (side, level or depth).
    #[arg(long = "N")]
    n: Option<u32>,
    /// Comma-separated sizes.
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<u32>>,
    /// Site kind, e.g. box-centre, sierpinski-midpoint, tree-leaf.
    #[arg(long)]
    site: Option<String>,
    /// Window shapes: single, pair, triple (comma-separated).
    #[arg(long, value_delimiter = ',')]
    window: Option<Vec<String>>,
    #[arg(long)]
    rho: Option<u32>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    /// discrete or continuous.
    #[arg(long)]
    mode: Option<String>,
    /// Skip the auxiliary checks in reproduce-theorem.
    #[arg(long)]
    no_auxiliary: bool,
    /// Output directory (the CYLWALK_OUTPUT_DIR variable takes precedence).
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Config(ConfigError),
    Stage(StageError),
    Checks,
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

impl From<StageError> for Failure {
    fn from(e: StageError) -> Self {
        Failure::Stage(e)
    }
}

fn stage_err(stage: &str) -> impl Fn(cylwalk::Error) -> Failure + '_ {
    move |e| Failure::Stage(StageError { stage: stage.into(), msg: e.to_string() })
}

fn io_err(e: std::io::Error) -> Failure {
    Failure::Stage(StageError { stage: "output".into(), msg: e.to_string() })
}

fn parse_kebab<T: serde::de::DeserializeOwned>(field: &str, s: &str) -> Result<T, ConfigError> {
    serde_json::from_value(json!(s)).map_err(|_| ConfigError(vec![format!("{field}: unknown value {s:?}")]))
}

fn resolve(c: &Common) -> Result<ExperimentConfig, ConfigError> {
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(f) = &c.family {
        if cfg.graph.family != *f {
            // sites of another family would not survive the switch
            cfg.sites.clear();
        }
        cfg.graph.family = f.clone();
    }
    if let Some(d) = c.d {
        cfg.graph.d = d;
    }
    if let Some(n) = c.n {
        cfg.graph.sizes = vec![n];
    }
    if let Some(s) = &c.sizes {
        cfg.graph.sizes = s.clone();
    }
    if let Some(kind) = &c.site {
        let kind: SiteKind = parse_kebab("site", kind)?;
        cfg.sites = vec![SiteSpec { kind, v: cfg.sites.first().map_or(0.0, |s| s.v) }];
    }
    if let Some(w) = &c.window {
        cfg.run.shapes = w.iter().map(|s| WindowShape::parse(s).map_err(|e| ConfigError(vec![format!("window: {e}")]))).collect::<Result<_, _>>()?;
    }
    if let Some(r) = c.rho {
        cfg.capacity.rho = Some(r);
    }
    if let Some(t) = c.trials {
        cfg.run.trials = t;
        cfg.run.audit = cfg.run.audit.min(t);
    }
    if let Some(s) = c.seed {
        cfg.run.seed = s;
    }
    if let Some(a) = c.alpha {
        cfg.run.alpha = a;
    }
    if let Some(e) = c.eps {
        cfg.run.eps = e;
    }
    if let Some(m) = &c.mode {
        cfg.run.mode = parse_kebab("mode", m)?;
    }
    if c.no_auxiliary {
        cfg.checks.auxiliary = false;
    }
    if let Some(o) = &c.out {
        cfg.output_dir = Some(o.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn announce(path: &Path) {
    println!("wrote {}", path.display());
}

fn gen_graph(cfg: &ExperimentConfig, out: &Path) -> Result<(), Failure> {
    let family = cfg.family()?;
    for n in cfg.sizes() {
        let (b, info) = graph_info(family, n).map_err(stage_err("generators"))?;
        let body = json!({ "family": family, "info": info, "text": b.graph.to_text() });
        let path = out.join(format!("graph-{}-{n}.json", family.name()));
        write_json(&path, &artifact(cfg, "graph", body)).map_err(io_err)?;
        println!("{} N={n}: {} vertices, {} edges", family.name(), info.vertices, info.edges);
        announce(&path);
    }
    Ok(())
}

fn spectral(cfg: &ExperimentConfig, out: &Path) -> Result<(), Failure> {
    let family = cfg.family()?;
    for n in cfg.sizes() {
        let (b, _) = graph_info(family, n).map_err(stage_err("generators"))?;
        let r = spectral_report(&b.graph, cfg.run.eps, DEFAULT_DENSE_LIMIT).map_err(stage_err("spectral"))?;
        println!("{} N={n}: λ = {:.6e}, λ^d = {:.6e}, relaxation {:.3}, A2 {}", family.name(), r.lambda, r.lambda_d, r.relaxation_time, r.a2.holds);
        let path = out.join(format!("spectral-{}-{n}.json", family.name()));
        write_json(&path, &artifact(cfg, "spectral", json!({ "family": family, "size": n, "report": r }))).map_err(io_err)?;
        announce(&path);
    }
    Ok(())
}

fn capacity(cfg: &ExperimentConfig, out: &Path) -> Result<(), Failure> {
    let family = cfg.family()?;
    // the limit model does not depend on the size; any valid one will do
    let n = cfg.sizes()[0];
    let (b, _) = graph_info(family, n).map_err(stage_err("generators"))?;
    let plan = cylwalk::experiments::site_plan(&b, &cfg.sites(), &cfg.run.shapes, cfg.run.alpha, cfg.run.eps).map_err(stage_err("plan"))?;
    let caps = capacities(cfg, &plan).map_err(stage_err("capacity"))?;
    let mut rows = Vec::new();
    for (site, per_shape) in plan.sites.iter().zip(&caps) {
        for (shape, est) in cfg.run.shapes.iter().zip(per_shape) {
            println!("{:?} {:?}: {:.5} in [{:.5}, {:.5}] (ρ = {})", site.limit, shape, est.value, est.lower, est.upper, est.rho);
            rows.push(json!({ "site": site.kind, "limit": site.limit, "window": shape, "estimate": est }));
        }
    }
    let rho = cfg.capacity.rho.map_or("default".into(), |r| r.to_string());
    let path = out.join(format!("capacity-{}-rho{rho}.json", family.name()));
    write_json(&path, &artifact(cfg, "capacity", json!(rows))).map_err(io_err)?;
    announce(&path);
    Ok(())
}

fn simulate(cfg: &ExperimentConfig, out: &Path) -> Result<(), Failure> {
    let family = cfg.family()?;
    let r = &cfg.run;
    let ens = EnsembleConfig { trials: r.trials, mode: r.mode, seed: r.seed, audit: r.audit };
    let runs = run_theorem_experiment(family, &cfg.sizes(), &cfg.sites(), &r.shapes, r.alpha, r.eps, &ens).map_err(stage_err("ensemble"))?;
    fs::create_dir_all(out).map_err(io_err)?;
    let meta = pipeline::meta(cfg);
    let mut summaries = Vec::new();
    for run in &runs {
        let n = run.plan.size;
        let path = out.join(format!("records-N{n}.jsonl"));
        let mut f = std::io::BufWriter::new(fs::File::create(&path).map_err(io_err)?);
        writeln!(f, "{}", json!({ "meta": meta })).map_err(io_err)?;
        write_records_jsonl(&mut f, &run.records).map_err(stage_err("output"))?;
        f.flush().map_err(io_err)?;
        announce(&path);
        let path = out.join(format!("pairs-N{n}.csv"));
        let mut f = std::io::BufWriter::new(fs::File::create(&path).map_err(io_err)?);
        writeln!(f, "# config_hash={} seed={} cylwalk={}", meta["config_hash"].as_str().unwrap(), r.seed, cylwalk::VERSION).map_err(io_err)?;
        write_pairs_csv(&mut f, &run.records, 0, 0).map_err(stage_err("output"))?;
        f.flush().map_err(io_err)?;
        announce(&path);
        let s = summarize(run);
        println!("N={n}: {} records, {} failures, mean U = {:.4}", s.records, s.failures, s.sites[0].u_mean);
        summaries.push(s);
    }
    let path = out.join("simulate-summary.json");
    write_json(&path, &artifact(cfg, "simulate", json!({ "sizes": summaries }))).map_err(io_err)?;
    announce(&path);
    Ok(())
}

fn print_checks<'a>(checks: impl IntoIterator<Item = &'a cylwalk::experiments::Check>) -> bool {
    let mut ok = true;
    for c in checks {
        let pass = c.verdict == Verdict::Pass;
        ok &= pass;
        let stats: Vec<String> = c.statistic.iter().map(|v| format!("{v:.4}")).collect();
        println!("{} {} [{}]", if pass { "PASS" } else { "FAIL" }, c.name, stats.join(", "));
    }
    ok
}

fn verify(cfg: &ExperimentConfig, out: &Path) -> Result<(), Failure> {
    let family = cfg.family()?;
    let checks = auxiliary_checks(cfg, family, &cfg.sizes()).map_err(stage_err("auxiliary"))?;
    let ok = print_checks(&checks);
    let path = out.join("verify.json");
    write_json(&path, &artifact(cfg, "verify", json!({ "checks": checks }))).map_err(io_err)?;
    announce(&path);
    if ok {
        Ok(())
    } else {
        Err(Failure::Checks)
    }
}

fn reproduce(cfg: &ExperimentConfig, out: &Path) -> Result<(), Failure> {
    let (summary, ok, hits) = pipeline::reproduce(cfg, out)?;
    if !hits.is_empty() {
        println!("reused cached stages: {}", hits.join(", "));
    }
    let checks: Vec<cylwalk::experiments::Check> = serde_json::from_value(summary["body"]["checks"].clone()).unwrap_or_default();
    print_checks(&checks);
    let path = out.join("summary.json");
    write_json(&path, &summary).map_err(io_err)?;
    announce(&path);
    if ok {
        Ok(())
    } else {
        Err(Failure::Checks)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let common = match &cli.cmd {
        Cmd::GenGraph(c) | Cmd::Spectral(c) | Cmd::Capacity(c) | Cmd::Simulate(c) | Cmd::Verify(c) | Cmd::ReproduceTheorem(c) => c,
    };
    let result = resolve(common).map_err(Failure::from).and_then(|cfg| {
        let out = cfg.output_dir();
        match cli.cmd {
            Cmd::GenGraph(_) => gen_graph(&cfg, &out),
            Cmd::Spectral(_) => spectral(&cfg, &out),
            Cmd::Capacity(_) => capacity(&cfg, &out),
            Cmd::Simulate(_) => simulate(&cfg, &out),
            Cmd::Verify(_) => verify(&cfg, &out),
            Cmd::ReproduceTheorem(_) => reproduce(&cfg, &out),
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
        Err(Failure::Stage(e)) => {
            eprintln!("{e}");
            ExitCode::from(3)
        }
        Err(Failure::Checks) => {
            eprintln!("one or more checks failed");
            ExitCode::from(4)
        }
    }
}
