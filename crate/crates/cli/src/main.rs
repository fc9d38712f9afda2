use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::{info, warn};
use serde_json::json;

use qgs_core::economics::ServiceOutcome;
use qgs_core::manifest::{economics_table, outcomes_from_results, write_economics, ExperimentManifest, Loaded, TopologySpec};
use qgs_core::simulator::output::{write_results, write_summary, write_sweep};
use qgs_core::simulator::{monte_carlo, sweep, MonteCarloResult};
use qgs_core::{Architecture, Error};

#[derive(Parser)]
#[command(name = "qgs", version, about = "Key-supply and techno-economic experiments for QKD-secured grid networks")]
struct Cli {
    /// Experiment manifest (JSON).
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    /// Output directory; overrides the manifest.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Run seeds 1..=N instead of the manifest's seed list.
    #[arg(long, global = true)]
    seeds: Option<u64>,
    /// Worker threads for Monte Carlo runs.
    #[arg(long, global = true)]
    parallel: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a topology and write it as JSON.
    Topology {
        #[command(subcommand)]
        kind: TopologyCmd,
    },
    /// Monte Carlo runs for every listed architecture.
    Run,
    /// Parameter sweep over the manifest's axes.
    Sweep,
    /// Cost, risk and LCoSec tables from simulated outcomes.
    Economics {
        /// Long-format results to evaluate; simulated afresh when absent.
        #[arg(long)]
        results: Option<PathBuf>,
    },
    /// Check a manifest and print its digest.
    Validate,
}

#[derive(Subcommand)]
enum TopologyCmd {
    Metro {
        #[arg(long)]
        substations: usize,
        #[arg(long)]
        ring_km: f64,
        #[arg(long, default_value_t = 0)]
        chords: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    Distribution {
        #[arg(long)]
        neighborhoods: usize,
        #[arg(long)]
        agg_points: usize,
        #[arg(long)]
        span_km: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    Longhaul {
        #[arg(long)]
        km: f64,
        #[arg(long, default_value_t = 1)]
        trusted: usize,
        #[arg(long)]
        dual_chain: bool,
    },
}

enum Failure {
    Invalid(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_validation() {
            Failure::Invalid(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

fn runtime<E: std::fmt::Display>(path: &Path) -> impl FnOnce(E) -> Failure + '_ {
    move |e| Failure::Runtime(format!("{}: {e}", path.display()))
}

fn create(dir: &Path, name: &str) -> Outcome<BufWriter<File>> {
    fs::create_dir_all(dir).map_err(runtime(dir))?;
    let path = dir.join(name);
    File::create(&path).map(BufWriter::new).map_err(runtime(&path))
}

/// Core write errors are output failures, not input errors.
fn written(r: qgs_core::Result<()>) -> Outcome<()> {
    r.map_err(|e| Failure::Runtime(e.to_string()))
}

fn write_json(dir: &Path, name: &str, value: &serde_json::Value) -> Outcome<()> {
    let path = dir.join(name);
    let w = create(dir, name)?;
    serde_json::to_writer_pretty(w, value).map_err(runtime(&path))
}

fn load(cli: &Cli) -> Outcome<Loaded> {
    let path = cli.manifest.as_ref().ok_or_else(|| Failure::Invalid("--manifest is required".into()))?;
    let mut loaded = ExperimentManifest::from_path(path)?;
    if let Some(n) = cli.seeds {
        if n == 0 {
            return Err(Failure::Invalid("--seeds must be at least 1".into()));
        }
        loaded.experiment.sim.seeds = (1..=n).collect();
    }
    if cli.parallel == Some(0) {
        return Err(Failure::Invalid("--parallel must be at least 1".into()));
    }
    Ok(loaded)
}

fn out_dir(cli: &Cli, loaded: Option<&Loaded>) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| loaded.and_then(|l| l.output_dir.clone()))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn run_log(cli: &Cli, command: &str, loaded: &Loaded, digests: &[(Architecture, String)]) -> serde_json::Value {
    json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "timestamp": chrono::Utc::now().to_rfc3339(),
        "manifest": cli.manifest.as_ref().map(|p| p.display().to_string()),
        "seeds": loaded.experiment.sim.seeds,
        "parallel": cli.parallel,
        "architectures": digests
            .iter()
            .map(|(a, d)| json!({ "arch": a.label(), "digest": d }))
            .collect::<Vec<_>>(),
    })
}

fn simulate_all(cli: &Cli, loaded: &Loaded) -> Outcome<Vec<MonteCarloResult>> {
    loaded
        .experiments()
        .iter()
        .map(|e| {
            info!("running {} over {} seeds", e.sim.architecture, e.sim.seeds.len());
            monte_carlo(e, cli.parallel).map_err(Failure::from)
        })
        .collect()
}

fn cmd_topology(cli: &Cli, kind: &TopologyCmd) -> Outcome<()> {
    let spec = match *kind {
        TopologyCmd::Metro { substations, ring_km, chords, seed } => {
            TopologySpec::Metro { substations, ring_km, chords, seed }
        }
        TopologyCmd::Distribution { neighborhoods, agg_points, span_km, seed } => {
            TopologySpec::Distribution { neighborhoods, agg_points, span_km, seed }
        }
        TopologyCmd::Longhaul { km, trusted, dual_chain } => TopologySpec::Longhaul { km, trusted, dual_chain },
    };
    let topo = spec.build()?;
    let dir = out_dir(cli, None);
    let path = dir.join("topology.json");
    let text = topo.to_json()?;
    fs::create_dir_all(&dir).map_err(runtime(&dir))?;
    fs::write(&path, text).map_err(runtime(&path))?;
    println!("{} nodes, {} links -> {}", topo.nodes.len(), topo.links.len(), path.display());
    Ok(())
}

fn cmd_run(cli: &Cli) -> Outcome<()> {
    let loaded = load(cli)?;
    let dir = out_dir(cli, Some(&loaded));
    let results = simulate_all(cli, &loaded)?;
    let topo = loaded.topology_label();
    written(write_results(create(&dir, "results.csv")?, &loaded.scenario, topo, &results))?;
    written(write_summary(create(&dir, "summary.csv")?, &loaded.scenario, topo, &results))?;
    let report = json!({
        "scenario": loaded.scenario,
        "topology": topo,
        "architectures": results
            .iter()
            .map(|mc| json!({
                "arch": mc.arch.label(),
                "digest": mc.digest,
                "runs": mc.runs.iter().map(|r| json!({
                    "seed": r.seed,
                    "min_critical_availability": r.min_critical_availability(),
                    "sla": r.sla_report(),
                })).collect::<Vec<_>>(),
            }))
            .collect::<Vec<_>>(),
    });
    write_json(&dir, "report.json", &report)?;
    let digests: Vec<_> = results.iter().map(|mc| (mc.arch, mc.digest.clone())).collect();
    write_json(&dir, "run_log.json", &run_log(cli, "run", &loaded, &digests))?;
    println!("{} architectures x {} seeds -> {}", results.len(), loaded.experiment.sim.seeds.len(), dir.display());
    Ok(())
}

fn cmd_sweep(cli: &Cli) -> Outcome<()> {
    let loaded = load(cli)?;
    if loaded.sweep.is_empty() {
        return Err(Failure::Invalid("manifest defines no sweep axes".into()));
    }
    let dir = out_dir(cli, Some(&loaded));
    let mut cells = Vec::new();
    let mut digests = Vec::new();
    for e in loaded.experiments() {
        let arch_cells = sweep(&e, &loaded.sweep, cli.parallel)?;
        digests.push((e.sim.architecture, e.digest()?));
        cells.extend(arch_cells);
    }
    written(write_sweep(create(&dir, "sweep.csv")?, &cells))?;
    write_json(&dir, "run_log.json", &run_log(cli, "sweep", &loaded, &digests))?;
    println!("{} cells -> {}", cells.len(), dir.join("sweep.csv").display());
    Ok(())
}

fn cmd_economics(cli: &Cli, results: Option<&PathBuf>) -> Outcome<()> {
    let loaded = load(cli)?;
    let dir = out_dir(cli, Some(&loaded));
    let path = results.cloned().unwrap_or_else(|| dir.join("results.csv"));
    let outcomes: Vec<(Architecture, ServiceOutcome)> = if path.exists() {
        info!("reading outcomes from {}", path.display());
        let file = File::open(&path).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))?;
        let all = outcomes_from_results(file)?;
        loaded
            .architectures
            .iter()
            .map(|a| {
                all.iter()
                    .find(|(b, _)| b == a)
                    .cloned()
                    .ok_or_else(|| Failure::Invalid(format!("{} has no results for {a}", path.display())))
            })
            .collect::<Outcome<_>>()?
    } else {
        if results.is_some() {
            return Err(Failure::Invalid(format!("{} not found", path.display())));
        }
        warn!("no results at {}; simulating", path.display());
        simulate_all(cli, &loaded)?.iter().map(|mc| (mc.arch, mc.outcome())).collect()
    };
    let report = economics_table(
        &loaded.scenario,
        &loaded.experiment.topology,
        &loaded.experiment.classes,
        &loaded.prices,
        &loaded.scenarios,
        &loaded.economics,
        &outcomes,
    )?;
    written(write_economics(create(&dir, "economics.csv")?, &report.rows))?;
    let value = serde_json::to_value(&report).map_err(|e| Failure::Runtime(e.to_string()))?;
    write_json(&dir, "economics.json", &value)?;
    println!("{} rows -> {}", report.rows.len(), dir.join("economics.csv").display());
    Ok(())
}

fn cmd_validate(cli: &Cli) -> Outcome<()> {
    let loaded = load(cli)?;
    for e in loaded.experiments() {
        println!("{} {}", e.sim.architecture, e.digest()?);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("QGS_LOG_LEVEL", "warn")).init();
    let result = match &cli.command {
        Command::Topology { kind } => cmd_topology(&cli, kind),
        Command::Run => cmd_run(&cli),
        Command::Sweep => cmd_sweep(&cli),
        Command::Economics { results } => cmd_economics(&cli, results.as_ref()),
        Command::Validate => cmd_validate(&cli),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
