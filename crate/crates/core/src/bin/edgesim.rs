use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use log::info;

use edgesim::config::{ExperimentConfig, LoadKind, PolicyKind};
use edgesim::experiment::{duration_for_tasks, execute, expand, write_outputs, SweepSpec};

/// Tasks per run at full scale.
const PAPER_SCALE_TASKS: f64 = 500_000.0;

#[derive(Parser, Debug)]
#[command(name = "edgesim", version, about = "Cloud-edge task offloading simulator")]
struct Args {
    /// Experiment config (JSON); built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    policy: Option<PolicyKind>,
    #[arg(long, value_parser = parse_load)]
    load: Option<LoadKind>,
    /// First seed; with --runs K, seeds N..N+K.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    runs: Option<u64>,
    #[arg(long)]
    duration_s: Option<f64>,
    /// Intra-network sync period in ms.
    #[arg(long)]
    sync_intra: Option<f64>,
    /// Inter-network sync period in ms.
    #[arg(long)]
    sync_inter: Option<f64>,
    /// Sweep spec (JSON) crossed with the config.
    #[arg(long)]
    sweep: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write one per-task CSV per run.
    #[arg(long)]
    dump_tasks: bool,
    /// Size each run to about 500k tasks.
    #[arg(long)]
    paper_scale: bool,
}

fn parse_load(s: &str) -> Result<LoadKind, String> {
    match s {
        "light" => Ok(LoadKind::Light),
        "heavy" => Ok(LoadKind::Heavy),
        "alternating" => Ok(LoadKind::Alternating),
        _ => Err(format!("unknown load {s:?} (light|heavy|alternating)")),
    }
}

fn apply(args: &Args, cfg: &mut ExperimentConfig) {
    if let Some(p) = args.policy {
        cfg.policy.kind = p;
    }
    if let Some(l) = args.load {
        cfg.workload.load = l;
    }
    match (args.seed, args.runs) {
        (Some(s), Some(k)) => cfg.seeds = (s..s + k).collect(),
        (Some(s), None) => cfg.seeds = vec![s],
        (None, Some(k)) => {
            let first = cfg.seeds.first().copied().unwrap_or(1);
            cfg.seeds = (first..first + k).collect();
        }
        (None, None) => {}
    }
    if let Some(d) = args.duration_s {
        cfg.workload.duration_s = d;
    } else if args.paper_scale {
        cfg.workload.duration_s = duration_for_tasks(cfg, PAPER_SCALE_TASKS);
    }
    if let Some(x) = args.sync_intra {
        cfg.sync.intra_period_ms = x;
    }
    if let Some(y) = args.sync_inter {
        cfg.sync.inter_period_ms = y;
    }
    if let Some(o) = &args.out {
        cfg.output.dir = o.clone();
    }
    if args.dump_tasks {
        cfg.output.dump_tasks = true;
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    match real_main(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn real_main(args: &Args) -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = match &args.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    apply(args, &mut cfg);
    cfg.validate()?;
    let spec = match &args.sweep {
        Some(p) => SweepSpec::load(p)?,
        None => SweepSpec::default(),
    };
    let points = expand(&cfg, &spec)?;
    info!(
        "{} point(s) x {} seed(s), {} s of arrivals each",
        points.len(),
        cfg.seeds.len(),
        cfg.workload.duration_s
    );
    let started = std::time::Instant::now();
    let results = execute(points)?;
    for p in &results {
        let sat: Vec<String> = p
            .runs
            .iter()
            .map(|r| r.report.satisfaction.map_or("-".into(), |s| format!("{s:.3}")))
            .collect();
        info!("{}: satisfaction {}", p.label, sat.join(" "));
    }
    write_outputs(&cfg.output.dir, &results, cfg.output.dump_tasks)?;
    info!(
        "wrote {} in {:.1} s",
        cfg.output.dir.display(),
        started.elapsed().as_secs_f64()
    );
    Ok(())
}
