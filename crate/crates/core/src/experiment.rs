//! Runs over seeds and sweep points, aggregation, and report files.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::compute::Category;
use crate::config::{ConfigError, ExperimentConfig, LoadKind, PolicyKind};
use crate::metrics::{LocationClass, MetricsReport, Outcome};
use crate::sim::{run, RunOutput};

/// Parameter grid crossed with policy and load lists.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSpec {
    /// Dotted config path → values, e.g. `"sync.intra_period_ms": [1000, 5000]`.
    pub params: BTreeMap<String, Vec<Value>>,
    pub policies: Vec<PolicyKind>,
    pub loads: Vec<LoadKind>,
}

impl SweepSpec {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| ConfigError::Schema(e.to_string()))
    }
}

/// One configuration to be run over all its seeds.
#[derive(Clone, Debug)]
pub struct SweepPoint {
    pub label: String,
    pub config: ExperimentConfig,
}

fn set_path(root: &mut Value, path: &str, v: Value) -> Result<(), ConfigError> {
    let mut cur = root;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, p) in parts.iter().enumerate() {
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| ConfigError::invalid(path, "path crosses a non-object"))?;
        if i + 1 == parts.len() {
            obj.insert((*p).to_string(), v);
            return Ok(());
        }
        cur = obj
            .get_mut(*p)
            .ok_or_else(|| ConfigError::invalid(path, "unknown config section"))?;
    }
    Ok(())
}

fn label_value(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Cross product of the sweep lists over `base`; each point is validated.
pub fn expand(base: &ExperimentConfig, spec: &SweepSpec) -> Result<Vec<SweepPoint>, ConfigError> {
    let base_json = serde_json::to_value(base).expect("config serializes");
    let policies = if spec.policies.is_empty() {
        vec![base.policy.kind]
    } else {
        spec.policies.clone()
    };
    let loads = if spec.loads.is_empty() {
        vec![base.workload.load]
    } else {
        spec.loads.clone()
    };
    let mut grid: Vec<Vec<(String, Value)>> = vec![Vec::new()];
    for (path, values) in &spec.params {
        grid = grid
            .into_iter()
            .flat_map(|prefix| {
                values.iter().map(move |v| {
                    let mut p = prefix.clone();
                    p.push((path.clone(), v.clone()));
                    p
                })
            })
            .collect();
    }
    let mut out = Vec::new();
    for &load in &loads {
        for &policy in &policies {
            for assignment in &grid {
                let mut doc = base_json.clone();
                set_path(&mut doc, "policy.kind", serde_json::to_value(policy).unwrap())?;
                set_path(&mut doc, "workload.load", serde_json::to_value(load).unwrap())?;
                let mut label = format!("{}/{}", policy.as_str(), load.as_str());
                for (path, v) in assignment {
                    set_path(&mut doc, path, v.clone())?;
                    label.push_str(&format!("/{path}={}", label_value(v)));
                }
                out.push(SweepPoint {
                    label,
                    config: ExperimentConfig::from_json_value(doc)?,
                });
            }
        }
    }
    Ok(out)
}

/// Results of all seeds of one point, in seed order.
#[derive(Clone, Debug)]
pub struct PointResult {
    pub label: String,
    pub config: ExperimentConfig,
    pub runs: Vec<RunOutput>,
}

#[cfg(feature = "parallel")]
fn map_jobs<T, R, F>(jobs: Vec<T>, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    jobs.into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_jobs<T, R, F>(jobs: Vec<T>, f: F) -> Vec<R>
where
    F: Fn(T) -> R,
{
    jobs.into_iter().map(f).collect()
}

type Job<'a> = (usize, &'a ExperimentConfig, u64);
type JobResult = Result<(usize, RunOutput), ConfigError>;

/// Runs every (point, seed) pair; each run is single-threaded and only
/// reads its config. Spread over the rayon pool with the `parallel` feature.
pub fn execute(points: Vec<SweepPoint>) -> Result<Vec<PointResult>, ConfigError> {
    execute_by(points, |jobs| map_jobs(jobs, run_job))
}

/// Same as [`execute`], one run after another on the calling thread.
pub fn execute_sequential(points: Vec<SweepPoint>) -> Result<Vec<PointResult>, ConfigError> {
    execute_by(points, |jobs| jobs.into_iter().map(run_job).collect())
}

fn run_job((i, cfg, seed): Job<'_>) -> JobResult {
    run(cfg, seed).map(|r| (i, r))
}

fn execute_by<F>(points: Vec<SweepPoint>, map: F) -> Result<Vec<PointResult>, ConfigError>
where
    F: for<'a> FnOnce(Vec<Job<'a>>) -> Vec<JobResult>,
{
    let jobs: Vec<Job<'_>> = points
        .iter()
        .enumerate()
        .flat_map(|(i, p)| p.config.seeds.iter().map(move |&s| (i, &p.config, s)))
        .collect();
    let outputs = map(jobs);
    let mut per_point: Vec<Vec<RunOutput>> = vec![Vec::new(); points.len()];
    for o in outputs {
        let (i, r) = o?;
        per_point[i].push(r);
    }
    Ok(points
        .into_iter()
        .zip(per_point)
        .map(|(p, runs)| PointResult {
            label: p.label,
            config: p.config,
            runs,
        })
        .collect())
}

/// One CSV row: a single run, or the mean over a point's runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub run_id: String,
    /// Seed, or `mean` / `sd` on aggregate rows.
    pub seed: String,
    pub policy: String,
    pub load: String,
    pub sync_x_s: f64,
    pub sync_y_s: f64,
    pub satisfaction: Option<f64>,
    pub overhead: Option<f64>,
    pub lat_overall_ms: Option<f64>,
    pub lat_sensitive_ms: Option<f64>,
    pub lat_regular_ms: Option<f64>,
    pub lat_tolerant_ms: Option<f64>,
    pub frac_home: Option<f64>,
    pub frac_cross: Option<f64>,
    pub frac_cloud: Option<f64>,
    pub probe_sensitive: String,
    pub sd_sensitive_ms: Option<f64>,
    pub probe_regular: String,
    pub sd_regular_ms: Option<f64>,
    pub probe_tolerant: String,
    pub sd_tolerant_ms: Option<f64>,
    pub generated: u64,
    pub on_time: u64,
    pub late: u64,
    pub dropped: u64,
}

fn cat_latency(r: &MetricsReport, c: Category) -> Option<f64> {
    r.per_category.get(&c).and_then(|s| s.mean_latency_ms)
}

fn probe(r: &MetricsReport, c: Category) -> (String, Option<f64>) {
    r.probes
        .iter()
        .find(|p| p.category == c)
        .map(|p| (p.service.clone(), p.sd_ms))
        .unwrap_or_default()
}

pub fn run_row(point: &PointResult, index: usize, run: &RunOutput) -> RunRow {
    let r = &run.report;
    let cfg = &point.config;
    let (ps, ss) = probe(r, Category::DelaySensitive);
    let (pr, sr) = probe(r, Category::Regular);
    let (pt, st) = probe(r, Category::DelayTolerant);
    RunRow {
        run_id: format!("{}#{index}", point.label),
        seed: run.seed.to_string(),
        policy: cfg.policy.kind.as_str().to_string(),
        load: cfg.workload.load.as_str().to_string(),
        sync_x_s: cfg.sync.intra_period_ms / 1000.0,
        sync_y_s: cfg.sync.inter_period_ms / 1000.0,
        satisfaction: r.satisfaction,
        overhead: r.overhead,
        lat_overall_ms: r.latency_overall_ms,
        lat_sensitive_ms: cat_latency(r, Category::DelaySensitive),
        lat_regular_ms: cat_latency(r, Category::Regular),
        lat_tolerant_ms: cat_latency(r, Category::DelayTolerant),
        frac_home: r.location.map(|l| l[0]),
        frac_cross: r.location.map(|l| l[1]),
        frac_cloud: r.location.map(|l| l[2]),
        probe_sensitive: ps,
        sd_sensitive_ms: ss,
        probe_regular: pr,
        sd_regular_ms: sr,
        probe_tolerant: pt,
        sd_tolerant_ms: st,
        generated: r.generated,
        on_time: r.on_time,
        late: r.late,
        dropped: r.dropped,
    }
}

/// Mean and population SD of the present values.
pub fn mean_sd(values: impl IntoIterator<Item = Option<f64>>) -> (Option<f64>, Option<f64>) {
    let v: Vec<f64> = values.into_iter().flatten().collect();
    if v.is_empty() {
        return (None, None);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (Some(mean), Some(var.sqrt()))
}

/// The `mean` and `sd` rows of a point.
pub fn aggregate_rows(point: &PointResult, rows: &[RunRow]) -> [RunRow; 2] {
    let first = rows.first().cloned().expect("at least one run");
    let mut mean = RunRow {
        run_id: point.label.clone(),
        seed: "mean".into(),
        probe_sensitive: String::new(),
        probe_regular: String::new(),
        probe_tolerant: String::new(),
        ..first
    };
    let mut sd = RunRow {
        seed: "sd".into(),
        ..mean.clone()
    };
    macro_rules! agg {
        ($($f:ident),*) => {$(
            let (m, s) = mean_sd(rows.iter().map(|r| r.$f));
            mean.$f = m;
            sd.$f = s;
        )*};
    }
    agg!(
        satisfaction, overhead, lat_overall_ms, lat_sensitive_ms, lat_regular_ms,
        lat_tolerant_ms, frac_home, frac_cross, frac_cloud, sd_sensitive_ms,
        sd_regular_ms, sd_tolerant_ms
    );
    macro_rules! agg_count {
        ($($f:ident),*) => {$(
            let (m, s) = mean_sd(rows.iter().map(|r| Some(r.$f as f64)));
            mean.$f = m.unwrap_or(0.0).round() as u64;
            sd.$f = s.unwrap_or(0.0).round() as u64;
        )*};
    }
    agg_count!(generated, on_time, late, dropped);
    [mean, sd]
}

#[derive(Debug, Serialize)]
struct PointSummary<'a> {
    label: &'a str,
    policy: &'a str,
    load: &'a str,
    seeds: &'a [u64],
    mean: &'a RunRow,
    sd: &'a RunRow,
    runs: Vec<&'a MetricsReport>,
}

#[derive(Debug, thiserror::Error)]
pub enum OutputError {
    #[error("writing {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> OutputError + '_ {
    move |source| OutputError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Writes `runs.csv`, `summary.json` and, if asked, `tasks_<run>.csv`.
pub fn write_outputs(dir: &Path, results: &[PointResult], dump_tasks: bool) -> Result<(), OutputError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let runs_path = dir.join("runs.csv");
    let mut w = csv::Writer::from_path(&runs_path)?;
    let mut summaries = Vec::new();
    let mut aggregates = Vec::new();
    for p in results {
        let rows: Vec<RunRow> = p.runs.iter().enumerate().map(|(i, r)| run_row(p, i, r)).collect();
        for r in &rows {
            w.serialize(r)?;
        }
        let agg = aggregate_rows(p, &rows);
        w.serialize(&agg[0])?;
        w.serialize(&agg[1])?;
        aggregates.push(agg);
    }
    w.flush().map_err(io_err(&runs_path))?;

    for (p, agg) in results.iter().zip(&aggregates) {
        summaries.push(PointSummary {
            label: &p.label,
            policy: p.config.policy.kind.as_str(),
            load: p.config.workload.load.as_str(),
            seeds: &p.config.seeds,
            mean: &agg[0],
            sd: &agg[1],
            runs: p.runs.iter().map(|r| &r.report).collect(),
        });
    }
    let summary_path = dir.join("summary.json");
    let f = File::create(&summary_path).map_err(io_err(&summary_path))?;
    let mut bw = BufWriter::new(f);
    serde_json::to_writer_pretty(&mut bw, &summaries)?;
    bw.write_all(b"\n").map_err(io_err(&summary_path))?;
    bw.flush().map_err(io_err(&summary_path))?;

    if dump_tasks {
        let mut n = 0;
        for p in results {
            for r in &p.runs {
                write_tasks(&dir.join(format!("tasks_{n}.csv")), r)?;
                n += 1;
            }
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct TaskRow<'a> {
    task_id: u64,
    service: &'a str,
    category: &'static str,
    offloaded_at_ms: f64,
    completed_at_ms: Option<f64>,
    outcome: &'static str,
    executed_at: &'a str,
    location_class: &'static str,
    redirects: u32,
}

pub fn write_tasks(path: &Path, run: &RunOutput) -> Result<(), OutputError> {
    let mut w = csv::Writer::from_path(path)?;
    for o in &run.outcomes {
        w.serialize(TaskRow {
            task_id: o.task.0,
            service: &run.services[o.service.index()].name,
            category: o.category.as_str(),
            offloaded_at_ms: o.offloaded_at.as_ms(),
            completed_at_ms: o.completed_at.map(|t| t.as_ms()),
            outcome: match o.outcome {
                Outcome::OnTime => "on_time",
                Outcome::Late => "late",
                Outcome::Dropped => "dropped",
            },
            executed_at: o
                .executed_at
                .map(|n| run.node_labels[n.index()].as_str())
                .unwrap_or(""),
            location_class: match o.location {
                Some(LocationClass::HomeEdge) => "home",
                Some(LocationClass::CrossEdge) => "cross",
                Some(LocationClass::Cloud) => "cloud",
                None => "",
            },
            redirects: o.redirects,
        })?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

/// Arrival-period length that yields about `tasks` tasks per run.
pub fn duration_for_tasks(cfg: &ExperimentConfig, tasks: f64) -> f64 {
    let w = &cfg.workload;
    let light = (w.light_rate[0] + w.light_rate[1]) / 2.0;
    let heavy = (w.heavy_rate[0] + w.heavy_rate[1]) / 2.0;
    let per_user = match w.load {
        LoadKind::Light => light,
        LoadKind::Heavy => heavy,
        LoadKind::Alternating => (light + heavy) / 2.0,
    };
    (tasks / (per_user * w.users as f64)).ceil()
}
