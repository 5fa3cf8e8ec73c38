//! Task outcomes, the per-class traffic ledger and the per-run report.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::compute::{Category, ServiceId, TaskId};
use crate::engine::SimTime;
use crate::topology::NodeId;

#[derive(Copy, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrafficClass {
    TaskForwarding,
    InputFetch,
    ResultReturn,
    SyncTier1,
    SyncTier2,
    ThunkFetch,
}

impl TrafficClass {
    pub const ALL: [TrafficClass; 6] = [
        TrafficClass::TaskForwarding,
        TrafficClass::InputFetch,
        TrafficClass::ResultReturn,
        TrafficClass::SyncTier1,
        TrafficClass::SyncTier2,
        TrafficClass::ThunkFetch,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TrafficClass::TaskForwarding => "task_forwarding",
            TrafficClass::InputFetch => "input_fetch",
            TrafficClass::ResultReturn => "result_return",
            TrafficClass::SyncTier1 => "sync_tier1",
            TrafficClass::SyncTier2 => "sync_tier2",
            TrafficClass::ThunkFetch => "thunk_fetch",
        }
    }

    pub fn is_sync(self) -> bool {
        matches!(self, TrafficClass::SyncTier1 | TrafficClass::SyncTier2)
    }
}

/// Bytes × link traversals per traffic class.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrafficLedger {
    bytes: [u64; 6],
    packets: [u64; 6],
}

impl TrafficLedger {
    /// One packet crossing one link.
    pub fn charge(&mut self, class: TrafficClass, wire_bytes: u32) {
        self.bytes[class as usize] += u64::from(wire_bytes);
        self.packets[class as usize] += 1;
    }

    pub fn bytes(&self, class: TrafficClass) -> u64 {
        self.bytes[class as usize]
    }

    pub fn packets(&self, class: TrafficClass) -> u64 {
        self.packets[class as usize]
    }

    pub fn total(&self) -> u64 {
        self.bytes.iter().sum()
    }

    pub fn by_class(&self) -> BTreeMap<&'static str, u64> {
        TrafficClass::ALL
            .iter()
            .map(|c| (c.as_str(), self.bytes(*c)))
            .collect()
    }
}

#[derive(Copy, Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    OnTime,
    Late,
    Dropped,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::OnTime => "on_time",
            Outcome::Late => "late",
            Outcome::Dropped => "dropped",
        }
    }
}

#[derive(Copy, Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocationClass {
    HomeEdge,
    CrossEdge,
    Cloud,
}

impl LocationClass {
    pub fn as_str(self) -> &'static str {
        match self {
            LocationClass::HomeEdge => "home_edge",
            LocationClass::CrossEdge => "cross_edge",
            LocationClass::Cloud => "cloud",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaskOutcome {
    pub task: TaskId,
    pub service: ServiceId,
    pub category: Category,
    pub deadline: SimTime,
    pub offloaded_at: SimTime,
    pub input_size: u32,
    pub completed_at: Option<SimTime>,
    pub outcome: Outcome,
    pub executed_at: Option<NodeId>,
    pub location: Option<LocationClass>,
    pub redirects: u32,
}

impl TaskOutcome {
    pub fn latency(&self) -> Option<SimTime> {
        self.completed_at.map(|t| t - self.offloaded_at)
    }

    pub fn is_completed(&self) -> bool {
        self.outcome != Outcome::Dropped
    }
}

pub fn satisfaction_rate(outcomes: &[TaskOutcome]) -> Option<f64> {
    if outcomes.is_empty() {
        return None;
    }
    let on_time = outcomes.iter().filter(|o| o.outcome == Outcome::OnTime).count();
    Some(on_time as f64 / outcomes.len() as f64)
}

/// Σ(bytes × traversals) / Σ task input bytes.
pub fn normalized_overhead(ledger: &TrafficLedger, outcomes: &[TaskOutcome], include_results: bool) -> Option<f64> {
    let payload: u64 = outcomes.iter().map(|o| u64::from(o.input_size)).sum();
    if payload == 0 {
        return None;
    }
    let mut total = ledger.total();
    if !include_results {
        total -= ledger.bytes(TrafficClass::ResultReturn);
    }
    Some(total as f64 / payload as f64)
}

/// Population standard deviation in milliseconds; `None` below two samples.
pub fn population_sd_ms(latencies: &[SimTime]) -> Option<f64> {
    if latencies.len() < 2 {
        return None;
    }
    let n = latencies.len() as f64;
    let mean = latencies.iter().map(|l| l.as_ms()).sum::<f64>() / n;
    let var = latencies
        .iter()
        .map(|l| (l.as_ms() - mean).powi(2))
        .sum::<f64>()
        / n;
    Some(var.sqrt())
}

/// Completion-time SD of one service's completed tasks offloaded within
/// `[start, end)`.
pub fn reliability_sd(
    outcomes: &[TaskOutcome],
    service: ServiceId,
    start: SimTime,
    end: SimTime,
) -> Option<f64> {
    let lat: Vec<SimTime> = outcomes
        .iter()
        .filter(|o| o.service == service && o.offloaded_at >= start && o.offloaded_at < end)
        .filter_map(|o| o.latency())
        .collect();
    population_sd_ms(&lat)
}

/// Fractions over (home, cross, cloud) among completed tasks.
pub fn location_distribution(outcomes: &[TaskOutcome]) -> Option<[f64; 3]> {
    let mut counts = [0u64; 3];
    for o in outcomes.iter().filter(|o| o.is_completed()) {
        if let Some(l) = o.location {
            counts[l as usize] += 1;
        }
    }
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return None;
    }
    Some(counts.map(|c| c as f64 / n as f64))
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CategoryStats {
    pub generated: u64,
    pub on_time: u64,
    pub completed: u64,
    pub mean_latency_ms: Option<f64>,
    pub mean_deadline_ms: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeSd {
    pub service: String,
    pub category: Category,
    pub sd_ms: Option<f64>,
    pub samples: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForwardingCounters {
    pub no_route: u64,
    pub unsolicited: u64,
    pub loops: u64,
    pub aggregated: u64,
    pub cs_hits: u64,
    pub redirects: u64,
    pub best_effort: u64,
    pub queued: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub generated: u64,
    pub on_time: u64,
    pub late: u64,
    pub dropped: u64,
    pub satisfaction: Option<f64>,
    pub overhead: Option<f64>,
    /// Mean of the three per-category means.
    pub latency_overall_ms: Option<f64>,
    pub per_category: BTreeMap<Category, CategoryStats>,
    pub probes: Vec<ProbeSd>,
    /// (home, cross, cloud)
    pub location: Option<[f64; 3]>,
    pub traffic: BTreeMap<String, u64>,
    pub counters: ForwardingCounters,
    pub events: u64,
    pub end_time_ms: f64,
}

pub struct ReportInputs<'a> {
    pub outcomes: &'a [TaskOutcome],
    pub ledger: &'a TrafficLedger,
    pub include_results: bool,
    /// (name, category, id) of each probe service.
    pub probes: &'a [(String, Category, ServiceId)],
    pub window: (SimTime, SimTime),
    pub counters: ForwardingCounters,
    pub events: u64,
    pub end_time: SimTime,
}

pub fn build_report(inp: ReportInputs<'_>) -> MetricsReport {
    let o = inp.outcomes;
    let count = |k: Outcome| o.iter().filter(|x| x.outcome == k).count() as u64;
    let mut per_category = BTreeMap::new();
    for cat in Category::ALL {
        let rows: Vec<&TaskOutcome> = o.iter().filter(|x| x.category == cat).collect();
        let lat: Vec<f64> = rows.iter().filter_map(|x| x.latency()).map(|l| l.as_ms()).collect();
        let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
        let dl: Vec<f64> = rows.iter().map(|x| x.deadline.as_ms()).collect();
        per_category.insert(
            cat,
            CategoryStats {
                generated: rows.len() as u64,
                on_time: rows.iter().filter(|x| x.outcome == Outcome::OnTime).count() as u64,
                completed: lat.len() as u64,
                mean_latency_ms: mean(&lat),
                mean_deadline_ms: mean(&dl),
            },
        );
    }
    let cat_means: Vec<f64> = per_category
        .values()
        .filter_map(|c: &CategoryStats| c.mean_latency_ms)
        .collect();
    let latency_overall_ms =
        (cat_means.len() == 3).then(|| cat_means.iter().sum::<f64>() / 3.0);
    let probes = inp
        .probes
        .iter()
        .map(|(name, cat, id)| {
            let samples = o
                .iter()
                .filter(|x| {
                    x.service == *id
                        && x.completed_at.is_some()
                        && x.offloaded_at >= inp.window.0
                        && x.offloaded_at < inp.window.1
                })
                .count();
            ProbeSd {
                service: name.clone(),
                category: *cat,
                sd_ms: reliability_sd(o, *id, inp.window.0, inp.window.1),
                samples,
            }
        })
        .collect();
    MetricsReport {
        generated: o.len() as u64,
        on_time: count(Outcome::OnTime),
        late: count(Outcome::Late),
        dropped: count(Outcome::Dropped),
        satisfaction: satisfaction_rate(o),
        overhead: normalized_overhead(inp.ledger, o, inp.include_results),
        latency_overall_ms,
        per_category,
        probes,
        location: location_distribution(o),
        traffic: inp
            .ledger
            .by_class()
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect(),
        counters: inp.counters,
        events: inp.events,
        end_time_ms: inp.end_time.as_ms(),
    }
}
