//! Experiment configuration: one JSON document, every key optional with a
//! default, unknown keys rejected.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config schema violation: {0}")]
    Schema(String),
    #[error("invalid value for {key}: {reason}")]
    Invalid { key: String, reason: String },
    #[error("topology: {0}")]
    Topology(#[from] crate::topology::TopologyError),
}

impl ConfigError {
    pub(crate) fn invalid(key: &str, reason: impl Into<String>) -> Self {
        ConfigError::Invalid {
            key: key.to_string(),
            reason: reason.into(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub topology: TopologyConfig,
    pub workload: WorkloadConfig,
    pub compute: ComputeConfig,
    pub profile: ProfileConfig,
    pub task: TaskConfig,
    pub packet: PacketConfig,
    pub cs: CsConfig,
    pub pit: PitConfig,
    pub sync: SyncConfig,
    pub policy: PolicyConfig,
    pub metrics: MetricsConfig,
    pub seeds: Vec<u64>,
    pub output: OutputConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            topology: TopologyConfig::default(),
            workload: WorkloadConfig::default(),
            compute: ComputeConfig::default(),
            profile: ProfileConfig::default(),
            task: TaskConfig::default(),
            packet: PacketConfig::default(),
            cs: CsConfig::default(),
            pit: PitConfig::default(),
            sync: SyncConfig::default(),
            policy: PolicyConfig::default(),
            metrics: MetricsConfig::default(),
            seeds: (1..=10).collect(),
            output: OutputConfig::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum UserAttachment {
    /// Every user is directly linked to all access ENs of its network.
    DualHomed,
    /// Each user is linked to exactly one access EN, round-robin.
    RoundRobin,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct TopologyConfig {
    pub networks: usize,
    /// ENs per edge network in addition to the gateway.
    pub ens_per_network: usize,
    pub intra_delay_ms: f64,
    pub user_link_delay_ms: f64,
    pub eg_eg_delay_ms: f64,
    /// One-way EG to cloud delay, split evenly over `cloud_hops` links.
    pub cloud_delay_ms: f64,
    /// Per-network override of `cloud_delay_ms`.
    pub cloud_delay_per_network_ms: Option<Vec<f64>>,
    pub cloud_hops: usize,
    pub user_attachment: UserAttachment,
    /// Optional per-network prefixes (`/AU/South-Campus`, ...).
    pub network_prefixes: Option<Vec<String>>,
    /// Fully explicit graph; overrides the generated layout when present.
    pub explicit: Option<ExplicitTopology>,
}

impl Default for TopologyConfig {
    fn default() -> Self {
        TopologyConfig {
            networks: 5,
            ens_per_network: 3,
            intra_delay_ms: 2.0,
            user_link_delay_ms: 1.0,
            eg_eg_delay_ms: 10.0,
            cloud_delay_ms: 50.0,
            cloud_delay_per_network_ms: None,
            cloud_hops: 5,
            user_attachment: UserAttachment::DualHomed,
            network_prefixes: None,
            explicit: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExplicitTopology {
    pub networks: Vec<ExplicitNetwork>,
    pub nodes: Vec<ExplicitNode>,
    pub links: Vec<ExplicitLink>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExplicitNetwork {
    pub label: String,
    pub prefix: String,
    pub gateway_prefix: String,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExplicitNode {
    pub label: String,
    pub role: crate::topology::NodeRole,
    #[serde(default)]
    pub network: Option<String>,
    /// Last name component for EN/EG/User prefixes; defaults to the label.
    #[serde(default)]
    pub name: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExplicitLink {
    pub a: String,
    pub b: String,
    pub delay_ms: f64,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum LoadKind {
    Light,
    Heavy,
    Alternating,
}

impl LoadKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LoadKind::Light => "light",
            LoadKind::Heavy => "heavy",
            LoadKind::Alternating => "alternating",
        }
    }
}

impl std::str::FromStr for LoadKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "light" => Ok(LoadKind::Light),
            "heavy" => Ok(LoadKind::Heavy),
            "alternating" => Ok(LoadKind::Alternating),
            other => Err(format!("unknown load {other:?} (light|heavy|alternating)")),
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ArrivalProcess {
    Poisson,
    Uniform,
}

/// Constant input size or a uniform range `[lo, hi]`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum SizeSpec {
    Constant(u32),
    Range([u32; 2]),
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct WorkloadConfig {
    pub load: LoadKind,
    pub users: usize,
    pub services: usize,
    /// Services per category: sensitive, regular, tolerant. `None` = near-equal split.
    pub partition: Option<[usize; 3]>,
    pub duration_s: f64,
    pub input_size_bytes: SizeSpec,
    pub alternating_period_s: f64,
    pub arrival: ArrivalProcess,
    pub light_rate: [f64; 2],
    pub heavy_rate: [f64; 2],
}

impl Default for WorkloadConfig {
    fn default() -> Self {
        WorkloadConfig {
            load: LoadKind::Light,
            users: 100,
            services: 50,
            partition: None,
            duration_s: 60.0,
            input_size_bytes: SizeSpec::Constant(512),
            alternating_period_s: 5.0,
            arrival: ArrivalProcess::Poisson,
            light_rate: [2.0, 8.0],
            heavy_rate: [10.0, 30.0],
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ExecDraw {
    /// Execution fraction drawn once per service.
    PerService,
    /// Fresh fraction for every execution.
    PerTask,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct HardwareClassConfig {
    pub name: String,
    pub exec_scale: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ComputeConfig {
    pub slots_per_node: u32,
    pub cloud_slots: u32,
    pub exec_fraction: [f64; 2],
    pub exec_draw: ExecDraw,
    pub hardware_classes: Vec<HardwareClassConfig>,
    /// Node label → hardware class name; unlisted nodes use the first class.
    pub class_assignment: BTreeMap<String, String>,
}

impl Default for ComputeConfig {
    fn default() -> Self {
        ComputeConfig {
            slots_per_node: 8,
            cloud_slots: 1_000_000,
            exec_fraction: [0.4, 0.6],
            exec_draw: ExecDraw::PerService,
            hardware_classes: vec![HardwareClassConfig {
                name: "uniform".into(),
                exec_scale: 1.0,
            }],
            class_assignment: BTreeMap::new(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ProfileConfig {
    pub ewma_alpha: f64,
    pub prior_fraction: f64,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        ProfileConfig {
            ewma_alpha: 0.25,
            prior_fraction: 0.5,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct TaskConfig {
    pub inline_threshold_bytes: u32,
    pub duplicate_input_prob: f64,
    pub result_size_bytes: u32,
    pub receipt_size_bytes: u32,
}

impl Default for TaskConfig {
    fn default() -> Self {
        TaskConfig {
            inline_threshold_bytes: 1024,
            duplicate_input_prob: 0.0,
            result_size_bytes: 512,
            receipt_size_bytes: 32,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct PacketConfig {
    pub header_bytes: u32,
}

impl Default for PacketConfig {
    fn default() -> Self {
        PacketConfig { header_bytes: 64 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct CsConfig {
    pub capacity: usize,
    pub freshness_ms: f64,
}

impl Default for CsConfig {
    fn default() -> Self {
        CsConfig {
            capacity: 1000,
            freshness_ms: 1000.0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct PitConfig {
    /// Interest lifetime beyond the task deadline.
    pub margin_ms: f64,
}

impl Default for PitConfig {
    fn default() -> Self {
        PitConfig { margin_ms: 100.0 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SyncConfig {
    /// `None`: on for policies that read resource views, off otherwise.
    pub enabled: Option<bool>,
    pub intra_period_ms: f64,
    pub inter_period_ms: f64,
    pub notify_threshold: Option<f64>,
    pub record_base_bytes: u32,
    pub record_fixed_bytes: u32,
    pub per_profile_bytes: u32,
    pub inter_record_bytes: u32,
    pub share_aggregated_stats: bool,
}

impl Default for SyncConfig {
    fn default() -> Self {
        SyncConfig {
            enabled: None,
            intra_period_ms: 1000.0,
            inter_period_ms: 5000.0,
            notify_threshold: None,
            record_base_bytes: 64,
            record_fixed_bytes: 16,
            per_profile_bytes: 24,
            inter_record_bytes: 32,
            share_aggregated_stats: false,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    Cledge,
    CloudOnly,
    EdgeOnly,
    CloudEdge,
    AdaptiveCloudEdge,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 5] = [
        PolicyKind::Cledge,
        PolicyKind::CloudOnly,
        PolicyKind::EdgeOnly,
        PolicyKind::CloudEdge,
        PolicyKind::AdaptiveCloudEdge,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::Cledge => "cledge",
            PolicyKind::CloudOnly => "cloud-only",
            PolicyKind::EdgeOnly => "edge-only",
            PolicyKind::CloudEdge => "cloud-edge",
            PolicyKind::AdaptiveCloudEdge => "adaptive-cloud-edge",
        }
    }

    /// Whether the policy reads synchronized resource views.
    pub fn uses_sync(self) -> bool {
        matches!(self, PolicyKind::Cledge | PolicyKind::AdaptiveCloudEdge)
    }
}

impl std::str::FromStr for PolicyKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| {
                format!(
                    "unknown policy {s:?} (cledge|cloud-only|edge-only|cloud-edge|adaptive-cloud-edge)"
                )
            })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct PolicyConfig {
    pub kind: PolicyKind,
    pub max_redirects: u32,
    pub cloud_preference: crate::policy::CloudPreference,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            kind: PolicyKind::Cledge,
            max_redirects: 3,
            cloud_preference: crate::policy::CloudPreference::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsConfig {
    pub reliability_window_s: f64,
    /// Window start; `None` centres the window in the arrival period.
    pub reliability_window_start_s: Option<f64>,
    /// Explicit probe service names; `None` picks one per category.
    pub probe_services: Option<Vec<String>>,
    pub include_result_return: bool,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            reliability_window_s: 10.0,
            reliability_window_start_s: None,
            probe_services: None,
            include_result_return: true,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub dump_tasks: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("out"),
            dump_tasks: false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| ConfigError::Schema(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json_value(value: serde_json::Value) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig =
            serde_json::from_value(value).map_err(|e| ConfigError::Schema(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json_str(&text)
    }

    pub fn sync_enabled(&self) -> bool {
        self.sync.enabled.unwrap_or_else(|| self.policy.kind.uses_sync())
    }

    /// Range and consistency checks beyond what the schema expresses.
    /// Reports the first violation found.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let t = &self.topology;
        if t.explicit.is_none() {
            if t.networks == 0 {
                return Err(ConfigError::invalid("topology.networks", "must be >= 1"));
            }
            if t.ens_per_network == 0 {
                return Err(ConfigError::invalid(
                    "topology.ens_per_network",
                    "must be >= 1",
                ));
            }
            if t.cloud_hops == 0 {
                return Err(ConfigError::invalid("topology.cloud_hops", "must be >= 1"));
            }
            for (key, v) in [
                ("topology.intra_delay_ms", t.intra_delay_ms),
                ("topology.user_link_delay_ms", t.user_link_delay_ms),
                ("topology.eg_eg_delay_ms", t.eg_eg_delay_ms),
                ("topology.cloud_delay_ms", t.cloud_delay_ms),
            ] {
                if !(v.is_finite() && v > 0.0) {
                    return Err(ConfigError::invalid(key, "delay must be > 0"));
                }
            }
            if let Some(per) = &t.cloud_delay_per_network_ms {
                if per.len() != t.networks {
                    return Err(ConfigError::invalid(
                        "topology.cloud_delay_per_network_ms",
                        "needs one entry per network",
                    ));
                }
                if per.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                    return Err(ConfigError::invalid(
                        "topology.cloud_delay_per_network_ms",
                        "delay must be > 0",
                    ));
                }
            }
            if let Some(p) = &t.network_prefixes {
                if p.len() != t.networks {
                    return Err(ConfigError::invalid(
                        "topology.network_prefixes",
                        "needs one entry per network",
                    ));
                }
            }
        }

        let w = &self.workload;
        if w.services < 3 {
            return Err(ConfigError::invalid("workload.services", "must be >= 3"));
        }
        if let Some(p) = w.partition {
            if p.iter().sum::<usize>() != w.services {
                return Err(ConfigError::invalid(
                    "workload.partition",
                    "sizes must sum to workload.services",
                ));
            }
            if p.contains(&0) {
                return Err(ConfigError::invalid(
                    "workload.partition",
                    "every category needs at least one service",
                ));
            }
        }
        if w.users == 0 {
            return Err(ConfigError::invalid("workload.users", "must be >= 1"));
        }
        if !(w.duration_s.is_finite() && w.duration_s > 0.0) {
            return Err(ConfigError::invalid("workload.duration_s", "must be > 0"));
        }
        for (key, r) in [
            ("workload.light_rate", w.light_rate),
            ("workload.heavy_rate", w.heavy_rate),
        ] {
            if !(r[0] > 0.0 && r[0] <= r[1] && r[1].is_finite()) {
                return Err(ConfigError::invalid(key, "need 0 < lo <= hi (rate 0 not allowed)"));
            }
        }
        if w.load == LoadKind::Alternating && !(w.alternating_period_s > 0.0) {
            return Err(ConfigError::invalid(
                "workload.alternating_period_s",
                "must be > 0",
            ));
        }
        match w.input_size_bytes {
            SizeSpec::Constant(0) => {
                return Err(ConfigError::invalid("workload.input_size_bytes", "must be > 0"))
            }
            SizeSpec::Range([lo, hi]) if lo == 0 || lo > hi => {
                return Err(ConfigError::invalid(
                    "workload.input_size_bytes",
                    "need 0 < lo <= hi",
                ))
            }
            _ => {}
        }

        let c = &self.compute;
        if c.slots_per_node == 0 {
            return Err(ConfigError::invalid("compute.slots_per_node", "must be >= 1"));
        }
        if c.cloud_slots == 0 {
            return Err(ConfigError::invalid("compute.cloud_slots", "must be >= 1"));
        }
        let [lo, hi] = c.exec_fraction;
        if !(0.0..=hi).contains(&lo) || !hi.is_finite() {
            return Err(ConfigError::invalid(
                "compute.exec_fraction",
                "need 0 <= lo <= hi",
            ));
        }
        if c.hardware_classes.is_empty() {
            return Err(ConfigError::invalid(
                "compute.hardware_classes",
                "at least one class required",
            ));
        }
        if c.hardware_classes.iter().any(|h| !(h.exec_scale > 0.0)) {
            return Err(ConfigError::invalid(
                "compute.hardware_classes",
                "exec_scale must be > 0",
            ));
        }
        for (node, class) in &c.class_assignment {
            if !c.hardware_classes.iter().any(|h| &h.name == class) {
                return Err(ConfigError::invalid(
                    "compute.class_assignment",
                    format!("node {node} uses unknown class {class}"),
                ));
            }
        }

        let p = &self.profile;
        if !(p.ewma_alpha > 0.0 && p.ewma_alpha <= 1.0) {
            return Err(ConfigError::invalid("profile.ewma_alpha", "must be in (0, 1]"));
        }
        if !(p.prior_fraction >= 0.0 && p.prior_fraction.is_finite()) {
            return Err(ConfigError::invalid("profile.prior_fraction", "must be >= 0"));
        }
        if !(0.0..=1.0).contains(&self.task.duplicate_input_prob) {
            return Err(ConfigError::invalid(
                "task.duplicate_input_prob",
                "must be in [0, 1]",
            ));
        }
        if !(self.cs.freshness_ms >= 0.0) {
            return Err(ConfigError::invalid("cs.freshness_ms", "must be >= 0"));
        }
        if !(self.pit.margin_ms >= 0.0) {
            return Err(ConfigError::invalid("pit.margin_ms", "must be >= 0"));
        }
        let s = &self.sync;
        if !(s.intra_period_ms > 0.0) {
            return Err(ConfigError::invalid("sync.intra_period_ms", "must be > 0"));
        }
        if !(s.inter_period_ms > 0.0) {
            return Err(ConfigError::invalid("sync.inter_period_ms", "must be > 0"));
        }
        if let Some(th) = s.notify_threshold {
            if !(th > 0.0 && th <= 1.0) {
                return Err(ConfigError::invalid("sync.notify_threshold", "must be in (0, 1]"));
            }
        }
        let m = &self.metrics;
        if !(m.reliability_window_s > 0.0) {
            return Err(ConfigError::invalid(
                "metrics.reliability_window_s",
                "must be > 0",
            ));
        }
        if self.seeds.is_empty() {
            return Err(ConfigError::invalid("seeds", "at least one seed required"));
        }
        Ok(())
    }
}
