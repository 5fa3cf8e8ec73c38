//! Execution model: slot pools, service profiles, execution timing and the
//! receipt returned for large-input tasks.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::engine::SimTime;
use crate::ndn::Name;
use crate::topology::{EdgeNetworkId, NodeId};

#[derive(Copy, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub struct TaskId(pub u64);

#[derive(Copy, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub struct ServiceId(pub u16);

impl ServiceId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Copy, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    DelaySensitive,
    Regular,
    DelayTolerant,
}

impl Category {
    pub const ALL: [Category; 3] = [
        Category::DelaySensitive,
        Category::Regular,
        Category::DelayTolerant,
    ];

    /// Deadline range in milliseconds, inclusive.
    pub fn deadline_range_ms(self) -> (f64, f64) {
        match self {
            Category::DelaySensitive => (10.0, 50.0),
            Category::Regular => (50.0, 100.0),
            Category::DelayTolerant => (100.0, 1000.0),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Category::DelaySensitive => "sensitive",
            Category::Regular => "regular",
            Category::DelayTolerant => "tolerant",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug)]
pub struct Service {
    pub id: ServiceId,
    pub name: String,
    pub category: Category,
    pub deadline: SimTime,
    /// Execution time as a fraction of the deadline, when drawn per service.
    pub exec_fraction: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct Task {
    pub id: TaskId,
    pub service: ServiceId,
    pub category: Category,
    pub input_hash: u64,
    pub input_size: u32,
    /// Relative completion budget; equals the service deadline.
    pub deadline: SimTime,
    pub offloaded_at: SimTime,
    pub origin_user: NodeId,
    pub home_network: EdgeNetworkId,
}

impl Task {
    pub fn absolute_deadline(&self) -> SimTime {
        self.offloaded_at + self.deadline
    }
}

/// Bounded simultaneous-execution slots of one node.
#[derive(Clone, Debug)]
pub struct SlotPool {
    capacity: u32,
    in_use: u32,
    pub hardware_class: u16,
}

impl SlotPool {
    pub fn new(capacity: u32, hardware_class: u16) -> Self {
        SlotPool {
            capacity,
            in_use: 0,
            hardware_class,
        }
    }

    pub fn capacity(&self) -> u32 {
        self.capacity
    }

    pub fn in_use(&self) -> u32 {
        self.in_use
    }

    pub fn free(&self) -> u32 {
        self.capacity - self.in_use
    }

    pub fn utilization(&self) -> f64 {
        f64::from(self.in_use) / f64::from(self.capacity)
    }

    /// Take a slot if one is free.
    pub fn admit(&mut self) -> bool {
        if self.in_use < self.capacity {
            self.in_use += 1;
            true
        } else {
            false
        }
    }

    pub fn release(&mut self) {
        assert!(self.in_use > 0, "slot released twice");
        self.in_use -= 1;
    }
}

/// Execution statistics of one service on one hardware class.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProfileEntry {
    pub sample_count: u64,
    /// EWMA of execution time, initialised at the first sample.
    pub mean: SimTime,
    pub min: SimTime,
    pub max: SimTime,
    pub version: u64,
}

#[derive(Clone, Debug, Default)]
pub struct ProfileTable {
    entries: BTreeMap<(ServiceId, u16), ProfileEntry>,
}

impl ProfileTable {
    pub fn get(&self, service: ServiceId, class: u16) -> Option<&ProfileEntry> {
        self.entries.get(&(service, class))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(ServiceId, u16), &ProfileEntry)> {
        self.entries.iter()
    }

    pub fn record(&mut self, service: ServiceId, class: u16, sample: SimTime, alpha: f64) {
        let e = self.entries.entry((service, class)).or_insert(ProfileEntry {
            sample_count: 0,
            mean: sample,
            min: sample,
            max: sample,
            version: 0,
        });
        if e.sample_count > 0 {
            let m = e.mean.as_us() as f64;
            let s = sample.as_us() as f64;
            let next = SimTime::from_us((m + alpha * (s - m)).round() as u64);
            e.min = e.min.min(sample);
            e.max = e.max.max(sample);
            // rounding must not push the mean outside the observed range
            e.mean = next.clamp(e.min, e.max);
        }
        e.sample_count += 1;
        e.version += 1;
    }
}

/// EWMA mean when samples exist, otherwise the prior.
pub fn estimate_exec(entry: Option<&ProfileEntry>, prior: SimTime) -> SimTime {
    match entry {
        Some(e) if e.sample_count > 0 => e.mean,
        _ => prior,
    }
}

pub fn prior_estimate(deadline: SimTime, prior_fraction: f64) -> SimTime {
    deadline.scale(prior_fraction)
}

/// Execution time for a task with relative deadline `deadline`.
pub fn exec_time(deadline: SimTime, fraction: f64, exec_scale: f64) -> SimTime {
    deadline.scale(fraction * exec_scale)
}

/// Returned to the user when the input is fetched separately.
#[derive(Clone, Debug)]
pub struct TaskReceipt {
    pub ttc: SimTime,
    /// Executing node prefix followed by an execution-state hash.
    pub thunk: Name,
}

pub fn thunk_name(node_prefix: &Name, state_hash: u64) -> Name {
    node_prefix
        .child("thunk")
        .child(&format!("{state_hash:016x}"))
}
