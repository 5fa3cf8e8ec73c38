//! Service catalog, per-user task streams and arrival processes.

use std::collections::HashMap;

use crate::compute::{Category, Service, ServiceId};
use crate::config::{ArrivalProcess, ComputeConfig, ExecDraw, LoadKind, SizeSpec, WorkloadConfig};
use crate::engine::{RandomStream, SimTime};
use crate::topology::{NodeId, Topology};

/// Category sizes (sensitive, regular, tolerant); near-equal split by default.
pub fn partition(cfg: &WorkloadConfig) -> [usize; 3] {
    cfg.partition.unwrap_or_else(|| {
        let n = cfg.services;
        let base = n / 3;
        let extra = n % 3;
        [0, 1, 2].map(|i| base + usize::from(i < extra))
    })
}

pub fn build_catalog(
    cfg: &WorkloadConfig,
    compute: &ComputeConfig,
    deadlines: &mut RandomStream,
    exec: &mut RandomStream,
) -> Vec<Service> {
    let sizes = partition(cfg);
    let mut out = Vec::with_capacity(cfg.services);
    for (cat, count) in Category::ALL.into_iter().zip(sizes) {
        let (lo, hi) = cat.deadline_range_ms();
        for _ in 0..count {
            let id = ServiceId(out.len() as u16);
            let deadline = SimTime::from_ms(deadlines.uniform(lo, hi));
            let exec_fraction = match compute.exec_draw {
                ExecDraw::PerService => {
                    Some(exec.uniform(compute.exec_fraction[0], compute.exec_fraction[1]))
                }
                ExecDraw::PerTask => None,
            };
            out.push(Service {
                id,
                name: format!("svc{:02}", id.0),
                category: cat,
                deadline,
                exec_fraction,
            });
        }
    }
    out
}

#[derive(Clone, Debug)]
pub struct UserSpec {
    pub user: NodeId,
    pub service: ServiceId,
    pub light_rate: f64,
    pub heavy_rate: f64,
}

/// One service and one rate per load level for every user, drawn once per run.
pub fn assign_users(
    topo: &Topology,
    cfg: &WorkloadConfig,
    services: usize,
    assign: &mut RandomStream,
    rates: &mut RandomStream,
) -> Vec<UserSpec> {
    topo.users()
        .map(|u| {
            let service = ServiceId(assign.below(services) as u16);
            let light_rate = rates.uniform(cfg.light_rate[0], cfg.light_rate[1]);
            let heavy_rate = rates.uniform(cfg.heavy_rate[0], cfg.heavy_rate[1]);
            UserSpec {
                user: u.id,
                service,
                light_rate,
                heavy_rate,
            }
        })
        .collect()
}

/// Rate of a user at time `t` and the end of the constant-rate phase.
fn phase(cfg: &WorkloadConfig, spec: &UserSpec, t: SimTime) -> (f64, SimTime) {
    match cfg.load {
        LoadKind::Light => (spec.light_rate, SimTime::INFINITY),
        LoadKind::Heavy => (spec.heavy_rate, SimTime::INFINITY),
        LoadKind::Alternating => {
            let period = SimTime::from_secs(cfg.alternating_period_s).as_us();
            let idx = t.as_us() / period;
            let rate = if idx.is_multiple_of(2) {
                spec.light_rate
            } else {
                spec.heavy_rate
            };
            (rate, SimTime::from_us((idx + 1) * period))
        }
    }
}

/// Arrival process of one user, drawing from its own stream.
#[derive(Clone, Debug)]
pub struct ArrivalGen {
    rng: RandomStream,
    /// Phase offset for evenly spaced arrivals.
    offset: Option<f64>,
}

impl ArrivalGen {
    pub fn new(run_seed: u64, user: NodeId) -> Self {
        ArrivalGen {
            rng: RandomStream::new(run_seed, &format!("arrivals/{}", user.0)),
            offset: None,
        }
    }

    /// Next arrival strictly after `after`, or `None` past `end`.
    pub fn next(
        &mut self,
        cfg: &WorkloadConfig,
        spec: &UserSpec,
        after: SimTime,
        end: SimTime,
    ) -> Option<SimTime> {
        let mut t = after;
        loop {
            let (rate, phase_end) = phase(cfg, spec, t);
            let gap_s = match cfg.arrival {
                ArrivalProcess::Poisson => self.rng.exponential(rate),
                ArrivalProcess::Uniform => {
                    let first = *self.offset.get_or_insert_with(|| self.rng.uniform(0.0, 1.0));
                    if t == SimTime::ZERO {
                        first / rate
                    } else {
                        1.0 / rate
                    }
                }
            };
            let gap = SimTime::from_secs(gap_s).max(SimTime::from_us(1));
            let next = t + gap;
            if next >= phase_end && cfg.arrival == ArrivalProcess::Poisson {
                // memoryless: restart at the boundary with the new rate
                t = phase_end;
                if t >= end {
                    return None;
                }
                continue;
            }
            return (next < end).then_some(next);
        }
    }
}

/// Input hash and size for a new task.
#[derive(Debug)]
pub struct InputSource {
    rng: RandomStream,
    duplicate_prob: f64,
    size: SizeSpec,
    recent: HashMap<ServiceId, Vec<(u64, u32)>>,
}

impl InputSource {
    pub fn new(run_seed: u64, duplicate_prob: f64, size: SizeSpec) -> Self {
        InputSource {
            rng: RandomStream::new(run_seed, "inputs"),
            duplicate_prob,
            size,
            recent: HashMap::new(),
        }
    }

    pub fn draw(&mut self, service: ServiceId) -> (u64, u32) {
        if self.duplicate_prob > 0.0 {
            if let Some(prev) = self.recent.get(&service) {
                if !prev.is_empty() && self.rng.bernoulli(self.duplicate_prob) {
                    return prev[self.rng.below(prev.len())];
                }
            }
        }
        let hash = self.rng.next_u64();
        let size = match self.size {
            SizeSpec::Constant(s) => s,
            SizeSpec::Range([lo, hi]) => {
                if lo == hi {
                    lo
                } else {
                    self.rng.uniform(f64::from(lo), f64::from(hi) + 1.0).floor() as u32
                }
            }
        };
        if self.duplicate_prob > 0.0 {
            let v = self.recent.entry(service).or_default();
            v.push((hash, size));
            if v.len() > 64 {
                v.remove(0);
            }
        }
        (hash, size)
    }
}

/// Probe services per category: the one with most users, ties to the lowest id.
pub fn default_probes(catalog: &[Service], users: &[UserSpec]) -> Vec<ServiceId> {
    Category::ALL
        .iter()
        .filter_map(|cat| {
            catalog
                .iter()
                .filter(|s| s.category == *cat)
                .max_by_key(|s| {
                    let n = users.iter().filter(|u| u.service == s.id).count();
                    (n, std::cmp::Reverse(s.id))
                })
                .map(|s| s.id)
        })
        .collect()
}
