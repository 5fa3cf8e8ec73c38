//! Two-tier resource synchronization: records, per-node views and the
//! optimistic reservations placed on top of them.

use std::collections::BTreeMap;

use crate::compute::{ProfileEntry, ProfileTable, ServiceId, TaskId};
use crate::config::SyncConfig;
use crate::engine::SimTime;
use crate::topology::{EdgeNetworkId, NodeId};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProfileSummary {
    pub service: ServiceId,
    pub class: u16,
    pub mean: SimTime,
    pub sample_count: u64,
    pub version: u64,
}

/// Full-state record one EN/EG sends to each peer of its network.
#[derive(Clone, Debug, PartialEq)]
pub struct IntraSyncRecord {
    pub en: NodeId,
    pub free_slots: u32,
    pub capacity: u32,
    /// Sorted by (service, class).
    pub profiles: Vec<ProfileSummary>,
    pub stamped_at: SimTime,
}

impl IntraSyncRecord {
    pub fn from_state(en: NodeId, free: u32, capacity: u32, table: &ProfileTable, now: SimTime) -> Self {
        IntraSyncRecord {
            en,
            free_slots: free,
            capacity,
            profiles: table
                .iter()
                .map(|((service, class), e)| ProfileSummary {
                    service: *service,
                    class: *class,
                    mean: e.mean,
                    sample_count: e.sample_count,
                    version: e.version,
                })
                .collect(),
            stamped_at: now,
        }
    }

    pub fn profile(&self, service: ServiceId, class: u16) -> Option<&ProfileSummary> {
        self.profiles
            .binary_search_by(|p| (p.service, p.class).cmp(&(service, class)))
            .ok()
            .map(|i| &self.profiles[i])
    }
}

/// Per-network summary exchanged among gateways.
#[derive(Clone, Debug, PartialEq)]
pub struct InterSyncRecord {
    pub network: EdgeNetworkId,
    pub gateway: NodeId,
    /// Zero when the gateway itself is free, `SimTime::INFINITY` when nothing is.
    pub rtt_to_closest_free_en: SimTime,
    pub utilization: f64,
    pub stats: Vec<ProfileSummary>,
    pub stamped_at: SimTime,
}

impl InterSyncRecord {
    pub fn has_free(&self) -> bool {
        !self.rtt_to_closest_free_en.is_infinite()
    }
}

/// Wire sizes of sync records.
#[derive(Clone, Copy, Debug)]
pub struct RecordSizes {
    pub base: u32,
    pub fixed: u32,
    pub per_profile: u32,
    pub inter: u32,
}

impl RecordSizes {
    pub fn from_config(cfg: &SyncConfig) -> Self {
        RecordSizes {
            base: cfg.record_base_bytes,
            fixed: cfg.record_fixed_bytes,
            per_profile: cfg.per_profile_bytes,
            inter: cfg.inter_record_bytes,
        }
    }

    pub fn intra(&self, profiles: usize) -> u32 {
        self.base + self.fixed + self.per_profile * profiles as u32
    }

    pub fn inter(&self, stats: usize) -> u32 {
        self.base + self.inter + self.per_profile * stats as u32
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Reservation {
    pub target: NodeId,
    pub task: TaskId,
    pub placed_at: SimTime,
    /// Estimated completion; the slot is assumed back after this.
    pub expires: SimTime,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PeerState {
    pub free_slots: u32,
    pub capacity: u32,
    pub rtt: Option<SimTime>,
    pub staleness: SimTime,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NetworkState {
    pub gateway: NodeId,
    pub rtt_to_closest_free_en: SimTime,
    pub utilization: f64,
    pub staleness: SimTime,
}

/// Immutable copy of a view with reservations applied.
#[derive(Clone, Debug, PartialEq)]
pub struct ViewSnapshot {
    pub owner: NodeId,
    pub taken_at: SimTime,
    pub peers: BTreeMap<NodeId, PeerState>,
    pub networks: BTreeMap<EdgeNetworkId, NetworkState>,
}

/// A node's possibly stale picture of its peers (tier 1) and of other
/// networks (tier 2, gateways only).
#[derive(Clone, Debug)]
pub struct SyncView {
    owner: NodeId,
    intra: BTreeMap<NodeId, IntraSyncRecord>,
    rtt: BTreeMap<NodeId, SimTime>,
    inter: BTreeMap<EdgeNetworkId, InterSyncRecord>,
    reservations: Vec<Reservation>,
}

impl SyncView {
    pub fn new(owner: NodeId) -> Self {
        SyncView {
            owner,
            intra: BTreeMap::new(),
            rtt: BTreeMap::new(),
            inter: BTreeMap::new(),
            reservations: Vec::new(),
        }
    }

    pub fn owner(&self) -> NodeId {
        self.owner
    }

    /// Store a peer record unless an equally fresh or fresher one is held.
    pub fn apply_intra(&mut self, rec: IntraSyncRecord) -> bool {
        if let Some(old) = self.intra.get(&rec.en) {
            if old.stamped_at > rec.stamped_at {
                return false;
            }
        }
        let (en, stamp) = (rec.en, rec.stamped_at);
        // reservations older than the record are already reflected in it
        self.reservations
            .retain(|r| r.target != en || r.placed_at >= stamp);
        self.intra.insert(en, rec);
        true
    }

    pub fn apply_inter(&mut self, rec: InterSyncRecord) -> bool {
        if let Some(old) = self.inter.get(&rec.network) {
            if old.stamped_at > rec.stamped_at {
                return false;
            }
        }
        self.inter.insert(rec.network, rec);
        true
    }

    pub fn set_rtt(&mut self, peer: NodeId, rtt: SimTime) {
        self.rtt.insert(peer, rtt);
    }

    pub fn rtt(&self, peer: NodeId) -> Option<SimTime> {
        if peer == self.owner {
            return Some(SimTime::ZERO);
        }
        self.rtt.get(&peer).copied()
    }

    pub fn record(&self, peer: NodeId) -> Option<&IntraSyncRecord> {
        self.intra.get(&peer)
    }

    pub fn records(&self) -> impl Iterator<Item = &IntraSyncRecord> {
        self.intra.values()
    }

    pub fn network(&self, net: EdgeNetworkId) -> Option<&InterSyncRecord> {
        self.inter.get(&net)
    }

    pub fn networks(&self) -> impl Iterator<Item = &InterSyncRecord> {
        self.inter.values()
    }

    pub fn reserve(&mut self, target: NodeId, task: TaskId, now: SimTime, expires: SimTime) {
        self.reservations.retain(|r| r.expires > now);
        self.reservations.push(Reservation {
            target,
            task,
            placed_at: now,
            expires,
        });
    }

    /// Undo the reservation for `task` (placement rejected). Returns whether
    /// one was held.
    pub fn release(&mut self, task: TaskId) -> bool {
        let before = self.reservations.len();
        self.reservations.retain(|r| r.task != task);
        before != self.reservations.len()
    }

    pub fn active_reservations(&self, target: NodeId, now: SimTime) -> u32 {
        let stamp = match self.intra.get(&target) {
            Some(r) => r.stamped_at,
            None => return 0,
        };
        self.reservations
            .iter()
            .filter(|r| r.target == target && r.expires > now && r.placed_at >= stamp)
            .count() as u32
    }

    /// Cached free slots minus live reservations; `None` if never heard from.
    pub fn free_slots(&self, peer: NodeId, now: SimTime) -> Option<u32> {
        let rec = self.intra.get(&peer)?;
        Some(rec.free_slots.saturating_sub(self.active_reservations(peer, now)))
    }

    pub fn snapshot(&self, now: SimTime) -> ViewSnapshot {
        ViewSnapshot {
            owner: self.owner,
            taken_at: now,
            peers: self
                .intra
                .values()
                .map(|r| {
                    (
                        r.en,
                        PeerState {
                            free_slots: self.free_slots(r.en, now).unwrap_or(0),
                            capacity: r.capacity,
                            rtt: self.rtt(r.en),
                            staleness: now.saturating_sub(r.stamped_at),
                        },
                    )
                })
                .collect(),
            networks: self
                .inter
                .values()
                .map(|r| {
                    (
                        r.network,
                        NetworkState {
                            gateway: r.gateway,
                            rtt_to_closest_free_en: r.rtt_to_closest_free_en,
                            utilization: r.utilization,
                            staleness: now.saturating_sub(r.stamped_at),
                        },
                    )
                })
                .collect(),
        }
    }

    /// Best-informed profile for (service, class): the entry with the most
    /// samples among the local table and every peer record.
    pub fn best_profile(
        &self,
        own: &ProfileTable,
        service: ServiceId,
        class: u16,
    ) -> Option<ProfileEntry> {
        let mut best: Option<ProfileEntry> = own.get(service, class).copied();
        for rec in self.intra.values() {
            if let Some(p) = rec.profile(service, class) {
                if best.is_none_or(|b| p.sample_count > b.sample_count) {
                    best = Some(ProfileEntry {
                        sample_count: p.sample_count,
                        mean: p.mean,
                        min: p.mean,
                        max: p.mean,
                        version: p.version,
                    });
                }
            }
        }
        best
    }
}

/// The record a gateway publishes for its network, computed from its own
/// live slots and its tier-1 view.
pub fn gateway_summary(
    network: EdgeNetworkId,
    gateway: NodeId,
    own_free: u32,
    own_capacity: u32,
    view: &SyncView,
    now: SimTime,
) -> InterSyncRecord {
    let (rtt, utilization) = if own_free > 0 {
        (
            SimTime::ZERO,
            1.0 - f64::from(own_free) / f64::from(own_capacity),
        )
    } else {
        view.records()
            .filter_map(|r| {
                let free = view.free_slots(r.en, now)?;
                let rtt = view.rtt(r.en)?;
                (free > 0).then(|| (rtt, r.en, 1.0 - f64::from(free) / f64::from(r.capacity)))
            })
            .min_by_key(|(rtt, en, _)| (*rtt, *en))
            .map(|(rtt, _, u)| (rtt, u))
            .unwrap_or((SimTime::INFINITY, 1.0))
    };
    InterSyncRecord {
        network,
        gateway,
        rtt_to_closest_free_en: rtt,
        utilization,
        stats: Vec::new(),
        stamped_at: now,
    }
}

/// Out-of-cycle broadcast trigger.
pub fn should_notify(threshold: Option<f64>, last_broadcast: f64, current: f64) -> bool {
    match threshold {
        Some(th) => (current - last_broadcast).abs() >= th - 1e-12,
        None => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(en: u32, free: u32, at_ms: f64) -> IntraSyncRecord {
        IntraSyncRecord {
            en: NodeId(en),
            free_slots: free,
            capacity: 8,
            profiles: Vec::new(),
            stamped_at: SimTime::from_ms(at_ms),
        }
    }

    #[test]
    fn staleness_and_cold_start() {
        let mut v = SyncView::new(NodeId(0));
        assert!(v.snapshot(SimTime::ZERO).peers.is_empty());
        v.apply_intra(rec(1, 3, 10_000.0));
        v.set_rtt(NodeId(1), SimTime::from_ms(4.0));
        let s = v.snapshot(SimTime::from_ms(12_000.0));
        let p = s.peers[&NodeId(1)];
        assert_eq!(p.free_slots, 3);
        assert_eq!(p.staleness, SimTime::from_ms(2_000.0));
    }

    #[test]
    fn older_record_ignored() {
        let mut v = SyncView::new(NodeId(0));
        assert!(v.apply_intra(rec(1, 3, 10.0)));
        assert!(!v.apply_intra(rec(1, 7, 5.0)));
        assert_eq!(v.record(NodeId(1)).unwrap().free_slots, 3);
    }

    #[test]
    fn reservations_decrement_and_restore() {
        let mut v = SyncView::new(NodeId(0));
        v.apply_intra(rec(1, 1, 0.0));
        let now = SimTime::from_ms(1.0);
        v.reserve(NodeId(1), TaskId(9), now, SimTime::from_ms(50.0));
        assert_eq!(v.free_slots(NodeId(1), now), Some(0));
        v.reserve(NodeId(1), TaskId(10), now, SimTime::from_ms(50.0));
        // never below zero
        assert_eq!(v.snapshot(now).peers[&NodeId(1)].free_slots, 0);
        assert!(v.release(TaskId(10)));
        assert!(v.release(TaskId(9)));
        assert_eq!(v.free_slots(NodeId(1), now), Some(1));
        // expiry
        v.reserve(NodeId(1), TaskId(11), now, SimTime::from_ms(50.0));
        assert_eq!(v.free_slots(NodeId(1), SimTime::from_ms(50.0)), Some(1));
        // fresher record clears older adjustments
        v.reserve(NodeId(1), TaskId(12), now, SimTime::from_ms(500.0));
        v.apply_intra(rec(1, 4, 2.0));
        assert_eq!(v.free_slots(NodeId(1), SimTime::from_ms(3.0)), Some(4));
    }

    #[test]
    fn gateway_record() {
        let net = EdgeNetworkId(0);
        let gw = NodeId(0);
        let mut v = SyncView::new(gw);
        let r = gateway_summary(net, gw, 2, 8, &v, SimTime::ZERO);
        assert_eq!(r.rtt_to_closest_free_en, SimTime::ZERO);
        v.apply_intra(rec(1, 0, 0.0));
        v.set_rtt(NodeId(1), SimTime::from_ms(4.0));
        let r = gateway_summary(net, gw, 0, 8, &v, SimTime::ZERO);
        assert!(r.rtt_to_closest_free_en.is_infinite());
        v.apply_intra(rec(2, 2, 0.0));
        v.set_rtt(NodeId(2), SimTime::from_ms(6.0));
        let r = gateway_summary(net, gw, 0, 8, &v, SimTime::ZERO);
        assert_eq!(r.rtt_to_closest_free_en, SimTime::from_ms(6.0));
        assert!((r.utilization - 0.75).abs() < 1e-12);
    }

    #[test]
    fn notify_threshold() {
        assert!(should_notify(Some(0.25), 2.0 / 8.0, 5.0 / 8.0));
        assert!(!should_notify(Some(0.25), 0.5, 0.6));
        assert!(!should_notify(None, 0.0, 1.0));
    }
}
