//! Information-centric forwarding plane: names, packets, per-node tables and
//! the forwarding pipeline.

mod name;
mod packet;
mod tables;

use std::collections::BTreeSet;

pub use name::{Name, NameError};
pub use packet::{task_name, AppParams, Data, FaceId, Interest, Payload, LOCAL_FACE};
pub use tables::{ContentStore, CsEntry, Fib, FibEntry, Pit, PitEntry, PitInsert};

use crate::engine::SimTime;
use crate::topology::{NodeId, NodeRole, Topology};

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ForwarderCounters {
    pub interests_in: u64,
    pub pit_created: u64,
    pub forwarded: u64,
    pub aggregated: u64,
    pub loops: u64,
    pub no_route: u64,
    pub cs_hits: u64,
    pub data_in: u64,
    pub unsolicited: u64,
    pub data_out: u64,
}

#[derive(Debug)]
pub enum InterestAction {
    /// Fresh cached Data goes back on the incoming face.
    CsHit(Data),
    Aggregated,
    /// Same PIT key and nonce seen before: dropped.
    Loop,
    Forward(FaceId),
    /// The best face is the local application.
    Deliver,
    NoRoute,
}

/// PIT, FIB and CS of one node.
#[derive(Debug)]
pub struct Forwarder {
    pub pit: Pit,
    pub fib: Fib,
    pub cs: ContentStore,
    pub counters: ForwarderCounters,
}

impl Forwarder {
    pub fn new(fib: Fib, cs_capacity: usize) -> Self {
        Forwarder {
            pit: Pit::default(),
            fib,
            cs: ContentStore::new(cs_capacity),
            counters: ForwarderCounters::default(),
        }
    }

    /// CS, then PIT, then FIB (hint first when present).
    pub fn on_interest(&mut self, interest: &Interest, in_face: FaceId, now: SimTime) -> InterestAction {
        self.counters.interests_in += 1;
        if let Some(d) = self.cs.lookup(&interest.name, now) {
            self.counters.cs_hits += 1;
            return InterestAction::CsHit(d);
        }
        let digest = interest.selector_digest();
        match self.pit.insert(
            &interest.name,
            digest,
            in_face,
            interest.nonce,
            now,
            now + interest.lifetime,
        ) {
            PitInsert::DuplicateNonce => {
                self.counters.loops += 1;
                InterestAction::Loop
            }
            PitInsert::Aggregated => {
                self.counters.aggregated += 1;
                InterestAction::Aggregated
            }
            PitInsert::Created => {
                self.counters.pit_created += 1;
                self.route(interest)
            }
        }
    }

    /// FIB decision for an Interest that already holds a PIT entry here.
    pub fn route(&mut self, interest: &Interest) -> InterestAction {
        let target = interest.forwarding_hint.as_ref().unwrap_or(&interest.name);
        match self.fib.longest_prefix_match(target) {
            None => {
                self.counters.no_route += 1;
                InterestAction::NoRoute
            }
            Some(e) => {
                let face = e.faces[0].0;
                if face == LOCAL_FACE {
                    InterestAction::Deliver
                } else {
                    self.counters.forwarded += 1;
                    InterestAction::Forward(face)
                }
            }
        }
    }

    /// Faces the Data goes out on; `None` when unsolicited.
    pub fn on_data(&mut self, data: &Data, now: SimTime) -> Option<BTreeSet<FaceId>> {
        self.counters.data_in += 1;
        let faces = self.pit.satisfy(&data.name, now);
        if faces.is_empty() {
            self.counters.unsolicited += 1;
            return None;
        }
        if data.freshness > SimTime::ZERO {
            self.cs.insert(data.clone(), now);
        }
        self.counters.data_out += faces.len() as u64;
        Some(faces)
    }
}

/// Faces toward `dest` from `node`, best first: (face, link delay + rest of path).
fn faces_toward(topo: &Topology, node: NodeId, dest: NodeId) -> Vec<(FaceId, u64)> {
    if node == dest {
        return vec![(LOCAL_FACE, 0)];
    }
    let mut out: Vec<(FaceId, u64, NodeId)> = topo
        .neighbors(node)
        .iter()
        .enumerate()
        .filter(|(_, a)| a.node == dest || topo.node(a.node).role != NodeRole::User)
        .filter_map(|(i, a)| {
            let rest = topo.one_way_delay(a.node, dest);
            (!rest.is_infinite()).then(|| ((i + 1) as FaceId, (a.delay + rest).as_us(), a.node))
        })
        .collect();
    out.sort_by_key(|(_, cost, nb)| (*cost, *nb));
    out.into_iter().map(|(f, c, _)| (f, c)).collect()
}

/// Per-node FIBs: node prefixes, gateway prefixes, `/cloud`, and service
/// prefixes (users toward their access EN, compute nodes local).
pub fn build_fibs(topo: &Topology, services: &[Name]) -> Vec<Fib> {
    topo.nodes()
        .iter()
        .map(|n| {
            let mut fib = Fib::default();
            for m in topo.nodes() {
                if m.role == NodeRole::Router && m.id != n.id {
                    continue;
                }
                fib.insert(FibEntry {
                    prefix: m.prefix.clone(),
                    faces: faces_toward(topo, n.id, m.id),
                });
            }
            for net in topo.networks() {
                fib.insert(FibEntry {
                    prefix: net.gateway_prefix.clone(),
                    faces: faces_toward(topo, n.id, net.eg),
                });
            }
            let service_faces = match n.role {
                NodeRole::User => Some(faces_toward(topo, n.id, topo.access_en(n.id))),
                NodeRole::En | NodeRole::Eg | NodeRole::Cloud => Some(vec![(LOCAL_FACE, 0)]),
                NodeRole::Router => None,
            };
            if let Some(faces) = service_faces {
                for s in services {
                    fib.insert(FibEntry {
                        prefix: s.clone(),
                        faces: faces.clone(),
                    });
                }
            }
            fib
        })
        .collect()
}
