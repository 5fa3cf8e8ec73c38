//! One simulation run: the event loop that drives forwarding, execution,
//! synchronization and placement.

use std::collections::{BTreeSet, HashMap, VecDeque};

use log::debug;

use crate::compute::{
    estimate_exec, exec_time, prior_estimate, thunk_name, Category, ProfileTable, Service,
    ServiceId, SlotPool, Task, TaskId, TaskReceipt,
};
use crate::config::{ConfigError, ExperimentConfig, PolicyKind};
use crate::engine::{splitmix64, RandomStream, Scheduler, SimTime};
use crate::metrics::{
    build_report, ForwardingCounters, LocationClass, MetricsReport, Outcome, ReportInputs,
    TaskOutcome, TrafficClass, TrafficLedger,
};
use crate::ndn::{
    build_fibs, task_name, AppParams, Data, FaceId, Forwarder, Interest, InterestAction, Name,
    Payload, LOCAL_FACE,
};
use crate::policy::{
    decide, decide_exhausted, CloudCandidate, Candidate, DecisionContext, FeasibilityBudget, NetworkCandidate,
    PlacementDecision,
};
use crate::sync::{gateway_summary, should_notify, IntraSyncRecord, RecordSizes, SyncView};
use crate::topology::{build_topology, EdgeNetworkId, NodeId, NodeRole, Topology};
use crate::workload::{
    assign_users, build_catalog, default_probes, ArrivalGen, InputSource, UserSpec,
};

#[derive(Debug)]
enum Packet {
    Interest(Box<Interest>),
    Data(Box<Data>),
}

#[derive(Debug)]
enum Event {
    Arrival { user: u32 },
    Packet { node: NodeId, face: FaceId, packet: Packet },
    ExecDone { node: NodeId, task: TaskId },
    SyncIntra { network: EdgeNetworkId },
    SyncInter,
    Timeout { task: TaskId },
    ThunkFetch { task: TaskId },
}

struct NodeState {
    fwd: Forwarder,
    slots: Option<SlotPool>,
    exec_scale: f64,
    queue: VecDeque<TaskId>,
    /// (completion time, task) of running executions.
    running: BTreeSet<(SimTime, TaskId)>,
    profiles: ProfileTable,
    view: SyncView,
    last_broadcast_util: f64,
    /// Input fetches in flight: input name → waiting tasks.
    awaiting_input: HashMap<Name, Vec<TaskId>>,
    /// Thunks whose result is ready, and thunks asked for before that.
    ready_thunks: BTreeSet<Name>,
    waiting_thunks: BTreeSet<Name>,
    /// Sync exchanges awaiting their ack: name → (peer, sent at).
    sync_pending: HashMap<Name, (NodeId, SimTime)>,
    /// Direct-link peers of this node.
    direct_peers: BTreeSet<NodeId>,
}

struct TaskState {
    task: Task,
    name: Name,
    params: AppParams,
    /// Nodes that have decided on or rejected this task.
    visited: Vec<NodeId>,
    redirects: u32,
    /// Best-effort target that must run the task without re-deciding.
    forced: Option<NodeId>,
    reserved_by: Option<NodeId>,
    exec_node: Option<NodeId>,
    started: Option<SimTime>,
    thunk: Option<Name>,
    outcome: Option<(Outcome, Option<SimTime>)>,
}

/// Everything a finished run produces.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub seed: u64,
    pub report: MetricsReport,
    pub outcomes: Vec<TaskOutcome>,
    pub services: Vec<Service>,
    pub node_labels: Vec<String>,
}

struct World<'a> {
    cfg: &'a ExperimentConfig,
    topo: Topology,
    services: Vec<Service>,
    users: Vec<UserSpec>,
    arrivals: Vec<ArrivalGen>,
    inputs: InputSource,
    exec_rng: RandomStream,
    nonce_rng: RandomStream,
    nodes: Vec<NodeState>,
    tasks: Vec<TaskState>,
    /// (user, name) → tasks waiting for that Data at the user.
    user_pending: HashMap<(NodeId, Name), Vec<TaskId>>,
    rev_face: Vec<Vec<FaceId>>,
    sched: Scheduler<Event>,
    ledger: TrafficLedger,
    counters: ForwardingCounters,
    sync_on: bool,
    sizes: RecordSizes,
    arrivals_end: SimTime,
    ticks_end: SimTime,
    sync_seq: u64,
    cloud_prefix: Name,
    header: u32,
    margin: SimTime,
    freshness: SimTime,
}

pub fn run(cfg: &ExperimentConfig, seed: u64) -> Result<RunOutput, ConfigError> {
    let mut w = World::new(cfg, seed)?;
    w.boot();
    while let Some((_, ev)) = w.sched.pop_until(SimTime::INFINITY) {
        w.handle(ev);
    }
    Ok(w.finish(seed))
}

impl<'a> World<'a> {
    fn new(cfg: &'a ExperimentConfig, seed: u64) -> Result<Self, ConfigError> {
        let topo = build_topology(&cfg.topology, cfg.workload.users)?;
        let services = build_catalog(
            &cfg.workload,
            &cfg.compute,
            &mut RandomStream::new(seed, "deadlines"),
            &mut RandomStream::new(seed, "exec-fractions"),
        );
        let service_names: Vec<Name> = services
            .iter()
            .map(|s| Name::from_components([s.name.as_str()]).expect("service name"))
            .collect();
        let users = assign_users(
            &topo,
            &cfg.workload,
            services.len(),
            &mut RandomStream::new(seed, "service-assignment"),
            &mut RandomStream::new(seed, "rates"),
        );
        let arrivals = users.iter().map(|u| ArrivalGen::new(seed, u.user)).collect();
        let fibs = build_fibs(&topo, &service_names);

        let classes = &cfg.compute.hardware_classes;
        let nodes = topo
            .nodes()
            .iter()
            .zip(fibs)
            .map(|(n, fib)| {
                let class = cfg
                    .compute
                    .class_assignment
                    .get(&n.label)
                    .and_then(|c| classes.iter().position(|h| &h.name == c))
                    .unwrap_or(0);
                let slots = match n.role {
                    NodeRole::En | NodeRole::Eg => {
                        Some(SlotPool::new(cfg.compute.slots_per_node, class as u16))
                    }
                    NodeRole::Cloud => Some(SlotPool::new(cfg.compute.cloud_slots, class as u16)),
                    _ => None,
                };
                NodeState {
                    fwd: Forwarder::new(fib, cfg.cs.capacity),
                    slots,
                    exec_scale: classes[class].exec_scale,
                    queue: VecDeque::new(),
                    running: BTreeSet::new(),
                    profiles: ProfileTable::default(),
                    view: SyncView::new(n.id),
                    last_broadcast_util: 0.0,
                    awaiting_input: HashMap::new(),
                    ready_thunks: BTreeSet::new(),
                    waiting_thunks: BTreeSet::new(),
                    sync_pending: HashMap::new(),
                    direct_peers: if n.role.is_edge_compute() {
                        topo.direct_link_peers(n.id)
                    } else {
                        BTreeSet::new()
                    },
                }
            })
            .collect();
        let rev_face = topo
            .nodes()
            .iter()
            .map(|n| {
                topo.neighbors(n.id)
                    .iter()
                    .map(|a| topo.face_to(a.node, n.id).expect("bidirectional link"))
                    .collect()
            })
            .collect();

        let arrivals_end = SimTime::from_secs(cfg.workload.duration_s);
        let max_deadline = services.iter().map(|s| s.deadline).max().unwrap_or(SimTime::ZERO);
        let margin = SimTime::from_ms(cfg.pit.margin_ms);
        let cloud_prefix = topo.node(topo.cloud()).prefix.clone();
        Ok(World {
            cfg,
            services,
            users,
            arrivals,
            inputs: InputSource::new(
                seed,
                cfg.task.duplicate_input_prob,
                cfg.workload.input_size_bytes,
            ),
            exec_rng: RandomStream::new(seed, "exec-times"),
            nonce_rng: RandomStream::new(seed, "nonces"),
            nodes,
            tasks: Vec::new(),
            user_pending: HashMap::new(),
            rev_face,
            sched: Scheduler::new(),
            ledger: TrafficLedger::default(),
            counters: ForwardingCounters::default(),
            sync_on: cfg.sync_enabled(),
            sizes: RecordSizes::from_config(&cfg.sync),
            arrivals_end,
            ticks_end: arrivals_end + max_deadline + margin,
            sync_seq: 0,
            cloud_prefix,
            header: cfg.packet.header_bytes,
            margin,
            freshness: SimTime::from_ms(cfg.cs.freshness_ms),
            topo,
        })
    }

    fn boot(&mut self) {
        for i in 0..self.users.len() {
            let spec = &self.users[i];
            if let Some(t) =
                self.arrivals[i].next(&self.cfg.workload, spec, SimTime::ZERO, self.arrivals_end)
            {
                self.sched.schedule(t, Event::Arrival { user: i as u32 });
            }
        }
        if self.sync_on {
            for net in self.topo.networks() {
                self.sched
                    .schedule(SimTime::ZERO, Event::SyncIntra { network: net.id });
            }
            self.sched.schedule(SimTime::ZERO, Event::SyncInter);
        }
    }

    fn now(&self) -> SimTime {
        self.sched.now()
    }

    fn handle(&mut self, ev: Event) {
        match ev {
            Event::Arrival { user } => self.on_arrival(user as usize),
            Event::Packet { node, face, packet } => match packet {
                Packet::Interest(i) => self.on_interest(node, face, i),
                Packet::Data(d) => self.on_data(node, d),
            },
            Event::ExecDone { node, task } => self.on_exec_done(node, task),
            Event::SyncIntra { network } => {
                self.tick_intra(network);
                let next = self.now() + SimTime::from_ms(self.cfg.sync.intra_period_ms);
                if next <= self.ticks_end {
                    self.sched.schedule(next, Event::SyncIntra { network });
                }
            }
            Event::SyncInter => {
                self.tick_inter();
                let next = self.now() + SimTime::from_ms(self.cfg.sync.inter_period_ms);
                if next <= self.ticks_end {
                    self.sched.schedule(next, Event::SyncInter);
                }
            }
            Event::Timeout { task } => {
                let ts = &mut self.tasks[task.0 as usize];
                if ts.outcome.is_none() {
                    ts.outcome = Some((Outcome::Dropped, None));
                }
            }
            Event::ThunkFetch { task } => self.fetch_thunk(task),
        }
    }

    // ---- packet plumbing ----

    fn send(&mut self, node: NodeId, face: FaceId, packet: Packet) {
        let adj = *self
            .topo
            .face_peer(node, face)
            .expect("send on a non-existent face");
        let in_face = self.rev_face[node.index()][face as usize - 1];
        let packet = match packet {
            Packet::Interest(mut i) => {
                self.ledger.charge(i.class, i.wire_size);
                i.elapsed_path += adj.delay;
                Packet::Interest(i)
            }
            Packet::Data(d) => {
                self.ledger.charge(d.class, d.wire_size);
                Packet::Data(d)
            }
        };
        self.sched.schedule(
            self.now() + adj.delay,
            Event::Packet {
                node: adj.node,
                face: in_face,
                packet,
            },
        );
    }

    /// Interest produced by the local application of `node`.
    fn express(&mut self, node: NodeId, i: Box<Interest>) {
        self.on_interest(node, LOCAL_FACE, i);
    }

    fn on_interest(&mut self, node: NodeId, face: FaceId, i: Box<Interest>) {
        let now = self.now();
        let action = self.nodes[node.index()].fwd.on_interest(&i, face, now);
        match action {
            InterestAction::CsHit(d) => self.emit_data_on(node, face, d),
            InterestAction::Aggregated => self.counters.aggregated += 1,
            InterestAction::Loop => self.counters.loops += 1,
            InterestAction::NoRoute => self.counters.no_route += 1,
            InterestAction::Forward(f) => self.send(node, f, Packet::Interest(i)),
            InterestAction::Deliver => self.app_interest(node, i),
        }
    }

    fn emit_data_on(&mut self, node: NodeId, face: FaceId, d: Data) {
        if face == LOCAL_FACE {
            self.app_data(node, d);
        } else {
            self.send(node, face, Packet::Data(Box::new(d)));
        }
    }

    fn on_data(&mut self, node: NodeId, d: Box<Data>) {
        let now = self.now();
        match self.nodes[node.index()].fwd.on_data(&d, now) {
            None => self.counters.unsolicited += 1,
            Some(faces) => {
                for f in faces {
                    self.emit_data_on(node, f, (*d).clone());
                }
            }
        }
    }

    /// Answer a pending Interest at `node` through its PIT.
    fn produce(&mut self, node: NodeId, d: Data) {
        self.on_data(node, Box::new(d));
    }

    fn forward_with_hint(&mut self, node: NodeId, mut i: Box<Interest>, hint: Name) {
        i.forwarding_hint = Some(hint);
        match self.nodes[node.index()].fwd.route(&i) {
            InterestAction::Forward(f) => self.send(node, f, Packet::Interest(i)),
            InterestAction::Deliver => {
                // the hint resolved locally: run here
                let id = i.task.expect("task interest");
                self.execute_or_queue(node, id);
            }
            _ => self.counters.no_route += 1,
        }
    }

    fn nonce(&mut self) -> u64 {
        self.nonce_rng.next_u64()
    }

    // ---- application layer ----

    fn on_arrival(&mut self, ui: usize) {
        let now = self.now();
        let spec = self.users[ui].clone();
        if let Some(t) = self.arrivals[ui].next(&self.cfg.workload, &spec, now, self.arrivals_end) {
            self.sched.schedule(t, Event::Arrival { user: ui as u32 });
        }
        let svc = self.services[spec.service.index()].clone();
        let (hash, size) = self.inputs.draw(spec.service);
        let id = TaskId(self.tasks.len() as u64);
        let home = self.topo.node(spec.user).network.expect("user in a network");
        let task = Task {
            id,
            service: spec.service,
            category: svc.category,
            input_hash: hash,
            input_size: size,
            deadline: svc.deadline,
            offloaded_at: now,
            origin_user: spec.user,
            home_network: home,
        };
        let inline = size <= self.cfg.task.inline_threshold_bytes;
        let params = AppParams {
            deadline: svc.deadline,
            input_hash: hash,
            input_size: size,
            inline_input: inline,
        };
        let name = task_name(&svc.name, hash);
        let interest = Box::new(Interest {
            name: name.clone(),
            forwarding_hint: None,
            params,
            nonce: self.nonce(),
            wire_size: self.header + if inline { size } else { 0 },
            lifetime: svc.deadline + self.margin,
            class: TrafficClass::TaskForwarding,
            task: Some(id),
            elapsed_path: SimTime::ZERO,
            payload: Payload::None,
        });
        self.sched.schedule(
            now + svc.deadline + self.margin,
            Event::Timeout { task: id },
        );
        self.tasks.push(TaskState {
            task,
            name: name.clone(),
            params,
            visited: Vec::new(),
            redirects: 0,
            forced: None,
            reserved_by: None,
            exec_node: None,
            started: None,
            thunk: None,
            outcome: None,
        });
        self.user_pending
            .entry((spec.user, name))
            .or_default()
            .push(id);
        self.express(spec.user, interest);
    }

    fn app_interest(&mut self, node: NodeId, i: Box<Interest>) {
        match (&i.payload, i.class) {
            (Payload::Intra(_), _) | (Payload::Inter(_), _) => self.on_sync_interest(node, i),
            (_, TrafficClass::InputFetch) => {
                // the user serves its own input
                let size = i.params.input_size;
                let d = Data {
                    name: i.name.clone(),
                    payload_size: size,
                    wire_size: self.header + size,
                    signed: true,
                    freshness: SimTime::ZERO,
                    class: TrafficClass::InputFetch,
                    receipt: None,
                };
                self.produce(node, d);
            }
            (_, TrafficClass::ThunkFetch) => {
                let st = &mut self.nodes[node.index()];
                if st.ready_thunks.contains(&i.name) {
                    let d = self.result_data(i.name.clone(), TrafficClass::ResultReturn);
                    self.produce(node, d);
                } else {
                    st.waiting_thunks.insert(i.name.clone());
                }
            }
            (_, TrafficClass::TaskForwarding) => self.on_task(node, i),
            _ => {}
        }
    }

    fn result_data(&self, name: Name, class: TrafficClass) -> Data {
        let size = self.cfg.task.result_size_bytes;
        Data {
            name,
            payload_size: size,
            wire_size: self.header + size,
            signed: true,
            freshness: self.freshness,
            class,
            receipt: None,
        }
    }

    fn app_data(&mut self, node: NodeId, d: Data) {
        let role = self.topo.node(node).role;
        if d.class.is_sync() {
            let now = self.now();
            if let Some((peer, sent)) = self.nodes[node.index()].sync_pending.remove(&d.name) {
                self.nodes[node.index()].view.set_rtt(peer, now - sent);
            }
            return;
        }
        if role == NodeRole::User {
            let waiting = self.user_pending.remove(&(node, d.name.clone())).unwrap_or_default();
            for id in waiting {
                match &d.receipt {
                    Some(r) => {
                        self.tasks[id.0 as usize].thunk = Some(r.thunk.clone());
                        let at = self.now() + r.ttc;
                        self.sched.schedule(at, Event::ThunkFetch { task: id });
                    }
                    None => self.complete(id),
                }
            }
            return;
        }
        if d.class == TrafficClass::InputFetch {
            let waiting = self.nodes[node.index()]
                .awaiting_input
                .remove(&d.name)
                .unwrap_or_default();
            for id in waiting {
                self.begin_exec(node, id);
            }
        }
    }

    fn complete(&mut self, id: TaskId) {
        let now = self.now();
        let ts = &mut self.tasks[id.0 as usize];
        if ts.outcome.is_some() {
            return;
        }
        let outcome = if now <= ts.task.absolute_deadline() {
            Outcome::OnTime
        } else {
            Outcome::Late
        };
        ts.outcome = Some((outcome, Some(now)));
    }

    fn fetch_thunk(&mut self, id: TaskId) {
        let ts = &self.tasks[id.0 as usize];
        if ts.outcome.is_some() {
            return;
        }
        let thunk = ts.thunk.clone().expect("receipt seen");
        let user = ts.task.origin_user;
        let remaining = (ts.task.absolute_deadline() + self.margin).saturating_sub(self.now());
        let i = Box::new(Interest {
            name: thunk.clone(),
            forwarding_hint: None,
            params: AppParams::default(),
            nonce: self.nonce(),
            wire_size: self.header,
            lifetime: remaining,
            class: TrafficClass::ThunkFetch,
            task: None,
            elapsed_path: SimTime::ZERO,
            payload: Payload::None,
        });
        self.user_pending.entry((user, thunk)).or_default().push(id);
        self.express(user, i);
    }

    // ---- placement and execution ----

    fn on_task(&mut self, node: NodeId, i: Box<Interest>) {
        let id = i.task.expect("task interest");
        let role = self.topo.node(node).role;
        let v = &mut self.tasks[id.0 as usize].visited;
        if !v.contains(&node) {
            v.push(node);
        }
        if role == NodeRole::Cloud {
            self.execute_or_queue(node, id);
            return;
        }
        if !role.is_edge_compute() {
            return;
        }
        if self.tasks[id.0 as usize].forced == Some(node) {
            self.execute_or_queue(node, id);
            return;
        }
        if i.forwarding_hint.is_some() {
            // arrival at a chosen target: admit when a slot is really free
            if self.has_free(node) {
                self.execute_or_queue(node, id);
                return;
            }
            let ts = &mut self.tasks[id.0 as usize];
            ts.redirects += 1;
            self.counters.redirects += 1;
            if let Some(placer) = ts.reserved_by.take() {
                self.nodes[placer.index()].view.release(id);
            }
            if self.tasks[id.0 as usize].redirects > self.cfg.policy.max_redirects {
                self.place(node, i, true);
                return;
            }
        }
        self.place(node, i, false);
    }

    fn has_free(&self, node: NodeId) -> bool {
        self.nodes[node.index()]
            .slots
            .as_ref()
            .is_some_and(|s| s.free() > 0)
    }

    fn place(&mut self, node: NodeId, i: Box<Interest>, exhausted: bool) {
        let id = i.task.expect("task interest");
        let ctx = self.decision_context(node, id, &i);
        let decision = if exhausted {
            decide_exhausted(&ctx)
        } else {
            decide(self.cfg.policy.kind, self.cfg.policy.cloud_preference, &ctx)
        };
        debug!("t={} task={} at {:?}: {:?}", self.now(), id.0, node, decision.kind());
        match decision {
            PlacementDecision::ExecuteHere | PlacementDecision::BufferFifo => {
                self.execute_or_queue(node, id)
            }
            PlacementDecision::ForwardToEn { target, hint } => {
                let now = self.now();
                // held until a newer record from the target or a rejection
                self.nodes[node.index()]
                    .view
                    .reserve(target, id, now, SimTime::INFINITY);
                self.tasks[id.0 as usize].reserved_by = Some(node);
                self.forward_with_hint(node, i, hint);
            }
            PlacementDecision::ForwardToNetwork { hint, .. } => {
                self.forward_with_hint(node, i, hint)
            }
            PlacementDecision::ForwardToCloud => {
                let hint = self.cloud_prefix.clone();
                self.forward_with_hint(node, i, hint);
            }
            PlacementDecision::BestEffort { target } => {
                self.counters.best_effort += 1;
                if target == node {
                    self.execute_or_queue(node, id);
                } else {
                    self.tasks[id.0 as usize].forced = Some(target);
                    let hint = self.topo.node(target).prefix.clone();
                    self.forward_with_hint(node, i, hint);
                }
            }
        }
    }

    fn estimate(&self, decider: NodeId, service: ServiceId, class: u16) -> SimTime {
        let st = &self.nodes[decider.index()];
        let svc = &self.services[service.index()];
        let prior = prior_estimate(svc.deadline, self.cfg.profile.prior_fraction);
        estimate_exec(st.view.best_profile(&st.profiles, service, class).as_ref(), prior)
    }

    fn class_of(&self, node: NodeId) -> u16 {
        self.nodes[node.index()]
            .slots
            .as_ref()
            .map(|s| s.hardware_class)
            .unwrap_or(0)
    }

    fn decision_context(&self, node: NodeId, id: TaskId, i: &Interest) -> DecisionContext {
        let now = self.now();
        let ts = &self.tasks[id.0 as usize];
        let task = &ts.task;
        let st = &self.nodes[node.index()];
        let me = self.topo.node(node);
        let net = me.network.expect("compute node in a network");
        let foreign = net != task.home_network;
        let is_gateway = me.role == NodeRole::Eg;
        let slots = st.slots.as_ref().expect("compute node");
        let self_est = self.estimate(node, task.service, slots.hardware_class);
        let self_wait = match st.running.iter().next() {
            Some((end, _)) if slots.free() == 0 => {
                let per_slot = st.queue.len() as u64 / u64::from(slots.capacity());
                end.saturating_sub(now) + SimTime::from_us(self_est.as_us() * per_slot)
            }
            _ => SimTime::ZERO,
        };

        let mut peers = Vec::new();
        if self.sync_on {
            for &m in &self.topo.network(net).compute {
                if m == node || ts.visited.contains(&m) {
                    continue;
                }
                let (Some(free), Some(rtt)) = (st.view.free_slots(m, now), st.view.rtt(m)) else {
                    continue;
                };
                peers.push(Candidate {
                    node: m,
                    prefix: self.topo.node(m).prefix.clone(),
                    rtt,
                    free_slots: free,
                    est: self.estimate(node, task.service, self.class_of(m)),
                    direct_peer: st.direct_peers.contains(&m),
                });
            }
        }

        let eg = self.topo.network(net).eg;
        let own_gateway = (!is_gateway && !foreign && !ts.visited.contains(&eg))
        .then(|| (net, eg, self.topo.network(net).gateway_prefix.clone()));

        let mut networks = Vec::new();
        if is_gateway && !foreign && self.sync_on {
            for rec in st.view.networks() {
                let gw = rec.gateway;
                if rec.network == net || ts.visited.contains(&gw) {
                    continue;
                }
                networks.push(NetworkCandidate {
                    network: rec.network,
                    gateway: gw,
                    hint: self.topo.network(rec.network).gateway_prefix.clone(),
                    rtt_to_gateway: st.view.rtt(gw).unwrap_or_else(|| self.topo.rtt(node, gw)),
                    rtt_to_closest_free: rec.rtt_to_closest_free_en,
                    est: self.estimate(node, task.service, self.class_of(gw)),
                });
            }
        }

        let cloud_id = self.topo.cloud();
        let cloud = Some(CloudCandidate {
            node: cloud_id,
            rtt: self.topo.rtt(node, cloud_id),
            est: self.estimate(node, task.service, self.class_of(cloud_id)),
        });

        DecisionContext {
            node,
            is_gateway,
            budget: FeasibilityBudget {
                deadline: task.deadline,
                elapsed: now - task.offloaded_at,
                return_delay: i.elapsed_path,
            },
            self_free: slots.free() > 0,
            self_est,
            self_wait,
            peers,
            own_gateway,
            networks,
            cloud,
        }
    }

    fn execute_or_queue(&mut self, node: NodeId, id: TaskId) {
        let admitted = self.nodes[node.index()]
            .slots
            .as_mut()
            .expect("compute node")
            .admit();
        if admitted {
            self.after_slot_change(node);
            self.start(node, id);
        } else {
            self.counters.queued += 1;
            self.nodes[node.index()].queue.push_back(id);
        }
    }

    /// Slot already taken: fetch the input if needed, then run.
    fn start(&mut self, node: NodeId, id: TaskId) {
        let ts = &self.tasks[id.0 as usize];
        if ts.params.inline_input {
            self.begin_exec(node, id);
            return;
        }
        let user = ts.task.origin_user;
        let name = self
            .topo
            .node(user)
            .prefix
            .child("input")
            .child(&format!("{:016x}", ts.task.input_hash));
        let lifetime = (ts.task.absolute_deadline() + self.margin).saturating_sub(self.now());
        let params = AppParams {
            input_size: ts.task.input_size,
            ..AppParams::default()
        };
        let i = Box::new(Interest {
            name: name.clone(),
            forwarding_hint: None,
            params,
            nonce: self.nonce(),
            wire_size: self.header,
            lifetime,
            class: TrafficClass::InputFetch,
            task: None,
            elapsed_path: SimTime::ZERO,
            payload: Payload::None,
        });
        self.nodes[node.index()]
            .awaiting_input
            .entry(name)
            .or_default()
            .push(id);
        self.express(node, i);
    }

    fn begin_exec(&mut self, node: NodeId, id: TaskId) {
        let now = self.now();
        let ts = &self.tasks[id.0 as usize];
        let svc = &self.services[ts.task.service.index()];
        let fraction = match svc.exec_fraction {
            Some(f) => f,
            None => {
                let [lo, hi] = self.cfg.compute.exec_fraction;
                self.exec_rng.uniform(lo, hi)
            }
        };
        let scale = self.nodes[node.index()].exec_scale;
        let dur = exec_time(ts.task.deadline, fraction, scale);
        let inline = ts.params.inline_input;
        let (service, hash, name) = (ts.task.service, ts.task.input_hash, ts.name.clone());
        let end = now + dur;
        self.nodes[node.index()].running.insert((end, id));
        self.sched.schedule(end, Event::ExecDone { node, task: id });
        let ts = &mut self.tasks[id.0 as usize];
        ts.exec_node = Some(node);
        ts.started = Some(now);
        if !inline {
            let thunk = thunk_name(&self.topo.node(node).prefix, splitmix64(hash ^ id.0));
            let ttc = self.estimate(node, service, self.class_of(node));
            let size = self.cfg.task.receipt_size_bytes;
            let d = Data {
                name,
                payload_size: size,
                wire_size: self.header + size,
                signed: true,
                freshness: SimTime::ZERO,
                class: TrafficClass::ResultReturn,
                receipt: Some(TaskReceipt { ttc, thunk }),
            };
            self.produce(node, d);
        }
    }

    fn on_exec_done(&mut self, node: NodeId, id: TaskId) {
        let now = self.now();
        let (service, inline, name) = {
            let ts = &self.tasks[id.0 as usize];
            (ts.task.service, ts.params.inline_input, ts.name.clone())
        };
        let alpha = self.cfg.profile.ewma_alpha;
        {
            let st = &mut self.nodes[node.index()];
            let entry = *st
                .running
                .iter()
                .find(|(_, t)| *t == id)
                .expect("running execution");
            st.running.remove(&entry);
            let slots = st.slots.as_mut().expect("compute node");
            slots.release();
            let class = slots.hardware_class;
            let dur = entry.0 - self.tasks[id.0 as usize].started.expect("started");
            st.profiles.record(service, class, dur, alpha);
        }
        if inline {
            let d = self.result_data(name, TrafficClass::ResultReturn);
            self.produce(node, d);
        } else {
            let ts = &self.tasks[id.0 as usize];
            let thunk = thunk_name(
                &self.topo.node(node).prefix,
                splitmix64(ts.task.input_hash ^ id.0),
            );
            let st = &mut self.nodes[node.index()];
            if st.waiting_thunks.remove(&thunk) {
                let d = self.result_data(thunk, TrafficClass::ResultReturn);
                self.produce(node, d);
            } else {
                st.ready_thunks.insert(thunk);
            }
        }
        self.drain_queue(node, now);
        self.after_slot_change(node);
    }

    fn drain_queue(&mut self, node: NodeId, now: SimTime) {
        loop {
            let st = &mut self.nodes[node.index()];
            if st.slots.as_ref().is_none_or(|s| s.free() == 0) {
                return;
            }
            let Some(id) = st.queue.pop_front() else {
                return;
            };
            let live = st.fwd.pit.has_live(&self.tasks[id.0 as usize].name, now);
            if !live {
                continue;
            }
            st.slots.as_mut().expect("compute node").admit();
            self.start(node, id);
        }
    }

    fn after_slot_change(&mut self, node: NodeId) {
        if !self.sync_on || !self.topo.node(node).role.is_edge_compute() {
            return;
        }
        let st = &self.nodes[node.index()];
        let util = st.slots.as_ref().expect("compute node").utilization();
        if should_notify(self.cfg.sync.notify_threshold, st.last_broadcast_util, util) {
            self.broadcast_intra(node);
        }
    }

    // ---- synchronization ----

    fn tick_intra(&mut self, net: EdgeNetworkId) {
        let members = self.topo.network(net).compute.clone();
        for m in members {
            self.broadcast_intra(m);
        }
    }

    fn broadcast_intra(&mut self, from: NodeId) {
        let now = self.now();
        let net = self.topo.node(from).network.expect("edge node");
        let st = &mut self.nodes[from.index()];
        let slots = st.slots.as_ref().expect("compute node");
        let rec = IntraSyncRecord::from_state(from, slots.free(), slots.capacity(), &st.profiles, now);
        st.last_broadcast_util = slots.utilization();
        let wire = self.sizes.intra(rec.profiles.len());
        let peers: Vec<NodeId> = self
            .topo
            .network(net)
            .compute
            .iter()
            .copied()
            .filter(|p| *p != from)
            .collect();
        for p in peers {
            let name = self.sync_name(&self.topo.node(p).prefix.clone(), from);
            let i = Box::new(Interest {
                name: name.clone(),
                forwarding_hint: None,
                params: AppParams::default(),
                nonce: self.nonce(),
                wire_size: wire,
                lifetime: SimTime::from_ms(self.cfg.sync.intra_period_ms),
                class: TrafficClass::SyncTier1,
                task: None,
                elapsed_path: SimTime::ZERO,
                payload: Payload::Intra(Box::new(rec.clone())),
            });
            self.nodes[from.index()].sync_pending.insert(name, (p, now));
            self.express(from, i);
        }
    }

    fn tick_inter(&mut self) {
        let now = self.now();
        let nets: Vec<(EdgeNetworkId, NodeId)> =
            self.topo.networks().iter().map(|n| (n.id, n.eg)).collect();
        for &(net, eg) in &nets {
            let st = &self.nodes[eg.index()];
            let slots = st.slots.as_ref().expect("gateway slots");
            let rec = gateway_summary(net, eg, slots.free(), slots.capacity(), &st.view, now);
            let wire = self.sizes.inter(rec.stats.len());
            for &(other, _) in nets.iter().filter(|(n, _)| *n != net) {
                let prefix = self.topo.network(other).gateway_prefix.clone();
                let name = self.sync_name(&prefix, eg);
                let peer = self.topo.network(other).eg;
                let i = Box::new(Interest {
                    name: name.clone(),
                    forwarding_hint: None,
                    params: AppParams::default(),
                    nonce: self.nonce(),
                    wire_size: wire,
                    lifetime: SimTime::from_ms(self.cfg.sync.inter_period_ms),
                    class: TrafficClass::SyncTier2,
                    task: None,
                    elapsed_path: SimTime::ZERO,
                    payload: Payload::Inter(Box::new(rec.clone())),
                });
                self.nodes[eg.index()].sync_pending.insert(name, (peer, now));
                self.express(eg, i);
            }
        }
    }

    fn sync_name(&mut self, prefix: &Name, from: NodeId) -> Name {
        self.sync_seq += 1;
        prefix
            .child("sync")
            .child(&format!("n{}", from.0))
            .child(&self.sync_seq.to_string())
    }

    fn on_sync_interest(&mut self, node: NodeId, i: Box<Interest>) {
        let class = i.class;
        let st = &mut self.nodes[node.index()];
        match i.payload {
            Payload::Intra(rec) => {
                st.view.apply_intra(*rec);
            }
            Payload::Inter(rec) => {
                st.view.apply_inter(*rec);
            }
            Payload::None => {}
        }
        let ack = Data {
            name: i.name.clone(),
            payload_size: 0,
            wire_size: self.header,
            signed: true,
            freshness: SimTime::ZERO,
            class,
            receipt: None,
        };
        self.produce(node, ack);
    }

    // ---- report ----

    fn finish(self, seed: u64) -> RunOutput {
        let outcomes: Vec<TaskOutcome> = self
            .tasks
            .iter()
            .map(|ts| {
                let (outcome, completed_at) = ts.outcome.unwrap_or((Outcome::Dropped, None));
                let location = ts.exec_node.map(|n| {
                    let node = self.topo.node(n);
                    match node.network {
                        None => LocationClass::Cloud,
                        Some(net) if net == ts.task.home_network => LocationClass::HomeEdge,
                        Some(_) => LocationClass::CrossEdge,
                    }
                });
                TaskOutcome {
                    task: ts.task.id,
                    service: ts.task.service,
                    category: ts.task.category,
                    deadline: ts.task.deadline,
                    offloaded_at: ts.task.offloaded_at,
                    input_size: ts.task.input_size,
                    completed_at,
                    outcome,
                    executed_at: ts.exec_node,
                    location,
                    redirects: ts.redirects,
                }
            })
            .collect();

        let probes: Vec<(String, Category, ServiceId)> = match &self.cfg.metrics.probe_services {
            Some(names) => names
                .iter()
                .filter_map(|n| self.services.iter().find(|s| &s.name == n))
                .map(|s| (s.name.clone(), s.category, s.id))
                .collect(),
            None => default_probes(&self.services, &self.users)
                .into_iter()
                .map(|id| {
                    let s = &self.services[id.index()];
                    (s.name.clone(), s.category, s.id)
                })
                .collect(),
        };
        let win = SimTime::from_secs(self.cfg.metrics.reliability_window_s);
        let start = match self.cfg.metrics.reliability_window_start_s {
            Some(s) => SimTime::from_secs(s),
            None => self.arrivals_end.saturating_sub(win).scale(0.5),
        };
        let mut counters = self.counters.clone();
        for n in &self.nodes {
            counters.cs_hits += n.fwd.counters.cs_hits;
        }
        let report = build_report(ReportInputs {
            outcomes: &outcomes,
            ledger: &self.ledger,
            include_results: self.cfg.metrics.include_result_return,
            probes: &probes,
            window: (start, start + win),
            counters,
            events: self.sched.stats().processed,
            end_time: self.sched.now(),
        });
        RunOutput {
            seed,
            report,
            outcomes,
            services: self.services,
            node_labels: self.topo.nodes().iter().map(|n| n.label.clone()).collect(),
        }
    }
}

/// Policy-independent sanity helper used by tests: whether the policy
/// consults resource views.
pub fn policy_uses_views(kind: PolicyKind) -> bool {
    kind.uses_sync()
}
