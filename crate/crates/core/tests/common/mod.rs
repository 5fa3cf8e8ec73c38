//! Oracles and generators shared by the integration tests and the
//! acceptance runner.
#![allow(dead_code)]

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use edgesim::config::{
    ExperimentConfig, ExplicitLink, ExplicitNetwork, ExplicitNode, ExplicitTopology, LoadKind,
    PolicyKind,
};
use edgesim::engine::SimTime;
use edgesim::metrics::TrafficClass;
use edgesim::ndn::{
    AppParams, Data, FaceId, Fib, FibEntry, Forwarder, Interest, InterestAction, Name, Payload,
    LOCAL_FACE,
};
use edgesim::policy::{
    Candidate, CloudCandidate, CloudPreference, DecisionContext, FeasibilityBudget,
    NetworkCandidate, PlacementDecision,
};
use edgesim::topology::{build_topology, EdgeNetworkId, NodeId, NodeRole, Topology};
use edgesim::sim::RunOutput;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn ms(v: f64) -> SimTime {
    SimTime::from_ms(v)
}

fn name(s: &str) -> Name {
    Name::parse(s).unwrap()
}

// ---------------------------------------------------------------------------
// shortest paths

/// Random single-network topology of at most 10 nodes.
pub fn random_topology(r: &mut ChaCha8Rng) -> ExplicitTopology {
    let ens = r.random_range(1..=3);
    let routers = r.random_range(0..=2);
    let users = r.random_range(1..=3);
    let mut nodes = vec![("EG".to_string(), NodeRole::Eg)];
    nodes.extend((1..=ens).map(|i| (format!("EN{i}"), NodeRole::En)));
    nodes.extend((1..=routers).map(|i| (format!("R{i}"), NodeRole::Router)));
    nodes.push(("CLOUD".to_string(), NodeRole::Cloud));
    let infra = nodes.len();
    nodes.extend((1..=users).map(|i| (format!("U{i}"), NodeRole::User)));

    let mut pairs = BTreeSet::new();
    let mut order: Vec<usize> = (0..infra).collect();
    for i in (1..order.len()).rev() {
        let j = r.random_range(0..=i);
        order.swap(i, j);
    }
    for i in 1..infra {
        let j = r.random_range(0..i);
        let (a, b) = (order[i], order[j]);
        pairs.insert((a.min(b), a.max(b)));
    }
    for a in 0..infra {
        for b in a + 1..infra {
            if r.random_bool(0.25) {
                pairs.insert((a, b));
            }
        }
    }
    let compute: Vec<usize> = (0..=ens).collect();
    for u in infra..nodes.len() {
        let k = r.random_range(1..=2.min(compute.len()));
        let mut picked = BTreeSet::new();
        while picked.len() < k {
            picked.insert(compute[r.random_range(0..compute.len())]);
        }
        for c in picked {
            pairs.insert((c, u));
        }
    }
    ExplicitTopology {
        networks: vec![ExplicitNetwork {
            label: "n".into(),
            prefix: "/test/net".into(),
            gateway_prefix: "/Gateway/test/net".into(),
        }],
        nodes: nodes
            .iter()
            .map(|(l, role)| ExplicitNode {
                label: l.clone(),
                role: *role,
                network: (!matches!(role, NodeRole::Cloud | NodeRole::Router)).then(|| "n".into()),
                name: None,
            })
            .collect(),
        links: pairs
            .into_iter()
            .map(|(a, b)| ExplicitLink {
                a: nodes[a].0.clone(),
                b: nodes[b].0.clone(),
                delay_ms: f64::from(r.random_range(1u32..=6)),
            })
            .collect(),
    }
}

/// Every simple path from `a` to `b` whose interior avoids user devices.
fn simple_paths(adj: &[Vec<(usize, u64)>], user: &[bool], a: usize, b: usize) -> Vec<(u64, Vec<usize>)> {
    fn go(
        adj: &[Vec<(usize, u64)>],
        user: &[bool],
        b: usize,
        path: &mut Vec<usize>,
        cost: u64,
        out: &mut Vec<(u64, Vec<usize>)>,
    ) {
        let cur = *path.last().unwrap();
        if cur == b {
            out.push((cost, path.clone()));
            return;
        }
        if path.len() > 1 && user[cur] {
            return;
        }
        for &(nb, d) in &adj[cur] {
            if !path.contains(&nb) {
                path.push(nb);
                go(adj, user, b, path, cost + d, out);
                path.pop();
            }
        }
    }
    let mut out = Vec::new();
    go(adj, user, b, &mut vec![a], 0, &mut out);
    out
}

/// Compares delays, hop counts and chosen paths against exhaustive enumeration.
pub fn check_paths(ex: &ExplicitTopology) -> Result<(), String> {
    let cfg = edgesim::config::TopologyConfig {
        explicit: Some(ex.clone()),
        ..Default::default()
    };
    let topo = build_topology(&cfg, 0).map_err(|e| format!("build: {e}"))?;
    let n = topo.len();
    let id = |l: &str| topo.find(l).unwrap().index();
    let mut adj = vec![Vec::new(); n];
    for l in &ex.links {
        let (a, b) = (id(&l.a), id(&l.b));
        let d = SimTime::from_ms(l.delay_ms).as_us();
        adj[a].push((b, d));
        adj[b].push((a, d));
    }
    let user: Vec<bool> = (0..n).map(|i| topo.nodes()[i].role == NodeRole::User).collect();
    for a in 0..n {
        for b in 0..n {
            let (na, nb) = (NodeId(a as u32), NodeId(b as u32));
            if a == b {
                if topo.one_way_delay(na, nb) != SimTime::ZERO || topo.rtt(na, nb) != SimTime::ZERO {
                    return Err(format!("self delay nonzero at {a}"));
                }
                continue;
            }
            let mut all = simple_paths(&adj, &user, a, b);
            all.sort();
            let Some((best, best_path)) = all.first().cloned() else {
                if !topo.one_way_delay(na, nb).is_infinite() {
                    return Err(format!("{a}->{b}: no path but finite delay"));
                }
                continue;
            };
            let got = topo.one_way_delay(na, nb).as_us();
            if got != best {
                return Err(format!("{a}->{b}: delay {got} vs brute force {best}"));
            }
            if topo.rtt(na, nb).as_us() != 2 * best {
                return Err(format!("{a}->{b}: rtt is not twice the delay"));
            }
            if topo.one_way_delay(nb, na).as_us() != best {
                return Err(format!("{a}->{b}: delay not symmetric"));
            }
            let path: Vec<usize> = topo.path(na, nb).iter().map(|x| x.index()).collect();
            if path != best_path {
                return Err(format!("{a}->{b}: path {path:?} vs {best_path:?}"));
            }
            if topo.hop_count(na, nb) as usize != best_path.len() - 1 {
                return Err(format!("{a}->{b}: hop count mismatch"));
            }
        }
    }
    for en in (0..n).map(|i| NodeId(i as u32)) {
        if !topo.node(en).role.is_edge_compute() {
            continue;
        }
        let peers = topo.direct_link_peers(en);
        if peers.contains(&en) {
            return Err(format!("{en:?} is its own direct peer"));
        }
        for p in peers {
            if !topo.direct_link_peers(p).contains(&en) {
                return Err(format!("direct peers not symmetric: {en:?} {p:?}"));
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// placement

pub fn random_context(r: &mut ChaCha8Rng) -> DecisionContext {
    let t = |r: &mut ChaCha8Rng, lo: u32, hi: u32| ms(f64::from(r.random_range(lo..=hi)));
    let me = NodeId(1);
    let mut ids: Vec<u32> = (2..10).collect();
    let npeers = r.random_range(0..=5);
    let mut peers = Vec::new();
    for _ in 0..npeers {
        let k = r.random_range(0..ids.len());
        let id = ids.swap_remove(k);
        peers.push(Candidate {
            node: NodeId(id),
            prefix: name(&format!("/test/net/EN{id}")),
            rtt: ms(f64::from(2 * r.random_range(1u32..=10))),
            free_slots: r.random_range(0..=2),
            est: t(r, 5, 60),
            direct_peer: r.random_bool(0.3),
        });
    }
    let is_gateway = r.random_bool(0.3);
    let own_gateway = if is_gateway || r.random_bool(0.1) {
        None
    } else {
        let gw = if peers.is_empty() || r.random_bool(0.2) {
            NodeId(20)
        } else {
            peers[r.random_range(0..peers.len())].node
        };
        Some((EdgeNetworkId(0), gw, name("/Gateway/test/net")))
    };
    let networks = if is_gateway {
        (0..r.random_range(0..=3))
            .map(|k| NetworkCandidate {
                network: EdgeNetworkId(k + 1),
                gateway: NodeId(30 + u32::from(k)),
                hint: name(&format!("/Gateway/other{k}")),
                rtt_to_gateway: t(r, 10, 40),
                rtt_to_closest_free: if r.random_bool(0.25) {
                    SimTime::INFINITY
                } else {
                    t(r, 0, 8)
                },
                est: t(r, 5, 60),
            })
            .collect()
    } else {
        Vec::new()
    };
    let cloud = r.random_bool(0.9).then(|| CloudCandidate {
        node: NodeId(99),
        rtt: t(r, 60, 140),
        est: t(r, 5, 60),
    });
    DecisionContext {
        node: me,
        is_gateway,
        budget: FeasibilityBudget {
            deadline: t(r, 10, 1000),
            elapsed: t(r, 0, 20),
            return_delay: t(r, 0, 5),
        },
        self_free: r.random_bool(0.5),
        self_est: t(r, 5, 60),
        self_wait: t(r, 0, 80),
        peers,
        own_gateway,
        networks,
        cloud,
    }
}

/// The furthest-feasible rule written as a ranking over every option.
pub fn oracle_cledge(ctx: &DecisionContext, pref: CloudPreference) -> PlacementDecision {
    let b = &ctx.budget;
    let fits = |rtt: SimTime, est: SimTime| {
        !rtt.is_infinite()
            && !est.is_infinite()
            && b.elapsed.as_us() + rtt.as_us() + est.as_us() + b.return_delay.as_us()
                <= b.deadline.as_us()
    };
    let cloud_ok = ctx.cloud.is_some_and(|c| fits(c.rtt, c.est));
    if pref == CloudPreference::AnyNode && cloud_ok {
        return PlacementDecision::ForwardToCloud;
    }

    // (tier, -rtt, node): direct-link peers only after everything else
    let mut opts: Vec<((u8, Reverse<SimTime>, NodeId), PlacementDecision)> = Vec::new();
    if ctx.self_free && fits(SimTime::ZERO, ctx.self_est) {
        opts.push(((0, Reverse(SimTime::ZERO), ctx.node), PlacementDecision::ExecuteHere));
    }
    for c in &ctx.peers {
        if c.free_slots > 0 && fits(c.rtt, c.est) {
            opts.push((
                (u8::from(c.direct_peer), Reverse(c.rtt), c.node),
                PlacementDecision::ForwardToEn {
                    target: c.node,
                    hint: c.prefix.clone(),
                },
            ));
        }
    }
    if let Some((_, d)) = opts.into_iter().min_by_key(|(k, _)| *k) {
        return d;
    }

    if !ctx.is_gateway {
        if let Some((net, gw, hint)) = &ctx.own_gateway {
            return PlacementDecision::ForwardToNetwork {
                network: *net,
                gateway: *gw,
                hint: hint.clone(),
            };
        }
    } else {
        if cloud_ok {
            return PlacementDecision::ForwardToCloud;
        }
        let best = ctx
            .networks
            .iter()
            .filter(|n| !n.rtt_to_closest_free.is_infinite())
            .filter(|n| fits(n.rtt_to_gateway + n.rtt_to_closest_free, n.est))
            .min_by_key(|n| (n.rtt_to_gateway + n.rtt_to_closest_free, n.network));
        if let Some(n) = best {
            return PlacementDecision::ForwardToNetwork {
                network: n.network,
                gateway: n.gateway,
                hint: n.hint.clone(),
            };
        }
    }

    // expected completion, ties to the earlier of self, gateway, cloud
    let mut be: Vec<((SimTime, u8), NodeId)> = vec![(
        (
            ctx.self_est + if ctx.self_free { SimTime::ZERO } else { ctx.self_wait },
            0,
        ),
        ctx.node,
    )];
    if !ctx.is_gateway {
        if let Some((_, gw, _)) = &ctx.own_gateway {
            if let Some(g) = ctx.peers.iter().find(|c| c.node == *gw) {
                let wait = if g.free_slots > 0 { SimTime::ZERO } else { g.est };
                be.push(((g.rtt + g.est + wait, 1), g.node));
            }
        }
    }
    if let Some(c) = ctx.cloud {
        be.push(((c.rtt + c.est, 2), c.node));
    }
    let target = be.into_iter().min_by_key(|(k, _)| *k).unwrap().1;
    PlacementDecision::BestEffort { target }
}

// ---------------------------------------------------------------------------
// PIT / CS fuzz over consumer - router - producer

const CS_CAP: usize = 2;
const LINK: SimTime = SimTime::from_us(1_000);

type Key = (String, u8, bool);

#[derive(Default)]
struct ModelPit {
    entries: HashMap<Key, (BTreeSet<FaceId>, Vec<u64>, SimTime)>,
}

#[derive(Default)]
struct ModelCs {
    /// Least recent first: (name, inserted_at, freshness).
    items: Vec<(String, SimTime, SimTime)>,
}

struct ModelNode {
    pit: ModelPit,
    cs: ModelCs,
    delivered: u64,
    data_out: u64,
}

enum Expect {
    Hit,
    Aggregated,
    Loop,
    Forward(FaceId),
    Deliver,
    NoRoute,
}

fn fib_model(node: usize, target: &str) -> Option<FaceId> {
    let svc = target.starts_with("/svc") || target.starts_with("/alt");
    let other = target.starts_with("/other");
    match node {
        0 if svc || other => Some(1),
        1 if svc => Some(2),
        2 if svc => Some(LOCAL_FACE),
        _ => None,
    }
}

fn build_fib(node: usize) -> Fib {
    let mut fib = Fib::default();
    let routes: &[(&str, FaceId)] = match node {
        0 => &[("/svc", 1), ("/alt", 1), ("/other", 1)],
        1 => &[("/svc", 2), ("/alt", 2)],
        _ => &[("/svc", LOCAL_FACE), ("/alt", LOCAL_FACE)],
    };
    for (p, f) in routes {
        fib.insert(FibEntry {
            prefix: name(p),
            faces: vec![(*f, 1)],
        });
    }
    fib
}

/// (peer node, face at the peer) behind `face` of `node`.
fn link(node: usize, face: FaceId) -> (usize, FaceId) {
    match (node, face) {
        (0, 1) => (1, 1),
        (1, 1) => (0, 1),
        (1, 2) => (2, 1),
        (2, 1) => (1, 2),
        _ => panic!("no face {face} at {node}"),
    }
}

#[derive(Clone)]
struct Sent {
    interest: Interest,
    key: Key,
}

enum Ev {
    Interest(usize, FaceId, Sent),
    Data(usize, Data),
    Produce(Data),
}

struct Fuzz {
    fwd: Vec<Forwarder>,
    model: Vec<ModelNode>,
    queue: BinaryHeap<Reverse<(SimTime, u64)>>,
    events: HashMap<u64, Ev>,
    seq: u64,
    now: SimTime,
    /// Names the consumer application still waits for.
    waiting: HashMap<String, u32>,
}

impl Fuzz {
    fn new() -> Self {
        Fuzz {
            fwd: (0..3).map(|n| Forwarder::new(build_fib(n), CS_CAP)).collect(),
            model: (0..3)
                .map(|_| ModelNode {
                    pit: ModelPit::default(),
                    cs: ModelCs::default(),
                    delivered: 0,
                    data_out: 0,
                })
                .collect(),
            queue: BinaryHeap::new(),
            events: HashMap::new(),
            seq: 0,
            now: SimTime::ZERO,
            waiting: HashMap::new(),
        }
    }

    fn push(&mut self, at: SimTime, ev: Ev) {
        self.seq += 1;
        self.queue.push(Reverse((at, self.seq)));
        self.events.insert(self.seq, ev);
    }

    fn expect_interest(&mut self, node: usize, face: FaceId, s: &Sent) -> Expect {
        let now = self.now;
        let m = &mut self.model[node];
        let nm = s.key.0.clone();
        if let Some(pos) = m.cs.items.iter().position(|x| x.0 == nm) {
            let (_, at, fresh) = m.cs.items[pos].clone();
            m.cs.items.remove(pos);
            if now.saturating_sub(at) <= fresh {
                m.cs.items.push((nm, at, fresh));
                return Expect::Hit;
            }
        }
        m.pit.entries.retain(|k, v| k.0 != nm || v.2 > now);
        if let Some(e) = m.pit.entries.get_mut(&s.key) {
            if e.1.contains(&s.interest.nonce) {
                return Expect::Loop;
            }
            e.0.insert(face);
            e.1.push(s.interest.nonce);
            return Expect::Aggregated;
        }
        m.pit.entries.insert(
            s.key.clone(),
            (BTreeSet::from([face]), vec![s.interest.nonce], now + s.interest.lifetime),
        );
        let target = s
            .interest
            .forwarding_hint
            .as_ref()
            .map(|h| h.to_string())
            .unwrap_or_else(|| nm.clone());
        match fib_model(node, &target) {
            None => Expect::NoRoute,
            Some(LOCAL_FACE) => Expect::Deliver,
            Some(f) => Expect::Forward(f),
        }
    }

    fn on_interest(&mut self, node: usize, face: FaceId, s: Sent) -> Result<(), String> {
        let expect = self.expect_interest(node, face, &s);
        let got = self.fwd[node].on_interest(&s.interest, face, self.now);
        let tag = format!("node {node} t={:?} {}", self.now, s.key.0);
        match (expect, got) {
            (Expect::Hit, InterestAction::CsHit(d)) => {
                if d.name != s.interest.name {
                    return Err(format!("{tag}: CS returned {}", d.name));
                }
                self.send_data(node, face, d);
            }
            (Expect::Aggregated, InterestAction::Aggregated) => {}
            (Expect::Loop, InterestAction::Loop) => {}
            (Expect::NoRoute, InterestAction::NoRoute) => {}
            (Expect::Deliver, InterestAction::Deliver) => {
                self.model[node].delivered += 1;
                let d = Data {
                    name: s.interest.name.clone(),
                    payload_size: 10,
                    wire_size: 74,
                    signed: true,
                    freshness: SimTime::from_us(s.interest.nonce % 3 * 4_000),
                    class: TrafficClass::TaskForwarding,
                    receipt: None,
                };
                let at = self.now + SimTime::from_us(s.interest.nonce % 5 * 1_000);
                self.push(at, Ev::Produce(d));
            }
            (Expect::Forward(f), InterestAction::Forward(g)) if f == g => {
                let (peer, pf) = link(node, f);
                self.push(self.now + LINK, Ev::Interest(peer, pf, s));
            }
            (_, got) => return Err(format!("{tag}: unexpected {got:?}")),
        }
        Ok(())
    }

    fn send_data(&mut self, node: usize, face: FaceId, d: Data) {
        if face == LOCAL_FACE {
            self.consume(d);
        } else {
            let (peer, _) = link(node, face);
            self.push(self.now + LINK, Ev::Data(peer, d));
        }
    }

    fn consume(&mut self, d: Data) {
        let k = d.name.to_string();
        if let Some(n) = self.waiting.get_mut(&k) {
            *n = n.saturating_sub(1);
        }
    }

    fn on_data(&mut self, node: usize, d: Data) -> Result<(), String> {
        let now = self.now;
        let nm = d.name.to_string();
        let m = &mut self.model[node];
        let mut want = BTreeSet::new();
        m.pit.entries.retain(|k, v| {
            if k.0 == nm {
                if v.2 > now {
                    want.extend(v.0.iter().copied());
                }
                false
            } else {
                true
            }
        });
        if !want.is_empty() && d.freshness > SimTime::ZERO {
            m.cs.items.retain(|x| x.0 != nm);
            m.cs.items.push((nm.clone(), now, d.freshness));
            while m.cs.items.len() > CS_CAP {
                m.cs.items.remove(0);
            }
        }
        m.data_out += want.len() as u64;
        let got = self.fwd[node].on_data(&d, now);
        let got_set = got.clone().unwrap_or_default();
        if got_set != want {
            return Err(format!("node {node} t={now:?} {nm}: data faces {got_set:?} vs {want:?}"));
        }
        if got.is_some() && want.is_empty() {
            return Err(format!("node {node}: empty face set reported as solicited"));
        }
        for f in got_set {
            self.send_data(node, f, d.clone());
        }
        Ok(())
    }

    fn advance(&mut self, until: SimTime) -> Result<(), String> {
        while let Some(Reverse((at, id))) = self.queue.peek().copied() {
            if at > until {
                break;
            }
            self.queue.pop();
            self.now = at;
            match self.events.remove(&id).unwrap() {
                Ev::Interest(n, f, s) => self.on_interest(n, f, s)?,
                Ev::Data(n, d) => self.on_data(n, d)?,
                Ev::Produce(d) => self.on_data(2, d)?,
            }
        }
        self.now = until;
        Ok(())
    }

    fn check_tables(&self) -> Result<(), String> {
        for (n, (f, m)) in self.fwd.iter().zip(&self.model).enumerate() {
            if f.pit.len() != m.pit.entries.len() {
                return Err(format!(
                    "node {n}: PIT holds {} entries, model {}",
                    f.pit.len(),
                    m.pit.entries.len()
                ));
            }
            if f.cs.len() != m.cs.items.len() {
                return Err(format!("node {n}: CS size {} vs model {}", f.cs.len(), m.cs.items.len()));
            }
            let c = &f.counters;
            if c.pit_created != c.forwarded + c.no_route + m.delivered {
                return Err(format!("node {n}: PIT conservation broken {c:?}"));
            }
            if c.data_out != m.data_out {
                return Err(format!("node {n}: data_out {} vs model {}", c.data_out, m.data_out));
            }
        }
        Ok(())
    }
}

/// Random Interest traffic through three forwarders, checked step by step
/// against a reference model of the PIT and CS.
pub fn pit_cs_fuzz(seed: u64, steps: usize) -> Result<(), String> {
    let mut r = rng(seed);
    let mut fz = Fuzz::new();
    let mut history: Vec<Sent> = Vec::new();
    let names = ["/svc/0", "/svc/1", "/svc/2", "/other/0"];
    for _ in 0..steps {
        let roll = r.random_range(0..100);
        if roll < 55 {
            let nm = names[r.random_range(0..names.len())];
            let dl = r.random_range(0..3u8);
            let hinted = r.random_bool(0.2);
            let nonce = match history.iter().rev().find(|s| s.key.0 == nm && s.key.1 == dl && s.key.2 == hinted) {
                Some(prev) if r.random_bool(0.15) => prev.interest.nonce,
                _ => r.random::<u64>(),
            };
            let s = Sent {
                interest: Interest {
                    name: name(nm),
                    forwarding_hint: hinted.then(|| name("/alt/producer")),
                    params: AppParams {
                        deadline: ms(10.0 * f64::from(dl + 1)),
                        ..AppParams::default()
                    },
                    nonce,
                    wire_size: 100,
                    lifetime: ms(f64::from(r.random_range(2u32..=30))),
                    class: TrafficClass::TaskForwarding,
                    task: None,
                    elapsed_path: SimTime::ZERO,
                    payload: Payload::None,
                },
                key: (nm.to_string(), dl, hinted),
            };
            *fz.waiting.entry(nm.to_string()).or_default() += 1;
            history.push(s.clone());
            fz.on_interest(0, LOCAL_FACE, s)?;
        } else if roll < 65 && !history.is_empty() {
            // replay an earlier Interest straight into the router
            let s = history[r.random_range(0..history.len())].clone();
            fz.on_interest(1, 1, s)?;
        } else {
            let dt = SimTime::from_us(r.random_range(0..10_000));
            fz.advance(fz.now + dt)?;
        }
        fz.check_tables()?;
    }
    fz.advance(fz.now + ms(1_000.0))?;
    fz.check_tables()
}

// ---------------------------------------------------------------------------
// whole runs

pub fn small_config(policy: PolicyKind, load: LoadKind, duration_s: f64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.policy.kind = policy;
    cfg.workload.load = load;
    cfg.workload.duration_s = duration_s;
    cfg
}

pub fn check_conservation(out: &RunOutput) -> Result<(), String> {
    let r = &out.report;
    if r.generated != r.on_time + r.late + r.dropped {
        return Err(format!(
            "seed {}: generated {} != {} + {} + {}",
            out.seed, r.generated, r.on_time, r.late, r.dropped
        ));
    }
    if r.generated as usize != out.outcomes.len() {
        return Err(format!("seed {}: outcome count mismatch", out.seed));
    }
    Ok(())
}

/// Two networks: a full mesh of three compute nodes, and a lone gateway.
pub fn mesh_config(intra_ms: f64, inter_ms: f64) -> ExperimentConfig {
    let nodes = [
        ("A-EG", NodeRole::Eg, Some("a")),
        ("A-EN1", NodeRole::En, Some("a")),
        ("A-EN2", NodeRole::En, Some("a")),
        ("A-U", NodeRole::User, Some("a")),
        ("B-EG", NodeRole::Eg, Some("b")),
        ("B-U", NodeRole::User, Some("b")),
        ("CLOUD", NodeRole::Cloud, None),
    ];
    let links = [
        ("A-EG", "A-EN1", 2.0),
        ("A-EG", "A-EN2", 2.0),
        ("A-EN1", "A-EN2", 2.0),
        ("A-U", "A-EN1", 1.0),
        ("B-U", "B-EG", 1.0),
        ("A-EG", "B-EG", 10.0),
        ("A-EG", "CLOUD", 50.0),
        ("B-EG", "CLOUD", 50.0),
    ];
    let mut cfg = ExperimentConfig::default();
    cfg.topology.explicit = Some(ExplicitTopology {
        networks: ["a", "b"]
            .iter()
            .map(|l| ExplicitNetwork {
                label: l.to_string(),
                prefix: format!("/mesh/{l}"),
                gateway_prefix: format!("/Gateway/mesh/{l}"),
            })
            .collect(),
        nodes: nodes
            .iter()
            .map(|(l, r, n)| ExplicitNode {
                label: l.to_string(),
                role: *r,
                network: n.map(str::to_string),
                name: None,
            })
            .collect(),
        links: links
            .iter()
            .map(|(a, b, d)| ExplicitLink {
                a: a.to_string(),
                b: b.to_string(),
                delay_ms: *d,
            })
            .collect(),
    });
    cfg.workload.users = 2;
    // shorter than any inter-arrival gap: no tasks, so records stay empty
    cfg.workload.duration_s = 1e-6;
    cfg.sync.intra_period_ms = intra_ms;
    cfg.sync.inter_period_ms = inter_ms;
    cfg
}

/// Sync bytes for the mesh layout in closed form: (tier 1, tier 2).
pub fn mesh_sync_bytes(cfg: &ExperimentConfig, out: &RunOutput) -> (u64, u64) {
    let s = &cfg.sync;
    let header = u64::from(cfg.packet.header_bytes);
    let max_deadline = out.services.iter().map(|x| x.deadline).max().unwrap();
    let end = SimTime::from_secs(cfg.workload.duration_s) + max_deadline + ms(cfg.pit.margin_ms);
    let ticks = |period_ms: f64| end.as_us() / ms(period_ms).as_us() + 1;
    // three members, each sending to two peers one hop away, one ack back
    let intra = u64::from(s.record_base_bytes + s.record_fixed_bytes) + header;
    let tier1 = ticks(s.intra_period_ms) * 3 * 2 * intra;
    // two gateways, one hop apart
    let inter = u64::from(s.record_base_bytes + s.inter_record_bytes) + header;
    let tier2 = ticks(s.inter_period_ms) * 2 * inter;
    (tier1, tier2)
}

pub fn sync_traffic(out: &RunOutput) -> (u64, u64) {
    let t = &out.report.traffic;
    (
        t.get(TrafficClass::SyncTier1.as_str()).copied().unwrap_or(0),
        t.get(TrafficClass::SyncTier2.as_str()).copied().unwrap_or(0),
    )
}

/// Access nodes of every user in the default layout.
pub fn access_nodes(cfg: &ExperimentConfig) -> (Topology, BTreeSet<NodeId>) {
    let topo = build_topology(&cfg.topology, cfg.workload.users).unwrap();
    let set = topo.users().map(|u| topo.access_en(u.id)).collect();
    (topo, set)
}
