//! Multi-edge-network + cloud graph, shortest-path tables and direct-link
//! adjacency.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ExplicitTopology, TopologyConfig, UserAttachment};
use crate::engine::SimTime;
use crate::ndn::Name;

#[derive(Copy, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Debug for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

#[derive(Copy, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub struct EdgeNetworkId(pub u16);

impl EdgeNetworkId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Copy, Clone, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub enum NodeRole {
    User,
    #[serde(rename = "EN")]
    En,
    #[serde(rename = "EG")]
    Eg,
    /// Transit-only hop on the path towards the cloud.
    Router,
    Cloud,
}

impl NodeRole {
    pub fn has_slots(self) -> bool {
        matches!(self, NodeRole::En | NodeRole::Eg | NodeRole::Cloud)
    }

    pub fn is_edge_compute(self) -> bool {
        matches!(self, NodeRole::En | NodeRole::Eg)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TopologyError {
    #[error("duplicate node id {0:?}")]
    DuplicateNode(String),
    #[error("duplicate network {0:?}")]
    DuplicateNetwork(String),
    #[error("link references unknown node {0:?}")]
    UnknownNode(String),
    #[error("node {node:?} references unknown network {network:?}")]
    UnknownNetwork { node: String, network: String },
    #[error("node {0:?} must belong to an edge network")]
    MissingNetwork(String),
    #[error("node {0:?} must not belong to an edge network")]
    UnexpectedNetwork(String),
    #[error("edge network {0:?} has no EG")]
    MissingEg(String),
    #[error("edge network {0:?} has more than one EG")]
    MultipleEg(String),
    #[error("topology has no Cloud node")]
    MissingCloud,
    #[error("topology has more than one Cloud node")]
    MultipleCloud,
    #[error("link {0:?} has non-positive delay")]
    NonPositiveDelay(String),
    #[error("link {0:?} connects a node to itself")]
    SelfLoop(String),
    #[error("graph is disconnected: {0:?} unreachable from the cloud")]
    Disconnected(String),
    #[error("user {0:?} has no direct link to an EN")]
    UserWithoutEn(String),
    #[error("bad name {name:?}: {reason}")]
    BadName { name: String, reason: String },
}

#[derive(Clone, Debug)]
pub struct Node {
    pub id: NodeId,
    pub label: String,
    pub role: NodeRole,
    pub network: Option<EdgeNetworkId>,
    /// Routable prefix of the node itself.
    pub prefix: Name,
}

#[derive(Clone, Debug)]
pub struct Link {
    pub a: NodeId,
    pub b: NodeId,
    pub one_way_delay: SimTime,
    /// User reaches an EN/EG over this single hop.
    pub direct_user_link: bool,
}

#[derive(Clone, Debug)]
pub struct EdgeNetwork {
    pub id: EdgeNetworkId,
    pub label: String,
    pub prefix: Name,
    pub gateway_prefix: Name,
    pub eg: NodeId,
    /// EN and EG members, ascending id.
    pub compute: Vec<NodeId>,
    pub users: Vec<NodeId>,
}

/// Neighbour entry; face ids are `index + 1` (face 0 is the local app).
#[derive(Clone, Copy, Debug)]
pub struct Adjacent {
    pub node: NodeId,
    pub delay: SimTime,
}

#[derive(Clone, Debug)]
pub struct Topology {
    nodes: Vec<Node>,
    links: Vec<Link>,
    adjacency: Vec<Vec<Adjacent>>,
    networks: Vec<EdgeNetwork>,
    cloud: NodeId,
    dist: Vec<Vec<SimTime>>,
    hops: Vec<Vec<u32>>,
    next_hop: Vec<Vec<Option<NodeId>>>,
    direct_users: Vec<BTreeSet<NodeId>>,
    user_access: HashMap<NodeId, NodeId>,
}

struct Builder {
    nodes: Vec<Node>,
    labels: HashMap<String, NodeId>,
    links: Vec<(NodeId, NodeId, SimTime, String)>,
}

impl Builder {
    fn new() -> Self {
        Builder {
            nodes: Vec::new(),
            labels: HashMap::new(),
            links: Vec::new(),
        }
    }

    fn add(
        &mut self,
        label: &str,
        role: NodeRole,
        network: Option<EdgeNetworkId>,
        prefix: Name,
    ) -> Result<NodeId, TopologyError> {
        if self.labels.contains_key(label) {
            return Err(TopologyError::DuplicateNode(label.to_string()));
        }
        let id = NodeId(self.nodes.len() as u32);
        self.nodes.push(Node {
            id,
            label: label.to_string(),
            role,
            network,
            prefix,
        });
        self.labels.insert(label.to_string(), id);
        Ok(id)
    }

    fn link(&mut self, a: &str, b: &str, delay_ms: f64) -> Result<(), TopologyError> {
        let desc = format!("{a}--{b}");
        let ia = *self
            .labels
            .get(a)
            .ok_or_else(|| TopologyError::UnknownNode(a.to_string()))?;
        let ib = *self
            .labels
            .get(b)
            .ok_or_else(|| TopologyError::UnknownNode(b.to_string()))?;
        if ia == ib {
            return Err(TopologyError::SelfLoop(desc));
        }
        if !(delay_ms.is_finite() && delay_ms > 0.0) {
            return Err(TopologyError::NonPositiveDelay(desc));
        }
        let d = SimTime::from_ms(delay_ms);
        if d == SimTime::ZERO {
            return Err(TopologyError::NonPositiveDelay(desc));
        }
        self.links.push((ia, ib, d, desc));
        Ok(())
    }
}

fn parse_name(text: &str) -> Result<Name, TopologyError> {
    Name::parse(text).map_err(|e| TopologyError::BadName {
        name: text.to_string(),
        reason: e.to_string(),
    })
}

fn cloud_prefix() -> Name {
    Name::parse("/cloud").expect("static")
}

/// Build the topology described by `cfg`. `users` is the total user count
/// for the generated layout (spread as evenly as possible over networks).
pub fn build_topology(cfg: &TopologyConfig, users: usize) -> Result<Topology, TopologyError> {
    match &cfg.explicit {
        Some(ex) => build_explicit(ex),
        None => build_generated(cfg, users),
    }
}

struct NetDraft {
    label: String,
    prefix: Name,
    gateway_prefix: Name,
}

fn build_generated(cfg: &TopologyConfig, users: usize) -> Result<Topology, TopologyError> {
    let mut b = Builder::new();
    let mut drafts = Vec::new();
    let k = cfg.ens_per_network;
    for i in 0..cfg.networks {
        let net_label = format!("net{}", i + 1);
        let prefix_text = cfg
            .network_prefixes
            .as_ref()
            .map(|p| p[i].clone())
            .unwrap_or_else(|| format!("/edge/{net_label}"));
        let prefix = parse_name(&prefix_text)?;
        let gateway_prefix = parse_name("/Gateway")?.join(&prefix);
        let nid = EdgeNetworkId(i as u16);
        for j in 1..=k {
            let name = format!("EN{j}");
            b.add(
                &format!("{net_label}/{name}"),
                NodeRole::En,
                Some(nid),
                prefix.child(&name),
            )?;
        }
        b.add(
            &format!("{net_label}/EG"),
            NodeRole::Eg,
            Some(nid),
            prefix.child("EG"),
        )?;
        let n_users = users / cfg.networks + usize::from(i < users % cfg.networks);
        for u in 1..=n_users {
            let name = format!("user{u}");
            b.add(
                &format!("{net_label}/{name}"),
                NodeRole::User,
                Some(nid),
                prefix.child(&name),
            )?;
        }
        for r in 1..cfg.cloud_hops {
            b.add(
                &format!("{net_label}/R{r}"),
                NodeRole::Router,
                None,
                parse_name(&format!("/infra/{net_label}/R{r}"))?,
            )?;
        }
        drafts.push((
            NetDraft {
                label: net_label,
                prefix,
                gateway_prefix,
            },
            n_users,
        ));
    }
    b.add("cloud", NodeRole::Cloud, None, cloud_prefix())?;

    for (i, (d, n_users)) in drafts.iter().enumerate() {
        let l = &d.label;
        let en = |j: usize| format!("{l}/EN{j}");
        let access: Vec<usize> = if k == 1 {
            b.link(&en(1), &format!("{l}/EG"), cfg.intra_delay_ms)?;
            vec![1]
        } else {
            b.link(&en(2), &format!("{l}/EG"), cfg.intra_delay_ms)?;
            for j in (1..=k).filter(|j| *j != 2) {
                b.link(&en(j), &en(2), cfg.intra_delay_ms)?;
            }
            (1..=k).filter(|j| *j != 2).collect()
        };
        for u in 1..=*n_users {
            let user = format!("{l}/user{u}");
            match cfg.user_attachment {
                UserAttachment::DualHomed => {
                    for j in &access {
                        b.link(&user, &en(*j), cfg.user_link_delay_ms)?;
                    }
                }
                UserAttachment::RoundRobin => {
                    let j = access[(u - 1) % access.len()];
                    b.link(&user, &en(j), cfg.user_link_delay_ms)?;
                }
            }
        }
        let cloud_ms = cfg
            .cloud_delay_per_network_ms
            .as_ref()
            .map(|v| v[i])
            .unwrap_or(cfg.cloud_delay_ms);
        let per_hop = cloud_ms / cfg.cloud_hops as f64;
        let mut prev = format!("{l}/EG");
        for r in 1..cfg.cloud_hops {
            let next = format!("{l}/R{r}");
            b.link(&prev, &next, per_hop)?;
            prev = next;
        }
        b.link(&prev, "cloud", per_hop)?;
    }
    for i in 0..drafts.len() {
        for j in (i + 1)..drafts.len() {
            b.link(
                &format!("{}/EG", drafts[i].0.label),
                &format!("{}/EG", drafts[j].0.label),
                cfg.eg_eg_delay_ms,
            )?;
        }
    }
    finish(b, drafts.into_iter().map(|(d, _)| d).collect())
}

fn build_explicit(ex: &ExplicitTopology) -> Result<Topology, TopologyError> {
    let mut b = Builder::new();
    let mut drafts = Vec::new();
    let mut net_ids = HashMap::new();
    for (i, n) in ex.networks.iter().enumerate() {
        if net_ids.insert(n.label.clone(), EdgeNetworkId(i as u16)).is_some() {
            return Err(TopologyError::DuplicateNetwork(n.label.clone()));
        }
        drafts.push(NetDraft {
            label: n.label.clone(),
            prefix: parse_name(&n.prefix)?,
            gateway_prefix: parse_name(&n.gateway_prefix)?,
        });
    }
    for n in &ex.nodes {
        let network = match (&n.network, n.role) {
            (Some(net), NodeRole::Cloud | NodeRole::Router) => {
                let _ = net;
                return Err(TopologyError::UnexpectedNetwork(n.label.clone()));
            }
            (None, NodeRole::Cloud | NodeRole::Router) => None,
            (None, _) => return Err(TopologyError::MissingNetwork(n.label.clone())),
            (Some(net), _) => Some(*net_ids.get(net).ok_or_else(|| {
                TopologyError::UnknownNetwork {
                    node: n.label.clone(),
                    network: net.clone(),
                }
            })?),
        };
        let short = n.name.clone().unwrap_or_else(|| {
            n.label.rsplit('/').next().unwrap_or(&n.label).to_string()
        });
        let prefix = match n.role {
            NodeRole::Cloud => cloud_prefix(),
            NodeRole::Router => parse_name(&format!("/infra/{short}"))?,
            _ => {
                let net = &drafts[network.expect("checked").index()];
                Name::from_components(
                    net.prefix
                        .components()
                        .iter()
                        .map(|c| c.to_string())
                        .chain([short.clone()]),
                )
                .map_err(|e| TopologyError::BadName {
                    name: short.clone(),
                    reason: e.to_string(),
                })?
            }
        };
        b.add(&n.label, n.role, network, prefix)?;
    }
    for l in &ex.links {
        b.link(&l.a, &l.b, l.delay_ms)?;
    }
    finish(b, drafts)
}

fn finish(b: Builder, drafts: Vec<NetDraft>) -> Result<Topology, TopologyError> {
    let n = b.nodes.len();
    let clouds: Vec<_> = b.nodes.iter().filter(|x| x.role == NodeRole::Cloud).collect();
    let cloud = match clouds.len() {
        0 => return Err(TopologyError::MissingCloud),
        1 => clouds[0].id,
        _ => return Err(TopologyError::MultipleCloud),
    };

    let mut networks = Vec::new();
    for (i, d) in drafts.into_iter().enumerate() {
        let nid = EdgeNetworkId(i as u16);
        let members: Vec<&Node> = b.nodes.iter().filter(|x| x.network == Some(nid)).collect();
        let egs: Vec<NodeId> = members
            .iter()
            .filter(|x| x.role == NodeRole::Eg)
            .map(|x| x.id)
            .collect();
        let eg = match egs.len() {
            0 => return Err(TopologyError::MissingEg(d.label)),
            1 => egs[0],
            _ => return Err(TopologyError::MultipleEg(d.label)),
        };
        networks.push(EdgeNetwork {
            id: nid,
            label: d.label,
            prefix: d.prefix,
            gateway_prefix: d.gateway_prefix,
            eg,
            compute: members
                .iter()
                .filter(|x| x.role.is_edge_compute())
                .map(|x| x.id)
                .collect(),
            users: members
                .iter()
                .filter(|x| x.role == NodeRole::User)
                .map(|x| x.id)
                .collect(),
        });
    }

    let mut adjacency: Vec<Vec<Adjacent>> = vec![Vec::new(); n];
    let mut links = Vec::new();
    let mut direct_users: Vec<BTreeSet<NodeId>> = vec![BTreeSet::new(); n];
    for (a, c, d, _) in &b.links {
        let (ra, rc) = (b.nodes[a.index()].role, b.nodes[c.index()].role);
        let direct = (ra == NodeRole::User && rc.is_edge_compute())
            || (rc == NodeRole::User && ra.is_edge_compute());
        if direct {
            let (user, en) = if ra == NodeRole::User { (*a, *c) } else { (*c, *a) };
            direct_users[en.index()].insert(user);
        }
        adjacency[a.index()].push(Adjacent { node: *c, delay: *d });
        adjacency[c.index()].push(Adjacent { node: *a, delay: *d });
        links.push(Link {
            a: *a,
            b: *c,
            one_way_delay: *d,
            direct_user_link: direct,
        });
    }
    for adj in &mut adjacency {
        adj.sort_by_key(|x| x.node);
    }

    // User devices terminate traffic but never relay it.
    let transit: Vec<bool> = b.nodes.iter().map(|x| x.role != NodeRole::User).collect();
    let dist: Vec<Vec<SimTime>> = (0..n)
        .map(|s| dijkstra(&adjacency, &transit, NodeId(s as u32)))
        .collect();
    for node in &b.nodes {
        if dist[cloud.index()][node.id.index()].is_infinite() {
            return Err(TopologyError::Disconnected(node.label.clone()));
        }
    }

    // Lexicographically smallest shortest path: at every step take the
    // smallest-id neighbour that stays on some shortest path.
    let mut next_hop = vec![vec![None; n]; n];
    for s in 0..n {
        for t in 0..n {
            if s == t {
                continue;
            }
            next_hop[s][t] = adjacency[s]
                .iter()
                .filter(|adj| adj.node.index() == t || transit[adj.node.index()])
                .find(|adj| adj.delay + dist[adj.node.index()][t] == dist[s][t])
                .map(|adj| adj.node);
        }
    }
    let mut hops = vec![vec![0u32; n]; n];
    for s in 0..n {
        for t in 0..n {
            let mut cur = s;
            let mut h = 0;
            while cur != t {
                cur = next_hop[cur][t].expect("connected").index();
                h += 1;
            }
            hops[s][t] = h;
        }
    }

    // Nearest directly linked EN; users tied between several take turns,
    // in user order within their network.
    let mut user_access = HashMap::new();
    let mut ordinal: HashMap<Option<EdgeNetworkId>, usize> = HashMap::new();
    for node in b.nodes.iter().filter(|x| x.role == NodeRole::User) {
        let mut ens: Vec<&Adjacent> = adjacency[node.id.index()]
            .iter()
            .filter(|a| b.nodes[a.node.index()].role.is_edge_compute())
            .collect();
        ens.sort_by_key(|a| (a.delay, a.node));
        let first = ens
            .first()
            .ok_or_else(|| TopologyError::UserWithoutEn(node.label.clone()))?;
        let tied = ens.iter().take_while(|a| a.delay == first.delay).count();
        let k = ordinal.entry(node.network).or_default();
        user_access.insert(node.id, ens[*k % tied].node);
        *k += 1;
    }

    Ok(Topology {
        nodes: b.nodes,
        links,
        adjacency,
        networks,
        cloud,
        dist,
        hops,
        next_hop,
        direct_users,
        user_access,
    })
}

fn dijkstra(adj: &[Vec<Adjacent>], transit: &[bool], src: NodeId) -> Vec<SimTime> {
    let mut dist = vec![SimTime::INFINITY; adj.len()];
    dist[src.index()] = SimTime::ZERO;
    let mut heap = BinaryHeap::new();
    heap.push(Reverse((SimTime::ZERO, src)));
    while let Some(Reverse((d, u))) = heap.pop() {
        if d > dist[u.index()] || (u != src && !transit[u.index()]) {
            continue;
        }
        for a in &adj[u.index()] {
            let nd = d + a.delay;
            if nd < dist[a.node.index()] {
                dist[a.node.index()] = nd;
                heap.push(Reverse((nd, a.node)));
            }
        }
    }
    dist
}

impl Topology {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.index()]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn neighbors(&self, id: NodeId) -> &[Adjacent] {
        &self.adjacency[id.index()]
    }

    pub fn networks(&self) -> &[EdgeNetwork] {
        &self.networks
    }

    pub fn network(&self, id: EdgeNetworkId) -> &EdgeNetwork {
        &self.networks[id.index()]
    }

    pub fn cloud(&self) -> NodeId {
        self.cloud
    }

    pub fn find(&self, label: &str) -> Option<NodeId> {
        self.nodes.iter().find(|n| n.label == label).map(|n| n.id)
    }

    pub fn users(&self) -> impl Iterator<Item = &Node> {
        self.nodes.iter().filter(|n| n.role == NodeRole::User)
    }

    /// Shortest one-way delay.
    pub fn one_way_delay(&self, a: NodeId, b: NodeId) -> SimTime {
        self.dist[a.index()][b.index()]
    }

    pub fn rtt(&self, a: NodeId, b: NodeId) -> SimTime {
        let d = self.one_way_delay(a, b);
        d + d
    }

    pub fn hop_count(&self, a: NodeId, b: NodeId) -> u32 {
        self.hops[a.index()][b.index()]
    }

    pub fn next_hop(&self, a: NodeId, b: NodeId) -> Option<NodeId> {
        self.next_hop[a.index()][b.index()]
    }

    /// Node sequence of the chosen shortest path, both endpoints included.
    pub fn path(&self, a: NodeId, b: NodeId) -> Vec<NodeId> {
        let mut out = vec![a];
        let mut cur = a;
        while cur != b {
            cur = self.next_hop(cur, b).expect("connected");
            out.push(cur);
        }
        out
    }

    /// Face index (1-based) of neighbour `nb` at `node`.
    pub fn face_to(&self, node: NodeId, nb: NodeId) -> Option<u16> {
        self.adjacency[node.index()]
            .iter()
            .position(|a| a.node == nb)
            .map(|i| (i + 1) as u16)
    }

    /// Neighbour reached through face `face` (1-based) of `node`.
    pub fn face_peer(&self, node: NodeId, face: u16) -> Option<&Adjacent> {
        if face == 0 {
            return None;
        }
        self.adjacency[node.index()].get(face as usize - 1)
    }

    pub fn direct_users(&self, en: NodeId) -> &BTreeSet<NodeId> {
        &self.direct_users[en.index()]
    }

    /// Other ENs that share at least one directly linked user with `en`.
    pub fn direct_link_peers(&self, en: NodeId) -> BTreeSet<NodeId> {
        let mine = &self.direct_users[en.index()];
        if mine.is_empty() {
            return BTreeSet::new();
        }
        self.nodes
            .iter()
            .filter(|n| n.id != en && n.role.is_edge_compute())
            .filter(|n| !self.direct_users[n.id.index()].is_disjoint(mine))
            .map(|n| n.id)
            .collect()
    }

    /// The EN a user offloads to: lowest-delay direct link; users tied
    /// between several ENs are spread over them in turn.
    pub fn access_en(&self, user: NodeId) -> NodeId {
        self.user_access[&user]
    }

    pub fn eg_of(&self, node: NodeId) -> Option<NodeId> {
        self.node(node).network.map(|n| self.network(n).eg)
    }

    pub fn is_eg(&self, node: NodeId) -> bool {
        self.node(node).role == NodeRole::Eg
    }
}
