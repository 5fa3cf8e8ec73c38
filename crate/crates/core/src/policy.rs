//! Placement decisions. Every function here is pure over a
//! [`DecisionContext`] built from the decision node's view at decision time.

use serde::{Deserialize, Serialize};

use crate::config::PolicyKind;
use crate::engine::SimTime;
use crate::ndn::Name;
use crate::topology::{EdgeNetworkId, NodeId};

#[derive(Clone, Debug, PartialEq)]
pub enum PlacementDecision {
    ExecuteHere,
    ForwardToEn { target: NodeId, hint: Name },
    /// Toward a gateway: the node's own EG or another network's.
    ForwardToNetwork { network: EdgeNetworkId, gateway: NodeId, hint: Name },
    ForwardToCloud,
    BufferFifo,
    /// Nothing meets the deadline; run at `target` anyway, queueing if full.
    BestEffort { target: NodeId },
}

impl PlacementDecision {
    pub fn kind(&self) -> &'static str {
        match self {
            PlacementDecision::ExecuteHere => "execute_here",
            PlacementDecision::ForwardToEn { .. } => "forward_to_en",
            PlacementDecision::ForwardToNetwork { .. } => "forward_to_network",
            PlacementDecision::ForwardToCloud => "forward_to_cloud",
            PlacementDecision::BufferFifo => "buffer_fifo",
            PlacementDecision::BestEffort { .. } => "best_effort",
        }
    }
}

/// Where the cloud sits in the preference order.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CloudPreference {
    /// Any decision node sends a task to the cloud when the cloud meets its
    /// deadline; the cloud is the furthest possible placement.
    #[default]
    AnyNode,
    /// Only the gateway considers the cloud, after its own network.
    GatewayOnly,
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct FeasibilityBudget {
    pub deadline: SimTime,
    /// now − offloaded_at
    pub elapsed: SimTime,
    /// One-way delay from the decision node back to the user.
    pub return_delay: SimTime,
}

impl FeasibilityBudget {
    /// elapsed + rtt + est + return ≤ deadline
    pub fn fits(&self, rtt: SimTime, est: SimTime) -> bool {
        if rtt.is_infinite() || est.is_infinite() {
            return false;
        }
        self.elapsed + rtt + est + self.return_delay <= self.deadline
    }
}

/// An in-network node other than the decision node.
#[derive(Clone, Debug, PartialEq)]
pub struct Candidate {
    pub node: NodeId,
    pub prefix: Name,
    pub rtt: SimTime,
    /// Free slots in the view after optimistic adjustments.
    pub free_slots: u32,
    pub est: SimTime,
    /// Shares a directly linked user with the decision node.
    pub direct_peer: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkCandidate {
    pub network: EdgeNetworkId,
    pub gateway: NodeId,
    pub hint: Name,
    pub rtt_to_gateway: SimTime,
    /// Reported by that gateway; infinite when nothing is free there.
    pub rtt_to_closest_free: SimTime,
    pub est: SimTime,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CloudCandidate {
    pub node: NodeId,
    pub rtt: SimTime,
    pub est: SimTime,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecisionContext {
    pub node: NodeId,
    pub is_gateway: bool,
    pub budget: FeasibilityBudget,
    /// Live state of the decision node itself.
    pub self_free: bool,
    pub self_est: SimTime,
    /// Expected wait for a local slot when none is free.
    pub self_wait: SimTime,
    pub peers: Vec<Candidate>,
    /// Own gateway, when the task may still be handed to it.
    pub own_gateway: Option<(EdgeNetworkId, NodeId, Name)>,
    /// Other networks as seen in the tier-2 view (gateways only).
    pub networks: Vec<NetworkCandidate>,
    pub cloud: Option<CloudCandidate>,
}

pub fn feasible(c: &Candidate, budget: &FeasibilityBudget) -> bool {
    c.free_slots > 0 && budget.fits(c.rtt, c.est)
}

enum Pick<'a> {
    SelfNode,
    Peer(&'a Candidate),
}

/// Furthest feasible in-network placement, direct-link peers only as a
/// last resort.
fn furthest_in_network(ctx: &DecisionContext) -> Option<Pick<'_>> {
    let b = &ctx.budget;
    let self_ok = ctx.self_free && b.fits(SimTime::ZERO, ctx.self_est);
    let pick = |allow_direct: bool, with_self: bool| {
        let mut best: Option<(SimTime, NodeId, Pick<'_>)> = None;
        if with_self && self_ok {
            best = Some((SimTime::ZERO, ctx.node, Pick::SelfNode));
        }
        for c in ctx.peers.iter().filter(|c| c.direct_peer == allow_direct) {
            if !feasible(c, b) {
                continue;
            }
            let better = match &best {
                None => true,
                Some((rtt, id, _)) => c.rtt > *rtt || (c.rtt == *rtt && c.node < *id),
            };
            if better {
                best = Some((c.rtt, c.node, Pick::Peer(c)));
            }
        }
        best.map(|(_, _, p)| p)
    };
    pick(false, true).or_else(|| pick(true, false))
}

fn forward_to(c: &Candidate) -> PlacementDecision {
    PlacementDecision::ForwardToEn {
        target: c.node,
        hint: c.prefix.clone(),
    }
}

fn best_network(
    ctx: &DecisionContext,
    require_feasible: bool,
) -> Option<&NetworkCandidate> {
    ctx.networks
        .iter()
        .filter(|n| !n.rtt_to_closest_free.is_infinite())
        .filter(|n| {
            !require_feasible || ctx.budget.fits(n.rtt_to_gateway + n.rtt_to_closest_free, n.est)
        })
        .min_by_key(|n| (n.rtt_to_gateway + n.rtt_to_closest_free, n.network))
}

fn to_network(n: &NetworkCandidate) -> PlacementDecision {
    PlacementDecision::ForwardToNetwork {
        network: n.network,
        gateway: n.gateway,
        hint: n.hint.clone(),
    }
}

/// Cheapest expected completion among the node itself, its gateway and the cloud.
fn best_effort(ctx: &DecisionContext) -> PlacementDecision {
    let mut best = (
        ctx.self_est + if ctx.self_free { SimTime::ZERO } else { ctx.self_wait },
        ctx.node,
    );
    let gw = if ctx.is_gateway {
        None
    } else {
        ctx.own_gateway
            .as_ref()
            .and_then(|(_, g, _)| ctx.peers.iter().find(|c| c.node == *g))
    };
    if let Some(g) = gw {
        let wait = if g.free_slots > 0 { SimTime::ZERO } else { g.est };
        let t = g.rtt + g.est + wait;
        if t < best.0 {
            best = (t, g.node);
        }
    }
    if let Some(c) = ctx.cloud {
        let t = c.rtt + c.est;
        if t < best.0 {
            best = (t, c.node);
        }
    }
    PlacementDecision::BestEffort { target: best.1 }
}

pub fn decide_cledge(ctx: &DecisionContext, cloud_pref: CloudPreference) -> PlacementDecision {
    let b = &ctx.budget;
    let cloud_ok = ctx.cloud.is_some_and(|c| b.fits(c.rtt, c.est));
    if cloud_pref == CloudPreference::AnyNode && cloud_ok {
        return PlacementDecision::ForwardToCloud;
    }
    match furthest_in_network(ctx) {
        Some(Pick::SelfNode) => return PlacementDecision::ExecuteHere,
        Some(Pick::Peer(c)) => return forward_to(c),
        None => {}
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
        if let Some(n) = best_network(ctx, true) {
            return to_network(n);
        }
    }
    best_effort(ctx)
}

pub fn decide_baseline(kind: PolicyKind, ctx: &DecisionContext) -> PlacementDecision {
    match kind {
        PolicyKind::Cledge => panic!("decide_baseline called for cledge"),
        PolicyKind::CloudOnly => {
            if ctx.cloud.is_some() {
                PlacementDecision::ForwardToCloud
            } else {
                PlacementDecision::BestEffort { target: ctx.node }
            }
        }
        PolicyKind::EdgeOnly => {
            if ctx.self_free {
                PlacementDecision::ExecuteHere
            } else {
                PlacementDecision::BufferFifo
            }
        }
        PolicyKind::CloudEdge => {
            if ctx.self_free {
                PlacementDecision::ExecuteHere
            } else if ctx.cloud.is_some() {
                PlacementDecision::ForwardToCloud
            } else {
                PlacementDecision::BestEffort { target: ctx.node }
            }
        }
        PolicyKind::AdaptiveCloudEdge => {
            if ctx.self_free {
                return PlacementDecision::ExecuteHere;
            }
            if let Some(c) = ctx
                .peers
                .iter()
                .filter(|c| c.free_slots > 0)
                .min_by_key(|c| (c.rtt, c.node))
            {
                return forward_to(c);
            }
            if !ctx.is_gateway {
                if let Some((net, gw, hint)) = &ctx.own_gateway {
                    return PlacementDecision::ForwardToNetwork {
                        network: *net,
                        gateway: *gw,
                        hint: hint.clone(),
                    };
                }
            } else if let Some(n) = best_network(ctx, false) {
                return to_network(n);
            }
            if ctx.cloud.is_some() {
                PlacementDecision::ForwardToCloud
            } else {
                PlacementDecision::BestEffort { target: ctx.node }
            }
        }
    }
}

/// Placement once a task has used up its redirects, whatever the policy.
pub fn decide_exhausted(ctx: &DecisionContext) -> PlacementDecision {
    best_effort(ctx)
}

pub fn decide(kind: PolicyKind, cloud_pref: CloudPreference, ctx: &DecisionContext) -> PlacementDecision {
    match kind {
        PolicyKind::Cledge => decide_cledge(ctx, cloud_pref),
        other => decide_baseline(other, ctx),
    }
}
