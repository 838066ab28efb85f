//! Deterministic discrete-event simulation of the QKD network.
//!
//! Links carry key pools that are credited by refills and debited by
//! one-time-pad encryption and, optionally, message authentication. Runs are
//! a pure function of the scenario and its seed.

mod ledger;
mod scenario;
mod sim;

pub use ledger::{KeyLedger, LinkLedger, PadSource, Purpose};
pub use scenario::{
    apply_override, AuthConfig, Behavior, LinkConfig, MessageSpec, Scenario, SchemeSection, Step,
};
pub use sim::{
    run, throughput, Outcome, RunOutput, RunReport, ThroughputReport, Trace, TraceRecord,
};

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bounds::{self, BoundsError, LinkModel};
use crate::protocol::{NodeId, ProtocolError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetsimError {
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error("topology: {0}")]
    Topology(String),
    #[error("scenario: {0}")]
    Scenario(String),
}

/// Unordered pair of linked nodes, stored with the smaller id first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct LinkId {
    pub a: NodeId,
    pub b: NodeId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkKind {
    SignerRecipient,
    RecipientRecipient,
    /// Any link with an external node; carries authentication keys only.
    External,
}

impl LinkId {
    pub fn new(x: NodeId, y: NodeId) -> Self {
        if x <= y {
            Self { a: x, b: y }
        } else {
            Self { a: y, b: x }
        }
    }

    pub fn kind(&self) -> LinkKind {
        match (self.a, self.b) {
            (_, NodeId::External(_)) | (NodeId::External(_), _) => LinkKind::External,
            (NodeId::Signer, _) | (_, NodeId::Signer) => LinkKind::SignerRecipient,
            _ => LinkKind::RecipientRecipient,
        }
    }
}

impl fmt::Display for LinkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.a, self.b)
    }
}

impl FromStr for LinkId {
    type Err = ProtocolError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (x, y) = s
            .split_once('-')
            .ok_or_else(|| ProtocolError::UnknownNode(s.to_string()))?;
        Ok(Self::new(x.parse()?, y.parse()?))
    }
}

impl From<LinkId> for String {
    fn from(l: LinkId) -> String {
        l.to_string()
    }
}

impl TryFrom<String> for LinkId {
    type Error = ProtocolError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

/// Shape of the network before validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologySpec {
    pub n: u32,
    pub m: u32,
    pub omega: u32,
    pub l_max: u32,
    /// Internal recipients linked to each external node, `external_links[e - 1]`.
    /// Empty means every external node is linked to every internal node.
    pub external_links: Vec<Vec<u32>>,
    /// Further links involving external nodes, e.g. external to external.
    pub extra_links: Vec<(NodeId, NodeId)>,
    pub sr_km: f64,
    pub rr_km: f64,
    pub ext_km: f64,
    /// Balance credited to every link at construction.
    pub initial_pool_bits: u64,
}

impl TopologySpec {
    pub fn complete(n: u32, m: u32, omega: u32, l_max: u32) -> Self {
        Self {
            n,
            m,
            omega,
            l_max,
            external_links: Vec::new(),
            extra_links: Vec::new(),
            sr_km: 10.0,
            rr_km: 10.0,
            ext_km: 10.0,
            initial_pool_bits: 0,
        }
    }
}

/// Validated network with its key ledger.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub n: u32,
    pub m: u32,
    pub omega: u32,
    pub l_max: u32,
    /// Distance of every link in km.
    pub links: BTreeMap<LinkId, f64>,
    pub ledger: KeyLedger,
}

impl Topology {
    pub fn nodes(&self) -> Vec<NodeId> {
        let mut nodes = vec![NodeId::Signer];
        nodes.extend((1..=self.n).map(NodeId::Internal));
        nodes.extend((1..=self.m).map(NodeId::External));
        nodes
    }

    pub fn has_link(&self, x: NodeId, y: NodeId) -> bool {
        self.links.contains_key(&LinkId::new(x, y))
    }

    /// Internal recipients linked to external node `ext`, ascending.
    pub fn connected_internals(&self, ext: u32) -> Vec<u32> {
        (1..=self.n)
            .filter(|&i| self.has_link(NodeId::Internal(i), NodeId::External(ext)))
            .collect()
    }

    /// Rate model over the internal subnetwork, for comparison with
    /// [`bounds::uss_rate_for`].
    pub fn link_model(&self, rate0: f64, gamma: f64) -> LinkModel {
        let size = self.n as usize + 1;
        let mut distances = vec![vec![0.0; size]; size];
        let index = |id: NodeId| match id {
            NodeId::Signer => Some(0),
            NodeId::Internal(i) => Some(i as usize),
            NodeId::External(_) => None,
        };
        for (link, &d) in &self.links {
            if let (Some(i), Some(j)) = (index(link.a), index(link.b)) {
                distances[i][j] = d;
                distances[j][i] = d;
            }
        }
        LinkModel {
            rate0,
            gamma,
            distances,
        }
    }
}

/// Validates connectivity and acceptability and lays out all links.
pub fn build_topology(spec: &TopologySpec) -> Result<Topology, NetsimError> {
    bounds::check_network(spec.n, spec.omega, spec.l_max)?;
    let mut links = BTreeMap::new();
    for i in 1..=spec.n {
        links.insert(LinkId::new(NodeId::Signer, NodeId::Internal(i)), spec.sr_km);
        for j in i + 1..=spec.n {
            links.insert(
                LinkId::new(NodeId::Internal(i), NodeId::Internal(j)),
                spec.rr_km,
            );
        }
    }
    if !spec.external_links.is_empty() && spec.external_links.len() != spec.m as usize {
        return Err(NetsimError::Topology(format!(
            "external_links lists {} external nodes, M = {}",
            spec.external_links.len(),
            spec.m
        )));
    }
    let needed = 2 * spec.omega as usize + 1;
    for e in 1..=spec.m {
        let mut peers: Vec<u32> = match spec.external_links.get(e as usize - 1) {
            Some(p) => p.clone(),
            None => (1..=spec.n).collect(),
        };
        peers.sort_unstable();
        peers.dedup();
        if let Some(&bad) = peers.iter().find(|&&i| i == 0 || i > spec.n) {
            return Err(NetsimError::Topology(format!(
                "E{e} linked to unknown P{bad}"
            )));
        }
        if peers.len() < needed {
            return Err(NetsimError::Topology(format!(
                "E{e} linked to {} internal recipients, at least {needed} required",
                peers.len()
            )));
        }
        for i in peers {
            links.insert(
                LinkId::new(NodeId::Internal(i), NodeId::External(e)),
                spec.ext_km,
            );
        }
    }
    let known = |id: NodeId| match id {
        NodeId::Signer => true,
        NodeId::Internal(i) => (1..=spec.n).contains(&i),
        NodeId::External(e) => (1..=spec.m).contains(&e),
    };
    for &(x, y) in &spec.extra_links {
        if x == y || !known(x) || !known(y) {
            return Err(NetsimError::Topology(format!("bad extra link {x}-{y}")));
        }
        let link = LinkId::new(x, y);
        if link.kind() != LinkKind::External {
            return Err(NetsimError::Topology(format!(
                "{link} already part of the internal subnetwork"
            )));
        }
        links.insert(link, spec.ext_km);
    }
    let mut ledger = KeyLedger::default();
    for &link in links.keys() {
        ledger.open(link);
        ledger.credit(link, spec.initial_pool_bits as f64);
    }
    Ok(Topology {
        n: spec.n,
        m: spec.m,
        omega: spec.omega,
        l_max: spec.l_max,
        links,
        ledger,
    })
}

/// Credits every pool with `rate0 exp(-gamma d) duration_s` bits.
/// Fractional bits carry over to the next refill.
pub fn refill(topology: &mut Topology, rate0: f64, gamma: f64, duration_s: f64) {
    for (&link, &d) in &topology.links {
        topology
            .ledger
            .credit(link, rate0 * (-gamma * d).exp() * duration_s);
    }
}

#[cfg(test)]
mod tests;
