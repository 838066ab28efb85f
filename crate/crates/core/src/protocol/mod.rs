//! Node state machines: key distribution, signing, verification at multiple
//! levels, delegated verification for external nodes, block lists and the
//! majority vote.
//!
//! Internal recipients are numbered `1..=N`, external recipients `1..=M`.
//! Signature positions use the global key numbering `1..=N^2 k`.

mod broadcast;
mod distribution;
mod verify;
mod vote;
pub mod wire;

pub use broadcast::{broadcast, BroadcastMessage, BroadcastOutcome, HonestRelay, Relay};
pub use distribution::{
    distribute, distribute_step1, distribute_step2, node_rng, sign, Deployment,
    DistributionBehavior, Honest, KeyBlock, KeyChunk, KeySlice, SigningKey, VerificationKeyShare,
};
pub use verify::{
    block_passes, delegated_verify, level_from_passes, quorum_level, select_omega,
    verification_level, ExtVerdict, ExternalState, OmegaChoice, Reception, RecipientState, Verdict,
};
pub use vote::{
    majority_vote, mv_ext_decide, mv_tally, mv_verify_external, MvAdversary, MvExt, MvOutcome,
    MvReport, MvResponse,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::as2u::{self, As2uError, FamilyParams, Message};
use crate::bounds::{self, BoundsError, SchemeConfig};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProtocolError {
    #[error(transparent)]
    Config(#[from] BoundsError),
    #[error(transparent)]
    Family(#[from] As2uError),
    #[error("key pool on link {link} holds {available} bits, {needed} needed")]
    PoolExhausted {
        link: String,
        needed: u64,
        available: u64,
    },
    #[error("external node {ext} reaches {available} eligible internal nodes, {needed} needed")]
    InsufficientConnectivity {
        ext: u32,
        needed: usize,
        available: usize,
    },
    #[error("broadcast among {participants} nodes cannot tolerate omega = {omega}")]
    BroadcastPrecondition { participants: usize, omega: u32 },
    #[error("node {node} may only start a majority vote from level 0, its level is {level}")]
    VoteNotEligible { node: u32, level: i32 },
    #[error("unknown node {0}")]
    UnknownNode(String),
    #[error("malformed {what}: {detail}")]
    Malformed { what: &'static str, detail: String },
}

/// A network participant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum NodeId {
    Signer,
    Internal(u32),
    External(u32),
}

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NodeId::Signer => write!(f, "P0"),
            NodeId::Internal(i) => write!(f, "P{i}"),
            NodeId::External(i) => write!(f, "E{i}"),
        }
    }
}

impl std::str::FromStr for NodeId {
    type Err = ProtocolError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ProtocolError::UnknownNode(s.to_string());
        let (kind, idx) = s.split_at(1.min(s.len()));
        let idx: u32 = idx.parse().map_err(|_| bad())?;
        match (kind, idx) {
            ("P", 0) => Ok(NodeId::Signer),
            ("P", i) => Ok(NodeId::Internal(i)),
            ("E", i) if i > 0 => Ok(NodeId::External(i)),
            _ => Err(bad()),
        }
    }
}

impl From<NodeId> for String {
    fn from(id: NodeId) -> String {
        id.to_string()
    }
}

impl TryFrom<String> for NodeId {
    type Error = ProtocolError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

/// Everything a node needs to run the protocol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub n: u32,
    pub m: u32,
    pub omega: u32,
    pub l_max: u32,
    pub k: u32,
    pub s0: f64,
    pub family: FamilyParams,
}

impl Params {
    /// Validated parameters, including `omega < N/(2 + l_max)`.
    pub fn new(cfg: &SchemeConfig) -> Result<Self, ProtocolError> {
        cfg.validate()?;
        if cfg.k == 0 || cfg.k > u32::MAX as u64 {
            return Err(ProtocolError::Malformed {
                what: "config",
                detail: format!("k = {} out of range", cfg.k),
            });
        }
        Ok(Self {
            n: cfg.n,
            m: cfg.m,
            omega: cfg.omega,
            l_max: cfg.l_max,
            k: cfg.k as u32,
            s0: cfg.s0,
            family: as2u::make_params(cfg.a, cfg.b)?,
        })
    }

    /// Same parameters with a different `omega`, skipping the acceptability
    /// check. Used to exhibit what happens past the tolerance limit.
    pub fn with_omega_unchecked(mut self, omega: u32) -> Self {
        self.omega = omega;
        self
    }

    /// `N^2 k`, the number of keys and tags.
    pub fn total_keys(&self) -> usize {
        (self.n as usize).pow(2) * self.k as usize
    }

    /// `N k`, the keys held by each recipient.
    pub fn share_size(&self) -> usize {
        self.n as usize * self.k as usize
    }

    /// Width of a key index on the wire, `ceil(log2(N k))`.
    pub fn index_bits(&self) -> u32 {
        bounds::ceil_log2(self.share_size() as u64)
    }

    /// First global index (1-based) of the keys sent to recipient `i`.
    pub fn slice_start(&self, i: u32) -> u32 {
        (i - 1) * self.share_size() as u32 + 1
    }

    pub fn b(&self) -> u32 {
        self.family.b
    }

    pub fn y(&self) -> u32 {
        self.family.y
    }

    pub fn internal_ids(&self) -> impl Iterator<Item = u32> {
        1..=self.n
    }
}

/// A `b`-bit tag for every key of the signing key.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Signature {
    pub b: u32,
    pub tags: Vec<u64>,
}

/// A message-signature pair in transit, with the level it was accepted at.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Package {
    pub m: Message,
    pub sigma: Signature,
    pub l_rec: u32,
}

/// Digest used to key per-pair bookkeeping.
pub type Digest = [u8; 32];
