//! Internal verification, delegated verification and block lists.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::wire::{package_digest, pair_digest};
use super::{
    Digest, MvOutcome, NodeId, Package, Params, ProtocolError, Signature, VerificationKeyShare,
};
use crate::as2u::{Message, PreparedMessage};
use crate::bounds::level_fraction;

/// Test of one key block at level `l`: passes when the number of wrong tags
/// is below `s_l k`, or is zero at the top level where `s_l = 0`.
pub fn block_passes(mismatches: u32, l: u32, params: &Params) -> bool {
    let threshold = level_fraction(params.s0, l, params.l_max) * params.k as f64;
    (mismatches as f64) < threshold || (l == params.l_max && mismatches == 0)
}

/// Highest level `l` at which more than `omega (1 + l)` blocks pass, or -1.
///
/// `passes[l]` is the number of passing blocks at level `l`.
pub fn level_from_passes(passes: &[u32], omega: u32) -> i32 {
    passes
        .iter()
        .enumerate()
        .filter(|&(l, &p)| p > omega + l as u32 * omega)
        .map(|(l, _)| l as i32)
        .max()
        .unwrap_or(-1)
}

/// Verification level of `(m, sigma)` under `share`.
pub fn verification_level(
    share: &VerificationKeyShare,
    m: &Message,
    sigma: &Signature,
    params: &Params,
) -> i32 {
    let Ok(prepared) = PreparedMessage::new(m, &params.family) else {
        return -1;
    };
    let mismatches: Vec<u32> = params
        .internal_ids()
        .map(|j| share.mismatches(j, &prepared, sigma, params))
        .collect();
    let passes: Vec<u32> = (0..=params.l_max)
        .map(|l| {
            mismatches
                .iter()
                .filter(|&&e| block_passes(e, l, params))
                .count() as u32
        })
        .collect();
    level_from_passes(&passes, params.omega)
}

/// Result of verifying a package.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub l_ver: i32,
    pub accepted: bool,
    /// May be forwarded with level `l_ver`.
    pub forward: bool,
    /// The sender was added to the block list.
    pub blocked_sender: bool,
}

impl Verdict {
    fn from_level(l_ver: i32, l_rec: u32) -> Self {
        let accepted = l_ver >= l_rec as i32 - 1;
        Self {
            l_ver,
            accepted,
            forward: accepted && l_ver >= 1,
            blocked_sender: !accepted,
        }
    }
}

/// What happened to an incoming package.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Reception {
    Verified(Verdict),
    IgnoredBlocked,
    IgnoredDuplicate,
    /// `l_rec` outside `1..=l_max`.
    IgnoredMalformed,
}

impl Reception {
    pub fn verdict(&self) -> Option<Verdict> {
        match self {
            Reception::Verified(v) => Some(*v),
            _ => None,
        }
    }
}

/// State of one internal recipient.
#[derive(Debug, Clone)]
pub struct RecipientState {
    pub id: u32,
    pub params: Params,
    pub share: VerificationKeyShare,
    pub block_list: BTreeSet<NodeId>,
    /// Failed delegated requests per external node.
    pub counters: BTreeMap<u32, u32>,
    pub mv_results: BTreeMap<Digest, MvOutcome>,
    /// Majority-vote initiators caught cheating.
    pub flagged: BTreeSet<u32>,
    seen_packages: BTreeSet<Digest>,
    seen_requests: BTreeSet<Digest>,
}

impl RecipientState {
    pub fn new(share: VerificationKeyShare, params: Params) -> Self {
        Self {
            id: share.owner,
            params,
            share,
            block_list: BTreeSet::new(),
            counters: BTreeMap::new(),
            mv_results: BTreeMap::new(),
            flagged: BTreeSet::new(),
            seen_packages: BTreeSet::new(),
            seen_requests: BTreeSet::new(),
        }
    }

    pub fn node(&self) -> NodeId {
        NodeId::Internal(self.id)
    }

    /// `l_ver` for the pair, without touching any state.
    pub fn level(&self, m: &Message, sigma: &Signature) -> i32 {
        verification_level(&self.share, m, sigma, &self.params)
    }

    fn well_formed(&self, pkg: &Package) -> bool {
        (1..=self.params.l_max).contains(&pkg.l_rec)
    }

    /// Handles a package from `sender`: ignore blocked senders and repeats,
    /// otherwise verify, and block the sender on rejection.
    pub fn receive_package(&mut self, pkg: &Package, sender: NodeId) -> Reception {
        if self.block_list.contains(&sender) {
            return Reception::IgnoredBlocked;
        }
        if !self.seen_packages.insert(package_digest(pkg, sender)) {
            return Reception::IgnoredDuplicate;
        }
        if !self.well_formed(pkg) {
            return Reception::IgnoredMalformed;
        }
        let verdict = Verdict::from_level(self.level(&pkg.m, &pkg.sigma), pkg.l_rec);
        if verdict.blocked_sender && sender != self.node() {
            self.block_list.insert(sender);
        }
        Reception::Verified(verdict)
    }

    /// Answers a delegated verification request from external node `ext`.
    /// Returns `None` when the request is ignored.
    pub fn handle_verify_request(&mut self, ext: u32, pkg: &Package) -> Option<i32> {
        let requester = NodeId::External(ext);
        if self.block_list.contains(&requester) {
            return None;
        }
        if !self.seen_requests.insert(package_digest(pkg, requester)) {
            return None;
        }
        let level = self.level(&pkg.m, &pkg.sigma);
        if level < pkg.l_rec as i32 - 2 {
            let cnt = self.counters.entry(ext).or_insert(0);
            *cnt += 1;
            if *cnt >= self.params.m + self.params.omega {
                self.block_list.insert(requester);
            }
        }
        Some(level)
    }

    /// Stored majority-vote result for the pair, if a vote happened.
    pub fn mv_result(&self, m: &Message, sigma: &Signature) -> Option<MvOutcome> {
        self.mv_results.get(&pair_digest(m, sigma)).copied()
    }
}

/// How an external node picks the internal nodes it asks.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OmegaChoice {
    /// The lowest-numbered eligible nodes.
    #[default]
    LowestIndex,
    /// Eligible nodes in the given preference order.
    Explicit(Vec<u32>),
}

/// Internal nodes to query: `2 omega` excluding an internal sender, else
/// `2 omega + 1`, chosen among `connected`.
pub fn select_omega(
    ext: u32,
    sender: NodeId,
    connected: &[u32],
    omega: u32,
    choice: &OmegaChoice,
) -> Result<Vec<u32>, ProtocolError> {
    let (needed, excluded) = match sender {
        NodeId::Internal(j) => (2 * omega as usize, Some(j)),
        _ => (2 * omega as usize + 1, None),
    };
    let mut candidates: Vec<u32> = match choice {
        OmegaChoice::LowestIndex => {
            let mut c = connected.to_vec();
            c.sort_unstable();
            c
        }
        OmegaChoice::Explicit(order) => order
            .iter()
            .copied()
            .filter(|i| connected.contains(i))
            .collect(),
    };
    candidates.dedup();
    candidates.retain(|&i| Some(i) != excluded);
    if candidates.len() < needed {
        return Err(ProtocolError::InsufficientConnectivity {
            ext,
            needed,
            available: candidates.len(),
        });
    }
    candidates.truncate(needed);
    Ok(candidates)
}

/// Highest level `l'` in `-1..=l_max` reached by at least `omega + 1`
/// responses; `None` when fewer than `omega + 1` responses arrived.
pub fn quorum_level(responses: &[i32], omega: u32, l_max: u32) -> Option<i32> {
    (-1..=l_max as i32)
        .rev()
        .find(|&l| responses.iter().filter(|&&r| r >= l).count() > omega as usize)
}

/// Result of a delegated verification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtVerdict {
    /// `None` when no level gathered a quorum.
    pub l_ver: Option<i32>,
    pub accepted: bool,
    pub forward: bool,
    pub blocked_sender: bool,
}

/// State of one external recipient.
#[derive(Debug, Clone)]
pub struct ExternalState {
    pub id: u32,
    pub params: Params,
    pub block_list: BTreeSet<NodeId>,
    pub omega_choice: OmegaChoice,
    seen_packages: BTreeSet<Digest>,
}

impl ExternalState {
    pub fn new(id: u32, params: Params) -> Self {
        Self {
            id,
            params,
            block_list: BTreeSet::new(),
            omega_choice: OmegaChoice::LowestIndex,
            seen_packages: BTreeSet::new(),
        }
    }

    pub fn node(&self) -> NodeId {
        NodeId::External(self.id)
    }

    /// First half of delegated verification: decide whether to process the
    /// package and whom to ask. `Ok(None)` means the package is ignored.
    pub fn begin(
        &mut self,
        pkg: &Package,
        sender: NodeId,
        connected: &[u32],
    ) -> Result<Option<Vec<u32>>, ProtocolError> {
        if self.block_list.contains(&sender) {
            return Ok(None);
        }
        if !(1..=self.params.l_max).contains(&pkg.l_rec) {
            return Ok(None);
        }
        if self.seen_packages.contains(&package_digest(pkg, sender)) {
            return Ok(None);
        }
        let omega = select_omega(
            self.id,
            sender,
            connected,
            self.params.omega,
            &self.omega_choice,
        )?;
        self.seen_packages.insert(package_digest(pkg, sender));
        Ok(Some(omega))
    }

    /// Second half: combine the responses that arrived. An internal sender
    /// counts as a response at `l_rec`.
    pub fn conclude(&mut self, pkg: &Package, sender: NodeId, responses: &[i32]) -> ExtVerdict {
        let mut all = responses.to_vec();
        if let NodeId::Internal(_) = sender {
            all.push(pkg.l_rec as i32);
        }
        let l_ver = quorum_level(&all, self.params.omega, self.params.l_max);
        let Some(level) = l_ver else {
            return ExtVerdict {
                l_ver: None,
                accepted: false,
                forward: false,
                blocked_sender: false,
            };
        };
        let accepted = level >= pkg.l_rec as i32 - 1;
        if !accepted {
            self.block_list.insert(sender);
        }
        ExtVerdict {
            l_ver,
            accepted,
            forward: accepted && level >= 1,
            blocked_sender: !accepted,
        }
    }
}

/// Runs a full delegated verification synchronously. `respond` may replace
/// the answer of any internal node; it receives the node, the honest answer
/// (`None` if the node ignored the request) and returns what is sent.
pub fn delegated_verify(
    ext: &mut ExternalState,
    pkg: &Package,
    sender: NodeId,
    connected: &[u32],
    internals: &mut [RecipientState],
    respond: &mut dyn FnMut(u32, Option<i32>) -> Option<i32>,
) -> Result<Option<ExtVerdict>, ProtocolError> {
    let Some(omega) = ext.begin(pkg, sender, connected)? else {
        return Ok(None);
    };
    let mut responses = Vec::with_capacity(omega.len());
    for i in omega {
        let state = internals
            .get_mut(i as usize - 1)
            .ok_or_else(|| ProtocolError::UnknownNode(format!("P{i}")))?;
        let honest = state.handle_verify_request(ext.id, pkg);
        if let Some(r) = respond(i, honest) {
            responses.push(r);
        }
    }
    Ok(Some(ext.conclude(pkg, sender, &responses)))
}
