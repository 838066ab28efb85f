//! Majority vote among internal recipients and its lookup by external nodes.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::broadcast::{broadcast, BroadcastMessage, Relay};
use super::verify::{select_omega, OmegaChoice, RecipientState};
use super::wire::{decode_pair, encode_pair, pair_digest, Reader};
use super::{NodeId, Params, ProtocolError, Signature};
use crate::as2u::{Bits, Message};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MvOutcome {
    Accepted,
    Rejected,
}

/// An internal node's answer to an external lookup.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MvResponse {
    Outcome(MvOutcome),
    NoVote,
}

/// Result of an external lookup.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MvExt {
    Accepted,
    Rejected,
    /// No quorum: no vote took place as far as the external node can tell.
    NoVote,
}

/// Counts votes with the initiator's vote fixed at 0. Returns the outcome
/// and whether at least `omega + 1` votes of level 2 or more expose the
/// initiator as dishonest.
pub fn mv_tally(
    votes: &BTreeMap<u32, i32>,
    initiator: u32,
    n: u32,
    omega: u32,
) -> (MvOutcome, bool) {
    let effective = |j: &u32, v: &i32| if *j == initiator { 0 } else { *v };
    let nonnegative = votes.iter().filter(|(j, v)| effective(j, v) >= 0).count();
    let high = votes.iter().filter(|(j, v)| effective(j, v) >= 2).count();
    let outcome = if 2 * nonnegative > n as usize {
        MvOutcome::Accepted
    } else {
        MvOutcome::Rejected
    };
    (outcome, high > omega as usize)
}

/// Behavior of the faulty internal nodes during a vote.
pub struct MvAdversary<'a> {
    pub faulty: BTreeSet<u32>,
    /// Transmissions of the pair by a faulty initiator or relay.
    pub payload: &'a mut dyn Relay<Bits>,
    /// Transmissions of votes by faulty voters or relays.
    pub votes: &'a mut dyn Relay<i32>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MvReport {
    /// Outcome computed by each non-faulty node.
    pub outcomes: BTreeMap<u32, MvOutcome>,
    /// Whether each non-faulty node flagged the initiator.
    pub flags: BTreeMap<u32, bool>,
    /// Vote vector seen by each non-faulty node, indexed by voter.
    pub votes: BTreeMap<u32, BTreeMap<u32, i32>>,
    /// All transmissions; vote rounds follow the pair rounds.
    pub messages: Vec<BroadcastMessage>,
}

fn decode_payload(params: &Params, payload: &Bits) -> Option<(Message, Signature)> {
    // the payload is an encoded pair; its length is implied by the header
    let mut r = Reader::new(payload, "pair");
    let len = r.uint(64).ok()?;
    let expected = 64 + len as usize + params.total_keys() * params.b() as usize;
    if payload.len() != expected {
        return None;
    }
    decode_pair(params, payload).ok()
}

/// Runs a majority vote started by `initiator` on `(m, sigma)`.
///
/// An honest initiator must hold the pair at level 0. `nodes[i - 1]` is the
/// state of recipient `i`; states of faulty nodes are left untouched.
pub fn majority_vote(
    initiator: u32,
    m: &Message,
    sigma: &Signature,
    nodes: &mut [RecipientState],
    adversary: &mut MvAdversary,
) -> Result<MvReport, ProtocolError> {
    let params = nodes
        .first()
        .map(|s| s.params)
        .ok_or_else(|| ProtocolError::UnknownNode("empty network".into()))?;
    let participants: Vec<u32> = params.internal_ids().collect();
    let faulty = adversary.faulty.clone();
    if !faulty.contains(&initiator) {
        let state = nodes
            .get(initiator as usize - 1)
            .ok_or_else(|| ProtocolError::UnknownNode(format!("P{initiator}")))?;
        let level = state.level(m, sigma);
        if level != 0 {
            return Err(ProtocolError::VoteNotEligible {
                node: initiator,
                level,
            });
        }
    }

    let pair = broadcast(
        &participants,
        initiator,
        encode_pair(m, sigma),
        params.omega,
        &faulty,
        Bits::new(),
        adversary.payload,
    )?;
    let mut messages = pair.messages;
    let offset = params.omega + 1;

    let received: BTreeMap<u32, Option<(Message, Signature)>> = pair
        .delivered
        .iter()
        .map(|(&j, p)| (j, decode_payload(&params, p)))
        .collect();
    let own_vote = |j: u32| -> i32 {
        if j == initiator {
            return 0;
        }
        match &received[&j] {
            Some((mj, sj)) => nodes[j as usize - 1].level(mj, sj),
            None => -1,
        }
    };

    let mut seen: BTreeMap<u32, BTreeMap<u32, i32>> = BTreeMap::new();
    for &voter in &participants {
        let out = broadcast(
            &participants,
            voter,
            own_vote(voter),
            params.omega,
            &faulty,
            -1,
            adversary.votes,
        )?;
        messages.extend(out.messages.into_iter().map(|mut msg| {
            msg.round += offset;
            msg
        }));
        for (r, v) in out.delivered {
            seen.entry(r).or_default().insert(voter, v);
        }
    }

    let mut report = MvReport {
        outcomes: BTreeMap::new(),
        flags: BTreeMap::new(),
        votes: BTreeMap::new(),
        messages,
    };
    for &r in participants.iter().filter(|r| !faulty.contains(r)) {
        let votes = &seen[&r];
        let (outcome, flag) = mv_tally(votes, initiator, params.n, params.omega);
        let state = &mut nodes[r as usize - 1];
        if let Some((mr, sr)) = &received[&r] {
            state.mv_results.insert(pair_digest(mr, sr), outcome);
        }
        if flag {
            state.flagged.insert(initiator);
        }
        report.outcomes.insert(r, outcome);
        report.flags.insert(r, flag);
        report.votes.insert(r, votes.clone());
    }
    Ok(report)
}

/// `Accepted` / `Rejected` when at least `omega + 1` responses agree on it.
pub fn mv_ext_decide(responses: &[MvResponse], omega: u32) -> MvExt {
    let count = |o: MvOutcome| {
        responses
            .iter()
            .filter(|&&r| r == MvResponse::Outcome(o))
            .count()
    };
    if count(MvOutcome::Accepted) > omega as usize {
        MvExt::Accepted
    } else if count(MvOutcome::Rejected) > omega as usize {
        MvExt::Rejected
    } else {
        MvExt::NoVote
    }
}

/// External node `ext` asks `2 omega + 1` connected internal nodes for the
/// vote result on `(m, sigma)`. `respond` replaces the answers of nodes in
/// `faulty`.
#[allow(clippy::too_many_arguments)]
pub fn mv_verify_external(
    ext: u32,
    m: &Message,
    sigma: &Signature,
    connected: &[u32],
    choice: &OmegaChoice,
    nodes: &[RecipientState],
    faulty: &BTreeSet<u32>,
    respond: &mut dyn FnMut(u32, MvResponse) -> MvResponse,
) -> Result<MvExt, ProtocolError> {
    let params = nodes
        .first()
        .map(|s| s.params)
        .ok_or_else(|| ProtocolError::UnknownNode("empty network".into()))?;
    let omega_set = select_omega(ext, NodeId::External(ext), connected, params.omega, choice)?;
    let responses: Vec<MvResponse> = omega_set
        .into_iter()
        .map(|i| {
            let honest = nodes[i as usize - 1]
                .mv_result(m, sigma)
                .map_or(MvResponse::NoVote, MvResponse::Outcome);
            if faulty.contains(&i) {
                respond(i, honest)
            } else {
                honest
            }
        })
        .collect();
    Ok(mv_ext_decide(&responses, params.omega))
}
