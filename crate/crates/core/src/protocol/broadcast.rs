//! Byzantine broadcast by recursive oral messages, OM(omega).
//!
//! Tolerates `omega` faulty participants when more than `3 omega` take part
//! and runs `omega + 1` rounds.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::ProtocolError;

/// Decides what a faulty participant actually sends.
pub trait Relay<V> {
    /// `path` lists the commanders from the original sender down to the
    /// current one (the faulty sender of this message); `honest` is what an
    /// honest node in its place would send.
    fn relay(&mut self, path: &[u32], to: u32, honest: &V) -> V;
}

/// Faulty nodes that nevertheless follow the protocol.
#[derive(Debug, Default, Clone, Copy)]
pub struct HonestRelay;

impl<V: Clone> Relay<V> for HonestRelay {
    fn relay(&mut self, _path: &[u32], _to: u32, honest: &V) -> V {
        honest.clone()
    }
}

impl<V, F: FnMut(&[u32], u32, &V) -> V> Relay<V> for F {
    fn relay(&mut self, path: &[u32], to: u32, honest: &V) -> V {
        self(path, to, honest)
    }
}

/// One point-to-point transmission.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BroadcastMessage {
    /// 1-based round.
    pub round: u32,
    pub from: u32,
    pub to: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BroadcastOutcome<V> {
    /// Value delivered at every participant; the sender delivers its input.
    pub delivered: BTreeMap<u32, V>,
    /// Every message, in sending order.
    pub messages: Vec<BroadcastMessage>,
}

fn majority<V: Clone + Ord>(values: &[V], default: &V) -> V {
    let mut counts: BTreeMap<&V, usize> = BTreeMap::new();
    for v in values {
        *counts.entry(v).or_default() += 1;
    }
    counts
        .into_iter()
        .find(|&(_, c)| 2 * c > values.len())
        .map(|(v, _)| v.clone())
        .unwrap_or_else(|| default.clone())
}

struct Run<'a, V> {
    faulty: &'a BTreeSet<u32>,
    default: V,
    adversary: &'a mut dyn Relay<V>,
    messages: Vec<BroadcastMessage>,
}

impl<V: Clone + Ord> Run<'_, V> {
    /// OM(depth) with `path.last()` as commander holding `value`.
    fn om(
        &mut self,
        depth: u32,
        path: &mut Vec<u32>,
        value: &V,
        lieutenants: &[u32],
    ) -> BTreeMap<u32, V> {
        let commander = *path.last().expect("path has a commander");
        let round = path.len() as u32;
        let mut received: BTreeMap<u32, V> = BTreeMap::new();
        for &l in lieutenants {
            let v = if self.faulty.contains(&commander) {
                self.adversary.relay(path, l, value)
            } else {
                value.clone()
            };
            self.messages.push(BroadcastMessage {
                round,
                from: commander,
                to: l,
            });
            received.insert(l, v);
        }
        if depth == 0 {
            return received;
        }
        // relayed[l][l2]: what l2 concluded about l's value in the sub-run
        let mut relayed: BTreeMap<u32, BTreeMap<u32, V>> = BTreeMap::new();
        for &l in lieutenants {
            let others: Vec<u32> = lieutenants.iter().copied().filter(|&x| x != l).collect();
            path.push(l);
            let sub = self.om(depth - 1, path, &received[&l], &others);
            path.pop();
            relayed.insert(l, sub);
        }
        lieutenants
            .iter()
            .map(|&l| {
                let mut votes = vec![received[&l].clone()];
                for &other in lieutenants.iter().filter(|&&x| x != l) {
                    votes.push(relayed[&other][&l].clone());
                }
                (l, majority(&votes, &self.default))
            })
            .collect()
    }
}

/// Broadcasts `value` from `sender` to all other `participants`.
pub fn broadcast<V: Clone + Ord>(
    participants: &[u32],
    sender: u32,
    value: V,
    omega: u32,
    faulty: &BTreeSet<u32>,
    default: V,
    adversary: &mut dyn Relay<V>,
) -> Result<BroadcastOutcome<V>, ProtocolError> {
    if participants.len() <= 3 * omega as usize || !participants.contains(&sender) {
        return Err(ProtocolError::BroadcastPrecondition {
            participants: participants.len(),
            omega,
        });
    }
    let lieutenants: Vec<u32> = participants
        .iter()
        .copied()
        .filter(|&p| p != sender)
        .collect();
    let mut run = Run {
        faulty,
        default,
        adversary,
        messages: Vec::new(),
    };
    let mut delivered = run.om(omega, &mut vec![sender], &value, &lieutenants);
    delivered.insert(sender, value);
    Ok(BroadcastOutcome {
        delivered,
        messages: run.messages,
    })
}
