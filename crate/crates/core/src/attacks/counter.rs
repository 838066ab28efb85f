//! Counter exhaustion: dishonest nodes feed an honest external node bad
//! packages so that its delegated requests fail and the internal nodes it
//! relies on end up blocking it.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{random_coalition, trial_rng, AttackError};
use crate::as2u::random_message;
use crate::bounds::SchemeConfig;
use crate::protocol::wire::DirectChannel;
use crate::protocol::{
    delegated_verify, distribute, sign, ExternalState, Honest, NodeId, Package, Params,
    RecipientState, Signature,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CounterReport {
    pub trials: u64,
    /// Bad packages the honest external node processed.
    pub attempts: u64,
    /// Highest counter any honest internal node kept for the honest
    /// external node.
    pub max_counter: u32,
    /// Counter value at which the external node is blocked, `M + omega`.
    pub limit: u32,
    pub honest_blocked: bool,
    /// A replayed request changed some counter.
    pub replay_counted: bool,
    /// A genuine package afterwards reached `l_max` at the honest external.
    pub genuine_accepted: bool,
}

impl CounterReport {
    pub fn pass(&self) -> bool {
        self.max_counter < self.limit
            && !self.honest_blocked
            && !self.replay_counted
            && self.genuine_accepted
    }
}

/// External node 1 is honest; externals `2..=M` and `omega` random internal
/// nodes are dishonest. Every dishonest node sends E1 a package with random
/// tags claiming `l_max`, as often as E1 keeps listening.
pub fn attack_counter_exhaustion(
    cfg: &SchemeConfig,
    trials: u64,
    seed: u64,
) -> Result<CounterReport, AttackError> {
    let params = Params::new(cfg)?;
    if params.m < 1 {
        return Err(AttackError::Coalition("needs an external node".into()));
    }
    let connected: Vec<u32> = params.internal_ids().collect();
    let mut report = CounterReport {
        trials,
        attempts: 0,
        max_counter: 0,
        limit: params.m + params.omega,
        honest_blocked: false,
        replay_counted: false,
        genuine_accepted: true,
    };
    for t in 0..trials {
        let mut rng = trial_rng(seed, t);
        let deployment = distribute(&params, rng.gen(), &mut DirectChannel, &mut Honest)?;
        let coalition = random_coalition(params.n, params.omega as usize, &mut rng);
        let mut internals: Vec<RecipientState> = deployment
            .shares
            .iter()
            .map(|s| RecipientState::new(s.clone(), params))
            .collect();
        let mut ext = ExternalState::new(1, params);
        let len = params.family.a.min(64) as usize;

        let mut senders: Vec<NodeId> = coalition.iter().map(|&c| NodeId::Internal(c)).collect();
        senders.extend((2..=params.m).map(NodeId::External));
        let mut packages = Vec::new();
        // a sender gets another go only while E1 has not blocked it
        for round in 0..=params.m + params.omega {
            for &sender in &senders {
                let pkg = Package {
                    m: random_message(len, &mut rng),
                    sigma: Signature {
                        b: params.b(),
                        tags: (0..params.total_keys())
                            .map(|_| rng.gen_range(0..1u64 << params.b()))
                            .collect(),
                    },
                    l_rec: params.l_max,
                };
                let verdict = delegated_verify(
                    &mut ext,
                    &pkg,
                    sender,
                    &connected,
                    &mut internals,
                    &mut |_, r| r,
                )?;
                if verdict.is_some() {
                    report.attempts += 1;
                }
                if round == 0 {
                    packages.push(pkg);
                }
            }
        }

        let honest_nodes: BTreeSet<u32> = connected
            .iter()
            .copied()
            .filter(|i| !coalition.contains(i))
            .collect();
        let counter = |internals: &[RecipientState]| -> u32 {
            honest_nodes
                .iter()
                .map(|&i| {
                    internals[i as usize - 1]
                        .counters
                        .get(&1)
                        .copied()
                        .unwrap_or(0)
                })
                .max()
                .unwrap_or(0)
        };
        let before = counter(&internals);
        report.max_counter = report.max_counter.max(before);
        report.honest_blocked |= honest_nodes.iter().any(|&i| {
            internals[i as usize - 1]
                .block_list
                .contains(&NodeId::External(1))
        });

        // replay on copies: a request already seen must not count again
        let mut copies = internals.clone();
        for pkg in &packages {
            for &i in &honest_nodes {
                let node = &mut copies[i as usize - 1];
                node.handle_verify_request(1, pkg);
                let seen = node.counters.get(&1).copied();
                node.handle_verify_request(1, pkg);
                report.replay_counted |= node.counters.get(&1).copied() != seen;
            }
        }

        let m = random_message(len, &mut rng);
        let sigma = sign(&deployment.signing_key, &m, &params)?;
        let from = *honest_nodes.first().expect("honest majority");
        let pkg = Package {
            m,
            sigma,
            l_rec: params.l_max,
        };
        let verdict = delegated_verify(
            &mut ext,
            &pkg,
            NodeId::Internal(from),
            &connected,
            &mut internals,
            &mut |_, r| r,
        )?;
        report.genuine_accepted &= verdict.and_then(|v| v.l_ver) == Some(params.l_max as i32);
    }
    Ok(report)
}
