//! Signature forgery by a coalition of internal recipients and malicious
//! external nodes.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{random_coalition, trial_rng, AdversaryView, AttackError, TrialReport};
use crate::as2u::{random_message, AuthKey, Message, PreparedMessage};
use crate::bounds::{self, SchemeConfig};
use crate::protocol::wire::DirectChannel;
use crate::protocol::{
    distribute, sign, Honest, NodeId, Package, Params, RecipientState, Signature,
};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForgeryOptions {
    /// Internal coalition size; defaults to `omega`.
    pub coalition_size: Option<usize>,
    /// Hand the coalition every share. Not a bound test: forgery must then
    /// always succeed.
    pub know_all: bool,
    /// Message length in bits; defaults to `min(a, 64)`.
    pub message_bits: Option<usize>,
}

/// Tags for `forged`: correct under every key the coalition knows, and the
/// observed tag elsewhere (right whenever the hash of both messages collides).
fn craft(
    view: &AdversaryView,
    known: &BTreeMap<u32, AuthKey>,
    forged: &Message,
) -> Option<Signature> {
    let (_, sigma) = view.observed.first()?;
    let prepared = PreparedMessage::new(forged, &view.params.family).ok()?;
    let mut out = sigma.clone();
    for (&r, key) in known {
        out.tags[r as usize - 1] = prepared.tag(key).value;
    }
    Some(out)
}

fn trial(
    params: &Params,
    cfg: &SchemeConfig,
    opts: &ForgeryOptions,
    seed: u64,
    t: u64,
) -> Result<bool, AttackError> {
    let mut rng = trial_rng(seed, t);
    let deployment = distribute(params, rng.gen(), &mut DirectChannel, &mut Honest)?;
    let size = opts.coalition_size.unwrap_or(params.omega as usize);
    let coalition = random_coalition(params.n, size, &mut rng);
    let len = opts.message_bits.unwrap_or(cfg.a.min(64) as usize);
    let m = random_message(len, &mut rng);
    let sigma = sign(&deployment.signing_key, &m, params)?;
    let view = if opts.know_all {
        let everyone = params.internal_ids().collect();
        AdversaryView::new(&deployment, &everyone, vec![(m.clone(), sigma)], true)?
    } else {
        AdversaryView::new(&deployment, &coalition, vec![(m.clone(), sigma)], false)?
    };
    let known = view.known_keys();

    let mut senders: Vec<NodeId> = coalition.iter().map(|&c| NodeId::Internal(c)).collect();
    senders.extend((1..=params.m).map(NodeId::External));
    for target in params.internal_ids().filter(|i| !coalition.contains(i)) {
        let mut state =
            RecipientState::new(deployment.shares[target as usize - 1].clone(), *params);
        for &sender in &senders {
            let forged = loop {
                let f = random_message(len, &mut rng);
                if f != m {
                    break f;
                }
            };
            let Some(sigma) = craft(&view, &known, &forged) else {
                continue;
            };
            let pkg = Package {
                m: forged,
                sigma,
                l_rec: 1,
            };
            if state
                .receive_package(&pkg, sender)
                .verdict()
                .is_some_and(|v| v.accepted)
            {
                return Ok(true);
            }
        }
    }
    Ok(false)
}

/// Monte Carlo estimate of the probability that some honest internal node
/// accepts a forged message at level 0 or above, against `forgery_bound`.
///
/// Each coalition member and each (malicious) external node makes one
/// attempt per honest target; a failure gets the sender blocked there.
pub fn attack_forgery(
    cfg: &SchemeConfig,
    opts: &ForgeryOptions,
    trials: u64,
    seed: u64,
) -> Result<TrialReport, AttackError> {
    let params = Params::new(cfg)?;
    let bound = bounds::forgery_bound(cfg)?;
    let successes = (0..trials)
        .into_par_iter()
        .map(|t| trial(&params, cfg, opts, seed, t).map(u64::from))
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    let name = if opts.know_all {
        "forgery (all keys known)"
    } else {
        "forgery"
    };
    Ok(TrialReport::new(name, trials, successes, bound))
}
