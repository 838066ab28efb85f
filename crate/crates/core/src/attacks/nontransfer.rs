//! Non-transferability and repudiation attacks.
//!
//! The coalition tampers with the tags of a genuine signature so that one
//! honest recipient accepts with room to forward while another rejects the
//! forwarded copy. A dishonest signer can hand out wrong keys in step 1, but
//! since every key ends up with exactly one holder that is the same as
//! tampering with the matching tag, so both variants act on tags.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{random_coalition, trial_rng, AdversaryView, AttackError, TrialReport};
use crate::as2u::{random_message, Message};
use crate::bounds::{self, SchemeConfig};
use crate::protocol::wire::DirectChannel;
use crate::protocol::{
    distribute, majority_vote, sign, Deployment, Honest, HonestRelay, MvAdversary, MvOutcome,
    Params, RecipientState, Signature,
};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coalition {
    /// The signer plus `omega - 1` internal recipients.
    #[default]
    WithSigner,
    /// `omega` internal recipients; the signer is honest.
    Signerless,
}

impl Coalition {
    fn internal_members(self, omega: u32) -> usize {
        match self {
            Coalition::WithSigner => omega.saturating_sub(1) as usize,
            Coalition::Signerless => omega as usize,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct NontransferOptions {
    pub coalition: Coalition,
    /// Level the coalition wants accepted; defaults to `l_max`.
    pub target_level: Option<u32>,
    /// Wrong tags aimed at each honest block; defaults to the midpoint of
    /// the thresholds at the target level and the one below.
    pub mismatches_per_block: Option<f64>,
}

impl NontransferOptions {
    fn per_block(&self, params: &Params) -> Result<f64, AttackError> {
        let l = self.target_level.unwrap_or(params.l_max);
        if l == 0 || l > params.l_max {
            return Err(AttackError::Coalition(format!(
                "target level {l} outside 1..={}",
                params.l_max
            )));
        }
        Ok(self.mismatches_per_block.unwrap_or_else(|| {
            let s = |l| bounds::level_fraction(params.s0, l, params.l_max);
            (s(l) + s(l - 1)) / 2.0 * params.k as f64
        }))
    }
}

/// One tampered signature and how the honest recipients judge it.
#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub deployment: Deployment,
    pub coalition: BTreeSet<u32>,
    pub victim: u32,
    pub message: Message,
    pub signature: Signature,
    /// `l_ver` at every honest internal recipient.
    pub levels: BTreeMap<u32, i32>,
    /// Some honest node can forward at level `L >= 1` to an honest node
    /// whose level is below `L - 1`.
    pub success: bool,
}

fn flip_tag<R: Rng + ?Sized>(sigma: &mut Signature, r: u32, rng: &mut R) {
    let delta = rng.gen_range(1..1u64 << sigma.b);
    sigma.tags[r as usize - 1] ^= delta;
}

fn transfer_fails(levels: &BTreeMap<u32, i32>) -> bool {
    let lowest = levels.values().copied().min().unwrap_or(0);
    levels.values().any(|&l| l >= 1 && lowest < l - 1)
}

/// Runs trial `t`: honest distribution, a genuine signature, then tags
/// tampered from what the coalition sees.
///
/// Blocks the coalition handed to the victim are spoiled in full and left
/// intact for everyone else. In slices of honest sources the coalition only
/// knows which keys it holds itself, so it spoils random other positions,
/// `mismatches_per_block` per honest block on average.
pub fn nontransfer_trial(
    params: &Params,
    opts: &NontransferOptions,
    seed: u64,
    t: u64,
) -> Result<TrialOutcome, AttackError> {
    let per_block = opts.per_block(params)?;
    let mut rng = trial_rng(seed, t);
    let deployment = distribute(params, rng.gen(), &mut DirectChannel, &mut Honest)?;
    let coalition = random_coalition(
        params.n,
        opts.coalition.internal_members(params.omega),
        &mut rng,
    );
    let honest: Vec<u32> = params
        .internal_ids()
        .filter(|i| !coalition.contains(i))
        .collect();
    let victim = *honest
        .choose(&mut rng)
        .ok_or_else(|| AttackError::Coalition("no honest recipient".into()))?;
    let message = random_message(params.family.a.min(64) as usize, &mut rng);
    let mut signature = sign(&deployment.signing_key, &message, params)?;
    let view = AdversaryView::new(&deployment, &coalition, vec![], false)?;

    for &c in &coalition {
        for &r in view.known_block(c, victim).unwrap_or(&[]) {
            flip_tag(&mut signature, r, &mut rng);
        }
    }
    let held: BTreeSet<u32> = view
        .shares
        .values()
        .flat_map(|s| s.blocks.iter().flat_map(|b| b.indices.iter().copied()))
        .collect();
    let spoil = (per_block * honest.len() as f64).round() as usize;
    for &h in &honest {
        let start = params.slice_start(h);
        let unknown: Vec<u32> = (start..start + params.share_size() as u32)
            .filter(|r| !held.contains(r))
            .collect();
        for &r in unknown.choose_multiple(&mut rng, spoil.min(unknown.len())) {
            flip_tag(&mut signature, r, &mut rng);
        }
    }

    let levels: BTreeMap<u32, i32> = honest
        .iter()
        .map(|&i| {
            let share = &deployment.shares[i as usize - 1];
            (
                i,
                crate::protocol::verification_level(share, &message, &signature, params),
            )
        })
        .collect();
    Ok(TrialOutcome {
        success: transfer_fails(&levels),
        deployment,
        coalition,
        victim,
        message,
        signature,
        levels,
    })
}

fn count_trials<F>(trials: u64, f: F) -> Result<[u64; 4], AttackError>
where
    F: Fn(u64) -> Result<[bool; 4], AttackError> + Sync,
{
    (0..trials)
        .into_par_iter()
        .map(|t| f(t).map(|flags| flags.map(u64::from)))
        .try_reduce(
            || [0; 4],
            |x, y| Ok([x[0] + y[0], x[1] + y[1], x[2] + y[2], x[3] + y[3]]),
        )
}

/// Monte Carlo estimate of the non-transferability failure rate against
/// `nontransfer_bound`.
pub fn attack_nontransfer(
    cfg: &SchemeConfig,
    opts: &NontransferOptions,
    trials: u64,
    seed: u64,
) -> Result<TrialReport, AttackError> {
    let params = Params::new(cfg)?;
    let bound = bounds::nontransfer_bound(cfg)?;
    let [successes, ..] = count_trials(trials, |t| {
        nontransfer_trial(&params, opts, seed, t).map(|o| [o.success, false, false, false])
    })?;
    Ok(TrialReport::new(
        format!("nontransfer ({:?})", opts.coalition),
        trials,
        successes,
        bound,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepudiationReport {
    pub report: TrialReport,
    /// Non-transferability on the same trials.
    pub nontransfer: TrialReport,
    /// Trials in which a majority vote took place.
    pub votes_held: u64,
    /// Repudiations on trials that were not non-transferability failures.
    pub outside_nontransfer: u64,
}

/// Repudiation on the same tampered signatures: success when an honest
/// recipient accepts at level 1 or more but the majority vote rejects.
///
/// The vote is started by the lowest honest node at level 0 if there is
/// one, otherwise by a coalition member; faulty voters vote -1.
pub fn attack_repudiation(
    cfg: &SchemeConfig,
    opts: &NontransferOptions,
    trials: u64,
    seed: u64,
) -> Result<RepudiationReport, AttackError> {
    let params = Params::new(cfg)?;
    let bound = bounds::repudiation_bound(cfg)?;
    let nt_bound = bounds::nontransfer_bound(cfg)?;
    let [successes, votes_held, nontransfer_successes, outside_nontransfer] =
        count_trials(trials, |t| {
            let o = nontransfer_trial(&params, opts, seed, t)?;
            let initiator = o
                .levels
                .iter()
                .find(|&(_, &l)| l == 0)
                .map(|(&i, _)| i)
                .or_else(|| o.coalition.first().copied());
            let Some(initiator) = initiator else {
                return Ok([false, false, o.success, false]);
            };
            let mut nodes: Vec<RecipientState> = o
                .deployment
                .shares
                .iter()
                .map(|s| RecipientState::new(s.clone(), params))
                .collect();
            let mut votes =
                |path: &[u32], _to: u32, honest: &i32| if path.len() == 1 { -1 } else { *honest };
            let mut adversary = MvAdversary {
                faulty: o.coalition.clone(),
                payload: &mut HonestRelay,
                votes: &mut votes,
            };
            let report = majority_vote(
                initiator,
                &o.message,
                &o.signature,
                &mut nodes,
                &mut adversary,
            )?;
            let rejected = report.outcomes.values().any(|&x| x == MvOutcome::Rejected);
            let accepted_high = o.levels.values().any(|&l| l >= 1);
            let repudiated = accepted_high && rejected;
            Ok([repudiated, true, o.success, repudiated && !o.success])
        })?;
    Ok(RepudiationReport {
        report: TrialReport::new(
            format!("repudiation ({:?})", opts.coalition),
            trials,
            successes,
            bound,
        ),
        nontransfer: TrialReport::new(
            format!("nontransfer ({:?})", opts.coalition),
            trials,
            nontransfer_successes,
            nt_bound,
        ),
        votes_held,
        outside_nontransfer,
    })
}
