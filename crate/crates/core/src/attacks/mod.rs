//! Adversary strategies and Monte Carlo estimators checked against the
//! closed-form bounds.
//!
//! Strategies only ever see an [`AdversaryView`]: the coalition's own key
//! material plus public traffic. Trials are independent and seeded by
//! `(seed, trial)`, so results do not depend on scheduling.

mod acceptability;
mod broadcast;
mod counter;
mod family;
mod forgery;
mod nontransfer;

pub use acceptability::{attack_acceptability, AcceptabilityReport, RubbishPattern};
pub use broadcast::{broadcast_exhaustive, broadcast_randomized, BroadcastReport};
pub use counter::{attack_counter_exhaustion, CounterReport};
pub use family::{as2u_check, As2uCheck};
pub use forgery::{attack_forgery, ForgeryOptions};
pub use nontransfer::{
    attack_nontransfer, attack_repudiation, nontransfer_trial, Coalition, NontransferOptions,
    RepudiationReport, TrialOutcome,
};

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::as2u::{AuthKey, Message};
use crate::bounds::BoundsError;
use crate::protocol::{
    Deployment, KeyChunk, Params, ProtocolError, Signature, VerificationKeyShare,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AttackError {
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error("coalition: {0}")]
    Coalition(String),
}

/// Two-sided 99% normal quantile.
pub const WILSON_Z: f64 = 2.5758293035489;

/// Wilson score interval for `successes` out of `trials`.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Outcome of a Monte Carlo estimate against a bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub strategy: String,
    pub trials: u64,
    pub successes: u64,
    pub empirical_rate: f64,
    pub bound: f64,
    /// Distance from the empirical rate down to the lower 99% Wilson limit.
    pub slack: f64,
    pub wilson_upper: f64,
    /// Enough trials for the bound to be visible (`bound >= 10 / trials`).
    pub observable: bool,
    /// `empirical_rate <= bound + slack`.
    pub pass: bool,
}

impl TrialReport {
    pub fn new(strategy: impl Into<String>, trials: u64, successes: u64, bound: f64) -> Self {
        let empirical_rate = if trials == 0 {
            0.0
        } else {
            successes as f64 / trials as f64
        };
        let (lower, upper) = wilson_interval(successes, trials, WILSON_Z);
        let slack = (empirical_rate - lower).max(0.0);
        Self {
            strategy: strategy.into(),
            trials,
            successes,
            empirical_rate,
            bound,
            slack,
            wilson_upper: upper,
            observable: trials >= 10_000 && bound >= 10.0 / trials as f64,
            pass: empirical_rate <= bound + slack,
        }
    }
}

/// Per-trial generator derived from `(seed, trial)` alone.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Everything a coalition of internal recipients legitimately knows.
#[derive(Debug, Clone)]
pub struct AdversaryView {
    pub params: Params,
    pub coalition: BTreeSet<u32>,
    /// Keys received from the signer in step 1, by member.
    pub slices: BTreeMap<u32, Vec<AuthKey>>,
    /// Chunks each member sent in step 2 (including to itself).
    pub sent: Vec<KeyChunk>,
    pub shares: BTreeMap<u32, VerificationKeyShare>,
    /// Message-signature pairs seen on the network.
    pub observed: Vec<(Message, Signature)>,
}

impl AdversaryView {
    /// Extracts the coalition's part of `deployment`; at most `omega`
    /// members unless `unchecked`.
    pub fn new(
        deployment: &Deployment,
        coalition: &BTreeSet<u32>,
        observed: Vec<(Message, Signature)>,
        unchecked: bool,
    ) -> Result<Self, AttackError> {
        let params = deployment.params;
        if coalition.iter().any(|&c| c == 0 || c > params.n) {
            return Err(AttackError::Coalition(format!(
                "{coalition:?} outside 1..={}",
                params.n
            )));
        }
        if !unchecked && coalition.len() > params.omega as usize {
            return Err(AttackError::Coalition(format!(
                "{} internal members exceed omega = {}",
                coalition.len(),
                params.omega
            )));
        }
        Ok(Self {
            params,
            coalition: coalition.clone(),
            slices: deployment
                .slices
                .iter()
                .filter(|s| coalition.contains(&s.recipient))
                .map(|s| (s.recipient, s.keys.clone()))
                .collect(),
            sent: deployment
                .chunks
                .iter()
                .filter(|c| coalition.contains(&c.source))
                .cloned()
                .collect(),
            shares: deployment
                .shares
                .iter()
                .filter(|s| coalition.contains(&s.owner))
                .map(|s| (s.owner, s.clone()))
                .collect(),
            observed,
        })
    }

    /// Keys known to the coalition, by global index.
    pub fn known_keys(&self) -> BTreeMap<u32, AuthKey> {
        let mut known = BTreeMap::new();
        for (&member, keys) in &self.slices {
            let start = self.params.slice_start(member);
            for (off, key) in keys.iter().enumerate() {
                known.insert(start + off as u32, *key);
            }
        }
        for share in self.shares.values() {
            for block in share.blocks.iter().filter(|b| b.valid) {
                for (&r, key) in block.indices.iter().zip(&block.keys) {
                    known.insert(r, *key);
                }
            }
        }
        known
    }

    /// Global indices the coalition knows to sit in recipient `target`'s
    /// block from source `source`.
    pub fn known_block(&self, source: u32, target: u32) -> Option<&[u32]> {
        self.sent
            .iter()
            .find(|c| c.source == source && c.target == target)
            .map(|c| c.indices.as_slice())
    }
}

/// Members drawn uniformly from `1..=n`.
pub fn random_coalition<R: Rng + ?Sized>(n: u32, size: usize, rng: &mut R) -> BTreeSet<u32> {
    let all: Vec<u32> = (1..=n).collect();
    rand::seq::index::sample(rng, n as usize, size)
        .into_iter()
        .map(|i| all[i])
        .collect()
}

#[cfg(test)]
mod tests;
