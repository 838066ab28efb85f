//! Adversarial runs of the broadcast primitive.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::AttackError;
use crate::protocol::{broadcast, BroadcastOutcome, Relay};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BroadcastReport {
    pub n: u32,
    pub omega: u32,
    pub runs: u64,
    /// Runs where honest nodes disagreed.
    pub agreement_violations: u64,
    /// Runs with an honest sender where an honest node delivered another
    /// value.
    pub validity_violations: u64,
}

impl BroadcastReport {
    pub fn pass(&self) -> bool {
        self.runs > 0 && self.agreement_violations == 0 && self.validity_violations == 0
    }
}

/// The i-th faulty transmission carries bit i of `strategy`.
struct Table {
    strategy: u64,
    calls: u32,
}

impl Relay<u8> for Table {
    fn relay(&mut self, _path: &[u32], _to: u32, _honest: &u8) -> u8 {
        let v = (self.strategy >> self.calls & 1) as u8;
        self.calls += 1;
        v
    }
}

fn tally(
    report: &mut BroadcastReport,
    out: &BroadcastOutcome<u8>,
    sender: u32,
    input: u8,
    faulty: &BTreeSet<u32>,
) {
    let honest: Vec<u8> = out
        .delivered
        .iter()
        .filter(|(p, _)| !faulty.contains(p))
        .map(|(_, &v)| v)
        .collect();
    report.runs += 1;
    if honest.windows(2).any(|w| w[0] != w[1]) {
        report.agreement_violations += 1;
    }
    if !faulty.contains(&sender) && honest.iter().any(|&v| v != input) {
        report.validity_violations += 1;
    }
}

/// Every choice of sender, faulty node and binary input, and every binary
/// value at each point where the faulty node transmits. `n` nodes tolerate
/// `omega = 1`.
pub fn broadcast_exhaustive(n: u32) -> Result<BroadcastReport, AttackError> {
    let p: Vec<u32> = (1..=n).collect();
    let mut report = BroadcastReport {
        n,
        omega: 1,
        runs: 0,
        agreement_violations: 0,
        validity_violations: 0,
    };
    for &sender in &p {
        for &bad in &p {
            let faulty = BTreeSet::from([bad]);
            for input in 0..2u8 {
                let mut probe = Table {
                    strategy: 0,
                    calls: 0,
                };
                broadcast(&p, sender, input, 1, &faulty, 0, &mut probe)?;
                if probe.calls >= 32 {
                    return Err(AttackError::Coalition(format!(
                        "{} transmission points",
                        probe.calls
                    )));
                }
                for strategy in 0..1u64 << probe.calls {
                    let mut adv = Table { strategy, calls: 0 };
                    let out = broadcast(&p, sender, input, 1, &faulty, 0, &mut adv)?;
                    tally(&mut report, &out, sender, input, &faulty);
                }
            }
        }
    }
    Ok(report)
}

/// `runs` broadcasts among `n` nodes with `omega` distinct faulty nodes
/// sending independent random values from `0..domain` at every point.
pub fn broadcast_randomized(
    n: u32,
    omega: u32,
    domain: u8,
    runs: u64,
    seed: u64,
) -> Result<BroadcastReport, AttackError> {
    let p: Vec<u32> = (1..=n).collect();
    let mut report = BroadcastReport {
        n,
        omega,
        runs: 0,
        agreement_violations: 0,
        validity_violations: 0,
    };
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    for _ in 0..runs {
        let sender = rng.gen_range(1..=n);
        let faulty = super::random_coalition(n, omega as usize, &mut rng);
        let input = rng.gen_range(0..domain);
        let mut local = ChaCha20Rng::seed_from_u64(rng.gen());
        let mut adv = |_: &[u32], _: u32, _: &u8| local.gen_range(0..domain);
        let out = broadcast(&p, sender, input, omega, &faulty, 0, &mut adv)?;
        tally(&mut report, &out, sender, input, &faulty);
    }
    Ok(report)
}
