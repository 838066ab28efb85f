//! Exhaustive search over rubbish-key patterns during distribution.
//!
//! A pattern is a coalition plus, for each member, the honest recipients it
//! sends corrupted chunks to. With an honest signer every honest recipient
//! must still verify the genuine signature at `l_max` when the coalition has
//! at most `omega_max` members; one member more must be able to break that.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::AttackError;
use crate::as2u::{random_message, Message};
use crate::bounds::{self, OptimizeInput};
use crate::protocol::wire::DirectChannel;
use crate::protocol::{
    distribute, sign, verification_level, Deployment, Honest, Params, Signature,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RubbishPattern {
    pub coalition: Vec<u32>,
    /// Honest recipients each member corrupts its chunk for.
    pub targets: BTreeMap<u32, Vec<u32>>,
    /// Lowest honest level under the pattern.
    pub min_level: i32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcceptabilityReport {
    pub n: u32,
    pub l_max: u32,
    pub omega_max: u32,
    pub patterns: u64,
    /// First pattern within tolerance that pushes an honest node below
    /// `l_max`.
    pub violation: Option<RubbishPattern>,
    /// A pattern with `omega_max + 1` members that does, if any.
    pub beyond: Option<RubbishPattern>,
}

impl AcceptabilityReport {
    pub fn pass(&self) -> bool {
        self.violation.is_none() && self.beyond.is_some()
    }
}

fn subsets(n: u32, size: usize) -> Vec<Vec<u32>> {
    fn go(start: u32, n: u32, size: usize, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for i in start..=n {
            cur.push(i);
            go(i + 1, n, size, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(1, n, size, &mut Vec::new(), &mut out);
    out
}

struct Setup {
    params: Params,
    deployment: Deployment,
    m: Message,
    sigma: Signature,
}

impl Setup {
    /// Decodes `mask` into the pattern (bit `c * H + h` set when member `c`
    /// corrupts its chunk for honest recipient `h`) and evaluates it.
    fn evaluate(&self, coalition: &[u32], mask: u64) -> RubbishPattern {
        let honest: Vec<u32> = self
            .params
            .internal_ids()
            .filter(|i| !coalition.contains(i))
            .collect();
        let h = honest.len();
        let mut targets = BTreeMap::new();
        for (ci, &c) in coalition.iter().enumerate() {
            let hit: Vec<u32> = (0..h)
                .filter(|&hi| mask >> (ci * h + hi) & 1 == 1)
                .map(|hi| honest[hi])
                .collect();
            targets.insert(c, hit);
        }
        let min_level = honest
            .iter()
            .map(|&i| {
                let mut share = self.deployment.shares[i as usize - 1].clone();
                for (c, hit) in &targets {
                    if hit.contains(&i) {
                        for key in &mut share.blocks[*c as usize - 1].keys {
                            key.add ^= 1;
                        }
                    }
                }
                verification_level(&share, &self.m, &self.sigma, &self.params)
            })
            .min()
            .unwrap_or(self.params.l_max as i32);
        RubbishPattern {
            coalition: coalition.to_vec(),
            targets,
            min_level,
        }
    }
}

/// Checks every rubbish pattern of `omega_max` members for network size `n`
/// and `l_max`, then searches for a failing pattern with one member more,
/// starting from the pattern where everyone corrupts everything.
///
/// Uses small keys (`k = 3`, `b = 4`, `a = 16`) since only block validity
/// matters here.
pub fn attack_acceptability(
    n: u32,
    l_max: u32,
    seed: u64,
) -> Result<AcceptabilityReport, AttackError> {
    let omega_max = bounds::acceptability_max_omega(n, l_max);
    let cfg = OptimizeInput::new(n, 0, omega_max, l_max, 16, 1e-10).scheme(3, 4, 0.5);
    let params = Params::new(&cfg)?;
    let deployment = distribute(&params, seed, &mut DirectChannel, &mut Honest)?;
    let mut rng = super::trial_rng(seed, 0);
    let m = random_message(16, &mut rng);
    let sigma = sign(&deployment.signing_key, &m, &params)?;
    let setup = Setup {
        params,
        deployment,
        m,
        sigma,
    };

    let top = l_max as i32;
    let honest_count = (n - omega_max) as usize;
    let mask_bits = omega_max as usize * honest_count;
    let coalitions = subsets(n, omega_max as usize);
    let patterns = coalitions.len() as u64 * (1u64 << mask_bits);
    let violation = coalitions
        .par_iter()
        .flat_map_iter(|c| (0..1u64 << mask_bits).map(move |mask| (c, mask)))
        .map(|(c, mask)| setup.evaluate(c, mask))
        .find_first(|p| p.min_level < top);

    let over = Setup {
        params: setup.params.with_omega_unchecked(omega_max + 1),
        ..setup
    };
    let beyond = if omega_max + 1 < n {
        let bits = (omega_max as usize + 1) * (n - omega_max - 1) as usize;
        subsets(n, omega_max as usize + 1).iter().find_map(|c| {
            (0..1u64 << bits)
                .rev()
                .map(|mask| over.evaluate(c, mask))
                .find(|p| p.min_level < top)
        })
    } else {
        None
    };

    Ok(AcceptabilityReport {
        n,
        l_max,
        omega_max,
        patterns,
        violation,
        beyond,
    })
}
