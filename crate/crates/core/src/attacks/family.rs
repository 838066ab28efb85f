//! Exhaustive check of the hash family over its whole key space.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::AttackError;
use crate::as2u::{self, random_message, AuthKey, Bits, Message, PreparedMessage};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct As2uCheck {
    pub a: u64,
    pub b: u32,
    pub s: u32,
    pub y: u32,
    /// Messages whose tag distribution was checked; all of them when
    /// `exhaustive_messages`.
    pub messages: u64,
    pub exhaustive_messages: bool,
    /// Every message gives each tag under exactly `2^(y - b)` keys.
    pub uniform: bool,
    pub pairs: u64,
    /// Largest `Pr[tag(m2) = t2 | tag(m1) = t1]` over the pairs.
    pub max_ratio: f64,
    /// `2^(1 - b)`.
    pub ratio_bound: f64,
}

impl As2uCheck {
    pub fn pass(&self) -> bool {
        self.uniform && self.pairs > 0 && self.max_ratio <= self.ratio_bound
    }
}

/// Key number `u` in `0..2^y`, read as point ‖ multiplier ‖ mask.
fn key(u: u64, b: u32, field_bits: u32) -> AuthKey {
    let fmask = (1u64 << field_bits) - 1;
    AuthKey {
        point: u >> (field_bits + b),
        mul: (u >> b) & fmask,
        add: u & ((1u64 << b) - 1),
    }
}

fn message_from_index(i: u64, a: u64) -> Message {
    let mut bits = Bits::with_capacity(a as usize);
    for j in (0..a).rev() {
        bits.push(i >> j & 1 == 1);
    }
    Message::from_bits(bits)
}

/// Tags of `m` under every key, in key order.
fn all_tags(m: &Message, params: &as2u::FamilyParams) -> Result<Vec<u8>, AttackError> {
    let prepared = PreparedMessage::new(m, params).map_err(crate::protocol::ProtocolError::from)?;
    let fb = params.field_bits();
    Ok((0..1u64 << params.y)
        .map(|u| prepared.tag(&key(u, params.b, fb)).value as u8)
        .collect())
}

/// Enumerates all `2^y` keys of the family for `(a, b)` with minimal `s`.
///
/// Uniformity is checked for every `a`-bit message when `a <= 16`, else for
/// `sample_messages` random ones; the pair ratio for `pairs` random distinct
/// pairs.
pub fn as2u_check(
    a: u64,
    b: u32,
    sample_messages: u64,
    pairs: u64,
    seed: u64,
) -> Result<As2uCheck, AttackError> {
    let params = as2u::make_params(a, b).map_err(crate::protocol::ProtocolError::from)?;
    if params.y > 24 || b > 8 {
        return Err(AttackError::Coalition(format!(
            "key space 2^{} too large",
            params.y
        )));
    }
    let exhaustive = a <= 16;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let messages: Vec<Message> = if exhaustive {
        (0..1u64 << a).map(|i| message_from_index(i, a)).collect()
    } else {
        (0..sample_messages)
            .map(|_| random_message(a as usize, &mut rng))
            .collect()
    };
    let expected = 1u64 << (params.y - b);
    let uniform = messages
        .par_iter()
        .map(|m| -> Result<bool, AttackError> {
            let mut counts = vec![0u64; 1 << b];
            for t in all_tags(m, &params)? {
                counts[t as usize] += 1;
            }
            Ok(counts.iter().all(|&c| c == expected))
        })
        .try_reduce(|| true, |x, y| Ok(x && y))?;

    let pair_list: Vec<(Message, Message)> = (0..pairs)
        .map(|_| loop {
            let m1 = random_message(a as usize, &mut rng);
            let m2 = random_message(a as usize, &mut rng);
            if m1 != m2 {
                break (m1, m2);
            }
        })
        .collect();
    let max_ratio = pair_list
        .par_iter()
        .map(|(m1, m2)| -> Result<f64, AttackError> {
            let t1 = all_tags(m1, &params)?;
            let t2 = all_tags(m2, &params)?;
            let width = 1usize << b;
            let mut joint = vec![0u64; width * width];
            let mut single = vec![0u64; width];
            for (&x, &y) in t1.iter().zip(&t2) {
                joint[x as usize * width + y as usize] += 1;
                single[x as usize] += 1;
            }
            Ok((0..width * width)
                .filter(|&i| single[i / width] > 0)
                .map(|i| joint[i] as f64 / single[i / width] as f64)
                .fold(0.0, f64::max))
        })
        .try_reduce(|| 0.0, |x, y| Ok(x.max(y)))?;

    Ok(As2uCheck {
        a,
        b,
        s: params.s,
        y: params.y,
        messages: messages.len() as u64,
        exhaustive_messages: exhaustive,
        uniform,
        pairs,
        max_ratio,
        ratio_bound: 2f64.powi(1 - b as i32),
    })
}
