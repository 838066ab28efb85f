//! Per-link key accounting and pad material.

use std::collections::BTreeMap;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{LinkId, LinkKind};
use crate::as2u::Bits;
use crate::protocol::ProtocolError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Purpose {
    /// One-time-pad encryption during key distribution.
    Otp,
    Auth,
}

/// Cumulative accounting of one link.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LinkLedger {
    pub refilled: u64,
    pub otp: u64,
    pub auth: u64,
    #[serde(skip)]
    carry: f64,
}

impl LinkLedger {
    pub fn debits(&self) -> u64 {
        self.otp + self.auth
    }

    pub fn balance(&self) -> u64 {
        self.refilled - self.debits()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct KeyLedger {
    links: BTreeMap<LinkId, LinkLedger>,
}

impl KeyLedger {
    pub fn open(&mut self, link: LinkId) {
        self.links.entry(link).or_default();
    }

    /// Adds `amount` bits; the fractional part is kept for later credits.
    pub fn credit(&mut self, link: LinkId, amount: f64) {
        let entry = self.links.entry(link).or_default();
        let total = entry.carry + amount.max(0.0);
        // absorbs rounding in products such as rate * exp(-ln 2)
        let whole = (total + 1e-9).floor();
        entry.refilled += whole as u64;
        entry.carry = (total - whole).max(0.0);
    }

    /// Consumes `bits` from the pool and returns the pool offset of the first
    /// consumed bit. OTP material is only ever drawn inside the internal
    /// subnetwork.
    pub fn debit(
        &mut self,
        link: LinkId,
        purpose: Purpose,
        bits: u64,
    ) -> Result<u64, ProtocolError> {
        if purpose == Purpose::Otp && link.kind() == LinkKind::External {
            return Err(ProtocolError::Malformed {
                what: "otp debit",
                detail: format!("{link} leaves the internal subnetwork"),
            });
        }
        let entry = self
            .links
            .get_mut(&link)
            .ok_or_else(|| ProtocolError::UnknownNode(format!("link {link}")))?;
        if entry.balance() < bits {
            return Err(ProtocolError::PoolExhausted {
                link: link.to_string(),
                needed: bits,
                available: entry.balance(),
            });
        }
        let offset = entry.debits();
        match purpose {
            Purpose::Otp => entry.otp += bits,
            Purpose::Auth => entry.auth += bits,
        }
        Ok(offset)
    }

    pub fn get(&self, link: LinkId) -> Option<&LinkLedger> {
        self.links.get(&link)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&LinkId, &LinkLedger)> {
        self.links.iter()
    }
}

/// Shared key material of every link: the bit at pool offset `o` is the
/// same at both ends.
#[derive(Debug, Clone)]
pub struct PadSource {
    seed: u64,
}

impl PadSource {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    fn stream(&self, link: LinkId) -> ChaCha20Rng {
        let mut h = Sha256::new();
        h.update(b"link pool");
        h.update(self.seed.to_be_bytes());
        h.update(link.to_string().as_bytes());
        ChaCha20Rng::from_seed(h.finalize().into())
    }

    /// `len` pool bits starting at `offset`.
    pub fn pad(&self, link: LinkId, offset: u64, len: usize) -> Bits {
        let mut rng = self.stream(link);
        rng.set_word_pos((offset / 32) as u128);
        let skip = (offset % 32) as usize;
        let mut bits = Bits::with_capacity(len + 32);
        while bits.len() < skip + len {
            let w = rng.next_u32();
            for i in (0..32).rev() {
                bits.push(w >> i & 1 == 1);
            }
        }
        bits[skip..skip + len].to_bitvec()
    }
}
