//! Bit-exact message encodings.
//!
//! Integers are written most significant bit first. Secret bodies are
//! one-time-pad encrypted, so their length is exactly the key material they
//! consume:
//!
//! | body      | layout                                             | bits                     |
//! |-----------|----------------------------------------------------|--------------------------|
//! | key slice | `N k` keys in index order, each `point‖mul‖add`    | `N k y`                  |
//! | key chunk | `k` entries of `offset (ceil(log2 N k) bits)‖key`   | `k (y + ceil(log2 N k))` |
//!
//! A chunk offset is the global index minus the first index of the source's
//! slice. Public messages travel on authenticated channels:
//!
//! | message        | layout                                                |
//! |----------------|-------------------------------------------------------|
//! | pair           | `len (64 bits)‖message bits‖N^2 k tags of b bits`     |
//! | package        | `pair‖l_rec (16 bits)`                                |
//! | verify request | package                                               |
//! | level / vote   | 16-bit two's complement                               |
//! | MV response    | 2 bits: `00` none, `01` accepted, `10` rejected       |

use bitvec::field::BitField;
use sha2::{Digest as _, Sha256};

use super::{
    Digest, KeyChunk, MvOutcome, MvResponse, NodeId, Package, Params, ProtocolError, Signature,
};
use crate::as2u::{AuthKey, BitStr, Bits, Message};

/// Transport for one-time-pad encrypted bodies.
pub trait SecureChannel {
    /// Sends `body` from `from` to `to` and returns what the receiver
    /// decrypts.
    fn send_secret(
        &mut self,
        from: NodeId,
        to: NodeId,
        body: &BitStr,
    ) -> Result<Bits, ProtocolError>;

    /// True when bodies arrive unchanged and nothing is accounted, so the
    /// sender may skip the encoding round trip.
    fn is_identity(&self) -> bool {
        false
    }
}

/// Delivers bodies unchanged without any key accounting.
#[derive(Debug, Default, Clone, Copy)]
pub struct DirectChannel;

impl SecureChannel for DirectChannel {
    fn send_secret(
        &mut self,
        _from: NodeId,
        _to: NodeId,
        body: &BitStr,
    ) -> Result<Bits, ProtocolError> {
        Ok(body.to_bitvec())
    }

    fn is_identity(&self) -> bool {
        true
    }
}

/// Appends the low `width` bits of `value`, most significant first.
pub fn push_uint(bits: &mut Bits, value: u64, width: u32) {
    if width == 0 {
        return;
    }
    let start = bits.len();
    bits.resize(start + width as usize, false);
    bits[start..].store_be(value & (u64::MAX >> (64 - width)));
}

/// Sequential reader over a bitstring.
pub struct Reader<'a> {
    bits: &'a BitStr,
    pos: usize,
    what: &'static str,
}

impl<'a> Reader<'a> {
    pub fn new(bits: &'a BitStr, what: &'static str) -> Self {
        Self { bits, pos: 0, what }
    }

    pub fn uint(&mut self, width: u32) -> Result<u64, ProtocolError> {
        let w = width as usize;
        if self.pos + w > self.bits.len() {
            return Err(self.error(format!("truncated at bit {}", self.pos)));
        }
        let v = if w == 0 {
            0
        } else {
            self.bits[self.pos..self.pos + w].load_be::<u64>()
        };
        self.pos += w;
        Ok(v)
    }

    pub fn take(&mut self, len: usize) -> Result<&'a BitStr, ProtocolError> {
        if self.pos + len > self.bits.len() {
            return Err(self.error(format!("truncated at bit {}", self.pos)));
        }
        let out = &self.bits[self.pos..self.pos + len];
        self.pos += len;
        Ok(out)
    }

    pub fn finish(self) -> Result<(), ProtocolError> {
        if self.pos != self.bits.len() {
            return Err(self.error(format!("{} trailing bits", self.bits.len() - self.pos)));
        }
        Ok(())
    }

    fn error(&self, detail: String) -> ProtocolError {
        ProtocolError::Malformed {
            what: self.what,
            detail,
        }
    }
}

fn push_key(bits: &mut Bits, key: &AuthKey, params: &Params) {
    let w = params.family.field_bits();
    push_uint(bits, key.point, w);
    push_uint(bits, key.mul, w);
    push_uint(bits, key.add, params.b());
}

fn read_key(r: &mut Reader, params: &Params) -> Result<AuthKey, ProtocolError> {
    let w = params.family.field_bits();
    Ok(AuthKey {
        point: r.uint(w)?,
        mul: r.uint(w)?,
        add: r.uint(params.b())?,
    })
}

pub fn encode_key_slice(params: &Params, keys: &[AuthKey]) -> Bits {
    let mut bits = Bits::with_capacity(keys.len() * params.y() as usize);
    for key in keys {
        push_key(&mut bits, key, params);
    }
    bits
}

pub fn decode_key_slice(params: &Params, bits: &BitStr) -> Result<Vec<AuthKey>, ProtocolError> {
    let mut r = Reader::new(bits, "key slice");
    let keys = (0..params.share_size())
        .map(|_| read_key(&mut r, params))
        .collect::<Result<Vec<_>, _>>()?;
    r.finish()?;
    Ok(keys)
}

pub fn encode_key_chunk(params: &Params, chunk: &KeyChunk) -> Result<Bits, ProtocolError> {
    let start = params.slice_start(chunk.source);
    let width = params.index_bits();
    let mut bits = Bits::new();
    for (&r, key) in chunk.indices.iter().zip(&chunk.keys) {
        let offset = r
            .checked_sub(start)
            .filter(|&o| (o as u64) < (1u64 << width))
            .ok_or_else(|| ProtocolError::Malformed {
                what: "key chunk",
                detail: format!("index {r} not encodable for source {}", chunk.source),
            })?;
        push_uint(&mut bits, offset as u64, width);
        push_key(&mut bits, key, params);
    }
    Ok(bits)
}

pub fn decode_key_chunk(
    params: &Params,
    source: u32,
    target: u32,
    bits: &BitStr,
) -> Result<KeyChunk, ProtocolError> {
    let start = params.slice_start(source);
    let width = params.index_bits();
    let mut r = Reader::new(bits, "key chunk");
    let mut indices = Vec::with_capacity(params.k as usize);
    let mut keys = Vec::with_capacity(params.k as usize);
    for _ in 0..params.k {
        indices.push(start + r.uint(width)? as u32);
        keys.push(read_key(&mut r, params)?);
    }
    r.finish()?;
    Ok(KeyChunk {
        source,
        target,
        indices,
        keys,
    })
}

pub fn encode_pair(m: &Message, sigma: &Signature) -> Bits {
    let mut bits = Bits::with_capacity(64 + m.len() + sigma.tags.len() * sigma.b as usize);
    push_uint(&mut bits, m.len() as u64, 64);
    bits.extend_from_bitslice(m.bits());
    for &t in &sigma.tags {
        push_uint(&mut bits, t, sigma.b);
    }
    bits
}

pub fn decode_pair(params: &Params, bits: &BitStr) -> Result<(Message, Signature), ProtocolError> {
    let mut r = Reader::new(bits, "pair");
    let (m, sigma) = read_pair(&mut r, params)?;
    r.finish()?;
    Ok((m, sigma))
}

fn read_pair(r: &mut Reader, params: &Params) -> Result<(Message, Signature), ProtocolError> {
    let len = r.uint(64)?;
    if len > params.family.a {
        return Err(ProtocolError::Malformed {
            what: "pair",
            detail: format!("message of {len} bits exceeds a = {}", params.family.a),
        });
    }
    let m = Message::from_bits(r.take(len as usize)?.to_bitvec());
    let tags = (0..params.total_keys())
        .map(|_| r.uint(params.b()))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((
        m,
        Signature {
            b: params.b(),
            tags,
        },
    ))
}

pub fn encode_package(pkg: &Package) -> Bits {
    let mut bits = encode_pair(&pkg.m, &pkg.sigma);
    push_uint(&mut bits, pkg.l_rec as u64, 16);
    bits
}

pub fn decode_package(params: &Params, bits: &BitStr) -> Result<Package, ProtocolError> {
    let mut r = Reader::new(bits, "package");
    let (m, sigma) = read_pair(&mut r, params)?;
    let l_rec = r.uint(16)? as u32;
    r.finish()?;
    Ok(Package { m, sigma, l_rec })
}

pub fn encode_level(level: i32) -> Bits {
    let mut bits = Bits::new();
    push_uint(&mut bits, level as i16 as u16 as u64, 16);
    bits
}

pub fn decode_level(bits: &BitStr) -> Result<i32, ProtocolError> {
    let mut r = Reader::new(bits, "level");
    let v = r.uint(16)? as u16 as i16 as i32;
    r.finish()?;
    Ok(v)
}

pub fn encode_mv_response(resp: MvResponse) -> Bits {
    let mut bits = Bits::new();
    let code = match resp {
        MvResponse::NoVote => 0b00,
        MvResponse::Outcome(MvOutcome::Accepted) => 0b01,
        MvResponse::Outcome(MvOutcome::Rejected) => 0b10,
    };
    push_uint(&mut bits, code, 2);
    bits
}

pub fn decode_mv_response(bits: &BitStr) -> Result<MvResponse, ProtocolError> {
    let mut r = Reader::new(bits, "MV response");
    let resp = match r.uint(2)? {
        0b00 => MvResponse::NoVote,
        0b01 => MvResponse::Outcome(MvOutcome::Accepted),
        0b10 => MvResponse::Outcome(MvOutcome::Rejected),
        code => {
            return Err(ProtocolError::Malformed {
                what: "MV response",
                detail: format!("code {code:#b}"),
            })
        }
    };
    r.finish()?;
    Ok(resp)
}

/// SHA-256 of the encoded pair.
pub fn pair_digest(m: &Message, sigma: &Signature) -> Digest {
    let bytes = crate::as2u::pack(&encode_pair(m, sigma));
    Sha256::digest(bytes).into()
}

/// SHA-256 of the encoded package together with its sender.
pub fn package_digest(pkg: &Package, sender: NodeId) -> Digest {
    let mut hasher = Sha256::new();
    hasher.update(crate::as2u::pack(&encode_package(pkg)));
    hasher.update(format!("{sender}").as_bytes());
    hasher.finalize().into()
}
