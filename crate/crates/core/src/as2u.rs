//! The almost strongly universal hash family used for signature tags.
//!
//! A family instance maps messages of at most `a` bits to `b`-bit tags using a
//! `y = 3b + 2s` bit key. Hashing is two-stage: the message is split into
//! `2^s + 1` coefficients of a polynomial over GF(2^(b+s)) which is evaluated
//! at a secret point, then the result `x` is mapped to `pi(k1 * x) + k2`,
//! where `pi` keeps the low `b` bits.
//!
//! All bitstrings are big-bit-endian: the first bit of a chunk is the most
//! significant bit of its integer value.

use bitvec::prelude::*;
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gf2m::{self, FieldElement, FieldError, FieldSpec};

pub type Bits = BitVec<u8, Msb0>;
pub type BitStr = BitSlice<u8, Msb0>;

/// Largest supported hashing field width.
pub const MAX_FIELD_BITS: u32 = 64;

/// Width of the length prefix added by [`Message::length_prefixed`].
pub const LENGTH_PREFIX_BITS: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum As2uError {
    #[error("tag length b = {0} must be at least 2")]
    TagTooShort(u32),
    #[error("message length bound a must be positive")]
    EmptyDomain,
    #[error("a = {a} with b = {b} needs a field wider than {MAX_FIELD_BITS} bits")]
    FieldTooWide { a: u64, b: u32 },
    #[error("message has {len} bits, family accepts at most {max}")]
    MessageTooLong { len: usize, max: u64 },
    #[error("key has {len} bits, expected {expected}")]
    KeyLength { len: usize, expected: usize },
    #[error("tag has {len} bits, expected {expected}")]
    TagLength { len: usize, expected: usize },
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Parameters of one hash family instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FamilyParams {
    pub a: u64,
    pub b: u32,
    pub s: u32,
    pub y: u32,
}

impl FamilyParams {
    /// Width of the hashing field, `b + s`.
    pub fn field_bits(&self) -> u32 {
        self.b + self.s
    }

    /// Number of polynomial coefficients, `2^s + 1`.
    pub fn chunks(&self) -> u64 {
        (1u64 << self.s) + 1
    }

    /// Padded message length, `(b + s)(2^s + 1)`.
    pub fn capacity(&self) -> u64 {
        self.field_bits() as u64 * self.chunks()
    }

    pub fn field(&self) -> FieldSpec {
        FieldSpec::new(self.field_bits()).expect("field width validated at construction")
    }

    fn tag_mask(&self) -> u64 {
        (1u64 << self.b) - 1
    }
}

/// Smallest `s >= 0` with `a <= (2^s + 1)(b + s)`.
pub fn min_s(a: u64, b: u32) -> Result<u32, As2uError> {
    if b < 2 {
        return Err(As2uError::TagTooShort(b));
    }
    if a == 0 {
        return Err(As2uError::EmptyDomain);
    }
    let mut s = 0u32;
    while b + s <= MAX_FIELD_BITS {
        let capacity = ((1u128 << s) + 1) * (b + s) as u128;
        if a as u128 <= capacity {
            return Ok(s);
        }
        s += 1;
    }
    Err(As2uError::FieldTooWide { a, b })
}

pub fn make_params(a: u64, b: u32) -> Result<FamilyParams, As2uError> {
    let s = min_s(a, b)?;
    Ok(FamilyParams {
        a,
        b,
        s,
        y: 3 * b + 2 * s,
    })
}

/// A message bitstring.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Message {
    bits: Bits,
}

impl Message {
    pub fn from_bits(bits: Bits) -> Self {
        Self { bits }
    }

    /// All bits of `bytes`, most significant bit first.
    pub fn from_bytes(bytes: &[u8]) -> Self {
        Self {
            bits: Bits::from_slice(bytes),
        }
    }

    /// Parses a string of `0`/`1` characters.
    pub fn from_bit_str(s: &str) -> Option<Self> {
        let mut bits = Bits::with_capacity(s.len());
        for c in s.chars() {
            match c {
                '0' => bits.push(false),
                '1' => bits.push(true),
                _ => return None,
            }
        }
        Some(Self { bits })
    }

    /// `len(payload)` as 64 bits followed by the payload bits, so that
    /// messages of different lengths never collide after zero padding.
    pub fn length_prefixed(payload: &[u8]) -> Self {
        let bit_len = (payload.len() as u64) * 8;
        let mut bits = Bits::from_slice(&bit_len.to_be_bytes());
        bits.extend_from_bitslice(Bits::from_slice(payload).as_bitslice());
        Self { bits }
    }

    pub fn bits(&self) -> &BitStr {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Big-bit-endian bytes, last byte zero padded.
    pub fn to_bytes(&self) -> Vec<u8> {
        pack(&self.bits)
    }
}

/// Packs bits into bytes, zero padding the final partial byte.
pub fn pack(bits: &BitStr) -> Vec<u8> {
    let mut owned = bits.to_bitvec();
    owned.set_uninitialized(false);
    owned.into_vec()
}

/// Reads `width` bits starting at `offset` as an unsigned integer.
fn read_uint(bits: &BitStr, offset: usize, width: usize) -> u64 {
    let end = (offset + width).min(bits.len());
    if offset >= end {
        return 0;
    }
    let v: u64 = bits[offset..end].load_be();
    // implicit zero padding on the right
    v << (offset + width - end)
}

fn push_uint(bits: &mut Bits, value: u64, width: u32) {
    if width == 0 {
        return;
    }
    let start = bits.len();
    bits.resize(start + width as usize, false);
    bits[start..].store_be(value & (u64::MAX >> (64 - width)));
}

/// Coefficients of the message polynomial as raw field values.
///
/// Chunk 0, the constant coefficient, is the first `b + s` message bits.
pub fn encode_raw(m: &Message, params: &FamilyParams) -> Result<Vec<u64>, As2uError> {
    if m.len() as u64 > params.a {
        return Err(As2uError::MessageTooLong {
            len: m.len(),
            max: params.a,
        });
    }
    let w = params.field_bits() as usize;
    let n = params.chunks() as usize;
    Ok((0..n).map(|i| read_uint(&m.bits, i * w, w)).collect())
}

pub fn encode_message(m: &Message, params: &FamilyParams) -> Result<Vec<FieldElement>, As2uError> {
    let field = params.field();
    encode_raw(m, params)?
        .into_iter()
        .map(|v| field.element(v).map_err(As2uError::from))
        .collect()
}

/// Reassembles coefficients into a bitstring of `capacity` bits.
pub fn decode_coefficients(coeffs: &[FieldElement], params: &FamilyParams) -> Bits {
    let mut bits = Bits::with_capacity(params.capacity() as usize);
    for c in coeffs {
        push_uint(&mut bits, c.value(), params.field_bits());
    }
    bits
}

/// One key of the family: evaluation point, multiplier and additive mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AuthKey {
    pub point: u64,
    pub mul: u64,
    pub add: u64,
}

impl AuthKey {
    /// Parses `y` bits as point (`b+s`) ‖ multiplier (`b+s`) ‖ mask (`b`).
    pub fn from_bits(bits: &BitStr, params: &FamilyParams) -> Result<Self, As2uError> {
        if bits.len() != params.y as usize {
            return Err(As2uError::KeyLength {
                len: bits.len(),
                expected: params.y as usize,
            });
        }
        let w = params.field_bits() as usize;
        Ok(Self {
            point: read_uint(bits, 0, w),
            mul: read_uint(bits, w, w),
            add: read_uint(bits, 2 * w, params.b as usize),
        })
    }

    pub fn to_bits(&self, params: &FamilyParams) -> Bits {
        let mut bits = Bits::with_capacity(params.y as usize);
        push_uint(&mut bits, self.point, params.field_bits());
        push_uint(&mut bits, self.mul, params.field_bits());
        push_uint(&mut bits, self.add, params.b);
        bits
    }

    pub fn to_bytes(&self, params: &FamilyParams) -> Vec<u8> {
        pack(&self.to_bits(params))
    }

    pub fn from_bytes(bytes: &[u8], params: &FamilyParams) -> Result<Self, As2uError> {
        let bits = BitSlice::<u8, Msb0>::from_slice(bytes);
        let y = params.y as usize;
        if bits.len() < y || bytes.len() != y.div_ceil(8) {
            return Err(As2uError::KeyLength {
                len: bits.len(),
                expected: y,
            });
        }
        Self::from_bits(&bits[..y], params)
    }

    /// A uniformly random key.
    pub fn random<R: RngCore + ?Sized>(params: &FamilyParams, rng: &mut R) -> Self {
        let fmask = params.field().mask();
        Self {
            point: rng.gen::<u64>() & fmask,
            mul: rng.gen::<u64>() & fmask,
            add: rng.gen::<u64>() & params.tag_mask(),
        }
    }
}

/// A `b`-bit tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Tag {
    pub value: u64,
    pub b: u32,
}

impl Tag {
    pub fn to_bits(&self) -> Bits {
        let mut bits = Bits::with_capacity(self.b as usize);
        push_uint(&mut bits, self.value, self.b);
        bits
    }

    pub fn from_bits(bits: &BitStr, b: u32) -> Result<Self, As2uError> {
        if bits.len() != b as usize {
            return Err(As2uError::TagLength {
                len: bits.len(),
                expected: b as usize,
            });
        }
        Ok(Self {
            value: read_uint(bits, 0, b as usize),
            b,
        })
    }
}

/// A message encoded once for repeated tag evaluation under many keys.
#[derive(Debug, Clone)]
pub struct PreparedMessage {
    params: FamilyParams,
    field: FieldSpec,
    coeffs: Vec<u64>,
}

impl PreparedMessage {
    pub fn new(m: &Message, params: &FamilyParams) -> Result<Self, As2uError> {
        Ok(Self {
            params: *params,
            field: params.field(),
            coeffs: encode_raw(m, params)?,
        })
    }

    pub fn params(&self) -> &FamilyParams {
        &self.params
    }

    pub fn tag(&self, key: &AuthKey) -> Tag {
        let h = self.field.horner_raw(&self.coeffs, key.point);
        let value = (self.field.mul_raw(key.mul, h) & self.params.tag_mask()) ^ key.add;
        Tag {
            value,
            b: self.params.b,
        }
    }
}

/// Tag of `m` under `key`.
pub fn eval(params: &FamilyParams, key: &AuthKey, m: &Message) -> Result<Tag, As2uError> {
    let field = params.field();
    let coeffs = encode_message(m, params)?;
    let point = field.element(key.point)?;
    let h = gf2m::poly_eval(&coeffs, &point)?;
    let scaled = gf2m::mul(&field.element(key.mul)?, &h)?;
    let projected = gf2m::project(&scaled, params.b)?;
    Ok(Tag {
        value: projected.value() ^ (key.add & params.tag_mask()),
        b: params.b,
    })
}

/// Random message of exactly `len` bits.
pub fn random_message<R: RngCore + ?Sized>(len: usize, rng: &mut R) -> Message {
    let mut bits = Bits::with_capacity(len);
    for _ in 0..len {
        bits.push(rng.gen());
    }
    Message { bits }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Linear scan over s, kept separate from `min_s`.
    fn scan_s(a: u64, b: u32) -> u32 {
        (0..)
            .find(|&s| a <= ((1u64 << s) + 1) * (b + s) as u64)
            .unwrap()
    }

    #[test]
    fn min_s_examples() {
        assert_eq!(min_s(9, 2).unwrap(), 1);
        assert_eq!(min_s(1, 2).unwrap(), 0);
        assert_eq!(min_s(8_388_608, 7).unwrap(), 19);
        assert_eq!(min_s(8_388_608, 2).unwrap(), 19);
        assert_eq!(min_s(4, 1), Err(As2uError::TagTooShort(1)));
        assert_eq!(min_s(0, 2), Err(As2uError::EmptyDomain));
        assert!(matches!(
            min_s(u64::MAX, 40),
            Err(As2uError::FieldTooWide { .. })
        ));
    }

    #[test]
    fn min_s_matches_scan() {
        for b in 2..=20 {
            for a in [
                1u64,
                5,
                9,
                100,
                1000,
                4096,
                65_537,
                1 << 20,
                8_388_608,
                1 << 30,
            ] {
                assert_eq!(min_s(a, b).unwrap(), scan_s(a, b), "a={a} b={b}");
            }
        }
    }

    #[test]
    fn make_params_examples() {
        let p = make_params(9, 2).unwrap();
        assert_eq!((p.s, p.y), (1, 8));
        let p = make_params(8_388_608, 7).unwrap();
        assert_eq!((p.s, p.y), (19, 59));
        let p = make_params(8_388_608, 2).unwrap();
        assert_eq!((p.s, p.y), (19, 44));
        let p = make_params(12, 3).unwrap();
        assert_eq!((p.s, p.y), (1, 11));
        let p = make_params(36, 3).unwrap();
        assert_eq!((p.s, p.y), (3, 15));
    }

    #[test]
    fn encode_examples() {
        let p = make_params(9, 2).unwrap();
        let m = Message::from_bit_str("110000011").unwrap();
        let raw = encode_raw(&m, &p).unwrap();
        assert_eq!(raw, vec![0b110, 0b000, 0b011]);

        let empty = encode_raw(&Message::default(), &p).unwrap();
        assert_eq!(empty, vec![0, 0, 0]);

        let short = Message::from_bit_str("1").unwrap();
        assert_eq!(encode_raw(&short, &p).unwrap(), vec![0b100, 0, 0]);

        let long = Message::from_bit_str("1101100111").unwrap();
        assert!(matches!(
            encode_raw(&long, &p),
            Err(As2uError::MessageTooLong { len: 10, max: 9 })
        ));
    }

    #[test]
    fn eval_examples() {
        let p = make_params(9, 2).unwrap();
        let m = Message::from_bit_str("101011001").unwrap();
        let zero = AuthKey {
            point: 0,
            mul: 0,
            add: 0,
        };
        assert_eq!(eval(&p, &zero, &m).unwrap().value, 0);

        // point 0 selects the constant coefficient 0b101; projected to 2 bits
        let k = AuthKey {
            point: 0,
            mul: 1,
            add: 0,
        };
        assert_eq!(eval(&p, &k, &m).unwrap().value, 0b01);

        let k = AuthKey {
            point: 0,
            mul: 1,
            add: 0b11,
        };
        assert_eq!(eval(&p, &k, &m).unwrap().value, 0b10);
    }

    #[test]
    fn key_bit_order() {
        let p = make_params(9, 2).unwrap();
        // point 0b101, multiplier 0b011, mask 0b10
        let bits = Message::from_bit_str("10101110").unwrap().bits;
        let key = AuthKey::from_bits(&bits, &p).unwrap();
        assert_eq!(
            key,
            AuthKey {
                point: 0b101,
                mul: 0b011,
                add: 0b10
            }
        );
        assert_eq!(key.to_bits(&p), bits);
        assert_eq!(key.to_bytes(&p), vec![0b1010_1110]);
        assert!(AuthKey::from_bits(&bits[..7], &p).is_err());
    }

    #[test]
    fn byte_packing_zero_pads() {
        let m = Message::from_bit_str("1011").unwrap();
        assert_eq!(m.to_bytes(), vec![0b1011_0000]);
        let t = Tag { value: 0b101, b: 3 };
        assert_eq!(pack(&t.to_bits()), vec![0b1010_0000]);
    }

    #[test]
    fn length_prefix_separates_padding_collisions() {
        let p = make_params(200, 4).unwrap();
        let a = Message::length_prefixed(&[0x80]);
        let b = Message::length_prefixed(&[0x80, 0x00]);
        assert_eq!(a.len(), 72);
        assert_ne!(encode_raw(&a, &p).unwrap(), encode_raw(&b, &p).unwrap());
    }

    /// tags[key][msg] for every key of a small family
    fn tag_table(p: &FamilyParams) -> Vec<Vec<u64>> {
        let n_msgs = 1usize << p.a;
        let msgs: Vec<PreparedMessage> = (0..n_msgs)
            .map(|v| {
                let mut bits = Bits::new();
                push_uint(&mut bits, v as u64, p.a as u32);
                PreparedMessage::new(&Message::from_bits(bits), p).unwrap()
            })
            .collect();
        let mut table = Vec::with_capacity(1 << p.y);
        for kv in 0u64..(1 << p.y) {
            let mut bits = Bits::new();
            push_uint(&mut bits, kv, p.y);
            let key = AuthKey::from_bits(&bits, p).unwrap();
            table.push(msgs.iter().map(|m| m.tag(&key).value).collect());
        }
        table
    }

    #[test]
    fn prepared_matches_field_api() {
        let p = make_params(9, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let key = AuthKey::random(&p, &mut rng);
            let m = random_message(9, &mut rng);
            let prepared = PreparedMessage::new(&m, &p).unwrap();
            assert_eq!(prepared.tag(&key), eval(&p, &key, &m).unwrap());
        }
    }

    #[test]
    fn uniformity_exhaustive() {
        for (a, b) in [(4u64, 2u32), (9, 2), (12, 3)] {
            let p = make_params(a, b).unwrap();
            let table = tag_table(&p);
            let expected = 1usize << (p.y - p.b);
            for msg in [0usize, 1, (1 << a) - 1, 5] {
                let mut counts = vec![0usize; 1 << b];
                for row in &table {
                    counts[row[msg] as usize] += 1;
                }
                assert!(
                    counts.iter().all(|&c| c == expected),
                    "a={a} b={b} msg={msg}"
                );
            }
        }
    }

    /// Checks #{k: f(m1)=t1, f(m2)=t2} * 2^(b-1) <= #{k: f(m2)=t2} for all tags.
    fn check_pair(table: &[Vec<u64>], p: &FamilyParams, m1: usize, m2: usize) {
        let nt = 1usize << p.b;
        let mut joint = vec![0u64; nt * nt];
        let mut marginal = vec![0u64; nt];
        for row in table {
            joint[row[m1] as usize * nt + row[m2] as usize] += 1;
            marginal[row[m2] as usize] += 1;
        }
        for t1 in 0..nt {
            for t2 in 0..nt {
                assert!(
                    joint[t1 * nt + t2] << (p.b - 1) <= marginal[t2],
                    "m1={m1} m2={m2} t1={t1} t2={t2}"
                );
            }
        }
    }

    #[test]
    fn conditional_forgery_exhaustive_small() {
        let p = make_params(4, 2).unwrap();
        let table = tag_table(&p);
        for m1 in 0..16 {
            for m2 in 0..16 {
                if m1 != m2 {
                    check_pair(&table, &p, m1, m2);
                }
            }
        }
    }

    #[test]
    fn conditional_forgery_sampled_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (a, b) in [(9u64, 2u32), (12, 3)] {
            let p = make_params(a, b).unwrap();
            let table = tag_table(&p);
            for _ in 0..300 {
                let m1 = rng.gen_range(0..1usize << a);
                let m2 = rng.gen_range(0..1usize << a);
                if m1 != m2 {
                    check_pair(&table, &p, m1, m2);
                }
            }
        }
    }

    /// Keys as bitmasks: for a=9, b=2 there are 256 keys, stored as 4 words.
    type KeySet = [u64; 4];

    fn popcount(s: &KeySet) -> u32 {
        s.iter().map(|w| w.count_ones()).sum()
    }

    fn and(x: &KeySet, y: &KeySet) -> KeySet {
        [x[0] & y[0], x[1] & y[1], x[2] & y[2], x[3] & y[3]]
    }

    fn and_not(x: &KeySet, y: &KeySet) -> KeySet {
        [x[0] & !y[0], x[1] & !y[1], x[2] & !y[2], x[3] & !y[3]]
    }

    fn tag_sets(table: &[Vec<u64>], n_msgs: usize) -> Vec<Vec<KeySet>> {
        let mut sets = vec![vec![[0u64; 4]; 4]; n_msgs];
        for (k, row) in table.iter().enumerate() {
            for (mi, &t) in row.iter().enumerate() {
                sets[mi][t as usize][k / 64] |= 1 << (k % 64);
            }
        }
        sets
    }

    /// For every next attempt (m*, t*) with m* != m, the probability that it
    /// succeeds while all earlier attempts failed, given f(m) = t, is at most
    /// 2^(1-b): |S ∩ {f(m*)=t*}| * 2^(b-1) <= |{f(m)=t}|.
    fn check_joint_attempt(
        sets: &[Vec<KeySet>],
        base: &KeySet,
        survivors: &KeySet,
        m: usize,
        b: u32,
    ) {
        let total = popcount(base) as u64;
        for (mi, per_tag) in sets.iter().enumerate() {
            if mi == m {
                continue;
            }
            for ks in per_tag {
                let hit = popcount(&and(survivors, ks)) as u64;
                assert!(hit << (b - 1) <= total, "attempt on m*={mi}: {hit}/{total}");
            }
        }
    }

    #[test]
    fn repeated_forgery_attempts_exhaustive() {
        let p = make_params(9, 2).unwrap();
        assert_eq!(p.y, 8);
        let n_msgs = 512;
        let sets = tag_sets(&tag_table(&p), n_msgs);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for m in [0usize, 77, 511] {
            for t in 0..4 {
                let base = sets[m][t];
                check_joint_attempt(&sets, &base, &base, m, p.b);
                // second attempt after every possible failed first attempt
                for m1 in (0..n_msgs).filter(|&x| x != m) {
                    for t1 in 0..4 {
                        let s1 = and_not(&base, &sets[m1][t1]);
                        check_joint_attempt(&sets, &base, &s1, m, p.b);
                    }
                }
                // third attempt after sampled pairs of failures, half of them
                // retrying the same message
                for _ in 0..200 {
                    let m1 = loop {
                        let x = rng.gen_range(0..n_msgs);
                        if x != m {
                            break x;
                        }
                    };
                    let m2 = if rng.gen_bool(0.5) {
                        m1
                    } else {
                        rng.gen_range(0..n_msgs)
                    };
                    if m2 == m {
                        continue;
                    }
                    let s2 = and_not(
                        &and_not(&base, &sets[m1][rng.gen_range(0..4)]),
                        &sets[m2][rng.gen_range(0..4)],
                    );
                    check_joint_attempt(&sets, &base, &s2, m, p.b);
                }
            }
        }
    }

    /// Conditioning on a failed attempt can push the success probability of
    /// the next attempt above 2^(1-b): retrying the same message after
    /// excluding a low-probability tag. Worst case over all single failures
    /// from (m = 0, t) is exactly 28/52 = 7/13 for this family.
    #[test]
    fn conditioned_retry_can_exceed_single_attempt_bound() {
        let p = make_params(9, 2).unwrap();
        let n_msgs = 512;
        let sets = tag_sets(&tag_table(&p), n_msgs);
        let mut worst = (0u64, 1u64);
        for t in 0..4 {
            let base = sets[0][t];
            for m1 in 1..n_msgs {
                for t1 in 0..4 {
                    let s1 = and_not(&base, &sets[m1][t1]);
                    let total = popcount(&s1) as u64;
                    for per_tag in &sets[1..] {
                        for ks in per_tag {
                            let hit = popcount(&and(&s1, ks)) as u64;
                            if hit * worst.1 > worst.0 * total {
                                worst = (hit, total);
                            }
                        }
                    }
                }
            }
        }
        assert_eq!(worst, (28, 52));
    }

    proptest! {
        #[test]
        fn encode_roundtrip(len in 0usize..=36, seed: u64) {
            let p = make_params(36, 3).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = random_message(len, &mut rng);
            let coeffs = encode_message(&m, &p).unwrap();
            prop_assert_eq!(coeffs.len() as u64, p.chunks());
            let bits = decode_coefficients(&coeffs, &p);
            prop_assert_eq!(bits.len() as u64, p.capacity());
            prop_assert_eq!(&bits[..len], m.bits());
            prop_assert!(bits[len..].not_any());
        }

        #[test]
        fn key_serialization_roundtrip(b in 2u32..=20, a in 1u64..100_000, seed: u64) {
            let p = make_params(a, b).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let key = AuthKey::random(&p, &mut rng);
            prop_assert_eq!(AuthKey::from_bits(&key.to_bits(&p), &p).unwrap(), key);
            prop_assert_eq!(AuthKey::from_bytes(&key.to_bytes(&p), &p).unwrap(), key);
            let tag = Tag { value: rng.gen::<u64>() & ((1 << b) - 1), b };
            prop_assert_eq!(Tag::from_bits(&tag.to_bits(), b).unwrap(), tag);
        }
    }
}
