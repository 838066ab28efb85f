//! Distribution stage and signing.

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::wire::{self, SecureChannel};
use super::{NodeId, Params, ProtocolError, Signature};
use crate::as2u::{AuthKey, Message, PreparedMessage};

/// Deterministic per-node random stream derived from a run seed.
pub fn node_rng(seed: u64, node: NodeId) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(match node {
        NodeId::Signer => 0,
        NodeId::Internal(i) => i as u64,
        NodeId::External(i) => (1 << 32) | i as u64,
    });
    rng
}

/// The signer's `N^2 k` keys; `keys[r - 1]` has global index `r`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SigningKey {
    pub keys: Vec<AuthKey>,
}

impl SigningKey {
    pub fn generate<R: RngCore + ?Sized>(params: &Params, rng: &mut R) -> Self {
        Self {
            keys: (0..params.total_keys())
                .map(|_| AuthKey::random(&params.family, rng))
                .collect(),
        }
    }

    /// Key with 1-based global index `r`.
    pub fn key(&self, r: u32) -> &AuthKey {
        &self.keys[r as usize - 1]
    }
}

/// Keys sent by the signer to one recipient, in global index order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeySlice {
    pub recipient: u32,
    pub keys: Vec<AuthKey>,
}

/// An ordered subset of one recipient's keys passed on to another recipient.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyChunk {
    pub source: u32,
    pub target: u32,
    /// 1-based global indices, in the order chosen by the source.
    pub indices: Vec<u32>,
    pub keys: Vec<AuthKey>,
}

/// The `k` keys a recipient holds from one source, with their indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyBlock {
    pub source: u32,
    pub indices: Vec<u32>,
    pub keys: Vec<AuthKey>,
    /// False when the chunk was missing or its indices were unusable; such a
    /// block fails every test.
    pub valid: bool,
}

/// A recipient's `N k` verification keys, one block per source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerificationKeyShare {
    pub owner: u32,
    /// `blocks[j - 1]` came from recipient `j`.
    pub blocks: Vec<KeyBlock>,
}

impl VerificationKeyShare {
    /// Builds the share of `owner` from the chunks addressed to it, indexed by
    /// source. Chunks with wrong sizes or indices outside the source's range
    /// produce invalid blocks.
    pub fn assemble(owner: u32, params: &Params, chunks: Vec<Option<KeyChunk>>) -> Self {
        let k = params.k as usize;
        let blocks = (1..=params.n)
            .map(|source| {
                let chunk = chunks.get(source as usize - 1).cloned().flatten();
                let Some(chunk) = chunk else {
                    return KeyBlock {
                        source,
                        indices: vec![],
                        keys: vec![],
                        valid: false,
                    };
                };
                let lo = params.slice_start(source);
                let hi = lo + params.share_size() as u32;
                let mut sorted = chunk.indices.clone();
                sorted.sort_unstable();
                sorted.dedup();
                let valid = chunk.indices.len() == k
                    && chunk.keys.len() == k
                    && sorted.len() == k
                    && sorted.iter().all(|&r| (lo..hi).contains(&r));
                KeyBlock {
                    source,
                    indices: chunk.indices,
                    keys: chunk.keys,
                    valid,
                }
            })
            .collect();
        Self { owner, blocks }
    }

    pub fn block(&self, source: u32) -> &KeyBlock {
        &self.blocks[source as usize - 1]
    }

    /// Number of keys in block `source` whose tag disagrees with `sigma`.
    /// Invalid blocks and signatures of the wrong size count as all wrong.
    pub fn mismatches(
        &self,
        source: u32,
        m: &PreparedMessage,
        sigma: &Signature,
        params: &Params,
    ) -> u32 {
        let block = self.block(source);
        if !block.valid || sigma.tags.len() != params.total_keys() || sigma.b != params.b() {
            return params.k;
        }
        block
            .indices
            .iter()
            .zip(&block.keys)
            .filter(|(&r, key)| m.tag(key).value != sigma.tags[r as usize - 1])
            .count() as u32
    }
}

/// Step 1: the slice of the signing key sent to each recipient.
pub fn distribute_step1(signing: &SigningKey, params: &Params) -> Vec<KeySlice> {
    let nk = params.share_size();
    params
        .internal_ids()
        .map(|i| {
            let start = params.slice_start(i) as usize - 1;
            KeySlice {
                recipient: i,
                keys: signing.keys[start..start + nk].to_vec(),
            }
        })
        .collect()
}

/// Step 2: recipient `slice.recipient` splits its keys uniformly at random
/// into `N` ordered subsets of size `k`. Chunk `j - 1` is addressed to
/// recipient `j`; the owner's own chunk is included.
pub fn distribute_step2<R: RngCore + ?Sized>(
    slice: &KeySlice,
    params: &Params,
    rng: &mut R,
) -> Vec<KeyChunk> {
    let i = slice.recipient;
    let start = params.slice_start(i);
    let mut offsets: Vec<u32> = (0..params.share_size() as u32).collect();
    offsets.shuffle(rng);
    offsets
        .chunks(params.k as usize)
        .zip(params.internal_ids())
        .map(|(part, j)| KeyChunk {
            source: i,
            target: j,
            indices: part.iter().map(|&o| start + o).collect(),
            keys: part.iter().map(|&o| slice.keys[o as usize]).collect(),
        })
        .collect()
}

/// Hooks for dishonest behavior during distribution.
pub trait DistributionBehavior {
    /// Called on every slice before the signer sends it.
    fn slice(&mut self, _slice: &mut KeySlice) {}
    /// Called on every chunk before it leaves its source, including chunks a
    /// recipient keeps for itself.
    fn chunk(&mut self, _chunk: &mut KeyChunk) {}
}

/// Everyone follows the protocol.
pub struct Honest;

impl DistributionBehavior for Honest {}

impl<F: FnMut(&mut KeyChunk)> DistributionBehavior for F {
    fn chunk(&mut self, chunk: &mut KeyChunk) {
        self(chunk)
    }
}

/// Outcome of a complete distribution stage.
#[derive(Debug, Clone)]
pub struct Deployment {
    pub params: Params,
    pub signing_key: SigningKey,
    /// Slices as received, `slices[i - 1]` for recipient `i`.
    pub slices: Vec<KeySlice>,
    /// Every chunk as sent (after any tampering), in source-major order.
    pub chunks: Vec<KeyChunk>,
    /// `shares[i - 1]` for recipient `i`.
    pub shares: Vec<VerificationKeyShare>,
}

/// Runs both distribution steps over `channel`, drawing randomness from
/// per-node streams of `seed`.
pub fn distribute(
    params: &Params,
    seed: u64,
    channel: &mut dyn SecureChannel,
    behavior: &mut dyn DistributionBehavior,
) -> Result<Deployment, ProtocolError> {
    let mut signer_rng = node_rng(seed, NodeId::Signer);
    let signing_key = SigningKey::generate(params, &mut signer_rng);

    let mut slices = Vec::with_capacity(params.n as usize);
    for mut slice in distribute_step1(&signing_key, params) {
        behavior.slice(&mut slice);
        if channel.is_identity() {
            slices.push(slice);
            continue;
        }
        let body = wire::encode_key_slice(params, &slice.keys);
        let to = NodeId::Internal(slice.recipient);
        let received = channel.send_secret(NodeId::Signer, to, &body)?;
        slices.push(KeySlice {
            recipient: slice.recipient,
            keys: wire::decode_key_slice(params, &received)?,
        });
    }

    let n = params.n as usize;
    let mut inbox: Vec<Vec<Option<KeyChunk>>> = vec![vec![None; n]; n];
    let mut chunks = Vec::with_capacity(n * n);
    for slice in &slices {
        let mut rng = node_rng(seed, NodeId::Internal(slice.recipient));
        for mut chunk in distribute_step2(slice, params, &mut rng) {
            behavior.chunk(&mut chunk);
            let delivered = if chunk.source == chunk.target || channel.is_identity() {
                chunk.clone()
            } else {
                let body = wire::encode_key_chunk(params, &chunk)?;
                let from = NodeId::Internal(chunk.source);
                let to = NodeId::Internal(chunk.target);
                let received = channel.send_secret(from, to, &body)?;
                wire::decode_key_chunk(params, chunk.source, chunk.target, &received)?
            };
            inbox[chunk.target as usize - 1][chunk.source as usize - 1] = Some(delivered);
            chunks.push(chunk);
        }
    }

    let shares = inbox
        .into_iter()
        .enumerate()
        .map(|(i, received)| VerificationKeyShare::assemble(i as u32 + 1, params, received))
        .collect();
    Ok(Deployment {
        params: *params,
        signing_key,
        slices,
        chunks,
        shares,
    })
}

/// Tags of `m` under every key of the signing key.
pub fn sign(
    signing: &SigningKey,
    m: &Message,
    params: &Params,
) -> Result<Signature, ProtocolError> {
    let prepared = PreparedMessage::new(m, &params.family)?;
    Ok(Signature {
        b: params.b(),
        tags: signing
            .keys
            .iter()
            .map(|key| prepared.tag(key).value)
            .collect(),
    })
}
