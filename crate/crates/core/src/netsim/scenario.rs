//! Declarative scenario files (TOML).
//!
//! ```toml
//! seed = 7
//!
//! [scheme]            # k, b and s0 are optimized when any is missing
//! n = 4
//! m = 1
//! omega = 1
//! l_max = 1
//! a = 64
//! eps_tot = 1e-10
//! k = 20
//! b = 4
//! s0 = 0.5
//!
//! [topology]
//! external_links = [[1, 2, 3]]
//! initial_pool_bits = 1000000
//!
//! [auth]
//! enabled = true
//! eps_auth = 1e-14
//!
//! [behaviors]
//! P3 = { strategy = "rubbish_keys" }
//!
//! [[messages]]
//! random_bits = 64
//!
//! [[steps]]
//! action = "send"
//! from = "P0"
//! to = "P1"
//! message = 0
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{NetsimError, TopologySpec};
use crate::as2u::{Bits, Message};
use crate::bounds::{self, OptimizeInput, SchemeConfig};
use crate::protocol::NodeId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSection {
    pub n: u32,
    #[serde(default)]
    pub m: u32,
    pub omega: u32,
    pub l_max: u32,
    #[serde(default = "default_a")]
    pub a: u64,
    #[serde(default = "default_eps")]
    pub eps_tot: f64,
    pub k: Option<u64>,
    pub b: Option<u32>,
    pub s0: Option<f64>,
}

fn default_a() -> u64 {
    64
}

fn default_eps() -> f64 {
    1e-10
}

impl SchemeSection {
    /// Full parameters; runs the optimizer (for the given `b`, if any) unless
    /// `k`, `b` and `s0` are all set.
    pub fn resolve(&self) -> Result<SchemeConfig, NetsimError> {
        let input =
            OptimizeInput::new(self.n, self.m, self.omega, self.l_max, self.a, self.eps_tot);
        let cfg = match (self.k, self.b, self.s0) {
            (Some(k), Some(b), Some(s0)) => input.scheme(k, b, s0),
            (_, b, _) => {
                let input = match b {
                    Some(b) => input.with_b(b),
                    None => input,
                };
                let r = bounds::optimize(&input)?;
                input.scheme(r.k, r.b, r.s0)
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkConfig {
    #[serde(default)]
    pub external_links: Vec<Vec<u32>>,
    #[serde(default)]
    pub extra_links: Vec<(NodeId, NodeId)>,
    #[serde(default = "default_km")]
    pub sr_km: f64,
    #[serde(default = "default_km")]
    pub rr_km: f64,
    #[serde(default = "default_km")]
    pub ext_km: f64,
    #[serde(default = "default_pool")]
    pub initial_pool_bits: u64,
    /// Key rate at zero distance for `refill` steps, bits/s.
    #[serde(default = "default_rate0")]
    pub rate0: f64,
    #[serde(default = "default_db_per_km")]
    pub db_per_km: f64,
}

fn default_km() -> f64 {
    10.0
}

fn default_pool() -> u64 {
    10_000_000
}

fn default_rate0() -> f64 {
    1e6
}

fn default_db_per_km() -> f64 {
    0.2
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self {
            external_links: Vec::new(),
            extra_links: Vec::new(),
            sr_km: default_km(),
            rr_km: default_km(),
            ext_km: default_km(),
            initial_pool_bits: default_pool(),
            rate0: default_rate0(),
            db_per_km: default_db_per_km(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuthConfig {
    #[serde(default)]
    pub enabled: bool,
    #[serde(default = "default_eps_auth")]
    pub eps_auth: f64,
}

fn default_eps_auth() -> f64 {
    1e-14
}

impl Default for AuthConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            eps_auth: default_eps_auth(),
        }
    }
}

/// What a node does. Anything but `Honest` marks the node as faulty.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case", deny_unknown_fields)]
pub enum Behavior {
    #[default]
    Honest,
    /// Sends corrupted keys to the other recipients during distribution.
    RubbishKeys,
    /// Never answers verification or vote lookups.
    Silent,
    /// Answers every delegated verification request with `level`.
    ReportLevel { level: i32 },
    /// Flips the first `count` tags of every package it sends, and claims
    /// the top level.
    FlipTags { count: usize },
}

impl Behavior {
    pub fn is_honest(&self) -> bool {
        *self == Behavior::Honest
    }
}

/// A message given as bits, text, or a number of random bits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MessageSpec {
    pub bits: Option<String>,
    pub text: Option<String>,
    pub random_bits: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case", deny_unknown_fields)]
pub enum Step {
    /// The signer signs, or a holder forwards its copy.
    Send {
        from: NodeId,
        to: NodeId,
        message: usize,
    },
    /// Majority vote started by an internal node on its copy.
    Vote {
        initiator: u32,
        message: usize,
    },
    /// External node asks for the vote result on its copy.
    MvLookup {
        ext: u32,
        message: usize,
    },
    Refill {
        seconds: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub seed: u64,
    pub scheme: SchemeSection,
    #[serde(default)]
    pub topology: LinkConfig,
    #[serde(default)]
    pub auth: AuthConfig,
    #[serde(default)]
    pub behaviors: BTreeMap<NodeId, Behavior>,
    #[serde(default)]
    pub messages: Vec<MessageSpec>,
    #[serde(default)]
    pub steps: Vec<Step>,
}

impl Scenario {
    /// Everyone honest: the signer sends one message to every internal
    /// recipient and P1 forwards it to every external node.
    pub fn honest(cfg: &SchemeConfig, seed: u64) -> Self {
        let mut steps: Vec<Step> = (1..=cfg.n)
            .map(|i| Step::Send {
                from: NodeId::Signer,
                to: NodeId::Internal(i),
                message: 0,
            })
            .collect();
        steps.extend((1..=cfg.m).map(|e| Step::Send {
            from: NodeId::Internal(1),
            to: NodeId::External(e),
            message: 0,
        }));
        Self {
            seed,
            scheme: SchemeSection {
                n: cfg.n,
                m: cfg.m,
                omega: cfg.omega,
                l_max: cfg.l_max,
                a: cfg.a,
                eps_tot: cfg.eps_tot,
                k: Some(cfg.k),
                b: Some(cfg.b),
                s0: Some(cfg.s0),
            },
            topology: LinkConfig::default(),
            auth: AuthConfig::default(),
            behaviors: BTreeMap::new(),
            messages: vec![MessageSpec {
                bits: None,
                text: None,
                random_bits: Some(cfg.a.min(64) as usize),
            }],
            steps,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, NetsimError> {
        Self::from_toml_with_overrides(text, &[])
    }

    /// Parses `text` after applying `key.path=value` overrides.
    pub fn from_toml_with_overrides(text: &str, overrides: &[String]) -> Result<Self, NetsimError> {
        let mut doc: toml::Table =
            toml::from_str(text).map_err(|e| NetsimError::Scenario(e.to_string()))?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        doc.try_into()
            .map_err(|e: toml::de::Error| NetsimError::Scenario(e.to_string()))
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, NetsimError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| NetsimError::Scenario(format!("{}: {e}", path.display())))?;
        Self::from_toml_with_overrides(&text, overrides)
    }

    pub fn topology_spec(&self) -> TopologySpec {
        let t = &self.topology;
        TopologySpec {
            n: self.scheme.n,
            m: self.scheme.m,
            omega: self.scheme.omega,
            l_max: self.scheme.l_max,
            external_links: t.external_links.clone(),
            extra_links: t.extra_links.clone(),
            sr_km: t.sr_km,
            rr_km: t.rr_km,
            ext_km: t.ext_km,
            initial_pool_bits: t.initial_pool_bits,
        }
    }

    pub fn behavior(&self, node: NodeId) -> Behavior {
        self.behaviors.get(&node).copied().unwrap_or_default()
    }

    /// Messages with random content drawn from a stream of their own.
    pub fn resolve_messages(&self) -> Result<Vec<Message>, NetsimError> {
        let mut h = Sha256::new();
        h.update(b"scenario messages");
        h.update(self.seed.to_be_bytes());
        let mut rng = ChaCha20Rng::from_seed(h.finalize().into());
        self.messages
            .iter()
            .enumerate()
            .map(|(i, spec)| {
                let bad = |d: &str| NetsimError::Scenario(format!("message {i}: {d}"));
                match (&spec.bits, &spec.text, spec.random_bits) {
                    (Some(bits), None, None) => {
                        Message::from_bit_str(bits).ok_or_else(|| bad("bits must be 0 or 1"))
                    }
                    (None, Some(text), None) => Ok(Message::from_bytes(text.as_bytes())),
                    (None, None, Some(len)) => {
                        let bits: Bits = (0..len).map(|_| rng.gen::<bool>()).collect();
                        Ok(Message::from_bits(bits))
                    }
                    _ => Err(bad("exactly one of bits, text, random_bits")),
                }
            })
            .collect()
    }
}

/// Sets `key.path=value` in `doc`. The value is read as TOML, falling back
/// to a plain string.
pub fn apply_override(doc: &mut toml::Table, o: &str) -> Result<(), NetsimError> {
    let bad = |d: &str| NetsimError::Scenario(format!("override {o:?}: {d}"));
    let (path, raw) = o.split_once('=').ok_or_else(|| bad("expected key=value"))?;
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let keys: Vec<&str> = path.trim().split('.').collect();
    let (last, parents) = keys.split_last().ok_or_else(|| bad("empty key"))?;
    let mut table = doc;
    for key in parents {
        table = table
            .entry(key.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| bad("path runs through a non-table"))?;
    }
    table.insert(last.to_string(), value);
    Ok(())
}
