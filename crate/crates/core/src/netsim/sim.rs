//! Event loop, traces and run reports.
//!
//! Key distribution occupies ticks 0 (signer to recipients) and 1 (between
//! recipients). Scenario steps then run one after another; every
//! point-to-point message arrives one tick after it is sent.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use serde::Serialize;

use super::ledger::{KeyLedger, PadSource, Purpose};
use super::scenario::{Behavior, Scenario, Step};
use super::{build_topology, refill, LinkId, LinkKind, NetsimError, Topology, TopologySpec};
use crate::as2u::{BitStr, Bits, Message};
use crate::bounds::{self, KeyConsumption, SchemeConfig};
use crate::protocol::wire::{self, SecureChannel};
use crate::protocol::{
    distribute, majority_vote, mv_verify_external, select_omega, sign, DistributionBehavior,
    ExternalState, HonestRelay, KeyChunk, KeySlice, MvAdversary, MvExt, MvOutcome, MvResponse,
    NodeId, Package, Params, ProtocolError, Reception, RecipientState, SigningKey,
};

/// One line of a trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TraceRecord {
    Config {
        seed: u64,
        scheme: SchemeConfig,
        auth_bits: Option<u64>,
    },
    /// One-time-pad encrypted key material; `ciphertext` is hex, MSB first.
    Otp {
        tick: u64,
        from: NodeId,
        to: NodeId,
        key_offset: u64,
        bits: usize,
        ciphertext: String,
    },
    Send {
        tick: u64,
        from: NodeId,
        to: NodeId,
        kind: &'static str,
        message: usize,
        bits: usize,
    },
    Verdict {
        tick: u64,
        node: NodeId,
        sender: NodeId,
        message: usize,
        l_rec: u32,
        l_ver: i32,
        accepted: bool,
        forward: bool,
    },
    ExtVerdict {
        tick: u64,
        node: NodeId,
        sender: NodeId,
        message: usize,
        l_rec: u32,
        responses: Vec<i32>,
        l_ver: Option<i32>,
        accepted: bool,
        forward: bool,
    },
    Ignored {
        tick: u64,
        node: NodeId,
        sender: NodeId,
        message: usize,
        reason: &'static str,
    },
    Blocked {
        tick: u64,
        node: NodeId,
        blocked: NodeId,
    },
    Counter {
        tick: u64,
        node: NodeId,
        ext: u32,
        value: u32,
    },
    Skipped {
        tick: u64,
        node: NodeId,
        message: usize,
        reason: String,
    },
    MvMessage {
        tick: u64,
        round: u32,
        from: u32,
        to: u32,
    },
    MvOutcome {
        tick: u64,
        node: u32,
        initiator: u32,
        message: usize,
        outcome: MvOutcome,
        flag: bool,
    },
    MvLookup {
        tick: u64,
        ext: u32,
        message: usize,
        result: MvExt,
    },
    Refill {
        tick: u64,
        seconds: f64,
    },
    Abort {
        tick: u64,
        reason: String,
    },
    Ledger {
        link: LinkId,
        refilled: u64,
        otp: u64,
        auth: u64,
        balance: u64,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
}

impl Trace {
    /// One JSON object per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("trace records serialize"));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome {
    Completed,
    /// A key pool ran dry; the run stopped at that point.
    Aborted {
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub seed: u64,
    pub outcome: Outcome,
    pub scheme: SchemeConfig,
    pub consumption: KeyConsumption,
    pub auth_bits: Option<u64>,
    /// Latest verification result per node and message. `None` for a
    /// delegated verification without quorum.
    pub verdicts: BTreeMap<NodeId, BTreeMap<usize, Option<i32>>>,
    pub block_lists: BTreeMap<NodeId, Vec<NodeId>>,
    /// Failed-request counters of internal nodes, per external node.
    pub counters: BTreeMap<NodeId, BTreeMap<u32, u32>>,
    pub ledger: KeyLedger,
}

impl RunReport {
    /// OTP debits equal `L_sr` on every signer link, `L_rr` on every
    /// recipient pair, and zero elsewhere.
    pub fn ledger_matches_consumption(&self) -> bool {
        self.ledger.iter().all(|(link, l)| match link.kind() {
            LinkKind::SignerRecipient => l.otp == self.consumption.l_sr,
            LinkKind::RecipientRecipient => l.otp == self.consumption.l_rr,
            LinkKind::External => l.otp == 0,
        })
    }

    /// Every recorded verification reached `level`.
    pub fn all_verdicts_at(&self, level: i32) -> bool {
        self.verdicts
            .values()
            .flat_map(|m| m.values())
            .all(|&v| v == Some(level))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunOutput {
    pub trace: Trace,
    pub report: RunReport,
}

fn hex(bits: &BitStr) -> String {
    let mut out = String::with_capacity(bits.len().div_ceil(4));
    for chunk in bits.chunks(8) {
        let mut byte = 0u8;
        for (i, b) in chunk.iter().enumerate() {
            if *b {
                byte |= 0x80 >> i;
            }
        }
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

/// One-time-pad channel over the link pools.
struct OtpChannel<'a> {
    ledger: &'a mut KeyLedger,
    links: &'a BTreeMap<LinkId, f64>,
    pads: &'a PadSource,
    auth_bits: Option<u64>,
    trace: Option<&'a mut Vec<TraceRecord>>,
}

impl SecureChannel for OtpChannel<'_> {
    fn send_secret(
        &mut self,
        from: NodeId,
        to: NodeId,
        body: &BitStr,
    ) -> Result<Bits, ProtocolError> {
        let link = LinkId::new(from, to);
        if !self.links.contains_key(&link) {
            return Err(ProtocolError::UnknownNode(format!("link {link}")));
        }
        let offset = self.ledger.debit(link, Purpose::Otp, body.len() as u64)?;
        if let Some(cost) = self.auth_bits {
            self.ledger.debit(link, Purpose::Auth, cost)?;
        }
        let pad = self.pads.pad(link, offset, body.len());
        let cipher = body.to_bitvec() ^ &pad;
        if let Some(trace) = self.trace.as_deref_mut() {
            trace.push(TraceRecord::Otp {
                tick: if from == NodeId::Signer { 0 } else { 1 },
                from,
                to,
                key_offset: offset,
                bits: cipher.len(),
                ciphertext: hex(&cipher),
            });
        }
        Ok(cipher ^ &pad)
    }
}

struct Rubbish(BTreeSet<u32>);

impl DistributionBehavior for Rubbish {
    fn slice(&mut self, _slice: &mut KeySlice) {}

    fn chunk(&mut self, chunk: &mut KeyChunk) {
        if self.0.contains(&chunk.source) && chunk.source != chunk.target {
            for key in &mut chunk.keys {
                key.add ^= 1;
            }
        }
    }
}

enum Payload {
    Package {
        message: usize,
        bits: Bits,
    },
    Request {
        message: usize,
        origin: NodeId,
        bits: Bits,
    },
    Response {
        message: usize,
        origin: NodeId,
        bits: Bits,
    },
    Conclude {
        message: usize,
        origin: NodeId,
    },
}

struct Event {
    from: NodeId,
    to: NodeId,
    payload: Payload,
}

/// A copy of a message held by a node, with the level it verified at.
struct Held {
    pkg: Package,
    l_ver: Option<i32>,
    forward: bool,
}

struct Sim<'a> {
    scenario: &'a Scenario,
    params: Params,
    topo: Topology,
    pads: PadSource,
    auth_bits: Option<u64>,
    rate: (f64, f64),
    trace: Vec<TraceRecord>,
    tick: u64,
    seq: u64,
    queue: BinaryHeap<Reverse<(u64, u64)>>,
    events: BTreeMap<u64, Event>,
    messages: Vec<Message>,
    signing: Option<SigningKey>,
    internals: Vec<RecipientState>,
    externals: Vec<ExternalState>,
    held: BTreeMap<(NodeId, usize), Held>,
    pending: BTreeMap<(u32, usize, NodeId), (Package, Vec<i32>)>,
    verdicts: BTreeMap<NodeId, BTreeMap<usize, Option<i32>>>,
}

impl Sim<'_> {
    fn behavior(&self, node: NodeId) -> Behavior {
        self.scenario.behavior(node)
    }

    fn faulty_internals(&self) -> BTreeSet<u32> {
        (1..=self.params.n)
            .filter(|&i| !self.behavior(NodeId::Internal(i)).is_honest())
            .collect()
    }

    fn schedule(&mut self, tick: u64, event: Event) {
        self.queue.push(Reverse((tick, self.seq)));
        self.events.insert(self.seq, event);
        self.seq += 1;
    }

    fn debit_auth(&mut self, link: LinkId, batches: u64) -> Result<(), NetsimError> {
        if let Some(cost) = self.auth_bits {
            self.topo
                .ledger
                .debit(link, Purpose::Auth, cost * batches)?;
        }
        Ok(())
    }

    /// Point-to-point message delivered at the next tick.
    fn transmit(
        &mut self,
        from: NodeId,
        to: NodeId,
        kind: &'static str,
        payload: Payload,
    ) -> Result<(), NetsimError> {
        let link = LinkId::new(from, to);
        if !self.topo.links.contains_key(&link) {
            return Err(NetsimError::Scenario(format!("no link {link} for {kind}")));
        }
        self.debit_auth(link, 1)?;
        let (message, bits) = match &payload {
            Payload::Package { message, bits }
            | Payload::Request { message, bits, .. }
            | Payload::Response { message, bits, .. } => (*message, bits.len()),
            Payload::Conclude { .. } => unreachable!("conclude is local"),
        };
        self.trace.push(TraceRecord::Send {
            tick: self.tick,
            from,
            to,
            kind,
            message,
            bits,
        });
        self.schedule(self.tick + 1, Event { from, to, payload });
        Ok(())
    }

    fn skip(&mut self, node: NodeId, message: usize, reason: impl Into<String>) {
        self.trace.push(TraceRecord::Skipped {
            tick: self.tick,
            node,
            message,
            reason: reason.into(),
        });
    }

    fn record_block(&mut self, node: NodeId, blocked: NodeId) {
        self.trace.push(TraceRecord::Blocked {
            tick: self.tick,
            node,
            blocked,
        });
    }

    fn hold(&mut self, node: NodeId, message: usize, held: Held) {
        self.verdicts
            .entry(node)
            .or_default()
            .insert(message, held.l_ver);
        let keep_old = self
            .held
            .get(&(node, message))
            .is_some_and(|old| old.l_ver >= held.l_ver);
        if !keep_old {
            self.held.insert((node, message), held);
        }
    }

    fn message(&self, index: usize) -> Result<&Message, NetsimError> {
        self.messages
            .get(index)
            .ok_or_else(|| NetsimError::Scenario(format!("message {index} not defined")))
    }

    fn step(&mut self, step: &Step) -> Result<(), NetsimError> {
        match *step {
            Step::Send { from, to, message } => self.send(from, to, message)?,
            Step::Vote { initiator, message } => self.vote(initiator, message)?,
            Step::MvLookup { ext, message } => self.mv_lookup(ext, message)?,
            Step::Refill { seconds } => {
                let (rate0, gamma) = self.rate;
                refill(&mut self.topo, rate0, gamma, seconds);
                self.trace.push(TraceRecord::Refill {
                    tick: self.tick,
                    seconds,
                });
            }
        }
        self.drain()
    }

    fn send(&mut self, from: NodeId, to: NodeId, message: usize) -> Result<(), NetsimError> {
        let behavior = self.behavior(from);
        let mut pkg = match from {
            NodeId::Signer => {
                let m = self.message(message)?.clone();
                let signing = self.signing.as_ref().expect("keys distributed");
                let sigma = sign(signing, &m, &self.params)?;
                Package {
                    m,
                    sigma,
                    l_rec: self.params.l_max,
                }
            }
            _ => {
                let Some(held) = self.held.get(&(from, message)) else {
                    self.skip(from, message, "message not held");
                    return Ok(());
                };
                if behavior.is_honest() {
                    if !held.forward {
                        let reason = format!("not forwardable at level {:?}", held.l_ver);
                        self.skip(from, message, reason);
                        return Ok(());
                    }
                    Package {
                        l_rec: held.l_ver.expect("forwardable copies have a level") as u32,
                        ..held.pkg.clone()
                    }
                } else {
                    Package {
                        l_rec: self.params.l_max,
                        ..held.pkg.clone()
                    }
                }
            }
        };
        if let Behavior::FlipTags { count } = behavior {
            for t in pkg.sigma.tags.iter_mut().take(count) {
                *t ^= 1;
            }
        }
        let bits = wire::encode_package(&pkg);
        self.transmit(from, to, "package", Payload::Package { message, bits })
    }

    fn vote(&mut self, initiator: u32, message: usize) -> Result<(), NetsimError> {
        let node = NodeId::Internal(initiator);
        let Some(held) = self.held.get(&(node, message)) else {
            self.skip(node, message, "message not held");
            return Ok(());
        };
        let (m, sigma) = (held.pkg.m.clone(), held.pkg.sigma.clone());
        let mut payload = HonestRelay;
        let mut votes = HonestRelay;
        let mut adversary = MvAdversary {
            faulty: self.faulty_internals(),
            payload: &mut payload,
            votes: &mut votes,
        };
        let report = match majority_vote(initiator, &m, &sigma, &mut self.internals, &mut adversary)
        {
            Ok(r) => r,
            Err(e @ ProtocolError::VoteNotEligible { .. }) => {
                self.skip(node, message, e.to_string());
                return Ok(());
            }
            Err(e) => return Err(e.into()),
        };
        // one authenticated transmission per link per round
        let mut batches = BTreeSet::new();
        for msg in &report.messages {
            self.trace.push(TraceRecord::MvMessage {
                tick: self.tick + msg.round as u64 - 1,
                round: msg.round,
                from: msg.from,
                to: msg.to,
            });
            batches.insert((
                msg.round,
                LinkId::new(NodeId::Internal(msg.from), NodeId::Internal(msg.to)),
            ));
        }
        for (_, link) in batches {
            self.debit_auth(link, 1)?;
        }
        self.tick += 2 * (self.params.omega as u64 + 1);
        for (&r, &outcome) in &report.outcomes {
            self.trace.push(TraceRecord::MvOutcome {
                tick: self.tick,
                node: r,
                initiator,
                message,
                outcome,
                flag: report.flags[&r],
            });
        }
        Ok(())
    }

    fn mv_lookup(&mut self, ext: u32, message: usize) -> Result<(), NetsimError> {
        let node = NodeId::External(ext);
        let Some(held) = self.held.get(&(node, message)) else {
            self.skip(node, message, "message not held");
            return Ok(());
        };
        let (m, sigma) = (held.pkg.m.clone(), held.pkg.sigma.clone());
        let connected = self.topo.connected_internals(ext);
        let choice = self.externals[ext as usize - 1].omega_choice.clone();
        let asked = select_omega(ext, node, &connected, self.params.omega, &choice)?;
        for &i in &asked {
            let link = LinkId::new(NodeId::Internal(i), node);
            self.debit_auth(link, 2)?;
        }
        let silent: BTreeSet<u32> = asked
            .iter()
            .copied()
            .filter(|&i| self.behavior(NodeId::Internal(i)) == Behavior::Silent)
            .collect();
        let mut respond = |i: u32, honest: MvResponse| {
            if silent.contains(&i) {
                MvResponse::NoVote
            } else {
                honest
            }
        };
        let result = mv_verify_external(
            ext,
            &m,
            &sigma,
            &connected,
            &choice,
            &self.internals,
            &self.faulty_internals(),
            &mut respond,
        )?;
        self.trace.push(TraceRecord::MvLookup {
            tick: self.tick,
            ext,
            message,
            result,
        });
        self.tick += 2;
        Ok(())
    }

    fn drain(&mut self) -> Result<(), NetsimError> {
        while let Some(Reverse((tick, seq))) = self.queue.pop() {
            self.tick = tick;
            let event = self.events.remove(&seq).expect("scheduled event");
            self.deliver(event)?;
        }
        self.tick += 1;
        Ok(())
    }

    fn deliver(&mut self, event: Event) -> Result<(), NetsimError> {
        let Event { from, to, payload } = event;
        match (to, payload) {
            (NodeId::Internal(i), Payload::Package { message, bits }) => {
                self.internal_package(i, from, message, &bits)
            }
            (NodeId::External(e), Payload::Package { message, bits }) => {
                self.external_package(e, from, message, &bits)
            }
            (
                NodeId::Internal(i),
                Payload::Request {
                    message,
                    origin,
                    bits,
                },
            ) => self.request(i, from, message, origin, &bits),
            (
                NodeId::External(e),
                Payload::Response {
                    message,
                    origin,
                    bits,
                },
            ) => {
                if let (Ok(level), Some((_, responses))) = (
                    wire::decode_level(&bits),
                    self.pending.get_mut(&(e, message, origin)),
                ) {
                    responses.push(level);
                }
                Ok(())
            }
            (NodeId::External(e), Payload::Conclude { message, origin }) => {
                self.conclude(e, message, origin)
            }
            (to, _) => Err(NetsimError::Scenario(format!(
                "{to} cannot handle this message"
            ))),
        }
    }

    fn internal_package(
        &mut self,
        i: u32,
        from: NodeId,
        message: usize,
        bits: &Bits,
    ) -> Result<(), NetsimError> {
        let node = NodeId::Internal(i);
        let Ok(pkg) = wire::decode_package(&self.params, bits) else {
            self.ignored(node, from, message, "malformed");
            return Ok(());
        };
        let reception = self.internals[i as usize - 1].receive_package(&pkg, from);
        let v = match reception {
            Reception::Verified(v) => v,
            Reception::IgnoredBlocked => {
                self.ignored(node, from, message, "blocked");
                return Ok(());
            }
            Reception::IgnoredDuplicate => {
                self.ignored(node, from, message, "duplicate");
                return Ok(());
            }
            Reception::IgnoredMalformed => {
                self.ignored(node, from, message, "malformed");
                return Ok(());
            }
        };
        self.trace.push(TraceRecord::Verdict {
            tick: self.tick,
            node,
            sender: from,
            message,
            l_rec: pkg.l_rec,
            l_ver: v.l_ver,
            accepted: v.accepted,
            forward: v.forward,
        });
        if v.blocked_sender {
            self.record_block(node, from);
        }
        self.hold(
            node,
            message,
            Held {
                pkg,
                l_ver: Some(v.l_ver),
                forward: v.forward,
            },
        );
        Ok(())
    }

    fn ignored(&mut self, node: NodeId, sender: NodeId, message: usize, reason: &'static str) {
        self.trace.push(TraceRecord::Ignored {
            tick: self.tick,
            node,
            sender,
            message,
            reason,
        });
    }

    fn external_package(
        &mut self,
        e: u32,
        from: NodeId,
        message: usize,
        bits: &Bits,
    ) -> Result<(), NetsimError> {
        let node = NodeId::External(e);
        let Ok(pkg) = wire::decode_package(&self.params, bits) else {
            self.ignored(node, from, message, "malformed");
            return Ok(());
        };
        let connected = self.topo.connected_internals(e);
        let state = &mut self.externals[e as usize - 1];
        let blocked = state.block_list.contains(&from);
        let Some(asked) = state.begin(&pkg, from, &connected)? else {
            let reason = if blocked {
                "blocked"
            } else if (1..=self.params.l_max).contains(&pkg.l_rec) {
                "duplicate"
            } else {
                "malformed"
            };
            self.ignored(node, from, message, reason);
            return Ok(());
        };
        for i in asked {
            let request = Payload::Request {
                message,
                origin: from,
                bits: bits.clone(),
            };
            self.transmit(node, NodeId::Internal(i), "verify_request", request)?;
        }
        self.pending.insert((e, message, from), (pkg, Vec::new()));
        let conclude = Event {
            from: node,
            to: node,
            payload: Payload::Conclude {
                message,
                origin: from,
            },
        };
        self.schedule(self.tick + 3, conclude);
        Ok(())
    }

    fn request(
        &mut self,
        i: u32,
        from: NodeId,
        message: usize,
        origin: NodeId,
        bits: &Bits,
    ) -> Result<(), NetsimError> {
        let node = NodeId::Internal(i);
        let NodeId::External(e) = from else {
            return Err(NetsimError::Scenario(format!("verify request from {from}")));
        };
        let Ok(pkg) = wire::decode_package(&self.params, bits) else {
            self.ignored(node, from, message, "malformed");
            return Ok(());
        };
        let state = &mut self.internals[i as usize - 1];
        let before = state.counters.get(&e).copied().unwrap_or(0);
        let was_blocked = state.block_list.contains(&from);
        let honest = state.handle_verify_request(e, &pkg);
        let after = state.counters.get(&e).copied().unwrap_or(0);
        let now_blocked = state.block_list.contains(&from);
        if after != before {
            self.trace.push(TraceRecord::Counter {
                tick: self.tick,
                node,
                ext: e,
                value: after,
            });
        }
        if now_blocked && !was_blocked {
            self.record_block(node, from);
        }
        if honest.is_none() {
            self.ignored(
                node,
                from,
                message,
                if was_blocked { "blocked" } else { "duplicate" },
            );
        }
        let reply = match self.behavior(node) {
            Behavior::Silent => None,
            Behavior::ReportLevel { level } => Some(level),
            _ => honest,
        };
        if let Some(level) = reply {
            let response = Payload::Response {
                message,
                origin,
                bits: wire::encode_level(level),
            };
            self.transmit(node, from, "verify_response", response)?;
        }
        Ok(())
    }

    fn conclude(&mut self, e: u32, message: usize, origin: NodeId) -> Result<(), NetsimError> {
        let node = NodeId::External(e);
        let (pkg, responses) = self
            .pending
            .remove(&(e, message, origin))
            .expect("conclude follows begin");
        let v = self.externals[e as usize - 1].conclude(&pkg, origin, &responses);
        self.trace.push(TraceRecord::ExtVerdict {
            tick: self.tick,
            node,
            sender: origin,
            message,
            l_rec: pkg.l_rec,
            responses,
            l_ver: v.l_ver,
            accepted: v.accepted,
            forward: v.forward,
        });
        if v.blocked_sender {
            self.record_block(node, origin);
        }
        self.hold(
            node,
            message,
            Held {
                pkg,
                l_ver: v.l_ver,
                forward: v.forward,
            },
        );
        Ok(())
    }

    fn distribute(&mut self) -> Result<(), NetsimError> {
        let rubbish: BTreeSet<u32> = (1..=self.params.n)
            .filter(|&i| self.behavior(NodeId::Internal(i)) == Behavior::RubbishKeys)
            .collect();
        let mut channel = OtpChannel {
            ledger: &mut self.topo.ledger,
            links: &self.topo.links,
            pads: &self.pads,
            auth_bits: self.auth_bits,
            trace: Some(&mut self.trace),
        };
        let deployment = distribute(
            &self.params,
            self.scenario.seed,
            &mut channel,
            &mut Rubbish(rubbish),
        )?;
        self.internals = deployment
            .shares
            .into_iter()
            .map(|s| RecipientState::new(s, self.params))
            .collect();
        self.signing = Some(deployment.signing_key);
        self.tick = 2;
        Ok(())
    }

    fn execute(&mut self) -> Result<Outcome, NetsimError> {
        let result = self.distribute().and_then(|()| {
            let scenario = self.scenario;
            for step in &scenario.steps {
                self.step(step)?;
            }
            Ok(())
        });
        match result {
            Ok(()) => Ok(Outcome::Completed),
            Err(NetsimError::Protocol(e @ ProtocolError::PoolExhausted { .. })) => {
                let reason = e.to_string();
                self.trace.push(TraceRecord::Abort {
                    tick: self.tick,
                    reason: reason.clone(),
                });
                Ok(Outcome::Aborted { reason })
            }
            Err(e) => Err(e),
        }
    }
}

/// Runs `scenario`. Configuration errors are returned as errors; a pool
/// running dry ends the run with [`Outcome::Aborted`].
pub fn run(scenario: &Scenario) -> Result<RunOutput, NetsimError> {
    let scheme = scenario.scheme.resolve()?;
    let params = Params::new(&scheme)?;
    let topo = build_topology(&scenario.topology_spec())?;
    let auth_bits = if scenario.auth.enabled {
        Some(bounds::auth_key_cost(scenario.auth.eps_auth)?)
    } else {
        None
    };
    for node in scenario.behaviors.keys() {
        if !topo.nodes().contains(node) {
            return Err(NetsimError::Scenario(format!(
                "behavior for unknown node {node}"
            )));
        }
    }
    let messages = scenario.resolve_messages()?;
    let mut sim = Sim {
        scenario,
        params,
        topo,
        pads: PadSource::new(scenario.seed),
        auth_bits,
        rate: (
            scenario.topology.rate0,
            bounds::db_per_km_to_gamma(scenario.topology.db_per_km),
        ),
        trace: vec![TraceRecord::Config {
            seed: scenario.seed,
            scheme,
            auth_bits,
        }],
        tick: 0,
        seq: 0,
        queue: BinaryHeap::new(),
        events: BTreeMap::new(),
        messages,
        signing: None,
        internals: Vec::new(),
        externals: (1..=scheme.m)
            .map(|e| ExternalState::new(e, params))
            .collect(),
        held: BTreeMap::new(),
        pending: BTreeMap::new(),
        verdicts: BTreeMap::new(),
    };
    let outcome = sim.execute()?;

    for (&link, l) in sim.topo.ledger.iter() {
        sim.trace.push(TraceRecord::Ledger {
            link,
            refilled: l.refilled,
            otp: l.otp,
            auth: l.auth,
            balance: l.balance(),
        });
    }
    let mut block_lists = BTreeMap::new();
    let mut counters = BTreeMap::new();
    for s in &sim.internals {
        block_lists.insert(s.node(), s.block_list.iter().copied().collect());
        counters.insert(s.node(), s.counters.clone());
    }
    for s in &sim.externals {
        block_lists.insert(s.node(), s.block_list.iter().copied().collect());
    }
    let report = RunReport {
        seed: scenario.seed,
        outcome,
        scheme,
        consumption: bounds::key_consumption(&scheme)?,
        auth_bits,
        verdicts: sim.verdicts,
        block_lists,
        counters,
        ledger: sim.topo.ledger,
    };
    Ok(RunOutput {
        trace: Trace { records: sim.trace },
        report,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThroughputReport {
    pub duration_s: f64,
    pub completions: u64,
    pub measured_rate: f64,
    pub predicted_rate: f64,
}

/// Refills the pools in steps of `dt_s` and runs a full key distribution
/// whenever every link can afford one. Compares completions per second with
/// [`bounds::uss_rate_for`].
pub fn throughput(
    scheme: &SchemeConfig,
    spec: &TopologySpec,
    rate0: f64,
    gamma: f64,
    duration_s: f64,
    dt_s: f64,
    seed: u64,
) -> Result<ThroughputReport, NetsimError> {
    let params = Params::new(scheme)?;
    let mut topo = build_topology(spec)?;
    let cons = bounds::key_consumption(scheme)?;
    let predicted_rate = bounds::uss_rate_for(scheme.n, &cons, &topo.link_model(rate0, gamma))?;
    let pads = PadSource::new(seed);
    let affordable = |t: &Topology| {
        t.ledger.iter().all(|(link, l)| match link.kind() {
            LinkKind::SignerRecipient => l.balance() >= cons.l_sr,
            LinkKind::RecipientRecipient => l.balance() >= cons.l_rr,
            LinkKind::External => true,
        })
    };
    let steps = (duration_s / dt_s).round() as u64;
    let mut completions = 0u64;
    for _ in 0..steps {
        refill(&mut topo, rate0, gamma, dt_s);
        while affordable(&topo) {
            let mut channel = OtpChannel {
                ledger: &mut topo.ledger,
                links: &topo.links,
                pads: &pads,
                auth_bits: None,
                trace: None,
            };
            distribute(
                &params,
                seed.wrapping_add(completions),
                &mut channel,
                &mut crate::protocol::Honest,
            )?;
            completions += 1;
        }
    }
    let duration = steps as f64 * dt_s;
    Ok(ThroughputReport {
        duration_s: duration,
        completions,
        measured_rate: completions as f64 / duration,
        predicted_rate,
    })
}
