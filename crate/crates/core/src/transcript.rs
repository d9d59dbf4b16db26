// Copyright (c) The psc Contributors
// SPDX-License-Identifier: Apache-2.0

//! JSONL transcripts: export, replay against a fresh blockchain, and offline proof audit.
//!
//! Line 1 is a header. Every following line is either a message, as received by the
//! blockchain, or the snapshot taken right after handling it:
//!
//! ```text
//! {"type":"header","format":"psc-transcript","version":1,"group":"ristretto255","ell":16,
//!  "contract":"auction","contract_id":"<hex>","parties":["P1",..],"seed":7,"adversary":"none"}
//! {"type":"message","seq":1,"sender":"P1","kind":"freeze","bytes":"<hex>"}
//! {"type":"snapshot","seq":1,"outcome":"accepted","kind":"freeze","reason":null,
//!  "state_hash":"<hex>","state":"<hex>"}
//! ```
//!
//! `bytes` is the canonical message encoding, `state` the canonical blockchain state
//! and `state_hash` its SHA-256. The initial empty-state snapshot is not written.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::blockchain::{check_output, Blockchain, FreezeRecord, Outcome};
use crate::error::TranscriptError;
use crate::group::{GroupParams, PrimeGroup, SharedParams};
use crate::pedersen::Commitment;
use crate::sigma::{bnizk_verify_bytes, VerifyFailure};
use crate::wire::{
    bit_context, ContractId, FinalizeMessage, PartyId, RawFreeze, FINALIZE_TAG, FREEZE_TAG,
};
use crate::{Production, ToyGroup};

pub const FORMAT: &str = "psc-transcript";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Header {
    pub format: String,
    pub version: u32,
    pub group: String,
    pub ell: u32,
    pub contract: String,
    pub contract_id: String,
    pub parties: Vec<String>,
    pub seed: u64,
    pub adversary: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageLine {
    pub seq: usize,
    pub sender: String,
    pub kind: String,
    pub bytes: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnapshotLine {
    pub seq: usize,
    pub outcome: String,
    pub kind: String,
    pub reason: Option<String>,
    pub state_hash: String,
    pub state: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Line {
    Header(Header),
    Message(MessageLine),
    Snapshot(SnapshotLine),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transcript {
    pub header: Header,
    pub entries: Vec<Line>,
}

impl Transcript {
    pub fn new(header: Header) -> Self {
        Self {
            header,
            entries: Vec::new(),
        }
    }

    /// Collects every received message and the snapshot that followed it.
    pub fn from_blockchain<G: PrimeGroup>(header: Header, bc: &Blockchain<G>) -> Self {
        let snapshots = bc.snapshot_log();
        let mut entries = Vec::with_capacity(2 * bc.message_log().len());
        for m in bc.message_log() {
            entries.push(Line::Message(MessageLine {
                seq: m.seq,
                sender: m.sender.0.clone(),
                kind: m.kind.to_string(),
                bytes: hex::encode(&m.bytes),
            }));
            let snap = &snapshots[m.seq];
            let (outcome, kind, reason) = match &snap.outcome {
                Outcome::Init => ("init", "", None),
                Outcome::Accepted { kind } => ("accepted", *kind, None),
                Outcome::Rejected { kind, reason } => {
                    ("rejected", *kind, Some(reason.code().to_string()))
                }
            };
            entries.push(Line::Snapshot(SnapshotLine {
                seq: snap.seq,
                outcome: outcome.into(),
                kind: kind.into(),
                reason,
                state_hash: hex::encode(snap.state_hash),
                state: hex::encode(&snap.state),
            }));
        }
        Self { header, entries }
    }

    pub fn to_jsonl(&self) -> String {
        let mut s = String::new();
        for line in
            std::iter::once(Line::Header(self.header.clone())).chain(self.entries.iter().cloned())
        {
            s.push_str(&serde_json::to_string(&line).expect("serializable"));
            s.push('\n');
        }
        s
    }

    pub fn export(&self, path: &Path) -> Result<(), TranscriptError> {
        let mut f = fs::File::create(path)?;
        f.write_all(self.to_jsonl().as_bytes())?;
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self, TranscriptError> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let parse = |no: usize, l: &str| {
            serde_json::from_str::<Line>(l).map_err(|e| TranscriptError::Parse {
                line: no + 1,
                message: e.to_string(),
            })
        };
        let header = match lines.next() {
            None => return Err(TranscriptError::Empty),
            Some((no, l)) => match parse(no, l)? {
                Line::Header(h) => h,
                _ => {
                    return Err(TranscriptError::Parse {
                        line: no + 1,
                        message: "first line must be the header".into(),
                    })
                }
            },
        };
        if header.format != FORMAT || header.version != VERSION {
            return Err(TranscriptError::Parse {
                line: 1,
                message: format!("unsupported format {} v{}", header.format, header.version),
            });
        }
        let mut entries = Vec::new();
        for (no, l) in lines {
            match parse(no, l)? {
                Line::Header(_) => {
                    return Err(TranscriptError::Parse {
                        line: no + 1,
                        message: "duplicate header".into(),
                    })
                }
                line => entries.push(line),
            }
        }
        Ok(Self { header, entries })
    }

    pub fn load(path: &Path) -> Result<Self, TranscriptError> {
        Self::parse(&fs::read_to_string(path)?)
    }

    /// `(line number, message)` pairs; line numbers are 1-based and count the header.
    fn messages(&self) -> impl Iterator<Item = (usize, &MessageLine)> {
        self.entries
            .iter()
            .enumerate()
            .filter_map(|(i, l)| match l {
                Line::Message(m) => Some((i + 2, m)),
                _ => None,
            })
    }

    fn snapshots(&self) -> impl Iterator<Item = &SnapshotLine> {
        self.entries.iter().filter_map(|l| match l {
            Line::Snapshot(s) => Some(s),
            _ => None,
        })
    }

    /// The last recorded state hash, if any message was handled.
    pub fn final_state_hash(&self) -> Option<String> {
        self.snapshots().last().map(|s| s.state_hash.clone())
    }
}

fn decode_hex(line: usize, field: &str, s: &str) -> Result<Vec<u8>, TranscriptError> {
    hex::decode(s).map_err(|e| TranscriptError::Parse {
        line,
        message: format!("{field}: {e}"),
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReplayReport {
    pub messages: usize,
    pub final_state_hash: String,
    pub recorded_state_hash: Option<String>,
    /// Sequence numbers whose replayed snapshot hash differs from the recorded one.
    pub mismatches: Vec<usize>,
}

impl ReplayReport {
    pub fn matches(&self) -> bool {
        self.mismatches.is_empty()
            && self
                .recorded_state_hash
                .as_ref()
                .is_none_or(|h| *h == self.final_state_hash)
    }
}

/// Feeds every message through a fresh blockchain and compares state hashes.
pub fn replay(t: &Transcript) -> Result<ReplayReport, TranscriptError> {
    match t.header.group.as_str() {
        "ristretto255" => replay_with(t, GroupParams::<Production>::production().shared()),
        "modp-toy-insecure" => replay_with(t, GroupParams::<ToyGroup>::toy().shared()),
        other => Err(TranscriptError::UnsupportedGroup(other.into())),
    }
}

fn replay_with<G: PrimeGroup>(
    t: &Transcript,
    params: SharedParams<G>,
) -> Result<ReplayReport, TranscriptError> {
    let mut bc = Blockchain::new(params, t.header.ell as usize);
    let recorded: BTreeMap<usize, &str> = t
        .snapshots()
        .map(|s| (s.seq, s.state_hash.as_str()))
        .collect();
    let mut mismatches = Vec::new();
    let mut messages = 0;
    for (line, m) in t.messages() {
        let bytes = decode_hex(line, "bytes", &m.bytes)?;
        // Rejections are part of the transcript; only the state matters here.
        let _ = bc.handle_bytes(&PartyId::new(m.sender.clone()), &bytes);
        messages += 1;
        let seq = bc.snapshot_log().len() - 1;
        let got = hex::encode(bc.snapshot_log()[seq].state_hash);
        if recorded.get(&seq).is_some_and(|h| *h != got) || seq != m.seq {
            mismatches.push(m.seq);
        }
    }
    Ok(ReplayReport {
        messages,
        final_state_hash: hex::encode(bc.state_hash()),
        recorded_state_hash: t.final_state_hash(),
        mismatches,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ProofKind {
    Bit {
        party: usize,
        bit: usize,
        slot: usize,
    },
    Balance,
    /// A message that could not be parsed far enough to locate its proofs.
    Message,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProofCheck {
    pub line: usize,
    pub seq: usize,
    pub sender: String,
    pub kind: ProofKind,
    pub ok: bool,
    pub detail: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct VerifyReport {
    pub checks: Vec<ProofCheck>,
}

impl VerifyReport {
    pub fn failures(&self) -> impl Iterator<Item = &ProofCheck> {
        self.checks.iter().filter(|c| !c.ok)
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.ok)
    }
}

/// Re-checks every bit proof and every balance proof using only public data.
///
/// Freeze records for a balance proof are rebuilt from the freeze messages the
/// blockchain accepted, as recorded in the snapshots.
pub fn verify(t: &Transcript) -> Result<VerifyReport, TranscriptError> {
    match t.header.group.as_str() {
        "ristretto255" => verify_with(t, GroupParams::<Production>::production()),
        "modp-toy-insecure" => verify_with(t, GroupParams::<ToyGroup>::toy()),
        other => Err(TranscriptError::UnsupportedGroup(other.into())),
    }
}

fn verify_with<G: PrimeGroup>(
    t: &Transcript,
    params: GroupParams<G>,
) -> Result<VerifyReport, TranscriptError> {
    let grp = &params.group;
    let ell = t.header.ell as usize;
    let accepted: BTreeMap<usize, bool> = t
        .snapshots()
        .map(|s| (s.seq, s.outcome == "accepted"))
        .collect();
    let mut parties_of: BTreeMap<ContractId, Vec<PartyId>> = BTreeMap::new();
    let mut records: BTreeMap<(ContractId, PartyId), FreezeRecord<G>> = BTreeMap::new();
    let mut report = VerifyReport::default();

    for (line, m) in t.messages() {
        let bytes = decode_hex(line, "bytes", &m.bytes)?;
        let sender = PartyId::new(m.sender.clone());
        let mut push = |kind, result: Result<(), String>| {
            report.checks.push(ProofCheck {
                line,
                seq: m.seq,
                sender: m.sender.clone(),
                kind,
                ok: result.is_ok(),
                detail: result.err(),
            })
        };
        match m.kind.as_str() {
            k if k == FREEZE_TAG => {
                let raw = match RawFreeze::parse(grp, &bytes) {
                    Ok(raw) => raw,
                    Err(e) => {
                        push(ProofKind::Message, Err(e.to_string()));
                        continue;
                    }
                };
                let Some(party) = raw.parties.iter().position(|p| *p == sender) else {
                    push(
                        ProofKind::Message,
                        Err("sender is not a participant".into()),
                    );
                    continue;
                };
                let mut sets = Vec::with_capacity(raw.pairs.len());
                for (bit, pair) in raw.pairs.iter().enumerate() {
                    let mut decoded = Vec::with_capacity(2);
                    for (slot, (c, proof)) in pair.iter().enumerate() {
                        let kind = ProofKind::Bit { party, bit, slot };
                        let c = match grp.decode_element(c) {
                            Ok(c) => Commitment::<G>(c),
                            Err(e) => {
                                push(kind, Err(format!("commitment: {e}")));
                                continue;
                            }
                        };
                        decoded.push(c);
                        let ctx = bit_context(&raw.id, party, bit, slot);
                        push(
                            kind,
                            bnizk_verify_bytes(&params, &c, proof, &ctx).map_err(|e| match e {
                                VerifyFailure::Malformed(g) => format!("malformed proof: {g}"),
                                VerifyFailure::Equation => "verification equation failed".into(),
                            }),
                        );
                    }
                    if let [a, b] = decoded[..] {
                        let mut set = [a, b];
                        set.sort_by_key(|c| c.to_bytes(grp));
                        sets.push(set);
                    }
                }
                let coin = grp.decode_element(&raw.coin).ok();
                if let (true, Some(coin), true) = (
                    accepted.get(&m.seq).copied().unwrap_or(false),
                    coin,
                    sets.len() == raw.pairs.len(),
                ) {
                    parties_of
                        .entry(raw.id)
                        .or_insert_with(|| raw.parties.clone());
                    records.insert(
                        (raw.id, sender.clone()),
                        FreezeRecord {
                            id: raw.id,
                            party: sender,
                            coin: Commitment(coin),
                            candidate_sets: sets,
                        },
                    );
                }
            }
            k if k == FINALIZE_TAG => {
                let msg = match FinalizeMessage::<G>::from_bytes(grp, &bytes) {
                    Ok(msg) => msg,
                    Err(e) => {
                        push(ProofKind::Balance, Err(format!("malformed: {e}")));
                        continue;
                    }
                };
                let result = match parties_of.get(&msg.id) {
                    None => Err("no accepted freeze for this contract".to_string()),
                    Some(parties) => {
                        let refs: Vec<_> = parties
                            .iter()
                            .map(|p| records.get(&(msg.id, p.clone())))
                            .collect();
                        check_output(&params, ell, &msg.id, &refs, &msg.selected, &msg.proof)
                            .map(|_| ())
                            .map_err(|r| r.to_string())
                    }
                };
                push(ProofKind::Balance, result);
            }
            other => push(
                ProofKind::Message,
                Err(format!("unknown message kind '{other}'")),
            ),
        }
    }
    Ok(report)
}
