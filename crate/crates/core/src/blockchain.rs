// Copyright (c) The psc Contributors
// SPDX-License-Identifier: Apache-2.0

//! The simulated blockchain: contract lifecycle wrapper plus the freeze and finalize
//! programs, with a full state snapshot after every handled message.
//!
//! Messages are validated in full before any write, so a rejected message leaves
//! `Contracts`, `FrozenCoins` and `FreezeRecords` byte-identical.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::mpsc::Sender;

use sha2::{Digest, Sha256};

use crate::error::WireError;
use crate::group::{PrimeGroup, SharedParams};
use crate::pedersen::{combine, quotient, recompose_bits, Commitment};
use crate::sigma::{bnizk_verify, schnorr_verify, SchnorrProof};
use crate::wire::{
    balance_context, bit_context, ContractId, FinalizeMessage, FreezeMessage, Message, PartyId,
    Reader, Writer,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Phase {
    Freeze,
    Compute,
    Finalized,
}

impl Phase {
    pub fn as_str(&self) -> &'static str {
        match self {
            Phase::Freeze => "freeze",
            Phase::Compute => "compute",
            Phase::Finalized => "finalized",
        }
    }

    fn code(&self) -> u8 {
        match self {
            Phase::Freeze => 0,
            Phase::Compute => 1,
            Phase::Finalized => 2,
        }
    }

    fn from_code(c: u8) -> Result<Self, WireError> {
        match c {
            0 => Ok(Phase::Freeze),
            1 => Ok(Phase::Compute),
            2 => Ok(Phase::Finalized),
            other => Err(WireError::Invalid(format!("phase code {other}"))),
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Why the blockchain refused a message. Each variant has a stable reason code.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Rejection {
    NotParticipant,
    AlreadyFrozen,
    ParticipantsMismatch,
    WrongPhase { expected: Phase, actual: Phase },
    UnknownContract,
    WrongBitCount { expected: usize, got: usize },
    DuplicateCandidate { bit: usize },
    BitProofInvalid { bit: usize, slot: usize },
    MissingFreezeRecord { party: usize },
    OutputShape,
    CandidateNotInSet { party: usize, bit: usize },
    SchnorrFailed,
    Malformed(String),
}

impl Rejection {
    pub fn code(&self) -> &'static str {
        match self {
            Rejection::NotParticipant => "not-participant",
            Rejection::AlreadyFrozen => "already-frozen",
            Rejection::ParticipantsMismatch => "participants-mismatch",
            Rejection::WrongPhase { .. } => "wrong-phase",
            Rejection::UnknownContract => "unknown-contract",
            Rejection::WrongBitCount { .. } => "wrong-bit-count",
            Rejection::DuplicateCandidate { .. } => "duplicate-candidate",
            Rejection::BitProofInvalid { .. } => "bit-proof-invalid",
            Rejection::MissingFreezeRecord { .. } => "missing-freeze-record",
            Rejection::OutputShape => "output-shape",
            Rejection::CandidateNotInSet { .. } => "candidate-not-in-set",
            Rejection::SchnorrFailed => "schnorr-failed",
            Rejection::Malformed(_) => "malformed",
        }
    }
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rejection::WrongPhase { expected, actual } => {
                write!(f, "wrong-phase (expected {expected}, contract is {actual})")
            }
            Rejection::WrongBitCount { expected, got } => {
                write!(f, "wrong-bit-count (expected {expected}, got {got})")
            }
            Rejection::DuplicateCandidate { bit } => write!(f, "duplicate-candidate (bit {bit})"),
            Rejection::BitProofInvalid { bit, slot } => {
                write!(f, "bit-proof-invalid (bit {bit}, slot {slot})")
            }
            Rejection::MissingFreezeRecord { party } => {
                write!(f, "missing-freeze-record (party {party})")
            }
            Rejection::CandidateNotInSet { party, bit } => {
                write!(f, "candidate-not-in-set (party {party}, bit {bit})")
            }
            Rejection::Malformed(why) => write!(f, "malformed ({why})"),
            other => f.write_str(other.code()),
        }
    }
}

pub struct Closure<G: PrimeGroup> {
    pub out: Vec<u8>,
    pub proof: SchnorrProof<G>,
}

impl<G: PrimeGroup> Clone for Closure<G> {
    fn clone(&self) -> Self {
        Self {
            out: self.out.clone(),
            proof: self.proof,
        }
    }
}

impl<G: PrimeGroup> fmt::Debug for Closure<G> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Closure")
            .field("out", &self.out)
            .finish_non_exhaustive()
    }
}

/// `(id, P, P′, phase)`, plus the accepted closure once finalized.
pub struct ContractRecord<G: PrimeGroup> {
    pub id: ContractId,
    pub parties: Vec<PartyId>,
    pub frozen: BTreeSet<PartyId>,
    pub phase: Phase,
    pub closure: Option<Closure<G>>,
}

impl<G: PrimeGroup> Clone for ContractRecord<G> {
    fn clone(&self) -> Self {
        Self {
            id: self.id,
            parties: self.parties.clone(),
            frozen: self.frozen.clone(),
            phase: self.phase,
            closure: self.closure.clone(),
        }
    }
}

impl<G: PrimeGroup> fmt::Debug for ContractRecord<G> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ContractRecord")
            .field("id", &self.id)
            .field("parties", &self.parties)
            .field("frozen", &self.frozen)
            .field("phase", &self.phase)
            .finish()
    }
}

impl<G: PrimeGroup> ContractRecord<G> {
    pub fn party_index(&self, party: &PartyId) -> Option<usize> {
        self.parties.iter().position(|p| p == party)
    }
}

/// A party's frozen coin and its candidate sets `C^(k)`.
///
/// Each pair is stored sorted by canonical encoding so the transmitted order, which
/// encodes the hidden permutation bit, is not retained.
pub struct FreezeRecord<G: PrimeGroup> {
    pub id: ContractId,
    pub party: PartyId,
    pub coin: Commitment<G>,
    pub candidate_sets: Vec<[Commitment<G>; 2]>,
}

impl<G: PrimeGroup> Clone for FreezeRecord<G> {
    fn clone(&self) -> Self {
        Self {
            id: self.id,
            party: self.party.clone(),
            coin: self.coin,
            candidate_sets: self.candidate_sets.clone(),
        }
    }
}

impl<G: PrimeGroup> PartialEq for FreezeRecord<G> {
    fn eq(&self, o: &Self) -> bool {
        self.id == o.id
            && self.party == o.party
            && self.coin == o.coin
            && self.candidate_sets == o.candidate_sets
    }
}

impl<G: PrimeGroup> fmt::Debug for FreezeRecord<G> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FreezeRecord")
            .field("id", &self.id)
            .field("party", &self.party)
            .field("coin", &self.coin)
            .field("bits", &self.candidate_sets.len())
            .finish()
    }
}

impl<G: PrimeGroup> FreezeRecord<G> {
    pub fn contains(&self, group: &G, bit: usize, c: &Commitment<G>) -> bool {
        let enc = c.to_bytes(group);
        self.candidate_sets
            .get(bit)
            .is_some_and(|set| set.iter().any(|x| x.to_bytes(group) == enc))
    }
}

fn sorted_pair<G: PrimeGroup>(group: &G, a: Commitment<G>, b: Commitment<G>) -> [Commitment<G>; 2] {
    if a.to_bytes(group) <= b.to_bytes(group) {
        [a, b]
    } else {
        [b, a]
    }
}

/// Blockchain-side state: `Contracts`, `FrozenCoins` and `FreezeRecords`.
pub struct BlockchainState<G: PrimeGroup> {
    pub contracts: BTreeMap<ContractId, ContractRecord<G>>,
    pub frozen_coins: BTreeMap<(ContractId, PartyId), Commitment<G>>,
    pub freeze_records: BTreeMap<(ContractId, PartyId), FreezeRecord<G>>,
}

impl<G: PrimeGroup> Default for BlockchainState<G> {
    fn default() -> Self {
        Self {
            contracts: BTreeMap::new(),
            frozen_coins: BTreeMap::new(),
            freeze_records: BTreeMap::new(),
        }
    }
}

impl<G: PrimeGroup> Clone for BlockchainState<G> {
    fn clone(&self) -> Self {
        Self {
            contracts: self.contracts.clone(),
            frozen_coins: self.frozen_coins.clone(),
            freeze_records: self.freeze_records.clone(),
        }
    }
}

impl<G: PrimeGroup> fmt::Debug for BlockchainState<G> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BlockchainState")
            .field("contracts", &self.contracts)
            .field("frozen_coins", &self.frozen_coins.len())
            .field("freeze_records", &self.freeze_records.len())
            .finish()
    }
}

impl<G: PrimeGroup> BlockchainState<G> {
    /// Canonical encoding; map iteration order is the key order.
    pub fn encode(&self, group: &G) -> Vec<u8> {
        let mut w = Writer::new();
        w.u32(self.contracts.len() as u32);
        for rec in self.contracts.values() {
            w.lp(&rec.id.0).u32(rec.parties.len() as u32);
            for p in &rec.parties {
                w.lp(p.0.as_bytes());
            }
            w.u32(rec.frozen.len() as u32);
            for p in &rec.frozen {
                w.lp(p.0.as_bytes());
            }
            w.u8(rec.phase.code());
            match &rec.closure {
                None => {
                    w.u8(0);
                }
                Some(c) => {
                    w.u8(1).lp(&c.out).raw(&c.proof.to_bytes(group));
                }
            }
        }
        w.u32(self.frozen_coins.len() as u32);
        for ((id, party), coin) in &self.frozen_coins {
            w.lp(&id.0)
                .lp(party.0.as_bytes())
                .element(group, coin.element());
        }
        w.u32(self.freeze_records.len() as u32);
        for rec in self.freeze_records.values() {
            w.lp(&rec.id.0)
                .lp(rec.party.0.as_bytes())
                .element(group, rec.coin.element())
                .u32(rec.candidate_sets.len() as u32);
            for set in &rec.candidate_sets {
                w.element(group, set[0].element())
                    .element(group, set[1].element());
            }
        }
        w.finish()
    }

    pub fn decode(group: &G, bytes: &[u8]) -> Result<Self, WireError> {
        let el = group.element_len();
        let mut r = Reader::new(bytes);
        let mut state = Self::default();
        for _ in 0..r.count(4)? {
            let id = r.id()?;
            let parties = (0..r.count(4)?)
                .map(|_| r.party())
                .collect::<Result<Vec<_>, _>>()?;
            let frozen = (0..r.count(4)?)
                .map(|_| r.party())
                .collect::<Result<BTreeSet<_>, _>>()?;
            let phase = Phase::from_code(r.u8()?)?;
            let closure = match r.u8()? {
                0 => None,
                1 => {
                    let out = r.lp()?.to_vec();
                    let proof = SchnorrProof::from_bytes(
                        group,
                        r.take(SchnorrProof::<G>::encoded_len(group))?,
                    )?;
                    Some(Closure { out, proof })
                }
                other => return Err(WireError::Invalid(format!("closure flag {other}"))),
            };
            state.contracts.insert(
                id,
                ContractRecord {
                    id,
                    parties,
                    frozen,
                    phase,
                    closure,
                },
            );
        }
        for _ in 0..r.count(el)? {
            let id = r.id()?;
            let party = r.party()?;
            let coin = Commitment(r.element(group)?);
            state.frozen_coins.insert((id, party), coin);
        }
        for _ in 0..r.count(el)? {
            let id = r.id()?;
            let party = r.party()?;
            let coin = Commitment(r.element(group)?);
            let sets = (0..r.count(2 * el)?)
                .map(|_| Ok([Commitment(r.element(group)?), Commitment(r.element(group)?)]))
                .collect::<Result<Vec<_>, WireError>>()?;
            state.freeze_records.insert(
                (id, party.clone()),
                FreezeRecord {
                    id,
                    party,
                    coin,
                    candidate_sets: sets,
                },
            );
        }
        r.finish()?;
        Ok(state)
    }

    pub fn hash(&self, group: &G) -> [u8; 32] {
        Sha256::digest(self.encode(group)).into()
    }

    /// Freeze records for `id`, in participant order. `None` where a party has not frozen.
    pub fn records_for(&self, id: &ContractId) -> Vec<Option<&FreezeRecord<G>>> {
        match self.contracts.get(id) {
            None => Vec::new(),
            Some(rec) => rec
                .parties
                .iter()
                .map(|p| self.freeze_records.get(&(*id, p.clone())))
                .collect(),
        }
    }
}

/// Result of handling one message, as recorded in the snapshot log.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    Init,
    Accepted {
        kind: &'static str,
    },
    Rejected {
        kind: &'static str,
        reason: Rejection,
    },
}

impl Outcome {
    pub fn rejection(&self) -> Option<&Rejection> {
        match self {
            Outcome::Rejected { reason, .. } => Some(reason),
            _ => None,
        }
    }
}

/// Adversary-visible state after a handled message.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StateSnapshot {
    pub seq: usize,
    pub outcome: Outcome,
    pub state: Vec<u8>,
    pub state_hash: [u8; 32],
}

/// A received message as the adversary sees it: sender and canonical bytes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LoggedMessage {
    pub seq: usize,
    pub sender: PartyId,
    pub kind: &'static str,
    pub bytes: Vec<u8>,
}

/// Emitted to watchers whenever a contract changes phase.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PhaseEvent {
    pub seq: usize,
    pub id: ContractId,
    pub phase: Phase,
}

/// Checks a finalize payload against the freeze records and returns the output coins.
///
/// Shared by the blockchain and by parties validating an MPC output locally, so both
/// reach the same decision on the same input. `records` are in participant order.
pub fn check_output<G: PrimeGroup>(
    params: &crate::group::GroupParams<G>,
    ell: usize,
    id: &ContractId,
    records: &[Option<&FreezeRecord<G>>],
    selected: &[Vec<Commitment<G>>],
    proof: &SchnorrProof<G>,
) -> Result<Vec<Commitment<G>>, Rejection> {
    let grp = &params.group;
    let records = records
        .iter()
        .enumerate()
        .map(|(j, r)| r.ok_or(Rejection::MissingFreezeRecord { party: j }))
        .collect::<Result<Vec<_>, _>>()?;
    if selected.len() != records.len() || selected.iter().any(|row| row.len() != ell) {
        return Err(Rejection::OutputShape);
    }
    let mut coins_out = Vec::with_capacity(records.len());
    for (j, (rec, row)) in records.iter().zip(selected).enumerate() {
        for (k, c) in row.iter().enumerate() {
            if !rec.contains(grp, k, c) {
                return Err(Rejection::CandidateNotInSet { party: j, bit: k });
            }
        }
        coins_out.push(recompose_bits(params, row, ell).map_err(|_| Rejection::OutputShape)?);
    }
    let statement = quotient(
        params,
        &combine(params, &coins_out),
        &combine(params, records.iter().map(|r| &r.coin)),
    );
    if !schnorr_verify(
        params,
        statement.element(),
        &params.h,
        proof,
        &balance_context(id),
    ) {
        return Err(Rejection::SchnorrFailed);
    }
    Ok(coins_out)
}

/// The blockchain process. Single writer: messages are handled strictly in call order.
pub struct Blockchain<G: PrimeGroup> {
    params: SharedParams<G>,
    ell: usize,
    state: BlockchainState<G>,
    snapshots: Vec<StateSnapshot>,
    inbox: Vec<LoggedMessage>,
    watchers: Vec<Sender<PhaseEvent>>,
}

impl<G: PrimeGroup> Blockchain<G> {
    /// Empty `Contracts`, `FrozenCoins` and `FreezeRecords`, and the first snapshot.
    pub fn new(params: SharedParams<G>, ell: usize) -> Self {
        let mut bc = Self {
            params,
            ell,
            state: BlockchainState::default(),
            snapshots: Vec::new(),
            inbox: Vec::new(),
            watchers: Vec::new(),
        };
        bc.emit(Outcome::Init);
        bc
    }

    pub fn params(&self) -> &SharedParams<G> {
        &self.params
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn state(&self) -> &BlockchainState<G> {
        &self.state
    }

    pub fn contract(&self, id: &ContractId) -> Option<&ContractRecord<G>> {
        self.state.contracts.get(id)
    }

    pub fn phase(&self, id: &ContractId) -> Option<Phase> {
        self.contract(id).map(|c| c.phase)
    }

    /// Freeze records for `id` in participant order, skipping parties not yet frozen.
    pub fn freeze_records(&self, id: &ContractId) -> Vec<FreezeRecord<G>> {
        self.state
            .records_for(id)
            .into_iter()
            .flatten()
            .cloned()
            .collect()
    }

    pub fn frozen_coin(&self, id: &ContractId, party: &PartyId) -> Option<Commitment<G>> {
        self.state.frozen_coins.get(&(*id, party.clone())).copied()
    }

    pub fn snapshot_log(&self) -> &[StateSnapshot] {
        &self.snapshots
    }

    pub fn message_log(&self) -> &[LoggedMessage] {
        &self.inbox
    }

    pub fn state_hash(&self) -> [u8; 32] {
        self.state.hash(&self.params.group)
    }

    pub fn watch(&mut self, tx: Sender<PhaseEvent>) {
        self.watchers.push(tx);
    }

    fn emit(&mut self, outcome: Outcome) {
        let state = self.state.encode(&self.params.group);
        let state_hash = Sha256::digest(&state).into();
        self.snapshots.push(StateSnapshot {
            seq: self.snapshots.len(),
            outcome,
            state,
            state_hash,
        });
    }

    fn notify(&mut self, id: ContractId, phase: Phase) {
        let seq = self.snapshots.len() - 1;
        self.watchers
            .retain(|tx| tx.send(PhaseEvent { seq, id, phase }).is_ok());
    }

    fn log(&mut self, sender: &PartyId, kind: &'static str, bytes: Vec<u8>) {
        self.inbox.push(LoggedMessage {
            seq: self.snapshots.len(),
            sender: sender.clone(),
            kind,
            bytes,
        });
    }

    pub fn handle(&mut self, sender: &PartyId, msg: &Message<G>) -> Result<(), Rejection> {
        match msg {
            Message::Freeze(m) => self.handle_freeze(sender, m),
            Message::Finalize(m) => self.handle_finalize(sender, m),
        }
    }

    /// Decodes canonical bytes and handles the message; undecodable input is rejected
    /// as malformed and still logged.
    pub fn handle_bytes(&mut self, sender: &PartyId, bytes: &[u8]) -> Result<(), Rejection> {
        match Message::from_bytes(&self.params.group, bytes) {
            Ok(msg) => self.handle(sender, &msg),
            Err(e) => {
                let kind = match Reader::new(bytes).lp() {
                    Ok(b"freeze") => crate::wire::FREEZE_TAG,
                    Ok(b"finalize") => crate::wire::FINALIZE_TAG,
                    _ => "unknown",
                };
                self.log(sender, kind, bytes.to_vec());
                let reason = Rejection::Malformed(e.to_string());
                self.emit(Outcome::Rejected {
                    kind,
                    reason: reason.clone(),
                });
                Err(reason)
            }
        }
    }

    pub fn handle_freeze(
        &mut self,
        sender: &PartyId,
        msg: &FreezeMessage<G>,
    ) -> Result<(), Rejection> {
        self.log(
            sender,
            crate::wire::FREEZE_TAG,
            msg.to_bytes(&self.params.group),
        );
        let result = self.validate_freeze(sender, msg);
        match result {
            Ok(record) => {
                let id = msg.id;
                let entry = self
                    .state
                    .contracts
                    .entry(id)
                    .or_insert_with(|| ContractRecord {
                        id,
                        parties: msg.parties.clone(),
                        frozen: BTreeSet::new(),
                        phase: Phase::Freeze,
                        closure: None,
                    });
                entry.frozen.insert(sender.clone());
                let complete = entry.frozen.len() == entry.parties.len();
                if complete {
                    entry.phase = Phase::Compute;
                }
                self.state
                    .frozen_coins
                    .insert((id, sender.clone()), record.coin);
                self.state
                    .freeze_records
                    .insert((id, sender.clone()), record);
                self.emit(Outcome::Accepted {
                    kind: crate::wire::FREEZE_TAG,
                });
                if complete {
                    self.notify(id, Phase::Compute);
                }
                Ok(())
            }
            Err(reason) => {
                self.emit(Outcome::Rejected {
                    kind: crate::wire::FREEZE_TAG,
                    reason: reason.clone(),
                });
                Err(reason)
            }
        }
    }

    fn validate_freeze(
        &self,
        sender: &PartyId,
        msg: &FreezeMessage<G>,
    ) -> Result<FreezeRecord<G>, Rejection> {
        let party_index = msg
            .parties
            .iter()
            .position(|p| p == sender)
            .ok_or(Rejection::NotParticipant)?;
        let distinct: BTreeSet<_> = msg.parties.iter().collect();
        if distinct.len() != msg.parties.len() {
            return Err(Rejection::Malformed("duplicate participant".into()));
        }
        if let Some(rec) = self.state.contracts.get(&msg.id) {
            if rec.phase != Phase::Freeze {
                return Err(Rejection::WrongPhase {
                    expected: Phase::Freeze,
                    actual: rec.phase,
                });
            }
            if rec.parties != msg.parties {
                return Err(Rejection::ParticipantsMismatch);
            }
            if rec.frozen.contains(sender) {
                return Err(Rejection::AlreadyFrozen);
            }
        }
        if msg.pairs.len() != self.ell {
            return Err(Rejection::WrongBitCount {
                expected: self.ell,
                got: msg.pairs.len(),
            });
        }
        let params = &*self.params;
        let grp = &params.group;
        let mut sets = Vec::with_capacity(self.ell);
        for (k, pair) in msg.pairs.iter().enumerate() {
            for (slot, cand) in pair.iter().enumerate() {
                let ctx = bit_context(&msg.id, party_index, k, slot);
                if !bnizk_verify(params, &cand.commitment, &cand.proof, &ctx) {
                    return Err(Rejection::BitProofInvalid { bit: k, slot });
                }
            }
            if pair[0].commitment.same_encoding(&pair[1].commitment, grp) {
                return Err(Rejection::DuplicateCandidate { bit: k });
            }
            sets.push(sorted_pair(grp, pair[0].commitment, pair[1].commitment));
        }
        Ok(FreezeRecord {
            id: msg.id,
            party: sender.clone(),
            coin: msg.coin,
            candidate_sets: sets,
        })
    }

    pub fn handle_finalize(
        &mut self,
        sender: &PartyId,
        msg: &FinalizeMessage<G>,
    ) -> Result<(), Rejection> {
        self.log(
            sender,
            crate::wire::FINALIZE_TAG,
            msg.to_bytes(&self.params.group),
        );
        match self.validate_finalize(msg) {
            Ok(coins_out) => {
                let id = msg.id;
                let rec = self.state.contracts.get_mut(&id).expect("validated");
                rec.phase = Phase::Finalized;
                rec.closure = Some(Closure {
                    out: msg.out.clone(),
                    proof: msg.proof,
                });
                let parties = rec.parties.clone();
                for (party, coin) in parties.into_iter().zip(coins_out) {
                    self.state.frozen_coins.insert((id, party), coin);
                }
                self.emit(Outcome::Accepted {
                    kind: crate::wire::FINALIZE_TAG,
                });
                self.notify(id, Phase::Finalized);
                Ok(())
            }
            Err(reason) => {
                self.emit(Outcome::Rejected {
                    kind: crate::wire::FINALIZE_TAG,
                    reason: reason.clone(),
                });
                Err(reason)
            }
        }
    }

    fn validate_finalize(&self, msg: &FinalizeMessage<G>) -> Result<Vec<Commitment<G>>, Rejection> {
        let rec = self
            .state
            .contracts
            .get(&msg.id)
            .ok_or(Rejection::UnknownContract)?;
        if rec.phase != Phase::Compute {
            return Err(Rejection::WrongPhase {
                expected: Phase::Compute,
                actual: rec.phase,
            });
        }
        let records = self.state.records_for(&msg.id);
        check_output(
            &self.params,
            self.ell,
            &msg.id,
            &records,
            &msg.selected,
            &msg.proof,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{GroupParams, Ristretto255};
    use crate::pedersen::commit_value;
    use crate::sigma::bnizk_prove;
    use crate::wire::Candidate;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    type G = Ristretto255;

    fn freeze_for(
        p: &GroupParams<G>,
        id: ContractId,
        parties: &[PartyId],
        who: usize,
        ell: usize,
        rng: &mut ChaCha20Rng,
    ) -> FreezeMessage<G> {
        let coin = commit_value(p, 3, &p.group.random_scalar(rng));
        let pairs = (0..ell)
            .map(|k| {
                let b = rng.gen_range(0..2u64);
                let mut cand = |bit: u64, slot: usize| {
                    let s = p.group.random_scalar(rng);
                    let c = commit_value(p, bit, &s);
                    let proof =
                        bnizk_prove(p, &c, &s, bit, &bit_context(&id, who, k, slot), rng).unwrap();
                    Candidate {
                        commitment: c,
                        proof,
                    }
                };
                [cand(b, 0), cand(1 - b, 1)]
            })
            .collect();
        FreezeMessage {
            id,
            parties: parties.to_vec(),
            coin,
            pairs,
        }
    }

    fn setup() -> (
        SharedParams<G>,
        Blockchain<G>,
        Vec<PartyId>,
        ContractId,
        ChaCha20Rng,
    ) {
        let p = GroupParams::production().shared();
        let bc = Blockchain::new(p.clone(), 3);
        let parties = PartyId::numbered(2);
        (
            p,
            bc,
            parties,
            ContractId([9; 32]),
            ChaCha20Rng::seed_from_u64(12),
        )
    }

    #[test]
    fn init_state() {
        let (_, bc, ..) = setup();
        assert!(bc.state().contracts.is_empty());
        assert!(bc.state().frozen_coins.is_empty());
        assert_eq!(bc.snapshot_log().len(), 1);
        assert_eq!(bc.snapshot_log()[0].outcome, Outcome::Init);
    }

    #[test]
    fn freeze_transitions() {
        let (p, mut bc, parties, id, mut rng) = setup();
        let m0 = freeze_for(&p, id, &parties, 0, 3, &mut rng);
        bc.handle_freeze(&parties[0], &m0).unwrap();
        assert_eq!(bc.phase(&id), Some(Phase::Freeze));
        assert_eq!(bc.contract(&id).unwrap().frozen.len(), 1);
        assert_eq!(
            bc.handle_freeze(&parties[0], &m0),
            Err(Rejection::AlreadyFrozen)
        );
        let m1 = freeze_for(&p, id, &parties, 1, 3, &mut rng);
        bc.handle_freeze(&parties[1], &m1).unwrap();
        assert_eq!(bc.phase(&id), Some(Phase::Compute));
        assert_eq!(bc.snapshot_log().len(), 4);
        assert_eq!(bc.message_log().len(), 3);
        // Stored pairs never keep the transmitted order.
        for rec in bc.freeze_records(&id) {
            for set in &rec.candidate_sets {
                assert!(set[0].to_bytes(&p.group) < set[1].to_bytes(&p.group));
            }
        }
    }

    #[test]
    fn freeze_rejections_do_not_mutate() {
        let (p, mut bc, parties, id, mut rng) = setup();
        let outsider = PartyId::new("mallory");
        let m0 = freeze_for(&p, id, &parties, 0, 3, &mut rng);
        bc.handle_freeze(&parties[0], &m0).unwrap();
        let before = bc.state_hash();

        assert_eq!(
            bc.handle_freeze(&outsider, &m0),
            Err(Rejection::NotParticipant)
        );

        let mut corrupt = freeze_for(&p, id, &parties, 1, 3, &mut rng);
        corrupt.pairs[1][0].proof.zb = p
            .group
            .scalar_add(&corrupt.pairs[1][0].proof.zb, &p.group.scalar_one());
        assert_eq!(
            bc.handle_freeze(&parties[1], &corrupt),
            Err(Rejection::BitProofInvalid { bit: 1, slot: 0 })
        );

        let short = freeze_for(&p, id, &parties, 1, 2, &mut rng);
        assert_eq!(
            bc.handle_freeze(&parties[1], &short),
            Err(Rejection::WrongBitCount {
                expected: 3,
                got: 2
            })
        );

        let mut other_set = freeze_for(&p, id, &parties, 1, 3, &mut rng);
        other_set.parties.reverse();
        // Reordering P changes party 1's index, so this is refused before proofs are checked.
        assert_eq!(
            bc.handle_freeze(&parties[1], &other_set),
            Err(Rejection::ParticipantsMismatch)
        );

        let mut wrong_slot = freeze_for(&p, id, &parties, 1, 3, &mut rng);
        wrong_slot.pairs[0].swap(0, 1);
        assert_eq!(
            bc.handle_freeze(&parties[1], &wrong_slot),
            Err(Rejection::BitProofInvalid { bit: 0, slot: 0 })
        );

        let log = bc.snapshot_log();
        for snap in &log[2..] {
            assert!(snap.outcome.rejection().is_some());
            assert_eq!(snap.state_hash, before);
        }
        assert_eq!(bc.state_hash(), before);
    }

    #[test]
    fn proof_from_other_party_slot_rejected() {
        let (p, mut bc, parties, id, mut rng) = setup();
        // Proofs bound to party index 0 replayed by party 1.
        let m = freeze_for(&p, id, &parties, 0, 3, &mut rng);
        assert!(matches!(
            bc.handle_freeze(&parties[1], &m),
            Err(Rejection::BitProofInvalid { .. })
        ));
        assert!(bc.contract(&id).is_none());
    }

    #[test]
    fn finalize_before_compute_rejected() {
        let (p, mut bc, parties, id, mut rng) = setup();
        let grp = &p.group;
        let x = grp.random_scalar(&mut rng);
        let msg = FinalizeMessage::<G> {
            id,
            selected: vec![vec![]; 2],
            out: vec![],
            proof: crate::sigma::schnorr_prove(&p, &p.h, &p.h, &x, b"", &mut rng),
        };
        assert_eq!(
            bc.handle_finalize(&parties[0], &msg),
            Err(Rejection::UnknownContract)
        );
        let m0 = freeze_for(&p, id, &parties, 0, 3, &mut rng);
        bc.handle_freeze(&parties[0], &m0).unwrap();
        assert!(matches!(
            bc.handle_finalize(&parties[0], &msg),
            Err(Rejection::WrongPhase {
                expected: Phase::Compute,
                actual: Phase::Freeze
            })
        ));
    }

    #[test]
    fn malformed_bytes_logged_and_rejected() {
        let (_, mut bc, parties, ..) = setup();
        let before = bc.state_hash();
        let r = bc.handle_bytes(&parties[0], b"\x00\x00\x00\x06freeze\x00");
        assert!(matches!(r, Err(Rejection::Malformed(_))));
        assert_eq!(bc.message_log().len(), 1);
        assert_eq!(bc.message_log()[0].kind, "freeze");
        assert_eq!(bc.state_hash(), before);
    }

    #[test]
    fn state_encoding_round_trip() {
        let (p, mut bc, parties, id, mut rng) = setup();
        for (i, party) in parties.iter().enumerate() {
            let m = freeze_for(&p, id, &parties, i, 3, &mut rng);
            bc.handle_freeze(party, &m).unwrap();
        }
        let bytes = bc.state().encode(&p.group);
        let back = BlockchainState::<G>::decode(&p.group, &bytes).unwrap();
        assert_eq!(back.encode(&p.group), bytes);
        assert_eq!(back.contracts[&id].phase, Phase::Compute);
        assert!(BlockchainState::<G>::decode(&p.group, &bytes[..bytes.len() - 1]).is_err());
    }

    #[test]
    fn phase_watchers_see_transitions() {
        let (p, mut bc, parties, id, mut rng) = setup();
        let (tx, rx) = std::sync::mpsc::channel();
        bc.watch(tx);
        for (i, party) in parties.iter().enumerate() {
            let m = freeze_for(&p, id, &parties, i, 3, &mut rng);
            bc.handle_freeze(party, &m).unwrap();
        }
        let ev = rx.try_recv().unwrap();
        assert_eq!((ev.id, ev.phase, ev.seq), (id, Phase::Compute, 2));
        assert!(rx.try_recv().is_err());
    }
}
