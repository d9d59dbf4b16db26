// Copyright (c) The psc Contributors
// SPDX-License-Identifier: Apache-2.0

//! The trusted computation entity `M` and the function `f̂` it evaluates.
//!
//! `f̂` runs the contract on the parties' plaintext inputs, picks for every output bit
//! the candidate commitment that matches it, and proves that the selected coins
//! balance the frozen ones. Only `y` ever leaves `M`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::mpsc::{channel, Receiver, Sender};
use std::sync::{Arc, Mutex};

use rand::SeedableRng;
use rand::{CryptoRng, RngCore};
use rand_chacha::ChaCha20Rng;

use crate::blockchain::FreezeRecord;
use crate::contract::{ContractInput, ContractResult, SmartContract, ValueDomain};
use crate::error::WireError;
use crate::group::{GroupParams, PrimeGroup, SharedParams};
use crate::pedersen::{
    combine, commit_value, quotient, recompose_bits, weighted_bit_sum, Commitment,
};
use crate::sigma::{schnorr_prove, SchnorrProof};
use crate::wire::{balance_context, ContractId, PartyId, Reader, Writer};

/// Names the job `f̂` for one contract: which contract, which code, which bit width.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FhatDescriptor {
    pub id: ContractId,
    pub code_digest: [u8; 32],
    pub ell: u32,
}

/// Everything `M` needs besides the private inputs: the contract itself and the
/// public freeze records, in participant order.
pub struct FhatJob<G: PrimeGroup> {
    pub descriptor: FhatDescriptor,
    pub contract: Arc<dyn SmartContract>,
    pub parties: Vec<PartyId>,
    pub records: Vec<FreezeRecord<G>>,
}

impl<G: PrimeGroup> Clone for FhatJob<G> {
    fn clone(&self) -> Self {
        Self {
            descriptor: self.descriptor,
            contract: self.contract.clone(),
            parties: self.parties.clone(),
            records: self.records.clone(),
        }
    }
}

impl<G: PrimeGroup> fmt::Debug for FhatJob<G> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FhatJob")
            .field("descriptor", &self.descriptor)
            .field("parties", &self.parties)
            .finish_non_exhaustive()
    }
}

/// `(c^(k,0), c^(k,1), s^(k,0), s^(k,1))` for one bit.
pub struct BitWitness<G: PrimeGroup> {
    pub c0: Commitment<G>,
    pub c1: Commitment<G>,
    pub s0: G::Scalar,
    pub s1: G::Scalar,
}

impl<G: PrimeGroup> Clone for BitWitness<G> {
    fn clone(&self) -> Self {
        *self
    }
}
impl<G: PrimeGroup> Copy for BitWitness<G> {}
impl<G: PrimeGroup> PartialEq for BitWitness<G> {
    fn eq(&self, o: &Self) -> bool {
        self.c0 == o.c0 && self.c1 == o.c1 && self.s0 == o.s0 && self.s1 == o.s1
    }
}
impl<G: PrimeGroup> fmt::Debug for BitWitness<G> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BitWitness")
            .field("c0", &self.c0)
            .field("c1", &self.c1)
            .finish_non_exhaustive()
    }
}

/// One party's private input `x = ($val, r, in, (c^(k,0), c^(k,1), s^(k,0), s^(k,1))_k)`.
pub struct MpcInput<G: PrimeGroup> {
    pub value: u64,
    pub randomness: G::Scalar,
    pub aux: Vec<u8>,
    pub bits: Vec<BitWitness<G>>,
}

impl<G: PrimeGroup> Clone for MpcInput<G> {
    fn clone(&self) -> Self {
        Self {
            value: self.value,
            randomness: self.randomness,
            aux: self.aux.clone(),
            bits: self.bits.clone(),
        }
    }
}

impl<G: PrimeGroup> PartialEq for MpcInput<G> {
    fn eq(&self, o: &Self) -> bool {
        self.value == o.value
            && self.randomness == o.randomness
            && self.aux == o.aux
            && self.bits == o.bits
    }
}

impl<G: PrimeGroup> fmt::Debug for MpcInput<G> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MpcInput")
            .field("bits", &self.bits.len())
            .finish_non_exhaustive()
    }
}

impl<G: PrimeGroup> MpcInput<G> {
    /// `u64 value ‖ scalar r ‖ lp(aux) ‖ u32 ℓ ‖ (c0 ‖ c1 ‖ s0 ‖ s1)*ℓ`.
    pub fn to_bytes(&self, group: &G) -> Vec<u8> {
        let mut w = Writer::new();
        w.u64(self.value)
            .scalar(group, &self.randomness)
            .lp(&self.aux)
            .u32(self.bits.len() as u32);
        for b in &self.bits {
            w.element(group, b.c0.element())
                .element(group, b.c1.element())
                .scalar(group, &b.s0)
                .scalar(group, &b.s1);
        }
        w.finish()
    }

    pub fn from_bytes(group: &G, bytes: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::new(bytes);
        let value = r.u64()?;
        let randomness = r.scalar(group)?;
        let aux = r.lp()?.to_vec();
        let item = 2 * (group.element_len() + group.scalar_len());
        let bits = (0..r.count(item)?)
            .map(|_| {
                Ok(BitWitness {
                    c0: Commitment(r.element(group)?),
                    c1: Commitment(r.element(group)?),
                    s0: r.scalar(group)?,
                    s1: r.scalar(group)?,
                })
            })
            .collect::<Result<Vec<_>, WireError>>()?;
        r.finish()?;
        Ok(Self {
            value,
            randomness,
            aux,
            bits,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AbortReason {
    /// Input count differs from the contract arity or the freeze records.
    InputCount,
    /// Wrong number of bit quadruples.
    BitCount,
    /// `c^(k,b) ≠ Com(b; s^(k,b))`.
    CandidateOpening,
    /// Candidates differ from the on-chain set `C^(k)`.
    CandidateNotOnChain,
    /// `Com($val; r)` differs from the frozen coin.
    CoinMismatch,
    /// The contract evaluated to ⊥.
    ContractFailure,
    /// An output value is not representable in ℓ bits.
    ValueOutOfRange,
}

impl AbortReason {
    pub fn code(&self) -> &'static str {
        match self {
            AbortReason::InputCount => "input-count",
            AbortReason::BitCount => "bit-count",
            AbortReason::CandidateOpening => "candidate-opening",
            AbortReason::CandidateNotOnChain => "candidate-not-on-chain",
            AbortReason::CoinMismatch => "coin-mismatch",
            AbortReason::ContractFailure => "contract-failure",
            AbortReason::ValueOutOfRange => "value-out-of-range",
        }
    }

    fn to_u8(self) -> u8 {
        self as u8
    }

    fn from_u8(v: u8) -> Result<Self, WireError> {
        use AbortReason::*;
        [
            InputCount,
            BitCount,
            CandidateOpening,
            CandidateNotOnChain,
            CoinMismatch,
            ContractFailure,
            ValueOutOfRange,
        ]
        .get(v as usize)
        .copied()
        .ok_or_else(|| WireError::Invalid(format!("abort reason {v}")))
    }
}

impl fmt::Display for AbortReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// `y`: selected commitments, balance proof and public output, or ABORT.
///
/// Carries no openings or randomness.
pub enum MpcOutput<G: PrimeGroup> {
    Success {
        selected: Vec<Vec<Commitment<G>>>,
        proof: SchnorrProof<G>,
        out: Vec<u8>,
    },
    Abort {
        party: Option<usize>,
        reason: AbortReason,
    },
}

impl<G: PrimeGroup> Clone for MpcOutput<G> {
    fn clone(&self) -> Self {
        match self {
            Self::Success {
                selected,
                proof,
                out,
            } => Self::Success {
                selected: selected.clone(),
                proof: *proof,
                out: out.clone(),
            },
            Self::Abort { party, reason } => Self::Abort {
                party: *party,
                reason: *reason,
            },
        }
    }
}

impl<G: PrimeGroup> PartialEq for MpcOutput<G> {
    fn eq(&self, o: &Self) -> bool {
        match (self, o) {
            (
                Self::Success {
                    selected,
                    proof,
                    out,
                },
                Self::Success {
                    selected: s2,
                    proof: p2,
                    out: o2,
                },
            ) => selected == s2 && proof == p2 && out == o2,
            (
                Self::Abort { party, reason },
                Self::Abort {
                    party: p2,
                    reason: r2,
                },
            ) => party == p2 && reason == r2,
            _ => false,
        }
    }
}

impl<G: PrimeGroup> fmt::Debug for MpcOutput<G> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Success { selected, out, .. } => f
                .debug_struct("Success")
                .field("selected", selected)
                .field("out", &String::from_utf8_lossy(out))
                .finish_non_exhaustive(),
            Self::Abort { party, reason } => f
                .debug_struct("Abort")
                .field("party", party)
                .field("reason", reason)
                .finish(),
        }
    }
}

impl<G: PrimeGroup> MpcOutput<G> {
    pub fn abort(party: Option<usize>, reason: AbortReason) -> Self {
        Self::Abort { party, reason }
    }

    pub fn is_abort(&self) -> bool {
        matches!(self, Self::Abort { .. })
    }

    /// Success: `0x00 ‖ u32 n ‖ u32 ℓ ‖ elements ‖ proof ‖ lp(out)`.
    /// Abort: `0x01 ‖ u8 has_party ‖ u32 party ‖ u8 reason`.
    pub fn to_bytes(&self, group: &G) -> Vec<u8> {
        let mut w = Writer::new();
        match self {
            Self::Success {
                selected,
                proof,
                out,
            } => {
                let ell = selected.first().map_or(0, Vec::len);
                w.u8(0).u32(selected.len() as u32).u32(ell as u32);
                for row in selected {
                    for c in row {
                        w.element(group, c.element());
                    }
                }
                w.raw(&proof.to_bytes(group)).lp(out);
            }
            Self::Abort { party, reason } => {
                w.u8(1)
                    .u8(party.is_some() as u8)
                    .u32(party.unwrap_or(0) as u32)
                    .u8(reason.to_u8());
            }
        }
        w.finish()
    }

    pub fn from_bytes(group: &G, bytes: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::new(bytes);
        let y = match r.u8()? {
            0 => {
                let n = r.u32()? as usize;
                let ell = r.u32()? as usize;
                let total = n
                    .checked_mul(ell)
                    .filter(|t| t.saturating_mul(group.element_len()) <= bytes.len())
                    .ok_or_else(|| WireError::Invalid("selected matrix too large".into()))?;
                let mut flat = Vec::with_capacity(total);
                for _ in 0..total {
                    flat.push(Commitment(r.element(group)?));
                }
                let selected = if ell == 0 {
                    vec![Vec::new(); n]
                } else {
                    flat.chunks(ell).map(<[_]>::to_vec).collect()
                };
                let proof = SchnorrProof::from_bytes(
                    group,
                    r.take(SchnorrProof::<G>::encoded_len(group))?,
                )?;
                let out = r.lp()?.to_vec();
                Self::Success {
                    selected,
                    proof,
                    out,
                }
            }
            1 => {
                let has = r.u8()?;
                let idx = r.u32()? as usize;
                let reason = AbortReason::from_u8(r.u8()?)?;
                let party = match has {
                    0 => None,
                    1 => Some(idx),
                    other => return Err(WireError::Invalid(format!("party flag {other}"))),
                };
                Self::Abort { party, reason }
            }
            other => return Err(WireError::Invalid(format!("output tag {other}"))),
        };
        r.finish()?;
        Ok(y)
    }
}

fn same_set<G: PrimeGroup>(
    group: &G,
    set: &[Commitment<G>; 2],
    a: &Commitment<G>,
    b: &Commitment<G>,
) -> bool {
    let mut mine = [a.to_bytes(group), b.to_bytes(group)];
    mine.sort();
    let mut theirs = [set[0].to_bytes(group), set[1].to_bytes(group)];
    theirs.sort();
    mine == theirs
}

/// Binds the private inputs to the public freeze data. Names the first offending party.
pub fn consistency_preamble<G: PrimeGroup>(
    params: &GroupParams<G>,
    domain: &ValueDomain,
    inputs: &[MpcInput<G>],
    records: &[FreezeRecord<G>],
) -> Result<(), (Option<usize>, AbortReason)> {
    if inputs.len() != records.len() {
        return Err((None, AbortReason::InputCount));
    }
    let ell = domain.ell() as usize;
    for (j, (x, rec)) in inputs.iter().zip(records).enumerate() {
        let fail = |reason| Err((Some(j), reason));
        if x.bits.len() != ell || rec.candidate_sets.len() != ell {
            return fail(AbortReason::BitCount);
        }
        for (w, set) in x.bits.iter().zip(&rec.candidate_sets) {
            if commit_value(params, 0, &w.s0) != w.c0 || commit_value(params, 1, &w.s1) != w.c1 {
                return fail(AbortReason::CandidateOpening);
            }
            if !same_set(&params.group, set, &w.c0, &w.c1) {
                return fail(AbortReason::CandidateNotOnChain);
            }
        }
        if !domain.contains(x.value) || commit_value(params, x.value, &x.randomness) != rec.coin {
            return fail(AbortReason::CoinMismatch);
        }
    }
    Ok(())
}

/// Evaluates `f̂` over all parties' inputs, in participant order.
pub fn eval_fhat<G: PrimeGroup, R: RngCore + CryptoRng>(
    params: &GroupParams<G>,
    contract: &dyn SmartContract,
    domain: &ValueDomain,
    id: &ContractId,
    inputs: &[MpcInput<G>],
    records: &[FreezeRecord<G>],
    rng: &mut R,
) -> MpcOutput<G> {
    let grp = &params.group;
    if inputs.len() != contract.arity() {
        return MpcOutput::abort(None, AbortReason::InputCount);
    }
    if let Err((party, reason)) = consistency_preamble(params, domain, inputs, records) {
        return MpcOutput::abort(party, reason);
    }
    let contract_inputs: Vec<ContractInput> = inputs
        .iter()
        .map(|x| ContractInput {
            value: x.value,
            aux: x.aux.clone(),
        })
        .collect();
    let (values, out) = match contract.evaluate(&contract_inputs) {
        ContractResult::Failure => return MpcOutput::abort(None, AbortReason::ContractFailure),
        ContractResult::Success { values, out } => (values, out),
    };
    if values.len() != inputs.len() {
        return MpcOutput::abort(None, AbortReason::InputCount);
    }
    if let Some(j) = values.iter().position(|v| !domain.contains(*v)) {
        return MpcOutput::abort(Some(j), AbortReason::ValueOutOfRange);
    }

    let mut selected = Vec::with_capacity(inputs.len());
    let mut witness = grp.scalar_zero();
    for (x, v) in inputs.iter().zip(&values) {
        let mut row = Vec::with_capacity(x.bits.len());
        let mut s = Vec::with_capacity(x.bits.len());
        for (k, w) in x.bits.iter().enumerate() {
            if (v >> k) & 1 == 1 {
                row.push(w.c1);
                s.push(w.s1);
            } else {
                row.push(w.c0);
                s.push(w.s0);
            }
        }
        let r_out = weighted_bit_sum(grp, &s);
        witness = grp.scalar_add(&witness, &grp.scalar_sub(&r_out, &x.randomness));
        selected.push(row);
    }

    let ell = domain.ell() as usize;
    let coins_out: Vec<_> = selected
        .iter()
        .map(|row| recompose_bits(params, row, ell).expect("row has ell bits"))
        .collect();
    let statement = quotient(
        params,
        &combine(params, &coins_out),
        &combine(params, records.iter().map(|r| &r.coin)),
    );
    let proof = schnorr_prove(
        params,
        statement.element(),
        &params.h,
        &witness,
        &balance_context(id),
        rng,
    );
    MpcOutput::Success {
        selected,
        proof,
        out,
    }
}

/// What `M` delivers to each participant once all inputs are in.
pub struct Delivery<G: PrimeGroup> {
    pub descriptor: FhatDescriptor,
    pub parties: Vec<PartyId>,
    pub y: MpcOutput<G>,
}

impl<G: PrimeGroup> Clone for Delivery<G> {
    fn clone(&self) -> Self {
        Self {
            descriptor: self.descriptor,
            parties: self.parties.clone(),
            y: self.y.clone(),
        }
    }
}

impl<G: PrimeGroup> fmt::Debug for Delivery<G> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Delivery")
            .field("descriptor", &self.descriptor)
            .field("y", &self.y)
            .finish()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub sender: PartyId,
    pub id: ContractId,
    pub reason: &'static str,
}

type JobKey = (FhatDescriptor, Vec<PartyId>);

struct Pending<G: PrimeGroup> {
    job: FhatJob<G>,
    inputs: BTreeMap<PartyId, MpcInput<G>>,
}

struct Inner<G: PrimeGroup> {
    pending: BTreeMap<JobKey, Pending<G>>,
    outboxes: BTreeMap<PartyId, Sender<Delivery<G>>>,
    violations: Vec<Violation>,
    evaluations: usize,
    rng: ChaCha20Rng,
}

/// The incorruptible entity. Thread-safe: parties may submit from their own threads.
pub struct IdealMpc<G: PrimeGroup> {
    params: SharedParams<G>,
    inner: Mutex<Inner<G>>,
}

impl<G: PrimeGroup> IdealMpc<G> {
    pub fn new(params: SharedParams<G>, seed: [u8; 32]) -> Self {
        Self {
            params,
            inner: Mutex::new(Inner {
                pending: BTreeMap::new(),
                outboxes: BTreeMap::new(),
                violations: Vec::new(),
                evaluations: 0,
                rng: ChaCha20Rng::from_seed(seed),
            }),
        }
    }

    /// Opens the private channel from `M` to `party`.
    pub fn connect(&self, party: &PartyId) -> Receiver<Delivery<G>> {
        let (tx, rx) = channel();
        self.lock().outboxes.insert(party.clone(), tx);
        rx
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, Inner<G>> {
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// `(input, f̂, P, x)` from `sender`. Replaces any earlier input from the same sender
    /// for the same job; evaluates and broadcasts once every participant has submitted.
    /// Returns whether this submission triggered the evaluation.
    pub fn submit(&self, sender: &PartyId, job: FhatJob<G>, x: MpcInput<G>) -> bool {
        let mut inner = self.lock();
        let id = job.descriptor.id;
        if !job.parties.contains(sender) {
            inner.violations.push(Violation {
                sender: sender.clone(),
                id,
                reason: "not-participant",
            });
            return false;
        }
        let key = (job.descriptor, job.parties.clone());
        let pending = inner.pending.entry(key.clone()).or_insert_with(|| Pending {
            job,
            inputs: BTreeMap::new(),
        });
        pending.inputs.insert(sender.clone(), x);
        if pending.inputs.len() < pending.job.parties.len() {
            return false;
        }
        let mut pending = inner.pending.remove(&key).expect("present");
        let job = &pending.job;
        let inputs: Vec<_> = job
            .parties
            .iter()
            .map(|p| pending.inputs.remove(p).expect("all parties submitted"))
            .collect();
        let y = match ValueDomain::new(job.descriptor.ell) {
            Ok(domain) => eval_fhat(
                &self.params,
                job.contract.as_ref(),
                &domain,
                &id,
                &inputs,
                &job.records,
                &mut inner.rng,
            ),
            Err(_) => MpcOutput::abort(None, AbortReason::BitCount),
        };
        inner.evaluations += 1;
        let delivery = Delivery {
            descriptor: job.descriptor,
            parties: job.parties.clone(),
            y,
        };
        for p in &job.parties {
            if let Some(tx) = inner.outboxes.get(p) {
                let _ = tx.send(delivery.clone());
            }
        }
        true
    }

    pub fn violations(&self) -> Vec<Violation> {
        self.lock().violations.clone()
    }

    pub fn evaluations(&self) -> usize {
        self.lock().evaluations
    }

    pub fn pending_inputs(&self) -> usize {
        self.lock().pending.values().map(|p| p.inputs.len()).sum()
    }
}
