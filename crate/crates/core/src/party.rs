// Copyright (c) The psc Contributors
// SPDX-License-Identifier: Apache-2.0

//! A contract participant: the user wrapper around create, freeze, prepare-compute
//! and finalize.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha20Rng;
use serde_json::json;

use crate::blockchain::{check_output, FreezeRecord};
use crate::contract::{ContractInput, SmartContract, ValueDomain};
use crate::error::PartyError;
use crate::group::{PrimeGroup, SharedParams};
use crate::mpc::{BitWitness, FhatDescriptor, FhatJob, MpcInput, MpcOutput};
use crate::pedersen::{commit_value, verify_opening, weighted_bit_sum, Commitment, Opening};
use crate::sigma::bnizk_prove;
use crate::wire::{bit_context, Candidate, ContractId, FinalizeMessage, FreezeMessage, PartyId};

/// A spendable `($val, r)` pair.
pub struct CoinOpening<G: PrimeGroup> {
    pub value: u64,
    pub randomness: G::Scalar,
}

impl<G: PrimeGroup> Clone for CoinOpening<G> {
    fn clone(&self) -> Self {
        *self
    }
}
impl<G: PrimeGroup> Copy for CoinOpening<G> {}
impl<G: PrimeGroup> PartialEq for CoinOpening<G> {
    fn eq(&self, o: &Self) -> bool {
        self.value == o.value && self.randomness == o.randomness
    }
}
impl<G: PrimeGroup> fmt::Debug for CoinOpening<G> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoinOpening")
            .field("value", &self.value)
            .finish_non_exhaustive()
    }
}

struct Identifier {
    contract: Arc<dyn SmartContract>,
    parties: Vec<PartyId>,
    index: usize,
}

/// `SecretElems` entry for one contract.
pub struct SecretElems<G: PrimeGroup> {
    pub value: u64,
    pub randomness: G::Scalar,
    pub aux: Vec<u8>,
    pub bits: Vec<BitWitness<G>>,
}

impl<G: PrimeGroup> Clone for SecretElems<G> {
    fn clone(&self) -> Self {
        Self {
            value: self.value,
            randomness: self.randomness,
            aux: self.aux.clone(),
            bits: self.bits.clone(),
        }
    }
}

impl<G: PrimeGroup> fmt::Debug for SecretElems<G> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SecretElems")
            .field("bits", &self.bits.len())
            .finish_non_exhaustive()
    }
}

/// Result of a successful local finalize.
pub struct Finalized<G: PrimeGroup> {
    pub message: FinalizeMessage<G>,
    pub coins_out: Vec<Commitment<G>>,
    pub out: Vec<u8>,
    pub opening: CoinOpening<G>,
}

impl<G: PrimeGroup> fmt::Debug for Finalized<G> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Finalized")
            .field("message", &self.message)
            .field("opening", &self.opening)
            .finish_non_exhaustive()
    }
}

pub struct Party<G: PrimeGroup> {
    id: PartyId,
    params: SharedParams<G>,
    domain: ValueDomain,
    rng: ChaCha20Rng,
    identifiers: BTreeMap<ContractId, Identifier>,
    secrets: BTreeMap<ContractId, SecretElems<G>>,
    computations: BTreeMap<ContractId, FhatDescriptor>,
    coins: Vec<CoinOpening<G>>,
    outputs: BTreeMap<ContractId, CoinOpening<G>>,
}

impl<G: PrimeGroup> fmt::Debug for Party<G> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Party")
            .field("id", &self.id)
            .field("contracts", &self.identifiers.len())
            .finish_non_exhaustive()
    }
}

impl<G: PrimeGroup> Party<G> {
    /// `rng` is this party's private randomness stream.
    pub fn new(
        id: PartyId,
        params: SharedParams<G>,
        domain: ValueDomain,
        rng: ChaCha20Rng,
    ) -> Self {
        Self {
            id,
            params,
            domain,
            rng,
            identifiers: BTreeMap::new(),
            secrets: BTreeMap::new(),
            computations: BTreeMap::new(),
            coins: Vec::new(),
            outputs: BTreeMap::new(),
        }
    }

    pub fn id(&self) -> &PartyId {
        &self.id
    }

    pub fn domain(&self) -> &ValueDomain {
        &self.domain
    }

    pub fn coins(&self) -> &[CoinOpening<G>] {
        &self.coins
    }

    /// The opening recovered at finalize for `id`, if any.
    pub fn output(&self, id: &ContractId) -> Option<CoinOpening<G>> {
        self.outputs.get(id).copied()
    }

    pub fn secrets(&self, id: &ContractId) -> Option<&SecretElems<G>> {
        self.secrets.get(id)
    }

    pub fn has_computation(&self, id: &ContractId) -> bool {
        self.computations.contains_key(id)
    }

    /// Wrapper freeze: draws `r`, records the coin, creates the id and builds the freeze message.
    pub fn freeze(
        &mut self,
        contract: Arc<dyn SmartContract>,
        parties: &[PartyId],
        value: u64,
        aux: Vec<u8>,
    ) -> Result<FreezeMessage<G>, PartyError> {
        ContractInput::new(value, aux.clone())?;
        self.domain.check(value)?;
        let r = self.params.group.random_scalar(&mut self.rng);
        self.coins.push(CoinOpening {
            value,
            randomness: r,
        });
        let id = self.u_create(contract, parties)?;
        self.u_freeze(&id, value, r, aux)
    }

    /// `id ← H(f ‖ P)`, remembered with the contract and this party's position.
    pub fn u_create(
        &mut self,
        contract: Arc<dyn SmartContract>,
        parties: &[PartyId],
    ) -> Result<ContractId, PartyError> {
        let index = parties
            .iter()
            .position(|p| *p == self.id)
            .ok_or(PartyError::NotParticipant)?;
        let id = ContractId::derive(contract.as_ref(), parties);
        self.identifiers.insert(
            id,
            Identifier {
                contract,
                parties: parties.to_vec(),
                index,
            },
        );
        Ok(id)
    }

    pub fn u_freeze(
        &mut self,
        id: &ContractId,
        value: u64,
        randomness: G::Scalar,
        aux: Vec<u8>,
    ) -> Result<FreezeMessage<G>, PartyError> {
        let ident = self
            .identifiers
            .get(id)
            .ok_or(PartyError::UnknownContract)?;
        self.domain.check(value)?;
        let params = &*self.params;
        let grp = &params.group;
        let ell = self.domain.ell() as usize;
        let mut bits = Vec::with_capacity(ell);
        let mut pairs = Vec::with_capacity(ell);
        for k in 0..ell {
            let s0 = grp.random_scalar(&mut self.rng);
            let s1 = grp.random_scalar(&mut self.rng);
            let w = BitWitness {
                c0: commit_value(params, 0, &s0),
                c1: commit_value(params, 1, &s1),
                s0,
                s1,
            };
            // Transmitted order is (candidate for b_k, candidate for 1 − b_k).
            let b_k: u64 = self.rng.gen_range(0..2);
            let mut pair = Vec::with_capacity(2);
            for (slot, bit) in [b_k, 1 - b_k].into_iter().enumerate() {
                let (c, s) = if bit == 0 { (w.c0, w.s0) } else { (w.c1, w.s1) };
                let ctx = bit_context(id, ident.index, k, slot);
                let proof =
                    bnizk_prove(params, &c, &s, bit, &ctx, &mut self.rng).expect("bit is 0 or 1");
                pair.push(Candidate {
                    commitment: c,
                    proof,
                });
            }
            pairs.push([pair[0], pair[1]]);
            bits.push(w);
        }
        let msg = FreezeMessage {
            id: *id,
            parties: ident.parties.clone(),
            coin: commit_value(params, value, &randomness),
            pairs,
        };
        self.secrets.insert(
            *id,
            SecretElems {
                value,
                randomness,
                aux,
                bits,
            },
        );
        Ok(msg)
    }

    /// Builds this party's MPC input once every participant's freeze record is public.
    /// `records` are the on-chain records for `id`, in participant order.
    pub fn u_prepare_compute(
        &mut self,
        id: &ContractId,
        records: &[FreezeRecord<G>],
    ) -> Result<(FhatJob<G>, MpcInput<G>), PartyError> {
        let ident = self
            .identifiers
            .get(id)
            .ok_or(PartyError::UnknownContract)?;
        let secret = self.secrets.get(id).ok_or(PartyError::MissingSecrets)?;
        let complete = records.len() == ident.parties.len()
            && records
                .iter()
                .zip(&ident.parties)
                .all(|(r, p)| r.id == *id && r.party == *p);
        if !complete {
            return Err(PartyError::FreezeIncomplete {
                frozen: records.iter().filter(|r| r.id == *id).count(),
                expected: ident.parties.len(),
            });
        }
        let descriptor = FhatDescriptor {
            id: *id,
            code_digest: ident.contract.code_digest(),
            ell: self.domain.ell(),
        };
        let job = FhatJob {
            descriptor,
            contract: ident.contract.clone(),
            parties: ident.parties.clone(),
            records: records.to_vec(),
        };
        let x = MpcInput {
            value: secret.value,
            randomness: secret.randomness,
            aux: secret.aux.clone(),
            bits: secret.bits.clone(),
        };
        self.computations.insert(*id, descriptor);
        Ok((job, x))
    }

    /// Checks `y` exactly as the blockchain will, recovers this party's output opening and
    /// builds the finalize message. On any failure nothing is stored or emitted.
    pub fn u_finalize(
        &mut self,
        descriptor: &FhatDescriptor,
        y: &MpcOutput<G>,
        records: &[FreezeRecord<G>],
    ) -> Result<Finalized<G>, PartyError> {
        let id = descriptor.id;
        if self.computations.get(&id) != Some(descriptor) {
            return Err(PartyError::NoComputation);
        }
        let ident = self
            .identifiers
            .get(&id)
            .ok_or(PartyError::UnknownContract)?;
        let secret = self.secrets.get(&id).ok_or(PartyError::MissingSecrets)?;
        let (selected, proof, out) = match y {
            MpcOutput::Abort { party, .. } => return Err(PartyError::Aborted { party: *party }),
            MpcOutput::Success {
                selected,
                proof,
                out,
            } => (selected, proof, out),
        };
        let ell = self.domain.ell() as usize;
        let refs: Vec<Option<&FreezeRecord<G>>> = ident
            .parties
            .iter()
            .map(|p| records.iter().find(|r| r.id == id && r.party == *p))
            .collect();
        let coins_out = check_output(&self.params, ell, &id, &refs, selected, proof)
            .map_err(PartyError::OutputRejected)?;

        let mine = &selected[ident.index];
        let mut value = 0u64;
        let mut s = Vec::with_capacity(ell);
        for (k, (c, w)) in mine.iter().zip(&secret.bits).enumerate() {
            if *c == w.c0 {
                s.push(w.s0);
            } else {
                value |= 1 << k;
                s.push(w.s1);
            }
        }
        let grp = &self.params.group;
        let opening = CoinOpening {
            value,
            randomness: weighted_bit_sum(grp, &s),
        };
        let check = Opening::new(grp.scalar_from_u64(value), opening.randomness);
        if !verify_opening(&self.params, &coins_out[ident.index], &check) {
            return Err(PartyError::RecoveryMismatch);
        }
        self.coins.push(opening);
        self.outputs.insert(id, opening);
        self.computations.remove(&id);
        Ok(Finalized {
            message: FinalizeMessage {
                id,
                selected: selected.clone(),
                out: out.clone(),
                proof: *proof,
            },
            coins_out,
            out: out.clone(),
            opening,
        })
    }

    /// Plain JSON dump of the secret state, hex-encoded. For test fixtures only.
    pub fn export_secrets(&self) -> serde_json::Value {
        let grp = &self.params.group;
        let hex_s = |s: &G::Scalar| hex::encode(grp.scalar_bytes(s));
        let hex_c = |c: &Commitment<G>| hex::encode(c.to_bytes(grp));
        let contracts: Vec<_> = self
            .secrets
            .iter()
            .map(|(id, e)| {
                json!({
                    "id": id.to_hex(),
                    "value": e.value,
                    "r": hex_s(&e.randomness),
                    "aux": hex::encode(&e.aux),
                    "bits": e.bits.iter().map(|w| json!([hex_c(&w.c0), hex_c(&w.c1), hex_s(&w.s0), hex_s(&w.s1)])).collect::<Vec<_>>(),
                })
            })
            .collect();
        let coins: Vec<_> = self
            .coins
            .iter()
            .map(|c| json!({"value": c.value, "r": hex_s(&c.randomness)}))
            .collect();
        json!({"party": self.id.0, "group": grp.name(), "secrets": contracts, "coins": coins})
    }
}
