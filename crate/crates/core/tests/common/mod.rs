// Copyright (c) The psc Contributors
// SPDX-License-Identifier: Apache-2.0

#![allow(dead_code)]

use std::sync::Arc;

use psc_core::blockchain::{Blockchain, FreezeRecord};
use psc_core::contract::{SmartContract, ValueDomain};
use psc_core::group::{GroupParams, PrimeGroup, SharedParams};
use psc_core::mpc::{eval_fhat, FhatJob, MpcInput, MpcOutput};
use psc_core::party::Party;
use psc_core::wire::{ContractId, PartyId};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// A blockchain with every party frozen, driven by hand.
pub struct Frozen<G: PrimeGroup> {
    pub params: SharedParams<G>,
    pub domain: ValueDomain,
    pub contract: Arc<dyn SmartContract>,
    pub names: Vec<PartyId>,
    pub parties: Vec<Party<G>>,
    pub bc: Blockchain<G>,
    pub id: ContractId,
}

impl<G: PrimeGroup> Frozen<G> {
    pub fn new(
        params: GroupParams<G>,
        contract: Arc<dyn SmartContract>,
        values: &[u64],
        ell: u32,
        seed: u64,
    ) -> Self {
        let params = params.shared();
        let domain = ValueDomain::new(ell).unwrap();
        let names = PartyId::numbered(values.len());
        let mut parties: Vec<Party<G>> = names
            .iter()
            .enumerate()
            .map(|(i, n)| {
                let rng =
                    ChaCha20Rng::seed_from_u64(seed.wrapping_mul(1000).wrapping_add(i as u64));
                Party::new(n.clone(), params.clone(), domain, rng)
            })
            .collect();
        let mut bc = Blockchain::new(params.clone(), ell as usize);
        let mut id = None;
        for (p, v) in parties.iter_mut().zip(values) {
            let msg = p.freeze(contract.clone(), &names, *v, Vec::new()).unwrap();
            id = Some(msg.id);
            bc.handle_freeze(&p.id().clone(), &msg).unwrap();
        }
        Self {
            params,
            domain,
            contract,
            names,
            parties,
            bc,
            id: id.unwrap(),
        }
    }

    pub fn records(&self) -> Vec<FreezeRecord<G>> {
        self.bc.freeze_records(&self.id)
    }

    /// Every party's MPC input and the shared job.
    pub fn prepare(&mut self) -> (FhatJob<G>, Vec<MpcInput<G>>) {
        let records = self.records();
        let id = self.id;
        let mut job = None;
        let xs = self
            .parties
            .iter_mut()
            .map(|p| {
                let (j, x) = p.u_prepare_compute(&id, &records).unwrap();
                job = Some(j);
                x
            })
            .collect();
        (job.unwrap(), xs)
    }

    pub fn evaluate(&mut self, seed: u64) -> (FhatJob<G>, Vec<MpcInput<G>>, MpcOutput<G>) {
        let (job, xs) = self.prepare();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let y = eval_fhat(
            &self.params,
            self.contract.as_ref(),
            &self.domain,
            &self.id,
            &xs,
            &job.records,
            &mut rng,
        );
        (job, xs, y)
    }
}
