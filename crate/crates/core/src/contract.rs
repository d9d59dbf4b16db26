// Copyright (c) The psc Contributors
// SPDX-License-Identifier: Apache-2.0

//! Smart-contract functions over hidden currency values, and the built-in contracts.
//!
//! A contract maps `n` inputs `(value_i, aux_i)` either to failure or to `n` output
//! values plus a public output string, with the outputs summing to the inputs.

use std::fmt::Debug;
use std::sync::Arc;

use sha2::{Digest, Sha256};

use crate::error::ContractError;

/// Maximum size of a party's auxiliary input string.
pub const AUX_LIMIT: usize = 4096;

/// Bumped whenever a built-in contract's semantics change; hashed into its digest.
pub const CONTRACT_VERSION: u32 = 1;

/// Amounts are `u64` in `[0, 2^ell)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ValueDomain {
    ell: u32,
}

impl ValueDomain {
    pub fn new(ell: u32) -> Result<Self, ContractError> {
        if ell == 0 || ell > 63 {
            return Err(ContractError::BitWidth {
                ell,
                parties: 0,
                order_bits: 0,
            });
        }
        Ok(Self { ell })
    }

    pub fn ell(&self) -> u32 {
        self.ell
    }

    /// `L = 2^ell`.
    pub fn bound(&self) -> u64 {
        1u64 << self.ell
    }

    pub fn contains(&self, amount: u64) -> bool {
        amount < self.bound()
    }

    pub fn check(&self, amount: u64) -> Result<u64, ContractError> {
        if self.contains(amount) {
            Ok(amount)
        } else {
            Err(ContractError::ValueOutOfRange {
                value: amount,
                ell: self.ell,
            })
        }
    }

    /// `n · 2^ell < q` must hold so integer zero-sum and zero-sum mod `q` coincide.
    /// Also requires `ell ≤ bits(q) − 2`. `order_be` is `q` in big-endian bytes.
    pub fn check_against_group(
        &self,
        parties: usize,
        order_be: &[u8],
    ) -> Result<(), ContractError> {
        let digits: Vec<u8> = order_be.iter().copied().skip_while(|b| *b == 0).collect();
        let order_bits = match digits.first() {
            Some(top) => (digits.len() as u32 - 1) * 8 + (8 - top.leading_zeros()),
            None => 0,
        };
        let err = ContractError::BitWidth {
            ell: self.ell,
            parties,
            order_bits,
        };
        if self.ell + 2 > order_bits {
            return Err(err);
        }
        let needed = u128::from(self.bound()) * parties as u128;
        if digits.len() <= 16 {
            let q = digits
                .iter()
                .fold(0u128, |acc, b| (acc << 8) | u128::from(*b));
            if needed >= q {
                return Err(err);
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContractInput {
    pub value: u64,
    pub aux: Vec<u8>,
}

impl ContractInput {
    pub fn new(value: u64, aux: Vec<u8>) -> Result<Self, ContractError> {
        if aux.len() > AUX_LIMIT {
            return Err(ContractError::AuxTooLong(aux.len()));
        }
        Ok(Self { value, aux })
    }

    pub fn value(value: u64) -> Self {
        Self {
            value,
            aux: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ContractResult {
    Failure,
    Success { values: Vec<u64>, out: Vec<u8> },
}

pub trait SmartContract: Debug + Send + Sync {
    fn name(&self) -> &str;

    /// Canonical parameter bytes, part of the contract's identity.
    fn params(&self) -> Vec<u8>;

    fn arity(&self) -> usize;

    /// Must be deterministic. Wrong arity evaluates to failure.
    fn evaluate(&self, inputs: &[ContractInput]) -> ContractResult;

    /// `SHA-256(len ‖ name ‖ len ‖ params ‖ version)`, lengths as u32 big-endian.
    fn code_digest(&self) -> [u8; 32] {
        let name = self.name().as_bytes();
        let params = self.params();
        let mut hasher = Sha256::new();
        hasher.update((name.len() as u32).to_be_bytes());
        hasher.update(name);
        hasher.update((params.len() as u32).to_be_bytes());
        hasher.update(&params);
        hasher.update(CONTRACT_VERSION.to_be_bytes());
        hasher.finalize().into()
    }
}

pub fn check_zero_sum(inputs: &[u64], outputs: &[u64]) -> Result<bool, ContractError> {
    if inputs.len() != outputs.len() {
        return Err(ContractError::LengthMismatch {
            inputs: inputs.len(),
            outputs: outputs.len(),
        });
    }
    let sum = |xs: &[u64]| xs.iter().map(|x| u128::from(*x)).sum::<u128>();
    Ok(sum(inputs) == sum(outputs))
}

/// Sealed-bid auction. Party 0 is the seller, parties `1..=k` are bidders.
///
/// The highest bid strictly above all earlier ones wins, so ties go to the earliest
/// bidder. The seller gains the winning bid, the winner's balance drops to zero, and
/// losers keep their deposits. `out` is the winner's index in ASCII decimal. If no bid
/// exceeds zero there is no winner and the result is failure.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AuctionContract {
    bidders: usize,
}

impl AuctionContract {
    pub fn new(bidders: usize) -> Result<Self, ContractError> {
        if bidders == 0 {
            return Err(ContractError::Arity {
                name: "auction".into(),
                expected: 2,
                got: 1,
            });
        }
        Ok(Self { bidders })
    }
}

impl SmartContract for AuctionContract {
    fn name(&self) -> &str {
        "auction"
    }

    fn params(&self) -> Vec<u8> {
        (self.bidders as u32).to_be_bytes().to_vec()
    }

    fn arity(&self) -> usize {
        self.bidders + 1
    }

    fn evaluate(&self, inputs: &[ContractInput]) -> ContractResult {
        if inputs.len() != self.arity() {
            return ContractResult::Failure;
        }
        let mut highest = 0u64;
        let mut winner = 0usize;
        for (i, bid) in inputs.iter().enumerate().skip(1) {
            if bid.value > highest {
                highest = bid.value;
                winner = i;
            }
        }
        if winner == 0 {
            return ContractResult::Failure;
        }
        let Some(seller) = inputs[0].value.checked_add(highest) else {
            return ContractResult::Failure;
        };
        let mut values: Vec<u64> = inputs.iter().map(|x| x.value).collect();
        values[0] = seller;
        values[winner] = 0;
        ContractResult::Success {
            values,
            out: winner.to_string().into_bytes(),
        }
    }
}

/// Returns every input value unchanged with an empty output string.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdentityContract {
    parties: usize,
}

impl IdentityContract {
    pub fn new(parties: usize) -> Result<Self, ContractError> {
        if parties == 0 {
            return Err(ContractError::Arity {
                name: "identity".into(),
                expected: 1,
                got: 0,
            });
        }
        Ok(Self { parties })
    }
}

impl SmartContract for IdentityContract {
    fn name(&self) -> &str {
        "identity"
    }

    fn params(&self) -> Vec<u8> {
        (self.parties as u32).to_be_bytes().to_vec()
    }

    fn arity(&self) -> usize {
        self.parties
    }

    fn evaluate(&self, inputs: &[ContractInput]) -> ContractResult {
        if inputs.len() != self.parties {
            return ContractResult::Failure;
        }
        ContractResult::Success {
            values: inputs.iter().map(|x| x.value).collect(),
            out: Vec::new(),
        }
    }
}

/// Negative-test contract: identity, except party 0's output is inflated by one.
/// Violates the zero-sum rule by construction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BadContract {
    parties: usize,
}

impl BadContract {
    pub fn new(parties: usize) -> Result<Self, ContractError> {
        if parties == 0 {
            return Err(ContractError::Arity {
                name: "bad".into(),
                expected: 1,
                got: 0,
            });
        }
        Ok(Self { parties })
    }
}

impl SmartContract for BadContract {
    fn name(&self) -> &str {
        "bad"
    }

    fn params(&self) -> Vec<u8> {
        (self.parties as u32).to_be_bytes().to_vec()
    }

    fn arity(&self) -> usize {
        self.parties
    }

    fn evaluate(&self, inputs: &[ContractInput]) -> ContractResult {
        if inputs.len() != self.parties {
            return ContractResult::Failure;
        }
        let mut values: Vec<u64> = inputs.iter().map(|x| x.value).collect();
        values[0] = values[0].saturating_add(1);
        ContractResult::Success {
            values,
            out: Vec::new(),
        }
    }
}

/// Looks up a built-in contract by registry name for `parties` participants.
pub fn contract_by_name(
    name: &str,
    parties: usize,
) -> Result<Arc<dyn SmartContract>, ContractError> {
    match name {
        "auction" => {
            if parties < 2 {
                return Err(ContractError::Arity {
                    name: name.into(),
                    expected: 2,
                    got: parties,
                });
            }
            Ok(Arc::new(AuctionContract::new(parties - 1)?))
        }
        "identity" => Ok(Arc::new(IdentityContract::new(parties)?)),
        "bad" => Ok(Arc::new(BadContract::new(parties)?)),
        other => Err(ContractError::Unknown(other.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{PrimeGroup, Ristretto255};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn inputs(values: &[u64]) -> Vec<ContractInput> {
        values.iter().map(|v| ContractInput::value(*v)).collect()
    }

    #[test]
    fn zero_sum_checks() {
        assert_eq!(check_zero_sum(&[5, 3], &[8, 0]), Ok(true));
        assert_eq!(check_zero_sum(&[5, 3], &[8, 1]), Ok(false));
        assert_eq!(check_zero_sum(&[], &[]), Ok(true));
        assert!(check_zero_sum(&[1], &[]).is_err());
        assert_eq!(check_zero_sum(&[u64::MAX, 1], &[0, u64::MAX]), Ok(false));
    }

    #[test]
    fn auction_examples() {
        let a = AuctionContract::new(2).unwrap();
        assert_eq!(
            a.evaluate(&inputs(&[0, 5, 3])),
            ContractResult::Success {
                values: vec![5, 0, 3],
                out: b"1".to_vec()
            }
        );
        assert_eq!(
            a.evaluate(&inputs(&[2, 4, 4])),
            ContractResult::Success {
                values: vec![6, 0, 4],
                out: b"1".to_vec()
            }
        );
        assert_eq!(a.evaluate(&inputs(&[0, 0, 0])), ContractResult::Failure);
        assert_eq!(a.evaluate(&inputs(&[0, 5])), ContractResult::Failure);
        assert!(AuctionContract::new(0).is_err());
    }

    #[test]
    fn identity_and_bad() {
        let id = IdentityContract::new(1).unwrap();
        assert_eq!(
            id.evaluate(&inputs(&[7])),
            ContractResult::Success {
                values: vec![7],
                out: vec![]
            }
        );
        let id3 = IdentityContract::new(3).unwrap();
        assert_eq!(
            id3.evaluate(&inputs(&[1, 2, 3])),
            ContractResult::Success {
                values: vec![1, 2, 3],
                out: vec![]
            }
        );
        let bad = BadContract::new(2).unwrap();
        let ContractResult::Success { values, .. } = bad.evaluate(&inputs(&[5, 5])) else {
            panic!("bad contract never fails");
        };
        assert_eq!(values, vec![6, 5]);
        assert_eq!(check_zero_sum(&[5, 5], &values), Ok(false));
    }

    #[test]
    fn aux_limit() {
        assert!(ContractInput::new(1, vec![0; AUX_LIMIT]).is_ok());
        assert_eq!(
            ContractInput::new(1, vec![0; AUX_LIMIT + 1]),
            Err(ContractError::AuxTooLong(AUX_LIMIT + 1))
        );
    }

    #[test]
    fn digests_separate_contracts() {
        let a2 = contract_by_name("auction", 3).unwrap();
        let a3 = contract_by_name("auction", 4).unwrap();
        let id3 = contract_by_name("identity", 3).unwrap();
        assert_ne!(a2.code_digest(), a3.code_digest());
        assert_ne!(a2.code_digest(), id3.code_digest());
        assert_eq!(
            a2.code_digest(),
            AuctionContract::new(2).unwrap().code_digest()
        );
        assert!(contract_by_name("lottery", 2).is_err());
        assert!(contract_by_name("auction", 1).is_err());
    }

    #[test]
    fn value_domain_guards() {
        let d = ValueDomain::new(3).unwrap();
        assert!(d.contains(7));
        assert!(!d.contains(8));
        assert!(d.check(8).is_err());
        // Toy group: q = 11 has 4 bits, so ell ≤ 2 and n·4 < 11.
        assert!(ValueDomain::new(2)
            .unwrap()
            .check_against_group(2, &[11])
            .is_ok());
        assert!(ValueDomain::new(2)
            .unwrap()
            .check_against_group(3, &[11])
            .is_err());
        assert!(ValueDomain::new(3)
            .unwrap()
            .check_against_group(1, &[11])
            .is_err());
        let q = Ristretto255.order_be_bytes();
        assert!(ValueDomain::new(16)
            .unwrap()
            .check_against_group(5, &q)
            .is_ok());
        assert!(ValueDomain::new(63)
            .unwrap()
            .check_against_group(1000, &q)
            .is_ok());
        assert!(ValueDomain::new(0).is_err());
    }

    #[test]
    fn builtins_preserve_sum_on_random_inputs() {
        let mut rng = ChaCha20Rng::seed_from_u64(2024);
        for _ in 0..1000 {
            let n = rng.gen_range(2..=6);
            let values: Vec<u64> = (0..n).map(|_| rng.gen_range(0..1 << 16)).collect();
            let ins = inputs(&values);
            for c in [
                contract_by_name("identity", n).unwrap(),
                contract_by_name("auction", n).unwrap(),
            ] {
                match c.evaluate(&ins) {
                    ContractResult::Success { values: out, .. } => {
                        assert_eq!(check_zero_sum(&values, &out), Ok(true))
                    }
                    ContractResult::Failure => assert!(values[1..].iter().all(|v| *v == 0)),
                }
            }
        }
    }

    #[test]
    fn auction_properties_unique_max() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        for _ in 0..500 {
            let k = rng.gen_range(1..=5);
            let mut values: Vec<u64> = (0..=k).map(|_| rng.gen_range(0..1000)).collect();
            let winner = rng.gen_range(1..=k);
            let max = values[1..].iter().copied().max().unwrap() + 1;
            values[winner] = max;
            let a = AuctionContract::new(k).unwrap();
            let ContractResult::Success {
                values: out,
                out: tag,
            } = a.evaluate(&inputs(&values))
            else {
                panic!("positive maximum always has a winner");
            };
            assert_eq!(out[winner], 0);
            assert_eq!(out[0], values[0] + max);
            assert_eq!(tag, winner.to_string().into_bytes());
            assert_eq!(check_zero_sum(&values, &out), Ok(true));
        }
    }
}
