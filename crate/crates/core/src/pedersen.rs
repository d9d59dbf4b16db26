// Copyright (c) The psc Contributors
// SPDX-License-Identifier: Apache-2.0

//! Pedersen commitments `Com(x; r) = g^x · h^r` and their homomorphic recombination.

use std::fmt;

use crate::error::CommitmentError;
use crate::group::{GroupParams, PrimeGroup};

pub struct Commitment<G: PrimeGroup>(pub G::Element);

impl<G: PrimeGroup> Clone for Commitment<G> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<G: PrimeGroup> Copy for Commitment<G> {}

impl<G: PrimeGroup> PartialEq for Commitment<G> {
    fn eq(&self, other: &Self) -> bool {
        self.0 == other.0
    }
}

impl<G: PrimeGroup> Eq for Commitment<G> {}

impl<G: PrimeGroup> fmt::Debug for Commitment<G> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("Commitment").field(&self.0).finish()
    }
}

impl<G: PrimeGroup> Commitment<G> {
    pub fn element(&self) -> &G::Element {
        &self.0
    }

    pub fn to_bytes(&self, group: &G) -> Vec<u8> {
        group.element_bytes(&self.0)
    }

    /// Equality of canonical encodings, used for candidate-set membership.
    pub fn same_encoding(&self, other: &Self, group: &G) -> bool {
        self.to_bytes(group) == other.to_bytes(group)
    }
}

/// Message and randomness opening a commitment.
pub struct Opening<G: PrimeGroup> {
    pub value: G::Scalar,
    pub randomness: G::Scalar,
}

impl<G: PrimeGroup> Clone for Opening<G> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<G: PrimeGroup> Copy for Opening<G> {}

impl<G: PrimeGroup> PartialEq for Opening<G> {
    fn eq(&self, other: &Self) -> bool {
        self.value == other.value && self.randomness == other.randomness
    }
}

impl<G: PrimeGroup> fmt::Debug for Opening<G> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Opening")
            .field("value", &self.value)
            .finish_non_exhaustive()
    }
}

impl<G: PrimeGroup> Opening<G> {
    pub fn new(value: G::Scalar, randomness: G::Scalar) -> Self {
        Self { value, randomness }
    }
}

pub fn commit<G: PrimeGroup>(
    params: &GroupParams<G>,
    value: &G::Scalar,
    randomness: &G::Scalar,
) -> Commitment<G> {
    Commitment(params.group.exp2(&params.g, value, &params.h, randomness))
}

/// Commits to a currency amount injected directly into the scalar field.
pub fn commit_value<G: PrimeGroup>(
    params: &GroupParams<G>,
    value: u64,
    randomness: &G::Scalar,
) -> Commitment<G> {
    commit(params, &params.group.scalar_from_u64(value), randomness)
}

pub fn verify_opening<G: PrimeGroup>(
    params: &GroupParams<G>,
    c: &Commitment<G>,
    opening: &Opening<G>,
) -> bool {
    commit(params, &opening.value, &opening.randomness) == *c
}

/// Product of commitments; opens to the summed values and randomness.
pub fn combine<'a, G: PrimeGroup>(
    params: &GroupParams<G>,
    cs: impl IntoIterator<Item = &'a Commitment<G>>,
) -> Commitment<G> {
    let grp = &params.group;
    Commitment(
        cs.into_iter()
            .fold(grp.identity(), |acc, c| grp.mul(&acc, &c.0)),
    )
}

pub fn quotient<G: PrimeGroup>(
    params: &GroupParams<G>,
    a: &Commitment<G>,
    b: &Commitment<G>,
) -> Commitment<G> {
    Commitment(params.group.div(&a.0, &b.0))
}

/// `∏_k c_k^(2^k)` for exactly `ell` bit commitments, least significant first.
pub fn recompose_bits<G: PrimeGroup>(
    params: &GroupParams<G>,
    bit_commitments: &[Commitment<G>],
    ell: usize,
) -> Result<Commitment<G>, CommitmentError> {
    if bit_commitments.len() != ell {
        return Err(CommitmentError::WrongBitCount {
            expected: ell,
            got: bit_commitments.len(),
        });
    }
    let grp = &params.group;
    // Horner from the most significant bit: acc ← acc² · c_k.
    let acc = bit_commitments
        .iter()
        .rev()
        .fold(grp.identity(), |acc, c| grp.mul(&grp.mul(&acc, &acc), &c.0));
    Ok(Commitment(acc))
}

/// `Σ_k 2^k · x_k` in the scalar field, least significant first.
pub fn weighted_bit_sum<G: PrimeGroup>(group: &G, terms: &[G::Scalar]) -> G::Scalar {
    terms.iter().rev().fold(group.scalar_zero(), |acc, x| {
        group.scalar_add(&group.scalar_add(&acc, &acc), x)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{ModpGroup, Ristretto255};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    type Toy = ModpGroup<u64>;

    fn toy() -> GroupParams<Toy> {
        GroupParams::toy()
    }

    fn sc(p: &GroupParams<Toy>, v: u64) -> <Toy as PrimeGroup>::Scalar {
        p.group.scalar_from_u64(v)
    }

    #[test]
    fn toy_commit_vectors() {
        let p = toy();
        assert_eq!(commit(&p, &sc(&p, 0), &sc(&p, 0)).0, p.group.identity());
        assert_eq!(commit(&p, &sc(&p, 3), &sc(&p, 5)).0.value(), 12);
        assert_eq!(commit(&p, &sc(&p, 2), &sc(&p, 1)).0.value(), 13);
    }

    #[test]
    fn opening_checks() {
        let p = toy();
        let c = commit(&p, &sc(&p, 3), &sc(&p, 5));
        assert!(verify_opening(&p, &c, &Opening::new(sc(&p, 3), sc(&p, 5))));
        assert!(!verify_opening(&p, &c, &Opening::new(sc(&p, 3), sc(&p, 6))));
        assert!(!verify_opening(&p, &c, &Opening::new(sc(&p, 4), sc(&p, 5))));
    }

    #[test]
    fn combine_and_quotient() {
        let p = toy();
        let a = commit(&p, &sc(&p, 3), &sc(&p, 5));
        let b = commit(&p, &sc(&p, 2), &sc(&p, 1));
        let sum = combine(&p, [&a, &b]);
        assert_eq!(sum.0.value(), 18);
        assert_eq!(sum, commit(&p, &sc(&p, 5), &sc(&p, 6)));
        assert_eq!(quotient(&p, &a, &a).0, p.group.identity());
        assert_eq!(combine::<Toy>(&p, []).0, p.group.identity());
    }

    #[test]
    fn recompose_three_bits() {
        let p = GroupParams::production();
        let grp = &p.group;
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let s: Vec<_> = (0..3).map(|_| grp.random_scalar(&mut rng)).collect();
        let bits = [1u64, 0, 1];
        let cs: Vec<_> = bits
            .iter()
            .zip(&s)
            .map(|(b, r)| commit_value(&p, *b, r))
            .collect();
        let coin = recompose_bits(&p, &cs, 3).unwrap();
        let two = grp.scalar_from_u64(2);
        let four = grp.scalar_from_u64(4);
        let r = grp.scalar_add(
            &grp.scalar_add(&s[0], &grp.scalar_mul(&two, &s[1])),
            &grp.scalar_mul(&four, &s[2]),
        );
        assert!(verify_opening(
            &p,
            &coin,
            &Opening::new(grp.scalar_from_u64(5), r)
        ));
        assert_eq!(weighted_bit_sum(grp, &s), r);
    }

    #[test]
    fn recompose_edge_cases() {
        let p = toy();
        let zero = commit(&p, &sc(&p, 0), &sc(&p, 0));
        assert_eq!(
            recompose_bits(&p, &[zero; 3], 3).unwrap().0,
            p.group.identity()
        );
        let c = commit(&p, &sc(&p, 2), &sc(&p, 7));
        assert_eq!(recompose_bits(&p, &[c], 1).unwrap(), c);
        assert_eq!(
            recompose_bits(&p, &[c, c], 3),
            Err(CommitmentError::WrongBitCount {
                expected: 3,
                got: 2
            })
        );
    }

    #[test]
    fn recompose_matches_brute_force_powering() {
        let p = toy();
        let grp = &p.group;
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        for ell in 1..=8usize {
            for _ in 0..20 {
                let cs: Vec<_> = (0..ell)
                    .map(|_| {
                        let v = grp.random_scalar(&mut rng);
                        let r = grp.random_scalar(&mut rng);
                        commit(&p, &v, &r)
                    })
                    .collect();
                // c^(2^k) by repeated multiplication, 2^k times.
                let powered: Vec<_> = cs
                    .iter()
                    .enumerate()
                    .map(|(k, c)| {
                        let mut acc = grp.identity();
                        for _ in 0..(1u64 << k) {
                            acc = grp.mul(&acc, &c.0);
                        }
                        Commitment::<Toy>(acc)
                    })
                    .collect();
                assert_eq!(recompose_bits(&p, &cs, ell).unwrap(), combine(&p, &powered));
            }
        }
    }

    proptest! {
        #[test]
        fn homomorphism(v1 in any::<u64>(), r1 in any::<[u8; 32]>(), v2 in any::<u64>(), r2 in any::<[u8; 32]>()) {
            let p = GroupParams::production();
            let grp = &p.group;
            let wide = |b: [u8; 32]| { let mut w = [0u8; 64]; w[..32].copy_from_slice(&b); grp.scalar_from_wide(&w) };
            let (v1, v2) = (grp.scalar_from_u64(v1), grp.scalar_from_u64(v2));
            let (r1, r2) = (wide(r1), wide(r2));
            let lhs = combine(&p, [&commit(&p, &v1, &r1), &commit(&p, &v2, &r2)]);
            let rhs = commit(&p, &grp.scalar_add(&v1, &v2), &grp.scalar_add(&r1, &r2));
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn balance_identity(seed in any::<u64>(), n in 1usize..5, balanced in any::<bool>()) {
            let p = GroupParams::<Ristretto255>::production();
            let grp = &p.group;
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let inputs: Vec<u64> = (0..n).map(|i| (seed >> (i * 8)) & 0xff).collect();
            let mut outputs = inputs.clone();
            outputs.rotate_left(1);
            if !balanced {
                outputs[0] += 1;
            }
            let r: Vec<_> = (0..n).map(|_| grp.random_scalar(&mut rng)).collect();
            let s: Vec<_> = (0..n).map(|_| grp.random_scalar(&mut rng)).collect();
            let coins: Vec<_> = inputs.iter().zip(&r).map(|(v, r)| commit_value(&p, *v, r)).collect();
            let outs: Vec<_> = outputs.iter().zip(&s).map(|(v, s)| commit_value(&p, *v, s)).collect();
            let c = quotient(&p, &combine(&p, &outs), &combine(&p, &coins));
            let exponent = grp.scalar_sub(
                &s.iter().fold(grp.scalar_zero(), |a, x| grp.scalar_add(&a, x)),
                &r.iter().fold(grp.scalar_zero(), |a, x| grp.scalar_add(&a, x)),
            );
            prop_assert_eq!(c.0 == grp.exp(&p.h, &exponent), balanced);
        }
    }
}
