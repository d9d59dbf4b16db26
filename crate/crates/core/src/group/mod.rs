// Copyright (c) The psc Contributors
// SPDX-License-Identifier: Apache-2.0

//! Prime-order group abstraction, scalar field arithmetic and canonical encodings.
//!
//! Every protocol component is generic over [`PrimeGroup`]. Two backends are provided:
//! Ristretto255 (the production group, 252-bit order) and [`ModpGroup`], a Schnorr
//! subgroup of `Z_p^*` generic over an unsigned integer storage type. The latter exists
//! for hand-checkable vectors and is always flagged insecure.

mod modp;
mod ristretto;

pub use modp::{ModpElement, ModpGroup, ModpScalar};
pub use ristretto::Ristretto255;

use std::fmt::Debug;
use std::sync::Arc;

use rand::{CryptoRng, RngCore};
use sha2::{Digest, Sha512};

use crate::error::GroupError;

/// Label used to derive the production second generator `h`.
pub const SECOND_GENERATOR_LABEL: &[u8] = b"psc/pedersen/h/v1";

/// Upper bound on hash-to-group attempts when deriving `h`.
pub const MAX_GENERATOR_ATTEMPTS: u32 = 128;

/// A cyclic group of prime order `q` written multiplicatively, with its scalar field `Z_q`.
///
/// Elements and scalars both have fixed-width canonical encodings, big-endian for
/// scalars. Decoding rejects anything outside the order-`q` subgroup or `[0, q)`.
pub trait PrimeGroup: Clone + Debug + Send + Sync + 'static {
    type Scalar: Clone + Copy + PartialEq + Eq + Debug + Send + Sync;
    type Element: Clone + Copy + PartialEq + Eq + Debug + Send + Sync;

    /// Short stable name, written into transcript headers.
    fn name(&self) -> &'static str;

    /// Bit length of the group order `q`.
    fn order_bits(&self) -> u32;

    /// Big-endian bytes of the group order `q`.
    fn order_be_bytes(&self) -> Vec<u8>;

    fn element_len(&self) -> usize;
    fn scalar_len(&self) -> usize;

    fn identity(&self) -> Self::Element;
    fn generator(&self) -> Self::Element;

    fn exp(&self, base: &Self::Element, e: &Self::Scalar) -> Self::Element;
    fn mul(&self, a: &Self::Element, b: &Self::Element) -> Self::Element;
    fn invert(&self, a: &Self::Element) -> Self::Element;

    fn div(&self, a: &Self::Element, b: &Self::Element) -> Self::Element {
        self.mul(a, &self.invert(b))
    }

    /// `a^x · b^y`. Backends may override with a multi-exponentiation.
    fn exp2(
        &self,
        a: &Self::Element,
        x: &Self::Scalar,
        b: &Self::Element,
        y: &Self::Scalar,
    ) -> Self::Element {
        self.mul(&self.exp(a, x), &self.exp(b, y))
    }

    fn scalar_from_u64(&self, v: u64) -> Self::Scalar;
    fn scalar_add(&self, a: &Self::Scalar, b: &Self::Scalar) -> Self::Scalar;
    fn scalar_sub(&self, a: &Self::Scalar, b: &Self::Scalar) -> Self::Scalar;
    fn scalar_mul(&self, a: &Self::Scalar, b: &Self::Scalar) -> Self::Scalar;

    fn scalar_zero(&self) -> Self::Scalar {
        self.scalar_from_u64(0)
    }

    fn scalar_one(&self) -> Self::Scalar {
        self.scalar_from_u64(1)
    }

    fn scalar_neg(&self, a: &Self::Scalar) -> Self::Scalar {
        self.scalar_sub(&self.scalar_zero(), a)
    }

    /// Uniform scalar in `[0, q)`.
    fn random_scalar<R: RngCore + CryptoRng>(&self, rng: &mut R) -> Self::Scalar;

    /// Reduces 64 uniformly random bytes (big-endian integer) modulo `q`.
    fn scalar_from_wide(&self, bytes: &[u8; 64]) -> Self::Scalar;

    /// Maps 64 uniformly random bytes into the order-`q` subgroup. May return the identity.
    fn element_from_wide(&self, bytes: &[u8; 64]) -> Self::Element;

    fn encode_element(&self, e: &Self::Element, out: &mut Vec<u8>);
    fn decode_element(&self, bytes: &[u8]) -> Result<Self::Element, GroupError>;
    fn encode_scalar(&self, s: &Self::Scalar, out: &mut Vec<u8>);
    fn decode_scalar(&self, bytes: &[u8]) -> Result<Self::Scalar, GroupError>;

    /// True for groups whose parameters make every security property void.
    fn insecure_test_group(&self) -> bool {
        false
    }

    fn element_bytes(&self, e: &Self::Element) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.element_len());
        self.encode_element(e, &mut out);
        out
    }

    fn scalar_bytes(&self, s: &Self::Scalar) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.scalar_len());
        self.encode_scalar(s, &mut out);
        out
    }
}

/// Public group parameters: the group plus two generators with unknown mutual discrete log.
#[derive(Clone, Debug)]
pub struct GroupParams<G: PrimeGroup> {
    pub group: G,
    pub g: G::Element,
    pub h: G::Element,
}

pub type SharedParams<G> = Arc<GroupParams<G>>;

impl<G: PrimeGroup> GroupParams<G> {
    /// Uses the group's generator as `g` and derives `h` from [`SECOND_GENERATOR_LABEL`].
    pub fn standard(group: G) -> Result<Self, GroupError> {
        let g = group.generator();
        let h = derive_second_generator(&group, &g, SECOND_GENERATOR_LABEL)?;
        Ok(Self { group, g, h })
    }

    /// Explicit generators, with `h` checked to be a non-identity subgroup element.
    pub fn with_generators(group: G, g: G::Element, h: G::Element) -> Result<Self, GroupError> {
        let id = group.identity();
        if g == id || h == id {
            return Err(GroupError::InvalidGenerator);
        }
        Ok(Self { group, g, h })
    }

    pub fn shared(self) -> SharedParams<G> {
        Arc::new(self)
    }

    pub fn encoding_len(&self) -> usize {
        self.group.element_len()
    }

    pub fn group_order_q(&self) -> Vec<u8> {
        self.group.order_be_bytes()
    }

    pub fn insecure_test_group(&self) -> bool {
        self.group.insecure_test_group()
    }
}

impl GroupParams<Ristretto255> {
    pub fn production() -> Self {
        Self::standard(Ristretto255).expect("ristretto hash-to-group never yields the identity")
    }
}

impl GroupParams<ModpGroup<u64>> {
    /// The insecure toy group: modulus 23, order 11, `g = 4`, `h = 8`.
    ///
    /// `log_g h = 7` is public, so commitments in this group are not binding.
    pub fn toy() -> Self {
        let group = ModpGroup::<u64>::toy();
        let g = group.element_unchecked(4);
        let h = group.element_unchecked(8);
        Self { group, g, h }
    }
}

/// Deterministic nothing-up-my-sleeve derivation of a second generator from `label`.
///
/// Hashes `label ‖ counter` to the group until the result is neither the identity nor `g`.
pub fn derive_second_generator<G: PrimeGroup>(
    group: &G,
    g: &G::Element,
    label: &[u8],
) -> Result<G::Element, GroupError> {
    let identity = group.identity();
    for counter in 0..MAX_GENERATOR_ATTEMPTS {
        let mut hasher = Sha512::new();
        hasher.update(b"psc/hash-to-group/v1");
        hasher.update((label.len() as u32).to_be_bytes());
        hasher.update(label);
        hasher.update(counter.to_be_bytes());
        let wide: [u8; 64] = hasher.finalize().into();
        let candidate = group.element_from_wide(&wide);
        if candidate != identity && candidate != *g {
            return Ok(candidate);
        }
    }
    Err(GroupError::GeneratorDerivation {
        attempts: MAX_GENERATOR_ATTEMPTS,
    })
}

/// Random-oracle hash into `Z_q` with domain separation.
///
/// Input to SHA-512 is `len(tag) ‖ tag ‖ transcript`, with a 4-byte big-endian length.
pub fn hash_to_scalar<G: PrimeGroup>(group: &G, domain_tag: &[u8], transcript: &[u8]) -> G::Scalar {
    let mut hasher = Sha512::new();
    hasher.update((domain_tag.len() as u32).to_be_bytes());
    hasher.update(domain_tag);
    hasher.update(transcript);
    let wide: [u8; 64] = hasher.finalize().into();
    group.scalar_from_wide(&wide)
}

/// Builder for Fiat–Shamir transcripts: each component is length-prefixed (u32 big-endian).
#[derive(Clone, Debug, Default)]
pub struct FsTranscript {
    bytes: Vec<u8>,
}

impl FsTranscript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn append(&mut self, component: &[u8]) -> &mut Self {
        self.bytes
            .extend_from_slice(&(component.len() as u32).to_be_bytes());
        self.bytes.extend_from_slice(component);
        self
    }

    pub fn append_element<G: PrimeGroup>(&mut self, group: &G, e: &G::Element) -> &mut Self {
        let enc = group.element_bytes(e);
        self.append(&enc)
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn challenge<G: PrimeGroup>(&self, group: &G, domain_tag: &[u8]) -> G::Scalar {
        hash_to_scalar(group, domain_tag, &self.bytes)
    }
}
