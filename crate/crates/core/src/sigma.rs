// Copyright (c) The psc Contributors
// SPDX-License-Identifier: Apache-2.0

//! Fiat–Shamir NIZKs: Schnorr proof of knowledge of a discrete log, and the
//! commit-to-bit proof showing a Pedersen commitment opens to 0 or 1.
//!
//! Bit proof, for `c = Com(m; r)` with `m ∈ {0, 1}`:
//!
//! ```text
//! prover:   a, s, t ←$ Z_q
//!           c_a = Com(a; s),  c_b = Com(a·m; t)
//!           e   = H(bit-tag, context ‖ c ‖ c_a ‖ c_b)
//!           f   = m·e + a,  z_a = r·e + s,  z_b = r·(e − f) + t
//! verifier: Com(f; z_a) == c^e · c_a   and   Com(0; z_b) == c^(e−f) · c_b
//! ```
//!
//! The second equation holds only when `m·(1 − m) = 0`.

use std::fmt;

use rand::{CryptoRng, RngCore};

use crate::error::{GroupError, ProofError};
use crate::group::{FsTranscript, GroupParams, PrimeGroup};
use crate::pedersen::{commit, Commitment};

pub const SCHNORR_DOMAIN: &[u8] = b"psc/schnorr/v1";
pub const BIT_DOMAIN: &[u8] = b"psc/bit/v1";

pub struct SchnorrProof<G: PrimeGroup> {
    /// First move `t = base^w`.
    pub nonce_commitment: G::Element,
    /// `z = w + e·witness`.
    pub response: G::Scalar,
}

pub struct BitProof<G: PrimeGroup> {
    pub ca: G::Element,
    pub cb: G::Element,
    pub f: G::Scalar,
    pub za: G::Scalar,
    pub zb: G::Scalar,
}

impl<G: PrimeGroup> Clone for SchnorrProof<G> {
    fn clone(&self) -> Self {
        *self
    }
}
impl<G: PrimeGroup> Copy for SchnorrProof<G> {}
impl<G: PrimeGroup> PartialEq for SchnorrProof<G> {
    fn eq(&self, o: &Self) -> bool {
        self.nonce_commitment == o.nonce_commitment && self.response == o.response
    }
}
impl<G: PrimeGroup> Eq for SchnorrProof<G> {}
impl<G: PrimeGroup> fmt::Debug for SchnorrProof<G> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SchnorrProof")
            .field("nonce_commitment", &self.nonce_commitment)
            .field("response", &self.response)
            .finish()
    }
}

impl<G: PrimeGroup> Clone for BitProof<G> {
    fn clone(&self) -> Self {
        *self
    }
}
impl<G: PrimeGroup> Copy for BitProof<G> {}
impl<G: PrimeGroup> PartialEq for BitProof<G> {
    fn eq(&self, o: &Self) -> bool {
        self.ca == o.ca && self.cb == o.cb && self.f == o.f && self.za == o.za && self.zb == o.zb
    }
}
impl<G: PrimeGroup> Eq for BitProof<G> {}
impl<G: PrimeGroup> fmt::Debug for BitProof<G> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BitProof")
            .field("ca", &self.ca)
            .field("cb", &self.cb)
            .field("f", &self.f)
            .field("za", &self.za)
            .field("zb", &self.zb)
            .finish()
    }
}

impl<G: PrimeGroup> SchnorrProof<G> {
    pub fn encoded_len(group: &G) -> usize {
        group.element_len() + group.scalar_len()
    }

    pub fn encode(&self, group: &G, out: &mut Vec<u8>) {
        group.encode_element(&self.nonce_commitment, out);
        group.encode_scalar(&self.response, out);
    }

    pub fn to_bytes(&self, group: &G) -> Vec<u8> {
        let mut out = Vec::with_capacity(Self::encoded_len(group));
        self.encode(group, &mut out);
        out
    }

    pub fn from_bytes(group: &G, bytes: &[u8]) -> Result<Self, GroupError> {
        let el = group.element_len();
        if bytes.len() != Self::encoded_len(group) {
            return Err(GroupError::BadLength {
                expected: Self::encoded_len(group),
                got: bytes.len(),
            });
        }
        Ok(Self {
            nonce_commitment: group.decode_element(&bytes[..el])?,
            response: group.decode_scalar(&bytes[el..])?,
        })
    }
}

impl<G: PrimeGroup> BitProof<G> {
    pub fn encoded_len(group: &G) -> usize {
        2 * group.element_len() + 3 * group.scalar_len()
    }

    pub fn encode(&self, group: &G, out: &mut Vec<u8>) {
        group.encode_element(&self.ca, out);
        group.encode_element(&self.cb, out);
        group.encode_scalar(&self.f, out);
        group.encode_scalar(&self.za, out);
        group.encode_scalar(&self.zb, out);
    }

    pub fn to_bytes(&self, group: &G) -> Vec<u8> {
        let mut out = Vec::with_capacity(Self::encoded_len(group));
        self.encode(group, &mut out);
        out
    }

    pub fn from_bytes(group: &G, bytes: &[u8]) -> Result<Self, GroupError> {
        if bytes.len() != Self::encoded_len(group) {
            return Err(GroupError::BadLength {
                expected: Self::encoded_len(group),
                got: bytes.len(),
            });
        }
        let (el, sl) = (group.element_len(), group.scalar_len());
        let scalar = |i: usize| group.decode_scalar(&bytes[2 * el + i * sl..2 * el + (i + 1) * sl]);
        Ok(Self {
            ca: group.decode_element(&bytes[..el])?,
            cb: group.decode_element(&bytes[el..2 * el])?,
            f: scalar(0)?,
            za: scalar(1)?,
            zb: scalar(2)?,
        })
    }
}

/// Why a proof was not accepted. Callers that only need a decision use the `bool` verifiers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VerifyFailure {
    Malformed(GroupError),
    Equation,
}

pub fn schnorr_challenge<G: PrimeGroup>(
    group: &G,
    statement: &G::Element,
    base: &G::Element,
    nonce_commitment: &G::Element,
    context: &[u8],
) -> G::Scalar {
    FsTranscript::new()
        .append(context)
        .append_element(group, statement)
        .append_element(group, base)
        .append_element(group, nonce_commitment)
        .challenge(group, SCHNORR_DOMAIN)
}

/// Proves knowledge of `witness` with `statement = base^witness`.
///
/// The witness is not checked; a wrong witness yields a proof that fails verification.
pub fn schnorr_prove<G: PrimeGroup, R: RngCore + CryptoRng>(
    params: &GroupParams<G>,
    statement: &G::Element,
    base: &G::Element,
    witness: &G::Scalar,
    context: &[u8],
    rng: &mut R,
) -> SchnorrProof<G> {
    let grp = &params.group;
    let w = grp.random_scalar(rng);
    let t = grp.exp(base, &w);
    let e = schnorr_challenge(grp, statement, base, &t, context);
    SchnorrProof {
        nonce_commitment: t,
        response: grp.scalar_add(&w, &grp.scalar_mul(&e, witness)),
    }
}

/// `base^z == t · statement^e` for a given challenge.
pub fn schnorr_equation<G: PrimeGroup>(
    group: &G,
    statement: &G::Element,
    base: &G::Element,
    proof: &SchnorrProof<G>,
    e: &G::Scalar,
) -> bool {
    let lhs = group.exp(base, &proof.response);
    let rhs = group.mul(&proof.nonce_commitment, &group.exp(statement, e));
    lhs == rhs
}

pub fn schnorr_verify<G: PrimeGroup>(
    params: &GroupParams<G>,
    statement: &G::Element,
    base: &G::Element,
    proof: &SchnorrProof<G>,
    context: &[u8],
) -> bool {
    let grp = &params.group;
    let e = schnorr_challenge(grp, statement, base, &proof.nonce_commitment, context);
    schnorr_equation(grp, statement, base, proof, &e)
}

/// Verifies an encoded proof; encodings that do not decode are rejected.
pub fn schnorr_verify_bytes<G: PrimeGroup>(
    params: &GroupParams<G>,
    statement: &G::Element,
    base: &G::Element,
    proof: &[u8],
    context: &[u8],
) -> Result<(), VerifyFailure> {
    let proof = SchnorrProof::from_bytes(&params.group, proof).map_err(VerifyFailure::Malformed)?;
    if schnorr_verify(params, statement, base, &proof, context) {
        Ok(())
    } else {
        Err(VerifyFailure::Equation)
    }
}

pub fn bit_challenge<G: PrimeGroup>(
    group: &G,
    c: &Commitment<G>,
    ca: &G::Element,
    cb: &G::Element,
    context: &[u8],
) -> G::Scalar {
    FsTranscript::new()
        .append(context)
        .append_element(group, c.element())
        .append_element(group, ca)
        .append_element(group, cb)
        .challenge(group, BIT_DOMAIN)
}

pub fn bnizk_prove<G: PrimeGroup, R: RngCore + CryptoRng>(
    params: &GroupParams<G>,
    c: &Commitment<G>,
    randomness: &G::Scalar,
    bit: u64,
    context: &[u8],
    rng: &mut R,
) -> Result<BitProof<G>, ProofError> {
    if bit > 1 {
        return Err(ProofError::NotABit(bit));
    }
    let grp = &params.group;
    let m = grp.scalar_from_u64(bit);
    let a = grp.random_scalar(rng);
    let s = grp.random_scalar(rng);
    let t = grp.random_scalar(rng);
    let ca = commit(params, &a, &s).0;
    let cb = commit(params, &grp.scalar_mul(&a, &m), &t).0;
    let e = bit_challenge(grp, c, &ca, &cb, context);
    let f = grp.scalar_add(&grp.scalar_mul(&m, &e), &a);
    let za = grp.scalar_add(&grp.scalar_mul(randomness, &e), &s);
    let zb = grp.scalar_add(&grp.scalar_mul(randomness, &grp.scalar_sub(&e, &f)), &t);
    Ok(BitProof { ca, cb, f, za, zb })
}

/// Both bit-protocol verification equations for a given challenge.
pub fn bit_equations<G: PrimeGroup>(
    params: &GroupParams<G>,
    c: &Commitment<G>,
    proof: &BitProof<G>,
    e: &G::Scalar,
) -> bool {
    let grp = &params.group;
    let first =
        commit(params, &proof.f, &proof.za).0 == grp.mul(&grp.exp(c.element(), e), &proof.ca);
    if !first {
        return false;
    }
    let e_minus_f = grp.scalar_sub(e, &proof.f);
    grp.exp(&params.h, &proof.zb) == grp.mul(&grp.exp(c.element(), &e_minus_f), &proof.cb)
}

pub fn bnizk_verify<G: PrimeGroup>(
    params: &GroupParams<G>,
    c: &Commitment<G>,
    proof: &BitProof<G>,
    context: &[u8],
) -> bool {
    let e = bit_challenge(&params.group, c, &proof.ca, &proof.cb, context);
    bit_equations(params, c, proof, &e)
}

pub fn bnizk_verify_bytes<G: PrimeGroup>(
    params: &GroupParams<G>,
    c: &Commitment<G>,
    proof: &[u8],
    context: &[u8],
) -> Result<(), VerifyFailure> {
    let proof = BitProof::from_bytes(&params.group, proof).map_err(VerifyFailure::Malformed)?;
    if bnizk_verify(params, c, &proof, context) {
        Ok(())
    } else {
        Err(VerifyFailure::Equation)
    }
}

/// Zero-knowledge simulator for the Schnorr proof, by programming the random oracle.
///
/// Only compiled with the `zk-simulator` feature. The production verifiers above always
/// hash; only [`ProgrammedOracle::schnorr_verify`] consults programmed challenges.
#[cfg(feature = "zk-simulator")]
pub mod simulator {
    use std::collections::HashMap;

    use rand::{CryptoRng, RngCore};

    use super::{schnorr_challenge, schnorr_equation, SchnorrProof, SCHNORR_DOMAIN};
    use crate::group::{FsTranscript, GroupParams, PrimeGroup};

    /// Random oracle with a table of programmed points, falling back to the hash.
    pub struct ProgrammedOracle<G: PrimeGroup> {
        table: HashMap<Vec<u8>, G::Scalar>,
    }

    impl<G: PrimeGroup> Default for ProgrammedOracle<G> {
        fn default() -> Self {
            Self {
                table: HashMap::new(),
            }
        }
    }

    fn schnorr_point<G: PrimeGroup>(
        group: &G,
        statement: &G::Element,
        base: &G::Element,
        t: &G::Element,
        context: &[u8],
    ) -> Vec<u8> {
        let mut key = SCHNORR_DOMAIN.to_vec();
        key.extend_from_slice(
            FsTranscript::new()
                .append(context)
                .append_element(group, statement)
                .append_element(group, base)
                .append_element(group, t)
                .as_bytes(),
        );
        key
    }

    impl<G: PrimeGroup> ProgrammedOracle<G> {
        pub fn new() -> Self {
            Self::default()
        }

        pub fn programmed_points(&self) -> usize {
            self.table.len()
        }

        /// Picks `e, z` at random, sets `t = base^z · statement^(−e)` and programs `H(…t) = e`.
        pub fn schnorr_simulate<R: RngCore + CryptoRng>(
            &mut self,
            params: &GroupParams<G>,
            statement: &G::Element,
            base: &G::Element,
            context: &[u8],
            rng: &mut R,
        ) -> (SchnorrProof<G>, G::Scalar) {
            let grp = &params.group;
            let e = grp.random_scalar(rng);
            let z = grp.random_scalar(rng);
            let t = grp.mul(&grp.exp(base, &z), &grp.exp(statement, &grp.scalar_neg(&e)));
            self.table
                .insert(schnorr_point(grp, statement, base, &t, context), e);
            (
                SchnorrProof {
                    nonce_commitment: t,
                    response: z,
                },
                e,
            )
        }

        pub fn schnorr_verify(
            &self,
            params: &GroupParams<G>,
            statement: &G::Element,
            base: &G::Element,
            proof: &SchnorrProof<G>,
            context: &[u8],
        ) -> bool {
            let grp = &params.group;
            let key = schnorr_point(grp, statement, base, &proof.nonce_commitment, context);
            let e = match self.table.get(&key) {
                Some(e) => *e,
                None => schnorr_challenge(grp, statement, base, &proof.nonce_commitment, context),
            };
            schnorr_equation(grp, statement, base, proof, &e)
        }
    }
}
