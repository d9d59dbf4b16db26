// Copyright (c) The psc Contributors
// SPDX-License-Identifier: Apache-2.0

use curve25519_dalek::constants::RISTRETTO_BASEPOINT_POINT;
use curve25519_dalek::ristretto::{CompressedRistretto, RistrettoPoint};
use curve25519_dalek::scalar::Scalar;
use curve25519_dalek::traits::{Identity, MultiscalarMul};
use rand::{CryptoRng, RngCore};

use super::PrimeGroup;
use crate::error::GroupError;

/// Ristretto255: prime order `2^252 + 27742317777372353535851937790883648493`.
///
/// Elements encode as the 32-byte compressed Ristretto form. Scalars are written
/// big-endian (dalek's native form is little-endian).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Ristretto255;

const ORDER_BE: [u8; 32] = [
    0x10, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00,
    0x14, 0xde, 0xf9, 0xde, 0xa2, 0xf7, 0x9c, 0xd6, 0x58, 0x12, 0x63, 0x1a, 0x5c, 0xf5, 0xd3, 0xed,
];

impl PrimeGroup for Ristretto255 {
    type Scalar = Scalar;
    type Element = RistrettoPoint;

    fn name(&self) -> &'static str {
        "ristretto255"
    }

    fn order_bits(&self) -> u32 {
        253
    }

    fn order_be_bytes(&self) -> Vec<u8> {
        ORDER_BE.to_vec()
    }

    fn element_len(&self) -> usize {
        32
    }

    fn scalar_len(&self) -> usize {
        32
    }

    fn identity(&self) -> RistrettoPoint {
        RistrettoPoint::identity()
    }

    fn generator(&self) -> RistrettoPoint {
        RISTRETTO_BASEPOINT_POINT
    }

    fn exp(&self, base: &RistrettoPoint, e: &Scalar) -> RistrettoPoint {
        base * e
    }

    fn mul(&self, a: &RistrettoPoint, b: &RistrettoPoint) -> RistrettoPoint {
        a + b
    }

    fn invert(&self, a: &RistrettoPoint) -> RistrettoPoint {
        -a
    }

    fn div(&self, a: &RistrettoPoint, b: &RistrettoPoint) -> RistrettoPoint {
        a - b
    }

    fn exp2(
        &self,
        a: &RistrettoPoint,
        x: &Scalar,
        b: &RistrettoPoint,
        y: &Scalar,
    ) -> RistrettoPoint {
        RistrettoPoint::multiscalar_mul([x, y], [a, b])
    }

    fn scalar_from_u64(&self, v: u64) -> Scalar {
        Scalar::from(v)
    }

    fn scalar_add(&self, a: &Scalar, b: &Scalar) -> Scalar {
        a + b
    }

    fn scalar_sub(&self, a: &Scalar, b: &Scalar) -> Scalar {
        a - b
    }

    fn scalar_mul(&self, a: &Scalar, b: &Scalar) -> Scalar {
        a * b
    }

    fn scalar_neg(&self, a: &Scalar) -> Scalar {
        -a
    }

    fn random_scalar<R: RngCore + CryptoRng>(&self, rng: &mut R) -> Scalar {
        let mut wide = [0u8; 64];
        rng.fill_bytes(&mut wide);
        Scalar::from_bytes_mod_order_wide(&wide)
    }

    fn scalar_from_wide(&self, bytes: &[u8; 64]) -> Scalar {
        let mut le = *bytes;
        le.reverse();
        Scalar::from_bytes_mod_order_wide(&le)
    }

    fn element_from_wide(&self, bytes: &[u8; 64]) -> RistrettoPoint {
        RistrettoPoint::from_uniform_bytes(bytes)
    }

    fn encode_element(&self, e: &RistrettoPoint, out: &mut Vec<u8>) {
        out.extend_from_slice(e.compress().as_bytes());
    }

    fn decode_element(&self, bytes: &[u8]) -> Result<RistrettoPoint, GroupError> {
        let compressed =
            CompressedRistretto::from_slice(bytes).map_err(|_| GroupError::BadLength {
                expected: 32,
                got: bytes.len(),
            })?;
        compressed.decompress().ok_or(GroupError::NotInSubgroup)
    }

    fn encode_scalar(&self, s: &Scalar, out: &mut Vec<u8>) {
        let mut b = s.to_bytes();
        b.reverse();
        out.extend_from_slice(&b);
    }

    fn decode_scalar(&self, bytes: &[u8]) -> Result<Scalar, GroupError> {
        let mut le: [u8; 32] = bytes.try_into().map_err(|_| GroupError::BadLength {
            expected: 32,
            got: bytes.len(),
        })?;
        le.reverse();
        Option::from(Scalar::from_canonical_bytes(le)).ok_or(GroupError::NonCanonicalScalar)
    }
}
