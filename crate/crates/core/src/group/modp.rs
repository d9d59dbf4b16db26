// Copyright (c) The psc Contributors
// SPDX-License-Identifier: Apache-2.0

use std::fmt::Debug;
use std::hash::Hash;

use num_traits::{NumCast, PrimInt, Unsigned};
use rand::{CryptoRng, Rng, RngCore};

use super::PrimeGroup;
use crate::error::GroupError;

/// Unsigned storage type for [`ModpGroup`] values.
pub trait ModpInt: PrimInt + Unsigned + Hash + Debug + Send + Sync + 'static {}

impl<T: PrimInt + Unsigned + Hash + Debug + Send + Sync + 'static> ModpInt for T {}

/// Order-`q` subgroup of `Z_p^*` for a safe-ish prime `p = k·q + 1`.
///
/// Arithmetic runs through `u128`, so the modulus must fit in 64 bits.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModpGroup<T: ModpInt> {
    modulus: T,
    order: T,
    generator: T,
    insecure: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModpScalar<T>(T);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModpElement<T>(T);

impl<T: ModpInt> ModpScalar<T> {
    pub fn value(&self) -> T {
        self.0
    }
}

impl<T: ModpInt> ModpElement<T> {
    pub fn value(&self) -> T {
        self.0
    }
}

fn wide<T: ModpInt>(v: T) -> u128 {
    v.to_u128().expect("unsigned value fits in u128")
}

fn narrow<T: ModpInt>(v: u128) -> T {
    <T as NumCast>::from(v).expect("reduced value fits storage type")
}

fn is_prime(n: u128) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u128;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

impl<T: ModpInt> ModpGroup<T> {
    /// Validates `q | p − 1`, primality of both, and that `generator` has order exactly `q`.
    ///
    /// Primality is checked by trial division, so this is only meant for small test groups.
    pub fn new(modulus: T, order: T, generator: T, insecure: bool) -> Result<Self, GroupError> {
        let (p, q, g) = (wide(modulus), wide(order), wide(generator));
        if p >= 1u128 << 64 || !is_prime(p) || !is_prime(q) || (p - 1) % q != 0 {
            return Err(GroupError::InvalidParameters);
        }
        let group = Self {
            modulus,
            order,
            generator,
            insecure,
        };
        if g <= 1 || g >= p || group.pow_raw(g, q) != 1 {
            return Err(GroupError::InvalidGenerator);
        }
        Ok(group)
    }

    pub fn modulus(&self) -> T {
        self.modulus
    }

    pub fn order(&self) -> T {
        self.order
    }

    /// Wraps a raw residue without the subgroup check. Callers vouch for membership.
    pub fn element_unchecked(&self, v: T) -> ModpElement<T> {
        ModpElement(v)
    }

    pub fn element(&self, v: T) -> Result<ModpElement<T>, GroupError> {
        let x = wide(v);
        if x == 0 || x >= wide(self.modulus) || self.pow_raw(x, wide(self.order)) != 1 {
            return Err(GroupError::NotInSubgroup);
        }
        Ok(ModpElement(v))
    }

    pub fn scalar(&self, v: T) -> ModpScalar<T> {
        ModpScalar(narrow(wide(v) % wide(self.order)))
    }

    fn mulmod(&self, a: u128, b: u128) -> u128 {
        a * b % wide(self.modulus)
    }

    fn pow_raw(&self, base: u128, mut e: u128) -> u128 {
        let mut acc = 1u128;
        let mut b = base % wide(self.modulus);
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mulmod(acc, b);
            }
            b = self.mulmod(b, b);
            e >>= 1;
        }
        acc
    }

    fn byte_width(bits: u32) -> usize {
        bits.div_ceil(8).max(1) as usize
    }

    fn decode_be(bytes: &[u8], width: usize) -> Result<u128, GroupError> {
        if bytes.len() != width {
            return Err(GroupError::BadLength {
                expected: width,
                got: bytes.len(),
            });
        }
        Ok(bytes
            .iter()
            .fold(0u128, |acc, b| (acc << 8) | <u128 as From<_>>::from(*b)))
    }

    fn encode_be(v: u128, width: usize, out: &mut Vec<u8>) {
        let full = v.to_be_bytes();
        out.extend_from_slice(&full[16 - width..]);
    }

    fn modulus_bits(&self) -> u32 {
        128 - wide(self.modulus).leading_zeros()
    }
}

impl ModpGroup<u64> {
    /// Modulus 23, order 11, generator 4. Insecure.
    pub fn toy() -> Self {
        Self::new(23, 11, 4, true).expect("toy parameters are valid")
    }
}

impl<T: ModpInt> PrimeGroup for ModpGroup<T> {
    type Scalar = ModpScalar<T>;
    type Element = ModpElement<T>;

    fn name(&self) -> &'static str {
        if self.insecure {
            "modp-toy-insecure"
        } else {
            "modp"
        }
    }

    fn order_bits(&self) -> u32 {
        128 - wide(self.order).leading_zeros()
    }

    fn order_be_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        Self::encode_be(wide(self.order), self.scalar_len(), &mut out);
        out
    }

    fn element_len(&self) -> usize {
        Self::byte_width(self.modulus_bits())
    }

    fn scalar_len(&self) -> usize {
        Self::byte_width(self.order_bits())
    }

    fn identity(&self) -> Self::Element {
        ModpElement(T::one())
    }

    fn generator(&self) -> Self::Element {
        ModpElement(self.generator)
    }

    fn exp(&self, base: &Self::Element, e: &Self::Scalar) -> Self::Element {
        ModpElement(narrow(self.pow_raw(wide(base.0), wide(e.0))))
    }

    fn mul(&self, a: &Self::Element, b: &Self::Element) -> Self::Element {
        ModpElement(narrow(self.mulmod(wide(a.0), wide(b.0))))
    }

    fn invert(&self, a: &Self::Element) -> Self::Element {
        // a^(q-1) is the inverse inside the order-q subgroup.
        let q = wide(self.order);
        ModpElement(narrow(self.pow_raw(wide(a.0), q - 1)))
    }

    fn scalar_from_u64(&self, v: u64) -> Self::Scalar {
        ModpScalar(narrow(<u128 as From<_>>::from(v) % wide(self.order)))
    }

    fn scalar_add(&self, a: &Self::Scalar, b: &Self::Scalar) -> Self::Scalar {
        ModpScalar(narrow((wide(a.0) + wide(b.0)) % wide(self.order)))
    }

    fn scalar_sub(&self, a: &Self::Scalar, b: &Self::Scalar) -> Self::Scalar {
        let q = wide(self.order);
        ModpScalar(narrow((wide(a.0) + q - wide(b.0)) % q))
    }

    fn scalar_mul(&self, a: &Self::Scalar, b: &Self::Scalar) -> Self::Scalar {
        ModpScalar(narrow(wide(a.0) * wide(b.0) % wide(self.order)))
    }

    fn random_scalar<R: RngCore + CryptoRng>(&self, rng: &mut R) -> Self::Scalar {
        ModpScalar(narrow(rng.gen_range(0..wide(self.order))))
    }

    fn scalar_from_wide(&self, bytes: &[u8; 64]) -> Self::Scalar {
        let q = wide(self.order);
        let v = bytes.iter().fold(0u128, |acc, b| {
            ((acc << 8) | <u128 as From<_>>::from(*b)) % q
        });
        ModpScalar(narrow(v))
    }

    fn element_from_wide(&self, bytes: &[u8; 64]) -> Self::Element {
        let p = wide(self.modulus);
        let x = bytes.iter().fold(0u128, |acc, b| {
            ((acc << 8) | <u128 as From<_>>::from(*b)) % p
        });
        let cofactor = (p - 1) / wide(self.order);
        // x = 0 maps to 0, which is not a group element; fall back to the identity so
        // the caller's rejection loop retries.
        if x == 0 {
            return self.identity();
        }
        ModpElement(narrow(self.pow_raw(x, cofactor)))
    }

    fn encode_element(&self, e: &Self::Element, out: &mut Vec<u8>) {
        Self::encode_be(wide(e.0), self.element_len(), out);
    }

    fn decode_element(&self, bytes: &[u8]) -> Result<Self::Element, GroupError> {
        let v = Self::decode_be(bytes, self.element_len())?;
        self.element(narrow(v))
    }

    fn encode_scalar(&self, s: &Self::Scalar, out: &mut Vec<u8>) {
        Self::encode_be(wide(s.0), self.scalar_len(), out);
    }

    fn decode_scalar(&self, bytes: &[u8]) -> Result<Self::Scalar, GroupError> {
        let v = Self::decode_be(bytes, self.scalar_len())?;
        if v >= wide(self.order) {
            return Err(GroupError::NonCanonicalScalar);
        }
        Ok(ModpScalar(narrow(v)))
    }

    fn insecure_test_group(&self) -> bool {
        self.insecure
    }
}
