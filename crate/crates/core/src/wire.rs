// Copyright (c) The psc Contributors
// SPDX-License-Identifier: Apache-2.0

//! Protocol messages and their canonical binary encoding.
//!
//! Layout rules: variable-length fields carry a `u32` big-endian length prefix,
//! counts are `u32` big-endian, group elements and scalars are written at their
//! fixed canonical width with no prefix.
//!
//! ```text
//! freeze   := lp("freeze") lp(id) u32(n) lp(party)*n coin
//!             u32(ell) ( commitment bit_proof commitment bit_proof )*ell
//! finalize := lp("finalize") lp(id) u32(n) u32(ell) commitment*(n·ell) lp(out) schnorr_proof
//! bit_proof     := c_a c_b f z_a z_b
//! schnorr_proof := t z
//! ```

use std::fmt;

use sha2::{Digest, Sha256};

use crate::contract::SmartContract;
use crate::error::WireError;
use crate::group::PrimeGroup;
use crate::pedersen::Commitment;
use crate::sigma::{BitProof, SchnorrProof};

pub const FREEZE_TAG: &str = "freeze";
pub const FINALIZE_TAG: &str = "finalize";

/// Contract identifier `H(code_digest ‖ P)`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ContractId(pub [u8; 32]);

impl ContractId {
    /// `SHA-256("psc/contract-id/v1" ‖ code_digest ‖ u32(n) ‖ lp(party)*n)`.
    pub fn derive(contract: &dyn SmartContract, parties: &[PartyId]) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(b"psc/contract-id/v1");
        hasher.update(contract.code_digest());
        hasher.update((parties.len() as u32).to_be_bytes());
        for p in parties {
            hasher.update((p.0.len() as u32).to_be_bytes());
            hasher.update(p.0.as_bytes());
        }
        Self(hasher.finalize().into())
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl fmt::Debug for ContractId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ContractId({}…)", &self.to_hex()[..12])
    }
}

impl fmt::Display for ContractId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

/// A participant's pseudonym.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PartyId(pub String);

impl PartyId {
    pub fn new(name: impl Into<String>) -> Self {
        Self(name.into())
    }

    /// `P1 … Pn`.
    pub fn numbered(n: usize) -> Vec<Self> {
        (1..=n).map(|i| Self(format!("P{i}"))).collect()
    }
}

impl fmt::Display for PartyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Fiat–Shamir context for a bit proof: `id ‖ u32(party) ‖ u32(bit) ‖ u8(slot)`.
pub fn bit_context(id: &ContractId, party: usize, bit: usize, slot: usize) -> Vec<u8> {
    let mut ctx = Vec::with_capacity(41);
    ctx.extend_from_slice(&id.0);
    ctx.extend_from_slice(&(party as u32).to_be_bytes());
    ctx.extend_from_slice(&(bit as u32).to_be_bytes());
    ctx.push(slot as u8);
    ctx
}

/// Fiat–Shamir context for the balance proof: the contract id alone.
pub fn balance_context(id: &ContractId) -> Vec<u8> {
    id.0.to_vec()
}

/// One transmitted bit candidate: a commitment and its bit proof.
pub struct Candidate<G: PrimeGroup> {
    pub commitment: Commitment<G>,
    pub proof: BitProof<G>,
}

impl<G: PrimeGroup> Clone for Candidate<G> {
    fn clone(&self) -> Self {
        *self
    }
}
impl<G: PrimeGroup> Copy for Candidate<G> {}
impl<G: PrimeGroup> PartialEq for Candidate<G> {
    fn eq(&self, o: &Self) -> bool {
        self.commitment == o.commitment && self.proof == o.proof
    }
}
impl<G: PrimeGroup> fmt::Debug for Candidate<G> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Candidate")
            .field("commitment", &self.commitment)
            .finish_non_exhaustive()
    }
}

pub struct FreezeMessage<G: PrimeGroup> {
    pub id: ContractId,
    pub parties: Vec<PartyId>,
    pub coin: Commitment<G>,
    /// Per bit `k`, the two candidates in transmitted (permuted) order.
    pub pairs: Vec<[Candidate<G>; 2]>,
}

pub struct FinalizeMessage<G: PrimeGroup> {
    pub id: ContractId,
    /// `selected[j][k]` is party `j`'s chosen commitment for bit `k`.
    pub selected: Vec<Vec<Commitment<G>>>,
    pub out: Vec<u8>,
    pub proof: SchnorrProof<G>,
}

macro_rules! impl_msg_traits {
    ($t:ident, $($field:ident),+) => {
        impl<G: PrimeGroup> Clone for $t<G> {
            fn clone(&self) -> Self {
                Self { $($field: self.$field.clone()),+ }
            }
        }
        impl<G: PrimeGroup> PartialEq for $t<G> {
            fn eq(&self, o: &Self) -> bool {
                true $(&& self.$field == o.$field)+
            }
        }
        impl<G: PrimeGroup> fmt::Debug for $t<G> {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.debug_struct(stringify!($t))
                    $(.field(stringify!($field), &self.$field))+
                    .finish()
            }
        }
    };
}

impl_msg_traits!(FreezeMessage, id, parties, coin, pairs);
impl_msg_traits!(FinalizeMessage, id, selected, out, proof);

/// Anything the blockchain accepts.
pub enum Message<G: PrimeGroup> {
    Freeze(FreezeMessage<G>),
    Finalize(FinalizeMessage<G>),
}

impl<G: PrimeGroup> Clone for Message<G> {
    fn clone(&self) -> Self {
        match self {
            Self::Freeze(m) => Self::Freeze(m.clone()),
            Self::Finalize(m) => Self::Finalize(m.clone()),
        }
    }
}

impl<G: PrimeGroup> fmt::Debug for Message<G> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Freeze(m) => m.fmt(f),
            Self::Finalize(m) => m.fmt(f),
        }
    }
}

impl<G: PrimeGroup> Message<G> {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Freeze(_) => FREEZE_TAG,
            Self::Finalize(_) => FINALIZE_TAG,
        }
    }

    pub fn id(&self) -> &ContractId {
        match self {
            Self::Freeze(m) => &m.id,
            Self::Finalize(m) => &m.id,
        }
    }

    pub fn to_bytes(&self, group: &G) -> Vec<u8> {
        match self {
            Self::Freeze(m) => m.to_bytes(group),
            Self::Finalize(m) => m.to_bytes(group),
        }
    }

    pub fn from_bytes(group: &G, bytes: &[u8]) -> Result<Self, WireError> {
        let tag = Reader::new(bytes).lp()?;
        match tag {
            t if t == FREEZE_TAG.as_bytes() => {
                Ok(Self::Freeze(FreezeMessage::from_bytes(group, bytes)?))
            }
            t if t == FINALIZE_TAG.as_bytes() => {
                Ok(Self::Finalize(FinalizeMessage::from_bytes(group, bytes)?))
            }
            t => Err(WireError::BadTag(String::from_utf8_lossy(t).into_owned())),
        }
    }
}

/// Append-only encoder.
#[derive(Default)]
pub struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn u8(&mut self, v: u8) -> &mut Self {
        self.buf.push(v);
        self
    }

    pub fn u32(&mut self, v: u32) -> &mut Self {
        self.buf.extend_from_slice(&v.to_be_bytes());
        self
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_be_bytes());
        self
    }

    pub fn lp(&mut self, bytes: &[u8]) -> &mut Self {
        self.u32(bytes.len() as u32);
        self.buf.extend_from_slice(bytes);
        self
    }

    pub fn raw(&mut self, bytes: &[u8]) -> &mut Self {
        self.buf.extend_from_slice(bytes);
        self
    }

    pub fn element<G: PrimeGroup>(&mut self, group: &G, e: &G::Element) -> &mut Self {
        group.encode_element(e, &mut self.buf);
        self
    }

    pub fn scalar<G: PrimeGroup>(&mut self, group: &G, s: &G::Scalar) -> &mut Self {
        group.encode_scalar(s, &mut self.buf);
        self
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

/// Cursor-based decoder matching [`Writer`].
pub struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8], WireError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|end| *end <= self.bytes.len())
            .ok_or(WireError::Truncated(self.pos))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    pub fn u8(&mut self) -> Result<u8, WireError> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32, WireError> {
        Ok(u32::from_be_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    pub fn u64(&mut self) -> Result<u64, WireError> {
        Ok(u64::from_be_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    /// Count field, bounded by the bytes left so corrupt counts cannot force huge allocations.
    pub fn count(&mut self, min_item_len: usize) -> Result<usize, WireError> {
        let n = self.u32()? as usize;
        if n.saturating_mul(min_item_len.max(1)) > self.bytes.len() - self.pos {
            return Err(WireError::Truncated(self.pos));
        }
        Ok(n)
    }

    pub fn lp(&mut self) -> Result<&'a [u8], WireError> {
        let n = self.u32()? as usize;
        self.take(n)
    }

    pub fn element<G: PrimeGroup>(&mut self, group: &G) -> Result<G::Element, WireError> {
        Ok(group.decode_element(self.take(group.element_len())?)?)
    }

    pub fn scalar<G: PrimeGroup>(&mut self, group: &G) -> Result<G::Scalar, WireError> {
        Ok(group.decode_scalar(self.take(group.scalar_len())?)?)
    }

    pub fn id(&mut self) -> Result<ContractId, WireError> {
        let raw = self.lp()?;
        let arr: [u8; 32] = raw.try_into().map_err(|_| WireError::BadId(raw.len()))?;
        Ok(ContractId(arr))
    }

    pub fn party(&mut self) -> Result<PartyId, WireError> {
        let raw = self.lp()?;
        Ok(PartyId(
            std::str::from_utf8(raw)
                .map_err(|_| WireError::BadUtf8)?
                .to_string(),
        ))
    }

    pub fn expect_tag(&mut self, tag: &str) -> Result<(), WireError> {
        let got = self.lp()?;
        if got != tag.as_bytes() {
            return Err(WireError::BadTag(String::from_utf8_lossy(got).into_owned()));
        }
        Ok(())
    }

    pub fn finish(self) -> Result<(), WireError> {
        match self.bytes.len() - self.pos {
            0 => Ok(()),
            n => Err(WireError::TrailingBytes(n)),
        }
    }
}

/// A freeze message parsed structurally, with group encodings left undecoded.
///
/// Used by the offline auditor so one malformed proof does not hide the others.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawFreeze {
    pub id: ContractId,
    pub parties: Vec<PartyId>,
    pub coin: Vec<u8>,
    /// `(commitment, proof)` encodings per bit, in transmitted order.
    pub pairs: Vec<[(Vec<u8>, Vec<u8>); 2]>,
}

impl RawFreeze {
    pub fn parse<G: PrimeGroup>(group: &G, bytes: &[u8]) -> Result<Self, WireError> {
        let el = group.element_len();
        let pl = BitProof::<G>::encoded_len(group);
        let mut r = Reader::new(bytes);
        r.expect_tag(FREEZE_TAG)?;
        let id = r.id()?;
        let n = r.count(4)?;
        let parties = (0..n).map(|_| r.party()).collect::<Result<Vec<_>, _>>()?;
        let coin = r.take(el)?.to_vec();
        let ell = r.count(2 * (el + pl))?;
        let mut pairs = Vec::with_capacity(ell);
        for _ in 0..ell {
            let mut slot = || -> Result<(Vec<u8>, Vec<u8>), WireError> {
                Ok((r.take(el)?.to_vec(), r.take(pl)?.to_vec()))
            };
            let first = slot()?;
            let second = slot()?;
            pairs.push([first, second]);
        }
        r.finish()?;
        Ok(Self {
            id,
            parties,
            coin,
            pairs,
        })
    }
}

impl<G: PrimeGroup> FreezeMessage<G> {
    pub fn ell(&self) -> usize {
        self.pairs.len()
    }

    pub fn to_bytes(&self, group: &G) -> Vec<u8> {
        let mut w = Writer::new();
        w.lp(FREEZE_TAG.as_bytes())
            .lp(&self.id.0)
            .u32(self.parties.len() as u32);
        for p in &self.parties {
            w.lp(p.0.as_bytes());
        }
        w.element(group, self.coin.element())
            .u32(self.pairs.len() as u32);
        for pair in &self.pairs {
            for cand in pair {
                w.element(group, cand.commitment.element());
                let mut proof = Vec::new();
                cand.proof.encode(group, &mut proof);
                w.raw(&proof);
            }
        }
        w.finish()
    }

    pub fn from_bytes(group: &G, bytes: &[u8]) -> Result<Self, WireError> {
        let raw = RawFreeze::parse(group, bytes)?;
        let pairs = raw
            .pairs
            .iter()
            .map(|pair| {
                let decode = |(c, p): &(Vec<u8>, Vec<u8>)| -> Result<Candidate<G>, WireError> {
                    Ok(Candidate {
                        commitment: Commitment(group.decode_element(c)?),
                        proof: BitProof::from_bytes(group, p)?,
                    })
                };
                Ok([decode(&pair[0])?, decode(&pair[1])?])
            })
            .collect::<Result<Vec<_>, WireError>>()?;
        Ok(Self {
            id: raw.id,
            parties: raw.parties,
            coin: Commitment(group.decode_element(&raw.coin)?),
            pairs,
        })
    }
}

impl<G: PrimeGroup> FinalizeMessage<G> {
    pub fn to_bytes(&self, group: &G) -> Vec<u8> {
        let ell = self.selected.first().map_or(0, Vec::len);
        let mut w = Writer::new();
        w.lp(FINALIZE_TAG.as_bytes())
            .lp(&self.id.0)
            .u32(self.selected.len() as u32)
            .u32(ell as u32);
        for row in &self.selected {
            debug_assert_eq!(row.len(), ell);
            for c in row {
                w.element(group, c.element());
            }
        }
        w.lp(&self.out);
        let mut proof = Vec::new();
        self.proof.encode(group, &mut proof);
        w.raw(&proof);
        w.finish()
    }

    pub fn from_bytes(group: &G, bytes: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::new(bytes);
        r.expect_tag(FINALIZE_TAG)?;
        let id = r.id()?;
        let n = r.u32()? as usize;
        let ell = r.u32()? as usize;
        let cells = n
            .checked_mul(ell)
            .filter(|c| c.saturating_mul(group.element_len()) <= bytes.len())
            .ok_or(WireError::Truncated(r.position()))?;
        let mut flat = Vec::with_capacity(cells);
        for _ in 0..cells {
            flat.push(Commitment(r.element(group)?));
        }
        let selected = if ell == 0 {
            vec![Vec::new(); n]
        } else {
            flat.chunks(ell).map(<[_]>::to_vec).collect()
        };
        let out = r.lp()?.to_vec();
        let proof =
            SchnorrProof::from_bytes(group, r.take(SchnorrProof::<G>::encoded_len(group))?)?;
        r.finish()?;
        Ok(Self {
            id,
            selected,
            out,
            proof,
        })
    }
}
