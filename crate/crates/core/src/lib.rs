// Copyright (c) The psc Contributors
// SPDX-License-Identifier: Apache-2.0

//! Private smart contracts over Pedersen-committed coins.
//!
//! Parties freeze bit-decomposed coins on a simulated blockchain, an idealized MPC
//! evaluates the contract over the committed bits, and the blockchain checks a
//! Schnorr proof of balance before releasing the output coins.

pub mod blockchain;
pub mod contract;
pub mod error;
pub mod group;
pub mod harness;
pub mod mpc;
pub mod party;
pub mod pedersen;
pub mod sigma;
pub mod transcript;
pub mod wire;

pub use group::{GroupParams, ModpGroup, PrimeGroup, Ristretto255, SharedParams};

/// The group used for real runs.
pub type Production = Ristretto255;
/// 23-element Schnorr group with a public discrete log between generators. Tests only.
pub type ToyGroup = ModpGroup<u64>;
