// Copyright (c) The psc Contributors
// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

use crate::blockchain::Rejection;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GroupError {
    #[error("group parameters are invalid")]
    InvalidParameters,
    #[error("generator is not a non-identity element of the prime-order subgroup")]
    InvalidGenerator,
    #[error("encoding is not an element of the prime-order subgroup")]
    NotInSubgroup,
    #[error("scalar encoding is not reduced modulo the group order")]
    NonCanonicalScalar,
    #[error("expected {expected} bytes, got {got}")]
    BadLength { expected: usize, got: usize },
    #[error("hash-to-group produced no usable generator after {attempts} attempts")]
    GeneratorDerivation { attempts: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CommitmentError {
    #[error("expected {expected} bit commitments, got {got}")]
    WrongBitCount { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProofError {
    #[error("bit proofs only exist for 0 or 1, got {0}")]
    NotABit(u64),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ContractError {
    #[error("length mismatch: {inputs} inputs vs {outputs} outputs")]
    LengthMismatch { inputs: usize, outputs: usize },
    #[error("aux input is {0} bytes, limit is 4096")]
    AuxTooLong(usize),
    #[error("value {value} outside [0, 2^{ell})")]
    ValueOutOfRange { value: u64, ell: u32 },
    #[error("contract '{name}' needs {expected} inputs, got {got}")]
    Arity {
        name: String,
        expected: usize,
        got: usize,
    },
    #[error("unknown contract '{0}'")]
    Unknown(String),
    #[error(
        "bit width {ell} unsupported for {parties} parties in a group of {order_bits}-bit order"
    )]
    BitWidth {
        ell: u32,
        parties: usize,
        order_bits: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WireError {
    #[error("input truncated at offset {0}")]
    Truncated(usize),
    #[error("unexpected message tag {0:?}")]
    BadTag(String),
    #[error("{0} trailing bytes after message")]
    TrailingBytes(usize),
    #[error("party identity is not valid UTF-8")]
    BadUtf8,
    #[error("contract id must be 32 bytes, got {0}")]
    BadId(usize),
    #[error("invalid group encoding: {0}")]
    Group(#[from] GroupError),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PartyError {
    #[error("contract id not among this party's identifiers")]
    UnknownContract,
    #[error("party is not a participant of the contract")]
    NotParticipant,
    #[error("freeze incomplete: {frozen} of {expected} freeze records on chain")]
    FreezeIncomplete { frozen: usize, expected: usize },
    #[error("no secret elements stored for this contract")]
    MissingSecrets,
    #[error("no pending computation for this contract")]
    NoComputation,
    #[error("MPC aborted{}", .party.map(|p| format!(" (party {p})")).unwrap_or_default())]
    Aborted { party: Option<usize> },
    #[error("MPC output failed local verification: {0}")]
    OutputRejected(Rejection),
    #[error("recovered opening does not open the output coin")]
    RecoveryMismatch,
    #[error(transparent)]
    Contract(#[from] ContractError),
}

#[derive(Debug, Error)]
pub enum TranscriptError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("transcript is empty")]
    Empty,
    #[error("unsupported group '{0}'")]
    UnsupportedGroup(String),
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Contract(#[from] ContractError),
    #[error(transparent)]
    Party(#[from] PartyError),
    #[error(transparent)]
    Transcript(#[from] TranscriptError),
}
