use std::io;

/// Errors produced by the archive, the query protocols and their transports.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("field parameter mismatch: modulus {left} vs {right}")]
    ParamsMismatch { left: u64, right: u64 },

    #[error("division by zero")]
    DivisionByZero,

    #[error("modulus {0} is not an odd prime")]
    NotPrime(u64),

    #[error("value {value} is not a canonical residue modulo {modulus}")]
    OutOfRange { value: u64, modulus: u64 },

    #[error("invalid sharing policy: {0}")]
    InvalidPolicy(String),

    #[error("degenerate interpolation basis: {0}")]
    DegenerateBasis(String),

    #[error("insufficient shares: need {needed}, got {got}")]
    InsufficientShares { needed: usize, got: usize },

    #[error("field of size {0} is too large for exhaustive enumeration")]
    FieldTooLarge(u64),

    #[error("share vectors out of alignment: {0}")]
    Alignment(String),

    #[error("invalid query chain: {0}")]
    InvalidChain(String),

    #[error("routing error: {0}")]
    Routing(String),

    #[error("invalid group parameters: {0}")]
    InvalidGroup(String),

    #[error("group element is not in the order-q subgroup")]
    NotInSubgroup,

    #[error("decode error at offset {offset}: {reason}")]
    Decode { offset: usize, reason: String },

    #[error("timed out: {0}")]
    Timeout(String),

    #[error("remote error {code}: {detail}")]
    Remote { code: u16, detail: String },

    #[error("insufficient samples: need {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("attack precondition not met: {0}")]
    AttackPrecondition(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
