use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("modulus must be an odd prime >= 2 for this operation")]
    InvalidModulus,
    #[error("element is not invertible modulo p")]
    NotInvertible,
    #[error("operand out of domain: {0}")]
    OutOfDomain(&'static str),
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
    #[error("cannot verify generator: {0}")]
    CannotVerify(&'static str),
    #[error("polynomial moduli differ")]
    ModulusMismatch,
    #[error("division by the zero polynomial")]
    ZeroDivisor,
    #[error("equal-degree splitting failed to converge")]
    SplittingFailed,
    #[error("invalid ciphertext")]
    InvalidCiphertext,
    #[error("handshake rejected: {0}")]
    HandshakeRejected(&'static str),
    #[error("degenerate instance: a denominator vanished mod p")]
    DegenerateInstance,
    #[error("attack failed: {0}")]
    AttackFailed(&'static str),
    #[error("cipher block value out of range")]
    CorruptValue,
    #[error("corrupt cipher block at index {index}")]
    CorruptBlock { index: u64 },
    #[error("malformed padding in final block")]
    BadPadding,
    #[error("malformed data: {0}")]
    Format(&'static str),
    #[error("stream desynchronized: expected block {expected}, got {got}")]
    Desync { expected: u64, got: u64 },
    #[error("peer reported an error: {0}")]
    Peer(String),
    #[error("protocol violation: {0}")]
    Protocol(&'static str),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
