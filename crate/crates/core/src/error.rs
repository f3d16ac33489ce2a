use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("modulus must be at least 2")]
    InvalidModulus,
    #[error("gcd(0, 0) is undefined")]
    UndefinedGcd,
    #[error("value is not invertible modulo the given modulus")]
    NotInvertible,
    #[error("invalid bit length {0}")]
    InvalidBitLength(u64),
    #[error("no padding offset within +/-{0} makes d^2+1 coprime to phi(n)")]
    PaddingExhausted(i64),
    #[error("content of {0} bytes exceeds the 2^32-1 byte limit")]
    Oversize(usize),
    #[error("suffix violates 1 <= x < n, x^2 != 1 mod n, gcd(x, n) = 1")]
    InvalidSuffix,
    #[error("invalid key: {0}")]
    InvalidKey(String),
    #[error("private key does not match the chain modulus")]
    KeyMismatch,
    #[error("{0} already has a child; use branch")]
    MustBranch(String),
    #[error("block {0} has no child yet; use append")]
    MustAppend(usize),
    #[error("block {0} not found")]
    NotFound(usize),
    #[error("block {0} is a leaf; rewrite it and re-append instead of redacting")]
    LeafRedaction(usize),
    #[error("block {0} is an intermediate block; its content is fixed")]
    IntermediateRedaction(usize),
    #[error("exponents are not coprime")]
    NotCoprime,
    #[error("parse error: {0}")]
    Parse(String),
    #[error("integrity error at block {block}: {reason}")]
    Integrity { block: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
